//! kNN graphs under missing views, their Laplacians, cluster-ordered sample
//! rearrangement and batch sub-blocks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::matrix::{sq_dist, Matrix};

/// Graph Laplacian `L = D - N` of a symmetric 0/1 adjacency, stored as
/// sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Laplacian {
    neighbors: Vec<Vec<usize>>,
}

impl Laplacian {
    /// From undirected edges; duplicates and self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Laplacian { neighbors }
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `L h` for `h` with one row per node.
    pub fn apply(&self, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for (i, list) in self.neighbors.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let deg = list.len() as f64;
            let row = out.row_mut(i);
            for (o, &x) in row.iter_mut().zip(h.row(i)) {
                *o = deg * x;
            }
            for &j in list {
                for (o, &x) in row.iter_mut().zip(h.row(j)) {
                    *o -= x;
                }
            }
        }
        out
    }

    /// `Tr(h^T L h)`, which equals half the sum of `||h_i - h_j||^2` over
    /// ordered adjacent pairs.
    pub fn quadratic_form(&self, h: &Matrix) -> f64 {
        let lh = self.apply(h);
        h.as_slice().iter().zip(lh.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.len();
        let mut l = Matrix::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            l[(i, i)] = list.len() as f64;
            for &j in list {
                l[(i, j)] = -1.0;
            }
        }
        l
    }

    /// Principal sub-block on `range` with block-local degrees.
    pub fn subblock(&self, range: Range<usize>) -> Laplacian {
        let neighbors = self.neighbors[range.clone()]
            .iter()
            .map(|list| list.iter().filter(|j| range.contains(j)).map(|&j| j - range.start).collect())
            .collect();
        Laplacian { neighbors }
    }
}

/// One Laplacian per view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    views: Vec<Laplacian>,
}

impl NeighborGraph {
    pub fn new(views: Vec<Laplacian>) -> Self {
        NeighborGraph { views }
    }

    pub fn view(&self, v: usize) -> &Laplacian {
        &self.views[v]
    }

    pub fn views(&self) -> &[Laplacian] {
        &self.views
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn edge_count(&self) -> usize {
        self.views.iter().map(Laplacian::edge_count).sum()
    }

    /// Per-view sub-Laplacians for the contiguous batch `range`.
    pub fn batch_subblock(&self, range: Range<usize>) -> Result<Vec<Laplacian>> {
        let n = self.views.first().map_or(0, Laplacian::len);
        if range.is_empty() || range.end > n {
            return Err(Error::Contract(format!("batch {:?} is empty or outside 0..{}", range, n)));
        }
        Ok(self.views.iter().map(|l| l.subblock(range.clone())).collect())
    }
}

/// Per view, connects available instances `i` and `j` when either is among
/// the other's `knn` nearest available instances (Euclidean, ties to the
/// lower index). Missing instances stay isolated.
pub fn build_knn_graph(ds: &MultiViewDataset, knn: usize) -> Result<NeighborGraph> {
    if knn == 0 {
        return Err(Error::Config("knn must be at least 1".into()));
    }
    let mut views = Vec::with_capacity(ds.n_views());
    for v in 0..ds.n_views() {
        let x = ds.view(v);
        let available: Vec<usize> = (0..ds.n()).filter(|&i| ds.mask(v)[i]).collect();
        if available.len() > 1 && knn >= available.len() {
            return Err(Error::Config(format!(
                "knn = {} but view {} has only {} available instances",
                knn,
                v,
                available.len()
            )));
        }
        let mut edges = Vec::with_capacity(available.len() * knn);
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(available.len());
        for &i in &available {
            cand.clear();
            cand.extend(available.iter().filter(|&&j| j != i).map(|&j| (sq_dist(x.row(i), x.row(j)), j)));
            let take = knn.min(cand.len());
            if take == 0 {
                continue;
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(take - 1, cmp);
            edges.extend(cand[..take].iter().map(|&(_, j)| (i, j)));
        }
        views.push(Laplacian::from_edges(ds.n(), &edges));
    }
    Ok(NeighborGraph { views })
}

/// A reordering of samples: new position `p` holds original sample `order[p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rearrangement {
    order: Vec<usize>,
    inverse: Vec<usize>,
}

impl Rearrangement {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; order.len()];
        for (p, &i) in order.iter().enumerate() {
            if i >= order.len() || inverse[i] != usize::MAX {
                return Err(Error::Contract("rearrangement is not a permutation".into()));
            }
            inverse[i] = p;
        }
        Ok(Rearrangement { order, inverse })
    }

    pub fn identity(n: usize) -> Self {
        let order: Vec<usize> = (0..n).collect();
        Rearrangement { inverse: order.clone(), order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of original sample `i` after rearrangement.
    pub fn position_of(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn apply(&self, ds: &MultiViewDataset) -> MultiViewDataset {
        ds.reordered(&self.order)
    }

    pub fn undo(&self, ds: &MultiViewDataset) -> MultiViewDataset {
        ds.reordered(&self.inverse)
    }

    /// Maps per-sample values in rearranged order back to original order.
    pub fn restore<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.inverse.iter().map(|&p| values[p].clone()).collect()
    }
}

/// Groups samples by kmeans cluster on the mean-filled, concatenated views.
///
/// Cluster ids are renumbered by first appearance in the original order, and
/// samples are stable-sorted by cluster id, so data that is already grouped
/// maps to the identity.
pub fn rearrange(ds: &MultiViewDataset, clusters: usize, seed: u64) -> Result<(MultiViewDataset, Rearrangement)> {
    let filled = ds.mean_fill()?;
    let parts: Vec<&Matrix> = filled.iter().collect();
    let stacked = Matrix::hstack(&parts)?;
    let fit = kmeans(&stacked, &KMeansConfig::new(clusters, seed))?;
    let mut renumber = vec![usize::MAX; clusters];
    let mut next = 0;
    for &c in &fit.assignments {
        if renumber[c] == usize::MAX {
            renumber[c] = next;
            next += 1;
        }
    }
    let ids: Vec<usize> = fit.assignments.iter().map(|&c| renumber[c]).collect();
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.sort_by_key(|&i| ids[i]);
    let r = Rearrangement::new(order)?;
    Ok((r.apply(ds), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn single_view(x: Matrix, mask: Vec<bool>) -> MultiViewDataset {
        let n = x.rows();
        MultiViewDataset::new(vec![x.clone(), x], vec![mask, vec![true; n]], None).unwrap()
    }

    #[test]
    fn collinear_points_connect_through_middle() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let g = build_knn_graph(&single_view(x, vec![true; 3]), 1).unwrap();
        let l = g.view(0);
        assert!(l.has_edge(0, 1));
        assert!(l.has_edge(1, 2));
        assert!(!l.has_edge(0, 2));
    }

    #[test]
    fn single_available_instance_has_no_edges() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let g = build_knn_graph(&single_view(x, vec![false, true, false]), 1).unwrap();
        assert_eq!(g.view(0).edge_count(), 0);
    }

    #[test]
    fn knn_too_large() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let err = build_knn_graph(&single_view(x, vec![true, true, false]), 2).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn missing_rows_never_get_edges_and_values_do_not_matter() {
        let mut rng = crate::rng_for(1, 2);
        let x = Matrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let mask: Vec<bool> = (0..20).map(|i| i % 3 != 0).collect();
        let g = build_knn_graph(&single_view(x.clone(), mask.clone()), 3).unwrap();
        for i in (0..20).filter(|i| i % 3 == 0) {
            assert_eq!(g.view(0).degree(i), 0);
        }
        let mut y = x;
        for i in (0..20).filter(|i| i % 3 == 0) {
            y.row_mut(i).fill(123.0);
        }
        assert_eq!(build_knn_graph(&single_view(y, mask), 3).unwrap().view(0), g.view(0));
    }

    #[test]
    fn subblock_of_full_range_is_global() {
        let l = Laplacian::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(l.subblock(0..4), l);
        let g = NeighborGraph::new(vec![l]);
        assert!(g.batch_subblock(2..2).is_err());
        assert!(g.batch_subblock(0..5).is_err());
    }

    #[test]
    fn subblock_uses_local_degrees() {
        let l = Laplacian::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = l.subblock(1..3);
        assert_eq!(s.to_dense(), Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap());
        let empty = Laplacian::from_edges(4, &[(0, 2), (1, 3)]).subblock(0..2);
        assert!(empty.to_dense().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rearrangement_round_trip() {
        let r = Rearrangement::new(vec![2, 0, 1]).unwrap();
        assert_eq!(r.restore(&['c', 'a', 'b']), vec!['a', 'b', 'c']);
        assert!(Rearrangement::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn grouped_data_rearranges_to_identity() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [10.0], [10.1], [20.0], [20.2]]).unwrap();
        let ds = MultiViewDataset::complete(vec![x], None).unwrap();
        let (_, r) = rearrange(&ds, 3, 4).unwrap();
        assert_eq!(r, Rearrangement::identity(7));
    }
}
