//! Lloyd's kmeans with kmeans++ seeding and restarts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub clusters: usize,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(clusters: usize, seed: u64) -> Self {
        KMeansConfig { clusters, max_iter: 100, restarts: 10, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// `k x d`, one center per row.
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    /// `||X - U S||_F^2`.
    pub inertia: f64,
}

/// Index of the nearest row of `centers`; ties go to the lowest index.
pub fn nearest_center(point: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter_rows().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn inertia(data: &Matrix, centers: &Matrix, assignments: &[usize]) -> f64 {
    assignments.iter().enumerate().map(|(i, &c)| sq_dist(data.row(i), centers.row(c))).sum()
}

/// Best of `restarts` runs by inertia.
pub fn kmeans(data: &Matrix, config: &KMeansConfig) -> Result<KMeansFit> {
    let k = config.clusters;
    let n = data.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {} clusters from {} samples", k, n)));
    }
    data.ensure_finite("kmeans input")?;
    let mut rng = crate::rng_for(config.seed, 0x6b6d);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..config.restarts.max(1) {
        let centers = plus_plus_seeds(data, k, &mut rng);
        let fit = lloyd(data, centers, config.max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_seeds(data: &Matrix, k: usize, rng: &mut crate::Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // all remaining points coincide with a center
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    data.select_rows(&chosen)
}

fn lloyd(data: &Matrix, mut centers: Matrix, max_iter: usize) -> KMeansFit {
    let (n, d) = data.shape();
    let k = centers.rows();
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, a) in assignments.iter_mut().enumerate() {
            let (c, _) = nearest_center(data.row(i), &centers);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(data.row(a), centers.row(assignments[a]));
                        let db = sq_dist(data.row(b), centers.row(assignments[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centers.row_mut(c).copy_from_slice(data.row(far));
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (u, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *u = s * inv;
            }
        }
    }
    for (i, a) in assignments.iter_mut().enumerate() {
        *a = nearest_center(data.row(i), &centers).0;
    }
    let inertia = inertia(data, &centers, &assignments);
    KMeansFit { centers, assignments, inertia }
}
