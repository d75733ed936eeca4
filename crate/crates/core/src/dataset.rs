//! Incomplete multi-view datasets, missing-view protocols and fills.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `n` samples seen through `l` views. View `v` is an `n x m_v` matrix whose
/// rows are NaN wherever `masks[v][i]` is false.
///
/// Equality compares masks, labels and the available entries only.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    masks: Vec<Vec<bool>>,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    /// Validates and normalizes: missing rows are overwritten with NaN, and
    /// every available entry must be finite.
    pub fn new(mut views: Vec<Matrix>, masks: Vec<Vec<bool>>, labels: Option<Vec<usize>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Data("a dataset needs at least one view".into()));
        }
        if masks.len() != views.len() {
            return Err(Error::Data(format!("{} masks for {} views", masks.len(), views.len())));
        }
        let n = views[0].rows();
        for (v, (x, m)) in views.iter_mut().zip(&masks).enumerate() {
            if x.rows() != n {
                return Err(Error::Data(format!("view {} has {} samples, view 0 has {}", v, x.rows(), n)));
            }
            if m.len() != n {
                return Err(Error::Data(format!("mask of view {} has {} entries for {} samples", v, m.len(), n)));
            }
            for (i, &avail) in m.iter().enumerate() {
                let row = x.row_mut(i);
                if avail {
                    if let Some(j) = row.iter().position(|val| !val.is_finite()) {
                        return Err(Error::Data(format!(
                            "view {} sample {} feature {} is not finite but the sample is marked available",
                            v, i, j
                        )));
                    }
                } else {
                    row.fill(f64::NAN);
                }
            }
        }
        for i in 0..n {
            if !masks.iter().any(|m| m[i]) {
                return Err(Error::Data(format!("sample {} has no available view", i)));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Data(format!("{} labels for {} samples", l.len(), n)));
            }
        }
        Ok(MultiViewDataset { views, masks, labels })
    }

    /// A dataset with every view available.
    pub fn complete(views: Vec<Matrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = views.first().map_or(0, |x| x.rows());
        let masks = vec![vec![true; n]; views.len()];
        Self::new(views, masks, labels)
    }

    pub fn n(&self) -> usize {
        self.views[0].rows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn mask(&self, v: usize) -> &[bool] {
        &self.masks[v]
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    /// Mask of view `v` as 0/1 weights.
    pub fn mask_weights(&self, v: usize) -> Vec<f64> {
        self.masks[v].iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn available_count(&self, v: usize) -> usize {
        self.masks[v].iter().filter(|&&a| a).count()
    }

    pub fn is_complete(&self) -> bool {
        self.masks.iter().all(|m| m.iter().all(|&a| a))
    }

    pub fn with_labels(mut self, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n() {
                return Err(Error::Data(format!("{} labels for {} samples", l.len(), self.n())));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Applies a missing-view protocol to a complete dataset.
    pub fn make_incomplete(&self, spec: &MaskSpec) -> Result<Self> {
        if !self.is_complete() {
            return Err(Error::Spec("missing views can only be generated from a complete dataset".into()));
        }
        let masks = spec.generate(self.n(), self.n_views())?;
        Self::new(self.views.clone(), masks, self.labels.clone())
    }

    /// Dense copies of the views with missing rows replaced by the view's
    /// mean over available rows.
    pub fn mean_fill(&self) -> Result<Vec<Matrix>> {
        self.views
            .iter()
            .zip(&self.masks)
            .enumerate()
            .map(|(v, (x, m))| {
                let mean = available_mean(x, m)
                    .ok_or_else(|| Error::Data(format!("view {} has no available instance", v)))?;
                let mut out = x.clone();
                for (i, &avail) in m.iter().enumerate() {
                    if !avail {
                        out.row_mut(i).copy_from_slice(&mean);
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// Dense copies of the views with missing rows set to zero.
    pub fn zero_fill(&self) -> Vec<Matrix> {
        self.views
            .iter()
            .zip(&self.masks)
            .map(|(x, m)| {
                let mut out = x.clone();
                for (i, &avail) in m.iter().enumerate() {
                    if !avail {
                        out.row_mut(i).fill(0.0);
                    }
                }
                out
            })
            .collect()
    }

    /// Per-view, per-feature zero mean and unit variance over available rows.
    /// Constant features are only centered.
    pub fn standardized(&self) -> Self {
        let views = self
            .views
            .iter()
            .zip(&self.masks)
            .map(|(x, m)| {
                let count = m.iter().filter(|&&a| a).count();
                let mut out = x.clone();
                if count == 0 {
                    return out;
                }
                for j in 0..x.cols() {
                    let mean = m.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| x[(i, j)]).sum::<f64>()
                        / count as f64;
                    let var = m
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a)
                        .map(|(i, _)| (x[(i, j)] - mean) * (x[(i, j)] - mean))
                        .sum::<f64>()
                        / count as f64;
                    let sd = libm::sqrt(var);
                    let scale = if sd > 1e-12 { 1.0 / sd } else { 1.0 };
                    for (i, &a) in m.iter().enumerate() {
                        if a {
                            out[(i, j)] = (x[(i, j)] - mean) * scale;
                        }
                    }
                }
                out
            })
            .collect();
        MultiViewDataset { views, masks: self.masks.clone(), labels: self.labels.clone() }
    }

    /// Reorders samples so that new sample `i` is old sample `order[i]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        MultiViewDataset {
            views: self.views.iter().map(|x| x.select_rows(order)).collect(),
            masks: self.masks.iter().map(|m| order.iter().map(|&i| m[i]).collect()).collect(),
            labels: self.labels.as_ref().map(|l| order.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Samples `range` as a new dataset (used for batching).
    pub fn batch(&self, range: core::ops::Range<usize>) -> Self {
        MultiViewDataset {
            views: self.views.iter().map(|x| x.row_range(range.clone())).collect(),
            masks: self.masks.iter().map(|m| m[range.clone()].to_vec()).collect(),
            labels: self.labels.as_ref().map(|l| l[range.clone()].to_vec()),
        }
    }
}

impl PartialEq for MultiViewDataset {
    fn eq(&self, other: &Self) -> bool {
        self.masks == other.masks
            && self.labels == other.labels
            && self.views.len() == other.views.len()
            && self.views.iter().zip(&other.views).zip(&self.masks).all(|((a, b), m)| {
                a.shape() == b.shape() && m.iter().enumerate().all(|(i, &avail)| !avail || a.row(i) == b.row(i))
            })
    }
}

fn available_mean(x: &Matrix, mask: &[bool]) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; x.cols()];
    let mut count = 0usize;
    for (i, &avail) in mask.iter().enumerate() {
        if avail {
            count += 1;
            for (s, &val) in sum.iter_mut().zip(x.row(i)) {
                *s += val;
            }
        }
    }
    if count == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    Some(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Remove `floor(p n)` instances from every view, keeping at least one
    /// view per sample.
    PerViewRemoval,
    /// Two views only: `floor(p n)` samples keep both views, the rest are
    /// split between view-1-only and view-2-only (view 1 takes the odd one).
    PairedSubset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub mode: MaskMode,
    pub rate: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn new(mode: MaskMode, rate: f64, seed: u64) -> Self {
        MaskSpec { mode, rate, seed }
    }

    /// Availability masks (`[view][sample]`) for `n` samples and `l` views.
    pub fn generate(&self, n: usize, l: usize) -> Result<Vec<Vec<bool>>> {
        if !(self.rate >= 0.0 && self.rate < 1.0) {
            return Err(Error::Spec(format!("rate {} is outside [0, 1)", self.rate)));
        }
        let count = libm::floor(self.rate * n as f64) as usize;
        let mut rng = crate::rng_for(self.seed, 0x6d61_736b);
        match self.mode {
            MaskMode::PerViewRemoval => per_view_removal(n, l, count, &mut rng),
            MaskMode::PairedSubset => {
                if l != 2 {
                    return Err(Error::Spec(format!("paired-subset needs exactly 2 views, got {}", l)));
                }
                Ok(paired_subset(n, count, &mut rng))
            }
        }
    }
}

fn per_view_removal(n: usize, l: usize, removed: usize, rng: &mut crate::Rng) -> Result<Vec<Vec<bool>>> {
    // each sample can lose at most l - 1 views
    if removed > 0 && removed * l > n * (l - 1) {
        return Err(Error::Spec(format!(
            "removing {} of {} instances from each of {} views leaves some sample without a view",
            removed, n, l
        )));
    }
    let mut masks = vec![vec![true; n]; l];
    let mut order: Vec<usize> = (0..n).collect();
    for mask in masks.iter_mut() {
        order.shuffle(rng);
        for &i in &order[..removed] {
            mask[i] = false;
        }
    }
    let available = |masks: &[Vec<bool>], i: usize| masks.iter().filter(|m| m[i]).count();
    // Swap each orphaned sample back into a random view in exchange for a
    // sample that keeps another view. Per-view counts stay exact.
    loop {
        let orphans: Vec<usize> = (0..n).filter(|&i| available(&masks, i) == 0).collect();
        if orphans.is_empty() {
            break;
        }
        for i in orphans {
            let options: Vec<(usize, Vec<usize>)> = (0..l)
                .map(|v| {
                    let donors = (0..n).filter(|&j| masks[v][j] && available(&masks, j) >= 2).collect();
                    (v, donors)
                })
                .filter(|(_, d): &(usize, Vec<usize>)| !d.is_empty())
                .collect();
            let (v, donors) = &options[rng.random_range(0..options.len())];
            let j = donors[rng.random_range(0..donors.len())];
            masks[*v][j] = false;
            masks[*v][i] = true;
        }
    }
    Ok(masks)
}

fn paired_subset(n: usize, paired: usize, rng: &mut crate::Rng) -> Vec<Vec<bool>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let rest = n - paired;
    let first_only = rest - rest / 2;
    let mut masks = vec![vec![true; n]; 2];
    for &i in &order[paired..paired + first_only] {
        masks[1][i] = false;
    }
    for &i in &order[paired + first_only..] {
        masks[0][i] = false;
    }
    masks
}

/// Parameters for [`make_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub n: usize,
    /// Feature count per view; its length is the number of views.
    pub dims: Vec<usize>,
    /// Distance scale between cluster centers in latent units.
    pub separation: f64,
    pub seed: u64,
}

/// Gaussian blobs in a `k`-dimensional latent space, seen through one random
/// linear map per view plus isotropic view noise. Cluster `c` is centered at
/// `separation * e_c`, so all centers are `separation * sqrt(2)` apart.
/// Clusters are balanced up to the remainder and samples are shuffled.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    let k = spec.clusters;
    if k == 0 || spec.n < k {
        return Err(Error::Config(format!("need 1 <= clusters <= n, got k = {} n = {}", k, spec.n)));
    }
    if spec.dims.is_empty() || spec.dims.contains(&0) {
        return Err(Error::Config("every view needs at least one feature".into()));
    }
    let mut rng = crate::rng_for(spec.seed, 0x7379_6e74);
    let mut labels: Vec<usize> = (0..spec.n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);

    let latent = Matrix::from_fn(spec.n, k, |i, j| {
        let center = if labels[i] == j { spec.separation } else { 0.0 };
        center + rng.sample::<f64, _>(StandardNormal)
    });
    let view_noise = 0.3;
    let mut views = Vec::with_capacity(spec.dims.len());
    for &m in &spec.dims {
        let scale = 1.0 / libm::sqrt(k as f64);
        let map = Matrix::from_fn(k, m, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let mut x = latent.matmul(&map)?;
        for v in x.as_mut_slice() {
            *v += view_noise * rng.sample::<f64, _>(StandardNormal);
        }
        views.push(x);
    }
    MultiViewDataset::complete(views, Some(labels))
}
