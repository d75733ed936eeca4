//! Self-paced kmeans fine-tuning with fixed centers.
//!
//! Each outer iteration trains the encoders for a few epochs with Adam on the
//! weighted clustering loss plus the graph penalty, then updates in closed
//! form, in this order: the assignments (nearest fixed center), the sample
//! weights (`r_i = Kloss_i <= lambda`) and the age parameter
//! (`lambda = mean + t / T * std` of the current losses). Training stops
//! once the fraction of changed assignments drops below the threshold.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::kmeans::{kmeans, nearest_center, KMeansConfig};
use crate::matrix::{sq_dist, Matrix};
use crate::optim::OptimizerState;
use crate::pretrain::{encode_batch, fuse, graph_terms, make_batches, MultiViewAutoencoder, TrainingBatch};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    /// `k x d` centers, one per row; never modified after initialization.
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    /// Self-paced selection `r`.
    pub selected: Vec<bool>,
    /// Threshold that produced `selected`.
    pub threshold: f64,
    /// Age parameter carried into the next outer iteration.
    pub lambda: f64,
    /// Completed outer iterations.
    pub t: usize,
    /// `||h*_i - u_{s_i}||^2` at the last update.
    pub kloss: Vec<f64>,
}

impl ClusterState {
    pub fn clusters(&self) -> usize {
        self.centers.rows()
    }

    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|&&r| r).count()
    }
}

/// kmeans (kmeans++ seeding, 10 restarts) on the fused codes. All samples
/// start selected and `lambda` starts at the mean loss.
pub fn init_clusters(fused: &Matrix, clusters: usize, seed: u64) -> Result<ClusterState> {
    fused.ensure_finite("fused codes")?;
    let fit = kmeans(fused, &KMeansConfig::new(clusters, seed))?;
    let kloss = cluster_losses(fused, &fit.centers, &fit.assignments);
    let lambda = update_lambda(&kloss, 0, 1)?;
    Ok(ClusterState {
        centers: fit.centers,
        selected: vec![true; fused.rows()],
        threshold: f64::INFINITY,
        assignments: fit.assignments,
        lambda,
        t: 0,
        kloss,
    })
}

/// Nearest fixed center per sample, ties to the lowest index.
pub fn assign_clusters(fused: &Matrix, centers: &Matrix) -> Vec<usize> {
    fused.iter_rows().map(|h| nearest_center(h, centers).0).collect()
}

pub fn cluster_losses(fused: &Matrix, centers: &Matrix, assignments: &[usize]) -> Vec<f64> {
    fused.iter_rows().zip(assignments).map(|(h, &c)| sq_dist(h, centers.row(c))).collect()
}

/// `r_i = 1` iff `Kloss_i <= lambda`.
pub fn update_weights(kloss: &[f64], lambda: f64) -> Vec<bool> {
    kloss.iter().map(|&l| l <= lambda).collect()
}

/// `mean(Kloss) + t * std(Kloss) / T` with the population standard deviation.
pub fn update_lambda(kloss: &[f64], t: usize, max_t: usize) -> Result<f64> {
    if kloss.is_empty() {
        return Err(Error::Contract("age parameter needs at least one loss".into()));
    }
    if max_t == 0 || t > max_t {
        return Err(Error::Contract(format!("iteration {} outside 0..={}", t, max_t)));
    }
    let n = kloss.len() as f64;
    let mean = kloss.iter().sum::<f64>() / n;
    let var = kloss.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    Ok(mean + t as f64 * libm::sqrt(var) / max_t as f64)
}

/// Fraction of samples whose assignment differs, i.e. `1 - tr(S_t^T S_{t-1}) / n`.
pub fn change_fraction(current: &[usize], previous: &[usize]) -> f64 {
    let changed = current.iter().zip(previous).filter(|(a, b)| a != b).count();
    changed as f64 / current.len().max(1) as f64
}

/// Batch fine-tuning objective
/// `1/(b k) sum_i r_i (||h*_i - U S_i||^2 - lambda) + alpha/(b l) sum_v Tr(H_v^T L_v H_v)`.
///
/// `assignments`, `selected` cover the batch only. The `-lambda r_i` part is a
/// constant leaf, so it shows up in the value but not in any gradient.
pub fn finetune_loss<'a>(
    tape: &mut Tape<'a>,
    model: &MultiViewAutoencoder,
    batch: &'a TrainingBatch,
    centers: &Matrix,
    assignments: &[usize],
    selected: &[bool],
    lambda: f64,
    alpha: f64,
) -> Result<Var> {
    let b = batch.len();
    if assignments.len() != b || selected.len() != b {
        return Err(Error::dim(format!("batch of {} with {} assignments", b, assignments.len())));
    }
    let k = centers.rows() as f64;
    let codes = encode_batch(tape, model, batch)?;
    let fused = fuse(tape, &codes, batch.masks.clone())?;
    let targets = centers.select_rows(assignments);
    let weights: Vec<f64> = selected.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
    let count: f64 = weights.iter().sum();
    let cluster = tape.masked_sq_error(fused, targets, weights)?;
    let scale = 1.0 / (b as f64 * k);
    let mut terms = vec![(cluster, scale)];
    if count > 0.0 && lambda.is_finite() {
        let offset = tape.input(Matrix::filled(1, 1, -lambda * count))?;
        terms.push((offset, scale));
    }
    terms.extend(graph_terms(tape, &codes, batch, alpha)?);
    tape.combine(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneConfig {
    pub alpha: f64,
    pub lr: f64,
    /// Outer iterations `T`.
    pub max_outer: usize,
    /// Epochs per outer iteration.
    pub max_inner: usize,
    pub batch_size: usize,
    /// Stop once fewer than this fraction of assignments change.
    pub stop_threshold: f64,
    pub seed: u64,
    /// With `false` every sample stays selected (`lambda = inf`).
    pub self_paced: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            alpha: 1e-4,
            lr: 1e-3,
            max_outer: 50,
            max_inner: 5,
            batch_size: 256,
            stop_threshold: 1e-3,
            seed: 0,
            self_paced: true,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::Config("at least one outer iteration is required".into()));
        }
        if !(self.stop_threshold > 0.0) {
            return Err(Error::Config(format!("stop threshold must be positive, got {}", self.stop_threshold)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be a non-negative number, got {}", self.alpha)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// One diagnostics record. `t = 0` describes the initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Size-weighted mean batch loss after the inner epochs, with the
    /// assignments, weights and `lambda` that were in force during them.
    pub loss: f64,
    /// Age parameter after this iteration's update.
    pub lambda: f64,
    /// Threshold used to select samples in this iteration.
    pub threshold: f64,
    pub selected: usize,
    pub change_fraction: f64,
    /// Mean of `Kloss` over all samples for this iteration's assignments.
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutput {
    pub state: ClusterState,
    pub trace: Vec<IterationRecord>,
    /// `true` when the change fraction fell below the stop threshold.
    pub converged: bool,
    /// Outer iterations in which no sample was selected and the graph term
    /// was off, so the encoders received no gradient.
    pub idle_iterations: Vec<usize>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Hook invoked after every outer iteration with the freshly updated state
/// and the fused codes it was computed from.
pub trait FinetuneObserver {
    fn after_iteration(&mut self, state: &ClusterState, fused: &Matrix);
}

impl FinetuneObserver for () {
    fn after_iteration(&mut self, _: &ClusterState, _: &Matrix) {}
}

impl<F: FnMut(&ClusterState, &Matrix)> FinetuneObserver for F {
    fn after_iteration(&mut self, state: &ClusterState, fused: &Matrix) {
        self(state, fused)
    }
}

fn epoch_loss(
    model: &MultiViewAutoencoder,
    batches: &[TrainingBatch],
    state: &ClusterState,
    alpha: f64,
) -> Result<f64> {
    let n: usize = batches.iter().map(TrainingBatch::len).sum();
    let mut total = 0.0;
    for batch in batches {
        let r = batch.range.clone();
        let mut tape = Tape::new();
        let loss = finetune_loss(
            &mut tape,
            model,
            batch,
            &state.centers,
            &state.assignments[r.clone()],
            &state.selected[r],
            state.lambda_in_force(),
            alpha,
        )?;
        total += tape.scalar(loss) * batch.len() as f64;
    }
    Ok(total / n as f64)
}

impl ClusterState {
    /// The `lambda` paired with `selected` in the loss: the one used to
    /// select, or the initial value before any selection happened.
    fn lambda_in_force(&self) -> f64 {
        if self.t == 0 {
            self.lambda
        } else {
            self.threshold
        }
    }
}

/// Runs the alternating optimization on rearranged data, starting from the
/// pre-trained `model` which is updated in place.
pub fn run_finetune(
    ds: &MultiViewDataset,
    graph: &NeighborGraph,
    model: &mut MultiViewAutoencoder,
    config: &FinetuneConfig,
    observer: &mut impl FinetuneObserver,
) -> Result<FinetuneOutput> {
    config.validate()?;
    let clusters = model.code_dim();
    let batches = make_batches(ds, graph, config.batch_size)?;
    let fused = model.fused_codes(ds)?;
    let mut state = init_clusters(&fused, clusters, config.seed)?;
    if !config.self_paced {
        state.lambda = f64::INFINITY;
    }
    let mut trace = vec![IterationRecord {
        t: 0,
        loss: epoch_loss(model, &batches, &state, config.alpha)?,
        lambda: state.lambda,
        threshold: state.threshold,
        selected: state.selected_count(),
        change_fraction: 0.0,
        distortion: mean(&state.kloss),
    }];
    let mut opt = OptimizerState::adam(config.lr);
    let mut converged = false;
    let mut idle_iterations = Vec::new();

    for t in 1..=config.max_outer {
        let context = |e: Error| match e {
            Error::Numeric(msg) => Error::Numeric(format!("fine-tuning iteration {}: {}", t, msg)),
            other => other,
        };
        if state.selected_count() == 0 && config.alpha == 0.0 {
            idle_iterations.push(t);
        }
        for _ in 0..config.max_inner {
            for batch in &batches {
                let r = batch.range.clone();
                model.params_mut().zero_grad();
                let mut tape = Tape::new();
                let loss = finetune_loss(
                    &mut tape,
                    model,
                    batch,
                    &state.centers,
                    &state.assignments[r.clone()],
                    &state.selected[r],
                    state.lambda_in_force(),
                    config.alpha,
                )
                .map_err(context)?;
                tape.backward(loss, model.params_mut()).map_err(context)?;
                opt.step(model.params_mut());
            }
        }
        let loss = epoch_loss(model, &batches, &state, config.alpha).map_err(context)?;

        let fused = model.fused_codes(ds).map_err(context)?;
        let previous = core::mem::take(&mut state.assignments);
        state.assignments = assign_clusters(&fused, &state.centers);
        state.kloss = cluster_losses(&fused, &state.centers, &state.assignments);
        state.threshold = state.lambda;
        state.selected = update_weights(&state.kloss, state.threshold);
        if config.self_paced {
            state.lambda = update_lambda(&state.kloss, t, config.max_outer)?;
        }
        state.t = t;
        let change = change_fraction(&state.assignments, &previous);
        trace.push(IterationRecord {
            t,
            loss,
            lambda: state.lambda,
            threshold: state.threshold,
            selected: state.selected_count(),
            change_fraction: change,
            distortion: mean(&state.kloss),
        });
        observer.after_iteration(&state, &fused);
        if change < config.stop_threshold {
            converged = true;
            break;
        }
    }
    Ok(FinetuneOutput { state, trace, converged, idle_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn weights_threshold_is_inclusive() {
        assert_eq!(update_weights(&[0.1, 0.5, 0.9], 0.5), vec![true, true, false]);
        assert!(update_weights(&[0.1, 0.5, 0.9], 0.9).iter().all(|&r| r));
        assert!(update_weights(&[0.1, 0.5, 0.9], 0.05).iter().all(|&r| !r));
    }

    #[test]
    fn lambda_schedule() {
        assert_eq!(update_lambda(&[2.0; 5], 3, 10).unwrap(), 2.0);
        let k = [1.0, 2.0, 3.0, 4.0];
        let sd = libm::sqrt(1.25);
        assert!((update_lambda(&k, 4, 4).unwrap() - (2.5 + sd)).abs() < 1e-15);
        assert!((update_lambda(&k, 2, 4).unwrap() - (2.5 + 0.5 * sd)).abs() < 1e-15);
        assert!(matches!(update_lambda(&[], 1, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn assignment_ties_go_low() {
        let centers = Matrix::from_rows(&[[-1.0, 0.0], [0.0, 10.0], [1.0, 0.0]]).unwrap();
        let fused = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.2, 9.0]]).unwrap();
        assert_eq!(assign_clusters(&fused, &centers), vec![0, 2, 1]);
    }

    #[test]
    fn change_fraction_counts_moves() {
        assert_eq!(change_fraction(&[0, 1, 2, 2], &[0, 1, 1, 0]), 0.5);
        assert_eq!(change_fraction(&[3, 3], &[3, 3]), 0.0);
    }

    #[test]
    fn init_with_n_equal_k() {
        let fused = Matrix::from_rows(&[[0.0, 1.0], [4.0, 4.0], [-2.0, 0.5]]).unwrap();
        let state = init_clusters(&fused, 3, 2).unwrap();
        assert!(state.kloss.iter().all(|&l| l == 0.0));
        assert_eq!(state.selected_count(), 3);
        assert!(init_clusters(&fused, 4, 0).is_err());
    }

    #[test]
    fn init_is_a_local_optimum() {
        let mut rng = crate::rng_for(21, 0);
        let fused = Matrix::from_fn(12, 2, |_, _| rng.random_range(-1.0..1.0));
        let state = init_clusters(&fused, 3, 5).unwrap();
        let objective = |a: &[usize]| -> f64 {
            // best centers for a fixed partition are the cluster means
            (0..3)
                .map(|c| {
                    let members: Vec<usize> = (0..12).filter(|&i| a[i] == c).collect();
                    if members.is_empty() {
                        return 0.0;
                    }
                    let mean: Vec<f64> = (0..2)
                        .map(|j| members.iter().map(|&i| fused[(i, j)]).sum::<f64>() / members.len() as f64)
                        .collect();
                    members.iter().map(|&i| sq_dist(fused.row(i), &mean)).sum::<f64>()
                })
                .sum()
        };
        let base = objective(&state.assignments);
        assert!((base - state.kloss.iter().sum::<f64>()).abs() < 1e-12);
        for i in 0..12 {
            for c in 0..3 {
                let mut moved = state.assignments.clone();
                moved[i] = c;
                assert!(objective(&moved) >= base - 1e-12);
            }
        }
    }
}
