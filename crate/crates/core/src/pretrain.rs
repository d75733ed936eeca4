//! View-specific autoencoders with a weighted fusion layer, and the
//! graph-regularized masked reconstruction pre-training.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{Laplacian, NeighborGraph};
use crate::matrix::Matrix;
use crate::optim::OptimizerState;

pub const DEFAULT_HIDDEN_WIDTH: usize = 1500;

/// What each view's decoder reconstructs from during pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// Every decoder reads the fused code `H*`, so an available view also has
    /// to explain the others and the views are pulled onto one code.
    #[default]
    Fused,
    /// Each decoder reads only its own view's code.
    PerView,
}

/// Layer widths for one view: encoder `[m, h, h, hidden, k]`, decoder the
/// mirror image, with `h = max(1, floor(0.8 m))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewArchitecture {
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
}

impl ViewArchitecture {
    pub fn new(input_dim: usize, code_dim: usize, hidden_width: usize) -> Self {
        let reduced = ((input_dim as f64 * 0.8) as usize).max(1);
        let encoder = alloc::vec![input_dim, reduced, reduced, hidden_width, code_dim];
        let decoder = encoder.iter().rev().copied().collect();
        ViewArchitecture { encoder, decoder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct ViewNetwork {
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
}

/// Encoder and decoder stacks for every view, sharing one parameter store.
///
/// Parameters are laid out view by view: the encoder's `(weight, bias)`
/// pairs from input to code, then the decoder's from code to output. Weights
/// are `fan_in x fan_out`, biases `1 x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewAutoencoder {
    params: ParamStore,
    views: Vec<ViewNetwork>,
    dims: Vec<usize>,
    code_dim: usize,
    hidden_width: usize,
}

impl MultiViewAutoencoder {
    /// Weights uniform in `[-sqrt(3/fan_in), sqrt(3/fan_in)]` (unit-variance
    /// preserving for linear layers), biases zero.
    pub fn new(dims: &[usize], code_dim: usize, hidden_width: usize, seed: u64) -> Result<Self> {
        let mut rng = crate::rng_for(seed, 0x6e6574);
        Self::build(dims, code_dim, hidden_width, |rows, cols, is_bias| {
            if is_bias {
                return Matrix::zeros(rows, cols);
            }
            let bound = libm::sqrt(3.0 / rows as f64);
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
        })
    }

    /// Rebuilds a network from its parameter matrices in layout order.
    pub fn from_parameters(dims: &[usize], code_dim: usize, hidden_width: usize, values: Vec<Matrix>) -> Result<Self> {
        let expected = dims.len() * 16;
        if values.len() != expected {
            return Err(Error::dim(format!("{} parameter matrices, expected {}", values.len(), expected)));
        }
        let mut it = values.into_iter();
        let mut shape_error = None;
        let net = Self::build(dims, code_dim, hidden_width, |rows, cols, _| {
            let m = it.next().expect("count checked");
            if m.shape() != (rows, cols) && shape_error.is_none() {
                shape_error = Some(format!("parameter is {}x{}, expected {}x{}", m.rows(), m.cols(), rows, cols));
            }
            m
        })?;
        match shape_error {
            Some(msg) => Err(Error::Dimension(msg)),
            None => Ok(net),
        }
    }

    fn build(
        dims: &[usize],
        code_dim: usize,
        hidden_width: usize,
        mut init: impl FnMut(usize, usize, bool) -> Matrix,
    ) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config("every view needs at least one feature".into()));
        }
        if code_dim == 0 || hidden_width == 0 {
            return Err(Error::Config("code and hidden widths must be positive".into()));
        }
        let mut params = ParamStore::new();
        let mut views = Vec::with_capacity(dims.len());
        for &m in dims {
            let arch = ViewArchitecture::new(m, code_dim, hidden_width);
            let mut stack = |widths: &[usize], params: &mut ParamStore| -> Vec<Layer> {
                widths
                    .windows(2)
                    .map(|w| {
                        let weight = params.add(init(w[0], w[1], false));
                        let bias = params.add(init(1, w[1], true));
                        Layer { weight, bias }
                    })
                    .collect()
            };
            let encoder = stack(&arch.encoder, &mut params);
            let decoder = stack(&arch.decoder, &mut params);
            views.push(ViewNetwork { encoder, decoder });
        }
        Ok(MultiViewAutoencoder { params, views, dims: dims.to_vec(), code_dim, hidden_width })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_views(&self) -> usize {
        self.dims.len()
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_width
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Parameter ids of view `v`'s encoder.
    pub fn encoder_params(&self, v: usize) -> Vec<ParamId> {
        self.views[v].encoder.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    /// Parameter ids of view `v`'s decoder.
    pub fn decoder_params(&self, v: usize) -> Vec<ParamId> {
        self.views[v].decoder.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    fn run_stack<'a>(&self, tape: &mut Tape<'a>, layers: &[Layer], mut x: Var) -> Result<Var> {
        for (i, layer) in layers.iter().enumerate() {
            let w = tape.param(&self.params, layer.weight)?;
            let b = tape.param(&self.params, layer.bias)?;
            x = tape.affine(x, w, b)?;
            if i + 1 < layers.len() {
                x = tape.relu(x)?;
            }
        }
        Ok(x)
    }

    /// Codes `batch x k` for zero-filled inputs `x` (`batch x m_v`).
    pub fn encode_view<'a>(&self, tape: &mut Tape<'a>, v: usize, x: Var) -> Result<Var> {
        let m = self.dims[v];
        if tape.value(x).cols() != m {
            return Err(Error::dim(format!("view {} input has {} features, expected {}", v, tape.value(x).cols(), m)));
        }
        self.run_stack(tape, &self.views[v].encoder, x)
    }

    pub fn decode_view<'a>(&self, tape: &mut Tape<'a>, v: usize, h: Var) -> Result<Var> {
        self.run_stack(tape, &self.views[v].decoder, h)
    }

    /// Codes for a whole view without recording gradients.
    pub fn encode_values(&self, v: usize, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let input = tape.input(x.clone())?;
        let h = self.encode_view(&mut tape, v, input)?;
        Ok(tape.value(h).clone())
    }

    /// Fused codes `n x k` for every sample of `ds`.
    pub fn fused_codes(&self, ds: &MultiViewDataset) -> Result<Matrix> {
        let inputs = ds.zero_fill();
        let mut tape = Tape::new();
        let mut codes = Vec::with_capacity(inputs.len());
        for (v, x) in inputs.into_iter().enumerate() {
            let h = self.encode_values(v, &x)?;
            codes.push(tape.input(h)?);
        }
        let weights = (0..ds.n_views()).map(|v| ds.mask_weights(v)).collect();
        let fused = fuse(&mut tape, &codes, weights)?;
        Ok(tape.value(fused).clone())
    }
}

/// Weighted fusion: the mean of each sample's codes over its available views.
pub fn fuse<'a>(tape: &mut Tape<'a>, codes: &[Var], masks: Vec<Vec<f64>>) -> Result<Var> {
    tape.mean_fuse(codes, masks)
}

/// A contiguous slice of the (rearranged) data with its graph sub-blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub range: Range<usize>,
    /// Zero-filled inputs per view.
    pub inputs: Vec<Matrix>,
    /// 0/1 availability per view.
    pub masks: Vec<Vec<f64>>,
    pub laplacians: Vec<Laplacian>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Splits `0..n` into consecutive batches; the last one may be short.
pub fn make_batches(ds: &MultiViewDataset, graph: &NeighborGraph, batch_size: usize) -> Result<Vec<TrainingBatch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if graph.n_views() != ds.n_views() {
        return Err(Error::dim(format!("graph has {} views, dataset {}", graph.n_views(), ds.n_views())));
    }
    let filled = ds.zero_fill();
    let n = ds.n();
    let mut batches = Vec::with_capacity(n.div_ceil(batch_size));
    let mut start = 0;
    while start < n {
        let range = start..(start + batch_size).min(n);
        batches.push(TrainingBatch {
            inputs: filled.iter().map(|x| x.row_range(range.clone())).collect(),
            masks: (0..ds.n_views()).map(|v| ds.mask_weights(v)[range.clone()].to_vec()).collect(),
            laplacians: graph.batch_subblock(range.clone())?,
            range,
        });
        start += batch_size;
    }
    Ok(batches)
}

/// Per-view codes for a batch.
pub fn encode_batch<'a>(tape: &mut Tape<'a>, model: &MultiViewAutoencoder, batch: &TrainingBatch) -> Result<Vec<Var>> {
    (0..model.n_views())
        .map(|v| {
            let x = tape.input(batch.inputs[v].clone())?;
            model.encode_view(tape, v, x)
        })
        .collect()
}

/// `alpha / (b l) * sum_v Tr(H_v^T L_v H_v)` as terms for [`Tape::combine`].
pub(crate) fn graph_terms<'a>(tape: &mut Tape<'a>, codes: &[Var], batch: &'a TrainingBatch, alpha: f64) -> Result<Vec<(Var, f64)>> {
    let scale = alpha / (batch.len() * codes.len()) as f64;
    codes
        .iter()
        .zip(&batch.laplacians)
        .map(|(&h, lap)| Ok((tape.laplacian_trace(h, lap)?, scale)))
        .collect()
}

/// Batch pre-training objective:
/// `sum_v ||(Y_v - Ybar_v) W_v||_F^2 / (m_v b) + alpha / (b l) sum_v Tr(H_v^T L_v H_v)`
/// with `Ybar_v` decoded from the fused code or from the view's own code.
pub fn pretrain_loss<'a>(
    tape: &mut Tape<'a>,
    model: &MultiViewAutoencoder,
    batch: &'a TrainingBatch,
    alpha: f64,
    reconstruction: Reconstruction,
) -> Result<Var> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be a non-negative number, got {}", alpha)));
    }
    let b = batch.len() as f64;
    let codes = encode_batch(tape, model, batch)?;
    let fused = match reconstruction {
        Reconstruction::Fused => Some(fuse(tape, &codes, batch.masks.clone())?),
        Reconstruction::PerView => None,
    };
    let mut terms = Vec::with_capacity(2 * codes.len());
    for (v, &h) in codes.iter().enumerate() {
        let recon = model.decode_view(tape, v, fused.unwrap_or(h))?;
        let err = tape.masked_sq_error(recon, batch.inputs[v].clone(), batch.masks[v].clone())?;
        terms.push((err, 1.0 / (model.dims[v] as f64 * b)));
    }
    terms.extend(graph_terms(tape, &codes, batch, alpha)?);
    tape.combine(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_width: usize,
    pub reconstruction: Reconstruction,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            alpha: 1e-4,
            lr: 1e-3,
            epochs: 200,
            batch_size: 8,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            reconstruction: Reconstruction::Fused,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
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

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutput {
    pub model: MultiViewAutoencoder,
    /// Fused codes `n x k` in the order of the training data.
    pub fused: Matrix,
    /// Size-weighted mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// SGD over consecutive batches of the (already rearranged) data.
pub fn run_pretrain(ds: &MultiViewDataset, graph: &NeighborGraph, clusters: usize, config: &PretrainConfig) -> Result<PretrainOutput> {
    config.validate()?;
    let mut model = MultiViewAutoencoder::new(&ds.dims(), clusters, config.hidden_width, config.seed)?;
    let batches = make_batches(ds, graph, config.batch_size)?;
    let mut opt = OptimizerState::sgd(config.lr);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let context = |e: Error| match e {
                Error::Numeric(msg) => Error::Numeric(format!("pre-training epoch {} batch {}: {}", epoch, bi, msg)),
                other => other,
            };
            model.params.zero_grad();
            let mut tape = Tape::new();
            let loss = pretrain_loss(&mut tape, &model, batch, config.alpha, config.reconstruction).map_err(context)?;
            total += tape.scalar(loss) * batch.len() as f64;
            tape.backward(loss, &mut model.params).map_err(context)?;
            opt.step(&mut model.params);
        }
        epoch_losses.push(total / ds.n() as f64);
    }
    let fused = model.fused_codes(ds)?;
    Ok(PretrainOutput { model, fused, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_knn_graph;
    use alloc::vec;

    fn tiny(seed: u64) -> (MultiViewDataset, NeighborGraph) {
        let mut rng = crate::rng_for(seed, 9);
        let views = vec![
            Matrix::from_fn(8, 5, |_, _| rng.random_range(-1.0..1.0)),
            Matrix::from_fn(8, 4, |_, _| rng.random_range(-1.0..1.0)),
        ];
        let masks = vec![
            vec![true, true, false, true, true, true, false, true],
            vec![true, false, true, true, false, true, true, true],
        ];
        let ds = MultiViewDataset::new(views, masks, None).unwrap();
        let g = build_knn_graph(&ds, 2).unwrap();
        (ds, g)
    }

    #[test]
    fn architecture_widths() {
        let a = ViewArchitecture::new(76, 10, 1500);
        assert_eq!(a.encoder, vec![76, 60, 60, 1500, 10]);
        assert_eq!(a.decoder, vec![10, 1500, 60, 60, 76]);
        assert_eq!(ViewArchitecture::new(1, 2, 7).encoder, vec![1, 1, 1, 7, 2]);
    }

    #[test]
    fn encode_shapes_and_determinism() {
        let model = MultiViewAutoencoder::new(&[5, 4], 3, 16, 1).unwrap();
        let x = Matrix::from_fn(6, 5, |i, j| if i == 2 || i == 4 { 0.0 } else { (i + j) as f64 * 0.1 });
        let h = model.encode_values(0, &x).unwrap();
        assert_eq!(h.shape(), (6, 3));
        assert_eq!(h.row(2), h.row(4));
        let zero = model.encode_values(0, &Matrix::zeros(1, 5)).unwrap();
        assert_eq!(zero.row(0), h.row(2));
        assert!(model.encode_values(0, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn fusion_cases() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap()).unwrap();
        let b = tape.input(Matrix::from_rows(&[[-1.0, -2.0], [9.0, 9.0], [1.5, 2.5]]).unwrap()).unwrap();
        let c = tape.input(Matrix::from_rows(&[[7.0, 7.0], [1.0, 1.0], [4.0, -3.0]]).unwrap()).unwrap();
        let masks = vec![vec![1.0, 1.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let f = fuse(&mut tape, &[a, b, c], masks).unwrap();
        let out = tape.value(f);
        // codes c and -c cancel
        assert_eq!(out.row(0), &[0.0, 0.0]);
        // one available view passes through
        assert_eq!(out.row(1), &[3.0, -1.0]);
        // mean of the two available codes
        assert_eq!(out.row(2), &[(0.5 + 4.0) / 2.0, (0.5 - 3.0) / 2.0]);
    }

    #[test]
    fn fused_codes_ignore_masked_content() {
        let (ds, _) = tiny(4);
        let model = MultiViewAutoencoder::new(&ds.dims(), 2, 8, 3).unwrap();
        let a = model.fused_codes(&ds).unwrap();
        let mut views = ds.views().to_vec();
        views[0].row_mut(2).fill(42.0);
        let other = MultiViewDataset::new(views, ds.masks().to_vec(), None).unwrap();
        assert_eq!(model.fused_codes(&other).unwrap(), a);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let (ds, g) = tiny(1);
        let model = MultiViewAutoencoder::new(&ds.dims(), 2, 8, 0).unwrap();
        let batches = make_batches(&ds, &g, 8).unwrap();
        let mut tape = Tape::new();
        assert!(matches!(pretrain_loss(&mut tape, &model, &batches[0], -1.0, Reconstruction::Fused), Err(Error::Config(_))));
    }

    #[test]
    fn last_partial_batch_is_kept() {
        let (ds, g) = tiny(1);
        let batches = make_batches(&ds, &g, 3).unwrap();
        let sizes: Vec<usize> = batches.iter().map(TrainingBatch::len).collect();
        assert_eq!(sizes, vec![3, 3, 2]);
    }

    #[test]
    fn fully_missing_view_in_batch_has_no_reconstruction_term() {
        let (ds, g) = tiny(2);
        let model = MultiViewAutoencoder::new(&ds.dims(), 2, 8, 0).unwrap();
        // rows 2 of view 0 and 1, 4 of view 1 are missing; batch [4..5) lacks view 1
        let batch = make_batches(&ds, &g, 1).unwrap().swap_remove(4);
        assert_eq!(batch.masks[1], vec![0.0]);
        let mut tape = Tape::new();
        let h = tape.input(batch.inputs[1].clone()).unwrap();
        let code = model.encode_view(&mut tape, 1, h).unwrap();
        let recon = model.decode_view(&mut tape, 1, code).unwrap();
        let err = tape.masked_sq_error(recon, batch.inputs[1].clone(), batch.masks[1].clone()).unwrap();
        assert_eq!(tape.scalar(err), 0.0);
    }

    #[test]
    fn zero_epochs_is_seeded() {
        let (ds, g) = tiny(3);
        let cfg = PretrainConfig { epochs: 0, hidden_width: 8, batch_size: 4, ..Default::default() };
        let a = run_pretrain(&ds, &g, 2, &cfg).unwrap();
        let b = run_pretrain(&ds, &g, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let fresh = MultiViewAutoencoder::new(&ds.dims(), 2, 8, cfg.seed).unwrap();
        assert_eq!(a.fused, fresh.fused_codes(&ds).unwrap());
    }

    #[test]
    fn parameters_round_trip_through_layout() {
        let model = MultiViewAutoencoder::new(&[3, 5], 2, 6, 8).unwrap();
        let again =
            MultiViewAutoencoder::from_parameters(&[3, 5], 2, 6, model.params().values().to_vec()).unwrap();
        assert_eq!(again, model);
        let mut bad = model.params().values().to_vec();
        bad[0] = Matrix::zeros(1, 1);
        assert!(MultiViewAutoencoder::from_parameters(&[3, 5], 2, 6, bad).is_err());
    }
}
