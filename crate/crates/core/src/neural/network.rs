use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Padding, QNetworkConfig, ACTIONS, INPUT_CHANNELS, KERNEL};
use super::{NeuralError, Scalar};

const TAPS: usize = KERNEL * KERNEL;

/// Dense array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NeuralError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NeuralError::ShapeMismatch { expected: shape, got: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `w·|y − Q|`, subgradient 0 at the kink.
    #[default]
    L1,
    /// Quadratic within `delta` of the target, linear outside.
    SmoothL1 { delta: f64 },
}

/// Batch-mean weighted loss on the chosen actions and its gradient with
/// respect to the `B×3` Q output.
pub fn weighted_l1_grad<T: Scalar>(
    q: &[T],
    actions: &[usize],
    targets: &[T],
    weights: &[T],
    kind: LossKind,
) -> (f64, Vec<T>) {
    let b = actions.len();
    let mut grad = vec![T::zero(); q.len()];
    let mut loss = 0.0;
    let scale = 1.0 / b.max(1) as f64;
    for j in 0..b {
        let k = j * ACTIONS + actions[j];
        let diff = q[k].as_f64() - targets[j].as_f64();
        let w = weights[j].as_f64();
        let (l, g) = match kind {
            LossKind::L1 => (diff.abs(), if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 }),
            LossKind::SmoothL1 { delta } => {
                if diff.abs() < delta {
                    (0.5 * diff * diff / delta, diff / delta)
                } else {
                    (diff.abs() - 0.5 * delta, diff.signum())
                }
            }
        };
        loss += w * l * scale;
        grad[k] = T::from_f64(w * g * scale);
    }
    (loss, grad)
}

#[derive(Debug, Clone)]
struct ConvLayout {
    in_c: usize,
    out_c: usize,
    in_side: usize,
    out_side: usize,
    w_off: usize,
    b_off: usize,
    /// Source spatial index per (tap, output position), `-1` for zero padding.
    gather: Vec<i32>,
}

#[derive(Debug, Clone)]
struct DenseLayout {
    inputs: usize,
    w_off: usize,
    b_off: usize,
}

fn gather_map(in_side: usize, padding: Padding) -> (usize, Vec<i32>) {
    let out_side = if padding == Padding::Valid { in_side - (KERNEL - 1) } else { in_side };
    let n_out = out_side * out_side;
    let mut map = vec![-1i32; TAPS * n_out];
    for ky in 0..KERNEL {
        for kx in 0..KERNEL {
            let tap = ky * KERNEL + kx;
            for y in 0..out_side {
                for x in 0..out_side {
                    let src = match padding {
                        Padding::Valid => Some((y + ky, x + kx)),
                        Padding::Periodic => {
                            Some(((y + in_side + ky - 1) % in_side, (x + in_side + kx - 1) % in_side))
                        }
                        Padding::Zero => {
                            let (sy, sx) = (y as isize + ky as isize - 1, x as isize + kx as isize - 1);
                            let n = in_side as isize;
                            ((0..n).contains(&sy) && (0..n).contains(&sx)).then_some((sy as usize, sx as usize))
                        }
                    };
                    if let Some((sy, sx)) = src {
                        map[tap * n_out + y * out_side + x] = (sy * in_side + sx) as i32;
                    }
                }
            }
        }
    }
    (out_side, map)
}

/// Activations saved by [`QNetwork::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch: usize,
    cols: Vec<Vec<T>>,
    acts: Vec<Vec<T>>,
    dense_in: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    config: QNetworkConfig,
    convs: Vec<ConvLayout>,
    dense: DenseLayout,
    params: Vec<T>,
}

impl<T: Scalar> QNetwork<T> {
    /// All-zero parameters.
    pub fn zeros(config: QNetworkConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut convs = Vec::with_capacity(config.convs.len());
        let mut off = 0;
        let mut in_c = INPUT_CHANNELS;
        let mut side = config.d;
        for spec in &config.convs {
            let (out_side, gather) = gather_map(side, spec.padding);
            let w_off = off;
            off += spec.out_channels * in_c * TAPS;
            let b_off = off;
            off += spec.out_channels;
            convs.push(ConvLayout { in_c, out_c: spec.out_channels, in_side: side, out_side, w_off, b_off, gather });
            in_c = spec.out_channels;
            side = out_side;
        }
        let inputs = in_c * side * side;
        let dense = DenseLayout { inputs, w_off: off, b_off: off + ACTIONS * inputs };
        off += ACTIONS * inputs + ACTIONS;
        debug_assert_eq!(off, config.parameter_count());
        Ok(Self { config, convs, dense, params: vec![T::zero(); off] })
    }

    /// Weights uniform in `±sqrt(6/(fan_in+fan_out))`, biases zero.
    pub fn new<R: Rng + ?Sized>(config: QNetworkConfig, rng: &mut R) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(config)?;
        let ranges: Vec<(usize, usize, f64)> = net
            .convs
            .iter()
            .map(|c| (c.w_off, c.b_off, (6.0 / ((c.in_c + c.out_c) * TAPS) as f64).sqrt()))
            .chain(std::iter::once((
                net.dense.w_off,
                net.dense.b_off,
                (6.0 / (net.dense.inputs + ACTIONS) as f64).sqrt(),
            )))
            .collect();
        for (lo, hi, limit) in ranges {
            for w in &mut net.params[lo..hi] {
                *w = T::from_f64(rng.gen_range(-limit..limit));
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &QNetworkConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        INPUT_CHANNELS * self.config.d * self.config.d
    }

    /// Copies parameters from a network of identical architecture.
    pub fn copy_from(&mut self, other: &QNetwork<T>) -> Result<(), NeuralError> {
        if self.config != other.config {
            return Err(NeuralError::ArchitectureMismatch(format!(
                "{:?} vs {:?}",
                self.config, other.config
            )));
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<(), NeuralError> {
        if params.len() != self.params.len() {
            return Err(NeuralError::ShapeMismatch { expected: vec![self.params.len()], got: vec![params.len()] });
        }
        self.params = params;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> QNetwork<U> {
        QNetwork {
            config: self.config.clone(),
            convs: self.convs.clone(),
            dense: self.dense.clone(),
            params: self.params.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize, NeuralError> {
        let d = self.config.d;
        let (batch, chw) = match input.shape.as_slice() {
            [c, h, w] => (1, [*c, *h, *w]),
            [b, c, h, w] => (*b, [*c, *h, *w]),
            _ => (0, [0, 0, 0]),
        };
        if chw != [INPUT_CHANNELS, d, d] || input.data.len() != batch * self.input_len() {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![batch.max(1), INPUT_CHANNELS, d, d],
                got: input.shape.clone(),
            });
        }
        Ok(batch)
    }

    /// Batched forward pass on a `[B, 2, d, d]` (or `[2, d, d]`) tensor,
    /// returning `[B, 3]` Q-values and the cache needed by [`Self::backward`].
    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>), NeuralError> {
        let batch = self.check_input(input)?;
        let (q, cache) = self.run(&input.data, batch, true);
        Ok((Tensor { shape: vec![batch, ACTIONS], data: q }, cache.expect("cache requested")))
    }

    /// Forward pass without keeping activations. `input` holds `batch`
    /// consecutive `2×d×d` grids; output is `batch×3`, row-major.
    pub fn predict(&self, input: &[T], batch: usize) -> Result<Vec<T>, NeuralError> {
        if input.len() != batch * self.input_len() {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![batch * self.input_len()],
                got: vec![input.len()],
            });
        }
        Ok(self.run(input, batch, false).0)
    }

    /// Post-ReLU output of every convolution, each in `(channel, batch,
    /// position)` order.
    pub fn feature_maps(&self, input: &Tensor<T>) -> Result<Vec<Vec<T>>, NeuralError> {
        let batch = self.check_input(input)?;
        Ok(self.run(&input.data, batch, true).1.expect("cache requested").acts)
    }

    fn run(&self, input: &[T], batch: usize, keep: bool) -> (Vec<T>, Option<ForwardCache<T>>) {
        let s_in = self.config.d * self.config.d;
        // Activations in (channel, batch, position) order.
        let mut act = vec![T::zero(); input.len()];
        for b in 0..batch {
            for c in 0..INPUT_CHANNELS {
                let src = &input[(b * INPUT_CHANNELS + c) * s_in..][..s_in];
                act[(c * batch + b) * s_in..][..s_in].copy_from_slice(src);
            }
        }
        let mut cols = Vec::new();
        let mut acts = Vec::new();
        for layer in &self.convs {
            let col = im2col(layer, &act, batch);
            let n = batch * layer.out_side * layer.out_side;
            let k = layer.in_c * TAPS;
            let mut out = vec![T::zero(); layer.out_c * n];
            for (o, row) in out.chunks_mut(n).enumerate() {
                row.fill(self.params[layer.b_off + o]);
            }
            let w = &self.params[layer.w_off..layer.b_off];
            T::gemm(layer.out_c, k, n, T::one(), w, (k, 1), &col, (n, 1), T::one(), &mut out, (n, 1));
            for x in &mut out {
                if *x < T::zero() {
                    *x = T::zero();
                }
            }
            if keep {
                cols.push(col);
                acts.push(out.clone());
            }
            act = out;
        }
        let dense_in = self.to_dense_input(&act, batch);
        let f = self.dense.inputs;
        let mut out = vec![T::zero(); ACTIONS * batch];
        for (a, row) in out.chunks_mut(batch).enumerate() {
            row.fill(self.params[self.dense.b_off + a]);
        }
        let w = &self.params[self.dense.w_off..self.dense.b_off];
        T::gemm(ACTIONS, f, batch, T::one(), w, (f, 1), &dense_in, (batch, 1), T::one(), &mut out, (batch, 1));
        let mut q = vec![T::zero(); batch * ACTIONS];
        for a in 0..ACTIONS {
            for b in 0..batch {
                q[b * ACTIONS + a] = out[a * batch + b];
            }
        }
        let cache = keep.then(|| ForwardCache { batch, cols, acts, dense_in });
        (q, cache)
    }

    /// `[C·S, B]` feature matrix from `(C, B, S)` activations.
    fn to_dense_input(&self, act: &[T], batch: usize) -> Vec<T> {
        let f = self.dense.inputs;
        let (channels, s) = match self.convs.last() {
            Some(l) => (l.out_c, l.out_side * l.out_side),
            None => (INPUT_CHANNELS, self.config.d * self.config.d),
        };
        let mut x = vec![T::zero(); f * batch];
        for c in 0..channels {
            for b in 0..batch {
                for p in 0..s {
                    x[(c * s + p) * batch + b] = act[(c * batch + b) * s + p];
                }
            }
        }
        x
    }

    /// Parameter gradient for an upstream gradient `grad_q` on the `[B, 3]`
    /// output of the cached forward pass.
    pub fn backward(&self, cache: Option<&ForwardCache<T>>, grad_q: &[T]) -> Result<Vec<T>, NeuralError> {
        let cache = cache.ok_or(NeuralError::MissingCache)?;
        let batch = cache.batch;
        if grad_q.len() != batch * ACTIONS {
            return Err(NeuralError::ShapeMismatch { expected: vec![batch, ACTIONS], got: vec![grad_q.len()] });
        }
        let mut grad = vec![T::zero(); self.params.len()];
        let f = self.dense.inputs;
        let mut d_out = vec![T::zero(); ACTIONS * batch];
        for b in 0..batch {
            for a in 0..ACTIONS {
                d_out[a * batch + b] = grad_q[b * ACTIONS + a];
            }
        }
        for a in 0..ACTIONS {
            grad[self.dense.b_off + a] = d_out[a * batch..][..batch].iter().fold(T::zero(), |s, &x| s + x);
        }
        {
            let gw = &mut grad[self.dense.w_off..self.dense.b_off];
            T::gemm(ACTIONS, batch, f, T::one(), &d_out, (batch, 1), &cache.dense_in, (1, batch), T::zero(), gw, (f, 1));
        }
        let mut d_x = vec![T::zero(); f * batch];
        let w = &self.params[self.dense.w_off..self.dense.b_off];
        T::gemm(f, ACTIONS, batch, T::one(), w, (1, f), &d_out, (batch, 1), T::zero(), &mut d_x, (batch, 1));

        let Some(last) = self.convs.last() else {
            return Ok(grad);
        };
        let s = last.out_side * last.out_side;
        let mut d_act = vec![T::zero(); last.out_c * batch * s];
        for c in 0..last.out_c {
            for b in 0..batch {
                for p in 0..s {
                    d_act[(c * batch + b) * s + p] = d_x[(c * s + p) * batch + b];
                }
            }
        }
        for (l, layer) in self.convs.iter().enumerate().rev() {
            let act = &cache.acts[l];
            for (g, &a) in d_act.iter_mut().zip(act) {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }
            let n = batch * layer.out_side * layer.out_side;
            let k = layer.in_c * TAPS;
            for o in 0..layer.out_c {
                grad[layer.b_off + o] = d_act[o * n..][..n].iter().fold(T::zero(), |s, &x| s + x);
            }
            let col = &cache.cols[l];
            {
                let gw = &mut grad[layer.w_off..layer.b_off];
                T::gemm(layer.out_c, n, k, T::one(), &d_act, (n, 1), col, (1, n), T::zero(), gw, (k, 1));
            }
            if l == 0 {
                break;
            }
            let w = &self.params[layer.w_off..layer.b_off];
            let mut d_col = vec![T::zero(); k * n];
            T::gemm(k, layer.out_c, n, T::one(), w, (1, k), &d_act, (n, 1), T::zero(), &mut d_col, (n, 1));
            d_act = col2im(layer, &d_col, batch);
        }
        Ok(grad)
    }
}

fn im2col<T: Scalar>(layer: &ConvLayout, act: &[T], batch: usize) -> Vec<T> {
    let s_in = layer.in_side * layer.in_side;
    let s_out = layer.out_side * layer.out_side;
    let n = batch * s_out;
    let mut col = vec![T::zero(); layer.in_c * TAPS * n];
    for c in 0..layer.in_c {
        for tap in 0..TAPS {
            let row = &mut col[(c * TAPS + tap) * n..][..n];
            let map = &layer.gather[tap * s_out..][..s_out];
            for b in 0..batch {
                let src = &act[(c * batch + b) * s_in..][..s_in];
                for (dst, &m) in row[b * s_out..][..s_out].iter_mut().zip(map) {
                    if m >= 0 {
                        *dst = src[m as usize];
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(layer: &ConvLayout, d_col: &[T], batch: usize) -> Vec<T> {
    let s_in = layer.in_side * layer.in_side;
    let s_out = layer.out_side * layer.out_side;
    let n = batch * s_out;
    let mut d_in = vec![T::zero(); layer.in_c * batch * s_in];
    for c in 0..layer.in_c {
        for tap in 0..TAPS {
            let row = &d_col[(c * TAPS + tap) * n..][..n];
            let map = &layer.gather[tap * s_out..][..s_out];
            for b in 0..batch {
                let dst = &mut d_in[(c * batch + b) * s_in..][..s_in];
                for (&g, &m) in row[b * s_out..][..s_out].iter().zip(map) {
                    if m >= 0 {
                        dst[m as usize] = dst[m as usize] + g;
                    }
                }
            }
        }
    }
    d_in
}
