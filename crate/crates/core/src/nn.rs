//! Fully-connected policy/value network with a hand-written backward pass.
//!
//! The trunk is `K` ReLU layers of equal width. Two linear heads sit on top
//! of it: action logits (softmaxed into probabilities) and a scalar value.
//! All parameters live in one flat vector, layer after layer, each layer as
//! its row-major `out x in` weight matrix followed by its bias. The hidden
//! layers come first, then the policy head, then the value head.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math;

/// Which layer an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerId {
    Hidden(usize),
    PolicyHead,
    ValueHead,
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerId::Hidden(k) => write!(f, "hidden layer {k}"),
            LayerId::PolicyHead => f.write_str("policy head"),
            LayerId::ValueHead => f.write_str("value head"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("unsupported network shape: {0}")]
    Config(&'static str),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(LayerId),
    #[error("forward trace was produced with different parameters")]
    StaleTrace,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetworkShape {
    pub input: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub actions: usize,
}

/// Position of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub id: LayerId,
    pub input: usize,
    pub output: usize,
    /// Start of the weights; the bias follows at `offset + input * output`.
    pub offset: usize,
}

impl LayerDims {
    pub fn len(&self) -> usize {
        self.input * self.output + self.output
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.input * self.output
    }
}

impl NetworkShape {
    pub fn new(input: usize, hidden_layers: usize, hidden_width: usize, actions: usize) -> Self {
        NetworkShape {
            input,
            hidden_layers,
            hidden_width,
            actions,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input == 0 {
            return Err(NnError::Config("input width must be positive"));
        }
        if self.hidden_layers == 0 {
            return Err(NnError::Config("at least one hidden layer is required"));
        }
        if self.hidden_width == 0 {
            return Err(NnError::Config("hidden width must be positive"));
        }
        if self.actions < 2 {
            return Err(NnError::Config("at least two actions are required"));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerDims> {
        let mut out = Vec::with_capacity(self.hidden_layers + 2);
        let mut offset = 0;
        let mut push = |id, input, output| {
            let d = LayerDims {
                id,
                input,
                output,
                offset,
            };
            offset += d.len();
            out.push(d);
        };
        let mut width = self.input;
        for k in 0..self.hidden_layers {
            push(LayerId::Hidden(k), width, self.hidden_width);
            width = self.hidden_width;
        }
        push(LayerId::PolicyHead, width, self.actions);
        push(LayerId::ValueHead, width, 1);
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerDims::len).sum()
    }
}

/// Network parameters. Every mutation bumps `version`, which invalidates
/// outstanding forward traces.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    shape: NetworkShape,
    layers: Vec<LayerDims>,
    data: Vec<f64>,
    version: u64,
}

/// Weights uniform in `±1/√fan_in`, biases zero.
pub fn init_params(shape: NetworkShape, seed: u64) -> Result<PolicyParams, NnError> {
    let mut p = PolicyParams::zeros(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in p.layers.clone() {
        let bound = 1.0 / math::sqrt(layer.input as f64);
        for w in &mut p.data[layer.offset..layer.bias_offset()] {
            *w = rng.gen_range(-bound..bound);
        }
    }
    Ok(p)
}

impl PolicyParams {
    pub fn zeros(shape: NetworkShape) -> Result<PolicyParams, NnError> {
        shape.validate()?;
        Ok(PolicyParams {
            shape,
            layers: shape.layers(),
            data: vec![0.0; shape.param_count()],
            version: 0,
        })
    }

    pub fn from_data(shape: NetworkShape, data: Vec<f64>) -> Result<PolicyParams, NnError> {
        shape.validate()?;
        if data.len() != shape.param_count() {
            return Err(NnError::Shape {
                expected: shape.param_count(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("parameters"));
        }
        Ok(PolicyParams {
            shape,
            layers: shape.layers(),
            data,
            version: 0,
        })
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn layers(&self) -> &[LayerDims] {
        &self.layers
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.data
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weights and bias of one layer.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let d = self.layers[k];
        (
            &self.data[d.offset..d.bias_offset()],
            &self.data[d.bias_offset()..d.offset + d.len()],
        )
    }
}

/// Post-activation outputs of every hidden layer for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    input: Matrix,
    hidden: Vec<Matrix>,
    version: u64,
    param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub probs: Matrix,
    pub log_probs: Matrix,
    pub values: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y += a0 x0 + a1 x1 + a2 x2 + a3 x3`, added left to right.
#[inline]
fn axpy4(a: [f64; 4], x: [&[f64]; 4], y: &mut [f64]) {
    let n = y.len();
    let (x0, x1, x2, x3) = (&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]);
    for i in 0..n {
        y[i] = y[i] + a[0] * x0[i] + a[1] * x1[i] + a[2] * x2[i] + a[3] * x3[i];
    }
}

/// Accumulates the weight and bias gradient of one affine layer, and the
/// input gradient if `d_x` is given. `dy` holds `rows x out` entries.
fn affine_backward(
    dims: LayerDims,
    w: &[f64],
    x: &Matrix,
    dy: &[f64],
    grad: &mut [f64],
    mut d_x: Option<&mut Matrix>,
) {
    let (rows, inp, out) = (x.rows, dims.input, dims.output);
    let blocks = rows / 4 * 4;
    for o in 0..out {
        let gw = &mut grad[dims.offset + o * inp..dims.offset + (o + 1) * inp];
        for r in (0..blocks).step_by(4) {
            let a = [dy[r * out + o], dy[(r + 1) * out + o], dy[(r + 2) * out + o], dy[(r + 3) * out + o]];
            if a != [0.0; 4] {
                axpy4(a, [x.row(r), x.row(r + 1), x.row(r + 2), x.row(r + 3)], gw);
            }
        }
        for r in blocks..rows {
            let g = dy[r * out + o];
            if g != 0.0 {
                axpy(g, x.row(r), gw);
            }
        }
        let bias = &mut grad[dims.bias_offset() + o];
        for r in 0..rows {
            *bias += dy[r * out + o];
        }
    }
    if let Some(dx) = d_x.as_deref_mut() {
        let oblocks = out / 4 * 4;
        for r in 0..rows {
            let g = &dy[r * out..(r + 1) * out];
            let dxr = dx.row_mut(r);
            for o in (0..oblocks).step_by(4) {
                let a = [g[o], g[o + 1], g[o + 2], g[o + 3]];
                if a != [0.0; 4] {
                    let ws = [
                        &w[o * inp..(o + 1) * inp],
                        &w[(o + 1) * inp..(o + 2) * inp],
                        &w[(o + 2) * inp..(o + 3) * inp],
                        &w[(o + 3) * inp..(o + 4) * inp],
                    ];
                    axpy4(a, ws, dxr);
                }
            }
            for o in oblocks..out {
                if g[o] != 0.0 {
                    axpy(g[o], &w[o * inp..(o + 1) * inp], dxr);
                }
            }
        }
    }
}

/// Dot products of one weight row with four input rows at once. Each lane
/// performs exactly the operations of [`dot`].
#[inline]
fn dot4(w: &[f64], x: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0f64; 8]; 4];
    let n8 = w.len() / 8 * 8;
    let mut i = 0;
    while i < n8 {
        let wc = &w[i..i + 8];
        for (a, xr) in acc.iter_mut().zip(&x) {
            let xc = &xr[i..i + 8];
            for l in 0..8 {
                a[l] += wc[l] * xc[l];
            }
        }
        i += 8;
    }
    let mut out = [0.0; 4];
    for (k, a) in acc.iter().enumerate() {
        let mut s = ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]));
        for j in n8..w.len() {
            s += x[k][j] * w[j];
        }
        out[k] = s;
    }
    out
}

/// `y = W x + b` for every row of `x`.
fn affine(w: &[f64], b: &[f64], x: &Matrix, out: usize) -> Matrix {
    let mut y = Matrix::zeros(x.rows, out);
    let n = x.cols;
    let blocks = x.rows / 4 * 4;
    for r in (0..blocks).step_by(4) {
        let xs = [x.row(r), x.row(r + 1), x.row(r + 2), x.row(r + 3)];
        for o in 0..out {
            let d = dot4(&w[o * n..(o + 1) * n], xs);
            for k in 0..4 {
                y.data[(r + k) * out + o] = b[o] + d[k];
            }
        }
    }
    for r in blocks..x.rows {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for o in 0..out {
            yr[o] = b[o] + dot(&w[o * n..(o + 1) * n], xr);
        }
    }
    y
}

fn run(params: &PolicyParams, obs: &Matrix, keep: bool) -> Result<(ForwardOutput, Vec<Matrix>), NnError> {
    let shape = params.shape;
    if obs.cols != shape.input {
        return Err(NnError::Shape {
            expected: shape.input,
            got: obs.cols,
        });
    }
    if obs.data.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("observation batch"));
    }
    let mut kept = Vec::new();
    let mut h: Option<Matrix> = None;
    for k in 0..shape.hidden_layers {
        let (w, b) = params.layer(k);
        let x = h.as_ref().unwrap_or(obs);
        let mut y = affine(w, b, x, shape.hidden_width);
        for v in &mut y.data {
            *v = v.max(0.0);
        }
        if keep {
            if let Some(prev) = h.take() {
                kept.push(prev);
            }
        }
        h = Some(y);
    }
    let top = h.expect("at least one hidden layer");
    let (w, b) = params.layer(shape.hidden_layers);
    let logits = affine(w, b, &top, shape.actions);
    let (w, b) = params.layer(shape.hidden_layers + 1);
    let values = affine(w, b, &top, 1).data;
    let (probs, log_probs) = softmax(&logits);
    if keep {
        kept.push(top);
    }
    Ok((
        ForwardOutput {
            probs,
            log_probs,
            values,
        },
        kept,
    ))
}

/// Row-wise softmax and log-softmax, shifted by the row maximum.
pub fn softmax(logits: &Matrix) -> (Matrix, Matrix) {
    let mut probs = Matrix::zeros(logits.rows, logits.cols);
    let mut logp = Matrix::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        let z = logits.row(r);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &zi) in probs.row_mut(r).iter_mut().zip(z) {
            *p = math::exp(zi - m);
            sum += *p;
        }
        let log_sum = math::ln(sum);
        for p in probs.row_mut(r) {
            *p /= sum;
        }
        for (lp, &zi) in logp.row_mut(r).iter_mut().zip(z) {
            *lp = zi - m - log_sum;
        }
    }
    (probs, logp)
}

/// Probabilities, log-probabilities and values for a batch of observations.
pub fn forward(params: &PolicyParams, obs: &Matrix) -> Result<(ForwardOutput, ForwardTrace), NnError> {
    let (out, hidden) = run(params, obs, true)?;
    Ok((
        out,
        ForwardTrace {
            input: obs.clone(),
            hidden,
            version: params.version,
            param_count: params.data.len(),
        },
    ))
}

/// [`forward`] without keeping the activations.
pub fn infer(params: &PolicyParams, obs: &Matrix) -> Result<ForwardOutput, NnError> {
    run(params, obs, false).map(|(out, _)| out)
}

/// Gradient with respect to the logits given the gradient with respect to
/// the probabilities of a softmax row.
pub fn softmax_backward(probs: &Matrix, d_probs: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(probs.rows, probs.cols);
    for r in 0..probs.rows {
        let p = probs.row(r);
        let g = d_probs.row(r);
        let inner = dot(p, g);
        for (di, (&pi, &gi)) in d.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
            *di = pi * (gi - inner);
        }
    }
    d
}

/// Parameter gradient of a loss whose gradient with respect to the logits is
/// `d_logits` and with respect to the values is `d_values`.
pub fn backward(
    params: &PolicyParams,
    trace: &ForwardTrace,
    d_logits: &Matrix,
    d_values: &[f64],
) -> Result<Vec<f64>, NnError> {
    if trace.version != params.version || trace.param_count != params.data.len() {
        return Err(NnError::StaleTrace);
    }
    let shape = params.shape;
    let batch = trace.input.rows;
    if d_logits.rows != batch || d_logits.cols != shape.actions {
        return Err(NnError::Shape {
            expected: batch * shape.actions,
            got: d_logits.rows * d_logits.cols,
        });
    }
    if d_values.len() != batch {
        return Err(NnError::Shape {
            expected: batch,
            got: d_values.len(),
        });
    }
    let mut grad = vec![0.0; params.data.len()];
    let k = shape.hidden_layers;
    let top = &trace.hidden[k - 1];

    // heads: accumulate their gradient and push it into the top activation
    let mut d_h = Matrix::zeros(batch, shape.hidden_width);
    for (li, dy) in [(k, d_logits.data.as_slice()), (k + 1, d_values)] {
        let (w, _) = params.layer(li);
        affine_backward(params.layers[li], w, top, dy, &mut grad, Some(&mut d_h));
    }

    for li in (0..k).rev() {
        let act = &trace.hidden[li];
        for (d, &a) in d_h.data.iter_mut().zip(&act.data) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let x = if li == 0 { &trace.input } else { &trace.hidden[li - 1] };
        let dims = params.layers[li];
        let (w, _) = params.layer(li);
        if li > 0 {
            let mut dx = Matrix::zeros(batch, dims.input);
            affine_backward(dims, w, x, &d_h.data, &mut grad, Some(&mut dx));
            d_h = dx;
        } else {
            affine_backward(dims, w, x, &d_h.data, &mut grad, None);
        }
    }
    Ok(grad)
}

/// Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when any
/// gradient entry is non-finite.
pub fn adam_step(
    params: &mut PolicyParams,
    grads: &[f64],
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NnError> {
    let n = params.data.len();
    if grads.len() != n {
        return Err(NnError::Shape {
            expected: n,
            got: grads.len(),
        });
    }
    if state.m.len() != n || state.v.len() != n {
        return Err(NnError::Shape {
            expected: n,
            got: state.m.len(),
        });
    }
    for d in &params.layers {
        if grads[d.offset..d.offset + d.len()].iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(d.id));
        }
    }
    state.t += 1;
    let t = state.t.min(i32::MAX as u64) as i32;
    let c1 = 1.0 - math::powi(state.beta1, t);
    let c2 = 1.0 - math::powi(state.beta2, t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let data = params.data_mut();
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        data[i] -= learning_rate * m_hat / (math::sqrt(v_hat) + eps);
    }
    Ok(())
}
