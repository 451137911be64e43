//! Fully connected feedforward value approximator with analytic gradients.
//!
//! The network maps a flattened belief to a scalar value through rectified
//! hidden layers and an identity output. It is implemented in-repo so the
//! gradients are exact, testable against finite differences, and free of
//! framework nondeterminism. Row computations parallelize deterministically
//! (each output element is reduced in a fixed order).

use crate::error::{Error, Result};
use rand::Rng;
use rayon::prelude::*;

/// Below this many multiply-accumulates a matrix-vector product stays
/// single-threaded; above it rows are computed in parallel. Work already
/// running on a pool worker stays sequential so outer parallelism (over
/// minibatch items or episodes) is never oversubscribed.
const PAR_THRESHOLD: usize = 1 << 14;

fn parallelize(work: usize) -> bool {
    work >= PAR_THRESHOLD && rayon::current_thread_index().is_none()
}

/// Dot product with four independent accumulators (fixed summation order,
/// but enough instruction-level parallelism to avoid being bound by the
/// floating-point add latency chain).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rest_a = chunks_a.remainder();
    let rest_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in rest_a.iter().zip(rest_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Architecture description: input width, hidden widths, scalar output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
}

impl NetworkSpec {
    /// The benchmark architecture: three rectified hidden layers of `h`
    /// units each.
    pub fn three_layer(input: usize, h: usize) -> Self {
        NetworkSpec {
            input,
            hidden: vec![h, h, h],
        }
    }

    /// Total number of free parameters (weights and biases).
    pub fn param_count(&self) -> usize {
        let mut count = 0;
        let mut prev = self.input;
        for &h in &self.hidden {
            count += h * prev + h;
            prev = h;
        }
        count + prev + 1
    }
}

/// One dense layer stored row-major: `rows x cols` weights plus `rows` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Layer {
        Layer {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    /// `out = W x + b`, rows in parallel when large.
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        let cols = self.cols;
        let compute = |(row, o): (usize, &mut f64)| {
            let wr = &self.w[row * cols..(row + 1) * cols];
            *o = self.b[row] + dot(wr, x);
        };
        if parallelize(self.rows * cols) {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(r, o)| compute((r, o)));
        } else {
            out.iter_mut()
                .enumerate()
                .for_each(|(r, o)| compute((r, o)));
        }
    }

    /// `out = W^T delta` (no bias), entries in parallel when large.
    fn matvec_transpose(&self, delta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(delta.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        let cols = self.cols;
        let compute = |(col, o): (usize, &mut f64)| {
            let mut acc = 0.0;
            for (row, d) in delta.iter().enumerate() {
                acc += self.w[row * cols + col] * d;
            }
            *o = acc;
        };
        if parallelize(self.rows * cols) {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(c, o)| compute((c, o)));
        } else {
            out.iter_mut()
                .enumerate()
                .for_each(|(c, o)| compute((c, o)));
        }
    }
}

/// All layer weights of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Per-weight gradients, same shape as the bundle.
pub type GradientBundle = WeightBundle;

impl WeightBundle {
    /// All-zero weights (also the shape template for gradients).
    pub fn zeros(spec: &NetworkSpec) -> WeightBundle {
        let mut layers = Vec::new();
        let mut prev = spec.input;
        for &h in &spec.hidden {
            layers.push(Layer::zeros(h, prev));
            prev = h;
        }
        layers.push(Layer::zeros(1, prev));
        WeightBundle {
            spec: spec.clone(),
            layers,
        }
    }

    /// Seeded uniform initialization in `+-sqrt(6 / (fan_in + fan_out))`.
    pub fn init<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> WeightBundle {
        let mut bundle = WeightBundle::zeros(spec);
        for layer in &mut bundle.layers {
            let bound = (6.0 / (layer.cols + layer.rows) as f64).sqrt();
            for w in &mut layer.w {
                *w = rng.gen_range(-bound..bound);
            }
        }
        bundle
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass; rectifier on hidden layers, identity output.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.spec.input {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input,
                got: input.len(),
            });
        }
        let mut activ = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.rows];
            layer.matvec(&activ, &mut out);
            if i < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            activ = out;
        }
        Ok(activ[0])
    }

    /// Forward pass keeping post-activation values per layer, for backprop.
    fn forward_trace(&self, input: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.rows];
            layer.matvec(activations.last().unwrap(), &mut out);
            if i < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            activations.push(out);
        }
        (activations.last().unwrap()[0], activations)
    }

    /// Exact gradient of `upstream * output` with respect to every weight
    /// and bias. Returns the scalar output as well.
    pub fn backward(&self, input: &[f64], upstream: f64) -> Result<(f64, GradientBundle)> {
        if input.len() != self.spec.input {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input,
                got: input.len(),
            });
        }
        let mut grads = WeightBundle::zeros(&self.spec);
        let (value, activations) = self.forward_trace(input);
        self.backward_from_trace(&activations, upstream, &mut grads);
        Ok((value, grads))
    }

    /// Forward + accumulate gradients into `grads` (for minibatch sums).
    /// `upstream_of` receives the output value and returns the upstream
    /// derivative, so loss terms that depend on the prediction can be folded
    /// into one pass.
    pub fn accumulate_gradient<F: Fn(f64) -> f64>(
        &self,
        input: &[f64],
        upstream_of: F,
        grads: &mut GradientBundle,
    ) -> f64 {
        let (value, activations) = self.forward_trace(input);
        self.backward_from_trace(&activations, upstream_of(value), grads);
        value
    }

    fn backward_from_trace(
        &self,
        activations: &[Vec<f64>],
        upstream: f64,
        grads: &mut GradientBundle,
    ) {
        let mut delta = vec![upstream];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &activations[i];
            let glayer = &mut grads.layers[i];
            let cols = layer.cols;
            // dW[r][c] += delta[r] * input[c]; db[r] += delta[r].
            if parallelize(layer.rows * cols) {
                glayer
                    .w
                    .par_chunks_mut(cols)
                    .zip(delta.par_iter())
                    .for_each(|(grow, d)| {
                        for (g, x) in grow.iter_mut().zip(input) {
                            *g += d * x;
                        }
                    });
            } else {
                for (grow, d) in glayer.w.chunks_mut(cols).zip(&delta) {
                    for (g, x) in grow.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            for (gb, d) in glayer.b.iter_mut().zip(&delta) {
                *gb += d;
            }
            if i > 0 {
                let mut prev = vec![0.0; cols];
                layer.matvec_transpose(&delta, &mut prev);
                // Rectifier derivative: 1 where the unit was active, else 0
                // (0 at exactly zero).
                for (p, &a) in prev.iter_mut().zip(&activations[i]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Forward pass over a batch of inputs. One weight pass serves the whole
    /// batch, so this is far cheaper than per-input [`forward`] calls for
    /// large networks (which are limited by weight-streaming bandwidth).
    ///
    /// [`forward`]: WeightBundle::forward
    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        for x in inputs {
            if x.len() != self.spec.input {
                return Err(Error::ShapeMismatch {
                    expected: self.spec.input,
                    got: x.len(),
                });
            }
        }
        let activations = self.forward_batch_trace(inputs);
        let k = inputs.len();
        let last = activations.last().unwrap();
        Ok((0..k).map(|i| last[i]).collect())
    }

    /// Batched forward keeping item-major activations per layer.
    ///
    /// Work splits over fixed-size item blocks: each worker streams the
    /// weight matrix once while its block of activations stays
    /// cache-resident, so the batch costs roughly one weight pass instead of
    /// one per input.
    fn forward_batch_trace(&self, inputs: &[&[f64]]) -> Vec<Vec<f64>> {
        const ITEM_BLOCK: usize = 32;
        let k = inputs.len();
        let mut item_major: Vec<f64> = Vec::with_capacity(k * self.spec.input);
        for x in inputs {
            item_major.extend_from_slice(x);
        }
        let mut activations: Vec<Vec<f64>> = vec![item_major];
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let a = activations.last().unwrap();
            let rows = layer.rows;
            let cols = layer.cols;
            let mut next = vec![0.0; k * rows];
            next.par_chunks_mut(ITEM_BLOCK * rows)
                .enumerate()
                .for_each(|(bi, out_block)| {
                    let i0 = bi * ITEM_BLOCK;
                    let items_here = out_block.len() / rows;
                    for r in 0..rows {
                        let wrow = &layer.w[r * cols..(r + 1) * cols];
                        let bias = layer.b[r];
                        for di in 0..items_here {
                            let x = &a[(i0 + di) * cols..(i0 + di + 1) * cols];
                            let acc = bias + dot(wrow, x);
                            out_block[di * rows + r] = if li < last { acc.max(0.0) } else { acc };
                        }
                    }
                });
            activations.push(next);
        }
        activations
    }

    /// Batched fused forward/backward: accumulates the summed gradient of
    /// `sum_i upstream_of(i, value_i) * value_i`-style objectives into
    /// `grads` (upstream receives the item index and its output value) and
    /// returns the per-item outputs.
    pub fn batch_gradient<F>(
        &self,
        inputs: &[&[f64]],
        upstream_of: F,
        grads: &mut GradientBundle,
    ) -> Result<Vec<f64>>
    where
        F: Fn(usize, f64) -> f64,
    {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        for x in inputs {
            if x.len() != self.spec.input {
                return Err(Error::ShapeMismatch {
                    expected: self.spec.input,
                    got: x.len(),
                });
            }
        }
        let k = inputs.len();
        let activations = self.forward_batch_trace(inputs);
        let outputs: Vec<f64> = (0..k).map(|i| activations.last().unwrap()[i]).collect();
        // Item-major delta of the output layer.
        let mut delta: Vec<f64> = outputs
            .iter()
            .enumerate()
            .map(|(i, &v)| upstream_of(i, v))
            .collect();
        let mut delta_width = 1usize;
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let a = &activations[li];
            let rows = layer.rows;
            let cols = layer.cols;
            debug_assert_eq!(delta_width, rows);
            // dW[r][c] += sum_k delta[k][r] * a[k][c]; db[r] += sum_k delta[k][r].
            let glayer = &mut grads.layers[li];
            let block = 64.min(rows).max(1);
            let bias_blocks: Vec<Vec<f64>> = glayer
                .w
                .par_chunks_mut(block * cols)
                .enumerate()
                .map(|(bi, gw_block)| {
                    let r0 = bi * block;
                    let rows_here = gw_block.len() / cols;
                    let mut gb = vec![0.0; rows_here];
                    for item in 0..k {
                        let d_row = &delta[item * rows..(item + 1) * rows];
                        let x = &a[item * cols..(item + 1) * cols];
                        for dr in 0..rows_here {
                            let d = d_row[r0 + dr];
                            if d == 0.0 {
                                continue;
                            }
                            gb[dr] += d;
                            let grow = &mut gw_block[dr * cols..(dr + 1) * cols];
                            for (g, v) in grow.iter_mut().zip(x) {
                                *g += d * v;
                            }
                        }
                    }
                    gb
                })
                .collect();
            for (bi, gb) in bias_blocks.into_iter().enumerate() {
                for (dr, v) in gb.into_iter().enumerate() {
                    glayer.b[bi * block + dr] += v;
                }
            }
            if li == 0 {
                break;
            }
            // delta_prev[k][c] = relu'(a[k][c]) * sum_r W[r][c] delta[k][r],
            // parallel over item blocks (weights stream once per block).
            let mut prev = vec![0.0; k * cols];
            let item_block = k.div_ceil(rayon::current_num_threads().max(1)).max(1);
            prev.par_chunks_mut(item_block * cols)
                .enumerate()
                .for_each(|(bi, prev_block)| {
                    let k0 = bi * item_block;
                    for r in 0..rows {
                        let wrow = &layer.w[r * cols..(r + 1) * cols];
                        for (dk, prev_item) in prev_block.chunks_mut(cols).enumerate() {
                            let d = delta[(k0 + dk) * rows + r];
                            if d == 0.0 {
                                continue;
                            }
                            for (p, w) in prev_item.iter_mut().zip(wrow) {
                                *p += d * w;
                            }
                        }
                    }
                    for (dk, prev_item) in prev_block.chunks_mut(cols).enumerate() {
                        let act = &a[(k0 + dk) * cols..(k0 + dk + 1) * cols];
                        for (p, &v) in prev_item.iter_mut().zip(act) {
                            if v <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                });
            delta = prev;
            delta_width = cols;
        }
        Ok(outputs)
    }

    /// Plain stochastic gradient descent: `w <- w - lr * grad`.
    /// Non-finite gradients abort (training divergence signal).
    pub fn sgd_step(&mut self, grads: &GradientBundle, lr: f64) -> Result<()> {
        for (layer, glayer) in self.layers.iter_mut().zip(&grads.layers) {
            if glayer.w.iter().chain(&glayer.b).any(|g| !g.is_finite()) {
                return Err(Error::NonFinite("gradient".into()));
            }
            for (w, g) in layer.w.iter_mut().zip(&glayer.w) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(&glayer.b) {
                *b -= lr * g;
            }
        }
        Ok(())
    }

    /// Scales every gradient entry (used to average minibatch sums).
    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.w {
                *w *= factor;
            }
            for b in &mut layer.b {
                *b *= factor;
            }
        }
    }

    /// Product of layer Frobenius norms: a cheap upper bound on the
    /// network's Lipschitz constant.
    pub fn frobenius_lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.w.iter().map(|w| w * w).sum::<f64>().sqrt())
            .product()
    }
}
