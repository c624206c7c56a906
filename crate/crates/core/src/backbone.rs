//! 1D convolutional backbone: ELU-variant activation, same-length
//! convolutions, stride-2 pooling, transposed-convolution upsampling and the
//! per-frame softmax prediction map.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::array::{left_reach, Array, ParamBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Width of every backbone convolution kernel.
pub const CONV_WIDTH: usize = 3;

/// `½[x + e^x − 1 + sign(x)(x − e^x + 1)]`: identity for positive inputs,
/// `e^x − 1` for negative ones, unit slope at zero. The sign selects one of
/// the two terms, which are evaluated separately; summing them as written
/// cancels catastrophically once `e^x` dwarfs `x`.
pub fn elu_variant<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else if x < T::zero() {
        x.exp_m1()
    } else {
        // zero, or NaN passed through
        x
    }
}

pub fn elu_derivative<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        x.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    /// Number of deep layers `q`.
    pub depth: usize,
    /// Output channels of each deep layer.
    pub widths: Vec<usize>,
    pub classes: usize,
    pub dropout: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            depth: 3,
            widths: vec![32, 64, 96],
            classes: 7,
            dropout: 0.65,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth q must be at least 1".into()));
        }
        if self.widths.len() != self.depth || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "need {} positive layer widths, got {:?}",
                self.depth, self.widths
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    /// Shortest sequence the network accepts: `2^q` frames.
    pub fn min_length(&self) -> usize {
        1 << self.depth
    }
}

/// 1D convolution with edge-replicate padding; output length equals input
/// length. Cross-correlation, no kernel flip.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    /// `out × in × width`.
    pub kernels: ParamBuffer<T>,
    pub bias: ParamBuffer<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(input: usize, output: usize, width: usize) -> Self {
        ConvLayer {
            kernels: ParamBuffer::zeros(&[output, input, width]),
            bias: ParamBuffer::zeros(&[output]),
        }
    }

    /// He-style normal initialization scaled by `gain`.
    pub fn random<R: Rng>(input: usize, output: usize, width: usize, gain: f64, rng: &mut R) -> Self {
        let kernels = random_array(&[output, input, width], gain * (2.0 / (input * width).max(1) as f64).sqrt(), rng);
        ConvLayer {
            kernels: ParamBuffer::new(kernels),
            bias: ParamBuffer::zeros(&[output]),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn output_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn forward(&self, input: &Array<T>) -> Result<Array<T>> {
        conv1d_forward(input, self)
    }

    /// Accumulates kernel and bias gradients; returns the input gradient.
    pub fn backward(&mut self, input: &Array<T>, upstream: &Array<T>) -> Array<T> {
        let (cin, cout, w) = (self.input_channels(), self.output_channels(), self.width());
        let len = input.cols();
        let left = left_reach(w);
        let padded: Vec<Vec<T>> = (0..cin).map(|i| pad_row(input.row(i), w)).collect();
        let mut gpad = vec![vec![T::zero(); len + w - 1]; cin];
        let k = self.kernels.value.data();
        let gk = self.kernels.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for o in 0..cout {
            let gy = upstream.row(o);
            gb[o] += gy.iter().copied().sum();
            for i in 0..cin {
                let xp = &padded[i];
                let gp = &mut gpad[i];
                for m in 0..w {
                    let idx = (o * cin + i) * w + m;
                    let kv = k[idx];
                    let mut acc = T::zero();
                    for j in 0..len {
                        acc += gy[j] * xp[j + m];
                        gp[j + m] += kv * gy[j];
                    }
                    gk[idx] += acc;
                }
            }
        }
        // fold the padded gradient back onto the edge frames
        let mut gx = Array::zeros(&[cin, len]);
        for (i, gp) in gpad.iter().enumerate() {
            let row = gx.row_mut(i);
            for (p, &g) in gp.iter().enumerate() {
                let src = (p as isize - left as isize).clamp(0, len as isize - 1) as usize;
                row[src] += g;
            }
        }
        gx
    }

    pub fn params(&self) -> [&ParamBuffer<T>; 2] {
        [&self.kernels, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamBuffer<T>; 2] {
        [&mut self.kernels, &mut self.bias]
    }
}

fn pad_row<T: Scalar>(x: &[T], w: usize) -> Vec<T> {
    crate::array::pad_edges(x, w)
}

pub(crate) fn random_array<T: Scalar, R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Array<T> {
    let n: usize = shape.iter().product();
    let normal = Normal::new(0.0, std.max(0.0)).expect("finite std");
    let data = (0..n).map(|_| T::lit(normal.sample(rng))).collect();
    Array::from_vec(shape, data).expect("consistent shape")
}

/// Same-length 1D convolution of a `channels × L` input.
pub fn conv1d_forward<T: Scalar>(input: &Array<T>, layer: &ConvLayer<T>) -> Result<Array<T>> {
    let (cin, cout, w) = (layer.input_channels(), layer.output_channels(), layer.width());
    if input.rank() != 2 || input.rows() != cin {
        return Err(Error::invalid(format!(
            "convolution expects {cin} input channels, got shape {:?}",
            input.shape()
        )));
    }
    let len = input.cols();
    let padded: Vec<Vec<T>> = (0..cin).map(|i| pad_row(input.row(i), w)).collect();
    let k = layer.kernels.value.data();
    let b = layer.bias.value.data();
    let mut out = Array::zeros(&[cout, len]);
    for o in 0..cout {
        let y = out.row_mut(o);
        y.iter_mut().for_each(|v| *v = b[o]);
        for (i, xp) in padded.iter().enumerate() {
            for m in 0..w {
                let kv = k[(o * cin + i) * w + m];
                if kv == T::zero() {
                    continue;
                }
                for (yj, &xv) in y.iter_mut().zip(&xp[m..m + len]) {
                    *yj += kv * xv;
                }
            }
        }
    }
    Ok(out)
}

/// Non-overlapping max-pooling with window and stride `width`. A trailing
/// partial window is completed by repeating the last frame, which leaves its
/// maximum unchanged. Returns the pooled map and flat argmax indices.
pub fn maxpool_window<T: Scalar>(input: &Array<T>, width: usize) -> (Array<T>, Vec<usize>) {
    let (c, len) = (input.rows(), input.cols());
    let out_len = len.div_ceil(width);
    let mut out = Array::zeros(&[c, out_len]);
    let mut idx = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        let x = input.row(ch);
        let y = out.row_mut(ch);
        for (b, yb) in y.iter_mut().enumerate() {
            let start = b * width;
            let end = (start + width).min(len);
            let mut best = start;
            for j in start + 1..end {
                if x[j] > x[best] {
                    best = j;
                }
            }
            *yb = x[best];
            idx.push(ch * len + best);
        }
    }
    (out, idx)
}

pub fn maxpool2<T: Scalar>(input: &Array<T>) -> (Array<T>, Vec<usize>) {
    maxpool_window(input, 2)
}

/// Routes the pooled gradient to the argmax positions.
pub fn maxpool_backward<T: Scalar>(upstream: &Array<T>, argmax: &[usize], channels: usize, len: usize) -> Array<T> {
    let mut g = Array::zeros(&[channels, len]);
    let gd = g.data_mut();
    for (&i, &u) in argmax.iter().zip(upstream.data()) {
        gd[i] += u;
    }
    g
}

/// Transposed convolution whose kernel size equals its stride: every input
/// frame expands into a block of `factor` output frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsample<T> {
    /// `in × out × factor`.
    pub kernel: ParamBuffer<T>,
}

impl<T: Scalar> Upsample<T> {
    /// Nearest-neighbour initialization: each channel copies itself into its block.
    pub fn block_constant(channels: usize, factor: usize) -> Self {
        let mut k = Array::zeros(&[channels, channels, factor]);
        for c in 0..channels {
            for m in 0..factor {
                k.data_mut()[(c * channels + c) * factor + m] = T::one();
            }
        }
        Upsample {
            kernel: ParamBuffer::new(k),
        }
    }

    pub fn factor(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn forward(&self, input: &Array<T>) -> Result<Array<T>> {
        transposed_conv(input, &self.kernel.value)
    }

    pub fn backward(&mut self, input: &Array<T>, upstream: &Array<T>) -> Array<T> {
        let s = self.kernel.shape();
        let (cin, cout, f) = (s[0], s[1], s[2]);
        let n = input.cols();
        let gk = self.kernel.grad.data_mut();
        for i in 0..cin {
            let x = input.row(i);
            for o in 0..cout {
                let gy = upstream.row(o);
                for m in 0..f {
                    let mut acc = T::zero();
                    for (j, &xv) in x.iter().enumerate().take(n) {
                        acc += xv * gy[j * f + m];
                    }
                    gk[(i * cout + o) * f + m] += acc;
                }
            }
        }
        strided_conv(upstream, &self.kernel.value).expect("shapes checked in forward")
    }
}

/// `y[o][j·f + m] = Σ_i x[i][j] · K[i][o][m]`.
pub fn transposed_conv<T: Scalar>(input: &Array<T>, kernel: &Array<T>) -> Result<Array<T>> {
    let s = kernel.shape();
    let (cin, cout, f) = (s[0], s[1], s[2]);
    if input.rank() != 2 || input.rows() != cin {
        return Err(Error::invalid(format!(
            "transposed convolution expects {cin} channels, got shape {:?}",
            input.shape()
        )));
    }
    let n = input.cols();
    let mut out = Array::zeros(&[cout, n * f]);
    let k = kernel.data();
    for i in 0..cin {
        let x = input.row(i);
        for o in 0..cout {
            let y = out.row_mut(o);
            for m in 0..f {
                let kv = k[(i * cout + o) * f + m];
                if kv == T::zero() {
                    continue;
                }
                for (j, &xv) in x.iter().enumerate() {
                    y[j * f + m] += xv * kv;
                }
            }
        }
    }
    Ok(out)
}

/// Strided convolution with the same kernel: the adjoint of [`transposed_conv`].
pub fn strided_conv<T: Scalar>(input: &Array<T>, kernel: &Array<T>) -> Result<Array<T>> {
    let s = kernel.shape();
    let (cin, cout, f) = (s[0], s[1], s[2]);
    if input.rank() != 2 || input.rows() != cout || input.cols() % f != 0 {
        return Err(Error::invalid(format!(
            "strided convolution expects {cout} channels with length divisible by {f}, got {:?}",
            input.shape()
        )));
    }
    let n = input.cols() / f;
    let k = kernel.data();
    let mut out = Array::zeros(&[cin, n]);
    for i in 0..cin {
        for o in 0..cout {
            let y = input.row(o);
            for m in 0..f {
                let kv = k[(i * cout + o) * f + m];
                if kv == T::zero() {
                    continue;
                }
                let x = out.row_mut(i);
                for (j, xv) in x.iter_mut().enumerate() {
                    *xv += kv * y[j * f + m];
                }
            }
        }
    }
    Ok(out)
}

/// Keeps the first `len` columns.
pub fn crop<T: Scalar>(input: &Array<T>, len: usize) -> Array<T> {
    if input.cols() == len {
        return input.clone();
    }
    let rows: Vec<Vec<T>> = (0..input.rows()).map(|r| input.row(r)[..len].to_vec()).collect();
    Array::from_rows(&rows).expect("non-empty crop")
}

/// Gradient of [`crop`]: zero-extends to `len` columns.
pub fn uncrop<T: Scalar>(grad: &Array<T>, len: usize) -> Array<T> {
    let mut out = Array::zeros(&[grad.rows(), len]);
    for r in 0..grad.rows() {
        out.row_mut(r)[..grad.cols()].copy_from_slice(grad.row(r));
    }
    out
}

/// Width-1 score convolution followed by a `2^q` transposed convolution,
/// cropped to `target_len` frames. Returns `C × target_len` logits.
pub fn score_and_upsample<T: Scalar>(
    features: &Array<T>,
    score_conv: &ConvLayer<T>,
    upsample: &Upsample<T>,
    target_len: usize,
) -> Result<Array<T>> {
    if score_conv.width() != 1 {
        return Err(Error::invalid("score convolution must have width 1"));
    }
    let scores = score_conv.forward(features)?;
    let up = upsample.forward(&scores)?;
    if up.cols() < target_len || up.cols() - target_len >= upsample.factor() {
        return Err(Error::invalid(format!(
            "upsampled length {} cannot be cropped to {target_len}",
            up.cols()
        )));
    }
    Ok(crop(&up, target_len))
}

/// Per-frame class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMap<T> {
    /// `T × C`.
    pub logits: Array<T>,
    /// Row-wise softmax of the logits, `T × C`.
    pub scores: Array<T>,
}

impl<T: Scalar> PredictionMap<T> {
    /// Builds the map from `C × T` logits.
    pub fn from_class_major(logits: &Array<T>) -> Self {
        let (c, len) = (logits.rows(), logits.cols());
        let mut lt = Array::zeros(&[len, c]);
        for k in 0..c {
            for (j, &v) in logits.row(k).iter().enumerate() {
                lt.data_mut()[j * c + k] = v;
            }
        }
        let scores = softmax_rows(&lt);
        PredictionMap { logits: lt, scores }
    }

    pub fn frames(&self) -> usize {
        self.scores.rows()
    }

    pub fn classes(&self) -> usize {
        self.scores.cols()
    }

    /// Wraps a score matrix directly (rows must already be normalized).
    pub fn from_scores(scores: Array<T>) -> Self {
        let logits = scores.map(|p| p.ln());
        PredictionMap { logits, scores }
    }
}

pub fn softmax_rows<T: Scalar>(x: &Array<T>) -> Array<T> {
    let mut out = x.clone();
    let c = x.cols();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_arr(shape: &[usize], rng: &mut ChaCha8Rng) -> Array<f64> {
        let n = shape.iter().product();
        Array::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn elu_examples() {
        assert_eq!(elu_variant(0.0f64), 0.0);
        assert_eq!(elu_variant(2.0f64), 2.0);
        assert!((elu_variant(-(2.0f64.ln())) + 0.5).abs() < 1e-15);
        assert_eq!(elu_variant(1e6f64), 1e6);
        assert!((elu_variant(-1e6f64) + 1.0).abs() < 1e-15);
        assert_eq!(elu_variant(50.0f64), 50.0);
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_arr(&[2, 9], &mut rng);
        let mut layer = ConvLayer::zeros(2, 2, 3);
        for c in 0..2 {
            layer.kernels.value.data_mut()[(c * 2 + c) * 3 + 1] = 1.0;
        }
        assert_eq!(conv1d_forward(&x, &layer).unwrap(), x);
    }

    #[test]
    fn zero_kernel_yields_bias() {
        let x = Array::filled(&[3, 5], 4.0);
        let mut layer = ConvLayer::<f64>::zeros(3, 2, 3);
        layer.bias.value.data_mut().copy_from_slice(&[0.5, -1.5]);
        let y = conv1d_forward(&x, &layer).unwrap();
        assert!(y.row(0).iter().all(|&v| v == 0.5));
        assert!(y.row(1).iter().all(|&v| v == -1.5));
        assert!(conv1d_forward(&Array::zeros(&[2, 5]), &layer).is_err());
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_arr(&[3, 11], &mut rng);
        let mut layer = ConvLayer::<f64>::random(3, 2, 3, 1.0, &mut rng);
        layer.bias.value.data_mut().copy_from_slice(&[0.1, -0.2]);
        let y = conv1d_forward(&x, &layer).unwrap();
        let k = layer.kernels.value.data();
        for o in 0..2 {
            for j in 0..11 {
                let mut acc = layer.bias.value.data()[o];
                for i in 0..3 {
                    for m in 0..3 {
                        let src = (j as isize + m as isize - 1).clamp(0, 10) as usize;
                        acc += k[(o * 3 + i) * 3 + m] * x.at2(i, src);
                    }
                }
                assert!((y.at2(o, j) - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_arr(&[2, 7], &mut rng);
        let up = rand_arr(&[3, 7], &mut rng);
        let mut layer = ConvLayer::<f64>::random(2, 3, 3, 1.0, &mut rng);
        let obj = |l: &ConvLayer<f64>, x: &Array<f64>| {
            conv1d_forward(x, l).unwrap().data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let gx = layer.backward(&x, &up);
        let h = 1e-6;
        for idx in 0..x.len() {
            let mut p = x.clone();
            p.data_mut()[idx] += h;
            let mut m = x.clone();
            m.data_mut()[idx] -= h;
            let fd = (obj(&layer, &p) - obj(&layer, &m)) / (2.0 * h);
            assert!((fd - gx.data()[idx]).abs() < 1e-7);
        }
        for idx in 0..layer.kernels.len() {
            let mut p = layer.clone();
            p.kernels.value.data_mut()[idx] += h;
            let mut m = layer.clone();
            m.kernels.value.data_mut()[idx] -= h;
            let fd = (obj(&p, &x) - obj(&m, &x)) / (2.0 * h);
            assert!((fd - layer.kernels.grad.data()[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn maxpool_examples() {
        let x = Array::from_rows(&[vec![1.0, 3.0, 2.0, 0.0]]).unwrap();
        let (y, idx) = maxpool2(&x);
        assert_eq!(y.data(), &[3.0, 2.0]);
        assert_eq!(idx, vec![1, 2]);
        let x5 = Array::from_rows(&[vec![1.0, 0.0, 0.0, 2.0, -4.0]]).unwrap();
        let (y5, _) = maxpool2(&x5);
        assert_eq!(y5.data(), &[1.0, 2.0, -4.0]);
    }

    #[test]
    fn maxpool_gradient_routes_to_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_arr(&[2, 9], &mut rng);
        let up = rand_arr(&[2, 5], &mut rng);
        let (_, idx) = maxpool2(&x);
        let g = maxpool_backward(&up, &idx, 2, 9);
        let obj = |x: &Array<f64>| maxpool2(x).0.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>();
        let h = 1e-7;
        for i in 0..x.len() {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            let fd = (obj(&p) - obj(&m)) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-6);
        }
        assert_eq!(g.data().iter().filter(|&&v| v != 0.0).count(), 10);
    }

    #[test]
    fn constant_scores_upsample_to_constant_logits() {
        let mut score = ConvLayer::<f64>::zeros(4, 2, 1);
        score.bias.value.data_mut().copy_from_slice(&[1.5, -0.5]);
        let mut up = Upsample::block_constant(2, 8);
        up.kernel.value.fill(0.0);
        for c in 0..2 {
            for m in 0..8 {
                up.kernel.value.data_mut()[(c * 2 + c) * 8 + m] = 1.0;
            }
        }
        let feats = Array::filled(&[4, 8], 0.3);
        let logits = score_and_upsample(&feats, &score, &up, 64).unwrap();
        assert_eq!(logits.shape(), &[2, 64]);
        assert!(logits.row(0).iter().all(|&v| v == 1.5));
        assert!(logits.row(1).iter().all(|&v| v == -0.5));
        assert!(score_and_upsample(&feats, &score, &up, 50).is_err());
    }

    #[test]
    fn upsample_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in [2usize, 4, 8] {
            let k = rand_arr(&[3, 2, f], &mut rng);
            let x = rand_arr(&[3, 6], &mut rng);
            let y = rand_arr(&[2, 6 * f], &mut rng);
            let lhs: f64 = transposed_conv(&x, &k).unwrap().data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(strided_conv(&y, &k).unwrap().data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn upsample_backward_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_arr(&[2, 3], &mut rng);
        let up = rand_arr(&[2, 12], &mut rng);
        let mut layer = Upsample::<f64>::block_constant(2, 4);
        layer.kernel.value = rand_arr(&[2, 2, 4], &mut rng);
        let gx = layer.backward(&x, &up);
        let obj = |l: &Upsample<f64>, x: &Array<f64>| {
            l.forward(x).unwrap().data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let h = 1e-6;
        for i in 0..layer.kernel.len() {
            let mut p = layer.clone();
            p.kernel.value.data_mut()[i] += h;
            let mut m = layer.clone();
            m.kernel.value.data_mut()[i] -= h;
            assert!(((obj(&p, &x) - obj(&m, &x)) / (2.0 * h) - layer.kernel.grad.data()[i]).abs() < 1e-7);
        }
        for i in 0..x.len() {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            assert!(((obj(&layer, &p) - obj(&layer, &m)) / (2.0 * h) - gx.data()[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_arr(&[10, 4], &mut rng).scale(30.0);
        let p = softmax_rows(&x);
        for r in 0..10 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.row(r).iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    use rand::Rng;
}
