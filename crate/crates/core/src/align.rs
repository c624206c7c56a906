//! Alignment filters: the shifted exponential distance kernel, its
//! conditional (anti-saturation) gradient, and the forward/backward passes of
//! a filter bank shared across every input channel.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::array::{pad_edges, Array, ParamBuffer};
use crate::data::MotionSequence;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Squared-distance threshold where the conditional gradient switches to its
/// linear branch. The smooth gradient of `exp(-d²)` peaks at `d = sqrt(0.5)`.
pub const SATURATION_DIST2: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignFilter<T> {
    pub id: usize,
    pub weights: ParamBuffer<T>,
}

impl<T: Scalar> AlignFilter<T> {
    pub fn new(id: usize, weights: Vec<T>) -> Self {
        let len = weights.len();
        AlignFilter {
            id,
            weights: ParamBuffer::new(Array::from_vec(&[len], weights).expect("non-empty filter")),
        }
    }

    pub fn values(&self) -> &[T] {
        self.weights.values()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentConfig {
    /// Receptive field of an Al-filter, in frames.
    pub t: usize,
    pub stride: usize,
    /// Shift of the kernel; activations live in `[-a, 1]`.
    pub a: f64,
    pub filter_count: usize,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            t: 3,
            stride: 1,
            a: 0.1,
            filter_count: 16,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Config(format!("t must be at least 2, got {}", self.t)));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Config(format!("a must lie in (0, 1), got {}", self.a)));
        }
        if self.filter_count == 0 {
            return Err(Error::Config("filter count must be at least 1".into()));
        }
        if self.stride != 1 {
            // the map must keep one column per frame
            return Err(Error::Config(format!(
                "only stride 1 is supported, got {}",
                self.stride
            )));
        }
        Ok(())
    }
}

/// One row per filter, one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap<T> {
    pub values: Array<T>,
    pub source_filter_ids: Vec<usize>,
}

#[inline]
pub(crate) fn activation_from_dist2<T: Scalar>(d2: T, a: T) -> T {
    (T::one() + a) * (-d2).exp() - a
}

/// `(1 + a) exp(-|x - f|²) - a`.
pub fn kernel_activation<T: Scalar>(window: &[T], filter: &[T], a: T) -> Result<T> {
    if window.len() != filter.len() {
        return Err(Error::invalid(format!(
            "window length {} does not match filter length {}",
            window.len(),
            filter.len()
        )));
    }
    Ok(activation_from_dist2(dist2(window, filter), a))
}

#[inline]
pub(crate) fn dist2<T: Scalar>(x: &[T], f: &[T]) -> T {
    x.iter()
        .zip(f)
        .fold(T::zero(), |acc, (&xi, &fi)| acc + (xi - fi) * (xi - fi))
}

/// Adds `scale * d g / d f` to `out`, using the conditional rule: the exact
/// gradient inside the saturation radius, and the linearly growing surrogate
/// outside it. `delta` is `f - x`.
#[inline]
pub(crate) fn accumulate_conditional_grad<T: Scalar>(
    delta: &[T],
    d2: T,
    a: T,
    scale: T,
    out: &mut [T],
) {
    let two = T::lit(2.0);
    let e = (T::one() + a) * (-d2).exp();
    if d2 <= T::lit(SATURATION_DIST2) {
        let c = -two * e * scale;
        for (o, &d) in out.iter_mut().zip(delta) {
            *o += c * d;
        }
    } else {
        let c = -two * (e + T::one()) * scale;
        let s = two * T::lit(SATURATION_DIST2.sqrt()) * scale;
        for (o, &d) in out.iter_mut().zip(delta) {
            *o += c * d + s * d.sign0();
        }
    }
}

/// Conditional gradient of [`kernel_activation`] with respect to the filter.
///
/// Inside `|x - f|² <= 0.5` this is the exact derivative
/// `-2 (1 + a) e^{-|Δ|²} Δ` with `Δ = f - x`. Outside, the exponential term is
/// joined by `-2Δ + 2 sqrt(0.5) sign(Δ)`, which keeps pulling the filter toward
/// the window when the kernel itself has flattened out.
pub fn kernel_gradient<T: Scalar>(window: &[T], filter: &[T], a: T) -> Result<Vec<T>> {
    if window.len() != filter.len() {
        return Err(Error::invalid(format!(
            "window length {} does not match filter length {}",
            window.len(),
            filter.len()
        )));
    }
    let delta: Vec<T> = filter.iter().zip(window).map(|(&f, &x)| f - x).collect();
    let d2 = delta.iter().map(|&d| d * d).sum();
    let mut out = vec![T::zero(); delta.len()];
    accumulate_conditional_grad(&delta, d2, a, T::one(), &mut out);
    Ok(out)
}

/// Exact (smooth) gradient of the kernel with respect to the filter.
pub fn smooth_kernel_gradient<T: Scalar>(window: &[T], filter: &[T], a: T) -> Vec<T> {
    let d2 = dist2(window, filter);
    let e = (T::one() + a) * (-d2).exp();
    filter
        .iter()
        .zip(window)
        .map(|(&f, &x)| -T::lit(2.0) * e * (f - x))
        .collect()
}

/// Per-site squared distances of a set of weight vectors scanned over every
/// channel; enough to replay the backward pass together with the channels.
#[derive(Debug, Clone)]
pub(crate) struct ScanCache<T> {
    /// `[row][channel][frame]`, flattened.
    pub dist2: Vec<T>,
    pub channels: usize,
    pub frames: usize,
}

/// Scans every weight vector over every edge-padded channel and sums the
/// kernel activations over channels. Returns a `rows × T` map.
pub(crate) fn scan_rows<T: Scalar>(
    channels: &Array<T>,
    weights: &[Vec<T>],
    a: T,
) -> (Array<T>, ScanCache<T>) {
    let (dx, frames) = (channels.rows(), channels.cols());
    let rows = weights.len();
    let mut map = Array::zeros(&[rows.max(1), frames]);
    let mut cache = vec![T::zero(); rows * dx * frames];
    let mut padded_by_width: Vec<(usize, Vec<Vec<T>>)> = Vec::new();
    for (k, w) in weights.iter().enumerate() {
        let width = w.len();
        let padded = match padded_by_width.iter().position(|(wd, _)| *wd == width) {
            Some(p) => &padded_by_width[p].1,
            None => {
                let pads = (0..dx).map(|i| pad_edges(channels.row(i), width)).collect();
                padded_by_width.push((width, pads));
                &padded_by_width.last().unwrap().1
            }
        };
        for (i, chan) in padded.iter().enumerate() {
            let base = (k * dx + i) * frames;
            for j in 0..frames {
                let d2 = dist2(&chan[j..j + width], w);
                cache[base + j] = d2;
            }
        }
        let row = map.row_mut(k);
        for i in 0..dx {
            let base = (k * dx + i) * frames;
            for (j, v) in row.iter_mut().enumerate() {
                *v += activation_from_dist2(cache[base + j], a);
            }
        }
    }
    if rows == 0 {
        map = Array::zeros(&[1, frames]);
    }
    (
        map,
        ScanCache {
            dist2: cache,
            channels: dx,
            frames,
        },
    )
}

/// Backward pass of [`scan_rows`]: adds the conditional gradient of every site,
/// weighted by `upstream[k][j]`, into `grads[k]`.
pub(crate) fn scan_rows_backward<T: Scalar>(
    channels: &Array<T>,
    weights: &[Vec<T>],
    cache: &ScanCache<T>,
    upstream: &Array<T>,
    a: T,
    grads: &mut [Vec<T>],
) {
    let (dx, frames) = (cache.channels, cache.frames);
    let mut delta = Vec::new();
    for (k, w) in weights.iter().enumerate() {
        let width = w.len();
        delta.resize(width, T::zero());
        let up = upstream.row(k);
        for i in 0..dx {
            let chan = pad_edges(channels.row(i), width);
            let base = (k * dx + i) * frames;
            for j in 0..frames {
                let u = up[j];
                if u == T::zero() {
                    continue;
                }
                for (m, d) in delta.iter_mut().enumerate() {
                    *d = w[m] - chan[j + m];
                }
                accumulate_conditional_grad(&delta, cache.dist2[base + j], a, u, &mut grads[k]);
            }
        }
    }
}

/// Cached state of [`forward_align`] needed by [`backward_align`].
#[derive(Debug, Clone)]
pub struct AlignCache<T> {
    channels: Array<T>,
    weights: Vec<Vec<T>>,
    scan: ScanCache<T>,
    a: T,
}

/// Output of [`forward_align`].
#[derive(Debug, Clone)]
pub struct AlignOutput<T> {
    /// Full activation tensor, `T × d_x × d_1`.
    pub per_channel: Array<T>,
    /// Channel-summed map, `d_1 × T`.
    pub map: AlignmentMap<T>,
    pub cache: AlignCache<T>,
}

/// Applies every filter to every channel of `sequence`.
pub fn forward_align<T: Scalar>(
    sequence: &MotionSequence<T>,
    filters: &[AlignFilter<T>],
    cfg: &AlignmentConfig,
) -> Result<AlignOutput<T>> {
    let channels = sequence.channels();
    if channels.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    if filters.is_empty() {
        return Err(Error::invalid("no alignment filters"));
    }
    if let Some(f) = filters.iter().find(|f| f.len() != cfg.t) {
        return Err(Error::invalid(format!(
            "filter {} has length {}, expected t = {}",
            f.id,
            f.len(),
            cfg.t
        )));
    }
    let a = T::lit(cfg.a);
    let weights: Vec<Vec<T>> = filters.iter().map(|f| f.values().to_vec()).collect();
    let (summed, scan) = scan_rows(channels, &weights, a);
    let (dx, frames, d1) = (channels.rows(), channels.cols(), filters.len());
    let mut full = vec![T::zero(); frames * dx * d1];
    for k in 0..d1 {
        for i in 0..dx {
            for j in 0..frames {
                full[(j * dx + i) * d1 + k] =
                    activation_from_dist2(scan.dist2[(k * dx + i) * frames + j], a);
            }
        }
    }
    Ok(AlignOutput {
        per_channel: Array::from_vec(&[frames, dx, d1], full)?,
        map: AlignmentMap {
            values: summed,
            source_filter_ids: filters.iter().map(|f| f.id).collect(),
        },
        cache: AlignCache {
            channels: channels.clone(),
            weights,
            scan,
            a,
        },
    })
}

/// Accumulates `d loss / d f` into each filter's gradient buffer, given the
/// upstream gradient of the channel-summed map (`d_1 × T`).
pub fn backward_align<T: Scalar>(
    upstream: &Array<T>,
    cache: Option<&AlignCache<T>>,
    filters: &mut [AlignFilter<T>],
) -> Result<()> {
    let cache = cache.ok_or_else(|| Error::State("backward_align called without a forward cache".into()))?;
    if upstream.shape() != [cache.weights.len(), cache.scan.frames] {
        return Err(Error::invalid(format!(
            "upstream gradient shape {:?} does not match map shape [{}, {}]",
            upstream.shape(),
            cache.weights.len(),
            cache.scan.frames
        )));
    }
    if filters.len() != cache.weights.len() {
        return Err(Error::State("filter bank changed since forward pass".into()));
    }
    let mut grads: Vec<Vec<T>> = cache.weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
    scan_rows_backward(&cache.channels, &cache.weights, &cache.scan, upstream, cache.a, &mut grads);
    for (f, g) in filters.iter_mut().zip(grads) {
        for (dst, src) in f.weights.grad.data_mut().iter_mut().zip(g) {
            *dst += src;
        }
    }
    Ok(())
}

/// Samples `count` length-`t` windows from the data and jitters them with
/// Gaussian noise of standard deviation `jitter`.
pub fn init_filters_from_data<T: Scalar, R: Rng>(
    sequences: &[MotionSequence<T>],
    count: usize,
    t: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<Vec<AlignFilter<T>>> {
    let usable: Vec<&MotionSequence<T>> = sequences.iter().filter(|s| s.len() >= t).collect();
    if usable.is_empty() {
        return Err(Error::invalid(format!(
            "no sequence has at least t = {t} frames to seed the filters"
        )));
    }
    let noise = Normal::new(0.0, jitter.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..count)
        .map(|id| {
            let seq = usable[rng.random_range(0..usable.len())];
            let ch = rng.random_range(0..seq.dims());
            let start = rng.random_range(0..=seq.len() - t);
            let w = seq.channel(ch)[start..start + t]
                .iter()
                .map(|&v| v + T::lit(noise.sample(rng)))
                .collect();
            AlignFilter::new(id, w)
        })
        .collect())
}
