//! The full network: alignment front end, optional Abs-filter rows, the 1D
//! convolutional backbone and the staged upsampling decoder with fine skips.

use rand::Rng;

use crate::align::{init_filters_from_data, scan_rows, scan_rows_backward, AlignFilter, AlignmentConfig, ScanCache};
use crate::array::{pad_edges, Array, ParamBuffer};
use crate::backbone::{
    crop, elu_derivative, elu_variant, maxpool2, maxpool_backward, maxpool_window, random_array, uncrop,
    BackboneConfig, ConvLayer, PredictionMap, Upsample, CONV_WIDTH,
};
use crate::data::MotionSequence;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synthesis::{route_segment_grads, AbsFilter, AugmentedMap, RowSource, DEFAULT_MAX_CHAIN, DEFAULT_THRESHOLD};

/// Network variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Al-filters, Abs-filters and the fine-prediction skips.
    Full,
    /// No fine-prediction skips.
    NoFine,
    /// Al-filters only.
    AlOnly,
    /// Linear 1D-conv filters in place of the Al-filters, no Abs-filters.
    ConvFront,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::NoFine, Mode::AlOnly, Mode::ConvFront];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoFine => "nf",
            Mode::AlOnly => "al",
            Mode::ConvFront => "1d",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn uses_abs(self) -> bool {
        matches!(self, Mode::Full | Mode::NoFine)
    }

    pub fn uses_fine(self) -> bool {
        self == Mode::Full
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub align: AlignmentConfig,
    pub backbone: BackboneConfig,
    pub mode: Mode,
    /// Pair-detection threshold `r`.
    pub threshold: f64,
    pub max_chain: usize,
    /// Std of the jitter added to data-sampled Al-filter initializations.
    pub init_jitter: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            align: AlignmentConfig::default(),
            backbone: BackboneConfig::default(),
            mode: Mode::Full,
            threshold: DEFAULT_THRESHOLD,
            max_chain: DEFAULT_MAX_CHAIN,
            init_jitter: 0.05,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.align.validate()?;
        self.backbone.validate()?;
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold r must lie in (0, 1], got {}", self.threshold)));
        }
        if self.max_chain < 2 {
            return Err(Error::Config("max chain length must be at least 2".into()));
        }
        Ok(())
    }

    /// Resolution levels at which skip maps enter the decoder, descending.
    /// Level `l` takes the Abs-filters with multiplicity `2^l`, `l >= 2`.
    pub fn skip_levels(&self) -> Vec<usize> {
        if !self.mode.uses_fine() {
            return Vec::new();
        }
        let q = self.backbone.depth;
        (2..=q).rev().filter(|&l| (1usize << l) <= self.max_chain).collect()
    }

    /// Levels visited by the decoder, from `q` down to 0.
    pub fn decoder_levels(&self) -> Vec<usize> {
        let mut levels = vec![self.backbone.depth];
        for l in self.skip_levels() {
            if *levels.last().unwrap() != l {
                levels.push(l);
            }
        }
        levels.push(0);
        levels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepLayer<T> {
    pub conv_a: ConvLayer<T>,
    pub conv_b: ConvLayer<T>,
}

/// Fine-prediction branch: max-pools the maps of Abs-filters with
/// multiplicity `2^level` by that factor and scores them.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipBranch<T> {
    pub level: usize,
    /// Indices into the network's Abs-filter list.
    pub members: Vec<usize>,
    /// Width-1 score kernel, `C × members × 1`.
    pub kernel: ParamBuffer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetworkConfig,
    /// Al-filters, or linear taps in [`Mode::ConvFront`].
    pub filters: Vec<AlignFilter<T>>,
    pub abs_filters: Vec<AbsFilter>,
    pub layers: Vec<DeepLayer<T>>,
    pub score: ConvLayer<T>,
    pub skips: Vec<SkipBranch<T>>,
    pub upsamplers: Vec<Upsample<T>>,
    pub last_synthesis_epoch: Option<usize>,
}

struct LayerCache<T> {
    input: Array<T>,
    z1: Array<T>,
    h1: Array<T>,
    z2: Array<T>,
    mask: Option<Vec<T>>,
    pool_idx: Vec<usize>,
}

struct SkipCache<T> {
    pooled: Array<T>,
    idx: Vec<usize>,
    rows: usize,
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardCache<T> {
    channels: Array<T>,
    front_scan: Option<ScanCache<T>>,
    channel_sum: Option<Vec<T>>,
    abs_scan: Option<ScanCache<T>>,
    augmented: Array<T>,
    layers: Vec<LayerCache<T>>,
    features: Array<T>,
    /// Input of each upsampling stage.
    stage_inputs: Vec<Array<T>>,
    skip_caches: Vec<Option<SkipCache<T>>>,
    frames: usize,
}

impl<T> ForwardCache<T> {
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Augmented alignment map computed during the pass.
    pub fn augmented(&self) -> &Array<T> {
        &self.augmented
    }
}

fn len_at_level(frames: usize, level: usize) -> usize {
    frames.div_ceil(1 << level)
}

impl<T: Scalar> Network<T> {
    /// Builds a network with Al-filters sampled from `sequences`.
    pub fn new<R: Rng>(config: NetworkConfig, input_dims: usize, sequences: &[MotionSequence<T>], rng: &mut R) -> Result<Self> {
        config.validate()?;
        let t = config.align.t;
        let d1 = config.align.filter_count;
        let filters = match config.mode {
            Mode::ConvFront => {
                let std = (1.0 / (t * input_dims.max(1)) as f64).sqrt();
                (0..d1)
                    .map(|id| AlignFilter::new(id, random_array::<T, _>(&[t], std, rng).into_data()))
                    .collect()
            }
            _ => init_filters_from_data(sequences, d1, t, config.init_jitter, rng)?,
        };
        Ok(Self::with_filters(config, filters, rng))
    }

    /// Builds a network around the given front-end filters.
    pub fn with_filters<R: Rng>(config: NetworkConfig, filters: Vec<AlignFilter<T>>, rng: &mut R) -> Self {
        let bb = &config.backbone;
        let mut layers = Vec::with_capacity(bb.depth);
        let mut input = filters.len();
        for &w in &bb.widths {
            layers.push(DeepLayer {
                conv_a: ConvLayer::random(input, w, CONV_WIDTH, 1.0, rng),
                conv_b: ConvLayer::random(w, w, CONV_WIDTH, 1.0, rng),
            });
            input = w;
        }
        let score = ConvLayer::random(input, bb.classes, 1, 0.5, rng);
        let levels = config.decoder_levels();
        let upsamplers = levels
            .windows(2)
            .map(|w| Upsample::block_constant(bb.classes, 1 << (w[0] - w[1])))
            .collect();
        let skips = config
            .skip_levels()
            .into_iter()
            .map(|level| SkipBranch {
                level,
                members: Vec::new(),
                kernel: ParamBuffer::zeros(&[bb.classes, 0, 1]),
            })
            .collect();
        Network {
            config,
            filters,
            abs_filters: Vec::new(),
            layers,
            score,
            skips,
            upsamplers,
            last_synthesis_epoch: None,
        }
    }

    pub fn classes(&self) -> usize {
        self.config.backbone.classes
    }

    pub fn min_length(&self) -> usize {
        self.config.backbone.min_length()
    }

    /// Rows of the augmented map fed to the backbone.
    pub fn augmented_rows(&self) -> usize {
        self.filters.len() + self.abs_filters.len()
    }

    fn front_weights(&self) -> Vec<Vec<T>> {
        self.filters.iter().map(|f| f.values().to_vec()).collect()
    }

    fn abs_weights(&self) -> Result<Vec<Vec<T>>> {
        self.abs_filters.iter().map(|f| f.weights(&self.filters)).collect()
    }

    /// Augmented alignment map of a (normalized) sequence.
    pub fn augmented_map(&self, seq: &MotionSequence<T>) -> Result<AugmentedMap<T>> {
        let (values, _, _, _) = self.front(seq)?;
        let mut row_index: Vec<RowSource> = self.filters.iter().map(|f| RowSource::Al(f.id)).collect();
        row_index.extend((0..self.abs_filters.len()).map(RowSource::Abs));
        Ok(AugmentedMap { values, row_index })
    }

    #[allow(clippy::type_complexity)]
    fn front(&self, seq: &MotionSequence<T>) -> Result<(Array<T>, Option<ScanCache<T>>, Option<Vec<T>>, Option<ScanCache<T>>)> {
        let channels = seq.channels();
        let frames = seq.len();
        let a = T::lit(self.config.align.a);
        let (front_rows, front_scan, channel_sum) = if self.config.mode == Mode::ConvFront {
            let t = self.config.align.t;
            let mut sum = vec![T::zero(); frames + t - 1];
            for i in 0..seq.dims() {
                for (s, v) in sum.iter_mut().zip(pad_edges(channels.row(i), t)) {
                    *s += v;
                }
            }
            let mut rows = Array::zeros(&[self.filters.len(), frames]);
            for (k, f) in self.filters.iter().enumerate() {
                let w = f.values();
                for (j, out) in rows.row_mut(k).iter_mut().enumerate() {
                    *out = w.iter().zip(&sum[j..j + t]).map(|(&a, &b)| a * b).sum();
                }
            }
            (rows, None, Some(sum))
        } else {
            let (rows, scan) = scan_rows(channels, &self.front_weights(), a);
            (rows, Some(scan), None)
        };
        if self.abs_filters.is_empty() {
            return Ok((front_rows, front_scan, channel_sum, None));
        }
        let (abs_rows, abs_scan) = scan_rows(channels, &self.abs_weights()?, a);
        let mut stacked = front_rows.into_data();
        stacked.extend_from_slice(abs_rows.data());
        let augmented = Array::from_vec(&[self.augmented_rows(), frames], stacked)?;
        Ok((augmented, front_scan, channel_sum, Some(abs_scan)))
    }

    /// Inference forward pass (dropout disabled).
    pub fn predict(&self, seq: &MotionSequence<T>) -> Result<PredictionMap<T>> {
        Ok(self.forward::<rand_chacha::ChaCha8Rng>(seq, None)?.0)
    }

    /// Forward pass; `dropout` supplies the mask generator when training.
    pub fn forward<R: Rng>(&self, seq: &MotionSequence<T>, mut dropout: Option<&mut R>) -> Result<(PredictionMap<T>, ForwardCache<T>)> {
        let frames = seq.len();
        if frames < self.min_length() {
            return Err(Error::invalid(format!(
                "sequence `{}` has {frames} frames; this model needs at least {} (2^q)",
                seq.source,
                self.min_length()
            )));
        }
        if seq.dims() == 0 {
            return Err(Error::invalid("sequence has no channels"));
        }
        let (augmented, front_scan, channel_sum, abs_scan) = self.front(seq)?;
        let rate = self.config.backbone.dropout;
        let keep_scale = T::lit(1.0 / (1.0 - rate));
        let mut x = augmented.clone();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z1 = layer.conv_a.forward(&x)?;
            let h1 = z1.map(elu_variant);
            let z2 = layer.conv_b.forward(&h1)?;
            let mut h2 = z2.map(elu_variant);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => {
                    let m: Vec<T> = (0..h2.len())
                        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep_scale })
                        .collect();
                    for (v, &k) in h2.data_mut().iter_mut().zip(&m) {
                        *v *= k;
                    }
                    Some(m)
                }
                _ => None,
            };
            let (pooled, pool_idx) = maxpool2(&h2);
            layer_caches.push(LayerCache {
                input: x,
                z1,
                h1,
                z2,
                mask,
                pool_idx,
            });
            x = pooled;
        }
        let features = x;
        let mut cur = self.score.forward(&features)?;
        let levels = self.config.decoder_levels();
        let d1 = self.filters.len();
        let mut stage_inputs = Vec::with_capacity(self.upsamplers.len());
        let mut skip_caches: Vec<Option<SkipCache<T>>> = Vec::with_capacity(self.skips.len());
        for (s, up) in self.upsamplers.iter().enumerate() {
            let level = levels[s];
            if let Some(skip) = self.skips.iter().find(|b| b.level == level) {
                skip_caches.push(self.apply_skip(skip, &augmented, d1, &mut cur)?);
            }
            stage_inputs.push(cur.clone());
            let next = len_at_level(frames, levels[s + 1]);
            cur = crop(&up.forward(&cur)?, next);
        }
        let prediction = PredictionMap::from_class_major(&cur);
        Ok((
            prediction,
            ForwardCache {
                channels: seq.channels().clone(),
                front_scan,
                channel_sum,
                abs_scan,
                augmented,
                layers: layer_caches,
                features,
                stage_inputs,
                skip_caches,
                frames,
            },
        ))
    }

    fn apply_skip(&self, skip: &SkipBranch<T>, augmented: &Array<T>, d1: usize, cur: &mut Array<T>) -> Result<Option<SkipCache<T>>> {
        if skip.members.is_empty() {
            return Ok(None);
        }
        let frames = augmented.cols();
        let mut rows = Vec::with_capacity(skip.members.len() * frames);
        for &m in &skip.members {
            rows.extend_from_slice(augmented.row(d1 + m));
        }
        let rows = Array::from_vec(&[skip.members.len(), frames], rows)?;
        let (pooled, idx) = maxpool_window(&rows, 1 << skip.level);
        if pooled.cols() != cur.cols() {
            return Err(Error::State(format!(
                "skip map length {} does not match decoder length {}",
                pooled.cols(),
                cur.cols()
            )));
        }
        let (c, n) = (self.classes(), skip.members.len());
        let k = skip.kernel.value.data();
        for o in 0..c {
            let y = cur.row_mut(o);
            for i in 0..n {
                let kv = k[o * n + i];
                for (yj, &p) in y.iter_mut().zip(pooled.row(i)) {
                    *yj += kv * p;
                }
            }
        }
        Ok(Some(SkipCache {
            pooled,
            idx,
            rows: n,
        }))
    }

    /// Backpropagates `d loss / d logits` (`T × C`) and accumulates every
    /// parameter gradient.
    pub fn backward(&mut self, cache: &ForwardCache<T>, grad_logits: &Array<T>) -> Result<()> {
        let (frames, c) = (cache.frames, self.classes());
        if grad_logits.shape() != [frames, c] {
            return Err(Error::invalid(format!(
                "logit gradient shape {:?}, expected [{frames}, {c}]",
                grad_logits.shape()
            )));
        }
        let mut g = Array::zeros(&[c, frames]);
        for j in 0..frames {
            for k in 0..c {
                g.data_mut()[k * frames + j] = grad_logits.at2(j, k);
            }
        }
        let d1 = self.filters.len();
        let mut g_aug = Array::zeros(&[self.augmented_rows(), frames]);
        let levels = self.config.decoder_levels();
        let mut skip_slot = cache.skip_caches.len();
        for s in (0..self.upsamplers.len()).rev() {
            let input = &cache.stage_inputs[s];
            let full_len = input.cols() * self.upsamplers[s].factor();
            g = self.upsamplers[s].backward(input, &uncrop(&g, full_len));
            let level = levels[s];
            if let Some(b) = self.skips.iter().position(|b| b.level == level) {
                skip_slot -= 1;
                if let Some(sc) = &cache.skip_caches[skip_slot] {
                    let skip = &mut self.skips[b];
                    let n = sc.rows;
                    let k = skip.kernel.value.data().to_vec();
                    let gk = skip.kernel.grad.data_mut();
                    let mut g_pooled = Array::zeros(&[n, sc.pooled.cols()]);
                    for o in 0..c {
                        let go = g.row(o);
                        for i in 0..n {
                            gk[o * n + i] += go.iter().zip(sc.pooled.row(i)).map(|(&a, &b)| a * b).sum();
                            let kv = k[o * n + i];
                            for (gp, &gv) in g_pooled.row_mut(i).iter_mut().zip(go) {
                                *gp += kv * gv;
                            }
                        }
                    }
                    let g_rows = maxpool_backward(&g_pooled, &sc.idx, n, frames);
                    for (i, &m) in skip.members.iter().enumerate() {
                        for (dst, &src) in g_aug.row_mut(d1 + m).iter_mut().zip(g_rows.row(i)) {
                            *dst += src;
                        }
                    }
                }
            }
        }
        let mut g = self.score.backward(&cache.features, &g);
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers).rev() {
            let (w, len) = (lc.z2.rows(), lc.z2.cols());
            let mut gd = maxpool_backward(&g, &lc.pool_idx, w, len);
            if let Some(mask) = &lc.mask {
                for (v, &m) in gd.data_mut().iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            for (v, &z) in gd.data_mut().iter_mut().zip(lc.z2.data()) {
                *v *= elu_derivative(z);
            }
            let mut gh1 = layer.conv_b.backward(&lc.h1, &gd);
            for (v, &z) in gh1.data_mut().iter_mut().zip(lc.z1.data()) {
                *v *= elu_derivative(z);
            }
            g = layer.conv_a.backward(&lc.input, &gh1);
        }
        g_aug.add_assign(&g)?;
        let a = T::lit(self.config.align.a);
        if let Some(sum) = &cache.channel_sum {
            let t = self.config.align.t;
            for (k, f) in self.filters.iter_mut().enumerate() {
                let gk = f.weights.grad.data_mut();
                for (j, &u) in g_aug.row(k).iter().enumerate() {
                    for m in 0..t {
                        gk[m] += u * sum[j + m];
                    }
                }
            }
        } else if let Some(scan) = &cache.front_scan {
            let weights = self.front_weights();
            let mut grads: Vec<Vec<T>> = weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
            let up = Array::from_vec(&[d1, frames], g_aug.data()[..d1 * frames].to_vec())?;
            scan_rows_backward(&cache.channels, &weights, scan, &up, a, &mut grads);
            for (f, gr) in self.filters.iter_mut().zip(grads) {
                for (dst, src) in f.weights.grad.data_mut().iter_mut().zip(gr) {
                    *dst += src;
                }
            }
        }
        if let Some(scan) = &cache.abs_scan {
            let weights = self.abs_weights()?;
            let n = weights.len();
            let up = Array::from_vec(&[n, frames], g_aug.data()[d1 * frames..].to_vec())?;
            let mut grads: Vec<Vec<T>> = weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
            scan_rows_backward(&cache.channels, &weights, scan, &up, a, &mut grads);
            let chains: Vec<Vec<usize>> = self.abs_filters.iter().map(|f| f.chain.clone()).collect();
            route_segment_grads(&chains, &grads, &mut self.filters)?;
        }
        Ok(())
    }

    /// Every trainable buffer in a fixed order.
    pub fn params(&self) -> Vec<&ParamBuffer<T>> {
        let mut out: Vec<&ParamBuffer<T>> = self.filters.iter().map(|f| &f.weights).collect();
        for l in &self.layers {
            out.extend(l.conv_a.params());
            out.extend(l.conv_b.params());
        }
        out.extend(self.score.params());
        out.extend(self.skips.iter().map(|s| &s.kernel));
        out.extend(self.upsamplers.iter().map(|u| &u.kernel));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamBuffer<T>> {
        let mut out: Vec<&mut ParamBuffer<T>> = self.filters.iter_mut().map(|f| &mut f.weights).collect();
        for l in &mut self.layers {
            out.extend(l.conv_a.params_mut());
            out.extend(l.conv_b.params_mut());
        }
        out.extend(self.score.params_mut());
        out.extend(self.skips.iter_mut().map(|s| &mut s.kernel));
        out.extend(self.upsamplers.iter_mut().map(|u| &mut u.kernel));
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Replaces the Abs-filter set. Input weights of rows whose chain
    /// survives are carried over (with their optimizer state); new rows get
    /// fresh random weights in the first convolution and zero skip weights.
    pub fn set_abs_filters<R: Rng>(&mut self, new: Vec<AbsFilter>, rng: &mut R) -> Result<()> {
        if !self.config.mode.uses_abs() && !new.is_empty() {
            return Err(Error::State(format!("mode `{}` does not use Abs-filters", self.config.mode)));
        }
        let n_al = self.filters.len();
        for f in &new {
            if f.chain.len() < 2 || f.chain.iter().any(|&id| id >= n_al) {
                return Err(Error::invalid(format!("invalid Abs-filter chain {:?}", f.chain)));
            }
        }
        let old = std::mem::take(&mut self.abs_filters);
        let position = |chain: &[usize]| old.iter().position(|o| o.chain == chain);
        let mut map: Vec<Option<usize>> = (0..n_al).map(Some).collect();
        map.extend(new.iter().map(|f| position(&f.chain).map(|p| n_al + p)));
        let first = &mut self.layers[0].conv_a;
        let (out, w) = (first.output_channels(), first.width());
        let std = (2.0 / (map.len() * w) as f64).sqrt();
        let fresh = random_array(&[out, map.len(), w], std, rng);
        first.kernels = first.kernels.remap_axis1(&map, &fresh);
        for skip in &mut self.skips {
            let members: Vec<usize> = new
                .iter()
                .enumerate()
                .filter(|(_, f)| f.multiplicity() == 1 << skip.level)
                .map(|(i, _)| i)
                .collect();
            let smap: Vec<Option<usize>> = members
                .iter()
                .map(|&i| {
                    position(&new[i].chain).and_then(|p| skip.members.iter().position(|&m| m == p))
                })
                .collect();
            let c = skip.kernel.shape()[0];
            skip.kernel = skip.kernel.remap_axis1(&smap, &Array::zeros(&[c, members.len(), 1]));
            skip.members = members;
        }
        self.abs_filters = new;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        fn pb<T: Scalar, U: Scalar>(p: &ParamBuffer<T>) -> ParamBuffer<U> {
            ParamBuffer {
                value: p.value.cast(),
                grad: p.grad.cast(),
                adam_m: p.adam_m.cast(),
                adam_v: p.adam_v.cast(),
            }
        }
        fn conv<T: Scalar, U: Scalar>(c: &ConvLayer<T>) -> ConvLayer<U> {
            ConvLayer {
                kernels: pb(&c.kernels),
                bias: pb(&c.bias),
            }
        }
        Network {
            config: self.config.clone(),
            filters: self
                .filters
                .iter()
                .map(|f| AlignFilter {
                    id: f.id,
                    weights: pb(&f.weights),
                })
                .collect(),
            abs_filters: self.abs_filters.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| DeepLayer {
                    conv_a: conv(&l.conv_a),
                    conv_b: conv(&l.conv_b),
                })
                .collect(),
            score: conv(&self.score),
            skips: self
                .skips
                .iter()
                .map(|s| SkipBranch {
                    level: s.level,
                    members: s.members.clone(),
                    kernel: pb(&s.kernel),
                })
                .collect(),
            upsamplers: self.upsamplers.iter().map(|u| Upsample { kernel: pb(&u.kernel) }).collect(),
            last_synthesis_epoch: self.last_synthesis_epoch,
        }
    }
}
