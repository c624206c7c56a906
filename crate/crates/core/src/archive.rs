//! Versioned binary model archive.
//!
//! Layout: 8-byte magic, `u32` format version, then the payload. Integers are
//! little-endian `u64` (flags and tags `u8`), reals little-endian `f64`.

use std::path::Path;

use crate::align::{AlignFilter, AlignmentConfig};
use crate::array::{Array, ParamBuffer};
use crate::backbone::{BackboneConfig, ConvLayer, Upsample};
use crate::data::NormalizationStats;
use crate::error::{Error, Result};
use crate::network::{DeepLayer, Mode, Network, NetworkConfig, SkipBranch};
use crate::scalar::Scalar;
use crate::synthesis::AbsFilter;
use crate::train::TrainedModel;

pub const MAGIC: &[u8; 8] = b"ALNNMDL\0";
pub const FORMAT_VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn usize(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }

    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }

    fn array<T: Scalar>(&mut self, a: &Array<T>) {
        self.usizes(a.shape());
        a.data().iter().for_each(|v| self.f64(v.as_f64()));
    }

    fn conv<T: Scalar>(&mut self, c: &ConvLayer<T>) {
        self.array(&c.kernels.value);
        self.array(&c.bias.value);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Archive(format!("truncated archive at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Archive(format!("integer {v} does not fit in memory")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) {
            return Err(Error::Archive(format!("implausible length {n} at byte {}", self.pos)));
        }
        Ok(n)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| self.usize()).collect()
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn array<T: Scalar>(&mut self) -> Result<Array<T>> {
        let shape = self.usizes()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n <= (self.buf.len() - self.pos) / 8).ok_or_else(|| {
            Error::Archive(format!("implausible array shape {shape:?}"))
        })?;
        let data = (0..n).map(|_| self.f64().map(T::lit)).collect::<Result<Vec<T>>>()?;
        if n == 0 {
            return Ok(Array::zeros(&shape));
        }
        Array::from_vec(&shape, data).map_err(|e| Error::Archive(e.to_string()))
    }

    fn param<T: Scalar>(&mut self) -> Result<ParamBuffer<T>> {
        Ok(ParamBuffer::new(self.array()?))
    }

    fn conv<T: Scalar>(&mut self) -> Result<ConvLayer<T>> {
        Ok(ConvLayer {
            kernels: self.param()?,
            bias: self.param()?,
        })
    }
}

fn mode_tag(mode: Mode) -> u8 {
    match mode {
        Mode::Full => 0,
        Mode::NoFine => 1,
        Mode::AlOnly => 2,
        Mode::ConvFront => 3,
    }
}

/// Serializes a trained model. Optimizer state is not stored.
pub fn to_bytes<T: Scalar>(model: &TrainedModel<T>) -> Vec<u8> {
    let mut w = Writer { buf: MAGIC.to_vec() };
    w.buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let net = &model.network;
    let cfg = &net.config;
    w.u8(mode_tag(cfg.mode));
    w.usize(cfg.align.t);
    w.usize(cfg.align.stride);
    w.f64(cfg.align.a);
    w.usize(cfg.align.filter_count);
    w.usize(cfg.backbone.depth);
    w.usizes(&cfg.backbone.widths);
    w.usize(cfg.backbone.classes);
    w.f64(cfg.backbone.dropout);
    w.f64(cfg.threshold);
    w.usize(cfg.max_chain);
    w.f64(cfg.init_jitter);
    match net.last_synthesis_epoch {
        Some(e) => {
            w.u8(1);
            w.usize(e);
        }
        None => w.u8(0),
    }

    let s = &model.stats;
    w.f64s(&s.mean);
    w.f64s(&s.std);
    w.usize(s.degenerate.len());
    s.degenerate.iter().for_each(|&d| w.u8(d as u8));
    w.u8(s.fitted_on_normalized as u8);

    w.usize(net.filters.len());
    for f in &net.filters {
        w.usize(f.id);
        w.array(&f.weights.value);
    }
    w.usize(net.abs_filters.len());
    for a in &net.abs_filters {
        w.usizes(&a.chain);
    }
    w.usize(net.layers.len());
    for l in &net.layers {
        w.conv(&l.conv_a);
        w.conv(&l.conv_b);
    }
    w.conv(&net.score);
    w.usize(net.skips.len());
    for s in &net.skips {
        w.usize(s.level);
        w.usizes(&s.members);
        w.array(&s.kernel.value);
    }
    w.usize(net.upsamplers.len());
    for u in &net.upsamplers {
        w.array(&u.kernel.value);
    }
    w.buf
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<TrainedModel<T>> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Archive("not a model archive (bad magic header)".into()));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let mut r = Reader { buf: bytes, pos: 12 };
    let mode = match r.u8()? {
        0 => Mode::Full,
        1 => Mode::NoFine,
        2 => Mode::AlOnly,
        3 => Mode::ConvFront,
        t => return Err(Error::Archive(format!("unknown mode tag {t}"))),
    };
    let align = AlignmentConfig {
        t: r.usize()?,
        stride: r.usize()?,
        a: r.f64()?,
        filter_count: r.usize()?,
    };
    let backbone = BackboneConfig {
        depth: r.usize()?,
        widths: r.usizes()?,
        classes: r.usize()?,
        dropout: r.f64()?,
    };
    let config = NetworkConfig {
        align,
        backbone,
        mode,
        threshold: r.f64()?,
        max_chain: r.usize()?,
        init_jitter: r.f64()?,
    };
    config.validate().map_err(|e| Error::Archive(format!("stored configuration is invalid: {e}")))?;
    let last_synthesis_epoch = match r.u8()? {
        0 => None,
        _ => Some(r.usize()?),
    };

    let mean = r.f64s()?;
    let std = r.f64s()?;
    let n = r.len()?;
    let degenerate = (0..n).map(|_| r.u8().map(|b| b != 0)).collect::<Result<Vec<_>>>()?;
    let fitted_on_normalized = r.u8()? != 0;
    if std.len() != mean.len() || degenerate.len() != mean.len() {
        return Err(Error::Archive("normalization vectors differ in length".into()));
    }
    let stats = NormalizationStats {
        mean,
        std,
        degenerate,
        fitted_on_normalized,
    };

    let n = r.len()?;
    let mut filters = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.usize()?;
        filters.push(AlignFilter {
            id,
            weights: r.param()?,
        });
    }
    let n = r.len()?;
    let abs_filters = (0..n).map(|_| r.usizes().map(AbsFilter::new)).collect::<Result<Vec<_>>>()?;
    let n = r.len()?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        layers.push(DeepLayer {
            conv_a: r.conv()?,
            conv_b: r.conv()?,
        });
    }
    let score = r.conv()?;
    let n = r.len()?;
    let mut skips = Vec::with_capacity(n);
    for _ in 0..n {
        skips.push(SkipBranch {
            level: r.usize()?,
            members: r.usizes()?,
            kernel: r.param()?,
        });
    }
    let n = r.len()?;
    let upsamplers = (0..n)
        .map(|_| r.param().map(|kernel| Upsample { kernel }))
        .collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::Archive(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let network = Network {
        config,
        filters,
        abs_filters,
        layers,
        score,
        skips,
        upsamplers,
        last_synthesis_epoch,
    };
    check_consistency(&network, stats.dims())?;
    Ok(TrainedModel { network, stats })
}

fn check_consistency<T: Scalar>(net: &Network<T>, dims: usize) -> Result<()> {
    let bad = |m: String| Err(Error::Archive(m));
    let cfg = &net.config;
    if dims == 0 {
        return bad("normalization covers no channels".into());
    }
    if net.filters.iter().enumerate().any(|(i, f)| f.id != i || f.len() != cfg.align.t) {
        return bad("Al-filter ids or lengths are inconsistent".into());
    }
    if net
        .abs_filters
        .iter()
        .any(|a| a.chain.len() < 2 || a.chain.iter().any(|&id| id >= net.filters.len()))
    {
        return bad("an Abs-filter references a missing Al-filter".into());
    }
    if net.layers.len() != cfg.backbone.depth {
        return bad("layer count does not match the stored depth".into());
    }
    let mut input = net.augmented_rows();
    for l in &net.layers {
        let (a, b) = (&l.conv_a, &l.conv_b);
        if a.input_channels() != input
            || b.input_channels() != a.output_channels()
            || a.bias.len() != a.output_channels()
            || b.bias.len() != b.output_channels()
        {
            return bad("deep layer shapes are inconsistent".into());
        }
        input = b.output_channels();
    }
    if net.score.input_channels() != input || net.score.output_channels() != cfg.backbone.classes {
        return bad("score layer shape is inconsistent".into());
    }
    let levels = cfg.decoder_levels();
    if net.upsamplers.len() + 1 != levels.len()
        || net
            .upsamplers
            .iter()
            .zip(levels.windows(2))
            .any(|(u, w)| u.factor() != 1 << (w[0] - w[1]) || u.kernel.shape()[..2] != [cfg.backbone.classes; 2])
    {
        return bad("upsampling stages do not match the decoder levels".into());
    }
    for s in &net.skips {
        if s.kernel.shape() != [cfg.backbone.classes, s.members.len(), 1]
            || s.members.iter().any(|&m| m >= net.abs_filters.len())
        {
            return bad("skip branch is inconsistent".into());
        }
    }
    Ok(())
}

pub fn save_model<T: Scalar>(path: &Path, model: &TrainedModel<T>) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<TrainedModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
