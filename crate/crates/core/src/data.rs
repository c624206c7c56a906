//! Motion sequences, per-dimension normalization, the on-disk dataset format
//! and a synthetic planted-motif generator.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frame label reserved for gap / blank frames.
pub const GAP_CLASS: usize = 0;

/// A multichannel stream, `d_x × T`, with optional per-frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<T> {
    channels: Array<T>,
    pub frame_labels: Option<Vec<usize>>,
    pub sequence_label: Option<usize>,
    pub source: String,
    normalized: bool,
}

impl<T: Scalar> MotionSequence<T> {
    pub fn new(channels: Array<T>, frame_labels: Option<Vec<usize>>) -> Result<Self> {
        if channels.rank() != 2 || channels.is_empty() {
            return Err(Error::invalid("a sequence needs at least one channel and one frame"));
        }
        if let Some(l) = &frame_labels {
            if l.len() != channels.cols() {
                return Err(Error::invalid(format!(
                    "{} frame labels for {} frames",
                    l.len(),
                    channels.cols()
                )));
            }
        }
        if !channels.all_finite() {
            return Err(Error::invalid("sequence contains non-finite values"));
        }
        Ok(MotionSequence {
            channels,
            frame_labels,
            sequence_label: None,
            source: String::new(),
            normalized: false,
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn with_sequence_label(mut self, label: usize) -> Self {
        self.sequence_label = Some(label);
        self
    }

    pub fn channels(&self) -> &Array<T> {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[T] {
        self.channels.row(i)
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.channels.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Number of channels `d_x`.
    pub fn dims(&self) -> usize {
        self.channels.rows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Checks every label is below `classes`.
    pub fn validate_labels(&self, classes: usize) -> Result<()> {
        if let Some(l) = &self.frame_labels {
            if let Some((t, &c)) = l.iter().enumerate().find(|(_, &c)| c >= classes) {
                return Err(Error::Data(format!(
                    "{}: frame {t} has label {c}, outside [0, {classes})",
                    self.source
                )));
            }
        }
        Ok(())
    }

    /// Frames `start..end` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!("bad frame range {start}..{end}")));
        }
        let rows: Vec<Vec<T>> = (0..self.dims())
            .map(|i| self.channel(i)[start..end].to_vec())
            .collect();
        let mut s = MotionSequence::new(
            Array::from_rows(&rows)?,
            self.frame_labels.as_ref().map(|l| l[start..end].to_vec()),
        )?;
        s.sequence_label = self.sequence_label;
        s.source = format!("{}[{start}..{end}]", self.source);
        s.normalized = self.normalized;
        Ok(s)
    }

    /// Repeats the sequence `times` times along the time axis.
    pub fn tile(&self, times: usize) -> Result<Self> {
        let rows: Vec<Vec<T>> = (0..self.dims())
            .map(|i| self.channel(i).repeat(times))
            .collect();
        let mut s = MotionSequence::new(
            Array::from_rows(&rows)?,
            self.frame_labels.as_ref().map(|l| l.repeat(times)),
        )?;
        s.sequence_label = self.sequence_label;
        s.source = self.source.clone();
        s.normalized = self.normalized;
        Ok(s)
    }

    pub fn cast<U: Scalar>(&self) -> MotionSequence<U> {
        MotionSequence {
            channels: self.channels.cast(),
            frame_labels: self.frame_labels.clone(),
            sequence_label: self.sequence_label,
            source: self.source.clone(),
            normalized: self.normalized,
        }
    }
}

/// Per-channel mean and standard deviation of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose standard deviation was clamped.
    pub degenerate: Vec<bool>,
    /// Whether the stats were fitted on already-normalized sequences.
    pub fitted_on_normalized: bool,
}

pub const MIN_STD: f64 = 1e-8;

impl NormalizationStats {
    pub fn fit<T: Scalar>(sequences: &[MotionSequence<T>]) -> Result<Self> {
        let first = sequences
            .first()
            .ok_or_else(|| Error::invalid("cannot fit normalization on an empty set"))?;
        let dx = first.dims();
        let norm_flag = first.is_normalized();
        let mut sum = vec![0.0; dx];
        let mut count = 0usize;
        for s in sequences {
            if s.dims() != dx {
                return Err(Error::Data(format!(
                    "{}: {} channels, expected {dx}",
                    s.source,
                    s.dims()
                )));
            }
            if s.is_normalized() != norm_flag {
                return Err(Error::State("mixing normalized and raw sequences".into()));
            }
            for (i, acc) in sum.iter_mut().enumerate() {
                *acc += s.channel(i).iter().map(|v| v.as_f64()).sum::<f64>();
            }
            count += s.len();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; dx];
        for s in sequences {
            for (i, acc) in var.iter_mut().enumerate() {
                *acc += s
                    .channel(i)
                    .iter()
                    .map(|v| (v.as_f64() - mean[i]).powi(2))
                    .sum::<f64>();
            }
        }
        let mut degenerate = vec![false; dx];
        let std = var
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let sd = (v / count as f64).sqrt();
                if sd < MIN_STD {
                    warn!("channel {i} is constant; clamping its standard deviation to {MIN_STD}");
                    degenerate[i] = true;
                    MIN_STD
                } else {
                    sd
                }
            })
            .collect();
        Ok(NormalizationStats {
            mean,
            std,
            degenerate,
            fitted_on_normalized: norm_flag,
        })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean_j) / std_j` per channel. Refuses to normalize a sequence
    /// twice with stats fitted on raw data.
    pub fn apply<T: Scalar>(&self, seq: &MotionSequence<T>) -> Result<MotionSequence<T>> {
        if seq.dims() != self.dims() {
            return Err(Error::Data(format!(
                "{}: {} channels but normalization stats cover {}",
                seq.source,
                seq.dims(),
                self.dims()
            )));
        }
        if seq.is_normalized() && !self.fitted_on_normalized {
            return Err(Error::State(format!(
                "{}: sequence is already normalized",
                seq.source
            )));
        }
        let mut out = seq.clone();
        let cols = seq.len();
        for (i, chunk) in out.channels.data_mut().chunks_mut(cols).enumerate() {
            let (m, s) = (self.mean[i], self.std[i]);
            for v in chunk.iter_mut() {
                *v = if self.degenerate[i] {
                    T::zero()
                } else {
                    T::lit((v.as_f64() - m) / s)
                };
            }
        }
        out.normalized = true;
        Ok(out)
    }
}

pub fn apply_normalization<T: Scalar>(
    seq: &MotionSequence<T>,
    stats: &NormalizationStats,
) -> Result<MotionSequence<T>> {
    stats.apply(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Sequences grouped by split, sharing a class count.
#[derive(Debug, Clone, Default)]
pub struct Dataset<T> {
    pub class_count: usize,
    pub train: Vec<MotionSequence<T>>,
    pub val: Vec<MotionSequence<T>>,
    pub test: Vec<MotionSequence<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn split(&self, split: Split) -> &[MotionSequence<T>] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<MotionSequence<T>> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn total_frames(&self) -> usize {
        [&self.train, &self.val, &self.test]
            .iter()
            .flat_map(|v| v.iter())
            .map(MotionSequence::len)
            .sum()
    }
}

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Serializes one sequence in the text format: a `d_x T C` header, `d_x`
/// lines of `T` reals, then an optional line of `T` frame labels.
pub fn format_sequence<T: Scalar>(seq: &MotionSequence<T>, classes: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", seq.dims(), seq.len(), classes);
    for i in 0..seq.dims() {
        let line: Vec<String> = seq
            .channel(i)
            .iter()
            .map(|v| format!("{:.16e}", v.as_f64()))
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    if let Some(l) = &seq.frame_labels {
        let line: Vec<String> = l.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_sequence<T: Scalar>(path: &Path, seq: &MotionSequence<T>, classes: usize) -> Result<()> {
    fs::write(path, format_sequence(seq, classes)).map_err(|e| Error::io(path, e))
}

/// Parses a sequence file; returns the sequence and its declared class count.
pub fn read_sequence<T: Scalar>(path: &Path) -> Result<(MotionSequence<T>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sequence(&text, path)
}

pub fn parse_sequence<T: Scalar>(text: &str, path: &Path) -> Result<(MotionSequence<T>, usize)> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| perr(hl, format!("bad header `{header}`: {e}")))?;
    let [dx, frames, classes] = head[..] else {
        return Err(perr(hl, format!("header must be `d_x T C`, got `{header}`")));
    };
    if dx == 0 || frames == 0 {
        return Err(perr(hl, "d_x and T must be positive".into()));
    }
    let mut data = Vec::with_capacity(dx * frames);
    for ch in 0..dx {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| perr(hl + ch + 1, format!("missing channel {ch} (expected {dx} channel lines)")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| perr(ln, format!("bad value `{tok}`: {e}")))?;
            if !v.is_finite() {
                return Err(perr(ln, format!("non-finite value `{tok}`")));
            }
            data.push(T::lit(v));
        }
        let got = data.len() - before;
        if got != frames {
            return Err(perr(ln, format!("channel {ch} has {got} values, header declares T = {frames}")));
        }
    }
    let labels = match lines.next() {
        None => None,
        Some((ln, line)) => {
            let labels: Vec<usize> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|e| perr(ln, format!("bad label `{tok}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if labels.len() != frames {
                return Err(perr(ln, format!("{} labels, header declares T = {frames}", labels.len())));
            }
            if let Some(&c) = labels.iter().find(|&&c| c >= classes) {
                return Err(perr(ln, format!("label {c} outside [0, {classes})")));
            }
            if let Some((extra, _)) = lines.next() {
                return Err(perr(extra, "unexpected trailing content".into()));
            }
            Some(labels)
        }
    };
    let seq = MotionSequence::new(Array::from_vec(&[dx, frames], data)?, labels)?
        .with_source(path.display().to_string());
    Ok((seq, classes))
}

/// Loads a dataset directory (or its manifest file). Each manifest line is
/// `<file> <train|val|test>`; blank lines and `#` comments are ignored.
pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let manifest = if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    };
    let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut entries: Vec<(usize, PathBuf, Split)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: manifest.clone(),
            line: i + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(file), Some(split), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(perr(format!("expected `<file> <split>`, got `{line}`")));
        };
        let split = Split::parse(split).ok_or_else(|| perr(format!("unknown split `{split}`")))?;
        entries.push((i + 1, dir.join(file), split));
    }
    let mut set = Dataset::default();
    let mut dims = None;
    for (line, file, split) in entries {
        let (seq, classes) = read_sequence::<T>(&file)?;
        match dims {
            None => dims = Some(seq.dims()),
            Some(d) if d != seq.dims() => {
                return Err(Error::Parse {
                    path: manifest.clone(),
                    line,
                    message: format!("{} has {} channels, expected {d}", file.display(), seq.dims()),
                })
            }
            _ => {}
        }
        set.class_count = set.class_count.max(classes);
        set.split_mut(split).push(seq);
    }
    Ok(set)
}

/// Writes every sequence to `dir` with a manifest.
pub fn save_dataset<T: Scalar>(dir: &Path, set: &Dataset<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        for (i, seq) in set.split(split).iter().enumerate() {
            let name = format!("{}_{i:04}.seq", split.name());
            write_sequence(&dir.join(&name), seq, set.class_count)?;
            let _ = writeln!(manifest, "{name} {}", split.name());
        }
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Parameters of the planted-motif generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of action classes, not counting the gap class.
    pub classes: usize,
    /// Nominal motif duration in frames.
    pub motif_len: usize,
    pub channels: usize,
    pub noise: f64,
    /// Expected fraction of gap frames.
    pub gap_fraction: f64,
    /// Inclusive range of action segments per sequence.
    pub segments: (usize, usize),
    /// Inclusive range of sequence lengths; draws outside are rejected.
    pub length: (usize, usize),
    /// Relative range of the per-segment temporal scaling.
    pub warp: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 6,
            motif_len: 32,
            channels: 4,
            noise: 0.05,
            gap_fraction: 0.3,
            segments: (2, 5),
            length: (96, 256),
            warp: (0.8, 1.25),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self, t: usize) -> Result<()> {
        if self.classes == 0 || self.channels == 0 {
            return Err(Error::Config("synthetic data needs at least one class and channel".into()));
        }
        if self.motif_len < t {
            return Err(Error::Config(format!(
                "motif length {} is shorter than the filter length {t}",
                self.motif_len
            )));
        }
        if self.noise < 0.0 || !(0.0..1.0).contains(&self.gap_fraction) {
            return Err(Error::Config("noise must be >= 0 and gap fraction in [0, 1)".into()));
        }
        if self.segments.0 == 0 || self.segments.0 > self.segments.1 || self.length.0 > self.length.1 {
            return Err(Error::Config("empty segment or length range".into()));
        }
        if !(self.warp.0 > 0.0 && self.warp.0 <= self.warp.1) {
            return Err(Error::Config("warp range must be positive and ordered".into()));
        }
        Ok(())
    }

    /// Total label count including the gap class.
    pub fn label_count(&self) -> usize {
        self.classes + 1
    }
}

/// Sum of sinusoids with integer frequencies over one motif period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub offset: f64,
    /// `(frequency, amplitude, phase)` triples.
    pub terms: Vec<(f64, f64, f64)>,
}

impl Waveform {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let terms = (1..=3)
            .map(|h| {
                let h = f64::from(h);
                (
                    h,
                    rng.random_range(0.5..1.0) / h,
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Waveform {
            offset: rng.random_range(-0.5..0.5),
            terms,
        }
    }

    /// Value at phase `u`, where one motif spans `u ∈ [0, 1)`.
    pub fn eval(&self, u: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|&(f, amp, ph)| amp * (std::f64::consts::TAU * f * u + ph).sin())
                .sum::<f64>()
    }
}

/// Generated data together with the planted motif bank.
#[derive(Debug, Clone)]
pub struct SyntheticData<T> {
    pub spec: SyntheticSpec,
    /// `motifs[c - 1][channel]` for action class `c`.
    pub motifs: Vec<Vec<Waveform>>,
    pub sequences: Vec<MotionSequence<T>>,
}

/// Deterministic planted-motif generator.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    spec: SyntheticSpec,
    motifs: Vec<Vec<Waveform>>,
}

impl SyntheticGenerator {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate(1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let motifs = (0..spec.classes)
            .map(|_| (0..spec.channels).map(|_| Waveform::random(&mut rng)).collect())
            .collect();
        Ok(SyntheticGenerator { spec, motifs })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn motifs(&self) -> &[Vec<Waveform>] {
        &self.motifs
    }

    /// Noise-free rendering of the motif of action class `class` (1-based)
    /// stretched to `len` frames.
    pub fn render_motif<T: Scalar>(&self, class: usize, len: usize) -> Result<MotionSequence<T>> {
        if class == GAP_CLASS || class > self.spec.classes {
            return Err(Error::invalid(format!("class {class} has no planted motif")));
        }
        let rows: Vec<Vec<T>> = self.motifs[class - 1]
            .iter()
            .map(|w| (0..len).map(|k| T::lit(w.eval(k as f64 / len as f64))).collect())
            .collect();
        Ok(MotionSequence::new(Array::from_rows(&rows)?, Some(vec![class; len]))?
            .with_source(format!("motif-{class}"))
            .with_sequence_label(class))
    }

    /// Draws `count` sequences from the stream identified by `stream`.
    pub fn sequences<T: Scalar>(&self, count: usize, stream: u64) -> Vec<MotionSequence<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(stream.wrapping_add(1));
        (0..count)
            .map(|i| {
                self.one_sequence(&mut rng)
                    .with_source(format!("synthetic-{}-{stream}-{i}", self.spec.seed))
            })
            .collect()
    }

    fn one_sequence<T: Scalar>(&self, rng: &mut ChaCha8Rng) -> MotionSequence<T> {
        let s = &self.spec;
        let noise = Normal::new(0.0, s.noise).expect("validated noise");
        loop {
            let n = rng.random_range(s.segments.0..=s.segments.1);
            let mut rows: Vec<Vec<f64>> = vec![Vec::new(); s.channels];
            let mut labels = Vec::new();
            let gap_ratio = s.gap_fraction / (1.0 - s.gap_fraction);
            for _ in 0..n {
                let class = rng.random_range(1..=s.classes);
                let seg_len = ((s.motif_len as f64) * rng.random_range(s.warp.0..=s.warp.1))
                    .round()
                    .max(1.0) as usize;
                let gap_len = ((seg_len as f64) * gap_ratio * rng.random_range(0.5..1.5)).round() as usize;
                if gap_len > 0 {
                    let waves: Vec<Waveform> = (0..s.channels).map(|_| Waveform::random(rng)).collect();
                    for (row, w) in rows.iter_mut().zip(&waves) {
                        row.extend((0..gap_len).map(|k| w.eval(k as f64 / s.motif_len as f64)));
                    }
                    labels.extend(std::iter::repeat_n(GAP_CLASS, gap_len));
                }
                for (row, w) in rows.iter_mut().zip(&self.motifs[class - 1]) {
                    row.extend((0..seg_len).map(|k| w.eval(k as f64 / seg_len as f64)));
                }
                labels.extend(std::iter::repeat_n(class, seg_len));
            }
            let len = labels.len();
            if len < s.length.0 || len > s.length.1 {
                continue;
            }
            let data: Vec<T> = rows
                .into_iter()
                .flatten()
                .map(|v| T::lit(v + noise.sample(rng)))
                .collect();
            let channels = Array::from_vec(&[s.channels, len], data).expect("consistent shape");
            return MotionSequence::new(channels, Some(labels)).expect("finite synthetic data");
        }
    }
}

/// Generates `count` labeled sequences and returns them with the motif bank.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec, count: usize) -> Result<SyntheticData<T>> {
    let generator = SyntheticGenerator::new(spec.clone())?;
    Ok(SyntheticData {
        spec: spec.clone(),
        motifs: generator.motifs.clone(),
        sequences: generator.sequences(count, 0),
    })
}

/// Builds a train/val/test dataset from independent generator streams.
pub fn synthetic_dataset<T: Scalar>(
    spec: &SyntheticSpec,
    train: usize,
    val: usize,
    test: usize,
) -> Result<Dataset<T>> {
    let generator = SyntheticGenerator::new(spec.clone())?;
    Ok(Dataset {
        class_count: spec.label_count(),
        train: generator.sequences(train, 0),
        val: generator.sequences(val, 1),
        test: generator.sequences(test, 2),
    })
}

/// Distinct labels appearing in a set of sequences.
pub fn labels_present<T: Scalar>(sequences: &[MotionSequence<T>]) -> BTreeSet<usize> {
    sequences
        .iter()
        .filter_map(|s| s.frame_labels.as_ref())
        .flatten()
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(len: usize) -> MotionSequence<f64> {
        let rows = vec![
            (0..len).map(|i| i as f64 * 0.5).collect(),
            (0..len).map(|i| (i as f64).sin()).collect(),
        ];
        MotionSequence::new(Array::from_rows(&rows).unwrap(), Some(vec![1; len])).unwrap()
    }

    #[test]
    fn normalizing_fitting_data_standardizes() {
        let seqs = vec![small(20), small(35)];
        let stats = NormalizationStats::fit(&seqs).unwrap();
        let normed: Vec<_> = seqs.iter().map(|s| stats.apply(s).unwrap()).collect();
        for ch in 0..2 {
            let vals: Vec<f64> = normed.iter().flat_map(|s| s.channel(ch).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_channel_is_clamped_to_zeros() {
        let rows = vec![vec![0.1; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]];
        let s = MotionSequence::new(Array::from_rows(&rows).unwrap(), None).unwrap();
        let stats = NormalizationStats::fit(std::slice::from_ref(&s)).unwrap();
        assert!(stats.degenerate[0] && !stats.degenerate[1]);
        assert_eq!(stats.std[0], MIN_STD);
        assert!(stats.apply(&s).unwrap().channel(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn train_stats_applied_to_test_split() {
        let train = vec![small(30)];
        let test = vec![small(30).tile(2).unwrap().slice(10, 60).unwrap()];
        let train_stats = NormalizationStats::fit(&train).unwrap();
        let test_stats = NormalizationStats::fit(&test).unwrap();
        assert_ne!(train_stats, test_stats);
        let normed = train_stats.apply(&test[0]).unwrap();
        let expected = (test[0].channel(0)[3] - train_stats.mean[0]) / train_stats.std[0];
        assert_eq!(normed.channel(0)[3], expected);
    }

    #[test]
    fn double_application_is_refused_but_refit_is_identity() {
        let seqs = vec![small(40)];
        let stats = NormalizationStats::fit(&seqs).unwrap();
        let once = stats.apply(&seqs[0]).unwrap();
        assert!(matches!(stats.apply(&once), Err(Error::State(_))));
        let refit = NormalizationStats::fit(std::slice::from_ref(&once)).unwrap();
        let twice = refit.apply(&once).unwrap();
        for (a, b) in once.channels().data().iter().zip(twice.channels().data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_count_mismatch_is_an_error() {
        let stats = NormalizationStats::fit(&[small(10)]).unwrap();
        let one = MotionSequence::new(Array::from_rows(&[vec![1.0, 2.0]]).unwrap(), None).unwrap();
        assert!(matches!(stats.apply(&one), Err(Error::Data(_))));
    }

    #[test]
    fn parse_rejects_out_of_range_labels_with_line() {
        let text = "1 3 2\n0.5 0.25 1\n0 1 2\n";
        match parse_sequence::<f64>(text, Path::new("x.seq")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let text = "2 3 2\n0.5 0.25 1\n0 1\n";
        match parse_sequence::<f64>(text, Path::new("x.seq")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("2 values"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unlabeled_sequence_parses() {
        let (s, c) = parse_sequence::<f64>("1 2 4\n1 2\n", Path::new("u.seq")).unwrap();
        assert_eq!((s.dims(), s.len(), c), (1, 2, 4));
        assert!(s.frame_labels.is_none());
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic::<f64>(&spec, 4).unwrap();
        let b = generate_synthetic::<f64>(&spec, 4).unwrap();
        assert_eq!(a.sequences, b.sequences);
        let c = generate_synthetic::<f64>(&SyntheticSpec { seed: 9, ..spec }, 4).unwrap();
        assert_ne!(a.sequences, c.sequences);
        for s in &a.sequences {
            assert!((96..=256).contains(&s.len()));
            s.validate_labels(7).unwrap();
        }
    }

    #[test]
    fn gap_fraction_over_seeds() {
        for seed in 0..20 {
            let spec = SyntheticSpec { seed, ..Default::default() };
            let data = generate_synthetic::<f64>(&spec, 30).unwrap();
            let labels: Vec<usize> = data
                .sequences
                .iter()
                .flat_map(|s| s.frame_labels.clone().unwrap())
                .collect();
            let frac = labels.iter().filter(|&&c| c == GAP_CLASS).count() as f64 / labels.len() as f64;
            assert!((frac - 0.3).abs() <= 0.05, "seed {seed}: gap fraction {frac}");
        }
    }

    #[test]
    fn noise_free_orthogonal_motifs_are_separable_by_nearest_window() {
        // two classes with orthogonal motifs sin(2πu) and sin(4πu): 1-nearest-window
        // lookup against clean renderings labels every action frame correctly
        let spec = SyntheticSpec {
            classes: 2,
            channels: 1,
            noise: 0.0,
            gap_fraction: 0.0,
            warp: (1.0, 1.0),
            ..Default::default()
        };
        let mut generator = SyntheticGenerator::new(spec).unwrap();
        generator.motifs = vec![
            vec![Waveform { offset: 0.0, terms: vec![(1.0, 1.0, 0.0)] }],
            vec![Waveform { offset: 0.0, terms: vec![(2.0, 1.0, 0.0)] }],
        ];
        let refs: Vec<MotionSequence<f64>> =
            (1..=2).map(|c| generator.render_motif(c, 32).unwrap()).collect();
        let w = 5;
        for s in generator.sequences::<f64>(5, 0) {
            let labels = s.frame_labels.clone().unwrap();
            let x = s.channel(0);
            let mut correct = 0;
            for j in 0..=x.len() - w {
                let win = &x[j..j + w];
                let mut best = (f64::MAX, 0);
                for (ci, r) in refs.iter().enumerate() {
                    let rr = r.channel(0);
                    // cyclic motif: windows may wrap around the period
                    for k in 0..rr.len() {
                        let d: f64 = (0..w).map(|m| (win[m] - rr[(k + m) % rr.len()]).powi(2)).sum();
                        if d < best.0 {
                            best = (d, ci + 1);
                        }
                    }
                }
                // only windows fully inside one segment are scored
                if labels[j..j + w].iter().all(|&l| l == labels[j]) {
                    correct += usize::from(best.1 == labels[j]);
                } else {
                    correct += 1;
                }
            }
            assert_eq!(correct, x.len() - w + 1);
        }
    }
}
