//! Loss, optimizer, decision rules and the training loop.

use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::array::{Array, ParamBuffer};
use crate::backbone::PredictionMap;
use crate::data::{Dataset, MotionSequence, NormalizationStats};
use crate::error::{Error, Result};
use crate::eval::SegmentationScore;
use crate::network::{Network, NetworkConfig};
use crate::scalar::Scalar;
use crate::synthesis::{chain_support, collect_graph, extract_chains_with_budget, AbsFilter, DEFAULT_SEARCH_BUDGET};

/// Probabilities are clamped to this value before taking logs.
pub const LOG_EPS: f64 = 1e-12;

/// One-hot frame targets, `T × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLabels<T> {
    values: Array<T>,
}

impl<T: Scalar> TargetLabels<T> {
    pub fn from_frames(labels: &[usize], classes: usize) -> Result<Self> {
        if labels.is_empty() || classes == 0 {
            return Err(Error::invalid("targets need at least one frame and one class"));
        }
        let mut values = Array::zeros(&[labels.len(), classes]);
        for (j, &c) in labels.iter().enumerate() {
            if c >= classes {
                return Err(Error::invalid(format!("label {c} at frame {j} exceeds {classes} classes")));
            }
            values.row_mut(j)[c] = T::one();
        }
        Ok(TargetLabels { values })
    }

    pub fn values(&self) -> &Array<T> {
        &self.values
    }

    pub fn label(&self, frame: usize) -> usize {
        self.values.row(frame).iter().position(|&v| v == T::one()).unwrap_or(0)
    }
}

/// `-Σ h log o` over all frames and classes.
pub fn cross_entropy_loss<T: Scalar>(o: &PredictionMap<T>, h: &TargetLabels<T>) -> Result<T> {
    if o.scores.shape() != h.values.shape() {
        return Err(Error::invalid(format!(
            "prediction shape {:?} vs target shape {:?}",
            o.scores.shape(),
            h.values.shape()
        )));
    }
    let eps = T::lit(LOG_EPS);
    Ok(o.scores
        .data()
        .iter()
        .zip(h.values.data())
        .filter(|(_, &t)| t != T::zero())
        .map(|(&p, &t)| -t * p.max(eps).ln())
        .sum())
}

/// Gradient of the loss with respect to the logits (`O − H`).
pub fn loss_gradient<T: Scalar>(o: &PredictionMap<T>, h: &TargetLabels<T>) -> Array<T> {
    let mut g = o.scores.clone();
    for (v, &t) in g.data_mut().iter_mut().zip(h.values.data()) {
        *v -= t;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0 }
    }

    /// One bias-corrected update of every buffer; gradients are zeroed
    /// afterwards. Buffers with non-finite gradients are left untouched and
    /// their count is returned.
    pub fn update<'a, T: Scalar>(&mut self, params: impl IntoIterator<Item = &'a mut ParamBuffer<T>>) -> usize {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let correction1 = T::lit(1.0 - c.beta1.powf(self.step as f64));
        let correction2 = T::lit(1.0 - c.beta2.powf(self.step as f64));
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);
        let mut skipped = 0;
        for p in params {
            if !p.grad.all_finite() {
                warn!("skipping an update: non-finite gradient in a buffer of shape {:?}", p.shape());
                skipped += 1;
                p.zero_grad();
                continue;
            }
            let g = p.grad.data();
            let m = p.adam_m.data_mut();
            for (mi, &gi) in m.iter_mut().zip(g) {
                *mi = b1 * *mi + one_b1 * gi;
            }
            let v = p.adam_v.data_mut();
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi = b2 * *vi + one_b2 * gi * gi;
            }
            let (m, v) = (p.adam_m.data(), p.adam_v.data());
            for ((w, &mi), &vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi / correction1;
                let v_hat = vi / correction2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
        skipped
    }
}

/// Per-frame argmax; ties go to the lower class.
pub fn predict_frames<T: Scalar>(o: &PredictionMap<T>) -> Vec<usize> {
    (0..o.frames())
        .map(|j| {
            let row = o.scores.row(j);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// The class whose confidence track is closest to all ones.
pub fn predict_sequence<T: Scalar>(o: &PredictionMap<T>) -> usize {
    let dist: Vec<f64> = (0..o.classes())
        .map(|c| {
            (0..o.frames())
                .map(|j| (1.0 - o.scores.at2(j, c).as_f64()).powi(2))
                .sum()
        })
        .collect();
    let mut best = 0;
    for (c, &d) in dist.iter().enumerate() {
        if d < dist[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Epochs between Abs-filter synthesis passes after warmup.
    pub synthesis_period: usize,
    /// Sequences per gradient-accumulation step.
    pub batch_size: usize,
    pub seed: u64,
    /// Share of training sequences held out when the dataset has no
    /// validation split.
    pub validation_fraction: f64,
    /// Upper bound on the number of Abs-filters kept per synthesis pass.
    pub max_abs_filters: usize,
    pub synthesis_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            network: NetworkConfig::default(),
            adam: AdamConfig::default(),
            epochs: 30,
            warmup_epochs: 5,
            synthesis_period: 1,
            batch_size: 8,
            seed: 0,
            validation_fraction: 0.1,
            max_abs_filters: 32,
            synthesis_budget: DEFAULT_SEARCH_BUDGET,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", a.learning_rate)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return Err(Error::Config("Adam betas must lie in [0, 1) and epsilon be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.synthesis_period == 0 {
            return Err(Error::Config("epochs, batch size and synthesis period must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn synthesizes_after(&self, epoch: usize) -> bool {
        self.network.mode.uses_abs()
            && epoch >= self.warmup_epochs
            && epoch < self.epochs
            && (epoch - self.warmup_epochs) % self.synthesis_period == 0
    }
}

/// A network with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub network: Network<T>,
    pub stats: NormalizationStats,
}

impl<T: Scalar> TrainedModel<T> {
    /// Normalizes raw sequences; already normalized ones pass through.
    pub fn normalize(&self, seq: &MotionSequence<T>) -> Result<MotionSequence<T>> {
        if seq.is_normalized() {
            Ok(seq.clone())
        } else {
            self.stats.apply(seq)
        }
    }

    pub fn predict(&self, seq: &MotionSequence<T>) -> Result<PredictionMap<T>> {
        self.network.predict(&self.normalize(seq)?)
    }
}

/// One line of the metrics history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-frame loss over the epoch.
    pub train_loss: f64,
    pub val_jaccard: Option<f64>,
    pub abs_filters: usize,
    pub skipped_updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub model: TrainedModel<T>,
    pub history: Vec<EpochRecord>,
    /// Wall-clock seconds per epoch; kept apart so the history stays
    /// reproducible.
    pub epoch_seconds: Vec<f64>,
    pub skipped_sequences: Vec<String>,
}

impl<T> TrainOutput<T> {
    /// Metrics history as JSON lines.
    pub fn metrics_jsonl(&self) -> String {
        history_jsonl(&self.history)
    }

    pub fn timing_jsonl(&self) -> String {
        self.epoch_seconds
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{{\"epoch\":{},\"wall_seconds\":{s:.3}}}\n", i + 1))
            .collect()
    }
}

pub fn history_jsonl(history: &[EpochRecord]) -> String {
    history
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable record") + "\n")
        .collect()
}

fn dropout_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [epoch as u64, index as u64] {
        h = (h ^ v).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Loss and flattened gradients of one sequence.
fn sequence_gradients<T: Scalar>(
    net: &Network<T>,
    seq: &MotionSequence<T>,
    target: &TargetLabels<T>,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<T>)> {
    let mut local = net.clone();
    local.zero_grad();
    let (o, cache) = local.forward(seq, Some(dropout_rng))?;
    let loss = cross_entropy_loss(&o, target)?.as_f64();
    local.backward(&cache, &loss_gradient(&o, target))?;
    let grads = local.params().iter().flat_map(|p| p.grad.data().iter().copied()).collect();
    Ok((loss, grads))
}

/// Builds Abs-filters from the current Al-filters, keeping at most
/// `max_filters` chains ranked by their support in `sequences`.
pub fn synthesize_abs_filters<T: Scalar>(
    net: &Network<T>,
    sequences: &[MotionSequence<T>],
    max_filters: usize,
    budget: usize,
) -> Result<Vec<AbsFilter>> {
    let cfg = &net.config;
    let graph = collect_graph(sequences, &net.filters, cfg.threshold, cfg.align.a);
    let chains = extract_chains_with_budget(&graph, cfg.max_chain, budget);
    if chains.len() <= max_filters {
        return Ok(chains);
    }
    let support = chain_support(&chains, &net.filters, sequences, cfg.align.a)?;
    let mut ranked: Vec<(f64, AbsFilter)> = support.into_iter().zip(chains).collect();
    ranked.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| y.1.chain.len().cmp(&x.1.chain.len()))
            .then_with(|| x.1.chain.cmp(&y.1.chain))
    });
    let mut kept: Vec<AbsFilter> = ranked.into_iter().take(max_filters).map(|(_, c)| c).collect();
    kept.sort_by(|x, y| x.chain.cmp(&y.chain));
    Ok(kept)
}

fn predict_labels<T: Scalar>(net: &Network<T>, seqs: &[MotionSequence<T>]) -> Result<Vec<Vec<usize>>> {
    seqs.par_iter()
        .map(|s| net.predict(s).map(|o| crate::train::predict_frames(&o)))
        .collect()
}

/// Trains a network on the training split.
pub fn train<T: Scalar>(dataset: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let classes = dataset.class_count;
    if classes < 2 {
        return Err(Error::Data("training needs at least two classes".into()));
    }
    let mut cfg = cfg.clone();
    cfg.network.backbone.classes = classes;
    let min_len = cfg.network.backbone.min_length();
    let mut skipped = Vec::new();
    let mut usable = |seqs: &[MotionSequence<T>]| -> Result<Vec<MotionSequence<T>>> {
        let mut out = Vec::with_capacity(seqs.len());
        for s in seqs {
            if s.frame_labels.is_none() {
                return Err(Error::Data(format!("{}: training sequences need frame labels", s.source)));
            }
            s.validate_labels(classes)?;
            if s.len() < min_len {
                warn!("skipping `{}`: {} frames, the model needs at least {min_len}", s.source, s.len());
                skipped.push(s.source.clone());
                continue;
            }
            out.push(s.clone());
        }
        Ok(out)
    };
    let mut train_raw = usable(&dataset.train)?;
    let mut val_raw = usable(&dataset.val)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if val_raw.is_empty() && cfg.validation_fraction > 0.0 && train_raw.len() >= 2 {
        let n_val = ((train_raw.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, train_raw.len() - 1);
        let mut idx: Vec<usize> = (0..train_raw.len()).collect();
        idx.shuffle(&mut rng);
        let mut held: Vec<usize> = idx[..n_val].to_vec();
        held.sort_unstable();
        for &i in held.iter().rev() {
            val_raw.insert(0, train_raw.remove(i));
        }
    }
    if train_raw.is_empty() {
        return Err(Error::Data("no usable training sequences".into()));
    }
    let stats = NormalizationStats::fit(&train_raw)?;
    let normalize = |v: &[MotionSequence<T>]| -> Result<Vec<MotionSequence<T>>> { v.iter().map(|s| stats.apply(s)).collect() };
    let train_set = normalize(&train_raw)?;
    let val_set = normalize(&val_raw)?;
    let targets: Vec<TargetLabels<T>> = train_set
        .iter()
        .map(|s| TargetLabels::from_frames(s.frame_labels.as_ref().expect("checked"), classes))
        .collect::<Result<_>>()?;

    let mut net = Network::new(cfg.network.clone(), stats.dims(), &train_set, &mut rng)?;
    let mut adam = Adam::new(cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    info!(
        "training mode {} on {} sequences ({} validation), {} parameters",
        cfg.network.mode,
        train_set.len(),
        val_set.len(),
        net.parameter_count()
    );
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut frame_sum = 0usize;
        let mut skipped_updates = 0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(f64, Vec<T>)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut drng = ChaCha8Rng::seed_from_u64(dropout_seed(cfg.seed, epoch, i));
                    sequence_gradients(&net, &train_set[i], &targets[i], &mut drng)
                })
                .collect();
            let frames: usize = batch.iter().map(|&i| train_set[i].len()).sum();
            let scale = T::lit(1.0 / frames as f64);
            net.zero_grad();
            for r in results {
                let (loss, grads) = r?;
                loss_sum += loss;
                let mut it = grads.into_iter();
                for p in net.params_mut() {
                    for (g, v) in p.grad.data_mut().iter_mut().zip(&mut it) {
                        *g += v * scale;
                    }
                }
            }
            frame_sum += frames;
            skipped_updates += adam.update(net.params_mut());
        }
        if cfg.synthesizes_after(epoch) {
            let abs = synthesize_abs_filters(&net, &train_set, cfg.max_abs_filters, cfg.synthesis_budget)?;
            net.set_abs_filters(abs, &mut rng)?;
            net.last_synthesis_epoch = Some(epoch);
        }
        let val_jaccard = if val_set.is_empty() {
            None
        } else {
            let preds = predict_labels(&net, &val_set)?;
            let score = SegmentationScore::pooled(
                preds
                    .iter()
                    .zip(&val_set)
                    .map(|(p, s)| (p.as_slice(), s.frame_labels.as_deref().expect("checked"))),
                classes,
            )?;
            Some(score.mean)
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / frame_sum as f64,
            val_jaccard,
            abs_filters: net.abs_filters.len(),
            skipped_updates,
        };
        let secs = started.elapsed().as_secs_f64();
        info!(
            "epoch {epoch}: loss {:.4}, val Jaccard {}, {} Abs-filters, {secs:.1}s",
            record.train_loss,
            val_jaccard.map_or("-".to_string(), |v| format!("{v:.4}")),
            record.abs_filters
        );
        history.push(record);
        epoch_seconds.push(secs);
    }
    Ok(TrainOutput {
        model: TrainedModel { network: net, stats },
        history,
        epoch_seconds,
        skipped_sequences: skipped,
    })
}
