//! Segmentation and classification scores, filter-class association and
//! ablation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{Dataset, MotionSequence, Split};
use crate::error::{Error, Result};
use crate::network::Mode;
use crate::scalar::Scalar;
use crate::synthesis::RowSource;
use crate::train::{predict_frames, train, TrainConfig, TrainedModel};

/// Frame-wise Jaccard scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationScore {
    /// IoU of each class present in prediction or truth.
    pub per_class: BTreeMap<usize, f64>,
    pub mean: f64,
    /// `confusion[truth][pred]` frame counts.
    pub confusion: Vec<Vec<usize>>,
}

impl SegmentationScore {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let classes = confusion.len();
        let mut per_class = BTreeMap::new();
        for c in 0..classes {
            let hit = confusion[c][c];
            let truth: usize = confusion[c].iter().sum();
            let pred: usize = confusion.iter().map(|row| row[c]).sum();
            let union = truth + pred - hit;
            if union > 0 {
                per_class.insert(c, hit as f64 / union as f64);
            }
        }
        let mean = if per_class.is_empty() {
            0.0
        } else {
            per_class.values().sum::<f64>() / per_class.len() as f64
        };
        SegmentationScore {
            per_class,
            mean,
            confusion,
        }
    }

    /// Scores several sequences with one pooled confusion matrix.
    pub fn pooled<'a>(pairs: impl IntoIterator<Item = (&'a [usize], &'a [usize])>, classes: usize) -> Result<Self> {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (pred, truth) in pairs {
            accumulate(&mut confusion, pred, truth)?;
        }
        Ok(Self::from_confusion(confusion))
    }
}

fn accumulate(confusion: &mut [Vec<usize>], pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "prediction has {} frames, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let classes = confusion.len();
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::invalid(format!("label {} out of range for {classes} classes", p.max(t))));
        }
        confusion[t][p] += 1;
    }
    Ok(())
}

/// Frame-wise Jaccard index of one labeling; the gap class counts like any
/// other class.
pub fn jaccard_index(pred: &[usize], truth: &[usize], classes: usize) -> Result<SegmentationScore> {
    SegmentationScore::pooled([(pred, truth)], classes)
}

pub fn classification_accuracy(preds: &[usize], truths: &[usize]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Per-filter class energies of the augmented alignment map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterEnergy {
    pub row: usize,
    #[serde(skip)]
    pub source: RowSource,
    /// Al-filter ids the row is built from (one id for an Al-filter).
    pub chain: Vec<usize>,
    /// Argmax of `energy`, ties to the lower class.
    pub class: usize,
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterAssociation {
    pub filters: Vec<FilterEnergy>,
}

impl FilterAssociation {
    pub fn abs_filters(&self) -> impl Iterator<Item = &FilterEnergy> {
        self.filters.iter().filter(|f| matches!(f.source, RowSource::Abs(_)))
    }
}

pub(crate) fn argmax_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Associates every filter row with the class whose frames carry the most
/// squared activation. Frames are attributed by their frame labels, or by
/// the sequence label when frame labels are absent; raw sequences are
/// normalized with the model's stats first.
pub fn associate_filters<T: Scalar>(model: &TrainedModel<T>, sequences: &[MotionSequence<T>]) -> Result<FilterAssociation> {
    let net = &model.network;
    let classes = net.classes();
    let rows = net.augmented_rows();
    let mut energy = vec![vec![0.0f64; classes]; rows];
    let mut row_index = Vec::new();
    for seq in sequences {
        let labels: Vec<usize> = match (&seq.frame_labels, seq.sequence_label) {
            (Some(f), _) => f.clone(),
            (None, Some(c)) => vec![c; seq.len()],
            (None, None) => return Err(Error::Data(format!("{}: no labels to associate filters with", seq.source))),
        };
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(Error::Data(format!("{}: label {bad} out of range", seq.source)));
        }
        let norm = model.normalize(seq)?;
        let map = net.augmented_map(&norm)?;
        for (r, e) in energy.iter_mut().enumerate() {
            for (&v, &c) in map.values.row(r).iter().zip(&labels) {
                let v = v.as_f64();
                e[c] += v * v;
            }
        }
        row_index = map.row_index;
    }
    if row_index.is_empty() {
        row_index = net
            .filters
            .iter()
            .map(|f| RowSource::Al(f.id))
            .chain((0..net.abs_filters.len()).map(RowSource::Abs))
            .collect();
    }
    let filters = energy
        .into_iter()
        .zip(row_index)
        .enumerate()
        .map(|(row, (energy, source))| FilterEnergy {
            row,
            chain: match source {
                RowSource::Al(id) => vec![id],
                RowSource::Abs(k) => net.abs_filters[k].chain.clone(),
            },
            source,
            class: argmax_low(&energy),
            energy,
        })
        .collect();
    Ok(FilterAssociation { filters })
}

/// Test-split Jaccard of a trained model.
pub fn evaluate_segmentation<T: Scalar>(model: &TrainedModel<T>, sequences: &[MotionSequence<T>]) -> Result<SegmentationScore> {
    let mut pairs = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let truth = seq
            .frame_labels
            .clone()
            .ok_or_else(|| Error::Data(format!("{}: frame labels required for scoring", seq.source)))?;
        let pred = predict_frames(&model.predict(seq)?);
        pairs.push((pred, truth));
    }
    SegmentationScore::pooled(pairs.iter().map(|(p, t)| (p.as_slice(), t.as_slice())), model.network.classes())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: String,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, mode: Mode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode.name())
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<6} {:>8} {:>8}  scores\n", "mode", "mean", "std");
        for r in &self.rows {
            let scores: Vec<String> = r.scores.iter().map(|s| format!("{s:.4}")).collect();
            let _ = writeln!(out, "{:<6} {:>8.4} {:>8.4}  {}", r.mode, r.mean, r.std, scores.join(" "));
        }
        out
    }

    /// One JSON record per line.
    pub fn to_records(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable row") + "\n")
            .collect()
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains every mode under every seed with otherwise identical settings and
/// reports test-split Jaccard.
pub fn ablation_report<T: Scalar>(dataset: &Dataset<T>, cfg: &TrainConfig, modes: &[Mode], seeds: &[u64]) -> Result<AblationReport> {
    let test = dataset.split(Split::Test);
    if test.is_empty() {
        return Err(Error::Data("ablation needs a non-empty test split".into()));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut scores = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut c = cfg.clone();
            c.network.mode = mode;
            c.seed = seed;
            let out = train(dataset, &c)?;
            let score = evaluate_segmentation(&out.model, test)?;
            log::info!("ablation mode {mode} seed {seed}: test Jaccard {:.4}", score.mean);
            scores.push(score.mean);
        }
        let (mean, std) = mean_std(&scores);
        rows.push(AblationRow {
            mode: mode.name().to_string(),
            seeds: seeds.to_vec(),
            scores,
            mean,
            std,
        });
    }
    Ok(AblationReport { rows })
}

/// Columnar label tracks: a `frame` column, `truth`, then one column per
/// named prediction.
pub fn label_tracks(truth: Option<&[usize]>, tracks: &[(&str, &[usize])]) -> Result<String> {
    let len = truth
        .map(<[usize]>::len)
        .or_else(|| tracks.first().map(|(_, t)| t.len()))
        .unwrap_or(0);
    if tracks.iter().any(|(_, t)| t.len() != len) {
        return Err(Error::invalid("label tracks differ in length"));
    }
    let mut out = String::from("frame");
    if truth.is_some() {
        out.push_str(" truth");
    }
    for (name, _) in tracks {
        out.push(' ');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..len {
        let _ = write!(out, "{j}");
        if let Some(t) = truth {
            let _ = write!(out, " {}", t[j]);
        }
        for (_, track) in tracks {
            let _ = write!(out, " {}", track[j]);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_jaccard() {
        let s = jaccard_index(&[1, 1, 0, 0, 0, 0], &[1, 1, 1, 1, 0, 0], 2).unwrap();
        assert_eq!(s.per_class[&0], 0.5);
        assert_eq!(s.per_class[&1], 0.5);
        assert_eq!(s.mean, 0.5);
    }

    #[test]
    fn jaccard_extremes() {
        assert_eq!(jaccard_index(&[2, 0, 1], &[2, 0, 1], 3).unwrap().mean, 1.0);
        assert_eq!(jaccard_index(&[1, 1], &[2, 2], 3).unwrap().mean, 0.0);
        let s = jaccard_index(&[1, 1], &[1, 1], 4).unwrap();
        assert_eq!(s.per_class.len(), 1);
        assert!(jaccard_index(&[1], &[1, 1], 2).is_err());
        assert!(jaccard_index(&[5], &[1], 2).is_err());
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(classification_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert_eq!(classification_accuracy(&[1], &[1]).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&[1], &[0]).unwrap(), 0.0);
        assert!(classification_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn tracks_are_columnar() {
        let s = label_tracks(Some(&[0, 1]), &[("full", &[0, 0][..]), ("nf", &[1, 1][..])]).unwrap();
        assert_eq!(s, "frame truth full nf\n0 0 0 1\n1 1 0 1\n");
    }

    #[test]
    fn report_table_has_one_row_per_mode() {
        let r = AblationReport {
            rows: vec![AblationRow {
                mode: "al".into(),
                seeds: vec![0, 1],
                scores: vec![0.5, 0.7],
                mean: 0.6,
                std: 0.1,
            }],
        };
        assert_eq!(r.to_table().lines().count(), 2);
        assert_eq!(r.to_records().lines().count(), 1);
        assert!(r.row(Mode::AlOnly).is_some());
    }

    fn labels(n: usize, c: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1..n).prop_flat_map(move |len| (prop::collection::vec(0..c, len), prop::collection::vec(0..c, len)))
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric((p, t) in labels(40, 4)) {
            let a = jaccard_index(&p, &t, 4).unwrap();
            let b = jaccard_index(&t, &p, 4).unwrap();
            prop_assert_eq!(a.per_class, b.per_class);
        }

        #[test]
        fn jaccard_invariant_under_relabeling((p, t) in labels(40, 4), shift in 0usize..4) {
            let perm = |v: &[usize]| v.iter().map(|&c| (c + shift) % 4).collect::<Vec<_>>();
            let a = jaccard_index(&p, &t, 4).unwrap();
            let b = jaccard_index(&perm(&p), &perm(&t), 4).unwrap();
            prop_assert!((a.mean - b.mean).abs() < 1e-12);
        }

        #[test]
        fn jaccard_mean_in_unit_interval((p, t) in labels(40, 5)) {
            let s = jaccard_index(&p, &t, 5).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.mean));
        }
    }
}
