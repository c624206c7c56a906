use alignnet::align::forward_align;
use alignnet::archive::{from_bytes, load_model, save_model, to_bytes, FORMAT_VERSION};
use alignnet::data::synthetic_dataset;
use alignnet::eval::{associate_filters, evaluate_segmentation};
use alignnet::train::{train, TrainConfig, TrainOutput};
use alignnet::{Dataset, Error, Mode, Model, MotionSequence, SyntheticSpec};

fn small_data(seed: u64) -> Dataset<f64> {
    let spec = SyntheticSpec {
        classes: 3,
        length: (64, 128),
        segments: (1, 3),
        seed,
        ..SyntheticSpec::default()
    };
    synthetic_dataset(&spec, 12, 3, 4).unwrap()
}

fn small_config(mode: Mode) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.network.mode = mode;
    cfg.network.align.filter_count = 6;
    cfg.network.backbone.widths = vec![8, 8, 8];
    cfg.network.backbone.dropout = 0.2;
    cfg.adam.learning_rate = 3e-3;
    cfg.epochs = 4;
    cfg.warmup_epochs = 2;
    cfg.max_abs_filters = 6;
    cfg
}

fn run(mode: Mode) -> (Dataset<f64>, TrainOutput<f64>) {
    let data = small_data(1);
    let out = train(&data, &small_config(mode)).unwrap();
    (data, out)
}

#[test]
fn same_seed_reproduces_metrics_and_weights() {
    let data = small_data(2);
    let cfg = small_config(Mode::Full);
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a.metrics_jsonl(), b.metrics_jsonl());
    assert_eq!(a.model, b.model);
    let mut other = cfg.clone();
    other.seed = 9;
    assert_ne!(train(&data, &other).unwrap().model, a.model);
}

#[test]
fn metrics_history_has_one_record_per_epoch() {
    let (_, out) = run(Mode::Full);
    let metrics = out.metrics_jsonl();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 4);
    for (i, l) in lines.iter().enumerate() {
        assert!(l.starts_with(&format!("{{\"epoch\":{}", i + 1)), "{l}");
        assert!(l.contains("\"train_loss\"") && l.contains("\"val_jaccard\"") && l.contains("\"abs_filters\""));
    }
    assert_eq!(out.timing_jsonl().lines().count(), 4);
    assert_eq!(out.model.network.last_synthesis_epoch, Some(3));
}

#[test]
fn al_mode_has_no_abs_filters_and_plain_map() {
    let (data, out) = run(Mode::AlOnly);
    let net = &out.model.network;
    assert!(net.abs_filters.is_empty());
    let seq = out.model.normalize(&data.test[0]).unwrap();
    let augmented = net.augmented_map(&seq).unwrap();
    let plain = forward_align(&seq, &net.filters, &net.config.align).unwrap();
    assert_eq!(augmented.values, plain.map.values);
}

#[test]
fn every_mode_trains_and_predicts() {
    for mode in Mode::ALL {
        let (data, out) = run(mode);
        let score = evaluate_segmentation(&out.model, &data.test).unwrap();
        assert!((0.0..=1.0).contains(&score.mean));
        assert!(out.history.iter().all(|r| r.train_loss.is_finite()));
        if !mode.uses_abs() {
            assert!(out.history.iter().all(|r| r.abs_filters == 0));
        }
    }
}

#[test]
fn loss_halves_within_ten_epochs_on_benchmark() {
    let spec = SyntheticSpec {
        seed: 1,
        ..SyntheticSpec::default()
    };
    let data: Dataset<f64> = synthetic_dataset(&spec, 60, 0, 20).unwrap();
    let mut cfg = TrainConfig::default();
    cfg.network.backbone.dropout = 0.2;
    cfg.adam.learning_rate = 3e-3;
    cfg.epochs = 10;
    cfg.seed = 1;
    let out = train(&data, &cfg).unwrap();
    let (first, tenth) = (out.history[0].train_loss, out.history[9].train_loss);
    assert!(tenth < 0.5 * first, "loss {first} -> {tenth}");
}

#[test]
fn short_sequences_are_skipped() {
    let mut data = small_data(3);
    let short = data.train[0].slice(0, 5).unwrap().with_source("short");
    data.train.push(short);
    let out = train(&data, &small_config(Mode::AlOnly)).unwrap();
    assert_eq!(out.skipped_sequences, vec!["short".to_string()]);
    let err = out.model.predict(&data.train.last().unwrap().clone()).unwrap_err();
    assert!(err.to_string().contains("at least 8"), "{err}");
}

#[test]
fn unlabeled_training_data_is_rejected() {
    let mut data = small_data(4);
    let seq = &data.train[0];
    data.train[0] = MotionSequence::new(seq.channels().clone(), None).unwrap();
    assert!(matches!(train(&data, &small_config(Mode::AlOnly)), Err(Error::Data(_))));
}

fn assert_bit_exact(a: &Model, b: &Model, seqs: &[MotionSequence<f64>]) {
    for s in seqs {
        let (x, y) = (a.predict(s).unwrap(), b.predict(s).unwrap());
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x.logits.data()), bits(y.logits.data()));
        assert_eq!(bits(x.scores.data()), bits(y.scores.data()));
    }
}

#[test]
fn archive_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Full, Mode::ConvFront] {
        let (data, out) = run(mode);
        let path = dir.path().join(format!("{mode}.bin"));
        save_model(&path, &out.model).unwrap();
        let back: Model = load_model(&path).unwrap();
        assert_eq!(back.network.abs_filters, out.model.network.abs_filters);
        assert_eq!(back.stats, out.model.stats);
        assert_eq!(back.network.last_synthesis_epoch, out.model.network.last_synthesis_epoch);
        assert_bit_exact(&out.model, &back, &data.test);
        assert_eq!(to_bytes(&back), to_bytes(&out.model));
    }
}

#[test]
fn archive_rejects_other_versions_and_damage() {
    let (_, out) = run(Mode::AlOnly);
    let bytes = to_bytes(&out.model);
    let mut newer = bytes.clone();
    newer[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match from_bytes::<f64>(&newer) {
        Err(Error::Version { found, expected }) => assert_eq!((found, expected), (FORMAT_VERSION + 1, FORMAT_VERSION)),
        other => panic!("expected a version error, got {other:?}"),
    }
    assert!(matches!(from_bytes::<f64>(b"not a model"), Err(Error::Archive(_))));
    assert!(matches!(from_bytes::<f64>(&bytes[..bytes.len() - 3]), Err(Error::Archive(_))));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(from_bytes::<f64>(&trailing), Err(Error::Archive(_))));
}

#[test]
fn f32_model_trains_and_round_trips() {
    let data = small_data(5);
    let data32 = Dataset {
        class_count: data.class_count,
        train: data.train.iter().map(MotionSequence::cast).collect(),
        val: data.val.iter().map(MotionSequence::cast).collect(),
        test: data.test.iter().map(MotionSequence::cast).collect(),
    };
    let out = train::<f32>(&data32, &small_config(Mode::Full)).unwrap();
    let back = from_bytes::<f32>(&to_bytes(&out.model)).unwrap();
    for s in &data32.test {
        assert_eq!(out.model.predict(s).unwrap(), back.predict(s).unwrap());
    }
}

#[test]
fn association_energies_match_double_loop_and_are_additive() {
    let (data, out) = run(Mode::Full);
    let model = &out.model;
    let seqs = &data.test;
    let assoc = associate_filters(model, seqs).unwrap();
    let classes = model.network.classes();
    for f in &assoc.filters {
        let mut expected = vec![0.0f64; classes];
        for s in seqs {
            let map = model.network.augmented_map(&model.normalize(s).unwrap()).unwrap();
            let labels = s.frame_labels.as_ref().unwrap();
            for c in 0..classes {
                for (j, &l) in labels.iter().enumerate() {
                    if l == c {
                        expected[c] += map.values.at2(f.row, j).powi(2);
                    }
                }
            }
        }
        for (e, x) in f.energy.iter().zip(&expected) {
            assert!((e - x).abs() <= 1e-12 * x.max(1.0));
        }
        assert!(f.energy.iter().all(|&e| e >= 0.0));
    }
    let (head, tail) = seqs.split_at(2);
    let a = associate_filters(model, head).unwrap();
    let b = associate_filters(model, tail).unwrap();
    for ((whole, x), y) in assoc.filters.iter().zip(&a.filters).zip(&b.filters) {
        for c in 0..classes {
            let sum = x.energy[c] + y.energy[c];
            assert!((whole.energy[c] - sum).abs() <= 1e-9 * sum.max(1.0));
        }
    }
}
