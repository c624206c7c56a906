//! Command-line front end: training, inference, inspection and ablation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alignnet::archive::{load_model, save_model};
use alignnet::config::RunConfig;
use alignnet::data::{load_dataset, read_sequence, save_dataset, synthetic_dataset};
use alignnet::eval::{ablation_report, associate_filters, jaccard_index, label_tracks};
use alignnet::train::{predict_frames, predict_sequence, train};
use alignnet::{Dataset, Error, Mode, Model};
use anyhow::anyhow;
use clap::{Parser, Subcommand};
use log::info;

/// Environment variable with the default worker thread count.
const THREADS_ENV: &str = "ALIGNNET_THREADS";

#[derive(Parser, Debug)]
#[command(name = "alignnet", version, about = "Alignment-kernel networks for sequence labeling")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured network variant.
    #[arg(long, global = true, value_parser = ["full", "nf", "al", "1d"])]
    mode: Option<String>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write the archive, metrics and a summary.
    Train,
    /// Classify whole sequences.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
    },
    /// Label every frame of a sequence.
    Segment {
        #[arg(long)]
        model: PathBuf,
        sequence: PathBuf,
        /// Also write label tracks to `segment_tracks.txt` in the output directory.
        #[arg(long)]
        export: bool,
    },
    /// Report the Abs-filters of a model and their class association.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        /// Labeled dataset for the association; defaults to the configured data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write the configured synthetic dataset to the output directory.
    Synth,
    /// Train every variant under several seeds and compare test Jaccard.
    Ablate {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Comma-separated variants.
        #[arg(long, default_value = "full,nf,al,1d")]
        modes: String,
    },
    /// Print the configuration in effect with every key documented.
    Config,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::State(_) => 4,
        _ => 3,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            error: e.into(),
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 4,
        error: e.into(),
    }
}

fn config_error(msg: String) -> Failure {
    Failure {
        code: 2,
        error: anyhow!(msg),
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| config_error(format!("{THREADS_ENV} must be a thread count, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(runtime)?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(mode) = &cli.mode {
        cfg.train.network.mode = Mode::parse(mode).expect("validated by clap");
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Predict { model, sequences } => cmd_predict(&model, &sequences),
        Command::Segment { model, sequence, export } => cmd_segment(&cfg, &model, &sequence, export),
        Command::Inspect { model, data } => cmd_inspect(&cfg, &model, data.as_deref()),
        Command::Synth => cmd_synth(&cfg),
        Command::Ablate { seeds, modes } => cmd_ablate(&cfg, seeds, &modes),
        Command::Config => {
            print!("{}", cfg.render());
            Ok(())
        }
    }
}

fn load_data(cfg: &RunConfig, path: Option<&Path>) -> CliResult<Dataset<f64>> {
    match path.or(cfg.data.as_deref()) {
        Some(p) => Ok(load_dataset(p)?),
        None => {
            let s = &cfg.synthetic;
            Ok(synthetic_dataset(&s.spec, s.train, s.val, s.test)?)
        }
    }
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| runtime(Error::io(&cfg.out_dir, e)))?;
    Ok(&cfg.out_dir)
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| runtime(Error::io(path, e)))
}

fn cmd_train(cfg: &RunConfig) -> CliResult {
    let data = load_data(cfg, None)?;
    let out = train(&data, &cfg.train)?;
    let dir = out_dir(cfg)?;
    save_model(&dir.join("model.bin"), &out.model).map_err(runtime)?;
    write(&dir.join("metrics.jsonl"), &out.metrics_jsonl())?;
    write(&dir.join("timing.jsonl"), &out.timing_jsonl())?;
    write(&dir.join("config.txt"), &cfg.render())?;
    let last = out.history.last().expect("at least one epoch");
    let net = &out.model.network;
    let mut summary = String::new();
    let _ = writeln!(summary, "mode: {}", net.config.mode);
    let _ = writeln!(summary, "epochs: {}", out.history.len());
    let _ = writeln!(summary, "final loss: {:.6}", last.train_loss);
    match last.val_jaccard {
        Some(j) => {
            let _ = writeln!(summary, "validation Jaccard: {j:.4}");
        }
        None => summary.push_str("validation Jaccard: n/a (no validation data)\n"),
    }
    let _ = writeln!(summary, "Al-filters: {}", net.filters.len());
    let _ = writeln!(summary, "Abs-filters: {}", net.abs_filters.len());
    let _ = writeln!(summary, "parameters: {}", net.parameter_count());
    if !out.skipped_sequences.is_empty() {
        let _ = writeln!(summary, "skipped short sequences: {}", out.skipped_sequences.join(", "));
    }
    write(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    info!("wrote model and metrics to {}", dir.display());
    Ok(())
}

fn load(model: &Path) -> CliResult<Model> {
    Ok(load_model(model)?)
}

fn cmd_predict(model: &Path, sequences: &[PathBuf]) -> CliResult {
    let model = load(model)?;
    for path in sequences {
        let (seq, _) = read_sequence::<f64>(path)?;
        let o = model.predict(&seq)?;
        let class = predict_sequence(&o);
        match seq.sequence_label {
            Some(truth) => println!("{}\t{class}\ttruth={truth}", path.display()),
            None => println!("{}\t{class}", path.display()),
        }
    }
    Ok(())
}

fn cmd_segment(cfg: &RunConfig, model: &Path, sequence: &Path, export: bool) -> CliResult {
    let model = load(model)?;
    let (seq, _) = read_sequence::<f64>(sequence)?;
    let o = model.predict(&seq)?;
    let labels = predict_frames(&o);
    let mut table = String::from("frame label");
    for c in 0..o.classes() {
        let _ = write!(table, " p{c}");
    }
    table.push('\n');
    for (j, &l) in labels.iter().enumerate() {
        let _ = write!(table, "{j} {l}");
        for &p in o.scores.row(j) {
            let _ = write!(table, " {p:.6}");
        }
        table.push('\n');
    }
    print!("{table}");
    if let Some(truth) = &seq.frame_labels {
        let score = jaccard_index(&labels, truth, o.classes())?;
        eprintln!("Jaccard: {:.4}", score.mean);
    }
    if export {
        let tracks = label_tracks(seq.frame_labels.as_deref(), &[(model.network.config.mode.name(), &labels)])?;
        write(&out_dir(cfg)?.join("segment_tracks.txt"), &tracks)?;
    }
    Ok(())
}

fn cmd_inspect(cfg: &RunConfig, model: &Path, data: Option<&Path>) -> CliResult {
    let model = load(model)?;
    let net = &model.network;
    if net.abs_filters.is_empty() {
        println!("model has no Abs-filters");
        return Ok(());
    }
    let dataset = load_data(cfg, data)?;
    let assoc = associate_filters(&model, &dataset.train)?;
    let t = net.config.align.t;
    let mut report = String::from("filter chain p frames class energies\n");
    let mut traces = String::from("filter position weight\n");
    for (k, f) in assoc.abs_filters().enumerate() {
        let abs = &net.abs_filters[k];
        let chain: Vec<String> = abs.chain.iter().map(usize::to_string).collect();
        let energies: Vec<String> = f.energy.iter().map(|e| format!("{e:.4}")).collect();
        let _ = writeln!(
            report,
            "{k} {} {} {} {} {}",
            chain.join("-"),
            abs.multiplicity(),
            abs.receptive_field(t),
            f.class,
            energies.join(",")
        );
        for (i, w) in abs.weights(&net.filters)?.iter().enumerate() {
            let _ = writeln!(traces, "{k} {i} {w:.8}");
        }
    }
    print!("{report}");
    let dir = out_dir(cfg)?;
    write(&dir.join("abs_filters.txt"), &report)?;
    write(&dir.join("abs_filter_weights.txt"), &traces)?;
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> CliResult {
    let s = &cfg.synthetic;
    let data = synthetic_dataset::<f64>(&s.spec, s.train, s.val, s.test)?;
    let dir = out_dir(cfg)?;
    save_dataset(dir, &data).map_err(runtime)?;
    println!(
        "wrote {} train, {} val, {} test sequences to {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig, seeds: u64, modes: &str) -> CliResult {
    let modes = modes
        .split(',')
        .map(|m| Mode::parse(m.trim()).ok_or_else(|| config_error(format!("unknown mode `{m}`"))))
        .collect::<CliResult<Vec<_>>>()?;
    if seeds == 0 {
        return Err(config_error("--seeds must be positive".into()));
    }
    let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.train.seed + i).collect();
    let data = load_data(cfg, None)?;
    let report = ablation_report(&data, &cfg.train, &modes, &seed_list)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("ablation.txt"), &report.to_table())?;
    write(&dir.join("ablation.jsonl"), &report.to_records())?;
    print!("{}", report.to_table());
    Ok(())
}
