use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use svcq::alignment::{AlignmentOptions, SilenceLabels};
use svcq::codec::{BitrateMode, CorpusBitrate, TrainConfig};
use svcq::pipeline::{self, InputKind, ProbeConfig, ProbeLevel, ProbeSources, TaskChoice};
use svcq::probe::ProbeHyper;
use svcq::quantizer::KMeansParams;
use svcq::synthetic::{self, AlignmentFormat, SyntheticConfig};
use svcq::Scalar;

/// Multi-tier speech unit codebooks: train, encode, fuse, measure and probe.
#[derive(Debug, Parser)]
#[command(name = "svcq", version, propagate_version = true)]
struct Cli {
    /// Worker threads (0 = available parallelism).
    #[arg(long, global = true, env = "SVCQ_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Print the resolved configuration to stderr.
    #[arg(short, long, global = true, env = "SVCQ_VERBOSE")]
    verbose: bool,

    /// Floating-point precision used for computation.
    #[arg(long, global = true, env = "SVCQ_PRECISION", value_enum, default_value_t = Precision::F32)]
    precision: Precision,

    #[command(flatten)]
    align: AlignArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// TextGrid tier holding phone intervals.
    #[arg(long, global = true, env = "SVCQ_PHONE_TIER", default_value = "phones")]
    phone_tier: String,

    /// TextGrid tier holding word intervals.
    #[arg(long, global = true, env = "SVCQ_WORD_TIER", default_value = "words")]
    word_tier: String,

    /// Comma-separated labels treated as silence.
    #[arg(long, global = true, env = "SVCQ_SILENCE", default_value = ",sil,sp,spn")]
    silence: String,
}

impl AlignArgs {
    fn options(&self) -> AlignmentOptions {
        AlignmentOptions {
            phone_tier: self.phone_tier.clone(),
            word_tier: self.word_tier.clone(),
            silence: SilenceLabels::new(self.silence.split(',')),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the four tier codebooks on the train split of a manifest.
    Train(TrainArgs),
    /// Encode every manifest entry into multi-stream units.
    Encode(EncodeArgs),
    /// Reconstruct fused frame sequences from encoded units.
    Fuse(FuseArgs),
    /// Report bitrates of an encoded directory.
    Bitrate(BitrateArgs),
    /// Train and evaluate a linear probe.
    Probe(ProbeArgs),
    /// Describe a model, codebook, feature, units or alignment file.
    Inspect(InspectArgs),
    /// Write a synthetic labelled corpus with a manifest.
    Synth(SynthArgs),
}

fn existing_file(s: &str) -> std::result::Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn parse_k(s: &str) -> std::result::Result<[usize; 4], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [k] => Ok([k; 4]),
        [f, p, w, u] => Ok([f, p, w, u]),
        _ => Err("expected one size or four sizes (frame,phone,word,utterance)".into()),
    }
}

fn parse_splits(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected three counts (train,valid,test)".to_string())
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long, env = "SVCQ_MANIFEST", value_parser = existing_file)]
    manifest: PathBuf,

    /// Output model directory.
    #[arg(long, short)]
    out: PathBuf,

    /// Codebook sizes: one value for every tier, or frame,phone,word,utterance.
    #[arg(long, env = "SVCQ_K", value_parser = parse_k, default_value = "500")]
    k: [usize; 4],

    #[arg(long, env = "SVCQ_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long, env = "SVCQ_MAX_ITERS", default_value_t = KMeansParams::default().max_iters)]
    max_iters: usize,

    /// Stop once no centroid moves farther than this.
    #[arg(long, env = "SVCQ_TOL", default_value_t = KMeansParams::default().tol)]
    tol: f64,

    /// Z-score features with training statistics before clustering.
    #[arg(long, env = "SVCQ_STANDARDIZE")]
    standardize: bool,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Model directory or its model.json.
    #[arg(long)]
    model: PathBuf,

    #[arg(long, env = "SVCQ_MANIFEST", value_parser = existing_file)]
    manifest: PathBuf,

    /// Output directory for units and bitrate.json.
    #[arg(long, short)]
    out: PathBuf,

    /// Count only the frame stream in bitrates.
    #[arg(long)]
    baseline_frames_only: bool,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    model: PathBuf,

    /// Directory of encoded units.
    #[arg(long)]
    encoded: PathBuf,

    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BitrateArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    encoded: PathBuf,

    #[arg(long)]
    baseline_frames_only: bool,

    /// Include every utterance report in the output.
    #[arg(long)]
    per_utterance: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputArg {
    Continuous,
    PrePooled,
    PostPooled,
    Fused,
    FrameCodes,
}

impl From<InputArg> for InputKind {
    fn from(a: InputArg) -> Self {
        match a {
            InputArg::Continuous => InputKind::Continuous,
            InputArg::PrePooled => InputKind::PrePooled,
            InputArg::PostPooled => InputKind::PostPooled,
            InputArg::Fused => InputKind::Fused,
            InputArg::FrameCodes => InputKind::FrameCodes,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Frame,
    Word,
    Utterance,
}

impl From<LevelArg> for ProbeLevel {
    fn from(a: LevelArg) -> Self {
        match a {
            LevelArg::Frame => ProbeLevel::Frame,
            LevelArg::Word => ProbeLevel::Word,
            LevelArg::Utterance => ProbeLevel::Utterance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Auto,
    Binary,
    Multiclass,
}

impl From<TaskArg> for TaskChoice {
    fn from(a: TaskArg) -> Self {
        match a {
            TaskArg::Auto => TaskChoice::Auto,
            TaskArg::Binary => TaskChoice::Binary,
            TaskArg::Multiclass => TaskChoice::Multiclass,
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("sources").required(true).args(["manifest", "train"]))]
struct ProbeArgs {
    /// Model directory; required for every input kind except continuous and pre-pooled.
    #[arg(long)]
    model: Option<PathBuf>,

    /// One manifest whose entries carry their split.
    #[arg(long, value_parser = existing_file)]
    manifest: Option<PathBuf>,

    #[arg(long, value_parser = existing_file, requires_all = ["valid", "test"], conflicts_with = "manifest")]
    train: Option<PathBuf>,

    #[arg(long, value_parser = existing_file, requires = "train")]
    valid: Option<PathBuf>,

    #[arg(long, value_parser = existing_file, requires = "train")]
    test: Option<PathBuf>,

    #[arg(long, value_enum, env = "SVCQ_PROBE_INPUT", default_value_t = InputArg::Continuous)]
    input: InputArg,

    #[arg(long, value_enum, env = "SVCQ_PROBE_LEVEL", default_value_t = LevelArg::Utterance)]
    level: LevelArg,

    /// Manifest label key to predict.
    #[arg(long, env = "SVCQ_PROBE_LABEL", default_value = "emotion")]
    label: String,

    #[arg(long, value_enum, default_value_t = TaskArg::Auto)]
    task: TaskArg,

    #[arg(long, env = "SVCQ_LR", default_value_t = ProbeHyper::default().learning_rate)]
    learning_rate: f64,

    #[arg(long, env = "SVCQ_EPOCHS", default_value_t = ProbeHyper::default().epochs)]
    epochs: usize,

    #[arg(long, env = "SVCQ_BATCH_SIZE", default_value_t = ProbeHyper::default().batch_size)]
    batch_size: usize,

    #[arg(long, env = "SVCQ_SEED", default_value_t = 0)]
    seed: u64,

    /// Epochs without validation improvement before stopping (0 disables).
    #[arg(long, default_value_t = ProbeHyper::default().patience)]
    patience: usize,

    /// Comma-separated per-class loss weights.
    #[arg(long, value_delimiter = ',')]
    class_weights: Option<Vec<f64>>,

    /// Feed probe inputs without z-scoring them.
    #[arg(long)]
    no_standardize: bool,

    /// Where to write the full report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    path: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    TextgridLong,
    TextgridShort,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, short)]
    out: PathBuf,

    /// Utterances per split: train,valid,test.
    #[arg(long, value_parser = parse_splits, default_value = "60,20,20")]
    utterances: [usize; 3],

    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,

    #[arg(long, env = "SVCQ_SEED", default_value_t = 0)]
    seed: u64,
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn describe(c: &CorpusBitrate) -> String {
    format!(
        "{} utterances, mean {:.2} bps, total bits / total duration {:.2} bps",
        c.utterances, c.mean_bps, c.totals_bps
    )
}

fn mode(frames_only: bool) -> BitrateMode {
    if frames_only {
        BitrateMode::FramesOnly
    } else {
        BitrateMode::Full
    }
}

fn run<S: Scalar>(cli: &Cli) -> Result<()> {
    let align = cli.align.options();
    match &cli.command {
        Command::Train(a) => {
            let cfg = TrainConfig {
                k_per_tier: a.k,
                seed: a.seed,
                kmeans: KMeansParams {
                    max_iters: a.max_iters,
                    tol: a.tol,
                },
                standardize: a.standardize,
            };
            let summary = pipeline::train_to_dir::<S>(&a.manifest, &cfg, &align, &a.out)
                .with_context(|| format!("training on {}", a.manifest.display()))?;
            eprintln!("trained on {} utterances, model in {}", summary.train_utterances, a.out.display());
            print_json(&summary)
        }
        Command::Encode(a) => {
            let (summary, _) =
                pipeline::encode_to_dir::<S>(&a.model, &a.manifest, &align, mode(a.baseline_frames_only), &a.out)
                    .context("encoding")?;
            match &summary.corpus {
                Some(c) => eprintln!("encoded {}", describe(c)),
                None => eprintln!("0 utterances"),
            }
            print_json(&summary)
        }
        Command::Fuse(a) => {
            let summary = pipeline::fuse_dir::<S>(&a.model, &a.encoded, &a.out).context("fusing")?;
            eprintln!("{} utterances fused", summary.utterances);
            print_json(&summary)
        }
        Command::Bitrate(a) => {
            let (summary, reports) =
                pipeline::bitrate_of_dir::<S>(&a.model, &a.encoded, mode(a.baseline_frames_only)).context("bitrate")?;
            match &summary.corpus {
                Some(c) => eprintln!("{}", describe(c)),
                None => eprintln!("0 utterances"),
            }
            if a.per_utterance {
                let mut v = serde_json::to_value(&summary)?;
                v["reports"] = serde_json::to_value(&reports)?;
                print_json(&v)
            } else {
                print_json(&summary)
            }
        }
        Command::Probe(a) => {
            let sources = match (&a.manifest, &a.train, &a.valid, &a.test) {
                (Some(m), ..) => ProbeSources::Manifest(m.clone()),
                (None, Some(train), Some(valid), Some(test)) => ProbeSources::Separate {
                    train: train.clone(),
                    valid: valid.clone(),
                    test: test.clone(),
                },
                _ => unreachable!("clap enforces the source arguments"),
            };
            let cfg = ProbeConfig {
                input: a.input.into(),
                level: a.level.into(),
                label_key: a.label.clone(),
                task: a.task.into(),
                hyper: ProbeHyper {
                    learning_rate: a.learning_rate,
                    epochs: a.epochs,
                    batch_size: a.batch_size,
                    seed: a.seed,
                    patience: a.patience,
                    class_weights: a.class_weights.clone(),
                },
                standardize_inputs: !a.no_standardize,
            };
            let report = pipeline::probe_from_files::<S>(a.model.as_deref(), &sources, &align, &cfg, a.report.as_deref())
                .context("probing")?;
            eprintln!("{}: {:.4}", report.headline_metric, report.headline_value);
            print_json(&report)
        }
        Command::Inspect(a) => print_json(&pipeline::inspect(&a.path, &align)?),
        Command::Synth(a) => {
            let cfg = SyntheticConfig {
                utterances: a.utterances,
                seed: a.seed,
                ..SyntheticConfig::default()
            };
            let corpus = synthetic::generate_corpus::<S>(&cfg)?;
            let utts: Vec<_> = corpus.into_iter().map(|(u, _)| u).collect();
            let format = match a.format {
                FormatArg::Json => AlignmentFormat::Json,
                FormatArg::TextgridLong => AlignmentFormat::TextgridLong,
                FormatArg::TextgridShort => AlignmentFormat::TextgridShort,
            };
            let manifest = synthetic::write_corpus(&a.out, &utts, format)?;
            print_json(&json!({
                "manifest": manifest,
                "utterances": utts.len(),
                "config": cfg,
            }))
        }
    }
}

fn verbose_config(cli: &Cli) -> Value {
    json!({
        "jobs": cli.jobs,
        "precision": format!("{:?}", cli.precision).to_lowercase(),
        "alignment": cli.align.options(),
        "command": format!("{:?}", cli.command),
    })
}

fn init_pool(jobs: usize) -> Result<()> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting worker pool")?;
    }
    Ok(())
}

/// Causes joined with ": ", skipping any already spelled out by the message above it.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain().map(|c| c.to_string()) {
        if out.ends_with(&cause) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&cause);
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cli.verbose {
        eprintln!("{}", verbose_config(&cli));
    }
    let result = init_pool(cli.jobs).and_then(|_| match cli.precision {
        Precision::F32 => run::<f32>(&cli),
        Precision::F64 => run::<f64>(&cli),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}
