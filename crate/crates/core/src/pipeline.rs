//! End-to-end steps over files on disk: the bodies of the command-line tool.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alignment::{load_alignment, AlignmentOptions};
use crate::codec::{
    corpus_bitrate, decode_fused, encode, encoded_to_json, load_corpus, load_model, read_encoded,
    save_model, train_svc, utterance_bitrate, BitrateMode, CorpusBitrate, CorpusManifest, Split,
    TierTrainingReport, TrainConfig, Utterance, MODEL_FILE,
};
use crate::error::{Error, Result};
use crate::format::{read_header, write_fmat, CODEBOOK_MAGIC, FMAT_MAGIC};
use crate::model::{BitrateReport, EncodedUtterance, FeatureMatrix, Matrix, Standardizer, SvcModel, Tier};
use crate::pooling::{pool_segments, post_pool_codes, PooledSegments};
use crate::probe::{evaluate, train_probe, MetricsReport, ProbeDataset, ProbeHyper, ProbeTask, TrainingLog};
use crate::quantizer::assign_batch;
use crate::scalar::Scalar;

/// Suffix of encoded-utterance files.
pub const UNITS_SUFFIX: &str = ".units.json";
/// Per-utterance bitrate reports written next to the encoded files.
pub const BITRATE_FILE: &str = "bitrate.json";

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// File stem for an utterance id; path separators become `_`.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if matches!(c, '/' | '\\' | '\0') { '_' } else { c })
        .collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub model_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub train_utterances: usize,
    pub config: TrainConfig,
    pub tiers: Vec<TierTrainingReport>,
}

pub fn train_to_dir<S: Scalar>(
    manifest: &Path,
    cfg: &TrainConfig,
    align: &AlignmentOptions,
    out_dir: &Path,
) -> Result<TrainSummary> {
    let manifest = CorpusManifest::load(manifest)?;
    let corpus: Vec<Utterance<S>> = load_corpus(&manifest, align, Some(Split::Train))?;
    let trained = train_svc(&corpus, cfg)?;
    let files = save_model(out_dir, &trained.model)?;
    Ok(TrainSummary {
        model_dir: out_dir.to_path_buf(),
        files,
        train_utterances: corpus.len(),
        config: cfg.clone(),
        tiers: trained.reports.to_vec(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitrateSummary {
    pub utterances: usize,
    pub mode: BitrateMode,
    /// Absent when there are no utterances.
    pub corpus: Option<CorpusBitrate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BitrateFile {
    #[serde(flatten)]
    summary: BitrateSummary,
    reports: Vec<BitrateReport>,
}

fn summarize(reports: &[BitrateReport], mode: BitrateMode) -> Result<BitrateSummary> {
    Ok(BitrateSummary {
        utterances: reports.len(),
        mode,
        corpus: if reports.is_empty() { None } else { Some(corpus_bitrate(reports)?) },
    })
}

/// Encode every manifest entry into `<out>/<id>.units.json` and write the bitrate
/// reports to `<out>/bitrate.json`.
pub fn encode_to_dir<S: Scalar>(
    model_dir: &Path,
    manifest: &Path,
    align: &AlignmentOptions,
    mode: BitrateMode,
    out_dir: &Path,
) -> Result<(BitrateSummary, Vec<BitrateReport>)> {
    let model: SvcModel<S> = load_model(model_dir)?;
    let manifest = CorpusManifest::load(manifest)?;
    create_dir(out_dir)?;
    let encoded: Vec<EncodedUtterance> = manifest
        .entries()
        .par_iter()
        .map(|e| encode(&model, &Utterance::<S>::load(e, align)?))
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(encoded.len());
    for enc in &encoded {
        let path = out_dir.join(format!("{}{UNITS_SUFFIX}", file_stem(enc.utterance_id())));
        write(&path, (encoded_to_json(enc) + "\n").as_bytes())?;
        reports.push(utterance_bitrate(enc, &model, mode)?);
    }
    let summary = summarize(&reports, mode)?;
    let file = BitrateFile {
        summary: summary.clone(),
        reports,
    };
    write(&out_dir.join(BITRATE_FILE), pretty(&file).as_bytes())?;
    Ok((summary, file.reports))
}

/// Encoded-utterance files in a directory, sorted by name.
pub fn list_encoded(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.to_string_lossy().ends_with(UNITS_SUFFIX) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_all_encoded(dir: &Path) -> Result<Vec<EncodedUtterance>> {
    list_encoded(dir)?.par_iter().map(|p| read_encoded(p)).collect()
}

/// Bitrates of already encoded utterances.
pub fn bitrate_of_dir<S: Scalar>(
    model_dir: &Path,
    encoded_dir: &Path,
    mode: BitrateMode,
) -> Result<(BitrateSummary, Vec<BitrateReport>)> {
    let model: SvcModel<S> = load_model(model_dir)?;
    let reports = read_all_encoded(encoded_dir)?
        .iter()
        .map(|e| utterance_bitrate(e, &model, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize(&reports, mode)?, reports))
}

#[derive(Debug, Clone, Serialize)]
pub struct FuseSummary {
    pub utterances: usize,
    pub outputs: Vec<PathBuf>,
}

/// Fuse every `*.units.json` in `encoded_dir` into `<out>/<id>.fmat`.
pub fn fuse_dir<S: Scalar>(model_dir: &Path, encoded_dir: &Path, out_dir: &Path) -> Result<FuseSummary> {
    let model: SvcModel<S> = load_model(model_dir)?;
    let encoded = read_all_encoded(encoded_dir)?;
    create_dir(out_dir)?;
    let fused: Vec<Vec<u8>> = encoded
        .par_iter()
        .map(|e| decode_fused(&model, e).map(|f| write_fmat(&f.into_features())))
        .collect::<Result<_>>()?;
    let mut outputs = Vec::with_capacity(fused.len());
    for (e, bytes) in encoded.iter().zip(&fused) {
        let path = out_dir.join(format!("{}.fmat", file_stem(e.utterance_id())));
        write(&path, bytes)?;
        outputs.push(path);
    }
    Ok(FuseSummary {
        utterances: outputs.len(),
        outputs,
    })
}

/// What a probe sees for each example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Frame vectors as they are; segment means at word or utterance level.
    Continuous,
    /// Segment means of continuous frames.
    PrePooled,
    /// Segment means of the frame codebook centroids selected for each frame.
    PostPooled,
    /// Frames reconstructed from all four streams (segment means of them above
    /// frame level).
    Fused,
    /// Frame codebook centroid of each frame: the single-codebook baseline.
    FrameCodes,
}

impl InputKind {
    pub const ALL: [InputKind; 5] = [
        InputKind::Continuous,
        InputKind::PrePooled,
        InputKind::PostPooled,
        InputKind::Fused,
        InputKind::FrameCodes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InputKind::Continuous => "continuous",
            InputKind::PrePooled => "pre-pooled",
            InputKind::PostPooled => "post-pooled",
            InputKind::Fused => "fused",
            InputKind::FrameCodes => "frame-codes",
        }
    }

    pub fn needs_model(self) -> bool {
        !matches!(self, InputKind::Continuous | InputKind::PrePooled)
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown input kind {s:?}")))
    }
}

/// Granularity of probe examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeLevel {
    Frame,
    Word,
    Utterance,
}

impl ProbeLevel {
    fn tier(self) -> Tier {
        match self {
            ProbeLevel::Frame => Tier::Frame,
            ProbeLevel::Word => Tier::Word,
            ProbeLevel::Utterance => Tier::Utterance,
        }
    }
}

impl FromStr for ProbeLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(ProbeLevel::Frame),
            "word" => Ok(ProbeLevel::Word),
            "utterance" | "utt" => Ok(ProbeLevel::Utterance),
            _ => Err(Error::Config(format!("unknown probe level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskChoice {
    /// Binary when every training label is `0`/`1` or `false`/`true`.
    #[default]
    Auto,
    Binary,
    Multiclass,
}

impl FromStr for TaskChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TaskChoice::Auto),
            "binary" => Ok(TaskChoice::Binary),
            "multiclass" => Ok(TaskChoice::Multiclass),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub input: InputKind,
    pub level: ProbeLevel,
    /// Key under the manifest `labels` object. A scalar labels the whole utterance;
    /// an array holds one label per word segment.
    pub label_key: String,
    pub task: TaskChoice,
    pub hyper: ProbeHyper,
    /// Z-score probe inputs with training-set statistics.
    pub standardize_inputs: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            input: InputKind::Continuous,
            level: ProbeLevel::Utterance,
            label_key: "emotion".into(),
            task: TaskChoice::Auto,
            hyper: ProbeHyper::default(),
            standardize_inputs: true,
        }
    }
}

struct Examples<S> {
    rows: Matrix<S>,
    labels: Vec<String>,
}

fn label_string(v: &Value, utt: &str, key: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(Error::Config(format!(
            "utterance {utt}: label {key:?} must be a string, number or boolean, got {v}"
        ))),
    }
}

enum UttLabels {
    Whole(String),
    PerWord(Vec<String>),
}

fn utterance_labels<S: Scalar>(u: &Utterance<S>, key: &str) -> Result<UttLabels> {
    let v = u
        .labels
        .get(key)
        .ok_or_else(|| Error::Config(format!("utterance {}: no label {key:?}", u.id)))?;
    match v {
        Value::Array(items) => {
            let words = u.segmentation.words().len();
            if items.len() != words {
                return Err(Error::Config(format!(
                    "utterance {}: label {key:?} has {} entries for {words} words",
                    u.id,
                    items.len()
                )));
            }
            Ok(UttLabels::PerWord(
                items.iter().map(|i| label_string(i, &u.id, key)).collect::<Result<_>>()?,
            ))
        }
        v => Ok(UttLabels::Whole(label_string(v, &u.id, key)?)),
    }
}

fn frame_codes<S: Scalar>(model: &SvcModel<S>, features: &FeatureMatrix<S>) -> Result<crate::model::DsuStream> {
    Ok(crate::model::DsuStream::new(
        Tier::Frame,
        assign_batch(model.codebook(Tier::Frame), features.matrix())?,
    ))
}

fn utterance_examples<S: Scalar>(
    model: Option<&SvcModel<S>>,
    u: &Utterance<S>,
    cfg: &ProbeConfig,
) -> Result<Examples<S>> {
    let labels = utterance_labels(u, &cfg.label_key)?;
    if cfg.input.needs_model() && model.is_none() {
        return Err(Error::Config(format!("{} inputs need a model", cfg.input)));
    }
    let standardized;
    let features = match model.and_then(|m| m.standardizer()) {
        Some(st) => {
            standardized = st.apply(&u.features)?;
            &standardized
        }
        None => &u.features,
    };
    let fused = |m: &SvcModel<S>| -> Result<FeatureMatrix<S>> {
        Ok(decode_fused(m, &encode(m, u)?)?.into_features())
    };
    let span_map = &u.span_map;
    match cfg.level {
        ProbeLevel::Frame => {
            let rows = match cfg.input {
                InputKind::Continuous => features.matrix().clone(),
                InputKind::Fused => fused(model.unwrap())?.into_matrix(),
                InputKind::FrameCodes => {
                    let m = model.unwrap();
                    let cb = m.codebook(Tier::Frame);
                    let codes = frame_codes(m, features)?;
                    Matrix::from_rows(cb.dim(), codes.codes.iter().map(|&c| cb.centroid(c as usize)))?
                }
                InputKind::PrePooled | InputKind::PostPooled => {
                    return Err(Error::Config(format!(
                        "{} inputs are segment means; use --level word or utterance",
                        cfg.input
                    )))
                }
            };
            let mut keep = Vec::new();
            let mut out = Vec::new();
            for n in 0..rows.rows() {
                let label = match &labels {
                    UttLabels::Whole(l) => Some(l.clone()),
                    UttLabels::PerWord(ls) => span_map.segment_of(Tier::Word, n).map(|w| ls[w].clone()),
                };
                if let Some(l) = label {
                    keep.push(n);
                    out.push(l);
                }
            }
            Ok(Examples {
                rows: Matrix::from_rows(rows.cols(), keep.iter().map(|&n| rows.row(n)))?,
                labels: out,
            })
        }
        level => {
            let tier = level.tier();
            let pooled: PooledSegments<S> = match cfg.input {
                InputKind::Continuous | InputKind::PrePooled => pool_segments(features, span_map, tier)?,
                InputKind::PostPooled | InputKind::FrameCodes => {
                    let m = model.unwrap();
                    post_pool_codes(&frame_codes(m, features)?, m.codebook(Tier::Frame), span_map, tier)?
                }
                InputKind::Fused => pool_segments(&fused(model.unwrap())?, span_map, tier)?,
            };
            let labels = match (&labels, level) {
                (UttLabels::Whole(l), _) => vec![l.clone(); pooled.len()],
                (UttLabels::PerWord(ls), ProbeLevel::Word) => {
                    pooled.segment_indices.iter().map(|&i| ls[i].clone()).collect()
                }
                (UttLabels::PerWord(_), _) => {
                    return Err(Error::Config(format!(
                        "label {:?} is per word; it cannot label whole utterances",
                        cfg.label_key
                    )))
                }
            };
            Ok(Examples {
                rows: pooled.vectors,
                labels,
            })
        }
    }
}

fn split_examples<S: Scalar>(model: Option<&SvcModel<S>>, corpus: &[Utterance<S>], cfg: &ProbeConfig) -> Result<Examples<S>> {
    let parts: Vec<Examples<S>> = corpus
        .par_iter()
        .map(|u| utterance_examples(model, u, cfg))
        .collect::<Result<_>>()?;
    let dim = parts.first().map(|p| p.rows.cols()).unwrap_or(0);
    let mut rows = Matrix::zeros(0, dim);
    let mut labels = Vec::new();
    for p in parts {
        if p.rows.cols() != dim {
            return Err(Error::DimensionMismatch {
                context: "probe inputs",
                expected: dim,
                found: p.rows.cols(),
            });
        }
        rows.extend_rows(&p.rows);
        labels.extend(p.labels);
    }
    Ok(Examples { rows, labels })
}

fn resolve_task(train_labels: &BTreeSet<&str>, choice: TaskChoice) -> Result<(ProbeTask, Vec<String>)> {
    let binary_names = [["0", "1"], ["false", "true"]]
        .into_iter()
        .find(|names| train_labels.iter().all(|l| names.contains(l)));
    let sorted: Vec<String> = train_labels.iter().map(|s| s.to_string()).collect();
    match (choice, binary_names) {
        (TaskChoice::Auto | TaskChoice::Binary, Some(names)) => {
            Ok((ProbeTask::Binary, names.iter().map(|s| s.to_string()).collect()))
        }
        (TaskChoice::Binary, None) if sorted.len() == 2 => Ok((ProbeTask::Binary, sorted)),
        (TaskChoice::Binary, None) => Err(Error::Config(format!(
            "binary task needs two label values, training set has {}",
            sorted.len()
        ))),
        (_, _) if sorted.len() < 2 => Err(Error::Config(format!(
            "multiclass task needs at least two label values, training set has {}",
            sorted.len()
        ))),
        (_, _) => Ok((ProbeTask::Multiclass { classes: sorted.len() }, sorted)),
    }
}

fn to_dataset<S: Scalar>(ex: Examples<S>, classes: &[String], split: &str, st: Option<&Standardizer>) -> Result<ProbeDataset<S>> {
    let labels = ex
        .labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Config(format!("{split} label {l:?} does not occur in the training split")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = match st {
        Some(st) => st.apply_rows(&ex.rows)?,
        None => ex.rows,
    };
    if rows.rows() == 0 {
        return Err(Error::EmptySplit(split.to_string()));
    }
    ProbeDataset::new(rows, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub input: InputKind,
    pub level: ProbeLevel,
    pub label_key: String,
    pub classes: Vec<String>,
    pub train_examples: usize,
    pub valid_examples: usize,
    /// Accuracy for multiclass tasks, positive-class F1 for binary ones.
    pub headline_metric: String,
    pub headline_value: f64,
    pub metrics: MetricsReport,
    pub training: TrainingLog,
}

/// Build datasets for the three splits, train a probe and score it on `test`.
pub fn run_probe<S: Scalar>(
    model: Option<&SvcModel<S>>,
    train: &[Utterance<S>],
    valid: &[Utterance<S>],
    test: &[Utterance<S>],
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let train_ex = split_examples(model, train, cfg)?;
    let valid_ex = split_examples(model, valid, cfg)?;
    let test_ex = split_examples(model, test, cfg)?;
    let train_labels: BTreeSet<&str> = train_ex.labels.iter().map(String::as_str).collect();
    let (task, classes) = resolve_task(&train_labels, cfg.task)?;
    let st = if cfg.standardize_inputs && train_ex.rows.rows() > 0 {
        Some(Standardizer::fit([&train_ex.rows])?)
    } else {
        None
    };
    let train_ds = to_dataset(train_ex, &classes, "train", st.as_ref())?;
    let valid_ds = to_dataset(valid_ex, &classes, "valid", st.as_ref())?;
    let test_ds = to_dataset(test_ex, &classes, "test", st.as_ref())?;
    let (probe, training) = train_probe(&train_ds, &valid_ds, task, &cfg.hyper)?;
    let metrics = evaluate(&probe, &test_ds)?;
    let (headline_metric, headline_value) = match task {
        ProbeTask::Binary => ("binary_f1", metrics.binary_f1.unwrap_or_default()),
        ProbeTask::Multiclass { .. } => ("accuracy", metrics.accuracy),
    };
    Ok(ProbeReport {
        input: cfg.input,
        level: cfg.level,
        label_key: cfg.label_key.clone(),
        classes,
        train_examples: train_ds.len(),
        valid_examples: valid_ds.len(),
        headline_metric: headline_metric.into(),
        headline_value,
        metrics,
        training,
    })
}

/// Where the probe splits come from.
#[derive(Debug, Clone)]
pub enum ProbeSources {
    /// One manifest; entries are split by their `split` field.
    Manifest(PathBuf),
    /// One manifest per split; every entry of each is used.
    Separate { train: PathBuf, valid: PathBuf, test: PathBuf },
}

pub fn probe_from_files<S: Scalar>(
    model_dir: Option<&Path>,
    sources: &ProbeSources,
    align: &AlignmentOptions,
    cfg: &ProbeConfig,
    report_path: Option<&Path>,
) -> Result<ProbeReport> {
    let model: Option<SvcModel<S>> = model_dir.map(load_model).transpose()?;
    let (train, valid, test) = match sources {
        ProbeSources::Manifest(path) => {
            let m = CorpusManifest::load(path)?;
            (
                load_corpus(&m, align, Some(Split::Train))?,
                load_corpus(&m, align, Some(Split::Valid))?,
                load_corpus(&m, align, Some(Split::Test))?,
            )
        }
        ProbeSources::Separate { train, valid, test } => {
            let load = |p: &Path| -> Result<Vec<Utterance<S>>> { load_corpus(&CorpusManifest::load(p)?, align, None) };
            (load(train)?, load(valid)?, load(test)?)
        }
    };
    for (name, split) in [("train", &train), ("valid", &valid), ("test", &test)] {
        if split.is_empty() {
            return Err(Error::EmptySplit(name.into()));
        }
    }
    let report = run_probe(model.as_ref(), &train, &valid, &test, cfg)?;
    if let Some(path) = report_path {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        write(path, pretty(&report).as_bytes())?;
    }
    Ok(report)
}

/// Describe a codebook, feature, model, encoded or alignment file.
pub fn inspect(path: &Path, align: &AlignmentOptions) -> Result<Value> {
    if path.is_dir() && path.join(MODEL_FILE).is_file() {
        return inspect_model(path);
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if name == MODEL_FILE {
        return inspect_model(path);
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CODEBOOK_MAGIC) || bytes.starts_with(FMAT_MAGIC) {
        return Ok(serde_json::to_value(read_header(&bytes)?).expect("header serializes"));
    }
    if name.ends_with(UNITS_SUFFIX) {
        let enc: EncodedUtterance = serde_json::from_slice(&bytes).map_err(|e| Error::MalformedJson(e.to_string()))?;
        let streams: serde_json::Map<String, Value> = enc
            .streams()
            .iter()
            .map(|s| (s.tier.name().to_string(), json!(s.len())))
            .collect();
        return Ok(json!({
            "format": "encoded",
            "utterance_id": enc.utterance_id(),
            "duration": enc.duration(),
            "frame_hop": enc.frame_hop(),
            "stream_lengths": streams,
        }));
    }
    let lower = name.to_ascii_lowercase();
    if lower.ends_with(".textgrid") || lower.ends_with(".json") {
        let seg = load_alignment(path, align)?;
        return Ok(json!({
            "format": "alignment",
            "duration": seg.duration(),
            "phones": seg.phones().len(),
            "words": seg.words().len(),
        }));
    }
    Err(Error::Config(format!("{}: unrecognized file type", path.display())))
}

fn inspect_model(path: &Path) -> Result<Value> {
    let model: SvcModel<f32> = load_model(path)?;
    let tiers: Vec<Value> = model
        .codebooks()
        .iter()
        .map(|cb| {
            json!({
                "tier": cb.tier(),
                "k": cb.k(),
                "seed": cb.meta().seed,
                "iterations_run": cb.meta().iterations_run,
                "final_inertia": cb.meta().final_inertia,
            })
        })
        .collect();
    Ok(json!({
        "format": "model",
        "dim": model.dim(),
        "frame_hop": model.frame_hop(),
        "standardized": model.standardizer().is_some(),
        "codebooks": tiers,
    }))
}
