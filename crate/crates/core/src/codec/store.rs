//! A trained model on disk: `model.json` plus one codebook file per tier.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{load_codebook, save_codebook};
use crate::model::{Standardizer, SvcModel, Tier};
use crate::scalar::Scalar;

pub const MODEL_FILE: &str = "model.json";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelIndex {
    version: u32,
    dim: usize,
    frame_hop: f64,
    vocab_sizes: BTreeMap<Tier, usize>,
    codebooks: BTreeMap<Tier, String>,
    #[serde(default)]
    standardizer: Option<Standardizer>,
}

fn codebook_file(tier: Tier) -> String {
    format!("{}.svcb", tier.name())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write the model into `dir` (created if missing). Returns the files written.
pub fn save_model<S: Scalar>(dir: &Path, model: &SvcModel<S>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for cb in model.codebooks() {
        let path = dir.join(codebook_file(cb.tier()));
        write(&path, &save_codebook(cb))?;
        written.push(path);
    }
    let index = ModelIndex {
        version: MODEL_VERSION,
        dim: model.dim(),
        frame_hop: model.frame_hop(),
        vocab_sizes: Tier::ALL.iter().map(|&t| (t, model.codebook(t).k())).collect(),
        codebooks: Tier::ALL.iter().map(|&t| (t, codebook_file(t))).collect(),
        standardizer: model.standardizer().cloned(),
    };
    let path = dir.join(MODEL_FILE);
    let mut json = serde_json::to_string_pretty(&index).expect("model index serializes");
    json.push('\n');
    write(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Load a model from its directory or from the path of its `model.json`.
pub fn load_model<S: Scalar>(path: &Path) -> Result<SvcModel<S>> {
    let (dir, index_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MODEL_FILE))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    };
    let text = std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let index: ModelIndex = serde_json::from_slice(&text)
        .map_err(|e| Error::MalformedJson(format!("{}: {e}", index_path.display())))?;
    if index.version != MODEL_VERSION {
        return Err(Error::ModelMismatch(format!("unsupported model version {}", index.version)));
    }
    let load = |tier: Tier| {
        let name = index
            .codebooks
            .get(&tier)
            .ok_or_else(|| Error::ModelMismatch(format!("no {tier} codebook listed")))?;
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let cb = load_codebook::<S>(&bytes)?;
        if cb.tier() != tier {
            return Err(Error::ModelMismatch(format!(
                "{} holds a {} codebook, expected {tier}",
                p.display(),
                cb.tier()
            )));
        }
        if index.vocab_sizes.get(&tier).is_some_and(|&k| k != cb.k()) || cb.dim() != index.dim {
            return Err(Error::ModelMismatch(format!(
                "{} has shape {}x{}, index says {:?}x{}",
                p.display(),
                cb.k(),
                cb.dim(),
                index.vocab_sizes.get(&tier),
                index.dim
            )));
        }
        Ok(cb)
    };
    let codebooks = [
        load(Tier::Frame)?,
        load(Tier::Phone)?,
        load(Tier::Word)?,
        load(Tier::Utterance)?,
    ];
    SvcModel::new(codebooks, index.frame_hop, index.standardizer)
}
