use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "dev" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// One utterance of a corpus. Paths are absolute after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub features: PathBuf,
    pub alignment: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub labels: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Validates that utterance ids are unique.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: "empty utterance id".into(),
                });
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("duplicate utterance id {:?}", e.id),
                });
            }
        }
        Ok(CorpusManifest { entries })
    }

    /// Parse JSON lines. Relative paths resolve against `base_dir`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut entry: ManifestEntry =
                serde_json::from_str(trimmed).map_err(|e| Error::Manifest {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if entry.id.is_empty() {
                return Err(Error::Manifest {
                    line: line_no,
                    message: "empty utterance id".into(),
                });
            }
            if !seen.insert(entry.id.clone()) {
                return Err(Error::Manifest {
                    line: line_no,
                    message: format!("duplicate utterance id {:?}", entry.id),
                });
            }
            entry.features = base_dir.join(&entry.features);
            entry.alignment = base_dir.join(&entry.alignment);
            entries.push(entry);
        }
        Ok(CorpusManifest { entries })
    }

    /// Read a manifest file and check that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let manifest = CorpusManifest::parse(&text, base)?;
        manifest.check_files()?;
        Ok(manifest)
    }

    pub fn check_files(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            for p in [&e.features, &e.alignment] {
                if !p.is_file() {
                    return Err(Error::Manifest {
                        line: i + 1,
                        message: format!("{}: no such file", p.display()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> + '_ {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// JSON lines with paths written relative to `base_dir` where possible.
    pub fn to_jsonl(&self, base_dir: &Path) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let mut e = e.clone();
            for p in [&mut e.features, &mut e.alignment] {
                if let Ok(rel) = p.strip_prefix(base_dir) {
                    *p = rel.to_path_buf();
                }
            }
            out.push_str(&serde_json::to_string(&e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_resolves_paths_and_labels() {
        let text = r#"
{"id": "a", "features": "f/a.fmat", "alignment": "a.json", "split": "train", "labels": {"emotion": "sad"}}
# comment
{"id": "b", "features": "/abs/b.fmat", "alignment": "b.TextGrid", "split": "test"}
"#;
        let m = CorpusManifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[0].features, Path::new("/data/f/a.fmat"));
        assert_eq!(m.entries()[1].features, Path::new("/abs/b.fmat"));
        assert_eq!(m.entries()[0].labels["emotion"], "sad");
        assert!(m.entries()[1].labels.is_empty());
        assert_eq!(m.split(Split::Train).count(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dup = "{\"id\":\"a\",\"features\":\"x\",\"alignment\":\"y\",\"split\":\"train\"}\n\
                   {\"id\":\"a\",\"features\":\"x\",\"alignment\":\"y\",\"split\":\"test\"}\n";
        assert!(matches!(
            CorpusManifest::parse(dup, Path::new(".")),
            Err(Error::Manifest { line: 2, .. })
        ));
        let bad = "\n{\"id\":\"a\",\"split\":\"train\"}";
        assert!(matches!(
            CorpusManifest::parse(bad, Path::new(".")),
            Err(Error::Manifest { line: 2, .. })
        ));
        let split = "{\"id\":\"a\",\"features\":\"x\",\"alignment\":\"y\",\"split\":\"holdout\"}";
        assert!(matches!(
            CorpusManifest::parse(split, Path::new(".")),
            Err(Error::Manifest { line: 1, .. })
        ));
    }

    #[test]
    fn missing_files_rejected() {
        let m = CorpusManifest::parse(
            "{\"id\":\"a\",\"features\":\"nope.fmat\",\"alignment\":\"y\",\"split\":\"train\"}",
            Path::new("/nonexistent-dir"),
        )
        .unwrap();
        assert!(matches!(m.check_files(), Err(Error::Manifest { line: 1, .. })));
    }
}
