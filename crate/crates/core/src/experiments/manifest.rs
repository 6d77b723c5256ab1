use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed_io::{load_matrix, read_npy_header, EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Source of checkpoint matrices, ordered by training step. The last
/// checkpoint is the reference ("final") one.
pub trait CheckpointStore: Sync {
    /// Strictly increasing training steps.
    fn steps(&self) -> &[u64];

    fn load(&self, index: usize, kind: EmbeddingKind) -> Result<EmbeddingMatrix>;

    fn has_kind(&self, index: usize, kind: EmbeddingKind) -> bool;

    fn tokens_per_step(&self) -> Option<u64> {
        None
    }

    /// Stable identity of the stored matrix, used to key RDM caches. Stores
    /// returning `None` are never cached.
    fn source_id(&self, _index: usize, _kind: EmbeddingKind) -> Option<String> {
        None
    }

    fn len(&self) -> usize {
        self.steps().len()
    }

    fn is_empty(&self) -> bool {
        self.steps().is_empty()
    }

    fn final_index(&self) -> usize {
        self.len() - 1
    }

    fn index_of_step(&self, step: u64) -> Option<usize> {
        self.steps().binary_search(&step).ok()
    }
}

fn check_steps(steps: &[u64]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::Invalid("manifest has no checkpoints".into()));
    }
    if let Some(w) = steps.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "checkpoint steps must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub step: u64,
    pub input_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestFile {
    List(Vec<CheckpointEntry>),
    Object {
        #[serde(alias = "entries")]
        checkpoints: Vec<CheckpointEntry>,
        #[serde(default)]
        tokens_per_step: Option<u64>,
    },
}

/// Checkpoints stored as npy files. Relative paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckpointManifest {
    entries: Vec<CheckpointEntry>,
    steps: Vec<u64>,
    tokens_per_step: Option<u64>,
}

/// What `CheckpointManifest::check` found for one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileCheck {
    pub step: u64,
    pub kind: EmbeddingKind,
    pub path: PathBuf,
    pub shape: Vec<usize>,
}

impl CheckpointManifest {
    pub fn new(entries: Vec<CheckpointEntry>, tokens_per_step: Option<u64>) -> Result<Self> {
        let steps: Vec<u64> = entries.iter().map(|e| e.step).collect();
        check_steps(&steps)?;
        if tokens_per_step == Some(0) {
            return Err(Error::Invalid("tokens_per_step must be positive".into()));
        }
        Ok(CheckpointManifest {
            entries,
            steps,
            tokens_per_step,
        })
    }

    /// Reads either a bare JSON list of entries or an object with
    /// `checkpoints` and `tokens_per_step`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let (mut entries, tps) = match serde_json::from_str::<ManifestFile>(text)? {
            ManifestFile::List(e) => (e, None),
            ManifestFile::Object {
                checkpoints,
                tokens_per_step,
            } => (checkpoints, tokens_per_step),
        };
        for e in &mut entries {
            if e.input_path.is_relative() {
                e.input_path = base.join(&e.input_path);
            }
            if let Some(o) = &mut e.output_path {
                if o.is_relative() {
                    *o = base.join(&*o);
                }
            }
        }
        Self::new(entries, tps)
    }

    pub fn entries(&self) -> &[CheckpointEntry] {
        &self.entries
    }

    fn path(&self, index: usize, kind: EmbeddingKind) -> Option<&Path> {
        let e = &self.entries[index];
        match kind {
            EmbeddingKind::Input => Some(&e.input_path),
            EmbeddingKind::Output => e.output_path.as_deref(),
        }
    }

    /// Reads every npy header and checks that all matrices of a kind agree
    /// on shape. Payloads are not read.
    pub fn check(&self, kinds: &[EmbeddingKind]) -> Result<Vec<FileCheck>> {
        let mut out = Vec::new();
        for &kind in kinds {
            let mut first: Option<Vec<usize>> = None;
            for (i, e) in self.entries.iter().enumerate() {
                let path = self.path(i, kind).ok_or_else(|| {
                    Error::Invalid(format!("checkpoint at step {} has no {kind} matrix", e.step))
                })?;
                let file = File::open(path).map_err(|err| Error::io(path, err))?;
                let (_, shape) = read_npy_header(&mut BufReader::new(file))
                    .map_err(|err| Error::Npy(format!("{}: {err}", path.display())))?;
                if shape.len() != 2 {
                    return Err(Error::Shape(format!(
                        "{}: expected a 2-D array, found shape {shape:?}",
                        path.display()
                    )));
                }
                match &first {
                    None => first = Some(shape.clone()),
                    Some(s) if *s != shape => {
                        return Err(Error::Shape(format!(
                            "{}: shape {shape:?} differs from {s:?}",
                            path.display()
                        )))
                    }
                    _ => {}
                }
                out.push(FileCheck {
                    step: e.step,
                    kind,
                    path: path.to_path_buf(),
                    shape,
                });
            }
        }
        Ok(out)
    }
}

impl CheckpointStore for CheckpointManifest {
    fn steps(&self) -> &[u64] {
        &self.steps
    }

    fn load(&self, index: usize, kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
        let path = self.path(index, kind).ok_or_else(|| {
            Error::Invalid(format!(
                "checkpoint at step {} has no {kind} matrix",
                self.steps[index]
            ))
        })?;
        Ok(load_matrix(path, kind)?.with_step(self.steps[index]))
    }

    fn has_kind(&self, index: usize, kind: EmbeddingKind) -> bool {
        self.path(index, kind).is_some()
    }

    fn tokens_per_step(&self) -> Option<u64> {
        self.tokens_per_step
    }

    fn source_id(&self, index: usize, kind: EmbeddingKind) -> Option<String> {
        let path = self.path(index, kind)?;
        let abs = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        Some(abs.to_string_lossy().into_owned())
    }
}

/// Checkpoints held in memory, mainly for synthetic experiments and tests.
#[derive(Debug, Clone)]
pub struct MemoryCheckpoints {
    steps: Vec<u64>,
    inputs: Vec<EmbeddingMatrix>,
    outputs: Option<Vec<EmbeddingMatrix>>,
    tokens_per_step: Option<u64>,
}

impl MemoryCheckpoints {
    pub fn new(steps: Vec<u64>, inputs: Vec<EmbeddingMatrix>) -> Result<Self> {
        check_steps(&steps)?;
        if inputs.len() != steps.len() {
            return Err(Error::Shape(format!(
                "{} matrices for {} steps",
                inputs.len(),
                steps.len()
            )));
        }
        Ok(MemoryCheckpoints {
            steps,
            inputs,
            outputs: None,
            tokens_per_step: None,
        })
    }

    pub fn with_outputs(mut self, outputs: Vec<EmbeddingMatrix>) -> Result<Self> {
        if outputs.len() != self.steps.len() {
            return Err(Error::Shape(format!(
                "{} output matrices for {} steps",
                outputs.len(),
                self.steps.len()
            )));
        }
        self.outputs = Some(outputs);
        Ok(self)
    }

    pub fn with_tokens_per_step(mut self, tokens_per_step: u64) -> Self {
        self.tokens_per_step = Some(tokens_per_step);
        self
    }
}

impl CheckpointStore for MemoryCheckpoints {
    fn steps(&self) -> &[u64] {
        &self.steps
    }

    fn load(&self, index: usize, kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
        let m = match kind {
            EmbeddingKind::Input => &self.inputs[index],
            EmbeddingKind::Output => self.outputs.as_ref().map(|o| &o[index]).ok_or_else(|| {
                Error::Invalid(format!(
                    "checkpoint at step {} has no output matrix",
                    self.steps[index]
                ))
            })?,
        };
        Ok(m.clone().with_step(self.steps[index]))
    }

    fn has_kind(&self, _index: usize, kind: EmbeddingKind) -> bool {
        kind == EmbeddingKind::Input || self.outputs.is_some()
    }

    fn tokens_per_step(&self) -> Option<u64> {
        self.tokens_per_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_layouts_and_resolves_relative_paths() {
        let base = Path::new("/data/run");
        let list = r#"[{"step": 0, "input_path": "in0.npy"},
                       {"step": 10, "input_path": "/abs/in10.npy", "output_path": "out10.npy"}]"#;
        let m = CheckpointManifest::parse(list, base).unwrap();
        assert_eq!(m.steps(), &[0, 10]);
        assert_eq!(m.entries()[0].input_path, Path::new("/data/run/in0.npy"));
        assert_eq!(m.entries()[1].input_path, Path::new("/abs/in10.npy"));
        assert!(!m.has_kind(0, EmbeddingKind::Output));
        assert!(m.has_kind(1, EmbeddingKind::Output));
        assert_eq!(m.tokens_per_step(), None);

        let obj = r#"{"tokens_per_step": 2097152,
                      "checkpoints": [{"step": 1, "input_path": "a.npy"}]}"#;
        let m = CheckpointManifest::parse(obj, base).unwrap();
        assert_eq!(m.tokens_per_step(), Some(2_097_152));
    }

    #[test]
    fn steps_must_increase() {
        let text = r#"[{"step": 5, "input_path": "a"}, {"step": 5, "input_path": "b"}]"#;
        assert!(CheckpointManifest::parse(text, Path::new("")).is_err());
        assert!(CheckpointManifest::parse("[]", Path::new("")).is_err());
    }

    #[test]
    fn check_reads_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = EmbeddingMatrix::from_f32(3, 2, vec![1.0; 6], EmbeddingKind::Input).unwrap();
        crate::embed_io::save_matrix(dir.path().join("a.npy"), &m).unwrap();
        let text = r#"[{"step": 0, "input_path": "a.npy"}, {"step": 1, "input_path": "missing.npy"}]"#;
        let man = CheckpointManifest::parse(text, dir.path()).unwrap();
        assert!(man.check(&[EmbeddingKind::Input]).is_err());
        let text = r#"[{"step": 0, "input_path": "a.npy"}]"#;
        let man = CheckpointManifest::parse(text, dir.path()).unwrap();
        let found = man.check(&[EmbeddingKind::Input]).unwrap();
        assert_eq!(found[0].shape, vec![3, 2]);
        assert!(man.check(&[EmbeddingKind::Output]).is_err());
    }
}
