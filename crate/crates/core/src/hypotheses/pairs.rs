use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{vector_dissimilarity, Metric};

/// Whether pair scores grow with similarity or with distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Similarity,
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordPair {
    pub a: String,
    pub b: String,
    pub score: f64,
}

/// Sparse word-pair annotations such as similarity ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub name: String,
    pub pairs: Vec<WordPair>,
    pub score_kind: ScoreKind,
}

impl PairDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<WordPair>, score_kind: ScoreKind) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !p.score.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite score for ({:?}, {:?})",
                    p.a, p.b
                )));
            }
            let key = if p.a <= p.b {
                (p.a.as_str(), p.b.as_str())
            } else {
                (p.b.as_str(), p.a.as_str())
            };
            if !seen.insert(key) {
                return Err(Error::DuplicatePair(p.a.clone(), p.b.clone()));
            }
        }
        Ok(PairDataset {
            name: name.into(),
            pairs,
            score_kind,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps pairs for which `keep(a, b)` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, &str) -> bool) {
        self.pairs.retain(|p| keep(&p.a, &p.b));
    }

    /// Distinct words in first-appearance order.
    pub fn words(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for p in &self.pairs {
            for w in [&p.a, &p.b] {
                if seen.insert(w.as_str()) {
                    out.push(w.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFormat {
    Tsv,
    Csv,
}

/// Reads `word_a, word_b, score` rows. A first row whose score field is not
/// numeric is taken as a header.
pub fn load_pair_dataset(path: impl AsRef<Path>, format: PairFormat) -> Result<PairDataset> {
    let path = path.as_ref();
    let delimiter = match format {
        PairFormat::Tsv => b'\t',
        PairFormat::Csv => b',',
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .quoting(format == PairFormat::Csv)
        .from_reader(file);
    let mut pairs = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let score = record[2].parse::<f64>();
        if std::mem::take(&mut first) && score.is_err() {
            continue;
        }
        let score = score
            .map_err(|_| Error::parse(path, line, format!("bad score {:?}", &record[2])))?;
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::parse(path, line, "empty word"));
        }
        pairs.push(WordPair {
            a: record[0].to_string(),
            b: record[1].to_string(),
            score,
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PairDataset::new(name, pairs, ScoreKind::Similarity)
}

/// External word vectors in the whitespace-separated text format.
#[derive(Debug, Clone)]
pub struct WordVectors {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl WordVectors {
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut out = WordVectors {
            dim,
            index: HashMap::with_capacity(rows.len()),
            data: Vec::with_capacity(rows.len() * dim),
        };
        for (word, v) in rows {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for {word:?} has {} dims, expected {dim}",
                    v.len()
                )));
            }
            if out.index.contains_key(&word) {
                continue;
            }
            out.index.insert(word, out.data.len() / dim.max(1));
            out.data.extend(v);
        }
        Ok(out)
    }

    /// Reads `word v1 ... vd` lines. A leading `count dim` line is skipped;
    /// repeated words keep their first vector.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if i == 0 && rest.len() == 1 && word.parse::<u64>().is_ok() && rest[0].parse::<u64>().is_ok() {
                continue;
            }
            let v: Vec<f64> = rest
                .iter()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, i + 1, "non-numeric vector component"))?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(path, i + 1, "empty or non-finite vector"));
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected {d} components, found {}", v.len()),
                    ))
                }
                _ => {}
            }
            rows.push((word.to_string(), v));
        }
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }
}

/// Replaces each pair's score with the dissimilarity of the words' external
/// vectors; the result is distance-valued.
pub fn pair_target_from_embeddings(
    table: &WordVectors,
    pairs: &PairDataset,
    metric: Metric,
) -> Result<PairDataset> {
    let lookup = |w: &str| {
        table
            .get(w)
            .ok_or_else(|| Error::Invalid(format!("word {w:?} missing from the vector table")))
    };
    let scored = pairs
        .pairs
        .iter()
        .map(|p| {
            Ok(WordPair {
                a: p.a.clone(),
                b: p.b.clone(),
                score: vector_dissimilarity(lookup(&p.a)?, lookup(&p.b)?, metric)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PairDataset::new(format!("{}:vectors", pairs.name), scored, ScoreKind::Distance)
}
