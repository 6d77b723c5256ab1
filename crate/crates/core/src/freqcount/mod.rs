//! Corpus word counting and frequency buckets.

mod tokenize;

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;

pub use tokenize::{match_spans, tokenize_line, WORD_PATTERN};

use crate::embed_io::{MatchPolicy, TokenSubset, VocabMap};
use crate::error::{Error, Result};
use crate::hypotheses::FrequencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseMode {
    #[default]
    Sensitive,
    Lowercase,
}

const SHARDS: usize = 64;
/// Distinct words a worker buffers before flushing into the shared shards.
const LOCAL_FLUSH: usize = 1 << 18;

struct ShardedCounts {
    shards: Vec<Mutex<HashMap<String, u64>>>,
}

impl ShardedCounts {
    fn new() -> Self {
        ShardedCounts {
            shards: (0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect(),
        }
    }

    fn shard_of(word: &str) -> usize {
        let mut h = DefaultHasher::new();
        word.hash(&mut h);
        (h.finish() as usize) % SHARDS
    }

    fn flush(&self, local: &mut HashMap<String, u64>) {
        let mut by_shard: Vec<Vec<(String, u64)>> = vec![Vec::new(); SHARDS];
        for (w, c) in local.drain() {
            by_shard[Self::shard_of(&w)].push((w, c));
        }
        for (shard, items) in self.shards.iter().zip(by_shard) {
            if items.is_empty() {
                continue;
            }
            let mut map = shard.lock().expect("count shard poisoned");
            for (w, c) in items {
                *map.entry(w).or_insert(0) += c;
            }
        }
    }

    fn into_counts(self) -> impl Iterator<Item = (String, u64)> {
        self.shards
            .into_iter()
            .flat_map(|m| m.into_inner().expect("count shard poisoned"))
    }
}

/// Counting result with input diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCounts {
    pub table: FrequencyTable,
    pub lines: u64,
    /// Lines skipped because they were not valid UTF-8.
    pub invalid_lines: u64,
}

fn open_text(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let magic = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if magic.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Counts words in one stream, adding into `local` and flushing to `shared`.
fn count_stream(
    mut reader: impl BufRead,
    path: &Path,
    case: CaseMode,
    local: &mut HashMap<String, u64>,
    shared: &ShardedCounts,
) -> Result<(u64, u64)> {
    let (mut lines, mut invalid) = (0u64, 0u64);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        lines += 1;
        let Ok(text) = std::str::from_utf8(&buf) else {
            invalid += 1;
            continue;
        };
        for word in tokenize_line(text) {
            match case {
                CaseMode::Sensitive => {
                    if let Some(c) = local.get_mut(word) {
                        *c += 1;
                    } else {
                        local.insert(word.to_string(), 1);
                    }
                }
                CaseMode::Lowercase => *local.entry(word.to_lowercase()).or_insert(0) += 1,
            }
        }
        if local.len() >= LOCAL_FLUSH {
            shared.flush(local);
        }
    }
    Ok((lines, invalid))
}

/// Counts regex-matched words across files (plain or gzip), one worker per
/// file. Totals do not depend on file order or thread count.
pub fn count_corpus<P: AsRef<Path> + Sync>(paths: &[P], case: CaseMode) -> Result<CorpusCounts> {
    let shared = ShardedCounts::new();
    let stats = paths
        .par_iter()
        .map(|p| {
            let path = p.as_ref();
            let reader = open_text(path)?;
            let mut local = HashMap::new();
            let stats = count_stream(reader, path, case, &mut local, &shared)?;
            shared.flush(&mut local);
            Ok(stats)
        })
        .collect::<Result<Vec<(u64, u64)>>>()?;
    let (lines, invalid_lines) = stats
        .iter()
        .fold((0, 0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    Ok(CorpusCounts {
        table: FrequencyTable::from_counts(shared.into_counts())?,
        lines,
        invalid_lines,
    })
}

/// Counts words from any reader, e.g. standard input.
pub fn count_reader<R: Read>(reader: R, case: CaseMode) -> Result<CorpusCounts> {
    let shared = ShardedCounts::new();
    let mut local = HashMap::new();
    let path = PathBuf::from("<stream>");
    let (lines, invalid_lines) =
        count_stream(BufReader::new(reader), &path, case, &mut local, &shared)?;
    shared.flush(&mut local);
    Ok(CorpusCounts {
        table: FrequencyTable::from_counts(shared.into_counts())?,
        lines,
        invalid_lines,
    })
}

/// Shape of the frequency buckets: the top `words_total` words split into
/// buckets of `bucket_size`, most frequent first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketSpec {
    pub words_total: usize,
    pub bucket_size: usize,
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec {
            words_total: 1000,
            bucket_size: 100,
        }
    }
}

impl BucketSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bucket_size == 0 || self.words_total == 0 || !self.words_total.is_multiple_of(self.bucket_size) {
            return Err(Error::Invalid(format!(
                "words_total ({}) must be a positive multiple of bucket_size ({})",
                self.words_total, self.bucket_size
            )));
        }
        Ok(())
    }

    pub fn buckets(&self) -> usize {
        self.words_total / self.bucket_size
    }
}

/// The `limit` most frequent words that resolve to a vocabulary token, in
/// rank order. Words whose token is already taken by a more frequent word are
/// skipped.
pub fn top_resolvable(
    table: &FrequencyTable,
    vocab: &VocabMap,
    policy: &MatchPolicy,
    limit: usize,
) -> TokenSubset {
    let mut claimed = HashSet::new();
    let mut rows = Vec::with_capacity(limit);
    let mut labels = Vec::with_capacity(limit);
    for (word, _) in table.ranked() {
        if rows.len() == limit {
            break;
        }
        if let Some(id) = vocab.resolve_one(word, policy) {
            if claimed.insert(id) {
                rows.push(id);
                labels.push(word.clone());
            }
        }
    }
    TokenSubset::new(rows, labels).expect("rows deduplicated above")
}

/// Splits the top resolvable words into consecutive rank buckets.
pub fn bucketize(
    table: &FrequencyTable,
    vocab: &VocabMap,
    spec: &BucketSpec,
    policy: &MatchPolicy,
) -> Result<Vec<TokenSubset>> {
    spec.validate()?;
    let top = top_resolvable(table, vocab, policy, spec.words_total);
    if top.len() < spec.words_total {
        return Err(Error::Insufficient(format!(
            "only {} vocabulary-resolvable words, {} needed",
            top.len(),
            spec.words_total
        )));
    }
    (0..spec.buckets())
        .map(|b| {
            let positions: Vec<usize> = (b * spec.bucket_size..(b + 1) * spec.bucket_size).collect();
            top.select(&positions)
        })
        .collect()
}

/// Mean corpus probability of the words in each bucket.
pub fn bucket_shares(table: &FrequencyTable, buckets: &[TokenSubset]) -> Result<Vec<f64>> {
    let total = table.total() as f64;
    if total == 0.0 {
        return Err(Error::Insufficient("empty frequency table".into()));
    }
    buckets
        .iter()
        .map(|b| {
            let sum = b
                .labels()
                .iter()
                .map(|w| table.count(w).ok_or_else(|| Error::Unlabeled(w.clone())))
                .sum::<Result<u64>>()?;
            Ok(sum as f64 / b.len() as f64 / total)
        })
        .collect()
}
