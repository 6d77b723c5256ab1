use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{HypothesisRdm, ValueDomain};
use crate::error::{Error, Result};
use crate::rdm::pair_count;

/// Word counts with 1-based ranks (1 = most frequent). Ties in count are
/// ranked lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyTable {
    ranked: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl FrequencyTable {
    pub fn from_counts<I: IntoIterator<Item = (String, u64)>>(counts: I) -> Result<Self> {
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut index = HashMap::with_capacity(ranked.len());
        for (i, (w, _)) in ranked.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        Ok(FrequencyTable { ranked, index })
    }

    /// Reads `word<TAB>count` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>count"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad count {count:?}")))?;
            rows.push((word.to_string(), count));
        }
        Self::from_counts(rows)
    }

    /// Writes rows in rank order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, count) in &self.ranked {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_tsv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// `(word, count)` in rank order.
    pub fn ranked(&self) -> &[(String, u64)] {
        &self.ranked
    }

    pub fn rank(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| i as u64 + 1)
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.ranked[i].1)
    }

    pub fn total(&self) -> u64 {
        self.ranked.iter().map(|(_, c)| c).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyMode {
    Rank,
    Count,
}

/// `|rank_a - rank_b|` or `|count_a - count_b|` for every pair of `words`.
pub fn frequency_rdm(
    table: &FrequencyTable,
    words: &[String],
    mode: FrequencyMode,
) -> Result<HypothesisRdm> {
    let keys: Vec<u64> = words
        .iter()
        .map(|w| {
            match mode {
                FrequencyMode::Rank => table.rank(w),
                FrequencyMode::Count => table.count(w),
            }
            .ok_or_else(|| Error::Unlabeled(w.clone()))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(pair_count(words.len()));
    for i in 1..keys.len() {
        for j in 0..i {
            values.push(keys[i].abs_diff(keys[j]) as f64);
        }
    }
    let provenance = match mode {
        FrequencyMode::Rank => "frequency_rank",
        FrequencyMode::Count => "frequency_count",
    };
    HypothesisRdm::new(words.to_vec(), values, ValueDomain::NonNegative, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> FrequencyTable {
        FrequencyTable::from_counts(
            [("the", 900), ("of", 500), ("and", 500), ("cat", 3)]
                .iter()
                .map(|(w, c)| (w.to_string(), *c)),
        )
        .unwrap()
    }

    #[test]
    fn ranks_break_ties_lexically() {
        let t = t();
        assert_eq!(t.rank("the"), Some(1));
        assert_eq!(t.rank("and"), Some(2));
        assert_eq!(t.rank("of"), Some(3));
        assert_eq!(t.total(), 1903);
    }

    #[test]
    fn rank_and_count_distances() {
        let t = t();
        let words: Vec<String> = ["the", "of", "and"].iter().map(|s| s.to_string()).collect();
        let r = frequency_rdm(&t, &words, FrequencyMode::Rank).unwrap();
        assert_eq!(r.get(0, 1), 2.0);
        let c = frequency_rdm(&t, &words, FrequencyMode::Count).unwrap();
        assert_eq!(c.get(1, 2), 0.0);
        assert_eq!(c.get(0, 2), 400.0);
        assert!(frequency_rdm(&t, &["dog".to_string()], FrequencyMode::Rank).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        t().save(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "the\t900\nand\t500\nof\t500\ncat\t3\n");
        assert_eq!(FrequencyTable::load(&p).unwrap(), t());
    }

    #[test]
    fn duplicate_words_rejected() {
        assert!(FrequencyTable::from_counts(vec![("a".into(), 1), ("a".into(), 2)]).is_err());
    }
}
