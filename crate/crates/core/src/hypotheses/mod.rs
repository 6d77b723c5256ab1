//! Hypothesis RDMs and sparse pair targets built from annotation files.

mod conllu;
mod frequency;
mod pairs;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

pub use conllu::{upos_counts_from_conllu, UposCounts};
pub use frequency::{frequency_rdm, FrequencyMode, FrequencyTable};
pub use pairs::{
    load_pair_dataset, pair_target_from_embeddings, PairDataset, PairFormat, ScoreKind, WordPair,
    WordVectors,
};

use crate::error::{Error, Result};
use crate::rdm::{pair_count, pair_index, select_condensed};

/// Values a hypothesis RDM is allowed to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueDomain {
    /// `{0, 1}`
    Binary,
    /// `{0, 0.25, 0.5, 1}`
    Graded,
    /// Any finite value `>= 0`.
    NonNegative,
}

impl ValueDomain {
    pub fn admits(self, v: f64) -> bool {
        match self {
            ValueDomain::Binary => v == 0.0 || v == 1.0,
            ValueDomain::Graded => [0.0, 0.25, 0.5, 1.0].contains(&v),
            ValueDomain::NonNegative => v.is_finite() && v >= 0.0,
        }
    }
}

/// A dissimilarity hypothesis over an ordered list of words, in condensed form.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRdm {
    words: Vec<String>,
    values: Vec<f64>,
    domain: ValueDomain,
    provenance: String,
}

impl HypothesisRdm {
    pub fn new(
        words: Vec<String>,
        values: Vec<f64>,
        domain: ValueDomain,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != pair_count(words.len()) {
            return Err(Error::Shape(format!(
                "{} values for {} words",
                values.len(),
                words.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !domain.admits(**v)) {
            return Err(Error::Invalid(format!(
                "value {v} is outside the {domain:?} domain"
            )));
        }
        Ok(HypothesisRdm {
            words,
            values,
            domain,
            provenance: provenance.into(),
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> ValueDomain {
        self.domain
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            self.values[pair_index(a, b)]
        }
    }

    /// The hypothesis restricted to the words at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let values = select_condensed(&self.values, self.len(), positions)?;
        Ok(HypothesisRdm {
            words: positions.iter().map(|&p| self.words[p].clone()).collect(),
            values,
            domain: self.domain,
            provenance: self.provenance.clone(),
        })
    }
}

/// Word to class-label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    /// Sorted label ids per word, parallel to `words`.
    labels: Vec<Vec<u32>>,
    label_names: Vec<String>,
    min_count_applied: u32,
}

impl GroupingTable {
    /// Builds a table from `(word, labels)` rows; repeated words have their
    /// labels merged.
    pub fn from_assignments<I, L>(rows: I, min_count_applied: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (String, L)>,
        L: IntoIterator<Item = String>,
    {
        let mut label_names: Vec<String> = Vec::new();
        let mut label_ids: HashMap<String, u32> = HashMap::new();
        let mut table = GroupingTable {
            words: Vec::new(),
            index: HashMap::new(),
            labels: Vec::new(),
            label_names: Vec::new(),
            min_count_applied,
        };
        for (word, labels) in rows {
            let pos = *table.index.entry(word.clone()).or_insert_with(|| {
                table.words.push(word.clone());
                table.labels.push(Vec::new());
                table.words.len() - 1
            });
            for label in labels {
                let id = *label_ids.entry(label.clone()).or_insert_with(|| {
                    label_names.push(label);
                    (label_names.len() - 1) as u32
                });
                table.labels[pos].push(id);
            }
        }
        for (w, l) in table.words.iter().zip(table.labels.iter_mut()) {
            if l.is_empty() {
                return Err(Error::Unlabeled(w.clone()));
            }
            l.sort_unstable();
            l.dedup();
        }
        table.label_names = label_names;
        Ok(table)
    }

    /// Reads `word<TAB>label1,label2,...` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, labels) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>labels"))?;
            let labels: Vec<String> = labels
                .split(',')
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            if word.is_empty() || labels.is_empty() {
                return Err(Error::parse(path, i + 1, "empty word or label list"));
            }
            rows.push((word.to_string(), labels));
        }
        Self::from_assignments(rows, 0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count_applied(&self) -> u32 {
        self.min_count_applied
    }

    /// Declared label set, sorted.
    pub fn label_set(&self) -> BTreeSet<&str> {
        self.label_names.iter().map(String::as_str).collect()
    }

    pub fn labels_of(&self, word: &str) -> Option<BTreeSet<&str>> {
        self.index.get(word).map(|&p| {
            self.labels[p]
                .iter()
                .map(|&id| self.label_names[id as usize].as_str())
                .collect()
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Words carrying `label`, in table order.
    pub fn words_with_label(&self, label: &str) -> Vec<String> {
        let Some(id) = self.label_names.iter().position(|l| l == label) else {
            return Vec::new();
        };
        self.words
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.binary_search(&(id as u32)).is_ok())
            .map(|(w, _)| w.clone())
            .collect()
    }

    /// Number of words per label, keyed by label name in sorted order.
    pub fn class_sizes(&self) -> Vec<(String, usize)> {
        let mut sizes = vec![0usize; self.label_names.len()];
        for l in &self.labels {
            for &id in l {
                sizes[id as usize] += 1;
            }
        }
        let mut out: Vec<(String, usize)> = self.label_names.iter().cloned().zip(sizes).collect();
        out.sort();
        out
    }

    fn label_ids(&self, words: &[String]) -> Result<Vec<&[u32]>> {
        words
            .iter()
            .map(|w| {
                self.index
                    .get(w)
                    .map(|&p| self.labels[p].as_slice())
                    .ok_or_else(|| Error::Unlabeled(w.clone()))
            })
            .collect()
    }
}

fn sorted_intersect(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Binary RDM: 0 when two words share any label, 1 otherwise.
pub fn grouping_rdm(table: &GroupingTable, words: &[String]) -> Result<HypothesisRdm> {
    let labels = table.label_ids(words)?;
    let mut values = Vec::with_capacity(pair_count(words.len()));
    for i in 1..words.len() {
        for j in 0..i {
            values.push(if sorted_intersect(labels[i], labels[j]) { 0.0 } else { 1.0 });
        }
    }
    HypothesisRdm::new(words.to_vec(), values, ValueDomain::Binary, "grouping")
}

/// Graded RDM over two annotation sources: 0 when words share both a part of
/// speech and a tag, 0.25 for part of speech only, 0.5 for tag only, else 1.
pub fn graded_combined_rdm(
    pos: &GroupingTable,
    tags: &GroupingTable,
    words: &[String],
) -> Result<HypothesisRdm> {
    let p = pos.label_ids(words)?;
    let t = tags.label_ids(words)?;
    let mut values = Vec::with_capacity(pair_count(words.len()));
    for i in 1..words.len() {
        for j in 0..i {
            let v = match (sorted_intersect(p[i], p[j]), sorted_intersect(t[i], t[j])) {
                (true, true) => 0.0,
                (true, false) => 0.25,
                (false, true) => 0.5,
                (false, false) => 1.0,
            };
            values.push(v);
        }
    }
    HypothesisRdm::new(words.to_vec(), values, ValueDomain::Graded, "pos+tags")
}

/// A grouping with the template's class-size profile whose members are drawn
/// from `candidates` without replacement.
///
/// Classes are filled in sorted label order from a SplitMix64-seeded shuffle
/// of the candidates; each sampled word receives exactly one class.
pub fn random_baseline_table(
    template: &GroupingTable,
    candidates: &[String],
    seed: u64,
) -> Result<GroupingTable> {
    let sizes = template.class_sizes();
    let slots: usize = sizes.iter().map(|(_, s)| s).sum();
    let mut pool: Vec<String> = candidates.to_vec();
    pool.sort();
    pool.dedup();
    if pool.len() < slots {
        return Err(Error::Insufficient(format!(
            "random baseline needs {slots} distinct candidates, got {}",
            pool.len()
        )));
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut rows = Vec::with_capacity(slots);
    let mut next = pool.into_iter();
    for (label, size) in sizes {
        for word in next.by_ref().take(size) {
            rows.push((word, vec![label.clone()]));
        }
    }
    GroupingTable::from_assignments(rows, template.min_count_applied)
}

pub fn random_baseline_rdm(
    template: &GroupingTable,
    candidates: &[String],
    seed: u64,
) -> Result<HypothesisRdm> {
    let table = random_baseline_table(template, candidates, seed)?;
    let mut rdm = grouping_rdm(&table, table.words())?;
    rdm.provenance = format!("random_baseline(seed={seed})");
    Ok(rdm)
}

/// `k` of `n` positions drawn without replacement from a SplitMix64 stream,
/// in increasing order. All positions when `k >= n`.
pub fn subsample_positions(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// `k` words drawn as by [`subsample_positions`], in their original relative
/// order.
pub fn subsample_words(words: &[String], k: usize, seed: u64) -> Vec<String> {
    subsample_positions(words.len(), k, seed)
        .into_iter()
        .map(|i| words[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn table(rows: &[(&str, &[&str])]) -> GroupingTable {
        GroupingTable::from_assignments(
            rows.iter().map(|(w, ls)| (w.to_string(), s(ls))),
            0,
        )
        .unwrap()
    }

    #[test]
    fn grouping_examples() {
        let t = table(&[("cat", &["NOUN"]), ("dog", &["NOUN"]), ("run", &["VERB"])]);
        let r = grouping_rdm(&t, &s(&["cat", "dog", "run"])).unwrap();
        assert_eq!(r.get(0, 1), 0.0);
        assert_eq!(r.get(0, 2), 1.0);
        assert_eq!(r.get(2, 1), 1.0);
        assert!(matches!(
            grouping_rdm(&t, &s(&["cat", "zebra"])),
            Err(Error::Unlabeled(_))
        ));
    }

    #[test]
    fn multi_label_words_intersect() {
        let t = table(&[("run", &["VERB", "NOUN"]), ("cat", &["NOUN"]), ("eat", &["VERB"])]);
        let r = grouping_rdm(&t, &s(&["run", "cat", "eat"])).unwrap();
        assert_eq!(r.values(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn graded_scheme() {
        let pos = table(&[("a", &["N"]), ("b", &["N"]), ("c", &["V"]), ("d", &["N"]), ("e", &["A"])]);
        let tags = table(&[("a", &["x"]), ("b", &["x"]), ("c", &["x"]), ("d", &["y"]), ("e", &["z"])]);
        let r = graded_combined_rdm(&pos, &tags, &s(&["a", "b", "c", "d", "e"])).unwrap();
        assert_eq!(r.get(0, 1), 0.0);
        assert_eq!(r.get(0, 3), 0.25);
        assert_eq!(r.get(0, 2), 0.5);
        assert_eq!(r.get(0, 4), 1.0);
    }

    #[test]
    fn random_baseline_keeps_profile_and_seed() {
        let template = table(&[("x1", &["A"]), ("x2", &["A"]), ("y1", &["B"]), ("y2", &["B"])]);
        let cands = s(&["w1", "w2", "w3", "w4"]);
        let t = random_baseline_table(&template, &cands, 7).unwrap();
        assert_eq!(t.class_sizes(), vec![("A".into(), 2), ("B".into(), 2)]);
        let mut members = t.words().to_vec();
        members.sort();
        assert_eq!(members, cands);
        assert_eq!(
            random_baseline_rdm(&template, &cands, 7).unwrap(),
            random_baseline_rdm(&template, &cands, 7).unwrap()
        );
        assert!(random_baseline_table(&template, &cands[..3], 7).is_err());
    }

    #[test]
    fn domain_is_enforced() {
        assert!(HypothesisRdm::new(s(&["a", "b"]), vec![0.3], ValueDomain::Binary, "t").is_err());
        assert!(HypothesisRdm::new(s(&["a", "b"]), vec![-1.0], ValueDomain::NonNegative, "t").is_err());
        assert!(HypothesisRdm::new(s(&["a", "b", "c"]), vec![0.0], ValueDomain::Binary, "t").is_err());
    }

    #[test]
    fn subsample_is_deterministic() {
        let words: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let a = subsample_words(&words, 30, 1);
        assert_eq!(a.len(), 30);
        assert_eq!(a, subsample_words(&words, 30, 1));
        assert_ne!(a, subsample_words(&words, 30, 2));
    }
}
