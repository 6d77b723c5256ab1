use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token_id: u32,
    pub surface: String,
    pub is_word_start: bool,
}

#[derive(Debug, Default, Clone)]
struct SurfaceIndex {
    exact: HashMap<String, u32>,
    folded: HashMap<String, u32>,
}

impl SurfaceIndex {
    fn insert(&mut self, surface: &str, id: u32) {
        self.exact.entry(surface.to_string()).or_insert(id);
        self.folded.entry(surface.to_lowercase()).or_insert(id);
    }
}

/// Token id to decoded surface table. Ids are exactly `0..len`.
#[derive(Debug, Clone)]
pub struct VocabMap {
    entries: Vec<VocabEntry>,
    all: SurfaceIndex,
    word_starts: SurfaceIndex,
}

impl VocabMap {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Self> {
        let mut all = SurfaceIndex::default();
        let mut word_starts = SurfaceIndex::default();
        for (i, e) in entries.iter().enumerate() {
            if e.token_id as usize != i {
                return Err(Error::Invalid(format!(
                    "vocab entry {i} has token id {}; ids must be 0..size-1 in order",
                    e.token_id
                )));
            }
            all.insert(&e.surface, e.token_id);
            if e.is_word_start {
                word_starts.insert(&e.surface, e.token_id);
            }
        }
        if entries.is_empty() {
            return Err(Error::Invalid("empty vocabulary".into()));
        }
        Ok(VocabMap {
            entries,
            all,
            word_starts,
        })
    }

    /// Reads the `token_id<TAB>surface<TAB>is_word_start` table.
    ///
    /// Decoded surfaces may themselves contain tabs or newlines (BPE vocabularies
    /// have tokens for both), so records are delimited by the trailing flag field
    /// followed by the next sequential id rather than by splitting lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bytes = text.as_bytes();
        let line_of = |pos: usize| 1 + bytes[..pos].iter().filter(|&&b| b == b'\n').count();
        let mut entries = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let id = entries.len() as u32;
            let prefix = format!("{id}\t");
            if !text[pos..].starts_with(&prefix) {
                return Err(Error::parse(
                    path,
                    line_of(pos),
                    format!("expected record for token id {id}"),
                ));
            }
            let start = pos + prefix.len();
            let next_prefix = format!("{}\t", id + 1);
            let mut found = None;
            for (off, _) in text[start..].match_indices('\t') {
                let t = start + off;
                let flag = match bytes.get(t + 1) {
                    Some(b'0') => false,
                    Some(b'1') => true,
                    _ => continue,
                };
                let after = t + 2;
                let rest = &text[after..];
                let end = if rest.is_empty() {
                    Some(after)
                } else if let Some(r) = rest.strip_prefix("\r\n").or_else(|| rest.strip_prefix('\n'))
                {
                    (r.is_empty() || r.starts_with(&next_prefix)).then(|| text.len() - r.len())
                } else {
                    None
                };
                if let Some(end) = end {
                    found = Some((t, flag, end));
                    break;
                }
            }
            let (t, flag, end) = found.ok_or_else(|| {
                Error::parse(
                    path,
                    line_of(pos),
                    format!("record for token id {id} lacks a 0|1 word-start field"),
                )
            })?;
            entries.push(VocabEntry {
                token_id: id,
                surface: text[start..t].to_string(),
                is_word_start: flag,
            });
            pos = end;
        }
        Self::from_entries(entries)
    }

    /// Writes the table in the format read by [`VocabMap::load`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for e in &self.entries {
            text.push_str(&format!("{}\t{}\t{}\n", e.token_id, e.surface, u8::from(e.is_word_start)));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|e| e.surface.as_str())
    }

    /// All word-start tokens, labelled by their surface without the leading space.
    pub fn word_start_subset(&self) -> TokenSubset {
        let (rows, labels) = self
            .entries
            .iter()
            .filter(|e| e.is_word_start)
            .map(|e| (e.token_id, e.surface.trim_start_matches(' ').to_string()))
            .unzip();
        TokenSubset { rows, labels }
    }

    /// Every token, labelled by its raw surface.
    pub fn all_tokens_subset(&self) -> TokenSubset {
        let (rows, labels) = self
            .entries
            .iter()
            .map(|e| (e.token_id, e.surface.clone()))
            .unzip();
        TokenSubset { rows, labels }
    }

    /// Token row for a single word under `policy`.
    pub fn resolve_one(&self, word: &str, policy: &MatchPolicy) -> Option<u32> {
        let index = if policy.require_word_start {
            &self.word_starts
        } else {
            &self.all
        };
        let spaced = format!(" {word}");
        let candidates = match policy.order {
            SurfaceOrder::ExactFirst => [word, spaced.as_str()],
            SurfaceOrder::LeadingSpaceFirst => [spaced.as_str(), word],
        };
        if let Some(id) = candidates.iter().find_map(|c| index.exact.get(*c)) {
            return Some(*id);
        }
        if policy.case_insensitive_fallback {
            return candidates
                .iter()
                .find_map(|c| index.folded.get(&c.to_lowercase()))
                .copied();
        }
        None
    }
}

/// Which surface form is tried first when matching a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurfaceOrder {
    #[default]
    ExactFirst,
    LeadingSpaceFirst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPolicy {
    pub order: SurfaceOrder,
    /// Only consider tokens flagged as word starts.
    pub require_word_start: bool,
    pub case_insensitive_fallback: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            order: SurfaceOrder::ExactFirst,
            require_word_start: true,
            case_insensitive_fallback: false,
        }
    }
}

impl MatchPolicy {
    pub fn leading_space() -> Self {
        MatchPolicy {
            order: SurfaceOrder::LeadingSpaceFirst,
            require_word_start: false,
            case_insensitive_fallback: false,
        }
    }
}

/// An ordered set of distinct token rows with their canonical words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSubset {
    rows: Vec<u32>,
    labels: Vec<String>,
}

impl TokenSubset {
    pub fn new(rows: Vec<u32>, labels: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut seen = HashSet::with_capacity(rows.len());
        if let Some(dup) = rows.iter().find(|r| !seen.insert(**r)) {
            return Err(Error::Invalid(format!("token row {dup} appears twice")));
        }
        Ok(TokenSubset { rows, labels })
    }

    /// Subset labelled by the decimal row ids.
    pub fn from_rows(rows: Vec<u32>) -> Result<Self> {
        let labels = rows.iter().map(|r| r.to_string()).collect();
        Self::new(rows, labels)
    }

    /// Rows `0..n`.
    pub fn range(n: usize) -> Self {
        Self::from_rows((0..n as u32).collect()).expect("distinct by construction")
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The subset at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let mut rows = Vec::with_capacity(positions.len());
        let mut labels = Vec::with_capacity(positions.len());
        for &p in positions {
            if p >= self.len() {
                return Err(Error::Invalid(format!(
                    "position {p} out of range for subset of {}",
                    self.len()
                )));
            }
            rows.push(self.rows[p]);
            labels.push(self.labels[p].clone());
        }
        Self::new(rows, labels)
    }
}

/// Outcome of resolving annotation words against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Resolution {
    pub subset: TokenSubset,
    /// Position of each resolved word in the input list, parallel to `subset`.
    pub word_positions: Vec<usize>,
    pub unresolved: Vec<String>,
    /// Words whose token was already claimed by an earlier word.
    pub collisions: Vec<(String, u32)>,
}

/// Maps each word to at most one token row, keeping input order.
pub fn resolve_words(vocab: &VocabMap, words: &[String], policy: &MatchPolicy) -> Result<Resolution> {
    let mut seen_words = HashSet::with_capacity(words.len());
    for w in words {
        if !seen_words.insert(w.as_str()) {
            return Err(Error::DuplicateWord(w.clone()));
        }
    }
    let mut out = Resolution::default();
    let mut claimed = HashSet::new();
    for (pos, w) in words.iter().enumerate() {
        match vocab.resolve_one(w, policy) {
            Some(id) if claimed.insert(id) => {
                out.subset.rows.push(id);
                out.subset.labels.push(w.clone());
                out.word_positions.push(pos);
            }
            Some(id) => out.collisions.push((w.clone(), id)),
            None => out.unresolved.push(w.clone()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> VocabMap {
        let text = "0\tthe\t0\n1\t the\t1\n2\t cat\t1\n3\t\t\t0\n4\t\n\t0\n5\t The\t1\n6\tdog\t0\n";
        VocabMap::parse(text, Path::new("mem")).unwrap()
    }

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_surfaces_with_tabs_and_newlines() {
        let v = vocab();
        assert_eq!(v.len(), 7);
        assert_eq!(v.surface(3), Some("\t"));
        assert_eq!(v.surface(4), Some("\n"));
        assert!(v.entries()[1].is_word_start);
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        let v = vocab();
        v.save(&p).unwrap();
        assert_eq!(VocabMap::load(&p).unwrap().entries(), v.entries());
    }

    #[test]
    fn out_of_order_ids_are_rejected() {
        assert!(VocabMap::parse("1\ta\t0\n", Path::new("mem")).is_err());
        assert!(VocabMap::parse("0\ta\n", Path::new("mem")).is_err());
    }

    #[test]
    fn leading_space_policy_finds_spaced_variant() {
        let r = resolve_words(&vocab(), &words(&["the"]), &MatchPolicy::leading_space()).unwrap();
        assert_eq!(r.subset.rows(), &[1]);
        assert_eq!(r.subset.labels(), &["the".to_string()]);
    }

    #[test]
    fn default_policy_skips_continuation_tokens() {
        let r = resolve_words(&vocab(), &words(&["the", "dog"]), &MatchPolicy::default()).unwrap();
        assert_eq!(r.subset.rows(), &[1]);
        assert_eq!(r.unresolved, words(&["dog"]));
        let any = MatchPolicy {
            require_word_start: false,
            ..MatchPolicy::default()
        };
        let r = resolve_words(&vocab(), &words(&["the"]), &any).unwrap();
        assert_eq!(r.subset.rows(), &[0]);
    }

    #[test]
    fn absent_word_is_reported() {
        let r = resolve_words(&vocab(), &words(&["zzqqxx"]), &MatchPolicy::default()).unwrap();
        assert!(r.subset.is_empty());
        assert_eq!(r.unresolved, words(&["zzqqxx"]));
    }

    #[test]
    fn duplicate_word_is_an_error() {
        assert!(matches!(
            resolve_words(&vocab(), &words(&["cat", "cat"]), &MatchPolicy::default()),
            Err(Error::DuplicateWord(_))
        ));
    }

    #[test]
    fn case_fallback_and_collisions() {
        let policy = MatchPolicy {
            case_insensitive_fallback: true,
            ..MatchPolicy::default()
        };
        let r = resolve_words(&vocab(), &words(&["CAT", "The", "THE", "the"]), &policy).unwrap();
        assert_eq!(r.subset.rows(), &[2, 5, 1]);
        assert_eq!(r.collisions, vec![("the".to_string(), 1)]);
        assert_eq!(r.word_positions, vec![0, 1, 2]);
    }

    #[test]
    fn resolution_is_order_independent() {
        let v = vocab();
        let a = resolve_words(&v, &words(&["cat", "the", "nope"]), &MatchPolicy::default()).unwrap();
        let b = resolve_words(&v, &words(&["nope", "the", "cat"]), &MatchPolicy::default()).unwrap();
        let mut pa: Vec<_> = a.subset.rows().iter().zip(a.subset.labels()).collect();
        let mut pb: Vec<_> = b.subset.rows().iter().zip(b.subset.labels()).collect();
        pa.sort();
        pb.sort();
        assert_eq!(pa, pb);
        assert_eq!(a.unresolved, b.unresolved);
    }

    #[test]
    fn subset_rejects_duplicate_rows() {
        assert!(TokenSubset::from_rows(vec![1, 2, 1]).is_err());
    }
}
