use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::GroupingTable;
use crate::error::{Error, Result};

/// Occurrence counts of `(form, UPOS)` over syntactic word lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UposCounts {
    pub counts: BTreeMap<(String, String), u64>,
}

impl UposCounts {
    /// Accumulates one CoNLL-U stream. Comment lines, multiword-token ranges
    /// (`3-4`), empty nodes (`5.1`) and unannotated UPOS (`_`) are skipped.
    pub fn add_reader<R: BufRead>(&mut self, reader: R, path: &Path) -> Result<()> {
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 10 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 10 tab-separated columns, found {}", cols.len()),
                ));
            }
            let id = cols[0];
            if id.contains('-') || id.contains('.') {
                continue;
            }
            if id.parse::<u32>().is_err() {
                return Err(Error::parse(path, i + 1, format!("bad token id {id:?}")));
            }
            let (form, upos) = (cols[1], cols[3]);
            if upos == "_" || form.is_empty() {
                continue;
            }
            *self
                .counts
                .entry((form.to_string(), upos.to_string()))
                .or_insert(0) += 1;
        }
        Ok(())
    }

    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.add_reader(std::io::BufReader::new(file), path)
    }

    /// Keeps labels seen at least `min_count` times; words left without a
    /// label are dropped.
    pub fn into_grouping(self, min_count: u32) -> Result<GroupingTable> {
        let mut by_word: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for ((form, upos), n) in self.counts {
            if n >= u64::from(min_count) {
                by_word.entry(form).or_default().push(upos);
            }
        }
        GroupingTable::from_assignments(by_word, min_count)
    }
}

pub fn upos_counts_from_conllu<P: AsRef<Path>>(paths: &[P], min_count: u32) -> Result<GroupingTable> {
    let mut counts = UposCounts::default();
    for p in paths {
        counts.add_file(&PathBuf::from(p.as_ref()))?;
    }
    counts.into_grouping(min_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, form: &str, upos: &str) -> String {
        format!("{id}\t{form}\t{form}\t{upos}\t_\t_\t0\troot\t_\t_\n")
    }

    #[test]
    fn threshold_keeps_frequent_labels_only() {
        let mut text = String::from("# sent_id = 1\n# text = run run\n");
        for i in 0..6 {
            text += &line(&(i + 1).to_string(), "run", "VERB");
        }
        text += "\n";
        text += &line("1", "run", "NOUN");
        text += &line("2", "run", "NOUN");
        text += &line("3-4", "don't", "_");
        text += &line("3", "do", "AUX");
        text += &line("3.1", "x", "X");
        let mut c = UposCounts::default();
        c.add_reader(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(c.counts.get(&("run".into(), "VERB".into())), Some(&6));
        assert!(!c.counts.contains_key(&("don't".into(), "_".into())));
        assert!(!c.counts.contains_key(&("x".into(), "X".into())));
        let t = c.into_grouping(5).unwrap();
        assert_eq!(t.words(), &["run".to_string()]);
        assert_eq!(t.labels_of("run").unwrap().into_iter().collect::<Vec<_>>(), vec!["VERB"]);
        assert_eq!(t.min_count_applied(), 5);
    }

    #[test]
    fn short_line_is_malformed() {
        let text = "# c\n1\tthe\tthe\tDET\n";
        let mut c = UposCounts::default();
        match c.add_reader(text.as_bytes(), Path::new("mem")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
