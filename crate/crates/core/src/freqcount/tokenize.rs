//! Word matcher equivalent to the backtracking pattern
//!
//! ```text
//! \d+(?:,\d{3})*(?:\.\d+)?
//! |(?<!-)\w+(?:-\w+){1,3}(?!-)\b
//! |(?:\w{1,3}\.){2,}\w{0,3}
//! |(?:\w{1,3}\.)+\w{1,3}\b
//! |\w+(?:[']\w+)*
//! |\w+
//! ```
//!
//! with leftmost-first semantics: at each start position the alternatives are
//! tried in order and the first one that matches wins. `\w`, `\d` and `\b` are
//! the Unicode classes of the `regex` crate.

use std::sync::OnceLock;

use regex_syntax::hir::{Class, HirKind};

/// The pattern, as a single line, for use with a reference engine.
pub const WORD_PATTERN: &str = concat!(
    r"\d+(?:,\d{3})*(?:\.\d+)?|",
    r"(?<!-)\w+(?:-\w+){1,3}(?!-)\b|",
    r"(?:\w{1,3}\.){2,}\w{0,3}|(?:\w{1,3}\.)+\w{1,3}\b|",
    r"\w+(?:[']\w+)*|",
    r"\w+"
);

fn digit_ranges() -> &'static [(char, char)] {
    static RANGES: OnceLock<Vec<(char, char)>> = OnceLock::new();
    RANGES.get_or_init(|| {
        let hir = regex_syntax::Parser::new()
            .parse(r"\d")
            .expect("\\d parses");
        match hir.kind() {
            HirKind::Class(Class::Unicode(cls)) => {
                cls.ranges().iter().map(|r| (r.start(), r.end())).collect()
            }
            other => panic!("unexpected \\d translation {other:?}"),
        }
    })
}

#[inline]
fn is_digit(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_digit();
    }
    let ranges = digit_ranges();
    ranges
        .binary_search_by(|&(lo, hi)| {
            if c < lo {
                std::cmp::Ordering::Greater
            } else if c > hi {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}

#[inline]
fn is_word(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_alphanumeric() || c == '_';
    }
    regex_syntax::is_word_character(c)
}

struct Line {
    chars: Vec<char>,
    /// Byte offset of each char, plus the total length.
    offsets: Vec<usize>,
    /// Length of the run of word chars starting at each position.
    word_run: Vec<usize>,
}

impl Line {
    fn new(text: &str) -> Self {
        let mut chars = Vec::with_capacity(text.len());
        let mut offsets = Vec::with_capacity(text.len() + 1);
        for (i, c) in text.char_indices() {
            chars.push(c);
            offsets.push(i);
        }
        offsets.push(text.len());
        let mut word_run = vec![0; chars.len() + 1];
        for i in (0..chars.len()).rev() {
            if is_word(chars[i]) {
                word_run[i] = word_run[i + 1] + 1;
            }
        }
        Line {
            chars,
            offsets,
            word_run,
        }
    }

    #[inline]
    fn at(&self, i: usize) -> Option<char> {
        self.chars.get(i).copied()
    }

    #[inline]
    fn is(&self, i: usize, c: char) -> bool {
        self.at(i) == Some(c)
    }

    #[inline]
    fn digit(&self, i: usize) -> bool {
        self.at(i).is_some_and(is_digit)
    }

    #[inline]
    fn run(&self, i: usize) -> usize {
        self.word_run.get(i).copied().unwrap_or(0)
    }

    #[inline]
    fn boundary(&self, i: usize) -> bool {
        let before = i > 0 && is_word(self.chars[i - 1]);
        let after = self.at(i).is_some_and(is_word);
        before != after
    }

    /// `\d+(?:,\d{3})*(?:\.\d+)?`
    fn number(&self, p: usize) -> Option<usize> {
        if !self.digit(p) {
            return None;
        }
        let mut e = p;
        while self.digit(e) {
            e += 1;
        }
        while self.is(e, ',') && (1..=3).all(|k| self.digit(e + k)) {
            e += 4;
        }
        if self.is(e, '.') && self.digit(e + 1) {
            e += 1;
            while self.digit(e) {
                e += 1;
            }
        }
        Some(e)
    }

    /// `(?<!-)\w+(?:-\w+){1,3}(?!-)\b`
    fn hyphenated(&self, p: usize) -> Option<usize> {
        if p > 0 && self.chars[p - 1] == '-' {
            return None;
        }
        (1..=self.run(p))
            .rev()
            .find_map(|len| self.hyphen_groups(p + len, 0))
    }

    fn hyphen_groups(&self, pos: usize, count: usize) -> Option<usize> {
        if count < 3 && self.is(pos, '-') {
            let inner = (1..=self.run(pos + 1))
                .rev()
                .find_map(|len| self.hyphen_groups(pos + 1 + len, count + 1));
            if inner.is_some() {
                return inner;
            }
        }
        (count >= 1 && !self.is(pos, '-') && self.boundary(pos)).then_some(pos)
    }

    /// End positions after each successive `\w{1,3}\.` group starting at `p`.
    /// At most one group length can be followed by a dot, so the sequence is
    /// unique.
    fn dotted_groups(&self, p: usize) -> Vec<usize> {
        let mut ends = Vec::new();
        let mut pos = p;
        loop {
            let len = self.run(pos);
            if (1..=3).contains(&len) && self.is(pos + len, '.') {
                pos += len + 1;
                ends.push(pos);
            } else {
                return ends;
            }
        }
    }

    /// `(?:\w{1,3}\.){2,}\w{0,3}`
    fn acronym(&self, ends: &[usize]) -> Option<usize> {
        let &last = ends.get(1).and(ends.last())?;
        Some(last + self.run(last).min(3))
    }

    /// `(?:\w{1,3}\.)+\w{1,3}\b`
    fn short_dotted(&self, ends: &[usize]) -> Option<usize> {
        ends.iter().rev().find_map(|&pos| {
            (1..=self.run(pos).min(3))
                .rev()
                .map(|len| pos + len)
                .find(|&e| self.boundary(e))
        })
    }

    /// `\w+(?:[']\w+)*`
    fn apostrophe_word(&self, p: usize) -> Option<usize> {
        let mut e = p + self.run(p);
        if e == p {
            return None;
        }
        while self.is(e, '\'') && self.run(e + 1) > 0 {
            e += 1 + self.run(e + 1);
        }
        Some(e)
    }

    fn match_at(&self, p: usize) -> Option<usize> {
        if let Some(e) = self.number(p) {
            return Some(e);
        }
        if self.run(p) == 0 {
            return None;
        }
        if let Some(e) = self.hyphenated(p) {
            return Some(e);
        }
        let ends = self.dotted_groups(p);
        self.acronym(&ends)
            .or_else(|| self.short_dotted(&ends))
            .or_else(|| self.apostrophe_word(p))
    }
}

/// Byte spans of all non-overlapping matches, left to right.
pub fn match_spans(text: &str) -> Vec<(usize, usize)> {
    let line = Line::new(text);
    let mut out = Vec::new();
    let mut p = 0;
    while p < line.chars.len() {
        match line.match_at(p) {
            Some(e) => {
                out.push((line.offsets[p], line.offsets[e]));
                p = e;
            }
            None => p += 1,
        }
    }
    out
}

/// Words of `text` in order of appearance.
pub fn tokenize_line(text: &str) -> Vec<&str> {
    match_spans(text).into_iter().map(|(s, e)| &text[s..e]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_examples() {
        assert_eq!(
            tokenize_line("a well-known U.S.A. don't 1,234.5"),
            vec!["a", "well-known", "U.S.A.", "don't", "1,234.5"]
        );
        assert!(tokenize_line("").is_empty());
        assert_eq!(tokenize_line("Ph.D thesis"), vec!["Ph.D", "thesis"]);
        assert_eq!(tokenize_line("know-it-all"), vec!["know-it-all"]);
    }

    #[test]
    fn long_hyphen_chains_split() {
        assert_eq!(tokenize_line("a-b-c-d-e"), vec!["a", "b", "c", "d", "e"]);
        assert_eq!(tokenize_line("one-two-three-four"), vec!["one-two-three-four"]);
    }

    #[test]
    fn numbers_stop_at_bad_groups() {
        assert_eq!(tokenize_line("1,2345"), vec!["1,234", "5"]);
        assert_eq!(tokenize_line("12abc"), vec!["12", "abc"]);
        assert_eq!(tokenize_line("3.14."), vec!["3.14"]);
    }

    #[test]
    fn digit_table_is_unicode() {
        assert!(is_digit('٣'));
        assert!(!is_digit('Ⅻ'));
        assert!(is_word('é'));
    }
}
