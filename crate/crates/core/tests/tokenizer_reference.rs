//! The hand-written matcher against a general backtracking engine.

use fancy_regex::Regex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use vocab_rsa::freqcount::{match_spans, WORD_PATTERN};

fn reference_spans(re: &Regex, text: &str) -> Vec<(usize, usize)> {
    re.find_iter(text)
        .map(|m| {
            let m = m.unwrap();
            (m.start(), m.end())
        })
        .collect()
}

const ALPHABET: &[char] = &[
    'a', 'b', 'Z', 'é', 'ß', 'ж', '日', '_', '0', '1', '9', '٣', '-', '-', '.', '.', ',', '\'', '\'',
    ' ', ' ', '\t', '!', '’', '(', '\u{301}',
];

fn random_text(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}

#[test]
fn fixture_cases_agree() {
    let re = Regex::new(WORD_PATTERN).unwrap();
    let cases = [
        "a well-known U.S.A. don't 1,234.5",
        "e.g. i.e. etc. Ph.D. Ph.D",
        "-pre-fix post-fix- x-y-z-w-v",
        "1,000,000.25 1,00 3.14.15 .5 5.",
        "rock'n'roll o'clock ''a'' a''b",
        "abcd.ef.g abc.de abcd.e a.b.c.d.e.f",
        "state-of-the-art mother-in-law",
        "under_score co-op_x 12-34",
        "naïve café—bar ٣٤٥,٦٧٨",
        "",
        "...---,,,'''",
    ];
    for c in cases {
        assert_eq!(match_spans(c), reference_spans(&re, c), "case {c:?}");
    }
}

#[test]
fn random_text_agrees() {
    let re = Regex::new(WORD_PATTERN).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    for _ in 0..3000 {
        let len = rng.random_range(0..60);
        let text = random_text(&mut rng, len);
        assert_eq!(match_spans(&text), reference_spans(&re, &text), "text {text:?}");
    }
}
