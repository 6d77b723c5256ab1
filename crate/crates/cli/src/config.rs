//! Run configuration read from TOML.
//!
//! Paths in a config file are relative to the file's directory; paths given
//! on the command line are relative to the working directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use vocab_rsa::embed_io::{EmbeddingKind, MatchPolicy, SurfaceOrder};
use vocab_rsa::metrics::Metric;
use vocab_rsa::rdm::PairSampler;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub metric: Option<Metric>,
    pub kind: Option<EmbeddingKind>,
    pub threads: Option<usize>,
    pub checkpoint_workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub plots: Option<bool>,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub hyp_rsa: HypRsaConfig,
    #[serde(default)]
    pub conv_rsa: ConvConfig,
    #[serde(default)]
    pub freq: FreqConfig,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub inout: InOutConfig,
    #[serde(default)]
    pub diff: DiffConfig,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderConfig {
    #[default]
    ExactFirst,
    LeadingSpaceFirst,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub order: OrderConfig,
    pub require_word_start: bool,
    pub case_insensitive_fallback: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let d = MatchPolicy::default();
        PolicyConfig {
            order: OrderConfig::ExactFirst,
            require_word_start: d.require_word_start,
            case_insensitive_fallback: d.case_insensitive_fallback,
        }
    }
}

impl PolicyConfig {
    pub fn policy(&self) -> MatchPolicy {
        MatchPolicy {
            order: match self.order {
                OrderConfig::ExactFirst => SurfaceOrder::ExactFirst,
                OrderConfig::LeadingSpaceFirst => SurfaceOrder::LeadingSpaceFirst,
            },
            require_word_start: self.require_word_start,
            case_insensitive_fallback: self.case_insensitive_fallback,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub threshold: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let d = PairSampler::default();
        SamplingConfig {
            threshold: d.threshold,
            sample_size: d.sample_size,
            seed: d.seed,
        }
    }
}

impl SamplingConfig {
    pub fn sampler(&self) -> PairSampler {
        PairSampler {
            threshold: self.threshold,
            sample_size: self.sample_size,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreConfig {
    #[default]
    Similarity,
    Distance,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum FreqModeConfig {
    #[default]
    Rank,
    Count,
}

fn default_min_count() -> u32 {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_freq_words() -> usize {
    1000
}

/// One hypothesis in `[[hyp_rsa.hypotheses]]`, selected by `type`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypothesisSpec {
    /// Word-pair ratings.
    Pairs {
        path: PathBuf,
        name: Option<String>,
        #[serde(default)]
        score: ScoreConfig,
    },
    /// Pairs scored by dissimilarity of external word vectors.
    VectorPairs {
        pairs: PathBuf,
        vectors: PathBuf,
        name: Option<String>,
        metric: Option<Metric>,
    },
    /// `word<TAB>labels` classes.
    Grouping {
        path: PathBuf,
        name: Option<String>,
        subsample: Option<usize>,
        #[serde(default = "default_seeds")]
        seeds: Vec<u64>,
    },
    /// Part of speech plus a second tag set on their shared words.
    Graded {
        pos: PathBuf,
        tags: PathBuf,
        name: Option<String>,
        subsample: Option<usize>,
        #[serde(default = "default_seeds")]
        seeds: Vec<u64>,
    },
    /// Part of speech counted from CoNLL-U treebanks.
    Upos {
        conllu: Vec<PathBuf>,
        #[serde(default = "default_min_count")]
        min_count: u32,
        name: Option<String>,
    },
    /// Template class sizes filled with random vocabulary words.
    RandomBaseline {
        template: PathBuf,
        candidates: Option<PathBuf>,
        seed: u64,
        name: Option<String>,
    },
    /// Frequency rank or count distance over the top resolvable words.
    Frequency {
        table: PathBuf,
        #[serde(default)]
        mode: FreqModeConfig,
        #[serde(default = "default_freq_words")]
        words: usize,
        name: Option<String>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypRsaConfig {
    #[serde(default)]
    pub hypotheses: Vec<HypothesisSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvConfig {
    /// Word list, one per line.
    pub words: Option<PathBuf>,
    /// POS grouping table for the functional/lexical split.
    pub pos_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqConfig {
    pub table: Option<PathBuf>,
    pub words_total: usize,
    pub bucket_size: usize,
    /// Exposure rescaling. Unset means "when the manifest has
    /// `tokens_per_step`"; `true` makes its absence an error.
    pub rescale: Option<bool>,
}

impl Default for FreqConfig {
    fn default() -> Self {
        FreqConfig {
            table: None,
            words_total: 1000,
            bucket_size: 100,
            rescale: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            sample_size: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InOutConfig {
    pub words: Option<PathBuf>,
    /// Frequency table; with it, one series per frequency bucket.
    pub table: Option<PathBuf>,
    pub words_total: Option<usize>,
    pub bucket_size: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffConfig {
    pub early_step: Option<u64>,
    pub k: usize,
    /// Use every vocabulary token instead of full-word tokens.
    pub all_tokens: bool,
    pub words: Option<PathBuf>,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            early_step: None,
            k: 10,
            all_tokens: false,
            words: None,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.manifest,
            &mut self.vocab,
            &mut self.out_dir,
            &mut self.cache_dir,
            &mut self.conv_rsa.words,
            &mut self.conv_rsa.pos_table,
            &mut self.freq.table,
            &mut self.inout.words,
            &mut self.inout.table,
            &mut self.diff.words,
        ] {
            rebase_opt(base, p);
        }
        for h in &mut self.hyp_rsa.hypotheses {
            match h {
                HypothesisSpec::Pairs { path, .. } | HypothesisSpec::Grouping { path, .. } => {
                    rebase(base, path)
                }
                HypothesisSpec::VectorPairs { pairs, vectors, .. } => {
                    rebase(base, pairs);
                    rebase(base, vectors);
                }
                HypothesisSpec::Graded { pos, tags, .. } => {
                    rebase(base, pos);
                    rebase(base, tags);
                }
                HypothesisSpec::Upos { conllu, .. } => conllu.iter_mut().for_each(|p| rebase(base, p)),
                HypothesisSpec::RandomBaseline {
                    template,
                    candidates,
                    ..
                } => {
                    rebase(base, template);
                    rebase_opt(base, candidates);
                }
                HypothesisSpec::Frequency { table, .. } => rebase(base, table),
            }
        }
    }

    pub fn manifest(&self) -> Result<&Path> {
        match &self.manifest {
            Some(p) => Ok(p),
            None => bail!("no checkpoint manifest given (config `manifest` or --manifest)"),
        }
    }

    pub fn vocab(&self) -> Result<&Path> {
        match &self.vocab {
            Some(p) => Ok(p),
            None => bail!("no vocabulary given (config `vocab` or --vocab)"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or_default()
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind.unwrap_or(EmbeddingKind::Input)
    }

    pub fn plots(&self) -> bool {
        self.plots.unwrap_or(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses_and_rebases() {
        let text = r#"
            manifest = "ckpt/manifest.json"
            vocab = "/abs/vocab.tsv"
            metric = "cosine"
            kind = "output"
            [policy]
            order = "leading_space_first"
            [sampling]
            threshold = 100
            sample_size = 50
            seed = 3
            [[hyp_rsa.hypotheses]]
            type = "pairs"
            path = "ws.tsv"
            [[hyp_rsa.hypotheses]]
            type = "grouping"
            path = "verbnet.tsv"
            subsample = 20
            seeds = [1, 2]
            [[hyp_rsa.hypotheses]]
            type = "frequency"
            table = "freq.tsv"
            mode = "count"
            [drift]
            sample_size = 10
        "#;
        let mut cfg: RunConfig = toml::from_str(text).unwrap();
        cfg.rebase(Path::new("/cfg"));
        assert_eq!(cfg.manifest.as_deref(), Some(Path::new("/cfg/ckpt/manifest.json")));
        assert_eq!(cfg.vocab.as_deref(), Some(Path::new("/abs/vocab.tsv")));
        assert_eq!(cfg.metric(), Metric::CosineDistance);
        assert_eq!(cfg.kind(), EmbeddingKind::Output);
        assert_eq!(cfg.policy.policy().order, SurfaceOrder::LeadingSpaceFirst);
        assert_eq!(cfg.sampling.sampler().sample_size, 50);
        assert_eq!(cfg.hyp_rsa.hypotheses.len(), 3);
        match &cfg.hyp_rsa.hypotheses[1] {
            HypothesisSpec::Grouping { path, seeds, .. } => {
                assert_eq!(path, Path::new("/cfg/verbnet.tsv"));
                assert_eq!(seeds, &[1, 2]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.drift.sample_size, 10);
        assert_eq!(cfg.freq.words_total, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("manifets = \"x\"").is_err());
        assert!(toml::from_str::<RunConfig>("[[hyp_rsa.hypotheses]]\ntype = \"nope\"").is_err());
    }
}
