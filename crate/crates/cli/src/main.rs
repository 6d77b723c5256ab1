//! `vocab-rsa`: representational similarity analysis over checkpoint
//! sequences.
//!
//! Exit status: 0 on success, 2 when inputs or configuration fail
//! validation, 1 when a computation fails after validation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vocab_rsa::embed_io::EmbeddingKind;
use vocab_rsa::metrics::Metric;

use crate::commands::Failure;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "vocab-rsa", version, about = "RSA over vocabulary embeddings across training checkpoints")]
struct Cli {
    /// Only report warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the experiment subcommands; each overrides the
/// corresponding config entry.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint manifest JSON.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Vocabulary TSV.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// spearman, cosine or euclidean.
    #[arg(long)]
    metric: Option<Metric>,
    /// input or output embeddings.
    #[arg(long)]
    kind: Option<EmbeddingKind>,
    /// Worker threads inside a checkpoint (default: logical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Checkpoints evaluated concurrently.
    #[arg(long)]
    checkpoint_workers: Option<usize>,
    /// Directory for cached model RDMs.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Condensed entries above which tau is computed on a sample.
    #[arg(long)]
    sample_threshold: Option<usize>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Skip SVG plots.
    #[arg(long)]
    no_plots: bool,
    /// Validate inputs and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::Validation)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            )*};
        }
        over!(manifest, vocab, out_dir, metric, kind, threads, checkpoint_workers, cache_dir);
        if let Some(v) = self.sample_threshold {
            cfg.sampling.threshold = v;
        }
        if let Some(v) = self.sample_size {
            cfg.sampling.sample_size = v;
        }
        if let Some(v) = self.sample_seed {
            cfg.sampling.seed = v;
        }
        if self.no_plots {
            cfg.plots = Some(false);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute and store one model RDM.
    Rdm {
        /// Embedding matrix (.npy).
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Word list, one per line (default: all full-word tokens).
        #[arg(long)]
        words: Option<PathBuf>,
        #[arg(long, default_value = "spearman")]
        metric: Metric,
        #[arg(long, default_value = "input")]
        kind: EmbeddingKind,
        /// Training step recorded in the RDM manifest.
        #[arg(long, default_value_t = 0)]
        step: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output .npy; a .json manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dry_run: bool,
    },
    /// Hypothesis RSA for every configured hypothesis.
    HypRsa(RunArgs),
    /// Convergence RSA toward the final checkpoint.
    ConvRsa(RunArgs),
    /// Convergence RSA per frequency bucket.
    Freq {
        #[command(flatten)]
        run: RunArgs,
        /// Frequency TSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Mean distance of sampled embeddings to their final values.
    Drift {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        drift_sample_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Agreement between input and output embedding RDMs.
    Inout(RunArgs),
    /// Word pairs that changed most between an early and the final checkpoint.
    Diff {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        early_step: Option<u64>,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Count corpus words into a frequency TSV.
    Count {
        /// Text files, plain or gzip.
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        /// Output TSV (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Rdm {
            matrix,
            vocab,
            words,
            metric,
            kind,
            step,
            threads,
            out,
            dry_run,
        } => commands::rdm(commands::RdmJob {
            matrix,
            vocab,
            words,
            metric,
            kind,
            step,
            threads,
            out,
            dry_run,
        }),
        Command::HypRsa(args) => commands::hyp_rsa(&args.resolve()?, args.dry_run),
        Command::ConvRsa(args) => commands::conv_rsa(&args.resolve()?, args.dry_run),
        Command::Freq { run, table } => {
            let mut cfg = run.resolve()?;
            if table.is_some() {
                cfg.freq.table = table;
            }
            commands::freq(&cfg, run.dry_run)
        }
        Command::Drift {
            run,
            drift_sample_size,
            seed,
        } => {
            let mut cfg = run.resolve()?;
            if let Some(n) = drift_sample_size {
                cfg.drift.sample_size = n;
            }
            if let Some(s) = seed {
                cfg.drift.seed = s;
            }
            commands::drift(&cfg, run.dry_run)
        }
        Command::Inout(args) => commands::inout(&args.resolve()?, args.dry_run),
        Command::Diff { run, early_step, k } => {
            let mut cfg = run.resolve()?;
            if early_step.is_some() {
                cfg.diff.early_step = early_step;
            }
            if let Some(k) = k {
                cfg.diff.k = k;
            }
            commands::diff(&cfg, run.dry_run)
        }
        Command::Count {
            corpus,
            out,
            lowercase,
            threads,
        } => commands::count(&corpus, out.as_deref(), lowercase, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
