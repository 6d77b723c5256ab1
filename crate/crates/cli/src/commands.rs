use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use log::{info, warn};
use vocab_rsa::embed_io::{
    load_matrix, resolve_words, EmbeddingKind, MatchPolicy, TokenSubset, VocabMap,
};
use vocab_rsa::experiments::{
    convergence_rsa, drift_to_final, frequency_convergence, hypothesis_rsa,
    hypothesis_rsa_subsampled, in_out_correlation, pos_class_convergence, prepare_hypothesis,
    qualitative_diff, render_svg, save_series, CheckpointManifest, CheckpointStore,
    CorrelationSeries, ExposureRescale, Hypothesis, PreparedHypothesis, Runner,
};
use vocab_rsa::freqcount::{bucket_shares, bucketize, count_corpus, top_resolvable, BucketSpec, CaseMode};
use vocab_rsa::hypotheses::{
    frequency_rdm, graded_combined_rdm, grouping_rdm, load_pair_dataset, pair_target_from_embeddings,
    random_baseline_rdm, upos_counts_from_conllu, FrequencyMode, FrequencyTable, GroupingTable,
    PairFormat, WordVectors,
};
use vocab_rsa::metrics::Metric;
use vocab_rsa::rdm::{compute_rdm, save_rdm};

use crate::config::{FreqModeConfig, HypothesisSpec, RunConfig, ScoreConfig};

/// Failure class, mapped to the process exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

type CmdResult = Result<(), Failure>;

/// Steps to run, printed by `--dry-run` and logged otherwise.
#[derive(Default)]
struct Plan(String);

impl Plan {
    fn line(&mut self, s: impl AsRef<str>) {
        let _ = writeln!(self.0, "{}", s.as_ref());
    }

    /// Returns true when the caller should stop (dry run).
    fn finish(self, dry_run: bool) -> bool {
        if dry_run {
            print!("{}", self.0);
        } else {
            for l in self.0.lines() {
                info!("{l}");
            }
        }
        dry_run
    }
}

/// Validated inputs shared by the experiment subcommands.
struct Setup {
    manifest: CheckpointManifest,
    vocab: VocabMap,
    runner: Runner,
    metric: Metric,
    kind: EmbeddingKind,
    policy: MatchPolicy,
    out_dir: PathBuf,
    plots: bool,
}

impl Setup {
    fn new(cfg: &RunConfig, kinds: &[EmbeddingKind], plan: &mut Plan) -> anyhow::Result<Self> {
        let mpath = cfg.manifest()?;
        let manifest = CheckpointManifest::load(mpath)?;
        let files = manifest.check(kinds)?;
        let vpath = cfg.vocab()?;
        let vocab = VocabMap::load(vpath)?;
        let rows = files[0].shape[0];
        if vocab.len() != rows {
            bail!(
                "vocabulary {} has {} entries but matrices have {rows} rows",
                vpath.display(),
                vocab.len()
            );
        }
        let mut runner = Runner::new(
            cfg.threads.unwrap_or(0),
            cfg.checkpoint_workers.unwrap_or(1),
        )?
        .with_sampler(cfg.sampling.sampler());
        if let Some(dir) = &cfg.cache_dir {
            runner = runner.with_cache(dir);
        }
        plan.line(format!(
            "manifest {}: {} checkpoints (steps {}..{}), {} files checked, shape {:?}",
            mpath.display(),
            manifest.len(),
            manifest.steps()[0],
            manifest.steps()[manifest.len() - 1],
            files.len(),
            files[0].shape
        ));
        plan.line(format!("vocabulary {}: {} tokens", vpath.display(), vocab.len()));
        plan.line(format!(
            "metric {}, {} embeddings, output directory {}",
            cfg.metric(),
            cfg.kind(),
            cfg.out_dir().display()
        ));
        Ok(Setup {
            manifest,
            vocab,
            runner,
            metric: cfg.metric(),
            kind: cfg.kind(),
            policy: cfg.policy.policy(),
            out_dir: cfg.out_dir(),
            plots: cfg.plots(),
        })
    }

    fn resolve_list(&self, path: &Path) -> anyhow::Result<TokenSubset> {
        let words = read_word_list(path)?;
        let res = resolve_words(&self.vocab, &words, &self.policy)?;
        if !res.unresolved.is_empty() || !res.collisions.is_empty() {
            info!(
                "{}: {} of {} words resolved",
                path.display(),
                res.subset.len(),
                words.len()
            );
        }
        Ok(res.subset)
    }

    fn write(&self, stem: &str, title: &str, series: &[CorrelationSeries], rescaled: bool) -> anyhow::Result<()> {
        save_series(&self.out_dir, stem, series)?;
        if self.plots {
            let svg_path = self.out_dir.join(format!("{stem}.svg"));
            std::fs::write(&svg_path, render_svg(title, series, rescaled))
                .with_context(|| format!("writing {}", svg_path.display()))?;
        }
        info!("wrote {}", self.out_dir.join(format!("{stem}.csv")).display());
        Ok(())
    }
}

fn read_word_list(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn pair_format(path: &Path) -> PairFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => PairFormat::Csv,
        _ => PairFormat::Tsv,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn with_name(h: PreparedHypothesis, name: Option<&String>) -> PreparedHypothesis {
    let Some(new) = name else { return h };
    match h {
        PreparedHypothesis::Rdm { subset, values, .. } => PreparedHypothesis::Rdm {
            name: new.clone(),
            subset,
            values,
        },
        PreparedHypothesis::Pairs {
            pairs,
            labels,
            scores,
            sign,
            ..
        } => PreparedHypothesis::Pairs {
            name: new.clone(),
            pairs,
            labels,
            scores,
            sign,
        },
    }
}

/// A prepared hypothesis plus the optional subsampling to apply.
struct Job {
    hypothesis: PreparedHypothesis,
    subsample: Option<(usize, Vec<u64>)>,
}

fn build_hypothesis(setup: &Setup, spec: &HypothesisSpec) -> anyhow::Result<Job> {
    let min = setup.runner.min_items();
    let prep = |h: Hypothesis| prepare_hypothesis(&h, &setup.vocab, &setup.policy, min);
    let (hypothesis, name, subsample) = match spec {
        HypothesisSpec::Pairs { path, name, score } => {
            let mut d = load_pair_dataset(path, pair_format(path))?;
            if *score == ScoreConfig::Distance {
                d.score_kind = vocab_rsa::hypotheses::ScoreKind::Distance;
            }
            (prep(Hypothesis::Pairs(d))?, name.clone(), None)
        }
        HypothesisSpec::VectorPairs {
            pairs,
            vectors,
            name,
            metric,
        } => {
            let mut d = load_pair_dataset(pairs, pair_format(pairs))?;
            let table = WordVectors::load(vectors)?;
            let before = d.len();
            d.retain(|a, b| table.contains(a) && table.contains(b));
            info!("{}: {} of {before} pairs covered by {}", d.name, d.len(), vectors.display());
            let target = pair_target_from_embeddings(&table, &d, metric.unwrap_or(setup.metric))?;
            (prep(Hypothesis::Pairs(target))?, name.clone(), None)
        }
        HypothesisSpec::Grouping {
            path,
            name,
            subsample,
            seeds,
        } => {
            let t = GroupingTable::load(path)?;
            let h = grouping_rdm(&t, t.words())?;
            let n = name.clone().or_else(|| Some(stem(path)));
            (prep(Hypothesis::Rdm(h))?, n, subsample.map(|k| (k, seeds.clone())))
        }
        HypothesisSpec::Graded {
            pos,
            tags,
            name,
            subsample,
            seeds,
        } => {
            let p = GroupingTable::load(pos)?;
            let t = GroupingTable::load(tags)?;
            let words: Vec<String> = p.words().iter().filter(|w| t.contains(w)).cloned().collect();
            let h = graded_combined_rdm(&p, &t, &words)?;
            let n = name.clone().or_else(|| Some("graded".into()));
            (prep(Hypothesis::Rdm(h))?, n, subsample.map(|k| (k, seeds.clone())))
        }
        HypothesisSpec::Upos {
            conllu,
            min_count,
            name,
        } => {
            let t = upos_counts_from_conllu(conllu, *min_count)?;
            let h = grouping_rdm(&t, t.words())?;
            let n = name.clone().or_else(|| Some("upos".into()));
            (prep(Hypothesis::Rdm(h))?, n, None)
        }
        HypothesisSpec::RandomBaseline {
            template,
            candidates,
            seed,
            name,
        } => {
            let t = GroupingTable::load(template)?;
            let pool: Vec<String> = match candidates {
                Some(p) => read_word_list(p)?,
                None => setup
                    .vocab
                    .word_start_subset()
                    .labels()
                    .iter()
                    .filter(|w| !w.is_empty())
                    .cloned()
                    .collect(),
            };
            let h = random_baseline_rdm(&t, &pool, *seed)?;
            (prep(Hypothesis::Rdm(h))?, name.clone(), None)
        }
        HypothesisSpec::Frequency {
            table,
            mode,
            words,
            name,
        } => {
            let t = FrequencyTable::load(table)?;
            let top = top_resolvable(&t, &setup.vocab, &setup.policy, *words);
            let mode = match mode {
                FreqModeConfig::Rank => FrequencyMode::Rank,
                FreqModeConfig::Count => FrequencyMode::Count,
            };
            let h = frequency_rdm(&t, top.labels(), mode)?;
            (prep(Hypothesis::Rdm(h))?, name.clone(), None)
        }
    };
    Ok(Job {
        hypothesis: with_name(hypothesis, name.as_ref()),
        subsample,
    })
}

pub fn hyp_rsa(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[cfg.kind()], &mut plan).invalid()?;
    if cfg.hyp_rsa.hypotheses.is_empty() {
        return Err(Failure::Validation(anyhow!("no [[hyp_rsa.hypotheses]] configured")));
    }
    let mut jobs = Vec::new();
    for spec in &cfg.hyp_rsa.hypotheses {
        let job = build_hypothesis(&setup, spec).invalid()?;
        let what = match &job.hypothesis {
            PreparedHypothesis::Rdm { .. } => "tokens",
            PreparedHypothesis::Pairs { .. } => "pairs",
        };
        let mut line = format!(
            "hypothesis {}: {} {what}",
            job.hypothesis.name(),
            job.hypothesis.n_items()
        );
        if let Some((k, seeds)) = &job.subsample {
            let _ = write!(line, ", subsampled to {k} with seeds {seeds:?}");
        }
        plan.line(line);
        jobs.push(job);
    }
    plan.line("outputs: hyp_rsa.csv, hyp_rsa.json");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let mut series = Vec::new();
    for job in &jobs {
        let s = match &job.subsample {
            Some((k, seeds)) => hypothesis_rsa_subsampled(
                &setup.runner,
                &setup.manifest,
                &job.hypothesis,
                *k,
                seeds,
                setup.kind,
                setup.metric,
            ),
            None => hypothesis_rsa(&setup.runner, &setup.manifest, &job.hypothesis, setup.kind, setup.metric),
        }
        .runtime()?;
        series.push(s);
    }
    setup.write("hyp_rsa", "Hypothesis RSA", &series, false).runtime()
}

pub fn conv_rsa(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[cfg.kind()], &mut plan).invalid()?;
    let c = &cfg.conv_rsa;
    if c.words.is_none() && c.pos_table.is_none() {
        return Err(Failure::Validation(anyhow!(
            "conv_rsa needs `words` and/or `pos_table`"
        )));
    }
    let subset = c
        .words
        .as_ref()
        .map(|p| setup.resolve_list(p))
        .transpose()
        .invalid()?;
    let pos = c
        .pos_table
        .as_ref()
        .map(GroupingTable::load)
        .transpose()
        .invalid()?;
    if let Some(s) = &subset {
        if s.len() < setup.runner.min_items() {
            return Err(Failure::Validation(anyhow!(
                "word list resolves to {} tokens, at least {} required",
                s.len(),
                setup.runner.min_items()
            )));
        }
        plan.line(format!("convergence over {} tokens", s.len()));
    }
    if let Some(t) = &pos {
        plan.line(format!("functional/lexical convergence over {} tagged words", t.len()));
    }
    plan.line("outputs: conv_rsa.csv, conv_rsa.json");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let mut series = Vec::new();
    if let Some(s) = &subset {
        series.push(convergence_rsa(&setup.runner, &setup.manifest, s, setup.kind, setup.metric).runtime()?);
    }
    if let Some(t) = &pos {
        let pc = pos_class_convergence(
            &setup.runner,
            &setup.manifest,
            &setup.vocab,
            t,
            &setup.policy,
            setup.kind,
            setup.metric,
        )
        .runtime()?;
        series.push(pc.functional);
        series.push(pc.lexical);
        series.extend(pc.per_tag);
    }
    setup.write("conv_rsa", "Convergence RSA", &series, false).runtime()
}

pub fn freq(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[cfg.kind()], &mut plan).invalid()?;
    let f = &cfg.freq;
    let tpath = f
        .table
        .as_ref()
        .ok_or_else(|| Failure::Validation(anyhow!("freq needs a frequency table (`freq.table` or --table)")))?;
    let table = FrequencyTable::load(tpath).invalid()?;
    let spec = BucketSpec {
        words_total: f.words_total,
        bucket_size: f.bucket_size,
    };
    let buckets = bucketize(&table, &setup.vocab, &spec, &setup.policy).invalid()?;
    let shares = bucket_shares(&table, &buckets).invalid()?;
    let wanted = f.rescale.unwrap_or_else(|| {
        let known = setup.manifest.tokens_per_step().is_some();
        if !known {
            warn!("manifest has no tokens_per_step; skipping exposure rescaling");
        }
        known
    });
    let rescale = if wanted {
        Some(ExposureRescale::for_store(&setup.manifest, shares.clone()).invalid()?)
    } else {
        None
    };
    plan.line(format!(
        "{} buckets of {} words from {}",
        buckets.len(),
        spec.bucket_size,
        tpath.display()
    ));
    if let Some(r) = &rescale {
        plan.line(format!("exposure rescaling with {} tokens per step", r.tokens_per_step));
    }
    plan.line("outputs: freq_convergence.csv, freq_convergence.json, freq_buckets.tsv");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let series = frequency_convergence(
        &setup.runner,
        &setup.manifest,
        &buckets,
        rescale.as_ref(),
        setup.kind,
        setup.metric,
    )
    .runtime()?;
    setup
        .write("freq_convergence", "Convergence by frequency bucket", &series, false)
        .runtime()?;
    if rescale.is_some() && setup.plots {
        let p = setup.out_dir.join("freq_convergence_rescaled.svg");
        std::fs::write(&p, render_svg("Convergence by expected exposures", &series, true))
            .with_context(|| format!("writing {}", p.display()))
            .runtime()?;
    }
    let mut tsv = String::from("bucket\tmean_share\tword\ttoken_id\n");
    for (b, (bucket, share)) in buckets.iter().zip(&shares).enumerate() {
        for (w, id) in bucket.labels().iter().zip(bucket.rows()) {
            let _ = writeln!(tsv, "{}\t{share}\t{w}\t{id}", b + 1);
        }
    }
    let p = setup.out_dir.join("freq_buckets.tsv");
    std::fs::write(&p, tsv)
        .with_context(|| format!("writing {}", p.display()))
        .runtime()
}

pub fn drift(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[cfg.kind()], &mut plan).invalid()?;
    let d = &cfg.drift;
    if d.sample_size == 0 || d.sample_size > setup.vocab.len() {
        return Err(Failure::Validation(anyhow!(
            "drift sample size {} must be between 1 and {}",
            d.sample_size,
            setup.vocab.len()
        )));
    }
    plan.line(format!("drift of {} tokens sampled with seed {}", d.sample_size, d.seed));
    plan.line("outputs: drift.csv, drift.json");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let s = drift_to_final(
        &setup.runner,
        &setup.manifest,
        d.sample_size,
        d.seed,
        setup.kind,
        setup.metric,
    )
    .runtime()?;
    setup.write("drift", "Distance to final embeddings", &[s], false).runtime()
}

pub fn inout(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[EmbeddingKind::Input, EmbeddingKind::Output], &mut plan).invalid()?;
    let c = &cfg.inout;
    let mut named = Vec::new();
    if let Some(p) = &c.words {
        named.push(("all".to_string(), setup.resolve_list(p).invalid()?));
    }
    if let Some(p) = &c.table {
        let table = FrequencyTable::load(p).invalid()?;
        let spec = BucketSpec {
            words_total: c.words_total.unwrap_or(cfg.freq.words_total),
            bucket_size: c.bucket_size.unwrap_or(cfg.freq.bucket_size),
        };
        for (b, s) in bucketize(&table, &setup.vocab, &spec, &setup.policy)
            .invalid()?
            .into_iter()
            .enumerate()
        {
            named.push((format!("bucket_{}", b + 1), s));
        }
    }
    if named.is_empty() {
        return Err(Failure::Validation(anyhow!("inout needs `words` and/or `table`")));
    }
    for (name, s) in &named {
        if s.len() < setup.runner.min_items() {
            return Err(Failure::Validation(anyhow!(
                "{name} resolves to {} tokens, at least {} required",
                s.len(),
                setup.runner.min_items()
            )));
        }
        plan.line(format!("input/output agreement on {name}: {} tokens", s.len()));
    }
    plan.line("outputs: inout.csv, inout.json");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let series = in_out_correlation(&setup.runner, &setup.manifest, &named, setup.metric).runtime()?;
    setup.write("inout", "Input/output embedding agreement", &series, false).runtime()
}

pub fn diff(cfg: &RunConfig, dry_run: bool) -> CmdResult {
    let mut plan = Plan::default();
    let setup = Setup::new(cfg, &[cfg.kind()], &mut plan).invalid()?;
    let d = &cfg.diff;
    let early = d
        .early_step
        .ok_or_else(|| Failure::Validation(anyhow!("diff needs `diff.early_step` or --early-step")))?;
    if setup.manifest.index_of_step(early).is_none() {
        return Err(Failure::Validation(anyhow!("step {early} is not in the manifest")));
    }
    if d.k == 0 {
        return Err(Failure::Validation(anyhow!("k must be at least 1")));
    }
    let subset = match (&d.words, d.all_tokens) {
        (Some(p), _) => setup.resolve_list(p).invalid()?,
        (None, true) => setup.vocab.all_tokens_subset(),
        (None, false) => setup.vocab.word_start_subset(),
    };
    plan.line(format!(
        "top {} closing and opening pairs between step {early} and the final checkpoint over {} tokens",
        d.k,
        subset.len()
    ));
    plan.line("outputs: diff.json, diff.tsv");
    if plan.finish(dry_run) {
        return Ok(());
    }
    let report = qualitative_diff(
        &setup.runner,
        &setup.manifest,
        early,
        &subset,
        d.k,
        setup.kind,
        setup.metric,
    )
    .runtime()?;
    std::fs::create_dir_all(&setup.out_dir)
        .with_context(|| format!("creating {}", setup.out_dir.display()))
        .runtime()?;
    let json = setup.out_dir.join("diff.json");
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from).runtime()?;
    std::fs::write(&json, text + "\n")
        .with_context(|| format!("writing {}", json.display()))
        .runtime()?;
    let mut tsv = String::from("direction\trank\tword_a\tword_b\ttoken_a\ttoken_b\tdelta\n");
    for (dir, list) in [("closing", &report.closing), ("opening", &report.opening)] {
        for (r, p) in list.iter().enumerate() {
            let _ = writeln!(
                tsv,
                "{dir}\t{}\t{}\t{}\t{}\t{}\t{}",
                r + 1,
                p.word_a,
                p.word_b,
                p.token_a,
                p.token_b,
                p.delta
            );
        }
    }
    let tpath = setup.out_dir.join("diff.tsv");
    std::fs::write(&tpath, tsv)
        .with_context(|| format!("writing {}", tpath.display()))
        .runtime()?;
    println!(
        "max closing {} / max opening {} (step {early} -> {})",
        report.max_closing, report.max_opening, report.final_step
    );
    Ok(())
}

pub struct RdmJob {
    pub matrix: PathBuf,
    pub vocab: PathBuf,
    pub words: Option<PathBuf>,
    pub metric: Metric,
    pub kind: EmbeddingKind,
    pub step: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub dry_run: bool,
}

fn local_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .invalid()
}

pub fn rdm(job: RdmJob) -> CmdResult {
    let pool = local_pool(job.threads)?;
    let m = load_matrix(&job.matrix, job.kind).invalid()?;
    let vocab = VocabMap::load(&job.vocab).invalid()?;
    if vocab.len() != m.rows() {
        return Err(Failure::Validation(anyhow!(
            "vocabulary has {} entries but the matrix has {} rows",
            vocab.len(),
            m.rows()
        )));
    }
    let subset = match &job.words {
        Some(p) => {
            let words = read_word_list(p).invalid()?;
            resolve_words(&vocab, &words, &MatchPolicy::default())
                .invalid()?
                .subset
        }
        None => vocab.word_start_subset(),
    };
    if subset.len() < 2 {
        return Err(Failure::Validation(anyhow!("need at least 2 resolved tokens")));
    }
    let mut plan = Plan::default();
    plan.line(format!(
        "{} RDM over {} tokens of {} ({} x {}), {} entries -> {}",
        job.metric,
        subset.len(),
        job.matrix.display(),
        m.rows(),
        m.cols(),
        subset.len() * (subset.len() - 1) / 2,
        job.out.display()
    ));
    if plan.finish(job.dry_run) {
        return Ok(());
    }
    let rdm = pool.install(|| compute_rdm(&m, &subset, job.metric)).runtime()?;
    save_rdm(&job.out, &rdm, job.step, job.kind).runtime()
}

pub fn count(corpus: &[PathBuf], out: Option<&Path>, lowercase: bool, threads: Option<usize>) -> CmdResult {
    if let Some(missing) = corpus.iter().find(|p| !p.is_file()) {
        return Err(Failure::Validation(anyhow!("cannot read {}", missing.display())));
    }
    let pool = local_pool(threads)?;
    let case = if lowercase {
        CaseMode::Lowercase
    } else {
        CaseMode::Sensitive
    };
    let counts = pool.install(|| count_corpus(corpus, case)).runtime()?;
    info!(
        "{} lines, {} distinct words, {} tokens",
        counts.lines,
        counts.table.len(),
        counts.table.total()
    );
    if counts.invalid_lines > 0 {
        warn!("skipped {} lines that were not valid UTF-8", counts.invalid_lines);
    }
    match out {
        Some(p) => counts.table.save(p).runtime(),
        None => {
            let stdout = std::io::stdout();
            let mut lock = std::io::BufWriter::new(stdout.lock());
            counts
                .table
                .write_tsv(&mut lock)
                .and_then(|_| lock.flush())
                .runtime()
        }
    }
}
