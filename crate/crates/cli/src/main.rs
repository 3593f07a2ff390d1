//! `dsm`: build, evaluate and compare distributional semantic models.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dsm_cli::config::Settings;
use dsm_cli::grid::{run_grid, GridConfig};
use dsm_cli::pipeline::{is_conllu, read_space, read_vocabulary, with_sentences};
use dsm_cli::runinfo::RunInfo;
use dsm_core::analysis::{
    best_report, best_report_markdown, dataset_correlation, dunn_test, kruskal_wallis, rank_scores,
    wilcoxon_signed_rank, Correction, Factor,
};
use dsm_core::cooccur::{extract_contexts, prune_contexts, ContextSpec, CooccurrenceMatrix};
use dsm_core::corpus::{
    build_vocabulary_with, subsample, write_conllu, write_plain, SubsampleConfig, VocabConfig,
};
use dsm_core::evalsuite::{evaluate, load_suite, KmeansOptions};
use dsm_core::ledger::{append_ledger, read_ledger, EvalResult};
use dsm_core::randindex::{make_index_vectors, train_ri, RiConfig};
use dsm_core::reweight::{log_entropy, ppmi, truncated_svd, WeightedMatrix};
use dsm_core::rsa::{rsa_report, sample_strata, SamplePlan, Stratum};
use dsm_core::vecspace::{pool_tokens, EmbeddingSpace, TokenVectorFile};

#[derive(Parser)]
#[command(name = "dsm", version, about = "Build, evaluate and compare distributional semantic models")]
struct Cli {
    /// TOML config file; keys of the `[<subcommand>]` table apply, flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count word frequencies and write a vocabulary file.
    Vocab(VocabArgs),
    /// Randomly drop frequent tokens from a corpus.
    Subsample(SubsampleArgs),
    /// Extract a target × context co-occurrence matrix.
    Cooc(CoocArgs),
    /// Reweight a co-occurrence matrix with positive PMI.
    Ppmi(PpmiArgs),
    /// Reweight a co-occurrence matrix with log-entropy.
    Logent(LogentArgs),
    /// Reduce a weighted matrix to dense embeddings.
    Svd(SvdArgs),
    /// Train Random Indexing embeddings.
    Ri(RiArgs),
    /// Average token vectors into type vectors.
    Pool(PoolArgs),
    /// Print the nearest neighbours of a word.
    Neighbors(NeighborsArgs),
    /// Score a space on a benchmark suite.
    Eval(EvalArgs),
    /// Compare spaces by representational similarity analysis.
    Rsa(RsaArgs),
    /// Kruskal-Wallis and Dunn tests over ledger ranks.
    Stats(StatsArgs),
    /// Best model per dataset and the dataset correlation matrix.
    Report(ReportArgs),
    /// Evaluate every model of a grid file on every dataset.
    Grid(GridArgs),
}

#[derive(Args)]
struct VocabArgs {
    /// Corpus files (plain text, or CoNLL-U by extension).
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Share of occurrences needed for a majority POS tag.
    #[arg(long)]
    pos_majority: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SubsampleArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoocArgs {
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// window2, window10, dep-filtered, dep-typed or document.
    #[arg(long)]
    context: Option<String>,
    /// Keep the N most frequent contexts.
    #[arg(long)]
    top_k: Option<usize>,
    /// Minimum frequency of typed dependency contexts.
    #[arg(long)]
    typed_min_freq: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PpmiArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Context-distribution smoothing exponent.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LogentArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SvdArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model id stored with the space, e.g. SVD.w2.300.
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RiArgs {
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Non-zero entries per index vector.
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    permute: bool,
    #[arg(long)]
    dynamic_weighting: bool,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PoolArgs {
    /// Token vector TSV.
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NeighborsArgs {
    space: PathBuf,
    word: String,
    #[arg(short, long)]
    k: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    space: PathBuf,
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Append results to this JSON-lines ledger.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Overrides the model id stored with the space.
    #[arg(long)]
    model_id: Option<String>,
    /// Seed for categorization clustering.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RsaArgs {
    #[arg(long, num_args = 2..)]
    spaces: Vec<PathBuf>,
    /// Vocabulary used to draw the word samples.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// global, freq_high, freq_mid, freq_low, pos_high_<tag> or pos_mid_<tag>.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV matrix of mean correlations.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Per-sample JSON-lines records.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// model, context or dim.
    #[arg(long)]
    factor: Option<String>,
    /// Significance level for the dot matrix.
    #[arg(long)]
    alpha: Option<f64>,
    /// Wilcoxon signed-rank test between two models over shared datasets.
    #[arg(long, num_args = 2, value_names = ["MODEL_A", "MODEL_B"])]
    pair: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Write the best-model table as Markdown.
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Write the dataset correlation matrix as CSV.
    #[arg(long)]
    correlations: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid file; defaults to `--config`.
    grid: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Vocab(a) => vocab(a, Settings::load(cfg, "vocab")?),
        Command::Subsample(a) => subsample_cmd(a, Settings::load(cfg, "subsample")?),
        Command::Cooc(a) => cooc(a, Settings::load(cfg, "cooc")?),
        Command::Ppmi(a) => ppmi_cmd(a, Settings::load(cfg, "ppmi")?),
        Command::Logent(a) => logent(a, Settings::load(cfg, "logent")?),
        Command::Svd(a) => svd(a, Settings::load(cfg, "svd")?),
        Command::Ri(a) => ri(a, Settings::load(cfg, "ri")?),
        Command::Pool(a) => pool(a, Settings::load(cfg, "pool")?),
        Command::Neighbors(a) => neighbors(a, Settings::load(cfg, "neighbors")?),
        Command::Eval(a) => eval(a, Settings::load(cfg, "eval")?),
        Command::Rsa(a) => rsa(a, Settings::load(cfg, "rsa")?),
        Command::Stats(a) => stats(a, Settings::load(cfg, "stats")?),
        Command::Report(a) => report(a, Settings::load(cfg, "report")?),
        Command::Grid(a) => grid(a, cfg),
    }
}

fn record(command: &str, s: &Settings, inputs: &[PathBuf], out: &Path) -> Result<()> {
    RunInfo::new(command, s.resolved(), inputs)?.write_for(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn vocab(a: VocabArgs, s: Settings) -> Result<()> {
    let corpus: Vec<PathBuf> = s.list("corpus", a.corpus)?;
    let cfg = VocabConfig {
        min_count: s.pick("min_count", a.min_count, VocabConfig::default().min_count)?,
        pos_majority: s.pick("pos_majority", a.pos_majority, VocabConfig::default().pos_majority)?,
    };
    let out: PathBuf = s.require("out", a.out)?;
    let v = with_sentences(&corpus, |st| build_vocabulary_with(st, cfg))?;
    v.save(&out)?;
    eprintln!("{} types, {} tokens", v.len(), v.total_tokens());
    record("vocab", &s, &corpus, &out)
}

fn subsample_cmd(a: SubsampleArgs, s: Settings) -> Result<()> {
    let corpus: PathBuf = s.require("corpus", a.corpus)?;
    let vocab_path: PathBuf = s.require("vocab", a.vocab)?;
    let def = SubsampleConfig::default();
    let cfg = SubsampleConfig {
        threshold: s.pick("threshold", a.threshold, def.threshold)?,
        seed: s.pick("seed", a.seed, def.seed)?,
    };
    let out: PathBuf = s.require("out", a.out)?;
    let v = read_vocabulary(&vocab_path)?;
    let mut w = create(&out)?;
    let conllu = is_conllu(&corpus);
    with_sentences(std::slice::from_ref(&corpus), |st| {
        let kept = subsample(st, &v, cfg)?;
        if conllu {
            write_conllu(&mut w, kept)
        } else {
            write_plain(&mut w, kept)
        }
    })?;
    w.flush()?;
    record("subsample", &s, &[corpus, vocab_path], &out)
}

fn cooc(a: CoocArgs, s: Settings) -> Result<()> {
    let corpus: Vec<PathBuf> = s.list("corpus", a.corpus)?;
    let vocab_path: PathBuf = s.require("vocab", a.vocab)?;
    let context: String = s.pick("context", a.context, "window2".into())?;
    let mut spec = ContextSpec::from_name(&context)?;
    spec.typed_min_freq = s.pick("typed_min_freq", a.typed_min_freq, spec.typed_min_freq)?;
    let top_k: Option<usize> = s.pick_opt("top_k", a.top_k)?;
    let out: PathBuf = s.require("out", a.out)?;
    let v = read_vocabulary(&vocab_path)?;
    let mut m = with_sentences(&corpus, |st| extract_contexts(st, &v, spec))?;
    if let Some(k) = top_k {
        m = prune_contexts(&m, k)?;
    }
    m.write(&out)?;
    eprintln!("{} × {} matrix, {} non-zero cells", m.targets().len(), m.contexts().len(), m.nnz());
    let mut inputs = corpus;
    inputs.push(vocab_path);
    record("cooc", &s, &inputs, &out)
}

fn read_counts(path: &Path) -> Result<CooccurrenceMatrix> {
    CooccurrenceMatrix::read(path).with_context(|| format!("reading matrix {}", path.display()))
}

fn ppmi_cmd(a: PpmiArgs, s: Settings) -> Result<()> {
    let matrix: PathBuf = s.require("matrix", a.matrix)?;
    let alpha = s.pick("alpha", a.alpha, dsm_core::reweight::DEFAULT_ALPHA)?;
    let out: PathBuf = s.require("out", a.out)?;
    ppmi(&read_counts(&matrix)?, alpha)?.write(&out)?;
    record("ppmi", &s, &[matrix], &out)
}

fn logent(a: LogentArgs, s: Settings) -> Result<()> {
    let matrix: PathBuf = s.require("matrix", a.matrix)?;
    let out: PathBuf = s.require("out", a.out)?;
    log_entropy(&read_counts(&matrix)?)?.write(&out)?;
    record("logent", &s, &[matrix], &out)
}

fn svd(a: SvdArgs, s: Settings) -> Result<()> {
    let matrix: PathBuf = s.require("matrix", a.matrix)?;
    let dim = s.pick("dim", a.dim, 300usize)?;
    let seed = s.pick("seed", a.seed, 0u64)?;
    let model_id: Option<String> = s.pick_opt("model_id", a.model_id)?;
    let out: PathBuf = s.require("out", a.out)?;
    let w = WeightedMatrix::read(&matrix).with_context(|| format!("reading matrix {}", matrix.display()))?;
    let mut space = truncated_svd(&w, dim, seed)?;
    if let Some(id) = model_id {
        space.meta.model_id = id;
    }
    space.export_text(&out)?;
    record("svd", &s, &[matrix], &out)
}

fn ri(a: RiArgs, s: Settings) -> Result<()> {
    let corpus: Vec<PathBuf> = s.list("corpus", a.corpus)?;
    let vocab_path: PathBuf = s.require("vocab", a.vocab)?;
    let dim = s.pick("dim", a.dim, 2000usize)?;
    let delta = s.pick("delta", a.delta, dsm_core::randindex::DEFAULT_DELTA)?;
    let seed = s.pick("seed", a.seed, 0u64)?;
    let cfg = RiConfig {
        window_radius: s.pick("window", a.window, 2usize)?,
        permute: s.switch("permute", a.permute)?,
        dynamic_weighting: s.switch("dynamic_weighting", a.dynamic_weighting)?,
        theta: s.pick("theta", a.theta, dsm_core::randindex::DEFAULT_THETA)?,
    };
    let out: PathBuf = s.require("out", a.out)?;
    let v = read_vocabulary(&vocab_path)?;
    let idx = make_index_vectors(&v, dim, delta, seed)?;
    let space = with_sentences(&corpus, |st| train_ri(st, &v, &idx, cfg))?;
    space.export_text(&out)?;
    let mut inputs = corpus;
    inputs.push(vocab_path);
    record("ri", &s, &inputs, &out)
}

fn pool(a: PoolArgs, s: Settings) -> Result<()> {
    let tokens: PathBuf = s.require("tokens", a.tokens)?;
    let model_id: Option<String> = s.pick_opt("model_id", a.model_id)?;
    let out: PathBuf = s.require("out", a.out)?;
    let tv = TokenVectorFile::load(&tokens)?;
    let mut space = pool_tokens(&tv)?;
    if let Some(id) = model_id {
        space.meta.model_id = id;
    }
    space.export_text(&out)?;
    record("pool", &s, &[tokens], &out)
}

fn neighbors(a: NeighborsArgs, s: Settings) -> Result<()> {
    let k = s.pick("k", a.k, 10usize)?;
    let space = read_space(&a.space)?;
    let mut out = io::stdout().lock();
    for n in space.nearest_to_word(&a.word, k)? {
        writeln!(out, "{}\t{}\t{:.6}", n.rank, n.word, n.score)?;
    }
    Ok(())
}

fn print_results(results: &[EvalResult]) -> Result<()> {
    let mut out = io::stdout().lock();
    for r in results {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.3}",
            r.model, r.dataset, r.task, r.metric, r.score, r.coverage
        )?;
    }
    Ok(())
}

fn eval(a: EvalArgs, s: Settings) -> Result<()> {
    let suite_dir: PathBuf = s.require("suite", a.suite)?;
    let ledger: Option<PathBuf> = s.pick_opt("ledger", a.ledger)?;
    let model_id: Option<String> = s.pick_opt("model_id", a.model_id)?;
    let kmeans = KmeansOptions {
        seed: s.pick("seed", a.seed, 0u64)?,
        ..KmeansOptions::default()
    };
    let mut space = read_space(&a.space)?;
    if let Some(id) = model_id {
        space.meta.model_id = id;
    }
    let suite = load_suite(&suite_dir)?;
    let mut results = Vec::new();
    for ds in &suite {
        match evaluate(&space, ds, kmeans) {
            Ok(r) => results.push(r),
            Err(e) => log::warn!("{}: {e}", ds.name),
        }
    }
    print_results(&results)?;
    if let Some(l) = ledger {
        append_ledger(&l, &results)?;
    }
    Ok(())
}

fn rsa(a: RsaArgs, s: Settings) -> Result<()> {
    let paths: Vec<PathBuf> = s.list("spaces", a.spaces)?;
    if paths.len() < 2 {
        bail!("rsa needs at least two spaces");
    }
    let vocab_path: PathBuf = s.require("vocab", a.vocab)?;
    let scheme: String = s.pick("scheme", a.scheme, "global".into())?;
    let stratum: Stratum = scheme.parse()?;
    let seed = s.pick("seed", a.seed, 0u64)?;
    let mut plan = SamplePlan::new(stratum, seed);
    let n = s.pick("samples", a.samples, plan.n_samples)?;
    let size = s.pick("size", a.size, plan.sample_size)?;
    plan = plan.scaled(n, size);
    let out: Option<PathBuf> = s.pick_opt("out", a.out)?;
    let records: Option<PathBuf> = s.pick_opt("records", a.records)?;

    let v = read_vocabulary(&vocab_path)?;
    let samples = sample_strata(&v, &plan)?;
    let spaces: Vec<EmbeddingSpace> = paths.iter().map(|p| read_space(p)).collect::<Result<_>>()?;
    let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
    let report = rsa_report(&refs, &samples)?;
    for sm in &report.summaries {
        println!(
            "{}\t{}\tmean={:.4}\tmedian={:.4}\tsd={:.4}\tn={}",
            sm.space_a, sm.space_b, sm.mean, sm.median, sm.sd, sm.n_samples
        );
    }
    if let Some((mean, median, sd)) = report.overall() {
        println!("overall\tmean={mean:.4}\tmedian={median:.4}\tsd={sd:.4}");
    }
    let mut inputs = paths;
    inputs.push(vocab_path);
    if let Some(p) = &out {
        let mut w = create(p)?;
        report.write_csv(&mut w)?;
        w.flush()?;
        record("rsa", &s, &inputs, p)?;
    }
    if let Some(p) = &records {
        let mut w = create(p)?;
        report.write_jsonl(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn load_ledger(path: &Path) -> Result<Vec<EvalResult>> {
    let l = read_ledger(path).with_context(|| format!("reading ledger {}", path.display()))?;
    if l.is_empty() {
        bail!("ledger {} is empty", path.display());
    }
    Ok(l)
}

fn stats(a: StatsArgs, s: Settings) -> Result<()> {
    let ledger_path: PathBuf = s.require("ledger", a.ledger)?;
    let factor: Factor = s.pick("factor", a.factor, "model".into())?.parse::<Factor>()?;
    let alpha = s.pick("alpha", a.alpha, 0.05)?;
    let ledger = load_ledger(&ledger_path)?;
    if let [x, y] = a.pair.as_slice() {
        return wilcoxon_pair(&ledger, x, y);
    }
    let table = rank_scores(&ledger)?;
    let groups: Vec<(String, Vec<f64>)> = table.group_by(factor).into_iter().collect();
    println!("ranks: average ranks for ties, 1 = best");
    let values: Vec<Vec<f64>> = groups.iter().map(|g| g.1.clone()).collect();
    let mut kw = kruskal_wallis(&values)?;
    kw.factor = Some(factor.to_string());
    println!("Kruskal-Wallis ({factor}): {kw}");
    if groups.len() > 2 {
        let dunn = dunn_test(&groups, Correction::Bonferroni)?;
        println!("\nDunn, Bonferroni-adjusted p:\n{}", dunn.p_matrix());
        println!("significant at {alpha} (● yes, ○ no):\n{}", dunn.significance_dots(alpha));
    }
    Ok(())
}

fn wilcoxon_pair(ledger: &[EvalResult], x: &str, y: &str) -> Result<()> {
    let score = |m: &str, d: &str| ledger.iter().find(|r| r.model == m && r.dataset == d).map(|r| r.score);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in ledger {
        if seen.insert(r.dataset.as_str()) {
            if let (Some(a), Some(b)) = (score(x, &r.dataset), score(y, &r.dataset)) {
                xs.push(a);
                ys.push(b);
            }
        }
    }
    let w = wilcoxon_signed_rank(&xs, &ys)?;
    println!("{x} vs {y} over {} datasets: {w}", xs.len());
    Ok(())
}

fn report(a: ReportArgs, s: Settings) -> Result<()> {
    let ledger_path: PathBuf = s.require("ledger", a.ledger)?;
    let markdown: Option<PathBuf> = s.pick_opt("markdown", a.markdown)?;
    let correlations: Option<PathBuf> = s.pick_opt("correlations", a.correlations)?;
    let ledger = load_ledger(&ledger_path)?;
    let best = best_report(&ledger);
    for b in &best {
        println!("{b}");
    }
    if let Some(p) = markdown {
        std::fs::write(&p, best_report_markdown(&best)).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = correlations {
        let mut w = create(&p)?;
        dataset_correlation(&ledger).write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn grid(a: GridArgs, config: Option<&Path>) -> Result<()> {
    let path = a
        .grid
        .as_deref()
        .or(config)
        .context("grid needs a grid file (positional or --config)")?;
    let cfg = GridConfig::load(path)?;
    let summary = run_grid(&cfg)?;
    RunInfo::new("grid", [("grid".to_string(), serde_json::to_value(&cfg)?)].into(), &[path.to_path_buf()])?
        .write_for(&cfg.ledger)?;
    println!(
        "evaluated {}, skipped {}, failed {}",
        summary.evaluated, summary.skipped, summary.failed
    );
    Ok(())
}
