mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::UsageError;
use manifest::Run;
use skillknn::corpus::{self, FrequencyBuckets, TaggedCorpus};
use skillknn::datastore::{self, Datastore};
use skillknn::embedio::{self, DistributionTable, EmbeddingMatrix};
use skillknn::evalkit::{self, EvalReport, MatchMode, ReportFormat};
use skillknn::knn::{self, KnnConfig, SearchSpace};
use skillknn::weakmatch::{self, IdfTable, MatchConfig, RepresentationMethod};

#[derive(Debug, Parser)]
#[command(
    name = "skillknn",
    version,
    about = "Retrieval-augmented skill span extraction",
    after_help = "Any subcommand accepts --config FILE: a JSON object keyed by long flag names. Flags on the command line take precedence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sentence, token and span counts per corpus
    Stats(StatsArgs),
    /// Build a datastore from tagged corpora and their token embeddings
    BuildStore(BuildStoreArgs),
    /// Tag a corpus by mixing base distributions with neighbor labels
    Infer(InferArgs),
    /// Score every (k, lambda, T) combination on a dev corpus
    GridSearch(GridSearchArgs),
    /// Tag a corpus by cosine matching against skill representations
    Weakmatch(WeakmatchArgs),
    /// Strict and loose span-F1 of predictions against gold tags
    Evaluate(EvaluateArgs),
    /// Jaccard overlap of span surface sets between corpora
    Overlap(OverlapArgs),
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    /// CoNLL corpus; repeat for several
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    /// Merge a second tag column into the first
    #[arg(long)]
    merge: bool,
    /// Table output (.json or .csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BuildStoreArgs {
    /// CoNLL corpus; repeat, paired in order with --embeddings
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    /// SKV1 token embeddings for the corpus at the same position
    #[arg(long, required = true)]
    embeddings: Vec<PathBuf>,
    #[arg(long)]
    merge: bool,
    /// Fit a whitening transform on all keys and store whitened keys
    #[arg(long)]
    whiten: bool,
    /// Inverted-file centroids, capped at the number of entries
    #[arg(long, default_value_t = datastore::DEFAULT_CENTROIDS)]
    centroids: usize,
    /// Skip the inverted-file index; searches will be exhaustive
    #[arg(long)]
    no_index: bool,
    /// Seed for k-means initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct StoreQuery {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// SKV1 base-model distributions (columns B, I, O)
    #[arg(long)]
    distributions: PathBuf,
    #[arg(long)]
    merge: bool,
    /// Lists to probe, or "flat" for exhaustive search [default: 32 when indexed, else flat]
    #[arg(long)]
    nprobe: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct InferArgs {
    #[command(flatten)]
    #[serde(flatten)]
    query: StoreQuery,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    temperature: f64,
    /// Predicted tags in CoNLL
    #[arg(long)]
    out: PathBuf,
    /// Strict and loose report against the corpus tags (.json or .csv)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GridSearchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    query: StoreQuery,
    /// JSON object with "k", "lambda" and "T" lists [default: 6 x 17 x 7 space]
    #[arg(long)]
    space: Option<PathBuf>,
    /// CSV with one row per configuration
    #[arg(long)]
    out: PathBuf,
    /// Also write the best configuration as JSON
    #[arg(long)]
    best: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct WeakmatchArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// SKV1 token embeddings of the corpus
    #[arg(long)]
    embeddings: PathBuf,
    /// SKV1 skill representation rows
    #[arg(long)]
    skills: PathBuf,
    /// Sidecar with one `id` or `id<TAB>token` line per skill row
    #[arg(long)]
    skill_ids: PathBuf,
    /// iso, aoc or wse
    #[arg(long, default_value = "iso")]
    method: String,
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    ngram_min: usize,
    #[arg(long, default_value_t = 4)]
    ngram_max: usize,
    /// Corpus for idf counts [default: --corpus]
    #[arg(long)]
    idf_corpus: Option<PathBuf>,
    /// Fail on tokens missing from the idf corpus instead of smoothing
    #[arg(long)]
    strict_idf: bool,
    #[arg(long)]
    merge: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Predictions with the same tokens as --gold
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    merge: bool,
    /// Training corpus; adds reports per surface-frequency bucket
    #[arg(long)]
    train: Option<PathBuf>,
    /// Lower bounds of the mid-low, mid-high and high buckets
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [4usize, 7, 11])]
    bucket_bounds: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bucket report output; needs --train
    #[arg(long)]
    bucket_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct OverlapArgs {
    #[arg(long, required = true, num_args = 1)]
    corpus: Vec<PathBuf>,
    /// Only spans with at least this many tokens enter the sets
    #[arg(long, default_value_t = 2)]
    min_span_tokens: usize,
    #[arg(long)]
    merge: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match config::resolve_args(std::env::args_os()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad flags or parameter values, 2 for unreadable or inconsistent data.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<skillknn::Error>() {
            return match e {
                skillknn::Error::Parameter(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(a) => stats(&a),
        Command::BuildStore(a) => build_store(&a),
        Command::Infer(a) => infer(&a),
        Command::GridSearch(a) => grid_search(&a),
        Command::Weakmatch(a) => weak_match(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Overlap(a) => overlap(&a),
    }
}

fn load_corpus(path: &Path, merge: bool) -> Result<TaggedCorpus> {
    TaggedCorpus::load(path, merge).with_context(|| format!("loading corpus {}", path.display()))
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    embedio::read_embeddings(path).with_context(|| format!("loading embeddings {}", path.display()))
}

fn load_distributions(path: &Path) -> Result<DistributionTable> {
    embedio::read_distributions(path).with_context(|| format!("loading distributions {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `text` to `path` and its manifest beside it.
fn emit<C: Serialize>(run: &Run<'_, C>, path: &Path, text: &str) -> Result<()> {
    write_text(path, text)?;
    run.write(path)?;
    Ok(())
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Renders rows of string cells as a JSON array of objects or as CSV.
fn render_table(header: &[&str], rows: &[Vec<Cell>], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = header.join(",");
            out.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Json => {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), c.json()))
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            let mut out = serde_json::to_string(&objects).expect("table serializes");
            out.push('\n');
            out
        }
    }
}

enum Cell {
    Text(String),
    Int(usize),
    Real(f64),
    Flag(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Real(x) => format!("{x:.4}"),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => s.clone().into(),
            Cell::Int(n) => (*n).into(),
            Cell::Real(x) => round4(*x).into(),
            Cell::Flag(b) => (*b).into(),
        }
    }
}

fn stats(a: &StatsArgs) -> Result<()> {
    let paths: Vec<&Path> = a.corpus.iter().map(PathBuf::as_path).collect();
    let run = Run::new("stats", a, None, &paths)?;
    let mut rows = Vec::new();
    let (mut sentences, mut tokens, mut spans, mut span_tokens) = (0, 0, 0, 0.0);
    for path in &a.corpus {
        let c = load_corpus(path, a.merge)?;
        let s = corpus::corpus_stats(&c);
        sentences += s.sentences;
        tokens += s.tokens;
        spans += s.spans;
        span_tokens += s.mean_span_length * s.spans as f64;
        rows.push(vec![
            Cell::Text(path.display().to_string()),
            Cell::Int(s.sentences),
            Cell::Int(s.tokens),
            Cell::Int(s.spans),
            Cell::Real(s.mean_span_length),
        ]);
    }
    let mean = if spans == 0 { 0.0 } else { span_tokens / spans as f64 };
    rows.push(vec![
        Cell::Text("total".into()),
        Cell::Int(sentences),
        Cell::Int(tokens),
        Cell::Int(spans),
        Cell::Real(mean),
    ]);
    let header = ["corpus", "sentences", "tokens", "spans", "mean_span_length"];
    print!("{}", render_table(&header, &rows, ReportFormat::Csv));
    if let Some(out) = &a.out {
        emit(&run, out, &render_table(&header, &rows, ReportFormat::from_path(out)))?;
    }
    Ok(())
}

fn build_store(a: &BuildStoreArgs) -> Result<()> {
    if a.corpus.len() != a.embeddings.len() {
        return Err(usage(format!(
            "{} corpora but {} embedding files; pass one --embeddings per --corpus",
            a.corpus.len(),
            a.embeddings.len()
        )));
    }
    let paths: Vec<&Path> = a.corpus.iter().chain(&a.embeddings).map(PathBuf::as_path).collect();
    let run = Run::new("build-store", a, Some(a.seed), &paths)?;
    let corpora = a
        .corpus
        .iter()
        .map(|p| load_corpus(p, a.merge))
        .collect::<Result<Vec<_>>>()?;
    let matrices = a.embeddings.iter().map(|p| load_embeddings(p)).collect::<Result<Vec<_>>>()?;
    let aligned = corpora
        .iter()
        .zip(&matrices)
        .zip(&a.corpus)
        .map(|((c, m), p)| embedio::align(c, m, None).with_context(|| format!("aligning {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut store = Datastore::build(&aligned, a.whiten)?;
    if !a.no_index {
        let centroids = a.centroids.min(store.len());
        if centroids < a.centroids {
            eprintln!("note: {} entries; using {centroids} centroids", store.len());
        }
        store.build_index(centroids, a.seed)?;
    }
    store.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    run.write(&a.out)?;
    println!("entries\t{}", store.len());
    println!("dims\t{}", store.dims());
    for (corpus, c) in a.corpus.iter().zip(&corpora) {
        println!("{}\t{}", corpus.display(), c.token_count());
    }
    if let Some(w) = store.whitening() {
        println!("whitening_clamped\t{}", w.clamp_count());
    }
    if let Some(index) = store.index() {
        println!("centroids\t{}", index.n_centroids());
    }
    Ok(())
}

/// Resolves `--nprobe`: a number, "flat", or a default based on the store.
fn resolve_nprobe(raw: Option<&str>, store: &Datastore) -> Result<Option<usize>> {
    match raw {
        Some(s) if s.eq_ignore_ascii_case("flat") => Ok(None),
        Some(s) => {
            let n: usize = s
                .parse()
                .map_err(|_| usage(format!("--nprobe expects a number or \"flat\", got {s:?}")))?;
            if store.index().is_none() {
                return Err(usage("--nprobe needs a store with an index; use --nprobe flat"));
            }
            Ok(Some(n))
        }
        None => Ok(store
            .index()
            .map(|idx| datastore::DEFAULT_NPROBE.min(idx.n_centroids()))),
    }
}

struct Loaded {
    store: Datastore,
    corpus: TaggedCorpus,
    embeddings: EmbeddingMatrix,
    distributions: DistributionTable,
    nprobe: Option<usize>,
}

fn load_query(q: &StoreQuery) -> Result<Loaded> {
    let store = Datastore::load(&q.store).with_context(|| format!("loading store {}", q.store.display()))?;
    let nprobe = resolve_nprobe(q.nprobe.as_deref(), &store)?;
    Ok(Loaded {
        store,
        corpus: load_corpus(&q.corpus, q.merge)?,
        embeddings: load_embeddings(&q.embeddings)?,
        distributions: load_distributions(&q.distributions)?,
        nprobe,
    })
}

fn query_inputs(q: &StoreQuery) -> [&Path; 4] {
    [&q.store, &q.corpus, &q.embeddings, &q.distributions]
}

fn both_reports(gold: &TaggedCorpus, pred: &TaggedCorpus) -> Result<Vec<EvalReport>> {
    let (g, p) = (gold.spans(), pred.spans());
    Ok(vec![
        evalkit::evaluate(&g, &p, MatchMode::Strict)?,
        evalkit::evaluate(&g, &p, MatchMode::Loose)?,
    ])
}

fn infer(a: &InferArgs) -> Result<()> {
    let run = Run::new("infer", a, None, &query_inputs(&a.query))?;
    let l = load_query(&a.query)?;
    let test = embedio::align(&l.corpus, &l.embeddings, Some(&l.distributions))?;
    let cfg = KnnConfig::new(a.k, a.lambda, a.temperature).with_nprobe(l.nprobe);
    let pred = knn::infer(&test, &l.store, &cfg)?;
    emit(&run, &a.out, &pred.to_conll())?;
    let reports = both_reports(&l.corpus, &pred)?;
    print!("{}", evalkit::render_reports(&reports, ReportFormat::Json));
    if let Some(path) = &a.report {
        emit(&run, path, &evalkit::render_reports(&reports, ReportFormat::from_path(path)))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BestConfig {
    k: usize,
    lambda: f64,
    #[serde(rename = "T")]
    temperature: f64,
    nprobe: Option<usize>,
    strict_f1: f64,
}

fn grid_search(a: &GridSearchArgs) -> Result<()> {
    let mut inputs = query_inputs(&a.query).to_vec();
    inputs.extend(a.space.as_deref());
    let run = Run::new("grid-search", a, None, &inputs)?;
    let space = match &a.space {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SearchSpace>(&text)
                .map_err(|e| usage(format!("search space {}: {e}", path.display())))?
        }
        None => SearchSpace::default(),
    };
    let l = load_query(&a.query)?;
    let dev = embedio::align(&l.corpus, &l.embeddings, Some(&l.distributions))?;
    let result = knn::grid_search(&dev, &l.store, &space, l.nprobe)?;
    emit(&run, &a.out, &evalkit::render_grid_csv(&result.rows))?;
    let best = BestConfig {
        k: result.best.k,
        lambda: result.best.lambda,
        temperature: result.best.temperature,
        nprobe: result.best.nprobe,
        strict_f1: round4(result.best_report.f1),
    };
    let mut text = serde_json::to_string(&best)?;
    text.push('\n');
    print!("{text}");
    eprintln!("configurations\t{}", result.rows.len());
    if let Some(path) = &a.best {
        emit(&run, path, &text)?;
    }
    Ok(())
}

fn weak_match(a: &WeakmatchArgs) -> Result<()> {
    let method: RepresentationMethod = a.method.parse().map_err(|e: skillknn::Error| usage(e.to_string()))?;
    let mut inputs: Vec<&Path> = vec![&a.corpus, &a.embeddings, &a.skills, &a.skill_ids];
    inputs.extend(a.idf_corpus.as_deref());
    let run = Run::new("weakmatch", a, None, &inputs)?;
    let cfg = MatchConfig { min_n: a.ngram_min, max_n: a.ngram_max, threshold: a.tau };
    cfg.validate()?;

    let corpus = load_corpus(&a.corpus, a.merge)?;
    let tokens = load_embeddings(&a.embeddings)?;
    let vectors = load_embeddings(&a.skills)?;
    let labels = weakmatch::load_row_labels(&a.skill_ids)
        .with_context(|| format!("loading skill ids {}", a.skill_ids.display()))?;
    let idf = match method {
        RepresentationMethod::Wse => {
            let source = match &a.idf_corpus {
                Some(p) => load_corpus(p, a.merge)?,
                None => corpus.clone(),
            };
            let table = IdfTable::from_corpus(&source)?;
            Some(if a.strict_idf { table.strict() } else { table })
        }
        _ => None,
    };
    let skills = weakmatch::build_representations(method, &vectors, &labels, idf.as_ref())?;
    let smoothed: usize = skills.iter().map(|s| s.smoothed_tokens).sum();
    if smoothed > 0 {
        eprintln!("note: {smoothed} skill tokens were unseen in the idf corpus and weighted as single occurrences");
    }
    let (pred, matches) = weakmatch::match_corpus(&corpus, &tokens, &skills, &cfg)?;
    emit(&run, &a.out, &pred.to_conll())?;
    eprintln!(
        "matched_sentences\t{}/{}",
        matches.iter().filter(|m| m.best.is_some()).count(),
        matches.len()
    );
    let reports = both_reports(&corpus, &pred)?;
    print!("{}", evalkit::render_reports(&reports, ReportFormat::Json));
    if let Some(path) = &a.report {
        emit(&run, path, &evalkit::render_reports(&reports, ReportFormat::from_path(path)))?;
    }
    Ok(())
}

/// Fails unless both corpora hold the same tokens sentence by sentence.
fn check_same_tokens(gold: &TaggedCorpus, pred: &TaggedCorpus) -> Result<()> {
    if gold.sentences.len() != pred.sentences.len() {
        return Err(skillknn::Error::Alignment {
            what: "predicted sentences",
            expected: gold.sentences.len(),
            found: pred.sentences.len(),
        }
        .into());
    }
    for (i, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.tokens() != p.tokens() {
            return Err(skillknn::Error::Format(format!(
                "sentence {} has different tokens in gold and predictions",
                i + 1
            ))
            .into());
        }
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if a.bucket_out.is_some() && a.train.is_none() {
        return Err(usage("--bucket-out needs --train"));
    }
    let mut inputs: Vec<&Path> = vec![&a.gold, &a.pred];
    inputs.extend(a.train.as_deref());
    let run = Run::new("evaluate", a, None, &inputs)?;
    let gold = load_corpus(&a.gold, a.merge)?;
    let pred = load_corpus(&a.pred, a.merge)?;
    check_same_tokens(&gold, &pred)?;
    let reports = both_reports(&gold, &pred)?;
    print!("{}", evalkit::render_reports(&reports, ReportFormat::Json));
    if let Some(path) = &a.out {
        emit(&run, path, &evalkit::render_reports(&reports, ReportFormat::from_path(path)))?;
    }
    if let Some(train) = &a.train {
        let train = load_corpus(train, a.merge)?;
        let index = corpus::span_frequency_index(&train);
        let bounds: [usize; 3] = a.bucket_bounds.as_slice().try_into().map_err(|_| usage("--bucket-bounds takes three values"))?;
        let buckets = FrequencyBuckets::new(bounds)?;
        let spans = pred.spans();
        let mut rows = evalkit::bucketed_f1(&gold, &spans, &index, &buckets, MatchMode::Strict)?;
        rows.extend(evalkit::bucketed_f1(&gold, &spans, &index, &buckets, MatchMode::Loose)?);
        print!("{}", evalkit::render_bucket_reports(&rows, ReportFormat::Json));
        if let Some(path) = &a.bucket_out {
            emit(&run, path, &evalkit::render_bucket_reports(&rows, ReportFormat::from_path(path)))?;
        }
    }
    Ok(())
}

fn overlap(a: &OverlapArgs) -> Result<()> {
    if a.corpus.len() < 2 {
        return Err(usage("overlap needs at least two --corpus files"));
    }
    let paths: Vec<&Path> = a.corpus.iter().map(PathBuf::as_path).collect();
    let run = Run::new("overlap", a, None, &paths)?;
    let sets = a
        .corpus
        .iter()
        .map(|p| Ok(corpus::span_text_set(&load_corpus(p, a.merge)?, a.min_span_tokens)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let r = corpus::jaccard_overlap(&sets[i], &sets[j]);
            rows.push(vec![
                Cell::Text(a.corpus[i].display().to_string()),
                Cell::Text(a.corpus[j].display().to_string()),
                Cell::Int(r.intersection),
                Cell::Int(r.union),
                Cell::Real(r.coefficient),
                Cell::Flag(r.both_empty),
            ]);
        }
    }
    let header = ["a", "b", "intersection", "union", "jaccard", "both_empty"];
    print!("{}", render_table(&header, &rows, ReportFormat::Csv));
    if let Some(out) = &a.out {
        emit(&run, out, &render_table(&header, &rows, ReportFormat::from_path(out)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&usage("x")), 1);
        assert_eq!(exit_code(&anyhow::Error::from(skillknn::Error::Parameter("k".into()))), 1);
        let data = anyhow::Error::from(skillknn::Error::Format("bad".into())).context("loading");
        assert_eq!(exit_code(&data), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 2);
    }

    #[test]
    fn csv_cells_are_quoted() {
        assert_eq!(Cell::Text("a,b".into()).csv(), "\"a,b\"");
        assert_eq!(Cell::Real(1.0 / 3.0).csv(), "0.3333");
        assert_eq!(Cell::Real(1.0 / 3.0).json(), serde_json::json!(0.3333));
    }
}
