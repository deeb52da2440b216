use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anchorhull::anchors::AnchorMethod;
use anchorhull::corpus::{default_stopwords, parse_stopwords, CurationConfig};
use anchorhull::pipeline::{self, PipelineConfig, VizFormat, Workspace};
use anchorhull::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "anchorhull",
    version,
    about = "Anchor-word topic models from convex hulls of word embeddings"
)]
struct Cli {
    /// Directory holding the stage artifacts.
    #[arg(long, global = true, default_value = "anchorhull-out")]
    work_dir: PathBuf,
    /// Seed for the held-out split, embeddings and the held-out estimator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Use upstream artifacts even when they come from a different configuration.
    #[arg(long, global = true)]
    allow_mixed: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize, curate and split a corpus (one document per line).
    Ingest(CurationArgs),
    /// Build the co-occurrence matrix from the ingested corpus.
    Cooccur,
    /// Embed the co-occurrence rows.
    Embed(EmbedArgs),
    /// Select anchor words from the embedding.
    Anchors {
        #[command(flatten)]
        method: MethodArg,
        /// Anchor count for the greedy method.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Recover a K-topic model.
    Recover {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Score the recovered model.
    Metrics(MetricArgs),
    /// Run every stage.
    Pipeline(FullArgs),
    /// Metrics for several K from one anchor list, written to sweep.csv.
    Sweep {
        #[command(flatten)]
        full: FullArgs,
        /// Inclusive range `lo:hi` or a comma-separated list.
        #[arg(long)]
        k_range: String,
    },
    /// Anchor overlap across seeds, written to stability.json.
    Stability {
        #[command(flatten)]
        full: FullArgs,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Export the embedding and the anchor hull.
    Viz {
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodName {
    Tsne,
    Pca,
    Greedy,
}

impl From<MethodName> for AnchorMethod {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Tsne => AnchorMethod::HullTsne,
            MethodName::Pca => AnchorMethod::HullPca,
            MethodName::Greedy => AnchorMethod::Greedy,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Svg,
}

#[derive(Args, Debug, Clone)]
struct MethodArg {
    #[arg(long, value_enum, default_value_t = MethodName::Tsne)]
    method: MethodName,
}

#[derive(Args, Debug, Clone)]
struct CurationArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// One stopword per line; the bundled English list by default.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    min_freq: u64,
    #[arg(long, default_value_t = 10)]
    min_doc_length: usize,
    #[arg(long, default_value_t = 3)]
    anchor_min_docs: u64,
    #[arg(long, default_value_t = 0.05)]
    holdout: f64,
}

#[derive(Args, Debug, Clone)]
struct EmbedArgs {
    #[command(flatten)]
    method: MethodArg,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    tsne_iters: usize,
    #[arg(long, default_value_t = 1000)]
    projection_dim: usize,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    #[arg(long, default_value_t = 10)]
    particles: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-5)]
    smooth: f64,
    #[arg(long, default_value_t = 8)]
    coherence_top: usize,
    #[arg(long, default_value_t = 1.0)]
    coherence_eps: f64,
}

#[derive(Args, Debug, Clone)]
struct FullArgs {
    #[command(flatten)]
    curation: CurationArgs,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    metrics: MetricArgs,
}

fn curation(args: &CurationArgs, seed: u64) -> Result<CurationConfig> {
    let stopwords = match &args.stopwords {
        Some(p) => parse_stopwords(&std::fs::read_to_string(p)?),
        None => default_stopwords(),
    };
    Ok(CurationConfig {
        stopwords,
        min_corpus_freq: args.min_freq,
        min_doc_length: args.min_doc_length,
        anchor_min_doc_freq: args.anchor_min_docs,
        holdout_frac: args.holdout,
        seed,
        drop_numeric: true,
    })
}

impl Cli {
    fn base_config(&self, corpus: PathBuf) -> PipelineConfig {
        let mut c = PipelineConfig::new(corpus, &self.work_dir).with_seed(self.seed);
        c.allow_mixed = self.allow_mixed;
        c
    }

    fn apply_embed(c: &mut PipelineConfig, e: &EmbedArgs) {
        c.method = e.method.method.into();
        c.dim = e.dim;
        c.tsne.perplexity = e.perplexity;
        c.tsne.max_iter = e.tsne_iters;
        c.projection_dim = e.projection_dim;
    }

    fn apply_solver(c: &mut PipelineConfig, s: &SolverArgs) {
        c.solver.tol = s.tol;
        c.solver.max_iter = s.max_iter;
    }

    fn apply_metrics(c: &mut PipelineConfig, m: &MetricArgs) {
        c.metrics.particles = m.particles;
        c.metrics.alpha = m.alpha;
        c.metrics.smoothing = m.smooth;
        c.metrics.coherence_top = m.coherence_top;
        c.metrics.coherence_eps = m.coherence_eps;
    }

    fn full_config(&self, f: &FullArgs) -> Result<PipelineConfig> {
        let mut c = self.base_config(f.curation.corpus.clone());
        c.curation = curation(&f.curation, self.seed)?;
        Self::apply_embed(&mut c, &f.embed);
        Self::apply_solver(&mut c, &f.solver);
        Self::apply_metrics(&mut c, &f.metrics);
        c.k = f.k;
        Ok(c)
    }

    /// Configuration for single-stage commands, which read their inputs from the work directory.
    fn stage_config(&self) -> PipelineConfig {
        self.base_config(PathBuf::new())
    }
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse K range {s:?}"));
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let ws = || Workspace::new(&cli.work_dir, cli.allow_mixed);
    match &cli.command {
        Command::Ingest(args) => {
            let art = ws()?.ingest(&args.corpus, &curation(args, cli.seed)?)?;
            println!(
                "{} words, {} training documents, {} held out",
                art.vocabulary.len(),
                art.split.train.len(),
                art.split.heldout.len()
            );
        }
        Command::Cooccur => {
            let ws = ws()?;
            let corpus = ws.load_corpus()?;
            let art = ws.cooccur(&corpus)?;
            println!(
                "{} words, {} without co-occurrences",
                art.stats.vocab_size(),
                art.stats.zero_rows.len()
            );
        }
        Command::Embed(args) => {
            let ws = ws()?;
            let cooc = ws.load_cooccur()?;
            let mut c = cli.stage_config();
            Cli::apply_embed(&mut c, args);
            let art = ws.embed(&cooc, &c.embed_config())?;
            println!("{} embedding, {} dimensions", art.embedding.method, art.embedding.dim());
        }
        Command::Anchors { method, k } => {
            let ws = ws()?;
            let (corpus, cooc, emb) = (ws.load_corpus()?, ws.load_cooccur()?, ws.load_embedding()?);
            let mut c = cli.stage_config();
            c.method = method.method.into();
            let art = ws.anchors(&corpus, &cooc, &emb, &c.anchor_config(*k))?;
            let tokens: Vec<&str> = art.anchors.iter().map(|a| a.token.as_str()).collect();
            println!("{} anchors: {}", art.anchors.len(), tokens.join(" "));
        }
        Command::Recover { k, solver } => {
            let ws = ws()?;
            let (cooc, anchors) = (ws.load_cooccur()?, ws.load_anchors()?);
            let mut c = cli.stage_config();
            Cli::apply_solver(&mut c, solver);
            let art = ws.recover(&cooc, &anchors, &c.recover_config(*k))?;
            println!(
                "{} topics, {} words reached the solver tolerance",
                art.model.num_topics(),
                art.model.diagnostics.converged.iter().filter(|c| **c).count()
            );
        }
        Command::Metrics(args) => {
            let ws = ws()?;
            let (corpus, cooc, model) = (ws.load_corpus()?, ws.load_cooccur()?, ws.load_model()?);
            let mut c = cli.stage_config();
            Cli::apply_metrics(&mut c, args);
            let art = ws.metrics(&corpus, &cooc, &model, &c.metrics)?;
            println!("{}", serde_json::to_string_pretty(&art.report)?);
        }
        Command::Pipeline(full) => {
            let out = pipeline::run_pipeline(&cli.full_config(full)?)?;
            println!("{}", serde_json::to_string_pretty(&out.metrics.report)?);
        }
        Command::Sweep { full, k_range } => {
            let ks = parse_k_range(k_range)?;
            let rows = pipeline::sweep_k(&cli.full_config(full)?, &ks)?;
            println!(
                "{} rows written to {}",
                rows.len(),
                cli.work_dir.join(pipeline::SWEEP_FILE).display()
            );
        }
        Command::Stability { full, seeds } => {
            let report = pipeline::stability(&cli.full_config(full)?, *seeds)?;
            println!(
                "vertex counts {:?}; {} words shared by at least {} runs",
                report.vertex_counts,
                report.shared.len(),
                report.min_runs
            );
        }
        Command::Viz { format, output } => {
            let ws = ws()?;
            let (corpus, emb, anchors) = (ws.load_corpus()?, ws.load_embedding()?, ws.load_anchors()?);
            ws.check_lineage(&anchors.header, &emb.header)?;
            let format = match format {
                FormatArg::Json => VizFormat::Json,
                FormatArg::Svg => VizFormat::Svg,
            };
            let scene = pipeline::viz_export(
                &emb.embedding,
                &anchors.anchor_set(),
                corpus.vocabulary.tokens(),
                format,
                output,
            )?;
            println!(
                "{} hull vertices written to {}",
                scene.hull_vertices.len(),
                output.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::InvalidArgument(_) if !matches!(e, Error::Stage { .. }) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
