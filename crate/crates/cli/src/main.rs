use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use taxometer::adequacy::{nliv_cached, EdgeCache, Mode};
use taxometer::gateway::{ProviderConfig, Providers};
use taxometer::harness::{
    correlation_report, nli_verification, plot_csv, rate_score, read_records, run_study, study_vocabulary, RunOptions,
    StudyConfig, VerifyOptions,
};
use taxometer::mutation::{degrade, MutationKind};
use taxometer::robustness::{csc, semantic_proximity, PairPolicy, PairSample};
use taxometer::taxonomy::write_json;
use taxometer::{load_taxonomy, triplet_prf, Taxonomy, TaxonomyFormat};

#[derive(Parser)]
#[command(
    name = "taxometer",
    version,
    about = "Taxonomy quality metrics and degradation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a taxonomy against a gold standard or with a reference-free metric.
    Score(ScoreArgs),
    /// Apply random edge mutations and write the trace.
    Degrade(DegradeArgs),
    /// Degradation studies.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Print structural statistics.
    Stats(TaxonomyArgs),
}

#[derive(Args, Clone)]
struct TaxonomyArgs {
    /// Taxonomy file (.json or TSV edges).
    #[arg(long)]
    taxonomy: PathBuf,
    /// Override the format guessed from the extension.
    #[arg(long)]
    format: Option<TaxonomyFormat>,
    /// Gloss file for TSV edge lists.
    #[arg(long)]
    glosses: Option<PathBuf>,
}

impl TaxonomyArgs {
    fn load(&self) -> Result<Taxonomy> {
        load(&self.taxonomy, self.format, self.glosses.as_deref())
    }
}

fn load(path: &Path, format: Option<TaxonomyFormat>, glosses: Option<&Path>) -> Result<Taxonomy> {
    let format = format.unwrap_or_else(|| TaxonomyFormat::from_path(path));
    load_taxonomy(path, format, glosses).with_context(|| format!("loading {}", path.display()))
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mock,
    Files,
    Http,
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    provider: Backend,
    /// Seed for the mock backend.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embeddings JSONL for the files backend.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// NLI judgments JSONL for the files backend.
    #[arg(long)]
    nli: Option<PathBuf>,
    /// Fill-mask candidates JSONL for the files backend.
    #[arg(long)]
    fill_mask: Option<PathBuf>,
    /// Sidecar base URL for the http backend.
    #[arg(long)]
    url: Option<String>,
}

impl ProviderArgs {
    fn config(&self) -> Result<ProviderConfig> {
        Ok(match self.provider {
            Backend::Mock => ProviderConfig::Mock { seed: self.seed },
            Backend::Files => ProviderConfig::Files {
                embeddings: self
                    .embeddings
                    .clone()
                    .context("--embeddings is required with --provider files")?,
                nli: self.nli.clone().context("--nli is required with --provider files")?,
                fill_mask: self.fill_mask.clone(),
            },
            Backend::Http => ProviderConfig::Http { url: self.url.clone() },
        })
    }

    fn build(&self, t: &Taxonomy) -> Result<Providers> {
        let vocabulary = study_vocabulary(std::slice::from_ref(t));
        Ok(Providers::from_config(&self.config()?, &vocabulary)?)
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MetricArg {
    Csc,
    Sp,
    #[value(name = "nliv-s")]
    NlivS,
    #[value(name = "nliv-w")]
    NlivW,
    Rate,
}

#[derive(Args)]
struct ScoreArgs {
    /// Predicted taxonomy for reference-based scoring.
    #[arg(long, requires = "gold", conflicts_with_all = ["metric", "taxonomy"])]
    predicted: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, value_enum, requires = "taxonomy")]
    metric: Option<MetricArg>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    format: Option<TaxonomyFormat>,
    #[arg(long)]
    glosses: Option<PathBuf>,
    /// Seed for sampling concept pairs on large taxonomies.
    #[arg(long, default_value_t = 0)]
    pair_seed: u64,
    /// Candidates considered per prompt for rate.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct DegradeArgs {
    #[command(flatten)]
    taxonomy: TaxonomyArgs,
    #[arg(long, value_enum, default_value = "any")]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated cumulative mutation counts.
    #[arg(long, value_delimiter = ',', default_values_t = taxometer::mutation::DEFAULT_SCHEDULE.to_vec())]
    schedule: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Also write every checkpoint taxonomy as JSON.
    #[arg(long)]
    materialize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Leaf,
    NonLeaf,
    Any,
}

impl From<KindArg> for MutationKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Leaf => MutationKind::Leaf,
            KindArg::NonLeaf => MutationKind::NonLeaf,
            KindArg::Any => MutationKind::Any,
        }
    }
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Run (or resume) a study described by a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Correlate every metric with F1 over a records file.
    Correlate {
        #[arg(long)]
        records: PathBuf,
    },
    /// Check NLI judgments on gold edges against sampled non-edges.
    VerifyNli {
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        #[arg(long, default_value = "s")]
        mode: Mode,
        #[arg(long, default_value_t = 0.1)]
        window: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        negative_seed: u64,
        #[command(flatten)]
        providers: ProviderArgs,
    },
    /// Write normalized mean scores per checkpoint as CSV.
    ExportPlot {
        #[arg(long)]
        records: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        // a closed pipe (`| head`) is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print(value: &impl serde::Serialize) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn score(args: ScoreArgs) -> Result<()> {
    if let (Some(predicted), Some(gold)) = (&args.predicted, &args.gold) {
        let predicted = load(predicted, args.format, args.glosses.as_deref())?;
        let gold = load(gold, args.format, args.glosses.as_deref())?;
        return print(&triplet_prf(&predicted, &gold)?);
    }
    let (Some(metric), Some(path)) = (args.metric, &args.taxonomy) else {
        bail!("pass either --predicted/--gold or --metric/--taxonomy");
    };
    let t = load(path, args.format, args.glosses.as_deref())?;
    let providers = args.providers.build(&t)?;
    match metric {
        MetricArg::Csc => {
            let sample = PairSample::draw(&t, PairPolicy::auto(t.len(), args.pair_seed));
            let r = csc(&t, providers.similarity.as_ref(), &sample)?;
            print(&json!({"tau": r.tau, "p": r.p_value, "stars": r.stars, "n": r.n}))
        }
        MetricArg::Sp => print(&semantic_proximity(&t, providers.similarity.as_ref())?),
        MetricArg::NlivS | MetricArg::NlivW => {
            let mode = if metric == MetricArg::NlivS {
                Mode::Strong
            } else {
                Mode::Weak
            };
            let cache = EdgeCache::from_env()?;
            print(&nliv_cached(&t, providers.nli.as_ref(), mode, &cache)?)
        }
        MetricArg::Rate => {
            let mlm = providers
                .fill_mask
                .as_ref()
                .context("the selected backend has no fill-mask model; pass --fill-mask")?;
            let r = rate_score(&t, mlm.as_ref(), args.top_k)?;
            print(&json!({"score": r.score, "edges": r.edges, "hits": r.hits, "prompts": r.prompts}))
        }
    }
}

fn degrade_cmd(args: DegradeArgs) -> Result<()> {
    let t = args.taxonomy.load()?;
    let kind = MutationKind::from(args.kind);
    let trace = degrade(&t, &args.schedule, kind, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let trace_path = args.out.join(format!("trace_{}_{}.jsonl", kind.as_str(), args.seed));
    trace.write_jsonl(&trace_path)?;
    if trace.truncated {
        tracing::warn!(checkpoints = ?trace.checkpoints, "no eligible move left; schedule truncated");
    }
    let mut written = vec![trace_path.display().to_string()];
    if args.materialize {
        for (count, version) in trace.materialize(&t)? {
            let path = args
                .out
                .join(format!("taxonomy_{}_{}_{count}.json", kind.as_str(), args.seed));
            write_json(&version, &path)?;
            written.push(path.display().to_string());
        }
    }
    print(&json!({"checkpoints": trace.checkpoints, "truncated": trace.truncated, "files": written}))
}

fn study(cmd: StudyCommand) -> Result<()> {
    match cmd {
        StudyCommand::Run { config } => {
            let cfg = StudyConfig::from_file(&config)?;
            let taxonomies = cfg.datasets.iter().map(|d| d.load()).collect::<Result<Vec<_>, _>>()?;
            let providers = Providers::from_config(&cfg.provider, &study_vocabulary(&taxonomies))?;
            let opts = RunOptions {
                edge_cache: Some(Arc::new(EdgeCache::from_env()?)),
                stop_after: None,
            };
            let summary = run_study(&cfg, &providers, &opts)?;
            print(&json!({
                "records": cfg.records.display().to_string(),
                "written": summary.written,
                "skipped": summary.skipped,
                "truncated_degradations": summary.truncated_degradations,
            }))
        }
        StudyCommand::Correlate { records } => print(&correlation_report(&read_records(&records)?)),
        StudyCommand::VerifyNli {
            taxonomy,
            mode,
            window,
            threshold,
            negative_seed,
            providers,
        } => {
            let t = taxonomy.load()?;
            let providers = providers.build(&t)?;
            let opts = VerifyOptions {
                mode,
                window,
                threshold,
                seed: negative_seed,
            };
            print(&nli_verification(&t, providers.nli.as_ref(), opts)?)
        }
        StudyCommand::ExportPlot { records, out } => {
            let csv = plot_csv(&read_records(&records)?);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => emit(&csv)?,
            }
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Score(args) => score(args),
        Command::Degrade(args) => degrade_cmd(args),
        Command::Study(cmd) => study(cmd),
        Command::Stats(args) => print(&args.load()?.stats()),
    }
}
