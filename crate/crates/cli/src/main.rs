//! Command-line surface wiring the smart-boost toolkit into train / predict /
//! evaluate / tune / synth workflows.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime or data error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smart_boost::boosting::{BoostConfig, Loss, Mode};
use smart_boost::eval::{predict_corpus, tune_bias, BiasGrid, TunePolicy};
use smart_boost::linking::two_stage_train;
use smart_boost::model::TrainedModel;
use smart_boost::synth::{Nonlinearity, SynthConfig};
use smart_boost::trees::TreeConfig;
use smart_boost::{boosting, eval, io, synth};

#[derive(Parser)]
#[command(name = "smart-boost", version, about = "Structured gradient boosting for mention-lattice entity linking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a golded corpus
    Train(TrainArgs),
    /// Decode a corpus into link predictions
    Predict(PredictArgs),
    /// IE-driven evaluation of predictions against gold links
    EvalIe(EvalIeArgs),
    /// IR-driven evaluation against per-query relevance judgments
    EvalIr(EvalIrArgs),
    /// Sweep the Nil bias on a dev corpus and report the best value
    TuneBias(TuneBiasArgs),
    /// Generate a synthetic corpus with a planted ground truth
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Log,
    Hinge,
}

impl From<LossArg> for Loss {
    fn from(v: LossArg) -> Self {
        match v {
            LossArg::Log => Loss::Log,
            LossArg::Hinge => Loss::Hinge,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Structured,
    Independent,
}

impl From<ModeArg> for Mode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Structured => Mode::Structured,
            ModeArg::Independent => Mode::Independent,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Golded corpus JSONL
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, value_enum, default_value = "log")]
    loss: LossArg,
    #[arg(long, value_enum, default_value = "structured")]
    mode: ModeArg,
    /// Boosting rounds M
    #[arg(long, default_value_t = 300)]
    trees: usize,
    /// Minimum samples per tree leaf
    #[arg(long, default_value_t = 30)]
    min_leaf: usize,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    /// Per-tree weight eta in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    shrinkage: f64,
    /// Re-train on entity-entity features from a first-stage decode
    #[arg(long)]
    two_stage: bool,
    /// Link-graph TSV (required for --two-stage)
    #[arg(long)]
    link_graph: Option<PathBuf>,
    /// Echoed into the model metadata; training itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training-log CSV path (default: <model-out>.train.csv)
    #[arg(long)]
    train_log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus JSONL (gold flags optional)
    #[arg(long)]
    corpus: PathBuf,
    /// Output predictions JSONL
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    nil_bias: f64,
    /// Link-graph TSV (required for two-stage models)
    #[arg(long)]
    link_graph: Option<PathBuf>,
}

#[derive(Args)]
struct EvalIeArgs {
    /// Predictions JSONL
    #[arg(long)]
    pred: PathBuf,
    /// Gold links: predictions JSONL or a golded corpus JSONL
    #[arg(long)]
    gold: PathBuf,
    /// Also write the metrics JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalIrArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Query TSV: entity \t tweet_id \t relevant(0|1)
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Ie,
    Ir,
}

#[derive(Args)]
struct TuneBiasArgs {
    #[arg(long)]
    model: PathBuf,
    /// Golded dev corpus JSONL
    #[arg(long)]
    dev: PathBuf,
    #[arg(long, value_enum, default_value = "ie")]
    policy: PolicyArg,
    /// Query TSV, required for --policy ir
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Bias grid as LO:HI:STEP
    #[arg(long, default_value = "-3:3:0.25", allow_hyphen_values = true)]
    grid: String,
    #[arg(long)]
    link_graph: Option<PathBuf>,
    /// Write the full sweep as CSV
    #[arg(long)]
    sweep_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonlinearityArg {
    Xor,
    ThresholdProduct,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for train/dev/test JSONL and link_graph.tsv
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Total tweet count across the 70/15/15 splits
    #[arg(long, default_value_t = 715)]
    tweets: usize,
    #[arg(long, default_value_t = 12)]
    tokens: usize,
    /// Expected candidates per token
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 3)]
    max_entities: usize,
    #[arg(long, default_value_t = 10)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap_rate: f64,
    /// Gaussian observation-noise standard deviation
    #[arg(long, default_value_t = 0.25)]
    noise: f64,
    #[arg(long, value_enum, default_value = "xor")]
    nonlinearity: NonlinearityArg,
}

enum AppError {
    Usage(String),
    Runtime(smart_boost::Error),
}

impl From<smart_boost::Error> for AppError {
    fn from(e: smart_boost::Error) -> Self {
        AppError::Runtime(e)
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) => write!(f, "{m}"),
            AppError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                AppError::Usage(_) => ExitCode::from(2),
                AppError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::EvalIe(args) => cmd_eval_ie(args),
        Command::EvalIr(args) => cmd_eval_ir(args),
        Command::TuneBias(args) => cmd_tune_bias(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn default_log_path(model_out: &Path, stage2: bool) -> PathBuf {
    let suffix = if stage2 { ".train.stage2.csv" } else { ".train.csv" };
    PathBuf::from(format!("{}{suffix}", model_out.display()))
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let config = BoostConfig {
        num_trees: args.trees,
        shrinkage: args.shrinkage,
        tree: TreeConfig {
            min_leaf: args.min_leaf,
            max_depth: args.max_depth,
        },
        loss: args.loss.into(),
        mode: args.mode.into(),
        seed: args.seed,
    };
    let corpus = io::read_corpus(&args.corpus)?;
    let log_path = args
        .train_log
        .clone()
        .unwrap_or_else(|| default_log_path(&args.model_out, false));

    let model = if args.two_stage {
        let graph_path = args.link_graph.as_ref().ok_or_else(|| {
            AppError::Usage("--two-stage requires --link-graph".into())
        })?;
        let graph = io::read_link_graph(graph_path)?;
        let result = two_stage_train(&corpus, &config, &graph)?;
        io::write_training_log(&log_path, &result.stage1.log)?;
        let stage2_log = match &args.train_log {
            Some(p) => PathBuf::from(format!("{}.stage2", p.display())),
            None => default_log_path(&args.model_out, true),
        };
        io::write_training_log(&stage2_log, &result.stage2.log)?;
        TrainedModel::two_stage(result.stage1.ensemble, result.stage2.ensemble)
    } else {
        let result = boosting::train(&corpus, &config)?;
        io::write_training_log(&log_path, &result.log)?;
        TrainedModel::single(result.ensemble)
    };
    io::save_model(&args.model_out, &model)?;
    eprintln!(
        "trained {} stage(s) of {} tree(s) on {} tweet(s); model: {}",
        model.num_stages(),
        args.trees,
        corpus.len(),
        args.model_out.display()
    );
    Ok(())
}

fn load_graph_for_model(
    model: &TrainedModel,
    link_graph: &Option<PathBuf>,
) -> Result<Option<smart_boost::linking::LinkGraph>, AppError> {
    if model.needs_link_graph() && link_graph.is_none() {
        return Err(AppError::Usage(
            "this model has two stages; pass --link-graph".into(),
        ));
    }
    Ok(match link_graph {
        Some(p) => Some(io::read_link_graph(p)?),
        None => None,
    })
}

fn cmd_predict(args: PredictArgs) -> Result<(), AppError> {
    let model = io::load_model(&args.model)?;
    let corpus = io::read_corpus(&args.corpus)?;
    let graph = load_graph_for_model(&model, &args.link_graph)?;
    let predictions = predict_corpus(&model, &corpus, graph.as_ref(), args.nil_bias)?;
    io::write_predictions(&args.out, &predictions)?;
    eprintln!(
        "predicted {} tweet(s) -> {}",
        predictions.len(),
        args.out.display()
    );
    Ok(())
}

fn emit_json(doc: &str, out: &Option<PathBuf>) -> Result<(), AppError> {
    println!("{doc}");
    if let Some(path) = out {
        io::atomic_write(path, format!("{doc}\n").as_bytes())?;
    }
    Ok(())
}

fn cmd_eval_ie(args: EvalIeArgs) -> Result<(), AppError> {
    let predictions = io::read_predictions(&args.pred)?;
    let golds = io::read_links_or_corpus(&args.gold)?;
    let report = eval::eval_ie(&predictions, &golds)?;
    emit_json(&io::metrics_json("ie", &report, None)?, &args.out)
}

fn cmd_eval_ir(args: EvalIrArgs) -> Result<(), AppError> {
    let predictions = io::read_predictions(&args.pred)?;
    let queries = io::read_queries(&args.queries)?;
    let report = eval::eval_ir(&predictions, &queries)?;
    emit_json(
        &io::metrics_json("ir", &report.micro, Some(&report.per_query))?,
        &args.out,
    )
}

fn parse_grid(text: &str) -> Result<BiasGrid, AppError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(AppError::Usage(format!(
            "--grid expects LO:HI:STEP, got '{text}'"
        )));
    };
    let parse = |s: &str| -> Result<f64, AppError> {
        s.parse()
            .map_err(|_| AppError::Usage(format!("bad grid number '{s}'")))
    };
    Ok(BiasGrid {
        lo: parse(lo)?,
        hi: parse(hi)?,
        step: parse(step)?,
    })
}

fn cmd_tune_bias(args: TuneBiasArgs) -> Result<(), AppError> {
    let model = io::load_model(&args.model)?;
    let dev = io::read_corpus(&args.dev)?;
    let graph = load_graph_for_model(&model, &args.link_graph)?;
    let grid = parse_grid(&args.grid)?;
    let queries;
    let (policy, policy_name) = match args.policy {
        PolicyArg::Ie => (TunePolicy::Ie, "ie"),
        PolicyArg::Ir => {
            let path = args.queries.as_ref().ok_or_else(|| {
                AppError::Usage("--policy ir requires --queries".into())
            })?;
            queries = io::read_queries(path)?;
            (TunePolicy::Ir(&queries), "ir")
        }
    };
    let result = tune_bias(&model, &dev, graph.as_ref(), grid, policy)?;
    if let Some(path) = &args.sweep_out {
        io::write_sweep(path, &result.sweep)?;
    }
    let metrics = io::metrics_json(policy_name, &result.best, None)?;
    let doc = format!(
        "{{\n  \"best_bias\": {},\n  \"metrics\": {}\n}}",
        serde_json::to_string(&result.best_bias).map_err(smart_boost::Error::from)?,
        indent_tail(&metrics)
    );
    emit_json(&doc, &args.out)
}

/// Indent every line after the first so nested pretty JSON stays aligned.
fn indent_tail(text: &str) -> String {
    text.replace('\n', "\n  ")
}

fn cmd_synth(args: SynthArgs) -> Result<(), AppError> {
    let config = SynthConfig {
        seed: args.seed,
        num_tweets: args.tweets,
        tokens_per_tweet: args.tokens,
        candidate_density: args.density,
        max_entities_per_candidate: args.max_entities,
        feature_dim: args.feature_dim,
        overlap_rate: args.overlap_rate,
        noise: args.noise,
        nonlinearity: match args.nonlinearity {
            NonlinearityArg::Xor => Nonlinearity::Xor,
            NonlinearityArg::ThresholdProduct => Nonlinearity::ThresholdProduct,
        },
    };
    let output = synth::generate(&config)?;
    std::fs::create_dir_all(&args.out_dir).map_err(smart_boost::Error::from)?;
    io::write_corpus(&args.out_dir.join("train.jsonl"), &output.train.examples)?;
    io::write_corpus(&args.out_dir.join("dev.jsonl"), &output.dev.examples)?;
    io::write_corpus(&args.out_dir.join("test.jsonl"), &output.test.examples)?;
    io::write_link_graph(&args.out_dir.join("link_graph.tsv"), &output.graph)?;
    eprintln!(
        "wrote {}/{}/{} train/dev/test tweet(s) and the link graph to {}",
        output.train.examples.len(),
        output.dev.examples.len(),
        output.test.examples.len(),
        args.out_dir.display()
    );
    Ok(())
}
