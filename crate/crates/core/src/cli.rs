//! Command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input, 3 resource limit exceeded,
//! 4 unsupported measure/model combination.

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::centrality::{path_closeness, CentralityVector, Measure, MogenScorer};
use crate::error::Error;
use crate::experiment::{run_experiment, ExperimentConfig, ModelSpec, RankingReport};
use crate::format::{centrality_tsv, significant};
use crate::mogen_model::{fit, sample_paths, MogenModel, VisitStatistics};
use crate::network_model::{build_network, Direction};
use crate::path_data::{extract_paths, parse_path_file, PathDataset, TemporalNetwork};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_UNSUPPORTED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mogen",
    version,
    about = "Path centralities on network, path and multi-order models"
)]
pub struct Cli {
    /// Seed for splits and sampling
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (output does not depend on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Tsv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract time-respecting paths from a temporal edge list
    Extract(ExtractArgs),
    /// Fit a MOGen model and save it as JSON
    Fit(FitArgs),
    /// Compute one centrality measure
    Centrality(CentralityArgs),
    /// Run the train/test prediction experiment
    Experiment(ExperimentArgs),
    /// Draw paths from a saved MOGen model
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
pub struct InputArgs {
    /// Path file: `v1,v2,...` per line, optional `\t<frequency>`
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Temporal edge CSV (`source,target,timestamp`); requires --delta
    #[arg(long, requires = "delta")]
    pub temporal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    /// Maximum waiting time between consecutive interactions
    #[arg(long)]
    pub delta: Option<u64>,
    /// Fail instead of enumerating more paths than this
    #[arg(long, default_value_t = 10_000_000)]
    pub max_paths: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub temporal: PathBuf,
    #[arg(long)]
    pub delta: u64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_paths: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub temporal: TemporalArgs,
    /// Maximum order K
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Network,
    Path,
    Mogen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Out,
    In,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct CentralityInput {
    #[arg(long)]
    pub paths: Option<PathBuf>,
    #[arg(long, requires = "delta")]
    pub temporal: Option<PathBuf>,
    /// Previously saved MOGen model (only with --model mogen)
    #[arg(long)]
    pub model_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CentralityArgs {
    #[command(flatten)]
    pub input: CentralityInput,
    #[command(flatten)]
    pub temporal: TemporalArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Maximum order K of the MOGen model
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// betweenness, closeness, end_probability, continuation_probability, reach
    #[arg(long)]
    pub measure: String,
    /// Order of the node sequences to score
    #[arg(long, default_value_t = 1)]
    pub gt_order: usize,
    /// Distances used by closeness
    #[arg(long, value_enum, default_value_t = DirectionArg::Out)]
    pub direction: DirectionArg,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub temporal: TemporalArgs,
    /// JSON experiment configuration; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub repetitions: Option<u64>,
    #[arg(long)]
    pub gt_order: Option<usize>,
    #[arg(long)]
    pub top_fraction: Option<f64>,
    /// Comma-separated models, e.g. `N,M1,M2,P`
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Comma-separated measures
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    /// Evaluate ground-truth orders 1..=max MOGen order, one report each
    #[arg(long)]
    pub sweep_gt_orders: bool,
    /// Also write the full JSON report(s) here
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model_file: PathBuf,
    #[arg(long)]
    pub count: u64,
}

/// Failure of a CLI invocation together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PathLimit { .. } => EXIT_RESOURCE,
            Error::UnsupportedMeasure { .. } => EXIT_UNSUPPORTED,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &FsPath) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_paths(
    paths: Option<&PathBuf>,
    temporal: Option<&PathBuf>,
    t: &TemporalArgs,
) -> CliResult<PathDataset> {
    let ds = match (paths, temporal) {
        (Some(p), None) => parse_path_file(&read(p)?)?,
        (None, Some(p)) => {
            let delta = t
                .delta
                .ok_or_else(|| input_error("--temporal requires --delta"))?;
            let net = TemporalNetwork::from_csv(read(p)?.as_bytes())?;
            extract_paths(&net, delta, Some(t.max_paths))?
        }
        _ => {
            return Err(input_error(
                "exactly one of --paths or --temporal is required",
            ))
        }
    };
    if ds.is_empty() {
        return Err(input_error("input contains no paths"));
    }
    Ok(ds)
}

/// Writes to `--output` or stdout.
fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.output {
        Some(p) => fs::write(p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| input_error(e.to_string()))
        }
    }
}

fn summary_text(ds: &PathDataset) -> String {
    let s = ds.summary();
    format!(
        "total paths\t{}\nunique paths\t{}\nmean nodes per path\t{}\nmedian nodes per path\t{}\nnodes\t{}\nlinks\t{}\n",
        s.total_paths,
        s.unique_paths,
        significant(s.mean_length, 6),
        significant(s.median_length, 6),
        s.nodes,
        s.links
    )
}

fn centrality_json(v: &CentralityVector) -> String {
    let scores: Vec<_> = v
        .scores
        .iter()
        .map(|(s, x)| json!({"state": s.to_string(), "score": x}))
        .collect();
    let doc = json!({
        "measure": v.measure.name(),
        "model": v.model_kind.name(),
        "order": v.order,
        "scores": scores,
    });
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        // Fails only if a pool was already installed, e.g. by an earlier call
        // in the same process; the existing pool is then reused.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    match &cli.command {
        Command::Extract(a) => cmd_extract(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Centrality(a) => cmd_centrality(cli, a),
        Command::Experiment(a) => cmd_experiment(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
    }
}

fn cmd_extract(cli: &Cli, a: &ExtractArgs) -> CliResult<()> {
    let net = TemporalNetwork::from_csv(read(&a.temporal)?.as_bytes())?;
    let ds = extract_paths(&net, a.delta, Some(a.max_paths))?;
    match cli.format {
        OutputFormat::Tsv => {
            emit(cli, &ds.to_text())?;
            eprint!("{}", summary_text(&ds));
        }
        OutputFormat::Json => {
            let paths: Vec<_> = ds
                .iter()
                .map(|(nodes, f)| json!({"nodes": nodes, "frequency": f}))
                .collect();
            let doc = json!({"summary": ds.summary(), "paths": paths});
            emit(
                cli,
                &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"),
            )?;
        }
    }
    Ok(())
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> CliResult<()> {
    let ds = load_paths(
        a.input.paths.as_ref(),
        a.input.temporal.as_ref(),
        &a.temporal,
    )?;
    let model = fit(&ds, a.order)?;
    let text = model.to_json()?;
    fs::write(&a.model_out, &text)
        .map_err(|e| input_error(format!("{}: {e}", a.model_out.display())))?;
    if cli.output.is_some() {
        emit(cli, &text)?;
    }
    eprintln!(
        "fitted K={} model with {} states",
        model.max_order(),
        model.len()
    );
    Ok(())
}

fn cmd_centrality(cli: &Cli, a: &CentralityArgs) -> CliResult<()> {
    let measure: Measure = a.measure.parse()?;
    let direction = match a.direction {
        DirectionArg::Out => Direction::Out,
        DirectionArg::In => Direction::In,
    };
    if a.gt_order < 1 {
        return Err(input_error("--gt-order must be at least 1"));
    }
    let vector = if let Some(file) = &a.input.model_file {
        if a.model != ModelArg::Mogen {
            return Err(input_error("--model-file requires --model mogen"));
        }
        let model = MogenModel::from_json(&read(file)?)?;
        mogen_vector(&model, measure, a.gt_order, direction)?
    } else {
        let ds = load_paths(
            a.input.paths.as_ref(),
            a.input.temporal.as_ref(),
            &a.temporal,
        )?;
        match a.model {
            ModelArg::Network => {
                let net = build_network(&ds)?;
                crate::centrality::network_centrality(&net, measure, direction)?
            }
            ModelArg::Path => match measure {
                Measure::Closeness => path_closeness(&ds, a.gt_order, direction)?,
                m => crate::centrality::path_centrality(&ds, m, a.gt_order)?,
            },
            ModelArg::Mogen => {
                let model = fit(&ds, a.order)?;
                mogen_vector(&model, measure, a.gt_order, direction)?
            }
        }
    };
    let text = match cli.format {
        OutputFormat::Tsv => centrality_tsv(&vector),
        OutputFormat::Json => centrality_json(&vector),
    };
    emit(cli, &text)
}

fn mogen_vector(
    model: &MogenModel,
    measure: Measure,
    h: usize,
    direction: Direction,
) -> CliResult<CentralityVector> {
    let stats = VisitStatistics::compute(model)?;
    let scorer = MogenScorer {
        model,
        stats: &stats,
    };
    Ok(match measure {
        Measure::Closeness => scorer.closeness(h, direction)?,
        m => scorer.centrality(m, h)?,
    })
}

fn experiment_config(cli: &Cli, a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&read(p)?)
            .map_err(|e| input_error(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(x) = a.train_fraction {
        cfg.train_fraction = x;
    }
    if let Some(x) = a.repetitions {
        cfg.repetitions = x;
    }
    if let Some(x) = a.gt_order {
        cfg.ground_truth_order = x;
    }
    if let Some(x) = a.top_fraction {
        cfg.top_fraction = x;
    }
    if let Some(models) = &a.models {
        cfg.models = models
            .iter()
            .map(|m| m.parse::<ModelSpec>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(measures) = &a.measures {
        cfg.measures = measures
            .iter()
            .map(|m| m.parse::<Measure>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> CliResult<()> {
    let cfg = experiment_config(cli, a)?;
    let ds = load_paths(
        a.input.paths.as_ref(),
        a.input.temporal.as_ref(),
        &a.temporal,
    )?;
    let orders: Vec<usize> = if a.sweep_gt_orders {
        (1..=cfg.max_mogen_order()).collect()
    } else {
        vec![cfg.ground_truth_order]
    };
    let mut reports: Vec<RankingReport> = Vec::new();
    for h in orders {
        let cfg = ExperimentConfig {
            ground_truth_order: h,
            ..cfg.clone()
        };
        reports.push(run_experiment(&ds, &cfg)?);
    }
    let json_text = if a.sweep_gt_orders {
        serde_json::to_string_pretty(&reports)
    } else {
        serde_json::to_string_pretty(&reports[0])
    }
    .expect("serializable")
        + "\n";
    if let Some(p) = &a.report {
        fs::write(p, &json_text).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
    }
    match cli.format {
        OutputFormat::Json => emit(cli, &json_text)?,
        OutputFormat::Tsv => {
            let mut text = String::new();
            for r in &reports {
                if a.sweep_gt_orders {
                    text.push_str(&format!(
                        "# ground truth order {}\n",
                        r.config.ground_truth_order
                    ));
                }
                text.push_str(&r.tsv_matrix());
            }
            emit(cli, &text)?;
        }
    }
    if reports.iter().all(RankingReport::all_invalid) {
        return Err(input_error("every repetition was invalid"));
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> CliResult<()> {
    let model = MogenModel::from_json(&read(&a.model_file)?)?;
    let ds = sample_paths(&model, a.count, cli.seed.unwrap_or(0))?;
    emit(cli, &ds.to_text())
}
