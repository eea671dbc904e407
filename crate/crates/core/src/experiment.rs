//! Out-of-sample prediction of influential nodes and node sequences.
//!
//! Each repetition splits the corpus, fits the configured models on the
//! training paths, ranks states with every measure, and scores the ranking
//! against the top fraction of the path-model ranking of the test paths
//! using AUC.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::centrality::{
    network_centrality, path_centrality, CentralityVector, Measure, ModelKind, MogenScorer,
};
use crate::error::{Error, Result};
use crate::mogen_model::{fit, MogenModel, VisitStatistics};
use crate::network_model::{build_network, Direction, NetworkModel};
use crate::path_data::{split, PathDataset, SplitSpec};
use crate::state::State;

/// A model column of the experiment: network (`N`), MOGen of maximum
/// order K (`MK`) or the path model (`P`). Ordered as N, M1, M2, .., P.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelSpec {
    Network,
    Mogen(usize),
    Path,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Network => f.write_str("N"),
            ModelSpec::Mogen(k) => write!(f, "M{k}"),
            ModelSpec::Path => f.write_str("P"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "network" => Ok(ModelSpec::Network),
            "P" | "path" => Ok(ModelSpec::Path),
            _ => s
                .strip_prefix('M')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(ModelSpec::Mogen)
                .ok_or_else(|| Error::Argument(format!("unknown model `{s}`"))),
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measures: Vec<Measure>,
    pub models: Vec<ModelSpec>,
    pub train_fraction: f64,
    pub ground_truth_order: usize,
    pub repetitions: u64,
    pub top_fraction: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut models = vec![ModelSpec::Network];
        models.extend((1..=5).map(ModelSpec::Mogen));
        models.push(ModelSpec::Path);
        ExperimentConfig {
            measures: Measure::ALL.to_vec(),
            models,
            train_fraction: 0.3,
            ground_truth_order: 1,
            repetitions: 5,
            top_fraction: 0.1,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.measures.is_empty() {
            return bad("at least one measure is required".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.top_fraction > 0.0 && self.top_fraction < 1.0) {
            return bad(format!(
                "top_fraction must lie in (0, 1), got {}",
                self.top_fraction
            ));
        }
        if self.ground_truth_order < 1 {
            return bad("ground_truth_order must be at least 1".into());
        }
        SplitSpec::new(self.train_fraction, self.seed, 0)?;
        Ok(())
    }

    /// Highest MOGen order among the configured models, or 1.
    pub fn max_mogen_order(&self) -> usize {
        self.models
            .iter()
            .filter_map(|m| match m {
                ModelSpec::Mogen(k) => Some(*k),
                _ => None,
            })
            .max()
            .unwrap_or(1)
    }
}

/// Path-model measure on the test paths, restricted to the observed states
/// of exactly order `h` (all states when `h = 1`).
pub fn ground_truth(test: &PathDataset, measure: Measure, h: usize) -> Result<CentralityVector> {
    if test.is_empty() {
        return Err(Error::Argument("test dataset is empty".into()));
    }
    let mut v = path_centrality(test, measure, h)?;
    v.scores.retain(|s, _| s.order() == h);
    Ok(v)
}

/// Result of mapping predictions onto ground-truth states.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub scores: BTreeMap<State, f64>,
    /// Truth states without any predicted suffix; they score 0.
    pub unmatched: BTreeSet<State>,
}

/// Gives each truth state the score of its longest suffix present among the
/// predictions.
pub fn project_prediction(
    pred: &BTreeMap<State, f64>,
    truth_states: &BTreeSet<State>,
) -> Projection {
    let mut scores = BTreeMap::new();
    let mut unmatched = BTreeSet::new();
    for state in truth_states {
        let hit = (1..=state.order())
            .rev()
            .find_map(|len| pred.get(&state.suffix(len)));
        match hit {
            Some(&x) => {
                scores.insert(state.clone(), x);
            }
            None => {
                scores.insert(state.clone(), 0.0);
                unmatched.insert(state.clone());
            }
        }
    }
    Projection { scores, unmatched }
}

/// Labels the `ceil(top_fraction * m)` highest-scoring states positive.
/// Ties at the cutoff go to the canonically smallest states.
pub fn top_labels(truth: &BTreeMap<State, f64>, top_fraction: f64) -> BTreeMap<State, bool> {
    let m = truth.len();
    if m == 0 {
        return BTreeMap::new();
    }
    // Guard against products like 0.1 * 30 = 3.0000000000000004.
    let positives = ((top_fraction * m as f64) - 1e-9)
        .ceil()
        .clamp(1.0, m as f64) as usize;
    let mut ranked: Vec<(&State, f64)> = truth.iter().map(|(s, &x)| (s, x)).collect();
    // Stable sort keeps canonical order among equal scores.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
        .into_iter()
        .enumerate()
        .map(|(rank, (s, _))| (s.clone(), rank < positives))
        .collect()
}

/// Relative gap below which two scores count as tied. Scores that are equal
/// in exact arithmetic but come from different floating-point routes (a
/// linear solve versus a count ratio) must not be ordered by round-off.
const TIE_TOLERANCE: f64 = 1e-10;

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann-Whitney U / (n_pos n_neg)). States missing from
/// `scores` score 0.
pub fn auc(scores: &BTreeMap<State, f64>, labels: &BTreeMap<State, bool>) -> Result<f64> {
    let mut items: Vec<(f64, bool)> = labels
        .iter()
        .map(|(s, &l)| (scores.get(s).copied().unwrap_or(0.0), l))
        .collect();
    let positives = items.iter().filter(|x| x.1).count();
    let negatives = items.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels {
            positives,
            negatives,
        });
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j + 1 < items.len() && tied(items[i].0, items[j + 1].0) {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * items[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

fn tied(a: f64, b: f64) -> bool {
    a == b || (b - a).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// A model fitted on training paths, ready to score states.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Network(NetworkModel),
    Mogen(MogenModel, VisitStatistics),
    Path(PathDataset),
}

impl FittedModel {
    pub fn fit(spec: ModelSpec, train: &PathDataset) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Network => FittedModel::Network(build_network(train)?),
            ModelSpec::Mogen(k) => {
                let model = fit(train, k)?;
                let stats = VisitStatistics::compute(&model)?;
                FittedModel::Mogen(model, stats)
            }
            ModelSpec::Path => FittedModel::Path(train.clone()),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Network(_) => ModelKind::Network,
            FittedModel::Mogen(..) => ModelKind::Mogen,
            FittedModel::Path(_) => ModelKind::Path,
        }
    }

    /// Scores at order `h`.
    pub fn centrality(&self, measure: Measure, h: usize) -> Result<CentralityVector> {
        match self {
            FittedModel::Network(net) => network_centrality(net, measure, Direction::Out),
            FittedModel::Mogen(model, stats) => MogenScorer { model, stats }.centrality(measure, h),
            FittedModel::Path(ds) => path_centrality(ds, measure, h),
        }
    }

    /// Predictions for states of every order up to `h`: for each order `j`,
    /// the order-`j` scores of states with exactly `j` nodes. Lower orders
    /// serve as fallbacks for sequences unseen at higher order.
    pub fn multi_order_prediction(&self, measure: Measure, h: usize) -> Result<CentralityVector> {
        let top = match self {
            FittedModel::Network(_) => 1,
            _ => h,
        };
        let mut scores = BTreeMap::new();
        for j in 1..=top {
            let v = self.centrality(measure, j)?;
            scores.extend(v.scores.into_iter().filter(|(s, _)| s.order() == j));
        }
        Ok(CentralityVector {
            measure,
            model_kind: self.kind(),
            order: top,
            scores,
        })
    }
}

/// One (measure, model, repetition) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub measure: Measure,
    pub model: ModelSpec,
    pub repetition: u64,
    pub auc: Option<f64>,
    pub valid: bool,
    /// Number of ground-truth states ranked.
    pub evaluated: usize,
    pub positives: usize,
    /// Ground-truth states without a predicted suffix.
    pub unmatched: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub measure: Measure,
    pub model: ModelSpec,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub valid_repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub summary: Vec<SummaryEntry>,
    /// Repetitions that produced at least one invalid cell.
    pub invalid_repetitions: Vec<u64>,
}

fn invalid_cell(measure: Measure, model: ModelSpec, repetition: u64, error: String) -> Cell {
    Cell {
        measure,
        model,
        repetition,
        auc: None,
        valid: false,
        evaluated: 0,
        positives: 0,
        unmatched: 0,
        error: Some(error),
    }
}

/// Cells that exist for this configuration: the network model has no
/// end, continuation or reach variant.
fn planned_cells(cfg: &ExperimentConfig) -> Vec<(Measure, ModelSpec)> {
    let mut cells = Vec::new();
    for &measure in &cfg.measures {
        for &model in &cfg.models {
            if model == ModelSpec::Network && measure.needs_path_ends() {
                continue;
            }
            cells.push((measure, model));
        }
    }
    cells
}

/// Evaluates every configured model on one given train/test pair.
pub fn evaluate_split(
    train: &PathDataset,
    test: &PathDataset,
    cfg: &ExperimentConfig,
    repetition: u64,
) -> Vec<Cell> {
    let h = cfg.ground_truth_order;
    let models: BTreeMap<ModelSpec, std::result::Result<FittedModel, String>> = cfg
        .models
        .iter()
        .map(|&spec| {
            (
                spec,
                FittedModel::fit(spec, train).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut cells = Vec::new();
    for &measure in &cfg.measures {
        let truth = ground_truth(test, measure, h);
        let labels = truth
            .as_ref()
            .map(|t| top_labels(&t.scores, cfg.top_fraction));
        for (m, spec) in planned_cells(cfg)
            .into_iter()
            .filter(|(m, _)| *m == measure)
        {
            let cell = (|| -> std::result::Result<Cell, String> {
                let truth = truth.as_ref().map_err(|e| e.to_string())?;
                let labels = labels.as_ref().map_err(|e| e.to_string())?;
                let model = models[&spec].as_ref().map_err(Clone::clone)?;
                let pred = model
                    .multi_order_prediction(m, h)
                    .map_err(|e| e.to_string())?;
                let states: BTreeSet<State> = truth.scores.keys().cloned().collect();
                let projected = project_prediction(&pred.scores, &states);
                let value = auc(&projected.scores, labels).map_err(|e| e.to_string())?;
                Ok(Cell {
                    measure: m,
                    model: spec,
                    repetition,
                    auc: Some(value),
                    valid: true,
                    evaluated: states.len(),
                    positives: labels.values().filter(|&&l| l).count(),
                    unmatched: projected.unmatched.len(),
                    error: None,
                })
            })();
            cells.push(cell.unwrap_or_else(|e| invalid_cell(m, spec, repetition, e)));
        }
    }
    cells
}

/// Mean and sample standard deviation of the valid cells.
pub fn summarize(cfg: &ExperimentConfig, cells: &[Cell]) -> Vec<SummaryEntry> {
    planned_cells(cfg)
        .into_iter()
        .map(|(measure, model)| {
            let values: Vec<f64> = cells
                .iter()
                .filter(|c| c.measure == measure && c.model == model && c.valid)
                .filter_map(|c| c.auc)
                .collect();
            let n = values.len();
            let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
            let std = mean.map(|mu| {
                if n < 2 {
                    0.0
                } else {
                    (values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            SummaryEntry {
                measure,
                model,
                mean,
                std,
                valid_repetitions: n,
            }
        })
        .collect()
}

fn run_repetition(ds: &PathDataset, cfg: &ExperimentConfig, rep: u64) -> Vec<Cell> {
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
        seed: cfg.seed,
        repetition_index: rep,
    };
    match split(ds, &spec) {
        Ok((train, test)) => evaluate_split(&train, &test, cfg, rep),
        Err(e) => planned_cells(cfg)
            .into_iter()
            .map(|(m, s)| invalid_cell(m, s, rep, e.to_string()))
            .collect(),
    }
}

/// Runs all repetitions. Repetitions are independent; the report does not
/// depend on whether they run in parallel.
pub fn run_experiment(ds: &PathDataset, cfg: &ExperimentConfig) -> Result<RankingReport> {
    run_experiment_with(ds, cfg, true)
}

pub fn run_experiment_with(
    ds: &PathDataset,
    cfg: &ExperimentConfig,
    parallel: bool,
) -> Result<RankingReport> {
    cfg.validate()?;
    let per_rep: Vec<Vec<Cell>> = if parallel {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| run_repetition(ds, cfg, r))
            .collect()
    } else {
        (0..cfg.repetitions)
            .map(|r| run_repetition(ds, cfg, r))
            .collect()
    };
    let invalid_repetitions = per_rep
        .iter()
        .enumerate()
        .filter(|(_, cells)| cells.iter().any(|c| !c.valid))
        .map(|(r, _)| r as u64)
        .collect();
    let cells: Vec<Cell> = per_rep.into_iter().flatten().collect();
    let summary = summarize(cfg, &cells);
    Ok(RankingReport {
        config: cfg.clone(),
        cells,
        summary,
        invalid_repetitions,
    })
}

impl RankingReport {
    pub fn mean(&self, measure: Measure, model: ModelSpec) -> Option<f64> {
        self.summary
            .iter()
            .find(|e| e.measure == measure && e.model == model)
            .and_then(|e| e.mean)
    }

    pub fn all_invalid(&self) -> bool {
        self.cells.iter().all(|c| !c.valid)
    }

    /// Mean AUC matrix: one row per measure, columns N, M1..MK, P.
    pub fn tsv_matrix(&self) -> String {
        let mut models = self.config.models.clone();
        models.sort();
        models.dedup();
        let mut out = String::from("measure");
        for m in &models {
            let _ = write!(out, "\t{m}");
        }
        out.push('\n');
        for &measure in &self.config.measures {
            out.push_str(measure.name());
            for &model in &models {
                match self.mean(measure, model) {
                    Some(x) => {
                        let _ = write!(out, "\t{x:.4}");
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}
