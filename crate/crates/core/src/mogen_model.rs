//! MOGen: a multi-order generative model of paths with explicit start and
//! end states, read as an absorbing Markov chain.
//!
//! A path `v1 .. vl` is encoded as `* -> v1 -> (v1,v2) -> ... -> (v_{l-K+1},
//! .., v_l) -> end`: the memory grows one node per step up to `K` and then
//! slides. Transitions into the end state form the absorbing column `R`,
//! transitions between states the transient block `Q`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::absorbing::AbsorbingSolver;
use crate::error::{Error, Result};
use crate::network_model::DistanceMatrix;
use crate::path_data::{state_sequence, PathDataset};
use crate::state::State;

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MogenModel {
    max_order: usize,
    states: Vec<State>,
    index: HashMap<State, usize>,
    start: Vec<f64>,
    transitions: Vec<Vec<(usize, f64)>>,
    absorption: Vec<f64>,
    start_counts: Vec<u64>,
    transition_counts: Vec<Vec<(usize, u64)>>,
    end_counts: Vec<u64>,
}

/// Fits a MOGen model of maximum order `max_order` by counting the encoded
/// transitions of every training path, weighted by multiplicity.
pub fn fit(train: &PathDataset, max_order: usize) -> Result<MogenModel> {
    if max_order < 1 {
        return Err(Error::Argument("maximum order K must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Argument(
            "cannot fit a model to an empty dataset".into(),
        ));
    }
    let mut start: BTreeMap<State, u64> = BTreeMap::new();
    let mut moves: BTreeMap<State, BTreeMap<State, u64>> = BTreeMap::new();
    let mut end: BTreeMap<State, u64> = BTreeMap::new();
    for (nodes, f) in train.iter() {
        let seq = state_sequence(nodes, max_order);
        *start.entry(seq[0].clone()).or_default() += f;
        for pair in seq.windows(2) {
            *moves
                .entry(pair[0].clone())
                .or_default()
                .entry(pair[1].clone())
                .or_default() += f;
        }
        *end.entry(seq[seq.len() - 1].clone()).or_default() += f;
    }
    MogenModel::from_counts(max_order, start, moves, end)
}

impl MogenModel {
    /// Builds a model from raw start, transition and end counts, e.g. a
    /// hand-specified generative model. Rows are normalized and the result
    /// is validated.
    pub fn from_counts(
        max_order: usize,
        start: BTreeMap<State, u64>,
        moves: BTreeMap<State, BTreeMap<State, u64>>,
        end: BTreeMap<State, u64>,
    ) -> Result<Self> {
        let mut all: std::collections::BTreeSet<State> = start.keys().cloned().collect();
        for (s, row) in &moves {
            all.insert(s.clone());
            all.extend(row.keys().cloned());
        }
        all.extend(end.keys().cloned());
        let states: Vec<State> = all.into_iter().collect();
        let index: HashMap<State, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let n = states.len();

        let mut start_counts = vec![0u64; n];
        for (s, c) in &start {
            start_counts[index[s]] = *c;
        }
        let mut end_counts = vec![0u64; n];
        for (s, c) in &end {
            end_counts[index[s]] = *c;
        }
        let mut transition_counts = vec![Vec::new(); n];
        for (s, row) in &moves {
            let mut r: Vec<(usize, u64)> = row.iter().map(|(t, c)| (index[t], *c)).collect();
            r.sort_unstable();
            transition_counts[index[s]] = r;
        }

        let total_starts: u64 = start_counts.iter().sum();
        if total_starts == 0 {
            return Err(Error::InvalidModel("no path starts".into()));
        }
        let start_p = start_counts
            .iter()
            .map(|&c| c as f64 / total_starts as f64)
            .collect();
        let mut transitions = Vec::with_capacity(n);
        let mut absorption = Vec::with_capacity(n);
        for i in 0..n {
            let out: u64 =
                transition_counts[i].iter().map(|&(_, c)| c).sum::<u64>() + end_counts[i];
            if out == 0 {
                return Err(Error::InvalidModel(format!(
                    "state {} has no outgoing transitions",
                    states[i]
                )));
            }
            let total = out as f64;
            transitions.push(
                transition_counts[i]
                    .iter()
                    .map(|&(j, c)| (j, c as f64 / total))
                    .collect(),
            );
            absorption.push(end_counts[i] as f64 / total);
        }
        let model = MogenModel {
            max_order,
            states,
            index,
            start: start_p,
            transitions,
            absorption,
            start_counts,
            transition_counts,
            end_counts,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks row-stochasticity of `[Q | R]`, normalization of `S` and the
    /// multi-order block structure.
    pub fn validate(&self) -> Result<()> {
        let k = self.max_order;
        let s_sum: f64 = self.start.iter().sum();
        if (s_sum - 1.0).abs() > STOCHASTIC_TOLERANCE || self.start.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidModel(format!(
                "start distribution sums to {s_sum}"
            )));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.order() > k {
                return Err(Error::InvalidModel(format!("state {s} exceeds order {k}")));
            }
            if self.start[i] > 0.0 && s.order() != 1 {
                return Err(Error::InvalidModel(format!(
                    "start mass on higher-order state {s}"
                )));
            }
            let row: f64 =
                self.transitions[i].iter().map(|&(_, q)| q).sum::<f64>() + self.absorption[i];
            if (row - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::InvalidModel(format!("row {s} sums to {row}")));
            }
            if self.absorption[i] < 0.0 || self.transitions[i].iter().any(|&(_, q)| q < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "negative probability in row {s}"
                )));
            }
            for &(j, _) in &self.transitions[i] {
                let t = &self.states[j];
                let ok = if s.order() < k {
                    t.order() == s.order() + 1 && t.nodes()[..s.order()] == *s.nodes()
                } else {
                    t.order() == k && t.nodes()[..k - 1] == s.nodes()[1..]
                };
                if !ok {
                    return Err(Error::InvalidModel(format!(
                        "transition {s} -> {t} breaks the block structure"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maximum order K.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &State) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Start distribution `S` indexed like `states()`.
    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// Transient rows of `Q`.
    pub fn transitions(&self) -> &[Vec<(usize, f64)>] {
        &self.transitions
    }

    /// Absorbing column `R`.
    pub fn absorption(&self) -> &[f64] {
        &self.absorption
    }

    pub fn transition_probability(&self, from: &State, to: &State) -> f64 {
        let (Some(i), Some(j)) = (self.index_of(from), self.index_of(to)) else {
            return 0.0;
        };
        self.transitions[i]
            .iter()
            .find(|&&(t, _)| t == j)
            .map_or(0.0, |&(_, q)| q)
    }

    pub fn start_probability(&self, state: &State) -> f64 {
        self.index_of(state).map_or(0.0, |i| self.start[i])
    }

    pub fn absorption_probability(&self, state: &State) -> f64 {
        self.index_of(state).map_or(0.0, |i| self.absorption[i])
    }

    /// Factorizes `I - Q`.
    pub fn solver(&self) -> Result<AbsorbingSolver> {
        AbsorbingSolver::new(&self.transitions, |i| self.states[i].to_string())
    }

    /// Hop distances over the transient topology (transitions with `Q > 0`).
    pub fn distances(&self) -> DistanceMatrix {
        let adj: Vec<Vec<usize>> = self
            .transitions
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|&&(_, q)| q > 0.0)
                    .map(|&(j, _)| j)
                    .collect()
            })
            .collect();
        DistanceMatrix::from_adjacency(self.states.clone(), &adj)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile::from(self);
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    /// Loads a serialized model and re-checks its invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let model = file.into_model()?;
        model.validate()?;
        Ok(model)
    }
}

/// Serialized form of a fitted model. Probabilities are stored as written
/// by the fit; counts are kept so the model can be audited or refitted.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "K")]
    max_order: usize,
    states: Vec<State>,
    #[serde(rename = "S")]
    start: BTreeMap<State, f64>,
    #[serde(rename = "Q")]
    transitions: BTreeMap<State, BTreeMap<State, f64>>,
    #[serde(rename = "R")]
    absorption: BTreeMap<State, f64>,
    counts: CountsFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountsFile {
    start: BTreeMap<State, u64>,
    transitions: BTreeMap<State, BTreeMap<State, u64>>,
    end: BTreeMap<State, u64>,
}

impl From<&MogenModel> for ModelFile {
    fn from(m: &MogenModel) -> Self {
        let st = |i: usize| m.states[i].clone();
        let nonzero_rows = |i: usize| !m.transitions[i].is_empty();
        ModelFile {
            max_order: m.max_order,
            states: m.states.clone(),
            start: (0..m.len())
                .filter(|&i| m.start[i] > 0.0)
                .map(|i| (st(i), m.start[i]))
                .collect(),
            transitions: (0..m.len())
                .filter(|&i| nonzero_rows(i))
                .map(|i| {
                    (
                        st(i),
                        m.transitions[i].iter().map(|&(j, q)| (st(j), q)).collect(),
                    )
                })
                .collect(),
            absorption: (0..m.len()).map(|i| (st(i), m.absorption[i])).collect(),
            counts: CountsFile {
                start: (0..m.len())
                    .filter(|&i| m.start_counts[i] > 0)
                    .map(|i| (st(i), m.start_counts[i]))
                    .collect(),
                transitions: (0..m.len())
                    .filter(|&i| !m.transition_counts[i].is_empty())
                    .map(|i| {
                        (
                            st(i),
                            m.transition_counts[i]
                                .iter()
                                .map(|&(j, c)| (st(j), c))
                                .collect(),
                        )
                    })
                    .collect(),
                end: (0..m.len())
                    .filter(|&i| m.end_counts[i] > 0)
                    .map(|i| (st(i), m.end_counts[i]))
                    .collect(),
            },
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MogenModel> {
        if self.max_order < 1 {
            return Err(Error::InvalidModel("K must be at least 1".into()));
        }
        let states = self.states;
        let index: HashMap<State, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if index.len() != states.len() {
            return Err(Error::InvalidModel("duplicate states".into()));
        }
        let lookup = |s: &State| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::InvalidModel(format!("unknown state {s}")))
        };
        let n = states.len();
        let mut start = vec![0.0; n];
        for (s, p) in &self.start {
            start[lookup(s)?] = *p;
        }
        let mut transitions = vec![Vec::new(); n];
        for (s, row) in &self.transitions {
            let mut r = row
                .iter()
                .map(|(t, &q)| Ok((lookup(t)?, q)))
                .collect::<Result<Vec<_>>>()?;
            r.sort_by_key(|&(j, _)| j);
            transitions[lookup(s)?] = r;
        }
        let mut absorption = vec![0.0; n];
        for (s, p) in &self.absorption {
            absorption[lookup(s)?] = *p;
        }
        let mut start_counts = vec![0; n];
        for (s, c) in &self.counts.start {
            start_counts[lookup(s)?] = *c;
        }
        let mut transition_counts = vec![Vec::new(); n];
        for (s, row) in &self.counts.transitions {
            let mut r = row
                .iter()
                .map(|(t, &c)| Ok((lookup(t)?, c)))
                .collect::<Result<Vec<_>>>()?;
            r.sort_by_key(|&(j, _)| j);
            transition_counts[lookup(s)?] = r;
        }
        let mut end_counts = vec![0; n];
        for (s, c) in &self.counts.end {
            end_counts[lookup(s)?] = *c;
        }
        Ok(MogenModel {
            max_order: self.max_order,
            states,
            index,
            start,
            transitions,
            absorption,
            start_counts,
            transition_counts,
            end_counts,
        })
    }
}

/// `F = (I - Q)^-1`: expected visits to each state before absorption.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    matrix: DMatrix<f64>,
}

impl FundamentalMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.matrix.row(i).sum()
    }

    /// Largest entry of `|F (I - Q) - I|`.
    pub fn residual(&self, model: &MogenModel) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            // Row i of F (I - Q) = F_i - sum_k F_ik Q_k.
            let mut row: Vec<f64> = self.matrix.row(i).iter().copied().collect();
            for k in 0..n {
                let fik = self.matrix[(i, k)];
                if fik != 0.0 {
                    for &(j, q) in &model.transitions[k] {
                        row[j] -= fik * q;
                    }
                }
            }
            row[i] -= 1.0;
            worst = row.iter().fold(worst, |w, x| w.max(x.abs()));
        }
        worst
    }
}

/// Solves `(I - Q) F = I`.
pub fn fundamental_matrix(model: &MogenModel) -> Result<FundamentalMatrix> {
    Ok(FundamentalMatrix {
        matrix: model.solver()?.inverse(),
    })
}

/// Per-state quantities derived from `F` that the centralities need:
/// expected visits `S F` and row sums of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitStatistics {
    pub visits: Vec<f64>,
    pub row_sums: Vec<f64>,
}

impl VisitStatistics {
    /// Two linear solves with `I - Q`; never forms `F`.
    pub fn compute(model: &MogenModel) -> Result<Self> {
        let solver = model.solver()?;
        let visits = solver.solve_left(&model.start);
        let row_sums = solver.solve_right(&vec![1.0; model.len()]);
        Ok(VisitStatistics { visits, row_sums })
    }

    pub fn from_fundamental(model: &MogenModel, f: &FundamentalMatrix) -> Self {
        let n = model.len();
        let visits = (0..n)
            .map(|j| (0..n).map(|i| model.start[i] * f.get(i, j)).sum())
            .collect();
        let row_sums = (0..n).map(|i| f.row_sum(i)).collect();
        VisitStatistics { visits, row_sums }
    }
}

/// Expected number of visits per path to every state, `S F`.
pub fn expected_visits(model: &MogenModel, stats: &VisitStatistics) -> BTreeMap<State, f64> {
    model
        .states
        .iter()
        .cloned()
        .zip(stats.visits.iter().copied())
        .collect()
}

/// Samples per chunk; each chunk has its own generator stream so results do
/// not depend on the number of worker threads.
const SAMPLE_CHUNK: u64 = 4096;

/// Walks of the generative model.
pub struct Sampler<'a> {
    model: &'a MogenModel,
    start: WeightedIndex<f64>,
    /// Per state: distribution over `transitions[i]` followed by the end state.
    rows: Vec<WeightedIndex<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a MogenModel) -> Result<Self> {
        let start = WeightedIndex::new(model.start.iter().copied())
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let rows = (0..model.len())
            .map(|i| {
                let weights = model.transitions[i]
                    .iter()
                    .map(|&(_, q)| q)
                    .chain([model.absorption[i]]);
                WeightedIndex::new(weights).map_err(|e| Error::InvalidModel(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Sampler { model, start, rows })
    }

    /// State indices visited by one walk starting in `from`.
    pub fn walk_from<R: rand::Rng>(&self, from: usize, rng: &mut R, visited: &mut Vec<usize>) {
        visited.clear();
        let mut current = from;
        loop {
            visited.push(current);
            let k = self.rows[current].sample(rng);
            match self.model.transitions[current].get(k) {
                Some(&(next, _)) => current = next,
                None => break,
            }
        }
    }

    pub fn walk<R: rand::Rng>(&self, rng: &mut R, visited: &mut Vec<usize>) {
        let first = self.start.sample(rng);
        self.walk_from(first, rng, visited);
    }
}

/// Draws `count` paths: start from `S`, follow `Q`/`R` until absorption and
/// keep the last node of every visited state.
pub fn sample_paths(model: &MogenModel, count: u64, seed: u64) -> Result<PathDataset> {
    if count == 0 {
        return Err(Error::Argument("sample count must be positive".into()));
    }
    let sampler = Sampler::new(model)?;
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let partial: Vec<BTreeMap<Vec<String>, u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
            let mut out: BTreeMap<Vec<String>, u64> = BTreeMap::new();
            let mut visited = Vec::new();
            for _ in 0..n {
                sampler.walk(&mut rng, &mut visited);
                let nodes = visited
                    .iter()
                    .map(|&i| model.states[i].last().to_owned())
                    .collect();
                *out.entry(nodes).or_default() += 1;
            }
            out
        })
        .collect();
    let mut ds = PathDataset::new();
    for part in partial {
        for (nodes, f) in part {
            ds.insert(nodes, f)?;
        }
    }
    Ok(ds)
}
