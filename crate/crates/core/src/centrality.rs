//! The five centrality measures on network, path and MOGen models.
//!
//! Path-model measures at order `h` are the first-order measures of the
//! order-`h` windowed paths. MOGen measures are computed per multi-order
//! state and aggregated onto order-`h` suffixes: sums for betweenness and
//! end probability, visitation-weighted averages for continuation
//! probability and reach. Path-model scores are per-path expectations
//! (divided by `N`) so they coincide with MOGen values when `K = l_max`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mogen_model::{MogenModel, VisitStatistics};
use crate::network_model::{
    harmonic_closeness, network_betweenness, path_distances, project_distances, Direction,
    NetworkModel,
};
use crate::path_data::{window_sequences, PathDataset};
use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Betweenness,
    Closeness,
    EndProbability,
    ContinuationProbability,
    Reach,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Betweenness,
        Measure::Closeness,
        Measure::EndProbability,
        Measure::ContinuationProbability,
        Measure::Reach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Betweenness => "betweenness",
            Measure::Closeness => "closeness",
            Measure::EndProbability => "end_probability",
            Measure::ContinuationProbability => "continuation_probability",
            Measure::Reach => "reach",
        }
    }

    /// Whether the measure needs path start/end information.
    pub fn needs_path_ends(self) -> bool {
        !matches!(self, Measure::Betweenness | Measure::Closeness)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "betweenness" => Measure::Betweenness,
            "closeness" => Measure::Closeness,
            "end_probability" | "end" => Measure::EndProbability,
            "continuation_probability" | "continuation" => Measure::ContinuationProbability,
            "reach" | "path_reach" => Measure::Reach,
            _ => return Err(Error::Argument(format!("unknown measure `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Network,
    Mogen,
    Path,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Network => "network",
            ModelKind::Mogen => "mogen",
            ModelKind::Path => "path",
        }
    }
}

/// Scores of one measure on one model at evaluation order `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector {
    pub measure: Measure,
    pub model_kind: ModelKind,
    pub order: usize,
    pub scores: BTreeMap<State, f64>,
}

impl CentralityVector {
    pub fn get(&self, state: &State) -> Option<f64> {
        self.scores.get(state).copied()
    }
}

fn check_order(h: usize) -> Result<()> {
    if h < 1 {
        return Err(Error::Argument(
            "evaluation order must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Per-state occurrence statistics of windowed paths, multiplicity-weighted.
#[derive(Debug, Default, Clone, Copy)]
struct Occurrences {
    total: u64,
    interior: u64,
    last: u64,
    remaining: u64,
}

fn occurrences(ds: &PathDataset, h: usize) -> Result<BTreeMap<State, Occurrences>> {
    let windowed = window_sequences(ds, h)?;
    let mut out: BTreeMap<State, Occurrences> = BTreeMap::new();
    for (seq, f) in windowed.iter() {
        let l = seq.len();
        for (i, name) in seq.iter().enumerate() {
            let state = State::parse(name).expect("window states are well-formed");
            let o = out.entry(state).or_default();
            o.total += f;
            if i > 0 && i + 1 < l {
                o.interior += f;
            }
            if i + 1 == l {
                o.last += f;
            }
            o.remaining += f * (l - 1 - i) as u64;
        }
    }
    Ok(out)
}

/// Multiplicity-weighted count of interior occurrences per order-`h` state.
pub fn path_interior_counts(ds: &PathDataset, h: usize) -> Result<BTreeMap<State, u64>> {
    check_order(h)?;
    Ok(occurrences(ds, h)?
        .into_iter()
        .map(|(s, o)| (s, o.interior))
        .collect())
}

fn path_vector(
    ds: &PathDataset,
    h: usize,
    measure: Measure,
    score: impl Fn(&Occurrences, f64) -> f64,
) -> Result<CentralityVector> {
    check_order(h)?;
    if ds.is_empty() {
        return Err(Error::Argument("path dataset is empty".into()));
    }
    let n = ds.total() as f64;
    let scores = occurrences(ds, h)?
        .into_iter()
        .map(|(s, o)| (s, score(&o, n)))
        .collect();
    Ok(CentralityVector {
        measure,
        model_kind: ModelKind::Path,
        order: h,
        scores,
    })
}

/// Interior occurrences of each state per path.
pub fn path_betweenness(ds: &PathDataset, h: usize) -> Result<CentralityVector> {
    path_vector(ds, h, Measure::Betweenness, |o, n| o.interior as f64 / n)
}

/// Fraction of paths ending in each state.
pub fn path_end_probability(ds: &PathDataset, h: usize) -> Result<CentralityVector> {
    path_vector(ds, h, Measure::EndProbability, |o, n| o.last as f64 / n)
}

/// Fraction of occurrences that are not the last state of their path.
pub fn path_continuation_probability(ds: &PathDataset, h: usize) -> Result<CentralityVector> {
    path_vector(ds, h, Measure::ContinuationProbability, |o, _| {
        (o.total - o.last) as f64 / o.total as f64
    })
}

/// Mean number of transitions remaining after an occurrence.
pub fn path_reach(ds: &PathDataset, h: usize) -> Result<CentralityVector> {
    path_vector(ds, h, Measure::Reach, |o, _| {
        o.remaining as f64 / o.total as f64
    })
}

/// Harmonic closeness over shortest observed sub-paths.
pub fn path_closeness(
    ds: &PathDataset,
    h: usize,
    direction: Direction,
) -> Result<CentralityVector> {
    check_order(h)?;
    if ds.is_empty() {
        return Err(Error::Argument("path dataset is empty".into()));
    }
    let d = path_distances(&window_sequences(ds, h)?);
    Ok(CentralityVector {
        measure: Measure::Closeness,
        model_kind: ModelKind::Path,
        order: h,
        scores: harmonic_closeness(&d, direction),
    })
}

pub fn path_centrality(ds: &PathDataset, measure: Measure, h: usize) -> Result<CentralityVector> {
    match measure {
        Measure::Betweenness => path_betweenness(ds, h),
        Measure::Closeness => path_closeness(ds, h, Direction::Out),
        Measure::EndProbability => path_end_probability(ds, h),
        Measure::ContinuationProbability => path_continuation_probability(ds, h),
        Measure::Reach => path_reach(ds, h),
    }
}

/// MOGen model together with the solved visit statistics.
#[derive(Debug, Clone)]
pub struct MogenScorer<'a> {
    pub model: &'a MogenModel,
    pub stats: &'a VisitStatistics,
}

impl MogenScorer<'_> {
    /// Expected terminations in each state: `(S F)_u R_u`.
    fn terminations(&self, i: usize) -> f64 {
        self.stats.visits[i] * self.model.absorption()[i]
    }

    fn vector(&self, measure: Measure, h: usize, scores: BTreeMap<State, f64>) -> CentralityVector {
        CentralityVector {
            measure,
            model_kind: ModelKind::Mogen,
            order: h,
            scores,
        }
    }

    fn summed(
        &self,
        measure: Measure,
        h: usize,
        value: impl Fn(usize) -> f64,
    ) -> Result<CentralityVector> {
        check_order(h)?;
        let mut scores: BTreeMap<State, f64> = BTreeMap::new();
        for (i, s) in self.model.states().iter().enumerate() {
            *scores.entry(s.suffix(h)).or_insert(0.0) += value(i);
        }
        Ok(self.vector(measure, h, scores))
    }

    fn visit_weighted(
        &self,
        measure: Measure,
        h: usize,
        value: impl Fn(usize) -> f64,
    ) -> Result<CentralityVector> {
        check_order(h)?;
        let mut acc: BTreeMap<State, (f64, f64)> = BTreeMap::new();
        for (i, s) in self.model.states().iter().enumerate() {
            let w = self.stats.visits[i];
            let e = acc.entry(s.suffix(h)).or_insert((0.0, 0.0));
            e.0 += w * value(i);
            e.1 += w;
        }
        let scores = acc
            .into_iter()
            .map(|(s, (num, den))| (s, if den > 0.0 { num / den } else { 0.0 }))
            .collect();
        Ok(self.vector(measure, h, scores))
    }

    /// Expected interior visits: `S F - s - e`, adding back `s R` for paths
    /// that start and end in the same state so that such single-state paths
    /// are not subtracted twice.
    pub fn betweenness(&self, h: usize) -> Result<CentralityVector> {
        let start = self.model.start();
        let r = self.model.absorption();
        self.summed(Measure::Betweenness, h, |i| {
            self.stats.visits[i] - start[i] - self.terminations(i) + start[i] * r[i]
        })
    }

    pub fn end_probability(&self, h: usize) -> Result<CentralityVector> {
        self.summed(Measure::EndProbability, h, |i| self.terminations(i))
    }

    /// `1 - R` per state, averaged with visit weights.
    pub fn continuation_probability(&self, h: usize) -> Result<CentralityVector> {
        let r = self.model.absorption();
        self.visit_weighted(Measure::ContinuationProbability, h, |i| 1.0 - r[i])
    }

    /// Row sum of `F` minus one, averaged with visit weights.
    pub fn reach(&self, h: usize) -> Result<CentralityVector> {
        self.visit_weighted(Measure::Reach, h, |i| self.stats.row_sums[i] - 1.0)
    }

    /// Harmonic closeness on the multi-order distances projected onto
    /// order-`h` suffixes.
    pub fn closeness(&self, h: usize, direction: Direction) -> Result<CentralityVector> {
        check_order(h)?;
        let d = project_distances(&self.model.distances(), h);
        Ok(self.vector(Measure::Closeness, h, harmonic_closeness(&d, direction)))
    }

    pub fn centrality(&self, measure: Measure, h: usize) -> Result<CentralityVector> {
        match measure {
            Measure::Betweenness => self.betweenness(h),
            Measure::Closeness => self.closeness(h, Direction::Out),
            Measure::EndProbability => self.end_probability(h),
            Measure::ContinuationProbability => self.continuation_probability(h),
            Measure::Reach => self.reach(h),
        }
    }
}

/// Network measures exist only for first-order nodes; measures that need
/// path starts and ends are rejected.
pub fn network_centrality(
    model: &NetworkModel,
    measure: Measure,
    direction: Direction,
) -> Result<CentralityVector> {
    let scores = match measure {
        Measure::Betweenness => network_betweenness(model),
        Measure::Closeness => harmonic_closeness(&model.distances(), direction),
        m => {
            return Err(Error::UnsupportedMeasure {
                measure: m.name(),
                model: "network",
            })
        }
    };
    Ok(CentralityVector {
        measure,
        model_kind: ModelKind::Network,
        order: 1,
        scores,
    })
}
