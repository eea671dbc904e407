//! Path corpora: parsing, time-respecting path extraction, train/test
//! splitting and order-h window rewriting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{is_valid_node, State, PATH_SEPARATOR, STATE_SEPARATOR};

/// One observed path and its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<String>,
    pub frequency: u64,
}

/// A multiset of paths kept in canonical (sorted) order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathDataset {
    paths: BTreeMap<Vec<String>, u64>,
}

impl PathDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset from paths, merging identical node sequences.
    pub fn from_paths<I>(paths: I) -> Result<Self>
    where
        I: IntoIterator<Item = Path>,
    {
        let mut ds = PathDataset::new();
        for path in paths {
            if let Some(bad) = path.nodes.iter().find(|n| !is_valid_node(n)) {
                return Err(Error::Argument(format!("invalid node identifier `{bad}`")));
            }
            ds.insert(path.nodes, path.frequency)?;
        }
        Ok(ds)
    }

    /// Convenience constructor from string slices, mostly for tests.
    pub fn from_sequences<S: AsRef<str>>(paths: &[(&[S], u64)]) -> Result<Self> {
        Self::from_paths(paths.iter().map(|(nodes, f)| Path {
            nodes: nodes.iter().map(|n| n.as_ref().to_owned()).collect(),
            frequency: *f,
        }))
    }

    /// Inserts without node-identifier validation; composite window states
    /// legitimately contain the state separator.
    pub(crate) fn insert(&mut self, nodes: Vec<String>, frequency: u64) -> Result<()> {
        if nodes.is_empty() {
            return Err(Error::Argument(
                "paths must contain at least one node".into(),
            ));
        }
        if frequency == 0 {
            return Err(Error::Argument("path frequency must be positive".into()));
        }
        *self.paths.entry(nodes).or_insert(0) += frequency;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], u64)> + '_ {
        self.paths.iter().map(|(nodes, &f)| (nodes.as_slice(), f))
    }

    pub fn paths(&self) -> Vec<Path> {
        self.iter()
            .map(|(nodes, frequency)| Path {
                nodes: nodes.to_vec(),
                frequency,
            })
            .collect()
    }

    pub fn frequency(&self, nodes: &[String]) -> u64 {
        self.paths.get(nodes).copied().unwrap_or(0)
    }

    /// N: total number of observations counting multiplicity.
    pub fn total(&self) -> u64 {
        self.paths.values().sum()
    }

    pub fn unique(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn node_universe(&self) -> BTreeSet<String> {
        self.paths.keys().flatten().cloned().collect()
    }

    /// Maximum number of nodes on any path.
    pub fn max_length(&self) -> usize {
        self.paths.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Canonical text form: one path per line, frequency appended after a
    /// tab when it is larger than one.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (nodes, &f) in &self.paths {
            out.push_str(&nodes.join(&PATH_SEPARATOR.to_string()));
            if f != 1 {
                let _ = write!(out, "\t{f}");
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> DatasetSummary {
        let total = self.total();
        let mut lengths: Vec<(usize, u64)> = self.iter().map(|(n, f)| (n.len(), f)).collect();
        lengths.sort_unstable();
        let mean = if total == 0 {
            0.0
        } else {
            lengths
                .iter()
                .map(|&(l, f)| l as f64 * f as f64)
                .sum::<f64>()
                / total as f64
        };
        let nth = |k: u64| -> usize {
            let mut seen = 0;
            for &(l, f) in &lengths {
                seen += f;
                if seen > k {
                    return l;
                }
            }
            0
        };
        let median = match total {
            0 => 0.0,
            t if t % 2 == 1 => nth(t / 2) as f64,
            t => (nth(t / 2 - 1) + nth(t / 2)) as f64 / 2.0,
        };
        let links: BTreeSet<(&str, &str)> = self
            .paths
            .keys()
            .flat_map(|n| n.windows(2).map(|w| (w[0].as_str(), w[1].as_str())))
            .collect();
        DatasetSummary {
            total_paths: total,
            unique_paths: self.unique() as u64,
            mean_length: mean,
            median_length: median,
            nodes: self.node_universe().len() as u64,
            links: links.len() as u64,
        }
    }
}

/// Corpus statistics: path counts, nodes per path and topology size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total_paths: u64,
    pub unique_paths: u64,
    pub mean_length: f64,
    pub median_length: f64,
    pub nodes: u64,
    pub links: u64,
}

/// Parses the path file format: `v1,v2,...,vl` optionally followed by a
/// tab and a positive frequency. Blank lines are skipped.
pub fn parse_path_file(text: &str) -> Result<PathDataset> {
    let mut ds = PathDataset::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let (body, frequency) = match line.split_once('\t') {
            None => (line, 1),
            Some((body, freq)) => {
                let f: u64 = freq
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("invalid frequency `{freq}`")))?;
                if f < 1 {
                    return Err(err("frequency must be at least 1".into()));
                }
                (body, f)
            }
        };
        let mut nodes = Vec::new();
        for token in body.split(PATH_SEPARATOR) {
            if token.is_empty() {
                return Err(err("empty node identifier".into()));
            }
            if token.contains(STATE_SEPARATOR) || token.contains('\t') {
                return Err(err(format!("reserved character in node `{token}`")));
            }
            nodes.push(token.to_owned());
        }
        ds.insert(nodes, frequency)?;
    }
    Ok(ds)
}

pub fn read_path_file<R: Read>(mut reader: R) -> Result<PathDataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_path_file(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub source: String,
    pub target: String,
    pub timestamp: i64,
}

/// Time-stamped directed interactions. Duplicates are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemporalNetwork {
    pub edges: Vec<TemporalEdge>,
}

impl TemporalNetwork {
    pub fn new(edges: Vec<TemporalEdge>) -> Self {
        TemporalNetwork { edges }
    }

    /// Reads CSV with header `source,target,timestamp`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["source", "target", "timestamp"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `source,target,timestamp`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut edges = Vec::new();
        for (i, record) in rdr.deserialize::<TemporalEdge>().enumerate() {
            let edge = record.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            for node in [&edge.source, &edge.target] {
                if !is_valid_node(node) {
                    return Err(Error::Parse {
                        line: i + 2,
                        message: format!("invalid node identifier `{node}`"),
                    });
                }
            }
            edges.push(edge);
        }
        if edges.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no temporal edges".into(),
            });
        }
        Ok(TemporalNetwork { edges })
    }
}

/// Extracts all maximal time-respecting paths.
///
/// Edge `(u,v;t1)` precedes `(v,w;t2)` iff `t1 < t2 <= t1 + delta`. Every
/// root-to-leaf path of the resulting event DAG becomes one observed path.
/// With `max_paths` set, the number of paths is counted before enumeration
/// and an error is returned when it exceeds the limit.
pub fn extract_paths(
    net: &TemporalNetwork,
    delta: u64,
    max_paths: Option<u64>,
) -> Result<PathDataset> {
    let delta = i64::try_from(delta).map_err(|_| Error::Argument("delta too large".into()))?;
    let mut order: Vec<usize> = (0..net.edges.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&net.edges[a], &net.edges[b]);
        (ea.timestamp, &ea.source, &ea.target).cmp(&(eb.timestamp, &eb.source, &eb.target))
    });
    let edges: Vec<&TemporalEdge> = order.iter().map(|&i| &net.edges[i]).collect();

    // Outgoing events per node, sorted by time because `edges` is.
    let mut outgoing: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        outgoing.entry(e.source.as_str()).or_default().push(i);
    }

    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    let mut has_predecessor = vec![false; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let Some(out) = outgoing.get(e.target.as_str()) else {
            continue;
        };
        let lo = out.partition_point(|&j| edges[j].timestamp <= e.timestamp);
        let hi = out.partition_point(|&j| edges[j].timestamp <= e.timestamp.saturating_add(delta));
        for &j in &out[lo..hi] {
            successors[i].push(j);
            has_predecessor[j] = true;
        }
    }

    // Successors are strictly later, so reverse time order is a valid
    // topological order for counting root-to-leaf paths.
    let mut counts = vec![0u64; edges.len()];
    for i in (0..edges.len()).rev() {
        counts[i] = if successors[i].is_empty() {
            1
        } else {
            successors[i]
                .iter()
                .fold(0u64, |acc, &j| acc.saturating_add(counts[j]))
        };
    }
    let roots: Vec<usize> = (0..edges.len()).filter(|&i| !has_predecessor[i]).collect();
    if let Some(limit) = max_paths {
        let total = roots
            .iter()
            .fold(0u64, |acc, &r| acc.saturating_add(counts[r]));
        if total > limit {
            return Err(Error::PathLimit { limit });
        }
    }

    let mut ds = PathDataset::new();
    for &root in &roots {
        let mut nodes = vec![edges[root].source.clone()];
        // (event, index of next successor to try)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        nodes.push(edges[root].target.clone());
        while let Some(top) = stack.last_mut() {
            let (event, next) = *top;
            if successors[event].is_empty() {
                ds.insert(nodes.clone(), 1)?;
            }
            if next < successors[event].len() {
                top.1 += 1;
                let child = successors[event][next];
                nodes.push(edges[child].target.clone());
                stack.push((child, 0));
            } else {
                stack.pop();
                nodes.pop();
            }
        }
    }
    Ok(ds)
}

/// Parameters of one random train/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub repetition_index: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, repetition_index: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
            repetition_index,
        })
    }
}

/// Assigns every observation independently to the training set with
/// probability `train_fraction`. Deterministic in `(seed, repetition_index)`.
pub fn split(ds: &PathDataset, spec: &SplitSpec) -> Result<(PathDataset, PathDataset)> {
    let spec = SplitSpec::new(spec.train_fraction, spec.seed, spec.repetition_index)?;
    if ds.total() < 2 {
        return Err(Error::Argument(
            "splitting requires at least two observations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.repetition_index);
    let mut train = PathDataset::new();
    let mut test = PathDataset::new();
    for (nodes, f) in ds.iter() {
        let binomial =
            Binomial::new(f, spec.train_fraction).map_err(|e| Error::Argument(e.to_string()))?;
        let k = binomial.sample(&mut rng);
        if k > 0 {
            train.insert(nodes.to_vec(), k)?;
        }
        if f - k > 0 {
            test.insert(nodes.to_vec(), f - k)?;
        }
    }
    if train.is_empty() {
        return Err(Error::EmptySplit { side: "training" });
    }
    if test.is_empty() {
        return Err(Error::EmptySplit { side: "test" });
    }
    Ok((train, test))
}

/// The sequence of multi-order states visited by `nodes` when memory is
/// capped at `max_order`: orders grow 1..max_order, then slide.
pub fn state_sequence(nodes: &[String], max_order: usize) -> Vec<State> {
    (0..nodes.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(max_order);
            State::new(nodes[start..=i].to_vec())
        })
        .collect()
}

/// Rewrites every path as its sequence of order-`h` states, serialized
/// with `|` between member nodes.
pub fn window_sequences(ds: &PathDataset, h: usize) -> Result<PathDataset> {
    if h < 1 {
        return Err(Error::Argument("window order must be at least 1".into()));
    }
    let mut out = PathDataset::new();
    for (nodes, f) in ds.iter() {
        let states = state_sequence(nodes, h)
            .iter()
            .map(State::to_string)
            .collect();
        out.insert(states, f)?;
    }
    Ok(out)
}
