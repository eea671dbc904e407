//! First-order network model, hop distances, shortest-path betweenness and
//! harmonic closeness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path_data::PathDataset;
use crate::state::State;

/// Directed graph of all consecutive node pairs seen on training paths.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// (source, target) -> multiplicity-weighted observation count
    edges: BTreeMap<(usize, usize), u64>,
    successors: Vec<Vec<usize>>,
}

impl NetworkModel {
    pub fn from_edges<'a, N, E>(nodes: N, edges: E) -> Self
    where
        N: IntoIterator<Item = &'a str>,
        E: IntoIterator<Item = (&'a str, &'a str, u64)>,
    {
        let mut set: BTreeSet<String> = nodes.into_iter().map(str::to_owned).collect();
        let edges: Vec<_> = edges.into_iter().collect();
        for &(s, t, _) in &edges {
            set.insert(s.to_owned());
            set.insert(t.to_owned());
        }
        let nodes: Vec<String> = set.into_iter().collect();
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut counts = BTreeMap::new();
        for (s, t, c) in edges {
            *counts.entry((index[s], index[t])).or_insert(0) += c;
        }
        let mut successors = vec![Vec::new(); nodes.len()];
        for &(s, t) in counts.keys() {
            successors[s].push(t);
        }
        NetworkModel {
            nodes,
            index,
            edges: counts,
            successors,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edge_count(&self, source: &str, target: &str) -> u64 {
        match (self.index.get(source), self.index.get(target)) {
            (Some(&s), Some(&t)) => self.edges.get(&(s, t)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Edges as `(source, target, count)` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.edges
            .iter()
            .map(|(&(s, t), &c)| (self.nodes[s].as_str(), self.nodes[t].as_str(), c))
    }

    pub fn successors(&self) -> &[Vec<usize>] {
        &self.successors
    }

    /// Hop distances over the directed edges; counts are ignored.
    pub fn distances(&self) -> DistanceMatrix {
        let states = self.nodes.iter().map(|n| State::single(n)).collect();
        DistanceMatrix::from_adjacency(states, &self.successors)
    }
}

/// Network model containing every transition in the training paths.
pub fn build_network(train: &PathDataset) -> Result<NetworkModel> {
    if train.is_empty() {
        return Err(Error::Argument(
            "cannot build a network from an empty dataset".into(),
        ));
    }
    let universe = train.node_universe();
    let mut edges: Vec<(&str, &str, u64)> = Vec::new();
    for (nodes, f) in train.iter() {
        for w in nodes.windows(2) {
            edges.push((w[0].as_str(), w[1].as_str(), f));
        }
    }
    Ok(NetworkModel::from_edges(
        universe.iter().map(String::as_str),
        edges,
    ))
}

/// Dense all-pairs hop distances between states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    states: Vec<State>,
    index: HashMap<State, usize>,
    dist: Vec<u32>,
}

const UNREACHABLE: u32 = u32::MAX;

impl DistanceMatrix {
    fn unreachable(states: Vec<State>) -> Self {
        let n = states.len();
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut dist = vec![UNREACHABLE; n * n];
        for i in 0..n {
            dist[i * n + i] = 0;
        }
        DistanceMatrix {
            states,
            index,
            dist,
        }
    }

    /// Breadth-first search from every state over `successors`, which is
    /// indexed like `states`.
    pub fn from_adjacency(states: Vec<State>, successors: &[Vec<usize>]) -> Self {
        let n = states.len();
        assert_eq!(successors.len(), n);
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|s| bfs_hops(successors, s))
            .collect();
        let mut m = Self::unreachable(states);
        for (s, row) in rows.into_iter().enumerate() {
            m.dist[s * n..(s + 1) * n].copy_from_slice(&row);
        }
        m
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

    /// Distance between states by index; `None` when unreachable.
    pub fn at(&self, from: usize, to: usize) -> Option<u32> {
        let d = self.dist[from * self.states.len() + to];
        (d != UNREACHABLE).then_some(d)
    }

    pub fn get(&self, from: &State, to: &State) -> Option<u32> {
        self.at(self.index_of(from)?, self.index_of(to)?)
    }

    fn relax(&mut self, from: usize, to: usize, d: u32) {
        let n = self.states.len();
        let slot = &mut self.dist[from * n + to];
        if d < *slot {
            *slot = d;
        }
    }
}

fn bfs_hops(successors: &[Vec<usize>], source: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; successors.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &w in &successors[v] {
            if dist[w] == UNREACHABLE {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Sub-path distances on observed paths: `d(v,w)` is the fewest transitions
/// on any contiguous stretch of an observed path from `v` to `w`. Node
/// identifiers that are composite window states are parsed as such.
pub fn path_distances(ds: &PathDataset) -> DistanceMatrix {
    let states: Vec<State> = ds
        .node_universe()
        .iter()
        .map(|n| State::parse(n).unwrap_or_else(|| State::single(n)))
        .collect();
    let mut m = DistanceMatrix::unreachable(states);
    let lookup: HashMap<String, usize> = m
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i))
        .collect();
    for (nodes, _) in ds.iter() {
        let ids: Vec<usize> = nodes.iter().map(|n| lookup[n.as_str()]).collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                m.relax(ids[i], ids[j], (j - i) as u32);
            }
        }
    }
    m
}

/// Projects distances between multi-order states onto their order-`h`
/// suffixes: `d(a,b)` is the minimum over states ending in `a` and states
/// ending in `b`. With `h = 1` this yields first-order node distances.
pub fn project_distances(d: &DistanceMatrix, h: usize) -> DistanceMatrix {
    let keys_of: Vec<State> = d.states.iter().map(|s| s.suffix(h)).collect();
    let keys: Vec<State> = keys_of
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = DistanceMatrix::unreachable(keys);
    let key_idx: Vec<usize> = keys_of.iter().map(|k| out.index[k]).collect();
    let n = d.states.len();
    for u in 0..n {
        for w in 0..n {
            let dist = d.dist[u * n + w];
            if dist != UNREACHABLE {
                out.relax(key_idx[u], key_idx[w], dist);
            }
        }
    }
    out
}

/// Which distances enter the harmonic sum of a state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Distances from the state to every other state (row of D).
    #[default]
    Out,
    /// Distances from every other state to the state (column of D).
    In,
}

/// Harmonic closeness: sum of `1/d` over the other reachable states.
pub fn harmonic_closeness(d: &DistanceMatrix, direction: Direction) -> BTreeMap<State, f64> {
    let n = d.len();
    // Sum in canonical state order so results do not depend on insertion.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d.states[a].cmp(&d.states[b]));
    order
        .iter()
        .map(|&v| {
            let mut score = 0.0;
            for &w in &order {
                if w == v {
                    continue;
                }
                let dist = match direction {
                    Direction::Out => d.at(v, w),
                    Direction::In => d.at(w, v),
                };
                if let Some(dist) = dist {
                    score += 1.0 / f64::from(dist);
                }
            }
            (d.states[v].clone(), score)
        })
        .collect()
}

/// Shortest-path betweenness `sum_{s != v != t} sigma_st(v) / sigma_st`
/// over ordered pairs, counting every shortest path.
///
/// Two-phase scheme: BFS from each source counts shortest paths, then
/// dependencies are accumulated in order of non-increasing distance.
pub fn network_betweenness(model: &NetworkModel) -> BTreeMap<State, f64> {
    let n = model.nodes.len();
    let adj = &model.successors;
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut sigma = vec![0.0f64; n];
            let mut dist = vec![UNREACHABLE; n];
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut stack = Vec::with_capacity(n);
            sigma[s] = 1.0;
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                stack.push(v);
                for &w in &adj[v] {
                    if dist[w] == UNREACHABLE {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            let mut delta = vec![0.0f64; n];
            let mut out = vec![0.0f64; n];
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    out[w] = delta[w];
                }
            }
            out
        })
        .collect();
    let mut scores = vec![0.0f64; n];
    for row in &partials {
        for (acc, x) in scores.iter_mut().zip(row) {
            *acc += x;
        }
    }
    model
        .nodes
        .iter()
        .zip(scores)
        .map(|(node, b)| (State::single(node), b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PathDataset {
        PathDataset::from_sequences(&[
            (&["A", "C", "D", "E"][..], 1),
            (&["B", "C", "D", "F"][..], 1),
        ])
        .unwrap()
    }

    fn s(x: &str) -> State {
        State::parse(x).unwrap()
    }

    #[test]
    fn toy_network_edges() {
        let net = build_network(&toy()).unwrap();
        assert_eq!(net.nodes().len(), 6);
        let edges: Vec<_> = net.edges().map(|(a, b, _)| format!("{a}{b}")).collect();
        assert_eq!(edges, ["AC", "BC", "CD", "DE", "DF"]);
    }

    #[test]
    fn self_loop_and_multiplicity() {
        let net =
            build_network(&PathDataset::from_sequences(&[(&["A", "A"][..], 1)]).unwrap()).unwrap();
        assert_eq!(net.nodes(), ["A"]);
        assert_eq!(net.edge_count("A", "A"), 1);

        let net =
            build_network(&PathDataset::from_sequences(&[(&["A", "C"][..], 3)]).unwrap()).unwrap();
        assert_eq!(net.edge_count("A", "C"), 3);
        assert!(build_network(&PathDataset::new()).is_err());
    }

    #[test]
    fn toy_distances() {
        let d = build_network(&toy()).unwrap().distances();
        assert_eq!(d.get(&s("A"), &s("F")), Some(3));
        assert_eq!(d.get(&s("F"), &s("A")), None);
        for st in d.states() {
            assert_eq!(d.get(st, st), Some(0));
        }
    }

    #[test]
    fn toy_path_distances() {
        let d = path_distances(&toy());
        assert_eq!(d.get(&s("A"), &s("F")), None);
        assert_eq!(d.get(&s("A"), &s("E")), Some(3));
        assert_eq!(d.get(&s("C"), &s("F")), Some(2));
    }

    #[test]
    fn toy_betweenness() {
        let b = build_network(&toy()).unwrap();
        let b = network_betweenness(&b);
        assert_eq!(b[&s("C")], 6.0);
        assert_eq!(b[&s("D")], 6.0);
        for v in ["A", "B", "E", "F"] {
            assert_eq!(b[&s(v)], 0.0);
        }
    }

    #[test]
    fn star_betweenness() {
        for k in 2..7usize {
            let leaves: Vec<String> = (0..k).map(|i| format!("L{i}")).collect();
            let mut edges = Vec::new();
            for l in &leaves {
                edges.push(("hub", l.as_str(), 1));
                edges.push((l.as_str(), "hub", 1));
            }
            let b = network_betweenness(&NetworkModel::from_edges([], edges));
            assert_eq!(b[&s("hub")], (k * (k - 1)) as f64);
            assert!(leaves.iter().all(|l| b[&s(l)] == 0.0));
        }
    }

    #[test]
    fn no_interior_vertices() {
        let net = NetworkModel::from_edges([], [("a", "b", 1), ("c", "b", 1), ("a", "c", 1)]);
        assert!(network_betweenness(&net).values().all(|&x| x == 0.0));
    }

    #[test]
    fn harmonic_closeness_cases() {
        let c = harmonic_closeness(&build_network(&toy()).unwrap().distances(), Direction::Out);
        assert!((c[&s("A")] - 13.0 / 6.0).abs() < 1e-12);

        let net = NetworkModel::from_edges(["x"], [("v", "w", 1)]);
        let c = harmonic_closeness(&net.distances(), Direction::Out);
        assert_eq!(c[&s("x")], 0.0);
        assert_eq!(c[&s("v")], 1.0);
        assert_eq!(c[&s("w")], 0.0);
        let c = harmonic_closeness(&net.distances(), Direction::In);
        assert_eq!(c[&s("v")], 0.0);
        assert_eq!(c[&s("w")], 1.0);
    }

    #[test]
    fn projection_takes_minimum_over_suffix_states() {
        // A|B -> x -> y -> C|A (3 hops); B|B -> z -> C|A (2 hops).
        let states: Vec<State> = ["A|B", "B|B", "C|A", "x", "y", "z"]
            .iter()
            .map(|t| s(t))
            .collect();
        let adj = vec![vec![3], vec![5], vec![], vec![4], vec![2], vec![2]];
        let d = DistanceMatrix::from_adjacency(states, &adj);
        assert_eq!(d.get(&s("A|B"), &s("C|A")), Some(3));
        assert_eq!(d.get(&s("B|B"), &s("C|A")), Some(2));
        let p = project_distances(&d, 1);
        assert_eq!(p.get(&s("B"), &s("A")), Some(2));
        assert_eq!(p.get(&s("A"), &s("B")), None);
    }

    #[test]
    fn projection_of_first_order_states_is_identity() {
        let d = build_network(&toy()).unwrap().distances();
        assert_eq!(project_distances(&d, 1), d);
    }
}
