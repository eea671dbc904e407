#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, VecDeque};

use mogen::state::State;
use mogen::{MogenModel, NetworkModel, PathDataset};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn node_name(i: usize) -> String {
    ((b'a' + i as u8) as char).to_string()
}

/// Random corpus over at most `max_nodes` nodes with at most `max_paths`
/// observations of length 1..=`max_len`.
pub fn random_corpus(
    rng: &mut impl Rng,
    max_nodes: usize,
    max_paths: u64,
    max_len: usize,
) -> PathDataset {
    let nodes = rng.random_range(2..=max_nodes);
    let mut paths: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut total = 0;
    let budget = rng.random_range(2..=max_paths);
    while total < budget {
        let len = rng.random_range(1..=max_len);
        let p: Vec<String> = (0..len)
            .map(|_| node_name(rng.random_range(0..nodes)))
            .collect();
        let f = rng.random_range(1..=3).min(budget - total);
        *paths.entry(p).or_default() += f;
        total += f;
    }
    let seqs: Vec<(Vec<String>, u64)> = paths.into_iter().collect();
    let refs: Vec<(&[String], u64)> = seqs.iter().map(|(p, f)| (p.as_slice(), *f)).collect();
    PathDataset::from_sequences(&refs).unwrap()
}

pub fn random_digraph(rng: &mut impl Rng, max_nodes: usize) -> NetworkModel {
    let n = rng.random_range(1..=max_nodes);
    let names: Vec<String> = (0..n).map(node_name).collect();
    let density: f64 = rng.random_range(0.1..0.7);
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.random_bool(density) {
                edges.push((names[s].as_str(), names[t].as_str(), 1));
            }
        }
    }
    NetworkModel::from_edges(names.iter().map(String::as_str), edges)
}

/// Betweenness by listing every shortest path of every ordered pair, in
/// exact rational arithmetic.
pub fn brute_force_betweenness(model: &NetworkModel) -> Vec<Ratio<i64>> {
    let n = model.nodes().len();
    let adj = model.successors();
    let dist = floyd_warshall(adj);
    let mut out = vec![Ratio::from_integer(0); n];
    for s in 0..n {
        for t in 0..n {
            if s == t || dist[s][t].is_none() {
                continue;
            }
            let mut all = Vec::new();
            let mut walk = vec![s];
            enumerate_walks(adj, t, dist[s][t].unwrap() as usize, &mut walk, &mut all);
            let sigma = all.len() as i64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = all.iter().filter(|w| w.contains(&v)).count() as i64;
                out[v] += Ratio::new(through, sigma);
            }
        }
    }
    out
}

fn enumerate_walks(
    adj: &[Vec<usize>],
    target: usize,
    steps: usize,
    walk: &mut Vec<usize>,
    all: &mut Vec<Vec<usize>>,
) {
    let here = *walk.last().unwrap();
    if steps == 0 {
        if here == target {
            all.push(walk.clone());
        }
        return;
    }
    for &w in &adj[here] {
        walk.push(w);
        enumerate_walks(adj, target, steps - 1, walk, all);
        walk.pop();
    }
}

pub fn floyd_warshall(adj: &[Vec<usize>]) -> Vec<Vec<Option<u32>>> {
    let n = adj.len();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in adj.iter().enumerate() {
        d[i][i] = Some(0);
        for &j in row {
            if i != j {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Plain BFS distances from `source`.
pub fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; adj.len()];
    d[source] = Some(0);
    let mut q = VecDeque::from([source]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if d[w].is_none() {
                d[w] = Some(d[v].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    d
}

fn s(nodes: &[&str]) -> State {
    State::new(nodes.iter().map(|n| n.to_string()).collect())
}

/// Generative K=2 model with order-2 correlations: where a path goes after
/// a hub and whether it stops after a target depend on the node before.
/// Sources `s0..s5` feed hubs `h0..h2`, hubs lead to targets `t0..t3`, and
/// targets either end the path or return to a hub.
pub fn planted_model() -> MogenModel {
    let src: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
    let hub: Vec<String> = (0..3).map(|i| format!("h{i}")).collect();
    let tgt: Vec<String> = (0..4).map(|i| format!("t{i}")).collect();
    let mut start = BTreeMap::new();
    let mut moves: BTreeMap<State, BTreeMap<State, u64>> = BTreeMap::new();
    let mut end: BTreeMap<State, u64> = BTreeMap::new();
    let mut add = |from: State, to: State, c: u64| {
        *moves.entry(from).or_default().entry(to).or_default() += c;
    };
    for (i, a) in src.iter().enumerate() {
        start.insert(s(&[a]), 10 + 5 * i as u64);
        add(s(&[a]), s(&[a, &hub[i % 3]]), 3);
        add(s(&[a]), s(&[a, &hub[(i + 1) % 3]]), 1);
        for (j, h) in hub.iter().enumerate() {
            add(s(&[a, h]), s(&[h, &tgt[(i + j) % 4]]), 4);
            add(s(&[a, h]), s(&[h, &tgt[(i + 2 * j + 1) % 4]]), 1);
            if i % 2 == 1 {
                end.insert(s(&[a, h]), 1);
            }
        }
    }
    for (j, h) in hub.iter().enumerate() {
        for (k, t) in tgt.iter().enumerate() {
            end.insert(s(&[h, t]), if (j + k) % 2 == 0 { 6 } else { 1 });
            add(s(&[h, t]), s(&[t, &hub[(k + j) % 3]]), 2);
            add(s(&[t, h]), s(&[h, &tgt[(k + 1) % 4]]), 1);
            end.insert(s(&[t, h]), 2);
        }
    }
    MogenModel::from_counts(2, start, moves, end).unwrap()
}
