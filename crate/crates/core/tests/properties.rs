mod common;

use std::collections::{BTreeMap, BTreeSet};

use mogen::centrality::{path_centrality, MogenScorer};
use mogen::experiment::{
    auc, project_prediction, run_experiment, summarize, top_labels, ExperimentConfig, ModelSpec,
};
use mogen::mogen_model::{expected_visits, sample_paths};
use mogen::network_model::{harmonic_closeness, path_distances, Direction};
use mogen::path_data::{extract_paths, parse_path_file, split, window_sequences, TemporalEdge};
use mogen::state::State;
use mogen::{
    build_network, fit, Measure, NetworkModel, PathDataset, SplitSpec, TemporalNetwork,
    VisitStatistics,
};
use proptest::prelude::*;
use rand::SeedableRng;
use statrs::distribution::{ContinuousCDF, Normal};

fn corpus_strategy() -> impl Strategy<Value = PathDataset> {
    prop::collection::vec((prop::collection::vec(0usize..6, 1..=6), 1u64..4), 1..25).prop_map(
        |raw| {
            let seqs: Vec<(Vec<String>, u64)> = raw
                .into_iter()
                .map(|(p, f)| (p.into_iter().map(common::node_name).collect(), f))
                .collect();
            let refs: Vec<(&[String], u64)> =
                seqs.iter().map(|(p, f)| (p.as_slice(), *f)).collect();
            PathDataset::from_sequences(&refs).unwrap()
        },
    )
}

fn temporal_strategy() -> impl Strategy<Value = Vec<TemporalEdge>> {
    prop::collection::vec((0usize..5, 0usize..5, 0i64..20), 1..25).prop_map(|raw| {
        raw.into_iter()
            .map(|(s, t, ts)| TemporalEdge {
                source: common::node_name(s),
                target: common::node_name(t),
                timestamp: ts,
            })
            .collect()
    })
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..8).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
}

fn network(n: usize, edges: &[(usize, usize)]) -> NetworkModel {
    let names: Vec<String> = (0..n).map(common::node_name).collect();
    NetworkModel::from_edges(
        names.iter().map(String::as_str),
        edges
            .iter()
            .map(|&(s, t)| (names[s].as_str(), names[t].as_str(), 1)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_serialize_is_idempotent(ds in corpus_strategy()) {
        let text = ds.to_text();
        let again = parse_path_file(&text).unwrap();
        prop_assert_eq!(&again, &ds);
        prop_assert_eq!(again.to_text(), text);
    }

    #[test]
    fn extraction_ignores_edge_order(edges in temporal_strategy(), delta in 0u64..6, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let a = extract_paths(&TemporalNetwork::new(edges.clone()), delta, None).unwrap();
        let mut shuffled = edges;
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = extract_paths(&TemporalNetwork::new(shuffled), delta, None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_delta_yields_single_edges(edges in temporal_strategy()) {
        let ds = extract_paths(&TemporalNetwork::new(edges.clone()), 0, None).unwrap();
        prop_assert!(ds.iter().all(|(p, _)| p.len() == 2));
        prop_assert_eq!(ds.total(), edges.len() as u64);
    }

    #[test]
    fn extracted_paths_are_time_respecting(edges in temporal_strategy(), delta in 1u64..6) {
        let ds = extract_paths(&TemporalNetwork::new(edges.clone()), delta, None).unwrap();
        let pairs: BTreeSet<(String, String)> =
            edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect();
        for (p, _) in ds.iter() {
            prop_assert!(p.len() >= 2);
            for w in p.windows(2) {
                prop_assert!(pairs.contains(&(w[0].clone(), w[1].clone())));
            }
        }
        // Every event is covered by at least one path, so path steps bound
        // the number of events from below.
        let steps: u64 = ds.iter().map(|(p, f)| (p.len() as u64 - 1) * f).sum();
        prop_assert!(steps >= edges.len() as u64);
    }

    #[test]
    fn split_partitions_observations(ds in corpus_strategy(), seed in any::<u64>(), rep in 0u64..5, p in 0.1f64..0.9) {
        prop_assume!(ds.total() >= 2);
        let spec = SplitSpec::new(p, seed, rep).unwrap();
        match split(&ds, &spec) {
            Ok((train, test)) => {
                for (nodes, f) in ds.iter() {
                    prop_assert_eq!(train.frequency(nodes) + test.frequency(nodes), f);
                }
                prop_assert_eq!(split(&ds, &spec).unwrap(), (train, test));
            }
            Err(mogen::Error::EmptySplit { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn first_order_windows_are_identity(ds in corpus_strategy()) {
        prop_assert_eq!(window_sequences(&ds, 1).unwrap(), ds);
    }

    #[test]
    fn fitted_model_is_stochastic(ds in corpus_strategy(), k in 1usize..4) {
        let model = fit(&ds, k).unwrap();
        model.validate().unwrap();
        prop_assert!(model.states().iter().all(|s| s.order() <= k));
        let stats = VisitStatistics::compute(&model).unwrap();
        let direct = VisitStatistics::from_fundamental(&model, &mogen::mogen_model::fundamental_matrix(&model).unwrap());
        for (a, b) in stats.visits.iter().zip(&direct.visits) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_visits_reproduce_empirical_counts(ds in corpus_strategy(), k in 1usize..4) {
        let model = fit(&ds, k).unwrap();
        let stats = VisitStatistics::compute(&model).unwrap();
        let visits = expected_visits(&model, &stats);
        let mut counts: BTreeMap<State, u64> = BTreeMap::new();
        for (p, f) in ds.iter() {
            for s in mogen::path_data::state_sequence(p, k) {
                *counts.entry(s).or_default() += f;
            }
        }
        let n = ds.total() as f64;
        for (s, c) in counts {
            prop_assert!((visits[&s] - c as f64 / n).abs() < 1e-9);
        }
    }

    #[test]
    fn bfs_matches_floyd_warshall((n, edges) in graph_strategy()) {
        let net = network(n, &edges);
        let d = net.distances();
        let fw = common::floyd_warshall(net.successors());
        for (i, row) in fw.iter().enumerate() {
            let b = common::bfs(net.successors(), i);
            for (j, &want) in row.iter().enumerate() {
                prop_assert_eq!(d.at(i, j), want);
                prop_assert_eq!(b[j], want);
            }
        }
    }

    #[test]
    fn adding_an_edge_never_lowers_closeness((n, edges) in graph_strategy(), extra in (0usize..8, 0usize..8)) {
        let (s, t) = (extra.0 % n, extra.1 % n);
        let before = harmonic_closeness(&network(n, &edges).distances(), Direction::Out);
        let mut more = edges.clone();
        more.push((s, t));
        let after = harmonic_closeness(&network(n, &more).distances(), Direction::Out);
        for (state, c) in &before {
            prop_assert!(after[state] >= c - 1e-12);
        }
    }

    #[test]
    fn observed_distances_dominate_network_distances(ds in corpus_strategy()) {
        let net = build_network(&ds).unwrap().distances();
        let obs = path_distances(&ds);
        for a in obs.states() {
            for b in obs.states() {
                if let Some(d) = obs.get(a, b) {
                    let shortest = net.get(a, b).unwrap();
                    prop_assert!(d >= shortest);
                }
            }
        }
    }

    #[test]
    fn conservation_laws(ds in corpus_strategy(), k in 1usize..4, h in 1usize..4) {
        let n = ds.total() as f64;
        let model = fit(&ds, k).unwrap();
        let stats = VisitStatistics::compute(&model).unwrap();
        let scorer = MogenScorer { model: &model, stats: &stats };
        let e: f64 = scorer.end_probability(h).unwrap().scores.values().sum();
        prop_assert!((e - 1.0).abs() < 1e-9);
        let b: f64 = path_centrality(&ds, Measure::Betweenness, h).unwrap().scores.values().sum::<f64>() * n;
        let expected: u64 = ds.iter().map(|(p, f)| p.len().saturating_sub(2) as u64 * f).sum();
        prop_assert!((b - expected as f64).abs() < 1e-9 * n);
        for f in scorer.continuation_probability(h).unwrap().scores.values() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(f));
        }
        for r in scorer.reach(h).unwrap().scores.values() {
            prop_assert!(*r >= -1e-12);
        }
    }

    #[test]
    fn lower_orders_need_no_full_memory(ds in corpus_strategy(), k in 1usize..4) {
        // Visit-count measures agree with the path model for every h <= K.
        // Betweenness also needs the rate of one-node paths, which a K = 1
        // model only reproduces when first-order states never recur.
        let model = fit(&ds, k).unwrap();
        let stats = VisitStatistics::compute(&model).unwrap();
        let scorer = MogenScorer { model: &model, stats: &stats };
        let mut measures = vec![Measure::EndProbability, Measure::ContinuationProbability];
        if k >= 2 {
            measures.push(Measure::Betweenness);
        }
        for h in 1..=k {
            for &m in &measures {
                let p = path_centrality(&ds, m, h).unwrap();
                let g = scorer.centrality(m, h).unwrap();
                prop_assert_eq!(p.scores.keys().collect::<Vec<_>>(), g.scores.keys().collect::<Vec<_>>());
                for (a, b) in p.scores.values().zip(g.scores.values()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn auc_invariant_under_increasing_transforms(
        raw in prop::collection::vec((0u32..50, any::<bool>()), 2..40),
    ) {
        let scores: BTreeMap<State, f64> =
            raw.iter().enumerate().map(|(i, &(x, _))| (State::single(&format!("s{i}")), f64::from(x) / 7.0)).collect();
        let labels: BTreeMap<State, bool> =
            raw.iter().enumerate().map(|(i, &(_, l))| (State::single(&format!("s{i}")), l)).collect();
        prop_assume!(labels.values().any(|&l| l) && labels.values().any(|&l| !l));
        let base = auc(&scores, &labels).unwrap();
        for t in [|x: f64| 3.0 * x + 1.0, |x: f64| x.exp(), |x: f64| x.powi(3) - 5.0] {
            let moved: BTreeMap<State, f64> = scores.iter().map(|(s, &x)| (s.clone(), t(x))).collect();
            prop_assert_eq!(auc(&moved, &labels).unwrap(), base);
        }
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn self_ranking_is_perfect_without_cutoff_ties(
        values in prop::collection::btree_set(0u32..1000, 2..60), frac in 0.05f64..0.9,
    ) {
        let truth: BTreeMap<State, f64> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (State::single(&format!("s{i:03}")), f64::from(v)))
            .collect();
        let labels = top_labels(&truth, frac);
        let positives = labels.values().filter(|&&l| l).count();
        prop_assume!(positives < truth.len());
        prop_assert_eq!(auc(&truth, &labels).unwrap(), 1.0);
    }

    #[test]
    fn projection_is_idempotent_and_keeps_order(ds in corpus_strategy(), h in 1usize..4) {
        let pred = path_centrality(&ds, Measure::Reach, 1).unwrap().scores;
        let truth: BTreeSet<State> = path_centrality(&ds, Measure::Reach, h)
            .unwrap()
            .scores
            .into_keys()
            .filter(|s| s.order() == h)
            .collect();
        let once = project_prediction(&pred, &truth);
        let twice = project_prediction(&once.scores, &truth);
        prop_assert_eq!(&once.scores, &twice.scores);
        prop_assert!(twice.unmatched.is_empty());
        prop_assert!(once.scores.keys().all(|s| s.order() <= h));
        for (s, x) in &once.scores {
            prop_assert_eq!(*x, pred[&State::single(s.last())]);
        }
    }
}

#[test]
fn summary_is_recomputable_from_cells() {
    let mut rng = common::rng(21);
    let ds = common::random_corpus(&mut rng, 8, 50, 6);
    let cfg = ExperimentConfig {
        models: vec![ModelSpec::Network, ModelSpec::Mogen(2), ModelSpec::Path],
        repetitions: 4,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&ds, &cfg).unwrap();
    assert_eq!(summarize(&cfg, &report.cells), report.summary);
    for entry in &report.summary {
        let values: Vec<f64> = report
            .cells
            .iter()
            .filter(|c| c.measure == entry.measure && c.model == entry.model && c.valid)
            .map(|c| c.auc.unwrap())
            .collect();
        assert_eq!(entry.valid_repetitions, values.len());
        if let Some(mean) = entry.mean {
            assert_eq!(mean, values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    // The network model has no end, continuation or reach cells.
    assert!(report
        .cells
        .iter()
        .filter(|c| c.model == ModelSpec::Network)
        .all(|c| !c.measure.needs_path_ends()));
}

/// Empirical frequencies of sampled paths: every visited state and every end
/// state is hit at its model rate within three standard errors.
#[test]
fn sampled_paths_follow_the_model() {
    let model = common::planted_model();
    let stats = VisitStatistics::compute(&model).unwrap();
    let count = 50_000u64;
    let ds = sample_paths(&model, count, 17).unwrap();
    assert_eq!(ds.total(), count);

    let mut ends: BTreeMap<State, u64> = BTreeMap::new();
    for (p, f) in ds.iter() {
        let last = mogen::path_data::state_sequence(p, 2).pop().unwrap();
        *ends.entry(last).or_default() += f;
    }
    let n = count as f64;
    let end_states = model.absorption().iter().filter(|&&r| r > 0.0).count();
    // Bonferroni bound for a family-wise 3-sigma level over all end states.
    let z = Normal::standard().inverse_cdf(1.0 - 0.0027 / (2.0 * end_states as f64));
    let mut checked = 0;
    for (i, s) in model.states().iter().enumerate() {
        let p = stats.visits[i] * model.absorption()[i];
        let observed = ends.get(s).copied().unwrap_or(0) as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        if p > 0.0 {
            assert!((observed - p).abs() <= z * se, "{s}: {observed} vs {p}");
            checked += 1;
        } else {
            assert_eq!(observed, 0.0);
        }
    }
    assert!(checked > 20);
}
