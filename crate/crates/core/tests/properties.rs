mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphconsis::autodiff::Matrix;
use graphconsis::data::{generate_synthetic, split_dataset, RelationSpec, SplitSpec, SyntheticSpec};
use graphconsis::eval::{auc_score, f1_score, Averaging};
use graphconsis::graph::{NodeId, RelationId};
use graphconsis::inconsistency::{context_characteristic, ContextConvention};
use graphconsis::model::{
    aggregate_neighborhood, consistency_scores, filter_and_sample, relation_attention_weights,
};

use common::toy_graph;

fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Matrix {
    Matrix::from_shape_vec((rows, cols), values).unwrap()
}

fn embeddings(n: usize, d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.5f64..1.5, n * d).prop_map(move |v| matrix(n, d, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scores_are_bounded_and_symmetric(h in embeddings(6, 3)) {
        for v in 0..6 {
            let s = consistency_scores(&h, v, &[0, 1, 2, 3, 4, 5]);
            prop_assert_eq!(s[v], 1.0);
            for u in 0..6 {
                prop_assert!(s[u] > 0.0 && s[u] <= 1.0);
                prop_assert_eq!(s[u], consistency_scores(&h, u, &[v])[0]);
            }
        }
    }

    #[test]
    fn raising_epsilon_never_grows_the_filtered_set(
        graph_seed in 0u64..500,
        h in embeddings(7, 2),
        lo in 0.0f64..0.9,
        step in 0.0f64..0.5,
    ) {
        let g = toy_graph(graph_seed, 7, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
        for v in 0..7 {
            let small = filter_and_sample(&g, &h, NodeId(v), 3, lo, &mut rng);
            let large = filter_and_sample(&g, &h, NodeId(v), 3, (lo + step).min(0.99), &mut rng);
            for c in &large.filtered {
                prop_assert!(small.filtered.contains(c));
            }
        }
    }

    #[test]
    fn sampling_distribution_is_normalized(graph_seed in 0u64..500, h in embeddings(8, 3), eps in 0.0f64..0.6) {
        let g = toy_graph(graph_seed, 8, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed + 1);
        for v in 0..8 {
            let hood = filter_and_sample(&g, &h, NodeId(v), 5, eps, &mut rng);
            prop_assert_eq!(hood.samples.len(), 5);
            if hood.fallback {
                prop_assert!(hood.filtered.is_empty());
                continue;
            }
            prop_assert_eq!(hood.filtered.len(), hood.probabilities.len());
            let total: f64 = hood.probabilities.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for s in &hood.samples {
                prop_assert!(hood.filtered.contains(s));
            }
        }
    }

    #[test]
    fn attention_is_a_distribution(
        q in 1usize..10,
        values in prop::collection::vec(-3.0f64..3.0, 10 * 4),
        t in prop::collection::vec(-3.0f64..3.0, 3 * 4),
        a in prop::collection::vec(-3.0f64..3.0, 8),
        rel in prop::collection::vec(0usize..3, 10),
    ) {
        let h = matrix(q, 4, values[..q * 4].to_vec());
        let t = matrix(3, 4, t);
        let rels: Vec<RelationId> = rel[..q].iter().map(|&r| RelationId(r)).collect();
        let alpha = relation_attention_weights(&h, &rels, &t, &a, 0.01).unwrap();
        prop_assert!(alpha.iter().all(|&x| x > 0.0));
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        // a convex combination stays inside the per-coordinate hull
        let agg = aggregate_neighborhood(&h, &alpha).unwrap();
        for j in 0..4 {
            let col = h.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(agg[j] >= lo - 1e-12 && agg[j] <= hi + 1e-12);
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 12),
        labels in prop::collection::vec(any::<bool>(), 12),
    ) {
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let base = auc_score(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0).collect();
        prop_assert!((auc_score(&squashed, &labels).unwrap() - base).abs() < 1e-12);
        prop_assert!((auc_score(&cubed, &labels).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_pair_counting(
        len in 2usize..=12,
        raw in prop::collection::vec(0u8..6, 12),
        labels in prop::collection::vec(any::<bool>(), 12),
    ) {
        let scores: Vec<f64> = raw[..len].iter().map(|&s| f64::from(s) / 5.0).collect();
        let labels = &labels[..len];
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..len {
            for j in 0..len {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        prop_assert!((auc_score(&scores, labels).unwrap() - wins / pairs).abs() < 1e-12);
    }

    #[test]
    fn f1_is_permutation_invariant(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40),
        rotation in 0usize..40,
    ) {
        let (p, y): (Vec<bool>, Vec<bool>) = pairs.iter().cloned().unzip();
        let k = rotation % pairs.len();
        let mut rotated = pairs.clone();
        rotated.rotate_left(k);
        let (rp, ry): (Vec<bool>, Vec<bool>) = rotated.into_iter().unzip();
        for avg in [Averaging::BinaryPositive, Averaging::Macro] {
            let a = f1_score(&p, &y, avg).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a, f1_score(&rp, &ry, avg).unwrap());
        }
    }

    #[test]
    fn split_masks_partition_labeled_nodes(seed in 0u64..1000, fraction in 0.2f64..0.8, stratified in any::<bool>()) {
        let g = toy_graph(seed, 40, 2, 1);
        let spec = SplitSpec { train_fraction: fraction, stratified, seed };
        if let Ok((train, test)) = split_dataset(&g, &spec) {
            for v in 0..40 {
                prop_assert!(train[v] ^ test[v]);
            }
        }
    }
}

#[test]
fn camouflage_weakly_lowers_context_agreement() {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for seed in 0..3 {
        let mut last = f64::INFINITY;
        for &c in &grid {
            let spec = SyntheticSpec {
                num_nodes: 400,
                feature_dim: 4,
                relations: vec![RelationSpec::new(20.0, c, 0.9, 0.0)],
                seed,
                ..SyntheticSpec::default()
            };
            let g = generate_synthetic(&spec).unwrap();
            let gamma = context_characteristic(&g, RelationId(0), ContextConvention::SameLabel, false)
                .unwrap()
                .value;
            assert!(gamma <= last + 1e-12, "seed {seed}, camouflage {c}: {gamma} > {last}");
            last = gamma;
        }
    }
}

#[test]
fn no_camouflage_and_full_homophily_agree_everywhere() {
    let spec = SyntheticSpec {
        num_nodes: 300,
        feature_dim: 4,
        relations: vec![RelationSpec::new(10.0, 0.0, 1.0, 0.5)],
        ..SyntheticSpec::default()
    };
    let g = generate_synthetic(&spec).unwrap();
    let gamma = context_characteristic(&g, RelationId(0), ContextConvention::SameLabel, false).unwrap();
    assert_eq!(gamma.value, 1.0);
}

#[test]
fn uniform_sampler_tracks_relation_multiplicity() {
    use graphconsis::model::uniform_sample;
    use graphconsis::{Label, MultiRelationGraph};
    // node 1 neighbors 0 in both relations, node 2 only in the first
    let g = MultiRelationGraph::new(
        3,
        Matrix::zeros((3, 1)),
        vec![Label::Fraud, Label::Benign, Label::Benign],
        vec![vec![(0, 1), (0, 2)], vec![(0, 1)]],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 90_000;
    let hood = uniform_sample(&g, NodeId(0), draws, &mut rng);
    let ones = hood.samples.iter().filter(|(u, _)| u.0 == 1).count() as f64;
    let p = 2.0 / 3.0;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((ones / draws as f64 - p).abs() < 3.0 * se, "{}", ones / draws as f64);
}
