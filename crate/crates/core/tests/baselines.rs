mod common;

use graphconsis::autodiff::Matrix;
use graphconsis::detector::{train_logistic_regression, BaselineKind, Detector, Method};
use graphconsis::graph::{Label, MultiRelationGraph};
use graphconsis::model::{init_params, input_embeddings, layer_forward, LayerConfig, SampleKey, TrainConfig};

use common::{dense_mean_oracle, rows, toy_graph};

fn full_mean_cfg() -> LayerConfig {
    Method::Baseline(BaselineKind::FullMeanGnn).layer_config(&LayerConfig {
        samples_per_layer: vec![3, 3],
        hidden_widths: vec![5, 4],
        ..LayerConfig::default()
    })
}

/// `leaky([h ‖ Â h] W + b)` with `Â` the dense row-normalized adjacency.
fn dense_layer(g: &MultiRelationGraph, h: &Matrix, w: &Matrix, b: &Matrix, slope: f64) -> Matrix {
    let agg = dense_mean_oracle(g, h);
    let joined = ndarray::concatenate![ndarray::Axis(1), *h, agg];
    (joined.dot(w) + b).mapv(|z| if z > 0.0 { z } else { slope * z })
}

#[test]
fn logistic_regression_separates_separable_points() {
    let features = Matrix::from_shape_vec(
        (8, 2),
        vec![2.0, 1.0, 1.5, 2.0, 3.0, 0.5, 2.5, 2.5, -2.0, -1.0, -1.0, -2.5, -3.0, 0.0, -0.5, -2.0],
    )
    .unwrap();
    let labels: Vec<Label> = (0..8).map(|i| if i < 4 { Label::Fraud } else { Label::Benign }).collect();
    let (model, history) =
        train_logistic_regression(&features, &labels, &[true; 8], &TrainConfig::default(), 0).unwrap();
    assert!(history.last().unwrap() < &history[0]);
    let p = model.predict(&features).unwrap();
    for (i, prob) in p.iter().enumerate() {
        assert_eq!(*prob > 0.5, i < 4, "point {i}: {prob}");
    }
}

#[test]
fn full_mean_layer_matches_dense_adjacency() {
    let cfg = full_mean_cfg();
    for seed in 0..10 {
        let g = toy_graph(seed, 2 + (seed as usize % 7), 3, 2);
        let params = init_params(&g, &cfg, seed).unwrap();
        let h0 = input_embeddings(&g, &params);
        let (h1, _) = layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed, pass: 0 }).unwrap();
        let p = &params.layers[0];
        let expected = dense_layer(&g, &h0, &p.weight.value, &p.bias.value, cfg.leaky_slope);
        assert!(common::max_abs_diff(&rows(&expected), &h1) < 1e-12, "seed {seed}");
    }
}

#[test]
fn full_mean_on_a_star_averages_the_leaves() {
    // hub 0 with leaves 1..=4, the same edge repeated in a second relation
    let x = Matrix::from_shape_fn((5, 2), |(v, j)| (v * 2 + j) as f64 * 0.1);
    let star: Vec<(usize, usize)> = (1..5).map(|v| (0, v)).collect();
    let labels = vec![Label::Fraud, Label::Benign, Label::Benign, Label::Fraud, Label::Benign];
    let g = MultiRelationGraph::new(5, x, labels, vec![star.clone(), vec![(0, 1)]]).unwrap();
    let cfg = full_mean_cfg();
    let params = init_params(&g, &cfg, 0).unwrap();
    let h0 = input_embeddings(&g, &params);
    let (h1, samples) = layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed: 0, pass: 0 }).unwrap();
    assert_eq!(samples[0].samples.len(), 4);
    assert_eq!(samples[1].samples.len(), 1);
    let p = &params.layers[0];
    let expected = dense_layer(&g, &h0, &p.weight.value, &p.bias.value, cfg.leaky_slope);
    assert!(common::max_abs_diff(&rows(&expected), &h1) < 1e-12);
}

#[test]
fn two_nodes_swap_views_under_full_mean() {
    let x = Matrix::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let g = MultiRelationGraph::new(2, x, vec![Label::Fraud, Label::Benign], vec![vec![(0, 1)]]).unwrap();
    let cfg = full_mean_cfg();
    let params = init_params(&g, &cfg, 0).unwrap();
    let h0 = input_embeddings(&g, &params);
    let (h1, _) = layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed: 0, pass: 0 }).unwrap();
    let p = &params.layers[0];
    let swapped = Matrix::from_shape_vec((2, 4), vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
    let expected = (swapped.dot(&p.weight.value) + &p.bias.value).mapv(|z| if z > 0.0 { z } else { 0.01 * z });
    assert!((&h1 - &expected).iter().all(|d| d.abs() < 1e-14));
}

#[test]
fn full_mean_neighborhoods_ignore_the_sampling_seed() {
    let g = toy_graph(4, 9, 3, 3);
    let cfg = full_mean_cfg();
    let params = init_params(&g, &cfg, 0).unwrap();
    let h0 = input_embeddings(&g, &params);
    let (a, _) = layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed: 1, pass: 0 }).unwrap();
    let (b, _) = layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed: 99, pass: 7 }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn uniform_gnn_with_identical_neighbors_is_sample_invariant() {
    // every neighbor of node 0 has the same features
    let mut x = Matrix::from_elem((5, 2), 0.7);
    x[[0, 0]] = -0.2;
    let edges = vec![vec![(0, 1), (0, 2)], vec![(0, 3), (0, 4)]];
    let labels = vec![Label::Fraud, Label::Benign, Label::Benign, Label::Benign, Label::Benign];
    let g = MultiRelationGraph::new(5, x, labels, edges).unwrap();
    let cfg = Method::Baseline(BaselineKind::UniformSampleGnn).layer_config(&LayerConfig {
        samples_per_layer: vec![3, 3],
        hidden_widths: vec![5, 4],
        ..LayerConfig::default()
    });
    let params = init_params(&g, &cfg, 0).unwrap();
    let h0 = input_embeddings(&g, &params);
    let outs: Vec<Matrix> = (0..6)
        .map(|s| layer_forward(&g, &h0, 0, &params, &cfg, SampleKey { seed: s, pass: 0 }).unwrap().0)
        .collect();
    for o in &outs[1..] {
        assert!((o.row(0).to_owned() - outs[0].row(0)).iter().all(|d| d.abs() < 1e-14));
    }
}

#[test]
fn every_method_fits_and_scores() {
    let g = toy_graph(12, 16, 3, 2);
    let layer = LayerConfig {
        samples_per_layer: vec![3, 2],
        hidden_widths: vec![6, 4],
        ..LayerConfig::default()
    };
    let tc = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    for method in Method::ALL {
        let (det, history) = Detector::fit(&g, method, &layer, &tc, &[true; 16], 0).unwrap();
        assert_eq!(history.len(), 5);
        let p = det.predict(&g).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.iter().all(|x| (0.0..=1.0).contains(x)), "{method}");
    }
}
