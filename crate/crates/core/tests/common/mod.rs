#![allow(dead_code)]

use graphconsis::autodiff::Matrix;
use graphconsis::graph::{Label, MultiRelationGraph};
use graphconsis::model::SampledNeighborhood;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random labeled graph with `n` nodes, feature width `d` and `relations`
/// relations; every relation gets at least one edge.
pub fn toy_graph(seed: u64, n: usize, d: usize, relations: usize) -> MultiRelationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_shape_fn((n, d), |_| rng.random_range(-0.5..0.5));
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random_bool(0.4) { Label::Fraud } else { Label::Benign })
        .collect();
    labels[0] = Label::Fraud;
    labels[1] = Label::Benign;
    let edges = (0..relations)
        .map(|_| {
            let mut es = vec![(0, 1 + rng.random_range(0..n - 1))];
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_bool(0.35) {
                        es.push((u, v));
                    }
                }
            }
            es
        })
        .collect();
    MultiRelationGraph::new(n, x, labels, edges).unwrap()
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

/// Parameters of one layer as plain nested vectors.
pub struct OracleLayer {
    /// `t[r]`, one vector per relation.
    pub relation: Vec<Vec<f64>>,
    /// `a`, length `2·w_in`.
    pub attention: Vec<f64>,
    /// `weight[i][j]`, input `i`, output `j`.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// One layer written out term by term:
/// `α_q = softmax_q(leaky({h_q ‖ t_{r_q}} · a))`, `agg = Σ α_q h_q`,
/// `h'_v = leaky([h_v ‖ agg] W + b)`.
pub fn oracle_layer(
    h: &[Vec<f64>],
    samples: &[SampledNeighborhood],
    p: &OracleLayer,
    slope: f64,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (v, hood) in samples.iter().enumerate() {
        let mut logits = Vec::new();
        for &(u, r) in &hood.samples {
            let mut joined = h[u.0].clone();
            joined.extend_from_slice(&p.relation[r.0]);
            let mut dot = 0.0;
            for i in 0..joined.len() {
                dot += joined[i] * p.attention[i];
            }
            logits.push(leaky(dot, slope));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();

        let w = h[v].len();
        let mut agg = vec![0.0; w];
        for (q, &(u, _)) in hood.samples.iter().enumerate() {
            for i in 0..w {
                agg[i] += exps[q] / total * h[u.0][i];
            }
        }
        let mut input = h[v].clone();
        input.extend_from_slice(&agg);
        let width = p.bias.len();
        let mut o = vec![0.0; width];
        for j in 0..width {
            let mut z = p.bias[j];
            for i in 0..input.len() {
                z += input[i] * p.weight[i][j];
            }
            o[j] = leaky(z, slope);
        }
        out.push(o);
    }
    out
}

/// `exp(−‖a − b‖²)`.
pub fn oracle_score(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..a.len() {
        d += (a[i] - b[i]) * (a[i] - b[i]);
    }
    (-d).exp()
}

/// Row-normalized merged adjacency times `h`; isolated nodes keep their own row.
pub fn dense_mean_oracle(g: &MultiRelationGraph, h: &Matrix) -> Matrix {
    let n = g.num_nodes();
    let mut a = Matrix::zeros((n, n));
    for rel in g.relations() {
        for &(u, v) in rel.edges() {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
    }
    for v in 0..n {
        let deg: f64 = a.row(v).sum();
        if deg == 0.0 {
            a[[v, v]] = 1.0;
        } else {
            a.row_mut(v).mapv_inplace(|x| x / deg);
        }
    }
    a.dot(h)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            worst = worst.max((x - b[[i, j]]).abs());
        }
    }
    worst
}
