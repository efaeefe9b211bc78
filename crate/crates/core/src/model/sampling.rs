//! Neighbor selection for one layer.
//!
//! Candidates for node `v` are every `(u, r)` with `u` adjacent to `v`
//! under relation `r`, so a node linked through two relations appears
//! twice. Sampling happens outside the differentiable graph: the drawn
//! indices enter the forward pass as constants.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use super::config::Sampling;
use crate::autodiff::Matrix;
use crate::graph::{MultiRelationGraph, NodeId, RelationId};
use crate::rng::{stream, tag};

/// Neighbors considered, kept and drawn for one center node.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledNeighborhood {
    pub center: NodeId,
    /// Candidates that survived filtering.
    pub filtered: Vec<(NodeId, RelationId)>,
    /// Selection probability of each entry of `filtered`; sums to 1.
    pub probabilities: Vec<f64>,
    /// The drawn neighbors with the relation they were reached through.
    pub samples: Vec<(NodeId, RelationId)>,
    /// Set when nothing survived filtering and the center stands in for
    /// its own neighborhood.
    pub fallback: bool,
}

/// `s(u, v) = exp(−‖h_u − h_v‖²)` for each candidate `u`.
pub fn consistency_scores(h: &Matrix, v: usize, candidates: &[usize]) -> Vec<f64> {
    let hv = h.row(v);
    candidates
        .iter()
        .map(|&u| {
            let dist: f64 = h
                .row(u)
                .iter()
                .zip(hv.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-dist).exp()
        })
        .collect()
}

/// All `(u, r)` pairs adjacent to `v`, relation-major, ascending within a relation.
pub fn candidates(g: &MultiRelationGraph, v: usize) -> Vec<(NodeId, RelationId)> {
    g.relations()
        .iter()
        .enumerate()
        .flat_map(|(r, rel)| rel.neighbors(v).iter().map(move |&u| (u, RelationId(r))))
        .collect()
}

fn fallback(v: usize, q: usize) -> SampledNeighborhood {
    let own = (NodeId(v), RelationId(0));
    SampledNeighborhood {
        center: NodeId(v),
        filtered: Vec::new(),
        probabilities: Vec::new(),
        samples: vec![own; q],
        fallback: true,
    }
}

fn draw(
    v: usize,
    filtered: Vec<(NodeId, RelationId)>,
    probabilities: Vec<f64>,
    q: usize,
    rng: &mut impl Rng,
) -> SampledNeighborhood {
    let index = WeightedIndex::new(&probabilities).expect("positive finite weights");
    let samples = (0..q).map(|_| filtered[index.sample(rng)]).collect();
    SampledNeighborhood {
        center: NodeId(v),
        filtered,
        probabilities,
        samples,
        fallback: false,
    }
}

/// Keeps candidates with `s(u, v) ≥ epsilon`, normalizes their scores
/// into probabilities and draws `q` of them with replacement.
///
/// A score that underflows to exactly zero is dropped even when
/// `epsilon` is 0, since it cannot carry probability mass.
pub fn filter_and_sample(
    g: &MultiRelationGraph,
    h: &Matrix,
    v: NodeId,
    q: usize,
    epsilon: f64,
    rng: &mut impl Rng,
) -> SampledNeighborhood {
    let v = v.index();
    let cands = candidates(g, v);
    let ids: Vec<usize> = cands.iter().map(|(u, _)| u.index()).collect();
    let scores = consistency_scores(h, v, &ids);

    let (filtered, kept): (Vec<_>, Vec<_>) = cands
        .into_iter()
        .zip(scores)
        .filter(|&(_, s)| s >= epsilon && s > 0.0)
        .unzip();
    if filtered.is_empty() {
        return fallback(v, q);
    }
    let total: f64 = kept.iter().sum();
    let probabilities = kept.iter().map(|s| s / total).collect();
    draw(v, filtered, probabilities, q, rng)
}

/// Draws `q` neighbors uniformly from the multi-relation candidate multiset.
pub fn uniform_sample(g: &MultiRelationGraph, v: NodeId, q: usize, rng: &mut impl Rng) -> SampledNeighborhood {
    let v = v.index();
    let cands = candidates(g, v);
    if cands.is_empty() {
        return fallback(v, q);
    }
    let p = 1.0 / cands.len() as f64;
    let probabilities = vec![p; cands.len()];
    draw(v, cands, probabilities, q, rng)
}

/// Every distinct neighbor across relations, each once. A node with no
/// neighbors gets itself.
pub fn full_neighborhood(g: &MultiRelationGraph, v: NodeId) -> SampledNeighborhood {
    let v = v.index();
    let mut all = candidates(g, v);
    all.sort_by_key(|&(u, r)| (u, r));
    all.dedup_by_key(|&mut (u, _)| u);
    if all.is_empty() {
        return fallback(v, 1);
    }
    let p = 1.0 / all.len() as f64;
    SampledNeighborhood {
        center: NodeId(v),
        probabilities: vec![p; all.len()],
        samples: all.clone(),
        filtered: all,
        fallback: false,
    }
}

/// Neighborhoods of every node for layer `layer` of sampling pass `pass`.
///
/// Each node draws from its own stream keyed by
/// `(seed, pass, layer, node)`, so the result does not depend on how
/// the work is scheduled across threads.
pub fn sample_layer(
    g: &MultiRelationGraph,
    h: &Matrix,
    sampling: Sampling,
    q: usize,
    epsilon: f64,
    seed: u64,
    pass: u64,
    layer: usize,
) -> Vec<SampledNeighborhood> {
    (0..g.num_nodes())
        .into_par_iter()
        .map(|v| {
            let mut rng = stream(&[tag::SAMPLE, seed, pass, layer as u64, v as u64]);
            match sampling {
                Sampling::Consistency => filter_and_sample(g, h, NodeId(v), q, epsilon, &mut rng),
                Sampling::Uniform => uniform_sample(g, NodeId(v), q, &mut rng),
                Sampling::Full => full_neighborhood(g, NodeId(v)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::Label;

    fn star(h_rows: usize, edges: Vec<Vec<(usize, usize)>>) -> MultiRelationGraph {
        MultiRelationGraph::new(
            h_rows,
            Array2::zeros((h_rows, 1)),
            vec![Label::Benign; h_rows],
            edges,
        )
        .unwrap()
    }

    #[test]
    fn score_values() {
        let h = array![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]];
        let s = consistency_scores(&h, 0, &[1, 2]);
        assert!((s[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(s[1], 1.0);
        assert_eq!(consistency_scores(&h, 1, &[0]), vec![s[0]]);
    }

    #[test]
    fn probabilities_from_scores() {
        // scores 0.3 and 0.1 -> [0.75, 0.25]
        let d1 = -(0.3f64.ln());
        let d2 = -(0.1f64.ln());
        let h = array![[0.0], [d1.sqrt()], [d2.sqrt()]];
        let g = star(3, vec![vec![(0, 1), (0, 2)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = filter_and_sample(&g, &h, NodeId(0), 4, 0.0, &mut rng);
        assert!((n.probabilities[0] - 0.75).abs() < 1e-12);
        assert!((n.probabilities[1] - 0.25).abs() < 1e-12);
        assert_eq!(n.samples.len(), 4);
        assert!(!n.fallback);
    }

    #[test]
    fn single_survivor_gets_every_sample() {
        let h = array![[0.0], [0.1], [5.0]];
        let g = star(3, vec![vec![(0, 1)], vec![(0, 2)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = filter_and_sample(&g, &h, NodeId(0), 6, 0.5, &mut rng);
        assert_eq!(n.filtered, vec![(NodeId(1), RelationId(0))]);
        assert_eq!(n.probabilities, vec![1.0]);
        assert!(n.samples.iter().all(|&s| s == (NodeId(1), RelationId(0))));
    }

    #[test]
    fn everything_filtered_falls_back() {
        let h = array![[0.0], [3.0], [4.0]];
        let g = star(3, vec![vec![(0, 1), (0, 2)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = filter_and_sample(&g, &h, NodeId(0), 3, 0.01, &mut rng);
        assert!(n.fallback);
        assert_eq!(n.samples, vec![(NodeId(0), RelationId(0)); 3]);

        let isolated = filter_and_sample(&g, &h, NodeId(0), 2, 0.0, &mut rng);
        assert!(!isolated.fallback);
        let g2 = star(2, vec![vec![]]);
        let n = filter_and_sample(&g2, &Array2::zeros((2, 1)), NodeId(1), 2, 0.0, &mut rng);
        assert!(n.fallback);
    }

    #[test]
    fn multi_relation_neighbors_count_twice() {
        let g = star(3, vec![vec![(0, 1)], vec![(0, 1), (0, 2)]]);
        assert_eq!(
            candidates(&g, 0),
            vec![
                (NodeId(1), RelationId(0)),
                (NodeId(1), RelationId(1)),
                (NodeId(2), RelationId(1))
            ]
        );
        let full = full_neighborhood(&g, NodeId(0));
        assert_eq!(full.samples.len(), 2);
        assert!(full_neighborhood(&star(1, vec![vec![]]), NodeId(0)).fallback);
    }

    #[test]
    fn layer_sampling_is_schedule_independent() {
        let g = star(5, vec![vec![(0, 1), (0, 2), (1, 3)], vec![(2, 4), (3, 4)]]);
        let h = Array2::from_shape_fn((5, 2), |(i, j)| (i * 2 + j) as f64 * 0.1);
        let a = sample_layer(&g, &h, Sampling::Consistency, 7, 0.0, 3, 0, 0);
        let b = sample_layer(&g, &h, Sampling::Consistency, 7, 0.0, 3, 0, 0);
        let c = sample_layer(&g, &h, Sampling::Consistency, 7, 0.0, 3, 1, 0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
