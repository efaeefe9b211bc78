//! Synthetic multi-relation fraud graphs with controllable camouflage.
//!
//! Nodes are dealt into context clusters that mix both classes in the
//! global proportion. Features are a class mean plus a per-cluster
//! offset plus per-node noise, so cluster members sit close together
//! while the cluster itself says nothing about the label. Each relation
//! draws edges from a source node to an endpoint whose label is chosen
//! by the relation's camouflage (fraud sources) or homophily (benign
//! sources); with probability `cluster_affinity` the endpoint is taken
//! among the source's cluster members of that label.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph};
use crate::rng::{stream, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    /// Target average degree `2|E| / |V|`.
    pub avg_degree: f64,
    /// Chance that an edge drawn from a fraud node lands on a benign node.
    pub camouflage: f64,
    /// Chance that an edge drawn from a benign node lands on a benign node.
    pub homophily: f64,
    /// Chance that the endpoint is taken from the source's cluster.
    #[serde(default)]
    pub cluster_affinity: f64,
}

impl RelationSpec {
    pub fn new(avg_degree: f64, camouflage: f64, homophily: f64, cluster_affinity: f64) -> Self {
        RelationSpec {
            avg_degree,
            camouflage,
            homophily,
            cluster_affinity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub fraud_fraction: f64,
    pub feature_dim: usize,
    pub relations: Vec<RelationSpec>,
    /// Euclidean distance between the two class means.
    pub class_separation: f64,
    /// Nodes per context cluster.
    pub cluster_size: usize,
    /// Per-coordinate standard deviation of cluster offsets.
    pub cluster_scale: f64,
    /// Per-coordinate standard deviation of node noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_nodes: 1000,
            fraud_fraction: 0.145,
            feature_dim: 100,
            relations: vec![
                RelationSpec::new(4.0, 0.1, 0.98, 0.9),
                RelationSpec::new(50.0, 0.9, 0.9, 0.0),
                RelationSpec::new(120.0, 0.9, 0.9, 0.0),
            ],
            class_separation: 0.16,
            cluster_size: 16,
            cluster_scale: 0.17,
            noise_scale: 0.1,
            seed: 0,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 {
            return Err(Error::Config("num_nodes must be at least 2".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::EmptyFeatures);
        }
        if self.relations.is_empty() {
            return Err(Error::NoRelations);
        }
        if self.cluster_size == 0 {
            return Err(Error::Config("cluster_size must be at least 1".into()));
        }
        probability("fraud_fraction", self.fraud_fraction)?;
        for (name, x) in [
            ("class_separation", self.class_separation),
            ("cluster_scale", self.cluster_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {x}")));
            }
        }
        for (r, rel) in self.relations.iter().enumerate() {
            probability("camouflage", rel.camouflage)?;
            probability("homophily", rel.homophily)?;
            probability("cluster_affinity", rel.cluster_affinity)?;
            if !(rel.avg_degree >= 0.0) || rel.avg_degree > (self.num_nodes - 1) as f64 {
                return Err(Error::InfeasibleDegree {
                    relation: r,
                    degree: rel.avg_degree,
                    nodes: self.num_nodes,
                });
            }
        }
        Ok(())
    }

    /// Number of fraud nodes: `round(fraud_fraction · num_nodes)`.
    pub fn fraud_count(&self) -> usize {
        (self.fraud_fraction * self.num_nodes as f64).round() as usize
    }
}

struct Layout {
    labels: Vec<Label>,
    /// Node ids per label, indexed by class.
    by_class: [Vec<usize>; 2],
    cluster_of: Vec<usize>,
    /// Members of each cluster, per class.
    clusters: Vec<[Vec<usize>; 2]>,
}

fn layout(spec: &SyntheticSpec) -> Layout {
    let n = spec.num_nodes;
    let mut rng = stream(&[tag::GENERATE, spec.seed, 0]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let fraud = spec.fraud_count();
    let mut labels = vec![Label::Benign; n];
    for &v in &order[..fraud] {
        labels[v] = Label::Fraud;
    }

    let mut by_class = [Vec::new(), Vec::new()];
    for (v, l) in labels.iter().enumerate() {
        by_class[l.class().expect("labeled") as usize].push(v);
    }

    // Deal each class round-robin so every cluster holds both classes in
    // about the global ratio.
    let num_clusters = n.div_ceil(spec.cluster_size);
    let mut cluster_of = vec![0; n];
    let mut clusters = vec![[Vec::new(), Vec::new()]; num_clusters];
    for (class, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (i, &v) in shuffled.iter().enumerate() {
            let c = i % num_clusters;
            cluster_of[v] = c;
            clusters[c][class].push(v);
        }
    }
    Layout {
        labels,
        by_class,
        cluster_of,
        clusters,
    }
}

fn features(spec: &SyntheticSpec, layout: &Layout) -> Matrix {
    let d = spec.feature_dim;
    let mut rng = stream(&[tag::GENERATE, spec.seed, 1]);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut direction: Vec<f64> = (0..d).map(|_| std_normal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut direction {
        *x /= norm;
    }
    let half = spec.class_separation / 2.0;

    // Offsets are orthogonal to the class direction, so knowing a node's
    // cluster does not shift its class evidence.
    let offsets: Vec<Vec<f64>> = layout
        .clusters
        .iter()
        .map(|_| {
            let mut o: Vec<f64> = (0..d).map(|_| spec.cluster_scale * std_normal.sample(&mut rng)).collect();
            let along: f64 = o.iter().zip(&direction).map(|(a, b)| a * b).sum();
            for (x, u) in o.iter_mut().zip(&direction) {
                *x -= along * u;
            }
            o
        })
        .collect();

    let mut x = Matrix::zeros((spec.num_nodes, d));
    for v in 0..spec.num_nodes {
        let sign = if layout.labels[v] == Label::Fraud { 1.0 } else { -1.0 };
        let offset = &offsets[layout.cluster_of[v]];
        for j in 0..d {
            x[[v, j]] = sign * half * direction[j] + offset[j] + spec.noise_scale * std_normal.sample(&mut rng);
        }
    }
    x
}

fn edges(spec: &SyntheticSpec, layout: &Layout, r: usize) -> Result<Vec<(usize, usize)>> {
    let rel = &spec.relations[r];
    let n = spec.num_nodes;
    let target = (rel.avg_degree * n as f64 / 2.0).round() as usize;
    let mut rng = stream(&[tag::GENERATE, spec.seed, 2, r as u64]);
    let mut seen = HashSet::with_capacity(target);
    let mut out = Vec::with_capacity(target);
    let max_attempts = 200 * target + 10_000;

    for _ in 0..max_attempts {
        if out.len() == target {
            break;
        }
        let u = rng.random_range(0..n);
        let fraud_source = layout.labels[u] == Label::Fraud;
        let benign_target = if fraud_source {
            rng.random_bool(rel.camouflage)
        } else {
            rng.random_bool(rel.homophily)
        };
        let class = usize::from(!benign_target);
        let mates = &layout.clusters[layout.cluster_of[u]][class];
        let has_mates = mates.iter().any(|&m| m != u);
        let pool = if has_mates && rng.random_bool(rel.cluster_affinity) {
            mates
        } else {
            &layout.by_class[class]
        };
        let Some(&v) = pool.choose(&mut rng) else {
            continue;
        };
        if v == u {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            out.push(key);
        }
    }
    if out.len() < target {
        return Err(Error::InfeasibleDegree {
            relation: r,
            degree: rel.avg_degree,
            nodes: n,
        });
    }
    Ok(out)
}

/// Draws a labeled multi-relation graph; the same `SyntheticSpec` always yields the
/// same graph.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiRelationGraph> {
    spec.validate()?;
    let layout = layout(spec);
    let x = features(spec, &layout);
    let edge_lists = (0..spec.relations.len())
        .map(|r| edges(spec, &layout, r))
        .collect::<Result<Vec<_>>>()?;
    MultiRelationGraph::new(spec.num_nodes, x, layout.labels, edge_lists)
}

/// Context cluster of every node under `spec`, for diagnostics.
pub fn context_clusters(spec: &SyntheticSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    Ok(layout(spec).cluster_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(relations: Vec<RelationSpec>) -> SyntheticSpec {
        SyntheticSpec {
            num_nodes: 200,
            feature_dim: 8,
            relations,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn stratified_fraud_count() {
        let spec = SyntheticSpec::default();
        assert_eq!(spec.fraud_count(), 145);
        let g = generate_synthetic(&small(vec![RelationSpec::new(3.0, 0.5, 0.5, 0.0)])).unwrap();
        let fraud = g.labels().iter().filter(|&&l| l == Label::Fraud).count();
        assert_eq!(fraud, 29);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let spec = small(vec![RelationSpec::new(6.0, 0.5, 0.8, 0.3)]);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.relations()[0].edges(), b.relations()[0].edges());
        let c = generate_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.relations()[0].edges(), c.relations()[0].edges());
    }

    #[test]
    fn hits_target_degree() {
        let g = generate_synthetic(&small(vec![RelationSpec::new(10.0, 0.9, 0.85, 0.0)])).unwrap();
        assert_eq!(g.relations()[0].num_edges(), 1000);
    }

    #[test]
    fn infeasible_degree() {
        let spec = small(vec![RelationSpec::new(250.0, 0.5, 0.5, 0.0)]);
        assert!(matches!(generate_synthetic(&spec), Err(Error::InfeasibleDegree { relation: 0, .. })));
    }

    #[test]
    fn cluster_mates_are_closer() {
        let spec = SyntheticSpec {
            num_nodes: 300,
            relations: vec![RelationSpec::new(2.0, 0.5, 0.5, 0.0)],
            ..SyntheticSpec::default()
        };
        let g = generate_synthetic(&spec).unwrap();
        let clusters = context_clusters(&spec).unwrap();
        let x = g.features();
        let dist = |a: usize, b: usize| -> f64 { (&x.row(a) - &x.row(b)).mapv(|t| t * t).sum() };
        let (mut within, mut across) = (Vec::new(), Vec::new());
        for a in 0..60 {
            for b in (a + 1)..300 {
                if clusters[a] == clusters[b] {
                    within.push(dist(a, b));
                } else {
                    across.push(dist(a, b));
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&within) < 0.5 * mean(&across));
    }
}
