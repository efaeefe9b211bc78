//! Multi-relation graph with node features and binary labels.
//!
//! Edges are undirected and stored once per relation in canonical
//! `(min, max)` order. Adjacency is kept in CSR form so that
//! [`MultiRelationGraph::neighbors_of`] returns a sorted slice without
//! allocating.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub usize);

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Node label. `Unknown` masks a node out of supervised use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Fraud,
    Unknown,
}

impl Label {
    pub fn from_class(class: u8) -> Option<Label> {
        match class {
            0 => Some(Label::Benign),
            1 => Some(Label::Fraud),
            _ => None,
        }
    }

    /// `Some(0)` for benign, `Some(1)` for fraud, `None` when masked.
    pub fn class(self) -> Option<u8> {
        match self {
            Label::Benign => Some(0),
            Label::Fraud => Some(1),
            Label::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }
}

/// Edges of one relation plus the derived CSR adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    adjacency: Vec<NodeId>,
}

impl Relation {
    fn from_canonical(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut adjacency = vec![NodeId(0); offsets[num_nodes]];
        for &(u, v) in &edges {
            adjacency[cursor[u]] = NodeId(v);
            cursor[u] += 1;
            adjacency[cursor[v]] = NodeId(u);
            cursor[v] += 1;
        }
        for v in 0..num_nodes {
            adjacency[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Relation {
            edges,
            offsets,
            adjacency,
        }
    }

    /// Canonical `(min, max)` edge list, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbors of `v`. Panics if `v` is out of range.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[NodeId] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }
}

/// A heterogeneous graph `{V, X, {E_r}}` with one label per node.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRelationGraph {
    features: Array2<f64>,
    labels: Vec<Label>,
    relations: Vec<Relation>,
}

impl MultiRelationGraph {
    /// Validates and builds a graph. Duplicate edges within a relation
    /// (in either orientation) collapse to one.
    pub fn new(
        num_nodes: usize,
        features: Array2<f64>,
        labels: Vec<Label>,
        edge_lists: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        if edge_lists.is_empty() {
            return Err(Error::NoRelations);
        }
        if features.nrows() != num_nodes {
            return Err(Error::FeatureRows {
                rows: features.nrows(),
                nodes: num_nodes,
            });
        }
        if features.ncols() == 0 {
            return Err(Error::EmptyFeatures);
        }
        if labels.len() != num_nodes {
            return Err(Error::LabelCount {
                len: labels.len(),
                nodes: num_nodes,
            });
        }

        let mut relations = Vec::with_capacity(edge_lists.len());
        for (relation, list) in edge_lists.into_iter().enumerate() {
            let mut canonical = Vec::with_capacity(list.len());
            for (u, v) in list {
                if u >= num_nodes || v >= num_nodes {
                    return Err(Error::EndpointOutOfRange {
                        u,
                        v,
                        relation,
                        nodes: num_nodes,
                    });
                }
                if u == v {
                    return Err(Error::SelfLoop { node: u, relation });
                }
                canonical.push((u.min(v), u.max(v)));
            }
            canonical.sort_unstable();
            canonical.dedup();
            relations.push(Relation::from_canonical(num_nodes, canonical));
        }

        Ok(MultiRelationGraph {
            features,
            labels,
            relations,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature(&self, v: usize) -> ArrayView1<'_, f64> {
        self.features.row(v)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Label {
        self.labels[v]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, r: RelationId) -> Result<&Relation> {
        self.relations
            .get(r.index())
            .ok_or(Error::UnknownRelation {
                relation: r.index(),
                relations: self.relations.len(),
            })
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v.index() < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                node: v.index(),
                nodes: self.num_nodes(),
            })
        }
    }

    /// All `u` with `(u, v)` in `E_r`, ascending.
    pub fn neighbors_of(&self, v: NodeId, r: RelationId) -> Result<&[NodeId]> {
        self.check_node(v)?;
        Ok(self.relation(r)?.neighbors(v.index()))
    }

    /// Same graph with a different label vector (e.g. training labels only).
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::LabelCount {
                len: labels.len(),
                nodes: self.num_nodes(),
            });
        }
        Ok(MultiRelationGraph {
            features: self.features.clone(),
            labels,
            relations: self.relations.clone(),
        })
    }

    /// Collapses every relation into one, keeping the union of edge sets.
    pub fn merge_relations(&self) -> MultiRelationGraph {
        let mut union: Vec<(usize, usize)> = self
            .relations
            .iter()
            .flat_map(|r| r.edges.iter().copied())
            .collect();
        union.sort_unstable();
        union.dedup();
        MultiRelationGraph {
            features: self.features.clone(),
            labels: self.labels.clone(),
            relations: vec![Relation::from_canonical(self.num_nodes(), union)],
        }
    }

    pub fn graph_stats(&self) -> GraphStats {
        let fraud_fraction = self.fraud_fraction();
        let nodes = self.num_nodes();
        let row = |edges: usize| RelationStats {
            nodes,
            edges,
            avg_degree: if nodes == 0 {
                0.0
            } else {
                2.0 * edges as f64 / nodes as f64
            },
            fraud_fraction,
        };
        GraphStats {
            relations: self.relations.iter().map(|r| row(r.num_edges())).collect(),
            merged: row(self.merge_relations().relations[0].num_edges()),
        }
    }

    /// Fraction of labeled nodes that are fraud; 0 if nothing is labeled.
    pub fn fraud_fraction(&self) -> f64 {
        let (fraud, known) = self
            .labels
            .iter()
            .fold((0usize, 0usize), |(f, k), l| match l {
                Label::Fraud => (f + 1, k + 1),
                Label::Benign => (f, k + 1),
                Label::Unknown => (f, k),
            });
        if known == 0 {
            0.0
        } else {
            fraud as f64 / known as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationStats {
    pub nodes: usize,
    pub edges: usize,
    /// `2|E| / |V|`
    pub avg_degree: f64,
    pub fraud_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub relations: Vec<RelationStats>,
    pub merged: RelationStats,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: Vec<Vec<(usize, usize)>>) -> Result<MultiRelationGraph> {
        MultiRelationGraph::new(n, Array2::zeros((n, 1)), vec![Label::Benign; n], edges)
    }

    #[test]
    fn minimal_graph() {
        let g = graph(2, vec![vec![(0, 1)]]).unwrap();
        assert_eq!(g.relations()[0].num_edges(), 1);
        assert_eq!(g.neighbors_of(NodeId(1), RelationId(0)).unwrap(), &[NodeId(0)]);
    }

    #[test]
    fn endpoint_out_of_range() {
        let err = graph(3, vec![vec![(0, 5)]]).unwrap_err();
        assert!(matches!(err, Error::EndpointOutOfRange { v: 5, .. }));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(graph(2, vec![]), Err(Error::NoRelations)));
        let err = MultiRelationGraph::new(3, Array2::zeros((2, 1)), vec![Label::Benign; 3], vec![vec![]]);
        assert!(matches!(err, Err(Error::FeatureRows { rows: 2, nodes: 3 })));
        let err = MultiRelationGraph::new(2, Array2::zeros((2, 0)), vec![Label::Benign; 2], vec![vec![]]);
        assert!(matches!(err, Err(Error::EmptyFeatures)));
        assert!(matches!(graph(2, vec![vec![(1, 1)]]), Err(Error::SelfLoop { node: 1, .. })));
    }

    #[test]
    fn dedups_both_orientations() {
        let g = graph(2, vec![vec![(0, 1), (1, 0), (0, 1)]]).unwrap();
        // sorted canonical pairs: [(0,1),(0,1),(0,1)] -> one unique pair
        let mut oracle: Vec<(usize, usize)> = [(0, 1), (1, 0), (0, 1)]
            .iter()
            .map(|&(u, v): &(usize, usize)| (u.min(v), u.max(v)))
            .collect();
        oracle.sort();
        oracle.dedup();
        assert_eq!(g.relations()[0].num_edges(), oracle.len());
        assert_eq!(g.relations()[0].num_edges(), 1);
    }

    #[test]
    fn isolated_and_star_neighbors() {
        let g = graph(6, vec![vec![(0, 1), (0, 2), (3, 0), (0, 4)]]).unwrap();
        assert!(g.neighbors_of(NodeId(5), RelationId(0)).unwrap().is_empty());
        let star: Vec<usize> = g
            .neighbors_of(NodeId(0), RelationId(0))
            .unwrap()
            .iter()
            .map(|n| n.index())
            .collect();
        assert_eq!(star, vec![1, 2, 3, 4]);
        assert!(g.neighbors_of(NodeId(6), RelationId(0)).is_err());
        assert!(g.neighbors_of(NodeId(0), RelationId(1)).is_err());
    }

    #[test]
    fn merge_counts() {
        let same = graph(3, vec![vec![(0, 1)], vec![(1, 0)]]).unwrap();
        assert_eq!(same.merge_relations().relations()[0].num_edges(), 1);
        let disjoint = graph(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        let merged = disjoint.merge_relations();
        assert_eq!(merged.num_relations(), 1);
        assert_eq!(merged.relations()[0].num_edges(), 2);
        assert_eq!(merged.merge_relations(), merged);
    }

    #[test]
    fn stats_average_degree() {
        let g = graph(2, vec![vec![(0, 1)]]).unwrap();
        let stats = g.graph_stats();
        assert_eq!(stats.relations[0].avg_degree, 1.0);
        assert_eq!(stats.merged.edges, 1);
    }

    #[test]
    fn yelpchi_table_counts() {
        // merged edge count never exceeds the sum over relations
        let per_relation: u64 = 98_630 + 1_147_232 + 6_805_486;
        assert!(7_693_958 <= per_relation);
        let degree: f64 = 2.0 * 7_693_958.0 / 45_954.0;
        assert!((degree - 334.85).abs() < 0.01, "{degree}");
    }

    #[test]
    fn fraud_fraction_ignores_unknown() {
        let g = MultiRelationGraph::new(
            4,
            Array2::zeros((4, 1)),
            vec![Label::Fraud, Label::Benign, Label::Unknown, Label::Benign],
            vec![vec![]],
        )
        .unwrap();
        assert!((g.fraud_fraction() - 1.0 / 3.0).abs() < 1e-15);
    }
}
