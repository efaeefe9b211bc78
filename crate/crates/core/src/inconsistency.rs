//! Context and feature characteristic scores of a relation.
//!
//! Both scores come in two conventions. The defaults
//! ([`ContextConvention::SameLabel`], [`FeatureConvention::DimNormalized`])
//! are the readings that produce magnitudes comparable to published
//! benchmark tables; the `FormulaLiteral` variants evaluate the printed
//! formulas verbatim.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph, RelationId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextConvention {
    /// Fraction of edges whose endpoints share a label.
    #[default]
    SameLabel,
    /// Fraction of edges whose endpoints differ, `Σ(1 − I(u∼v)) / |E|`.
    FormulaLiteral,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureConvention {
    /// `Σ exp(−‖x_u − x_v‖² / d) / |E|`
    #[default]
    #[serde(alias = "dim-normalized-distance")]
    DimNormalized,
    /// `Σ exp(−‖x_u − x_v‖²) / (|E|·d)`
    FormulaLiteral,
}

impl std::str::FromStr for ContextConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "same-label" => Ok(Self::SameLabel),
            "formula-literal" => Ok(Self::FormulaLiteral),
            other => Err(format!("unknown context convention `{other}`")),
        }
    }
}

impl std::str::FromStr for FeatureConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dim-normalized" | "dim-normalized-distance" => Ok(Self::DimNormalized),
            "formula-literal" => Ok(Self::FormulaLiteral),
            other => Err(format!("unknown feature convention `{other}`")),
        }
    }
}

/// Context score plus the number of edges that were skipped for having
/// a masked endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextScore {
    pub value: f64,
    pub skipped_edges: usize,
}

/// Context characteristic score of relation `r`.
///
/// With `skip_unlabeled`, edges touching a masked node are left out of
/// both numerator and denominator instead of failing.
pub fn context_characteristic(
    g: &MultiRelationGraph,
    r: RelationId,
    convention: ContextConvention,
    skip_unlabeled: bool,
) -> Result<ContextScore> {
    let relation = g.relation(r)?;
    if relation.num_edges() == 0 {
        return Err(Error::EmptyRelation { relation: r.index() });
    }
    let mut same = 0usize;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for &(u, v) in relation.edges() {
        match (g.label(u), g.label(v)) {
            (Label::Unknown, _) | (_, Label::Unknown) => {
                if !skip_unlabeled {
                    return Err(Error::UnlabeledEndpoint {
                        u,
                        v,
                        relation: r.index(),
                    });
                }
                skipped += 1;
            }
            (a, b) => {
                counted += 1;
                if a == b {
                    same += 1;
                }
            }
        }
    }
    if counted == 0 {
        return Err(Error::EmptyRelation { relation: r.index() });
    }
    // Σ(1 − I)/|E| == 1 − ΣI/|E|; the complement form makes the two
    // conventions sum to exactly 1.0 in floating point.
    let same_fraction = same as f64 / counted as f64;
    let value = match convention {
        ContextConvention::SameLabel => same_fraction,
        ContextConvention::FormulaLiteral => 1.0 - same_fraction,
    };
    Ok(ContextScore {
        value,
        skipped_edges: skipped,
    })
}

/// Feature characteristic score (RBF similarity across edges) of relation `r`.
pub fn feature_characteristic(
    g: &MultiRelationGraph,
    r: RelationId,
    convention: FeatureConvention,
) -> Result<f64> {
    let relation = g.relation(r)?;
    if relation.num_edges() == 0 {
        return Err(Error::EmptyRelation { relation: r.index() });
    }
    let d = g.feature_dim() as f64;
    let scale = match convention {
        FeatureConvention::DimNormalized => 1.0 / d,
        FeatureConvention::FormulaLiteral => 1.0,
    };
    let total: f64 = relation
        .edges()
        .iter()
        .map(|&(u, v)| {
            let dist: f64 = g
                .feature(u)
                .iter()
                .zip(g.feature(v).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-dist * scale).exp()
        })
        .sum();
    let edges = relation.num_edges() as f64;
    Ok(match convention {
        FeatureConvention::DimNormalized => total / edges,
        FeatureConvention::FormulaLiteral => total / (edges * d),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub context: ContextConvention,
    pub feature: FeatureConvention,
    /// Skip edges with a masked endpoint instead of failing.
    #[serde(default)]
    pub skip_unlabeled: bool,
    /// Also report the alternate convention of each score.
    #[serde(default)]
    pub verbose: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRecord {
    /// Relation index as a string, or `"merged"`.
    pub relation: String,
    pub nodes: usize,
    pub edges: usize,
    pub gamma_context: f64,
    pub gamma_feature: f64,
    pub skipped_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_context_alt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_feature_alt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicReport {
    pub context_convention: ContextConvention,
    pub feature_convention: FeatureConvention,
    pub records: Vec<CharacteristicRecord>,
}

fn record(
    g: &MultiRelationGraph,
    r: RelationId,
    name: String,
    opts: &ReportOptions,
) -> Result<CharacteristicRecord> {
    let context = context_characteristic(g, r, opts.context, opts.skip_unlabeled)?;
    let feature = feature_characteristic(g, r, opts.feature)?;
    let (context_alt, feature_alt) = if opts.verbose {
        let alt_c = match opts.context {
            ContextConvention::SameLabel => ContextConvention::FormulaLiteral,
            ContextConvention::FormulaLiteral => ContextConvention::SameLabel,
        };
        let alt_f = match opts.feature {
            FeatureConvention::DimNormalized => FeatureConvention::FormulaLiteral,
            FeatureConvention::FormulaLiteral => FeatureConvention::DimNormalized,
        };
        (
            Some(context_characteristic(g, r, alt_c, opts.skip_unlabeled)?.value),
            Some(feature_characteristic(g, r, alt_f)?),
        )
    } else {
        (None, None)
    };
    Ok(CharacteristicRecord {
        relation: name,
        nodes: g.num_nodes(),
        edges: g.relation(r)?.num_edges(),
        gamma_context: context.value,
        gamma_feature: feature,
        skipped_edges: context.skipped_edges,
        gamma_context_alt: context_alt,
        gamma_feature_alt: feature_alt,
    })
}

/// One record per relation followed by one for the merged graph.
pub fn relation_report(g: &MultiRelationGraph, opts: &ReportOptions) -> Result<CharacteristicReport> {
    let mut records = (0..g.num_relations())
        .map(|r| record(g, RelationId(r), r.to_string(), opts))
        .collect::<Result<Vec<_>>>()?;
    let merged = g.merge_relations();
    records.push(record(&merged, RelationId(0), "merged".to_string(), opts)?);
    Ok(CharacteristicReport {
        context_convention: opts.context,
        feature_convention: opts.feature,
        records,
    })
}

impl CharacteristicReport {
    /// Comma-separated table with a header row. Floats use the shortest
    /// representation that round-trips.
    pub fn to_csv(&self) -> String {
        let verbose = self.records.iter().any(|r| r.gamma_context_alt.is_some());
        let mut out = String::from("relation,nodes,edges,gamma_context,gamma_feature,skipped_edges");
        if verbose {
            out.push_str(",gamma_context_alt,gamma_feature_alt");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                r.relation, r.nodes, r.edges, r.gamma_context, r.gamma_feature, r.skipped_edges
            );
            if verbose {
                let _ = write!(
                    out,
                    ",{},{}",
                    r.gamma_context_alt.unwrap_or(f64::NAN),
                    r.gamma_feature_alt.unwrap_or(f64::NAN)
                );
            }
            out.push('\n');
        }
        out
    }
}
