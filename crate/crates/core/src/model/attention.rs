//! Relation attention and weighted aggregation on plain values.
//!
//! The training path records the same computation in a
//! [`DiffGraph`](crate::autodiff::DiffGraph); these helpers evaluate one
//! neighborhood directly.

use ndarray::Array1;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::RelationId;

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// `softmax_q(σ({h_q ‖ t_{r_q}} · a))` with σ a leaky-ReLU of the given slope.
///
/// `h_samples` is `Q × w`, `relation_embeddings` is `R × w_t` and
/// `attention` holds `w + w_t` entries.
pub fn relation_attention_weights(
    h_samples: &Matrix,
    relations: &[RelationId],
    relation_embeddings: &Matrix,
    attention: &[f64],
    slope: f64,
) -> Result<Vec<f64>> {
    let (q, w) = (h_samples.nrows(), h_samples.ncols());
    let wt = relation_embeddings.ncols();
    if relations.len() != q {
        return Err(Error::Length(format!("{} relations for {q} samples", relations.len())));
    }
    if attention.len() != w + wt {
        return Err(Error::shape(
            "relation_attention_weights",
            format!("attention width {} != {w} + {wt}", attention.len()),
        ));
    }
    if q == 0 {
        return Err(Error::EmptySoftmax);
    }
    let logits: Vec<f64> = (0..q)
        .map(|i| {
            let t = relation_embeddings.row(relations[i].index());
            let score: f64 = h_samples
                .row(i)
                .iter()
                .chain(t.iter())
                .zip(attention)
                .map(|(x, a)| x * a)
                .sum();
            leaky(score, slope)
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `Σ_q α_q h_q`.
pub fn aggregate_neighborhood(h_samples: &Matrix, alphas: &[f64]) -> Result<Array1<f64>> {
    if alphas.len() != h_samples.nrows() {
        return Err(Error::Length(format!(
            "{} weights for {} samples",
            alphas.len(),
            h_samples.nrows()
        )));
    }
    let mut out = Array1::zeros(h_samples.ncols());
    for (row, &a) in h_samples.rows().into_iter().zip(alphas) {
        out.scaled_add(a, &row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn equal_logits_are_uniform() {
        let h = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let t = array![[0.5]];
        let rel = [RelationId(0); 3];
        let a = relation_attention_weights(&h, &rel, &t, &[0.3, -0.1, 2.0], 0.01).unwrap();
        for w in a {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_sample_softmax() {
        // post-activation logits (1, 0)
        let h = array![[1.0], [0.0]];
        let t = array![[0.0]];
        let rel = [RelationId(0); 2];
        let a = relation_attention_weights(&h, &rel, &t, &[1.0, 0.0], 0.01).unwrap();
        let e = std::f64::consts::E;
        assert!((a[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((a[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((a[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn shift_invariance() {
        // a constant shift via the relation term moves every (positive) logit equally
        let h = array![[1.0], [2.0], [0.5]];
        let rel = [RelationId(0); 3];
        let a0 = relation_attention_weights(&h, &rel, &array![[1.0]], &[1.0, 1.0], 0.01).unwrap();
        let a1 = relation_attention_weights(&h, &rel, &array![[4.0]], &[1.0, 1.0], 0.01).unwrap();
        for (x, y) in a0.iter().zip(&a1) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch() {
        let h = array![[1.0, 2.0]];
        let err = relation_attention_weights(&h, &[RelationId(0)], &array![[0.0]], &[1.0, 1.0], 0.01);
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn aggregation_cases() {
        let single = array![[0.3, -0.7]];
        assert_eq!(aggregate_neighborhood(&single, &[1.0]).unwrap(), array![0.3, -0.7]);
        let two = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(aggregate_neighborhood(&two, &[0.5, 0.5]).unwrap(), array![0.5, 0.5]);
        let same = array![[0.2, 0.4], [0.2, 0.4], [0.2, 0.4]];
        let out = aggregate_neighborhood(&same, &[0.1, 0.6, 0.3]).unwrap();
        assert!((out[0] - 0.2).abs() < 1e-15 && (out[1] - 0.4).abs() < 1e-15);
        assert!(aggregate_neighborhood(&two, &[1.0]).is_err());
    }
}
