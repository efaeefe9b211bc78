//! Binary classification metrics.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// F1 of the positive (fraud) class.
    BinaryPositive,
    /// Unweighted mean of the F1 of both classes.
    Macro,
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "binary-positive" => Ok(Averaging::BinaryPositive),
            "macro" => Ok(Averaging::Macro),
            other => Err(Error::Config(format!("unknown F1 averaging `{other}`"))),
        }
    }
}

fn class_f1(predictions: &[bool], labels: &[bool], positive: bool) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// F1 score. A class that is neither predicted nor present scores 0.
pub fn f1_score(predictions: &[bool], labels: &[bool], averaging: Averaging) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Length(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Length("F1 of an empty sequence".into()));
    }
    Ok(match averaging {
        Averaging::BinaryPositive => class_f1(predictions, labels, true),
        Averaging::Macro => 0.5 * (class_f1(predictions, labels, true) + class_f1(predictions, labels, false)),
    })
}

/// Rank-based AUC: the probability that a random positive outscores a
/// random negative, ties counting one half.
pub fn auc_score(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Length(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("AUC scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of average ranks (1-based) of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        let y = [true, true, true, false, false];
        let p = [true, true, false, true, false];
        // TP=2, FP=1, FN=1
        assert!((f1_score(&p, &y, Averaging::BinaryPositive).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(&y, &y, Averaging::Macro).unwrap(), 1.0);
        assert_eq!(f1_score(&y, &y, Averaging::BinaryPositive).unwrap(), 1.0);
    }

    #[test]
    fn all_negative_predictions() {
        let labels: Vec<bool> = (0..200).map(|i| i < 29).collect();
        let preds = vec![false; 200];
        assert_eq!(f1_score(&preds, &labels, Averaging::BinaryPositive).unwrap(), 0.0);
        // benign: TP=171, FN=0, FP=29
        let benign = 2.0 * 171.0 / (2.0 * 171.0 + 29.0);
        let macro_f1 = f1_score(&preds, &labels, Averaging::Macro).unwrap();
        assert!((macro_f1 - 0.5 * benign).abs() < 1e-15);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[0.9, 0.4, 0.6], &[true, false, true]).unwrap(), 1.0);
        assert_eq!(auc_score(&[0.9, 0.4, 0.3], &[true, false, true]).unwrap(), 0.5);
        assert_eq!(auc_score(&[0.2; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(auc_score(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
        assert!(f1_score(&[true], &[true, false], Averaging::Macro).is_err());
    }
}
