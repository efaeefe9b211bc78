//! Train/test masks over labeled nodes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;
use crate::rng::{stream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            stratified: true,
            seed,
        }
    }
}

/// Disjoint train and test masks covering every labeled node.
///
/// Each group (both classes when stratified, all labeled nodes otherwise)
/// contributes `round(train_fraction · size)` nodes to training, chosen
/// by a seeded shuffle. Unlabeled nodes are in neither mask.
pub fn split_dataset(g: &MultiRelationGraph, spec: &SplitSpec) -> Result<(Vec<bool>, Vec<bool>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n = g.num_nodes();
    let labels = g.labels();
    let groups: Vec<(Option<u8>, Vec<usize>)> = if spec.stratified {
        (0..2u8)
            .map(|c| {
                let members = (0..n).filter(|&v| labels[v].class() == Some(c)).collect();
                (Some(c), members)
            })
            .collect()
    } else {
        vec![(None, (0..n).filter(|&v| labels[v].is_known()).collect())]
    };

    let mut train = vec![false; n];
    let mut test = vec![false; n];
    for (c, mut members) in groups {
        let k = (spec.train_fraction * members.len() as f64).round() as usize;
        if let Some(class) = c {
            if k == 0 {
                return Err(Error::SplitClassAbsent { class, split: "train" });
            }
            if k == members.len() {
                return Err(Error::SplitClassAbsent { class, split: "test" });
            }
        }
        let mut rng = stream(&[tag::SPLIT, spec.seed, u64::from(c.unwrap_or(2))]);
        members.shuffle(&mut rng);
        for (i, &v) in members.iter().enumerate() {
            if i < k {
                train[v] = true;
            } else {
                test[v] = true;
            }
        }
    }
    if !train.contains(&true) {
        return Err(Error::EmptyMask);
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;
    use crate::graph::Label;

    fn graph(fraud: usize, benign: usize) -> MultiRelationGraph {
        let n = fraud + benign;
        let mut labels = vec![Label::Benign; n];
        for l in labels.iter_mut().take(fraud) {
            *l = Label::Fraud;
        }
        MultiRelationGraph::new(n, Array2::zeros((n, 1)), labels, vec![vec![(0, 1)]]).unwrap()
    }

    #[test]
    fn unstratified_counts() {
        let g = graph(3, 7);
        let spec = SplitSpec {
            stratified: false,
            ..SplitSpec::new(0.8, 1)
        };
        let (train, test) = split_dataset(&g, &spec).unwrap();
        assert_eq!(train.iter().filter(|&&t| t).count(), 8);
        assert!(train.iter().zip(&test).all(|(a, b)| a ^ b));
    }

    #[test]
    fn stratified_counts() {
        let g = graph(145, 855);
        let (train, _) = split_dataset(&g, &SplitSpec::new(0.6, 3)).unwrap();
        let fraud = (0..1000).filter(|&v| train[v] && g.labels()[v] == Label::Fraud).count();
        let benign = (0..1000).filter(|&v| train[v] && g.labels()[v] == Label::Benign).count();
        assert_eq!((fraud, benign), (87, 513));
    }

    #[test]
    fn deterministic() {
        let g = graph(20, 80);
        let a = split_dataset(&g, &SplitSpec::new(0.4, 9)).unwrap();
        let b = split_dataset(&g, &SplitSpec::new(0.4, 9)).unwrap();
        let c = split_dataset(&g, &SplitSpec::new(0.4, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_class_cannot_be_stratified() {
        let g = graph(1, 9);
        assert!(matches!(
            split_dataset(&g, &SplitSpec::new(0.8, 0)),
            Err(Error::SplitClassAbsent { class: 1, split: "test" })
        ));
        assert!(split_dataset(&g, &SplitSpec::new(1.0, 0)).is_err());
    }
}
