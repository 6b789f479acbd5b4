//! Random forest over Gini trees: bootstrap rows, sqrt(d) features per
//! split, majority vote.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::trees::tree::{fit_classification_tree, TreeNode};
use crate::trees::FeatureMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means sqrt of the feature count.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            mtry: None,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeNode>,
    n_features: usize,
    /// True when training saw a single label and the forest is constant.
    pub degenerate: bool,
}

/// Forest with the standard configuration: `n_trees` bootstrapped Gini
/// trees with sqrt(d) feature subsampling.
pub fn fit_forest(x: &FeatureMatrix, y: &[u8], n_trees: usize, seed: u64) -> Result<ForestModel> {
    fit_forest_with(
        x,
        y,
        &ForestConfig {
            n_trees,
            ..ForestConfig::default()
        },
        seed,
    )
}

pub fn fit_forest_with(
    x: &FeatureMatrix,
    y: &[u8],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    if x.n_rows() != y.len() || x.n_rows() < 2 {
        return Err(Error::invalid(format!(
            "forest needs >= 2 labeled rows, got {} rows / {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::invalid("forest needs n_trees >= 1"));
    }
    let degenerate = y.iter().all(|&l| l == y[0]);

    let mtry = config
        .mtry
        .or_else(|| Some((x.n_features() as f64).sqrt().round().max(1.0) as usize));
    let trees: Vec<TreeNode> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_rng(seed, "forest-tree", t as u64);
            let indices: Vec<usize> = if config.bootstrap {
                use rand::Rng;
                (0..x.n_rows()).map(|_| rng.random_range(0..x.n_rows())).collect()
            } else {
                (0..x.n_rows()).collect()
            };
            let mut split_rng = derive_rng(seed, "forest-splits", t as u64);
            fit_classification_tree(
                x,
                y,
                &indices,
                config.max_depth,
                mtry,
                &mut Some(&mut split_rng),
            )
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_features: x.n_features(),
        degenerate,
    })
}

impl ForestModel {
    /// Majority vote across trees.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let votes: usize = self
            .trees
            .iter()
            .filter(|t| t.evaluate(row) > 0.5)
            .count();
        u8::from(2 * votes > self.trees.len())
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Vec<u8> {
        x.rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub(crate) fn single_tree(&self) -> Option<&TreeNode> {
        if self.trees.len() == 1 {
            Some(&self.trees[0])
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use crate::trees::tree::fit_classification_tree;
    use crate::trees::FeatureKind;
    use rand::Rng;

    fn separable(n: usize) -> (FeatureMatrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let label = i % 2;
                vec![label as f64 * 4.0 + (i % 5) as f64 * 0.1, (i % 3) as f64]
            })
            .collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        (
            FeatureMatrix {
                kinds: vec![FeatureKind::Numeric, FeatureKind::Numeric],
                rows,
            },
            y,
        )
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let (x, y) = separable(60);
        let forest = fit_forest(&x, &y, 20, 1).unwrap();
        let predictions = forest.predict_batch(&x);
        assert_eq!(predictions, y);
    }

    #[test]
    fn independent_labels_score_near_half_on_holdout() {
        let mut rng = derive_rng(5, "forest-null", 0);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = (0..400).map(|_| u8::from(rng.random::<bool>())).collect();
        let x = FeatureMatrix {
            kinds: vec![FeatureKind::Numeric; 4],
            rows,
        };
        let train_x = FeatureMatrix {
            kinds: x.kinds.clone(),
            rows: x.rows[..300].to_vec(),
        };
        let forest = fit_forest(&train_x, &y[..300], 40, 2).unwrap();
        let correct = x.rows[300..]
            .iter()
            .zip(&y[300..])
            .filter(|(r, l)| forest.predict(r) == **l)
            .count();
        let acc = correct as f64 / 100.0;
        assert!((acc - 0.5).abs() < 0.13, "null accuracy {acc}");
    }

    #[test]
    fn single_label_training_yields_constant_forest() {
        let (x, _) = separable(20);
        let y = vec![1u8; 20];
        let forest = fit_forest(&x, &y, 5, 0).unwrap();
        assert!(forest.degenerate);
        assert!(x.rows.iter().all(|r| forest.predict(r) == 1));
    }

    #[test]
    fn forest_of_one_tree_without_randomness_equals_single_tree() {
        let (x, y) = separable(50);
        let forest = fit_forest_with(
            &x,
            &y,
            &ForestConfig {
                n_trees: 1,
                bootstrap: false,
                mtry: Some(x.n_features()),
                max_depth: None,
            },
            3,
        )
        .unwrap();
        let indices: Vec<usize> = (0..x.n_rows()).collect();
        let tree = fit_classification_tree(&x, &y, &indices, None, None, &mut None);
        assert_eq!(forest.single_tree().unwrap(), &tree);
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = separable(40);
        let a = fit_forest(&x, &y, 10, 9).unwrap();
        let b = fit_forest(&x, &y, 10, 9).unwrap();
        assert_eq!(a.predict_batch(&x), b.predict_batch(&x));
    }
}
