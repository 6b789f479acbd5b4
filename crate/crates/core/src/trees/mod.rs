//! Decision-tree learners: a Gini random forest (the attack discriminator)
//! and gradient-boosted trees (the downstream utility classifier), plus
//! random-search hyperparameter optimization over the boosted-tree space.

mod forest;
mod gbdt;
mod hpo;
mod tree;

pub use forest::{fit_forest, fit_forest_with, ForestConfig, ForestModel};
pub use gbdt::{fit_gbdt, GbdtConfig, GbdtModel};
pub use hpo::{random_search, HpoResult, HpoSpace};
pub use tree::{gini_impurity, SplitRule, TreeNode};

use crate::data::{DataTable, Value};
use crate::transforms::FeatureHistogram;

/// How a feature splits: numeric features threshold, categorical features
/// test one category against the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical { arity: usize },
}

/// Dense feature matrix with per-feature kinds. Categorical cells hold the
/// category index as a float.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub kinds: Vec<FeatureKind>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    /// Features from a table, excluding the target column; labels use
    /// 1 = minority class.
    pub fn from_table(table: &DataTable) -> (FeatureMatrix, Vec<u8>) {
        let schema = table.schema();
        let target = schema.target_index();
        let mut kinds = Vec::new();
        for (c, col) in schema.columns.iter().enumerate() {
            if c == target {
                continue;
            }
            kinds.push(match col.categories() {
                Some(cats) => FeatureKind::Categorical { arity: cats.len() },
                None => FeatureKind::Numeric,
            });
        }
        let rows = table
            .rows()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != target)
                    .map(|(_, v)| match v {
                        Value::Cat(i) => *i as f64,
                        Value::Cont(x) => *x,
                    })
                    .collect()
            })
            .collect();
        (FeatureMatrix { kinds, rows }, table.labels())
    }

    /// All-numeric features from histogram vectors.
    pub fn from_histograms(histograms: &[FeatureHistogram]) -> FeatureMatrix {
        let width = histograms.first().map_or(0, |h| h.values.len());
        FeatureMatrix {
            kinds: vec![FeatureKind::Numeric; width],
            rows: histograms.iter().map(|h| h.values.clone()).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }
}
