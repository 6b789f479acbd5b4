//! Random-search hyperparameter optimization for the boosted-tree
//! classifier. The API takes only train and validation tables, so the test
//! split cannot be touched during search by construction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::metrics::{balanced_accuracy, ConfusionCounts};
use crate::rng::derive_rng;
use crate::trees::gbdt::{fit_gbdt, GbdtConfig, GbdtModel};

/// Sampling ranges, all inclusive. `learning_rate` is log-uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpoSpace {
    pub n_estimators: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub min_child_weight: (usize, usize),
    pub colsample_bytree: (f64, f64),
}

impl Default for HpoSpace {
    fn default() -> Self {
        HpoSpace {
            n_estimators: (100, 1000),
            max_depth: (3, 10),
            learning_rate: (0.005, 0.01),
            min_child_weight: (1, 5),
            colsample_bytree: (0.5, 1.0),
        }
    }
}

impl HpoSpace {
    fn draw(&self, rng: &mut impl Rng) -> GbdtConfig {
        let (lr_lo, lr_hi) = self.learning_rate;
        let log_lr = rng.random_range(lr_lo.ln()..=lr_hi.ln());
        GbdtConfig {
            n_estimators: rng.random_range(self.n_estimators.0..=self.n_estimators.1),
            max_depth: rng.random_range(self.max_depth.0..=self.max_depth.1),
            learning_rate: log_lr.exp(),
            min_child_weight: rng.random_range(self.min_child_weight.0..=self.min_child_weight.1)
                as f64,
            colsample_bytree: rng
                .random_range(self.colsample_bytree.0..=self.colsample_bytree.1),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpoResult {
    pub configs: Vec<GbdtConfig>,
    pub validation_scores: Vec<f64>,
    pub best: usize,
}

impl HpoResult {
    pub fn best_config(&self) -> &GbdtConfig {
        &self.configs[self.best]
    }

    pub fn best_score(&self) -> f64 {
        self.validation_scores[self.best]
    }
}

pub fn validation_balanced_accuracy(model: &GbdtModel, validation: &DataTable) -> Result<f64> {
    let truth = validation.labels();
    let predicted = model.predict(validation)?;
    balanced_accuracy(&ConfusionCounts::from_labels(&truth, &predicted))
}

/// Random search: each trial's configuration and fitting seed derive from
/// (seed, trial index) alone, so a longer search extends a shorter one with
/// the same seed instead of reshuffling it.
pub fn random_search(
    train: &DataTable,
    validation: &DataTable,
    space: &HpoSpace,
    trials: usize,
    seed: u64,
) -> Result<HpoResult> {
    if trials == 0 {
        return Err(Error::invalid("random search needs trials >= 1"));
    }
    let mut configs = Vec::with_capacity(trials);
    let mut scores = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = derive_rng(seed, "hpo-trial", trial as u64);
        let config = space.draw(&mut rng);
        let model = fit_gbdt(train, &config, seed ^ (trial as u64).wrapping_mul(0x9e37_79b9))?;
        let score = validation_balanced_accuracy(&model, validation)?;
        configs.push(config);
        scores.push(score);
    }
    let best = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("trials >= 1");
    Ok(HpoResult {
        configs,
        validation_scores: scores,
        best,
    })
}
