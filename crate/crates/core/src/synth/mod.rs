//! The five generators: Gaussian copula, CTGAN, TVAE, and the differentially
//! private CTGAN/TVAE variants, behind one `Synthesizer`/`Fitted` pair of
//! traits so benchmark code and the attack treat them uniformly.

mod checkpoint;
mod copula;
mod ctgan;
mod dpctgan;
mod tvae;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelPayload};
pub use copula::{fit_gaussian_copula, GaussianCopulaModel};
pub use ctgan::{fit_ctgan, CondMode, CtganModel, EpochLog, TrainStats};
pub use dpctgan::fit_dp_ctgan;
pub use tvae::{fit_dp_tvae, fit_tvae, TvaeModel};

use serde::{Deserialize, Serialize};

use crate::data::{DataTable, TableSchema};
use crate::error::{Error, Result};
use crate::privacy::{DpLedger, PrivacyParams};

/// Training knobs shared by the neural generators. Defaults follow the
/// reference CTGAN/TVAE setups; benchmark configs shrink them for desk runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Batch size; for DP training this is the expected Poisson lot size.
    pub batch: usize,
    pub learning_rate: f64,
    pub embedding_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    /// Gumbel-softmax temperature for one-hot heads.
    pub tau: f64,
    pub gradient_penalty_weight: f64,
    pub clip_norm: f64,
    pub delta: f64,
    pub uniform_bins: usize,
    pub gmm_components: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch: 500,
            learning_rate: 1e-3,
            embedding_dim: 128,
            generator_hidden: vec![256, 256],
            discriminator_hidden: vec![256, 256],
            encoder_hidden: vec![128, 128],
            decoder_hidden: vec![128, 128],
            tau: 0.2,
            gradient_penalty_weight: 10.0,
            clip_norm: 1.0,
            delta: 1e-5,
            uniform_bins: 10,
            gmm_components: 10,
        }
    }
}

impl TrainConfig {
    /// A small configuration for tests and desk-scale runs.
    pub fn desk(epochs: usize, batch: usize) -> Self {
        TrainConfig {
            epochs,
            batch,
            embedding_dim: 32,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
            encoder_hidden: vec![48, 48],
            decoder_hidden: vec![48, 48],
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::invalid("epochs and batch must be >= 1"));
        }
        if self.learning_rate <= 0.0 || self.tau <= 0.0 {
            return Err(Error::invalid("learning rate and tau must be positive"));
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::invalid("clip norm must be positive"));
        }
        Ok(())
    }

    /// Steps per epoch: one step per expected lot of rows.
    pub fn steps_per_epoch(&self, n_rows: usize) -> u64 {
        n_rows.div_ceil(self.batch.min(n_rows)) as u64
    }

    pub fn total_steps(&self, n_rows: usize) -> u64 {
        self.epochs as u64 * self.steps_per_epoch(n_rows)
    }

    /// Poisson sampling rate giving an expected lot of `batch` rows.
    pub fn sampling_rate(&self, n_rows: usize) -> f64 {
        (self.batch as f64 / n_rows as f64).min(1.0)
    }
}

/// CTGAN ablation switches; meaningful for the non-private variant only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Conditions sampled by raw value frequency instead of log frequency.
    pub uni_samp: bool,
    /// Real batches drawn uniformly instead of matched to conditions.
    pub batch_samp: bool,
    /// Drop the gradient penalty term.
    pub no_penalty: bool,
    /// Uniform binning instead of the GMM normalizer.
    pub uni_trans: bool,
    /// Clip the aggregated discriminator gradient to norm 1 per step.
    pub grad_clip: bool,
}

/// One-hot space over all categorical columns, the home of condition
/// vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondSpace {
    /// Schema indices of the categorical columns, in schema order.
    pub columns: Vec<usize>,
    /// Start of each column's span in the concatenated one-hot vector.
    pub offsets: Vec<usize>,
    pub arities: Vec<usize>,
    pub width: usize,
}

impl CondSpace {
    pub fn for_schema(schema: &TableSchema) -> Self {
        let mut columns = Vec::new();
        let mut offsets = Vec::new();
        let mut arities = Vec::new();
        let mut cursor = 0;
        for (c, col) in schema.columns.iter().enumerate() {
            if let Some(cats) = col.categories() {
                columns.push(c);
                offsets.push(cursor);
                arities.push(cats.len());
                cursor += cats.len();
            }
        }
        CondSpace {
            columns,
            offsets,
            arities,
            width: cursor,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

/// A (column, value) condition: exactly one column active, exactly one
/// value active within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalVector {
    /// Index into [`CondSpace::columns`].
    pub column_slot: usize,
    /// Category index within that column.
    pub value: usize,
}

impl ConditionalVector {
    pub fn to_onehot(self, space: &CondSpace) -> Vec<f64> {
        let mut v = vec![0.0; space.width];
        v[space.offsets[self.column_slot] + self.value] = 1.0;
        v
    }

    /// Schema column index this condition points at.
    pub fn schema_column(self, space: &CondSpace) -> usize {
        space.columns[self.column_slot]
    }
}

/// A fitted generator ready to sample.
pub trait Fitted: Send + Sync {
    /// Draw exactly `n` schema-valid rows, deterministically per seed.
    fn sample(&self, n: usize, seed: u64) -> Result<DataTable>;

    fn schema(&self) -> &TableSchema;

    /// Privacy ledger, for the DP variants.
    fn ledger(&self) -> Option<&DpLedger> {
        None
    }

    /// Serializable checkpoint; `None` for test doubles.
    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

/// A generator recipe: fit on a training table with a seed.
pub trait Synthesizer: Send + Sync {
    fn name(&self) -> String;
    fn fit(&self, train: &DataTable, seed: u64) -> Result<Box<dyn Fitted>>;
}

/// Non-neural baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianCopula;

impl Synthesizer for GaussianCopula {
    fn name(&self) -> String {
        "gaussian-copula".to_string()
    }

    fn fit(&self, train: &DataTable, _seed: u64) -> Result<Box<dyn Fitted>> {
        Ok(Box::new(fit_gaussian_copula(train)?))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ctgan {
    pub config: TrainConfig,
    pub flags: AblationFlags,
}

impl Synthesizer for Ctgan {
    fn name(&self) -> String {
        let mut name = "ctgan".to_string();
        for (on, tag) in [
            (self.flags.uni_samp, "uni-samp"),
            (self.flags.batch_samp, "batch-samp"),
            (self.flags.no_penalty, "no-penalty"),
            (self.flags.uni_trans, "uni-trans"),
            (self.flags.grad_clip, "grad-clip"),
        ] {
            if on {
                name.push('+');
                name.push_str(tag);
            }
        }
        name
    }

    fn fit(&self, train: &DataTable, seed: u64) -> Result<Box<dyn Fitted>> {
        Ok(Box::new(fit_ctgan(train, &self.config, self.flags, seed)?))
    }
}

#[derive(Debug, Clone)]
pub struct DpCtgan {
    pub config: TrainConfig,
    pub epsilon: f64,
}

impl DpCtgan {
    pub(crate) fn privacy_for(&self, train: &DataTable) -> Result<PrivacyParams> {
        PrivacyParams::new(
            self.epsilon,
            self.config.delta,
            self.config.sampling_rate(train.n_rows()),
            self.config.total_steps(train.n_rows()),
        )
    }
}

impl Synthesizer for DpCtgan {
    fn name(&self) -> String {
        format!("dp-ctgan(eps={})", fmt_eps(self.epsilon))
    }

    fn fit(&self, train: &DataTable, seed: u64) -> Result<Box<dyn Fitted>> {
        let privacy = self.privacy_for(train)?;
        Ok(Box::new(fit_dp_ctgan(train, &self.config, &privacy, seed)?))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tvae {
    pub config: TrainConfig,
}

impl Synthesizer for Tvae {
    fn name(&self) -> String {
        "tvae".to_string()
    }

    fn fit(&self, train: &DataTable, seed: u64) -> Result<Box<dyn Fitted>> {
        Ok(Box::new(fit_tvae(train, &self.config, None, seed)?))
    }
}

#[derive(Debug, Clone)]
pub struct DpTvae {
    pub config: TrainConfig,
    pub epsilon: f64,
}

impl Synthesizer for DpTvae {
    fn name(&self) -> String {
        format!("dp-tvae(eps={})", fmt_eps(self.epsilon))
    }

    fn fit(&self, train: &DataTable, seed: u64) -> Result<Box<dyn Fitted>> {
        let privacy = PrivacyParams::new(
            self.epsilon,
            self.config.delta,
            self.config.sampling_rate(train.n_rows()),
            self.config.total_steps(train.n_rows()),
        )?;
        Ok(Box::new(fit_tvae(train, &self.config, Some(privacy), seed)?))
    }
}

pub(crate) fn fmt_eps(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".to_string()
    } else {
        format!("{eps}")
    }
}

pub(crate) fn check_sample_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    Ok(())
}
