//! CTGAN: a conditional WGAN-GP over encoded rows. This file holds the
//! non-private trainer (with its ablation switches) plus the model type and
//! condition machinery shared with the private variant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::data::{DataTable, Row, TableSchema};
use crate::error::{Error, Result};
use crate::nn::{
    gradient_penalty, head_backward, head_forward, head_hard_sample, l2_norm, sample_gumbels,
    softmax, AdamState, Activation, HeadSpec, LayerSpec, Mlp, NetSpec,
};
use crate::privacy::DpLedger;
use crate::rng::derive_rng;
use crate::synth::{
    check_sample_count, AblationFlags, Checkpoint, CondSpace, ConditionalVector, Fitted,
    ModelPayload, TrainConfig,
};
use crate::transforms::{fit_uniform_binner, Encoder, EncodingLayout, GmmNormalizer};

/// How condition vectors are drawn outside of training: from stored value
/// weights (non-private) or uniformly from schema metadata alone (private).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondMode {
    /// Column uniform, value by per-column weights.
    Weighted { weights: Vec<Vec<f64>> },
    /// Column uniform, value uniform over the column's alphabet.
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub disc_steps: u64,
    pub gen_steps: u64,
    /// Discriminator steps that consumed privacy budget.
    pub noisy_steps: u64,
    /// Largest per-sample gradient norm observed after clipping.
    pub max_clipped_norm: f64,
    /// Real-row reads observed while generator updates ran; must stay 0 for
    /// the private variant.
    pub gen_step_real_reads: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub disc_loss: f64,
    pub gen_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtganModel {
    pub(crate) schema: Arc<TableSchema>,
    pub encoder: Encoder,
    pub generator: Mlp<f64>,
    pub discriminator: Mlp<f64>,
    pub heads: HeadSpec,
    pub cond: CondSpace,
    pub cond_mode: CondMode,
    pub tau: f64,
    pub embedding_dim: usize,
    pub ledger: Option<DpLedger>,
    pub training_log: Vec<EpochLog>,
    pub stats: TrainStats,
    pub(crate) minority_value: usize,
}

pub(crate) fn gan_adam(param_count: usize, lr: f64) -> AdamState<f64> {
    let mut adam = AdamState::new(param_count, lr);
    adam.beta1 = 0.5;
    adam.beta2 = 0.9;
    adam
}

pub(crate) fn build_generator(
    emb: usize,
    cond_width: usize,
    out_width: usize,
    hidden: &[usize],
    seed: u64,
) -> Result<Mlp<f64>> {
    let mut layers = Vec::new();
    let mut prev = emb + cond_width;
    for &w in hidden {
        layers.push(if w == prev {
            LayerSpec::residual(w, Activation::Relu)
        } else {
            LayerSpec::new(w, Activation::Relu)
        });
        prev = w;
    }
    layers.push(LayerSpec::new(out_width, Activation::Identity));
    Ok(Mlp::init(NetSpec::new(emb + cond_width, layers)?, seed))
}

pub(crate) fn build_discriminator(
    in_width: usize,
    hidden: &[usize],
    seed: u64,
) -> Result<Mlp<f64>> {
    let mut layers = Vec::new();
    for &w in hidden {
        layers.push(LayerSpec::new(w, Activation::LeakyRelu));
    }
    layers.push(LayerSpec::new(1, Activation::Identity));
    Ok(Mlp::init(NetSpec::new(in_width, layers)?, seed))
}

/// Log-frequency (or raw-frequency) value weights per categorical column.
fn condition_weights(train: &DataTable, cond: &CondSpace, raw_frequency: bool) -> Vec<Vec<f64>> {
    let mut weights = Vec::with_capacity(cond.n_columns());
    for (slot, &col) in cond.columns.iter().enumerate() {
        let mut counts = vec![0.0f64; cond.arities[slot]];
        for row in train.rows() {
            counts[row[col].as_cat()] += 1.0;
        }
        let scored: Vec<f64> = counts
            .iter()
            .map(|&c| if raw_frequency { c } else { c.ln_1p() })
            .collect();
        let total: f64 = scored.iter().sum();
        weights.push(scored.into_iter().map(|s| s / total).collect());
    }
    weights
}

pub(crate) fn sample_from_weights(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

pub(crate) fn sample_condition_weighted(
    cond: &CondSpace,
    weights: &[Vec<f64>],
    rng: &mut impl Rng,
) -> ConditionalVector {
    let column_slot = rng.random_range(0..cond.n_columns());
    ConditionalVector {
        column_slot,
        value: sample_from_weights(&weights[column_slot], rng),
    }
}

pub(crate) fn sample_condition_uniform(cond: &CondSpace, rng: &mut impl Rng) -> ConditionalVector {
    let column_slot = rng.random_range(0..cond.n_columns());
    ConditionalVector {
        column_slot,
        value: rng.random_range(0..cond.arities[column_slot]),
    }
}

/// Condition carrying a uniformly chosen column and the row's value there.
pub(crate) fn condition_from_row(
    cond: &CondSpace,
    row: &Row,
    rng: &mut impl Rng,
) -> ConditionalVector {
    let column_slot = rng.random_range(0..cond.n_columns());
    ConditionalVector {
        column_slot,
        value: row[cond.columns[column_slot]].as_cat(),
    }
}

pub(crate) fn disc_input(row: &[f64], cond_onehot: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(row.len() + cond_onehot.len());
    u.extend_from_slice(row);
    u.extend_from_slice(cond_onehot);
    u
}

pub(crate) fn standard_normals(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One relaxed generator draw during training: body tape plus head output.
pub(crate) struct GenDraw {
    pub tape: crate::nn::Tape<f64>,
    pub body_out: Vec<f64>,
    pub out: Vec<f64>,
    pub cond_onehot: Vec<f64>,
    pub condition: ConditionalVector,
}

pub(crate) fn gen_draw(
    generator: &Mlp<f64>,
    heads: &HeadSpec,
    cond: &CondSpace,
    condition: ConditionalVector,
    tau: f64,
    emb: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GenDraw> {
    let cond_onehot = condition.to_onehot(cond);
    let mut input = standard_normals(emb, rng);
    input.extend_from_slice(&cond_onehot);
    let tape = generator.forward(&input)?;
    let body_out = tape.output().to_vec();
    let gumbels = sample_gumbels(body_out.len(), rng);
    let out = head_forward(heads, &body_out, tau, &gumbels);
    Ok(GenDraw {
        tape,
        body_out,
        out,
        cond_onehot,
        condition,
    })
}

/// One generator update: fresh conditions from `draw_condition`, loss
/// `-mean D(G) + mean CE(conditioned block, condition value)`, plain Adam.
///
/// By signature this step sees conditions, schema layout, and discriminator
/// outputs only; no table or encoded real matrix can reach it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn generator_step(
    generator: &mut Mlp<f64>,
    adam: &mut AdamState<f64>,
    discriminator: &Mlp<f64>,
    heads: &HeadSpec,
    cond: &CondSpace,
    layout: &EncodingLayout,
    draw_condition: &mut dyn FnMut(&mut ChaCha8Rng) -> ConditionalVector,
    batch: usize,
    tau: f64,
    emb: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut grad = vec![0.0f64; generator.spec.param_count()];
    let mut loss_sum = 0.0;
    for _ in 0..batch {
        let condition = draw_condition(rng);
        let draw = gen_draw(generator, heads, cond, condition, tau, emb, rng)?;
        let u = disc_input(&draw.out, &draw.cond_onehot);
        let d_tape = discriminator.forward(&u)?;
        let score = d_tape.output()[0];

        // dL/d(fake row) from the critic, row coordinates only.
        let back = discriminator.backward(&d_tape, &[-1.0])?;
        let d_fake = &back.input_grad[..layout.width];
        let mut dbody = head_backward(heads, &draw.body_out, &draw.out, tau, d_fake);

        // Cross-entropy on the conditioned block's raw logits. The body
        // output shares the encoded-row layout, so the conditioned column's
        // block position comes straight from the layout slice.
        let slice = &layout.slices[draw.condition.schema_column(cond)];
        let (start, len) = (slice.onehot_start, slice.onehot_len);
        let probs = softmax(&draw.body_out[start..start + len]);
        let target = draw.condition.value;
        loss_sum += -score - probs[target].max(1e-12).ln();
        for j in 0..len {
            let indicator = if j == target { 1.0 } else { 0.0 };
            dbody[start + j] += probs[j] - indicator;
        }

        generator.backward_into(&draw.tape, &dbody, &mut grad)?;
    }
    let scale = 1.0 / batch as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    adam.step(&mut generator.params, &grad)?;
    Ok(loss_sum * scale)
}

pub fn fit_ctgan(
    train: &DataTable,
    config: &TrainConfig,
    flags: AblationFlags,
    seed: u64,
) -> Result<CtganModel> {
    config.validate()?;
    let schema = train.shared_schema();
    let encoder = if flags.uni_trans {
        Encoder::uniform(
            Arc::clone(&schema),
            fit_uniform_binner(&schema, config.uniform_bins)?,
        )
    } else {
        Encoder::gmm(
            Arc::clone(&schema),
            GmmNormalizer::fit(train, config.gmm_components, seed)?,
        )
    };
    let real = encoder.encode(train)?;
    let layout = encoder.layout().clone();
    let layout_width = layout.width;

    let cond = CondSpace::for_schema(&schema);
    let weights = condition_weights(train, &cond, flags.uni_samp);

    // Rows grouped by (condition column, value) for training-by-sampling.
    let mut rows_by_value: Vec<Vec<Vec<usize>>> = cond
        .arities
        .iter()
        .map(|&a| vec![Vec::new(); a])
        .collect();
    for (r, row) in train.rows().iter().enumerate() {
        for (slot, &col) in cond.columns.iter().enumerate() {
            rows_by_value[slot][row[col].as_cat()].push(r);
        }
    }

    let heads = HeadSpec::for_layout(encoder.layout());
    let mut generator = build_generator(
        config.embedding_dim,
        cond.width,
        layout_width,
        &config.generator_hidden,
        seed ^ 0x47454e,
    )?;
    let mut discriminator = build_discriminator(
        layout_width + cond.width,
        &config.discriminator_hidden,
        seed ^ 0x444953,
    )?;

    let mut gen_adam = gan_adam(generator.spec.param_count(), config.learning_rate);
    let mut disc_adam = gan_adam(discriminator.spec.param_count(), config.learning_rate);

    let batch = config.batch.min(train.n_rows());
    let steps_per_epoch = config.steps_per_epoch(train.n_rows());
    let mut stats = TrainStats::default();
    let mut training_log = Vec::with_capacity(config.epochs);
    let mut rng = derive_rng(seed, "ctgan-train", 0);

    for epoch in 0..config.epochs {
        let mut disc_loss_sum = 0.0;
        let mut gen_loss_sum = 0.0;
        for _ in 0..steps_per_epoch {
            // Discriminator step.
            let mut grad = vec![0.0f64; discriminator.spec.param_count()];
            let mut step_loss = 0.0;
            for _ in 0..batch {
                let condition = sample_condition_weighted(&cond, &weights, &mut rng);
                let row_pool = &rows_by_value[condition.column_slot][condition.value];
                let real_idx = if flags.batch_samp || row_pool.is_empty() {
                    rng.random_range(0..train.n_rows())
                } else {
                    row_pool[rng.random_range(0..row_pool.len())]
                };
                let draw = gen_draw(
                    &generator,
                    &heads,
                    &cond,
                    condition,
                    config.tau,
                    config.embedding_dim,
                    &mut rng,
                )?;
                let fake_u = disc_input(&draw.out, &draw.cond_onehot);
                let real_u = disc_input(real.row(real_idx), &draw.cond_onehot);

                let fake_tape = discriminator.forward(&fake_u)?;
                discriminator.backward_into(&fake_tape, &[1.0], &mut grad)?;
                let real_tape = discriminator.forward(&real_u)?;
                discriminator.backward_into(&real_tape, &[-1.0], &mut grad)?;
                step_loss += fake_tape.output()[0] - real_tape.output()[0];

                if !flags.no_penalty {
                    let t: f64 = rng.random();
                    let interpolate: Vec<f64> = real_u
                        .iter()
                        .zip(fake_u.iter())
                        .map(|(r, f)| t * r + (1.0 - t) * f)
                        .collect();
                    let (p, pgrad) = gradient_penalty(&discriminator, &interpolate)?;
                    step_loss += config.gradient_penalty_weight * p;
                    for (g, pg) in grad.iter_mut().zip(pgrad.iter()) {
                        *g += config.gradient_penalty_weight * pg;
                    }
                }
            }
            let scale = 1.0 / batch as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if flags.grad_clip {
                let norm = l2_norm(&grad);
                if norm > 1.0 {
                    let s = 1.0 / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            disc_adam.step(&mut discriminator.params, &grad)?;
            stats.disc_steps += 1;
            disc_loss_sum += step_loss * scale;

            // Generator step with fresh weighted conditions.
            let mut draw_condition =
                |rng: &mut ChaCha8Rng| sample_condition_weighted(&cond, &weights, rng);
            let gen_loss = generator_step(
                &mut generator,
                &mut gen_adam,
                &discriminator,
                &heads,
                &cond,
                &layout,
                &mut draw_condition,
                batch,
                config.tau,
                config.embedding_dim,
                &mut rng,
            )?;
            stats.gen_steps += 1;
            gen_loss_sum += gen_loss;
        }
        training_log.push(EpochLog {
            epoch,
            disc_loss: disc_loss_sum / steps_per_epoch as f64,
            gen_loss: gen_loss_sum / steps_per_epoch as f64,
        });
    }

    Ok(CtganModel {
        schema,
        encoder,
        generator,
        discriminator,
        heads,
        cond,
        cond_mode: CondMode::Weighted { weights },
        tau: config.tau,
        embedding_dim: config.embedding_dim,
        ledger: None,
        training_log,
        stats,
        minority_value: train.minority_value(),
    })
}

impl CtganModel {
    pub(crate) fn draw_condition(&self, rng: &mut ChaCha8Rng) -> ConditionalVector {
        match &self.cond_mode {
            CondMode::Weighted { weights } => sample_condition_weighted(&self.cond, weights, rng),
            CondMode::Uniform => sample_condition_uniform(&self.cond, rng),
        }
    }
}

impl Fitted for CtganModel {
    fn sample(&self, n: usize, seed: u64) -> Result<DataTable> {
        check_sample_count(n)?;
        let mut rng = derive_rng(seed, "ctgan-sample", 0);
        let layout_width = self.encoder.layout().width;
        let mut rows: Vec<Row> = Vec::with_capacity(n);
        for _ in 0..n {
            let condition = self.draw_condition(&mut rng);
            let cond_onehot = condition.to_onehot(&self.cond);
            let mut input = standard_normals(self.embedding_dim, &mut rng);
            input.extend_from_slice(&cond_onehot);
            let body = self.generator.forward_only(&input)?;
            let out = head_hard_sample(&self.heads, &body[..layout_width], &mut rng);
            rows.push(self.encoder.decode_row(&out)?);
        }
        let mut table = DataTable::with_shared_schema(Arc::clone(&self.schema), rows)?;
        table.set_minority_value(self.minority_value);
        Ok(table)
    }

    fn schema(&self) -> &TableSchema {
        &self.schema
    }

    fn ledger(&self) -> Option<&DpLedger> {
        self.ledger.as_ref()
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(Checkpoint::new(ModelPayload::Ctgan(self.clone())))
    }
}
