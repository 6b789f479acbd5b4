//! Differentially private CTGAN. Each discriminator step: Poisson-sample a
//! real lot; build one condition per sampled row from a uniformly random
//! column and that row's value; pair each condition with its originating
//! row; accumulate each real sample's Wasserstein terms plus the gradient
//! penalty from its own interpolate into a single per-sample gradient; clip
//! per sample, add Gaussian noise, update with DP-Adam. Generator updates
//! see only metadata-drawn conditions and discriminator outputs, so they are
//! post-processing and consume no budget.

use rand::Rng;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::data::DataTable;
use crate::error::Result;
use crate::nn::{gradient_penalty, AdamState, PerSampleGrads};
use crate::privacy::{calibrate_sigma, make_ledger, PrivacyParams};
use crate::rng::derive_rng;
use crate::synth::ctgan::{
    build_discriminator, build_generator, condition_from_row, disc_input, gan_adam, gen_draw,
    generator_step, sample_condition_uniform, CondMode, CtganModel, EpochLog, TrainStats,
};
use crate::synth::{CondSpace, TrainConfig};
use crate::transforms::{fit_uniform_binner, EncodedMatrix, Encoder};

/// Read-counting view over the encoded real rows; lets training assert that
/// generator updates touch no real data.
struct CountedMatrix<'a> {
    matrix: &'a EncodedMatrix,
    reads: AtomicU64,
}

impl<'a> CountedMatrix<'a> {
    fn new(matrix: &'a EncodedMatrix) -> Self {
        CountedMatrix {
            matrix,
            reads: AtomicU64::new(0),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.matrix.row(i)
    }

    fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }
}

pub fn fit_dp_ctgan(
    train: &DataTable,
    config: &TrainConfig,
    privacy: &PrivacyParams,
    seed: u64,
) -> Result<CtganModel> {
    config.validate()?;
    privacy.validate()?;
    let schema = train.shared_schema();
    // The GMM normalizer reads data rows, so the private path always bins
    // from range metadata alone.
    let encoder = Encoder::uniform(
        Arc::clone(&schema),
        fit_uniform_binner(&schema, config.uniform_bins)?,
    );
    let real = encoder.encode(train)?;
    let counted = CountedMatrix::new(&real);
    let layout = encoder.layout().clone();

    let cond = CondSpace::for_schema(&schema);
    let heads = crate::nn::HeadSpec::for_layout(&layout);

    let mut generator = build_generator(
        config.embedding_dim,
        cond.width,
        layout.width,
        &config.generator_hidden,
        seed ^ 0x47454e,
    )?;
    let mut discriminator = build_discriminator(
        layout.width + cond.width,
        &config.discriminator_hidden,
        seed ^ 0x444953,
    )?;
    let mut gen_adam = gan_adam(generator.spec.param_count(), config.learning_rate);
    let mut disc_adam: AdamState<f64> =
        gan_adam(discriminator.spec.param_count(), config.learning_rate);

    let q = privacy.q;
    let lot_expectation = (q * train.n_rows() as f64).max(1.0);
    let sigma = if privacy.is_noiseless() {
        0.0
    } else {
        calibrate_sigma(privacy, config.clip_norm)?.sigma
    };

    let steps_per_epoch = config.steps_per_epoch(train.n_rows());
    let mut stats = TrainStats::default();
    let mut training_log = Vec::with_capacity(config.epochs);
    let mut rng = derive_rng(seed, "dp-ctgan-train", 0);
    let disc_params = discriminator.spec.param_count();
    let gen_batch = config.batch.min(train.n_rows());

    for epoch in 0..config.epochs {
        let mut disc_loss_sum = 0.0;
        let mut gen_loss_sum = 0.0;
        for _ in 0..steps_per_epoch {
            // Step 1: Poisson lot and one condition per sampled row.
            let lot: Vec<usize> =
                (0..train.n_rows()).filter(|_| rng.random::<f64>() < q).collect();
            let conditions: Vec<_> = lot
                .iter()
                .map(|&r| condition_from_row(&cond, train.row(r), &mut rng))
                .collect();

            // Step 3: per-sample loss terms, each row isolated in its own
            // gradient row.
            let mut grads = PerSampleGrads::zeros(lot.len(), disc_params);
            let mut step_loss = 0.0;
            for (k, (&row_idx, condition)) in lot.iter().zip(conditions.iter()).enumerate() {
                let draw = gen_draw(
                    &generator,
                    &heads,
                    &cond,
                    *condition,
                    config.tau,
                    config.embedding_dim,
                    &mut rng,
                )?;
                let fake_u = disc_input(&draw.out, &draw.cond_onehot);
                // Step 2: the paired real sample is the condition's source.
                let real_u = disc_input(counted.row(row_idx), &draw.cond_onehot);

                let grad_row = grads.row_mut(k);
                let fake_tape = discriminator.forward(&fake_u)?;
                discriminator.backward_into(&fake_tape, &[1.0], grad_row)?;
                let real_tape = discriminator.forward(&real_u)?;
                discriminator.backward_into(&real_tape, &[-1.0], grad_row)?;
                step_loss += fake_tape.output()[0] - real_tape.output()[0];

                let t: f64 = rng.random();
                let interpolate: Vec<f64> = real_u
                    .iter()
                    .zip(fake_u.iter())
                    .map(|(r, f)| t * r + (1.0 - t) * f)
                    .collect();
                let (p, pgrad) = gradient_penalty(&discriminator, &interpolate)?;
                step_loss += config.gradient_penalty_weight * p;
                for (g, pg) in grad_row.iter_mut().zip(pgrad.iter()) {
                    *g += config.gradient_penalty_weight * pg;
                }
            }

            // Step 4: clip per sample, noise, DP-Adam.
            let dp_stats = crate::nn::dp_adam_step(
                &mut disc_adam,
                &mut discriminator.params,
                &grads,
                config.clip_norm,
                sigma,
                lot_expectation,
                &mut rng,
            )?;
            stats.disc_steps += 1;
            stats.noisy_steps += 1;
            stats.max_clipped_norm = stats.max_clipped_norm.max(dp_stats.max_clipped_norm);
            if !lot.is_empty() {
                disc_loss_sum += step_loss / lot.len() as f64;
            }

            // Step 5: generator update on metadata-only conditions. The
            // read counter proves no real row flows into it.
            let reads_before = counted.reads();
            let mut draw_condition =
                |rng: &mut rand_chacha::ChaCha8Rng| sample_condition_uniform(&cond, rng);
            let gen_loss = generator_step(
                &mut generator,
                &mut gen_adam,
                &discriminator,
                &heads,
                &cond,
                &layout,
                &mut draw_condition,
                gen_batch,
                config.tau,
                config.embedding_dim,
                &mut rng,
            )?;
            stats.gen_steps += 1;
            stats.gen_step_real_reads += counted.reads() - reads_before;
            gen_loss_sum += gen_loss;
        }
        training_log.push(EpochLog {
            epoch,
            disc_loss: disc_loss_sum / steps_per_epoch as f64,
            gen_loss: gen_loss_sum / steps_per_epoch as f64,
        });
    }

    let ledger = make_ledger(
        sigma,
        config.clip_norm,
        q,
        stats.disc_steps,
        privacy.delta,
    )?;

    Ok(CtganModel {
        schema,
        encoder,
        generator,
        discriminator,
        heads,
        cond,
        cond_mode: CondMode::Uniform,
        tau: config.tau,
        embedding_dim: config.embedding_dim,
        ledger: Some(ledger),
        training_log,
        stats,
        minority_value: train.minority_value(),
    })
}
