//! Gumbel-softmax relaxation for one-hot output blocks.

use rand::Rng;

use crate::nn::Real;

pub fn softmax<F: Real>(xs: &[F]) -> Vec<F> {
    let m = xs.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = xs.iter().map(|x| (*x - m).exp()).collect();
    let total = exps.iter().cloned().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Standard Gumbel draws, one per logit.
pub fn sample_gumbels<F: Real>(len: usize, rng: &mut impl Rng) -> Vec<F> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(1e-300);
            F::of(-(-u.ln()).ln())
        })
        .collect()
}

/// Relaxed one-hot given pre-sampled noise: `softmax((logits + g) / tau)`.
/// Differentiable in the logits; the output always sums to 1.
pub fn gumbel_softmax_with_noise<F: Real>(logits: &[F], tau: F, gumbels: &[F]) -> Vec<F> {
    debug_assert_eq!(logits.len(), gumbels.len());
    let scaled: Vec<F> = logits
        .iter()
        .zip(gumbels.iter())
        .map(|(l, g)| (*l + *g) / tau)
        .collect();
    softmax(&scaled)
}

pub fn gumbel_softmax<F: Real>(logits: &[F], tau: F, rng: &mut impl Rng) -> Vec<F> {
    assert!(tau > F::zero(), "temperature must be positive");
    let gumbels = sample_gumbels(logits.len(), rng);
    gumbel_softmax_with_noise(logits, tau, &gumbels)
}
