//! Generator output heads: gumbel-softmax per one-hot block and a squashed
//! tanh for scalar offsets, so generated rows live in the same space as
//! encoded rows (blocks summing to 1, offsets in [0, 1]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::gumbel::{gumbel_softmax_with_noise, sample_gumbels, softmax};
use crate::nn::Real;
use crate::transforms::EncodingLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadBlock {
    /// Relaxed one-hot over `len` slots.
    OneHot { len: usize },
    /// Single value mapped to [0, 1] via `(tanh + 1) / 2`.
    UnitScalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub blocks: Vec<HeadBlock>,
}

impl HeadSpec {
    /// Heads matching an encoding layout: one block per one-hot span, one
    /// scalar per offset.
    pub fn for_layout(layout: &EncodingLayout) -> Self {
        let mut blocks = Vec::new();
        for slice in &layout.slices {
            blocks.push(HeadBlock::OneHot {
                len: slice.onehot_len,
            });
            if slice.offset_index.is_some() {
                blocks.push(HeadBlock::UnitScalar);
            }
        }
        HeadSpec { blocks }
    }

    pub fn width(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                HeadBlock::OneHot { len } => *len,
                HeadBlock::UnitScalar => 1,
            })
            .sum()
    }
}

/// Apply heads to raw body outputs. `gumbels` must have one draw per
/// coordinate (scalar slots are ignored), sampled with [`sample_gumbels`].
pub fn head_forward<F: Real>(spec: &HeadSpec, body_out: &[F], tau: F, gumbels: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(body_out.len());
    let mut cursor = 0;
    for block in &spec.blocks {
        match block {
            HeadBlock::OneHot { len } => {
                let y = gumbel_softmax_with_noise(
                    &body_out[cursor..cursor + len],
                    tau,
                    &gumbels[cursor..cursor + len],
                );
                out.extend(y);
                cursor += len;
            }
            HeadBlock::UnitScalar => {
                let t = body_out[cursor].tanh();
                out.push((t + F::one()) / F::of(2.0));
                cursor += 1;
            }
        }
    }
    out
}

/// Backward through the heads: gradient with respect to the body outputs
/// given the head outputs `out` produced by the same noise draws.
pub fn head_backward<F: Real>(
    spec: &HeadSpec,
    body_out: &[F],
    out: &[F],
    tau: F,
    dout: &[F],
) -> Vec<F> {
    let mut dbody = vec![F::zero(); body_out.len()];
    let mut cursor = 0;
    for block in &spec.blocks {
        match block {
            HeadBlock::OneHot { len } => {
                let y = &out[cursor..cursor + len];
                let dy = &dout[cursor..cursor + len];
                // Softmax Jacobian scaled by 1/tau: the gumbel noise is a
                // constant shift of the logits.
                let dot = y
                    .iter()
                    .zip(dy.iter())
                    .map(|(a, b)| *a * *b)
                    .fold(F::zero(), |a, b| a + b);
                for i in 0..*len {
                    dbody[cursor + i] = y[i] * (dy[i] - dot) / tau;
                }
                cursor += len;
            }
            HeadBlock::UnitScalar => {
                let t = body_out[cursor].tanh();
                dbody[cursor] = dout[cursor] * (F::one() - t * t) / F::of(2.0);
                cursor += 1;
            }
        }
    }
    dbody
}

/// Hard sample: gumbel-max one-hot per block (an exact categorical draw from
/// the block's softmax), exact squashed scalar elsewhere.
pub fn head_hard_sample<F: Real>(spec: &HeadSpec, body_out: &[F], rng: &mut impl Rng) -> Vec<F> {
    let mut out = vec![F::zero(); body_out.len()];
    let mut cursor = 0;
    for block in &spec.blocks {
        match block {
            HeadBlock::OneHot { len } => {
                let gumbels = sample_gumbels::<F>(*len, rng);
                let mut best = 0;
                let mut best_v = F::neg_infinity();
                for i in 0..*len {
                    let v = body_out[cursor + i] + gumbels[i];
                    if v > best_v {
                        best_v = v;
                        best = i;
                    }
                }
                out[cursor + best] = F::one();
                cursor += len;
            }
            HeadBlock::UnitScalar => {
                let t = body_out[cursor].tanh();
                out[cursor] = (t + F::one()) / F::of(2.0);
                cursor += 1;
            }
        }
    }
    out
}

/// Softmax probabilities per block without noise, used for goodness checks.
pub fn head_block_probs<F: Real>(spec: &HeadSpec, body_out: &[F]) -> Vec<Vec<F>> {
    let mut probs = Vec::new();
    let mut cursor = 0;
    for block in &spec.blocks {
        match block {
            HeadBlock::OneHot { len } => {
                probs.push(softmax(&body_out[cursor..cursor + len]));
                cursor += len;
            }
            HeadBlock::UnitScalar => {
                cursor += 1;
            }
        }
    }
    probs
}
