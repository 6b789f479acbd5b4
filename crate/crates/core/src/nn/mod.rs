//! Minimal dense network engine with per-sample reverse-mode gradients.
//!
//! Everything here is generic over the scalar type through [`Real`]; the
//! synthesizer stack instantiates it at `f64`. Batches are processed one
//! sample at a time: each sample gets its own tape and its own gradient row,
//! which is exactly the granularity per-sample clipping needs.

mod adam;
mod gumbel;
mod heads;
mod net;
mod penalty;

pub use adam::{clip_rows, dp_adam_step, privatize, AdamState, DpStepStats, PerSampleGrads};
pub use gumbel::{gumbel_softmax, gumbel_softmax_with_noise, sample_gumbels, softmax};
pub use heads::{head_backward, head_forward, head_hard_sample, HeadBlock, HeadSpec};
pub use net::{
    backward_batch, backward_per_sample, Activation, Backprop, LayerSpec, Mlp, NetSpec, Tape,
};
pub use penalty::gradient_penalty;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar abstraction for the network engine: any IEEE float with the usual
/// assignment operators and f64 conversions.
pub trait Real:
    Float + NumAssignOps + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from f64; panics only for non-representable values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable in scalar type")
    }

    fn to64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: Float
        + NumAssignOps
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

pub(crate) fn l2_norm<F: Real>(xs: &[F]) -> F {
    xs.iter().map(|x| *x * *x).fold(F::zero(), |a, b| a + b).sqrt()
}
