//! Adam and DP-Adam. The private variant consumes per-sample gradient rows:
//! clip each row, sum, add Gaussian noise scaled by the clip norm, divide by
//! the expected lot size, then take an ordinary Adam step.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{l2_norm, Real};

/// Dense matrix of per-sample gradients, one row per contributing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleGrads<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> PerSampleGrads<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PerSampleGrads {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_norms(&self) -> Vec<F> {
        (0..self.rows).map(|i| l2_norm(self.row(i))).collect()
    }
}

/// Scale every row by `min(1, c / ||row||)`.
pub fn clip_rows<F: Real>(grads: &PerSampleGrads<F>, c: F) -> PerSampleGrads<F> {
    assert!(c > F::zero(), "clip norm must be positive");
    let mut out = grads.clone();
    for i in 0..out.rows {
        let norm = l2_norm(out.row(i));
        if norm > c {
            let scale = c / norm;
            for g in out.row_mut(i) {
                *g *= scale;
            }
        }
    }
    out
}

/// Clipped-sum + noise + normalization: the privatized mean gradient.
///
/// Returns the gradient estimate and the largest post-clip row norm (an
/// instrumentation hook; it must never exceed `c`).
pub fn privatize<F: Real>(
    grads: &PerSampleGrads<F>,
    c: F,
    sigma: F,
    lot_expectation: F,
    rng: &mut impl Rng,
) -> (Vec<F>, F) {
    let clipped = clip_rows(grads, c);
    let mut sum = vec![F::zero(); grads.cols];
    let mut max_norm = F::zero();
    for i in 0..clipped.rows {
        let row = clipped.row(i);
        max_norm = max_norm.max(l2_norm(row));
        for (s, g) in sum.iter_mut().zip(row.iter()) {
            *s += *g;
        }
    }
    if sigma > F::zero() {
        let scale = sigma * c;
        for s in sum.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *s += scale * F::of(z);
        }
    }
    for s in sum.iter_mut() {
        *s /= lot_expectation;
    }
    (sum, max_norm)
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub step: u64,
    pub beta1: F,
    pub beta2: F,
    pub lr: F,
    pub eps: F,
}

impl<F: Real> AdamState<F> {
    pub fn new(param_count: usize, lr: F) -> Self {
        AdamState {
            m: vec![F::zero(); param_count],
            v: vec![F::zero(); param_count],
            step: 0,
            beta1: F::of(0.9),
            beta2: F::of(0.999),
            lr,
            eps: F::of(1e-8),
        }
    }

    /// One Adam update. Rejects non-finite gradients or parameters so a
    /// diverging run aborts with a diagnostic instead of poisoning state.
    pub fn step(&mut self, params: &mut [F], grad: &[F]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state over {} params, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = F::one() - self.beta1.powi(t);
        let bias2 = F::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            if !g.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient at coordinate {i} on step {}",
                    self.step
                )));
            }
            self.m[i] = self.beta1 * self.m[i] + (F::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (F::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            if !params[i].is_finite() {
                return Err(Error::Training(format!(
                    "non-finite parameter at coordinate {i} on step {}",
                    self.step
                )));
            }
        }
        Ok(())
    }
}

/// Instrumentation emitted by every private step.
#[derive(Debug, Clone, Copy)]
pub struct DpStepStats<F> {
    pub lot_size: usize,
    pub max_clipped_norm: F,
}

/// Clip, noise, normalize, then update with Adam. `sigma = 0` reduces to
/// Adam on the clipped mean gradient; an empty lot takes a pure-noise step.
pub fn dp_adam_step<F: Real>(
    state: &mut AdamState<F>,
    params: &mut [F],
    grads: &PerSampleGrads<F>,
    c: F,
    sigma: F,
    lot_expectation: F,
    rng: &mut impl Rng,
) -> Result<DpStepStats<F>> {
    if sigma < F::zero() {
        return Err(Error::invalid("noise multiplier must be >= 0"));
    }
    if lot_expectation <= F::zero() {
        return Err(Error::invalid("lot size expectation must be positive"));
    }
    let (g, max_norm) = privatize(grads, c, sigma, lot_expectation, rng);
    state.step(params, &g)?;
    Ok(DpStepStats {
        lot_size: grads.rows,
        max_clipped_norm: max_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn grads_from_rows(rows: &[Vec<f64>]) -> PerSampleGrads<f64> {
        let cols = rows[0].len();
        let mut g = PerSampleGrads::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            g.row_mut(i).copy_from_slice(row);
        }
        g
    }

    #[test]
    fn clip_scales_large_rows_only() {
        let g = grads_from_rows(&[
            vec![2.0, 0.0],        // norm 2 -> scaled by 0.5
            vec![0.3, 0.4],        // norm 0.5 -> untouched
            vec![0.0, 0.0],        // zero row untouched
        ]);
        let clipped = clip_rows(&g, 1.0);
        assert_eq!(clipped.row(0), &[1.0, 0.0]);
        assert_eq!(clipped.row(1), &[0.3, 0.4]);
        assert_eq!(clipped.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn clipped_norms_never_exceed_c() {
        let mut rng = derive_rng(3, "clip-test", 0);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..8).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let clipped = clip_rows(&grads_from_rows(&rows), 1.0);
        for n in clipped.row_norms() {
            assert!(n <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn sigma_zero_equals_adam_on_clipped_mean() {
        let rows = vec![vec![3.0, 4.0, 0.0], vec![0.1, -0.1, 0.2]];
        let grads = grads_from_rows(&rows);
        let lot = 2.0;

        let mut params_a = vec![1.0, 1.0, 1.0];
        let mut state_a = AdamState::new(3, 0.01);
        let mut rng = derive_rng(0, "dp", 0);
        dp_adam_step(&mut state_a, &mut params_a, &grads, 1.0, 0.0, lot, &mut rng).unwrap();

        let clipped = clip_rows(&grads, 1.0);
        let mean: Vec<f64> = (0..3)
            .map(|p| (clipped.row(0)[p] + clipped.row(1)[p]) / lot)
            .collect();
        let mut params_b = vec![1.0, 1.0, 1.0];
        let mut state_b = AdamState::new(3, 0.01);
        state_b.step(&mut params_b, &mean).unwrap();

        assert_eq!(params_a, params_b);
    }

    #[test]
    fn empty_lot_takes_a_pure_noise_step() {
        let grads: PerSampleGrads<f64> = PerSampleGrads::zeros(0, 4);
        let mut params = vec![0.5; 4];
        let mut state = AdamState::new(4, 0.001);
        let mut rng = derive_rng(1, "dp", 0);
        let stats =
            dp_adam_step(&mut state, &mut params, &grads, 1.0, 1.0, 10.0, &mut rng).unwrap();
        assert_eq!(stats.lot_size, 0);
        assert!(params.iter().all(|p| p.is_finite()));
        assert!(params.iter().any(|p| (p - 0.5).abs() > 0.0));
    }

    #[test]
    fn noise_stddev_matches_sigma_c_over_lot() {
        // With zero gradients the privatized estimate is pure noise; its
        // per-coordinate stddev must be sigma * C / lot within 5%.
        let (sigma, c, lot) = (2.0, 1.5, 40.0);
        let grads: PerSampleGrads<f64> = PerSampleGrads::zeros(0, 5);
        let mut rng = derive_rng(7, "noise", 0);
        let steps = 10_000;
        let mut sum_sq = vec![0.0f64; 5];
        for _ in 0..steps {
            let (g, _) = privatize(&grads, c, sigma, lot, &mut rng);
            for (acc, v) in sum_sq.iter_mut().zip(g.iter()) {
                *acc += v * v;
            }
        }
        let expected = sigma * c / lot;
        for acc in sum_sq {
            let sd = (acc / steps as f64).sqrt();
            assert!(
                (sd - expected).abs() / expected < 0.05,
                "sd {sd} vs {expected}"
            );
        }
    }

    #[test]
    fn adam_is_bit_deterministic() {
        let run = || {
            let mut params = vec![0.2, -0.7, 1.3];
            let mut state = AdamState::new(3, 0.05);
            for t in 0..100 {
                let g = vec![0.1 * (t as f64).sin(), -0.3, 0.02 * t as f64];
                state.step(&mut params, &g).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, 0.1);
        let err = state.step(&mut params, &[f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
