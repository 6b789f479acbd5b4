//! Rényi-DP accounting for the Poisson-subsampled Gaussian mechanism:
//! per-step RDP bounds, composition over steps, conversion to (epsilon,
//! delta), and noise calibration by binary search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Privacy target: epsilon may be `f64::INFINITY`, the sentinel for runs
/// that keep clipping and Poisson sampling but add no noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Poisson sampling rate per step.
    pub q: f64,
    /// Number of noisy steps to account for.
    pub steps: u64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, q: f64, steps: u64) -> Result<Self> {
        let p = PrivacyParams {
            epsilon,
            delta,
            q,
            steps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive (or infinite)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::invalid("sampling rate q must lie in (0, 1]"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("step count must be >= 1"));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.epsilon.is_infinite()
    }
}

/// Result of calibrating a noise multiplier against a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub sigma: f64,
    pub achieved_epsilon: f64,
    pub rdp_orders: Vec<f64>,
}

/// The privacy facts a trained model carries: everything needed to re-audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpLedger {
    pub sigma: f64,
    pub clip_norm: f64,
    pub q: f64,
    pub steps: u64,
    pub delta: f64,
    /// Epsilon audited from (sigma, q, steps, delta); infinite when sigma=0.
    pub epsilon: f64,
}

/// Rényi order grid used for accounting: a few sub-2 fractional orders plus
/// integers out to 512.
pub fn default_orders() -> Vec<f64> {
    let mut orders = vec![1.25, 1.5];
    orders.extend((2..=64).map(f64::from));
    orders.extend([128.0, 256.0, 512.0]);
    orders
}

const SIGMA_BRACKET: (f64, f64) = (0.3, 100.0);

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sub(a: f64, b: f64) -> f64 {
    // Requires a >= b.
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = b - a;
    if d >= 0.0 {
        return f64::NEG_INFINITY;
    }
    a + (-(d.exp())).ln_1p()
}

/// log(erfc(x)) with an asymptotic expansion once erfc underflows.
fn log_erfc(x: f64) -> f64 {
    if x <= 25.0 {
        statrs::function::erf::erfc(x).ln()
    } else {
        let x2 = x * x;
        -x2 - (x * std::f64::consts::PI.sqrt()).ln() + (1.0 - 0.5 / x2 + 0.75 / (x2 * x2)).ln()
    }
}

/// Integer-order bound: binomial expansion of the subsampled moment.
fn log_a_int(q: f64, sigma: f64, alpha: u64) -> f64 {
    let mut log_a = f64::NEG_INFINITY;
    let mut log_coef = 0.0; // log C(alpha, 0)
    for i in 0..=alpha {
        let i_f = i as f64;
        let term = log_coef
            + i_f * q.ln()
            + (alpha - i) as f64 * (1.0 - q).ln()
            + (i_f * i_f - i_f) / (2.0 * sigma * sigma);
        log_a = log_add(log_a, term);
        if i < alpha {
            log_coef += ((alpha - i) as f64).ln() - (i_f + 1.0).ln();
        }
    }
    log_a
}

/// Fractional-order bound: the two-piece series over the split point z0,
/// with signed generalized binomial coefficients.
fn log_a_frac(q: f64, sigma: f64, alpha: f64) -> f64 {
    let z0 = sigma * sigma * (1.0 / q - 1.0).ln() + 0.5;
    let mut log_a0 = f64::NEG_INFINITY;
    let mut log_a1 = f64::NEG_INFINITY;
    let mut log_coef = 0.0f64; // log |C(alpha, 0)|
    let mut sign = 1.0f64;
    let mut i: u64 = 0;
    loop {
        let i_f = i as f64;
        let j = alpha - i_f;
        let log_t0 = log_coef + i_f * q.ln() + j * (1.0 - q).ln();
        let log_t1 = log_coef + j * q.ln() + i_f * (1.0 - q).ln();
        let log_e0 = 0.5f64.ln() + log_erfc((i_f - z0) / (2.0f64.sqrt() * sigma));
        let log_e1 = 0.5f64.ln() + log_erfc((z0 - j) / (2.0f64.sqrt() * sigma));
        let log_s0 = log_t0 + (i_f * i_f - i_f) / (2.0 * sigma * sigma) + log_e0;
        let log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
        if sign > 0.0 {
            log_a0 = log_add(log_a0, log_s0);
            log_a1 = log_add(log_a1, log_s1);
        } else {
            log_a0 = log_sub(log_a0, log_s0);
            log_a1 = log_sub(log_a1, log_s1);
        }
        if log_s0.max(log_s1) < log_a0.max(log_a1) - 40.0 && i_f > alpha {
            break;
        }
        if i > 10_000 {
            break;
        }
        // C(alpha, i+1) = C(alpha, i) * (alpha - i) / (i + 1)
        let factor = (alpha - i_f) / (i_f + 1.0);
        if factor < 0.0 {
            sign = -sign;
        }
        log_coef += factor.abs().ln();
        i += 1;
    }
    log_add(log_a0, log_a1)
}

/// RDP of one Poisson-subsampled Gaussian step at order `alpha`.
///
/// For q = 1 this is the unsubsampled closed form `alpha / (2 sigma^2)`.
pub fn rdp_subsampled_gaussian(sigma: f64, q: f64, alpha: f64) -> Result<f64> {
    if alpha <= 1.0 {
        return Err(Error::invalid(format!(
            "order alpha must exceed 1, got {alpha}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("q={q} outside [0, 1]")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if (q - 1.0).abs() < f64::EPSILON {
        return Ok(alpha / (2.0 * sigma * sigma));
    }
    let log_a = if alpha.fract() == 0.0 {
        log_a_int(q, sigma, alpha as u64)
    } else {
        log_a_frac(q, sigma, alpha)
    };
    let rdp = log_a / (alpha - 1.0);
    if !rdp.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite RDP for sigma={sigma}, q={q}, alpha={alpha}"
        )));
    }
    // The bound can round to a tiny negative value for very small q.
    Ok(rdp.max(0.0))
}

/// Compose per-step RDP over `steps` and convert at `delta`:
/// `epsilon = min over orders of (steps * rdp(alpha) + log(1/delta) / (alpha - 1))`.
pub fn compose_and_convert(rdp_per_step: &[f64], orders: &[f64], steps: u64, delta: f64) -> f64 {
    debug_assert_eq!(rdp_per_step.len(), orders.len());
    let log_inv_delta = (1.0 / delta).ln();
    let mut best = f64::INFINITY;
    for (rdp, alpha) in rdp_per_step.iter().zip(orders.iter()) {
        let eps = steps as f64 * rdp + log_inv_delta / (alpha - 1.0);
        if eps < best {
            best = eps;
        }
    }
    best
}

/// Audited epsilon for a (sigma, q, steps, delta) configuration.
pub fn epsilon_for(sigma: f64, q: f64, steps: u64, delta: f64, orders: &[f64]) -> Result<f64> {
    let rdp: Result<Vec<f64>> = orders
        .iter()
        .map(|&alpha| rdp_subsampled_gaussian(sigma, q, alpha))
        .collect();
    Ok(compose_and_convert(&rdp?, orders, steps, delta))
}

/// Binary search for the smallest noise multiplier meeting the target, on
/// `sigma` in [0.3, 100] with a 1e-3 relative bracket.
///
/// Accounting works in units of the clip norm, so the clip norm itself does
/// not move epsilon; the parameter is kept so call sites state it.
pub fn calibrate_sigma(target: &PrivacyParams, _clip_norm: f64) -> Result<NoiseCalibration> {
    target.validate()?;
    if target.is_noiseless() {
        return Err(Error::invalid(
            "cannot calibrate noise for an infinite epsilon target; use sigma = 0",
        ));
    }
    let orders = default_orders();
    let eps_at = |sigma: f64| -> Result<f64> {
        epsilon_for(sigma, target.q, target.steps, target.delta, &orders)
    };

    let (mut lo, mut hi) = SIGMA_BRACKET;
    let eps_hi_sigma = eps_at(hi)?;
    if eps_hi_sigma > target.epsilon {
        return Err(Error::Unreachable(format!(
            "epsilon {} not reachable with sigma <= {hi}; achievable range starts at {eps_hi_sigma:.4} \
             for q={}, steps={}, delta={}",
            target.epsilon, target.q, target.steps, target.delta
        )));
    }
    let eps_lo_sigma = eps_at(lo)?;
    if eps_lo_sigma <= target.epsilon {
        return Ok(NoiseCalibration {
            sigma: lo,
            achieved_epsilon: eps_lo_sigma,
            rdp_orders: orders,
        });
    }

    while hi / lo > 1.0 + 1e-3 {
        let mid = (lo * hi).sqrt();
        if eps_at(mid)? <= target.epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let achieved = eps_at(hi)?;
    debug_assert!(achieved <= target.epsilon);
    Ok(NoiseCalibration {
        sigma: hi,
        achieved_epsilon: achieved,
        rdp_orders: orders,
    })
}

/// Ledger for a run: audits epsilon from the recorded facts. `sigma = 0`
/// yields the infinite-epsilon sentinel.
pub fn make_ledger(sigma: f64, clip_norm: f64, q: f64, steps: u64, delta: f64) -> Result<DpLedger> {
    let epsilon = if sigma == 0.0 {
        f64::INFINITY
    } else {
        epsilon_for(sigma, q, steps.max(1), delta, &default_orders())?
    };
    Ok(DpLedger {
        sigma,
        clip_norm,
        q,
        steps,
        delta,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    /// Independent oracle: log-space Simpson quadrature of the subsampled
    /// Gaussian moment
    /// `A(alpha) = E_{z~N(0,sigma^2)}[((1-q) + q e^{(2z-1)/(2 sigma^2)})^alpha]`.
    fn rdp_quadrature(sigma: f64, q: f64, alpha: f64) -> f64 {
        rdp_quadrature_n(sigma, q, alpha, 240_001)
    }

    fn rdp_quadrature_n(sigma: f64, q: f64, alpha: f64, n: usize) -> f64 {
        let lo = -12.0 * sigma - 1.0;
        let hi = alpha.max(1.0) + 12.0 * sigma + 1.0;
        let h = (hi - lo) / (n - 1) as f64;
        let g = |z: f64| -> f64 {
            let log_norm = -0.5 * (z / sigma).powi(2)
                - sigma.ln()
                - 0.5 * (2.0 * std::f64::consts::PI).ln();
            let w = (2.0 * z - 1.0) / (2.0 * sigma * sigma);
            let log_mix = log_add((1.0 - q).ln(), q.ln() + w);
            log_norm + alpha * log_mix
        };
        let gs: Vec<f64> = (0..n).map(|i| g(lo + i as f64 * h)).collect();
        let m = gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        for (i, &v) in gs.iter().enumerate() {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (v - m).exp();
        }
        let log_a = m + (acc * h / 3.0).ln();
        log_a / (alpha - 1.0)
    }

    #[test]
    fn unsubsampled_closed_form() {
        assert_eq!(rdp_subsampled_gaussian(1.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(rdp_subsampled_gaussian(2.0, 1.0, 8.0).unwrap(), 1.0);
    }

    #[test]
    fn vanishing_q_vanishing_rdp() {
        let near_zero = rdp_subsampled_gaussian(1.0, 1e-9, 4.0).unwrap();
        assert!(near_zero < 1e-12, "rdp {near_zero}");
        assert_eq!(rdp_subsampled_gaussian(1.0, 0.0, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn integer_orders_match_quadrature_oracle() {
        let (sigma, q) = (1.0, 0.01);
        for alpha in (2..=64).step_by(3) {
            let ours = rdp_subsampled_gaussian(sigma, q, alpha as f64).unwrap();
            let oracle = rdp_quadrature(sigma, q, alpha as f64);
            let err = (ours - oracle).abs() / oracle.abs().max(1e-12);
            assert!(err < 1e-6, "alpha {alpha}: {ours} vs {oracle} (rel {err})");
        }
    }

    #[test]
    fn fractional_orders_match_quadrature_oracle() {
        for (sigma, q, alpha) in [
            (1.0, 0.01, 1.25),
            (1.0, 0.05, 1.5),
            (2.0, 0.02, 1.25),
            (0.8, 0.1, 1.5),
        ] {
            let ours = rdp_subsampled_gaussian(sigma, q, alpha).unwrap();
            let oracle = rdp_quadrature(sigma, q, alpha);
            let err = (ours - oracle).abs() / oracle.abs().max(1e-12);
            assert!(err < 1e-5, "({sigma},{q},{alpha}): {ours} vs {oracle}");
        }
    }

    #[test]
    fn composition_is_monotone_in_steps() {
        let orders = default_orders();
        let rdp: Vec<f64> = orders
            .iter()
            .map(|&a| rdp_subsampled_gaussian(1.2, 0.05, a).unwrap())
            .collect();
        let e1 = compose_and_convert(&rdp, &orders, 500, 1e-5);
        let e2 = compose_and_convert(&rdp, &orders, 1000, 1e-5);
        assert!(e2 > e1, "doubling steps: {e1} -> {e2}");
    }

    #[test]
    fn zero_rdp_converts_to_min_delta_term() {
        let orders = default_orders();
        let rdp = vec![0.0; orders.len()];
        let eps = compose_and_convert(&rdp, &orders, 100, 1e-5);
        let expected = (1.0f64 / 1e-5).ln() / (512.0 - 1.0);
        assert!((eps - expected).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_over_random_tuples() {
        let mut rng = derive_rng(11, "accountant-mono", 0);
        let orders = default_orders();
        for _ in 0..200 {
            let sigma = rng.random_range(0.5..6.0);
            let q = rng.random_range(0.005..0.5);
            let steps = rng.random_range(10..3000u64);
            let delta = 10f64.powf(rng.random_range(-8.0..-3.0));
            let eps = epsilon_for(sigma, q, steps, delta, &orders).unwrap();

            let eps_more_noise = epsilon_for(sigma * 1.3, q, steps, delta, &orders).unwrap();
            assert!(eps_more_noise <= eps + 1e-12, "sigma up must not raise eps");

            let eps_more_steps =
                epsilon_for(sigma, q, steps + steps / 2 + 1, delta, &orders).unwrap();
            assert!(eps_more_steps >= eps - 1e-12, "steps up must not lower eps");

            let eps_more_q =
                epsilon_for(sigma, (q * 1.4).min(1.0), steps, delta, &orders).unwrap();
            assert!(eps_more_q >= eps - 1e-12, "q up must not lower eps");
        }
    }

    #[test]
    fn calibration_reaudits_at_or_below_target() {
        let mut rng = derive_rng(13, "accountant-calibrate", 0);
        for _ in 0..50 {
            let target = PrivacyParams::new(
                rng.random_range(0.2..20.0),
                10f64.powf(rng.random_range(-7.0..-4.0)),
                rng.random_range(0.01..0.3),
                rng.random_range(50..4000u64),
            )
            .unwrap();
            match calibrate_sigma(&target, 1.0) {
                Ok(cal) => {
                    let audit = epsilon_for(
                        cal.sigma,
                        target.q,
                        target.steps,
                        target.delta,
                        &cal.rdp_orders,
                    )
                    .unwrap();
                    assert!(audit <= target.epsilon, "audit {audit} > {}", target.epsilon);
                }
                Err(Error::Unreachable(_)) => {} // tight targets may exceed the bracket
                Err(e) => panic!("unexpected calibration failure: {e}"),
            }
        }
    }

    #[test]
    fn stricter_targets_need_more_noise() {
        let mk = |eps| PrivacyParams::new(eps, 1e-5, 0.05, 2000).unwrap();
        let tight = calibrate_sigma(&mk(1.0), 1.0).unwrap();
        let loose = calibrate_sigma(&mk(10.0), 1.0).unwrap();
        assert!(tight.sigma > loose.sigma);
    }

    #[test]
    fn desk_scale_sigma_matches_independent_oracle() {
        // Oracle: bisection driven by quadrature RDP on a dense order grid.
        let target = PrivacyParams::new(1.0, 1e-5, 0.05, 6000).unwrap();
        let ours = calibrate_sigma(&target, 1.0).unwrap();

        let mut dense: Vec<f64> = Vec::new();
        let mut a = 1.25;
        while a <= 64.0 {
            dense.push(a);
            a += 0.25;
        }
        dense.extend((65..=512).map(f64::from));
        // The 1% sigma tolerance is far coarser than Simpson error at this
        // resolution, so a lighter grid keeps the oracle honest and fast.
        let oracle_eps = |sigma: f64| -> f64 {
            let rdp: Vec<f64> = dense
                .iter()
                .map(|&a| rdp_quadrature_n(sigma, 0.05, a, 8_001))
                .collect();
            compose_and_convert(&rdp, &dense, 6000, 1e-5)
        };
        let (mut lo, mut hi) = (0.3f64, 100.0f64);
        while hi / lo > 1.0 + 1e-4 {
            let mid = (lo * hi).sqrt();
            if oracle_eps(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let rel = (ours.sigma - hi).abs() / hi;
        assert!(rel < 0.01, "sigma {} vs oracle {hi} (rel {rel})", ours.sigma);
    }

    #[test]
    fn unreachable_target_reports_achievable_range() {
        let target = PrivacyParams::new(1e-4, 1e-9, 0.9, 1_000_000).unwrap();
        let err = calibrate_sigma(&target, 1.0).unwrap_err();
        assert!(err.to_string().contains("achievable"));
    }

    #[test]
    fn ledger_with_zero_sigma_is_infinite_epsilon() {
        let ledger = make_ledger(0.0, 1.0, 0.1, 300, 1e-5).unwrap();
        assert!(ledger.epsilon.is_infinite());
        let noisy = make_ledger(2.0, 1.0, 0.1, 300, 1e-5).unwrap();
        assert!(noisy.epsilon.is_finite());
    }
}
