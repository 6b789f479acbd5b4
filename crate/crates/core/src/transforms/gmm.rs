//! Per-column Gaussian mixtures fitted by expectation-maximization, used for
//! mode-specific normalization of continuous columns.

use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

const MAX_ITERS: usize = 200;
const LL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
    /// Half-width of the normalization window around the mean; wide enough
    /// to cover the whole declared range so offsets always land in [0, 1].
    pub halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGmm {
    pub components: Vec<GmmComponent>,
    /// Total log-likelihood after each EM iteration.
    pub ll_trace: Vec<f64>,
}

fn log_normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Fit a K-component mixture to one column's values.
///
/// `range` is the column's declared (min, max); it sets the stddev floor at
/// 1e-6 of the range width and the normalization windows. A constant column
/// falls back to a single floor-width component. Needs at least K distinct
/// values otherwise.
pub fn fit_gmm(values: &[f64], k: usize, range: (f64, f64), seed: u64) -> Result<ColumnGmm> {
    if k == 0 {
        return Err(Error::invalid("component count must be >= 1".to_string()));
    }
    if values.is_empty() {
        return Err(Error::invalid("cannot fit a mixture to no values".to_string()));
    }
    let (lo, hi) = range;
    let floor = 1e-6 * (hi - lo);

    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() == 1 {
        let mean = distinct[0];
        return Ok(finish(vec![(1.0, mean, floor)], Vec::new(), lo, hi));
    }
    if distinct.len() < k {
        return Err(Error::invalid(format!(
            "K={k} components need at least {k} distinct values, got {}",
            distinct.len()
        )));
    }

    // Quantile initialization; a seeded jitter breaks exact ties between
    // initial means when the quantiles repeat.
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut rng = derive_rng(seed, "gmm-init", 0);
    use rand::Rng;
    let mut means: Vec<f64> = (0..k)
        .map(|i| sorted[((i as f64 + 0.5) / k as f64 * n as f64) as usize % n])
        .collect();
    for w in 1..k {
        if means[w] <= means[w - 1] {
            means[w] = means[w - 1] + floor.max(1e-12) * (1.0 + rng.random::<f64>());
        }
    }
    let global_mean = sorted.iter().sum::<f64>() / n as f64;
    let global_var =
        sorted.iter().map(|x| (x - global_mean).powi(2)).sum::<f64>() / n as f64;
    let init_std = global_var.sqrt().max(floor);

    let mut weights = vec![1.0 / k as f64; k];
    let mut stds = vec![init_std; k];
    let mut ll_trace = Vec::new();
    let mut resp = vec![0.0f64; n * k];

    for _ in 0..MAX_ITERS {
        // E step in log space.
        let mut ll = 0.0;
        for (i, &x) in values.iter().enumerate() {
            let mut logs = vec![0.0f64; k];
            for c in 0..k {
                logs[c] = weights[c].max(1e-300).ln() + log_normal_pdf(x, means[c], stds[c]);
            }
            let norm = logsumexp(&logs);
            ll += norm;
            for c in 0..k {
                resp[i * k + c] = (logs[c] - norm).exp();
            }
        }

        // M step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk < 1e-10 {
                weights[c] = 1e-10;
                continue;
            }
            let mu = (0..n).map(|i| resp[i * k + c] * values[i]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| resp[i * k + c] * (values[i] - mu).powi(2))
                .sum::<f64>()
                / nk;
            weights[c] = nk / n as f64;
            means[c] = mu;
            stds[c] = var.sqrt().max(floor);
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }

        let converged = ll_trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() < LL_TOLERANCE);
        ll_trace.push(ll);
        if converged {
            break;
        }
    }

    let params: Vec<(f64, f64, f64)> = (0..k).map(|c| (weights[c], means[c], stds[c])).collect();
    Ok(finish(params, ll_trace, lo, hi))
}

fn finish(params: Vec<(f64, f64, f64)>, ll_trace: Vec<f64>, lo: f64, hi: f64) -> ColumnGmm {
    let components = params
        .into_iter()
        .map(|(weight, mean, std)| GmmComponent {
            weight,
            mean,
            std,
            halfwidth: (4.0 * std).max((lo - mean).abs()).max((hi - mean).abs()),
        })
        .collect();
    ColumnGmm {
        components,
        ll_trace,
    }
}

impl ColumnGmm {
    /// Most responsible component for `x`.
    pub fn assign(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, comp) in self.components.iter().enumerate() {
            let score = comp.weight.max(1e-300).ln() + log_normal_pdf(x, comp.mean, comp.std);
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        best
    }

    pub fn weights_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

/// GMM normalizers for every continuous column of a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmNormalizer {
    columns: Vec<Option<ColumnGmm>>,
}

impl GmmNormalizer {
    /// Fit per-column mixtures on the table's continuous columns.
    pub fn fit(table: &DataTable, k: usize, seed: u64) -> Result<Self> {
        let schema = table.schema();
        let mut columns = Vec::with_capacity(schema.columns.len());
        for (c, col) in schema.columns.iter().enumerate() {
            match col.range() {
                None => columns.push(None),
                Some(range) => {
                    let values: Vec<f64> = table
                        .rows()
                        .iter()
                        .map(|row| row[c].as_cont())
                        .collect();
                    let distinct = count_distinct(&values);
                    let k_eff = k.min(distinct).max(1);
                    columns.push(Some(fit_gmm(&values, k_eff, range, seed ^ c as u64)?));
                }
            }
        }
        Ok(GmmNormalizer { columns })
    }

    pub fn column(&self, column: usize) -> Option<&ColumnGmm> {
        self.columns.get(column).and_then(|c| c.as_ref())
    }

    pub fn component_count(&self, column: usize) -> usize {
        self.column(column).map_or(0, |g| g.components.len())
    }

    pub fn locate(&self, column: usize, x: f64) -> (usize, f64) {
        let gmm = self.column(column).expect("continuous column");
        let c = gmm.assign(x);
        let comp = &gmm.components[c];
        let offset = (x - comp.mean + comp.halfwidth) / (2.0 * comp.halfwidth);
        (c, offset.clamp(0.0, 1.0))
    }

    pub fn reconstruct(&self, column: usize, component: usize, offset: f64) -> f64 {
        let comp = &self.column(column).expect("continuous column").components[component];
        comp.mean + (2.0 * offset - 1.0) * comp.halfwidth
    }
}

fn count_distinct(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    sorted.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn two_mode_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = derive_rng(seed, "gmm-test", 0);
        use rand::Rng;
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if rng.random::<f64>() < 0.5 {
                    0.1 * z
                } else {
                    10.0 + 0.1 * z
                }
            })
            .collect()
    }

    #[test]
    fn em_recovers_separated_modes() {
        let values = two_mode_sample(2000, 1);
        let gmm = fit_gmm(&values, 2, (-5.0, 15.0), 0).unwrap();
        let mut means: Vec<f64> = gmm.components.iter().map(|c| c.mean).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(means[0].abs() < 0.1, "low mode at {}", means[0]);
        assert!((means[1] - 10.0).abs() < 0.1, "high mode at {}", means[1]);
        assert!((gmm.weights_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_likelihood_is_nondecreasing() {
        let values = two_mode_sample(500, 2);
        let gmm = fit_gmm(&values, 3, (-5.0, 15.0), 0).unwrap();
        for pair in gmm.ll_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "LL decreased: {pair:?}");
        }
    }

    #[test]
    fn constant_column_falls_back_to_floor() {
        let values = vec![3.0; 100];
        let gmm = fit_gmm(&values, 10, (0.0, 10.0), 0).unwrap();
        assert_eq!(gmm.components.len(), 1);
        assert_eq!(gmm.components[0].std, 1e-6 * 10.0);
        assert_eq!(gmm.components[0].mean, 3.0);
    }

    #[test]
    fn too_few_distinct_values_is_an_error() {
        let values = vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0];
        assert!(fit_gmm(&values, 10, (0.0, 10.0), 0).is_err());
    }

    #[test]
    fn stddevs_respect_the_floor() {
        let values: Vec<f64> = (0..50).map(|i| f64::from(i % 5)).collect();
        let gmm = fit_gmm(&values, 5, (0.0, 10.0), 0).unwrap();
        for comp in &gmm.components {
            assert!(comp.std >= 1e-5 - 1e-18);
        }
    }
}
