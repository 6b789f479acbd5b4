//! Gaussian copula over empirical marginals: rank-based inverse-normal
//! transform for continuous columns, thresholded latent Gaussians for
//! categorical ones, and a PSD-repaired correlation matrix tying them
//! together.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

use crate::data::{DataTable, Row, TableSchema, Value};
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::synth::{check_sample_count, Checkpoint, Fitted, ModelPayload};

const EIGENVALUE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Marginal {
    Categorical {
        frequencies: Vec<f64>,
        /// Latent-space cut points; category v covers (t[v-1], t[v]].
        thresholds: Vec<f64>,
    },
    Continuous {
        sorted_values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianCopulaModel {
    schema: Arc<TableSchema>,
    marginals: Vec<Marginal>,
    /// Lower-triangular factor of the repaired correlation matrix, row-major.
    chol: Vec<f64>,
    dim: usize,
    minority_value: usize,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson_or_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        0.0
    } else {
        (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Clamp eigenvalues to a positive floor and renormalize to unit diagonal.
fn repair_correlation(mut corr: DMatrix<f64>) -> DMatrix<f64> {
    let eigen = nalgebra::SymmetricEigen::new(corr.clone());
    let mut values = eigen.eigenvalues.clone();
    let mut repaired = false;
    for v in values.iter_mut() {
        if *v < EIGENVALUE_FLOOR {
            *v = EIGENVALUE_FLOOR;
            repaired = true;
        }
    }
    if repaired {
        let q = eigen.eigenvectors;
        corr = &q * DMatrix::from_diagonal(&values) * q.transpose();
        for i in 0..corr.nrows() {
            let d = corr[(i, i)].sqrt();
            for j in 0..corr.ncols() {
                corr[(i, j)] /= d;
                corr[(j, i)] /= d;
            }
            // renormalizing twice per (i, j) pair keeps symmetry exact
            corr[(i, i)] = 1.0;
        }
    }
    corr
}

pub fn fit_gaussian_copula(train: &DataTable) -> Result<GaussianCopulaModel> {
    if train.n_rows() < 2 {
        return Err(Error::invalid("copula needs at least 2 rows"));
    }
    let schema = train.shared_schema();
    let normal = std_normal();
    let n = train.n_rows();
    let dim = schema.columns.len();

    let mut marginals = Vec::with_capacity(dim);
    let mut latent = vec![vec![0.0f64; n]; dim];
    for (c, col) in schema.columns.iter().enumerate() {
        match col.categories() {
            Some(cats) => {
                let mut counts = vec![0.0f64; cats.len()];
                for row in train.rows() {
                    counts[row[c].as_cat()] += 1.0;
                }
                let frequencies: Vec<f64> = counts.iter().map(|k| k / n as f64).collect();
                let mut cumulative = 0.0;
                let mut thresholds = Vec::with_capacity(cats.len());
                let mut midpoints = Vec::with_capacity(cats.len());
                for f in &frequencies {
                    let lo = cumulative;
                    cumulative += f;
                    let hi = cumulative.min(1.0);
                    thresholds.push(if (hi - 1.0).abs() < 1e-15 {
                        f64::INFINITY
                    } else {
                        normal.inverse_cdf(hi)
                    });
                    let mid = 0.5 * (lo + hi);
                    midpoints.push(normal.inverse_cdf(mid.clamp(1e-12, 1.0 - 1e-12)));
                }
                for (r, row) in train.rows().iter().enumerate() {
                    latent[c][r] = midpoints[row[c].as_cat()];
                }
                marginals.push(Marginal::Categorical {
                    frequencies,
                    thresholds,
                });
            }
            None => {
                let values: Vec<f64> = train.rows().iter().map(|r| r[c].as_cont()).collect();
                let ranks = average_ranks(&values);
                for (r, rank) in ranks.iter().enumerate() {
                    let u = rank / (n as f64 + 1.0);
                    latent[c][r] = normal.inverse_cdf(u);
                }
                let mut sorted_values = values;
                sorted_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                marginals.push(Marginal::Continuous { sorted_values });
            }
        }
    }

    let mut corr = DMatrix::identity(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let rho = pearson_or_zero(&latent[i], &latent[j]);
            corr[(i, j)] = rho;
            corr[(j, i)] = rho;
        }
    }
    let corr = repair_correlation(corr);
    let chol = nalgebra::Cholesky::new(corr.clone())
        .or_else(|| {
            // Floor-level eigenvalues can still trip Cholesky; a tiny ridge fixes it.
            nalgebra::Cholesky::new(corr + DMatrix::identity(dim, dim) * 1e-9)
        })
        .ok_or_else(|| Error::Training("correlation matrix not positive definite".to_string()))?;

    Ok(GaussianCopulaModel {
        schema,
        marginals,
        chol: chol.l().as_slice().to_vec(),
        dim,
        minority_value: train.minority_value(),
    })
}

impl GaussianCopulaModel {
    fn correlated_normals(&self, z: &[f64]) -> Vec<f64> {
        // chol is column-major from nalgebra; multiply L * z.
        let mut out = vec![0.0; self.dim];
        for (j, zj) in z.iter().enumerate() {
            for i in j..self.dim {
                out[i] += self.chol[j * self.dim + i] * *zj;
            }
        }
        out
    }

    fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
        let n = sorted.len();
        let pos = u.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }

    pub fn correlation_factor(&self) -> &[f64] {
        &self.chol
    }
}

impl Fitted for GaussianCopulaModel {
    fn sample(&self, n: usize, seed: u64) -> Result<DataTable> {
        check_sample_count(n)?;
        let normal = std_normal();
        let mut rng = derive_rng(seed, "copula-sample", 0);
        let mut rows: Vec<Row> = Vec::with_capacity(n);
        for _ in 0..n {
            let raw: Vec<f64> = (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let z = self.correlated_normals(&raw);
            let mut row: Row = Vec::with_capacity(self.dim);
            for (c, marginal) in self.marginals.iter().enumerate() {
                match marginal {
                    Marginal::Categorical { thresholds, .. } => {
                        let v = thresholds
                            .iter()
                            .position(|t| z[c] <= *t)
                            .unwrap_or(thresholds.len() - 1);
                        row.push(Value::Cat(v));
                    }
                    Marginal::Continuous { sorted_values } => {
                        let u = normal.cdf(z[c]);
                        row.push(Value::Cont(Self::empirical_quantile(sorted_values, u)));
                    }
                }
            }
            rows.push(row);
        }
        let mut table = DataTable::with_shared_schema(Arc::clone(&self.schema), rows)?;
        table.set_minority_value(self.minority_value);
        Ok(table)
    }

    fn schema(&self) -> &TableSchema {
        &self.schema
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(Checkpoint::new(ModelPayload::Copula(self.clone())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{minority_fraction, ColumnMeta};
    use crate::demo;

    #[test]
    fn minority_fraction_is_preserved() {
        let train = demo::understudy("AD", 1).unwrap();
        let model = fit_gaussian_copula(&train).unwrap();
        let synth = model.sample(10_000, 0).unwrap();
        let delta = (minority_fraction(&synth) - minority_fraction(&train)).abs();
        assert!(delta < 1.5, "minority shifted by {delta}");
    }

    #[test]
    fn rank_correlation_survives_sampling() {
        // Two perfectly rank-correlated continuous columns.
        let schema = TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["a", "b"]),
                ColumnMeta::continuous("x", 0.0, 100.0),
                ColumnMeta::continuous("y", 0.0, 100.0),
            ],
            "label",
        )
        .unwrap();
        let rows: Vec<Row> = (0..400)
            .map(|i| {
                let x = (i as f64 * 37.0) % 100.0;
                vec![
                    Value::Cat(i % 2),
                    Value::Cont(x),
                    Value::Cont((x / 10.0).powi(2)), // monotone in x
                ]
            })
            .collect();
        let train = DataTable::new(schema, rows).unwrap();
        let model = fit_gaussian_copula(&train).unwrap();
        let synth = model.sample(2000, 1).unwrap();

        let xs: Vec<f64> = synth.rows().iter().map(|r| r[1].as_cont()).collect();
        let ys: Vec<f64> = synth.rows().iter().map(|r| r[2].as_cont()).collect();
        let rx = average_ranks(&xs);
        let ry = average_ranks(&ys);
        let spearman = pearson_or_zero(&rx, &ry);
        assert!(spearman > 0.9, "spearman {spearman}");
    }

    #[test]
    fn single_continuous_column_matches_empirical_cdf() {
        let train = demo::two_cluster(600, 2).unwrap();
        let model = fit_gaussian_copula(&train).unwrap();
        let synth = model.sample(10_000, 3).unwrap();
        let real: Vec<f64> = train.rows().iter().map(|r| r[1].as_cont()).collect();
        let fake: Vec<f64> = synth.rows().iter().map(|r| r[1].as_cont()).collect();

        // KS between sample and training marginal.
        let mut worst: f64 = 0.0;
        let mut sorted_real = real.clone();
        sorted_real.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for t in sorted_real.iter().step_by(7) {
            let fr = real.iter().filter(|x| *x <= t).count() as f64 / real.len() as f64;
            let ff = fake.iter().filter(|x| *x <= t).count() as f64 / fake.len() as f64;
            worst = worst.max((fr - ff).abs());
        }
        assert!(worst < 0.05, "KS {worst}");
    }

    #[test]
    fn constant_column_gets_unit_marginal_and_zero_correlation() {
        let schema = TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["a", "b"]),
                ColumnMeta::continuous("x", 0.0, 10.0),
            ],
            "label",
        )
        .unwrap();
        let rows: Vec<Row> = (0..50)
            .map(|i| vec![Value::Cat(i % 2), Value::Cont(5.0)])
            .collect();
        let train = DataTable::new(schema, rows).unwrap();
        let model = fit_gaussian_copula(&train).unwrap();
        let synth = model.sample(100, 0).unwrap();
        assert!(synth.rows().iter().all(|r| r[1].as_cont() == 5.0));
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let train = demo::understudy("CR", 0).unwrap();
        let model = fit_gaussian_copula(&train).unwrap();
        let a = model.sample(50, 7).unwrap();
        let b = model.sample(50, 7).unwrap();
        let c = model.sample(50, 8).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert_ne!(a.rows(), c.rows());
    }
}
