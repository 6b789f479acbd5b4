//! Quality, utility, and distance-based privacy metrics. All scores live in
//! [0, 1]; every metric is pure and invariant to row order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{minority_fraction, ColumnKind, DataTable, Row, TableSchema, Value};
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::transforms::{fit_uniform_binner, UniformBinner, DEFAULT_BINS};

/// Confusion counts for a binary task; positives are the minority class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(truth: &[u8], predicted: &[u8]) -> Self {
        let mut c = ConfusionCounts {
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
        };
        for (t, p) in truth.iter().zip(predicted.iter()) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (0, 1) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Mean of per-class recalls. Undefined (an error) when a class is absent
/// from the ground truth, mirroring report cells that cannot be scored.
pub fn balanced_accuracy(c: &ConfusionCounts) -> Result<f64> {
    let positives = c.tp + c.fn_;
    let negatives = c.tn + c.fp;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(format!(
            "balanced accuracy undefined: {positives} positives, {negatives} negatives in ground truth"
        )));
    }
    Ok(0.5 * (c.tp as f64 / positives as f64 + c.tn as f64 / negatives as f64))
}

/// Per-column distribution similarity and the mean across columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub column_shapes: Vec<(String, f64)>,
    pub shapes_mean: f64,
    pub pair_trends: Vec<(String, String, f64)>,
    pub trends_mean: f64,
    pub synthetic_minority_pct: f64,
}

/// DCR-based privacy scores.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub dcr_baseline: f64,
    pub dcr_overfit: f64,
    pub median_synth_distance: f64,
    pub median_random_distance: f64,
}

fn require_same_schema(a: &DataTable, b: &DataTable) -> Result<()> {
    if a.schema() != b.schema() {
        return Err(Error::Schema(
            "metric inputs must share a schema".to_string(),
        ));
    }
    Ok(())
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn column_values(table: &DataTable, col: usize) -> Vec<f64> {
    table.rows().iter().map(|r| r[col].as_cont()).collect()
}

fn category_frequencies(table: &DataTable, col: usize, arity: usize) -> Vec<f64> {
    let mut freq = vec![0.0; arity];
    for row in table.rows() {
        freq[row[col].as_cat()] += 1.0;
    }
    let n = table.n_rows() as f64;
    freq.iter_mut().for_each(|f| *f /= n);
    freq
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Per-column shape scores: `1 - KS` for continuous, `1 - TVD` for
/// categorical, plus the mean.
pub fn column_shapes(real: &DataTable, synth: &DataTable) -> Result<(Vec<(String, f64)>, f64)> {
    require_same_schema(real, synth)?;
    let schema = real.schema();
    let mut scores = Vec::with_capacity(schema.columns.len());
    for (c, col) in schema.columns.iter().enumerate() {
        let score = match &col.kind {
            ColumnKind::Continuous { .. } => {
                1.0 - ks_statistic(&column_values(real, c), &column_values(synth, c))
            }
            ColumnKind::Categorical { categories } => {
                let p = category_frequencies(real, c, categories.len());
                let q = category_frequencies(synth, c, categories.len());
                1.0 - total_variation(&p, &q)
            }
        };
        scores.push((col.name.clone(), score));
    }
    let mean = scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
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
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Discretized identity of a cell: the category index, or the bin index
/// under the supplied binner.
fn discretize(value: &Value, col: usize, binner: &UniformBinner) -> usize {
    match value {
        Value::Cat(i) => *i,
        Value::Cont(x) => binner.bin_of(col, *x),
    }
}

fn joint_frequencies(
    table: &DataTable,
    i: usize,
    j: usize,
    arity_i: usize,
    arity_j: usize,
    binner: &UniformBinner,
) -> Vec<f64> {
    let mut freq = vec![0.0; arity_i * arity_j];
    for row in table.rows() {
        let a = discretize(&row[i], i, binner);
        let b = discretize(&row[j], j, binner);
        freq[a * arity_j + b] += 1.0;
    }
    let n = table.n_rows() as f64;
    freq.iter_mut().for_each(|f| *f /= n);
    freq
}

fn pair_arity(schema: &TableSchema, col: usize, binner: &UniformBinner) -> usize {
    match schema.columns[col].categories() {
        Some(cats) => cats.len(),
        None => binner.bin_count(col),
    }
}

/// Pairwise correlation similarity over all unordered column pairs.
///
/// Numeric pairs compare Pearson correlations; pairs with a categorical
/// member compare joint contingency tables, with numeric columns first
/// discretized by a uniform binner over the schema ranges.
pub fn column_pair_trends(
    real: &DataTable,
    synth: &DataTable,
) -> Result<(Vec<(String, String, f64)>, f64)> {
    require_same_schema(real, synth)?;
    let schema = real.schema();
    if schema.columns.len() < 2 {
        return Err(Error::invalid("pair trends need at least 2 columns"));
    }
    let binner = fit_uniform_binner(schema, DEFAULT_BINS)?;
    let mut scores = Vec::new();
    for i in 0..schema.columns.len() {
        for j in (i + 1)..schema.columns.len() {
            let both_numeric =
                !schema.columns[i].is_categorical() && !schema.columns[j].is_categorical();
            let score = if both_numeric {
                let rr = pearson(&column_values(real, i), &column_values(real, j)).unwrap_or(0.0);
                let rs = pearson(&column_values(synth, i), &column_values(synth, j)).unwrap_or(0.0);
                1.0 - (rr - rs).abs() / 2.0
            } else {
                let ai = pair_arity(schema, i, &binner);
                let aj = pair_arity(schema, j, &binner);
                let p = joint_frequencies(real, i, j, ai, aj, &binner);
                let q = joint_frequencies(synth, i, j, ai, aj, &binner);
                1.0 - total_variation(&p, &q)
            };
            scores.push((
                schema.columns[i].name.clone(),
                schema.columns[j].name.clone(),
                score,
            ));
        }
    }
    let mean = scores.iter().map(|(_, _, s)| s).sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

pub fn quality_report(real: &DataTable, synth: &DataTable) -> Result<QualityReport> {
    let (column_shapes, shapes_mean) = column_shapes(real, synth)?;
    let (pair_trends, trends_mean) = column_pair_trends(real, synth)?;
    Ok(QualityReport {
        column_shapes,
        shapes_mean,
        pair_trends,
        trends_mean,
        synthetic_minority_pct: minority_fraction(synth),
    })
}

/// Normalized mixed-type distance: mean over columns of `|a-b| / range` for
/// continuous and 0/1 mismatch for categorical.
pub fn mixed_distance(a: &Row, b: &Row, schema: &TableSchema) -> f64 {
    let mut total = 0.0;
    for (col, (va, vb)) in schema.columns.iter().zip(a.iter().zip(b.iter())) {
        total += match (&col.kind, va, vb) {
            (
                ColumnKind::Continuous {
                    range_min,
                    range_max,
                },
                Value::Cont(x),
                Value::Cont(y),
            ) => (x - y).abs() / (range_max - range_min),
            (ColumnKind::Categorical { .. }, Value::Cat(x), Value::Cat(y)) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            _ => unreachable!("validated rows match schema"),
        };
    }
    total / schema.columns.len() as f64
}

fn min_distance_to(row: &Row, table: &DataTable) -> f64 {
    let schema = table.schema();
    table
        .rows()
        .iter()
        .map(|t| mixed_distance(row, t, schema))
        .fold(f64::INFINITY, f64::min)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn uniform_random_rows(schema: &TableSchema, n: usize, seed: u64) -> Vec<Row> {
    let mut rng = derive_rng(seed, "dcr-uniform-baseline", 0);
    (0..n)
        .map(|_| {
            schema
                .columns
                .iter()
                .map(|col| match &col.kind {
                    ColumnKind::Categorical { categories } => {
                        Value::Cat(rng.random_range(0..categories.len()))
                    }
                    ColumnKind::Continuous {
                        range_min,
                        range_max,
                    } => Value::Cont(rng.random_range(*range_min..*range_max)),
                })
                .collect()
        })
        .collect()
}

/// DCR baseline protection: `min(1, m_syn / m_ran)` where both medians are
/// over per-row minimum distances to the training set; the reference rows
/// are uniform draws within the schema's ranges and alphabets.
pub fn dcr_baseline(train: &DataTable, synth: &DataTable, seed: u64) -> Result<PrivacyReport> {
    require_same_schema(train, synth)?;
    let schema = train.schema();

    let synth_dists: Vec<f64> = synth
        .rows()
        .par_iter()
        .map(|row| min_distance_to(row, train))
        .collect();
    let m_syn = median(synth_dists);

    let random_rows = uniform_random_rows(schema, synth.n_rows(), seed);
    let random_dists: Vec<f64> = random_rows
        .par_iter()
        .map(|row| min_distance_to(row, train))
        .collect();
    let m_ran = median(random_dists);

    let score = if m_ran == 0.0 {
        0.0 // degenerate schema: the uniform baseline already sits on the data
    } else {
        (m_syn / m_ran).min(1.0)
    };
    Ok(PrivacyReport {
        dcr_baseline: score,
        dcr_overfit: f64::NAN,
        median_synth_distance: m_syn,
        median_random_distance: m_ran,
    })
}

/// DCR overfitting protection: with `f` the fraction of synthetic rows
/// strictly closer to train than to the holdout (ties half), the score is
/// `min(1, 2 (1 - f))`.
pub fn dcr_overfit(train: &DataTable, holdout: &DataTable, synth: &DataTable) -> Result<f64> {
    require_same_schema(train, synth)?;
    require_same_schema(holdout, synth)?;
    let f: f64 = synth
        .rows()
        .par_iter()
        .map(|row| {
            let to_train = min_distance_to(row, train);
            let to_holdout = min_distance_to(row, holdout);
            if to_train < to_holdout {
                1.0
            } else if to_train == to_holdout {
                0.5
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / synth.n_rows() as f64;
    Ok((2.0 * (1.0 - f)).min(1.0))
}

/// Full privacy report against a train/holdout pair.
pub fn privacy_report(
    train: &DataTable,
    holdout: &DataTable,
    synth: &DataTable,
    seed: u64,
) -> Result<PrivacyReport> {
    let mut report = dcr_baseline(train, synth, seed)?;
    report.dcr_overfit = dcr_overfit(train, holdout, synth)?;
    Ok(report)
}
