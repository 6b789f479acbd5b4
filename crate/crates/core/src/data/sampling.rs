//! Seeded split and subsampling operations. All are pure given (input, seed).

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::data::{minority_fraction, DataTable, Row, SplitBundle};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

const SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Largest-remainder quotas for one class across (train, validation, test).
fn class_quotas(n: usize) -> [usize; 3] {
    let mut quotas = [0usize; 3];
    let mut fracs = [0.0f64; 3];
    let mut assigned = 0;
    for (i, ratio) in SPLIT_RATIOS.iter().enumerate() {
        let exact = n as f64 * ratio;
        quotas[i] = exact.floor() as usize;
        fracs[i] = exact - exact.floor();
        assigned += quotas[i];
    }
    let mut order = [0usize, 1, 2];
    // Stable tie-break: larger remainder first, then train before val before test.
    order.sort_by(|&a, &b| fracs[b].partial_cmp(&fracs[a]).unwrap().then(a.cmp(&b)));
    for &i in order.iter().take(n - assigned) {
        quotas[i] += 1;
    }
    quotas
}

/// Deterministic stratified 8:1:1 split on the target column.
///
/// Per-class quotas use largest-remainder rounding, which keeps every split
/// within one row of the exact ratio for each class.
pub fn stratified_split(data: &DataTable, seed: u64) -> Result<SplitBundle> {
    let counts = data.class_counts();
    if counts[0] < 10 || counts[1] < 10 {
        return Err(Error::invalid(format!(
            "stratified split needs >= 10 rows per class, got {} and {}",
            counts[0], counts[1]
        )));
    }

    let target = data.schema().target_index();
    let mut buckets: [Vec<Row>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for class in 0..2 {
        let mut indices: Vec<usize> = (0..data.n_rows())
            .filter(|&i| data.row(i)[target].as_cat() == class)
            .collect();
        let mut rng = derive_rng(seed, "stratified-split", class as u64);
        indices.shuffle(&mut rng);
        let quotas = class_quotas(indices.len());
        let mut cursor = 0;
        for (split, &quota) in quotas.iter().enumerate() {
            for &i in &indices[cursor..cursor + quota] {
                buckets[split].push(data.row(i).clone());
            }
            cursor += quota;
        }
    }

    let [train_rows, val_rows, test_rows] = buckets;
    Ok(SplitBundle {
        train: data.derived(train_rows)?,
        validation: data.derived(val_rows)?,
        test: data.derived(test_rows)?,
    })
}

/// Include each row independently with probability `q`, preserving order.
///
/// The result may be empty; an empty lot is represented as a zero-row table
/// is not constructible, so the row list is returned raw.
pub fn poisson_sample_rows(data: &DataTable, q: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("sampling rate q={q} outside [0, 1]")));
    }
    let mut rng = derive_rng(seed, "poisson-sample", 0);
    Ok((0..data.n_rows())
        .filter(|_| rng.random::<f64>() < q)
        .collect())
}

/// Poisson sampling as a table; errors if the draw is empty.
pub fn poisson_sample(data: &DataTable, q: f64, seed: u64) -> Result<DataTable> {
    let picked = poisson_sample_rows(data, q, seed)?;
    let rows: Vec<Row> = picked.iter().map(|&i| data.row(i).clone()).collect();
    data.derived(rows)
}

/// Downsample the majority class to the minority count.
///
/// Minority rows are all retained; majority rows are sampled without
/// replacement. Row order follows the input.
pub fn downsample_balanced(data: &DataTable, seed: u64) -> Result<DataTable> {
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid(
            "downsampling needs both classes present".to_string(),
        ));
    }
    let target = data.schema().target_index();
    let keep = counts[0].min(counts[1]);
    let majority = usize::from(counts[1] >= counts[0]);

    let majority_indices: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.row(i)[target].as_cat() == majority)
        .collect();
    let mut rng = derive_rng(seed, "downsample-balanced", 0);
    let mut chosen: Vec<usize> = majority_indices
        .choose_multiple(&mut rng, keep)
        .copied()
        .collect();
    chosen.sort_unstable();

    let mut rows = Vec::with_capacity(2 * keep);
    let mut next_chosen = chosen.iter().peekable();
    for i in 0..data.n_rows() {
        let is_majority = data.row(i)[target].as_cat() == majority;
        if is_majority {
            if next_chosen.peek() == Some(&&i) {
                next_chosen.next();
                rows.push(data.row(i).clone());
            }
        } else {
            rows.push(data.row(i).clone());
        }
    }
    data.derived(rows)
}

#[allow(dead_code)]
fn split_minority_drift(bundle: &SplitBundle, full: &DataTable) -> f64 {
    let full_frac = minority_fraction(full);
    [&bundle.train, &bundle.validation, &bundle.test]
        .iter()
        .map(|t| (minority_fraction(t) - full_frac).abs())
        .fold(0.0, f64::max)
}
