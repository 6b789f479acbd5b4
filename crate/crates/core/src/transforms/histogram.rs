//! Marginal-frequency featurization of whole tables, used by the attack
//! discriminator: one normalized frequency vector per attribute over a fixed
//! alphabet, concatenated.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{DataTable, TableSchema, Value};
use crate::error::{Error, Result};
use crate::transforms::GmmNormalizer;

/// Concatenated per-attribute frequency vectors. The length is fixed by the
/// fitted featurizer and independent of the table's row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub values: Vec<f64>,
    /// (start, len) of each attribute's sub-vector, in schema order.
    pub segments: Vec<(usize, usize)>,
}

impl FeatureHistogram {
    pub fn segment(&self, i: usize) -> &[f64] {
        let (start, len) = self.segments[i];
        &self.values[start..start + len]
    }
}

/// Bins continuous attributes with a mixture fitted on reference data and
/// counts marginal frequencies per attribute. The reference fit must come
/// from data the attacker holds, never from the victim's training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramFeaturizer {
    schema: Arc<TableSchema>,
    gmm: GmmNormalizer,
}

impl HistogramFeaturizer {
    /// Fit the binning on the attacker's reference table.
    pub fn fit(reference: &DataTable, components: usize, seed: u64) -> Result<Self> {
        Ok(HistogramFeaturizer {
            schema: reference.shared_schema(),
            gmm: GmmNormalizer::fit(reference, components, seed)?,
        })
    }

    pub fn feature_len(&self) -> usize {
        self.schema
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| match col.categories() {
                Some(cats) => cats.len(),
                None => self.gmm.component_count(c),
            })
            .sum()
    }

    pub fn featurize(&self, table: &DataTable) -> Result<FeatureHistogram> {
        if table.schema() != self.schema.as_ref() {
            return Err(Error::Transform(
                "table schema does not match the fitted featurizer".to_string(),
            ));
        }
        let mut values = Vec::with_capacity(self.feature_len());
        let mut segments = Vec::with_capacity(self.schema.columns.len());
        let n = table.n_rows() as f64;
        for (c, col) in self.schema.columns.iter().enumerate() {
            let len = match col.categories() {
                Some(cats) => cats.len(),
                None => self.gmm.component_count(c),
            };
            let start = values.len();
            let mut counts = vec![0.0f64; len];
            for row in table.rows() {
                let slot = match row[c] {
                    Value::Cat(i) => i,
                    Value::Cont(x) => self.gmm.column(c).expect("continuous").assign(x),
                };
                counts[slot] += 1.0;
            }
            for count in counts {
                values.push(count / n);
            }
            segments.push((start, len));
        }
        Ok(FeatureHistogram { values, segments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;

    #[test]
    fn segments_sum_to_one() {
        let table = demo::ad_like(300, 30.0, 1).unwrap();
        let featurizer = HistogramFeaturizer::fit(&table, 4, 0).unwrap();
        let hist = featurizer.featurize(&table).unwrap();
        for i in 0..hist.segments.len() {
            let sum: f64 = hist.segment(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "segment {i} sums to {sum}");
        }
        assert_eq!(hist.values.len(), featurizer.feature_len());
    }

    #[test]
    fn deterministic_and_permutation_invariant() {
        let table = demo::ad_like(200, 30.0, 2).unwrap();
        let featurizer = HistogramFeaturizer::fit(&table, 4, 0).unwrap();
        let a = featurizer.featurize(&table).unwrap();
        let b = featurizer.featurize(&table).unwrap();
        assert_eq!(a, b);

        let mut reversed: Vec<_> = table.rows().to_vec();
        reversed.reverse();
        let permuted = DataTable::with_shared_schema(table.shared_schema(), reversed).unwrap();
        let c = featurizer.featurize(&permuted).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn duplication_by_constant_factor_is_invariant() {
        let table = demo::ad_like(100, 30.0, 3).unwrap();
        let featurizer = HistogramFeaturizer::fit(&table, 4, 0).unwrap();
        let a = featurizer.featurize(&table).unwrap();

        let mut doubled = table.rows().to_vec();
        doubled.extend_from_slice(table.rows());
        let doubled = DataTable::with_shared_schema(table.shared_schema(), doubled).unwrap();
        let b = featurizer.featurize(&doubled).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn length_is_independent_of_row_count() {
        let big = demo::ad_like(400, 30.0, 4).unwrap();
        let featurizer = HistogramFeaturizer::fit(&big, 4, 0).unwrap();
        let small =
            DataTable::with_shared_schema(big.shared_schema(), big.rows()[..50].to_vec()).unwrap();
        assert_eq!(
            featurizer.featurize(&big).unwrap().values.len(),
            featurizer.featurize(&small).unwrap().values.len()
        );
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let a = demo::ad_like(100, 30.0, 5).unwrap();
        let b = demo::two_cluster(100, 5).unwrap();
        let featurizer = HistogramFeaturizer::fit(&a, 4, 0).unwrap();
        assert!(featurizer.featurize(&b).is_err());
    }
}
