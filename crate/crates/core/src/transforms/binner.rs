//! Uniform binning from column ranges alone.

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, TableSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl BinSpec {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.count)
            .map(|i| self.lo + i as f64 * self.width())
            .collect()
    }
}

/// Equal-width bins per continuous column, constructed from the schema's
/// declared ranges. Fitting reads zero data rows by signature: the only
/// input is the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBinner {
    columns: Vec<Option<BinSpec>>,
}

pub fn fit_uniform_binner(schema: &TableSchema, bins: usize) -> Result<UniformBinner> {
    if bins < 2 {
        return Err(Error::invalid(format!(
            "uniform binner needs bins >= 2, got {bins}"
        )));
    }
    let columns = schema
        .columns
        .iter()
        .map(|col| match col.kind {
            ColumnKind::Continuous {
                range_min,
                range_max,
            } => Some(BinSpec {
                lo: range_min,
                hi: range_max,
                count: bins,
            }),
            ColumnKind::Categorical { .. } => None,
        })
        .collect();
    Ok(UniformBinner { columns })
}

impl UniformBinner {
    pub fn spec(&self, column: usize) -> Option<&BinSpec> {
        self.columns.get(column).and_then(|s| s.as_ref())
    }

    pub fn bin_count(&self, column: usize) -> usize {
        self.spec(column).map_or(0, |s| s.count)
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(|c| c.is_none())
    }

    /// Bin index and the in-bin offset in [0, 1]. Values equal to the range
    /// maximum land in the last bin with offset 1.
    pub fn locate(&self, column: usize, x: f64) -> (usize, f64) {
        let spec = self.spec(column).expect("continuous column");
        let w = spec.width();
        let idx = (((x - spec.lo) / w).floor() as usize).min(spec.count - 1);
        let bin_lo = spec.lo + idx as f64 * w;
        ((idx), ((x - bin_lo) / w).clamp(0.0, 1.0))
    }

    pub fn reconstruct(&self, column: usize, bin: usize, offset: f64) -> f64 {
        let spec = self.spec(column).expect("continuous column");
        let w = spec.width();
        spec.lo + bin as f64 * w + offset * w
    }

    /// Bin index alone, used when a metric only needs the discretization.
    pub fn bin_of(&self, column: usize, x: f64) -> usize {
        self.locate(column, x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnMeta;

    #[test]
    fn edges_are_equally_spaced() {
        let schema = TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["a", "b"]),
                ColumnMeta::continuous("x", 0.0, 10.0),
            ],
            "label",
        )
        .unwrap();
        let binner = fit_uniform_binner(&schema, 5).unwrap();
        assert_eq!(
            binner.spec(1).unwrap().edges(),
            vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
        );
        assert_eq!(binner.bin_count(0), 0);
    }

    #[test]
    fn no_continuous_columns_is_a_valid_empty_binner() {
        let schema = TableSchema::new(
            vec![ColumnMeta::categorical("label", &["a", "b"])],
            "label",
        )
        .unwrap();
        let binner = fit_uniform_binner(&schema, 10).unwrap();
        assert!(binner.is_empty());
    }

    #[test]
    fn single_bin_is_rejected() {
        let schema = TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["a", "b"]),
                ColumnMeta::continuous("x", 0.0, 10.0),
            ],
            "label",
        )
        .unwrap();
        assert!(fit_uniform_binner(&schema, 1).is_err());
    }
}
