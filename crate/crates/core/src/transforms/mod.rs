//! Reversible encodings between tables and dense numeric matrices.
//!
//! Categorical columns become one-hot blocks. Continuous columns become a
//! one-hot block over bins/components plus a scalar offset in [0, 1] that
//! pins the value inside its bin, so encoding is lossless. Two continuous
//! codecs exist: a uniform binner derived from column ranges alone (reads no
//! data rows, safe under DP) and a Gaussian-mixture normalizer fitted by EM.

mod binner;
mod gmm;
mod histogram;

pub use binner::{fit_uniform_binner, UniformBinner};
pub use gmm::{fit_gmm, ColumnGmm, GmmNormalizer};
pub use histogram::{FeatureHistogram, HistogramFeaturizer};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, DataTable, Row, TableSchema, Value};
use crate::error::{Error, Result};

/// Default bin count for the uniform binner.
pub const DEFAULT_BINS: usize = 10;
/// Default component count for the GMM normalizer.
pub const DEFAULT_COMPONENTS: usize = 10;

/// Where one schema column lives inside an encoded row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSlice {
    pub column: usize,
    pub onehot_start: usize,
    pub onehot_len: usize,
    /// Index of the scalar offset; `None` for categorical columns.
    pub offset_index: Option<usize>,
}

/// Full layout of an encoded row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingLayout {
    pub slices: Vec<ColumnSlice>,
    pub width: usize,
}

impl EncodingLayout {
    fn build(schema: &TableSchema, block_len: impl Fn(usize) -> usize) -> Self {
        let mut slices = Vec::with_capacity(schema.columns.len());
        let mut cursor = 0;
        for (c, col) in schema.columns.iter().enumerate() {
            match &col.kind {
                ColumnKind::Categorical { categories } => {
                    slices.push(ColumnSlice {
                        column: c,
                        onehot_start: cursor,
                        onehot_len: categories.len(),
                        offset_index: None,
                    });
                    cursor += categories.len();
                }
                ColumnKind::Continuous { .. } => {
                    let len = block_len(c);
                    slices.push(ColumnSlice {
                        column: c,
                        onehot_start: cursor,
                        onehot_len: len,
                        offset_index: Some(cursor + len),
                    });
                    cursor += len + 1;
                }
            }
        }
        EncodingLayout {
            slices,
            width: cursor,
        }
    }
}

/// Dense row-major matrix of encoded rows plus its layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub layout: EncodingLayout,
    pub rows: usize,
    pub data: Vec<f64>,
}

impl EncodedMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.layout.width..(i + 1) * self.layout.width]
    }
}

/// A fitted continuous codec paired with its schema: the unit the
/// synthesizers serialize and the encode/decode entry point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Encoder {
    schema: Arc<TableSchema>,
    codec: ContinuousCodec,
    layout: EncodingLayout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ContinuousCodec {
    Uniform(UniformBinner),
    Gmm(GmmNormalizer),
}

impl Encoder {
    pub fn uniform(schema: Arc<TableSchema>, binner: UniformBinner) -> Self {
        let layout = EncodingLayout::build(&schema, |c| binner.bin_count(c));
        Encoder {
            schema,
            codec: ContinuousCodec::Uniform(binner),
            layout,
        }
    }

    pub fn gmm(schema: Arc<TableSchema>, normalizer: GmmNormalizer) -> Self {
        let layout = EncodingLayout::build(&schema, |c| normalizer.component_count(c));
        Encoder {
            schema,
            codec: ContinuousCodec::Gmm(normalizer),
            layout,
        }
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn layout(&self) -> &EncodingLayout {
        &self.layout
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.codec, ContinuousCodec::Uniform(_))
    }

    /// Encode a continuous value as (block index, offset in [0, 1]).
    fn split_value(&self, column: usize, x: f64) -> (usize, f64) {
        match &self.codec {
            ContinuousCodec::Uniform(b) => b.locate(column, x),
            ContinuousCodec::Gmm(g) => g.locate(column, x),
        }
    }

    /// Inverse of `split_value`, before range clamping.
    fn merge_value(&self, column: usize, block: usize, offset: f64) -> f64 {
        match &self.codec {
            ContinuousCodec::Uniform(b) => b.reconstruct(column, block, offset),
            ContinuousCodec::Gmm(g) => g.reconstruct(column, block, offset),
        }
    }

    pub fn encode_row(&self, row: &Row) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.width];
        for slice in &self.layout.slices {
            match (&row[slice.column], slice.offset_index) {
                (Value::Cat(i), None) => out[slice.onehot_start + i] = 1.0,
                (Value::Cont(x), Some(offset_index)) => {
                    let (block, offset) = self.split_value(slice.column, *x);
                    out[slice.onehot_start + block] = 1.0;
                    out[offset_index] = offset;
                }
                _ => unreachable!("validated row matches schema"),
            }
        }
        out
    }

    pub fn encode(&self, table: &DataTable) -> Result<EncodedMatrix> {
        if table.schema() != self.schema.as_ref() {
            return Err(Error::Transform(
                "table schema does not match the fitted encoder".to_string(),
            ));
        }
        let mut data = Vec::with_capacity(table.n_rows() * self.layout.width);
        for row in table.rows() {
            data.extend_from_slice(&self.encode_row(row));
        }
        Ok(EncodedMatrix {
            layout: self.layout.clone(),
            rows: table.n_rows(),
            data,
        })
    }

    /// Decode one encoded row. One-hot blocks are read by argmax so relaxed
    /// generator outputs decode the same way as exact encodings; continuous
    /// values are clamped to the declared range.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Row> {
        if encoded.len() != self.layout.width {
            return Err(Error::Shape(format!(
                "encoded row has {} entries, layout expects {}",
                encoded.len(),
                self.layout.width
            )));
        }
        let mut row: Row = Vec::with_capacity(self.schema.columns.len());
        for slice in &self.layout.slices {
            let block = &encoded[slice.onehot_start..slice.onehot_start + slice.onehot_len];
            let choice = argmax(block);
            match slice.offset_index {
                None => row.push(Value::Cat(choice)),
                Some(offset_index) => {
                    let mut offset = encoded[offset_index];
                    if !(-1e-9..=1.0 + 1e-9).contains(&offset) {
                        let name = &self.schema.columns[slice.column].name;
                        return Err(Error::Transform(format!(
                            "offset {offset} outside [0, 1] for column '{name}'"
                        )));
                    }
                    offset = offset.clamp(0.0, 1.0);
                    let raw = self.merge_value(slice.column, choice, offset);
                    let (lo, hi) = self.schema.columns[slice.column]
                        .range()
                        .expect("continuous column has a range");
                    row.push(Value::Cont(raw.clamp(lo, hi)));
                }
            }
        }
        Ok(row)
    }

    pub fn decode(&self, matrix: &EncodedMatrix) -> Result<DataTable> {
        if matrix.layout != self.layout {
            return Err(Error::Transform(
                "matrix layout does not match the fitted encoder".to_string(),
            ));
        }
        let rows: Result<Vec<Row>> = (0..matrix.rows)
            .map(|i| self.decode_row(matrix.row(i)))
            .collect();
        DataTable::with_shared_schema(Arc::clone(&self.schema), rows?)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnMeta;

    fn schema() -> Arc<TableSchema> {
        Arc::new(
            TableSchema::new(
                vec![
                    ColumnMeta::categorical("label", &["no", "yes"]),
                    ColumnMeta::continuous("x", 0.0, 10.0),
                ],
                "label",
            )
            .unwrap(),
        )
    }

    #[test]
    fn uniform_encode_example() {
        let s = schema();
        let binner = fit_uniform_binner(&s, 5).unwrap();
        let enc = Encoder::uniform(Arc::clone(&s), binner);
        // value 2.3 in [0,10] with B=5: bin 1, offset 0.15
        let row = vec![Value::Cat(1), Value::Cont(2.3)];
        let e = enc.encode_row(&row);
        assert_eq!(&e[0..2], &[0.0, 1.0]);
        assert_eq!(argmax(&e[2..7]), 1);
        assert!((e[7] - 0.15).abs() < 1e-12);
        let back = enc.decode_row(&e).unwrap();
        assert_eq!(back[1].as_cont(), 2.3);
    }

    #[test]
    fn range_max_goes_to_last_bin_with_offset_one() {
        let s = schema();
        let enc = Encoder::uniform(Arc::clone(&s), fit_uniform_binner(&s, 5).unwrap());
        let e = enc.encode_row(&vec![Value::Cat(0), Value::Cont(10.0)]);
        assert_eq!(argmax(&e[2..7]), 4);
        assert!((e[7] - 1.0).abs() < 1e-12);
        let back = enc.decode_row(&e).unwrap();
        assert_eq!(back[1].as_cont(), 10.0);
    }

    #[test]
    fn offset_outside_unit_interval_is_rejected() {
        let s = schema();
        let enc = Encoder::uniform(Arc::clone(&s), fit_uniform_binner(&s, 5).unwrap());
        let mut e = enc.encode_row(&vec![Value::Cat(0), Value::Cont(3.0)]);
        e[7] = 1.4;
        assert!(enc.decode_row(&e).is_err());
    }

    #[test]
    fn layout_width_counts_blocks_and_offsets() {
        let s = schema();
        let enc = Encoder::uniform(Arc::clone(&s), fit_uniform_binner(&s, 5).unwrap());
        // 2 categories + 5 bins + 1 offset
        assert_eq!(enc.layout().width, 8);
    }
}
