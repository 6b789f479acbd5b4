//! Mixed-type tabular data: schemas with non-private metadata, validated
//! tables, and the split/subsample operations the benchmark pipeline uses.

mod io;
mod sampling;

pub use io::{load_metadata, load_table, save_metadata, save_table};
pub use sampling::{downsample_balanced, poisson_sample, stratified_split};

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column kind plus the public metadata needed to encode it.
///
/// Ranges of continuous columns are treated as non-private: transforms may
/// read them freely without touching data rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical { categories: Vec<String> },
    Continuous { range_min: f64, range_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnMeta {
    pub fn categorical(name: impl Into<String>, categories: &[&str]) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: categories.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: impl Into<String>, range_min: f64, range_max: f64) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Continuous {
                range_min,
                range_max,
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories),
            ColumnKind::Continuous { .. } => None,
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Continuous {
                range_min,
                range_max,
            } => Some((range_min, range_max)),
            ColumnKind::Categorical { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ColumnKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(Error::schema(format!(
                        "categorical column '{}' has no categories",
                        self.name
                    )));
                }
                let unique: HashSet<&String> = categories.iter().collect();
                if unique.len() != categories.len() {
                    return Err(Error::schema(format!(
                        "categorical column '{}' has duplicate categories",
                        self.name
                    )));
                }
            }
            ColumnKind::Continuous {
                range_min,
                range_max,
            } => {
                if !(range_min.is_finite() && range_max.is_finite() && range_min < range_max) {
                    return Err(Error::schema(format!(
                        "continuous column '{}' needs range_min < range_max, got [{range_min}, {range_max}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ordered columns plus the binary classification target.
///
/// Column order is stable and defines the encoding order used everywhere
/// downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnMeta>,
    pub target: String,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnMeta>, target: impl Into<String>) -> Result<Self> {
        let schema = TableSchema {
            columns,
            target: target.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for col in &self.columns {
            col.validate()?;
            if !names.insert(col.name.as_str()) {
                return Err(Error::schema(format!("duplicate column name '{}'", col.name)));
            }
        }
        let target = self
            .column(&self.target)
            .ok_or_else(|| Error::schema(format!("target column '{}' not in schema", self.target)))?;
        match target.categories() {
            Some(cats) if cats.len() == 2 => Ok(()),
            Some(cats) => Err(Error::schema(format!(
                "target column '{}' must have exactly 2 categories, has {}",
                self.target,
                cats.len()
            ))),
            None => Err(Error::schema(format!(
                "target column '{}' must be categorical",
                self.target
            ))),
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.column_index(&self.target)
            .expect("validated schema has a target column")
    }

    pub fn target_categories(&self) -> &[String] {
        self.columns[self.target_index()]
            .categories()
            .expect("target is categorical")
    }

    /// Indices of categorical columns, in schema order.
    pub fn categorical_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_categorical())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_categorical())
            .map(|(i, _)| i)
            .collect()
    }
}

/// A single cell. Categorical values are indices into the column's category
/// list; continuous values are finite reals inside the declared range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Cat(usize),
    Cont(f64),
}

impl Value {
    pub fn as_cat(&self) -> usize {
        match self {
            Value::Cat(i) => *i,
            Value::Cont(_) => panic!("expected categorical value"),
        }
    }

    pub fn as_cont(&self) -> f64 {
        match self {
            Value::Cont(v) => *v,
            Value::Cat(_) => panic!("expected continuous value"),
        }
    }
}

pub type Row = Vec<Value>;

/// A validated table: every row conforms to the schema.
///
/// `minority_value` fixes, at construction time, which of the two target
/// categories is the minority class; derived tables (splits, subsamples,
/// synthetic samples) inherit it so that class-0/class-1 semantics stay
/// stable even if a subsample shifts the balance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataTable {
    schema: Arc<TableSchema>,
    rows: Vec<Row>,
    minority_value: usize,
}

impl DataTable {
    pub fn new(schema: TableSchema, rows: Vec<Row>) -> Result<Self> {
        Self::with_shared_schema(Arc::new(schema), rows)
    }

    pub fn with_shared_schema(schema: Arc<TableSchema>, rows: Vec<Row>) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(Error::schema("empty dataset".to_string()));
        }
        for (r, row) in rows.iter().enumerate() {
            validate_row(&schema, r, row)?;
        }
        let target = schema.target_index();
        let mut counts = [0usize; 2];
        for row in &rows {
            counts[row[target].as_cat()] += 1;
        }
        // Tie goes to category 1 so a perfectly balanced table still has a
        // well-defined minority label.
        let minority_value = if counts[0] < counts[1] { 0 } else { 1 };
        Ok(DataTable {
            schema,
            rows,
            minority_value,
        })
    }

    /// Rebuild from rows of an existing table, keeping its minority label.
    pub(crate) fn derived(&self, rows: Vec<Row>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::schema("empty dataset".to_string()));
        }
        Ok(DataTable {
            schema: Arc::clone(&self.schema),
            rows,
            minority_value: self.minority_value,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<TableSchema> {
        Arc::clone(&self.schema)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.schema.columns.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    /// Category index of the minority class in the target column.
    pub fn minority_value(&self) -> usize {
        self.minority_value
    }

    /// Pin the minority label, used so synthetic tables keep the class
    /// semantics of the table their generator was trained on.
    pub(crate) fn set_minority_value(&mut self, value: usize) {
        debug_assert!(value < 2);
        self.minority_value = value;
    }

    /// True if the row carries the minority class label.
    pub fn is_minority(&self, row: usize) -> bool {
        self.rows[row][self.schema.target_index()].as_cat() == self.minority_value
    }

    /// Counts of the two target categories, indexed by category.
    pub fn class_counts(&self) -> [usize; 2] {
        let target = self.schema.target_index();
        let mut counts = [0usize; 2];
        for row in &self.rows {
            counts[row[target].as_cat()] += 1;
        }
        counts
    }

    /// Binary labels with 1 = minority class.
    pub fn labels(&self) -> Vec<u8> {
        let target = self.schema.target_index();
        self.rows
            .iter()
            .map(|r| u8::from(r[target].as_cat() == self.minority_value))
            .collect()
    }
}

fn validate_row(schema: &TableSchema, row_idx: usize, row: &Row) -> Result<()> {
    if row.len() != schema.columns.len() {
        return Err(Error::Shape(format!(
            "row {row_idx} has {} values, schema has {} columns",
            row.len(),
            schema.columns.len()
        )));
    }
    for (col, value) in schema.columns.iter().zip(row.iter()) {
        match (&col.kind, value) {
            (ColumnKind::Categorical { categories }, Value::Cat(i)) => {
                if *i >= categories.len() {
                    return Err(Error::Cell {
                        row: row_idx,
                        column: col.name.clone(),
                        message: format!("category index {i} out of {}", categories.len()),
                    });
                }
            }
            (
                ColumnKind::Continuous {
                    range_min,
                    range_max,
                },
                Value::Cont(v),
            ) => {
                if !v.is_finite() {
                    return Err(Error::Cell {
                        row: row_idx,
                        column: col.name.clone(),
                        message: "non-finite value".to_string(),
                    });
                }
                if v < range_min || v > range_max {
                    return Err(Error::Cell {
                        row: row_idx,
                        column: col.name.clone(),
                        message: format!("value {v} outside declared range [{range_min}, {range_max}]"),
                    });
                }
            }
            _ => {
                return Err(Error::Cell {
                    row: row_idx,
                    column: col.name.clone(),
                    message: "value kind does not match column kind".to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Percentage of the rarer target class: `100 * rarer / total`.
pub fn minority_fraction(data: &DataTable) -> f64 {
    let counts = data.class_counts();
    let rarer = counts[0].min(counts[1]);
    100.0 * rarer as f64 / data.n_rows() as f64
}

/// Train/validation/test partition with a shared schema.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub train: DataTable,
    pub validation: DataTable,
    pub test: DataTable,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> TableSchema {
        TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["no", "yes"]),
                ColumnMeta::continuous("x", 0.0, 10.0),
            ],
            "label",
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        let err = DataTable::new(
            toy_schema(),
            vec![vec![Value::Cat(0), Value::Cont(11.0)]],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0"), "{msg}");
        assert!(msg.contains("'x'"), "{msg}");
        assert!(msg.contains("11"), "{msg}");
    }

    #[test]
    fn rejects_unknown_category() {
        let err = DataTable::new(
            toy_schema(),
            vec![vec![Value::Cat(2), Value::Cont(1.0)]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn rejects_empty() {
        let err = DataTable::new(toy_schema(), vec![]).unwrap_err();
        assert!(err.to_string().contains("empty dataset"));
    }

    #[test]
    fn target_must_be_binary() {
        let err = TableSchema::new(
            vec![ColumnMeta::categorical("label", &["a", "b", "c"])],
            "label",
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly 2"));
    }

    #[test]
    fn minority_fraction_balanced_is_50() {
        let rows = vec![
            vec![Value::Cat(0), Value::Cont(1.0)],
            vec![Value::Cat(1), Value::Cont(2.0)],
        ];
        let t = DataTable::new(toy_schema(), rows).unwrap();
        assert_eq!(minority_fraction(&t), 50.0);
    }

    #[test]
    fn minority_value_fixed_at_construction() {
        let mut rows = vec![vec![Value::Cat(1), Value::Cont(1.0)]];
        for _ in 0..9 {
            rows.push(vec![Value::Cat(0), Value::Cont(2.0)]);
        }
        let t = DataTable::new(toy_schema(), rows).unwrap();
        assert_eq!(t.minority_value(), 1);
        assert!(t.is_minority(0));
        assert!(!t.is_minority(1));
        assert_eq!(t.labels()[0], 1);
    }
}
