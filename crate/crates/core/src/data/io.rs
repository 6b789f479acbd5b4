//! CSV + metadata sidecar I/O.
//!
//! The sidecar is a JSON file describing every column (kind, categories or
//! range) and the target column. Ranges and category alphabets are public
//! metadata; the CSV holds the private rows.

use std::path::Path;

use crate::data::{ColumnKind, DataTable, Row, TableSchema, Value};
use crate::error::{Error, Result};

pub fn load_metadata(path: &Path) -> Result<TableSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let schema: TableSchema = serde_json::from_str(&text).map_err(|e| Error::Load {
        path: path.display().to_string(),
        message: format!("malformed metadata: {e}"),
    })?;
    schema.validate()?;
    Ok(schema)
}

pub fn save_metadata(schema: &TableSchema, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(schema)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Load a CSV (comma-delimited, header row, UTF-8) against its sidecar.
///
/// The header must match the metadata column names in order. Every cell is
/// parsed per its column kind; missing values are rejected.
pub fn load_table(csv_path: &Path, meta_path: &Path) -> Result<DataTable> {
    let schema = load_metadata(meta_path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(csv_path)?;

    let headers = reader.headers()?.clone();
    let names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != names {
        return Err(Error::Load {
            path: csv_path.display().to_string(),
            message: format!("header {got:?} does not match metadata columns {names:?}"),
        });
    }

    let mut rows: Vec<Row> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != schema.columns.len() {
            return Err(Error::Shape(format!(
                "row {r} has {} fields, expected {}",
                record.len(),
                schema.columns.len()
            )));
        }
        let mut row = Vec::with_capacity(schema.columns.len());
        for (col, field) in schema.columns.iter().zip(record.iter()) {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Cell {
                    row: r,
                    column: col.name.clone(),
                    message: "missing value".to_string(),
                });
            }
            let value = match &col.kind {
                ColumnKind::Categorical { categories } => {
                    match categories.iter().position(|c| c == field) {
                        Some(i) => Value::Cat(i),
                        None => {
                            return Err(Error::Cell {
                                row: r,
                                column: col.name.clone(),
                                message: format!("unknown category '{field}'"),
                            })
                        }
                    }
                }
                ColumnKind::Continuous { .. } => {
                    let v: f64 = field.parse().map_err(|_| Error::Cell {
                        row: r,
                        column: col.name.clone(),
                        message: format!("cannot parse '{field}' as a number"),
                    })?;
                    Value::Cont(v)
                }
            };
            row.push(value);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Load {
            path: csv_path.display().to_string(),
            message: "empty dataset".to_string(),
        });
    }
    DataTable::new(schema, rows)
}

pub fn save_table(table: &DataTable, csv_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path)?;
    let names: Vec<&str> = table
        .schema()
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    writer.write_record(&names)?;
    for row in table.rows() {
        let mut record: Vec<String> = Vec::with_capacity(row.len());
        for (col, value) in table.schema().columns.iter().zip(row.iter()) {
            match (value, col.categories()) {
                (Value::Cat(i), Some(cats)) => record.push(cats[*i].clone()),
                (Value::Cont(v), None) => record.push(format!("{v}")),
                _ => unreachable!("validated table"),
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnMeta;

    fn write_fixture(dir: &Path, csv_body: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let schema = TableSchema::new(
            vec![
                ColumnMeta::categorical("label", &["no", "yes"]),
                ColumnMeta::continuous("x", 0.0, 10.0),
            ],
            "label",
        )
        .unwrap();
        let meta = dir.join("t.meta.json");
        save_metadata(&schema, &meta).unwrap();
        let csv = dir.join("t.csv");
        std::fs::write(&csv, csv_body).unwrap();
        (csv, meta)
    }

    #[test]
    fn round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, meta) = write_fixture(dir.path(), "label,x\nyes,2.5\nno,0\nno,10\n");
        let table = load_table(&csv, &meta).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(table.row(0)[0], Value::Cat(1));
        assert_eq!(table.row(0)[1], Value::Cont(2.5));

        let out = dir.path().join("out.csv");
        save_table(&table, &out).unwrap();
        let again = load_table(&out, &meta).unwrap();
        assert_eq!(again.rows(), table.rows());
    }

    #[test]
    fn empty_body_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, meta) = write_fixture(dir.path(), "label,x\n");
        let err = load_table(&csv, &meta).unwrap_err();
        assert!(err.to_string().contains("empty dataset"));
    }

    #[test]
    fn out_of_range_names_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, meta) = write_fixture(dir.path(), "label,x\nyes,11.0\n");
        let err = load_table(&csv, &meta).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0") && msg.contains("'x'"), "{msg}");
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, meta) = write_fixture(dir.path(), "x,label\n2.5,yes\n");
        let err = load_table(&csv, &meta).unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn unknown_category_and_missing_value() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, meta) = write_fixture(dir.path(), "label,x\nmaybe,1.0\n");
        assert!(load_table(&csv, &meta)
            .unwrap_err()
            .to_string()
            .contains("unknown category"));

        let (csv, meta) = write_fixture(dir.path(), "label,x\nyes,\n");
        assert!(load_table(&csv, &meta)
            .unwrap_err()
            .to_string()
            .contains("missing value"));
    }
}
