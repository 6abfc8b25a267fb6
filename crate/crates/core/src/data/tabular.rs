//! CSV ingestion driven by a column schema.
//!
//! Reading and encoding are separate steps so that vocabularies and imputation
//! medians can be fitted on the training rows only and then applied unchanged
//! to probe and test rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MISSING_CATEGORY: &str = "missing";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum ColumnRole {
    Numeric,
    Categorical {
        #[serde(default)]
        vocabulary: Option<Vec<String>>,
    },
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub role: ColumnRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub task: Task,
    pub columns: Vec<ColumnSpec>,
    /// Label value mapped to 1 for classification; otherwise labels must parse as 0/1.
    #[serde(default)]
    pub positive_label: Option<String>,
    /// Cell values treated as missing.
    #[serde(default = "default_missing_tokens")]
    pub missing_values: Vec<String>,
    /// When false, a missing cell is a load error.
    #[serde(default = "default_true")]
    pub impute_missing: bool,
}

fn default_missing_tokens() -> Vec<String> {
    vec![String::new(), "?".into(), "NA".into()]
}

fn default_true() -> bool {
    true
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Guesses a schema from the cells: columns whose non-missing cells all
    /// parse as numbers are numeric, the rest categorical. The label is
    /// `label_column` or the last column; two distinct label values make the
    /// task classification.
    pub fn infer<R: std::io::Read>(reader: R, label_column: Option<&str>, positive_label: Option<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(Error::Load {
                row: 0,
                column: String::new(),
                message: "need at least one feature and a label column".into(),
            });
        }
        let label = match label_column {
            Some(name) => header.iter().position(|h| h == name).ok_or_else(|| Error::Load {
                row: 0,
                column: name.to_string(),
                message: "label column not found".into(),
            })?,
            None => header.len() - 1,
        };
        let missing = default_missing_tokens();
        let mut numeric = vec![true; header.len()];
        let mut label_values = std::collections::BTreeSet::new();
        for record in rdr.records() {
            let record = record?;
            for (c, cell) in record.iter().enumerate().take(header.len()) {
                let cell = cell.trim();
                if missing.iter().any(|m| m == cell) {
                    continue;
                }
                if cell.parse::<f64>().is_err() {
                    numeric[c] = false;
                }
                if c == label && label_values.len() <= 2 {
                    label_values.insert(cell.to_string());
                }
            }
        }
        let task = if label_values.len() == 2 { Task::Classification } else { Task::Regression };
        let positive_label = match (task, positive_label) {
            (Task::Classification, Some(p)) => Some(p),
            (Task::Classification, None) => {
                let binary = label_values.iter().all(|v| v == "0" || v == "1");
                (!binary).then(|| label_values.iter().next_back().cloned()).flatten()
            }
            (Task::Regression, _) => None,
        };
        let columns = header
            .iter()
            .enumerate()
            .map(|(c, name)| ColumnSpec {
                name: name.clone(),
                role: if c == label {
                    ColumnRole::Label
                } else if numeric[c] {
                    ColumnRole::Numeric
                } else {
                    ColumnRole::Categorical { vocabulary: None }
                },
            })
            .collect();
        Ok(Schema {
            task,
            columns,
            positive_label,
            missing_values: missing,
            impute_missing: true,
        })
    }

    fn is_missing(&self, cell: &str) -> bool {
        let cell = cell.trim();
        self.missing_values.iter().any(|m| m == cell)
    }
}

/// Cells of a CSV file, with the columns ordered as in the schema.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub schema: Schema,
    /// `cells[row][schema column]`
    cells: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path, schema: Schema) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, schema)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, schema: Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::Load {
                row: 0,
                column: String::new(),
                message: "file is empty".into(),
            });
        }
        for name in header.iter() {
            if !schema.columns.iter().any(|c| c.name == name) {
                return Err(Error::Load {
                    row: 0,
                    column: name.to_string(),
                    message: "column not covered by the schema".into(),
                });
            }
        }
        let mut positions = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let pos = header.iter().position(|h| h == col.name).ok_or_else(|| Error::Load {
                row: 0,
                column: col.name.clone(),
                message: "missing column".into(),
            })?;
            positions.push(pos);
        }
        let labels = schema.columns.iter().filter(|c| c.role == ColumnRole::Label).count();
        if labels != 1 {
            return Err(Error::Config(format!("schema must name exactly one label column, found {labels}")));
        }
        let mut cells = Vec::new();
        for record in rdr.records() {
            let record = record?;
            cells.push(positions.iter().map(|&p| record.get(p).unwrap_or("").to_string()).collect());
        }
        Ok(RawTable { schema, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnEncoder {
    Numeric { median: f64 },
    Categorical { vocabulary: Vec<String> },
}

/// Vocabularies and imputation values fitted on a set of training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularEncoder {
    encoders: Vec<(usize, ColumnEncoder)>,
    label_column: usize,
    pub feature_names: Vec<String>,
}

impl TabularEncoder {
    pub fn fit(table: &RawTable, train_rows: &[usize]) -> Result<Self> {
        let schema = &table.schema;
        let mut encoders = Vec::new();
        let mut feature_names = Vec::new();
        let mut label_column = 0;
        for (c, col) in schema.columns.iter().enumerate() {
            match &col.role {
                ColumnRole::Label => label_column = c,
                ColumnRole::Ignore => {}
                ColumnRole::Numeric => {
                    let mut values = Vec::new();
                    for &r in train_rows {
                        let cell = &table.cells[r][c];
                        if schema.is_missing(cell) {
                            continue;
                        }
                        values.push(parse_numeric(cell, r, &col.name)?);
                    }
                    values.sort_by(f64::total_cmp);
                    let median = match values.len() {
                        0 => 0.0,
                        n if n % 2 == 1 => values[n / 2],
                        n => 0.5 * (values[n / 2 - 1] + values[n / 2]),
                    };
                    feature_names.push(col.name.clone());
                    encoders.push((c, ColumnEncoder::Numeric { median }));
                }
                ColumnRole::Categorical { vocabulary } => {
                    let vocabulary = match vocabulary {
                        Some(v) => v.clone(),
                        None => {
                            let mut v: Vec<String> = Vec::new();
                            for &r in train_rows {
                                let cell = &table.cells[r][c];
                                let value = if schema.is_missing(cell) {
                                    MISSING_CATEGORY.to_string()
                                } else {
                                    cell.trim().to_string()
                                };
                                if !v.contains(&value) {
                                    v.push(value);
                                }
                            }
                            v.sort();
                            v
                        }
                    };
                    feature_names.extend(vocabulary.iter().map(|v| format!("{}={}", col.name, v)));
                    encoders.push((c, ColumnEncoder::Categorical { vocabulary }));
                }
            }
        }
        Ok(TabularEncoder {
            encoders,
            label_column,
            feature_names,
        })
    }

    pub fn encode(&self, table: &RawTable, rows: &[usize]) -> Result<Dataset> {
        let schema = &table.schema;
        let d = self.feature_names.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            let cells = &table.cells[r];
            for (c, enc) in &self.encoders {
                let cell = &cells[*c];
                let name = &schema.columns[*c].name;
                let missing = schema.is_missing(cell);
                if missing && !schema.impute_missing {
                    return Err(Error::Load {
                        row: r + 1,
                        column: name.clone(),
                        message: "missing value and imputation is disabled".into(),
                    });
                }
                match enc {
                    ColumnEncoder::Numeric { median } => {
                        data.push(if missing { *median } else { parse_numeric(cell, r, name)? });
                    }
                    ColumnEncoder::Categorical { vocabulary } => {
                        let value = if missing { MISSING_CATEGORY } else { cell.trim() };
                        data.extend(vocabulary.iter().map(|v| if v == value { 1.0 } else { 0.0 }));
                    }
                }
            }
            let label_cell = cells[self.label_column].trim();
            let label_name = &schema.columns[self.label_column].name;
            let label = match (schema.task, &schema.positive_label) {
                (Task::Classification, Some(pos)) => f64::from(u8::from(label_cell == pos)),
                (Task::Classification, None) => {
                    let v = parse_numeric(label_cell, r, label_name)?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Load {
                            row: r + 1,
                            column: label_name.clone(),
                            message: format!("classification label must be 0 or 1, got {v}"),
                        });
                    }
                    v
                }
                (Task::Regression, _) => parse_numeric(label_cell, r, label_name)?,
            };
            labels.push(label);
        }
        let features = Matrix::new(rows.len(), d, data)?;
        Dataset::new(features, labels, self.feature_names.clone(), schema.task)
    }
}

fn parse_numeric(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Load {
            row: row + 1,
            column: column.to_string(),
            message: format!("cannot parse `{cell}` as a number"),
        })
}

/// Reads and encodes a whole file, fitting vocabularies on every row. Use
/// [`RawTable`] + [`TabularEncoder`] directly to fit on a training subset.
pub fn load_csv(path: &Path, schema: Schema) -> Result<Dataset> {
    let table = RawTable::read(path, schema)?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let encoder = TabularEncoder::fit(&table, &rows)?;
    encoder.encode(&table, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        serde_json::from_str(
            r#"{"task": "regression", "columns": [
                {"name": "size", "role": "numeric"},
                {"name": "colour", "role": "categorical"},
                {"name": "price", "role": "label"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn inferred_schema() {
        let csv = "a,b,y\n1,x,yes\n2,?,no\n,z,yes\n";
        let s = Schema::infer(csv.as_bytes(), None, None).unwrap();
        assert_eq!(s.task, Task::Classification);
        assert_eq!(s.positive_label.as_deref(), Some("yes"));
        assert_eq!(s.columns[0].role, ColumnRole::Numeric);
        assert_eq!(s.columns[1].role, ColumnRole::Categorical { vocabulary: None });
        assert_eq!(s.columns[2].role, ColumnRole::Label);
        let s = Schema::infer("y,a\n0.5,1\n1.5,2\n2.5,3\n".as_bytes(), Some("y"), None).unwrap();
        assert_eq!(s.task, Task::Regression);
        assert_eq!(s.columns[0].role, ColumnRole::Label);
        let s = Schema::infer("a,y\n1,0\n2,1\n".as_bytes(), None, None).unwrap();
        assert_eq!((s.task, s.positive_label), (Task::Classification, None));
        assert!(Schema::infer("a,y\n1,0\n".as_bytes(), Some("z"), None).is_err());
    }

    #[test]
    fn hand_encoding() {
        let csv = "size,colour,price\n1.5,red,10\n2.0,blue,12\n0.5,red,7\n";
        let table = RawTable::from_reader(csv.as_bytes(), schema()).unwrap();
        let rows: Vec<usize> = (0..3).collect();
        let ds = TabularEncoder::fit(&table, &rows).unwrap().encode(&table, &rows).unwrap();
        // vocabulary sorted: blue, red
        assert_eq!(ds.feature_names, vec!["size", "colour=blue", "colour=red"]);
        assert_eq!(ds.features.data(), &[1.5, 0.0, 1.0, 2.0, 1.0, 0.0, 0.5, 0.0, 1.0]);
        assert_eq!(ds.labels, vec![10.0, 12.0, 7.0]);
    }

    #[test]
    fn quoted_fields() {
        let csv = "size,colour,price\n1,\"dark, red\",3\n";
        let table = RawTable::from_reader(csv.as_bytes(), schema()).unwrap();
        let enc = TabularEncoder::fit(&table, &[0]).unwrap();
        assert_eq!(enc.feature_names[1], "colour=dark, red");
    }

    #[test]
    fn empty_and_header_only() {
        assert!(RawTable::from_reader("".as_bytes(), schema()).is_err());
        let table = RawTable::from_reader("size,colour,price\n".as_bytes(), schema()).unwrap();
        assert_eq!(table.len(), 0);
        let enc = TabularEncoder::fit(&table, &[]).unwrap();
        assert_eq!(enc.encode(&table, &[]).unwrap().len(), 0);
    }

    #[test]
    fn missing_column_and_bad_cell() {
        let err = RawTable::from_reader("size,price\n1,2\n".as_bytes(), schema()).unwrap_err();
        assert!(matches!(err, Error::Load { ref column, .. } if column == "colour"));
        let table = RawTable::from_reader("size,colour,price\nabc,red,1\n".as_bytes(), schema()).unwrap();
        let err = TabularEncoder::fit(&table, &[0]).unwrap_err();
        assert!(matches!(err, Error::Load { row: 1, ref column, .. } if column == "size"));
    }

    #[test]
    fn imputation_uses_training_rows() {
        let csv = "size,colour,price\n1,red,1\n3,,1\n?,blue,1\n100,red,1\n";
        let table = RawTable::from_reader(csv.as_bytes(), schema()).unwrap();
        let enc = TabularEncoder::fit(&table, &[0, 1, 2]).unwrap();
        assert_eq!(enc.feature_names, vec!["size", "colour=blue", "colour=missing", "colour=red"]);
        let ds = enc.encode(&table, &[2]).unwrap();
        // median of the training sizes {1, 3}
        assert_eq!(ds.features.row(0), &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_without_imputation_is_an_error() {
        let mut s = schema();
        s.impute_missing = false;
        let table = RawTable::from_reader("size,colour,price\n,red,1\n".as_bytes(), s).unwrap();
        let enc = TabularEncoder::fit(&table, &[0]).unwrap();
        assert!(matches!(enc.encode(&table, &[0]), Err(Error::Load { .. })));
    }

    #[test]
    fn classification_labels() {
        let s: Schema = serde_json::from_str(
            r#"{"task": "classification", "positive_label": ">50K", "columns": [
                {"name": "age", "role": "numeric"},
                {"name": "id", "role": "ignore"},
                {"name": "income", "role": "label"}]}"#,
        )
        .unwrap();
        let table = RawTable::from_reader("age,id,income\n30,a,>50K\n40,b,<=50K\n".as_bytes(), s).unwrap();
        let ds = TabularEncoder::fit(&table, &[0, 1]).unwrap().encode(&table, &[0, 1]).unwrap();
        assert_eq!(ds.labels, vec![1.0, 0.0]);
        assert_eq!(ds.dim(), 1);
    }
}
