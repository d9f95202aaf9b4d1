use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::schema::{ColumnKind, TabularSchema};
use crate::error::{Error, Result};

/// Values of one column in their original domain.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Level indices into the schema's level list.
    Categorical(Vec<usize>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Self {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(idx.iter().map(|&i| v[i]).collect())
            }
        }
    }
}

/// Column-major table typed by a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    schema: TabularSchema,
    columns: Vec<ColumnData>,
    rows: usize,
}

impl Table {
    pub fn new(schema: TabularSchema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Contract(format!(
                "{} columns for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let rows = columns.first().map_or(0, ColumnData::len);
        for (c, data) in schema.columns().iter().zip(&columns) {
            if data.len() != rows {
                return Err(Error::Contract(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    data.len()
                )));
            }
            match (&c.kind, data) {
                (ColumnKind::Discrete { levels }, ColumnData::Categorical(v)) => {
                    if let Some(i) = v.iter().position(|&l| l >= levels.len()) {
                        return Err(Error::Data {
                            row: i,
                            column: c.name.clone(),
                            message: format!("level index {} out of range", v[i]),
                        });
                    }
                }
                (ColumnKind::Discrete { .. }, _) | (_, ColumnData::Categorical(_)) => {
                    return Err(Error::Contract(format!(
                        "column `{}` has the wrong value type",
                        c.name
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            schema,
            columns,
            rows,
        })
    }

    /// A table with the schema's columns and no rows.
    pub fn empty(schema: TabularSchema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Discrete { .. } => ColumnData::Categorical(Vec::new()),
                _ => ColumnData::Numeric(Vec::new()),
            })
            .collect();
        Self {
            schema,
            columns,
            rows: 0,
        }
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, j: usize) -> &ColumnData {
        &self.columns[j]
    }

    /// Values of a continuous or ordinal column.
    pub fn numeric(&self, j: usize) -> &[f64] {
        match &self.columns[j] {
            ColumnData::Numeric(v) => v,
            ColumnData::Categorical(_) => {
                panic!("column `{}` is discrete", self.schema.columns()[j].name)
            }
        }
    }

    /// Level indices of a discrete column.
    pub fn categorical(&self, j: usize) -> &[usize] {
        match &self.columns[j] {
            ColumnData::Categorical(v) => v,
            ColumnData::Numeric(_) => {
                panic!("column `{}` is not discrete", self.schema.columns()[j].name)
            }
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            rows: idx.len(),
        }
    }

    pub fn read_csv(path: impl AsRef<Path>, schema: &TabularSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_reader(file, schema)
    }

    /// Read a headed CSV. Columns are matched by name; extra or missing
    /// columns, empty cells and unknown levels are errors.
    pub fn from_reader(reader: impl Read, schema: &TabularSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut source = Vec::with_capacity(schema.len());
        for c in schema.columns() {
            let pos = header
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| Error::Schema {
                    column: c.name.clone(),
                    message: "missing from CSV header".into(),
                })?;
            source.push(pos);
        }
        if let Some(extra) = header.iter().find(|h| schema.index_of(h).is_none()) {
            return Err(Error::Schema {
                column: extra.to_string(),
                message: "CSV column not declared in schema".into(),
            });
        }
        let lookups: Vec<Option<HashMap<&str, usize>>> = schema
            .columns()
            .iter()
            .map(|c| {
                c.levels()
                    .map(|l| l.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
            })
            .collect();
        let mut columns = Table::empty(schema.clone()).columns;

        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, c) in schema.columns().iter().enumerate() {
                let cell = rec.get(source[j]).unwrap_or("");
                let bad = |message: String| Error::Data {
                    row,
                    column: c.name.clone(),
                    message,
                };
                if cell.is_empty() {
                    return Err(bad("missing value".into()));
                }
                match (&mut columns[j], &lookups[j]) {
                    (ColumnData::Categorical(v), Some(map)) => {
                        let idx = map
                            .get(cell)
                            .ok_or_else(|| bad(format!("unknown level `{cell}`")))?;
                        v.push(*idx);
                    }
                    (ColumnData::Numeric(v), None) => {
                        let x: f64 = cell
                            .parse()
                            .map_err(|_| bad(format!("not a number: `{cell}`")))?;
                        if !x.is_finite() {
                            return Err(bad(format!("non-finite value `{cell}`")));
                        }
                        v.push(x);
                    }
                    _ => unreachable!("column storage follows the schema"),
                }
            }
        }
        Table::new(schema.clone(), columns)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    /// Continuous values are written with 17 significant digits, ordinal
    /// values with their schema decimals, discrete values as level labels.
    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.names())?;
        let mut record: Vec<String> = Vec::with_capacity(self.schema.len());
        for i in 0..self.rows {
            record.clear();
            for (c, data) in self.schema.columns().iter().zip(&self.columns) {
                record.push(match (&c.kind, data) {
                    (ColumnKind::Continuous, ColumnData::Numeric(v)) => format!("{:.16e}", v[i]),
                    (ColumnKind::Ordinal { decimals }, ColumnData::Numeric(v)) => {
                        format!("{:.*}", *decimals as usize, v[i])
                    }
                    (ColumnKind::Discrete { levels }, ColumnData::Categorical(v)) => {
                        levels[v[i]].clone()
                    }
                    _ => unreachable!("column storage follows the schema"),
                });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}
