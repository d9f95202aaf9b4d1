use rand::seq::SliceRandom;

use crate::data::schema::TabularSchema;
use crate::data::table::{ColumnData, Table};
use crate::error::{Error, Result};
use crate::numerics::rng::{purpose, stream};
use crate::numerics::Tensor;

/// Per-column mean and population standard deviation of the continuous
/// columns, in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fit on `table`; a constant continuous column is an error.
    pub fn fit(table: &Table) -> Result<Self> {
        let schema = table.schema();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        if table.rows() == 0 {
            return Err(Error::Contract(
                "cannot fit statistics on an empty table".into(),
            ));
        }
        for j in schema.continuous_indices() {
            let v = table.numeric(j);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std.is_nan() || std <= 0.0 {
                return Err(Error::Schema {
                    column: schema.columns()[j].name.clone(),
                    message: "continuous column is constant on the training rows".into(),
                });
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Self { means, stds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Encode a table as `n x D`: continuous columns z-scored, discrete one-hot.
pub fn encode(table: &Table, stats: &Standardizer) -> Result<Tensor> {
    let schema = table.schema();
    if stats.len() != schema.continuous_indices().len() {
        return Err(Error::Contract(format!(
            "{} standardisation entries for {} continuous columns",
            stats.len(),
            schema.continuous_indices().len()
        )));
    }
    let n = table.rows();
    let mut out = Tensor::zeros(n, schema.encoded_width());
    let width = out.cols();
    let mut c = 0;
    for block in schema.layout() {
        match table.column(block.column) {
            ColumnData::Numeric(v) => {
                let (m, s) = (stats.means[c], stats.stds[c]);
                c += 1;
                for (i, x) in v.iter().enumerate() {
                    out.data_mut()[i * width + block.offset] = (x - m) / s;
                }
            }
            ColumnData::Categorical(v) => {
                for (i, &l) in v.iter().enumerate() {
                    out.data_mut()[i * width + block.offset + l] = 1.0;
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`encode`]; discrete blocks decode to their argmax level.
pub fn decode(encoded: &Tensor, schema: &TabularSchema, stats: &Standardizer) -> Result<Table> {
    if encoded.cols() != schema.encoded_width() {
        return Err(Error::Contract(format!(
            "encoded width {} does not match schema width {}",
            encoded.cols(),
            schema.encoded_width()
        )));
    }
    let n = encoded.rows();
    let mut c = 0;
    let mut columns = Vec::with_capacity(schema.len());
    for block in schema.layout() {
        if block.discrete {
            columns.push(ColumnData::Categorical(
                (0..n)
                    .map(|i| {
                        let row = &encoded.row(i)[block.offset..block.offset + block.width];
                        crate::heads::argmax(row)
                    })
                    .collect(),
            ));
        } else {
            let (m, s) = (stats.means[c], stats.stds[c]);
            c += 1;
            columns.push(ColumnData::Numeric(
                (0..n)
                    .map(|i| encoded.get(i, block.offset) * s + m)
                    .collect(),
            ));
        }
    }
    Table::new(schema.clone(), columns)
}

/// Encoded training or evaluation matrix with the statistics used to build it.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub schema: TabularSchema,
    pub stats: Standardizer,
    pub matrix: Tensor,
}

impl EncodedDataset {
    /// Fit statistics on `table` and encode it.
    pub fn fit(table: &Table) -> Result<Self> {
        let stats = Standardizer::fit(table)?;
        Self::with_stats(table, stats)
    }

    /// Encode with statistics fitted elsewhere (the training rows).
    pub fn with_stats(table: &Table, stats: Standardizer) -> Result<Self> {
        let matrix = encode(table, &stats)?;
        Ok(Self {
            schema: table.schema().clone(),
            stats,
            matrix,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn decode(&self) -> Result<Table> {
        decode(&self.matrix, &self.schema, &self.stats)
    }
}

/// Seeded shuffle-and-cut split; `round(fraction * n)` rows go to train.
pub fn split(table: &Table, train_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = table.rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "split of {n} rows at {train_fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[purpose::SPLIT]));
    let (train, test) = idx.split_at(n_train);
    Ok((table.select_rows(train), table.select_rows(test)))
}

/// Explicit train and test files sharing one schema.
pub fn load_split(
    train: impl AsRef<std::path::Path>,
    test: impl AsRef<std::path::Path>,
    schema: &TabularSchema,
) -> Result<(Table, Table)> {
    let train = Table::read_csv(train, schema)?;
    let test = Table::read_csv(test, schema)?;
    if train.rows() == 0 || test.rows() == 0 {
        return Err(Error::Config(
            "train and test files must both have rows".into(),
        ));
    }
    Ok((train, test))
}
