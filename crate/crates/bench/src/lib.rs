//! Seeded inputs shared by the benchmarks.

use cwdae_core::data::{ColumnData, EncodedDataset, Table, TabularSchema};
use cwdae_core::numerics::rng::stream;
use cwdae_core::numerics::Tensor;
use rand::Rng;

/// `n x d` matrix of uniform draws on `[-2, 2)`.
pub fn points(n: usize, d: usize, seed: u64) -> Tensor {
    let mut r = stream(seed, &[]);
    let data = (0..n * d).map(|_| r.random_range(-2.0..2.0)).collect();
    Tensor::matrix(n, d, data).expect("shape")
}

/// Two continuous columns and one three-level column, encoded.
pub fn mixed_dataset(n: usize, seed: u64) -> EncodedDataset {
    let schema =
        TabularSchema::parse("x,continuous\ny,continuous\nc,discrete,a|b|c\n").expect("schema");
    let mut r = stream(seed, &[]);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = r.random_range(-1.0..1.0);
        x.push(a);
        y.push(0.7 * a + 0.3 * r.random_range(-1.0..1.0));
        c.push(r.random_range(0..3usize));
    }
    let table = Table::new(
        schema,
        vec![
            ColumnData::Numeric(x),
            ColumnData::Numeric(y),
            ColumnData::Categorical(c),
        ],
    )
    .expect("table");
    EncodedDataset::fit(&table).expect("encode")
}
