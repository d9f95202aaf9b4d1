use crate::data::{ColumnData, Table};
use crate::error::{Error, Result};
use crate::metrics::forest::{ForestConfig, RandomForest, Task};
use crate::numerics::Tensor;

/// Test rows with `|y|` below this are left out of MAPE.
pub const MAPE_MIN_ABS: f64 = 1e-8;

/// Mean absolute percentage error over rows with `|y| >= 1e-8`, and the
/// number of rows skipped. `None` when every row is skipped.
pub fn mape(truth: &[f64], pred: &[f64]) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&y, &p) in truth.iter().zip(pred) {
        if y.abs() >= MAPE_MIN_ABS {
            sum += ((y - p) / y).abs();
            used += 1;
        }
    }
    let skipped = truth.len() - used;
    ((used > 0).then(|| sum / used as f64), skipped)
}

/// Unweighted mean of per-class F1 over the classes that occur in either
/// `truth` or `pred`.
pub fn macro_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Contract(format!(
            "macro F1 needs equal non-empty label vectors, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    let classes = truth.iter().chain(pred).max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; classes];
    let mut in_truth = vec![0usize; classes];
    let mut in_pred = vec![0usize; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        in_truth[t] += 1;
        in_pred[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let (sum, count) =
        (0..classes)
            .filter(|&c| in_truth[c] + in_pred[c] > 0)
            .fold((0.0, 0usize), |(s, k), c| {
                (
                    s + 2.0 * tp[c] as f64 / (in_truth[c] + in_pred[c]) as f64,
                    k + 1,
                )
            });
    Ok(sum / count as f64)
}

/// Every column except `target`, continuous values as-is and discrete
/// columns one-hot.
fn features(t: &Table, target: usize) -> Tensor {
    let schema = t.schema();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (j, c) in schema.columns().iter().enumerate() {
        if j == target {
            continue;
        }
        match (t.column(j), c.levels()) {
            (ColumnData::Numeric(v), _) => cols.push(v.clone()),
            (ColumnData::Categorical(v), Some(levels)) => {
                for l in 0..levels.len() {
                    cols.push(v.iter().map(|&x| f64::from(u8::from(x == l))).collect());
                }
            }
            (ColumnData::Categorical(_), None) => unreachable!("table storage follows the schema"),
        }
    }
    let n = t.rows();
    let data = (0..n)
        .flat_map(|i| cols.iter().map(move |c| c[i]))
        .collect();
    Tensor::matrix(n, cols.len(), data).expect("feature shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct MluColumn {
    pub column: String,
    /// MAPE for continuous targets, macro F1 for discrete ones.
    pub score: Option<f64>,
    /// Test rows left out of MAPE.
    pub skipped: usize,
    /// The training table held a single level of this discrete target.
    pub single_level: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlu {
    pub mape: Option<f64>,
    pub f1: Option<f64>,
    pub columns: Vec<MluColumn>,
}

/// One-vs-rest utility: a forest per column, trained on `train` to predict
/// that column from all others, scored on `test`.
pub fn mlu(train: &Table, test: &Table, cfg: &ForestConfig) -> Result<Mlu> {
    if train.schema() != test.schema() {
        return Err(Error::Contract(
            "utility needs train and test tables with the same schema".into(),
        ));
    }
    if train.rows() == 0 || test.rows() == 0 {
        return Err(Error::Domain(
            "utility needs non-empty train and test tables".into(),
        ));
    }
    let schema = train.schema();
    let mut columns = Vec::with_capacity(schema.len());
    let (mut mapes, mut f1s) = (Vec::new(), Vec::new());
    for (j, c) in schema.columns().iter().enumerate() {
        let (x, xt) = (features(train, j), features(test, j));
        let col = match (train.column(j), test.column(j), c.levels()) {
            (ColumnData::Numeric(y), ColumnData::Numeric(yt), _) => {
                let f = RandomForest::fit(&x, y, Task::Regression, cfg, j as u64)?;
                let (score, skipped) = mape(yt, &f.predict(&xt));
                mapes.extend(score);
                MluColumn {
                    column: c.name.clone(),
                    score,
                    skipped,
                    single_level: false,
                }
            }
            (ColumnData::Categorical(y), ColumnData::Categorical(yt), Some(levels)) => {
                let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
                let task = Task::Classification {
                    classes: levels.len(),
                };
                let f = RandomForest::fit(&x, &yf, task, cfg, j as u64)?;
                let pred: Vec<usize> = f.predict(&xt).into_iter().map(|p| p as usize).collect();
                let score = macro_f1(yt, &pred)?;
                f1s.push(score);
                let single_level = y.iter().all(|&v| v == y[0]);
                MluColumn {
                    column: c.name.clone(),
                    score: Some(score),
                    skipped: 0,
                    single_level,
                }
            }
            _ => unreachable!("table storage follows the schema"),
        };
        columns.push(col);
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(Mlu {
        mape: mean(&mapes),
        f1: mean(&f1s),
        columns,
    })
}
