use rand::Rng;
use rayon::prelude::*;

use crate::data::{ColumnData, Table};
use crate::error::{Error, Result};
use crate::numerics::rng::{purpose, stream};
use crate::numerics::Tensor;

pub const DEFAULT_CLUSTERS: usize = 20;
pub const LOG_CLUSTER_FLOOR: f64 = 1e-12;
const CENTER: f64 = 0.5;

/// Columns as plain numbers: continuous values as-is, discrete columns as
/// one-hot coordinates. Returns the columns and their labels.
pub fn numeric_columns(t: &Table) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut cols = Vec::new();
    let mut names = Vec::new();
    for (j, c) in t.schema().columns().iter().enumerate() {
        match (t.column(j), c.levels()) {
            (ColumnData::Numeric(v), _) => {
                cols.push(v.clone());
                names.push(c.name.clone());
            }
            (ColumnData::Categorical(v), Some(levels)) => {
                for (l, level) in levels.iter().enumerate() {
                    cols.push(v.iter().map(|&x| f64::from(u8::from(x == l))).collect());
                    names.push(format!("{}={level}", c.name));
                }
            }
            (ColumnData::Categorical(_), None) => unreachable!("table storage follows the schema"),
        }
    }
    (cols, names)
}

/// Pearson correlation matrix (row-major). Columns with zero variance get
/// correlation 0 with every other column and 1 with themselves; their
/// indices are returned alongside.
pub fn correlation_matrix(cols: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<usize>)> {
    let p = cols.len();
    let n = cols.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::Domain(format!(
            "correlation needs at least 2 rows, got {n}"
        )));
    }
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|x| x - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centred
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let flat: Vec<usize> = (0..p).filter(|&i| norms[i] == 0.0).collect();
    let mut r = vec![0.0; p * p];
    for i in 0..p {
        r[i * p + i] = 1.0;
        if norms[i] == 0.0 {
            continue;
        }
        for j in i + 1..p {
            if norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let v = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            r[i * p + j] = v;
            r[j * p + i] = v;
        }
    }
    Ok((r, flat))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pcd {
    pub value: f64,
    /// Encoded columns that had zero variance in either table.
    pub degenerate: Vec<String>,
}

/// Frobenius norm of the difference of the two correlation matrices.
pub fn pcd(real: &Table, synth: &Table) -> Result<Pcd> {
    if real.schema() != synth.schema() {
        return Err(Error::Contract(
            "pcd needs two tables with the same schema".into(),
        ));
    }
    let (rc, names) = numeric_columns(real);
    let (sc, _) = numeric_columns(synth);
    let (a, fa) = correlation_matrix(&rc)?;
    let (b, fb) = correlation_matrix(&sc)?;
    let value = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let mut flat: Vec<usize> = fa.into_iter().chain(fb).collect();
    flat.sort_unstable();
    flat.dedup();
    Ok(Pcd {
        value,
        degenerate: flat.into_iter().map(|i| names[i].clone()).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the summed squared centroid movement falls to this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Tensor,
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties go to the lower index.
fn nearest(x: &[f64], centroids: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(x: &Tensor, k: usize, seed: u64) -> Tensor {
    let n = x.rows();
    let mut rng = stream(seed, &[purpose::KMEANS]);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| x.row(i).to_vec()).collect();
    Tensor::from_rows(&rows).expect("centroid rows")
}

/// Lloyd's algorithm from a k-means++ start. An empty cluster is re-seeded
/// at the point farthest from its current centroid.
pub fn kmeans(x: &Tensor, cfg: &KMeansConfig) -> Result<KMeans> {
    let (n, p) = (x.rows(), x.cols());
    if cfg.k == 0 || n < cfg.k {
        return Err(Error::Domain(format!(
            "k-means needs at least k = {} rows, got {n}",
            cfg.k
        )));
    }
    if !x.is_finite() {
        return Err(Error::Domain("k-means input has non-finite values".into()));
    }
    let mut centroids = plus_plus(x, cfg.k, cfg.seed);
    let mut labels = vec![0; n];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let assign: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(x.row(i), &centroids))
            .collect();
        let mut sums = vec![0.0; cfg.k * p];
        let mut counts = vec![0usize; cfg.k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            labels[i] = c;
            counts[c] += 1;
            for (s, v) in sums[c * p..(c + 1) * p].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut next = Tensor::zeros(cfg.k, p);
        let mut far: Vec<usize> = (0..n).collect();
        // farthest first; ties by index
        far.sort_by(|&a, &b| assign[b].1.total_cmp(&assign[a].1).then(a.cmp(&b)));
        let mut far = far.into_iter();
        for c in 0..cfg.k {
            if counts[c] == 0 {
                let i = far.next().expect("n >= k");
                next.row_mut(c).copy_from_slice(x.row(i));
            } else {
                for (t, s) in next.row_mut(c).iter_mut().zip(&sums[c * p..(c + 1) * p]) {
                    *t = s / counts[c] as f64;
                }
            }
        }
        let shift: f64 = (0..cfg.k)
            .map(|c| sq_dist(next.row(c), centroids.row(c)))
            .sum();
        centroids = next;
        if shift <= cfg.tol {
            break;
        }
    }
    for (i, l) in labels.iter_mut().enumerate() {
        *l = nearest(x.row(i), &centroids).0;
    }
    Ok(KMeans {
        centroids,
        labels,
        iterations,
    })
}

/// `log(mean_i (n_i^R / n_i - c)^2)` over the non-empty clusters of a joint
/// k-means fit, floored at `1e-12` inside the log.
pub fn log_cluster(real: &Tensor, synth: &Tensor, clusters: usize, seed: u64) -> Result<f64> {
    if real.rows() == 0 || synth.rows() == 0 {
        return Err(Error::Domain(
            "log-cluster needs both samples non-empty".into(),
        ));
    }
    if real.cols() != synth.cols() {
        return Err(Error::Contract("log-cluster inputs differ in width".into()));
    }
    let n = real.rows() + synth.rows();
    if n < clusters {
        return Err(Error::Domain(format!(
            "log-cluster needs at least {clusters} merged rows, got {n}"
        )));
    }
    // cluster in lexicographic row order so the fit ignores which side is real
    let row = |i: usize| {
        if i < real.rows() {
            real.row(i)
        } else {
            synth.row(i - real.rows())
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        row(a)
            .iter()
            .zip(row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let data = order.iter().flat_map(|&i| row(i).iter().copied()).collect();
    let merged = Tensor::matrix(n, real.cols(), data)?;
    let fit = kmeans(&merged, &KMeansConfig::new(clusters, seed))?;
    let mut from_real = vec![0usize; clusters];
    let mut total = vec![0usize; clusters];
    for (&i, &l) in order.iter().zip(&fit.labels) {
        total[l] += 1;
        if i < real.rows() {
            from_real[l] += 1;
        }
    }
    let (sum, used) = from_real.iter().zip(&total).filter(|(_, &t)| t > 0).fold(
        (0.0, 0usize),
        |(s, k), (&r, &t)| {
            let d = r as f64 / t as f64 - CENTER;
            (s + d * d, k + 1)
        },
    );
    Ok((sum / used as f64).max(LOG_CLUSTER_FLOOR).ln())
}
