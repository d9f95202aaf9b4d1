use rayon::prelude::*;

use crate::data::{Standardizer, Table};
use crate::error::{Error, Result};
use crate::heads::argmax;
use crate::metrics::utility::macro_f1;
use crate::numerics::Tensor;

pub const DCR_PERCENTILE: f64 = 5.0;
pub const DISCLOSURE_K: [usize; 3] = [1, 10, 100];

/// `q`-th percentile with linear interpolation between order statistics
/// (position `q / 100 * (n - 1)`).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Domain(format!("percentile {q} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Mean and standard deviation of `real`'s continuous columns; a constant
/// column keeps unit scale.
pub fn reference_stats(real: &Table) -> Result<Standardizer> {
    if real.rows() == 0 {
        return Err(Error::Domain("reference table is empty".into()));
    }
    let (mut means, mut stds) = (Vec::new(), Vec::new());
    for j in real.schema().continuous_indices() {
        let v = real.numeric(j);
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
        means.push(m);
        stds.push(if s > 0.0 { s } else { 1.0 });
    }
    Ok(Standardizer { means, stds })
}

/// Standardized continuous columns as `[n, |I_c|]`.
pub fn continuous_matrix(t: &Table, stats: &Standardizer) -> Result<Tensor> {
    let idx = t.schema().continuous_indices();
    if idx.len() != stats.len() {
        return Err(Error::Contract(
            "statistics do not match the continuous columns".into(),
        ));
    }
    let n = t.rows();
    let mut data = Vec::with_capacity(n * idx.len());
    for i in 0..n {
        for (c, &j) in idx.iter().enumerate() {
            data.push((t.numeric(j)[i] - stats.means[c]) / stats.stds[c]);
        }
    }
    Tensor::matrix(n, idx.len(), data)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DcrMode {
    /// Each synthetic row's distance to its nearest real row.
    #[default]
    Nearest,
    /// Every real-synthetic pair.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dcr {
    pub rs: f64,
    /// Absent with fewer than two synthetic rows.
    pub ss: Option<f64>,
}

/// Fifth percentiles of real-to-synthetic and synthetic-to-synthetic
/// nearest-record distances.
pub fn dcr(real: &Tensor, synth: &Tensor, mode: DcrMode) -> Result<Dcr> {
    if real.rows() == 0 || synth.rows() == 0 {
        return Err(Error::Domain(
            "DCR needs non-empty real and synthetic samples".into(),
        ));
    }
    if real.cols() != synth.cols() {
        return Err(Error::Contract("DCR inputs differ in width".into()));
    }
    let rs_dists: Vec<f64> = match mode {
        DcrMode::Nearest => (0..synth.rows())
            .into_par_iter()
            .map(|s| {
                (0..real.rows())
                    .map(|r| dist(synth.row(s), real.row(r)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
        DcrMode::AllPairs => (0..synth.rows())
            .into_par_iter()
            .flat_map_iter(|s| (0..real.rows()).map(move |r| dist(synth.row(s), real.row(r))))
            .collect(),
    };
    let ss = if synth.rows() < 2 {
        None
    } else {
        let d: Vec<f64> = (0..synth.rows())
            .into_par_iter()
            .map(|s| {
                (0..synth.rows())
                    .filter(|&o| o != s)
                    .map(|o| dist(synth.row(s), synth.row(o)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Some(percentile(&d, DCR_PERCENTILE)?)
    };
    Ok(Dcr {
        rs: percentile(&rs_dists, DCR_PERCENTILE)?,
        ss,
    })
}

/// Attribute disclosure macro F1 for each `k`: every real record's discrete
/// attributes are guessed by majority vote (ties to the lowest level) over its
/// `k` nearest synthetic records in standardized continuous space. Entries are
/// `None` without discrete columns or when `k` exceeds the synthetic rows.
pub fn attribute_disclosure(real: &Table, synth: &Table, ks: &[usize]) -> Result<Vec<Option<f64>>> {
    if real.schema() != synth.schema() {
        return Err(Error::Contract(
            "attribute disclosure needs tables with the same schema".into(),
        ));
    }
    let discrete = real.schema().discrete_indices();
    let usable: Vec<usize> = ks
        .iter()
        .copied()
        .filter(|&k| k >= 1 && k <= synth.rows())
        .collect();
    if discrete.is_empty() || real.rows() == 0 || usable.is_empty() {
        return Ok(vec![None; ks.len()]);
    }
    let stats = reference_stats(real)?;
    let (xr, xs) = (
        continuous_matrix(real, &stats)?,
        continuous_matrix(synth, &stats)?,
    );
    let kmax = *usable.iter().max().expect("non-empty");
    // k nearest synthetic rows per real row, ordered by (distance, index)
    let neighbours: Vec<Vec<usize>> = (0..real.rows())
        .into_par_iter()
        .map(|r| {
            let mut d: Vec<(f64, usize)> = (0..synth.rows())
                .map(|s| (dist(xr.row(r), xs.row(s)), s))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kmax < d.len() {
                d.select_nth_unstable_by(kmax - 1, cmp);
                d.truncate(kmax);
            }
            d.sort_by(cmp);
            d.into_iter().map(|(_, s)| s).collect()
        })
        .collect();
    ks.iter()
        .map(|&k| {
            if !usable.contains(&k) {
                return Ok(None);
            }
            let mut total = 0.0;
            for &j in &discrete {
                let levels = real.schema().columns()[j]
                    .levels()
                    .map_or(0, <[String]>::len);
                let (truth, guess) = (real.categorical(j), synth.categorical(j));
                let pred: Vec<usize> = neighbours
                    .iter()
                    .map(|nb| {
                        let mut votes = vec![0.0; levels];
                        for &s in &nb[..k] {
                            votes[guess[s]] += 1.0;
                        }
                        argmax(&votes)
                    })
                    .collect();
                total += macro_f1(truth, &pred)?;
            }
            Ok(Some(total / discrete.len() as f64))
        })
        .collect()
}
