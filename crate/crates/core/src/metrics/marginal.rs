use crate::error::{Error, Result};

fn sorted(v: &[f64], what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain(format!("{what} sample is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "{what} sample has non-finite values"
        )));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a, "first")?, sorted(b, "second")?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// `int_0^1 |F_a^{-1}(u) - F_b^{-1}(u)| du`, integrated exactly over the
/// merged breakpoints `k / n_a` and `l / n_b`.
pub fn w1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a, "first")?, sorted(b, "second")?);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        // compare (i+1)/na with (j+1)/nb without rounding
        let (ka, kb) = ((i + 1) * nb, (j + 1) * na);
        let next = if ka <= kb {
            (i + 1) as f64 / na as f64
        } else {
            (j + 1) as f64 / nb as f64
        };
        total += (next - prev) * (a[i] - b[j]).abs();
        prev = next;
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    Ok(total)
}
