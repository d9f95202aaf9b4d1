//! Radial kernels of the closed-form sphere integral.
//!
//! For a difference vector `u` and bandwidth `gamma`, integrating the 1-D
//! Gaussian cross term over the unit sphere in `R^D` gives
//! `1F1(1/2; D/2; -s)` with `s = |u|^2 / (4 gamma)`. In the plane this is
//! `exp(-s/2) I0(s/2)` exactly; in higher dimension the asymptotic form
//! `(1 + 4s/(2D - 3))^{-1/2}` is used.

use crate::error::{Error, Result};

/// Asymptotic sphere kernel `(1 + 4s/(2D-3))^{-1/2}`.
pub fn phi_d(s: f64, dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::Domain(format!("phi_D needs D >= 2, got {dim}")));
    }
    if s.is_nan() || s < 0.0 {
        return Err(Error::Domain(format!("phi_D needs s >= 0, got {s}")));
    }
    Ok(RadialKernel::sphere(dim).eval(s).0)
}

/// Planar kernel `exp(-s/2) I0(s/2)`.
pub fn psi_d(s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::Domain(format!("psi_d needs s >= 0, got {s}")));
    }
    Ok(planar(s).0)
}

/// `exp(-s/2) I0(s/2)` using only the Abramowitz & Stegun 9.8.1/9.8.2
/// polynomials. Its relative error reaches 3e-7 near s = 100, so the
/// crate uses [`psi_d`] instead.
pub fn psi_d_abramowitz_stegun(s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::Domain(format!("psi_d needs s >= 0, got {s}")));
    }
    let x = 0.5 * s;
    Ok(if x <= SMALL_BRANCH {
        small_branch(x).0
    } else {
        polynomial_tail(x).0
    })
}

/// Silverman rule-of-thumb bandwidth `(4 / (3n))^{2/5}`.
pub fn silverman_gamma(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "silverman bandwidth needs n >= 2, got {n}"
        )));
    }
    Ok((4.0 / (3.0 * n as f64)).powf(0.4))
}

/// Kernel `k(s)` and its derivative `k'(s)` for a fixed ambient dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum RadialKernel {
    /// `(1 + c s)^{-1/2}` with `c = 4/(2D-3)`.
    Sphere { c: f64 },
    /// `exp(-s/2) I0(s/2)`.
    Planar,
    /// `exp(-s)`: the "sphere" of R^1 is {-1, +1}.
    Line,
}

impl RadialKernel {
    pub(crate) fn sphere(dim: usize) -> Self {
        debug_assert!(dim >= 2);
        RadialKernel::Sphere {
            c: 4.0 / (2.0 * dim as f64 - 3.0),
        }
    }

    #[inline]
    pub(crate) fn eval(self, s: f64) -> (f64, f64) {
        match self {
            RadialKernel::Sphere { c } => {
                let inv = 1.0 / (1.0 + c * s);
                let v = inv.sqrt();
                (v, -0.5 * c * v * inv)
            }
            RadialKernel::Planar => planar(s),
            RadialKernel::Line => {
                let v = (-s).exp();
                (v, -v)
            }
        }
    }
}

const SMALL_BRANCH: f64 = 3.75;
const HANKEL_BRANCH: f64 = 30.0;

/// `(psi, dpsi/ds)` for `psi(s) = exp(-x) I0(x)`, `x = s/2`.
#[inline]
fn planar(s: f64) -> (f64, f64) {
    let x = 0.5 * s;
    let (v, dx) = if x <= SMALL_BRANCH {
        small_branch(x)
    } else if x <= HANKEL_BRANCH {
        polynomial_tail(x)
    } else {
        hankel_tail(x)
    };
    (v, 0.5 * dx)
}

// A&S 9.8.1: I0(x) = P((x/3.75)^2) for |x| <= 3.75.
#[inline]
fn small_branch(x: f64) -> (f64, f64) {
    const P: [f64; 7] = [
        1.0, 3.5156229, 3.0899424, 1.2067492, 0.2659732, 0.0360768, 0.0045813,
    ];
    let t = (x / SMALL_BRANCH) * (x / SMALL_BRANCH);
    let mut p = 0.0;
    let mut dp = 0.0;
    for (k, &c) in P.iter().enumerate().rev() {
        p = p * t + c;
        if k > 0 {
            dp = dp * t + k as f64 * c;
        }
    }
    // dp currently holds dP/dt; chain through t = (x/3.75)^2
    let dp_dx = dp * 2.0 * x / (SMALL_BRANCH * SMALL_BRANCH);
    let e = (-x).exp();
    (e * p, e * (dp_dx - p))
}

// A&S 9.8.2: sqrt(x) e^{-x} I0(x) = Q(3.75/x) for x >= 3.75.
#[inline]
fn polynomial_tail(x: f64) -> (f64, f64) {
    const Q: [f64; 9] = [
        0.39894228,
        0.01328592,
        0.00225319,
        -0.00157565,
        0.00916281,
        -0.02057706,
        0.02635537,
        -0.01647633,
        0.00392377,
    ];
    let u = SMALL_BRANCH / x;
    let mut q = 0.0;
    let mut dq = 0.0;
    for (k, &c) in Q.iter().enumerate().rev() {
        q = q * u + c;
        if k > 0 {
            dq = dq * u + k as f64 * c;
        }
    }
    let rs = 1.0 / x.sqrt();
    let v = q * rs;
    let dv = dq * (-SMALL_BRANCH / (x * x)) * rs - 0.5 * v / x;
    (v, dv)
}

// e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k a_k x^{-k}, a_k = a_{k-1} (2k-1)^2 / (8k)
#[inline]
fn hankel_tail(x: f64) -> (f64, f64) {
    let inv_x = 1.0 / x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut dsum = 0.0;
    for k in 1..8 {
        let kf = k as f64;
        term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf) * inv_x;
        sum += term;
        dsum -= kf * term * inv_x;
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * x).sqrt();
    let v = sum * norm;
    (v, dsum * norm - 0.5 * v * inv_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// e^{-x} I0(x) by the positive-term power series sum (x/2)^{2k} / (k!)^2.
    fn series_psi(s: f64) -> f64 {
        let x = 0.5 * s;
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > sum * 1e-18 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    }

    #[test]
    fn phi_at_zero_is_one() {
        assert_eq!(phi_d(0.0, 25).unwrap(), 1.0);
    }

    #[test]
    fn phi_half_power_point() {
        // 4s/(2D-3) = 1 at s = 47/4 for D = 25
        let v = phi_d(47.0 / 4.0, 25).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn phi_rejects_low_dimension() {
        assert!(phi_d(1.0, 1).is_err());
        assert!(phi_d(-1.0, 5).is_err());
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi_d(0.0).unwrap(), 1.0);
        // e^{-1} I0(1), I0(1) = 1.2660658777520082
        let expect = (-1.0f64).exp() * 1.266_065_877_752_008_2;
        assert!((psi_d(2.0).unwrap() - expect).abs() / expect < 1e-7);
        assert!(psi_d(-0.5).is_err());
    }

    #[test]
    fn psi_matches_series_at_spot_points() {
        for s in [0.1, 1.0, 10.0, 100.0] {
            let exact = series_psi(s);
            let got = psi_d(s).unwrap();
            assert!(
                (got / exact - 1.0).abs() <= 2e-7,
                "s = {s}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn abramowitz_stegun_form_within_its_absolute_bound() {
        // A&S bounds: 1.6e-7 on I0 (small x), 1.9e-7 on sqrt(x)e^{-x}I0 (large x)
        for i in 0..=2000 {
            let s = i as f64 * 0.05;
            let x = 0.5 * s;
            let exact = series_psi(s);
            let got = psi_d_abramowitz_stegun(s).unwrap();
            if x <= 3.75 {
                assert!((got - exact).abs() * x.exp() <= 1.6e-7);
            } else {
                assert!((got - exact).abs() * x.sqrt() <= 1.9e-7);
            }
        }
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let kernels = [
            RadialKernel::sphere(2),
            RadialKernel::sphere(25),
            RadialKernel::Planar,
            RadialKernel::Line,
        ];
        for k in kernels {
            for s in [0.01, 0.5, 3.0, 7.4, 7.6, 20.0, 59.0, 61.0, 150.0] {
                let h = 1e-6;
                let fd = (k.eval(s + h).0 - k.eval(s - h).0) / (2.0 * h);
                let an = k.eval(s).1;
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1e-10),
                    "{k:?} s={s}: fd {fd} an {an}"
                );
            }
        }
    }

    #[test]
    fn silverman_values() {
        let g = silverman_gamma(1333).unwrap();
        assert_eq!(g, (4.0f64 / 3999.0).powf(0.4));
        let g = silverman_gamma(1024).unwrap();
        assert!((g - 0.001_302_083_333_333_333_3f64.powf(0.4)).abs() < 1e-15);
        assert!(silverman_gamma(1).is_err());
        let mut prev = f64::INFINITY;
        for n in (2..100_000).step_by(997) {
            let g = silverman_gamma(n).unwrap();
            assert!(g < prev);
            prev = g;
        }
    }
}
