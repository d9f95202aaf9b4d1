//! Closed-form Cramer-Wold distances between sample batches.
//!
//! Three distances share one pairwise-sum engine:
//!
//! * [`cw_distance_sq`]: projections averaged over the uniform sphere,
//! * [`marginal_cw_sq`]: projections onto the coordinate axes only,
//! * [`mix_cw_distance_sq`]: `pi * marginal + (1 - pi) * sphere`.
//!
//! Each has a `_grad` variant returning gradients w.r.t. both batches; the
//! model loss registers those on the tape as a single scalar op.
//!
//! Pair sums run over fixed 32-row chunks in parallel and are reduced in chunk
//! order, so results do not depend on the thread count.

mod distance;
mod kernels;

pub use distance::{
    cw_distance_sq, cw_distance_sq_grad, marginal_cw_sq, marginal_cw_sq_grad, mix_cw_distance_sq,
    mix_cw_distance_sq_grad, Bandwidth, DimKind, DistanceGrad, MixDistance, MixtureMeasureConfig,
    SampleBatch,
};
pub(crate) use distance::{cw_grad_impl, mix_impl, Want};
pub use kernels::{phi_d, psi_d, psi_d_abramowitz_stegun, silverman_gamma};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::stream;
    use crate::numerics::Tensor;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(seed: u64, n: usize, d: usize, shift: f64) -> Tensor {
        let mut r = stream(seed, &[]);
        let data = (0..n * d)
            .map(|_| r.sample::<f64, _>(StandardNormal) + shift)
            .collect();
        Tensor::matrix(n, d, data).unwrap()
    }

    fn batch(t: &Tensor) -> SampleBatch<'_> {
        SampleBatch::new(t).unwrap()
    }

    /// Independent 1-D smoothed L2 distance between two samples.
    fn cw_1d(a: &[f64], b: &[f64], gamma: f64) -> f64 {
        let k =
            |u: f64| (-(u * u) / (4.0 * gamma)).exp() / (4.0 * std::f64::consts::PI * gamma).sqrt();
        let n = a.len() as f64;
        let mut aa = 0.0;
        let mut bb = 0.0;
        let mut ab = 0.0;
        for &p in a {
            for &q in a {
                aa += k(p - q);
            }
            for &q in b {
                ab += k(p - q);
            }
        }
        for &p in b {
            for &q in b {
                bb += k(p - q);
            }
        }
        (aa + bb - 2.0 * ab) / (n * n)
    }

    fn column(t: &Tensor, j: usize) -> Vec<f64> {
        (0..t.rows()).map(|i| t.get(i, j)).collect()
    }

    #[test]
    fn identical_batches_give_zero() {
        let x = gaussian(1, 12, 5, 0.0);
        let g = 0.3;
        assert_eq!(
            cw_distance_sq(&batch(&x), &batch(&x), g, DimKind::Data).unwrap(),
            0.0
        );
        assert_eq!(
            marginal_cw_sq(&batch(&x), &batch(&x), &[0.2; 5], g).unwrap(),
            0.0
        );
        let cfg = MixtureMeasureConfig::uniform(0.4, 5, Bandwidth::Fixed(g)).unwrap();
        assert_eq!(
            mix_cw_distance_sq(&batch(&x), &batch(&x), &cfg).unwrap(),
            0.0
        );
        let z = gaussian(2, 12, 2, 0.0);
        assert_eq!(
            cw_distance_sq(&batch(&z), &batch(&z), g, DimKind::Latent).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_point_marginal_collapses_to_formula() {
        // duplicated rows smooth to the same measure as a single point
        let gamma = 0.37;
        for a in [0.0, 0.4, 1.3, -2.0] {
            let x = Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap();
            let y = Tensor::matrix(2, 1, vec![a, a]).unwrap();
            let got = marginal_cw_sq(&batch(&x), &batch(&y), &[1.0], gamma).unwrap();
            let expect = 2.0 * (1.0 - (-a * a / (4.0 * gamma)).exp())
                / (4.0 * std::f64::consts::PI * gamma).sqrt();
            assert!((got - expect).abs() < 1e-15, "a={a}: {got} vs {expect}");
        }
    }

    #[test]
    fn marginal_equals_weighted_per_column_oracle() {
        let x = gaussian(3, 8, 3, 0.0);
        let y = gaussian(4, 8, 3, 0.5);
        let alphas = [0.2, 0.5, 0.3];
        let gamma = 0.4;
        let got = marginal_cw_sq(&batch(&x), &batch(&y), &alphas, gamma).unwrap();
        let expect: f64 = (0..3)
            .map(|j| alphas[j] * cw_1d(&column(&x, j), &column(&y, j), gamma))
            .sum();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn line_kernel_for_one_column_matches_marginal() {
        // on R^1 the sphere is {-1, +1}, so joint and marginal coincide
        let x = gaussian(5, 9, 1, 0.0);
        let y = gaussian(6, 9, 1, 1.0);
        let j = cw_distance_sq(&batch(&x), &batch(&y), 0.2, DimKind::Data).unwrap();
        let m = marginal_cw_sq(&batch(&x), &batch(&y), &[1.0], 0.2).unwrap();
        assert!((j - m).abs() < 1e-14);
    }

    #[test]
    fn mixture_endpoints_and_midpoint() {
        let x = gaussian(7, 10, 4, 0.0);
        let y = gaussian(8, 10, 4, 0.3);
        let g = 0.25;
        let (bx, by) = (batch(&x), batch(&y));
        let joint = cw_distance_sq(&bx, &by, g, DimKind::Data).unwrap();
        let marg = marginal_cw_sq(&bx, &by, &[0.25; 4], g).unwrap();
        let at = |pi| {
            let cfg = MixtureMeasureConfig::uniform(pi, 4, Bandwidth::Fixed(g)).unwrap();
            mix_cw_distance_sq(&bx, &by, &cfg).unwrap()
        };
        assert_eq!(at(0.0), joint);
        assert_eq!(at(1.0), marg);
        assert!((at(0.5) - 0.5 * (joint + marg)).abs() < 1e-12);
    }

    #[test]
    fn contract_errors() {
        let x = gaussian(1, 4, 3, 0.0);
        let y = gaussian(2, 5, 3, 0.0);
        let w = gaussian(3, 4, 2, 0.0);
        assert!(matches!(
            cw_distance_sq(&batch(&x), &batch(&y), 0.1, DimKind::Data),
            Err(crate::Error::Contract(_))
        ));
        assert!(matches!(
            cw_distance_sq(&batch(&x), &batch(&w), 0.1, DimKind::Data),
            Err(crate::Error::Contract(_))
        ));
        assert!(matches!(
            cw_distance_sq(&batch(&x), &batch(&x), 0.1, DimKind::Latent),
            Err(crate::Error::Config(_))
        ));
        let one = Tensor::zeros(1, 3);
        assert!(SampleBatch::new(&one).is_err());
        assert!(MixtureMeasureConfig::new(0.5, vec![0.5, 0.6], Bandwidth::Silverman).is_err());
        assert!(MixtureMeasureConfig::new(1.5, vec![1.0], Bandwidth::Silverman).is_err());
        assert!(cw_distance_sq(&batch(&x), &batch(&x), 0.0, DimKind::Data).is_err());
    }

    fn fd_check(f: impl Fn(&Tensor) -> f64, y: &Tensor, analytic: &Tensor) {
        let h = 1e-5;
        for i in 0..y.len() {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp.data_mut()[i] += h;
            ym.data_mut()[i] -= h;
            let fd = (f(&yp) - f(&ym)) / (2.0 * h);
            let a = analytic.data()[i];
            let err = (fd - a).abs();
            assert!(
                err <= 1e-4 * fd.abs().max(a.abs()) || err < 1e-9,
                "index {i}: fd {fd} vs analytic {a}"
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = gaussian(11, 6, 3, 0.0);
        let y = gaussian(12, 6, 3, 0.4);
        let g = 0.3;

        let joint = cw_distance_sq_grad(&batch(&x), &batch(&y), g, DimKind::Data).unwrap();
        fd_check(
            |t| cw_distance_sq(&batch(&x), &batch(t), g, DimKind::Data).unwrap(),
            &y,
            &joint.grad_y,
        );
        fd_check(
            |t| cw_distance_sq(&batch(t), &batch(&y), g, DimKind::Data).unwrap(),
            &x,
            &joint.grad_x,
        );

        let al = [0.5, 0.25, 0.25];
        let marg = marginal_cw_sq_grad(&batch(&x), &batch(&y), &al, g).unwrap();
        fd_check(
            |t| marginal_cw_sq(&batch(&x), &batch(t), &al, g).unwrap(),
            &y,
            &marg.grad_y,
        );

        let cfg = MixtureMeasureConfig::new(0.3, al.to_vec(), Bandwidth::Fixed(g)).unwrap();
        let mix = mix_cw_distance_sq_grad(&batch(&x), &batch(&y), &cfg).unwrap();
        fd_check(
            |t| mix_cw_distance_sq(&batch(&x), &batch(t), &cfg).unwrap(),
            &y,
            &mix.grad_y,
        );

        let zx = gaussian(13, 6, 2, 0.0);
        let zy = gaussian(14, 6, 2, 0.2);
        let lat = cw_distance_sq_grad(&batch(&zx), &batch(&zy), 0.1, DimKind::Latent).unwrap();
        fd_check(
            |t| cw_distance_sq(&batch(&zx), &batch(t), 0.1, DimKind::Latent).unwrap(),
            &zy,
            &lat.grad_y,
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn symmetric_permutation_invariant_nonnegative(
            seed in 0u64..10_000,
            n in 2usize..12,
            d in 1usize..6,
            pi in 0.0f64..=1.0,
            shift in -1.0f64..1.0,
        ) {
            let x = gaussian(seed, n, d, 0.0);
            let y = gaussian(seed + 1, n, d, shift);
            let cfg = MixtureMeasureConfig::uniform(pi, d, Bandwidth::Silverman).unwrap();
            let g = silverman_gamma(n).unwrap();
            let f = |a: &Tensor, b: &Tensor| {
                (
                    cw_distance_sq(&batch(a), &batch(b), g, DimKind::Data).unwrap(),
                    marginal_cw_sq(&batch(a), &batch(b), &cfg.alphas, g).unwrap(),
                    mix_cw_distance_sq(&batch(a), &batch(b), &cfg).unwrap(),
                )
            };
            let (j, m, mx) = f(&x, &y);
            let (j2, m2, mx2) = f(&y, &x);
            prop_assert!((j - j2).abs() < 1e-12 && (m - m2).abs() < 1e-12 && (mx - mx2).abs() < 1e-12);
            prop_assert!(j >= -1e-12 && m >= -1e-12 && mx >= -1e-12);
            prop_assert!((mx - (pi * m + (1.0 - pi) * j)).abs() < 1e-12);

            let mut idx: Vec<usize> = (0..n).collect();
            idx.reverse();
            idx.rotate_left(seed as usize % n);
            let (j3, m3, mx3) = f(&x.select_rows(&idx), &y);
            prop_assert!((j - j3).abs() < 1e-12 && (m - m3).abs() < 1e-12 && (mx - mx3).abs() < 1e-12);
        }
    }
}
