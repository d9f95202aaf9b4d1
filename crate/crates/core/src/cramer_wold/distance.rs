use rayon::prelude::*;

use crate::cramer_wold::kernels::{silverman_gamma, RadialKernel};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Borrowed `n x D` sample matrix.
#[derive(Clone, Copy, Debug)]
pub struct SampleBatch<'a> {
    data: &'a [f64],
    rows: usize,
    dim: usize,
}

impl<'a> SampleBatch<'a> {
    pub fn new(t: &'a Tensor) -> Result<Self> {
        Self::from_slice(t.data(), t.rows(), t.cols())
    }

    pub fn from_slice(data: &'a [f64], rows: usize, dim: usize) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Contract(format!(
                "batch of {rows} x {dim} needs {} values, got {}",
                rows * dim,
                data.len()
            )));
        }
        if rows < 2 {
            return Err(Error::Contract(format!(
                "pairwise kernel sums need at least 2 rows, got {rows}"
            )));
        }
        if dim == 0 {
            return Err(Error::Contract("batch has zero columns".into()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("sample batch".into()));
        }
        Ok(Self { data, rows, dim })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Which closed form the joint (sphere) term uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimKind {
    /// Observation space, asymptotic sphere kernel.
    Data,
    /// Two-dimensional latent space, exact planar kernel.
    Latent,
}

/// Kernel bandwidth: fixed, or Silverman's rule on the batch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Silverman,
}

impl Bandwidth {
    pub fn resolve(self, n: usize) -> Result<f64> {
        match self {
            Bandwidth::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
            Bandwidth::Fixed(g) => Err(Error::Config(format!("gamma must be positive, got {g}"))),
            Bandwidth::Silverman => silverman_gamma(n),
        }
    }
}

/// Parameters of the mixture integral measure: weight `pi` on point masses at
/// the coordinate axes (each axis weighted by `alphas[j]`), `1 - pi` on the
/// uniform sphere measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureMeasureConfig {
    pub pi: f64,
    pub alphas: Vec<f64>,
    pub gamma: Bandwidth,
}

impl MixtureMeasureConfig {
    pub fn new(pi: f64, alphas: Vec<f64>, gamma: Bandwidth) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::Config(format!("pi must lie in [0, 1], got {pi}")));
        }
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Config("every alpha must lie in (0, 1]".into()));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("alphas must sum to 1, got {sum}")));
        }
        if let Bandwidth::Fixed(g) = gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(Self { pi, alphas, gamma })
    }

    /// Equal axis weights `1/D`.
    pub fn uniform(pi: f64, dim: usize, gamma: Bandwidth) -> Result<Self> {
        Self::new(pi, vec![1.0 / dim as f64; dim], gamma)
    }
}

/// A distance value with its gradients w.r.t. both batches.
#[derive(Clone, Debug)]
pub struct DistanceGrad {
    pub value: f64,
    pub grad_x: Tensor,
    pub grad_y: Tensor,
}

/// Components of the mixture distance.
#[derive(Clone, Debug)]
pub struct MixDistance {
    pub value: f64,
    pub marginal: f64,
    pub joint: f64,
    pub grad_x: Tensor,
    pub grad_y: Tensor,
}

fn check_pair(x: &SampleBatch, y: &SampleBatch) -> Result<()> {
    if x.rows != y.rows {
        return Err(Error::Contract(format!(
            "batches have {} and {} rows",
            x.rows, y.rows
        )));
    }
    if x.dim != y.dim {
        return Err(Error::Contract(format!(
            "batches have widths {} and {}",
            x.dim, y.dim
        )));
    }
    Ok(())
}

fn joint_kernel(dim: usize, kind: DimKind) -> Result<RadialKernel> {
    match kind {
        DimKind::Data if dim == 1 => Ok(RadialKernel::Line),
        DimKind::Data => Ok(RadialKernel::sphere(dim)),
        DimKind::Latent if dim == 2 => Ok(RadialKernel::Planar),
        DimKind::Latent => Err(Error::Config(format!(
            "latent-space closed form is implemented for d = 2 only, got d = {dim}"
        ))),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Shared normalisation `1 / (n^2 sqrt(4 pi gamma))` of both closed forms.
fn norm(n: usize, gamma: f64) -> f64 {
    1.0 / ((n * n) as f64 * (4.0 * std::f64::consts::PI * gamma).sqrt())
}

/// Which gradients a pass accumulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Want {
    Value,
    /// Gradient w.r.t. the second batch only.
    SecondGrad,
    BothGrads,
}

/// Which terms a pass accumulates and how gradients are weighted.
struct PassSpec<'k> {
    joint: Option<RadialKernel>,
    alphas: Option<&'k [f64]>,
    inv4g: f64,
    /// Scale of d(joint sum) in the returned gradient.
    w_joint: f64,
    /// Scale of d(marginal sum) in the returned gradient.
    w_marg: f64,
    want: Want,
}

const CHUNK: usize = 32;

struct ChunkOut {
    joint: f64,
    marginal: f64,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
}

impl PassSpec<'_> {
    /// Kernel values `(joint, marginal)` of the pair `(a, b)`. With `G`, also
    /// leaves the gradient w.r.t. `a` of the weighted pair term in `g`.
    #[inline(always)]
    fn pair<const G: bool>(&self, a: &[f64], b: &[f64], dim: usize, g: &mut [f64]) -> (f64, f64) {
        let (a, b, g) = (&a[..dim], &b[..dim], &mut g[..dim]);
        let mut sq = 0.0;
        for j in 0..dim {
            let d = a[j] - b[j];
            g[j] = d;
            sq += d * d;
        }
        let mut jv = 0.0;
        let mut jc = 0.0;
        if let Some(k) = self.joint {
            let (v, dv) = k.eval(sq * self.inv4g);
            jv = v;
            jc = self.w_joint * dv * 2.0 * self.inv4g;
        }
        let mut mv = 0.0;
        match self.alphas {
            Some(alphas) => {
                let alphas = &alphas[..dim];
                let wm = self.w_marg * 2.0 * self.inv4g;
                for j in 0..dim {
                    let d = g[j];
                    let e = alphas[j] * (-d * d * self.inv4g).exp();
                    mv += e;
                    if G {
                        g[j] = (jc - wm * e) * d;
                    }
                }
            }
            None => {
                if G {
                    for gj in g.iter_mut() {
                        *gj *= jc;
                    }
                }
            }
        }
        (jv, mv)
    }

    /// `sum_{l,k} [k(x_l - x_k) + k(y_l - y_k) - 2 k(x_l - y_k)]` for the joint
    /// and marginal kernels, visiting each unordered pair once. Every pair term
    /// is formed as `(2 k_xx + 2 k_yy) - 2 k_xy - 2 k_yx` so that it is exactly
    /// zero when the batches coincide.
    fn run(&self, x: &SampleBatch, y: &SampleBatch) -> ChunkOut {
        match (x.dim, self.want) {
            (1, Want::Value) => self.run_dim::<1, false, false>(x, y),
            (1, Want::SecondGrad) => self.run_dim::<1, true, false>(x, y),
            (1, Want::BothGrads) => self.run_dim::<1, true, true>(x, y),
            (2, Want::Value) => self.run_dim::<2, false, false>(x, y),
            (2, Want::SecondGrad) => self.run_dim::<2, true, false>(x, y),
            (2, Want::BothGrads) => self.run_dim::<2, true, true>(x, y),
            (3, Want::Value) => self.run_dim::<3, false, false>(x, y),
            (3, Want::SecondGrad) => self.run_dim::<3, true, false>(x, y),
            (3, Want::BothGrads) => self.run_dim::<3, true, true>(x, y),
            (4, Want::Value) => self.run_dim::<4, false, false>(x, y),
            (4, Want::SecondGrad) => self.run_dim::<4, true, false>(x, y),
            (4, Want::BothGrads) => self.run_dim::<4, true, true>(x, y),
            (_, Want::Value) => self.run_dim::<0, false, false>(x, y),
            (_, Want::SecondGrad) => self.run_dim::<0, true, false>(x, y),
            (_, Want::BothGrads) => self.run_dim::<0, true, true>(x, y),
        }
    }

    /// `D = 0` means the width is only known at run time.
    fn run_dim<const D: usize, const GY: bool, const GX: bool>(
        &self,
        x: &SampleBatch,
        y: &SampleBatch,
    ) -> ChunkOut {
        let n = x.rows;
        let dim = if D == 0 { x.dim } else { D };
        let (xd, yd) = (x.data, y.data);
        let alpha_sum = self.alphas.map_or(0.0, |a| a.iter().sum::<f64>());
        let buf = |on: bool| if on { vec![0.0; n * dim] } else { Vec::new() };

        let chunks: Vec<ChunkOut> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut out = ChunkOut {
                    joint: 0.0,
                    marginal: 0.0,
                    grad_x: buf(GX),
                    grad_y: buf(GY),
                };
                let mut scratch = vec![0.0; 6 * dim];
                let (gxx, rest) = scratch.split_at_mut(dim);
                let (gyy, rest) = rest.split_at_mut(dim);
                let (ga, rest) = rest.split_at_mut(dim);
                let (gb, rest) = rest.split_at_mut(dim);
                let (gxl, gyl) = rest.split_at_mut(dim);
                for l in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let xl = &xd[l * dim..(l + 1) * dim];
                    let yl = &yd[l * dim..(l + 1) * dim];
                    let (mut js, mut ms) = (0.0, 0.0);

                    let (jv, mv) = self.pair::<GY>(xl, yl, dim, ga);
                    js += 2.0 - 2.0 * jv;
                    ms += 2.0 * alpha_sum - 2.0 * mv;
                    for j in 0..dim {
                        gyl[j] = if GY { 2.0 * ga[j] } else { 0.0 };
                        gxl[j] = if GX { -2.0 * ga[j] } else { 0.0 };
                    }

                    for k in l + 1..n {
                        let xk = &xd[k * dim..(k + 1) * dim];
                        let yk = &yd[k * dim..(k + 1) * dim];
                        let (jxx, mxx) = self.pair::<GX>(xl, xk, dim, gxx);
                        let (jyy, myy) = self.pair::<GY>(yl, yk, dim, gyy);
                        let (ja, ma) = self.pair::<GY>(xl, yk, dim, ga);
                        let (jb, mb) = self.pair::<GY>(xk, yl, dim, gb);
                        js += (2.0 * jxx + 2.0 * jyy) - 2.0 * ja - 2.0 * jb;
                        ms += (2.0 * mxx + 2.0 * myy) - 2.0 * ma - 2.0 * mb;
                        if GY {
                            let gk = &mut out.grad_y[k * dim..(k + 1) * dim];
                            for j in 0..dim {
                                gyl[j] += 2.0 * (gyy[j] + gb[j]);
                                gk[j] += 2.0 * (ga[j] - gyy[j]);
                            }
                        }
                        if GX {
                            let gk = &mut out.grad_x[k * dim..(k + 1) * dim];
                            for j in 0..dim {
                                gxl[j] += 2.0 * (gxx[j] - ga[j]);
                                gk[j] -= 2.0 * (gxx[j] + gb[j]);
                            }
                        }
                    }
                    if GY {
                        for (t, v) in out.grad_y[l * dim..(l + 1) * dim]
                            .iter_mut()
                            .zip(gyl.iter())
                        {
                            *t += v;
                        }
                    }
                    if GX {
                        for (t, v) in out.grad_x[l * dim..(l + 1) * dim]
                            .iter_mut()
                            .zip(gxl.iter())
                        {
                            *t += v;
                        }
                    }
                    out.joint += js;
                    out.marginal += ms;
                }
                out
            })
            .collect();

        let mut total = ChunkOut {
            joint: 0.0,
            marginal: 0.0,
            grad_x: buf(GX),
            grad_y: buf(GY),
        };
        for c in chunks {
            total.joint += c.joint;
            total.marginal += c.marginal;
            for (t, v) in total.grad_x.iter_mut().zip(&c.grad_x) {
                *t += v;
            }
            for (t, v) in total.grad_y.iter_mut().zip(&c.grad_y) {
                *t += v;
            }
        }
        total
    }
}

/// Everything the three public distances need, from one pair pass.
struct Combined {
    joint: f64,
    marginal: f64,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn combined(
    x: &SampleBatch,
    y: &SampleBatch,
    joint: Option<RadialKernel>,
    alphas: Option<&[f64]>,
    gamma: f64,
    w_joint: f64,
    w_marg: f64,
    want: Want,
) -> Combined {
    let c = norm(x.rows, gamma);
    let spec = PassSpec {
        joint,
        alphas,
        inv4g: 1.0 / (4.0 * gamma),
        w_joint: w_joint * c,
        w_marg: w_marg * c,
        want,
    };
    let out = spec.run(x, y);
    Combined {
        joint: if joint.is_some() { c * out.joint } else { 0.0 },
        marginal: if alphas.is_some() {
            c * out.marginal
        } else {
            0.0
        },
        grad_x: out.grad_x,
        grad_y: out.grad_y,
    }
}

fn to_tensor(data: Vec<f64>, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, data).expect("gradient shape")
}

/// Closed-form Cramer-Wold distance over the uniform sphere measure.
pub fn cw_distance_sq(x: &SampleBatch, y: &SampleBatch, gamma: f64, kind: DimKind) -> Result<f64> {
    check_pair(x, y)?;
    check_gamma(gamma)?;
    let k = joint_kernel(x.dim, kind)?;
    Ok(combined(x, y, Some(k), None, gamma, 1.0, 0.0, Want::Value).joint)
}

pub fn cw_distance_sq_grad(
    x: &SampleBatch,
    y: &SampleBatch,
    gamma: f64,
    kind: DimKind,
) -> Result<DistanceGrad> {
    cw_grad_impl(x, y, gamma, kind, Want::BothGrads)
}

pub(crate) fn cw_grad_impl(
    x: &SampleBatch,
    y: &SampleBatch,
    gamma: f64,
    kind: DimKind,
    want: Want,
) -> Result<DistanceGrad> {
    check_pair(x, y)?;
    check_gamma(gamma)?;
    let k = joint_kernel(x.dim, kind)?;
    let c = combined(x, y, Some(k), None, gamma, 1.0, 0.0, want);
    Ok(DistanceGrad {
        value: c.joint,
        grad_x: if c.grad_x.is_empty() {
            Tensor::zeros(0, x.dim)
        } else {
            to_tensor(c.grad_x, x.rows, x.dim)
        },
        grad_y: to_tensor(c.grad_y, y.rows, y.dim),
    })
}

fn check_alphas(alphas: &[f64], dim: usize) -> Result<()> {
    if alphas.len() != dim {
        return Err(Error::Contract(format!(
            "{} axis weights for {dim} columns",
            alphas.len()
        )));
    }
    Ok(())
}

/// Axis-weighted sum of 1-D smoothed-density L2 distances.
pub fn marginal_cw_sq(x: &SampleBatch, y: &SampleBatch, alphas: &[f64], gamma: f64) -> Result<f64> {
    check_pair(x, y)?;
    check_gamma(gamma)?;
    check_alphas(alphas, x.dim)?;
    Ok(combined(x, y, None, Some(alphas), gamma, 0.0, 1.0, Want::Value).marginal)
}

pub fn marginal_cw_sq_grad(
    x: &SampleBatch,
    y: &SampleBatch,
    alphas: &[f64],
    gamma: f64,
) -> Result<DistanceGrad> {
    check_pair(x, y)?;
    check_gamma(gamma)?;
    check_alphas(alphas, x.dim)?;
    let c = combined(x, y, None, Some(alphas), gamma, 0.0, 1.0, Want::BothGrads);
    Ok(DistanceGrad {
        value: c.marginal,
        grad_x: to_tensor(c.grad_x, x.rows, x.dim),
        grad_y: to_tensor(c.grad_y, y.rows, y.dim),
    })
}

/// `pi * marginal + (1 - pi) * joint`, sharing one bandwidth.
pub fn mix_cw_distance_sq(
    x: &SampleBatch,
    y: &SampleBatch,
    cfg: &MixtureMeasureConfig,
) -> Result<f64> {
    Ok(mix_impl(x, y, cfg, Want::Value)?.value)
}

pub fn mix_cw_distance_sq_grad(
    x: &SampleBatch,
    y: &SampleBatch,
    cfg: &MixtureMeasureConfig,
) -> Result<MixDistance> {
    mix_impl(x, y, cfg, Want::BothGrads)
}

pub(crate) fn mix_impl(
    x: &SampleBatch,
    y: &SampleBatch,
    cfg: &MixtureMeasureConfig,
    want: Want,
) -> Result<MixDistance> {
    check_pair(x, y)?;
    check_alphas(&cfg.alphas, x.dim)?;
    let gamma = cfg.gamma.resolve(x.rows)?;
    let k = joint_kernel(x.dim, DimKind::Data)?;
    let pi = cfg.pi;
    let joint = (pi < 1.0).then_some(k);
    let alphas = (pi > 0.0).then_some(cfg.alphas.as_slice());
    let c = combined(x, y, joint, alphas, gamma, 1.0 - pi, pi, want);
    let value = pi * c.marginal + (1.0 - pi) * c.joint;
    let (rows, dim) = (x.rows, x.dim);
    let grad = |g: Vec<f64>| {
        if g.is_empty() {
            Tensor::zeros(0, dim)
        } else {
            to_tensor(g, rows, dim)
        }
    };
    let (gx, gy) = (grad(c.grad_x), grad(c.grad_y));
    Ok(MixDistance {
        value,
        marginal: c.marginal,
        joint: c.joint,
        grad_x: gx,
        grad_y: gy,
    })
}
