//! Per-column decoder heads.
//!
//! Continuous columns get a monotone piecewise-linear quantile function
//! `Q(alpha) = gamma0 + sum_k softplus(beta_k) * w_k(alpha)` on the fixed knot
//! grid `d_m = m / (M + 1)`, where `w_k(alpha)` is the length of
//! `[d_k, d_{k+1}]` already covered by `alpha`. Discrete columns get logits,
//! sampled with Gumbel noise.

use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};
use crate::numerics::{softmax_rows, softplus, Tape, Tensor, Var};

/// Default number of interior knots.
pub const DEFAULT_KNOTS: usize = 10;

/// Floor applied to probabilities before taking logs in Gumbel-max sampling.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// Knot `d_m` of a spline with `knots` interior knots; `d_{M+1} = 1`.
pub fn knot(m: usize, knots: usize) -> f64 {
    if m > knots {
        1.0
    } else {
        m as f64 / (knots + 1) as f64
    }
}

/// Covered length of each of the `M + 1` segments at level `alpha`.
pub fn segment_weights(alpha: f64, knots: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "quantile level must lie in [0, 1], got {alpha}"
        )));
    }
    Ok((0..=knots)
        .map(|k| {
            let lo = knot(k, knots);
            (alpha.min(knot(k + 1, knots)) - lo).max(0.0)
        })
        .collect())
}

/// Parameters of one continuous column's quantile function.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineParams {
    pub intercept: f64,
    /// Pre-softplus slopes, one per segment (`M + 1` values).
    pub raw_slopes: Vec<f64>,
}

impl SplineParams {
    pub fn new(intercept: f64, raw_slopes: Vec<f64>) -> Result<Self> {
        if raw_slopes.is_empty() {
            return Err(Error::Config("spline needs at least one segment".into()));
        }
        if !intercept.is_finite() || raw_slopes.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("spline parameters".into()));
        }
        Ok(Self {
            intercept,
            raw_slopes,
        })
    }

    /// Split one decoder output slice `[gamma0, beta_0..beta_M]`.
    pub fn from_slice(params: &[f64]) -> Result<Self> {
        match params.split_first() {
            Some((&g, b)) => Self::new(g, b.to_vec()),
            None => Err(Error::Config("empty spline parameter slice".into())),
        }
    }

    /// Interior knot count `M`.
    pub fn knots(&self) -> usize {
        self.raw_slopes.len() - 1
    }

    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        let w = segment_weights(alpha, self.knots())?;
        let rise: f64 = self
            .raw_slopes
            .iter()
            .zip(&w)
            .map(|(&b, &w)| softplus(b) * w)
            .sum();
        Ok(self.intercept + rise)
    }
}

/// `Q(alpha)` for spline parameters stored as `[gamma0, beta_0..beta_M]`.
pub fn quantile(sp: &SplineParams, alpha: f64) -> Result<f64> {
    sp.quantile(alpha)
}

/// Row-wise quantile on the tape. `params` is `[n, M + 2]`; returns `[n, 1]`.
pub fn quantile_tape(tape: &mut Tape, params: Var, alphas: &[f64]) -> Result<Var> {
    let (n, width) = (tape.value(params).rows(), tape.value(params).cols());
    if width < 2 {
        return Err(Error::Config(format!(
            "spline block needs at least 2 columns, got {width}"
        )));
    }
    if alphas.len() != n {
        return Err(Error::Contract(format!(
            "{} quantile levels for {n} rows",
            alphas.len()
        )));
    }
    let knots = width - 2;
    let mut w = Vec::with_capacity(n * (knots + 1));
    for &a in alphas {
        w.extend(segment_weights(a, knots)?);
    }
    let w = Tensor::matrix(n, knots + 1, w)?;
    let intercept = tape.slice_cols(params, 0, 1);
    let raw = tape.slice_cols(params, 1, width);
    let slopes = tape.softplus(raw);
    let rise = tape.mul_const(slopes, w);
    let rise = tape.sum_cols(rise);
    tape.try_add(intercept, rise)
}

/// Logits of one discrete column.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalHead {
    pub logits: Vec<f64>,
}

impl CategoricalHead {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        check_logits(&logits)?;
        Ok(Self { logits })
    }

    pub fn levels(&self) -> usize {
        self.logits.len()
    }

    pub fn probs(&self) -> Vec<f64> {
        let t = Tensor::matrix(1, self.logits.len(), self.logits.clone()).expect("1 x T");
        softmax_rows(&t).into_data()
    }

    /// Index of the largest logit (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }
}

fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::Config(format!(
            "categorical head needs at least 2 levels, got {}",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("categorical logits".into()));
    }
    Ok(())
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One standard Gumbel draw.
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Gumbel::new(0.0, 1.0).expect("unit gumbel").sample(rng)
}

/// Result of a straight-through Gumbel-Softmax draw.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelDraw {
    /// Forward value: one-hot at `index`.
    pub hard: Vec<f64>,
    /// `softmax((logits + G) / temperature)`, the path gradients follow.
    pub soft: Vec<f64>,
    pub index: usize,
}

/// Gumbel-Softmax draw with a hard one-hot forward value.
pub fn gumbel_softmax_st<R: Rng + ?Sized>(
    logits: &[f64],
    temperature: f64,
    rng: &mut R,
) -> Result<GumbelDraw> {
    check_logits(logits)?;
    let noise: Vec<f64> = logits.iter().map(|_| gumbel_noise(rng)).collect();
    gumbel_softmax_with_noise(logits, &noise, temperature)
}

/// As [`gumbel_softmax_st`] with the Gumbel noise supplied.
pub fn gumbel_softmax_with_noise(
    logits: &[f64],
    noise: &[f64],
    temperature: f64,
) -> Result<GumbelDraw> {
    check_logits(logits)?;
    check_temperature(temperature)?;
    if noise.len() != logits.len() {
        return Err(Error::Contract("noise and logits differ in length".into()));
    }
    let scaled: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(l, g)| (l + g) / temperature)
        .collect();
    let index = argmax(&scaled);
    let t = Tensor::matrix(1, scaled.len(), scaled).expect("1 x T");
    let soft = softmax_rows(&t).into_data();
    let mut hard = vec![0.0; soft.len()];
    hard[index] = 1.0;
    Ok(GumbelDraw { hard, soft, index })
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(())
}

/// How the discrete heads behave on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Relaxation {
    /// Hard one-hot forward, softmax gradient.
    #[default]
    StraightThrough,
    /// Soft relaxed sample both ways. Smooth in the logits, used for
    /// finite-difference checks.
    Soft,
}

/// Row-wise Gumbel-Softmax on the tape. `logits` and `noise` are `[n, T]`.
pub fn gumbel_softmax_tape(
    tape: &mut Tape,
    logits: Var,
    noise: &Tensor,
    temperature: f64,
    mode: Relaxation,
) -> Result<Var> {
    check_temperature(temperature)?;
    if !tape.value(logits).same_shape(noise) {
        return Err(Error::Contract(format!(
            "gumbel noise {:?} does not match logits {:?}",
            noise.shape(),
            tape.value(logits).shape()
        )));
    }
    let g = tape.constant(noise.clone());
    let perturbed = tape.try_add(logits, g)?;
    let scaled = tape.scale(perturbed, 1.0 / temperature);
    let soft = tape.softmax_rows(scaled);
    match mode {
        Relaxation::Soft => Ok(soft),
        Relaxation::StraightThrough => {
            let sv = tape.value(soft);
            let mut hard = Tensor::zeros(sv.rows(), sv.cols());
            for r in 0..sv.rows() {
                let i = argmax(tape.value(scaled).row(r));
                hard.set(r, i, 1.0);
            }
            Ok(tape.straight_through(soft, hard))
        }
    }
}

/// Draw a class index from `probs` by Gumbel-max.
pub fn gumbel_max_sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::Domain(
            "probabilities must be finite and >= 0".into(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
    }
    let scores: Vec<f64> = probs
        .iter()
        .map(|p| p.max(LOG_PROB_FLOOR).ln() + gumbel_noise(rng))
        .collect();
    Ok(argmax(&scores))
}

/// Gumbel-max over `log softmax(logits)`; equivalent to adding noise to the logits.
pub fn gumbel_max_logits<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Result<usize> {
    gumbel_max_sample(&CategoricalHead::new(logits.to_vec())?.probs(), rng)
}

/// Exponential temperature decay with a floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    pub floor: f64,
    pub decay: f64,
    pub scale: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            floor: 0.2,
            decay: 0.025,
            scale: 10.0,
        }
    }
}

impl AnnealSchedule {
    pub fn with_floor(floor: f64) -> Result<Self> {
        check_temperature(floor)?;
        Ok(Self {
            floor,
            ..Self::default()
        })
    }

    /// `max(scale * exp(-decay * e), floor)`.
    pub fn temperature(&self, e: u64) -> f64 {
        (self.scale * (-self.decay * e as f64).exp()).max(self.floor)
    }
}
