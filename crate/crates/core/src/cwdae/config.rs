use crate::cramer_wold::Bandwidth;
use crate::error::{Error, Result};
use crate::heads::{AnnealSchedule, Relaxation, DEFAULT_KNOTS};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the latent regulariser.
    pub lambda: f64,
    /// Temperature floor of the annealing schedule.
    pub tau: f64,
    pub latent_dim: usize,
    /// Weight of the marginal term in the reconstruction distance.
    pub pi: f64,
    pub knots: usize,
    pub seed: u64,
    pub gamma: Bandwidth,
    /// Anneal on the global step counter instead of the epoch.
    pub anneal_per_step: bool,
    pub relaxation: Relaxation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 1024,
            learning_rate: 0.001,
            lambda: 1.0,
            tau: 0.2,
            latent_dim: 2,
            pi: 0.05,
            knots: DEFAULT_KNOTS,
            seed: 0,
            gamma: Bandwidth::Silverman,
            anneal_per_step: false,
            relaxation: Relaxation::StraightThrough,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size < 2 {
            return bad(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.latent_dim != 2 {
            return bad(format!(
                "latent dimension {} is unsupported; the latent distance is closed-form for d = 2 only",
                self.latent_dim
            ));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return bad(format!("pi must lie in [0, 1], got {}", self.pi));
        }
        if let Bandwidth::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            floor: self.tau,
            ..AnnealSchedule::default()
        }
    }

    /// `key=value` pairs in a fixed order. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("lambda", format!("{:?}", self.lambda)),
            ("tau", format!("{:?}", self.tau)),
            ("latent_dim", self.latent_dim.to_string()),
            ("pi", format!("{:?}", self.pi)),
            ("knots", self.knots.to_string()),
            ("seed", self.seed.to_string()),
            (
                "gamma",
                match self.gamma {
                    Bandwidth::Silverman => "silverman".to_string(),
                    Bandwidth::Fixed(g) => format!("{g:?}"),
                },
            ),
            (
                "anneal",
                if self.anneal_per_step {
                    "step"
                } else {
                    "epoch"
                }
                .to_string(),
            ),
            (
                "relaxation",
                match self.relaxation {
                    Relaxation::StraightThrough => "straight-through",
                    Relaxation::Soft => "soft",
                }
                .to_string(),
            ),
        ]
    }

    /// Inverse of [`Self::to_pairs`]; every key must be present.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = 0usize;
        for (k, v) in pairs {
            let num = |what: &str| Error::Config(format!("bad value `{v}` for {what}"));
            match k {
                "epochs" => cfg.epochs = v.parse().map_err(|_| num(k))?,
                "batch_size" => cfg.batch_size = v.parse().map_err(|_| num(k))?,
                "learning_rate" => cfg.learning_rate = v.parse().map_err(|_| num(k))?,
                "lambda" => cfg.lambda = v.parse().map_err(|_| num(k))?,
                "tau" => cfg.tau = v.parse().map_err(|_| num(k))?,
                "latent_dim" => cfg.latent_dim = v.parse().map_err(|_| num(k))?,
                "pi" => cfg.pi = v.parse().map_err(|_| num(k))?,
                "knots" => cfg.knots = v.parse().map_err(|_| num(k))?,
                "seed" => cfg.seed = v.parse().map_err(|_| num(k))?,
                "gamma" => cfg.gamma = parse_gamma(v)?,
                "anneal" => {
                    cfg.anneal_per_step = match v {
                        "step" => true,
                        "epoch" => false,
                        _ => return Err(num(k)),
                    }
                }
                "relaxation" => {
                    cfg.relaxation = match v {
                        "straight-through" => Relaxation::StraightThrough,
                        "soft" => Relaxation::Soft,
                        _ => return Err(num(k)),
                    }
                }
                _ => return Err(Error::Config(format!("unknown config key `{k}`"))),
            }
            seen += 1;
        }
        if seen != cfg.to_pairs().len() {
            return Err(Error::Config(format!(
                "expected {} config entries, found {seen}",
                cfg.to_pairs().len()
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `silverman` or a positive number.
pub fn parse_gamma(v: &str) -> Result<Bandwidth> {
    if v == "silverman" {
        return Ok(Bandwidth::Silverman);
    }
    match v.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(Bandwidth::Fixed(g)),
        _ => Err(Error::Config(format!(
            "gamma must be `silverman` or a positive number, got `{v}`"
        ))),
    }
}
