use rand::Rng;
use rand_distr::StandardNormal;

use crate::cramer_wold::{
    cw_grad_impl, mix_impl, DimKind, MixtureMeasureConfig, SampleBatch, Want,
};
use crate::cwdae::config::TrainConfig;
use crate::data::{Standardizer, TabularSchema};
use crate::error::{Error, Result};
use crate::heads::{gumbel_noise, gumbel_softmax_tape, quantile_tape, Relaxation};
use crate::numerics::rng::{purpose, stream};
use crate::numerics::{Activation, Mlp, MlpSpec, MlpVars, Tape, Tensor, Var};

/// Floor inside both logarithms of the objective.
pub const LOG_FLOOR: f64 = 1e-8;

/// One column's slice of the decoder output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadBlock {
    pub column: usize,
    pub offset: usize,
    pub width: usize,
    pub discrete: bool,
}

/// Decoder output layout: `M + 2` spline parameters per continuous column,
/// `T_j` logits per discrete column, in schema order.
pub fn head_layout(schema: &TabularSchema, knots: usize) -> Vec<HeadBlock> {
    let mut offset = 0;
    schema
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let width = c.levels().map_or(knots + 2, <[String]>::len);
            let b = HeadBlock {
                column: j,
                offset,
                width,
                discrete: c.kind.is_discrete(),
            };
            offset += width;
            b
        })
        .collect()
}

/// Decoder output width `(M + 2) |I_c| + sum_j T_j`.
pub fn head_width(schema: &TabularSchema, knots: usize) -> usize {
    head_layout(schema, knots).iter().map(|b| b.width).sum()
}

/// Per-step loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub log_mix_recon: f64,
    pub log_latent_cw: f64,
    pub raw_recon: f64,
    pub raw_latent: f64,
}

/// Every random quantity one training step consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct StepNoise {
    /// Reparameterisation noise, `[n, d]`.
    pub eps: Tensor,
    /// Quantile levels per continuous column (schema order), `n` each.
    pub alphas: Vec<Vec<f64>>,
    /// Gumbel noise per discrete column (schema order), `[n, T_j]` each.
    pub gumbel: Vec<Tensor>,
    /// Prior draws for the latent term, `[n, d]`.
    pub prior: Tensor,
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Tensor::matrix(rows, cols, data).expect("noise shape")
}

impl StepNoise {
    /// Draw from streams keyed by `(seed, purpose, epoch, batch, column)`.
    pub fn draw(
        seed: u64,
        epoch: u64,
        batch: u64,
        n: usize,
        schema: &TabularSchema,
        d: usize,
    ) -> Self {
        let eps = normal_matrix(
            &mut stream(seed, &[purpose::ENCODER_NOISE, epoch, batch]),
            n,
            d,
        );
        let prior = normal_matrix(&mut stream(seed, &[purpose::PRIOR, epoch, batch]), n, d);
        let mut alphas = Vec::new();
        let mut gumbel = Vec::new();
        for (j, c) in schema.columns().iter().enumerate() {
            let j = j as u64;
            match c.levels() {
                None => {
                    let mut r = stream(seed, &[purpose::QUANTILE_LEVEL, epoch, batch, j]);
                    alphas.push((0..n).map(|_| r.random::<f64>()).collect());
                }
                Some(levels) => {
                    let mut r = stream(seed, &[purpose::GUMBEL, epoch, batch, j]);
                    let t = levels.len();
                    let data = (0..n * t).map(|_| gumbel_noise(&mut r)).collect();
                    gumbel.push(Tensor::matrix(n, t, data).expect("gumbel shape"));
                }
            }
        }
        Self {
            eps,
            alphas,
            gumbel,
            prior,
        }
    }
}

/// `mu + exp(logvar / 2) * eps`, elementwise.
pub fn reparameterize(mu: &Tensor, logvar: &Tensor, eps: &Tensor) -> Result<Tensor> {
    if !mu.same_shape(logvar) || !mu.same_shape(eps) {
        return Err(Error::Contract(
            "mu, logvar and eps must share a shape".into(),
        ));
    }
    let std = logvar.map(|l| (0.5 * l).exp());
    let noise = std.zip_map(eps, |s, e| s * e);
    Ok(mu.zip_map(&noise, |m, n| m + n))
}

/// Encoder, decoder and everything needed to map between data and model space.
#[derive(Clone, Debug, PartialEq)]
pub struct CwdaeModel {
    pub(crate) schema: TabularSchema,
    pub(crate) stats: Standardizer,
    pub(crate) cfg: TrainConfig,
    pub(crate) train_rows: usize,
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
}

/// Tape handles of one forward pass.
pub(crate) struct Forward {
    pub vars: Vec<Var>,
    pub loss: Var,
    pub breakdown: LossBreakdown,
}

impl CwdaeModel {
    pub fn encoder_spec(input: usize, d: usize) -> Result<MlpSpec> {
        MlpSpec::new(
            input,
            vec![
                (16, Activation::Elu),
                (8, Activation::Elu),
                (2 * d, Activation::Identity),
            ],
        )
    }

    pub fn decoder_spec(d: usize, output: usize) -> Result<MlpSpec> {
        MlpSpec::new(
            d,
            vec![
                (16, Activation::Relu),
                (64, Activation::Relu),
                (output, Activation::Identity),
            ],
        )
    }

    /// Fresh parameters from `cfg.seed`.
    pub fn init(
        schema: TabularSchema,
        stats: Standardizer,
        cfg: TrainConfig,
        train_rows: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if stats.len() != schema.continuous_indices().len() {
            return Err(Error::Contract("statistics do not match the schema".into()));
        }
        let d = cfg.latent_dim;
        let enc = Self::encoder_spec(schema.encoded_width(), d)?;
        let dec = Self::decoder_spec(d, head_width(&schema, cfg.knots))?;
        let encoder = Mlp::init(enc, &mut stream(cfg.seed, &[purpose::INIT, 0]));
        let decoder = Mlp::init(dec, &mut stream(cfg.seed, &[purpose::INIT, 1]));
        Ok(Self {
            schema,
            stats,
            cfg,
            train_rows,
            encoder,
            decoder,
        })
    }

    pub(crate) fn from_parts(
        schema: TabularSchema,
        stats: Standardizer,
        cfg: TrainConfig,
        train_rows: usize,
        params: Vec<Tensor>,
    ) -> Result<Self> {
        let d = cfg.latent_dim;
        let enc = Self::encoder_spec(schema.encoded_width(), d)?;
        let dec = Self::decoder_spec(d, head_width(&schema, cfg.knots))?;
        let ne = enc.layers.len();
        if params.len() != 2 * (ne + dec.layers.len()) {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter blocks, found {}",
                2 * (ne + dec.layers.len()),
                params.len()
            )));
        }
        let split = |blocks: &[Tensor]| {
            let w = blocks.iter().step_by(2).cloned().collect();
            let b = blocks.iter().skip(1).step_by(2).cloned().collect();
            (w, b)
        };
        let (ew, eb) = split(&params[..2 * ne]);
        let (dw, db) = split(&params[2 * ne..]);
        let encoder =
            Mlp::from_params(enc, ew, eb).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let decoder =
            Mlp::from_params(dec, dw, db).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            schema,
            stats,
            cfg,
            train_rows,
            encoder,
            decoder,
        })
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn stats(&self) -> &Standardizer {
        &self.stats
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn train_rows(&self) -> usize {
        self.train_rows
    }

    pub fn latent_dim(&self) -> usize {
        self.cfg.latent_dim
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn head_layout(&self) -> Vec<HeadBlock> {
        head_layout(&self.schema, self.cfg.knots)
    }

    /// All parameter blocks: encoder then decoder, each `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    /// Names of the parameter blocks, in [`Self::params`] order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (net, mlp) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for i in 0..mlp.spec().layers.len() {
                names.push(format!("{net}.w{i}"));
                names.push(format!("{net}.b{i}"));
            }
        }
        names
    }

    /// Posterior mean and log-variance, `[n, d]` each.
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let out = self.encoder.forward(x)?;
        let d = self.cfg.latent_dim;
        Ok((out.slice_cols(0, d), out.slice_cols(d, 2 * d)))
    }

    /// Raw decoder output (spline parameters and logits), `[n, W]`.
    pub fn decode_params(&self, z: &Tensor) -> Result<Tensor> {
        self.decoder.forward(z)
    }

    fn check_noise(&self, n: usize, noise: &StepNoise) -> Result<()> {
        let d = self.cfg.latent_dim;
        let ok = noise.eps.shape() == [n, d]
            && noise.prior.shape() == [n, d]
            && noise.alphas.len() == self.schema.continuous_indices().len()
            && noise.alphas.iter().all(|a| a.len() == n)
            && noise.gumbel.len() == self.schema.discrete_indices().len()
            && noise.gumbel.iter().all(|g| g.rows() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(
                "step noise does not match batch and schema".into(),
            ))
        }
    }

    /// Decode `z` on the tape into an `[n, D]` sample.
    pub(crate) fn decode_tape(
        &self,
        tape: &mut Tape,
        dec: &MlpVars,
        z: Var,
        noise: &StepNoise,
        temperature: f64,
        mode: Relaxation,
    ) -> Result<Var> {
        let heads = self.decoder.forward_tape(tape, dec, z)?;
        let (mut ci, mut di) = (0, 0);
        let mut parts = Vec::with_capacity(self.schema.len());
        for b in self.head_layout() {
            let slice = tape.slice_cols(heads, b.offset, b.offset + b.width);
            if b.discrete {
                parts.push(gumbel_softmax_tape(
                    tape,
                    slice,
                    &noise.gumbel[di],
                    temperature,
                    mode,
                )?);
                di += 1;
            } else {
                parts.push(quantile_tape(tape, slice, &noise.alphas[ci])?);
                ci += 1;
            }
        }
        tape.concat_cols(&parts)
    }

    /// Decode latent codes into an encoded-space sample using the training
    /// forward pass (spline at the given levels, Gumbel-Softmax heads).
    pub fn decode_and_sample(
        &self,
        z: &Tensor,
        noise: &StepNoise,
        temperature: f64,
    ) -> Result<Tensor> {
        self.check_noise(z.rows(), noise)?;
        let mut tape = Tape::new();
        let dec = self.decoder.register(&mut tape);
        let zv = tape.constant(z.clone());
        let out = self.decode_tape(&mut tape, &dec, zv, noise, temperature, self.cfg.relaxation)?;
        Ok(tape.value(out).clone())
    }

    /// Record the objective for one batch.
    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        x: &Tensor,
        noise: &StepNoise,
        temperature: f64,
    ) -> Result<Forward> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::Contract(format!(
                "batch of {n} rows; need at least 2"
            )));
        }
        self.check_noise(n, noise)?;
        let d = self.cfg.latent_dim;

        let enc = self.encoder.register(tape);
        let dec = self.decoder.register(tape);
        let xv = tape.constant(x.clone());
        let h = self.encoder.forward_tape(tape, &enc, xv)?;
        let mu = tape.slice_cols(h, 0, d);
        let logvar = tape.slice_cols(h, d, 2 * d);
        let half = tape.scale(logvar, 0.5);
        let std = tape.exp(half);
        let spread = tape.mul_const(std, noise.eps.clone());
        let z = tape.try_add(mu, spread)?;
        let x_hat = self.decode_tape(tape, &dec, z, noise, temperature, self.cfg.relaxation)?;

        if !tape.value(x_hat).is_finite() || !tape.value(z).is_finite() {
            return Err(Error::NonFinite("decoder or encoder activations".into()));
        }

        let gamma = self.cfg.gamma.resolve(n)?;
        let mix_cfg = MixtureMeasureConfig::uniform(
            self.cfg.pi,
            x.cols(),
            crate::cramer_wold::Bandwidth::Fixed(gamma),
        )?;
        // only the generated side carries parameters
        let recon = mix_impl(
            &SampleBatch::new(x)?,
            &SampleBatch::new(tape.value(x_hat))?,
            &mix_cfg,
            Want::SecondGrad,
        )?;
        let latent = cw_grad_impl(
            &SampleBatch::new(&noise.prior)?,
            &SampleBatch::new(tape.value(z))?,
            gamma,
            DimKind::Latent,
            Want::SecondGrad,
        )?;

        let log_term = |value: f64, grad: Tensor| {
            if value > LOG_FLOOR {
                (value.ln(), grad.map(|g| g / value))
            } else {
                (LOG_FLOOR.ln(), Tensor::zeros(grad.rows(), grad.cols()))
            }
        };
        let (lr, gr) = log_term(recon.value, recon.grad_y);
        let (ll, gl) = log_term(latent.value, latent.grad_y);
        let r = tape.scalar_fn(lr, vec![(x_hat, gr)])?;
        let l = tape.scalar_fn(ll, vec![(z, gl)])?;
        let l_scaled = tape.scale(l, self.cfg.lambda);
        let loss = tape.add(r, l_scaled);

        let mut vars = enc.all();
        vars.extend(dec.all());
        Ok(Forward {
            vars,
            loss,
            breakdown: LossBreakdown {
                total: tape.value(loss).item(),
                log_mix_recon: lr,
                log_latent_cw: ll,
                raw_recon: recon.value,
                raw_latent: latent.value,
            },
        })
    }

    /// Objective value and gradients for every parameter block.
    pub fn loss_and_grad(
        &self,
        x: &Tensor,
        noise: &StepNoise,
        temperature: f64,
    ) -> Result<(LossBreakdown, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, x, noise, temperature)?;
        let mut g = tape.backward(f.loss)?;
        Ok((f.breakdown, f.vars.iter().map(|&v| g.take(v)).collect()))
    }

    /// Objective value only.
    pub fn loss(&self, x: &Tensor, noise: &StepNoise, temperature: f64) -> Result<LossBreakdown> {
        let mut tape = Tape::new();
        Ok(self.forward(&mut tape, x, noise, temperature)?.breakdown)
    }

    /// Copy with every parameter block replaced.
    pub fn with_params(&self, params: Vec<Tensor>) -> Result<Self> {
        Self::from_parts(
            self.schema.clone(),
            self.stats.clone(),
            self.cfg.clone(),
            self.train_rows,
            params,
        )
    }
}
