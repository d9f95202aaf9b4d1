use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::cwdae::checkpoint::save_checkpoint;
use crate::cwdae::config::TrainConfig;
use crate::cwdae::model::{CwdaeModel, LossBreakdown, StepNoise};
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::numerics::rng::{purpose, stream};
use crate::numerics::AdamState;

/// Mean loss components over the batches of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: u64,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Where to write the last good parameters if training hits NaN/Inf.
    pub abort_checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: CwdaeModel,
    pub history: Vec<EpochLoss>,
}

/// Mini-batch Adam on the objective. Batches come from a per-epoch seeded
/// shuffle; a trailing batch with fewer than two rows is skipped.
pub fn train(
    dataset: &EncodedDataset,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = dataset.rows();
    if n < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 rows, got {n}"
        )));
    }
    let mut model = CwdaeModel::init(
        dataset.schema.clone(),
        dataset.stats.clone(),
        cfg.clone(),
        n,
    )?;
    let mut adam = AdamState::new(cfg.learning_rate, &model.params())?;
    let names = model.param_names();
    let schedule = cfg.schedule();
    let d = cfg.latent_dim;
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    let mut global_step = 0u64;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(cfg.seed, &[purpose::SHUFFLE, epoch]));
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            if rows.len() < 2 {
                continue;
            }
            let x = dataset.matrix.select_rows(rows);
            let noise = StepNoise::draw(cfg.seed, epoch, b as u64, rows.len(), &dataset.schema, d);
            let temperature = schedule.temperature(if cfg.anneal_per_step {
                global_step
            } else {
                epoch
            });
            let step = model
                .loss_and_grad(&x, &noise, temperature)
                .and_then(|(loss, grads)| {
                    if !loss.total.is_finite() {
                        return Err(Error::NonFinite("loss".into()));
                    }
                    adam.step(&mut model.params_mut(), &grads, &names)?;
                    Ok(loss)
                });
            let loss = match step {
                Ok(l) => l,
                Err(e) if e.is_numerical() => {
                    if let Some(path) = &opts.abort_checkpoint {
                        save_checkpoint(&model, path)?;
                    }
                    return Err(Error::NonFinite(format!(
                        "training step epoch {epoch}, batch {b}: {e}"
                    )));
                }
                Err(e) => return Err(e),
            };
            sum.total += loss.total;
            sum.log_mix_recon += loss.log_mix_recon;
            sum.log_latent_cw += loss.log_latent_cw;
            sum.raw_recon += loss.raw_recon;
            sum.raw_latent += loss.raw_latent;
            batches += 1;
            global_step += 1;
        }
        let k = batches.max(1) as f64;
        history.push(EpochLoss {
            epoch,
            loss: LossBreakdown {
                total: sum.total / k,
                log_mix_recon: sum.log_mix_recon / k,
                log_latent_cw: sum.log_latent_cw / k,
                raw_recon: sum.raw_recon / k,
                raw_latent: sum.raw_latent / k,
            },
        });
    }
    Ok(TrainOutcome { model, history })
}

/// `epoch,total,log_mix_recon,log_latent_cw,raw_recon,raw_latent`.
pub fn write_loss_history(path: impl AsRef<Path>, history: &[EpochLoss]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "epoch,total,log_mix_recon,log_latent_cw,raw_recon,raw_latent"
    )?;
    for h in history {
        let l = &h.loss;
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?}",
            h.epoch, l.total, l.log_mix_recon, l.log_latent_cw, l.raw_recon, l.raw_latent
        )?;
    }
    w.flush()?;
    Ok(())
}
