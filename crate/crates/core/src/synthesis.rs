//! Sampling synthetic tables from a trained model.
//!
//! Each output row `i` owns the stream `(seed, GENERATE, i)`: it first draws
//! `z ~ N(0, I)`, then one quantile level per continuous column and one
//! Gumbel vector per discrete column, in schema order. Rows are therefore
//! independent of batching and thread count.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cwdae::{CwdaeModel, HeadBlock};
use crate::data::{ColumnData, ColumnKind, Table, TabularSchema};
use crate::error::{Error, Result};
use crate::heads::{argmax, gumbel_max_logits, SplineParams};
use crate::numerics::rng::{purpose, stream};
use crate::numerics::Tensor;

/// Rows decoded per parallel work item.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthesisRequest {
    pub n: usize,
    pub seed: u64,
    /// Use the median `alpha = 0.5` for every continuous column.
    pub median_only: bool,
}

fn check_schema(model: &CwdaeModel, schema: &TabularSchema) -> Result<()> {
    if model.schema().hash() != schema.hash() {
        return Err(Error::Contract(format!(
            "model was trained on schema {}, not {}",
            model.schema().hash(),
            schema.hash()
        )));
    }
    Ok(())
}

/// Per-row draw of one column: a standardized value or a level index.
#[derive(Clone, Copy)]
enum Cell {
    Value(f64),
    Level(usize),
}

/// How each head turns its parameters into a cell.
enum Pick<'r> {
    Sample(&'r mut ChaCha8Rng, bool),
    Median,
}

fn decode_row(params: &[f64], layout: &[HeadBlock], pick: &mut Pick) -> Result<Vec<Cell>> {
    layout
        .iter()
        .map(|b| {
            let p = &params[b.offset..b.offset + b.width];
            if b.discrete {
                Ok(Cell::Level(match pick {
                    Pick::Sample(rng, _) => gumbel_max_logits(p, &mut **rng)?,
                    Pick::Median => argmax(p),
                }))
            } else {
                let alpha = match pick {
                    Pick::Sample(rng, false) => rng.random::<f64>(),
                    _ => 0.5,
                };
                Ok(Cell::Value(SplineParams::from_slice(p)?.quantile(alpha)?))
            }
        })
        .collect()
}

/// Undo the standardization, round ordinals and assemble a table.
fn assemble(model: &CwdaeModel, rows: Vec<Vec<Cell>>) -> Result<Table> {
    let schema = model.schema();
    let stats = model.stats();
    let mut ci = 0;
    let mut columns = Vec::with_capacity(schema.len());
    for (j, c) in schema.columns().iter().enumerate() {
        if c.kind.is_discrete() {
            columns.push(ColumnData::Categorical(
                rows.iter()
                    .map(|r| match r[j] {
                        Cell::Level(l) => l,
                        Cell::Value(_) => unreachable!("layout follows the schema"),
                    })
                    .collect(),
            ));
            continue;
        }
        let (mean, std) = (stats.means[ci], stats.stds[ci]);
        ci += 1;
        let scale = match c.kind {
            ColumnKind::Ordinal { decimals } => Some(10f64.powi(decimals as i32)),
            _ => None,
        };
        let values = rows
            .iter()
            .map(|r| match r[j] {
                Cell::Value(v) => {
                    let x = v * std + mean;
                    scale.map_or(x, |s| (x * s).round() / s)
                }
                Cell::Level(_) => unreachable!("layout follows the schema"),
            })
            .collect::<Vec<f64>>();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "generated row {i}, column `{}`",
                c.name
            )));
        }
        columns.push(ColumnData::Numeric(values));
    }
    Table::new(schema.clone(), columns)
}

fn normal_rows(rngs: &mut [ChaCha8Rng], d: usize) -> Result<Tensor> {
    let data = rngs
        .iter_mut()
        .flat_map(|r| {
            (0..d)
                .map(|_| r.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>()
        })
        .collect();
    Tensor::matrix(rngs.len(), d, data)
}

/// Draw `req.n` synthetic rows in the original column domains.
pub fn generate(
    model: &CwdaeModel,
    schema: &TabularSchema,
    req: &SynthesisRequest,
) -> Result<Table> {
    check_schema(model, schema)?;
    let d = model.latent_dim();
    let layout = model.head_layout();
    let chunks: Vec<Vec<Vec<Cell>>> = (0..req.n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let rows = c * CHUNK..((c + 1) * CHUNK).min(req.n);
            let mut rngs: Vec<ChaCha8Rng> = rows
                .map(|i| stream(req.seed, &[purpose::GENERATE, i as u64]))
                .collect();
            let z = normal_rows(&mut rngs, d)?;
            let params = model.decode_params(&z)?;
            rngs.iter_mut()
                .enumerate()
                .map(|(r, rng)| {
                    decode_row(
                        params.row(r),
                        &layout,
                        &mut Pick::Sample(rng, req.median_only),
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    assemble(model, chunks.into_iter().flatten().collect())
}

/// Where the latent points of a scatter come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatentSampling {
    /// `n` draws from the prior.
    Prior { n: usize, seed: u64 },
    /// A `points x points` grid over `[lo, hi]^2`, first coordinate slowest.
    Grid { points: usize, lo: f64, hi: f64 },
}

/// Latent codes paired with their median decodings.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentScatter {
    /// `[n, 2]`.
    pub z: Tensor,
    pub decoded: Table,
}

impl LatentScatter {
    /// Header `z1,z2,<schema columns>`.
    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        let mut body = Vec::new();
        self.decoded.to_writer(&mut body)?;
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(body.as_slice());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["z1".to_string(), "z2".to_string()];
        header.extend(r.headers()?.iter().map(str::to_string));
        w.write_record(&header)?;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut out = vec![
                format!("{:.16e}", self.z.get(i, 0)),
                format!("{:.16e}", self.z.get(i, 1)),
            ];
            out.extend(rec.iter().map(str::to_string));
            w.write_record(&out)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.to_writer(std::io::BufWriter::new(file))
    }
}

/// Latent points in the order they are emitted.
pub fn latent_points(mode: LatentSampling) -> Result<Tensor> {
    match mode {
        LatentSampling::Prior { n, seed } => {
            let mut rng = stream(seed, &[purpose::LATENT_SCATTER]);
            normal_rows(std::slice::from_mut(&mut rng), 2 * n)
                .and_then(|t| Tensor::matrix(n, 2, t.into_data()))
        }
        LatentSampling::Grid { points, lo, hi } => {
            if points == 0 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "grid needs at least one point over a finite interval, got {points} over [{lo}, {hi}]"
                )));
            }
            let at = |k: usize| {
                if points == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (points - 1) as f64
                }
            };
            let mut data = Vec::with_capacity(2 * points * points);
            for a in 0..points {
                for b in 0..points {
                    data.extend([at(a), at(b)]);
                }
            }
            Tensor::matrix(points * points, 2, data)
        }
    }
}

/// Decode latent points with `alpha = 0.5` and the most probable level.
pub fn decode_median(model: &CwdaeModel, z: &Tensor) -> Result<Table> {
    if model.latent_dim() != 2 || z.cols() != 2 {
        return Err(Error::Config(format!(
            "latent scatter needs a 2-dimensional latent space, got {}",
            model.latent_dim()
        )));
    }
    let params = model.decode_params(z)?;
    let layout = model.head_layout();
    let rows = (0..z.rows())
        .map(|r| decode_row(params.row(r), &layout, &mut Pick::Median))
        .collect::<Result<_>>()?;
    assemble(model, rows)
}

pub fn emit_latent_scatter(
    model: &CwdaeModel,
    schema: &TabularSchema,
    mode: LatentSampling,
) -> Result<LatentScatter> {
    check_schema(model, schema)?;
    let z = latent_points(mode)?;
    let decoded = decode_median(model, &z)?;
    Ok(LatentScatter { z, decoded })
}
