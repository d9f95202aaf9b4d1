//! Checkpoint files: a UTF-8 header terminated by `end_header\n`, followed by
//! little-endian binary blocks (`u64 rows`, `u64 cols`, then `rows * cols` f64).
//!
//! ```text
//! cwdae-checkpoint
//! version: 1
//! schema_hash: <sha-256 hex>
//! train_rows: 5000
//! config.epochs: 100
//! ...
//! schema: 3
//! <canonical schema lines>
//! blocks: 14
//! end_header
//! ```
//!
//! The binary part holds every parameter block followed by the
//! standardisation means and standard deviations.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::cwdae::config::TrainConfig;
use crate::cwdae::model::CwdaeModel;
use crate::data::{Standardizer, TabularSchema};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &str = "cwdae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Serialise a model to bytes.
pub fn checkpoint_bytes(model: &CwdaeModel) -> Vec<u8> {
    let mut out = Vec::new();
    let schema_text = model.schema.canonical_text();
    let params = model.params();
    let mut header = String::new();
    header.push_str(&format!(
        "{CHECKPOINT_MAGIC}\nversion: {CHECKPOINT_VERSION}\n"
    ));
    header.push_str(&format!("schema_hash: {}\n", model.schema.hash()));
    header.push_str(&format!("train_rows: {}\n", model.train_rows));
    for (k, v) in model.cfg.to_pairs() {
        header.push_str(&format!("config.{k}: {v}\n"));
    }
    header.push_str(&format!("schema: {}\n{schema_text}", model.schema.len()));
    header.push_str(&format!("blocks: {}\nend_header\n", params.len() + 2));
    out.extend_from_slice(header.as_bytes());

    let mut block = |rows: usize, cols: usize, data: &[f64]| {
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for p in params {
        block(p.rows(), p.cols(), p.data());
    }
    let s = &model.stats;
    block(1, s.len(), &s.means);
    block(1, s.len(), &s.stds);
    out
}

pub fn save_checkpoint(model: &CwdaeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(&checkpoint_bytes(model))
        .map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CwdaeModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_checkpoint(&bytes)
}

/// Load and additionally require the model to match `schema`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, schema: &TabularSchema) -> Result<CwdaeModel> {
    let m = load_checkpoint(path)?;
    if m.schema.hash() != schema.hash() {
        return Err(bad(format!(
            "checkpoint was trained on schema {}, not {}",
            m.schema.hash(),
            schema.hash()
        )));
    }
    Ok(m)
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(": "))
        .ok_or_else(|| bad(format!("expected `{key}: ...`, found `{line}`")))
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<CwdaeModel> {
    let mut cur = std::io::Cursor::new(bytes);
    let mut next_line = || -> Result<String> {
        let mut s = String::new();
        let n = cur
            .read_line(&mut s)
            .map_err(|_| bad("header is not UTF-8"))?;
        if n == 0 {
            return Err(bad("truncated header"));
        }
        Ok(s.trim_end_matches('\n').to_string())
    };

    if next_line()? != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version: u32 = field(&next_line()?, "version")?
        .parse()
        .map_err(|_| bad("bad version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "format version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let hash = field(&next_line()?, "schema_hash")?.to_string();
    let train_rows: usize = field(&next_line()?, "train_rows")?
        .parse()
        .map_err(|_| bad("bad train_rows"))?;
    let n_cfg = TrainConfig::default().to_pairs().len();
    let mut cfg_lines = Vec::with_capacity(n_cfg);
    for _ in 0..n_cfg {
        let line = next_line()?;
        let rest = line
            .strip_prefix("config.")
            .ok_or_else(|| bad(format!("expected a config line, found `{line}`")))?;
        let (k, v) = rest
            .split_once(": ")
            .ok_or_else(|| bad(format!("malformed config line `{line}`")))?;
        cfg_lines.push((k.to_string(), v.to_string()));
    }
    let cfg = TrainConfig::from_pairs(cfg_lines.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| bad(e.to_string()))?;
    let n_cols: usize = field(&next_line()?, "schema")?
        .parse()
        .map_err(|_| bad("bad schema line count"))?;
    let mut schema_text = String::new();
    for _ in 0..n_cols {
        schema_text.push_str(&next_line()?);
        schema_text.push('\n');
    }
    let schema = TabularSchema::parse(&schema_text).map_err(|e| bad(e.to_string()))?;
    if schema.hash() != hash {
        return Err(bad("schema hash does not match the embedded schema"));
    }
    let n_blocks: usize = field(&next_line()?, "blocks")?
        .parse()
        .map_err(|_| bad("bad block count"))?;
    if next_line()? != "end_header" {
        return Err(bad("missing end_header"));
    }

    let mut blocks = Vec::with_capacity(n_blocks);
    for i in 0..n_blocks {
        let mut u = [0u8; 8];
        let mut dims = [0usize; 2];
        for d in &mut dims {
            cur.read_exact(&mut u)
                .map_err(|_| bad(format!("block {i} truncated")))?;
            *d = u64::from_le_bytes(u) as usize;
        }
        let len = dims[0]
            .checked_mul(dims[1])
            .filter(|l| l * 8 <= bytes.len())
            .ok_or_else(|| bad(format!("block {i} has an impossible shape")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            cur.read_exact(&mut u)
                .map_err(|_| bad(format!("block {i} truncated")))?;
            data.push(f64::from_le_bytes(u));
        }
        blocks.push(Tensor::matrix(dims[0], dims[1], data)?);
    }
    if (cur.position() as usize) != bytes.len() {
        return Err(bad("trailing bytes after the last block"));
    }
    if n_blocks < 2 {
        return Err(bad("missing standardisation blocks"));
    }
    let stds = blocks.pop().expect("checked").into_data();
    let means = blocks.pop().expect("checked").into_data();
    let stats = Standardizer { means, stds };
    if stats.len() != schema.continuous_indices().len() || stats.stds.len() != stats.means.len() {
        return Err(bad("standardisation blocks do not match the schema"));
    }
    CwdaeModel::from_parts(schema, stats, cfg, train_rows, blocks)
}
