//! `manifest.txt`: plain `key: value` lines describing one command run.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cwdae_core::{Error, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::File {
        path: path.into(),
        source: e,
    })?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::File {
            path: path.into(),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub struct Manifest {
    command: String,
    started: Instant,
    config: Vec<(String, String)>,
    inputs: Vec<(String, PathBuf, String)>,
    outputs: Vec<(String, PathBuf)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            started: Instant::now(),
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, key: &str, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((key.into(), path.into(), digest));
        Ok(())
    }

    pub fn output(&mut self, key: &str, path: &Path) {
        self.outputs.push((key.into(), path.into()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "binary: cwdae {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "git_describe: {}", env!("CWDAE_GIT_DESCRIBE"));
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}: {v}");
        }
        for (k, p, d) in &self.inputs {
            let _ = writeln!(s, "input.{k}: {}", p.display());
            let _ = writeln!(s, "input.{k}.sha256: {d}");
        }
        for (k, p) in &self.outputs {
            let _ = writeln!(s, "output.{k}: {}", p.display());
        }
        let _ = writeln!(
            s,
            "wall_clock_seconds: {:.3}",
            self.started.elapsed().as_secs_f64()
        );
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, self.render()).map_err(|e| Error::File {
            path: path.clone(),
            source: e,
        })?;
        Ok(path)
    }
}
