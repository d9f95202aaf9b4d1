use std::io::{Read, Write};
use std::path::Path;

use crate::data::{encode, Table};
use crate::error::{Error, Result};
use crate::metrics::forest::ForestConfig;
use crate::metrics::joint::{log_cluster, pcd, DEFAULT_CLUSTERS};
use crate::metrics::marginal::{ks_statistic, w1_distance};
use crate::metrics::privacy::{
    attribute_disclosure, continuous_matrix, dcr, reference_stats, DcrMode, DISCLOSURE_K,
};
use crate::metrics::utility::mlu;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Lower,
    Higher,
}

/// Report metrics in file order with the direction that counts as better.
pub const METRICS: [(&str, Direction); 11] = [
    ("ks", Direction::Lower),
    ("w1", Direction::Lower),
    ("pcd", Direction::Lower),
    ("log_cluster", Direction::Lower),
    ("mape", Direction::Lower),
    ("f1", Direction::Higher),
    ("dcr_rs", Direction::Higher),
    ("dcr_ss", Direction::Higher),
    ("ad_f1_1", Direction::Lower),
    ("ad_f1_10", Direction::Lower),
    ("ad_f1_100", Direction::Lower),
];

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub clusters: usize,
    pub forest: ForestConfig,
    pub dcr_mode: DcrMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            clusters: DEFAULT_CLUSTERS,
            forest: ForestConfig::default(),
            dcr_mode: DcrMode::Nearest,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnReport {
    pub column: String,
    pub ks: Option<f64>,
    pub w1: Option<f64>,
    pub mape: Option<f64>,
    pub f1: Option<f64>,
    pub notes: Vec<String>,
}

/// Metrics of one synthetic table. `None` marks a metric that does not apply.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub ks: Option<f64>,
    pub w1: Option<f64>,
    pub pcd: Option<f64>,
    pub log_cluster: Option<f64>,
    pub mape: Option<f64>,
    pub f1: Option<f64>,
    pub dcr_rs: Option<f64>,
    pub dcr_ss: Option<f64>,
    pub ad_f1: [Option<f64>; 3],
    pub columns: Vec<ColumnReport>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Compute every metric of `synth` against the real data. MAPE and F1 need
/// `real_test`.
pub fn evaluate(
    real_train: &Table,
    real_test: Option<&Table>,
    synth: &Table,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let schema = real_train.schema();
    if synth.schema() != schema || real_test.is_some_and(|t| t.schema() != schema) {
        return Err(Error::Contract(
            "real and synthetic tables must share one schema".into(),
        ));
    }
    if real_train.rows() == 0 || synth.rows() == 0 {
        return Err(Error::Domain(
            "evaluation needs non-empty real and synthetic tables".into(),
        ));
    }
    let stats = reference_stats(real_train)?;
    let mut columns: Vec<ColumnReport> = schema
        .columns()
        .iter()
        .map(|c| ColumnReport {
            column: c.name.clone(),
            ..ColumnReport::default()
        })
        .collect();

    let (mut ks, mut w1) = (Vec::new(), Vec::new());
    for (ci, j) in schema.continuous_indices().into_iter().enumerate() {
        let (a, b) = (real_train.numeric(j), synth.numeric(j));
        let k = ks_statistic(a, b)?;
        // W1 in units of the real column's standard deviation
        let w = w1_distance(a, b)? / stats.stds[ci];
        columns[j].ks = Some(k);
        columns[j].w1 = Some(w);
        ks.push(k);
        w1.push(w);
    }

    let pcd = if real_train.rows() >= 2 && synth.rows() >= 2 {
        let p = pcd(real_train, synth)?;
        for name in p.degenerate {
            let base = name.split('=').next().unwrap_or(&name).to_string();
            if let Some(c) = columns.iter_mut().find(|c| c.column == base) {
                c.notes.push(format!("zero variance in pcd ({name})"));
            }
        }
        Some(p.value)
    } else {
        None
    };

    let merged = real_train.rows() + synth.rows();
    let log_cluster = if merged >= cfg.clusters {
        Some(log_cluster(
            &encode(real_train, &stats)?,
            &encode(synth, &stats)?,
            cfg.clusters,
            cfg.seed,
        )?)
    } else {
        None
    };

    let (mut mape, mut f1) = (None, None);
    if let Some(test) = real_test.filter(|t| t.rows() > 0) {
        let forest = ForestConfig {
            seed: cfg.seed,
            ..cfg.forest
        };
        let m = mlu(synth, test, &forest)?;
        for (j, mc) in m.columns.into_iter().enumerate() {
            if schema.columns()[j].kind.is_discrete() {
                columns[j].f1 = mc.score;
                if mc.single_level {
                    columns[j]
                        .notes
                        .push("single level in synthetic training data".into());
                }
            } else {
                columns[j].mape = mc.score;
                if mc.skipped > 0 {
                    columns[j].notes.push(format!(
                        "{} test rows with |y| < 1e-8 left out of mape",
                        mc.skipped
                    ));
                }
            }
        }
        mape = m.mape;
        f1 = m.f1;
    }

    let (dcr_rs, dcr_ss) = if stats.is_empty() {
        (None, None)
    } else {
        let d = dcr(
            &continuous_matrix(real_train, &stats)?,
            &continuous_matrix(synth, &stats)?,
            cfg.dcr_mode,
        )?;
        (Some(d.rs), d.ss)
    };
    let ad = attribute_disclosure(real_train, synth, &DISCLOSURE_K)?;

    Ok(EvalReport {
        ks: mean(&ks),
        w1: mean(&w1),
        pcd,
        log_cluster,
        mape,
        f1,
        dcr_rs,
        dcr_ss,
        ad_f1: [ad[0], ad[1], ad[2]],
        columns,
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}

fn parse_value(s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Report(format!("`{s}` is neither a number nor NA")))
}

impl EvalReport {
    /// Values in [`METRICS`] order.
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            self.ks,
            self.w1,
            self.pcd,
            self.log_cluster,
            self.mape,
            self.f1,
            self.dcr_rs,
            self.dcr_ss,
            self.ad_f1[0],
            self.ad_f1[1],
            self.ad_f1[2],
        ]
    }

    fn from_values(v: [Option<f64>; 11]) -> Self {
        Self {
            ks: v[0],
            w1: v[1],
            pcd: v[2],
            log_cluster: v[3],
            mape: v[4],
            f1: v[5],
            dcr_rs: v[6],
            dcr_ss: v[7],
            ad_f1: [v[8], v[9], v[10]],
            columns: Vec::new(),
        }
    }

    /// `metric,value`, one row per metric, `NA` when absent.
    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "value"])?;
        for ((name, _), v) in METRICS.iter().zip(self.values()) {
            w.write_record([name.to_string(), fmt(v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the metric rows; per-column breakdowns are not restored.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["metric", "value"] {
            return Err(Error::Report("expected header `metric,value`".into()));
        }
        let mut values = [None; 11];
        let mut seen = [false; 11];
        for rec in r.records() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or_default();
            let i = METRICS
                .iter()
                .position(|(m, _)| *m == name)
                .ok_or_else(|| Error::Report(format!("unknown metric `{name}`")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Report(format!("metric `{name}` listed twice")));
            }
            values[i] = parse_value(rec.get(1).unwrap_or_default())?;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Report(format!("metric `{}` missing", METRICS[i].0)));
        }
        Ok(Self::from_values(values))
    }

    /// `column,ks,w1,mape,f1,notes`.
    pub fn columns_to_writer(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["column", "ks", "w1", "mape", "f1", "notes"])?;
        for c in &self.columns {
            w.write_record([
                c.column.clone(),
                fmt(c.ks),
                fmt(c.w1),
                fmt(c.mape),
                fmt(c.f1),
                c.notes.join("; "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, metrics: impl AsRef<Path>, columns: impl AsRef<Path>) -> Result<()> {
        let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::file(p, e));
        self.to_writer(create(metrics.as_ref())?)?;
        self.columns_to_writer(create(columns.as_ref())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_reader(std::fs::File::open(path).map_err(|e| Error::file(path, e))?)
    }

    /// Aligned two-column text for terminals.
    pub fn pretty(&self) -> String {
        METRICS
            .iter()
            .zip(self.values())
            .map(|((name, _), v)| {
                format!(
                    "{name:<12} {}\n",
                    v.map_or("NA".to_string(), |x| format!("{x:.6}"))
                )
            })
            .collect()
    }
}

/// Per-metric ranks (1 = best, ties share the average rank) and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    pub labels: Vec<String>,
    pub metrics: Vec<&'static str>,
    /// `ranks[run][metric]`.
    pub ranks: Vec<Vec<f64>>,
    pub mean_rank: Vec<f64>,
}

/// Average ranks, 1-based, of `values` where lower is better.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rank runs on every metric they all report.
pub fn compare(runs: &[(String, EvalReport)]) -> Result<RankTable> {
    if runs.len() < 2 {
        return Err(Error::Report(format!(
            "compare needs at least 2 reports, got {}",
            runs.len()
        )));
    }
    let present = |r: &EvalReport| r.values().map(|v| v.is_some());
    let first = present(&runs[0].1);
    if let Some((label, _)) = runs.iter().find(|(_, r)| present(r) != first) {
        return Err(Error::Report(format!(
            "`{label}` reports a different metric set from `{}`",
            runs[0].0
        )));
    }
    let used: Vec<usize> = (0..METRICS.len()).filter(|&m| first[m]).collect();
    if used.is_empty() {
        return Err(Error::Report("reports share no metrics".into()));
    }
    let mut ranks = vec![Vec::with_capacity(used.len()); runs.len()];
    for &m in &used {
        let sign = match METRICS[m].1 {
            Direction::Lower => 1.0,
            Direction::Higher => -1.0,
        };
        let v: Vec<f64> = runs
            .iter()
            .map(|(_, r)| sign * r.values()[m].expect("checked"))
            .collect();
        for (row, r) in ranks.iter_mut().zip(average_ranks(&v)) {
            row.push(r);
        }
    }
    let mean_rank = ranks
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    Ok(RankTable {
        labels: runs.iter().map(|(l, _)| l.clone()).collect(),
        metrics: used.iter().map(|&m| METRICS[m].0).collect(),
        ranks,
        mean_rank,
    })
}

impl RankTable {
    /// `run,<metric>...,mean_rank`.
    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["run".to_string()];
        header.extend(self.metrics.iter().map(|m| m.to_string()));
        header.push("mean_rank".into());
        w.write_record(&header)?;
        for ((label, ranks), mean) in self.labels.iter().zip(&self.ranks).zip(&self.mean_rank) {
            let mut row = vec![label.clone()];
            row.extend(ranks.iter().map(|r| format!("{r:?}")));
            row.push(format!("{mean:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
