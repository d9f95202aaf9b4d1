//! CART random forest for the utility metrics.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heads::argmax;
use crate::numerics::rng::{purpose, stream};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification { classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features tried per split; `None` picks `sqrt(p)` for classification
    /// and `p / 3` for regression.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn features_per_split(&self, p: usize, task: Task) -> usize {
        let auto = match task {
            Task::Classification { .. } => (p as f64).sqrt() as usize,
            Task::Regression => p / 3,
        };
        self.max_features.unwrap_or(auto).clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    /// Mean target, or class frequencies.
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

struct Builder<'a> {
    x: &'a Tensor,
    y: &'a [f64],
    task: Task,
    mtry: usize,
    cfg: &'a ForestConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

/// Running impurity statistics of one side of a split.
#[derive(Clone)]
enum Stats {
    Reg { n: f64, sum: f64, sq: f64 },
    Cls { n: f64, counts: Vec<f64> },
}

impl Stats {
    fn empty(task: Task) -> Self {
        match task {
            Task::Regression => Stats::Reg {
                n: 0.0,
                sum: 0.0,
                sq: 0.0,
            },
            Task::Classification { classes } => Stats::Cls {
                n: 0.0,
                counts: vec![0.0; classes],
            },
        }
    }

    fn push(&mut self, y: f64, sign: f64) {
        match self {
            Stats::Reg { n, sum, sq } => {
                *n += sign;
                *sum += sign * y;
                *sq += sign * y * y;
            }
            Stats::Cls { n, counts } => {
                *n += sign;
                counts[y as usize] += sign;
            }
        }
    }

    /// Node size times impurity (SSE, or n * Gini).
    fn weighted(&self) -> f64 {
        match self {
            Stats::Reg { n, sum, sq } => {
                if *n == 0.0 {
                    0.0
                } else {
                    (sq - sum * sum / n).max(0.0)
                }
            }
            Stats::Cls { n, counts } => {
                if *n == 0.0 {
                    0.0
                } else {
                    n - counts.iter().map(|c| c * c).sum::<f64>() / n
                }
            }
        }
    }
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        match self.task {
            Task::Regression => Node::Leaf(vec![
                idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64,
            ]),
            Task::Classification { classes } => {
                let mut f = vec![0.0; classes];
                for &i in idx {
                    f[self.y[i] as usize] += 1.0;
                }
                f.iter_mut().for_each(|c| *c /= idx.len() as f64);
                Node::Leaf(f)
            }
        }
    }

    fn pure(&self, idx: &[usize]) -> bool {
        let y0 = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == y0)
    }

    /// Best `(score, feature, threshold)` for one feature, if it varies.
    fn best_for(&self, idx: &mut [usize], f: usize) -> Option<(f64, f64)> {
        let x = self.x;
        let p = x.cols();
        let at = |i: usize| x.data()[i * p + f];
        idx.sort_by(|&a, &b| at(a).total_cmp(&at(b)).then(a.cmp(&b)));
        if at(idx[0]) == at(idx[idx.len() - 1]) {
            return None;
        }
        let mut left = Stats::empty(self.task);
        let mut right = Stats::empty(self.task);
        for &i in idx.iter() {
            right.push(self.y[i], 1.0);
        }
        let mut best: Option<(f64, f64)> = None;
        for k in 0..idx.len() - 1 {
            let yi = self.y[idx[k]];
            left.push(yi, 1.0);
            right.push(yi, -1.0);
            let (a, b) = (at(idx[k]), at(idx[k + 1]));
            if a == b {
                continue;
            }
            let score = left.weighted() + right.weighted();
            if best.is_none_or(|(s, _)| score < s) {
                let mid = 0.5 * (a + b);
                best = Some((score, if mid < b { mid } else { a }));
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let stop = idx.len() < self.cfg.min_samples_split
            || self.cfg.max_depth.is_some_and(|m| depth >= m)
            || self.pure(idx);
        let mut split = None;
        if !stop {
            let mut features: Vec<usize> = (0..self.x.cols()).collect();
            features.shuffle(&mut self.rng);
            // keep looking past mtry only while no feature varies
            for (tried, &f) in features.iter().enumerate() {
                if tried >= self.mtry && split.is_some() {
                    break;
                }
                if let Some((score, thr)) = self.best_for(idx, f) {
                    if split.is_none_or(|(s, _, _)| score < s) {
                        split = Some((score, f, thr));
                    }
                }
            }
        }
        let Some((_, feature, threshold)) = split else {
            self.nodes[at] = self.leaf(idx);
            return at;
        };
        let p = self.x.cols();
        let data = self.x.data();
        let mut go_left: Vec<usize> = Vec::with_capacity(idx.len());
        let mut go_right: Vec<usize> = Vec::with_capacity(idx.len());
        for &i in idx.iter() {
            if data[i * p + feature] <= threshold {
                go_left.push(i);
            } else {
                go_right.push(i);
            }
        }
        let left = self.grow(&mut go_left, depth + 1);
        let right = self.grow(&mut go_right, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    task: Task,
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Fit on `x` `[n, p]`. Classification targets are class indices stored
    /// as floats. `stream_tag` separates forests fitted under the same seed.
    pub fn fit(
        x: &Tensor,
        y: &[f64],
        task: Task,
        cfg: &ForestConfig,
        stream_tag: u64,
    ) -> Result<Self> {
        let n = x.rows();
        if n == 0 || y.len() != n {
            return Err(Error::Contract(format!(
                "forest needs matching non-empty x and y, got {n} and {}",
                y.len()
            )));
        }
        if cfg.n_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("forest inputs must be finite".into()));
        }
        if let Task::Classification { classes } = task {
            if y.iter()
                .any(|&v| v < 0.0 || v as usize >= classes || v.fract() != 0.0)
            {
                return Err(Error::Domain(
                    "class labels must be indices below the class count".into(),
                ));
            }
        }
        let mtry = cfg.features_per_split(x.cols(), task);
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream(cfg.seed, &[purpose::FOREST, stream_tag, t as u64]);
                let mut idx: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut b = Builder {
                    x,
                    y,
                    task,
                    mtry,
                    cfg,
                    rng,
                    nodes: Vec::new(),
                };
                b.grow(&mut idx, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { task, trees })
    }

    /// Mean prediction for regression, averaged-vote class for classification.
    pub fn predict(&self, x: &Tensor) -> Vec<f64> {
        (0..x.rows())
            .into_par_iter()
            .map(|r| {
                let row = x.row(r);
                let mut acc = self.trees[0].predict(row).to_vec();
                for t in &self.trees[1..] {
                    for (a, v) in acc.iter_mut().zip(t.predict(row)) {
                        *a += v;
                    }
                }
                match self.task {
                    Task::Regression => acc[0] / self.trees.len() as f64,
                    Task::Classification { .. } => argmax(&acc) as f64,
                }
            })
            .collect()
    }
}
