//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing the test harness capture) before asserting.
//!
//! Run with `cargo test -p cwdae-core --test acceptance -- --test-threads=1`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cwdae_core::cramer_wold::{
    cw_distance_sq, marginal_cw_sq, mix_cw_distance_sq, phi_d, psi_d, silverman_gamma, Bandwidth,
    DimKind, MixtureMeasureConfig, SampleBatch,
};
use cwdae_core::cwdae::{
    checkpoint_bytes, train, CwdaeModel, StepNoise, TrainConfig, TrainOptions,
};
use cwdae_core::data::{ColumnData, EncodedDataset, Table, TabularSchema};
use cwdae_core::heads::{gumbel_max_sample, AnnealSchedule, Relaxation, SplineParams};
use cwdae_core::metrics::{
    attribute_disclosure, dcr, evaluate, ks_statistic, log_cluster, pcd, w1_distance, DcrMode,
    EvalConfig, EvalReport,
};
use cwdae_core::numerics::rng::stream;
use cwdae_core::numerics::Tensor;
use cwdae_core::synthesis::{generate, SynthesisRequest};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn verdict(n: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    emit(n, if pass { "PASS" } else { "FAIL" }, name, detail, elapsed);
}

fn emit(n: u32, tag: &str, name: &str, detail: &str, elapsed: Duration) {
    let line = format!(
        "acceptance {n:>2} {tag} {name}: {detail} ({:.1}s)\n",
        elapsed.as_secs_f64()
    );
    // direct write so the line survives output capture
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn gaussian(seed: u64, n: usize, d: usize, shift: f64) -> Tensor {
    let mut r = stream(seed, &[]);
    let data = (0..n * d)
        .map(|_| r.sample::<f64, _>(StandardNormal) + shift)
        .collect();
    Tensor::matrix(n, d, data).unwrap()
}

fn batch(t: &Tensor) -> SampleBatch<'_> {
    SampleBatch::new(t).unwrap()
}

/// `||sm(a) - sm(b)||^2` for 1-D samples smoothed by `N(0, 2 gamma)` kernels.
fn smoothed_l2_1d(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let inv = 1.0 / (4.0 * gamma);
    let k = |u: f64| (-(u * u) * inv).exp();
    let mut acc = 0.0;
    for &p in a {
        for &q in a {
            acc += k(p - q);
        }
        for &q in b {
            acc -= 2.0 * k(p - q);
        }
    }
    for &p in b {
        for &q in b {
            acc += k(p - q);
        }
    }
    acc / ((a.len() * b.len()) as f64 * (4.0 * PI * gamma).sqrt())
}

/// Average of the 1-D distance over uniformly random projection directions.
fn sliced_mc(x: &Tensor, y: &Tensor, gamma: f64, directions: usize, seed: u64) -> f64 {
    let d = x.cols();
    let mut r = stream(seed, &[]);
    let project = |t: &Tensor, v: &[f64]| -> Vec<f64> {
        (0..t.rows())
            .map(|i| t.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let mut total = 0.0;
    for _ in 0..directions {
        let mut v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        total += smoothed_l2_1d(&project(x, &v), &project(y, &v), gamma);
    }
    total / directions as f64
}

#[test]
fn c01_closed_form_matches_monte_carlo_slicing() {
    let t = Instant::now();
    let gamma = silverman_gamma(16).unwrap();
    let x = gaussian(101, 16, 25, 0.0);
    let y = gaussian(102, 16, 25, 0.5);
    let closed = cw_distance_sq(&batch(&x), &batch(&y), gamma, DimKind::Data).unwrap();
    let mc = sliced_mc(&x, &y, gamma, 100_000, 103);
    let rel_d = (closed - mc).abs() / mc;

    let zx = gaussian(104, 16, 2, 0.0);
    let zy = gaussian(105, 16, 2, 0.5);
    let closed2 = cw_distance_sq(&batch(&zx), &batch(&zy), gamma, DimKind::Latent).unwrap();
    let mc2 = sliced_mc(&zx, &zy, gamma, 100_000, 106);
    let rel_2 = (closed2 - mc2).abs() / mc2;

    let pass = rel_d <= 0.05 && rel_2 <= 0.01 && t.elapsed() < Duration::from_secs(60);
    verdict(
        1,
        "closed form vs MC slicing",
        pass,
        &format!("D=25 rel err {rel_d:.4} (<= 0.05), d=2 rel err {rel_2:.5} (<= 0.01)"),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn c02_mixture_decomposition() {
    let t = Instant::now();
    let mut r = stream(201, &[]);
    let mut worst = 0.0f64;
    let mut endpoints_exact = true;
    for draw in 0..100u64 {
        let n = r.random_range(2..20);
        let d = r.random_range(1..8);
        let pi: f64 = r.random();
        let x = gaussian(1000 + draw, n, d, 0.0);
        let y = gaussian(2000 + draw, n, d, r.random_range(-1.0..1.0));
        let mut alphas: Vec<f64> = (0..d).map(|_| r.random_range(0.1..1.0)).collect();
        let s: f64 = alphas.iter().sum();
        alphas.iter_mut().for_each(|a| *a /= s);
        let gamma = r.random_range(0.05..2.0);
        let (bx, by) = (batch(&x), batch(&y));
        let joint = cw_distance_sq(&bx, &by, gamma, DimKind::Data).unwrap();
        let marg = marginal_cw_sq(&bx, &by, &alphas, gamma).unwrap();
        let mix = |pi: f64| {
            let cfg =
                MixtureMeasureConfig::new(pi, alphas.clone(), Bandwidth::Fixed(gamma)).unwrap();
            mix_cw_distance_sq(&bx, &by, &cfg).unwrap()
        };
        worst = worst.max((mix(pi) - (pi * marg + (1.0 - pi) * joint)).abs());
        endpoints_exact &= mix(0.0) == joint && mix(1.0) == marg;
    }
    let pass = worst <= 1e-12 && endpoints_exact && t.elapsed() < Duration::from_secs(5);
    verdict(
        2,
        "mixture decomposition",
        pass,
        &format!("max abs err {worst:.2e} (<= 1e-12), endpoints exact: {endpoints_exact}"),
        t.elapsed(),
    );
    assert!(pass);
}

/// `exp(-x) I0(x)` at `x = s/2` from the power series of `I0`.
fn series_psi(s: f64) -> f64 {
    let x = 0.5 * s;
    let q = 0.25 * x * x;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 1.0f64);
    while term > sum * 1e-18 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum * (-x).exp()
}

#[test]
fn c03_special_functions() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..=10_000 {
        let s = i as f64 * 0.01;
        let exact = series_psi(s);
        worst = worst.max((psi_d(s).unwrap() / exact - 1.0).abs());
    }
    let mut phi_ok = true;
    for dim in [2, 3, 5, 25, 100] {
        phi_ok &= phi_d(0.0, dim).unwrap() == 1.0;
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let v = phi_d(i as f64 * 0.1, dim).unwrap();
            phi_ok &= v < prev;
            prev = v;
        }
    }
    let pass = worst <= 2e-7 && phi_ok && t.elapsed() < Duration::from_secs(5);
    verdict(
        3,
        "special functions",
        pass,
        &format!("psi max rel err {worst:.2e} (<= 2e-7), phi(0)=1 and decreasing: {phi_ok}"),
        t.elapsed(),
    );
    assert!(pass);
}

fn mixed_toy() -> EncodedDataset {
    let schema = TabularSchema::parse("a,continuous\nb,ordinal\nc,discrete,x|y|z\n").unwrap();
    let table = Table::new(
        schema,
        vec![
            ColumnData::Numeric(vec![0.3, -1.2, 2.5, 0.9]),
            ColumnData::Numeric(vec![1.0, 4.0, 2.0, 3.0]),
            ColumnData::Categorical(vec![0, 2, 1, 2]),
        ],
    )
    .unwrap();
    EncodedDataset::fit(&table).unwrap()
}

#[test]
fn c04_loss_gradients_match_finite_differences() {
    let t = Instant::now();
    let ds = mixed_toy();
    let cfg = TrainConfig {
        relaxation: Relaxation::Soft,
        seed: 3,
        ..TrainConfig::default()
    };
    let model = CwdaeModel::init(ds.schema.clone(), ds.stats.clone(), cfg, ds.rows()).unwrap();
    let noise = StepNoise::draw(4, 0, 0, ds.rows(), &ds.schema, 2);
    let temp = 1.3;
    let (_, grads) = model.loss_and_grad(&ds.matrix, &noise, temp).unwrap();
    let base: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let h = 1e-5;
    let (mut checked, mut failed, mut worst) = (0usize, 0usize, 0.0f64);
    for (bi, block) in base.iter().enumerate() {
        for k in 0..block.len() {
            let at = |delta: f64| {
                let mut p = base.clone();
                p[bi].data_mut()[k] += delta;
                model
                    .with_params(p)
                    .unwrap()
                    .loss(&ds.matrix, &noise, temp)
                    .unwrap()
                    .total
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let a = grads[bi].data()[k];
            // gradients below 1e-6 are compared on an absolute scale
            let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
            if rel > 1e-4 {
                failed += 1;
            }
        }
    }
    let pass = failed == 0 && t.elapsed() < Duration::from_secs(120);
    verdict(
        4,
        "gradient integrity",
        pass,
        &format!(
            "{checked} parameters, {failed} over tolerance, max rel err {worst:.2e} (<= 1e-4)"
        ),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn c05_quantile_head_properties() {
    let t = Instant::now();
    let mut r = stream(501, &[]);
    let (mut monotone, mut intercept) = (true, true);
    for _ in 0..10_000 {
        let knots = r.random_range(0..20usize);
        let g0: f64 = r.random_range(-50.0..50.0);
        let slopes: Vec<f64> = (0..=knots).map(|_| r.random_range(-20.0..20.0)).collect();
        let sp = SplineParams::new(g0, slopes).unwrap();
        let mut a: [f64; 2] = [r.random(), r.random()];
        a.sort_by(f64::total_cmp);
        monotone &= sp.quantile(a[0]).unwrap() <= sp.quantile(a[1]).unwrap();
        intercept &= sp.quantile(0.0).unwrap() == g0;
    }
    let pass = monotone && intercept && t.elapsed() < Duration::from_secs(5);
    verdict(
        5,
        "quantile head",
        pass,
        &format!("10^4 draws monotone: {monotone}, Q(0) = intercept: {intercept}"),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn c06_gumbel_max_and_schedule() {
    let t = Instant::now();
    let mut r = stream(601, &[]);
    let mut min_p = 1.0f64;
    for s in 0..20u64 {
        let k = r.random_range(2..10usize);
        let w: Vec<f64> = (0..k)
            .map(|_| -r.random_range(f64::EPSILON..1.0f64).ln())
            .collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
        let draws = 100_000;
        let mut counts = vec![0usize; k];
        let mut g = stream(602, &[s]);
        for _ in 0..draws {
            counts[gumbel_max_sample(&probs, &mut g).unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&o, &p)| {
                let e = p * draws as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new((k - 1) as f64).unwrap().cdf(chi2);
        min_p = min_p.min(p);
    }
    let sched = AnnealSchedule::default();
    let formula = |e: f64| (10.0 * (-0.025 * e).exp()).max(0.2);
    let schedule_ok = [0u64, 92, 200]
        .iter()
        .all(|&e| sched.temperature(e) == formula(e as f64))
        && sched.temperature(0) == 10.0
        && sched.temperature(200) == 0.2;
    let pass = min_p > 0.01 && schedule_ok;
    verdict(
        6,
        "sampling exactness",
        pass,
        &format!(
            "min chi-square p over 20 simplices {min_p:.4} (> 0.01), schedule exact: {schedule_ok} (T(92) = {:.6})",
            sched.temperature(92)
        ),
        t.elapsed(),
    );
    assert!(pass);
}

fn table(schema: &str, cols: Vec<ColumnData>) -> Table {
    Table::new(TabularSchema::parse(schema).unwrap(), cols).unwrap()
}

/// Macro F1 over the labels present in either vector.
fn oracle_macro_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let mut labels: Vec<usize> = truth.iter().chain(pred).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let mut sum = 0.0;
    for &l in &labels {
        let tp = truth
            .iter()
            .zip(pred)
            .filter(|(t, p)| **t == l && **p == l)
            .count() as f64;
        let fp = truth
            .iter()
            .zip(pred)
            .filter(|(t, p)| **t != l && **p == l)
            .count() as f64;
        let fneg = truth
            .iter()
            .zip(pred)
            .filter(|(t, p)| **t == l && **p != l)
            .count() as f64;
        sum += if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fneg)
        };
    }
    sum / labels.len() as f64
}

fn metric_fixtures() -> Vec<(&'static str, bool)> {
    let mut out = Vec::new();
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;

    out.push((
        "ks a=b",
        ks_statistic(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap() == 0.0,
    ));
    out.push((
        "ks disjoint",
        ks_statistic(&[0.0, 0.0], &[1.0, 1.0]).unwrap() == 1.0,
    ));
    out.push((
        "ks {1,2} vs {1,3}",
        ks_statistic(&[1.0, 2.0], &[1.0, 3.0]).unwrap() == 0.5,
    ));

    out.push((
        "w1 a=b",
        w1_distance(&[0.5, 2.0], &[2.0, 0.5]).unwrap() == 0.0,
    ));
    out.push((
        "w1 {0,1} vs {1,2}",
        close(w1_distance(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0, 1e-12),
    ));
    out.push((
        "w1 {0} vs {0,2}",
        close(w1_distance(&[0.0], &[0.0, 2.0]).unwrap(), 1.0, 1e-12),
    ));

    let two = "u,continuous\nv,continuous\n";
    let real = table(
        two,
        vec![
            ColumnData::Numeric(vec![1.0, -1.0, 1.0, -1.0]),
            ColumnData::Numeric(vec![1.0, 1.0, -1.0, -1.0]),
        ],
    );
    let corr = table(
        two,
        vec![
            ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0]),
            ColumnData::Numeric(vec![2.0, 4.0, 6.0, 8.0]),
        ],
    );
    out.push(("pcd synth=real", pcd(&real, &real).unwrap().value == 0.0));
    out.push((
        "pcd independent vs rho=1",
        close(pcd(&real, &corr).unwrap().value, 2f64.sqrt(), 1e-12),
    ));
    let permuted = corr.select_rows(&[2, 0, 3, 1]);
    out.push((
        "pcd row permutation",
        close(
            pcd(&real, &permuted).unwrap().value,
            pcd(&real, &corr).unwrap().value,
            1e-12,
        ),
    ));

    let blob = gaussian(701, 200, 2, 0.0);
    let log_eps = 1e-12f64.ln();
    out.push((
        "log_cluster synth=real",
        log_cluster(&blob, &blob, 20, 0).unwrap() == log_eps,
    ));
    let far = gaussian(702, 200, 2, 50.0);
    let near = gaussian(703, 200, 2, 0.0);
    let split = log_cluster(&near, &far, 2, 0).unwrap();
    out.push(("log_cluster two blobs", close(split, 0.25f64.ln(), 1e-12)));
    let mixed_r = gaussian(704, 150, 3, 0.0);
    let mixed_s = gaussian(705, 90, 3, 0.4);
    out.push((
        "log_cluster label swap",
        close(
            log_cluster(&mixed_r, &mixed_s, 5, 1).unwrap(),
            log_cluster(&mixed_s, &mixed_r, 5, 1).unwrap(),
            1e-12,
        ),
    ));

    let grid: Vec<f64> = (0..50)
        .flat_map(|i| [(i % 10) as f64 * 10.0, (i / 10) as f64 * 10.0])
        .collect();
    let reals = Tensor::matrix(50, 2, grid).unwrap();
    out.push((
        "dcr synth=real",
        dcr(&reals, &reals, DcrMode::Nearest).unwrap().rs == 0.0,
    ));
    let c = 1.5;
    let shift = reals.map(|v| v + c / 2f64.sqrt());
    out.push((
        "dcr translated copy",
        close(dcr(&reals, &shift, DcrMode::Nearest).unwrap().rs, c, 1e-12),
    ));
    let dup = Tensor::matrix(4, 2, vec![1.0, 2.0, 1.0, 2.0, 5.0, 5.0, 5.0, 5.0]).unwrap();
    out.push((
        "dcr duplicated synth",
        dcr(&reals, &dup, DcrMode::Nearest).unwrap().ss == Some(0.0),
    ));

    let ad_schema = "x,continuous\nc,discrete,a|b\n";
    let mut r = stream(706, &[]);
    let n = 2000;
    let xs: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let mut cs: Vec<usize> = (0..n).map(|i| i % 2).collect();
    cs.shuffle(&mut r);
    let real = table(
        ad_schema,
        vec![
            ColumnData::Numeric(xs.clone()),
            ColumnData::Categorical(cs.clone()),
        ],
    );
    out.push((
        "ad synth=real k=1",
        attribute_disclosure(&real, &real, &[1]).unwrap()[0] == Some(1.0),
    ));
    let mut shuffled = cs.clone();
    shuffled.shuffle(&mut r);
    let synth = table(
        ad_schema,
        vec![
            ColumnData::Numeric(xs.clone()),
            ColumnData::Categorical(shuffled),
        ],
    );
    let f1 = attribute_disclosure(&real, &synth, &[1]).unwrap()[0].unwrap();
    out.push(("ad shuffled k=1", close(f1, 0.5, 0.05)));
    let small = real.select_rows(&(0..301).collect::<Vec<_>>());
    let counts = small.categorical(1).iter().fold([0usize; 2], |mut a, &l| {
        a[l] += 1;
        a
    });
    let majority = if counts[1] > counts[0] { 1 } else { 0 };
    let expect = oracle_macro_f1(real.categorical(1), &vec![majority; n]);
    let got = attribute_disclosure(&real, &small, &[small.rows()]).unwrap()[0].unwrap();
    out.push(("ad k = synth size", close(got, expect, 1e-12)));
    out
}

#[test]
fn c07_metric_fixtures() {
    let t = Instant::now();
    let results = metric_fixtures();
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let pass = failed.is_empty() && t.elapsed() < Duration::from_secs(30);
    verdict(
        7,
        "metric oracles",
        pass,
        &format!("{} fixtures, failed: {failed:?}", results.len()),
        t.elapsed(),
    );
    assert!(pass);
}

const SWEEP_PIS: [f64; 2] = [0.05, 0.9];
const SWEEP_SEEDS: u64 = 5;
const SWEEP_ROWS: usize = 5000;

/// Two correlated standard normals (rho = 0.7) and a binary column driven by the first.
fn correlated_toy() -> Table {
    let mut r = stream(801, &[]);
    let rho: f64 = 0.7;
    let (mut x, mut y, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..SWEEP_ROWS {
        let u: f64 = r.sample(StandardNormal);
        let v: f64 = r.sample(StandardNormal);
        let w: f64 = r.sample(StandardNormal);
        x.push(u);
        y.push(rho * u + (1.0 - rho * rho).sqrt() * v);
        b.push(usize::from(u + 0.5 * w > 0.0));
    }
    table(
        "x,continuous\ny,continuous\nb,discrete,no|yes\n",
        vec![
            ColumnData::Numeric(x),
            ColumnData::Numeric(y),
            ColumnData::Categorical(b),
        ],
    )
}

struct SweepRun {
    pi: f64,
    trained: EvalReport,
    baseline: EvalReport,
}

struct Sweep {
    runs: Vec<SweepRun>,
    elapsed: Duration,
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let t = Instant::now();
        let real = correlated_toy();
        let ds = EncodedDataset::fit(&real).unwrap();
        let eval_cfg = EvalConfig::default();
        let mut runs = Vec::new();
        for pi in SWEEP_PIS {
            for seed in 0..SWEEP_SEEDS {
                let cfg = TrainConfig {
                    pi,
                    seed,
                    ..TrainConfig::default()
                };
                let req = SynthesisRequest {
                    n: SWEEP_ROWS,
                    seed,
                    median_only: false,
                };
                let model = train(&ds, &cfg, &TrainOptions::default()).unwrap().model;
                let synth = generate(&model, &ds.schema, &req).unwrap();
                let untrained =
                    CwdaeModel::init(ds.schema.clone(), ds.stats.clone(), cfg, ds.rows()).unwrap();
                let noise = generate(&untrained, &ds.schema, &req).unwrap();
                runs.push(SweepRun {
                    pi,
                    trained: evaluate(&real, None, &synth, &eval_cfg).unwrap(),
                    baseline: evaluate(&real, None, &noise, &eval_cfg).unwrap(),
                });
            }
        }
        Sweep {
            runs,
            elapsed: t.elapsed(),
        }
    })
}

fn mean_over(s: &Sweep, pi: f64, f: impl Fn(&EvalReport) -> f64) -> f64 {
    let v: Vec<f64> = s
        .runs
        .iter()
        .filter(|r| r.pi == pi)
        .map(|r| f(&r.trained))
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn c08_pi_trade_off_trend() {
    let s = sweep();
    let w1 = |pi| mean_over(s, pi, |r| r.w1.unwrap());
    let pcd_m = |pi| mean_over(s, pi, |r| r.pcd.unwrap());
    let (w_lo, w_hi) = (w1(SWEEP_PIS[0]), w1(SWEEP_PIS[1]));
    let (p_lo, p_hi) = (pcd_m(SWEEP_PIS[0]), pcd_m(SWEEP_PIS[1]));
    let beats: Vec<bool> = s
        .runs
        .iter()
        .map(|r| r.trained.ks < r.baseline.ks && r.trained.pcd < r.baseline.pcd)
        .collect();
    let a = w_hi <= w_lo;
    let b = p_hi >= p_lo;
    let c = beats.iter().all(|&x| x);
    let in_budget = s.elapsed < Duration::from_secs(15 * 60);
    let pass = a && b && c;
    verdict(
        8,
        "pi trade-off trend",
        pass,
        &format!(
            "W1 {w_lo:.4} -> {w_hi:.4} (a: {a}), PCD {p_lo:.4} -> {p_hi:.4} (b: {b}), \
             {}/{} runs beat untrained KS and PCD (c: {c}), sweep within 15 min: {in_budget}",
            beats.iter().filter(|&&x| x).count(),
            beats.len()
        ),
        s.elapsed,
    );
    assert!(pass);
}

#[test]
fn c09_determinism() {
    let t = Instant::now();
    let real = correlated_toy().select_rows(&(0..400).collect::<Vec<_>>());
    let ds = EncodedDataset::fit(&real).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 128,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let model = train(&ds, &cfg, &TrainOptions::default()).unwrap().model;
        let synth = generate(
            &model,
            &ds.schema,
            &SynthesisRequest {
                n: 300,
                seed: 4,
                median_only: false,
            },
        )
        .unwrap();
        let mut csv = Vec::new();
        synth.to_writer(&mut csv).unwrap();
        let report = evaluate(&real, Some(&real), &synth, &EvalConfig::default()).unwrap();
        let mut rep = Vec::new();
        report.to_writer(&mut rep).unwrap();
        (checkpoint_bytes(&model), csv, rep)
    };
    let (a, b) = (run(), run());
    let pass = a == b;
    verdict(
        9,
        "determinism",
        pass,
        &format!(
            "checkpoint {} B, synthetic CSV {} B, report {} B identical: {pass}",
            a.0.len(),
            a.1.len(),
            a.2.len()
        ),
        t.elapsed(),
    );
    assert!(pass);
}

#[test]
fn c10_privacy_knob_direction() {
    let s = sweep();
    let dcr_m = |pi| mean_over(s, pi, |r| r.dcr_rs.unwrap());
    let ad_m = |pi| mean_over(s, pi, |r| r.ad_f1[0].unwrap());
    let (d_lo, d_hi) = (dcr_m(SWEEP_PIS[0]), dcr_m(SWEEP_PIS[1]));
    let (a_lo, a_hi) = (ad_m(SWEEP_PIS[0]), ad_m(SWEEP_PIS[1]));
    let consistent = d_hi >= d_lo && a_hi <= a_lo;
    let detail = format!(
        "DCR(R,S) {d_lo:.4} -> {d_hi:.4} (expect up), AD F1 k=1 {a_lo:.4} -> {a_hi:.4} (expect down)"
    );
    // a wrong direction on the toy data is a warning, not a failure
    let tag = if consistent { "PASS" } else { "WARN" };
    emit(10, tag, "privacy knob direction", &detail, s.elapsed);
}
