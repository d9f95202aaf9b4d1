use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cwdae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwdae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cwdae(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    schema: PathBuf,
    train: PathBuf,
    test: PathBuf,
}

/// Deterministic mixed-type table without pulling an RNG into the test.
fn rows(n: usize, offset: usize) -> String {
    let mut csv = String::from("income,age,owner\n");
    for i in 0..n {
        let t = (i + offset) as f64;
        let income = 30.0 + 10.0 * (t * 0.37).sin() + 0.01 * t;
        let age = 20.0 + ((t * 1.3).cos() + 1.0) * 20.0;
        let owner = if (t * 0.71).sin() > 0.0 { "yes" } else { "no" };
        csv.push_str(&format!("{income},{age:.1},{owner}\n"));
    }
    csv
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let schema = root.join("schema.txt");
    std::fs::write(
        &schema,
        "income,continuous\nage,ordinal\nowner,discrete,no|yes\n",
    )
    .unwrap();
    let train = root.join("train.csv");
    std::fs::write(&train, rows(120, 0)).unwrap();
    let test = root.join("test.csv");
    std::fs::write(&test, rows(40, 500)).unwrap();
    Fixture {
        _dir: dir,
        root,
        schema,
        train,
        test,
    }
}

fn train(f: &Fixture, name: &str, epochs: &str, extra: &[&str]) -> PathBuf {
    let out = f.root.join(name);
    let mut args = vec![
        "train",
        "--data",
        s(&f.train),
        "--schema",
        s(&f.schema),
        "--out",
        s(&out),
        "--epochs",
        epochs,
        "--batch-size",
        "64",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

#[test]
fn pipeline_is_reproducible() {
    let f = fixture();
    let a = train(&f, "a", "2", &[]);
    let b = train(&f, "b", "2", &[]);
    let ckpt = |d: &Path| std::fs::read(d.join("model.ckpt")).unwrap();
    assert_eq!(ckpt(&a), ckpt(&b));
    let loss = std::fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);

    let m = manifest(&a);
    assert!(m.contains("command: train\n"));
    assert!(m.contains("config.pi: 0.05\n"));
    assert!(m.contains("config.learning_rate: 0.001\n"));
    assert!(m.contains("config.lambda: 1.0\n"));
    assert!(m.contains("config.tau: 0.2\n"));
    assert!(m.contains("config.latent_dim: 2\n"));
    assert!(m.contains("input.data.sha256: "));
    assert!(m.contains("git_describe: "));

    let model = a.join("model.ckpt");
    let gen = |name: &str, extra: &[&str]| {
        let out = f.root.join(name);
        let mut args = vec![
            "generate",
            "--checkpoint",
            s(&model),
            "--seed",
            "3",
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read_to_string(out.join("synthetic.csv")).unwrap()
    };
    let g1 = gen("g1", &[]);
    let g2 = gen("g2", &["--schema", s(&f.schema)]);
    assert_eq!(g1, g2);
    // default row count follows the training data
    assert_eq!(g1.lines().count(), 121);
    assert_eq!(gen("g0", &["--n", "0"]), "income,age,owner\n");
    assert!(manifest(&f.root.join("g1")).contains("config.n: 120\n"));

    let eval = |name: &str| {
        let out = f.root.join(name);
        ok(&[
            "evaluate",
            "--real-train",
            s(&f.train),
            "--real-test",
            s(&f.test),
            "--synth",
            s(&f.root.join("g1/synthetic.csv")),
            "--schema",
            s(&f.schema),
            "--trees",
            "10",
            "--out",
            s(&out),
        ]);
        (
            std::fs::read_to_string(out.join("report.csv")).unwrap(),
            std::fs::read_to_string(out.join("columns.csv")).unwrap(),
        )
    };
    let (r1, c1) = eval("e1");
    assert_eq!((r1.clone(), c1), eval("e2"));
    assert!(r1.starts_with("metric,value\nks,"));
    assert!(!r1.contains("NA"), "{r1}");
}

#[test]
fn self_evaluation_and_compare() {
    let f = fixture();
    let out = f.root.join("self");
    let stdout = ok(&[
        "evaluate",
        "--real-train",
        s(&f.train),
        "--synth",
        s(&f.train),
        "--schema",
        s(&f.schema),
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("ks"));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    for line in [
        "ks,0.0",
        "w1,0.0",
        "pcd,0.0",
        "dcr_rs,0.0",
        "mape,NA",
        "f1,NA",
    ] {
        assert!(
            report.lines().any(|l| l == line),
            "{line} missing from\n{report}"
        );
    }

    let other = f.root.join("other");
    let shifted = f.root.join("shifted.csv");
    std::fs::write(&shifted, rows(120, 300)).unwrap();
    ok(&[
        "evaluate",
        "--real-train",
        s(&f.train),
        "--synth",
        s(&shifted),
        "--schema",
        s(&f.schema),
        "--out",
        s(&other),
    ]);
    let ranks = f.root.join("ranks");
    ok(&[
        "compare",
        "--reports",
        s(&out.join("report.csv")),
        s(&other.join("report.csv")),
        "--out",
        s(&ranks),
    ]);
    let table = std::fs::read_to_string(ranks.join("ranks.csv")).unwrap();
    assert!(table.starts_with(
        "run,ks,w1,pcd,log_cluster,dcr_rs,dcr_ss,ad_f1_1,ad_f1_10,ad_f1_100,mean_rank\n"
    ));
    assert!(manifest(&ranks).contains("command: compare\n"));

    // a report with a different metric set is refused
    let partial = f.root.join("partial.csv");
    let edited: String = std::fs::read_to_string(other.join("report.csv"))
        .unwrap()
        .lines()
        .map(|l| {
            if l.starts_with("ad_f1_100,") {
                "ad_f1_100,NA".to_string()
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    std::fs::write(&partial, edited).unwrap();
    let out = cwdae(&[
        "compare",
        "--reports",
        s(&out.join("report.csv")),
        s(&partial),
        "--out",
        s(&ranks),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn latent_scatter_outputs() {
    let f = fixture();
    let a = train(&f, "m", "1", &[]);
    let model = a.join("model.ckpt");
    let grid = f.root.join("grid");
    ok(&[
        "emit-latent",
        "--checkpoint",
        s(&model),
        "--mode",
        "grid",
        "--out",
        s(&grid),
    ]);
    let text = std::fs::read_to_string(grid.join("latent.csv")).unwrap();
    assert_eq!(text.lines().count(), 1682);
    assert!(text.starts_with("z1,z2,income,age,owner\n"));
    let prior = |name: &str| {
        let out = f.root.join(name);
        ok(&[
            "emit-latent",
            "--checkpoint",
            s(&model),
            "--n",
            "50",
            "--seed",
            "2",
            "--out",
            s(&out),
        ]);
        std::fs::read(out.join("latent.csv")).unwrap()
    };
    assert_eq!(prior("p1"), prior("p2"));
}

#[test]
fn exit_codes() {
    let f = fixture();
    let out = f.root.join("x");
    // validation: unsupported latent dimension
    let r = cwdae(&[
        "train",
        "--data",
        s(&f.train),
        "--schema",
        s(&f.schema),
        "--out",
        s(&out),
        "--latent-dim",
        "3",
    ]);
    assert_eq!(r.status.code(), Some(2));
    // validation: data that does not match the schema
    let bad = f.root.join("bad.csv");
    std::fs::write(&bad, "income,age,owner\n1,2,maybe\n").unwrap();
    let r = cwdae(&[
        "train",
        "--data",
        s(&bad),
        "--schema",
        s(&f.schema),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("maybe"));
    // unknown flag
    assert_eq!(cwdae(&["train", "--bogus"]).status.code(), Some(2));
    // numerical blow-up: the step size overflows the parameters
    let r = cwdae(&[
        "train",
        "--data",
        s(&f.train),
        "--schema",
        s(&f.schema),
        "--out",
        s(&out),
        "--epochs",
        "3",
        "--batch-size",
        "64",
        "--lr",
        "1e300",
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(String::from_utf8_lossy(&r.stderr).contains("epoch"));
    assert!(out.join("abort.ckpt").exists());
    // schema mismatch on generate
    let a = train(&f, "m", "0", &[]);
    let other = f.root.join("other_schema.txt");
    std::fs::write(
        &other,
        "income,continuous\nage,ordinal\nowner,discrete,no|yes|maybe\n",
    )
    .unwrap();
    let r = cwdae(&[
        "generate",
        "--checkpoint",
        s(&a.join("model.ckpt")),
        "--schema",
        s(&other),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn zero_epochs_checkpoint_is_initialisation() {
    let f = fixture();
    let a = train(&f, "z1", "0", &[]);
    let b = train(&f, "z2", "0", &["--pi", "0.5"]);
    let ca = std::fs::read(a.join("model.ckpt")).unwrap();
    let cb = std::fs::read(b.join("model.ckpt")).unwrap();
    // same seed, same initial weights; only the recorded config differs
    let tail = |c: &[u8]| c[c.windows(11).position(|w| w == b"end_header\n").unwrap()..].to_vec();
    assert_eq!(tail(&ca), tail(&cb));
    assert_eq!(
        std::fs::read_to_string(a.join("loss.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}
