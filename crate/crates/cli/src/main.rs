mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cwdae_core::cramer_wold::Bandwidth;
use cwdae_core::cwdae::{
    load_checkpoint, load_checkpoint_for, parse_gamma, save_checkpoint, train, write_loss_history,
    TrainConfig, TrainOptions,
};
use cwdae_core::data::{EncodedDataset, Table, TabularSchema};
use cwdae_core::heads::Relaxation;
use cwdae_core::metrics::{compare, evaluate, DcrMode, EvalConfig, EvalReport, ForestConfig};
use cwdae_core::synthesis::{emit_latent_scatter, generate, LatentSampling, SynthesisRequest};
use cwdae_core::{Error, Result};

use manifest::Manifest;

#[derive(Parser)]
#[command(
    name = "cwdae",
    version,
    about = "Train, sample and evaluate tabular autoencoders"
)]
struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write `model.ckpt` and `loss.csv`.
    Train(TrainArgs),
    /// Sample a synthetic table into `synthetic.csv`.
    Generate(GenerateArgs),
    /// Score a synthetic table into `report.csv` and `columns.csv`.
    Evaluate(EvaluateArgs),
    /// Rank several reports into `ranks.csv`.
    Compare(CompareArgs),
    /// Decode latent points at their medians into `latent.csv`.
    EmitLatent(LatentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Anneal {
    Epoch,
    Step,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pi: f64,
    #[arg(long, default_value_t = 100)]
    epochs: u64,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Floor of the Gumbel-Softmax temperature schedule.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, default_value_t = 2)]
    latent_dim: usize,
    #[arg(long, default_value_t = 10)]
    knots: usize,
    /// Kernel bandwidth: `silverman` or a positive number.
    #[arg(long, default_value = "silverman", value_parser = gamma_arg)]
    gamma: Bandwidth,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Anneal::Epoch)]
    anneal: Anneal,
}

fn gamma_arg(s: &str) -> std::result::Result<Bandwidth, String> {
    parse_gamma(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Rows to draw; defaults to the training row count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the median of every continuous column.
    #[arg(long)]
    median_only: bool,
    /// Refuse to run unless the checkpoint was trained on this schema.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    real_train: PathBuf,
    /// Held-out real rows for the utility metrics; omit to skip them.
    #[arg(long)]
    real_test: Option<PathBuf>,
    #[arg(long)]
    synth: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// DCR over every real/synthetic pair instead of nearest records.
    #[arg(long)]
    dcr_all_pairs: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, num_args = 2.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LatentMode {
    Prior,
    Grid,
}

#[derive(Args)]
struct LatentArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = LatentMode::Prior)]
    mode: LatentMode,
    /// Prior draws.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    grid_points: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    grid_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    grid_hi: f64,
    #[arg(long)]
    out: PathBuf,
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.into(),
        source: e,
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        lambda: a.lambda,
        tau: a.tau,
        latent_dim: a.latent_dim,
        pi: a.pi,
        knots: a.knots,
        seed: a.seed,
        gamma: a.gamma,
        anneal_per_step: matches!(a.anneal, Anneal::Step),
        relaxation: Relaxation::StraightThrough,
    };
    cfg.validate()?;
    let schema = TabularSchema::load(&a.schema)?;
    let table = Table::read_csv(&a.data, &schema)?;
    let dataset = EncodedDataset::fit(&table)?;
    out_dir(&a.out)?;
    let mut m = Manifest::new("train");
    for (k, v) in cfg.to_pairs() {
        m.config(k, v);
    }
    m.input("data", &a.data)?;
    m.input("schema", &a.schema)?;

    let ckpt = a.out.join("model.ckpt");
    let loss = a.out.join("loss.csv");
    let abort = a.out.join("abort.ckpt");
    let outcome = train(
        &dataset,
        &cfg,
        &TrainOptions {
            abort_checkpoint: Some(abort.clone()),
        },
    );
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            if abort.exists() {
                m.output("abort_checkpoint", &abort);
                m.write(&a.out)?;
            }
            return Err(e);
        }
    };
    save_checkpoint(&outcome.model, &ckpt)?;
    write_loss_history(&loss, &outcome.history)?;
    m.output("checkpoint", &ckpt);
    m.output("loss", &loss);
    m.write(&a.out)?;
    if let Some(last) = outcome.history.last() {
        println!("epoch {} loss {:.6}", last.epoch, last.loss.total);
    }
    println!("wrote {}", ckpt.display());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let model = match &a.schema {
        Some(s) => load_checkpoint_for(&a.checkpoint, &TabularSchema::load(s)?)?,
        None => load_checkpoint(&a.checkpoint)?,
    };
    let req = SynthesisRequest {
        n: a.n.unwrap_or(model.train_rows()),
        seed: a.seed,
        median_only: a.median_only,
    };
    let table = generate(&model, model.schema(), &req)?;
    out_dir(&a.out)?;
    let path = a.out.join("synthetic.csv");
    table.write_csv(&path)?;
    let mut m = Manifest::new("generate");
    m.config("n", req.n);
    m.config("seed", req.seed);
    m.config("median_only", req.median_only);
    m.input("checkpoint", &a.checkpoint)?;
    if let Some(s) = &a.schema {
        m.input("schema", s)?;
    }
    m.output("synthetic", &path);
    m.write(&a.out)?;
    println!("wrote {} rows to {}", req.n, path.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let schema = TabularSchema::load(&a.schema)?;
    let train = Table::read_csv(&a.real_train, &schema)?;
    let test = a
        .real_test
        .as_ref()
        .map(|p| Table::read_csv(p, &schema))
        .transpose()?;
    let synth = Table::read_csv(&a.synth, &schema)?;
    let cfg = EvalConfig {
        seed: a.seed,
        forest: ForestConfig {
            n_trees: a.trees,
            ..ForestConfig::default()
        },
        dcr_mode: if a.dcr_all_pairs {
            DcrMode::AllPairs
        } else {
            DcrMode::Nearest
        },
        ..EvalConfig::default()
    };
    let report = evaluate(&train, test.as_ref(), &synth, &cfg)?;
    out_dir(&a.out)?;
    let (metrics, columns) = (a.out.join("report.csv"), a.out.join("columns.csv"));
    report.write(&metrics, &columns)?;
    let mut m = Manifest::new("evaluate");
    m.config("seed", a.seed);
    m.config("trees", a.trees);
    m.config("clusters", cfg.clusters);
    m.config(
        "dcr",
        if a.dcr_all_pairs {
            "all-pairs"
        } else {
            "nearest"
        },
    );
    m.input("real_train", &a.real_train)?;
    if let Some(t) = &a.real_test {
        m.input("real_test", t)?;
    }
    m.input("synth", &a.synth)?;
    m.input("schema", &a.schema)?;
    m.output("report", &metrics);
    m.output("columns", &columns);
    m.write(&a.out)?;
    print!("{}", report.pretty());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let runs = a
        .reports
        .iter()
        .map(|p| Ok((p.display().to_string(), EvalReport::read(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&runs)?;
    out_dir(&a.out)?;
    let path = a.out.join("ranks.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::File {
        path: path.clone(),
        source: e,
    })?;
    table.to_writer(file)?;
    let mut m = Manifest::new("compare");
    for (i, p) in a.reports.iter().enumerate() {
        m.input(&format!("report{i}"), p)?;
    }
    m.output("ranks", &path);
    m.write(&a.out)?;
    for (label, mean) in table.labels.iter().zip(&table.mean_rank) {
        println!("{mean:>6.3}  {label}");
    }
    Ok(())
}

fn cmd_emit_latent(a: LatentArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let mode = match a.mode {
        LatentMode::Prior => LatentSampling::Prior {
            n: a.n,
            seed: a.seed,
        },
        LatentMode::Grid => LatentSampling::Grid {
            points: a.grid_points,
            lo: a.grid_lo,
            hi: a.grid_hi,
        },
    };
    let scatter = emit_latent_scatter(&model, model.schema(), mode)?;
    out_dir(&a.out)?;
    let path = a.out.join("latent.csv");
    scatter.write_csv(&path)?;
    let mut m = Manifest::new("emit-latent");
    match mode {
        LatentSampling::Prior { n, seed } => {
            m.config("mode", "prior");
            m.config("n", n);
            m.config("seed", seed);
        }
        LatentSampling::Grid { points, lo, hi } => {
            m.config("mode", "grid");
            m.config("grid_points", points);
            m.config("grid_lo", format!("{lo:?}"));
            m.config("grid_hi", format!("{hi:?}"));
        }
    }
    m.input("checkpoint", &a.checkpoint)?;
    m.output("latent", &path);
    m.write(&a.out)?;
    println!("wrote {} rows to {}", scatter.z.rows(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::EmitLatent(a) => cmd_emit_latent(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
