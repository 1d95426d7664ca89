use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mlgp::protocol::{
    derive_seed, fit, save_csv, write_records, write_results_table, DatasetFamily, ProtocolConfig,
};
use mlgp::{
    export_spheres, isometry_test, make_dataset, Activation, AdamConfig, Checkpoint,
    LabeledShapeSet, Model, ModelKind, ModelSpec,
};

#[derive(Parser)]
#[command(
    name = "mlgp",
    version,
    about = "Geometric perceptron experiments on 3D Tetris shapes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/validation/test CSV files.
    GenData(GenDataArgs),
    /// Train one model on a dataset file and write a checkpoint.
    Train(TrainArgs),
    /// Run the multi-run protocol and write the results table.
    Protocol(ProtocolArgs),
    /// Compare a trained MLGP and its rigidly transformed copy.
    IsometryTest(IsometryArgs),
    /// Write the point-normalized spheres of an MLGP checkpoint.
    ExportSpheres(ExportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// `main` or `theta-split`.
    #[arg(long, default_value = "main")]
    family: DatasetFamily,
    #[arg(long, default_value_t = 1000)]
    train_size: usize,
    #[arg(long, default_value_t = 9000)]
    val_size: usize,
    #[arg(long, default_value_t = 90_000)]
    test_size: usize,
    /// Half-width `a` of the uniform coordinate noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving train.csv, val.csv and test.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 20_000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
}

impl OptimArgs {
    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// `mlp`, `mlhp` or `mlgp`.
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    hidden_units: Option<usize>,
    /// `identity`, `sigmoid`, `tanh` or `relu`.
    #[arg(long)]
    hidden_activation: Option<Activation>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    optim: OptimArgs,
    /// Seed for weight initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, value_delimiter = ',', default_value = "mlp,mlhp,mlgp")]
    models: Vec<ModelKind>,
    #[arg(long, default_value = "main")]
    family: DatasetFamily,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Use 50 runs, a 90000-sample test set and top-10 selection.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    val_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Results table path (`model,dataset,noise,stat,mean,std`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-run records path.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct IsometryArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn load_set(path: &Path) -> Result<LabeledShapeSet> {
    LabeledShapeSet::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn gen_data(args: GenDataArgs) -> Result<ExitCode> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let splits = [
        ("train", args.family.train_kind(), args.train_size),
        ("val", args.family.eval_kind(), args.val_size),
        ("test", args.family.eval_kind(), args.test_size),
    ];
    for (stream, (name, kind, size)) in splits.into_iter().enumerate() {
        let set = make_dataset(
            kind,
            size,
            args.noise,
            derive_seed(args.seed, stream as u64),
        )?;
        let path = args.out_dir.join(format!("{name}.csv"));
        set.save(&path)?;
        eprintln!("wrote {} ({} samples, {kind})", path.display(), set.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let mut spec = ModelSpec::default_for(args.model);
    if let Some(h) = args.hidden_units {
        spec.hidden_units = h;
    }
    if let Some(a) = args.hidden_activation {
        spec.hidden_activation = a;
    }
    let train_set = load_set(&args.train)?;
    let mut model = Model::build(spec, args.seed)?;
    eprintln!(
        "training {} ({} parameters) on {} samples for {} epochs",
        spec.kind,
        model.param_count(),
        train_set.len(),
        args.optim.epochs
    );
    let (optimizer, loss) = fit(&mut model, &train_set, args.optim.epochs, args.optim.adam())?;
    println!(
        "train loss {loss:.6}  accuracy {:.4}",
        model.accuracy(&train_set)
    );
    for (name, path) in [("val", &args.val), ("test", &args.test)] {
        if let Some(path) = path {
            println!("{name} accuracy {:.4}", model.accuracy(&load_set(path)?));
        }
    }
    Checkpoint::new(model, optimizer.step_count()).save(&args.output)?;
    eprintln!("wrote {}", args.output.display());
    Ok(ExitCode::SUCCESS)
}

fn protocol(args: ProtocolArgs) -> Result<ExitCode> {
    let mut config = if args.full_scale {
        ProtocolConfig::full_scale()
    } else {
        ProtocolConfig::desk_scale()
    };
    config.models = args.models.iter().map(|&k| k.into()).collect();
    config.family = args.family;
    config.noise = args.noise;
    config.epochs = args.optim.epochs;
    config.adam = args.optim.adam();
    config.master_seed = args.seed;
    config.threads = args.threads;
    if let Some(v) = args.runs {
        config.runs = v;
    }
    if let Some(v) = args.train_size {
        config.train_size = v;
    }
    if let Some(v) = args.val_size {
        config.val_size = v;
    }
    if let Some(v) = args.test_size {
        config.test_size = v;
    }
    if let Some(v) = args.top_k {
        config.top_k = v;
    }

    let report = mlgp::protocol::run_protocol_with(&config, |r| {
        eprintln!(
            "{} run {:>3}: val {:.4} test {:.4} ({:.1}s)",
            r.model, r.run_id, r.val_accuracy, r.test_accuracy, r.wall_time_secs
        );
    })?;

    let out_of_range = report
        .records
        .iter()
        .any(|r| !(0.0..=1.0).contains(&r.val_accuracy) || !(0.0..=1.0).contains(&r.test_accuracy));

    write_results_table(&report.summary, std::io::stdout().lock())?;
    if let Some(path) = &args.output {
        save_csv(path, |w| write_results_table(&report.summary, w))?;
    }
    if let Some(path) = &args.records {
        save_csv(path, |w| write_records(&report.records, w))?;
    }
    if out_of_range {
        eprintln!("error: accuracy outside [0, 1]");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn isometry(args: IsometryArgs) -> Result<ExitCode> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let test = load_set(&args.test)?;
    let report = isometry_test(&ckpt.model, &test, args.trials, args.seed)?;
    let pct =
        |m: &mlgp::protocol::MeanStd| format!("{:6.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std);
    println!("trials: {}", report.trials);
    println!("{:<18}{:<18}transformed model", "", "original model");
    println!(
        "{:<18}{:<18}{}",
        "original data",
        pct(&report.original_on_original),
        pct(&report.transformed_on_original)
    );
    println!(
        "{:<18}{:<18}{}",
        "transformed data",
        pct(&report.original_on_transformed),
        pct(&report.transformed_on_transformed)
    );
    println!("max logit deviation: {:e}", report.max_logit_deviation);
    if !report.passed() {
        eprintln!("error: transformed model on transformed data does not reproduce the original");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn export(args: ExportArgs) -> Result<ExitCode> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let report = export_spheres(&ckpt.model)?;
    std::fs::write(&args.output, report.to_json()?)
        .with_context(|| format!("writing {}", args.output.display()))?;
    let degenerate = report.spheres.iter().filter(|s| s.degenerate).count();
    let imaginary = report.spheres.iter().filter(|s| s.imaginary).count();
    eprintln!(
        "wrote {} spheres to {} ({imaginary} imaginary, {degenerate} degenerate)",
        report.spheres.len(),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Protocol(a) => protocol(a),
        Command::IsometryTest(a) => isometry(a),
        Command::ExportSpheres(a) => export(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
