//! `edbn` command-line tool: generate synthetic data, train, evaluate and
//! predict.
//!
//! Progress and diagnostics go to standard error; final results go to
//! standard output as `key=value` lines.
//!
//! Exit codes: 0 success, 1 usage, 2 data or schema, 3 runtime or numeric.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edbn::data::{generate_synthetic, load_csv, write_csv, CsvOptions, SynthSpec};
use edbn::error::{Error, ErrorKind};
use edbn::metrics::MetricReport;
use edbn::model::{self, param_breakdown};
use edbn::trainer::{self, PretrainMode, TrainConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "edbn",
    version,
    about = "Embedding-based dual-branch network for return prediction"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset as CSV.
    Gen(GenArgs),
    /// Train a model on a CSV dataset.
    Train(TrainArgs),
    /// Report Pearson and MSE of a model on a CSV dataset.
    Eval(EvalArgs),
    /// Write `row_id,prediction` for every row of a CSV file.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Plain-text `key=value` file; keys are flag names without dashes.
    /// Flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 100)]
    ids: usize,
    #[arg(long, default_value_t = 30)]
    features: usize,
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    id_std: f64,
    #[arg(long, default_value_t = 0.5)]
    nonlinearity: f64,
    #[arg(long, default_value_t = 0.5)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Replace missing feature values with zero instead of failing.
    #[arg(long)]
    impute_missing: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model_out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1000)]
    warmup_steps: u64,
    /// Embedding width; defaults to min(64, max(4, ids / 20)).
    #[arg(long)]
    embed_dim: Option<usize>,
    /// none, dense, id or both.
    #[arg(long, default_value = "both")]
    pretrain: String,
    /// Pre-training epochs per branch, counted once against --epochs.
    #[arg(long, default_value_t = 20)]
    pretrain_epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    val_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated feature columns to keep, e.g. f_253,f_231.
    #[arg(long, value_delimiter = ',')]
    features_include: Option<Vec<String>>,
    /// Keep pre-trained branches fixed during joint training.
    #[arg(long)]
    freeze_pretrained: bool,
    /// Train the dense-only ablation (no embedding branch).
    #[arg(long)]
    no_id_branch: bool,
    /// Also report the mean per-time-id Pearson coefficient.
    #[arg(long)]
    per_time: bool,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    per_time: bool,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Turns a config file into flags placed right after the subcommand, so
/// anything on the real command line (parsed later) overrides them.
fn expand_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let path = PathBuf::from(path);
    let text = fs::read_to_string(&path).map_err(|e| {
        Failure::Core(Error::Io {
            path: path.clone(),
            source: e,
        })
    })?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
        })?;
        let key = k.trim().replace('_', "-");
        let v = v.trim();
        if key == "config" {
            return Err(Failure::Usage(
                "config files cannot include other config files".into(),
            ));
        }
        match v {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => injected.push(OsString::from(format!("--{key}={v}"))),
        }
    }
    let mut out = argv;
    let at = 2.min(out.len());
    out.splice(at..at, injected);
    Ok(out)
}

fn csv_options(d: &DataArgs, require_target: bool) -> CsvOptions {
    CsvOptions {
        impute_missing: d.impute_missing,
        require_target,
        ..Default::default()
    }
}

fn print_metrics(m: &MetricReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "pearson={}", m.pearson);
    let _ = writeln!(out, "mse={}", m.mse);
    let _ = writeln!(out, "n={}", m.n);
    if let Some(p) = m.pearson_by_time {
        let _ = writeln!(out, "pearson_by_time={p}");
    }
}

fn run_gen(a: GenArgs) -> CliResult<()> {
    let spec = SynthSpec {
        rows: a.rows,
        ids: a.ids,
        features: a.features,
        weight_scale: a.weight_scale,
        id_std: a.id_std,
        nonlinearity: a.nonlinearity,
        noise_std: a.noise_std,
        seed: a.seed,
    };
    let s = generate_synthetic(&spec)?;
    write_csv(&s.data, &a.out)?;
    eprintln!("wrote {} rows to {}", s.data.len(), a.out.display());
    println!("rows={}", s.data.len());
    println!("ids={}", s.data.vocab().id_count());
    Ok(())
}

fn run_train(a: TrainArgs) -> CliResult<()> {
    let pretrain_mode: PretrainMode = a.pretrain.parse()?;
    let cfg = TrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        total_epochs: a.epochs,
        warmup_steps: a.warmup_steps,
        pretrain_mode,
        pretrain_epochs: a.pretrain_epochs,
        val_fraction: a.val_frac,
        seed: a.seed,
        embed_dim: a.embed_dim,
        id_branch: !a.no_id_branch,
        freeze_pretrained: a.freeze_pretrained,
        per_time_metrics: a.per_time,
        ..Default::default()
    };
    let opts = CsvOptions {
        include_features: a.features_include.clone(),
        ..csv_options(&a.data, true)
    };
    let ds = load_csv(&a.data.data, &opts)?;
    eprintln!(
        "loaded {} rows, {} features, {} ids from {}",
        ds.len(),
        ds.feature_count(),
        ds.vocab().id_count(),
        a.data.data.display()
    );
    let (net, report) = trainer::train(&cfg, &ds)?;
    eprint!("{}", param_breakdown(net.config()));
    model::save(&net, &a.model_out)?;
    if let Some(path) = &a.report_out {
        report.write_csv(path)?;
    }
    eprintln!(
        "trained in {:.1}s, model written to {}",
        report.wall_time.as_secs_f64(),
        a.model_out.display()
    );

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "params={}", net.param_count());
    let _ = writeln!(
        out,
        "compression_ratio={}",
        net.config().compression_ratio()
    );
    let _ = writeln!(out, "checksum={}", report.checksum);
    if let Some(last) = report.epochs.last() {
        let _ = writeln!(out, "train_loss={}", last.train_loss);
        if let Some(p) = last.val_pearson {
            let _ = writeln!(out, "val_pearson={p}");
        }
        if let Some(m) = last.val_mse {
            let _ = writeln!(out, "val_mse={m}");
        }
    }
    if cfg.per_time_metrics {
        let (_, val) = edbn::data::time_split(&ds, cfg.val_fraction)?;
        if val.len() >= 2 {
            drop(out);
            let m = trainer::evaluate_with(&net, &val, true)?;
            if let Some(p) = m.pearson_by_time {
                println!("val_pearson_by_time={p}");
            }
        }
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> CliResult<()> {
    let net = model::load(&a.model)?;
    let ds = load_csv(&a.data.data, &csv_options(&a.data, true))?;
    let m = trainer::evaluate_with(&net, &ds, a.per_time)?;
    eprintln!("evaluated {} rows from {}", m.n, a.data.data.display());
    print_metrics(&m);
    Ok(())
}

fn run_predict(a: PredictArgs) -> CliResult<()> {
    let net = model::load(&a.model)?;
    let ds = load_csv(&a.data.data, &csv_options(&a.data, false))?;
    let pred = trainer::predict(&net, &ds)?;
    write_predictions(&a.out, ds.row_ids(), &pred)?;
    eprintln!("wrote {} predictions to {}", pred.len(), a.out.display());
    println!("rows={}", pred.len());
    Ok(())
}

fn write_predictions(path: &Path, row_ids: &[String], pred: &[f64]) -> Result<(), Error> {
    let mut text = String::from("row_id,prediction\n");
    for (id, p) in row_ids.iter().zip(pred) {
        text.push_str(id);
        text.push(',');
        text.push_str(&p.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(argv: Vec<OsString>) -> CliResult<()> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => return Err(Failure::Usage(e.render().to_string())),
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
    };
    match cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Predict(a) => run_predict(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Runtime => EXIT_RUNTIME,
            })
        }
    }
}
