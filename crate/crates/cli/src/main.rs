use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use rpce::harness::{run_experiment, ExperimentConfig, Method};
use rpce::hermite::{enumerate_basis, BasisMode};
use rpce::numerics::RngStream;
use rpce::problems::ProblemSpec;
use rpce::rotate::{
    fit_adm, fit_gradient_reduced, fit_l1, fit_sadmdr, AdmInit, AdmOptions, FitOptions,
    SurrogateModel, MODEL_FORMAT, MODEL_VERSION,
};
use rpce::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rpce",
    version,
    about = "Sparse Hermite chaos surrogates with rotations and SIR reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    NoInteraction,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one surrogate from a CSV of samples whose last column is the output.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "adm")]
        method: String,
        #[arg(long, default_value_t = 3)]
        order: u32,
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        /// Reduced dimension for sadmdr and gradient-reduced.
        #[arg(long)]
        d_tilde: Option<usize>,
        /// Polynomial order in the reduced variables.
        #[arg(long, default_value_t = 3)]
        reduced_order: u32,
        #[arg(long)]
        reweighted: bool,
        #[arg(long, default_value_t = 9)]
        max_rotations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a replicate study described by a JSON config.
    Experiment {
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write gnuplot-ready curves.
        #[arg(long)]
        tsv: bool,
    },
    /// Evaluate a saved model at the points of a CSV file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Write values here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in problems, or describe one with its defaults.
    Problems { name: Option<String> },
    /// Print library and file-format versions.
    Version,
}

enum Failure {
    Error(Error),
    Partial,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericalFailure(_)
        | Error::Infeasible { .. }
        | Error::Bracket { .. }
        | Error::Degenerate(_)
        | Error::Selection => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, Array2<f64>), Error> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: '{field}' is not a number",
                    path.display(),
                    line + 1
                ))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = header.len();
    let table =
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Config(e.to_string()))?;
    Ok((header, table))
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    samples: &Path,
    out: &Path,
    method: &str,
    order: u32,
    mode: Mode,
    d_tilde: Option<usize>,
    reduced_order: u32,
    reweighted: bool,
    max_rotations: usize,
    seed: u64,
) -> Result<(), Failure> {
    let method: Method = method.parse()?;
    let (_, table) = read_table(samples)?;
    if table.ncols() < 2 || table.nrows() < 2 {
        return Err(Error::Config(
            "samples need at least one input column, the output column and two rows".into(),
        )
        .into());
    }
    let d = table.ncols() - 1;
    let x = table.slice(ndarray::s![.., ..d]);
    let u = table.column(d);
    let mode = match mode {
        Mode::Full => BasisMode::Full,
        Mode::NoInteraction => BasisMode::NoInteraction,
    };
    let fit = FitOptions {
        reweighted,
        ..FitOptions::default()
    };
    let adm = AdmOptions {
        max_rotations,
        fit: fit.clone(),
        ..AdmOptions::default()
    };
    let mut rng = RngStream::new(seed, 0);
    let need_dt =
        || d_tilde.ok_or_else(|| Error::Config(format!("method '{method}' needs --d-tilde")));
    let model = match method {
        Method::Mc => return Err(Error::Config("mc does not produce a model".into()).into()),
        Method::L1 | Method::ReweightedL1 => {
            let basis = enumerate_basis(d, order, mode)?;
            let opts = FitOptions {
                reweighted: method == Method::ReweightedL1 || reweighted,
                ..fit
            };
            fit_l1(x, u, &basis, &opts, &mut rng)?
        }
        Method::Adm | Method::Sadm => {
            let basis = enumerate_basis(d, order, mode)?;
            let init = if method == Method::Adm {
                AdmInit::Identity
            } else {
                AdmInit::Sir
            };
            fit_adm(x, u, &basis, &adm, init, &mut rng)?
        }
        Method::Sadmdr => fit_sadmdr(x, u, need_dt()?, reduced_order, &adm, &mut rng)?,
        Method::GradientReduced => {
            let basis = enumerate_basis(d, order, mode)?;
            let pilot = fit_l1(x, u, &basis, &fit, &mut rng)?;
            fit_gradient_reduced(x, u, &pilot, need_dt()?, reduced_order, &adm, &mut rng)?
        }
    };
    model.save(out)?;
    let (mean, var) = model.moments();
    println!(
        "method={method} N={} d={} converged={} mean={mean} std={}",
        model.basis.len(),
        model.input_dim(),
        model.converged,
        var.sqrt()
    );
    Ok(())
}

fn cmd_experiment(config: &Path, out: Option<PathBuf>, tsv: bool) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("rpce-out"));
    let report = run_experiment(&cfg)?;
    report.write_all(&dir, tsv)?;
    println!(
        "{:<18} {:>6} {:>7} {:>12} {:>12} {:>12} {:>5}",
        "method", "M", "N", "err_mean", "err_std", "rel_l2", "fail"
    );
    let med = |s: Option<rpce::harness::Summary>| {
        s.map_or("-".to_string(), |s| format!("{:.3e}", s.median))
    };
    for c in &report.cells {
        println!(
            "{:<18} {:>6} {:>7} {:>12} {:>12} {:>12} {:>5}",
            c.method.to_string(),
            c.m,
            c.n_basis.map_or("-".into(), |n| n.to_string()),
            med(c.err_mean),
            med(c.err_std),
            med(c.rel_l2),
            c.failures
        );
    }
    for a in &report.advisories {
        println!("advisory: {a}");
    }
    println!("wrote {}", dir.display());
    if report.partial {
        eprintln!("some cells exceeded the failure quota");
        return Err(Failure::Partial);
    }
    Ok(())
}

fn cmd_eval(model: &Path, points: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let model = SurrogateModel::load(model)?;
    let (_, pts) = read_table(points)?;
    let values: Array1<f64> = model.evaluate(pts.view())?;
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(Error::from)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["u"]).map_err(io)?;
    for v in values {
        w.write_record([v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_problems(name: Option<String>) -> Result<(), Failure> {
    match name {
        None => {
            for p in ProblemSpec::all_defaults() {
                println!("{:<13} d={:<4} {}", p.name(), p.dim(), p.description());
            }
        }
        Some(n) => {
            let p = ProblemSpec::default_for(&n)?;
            println!("{}", p.description());
            println!("{}", serde_json::to_string_pretty(&p).map_err(Error::from)?);
            let b = rpce::harness::default_basis(&p);
            let mode = serde_json::to_value(b.mode).map_err(Error::from)?;
            println!(
                "default basis: order {} {}",
                b.order,
                mode.as_str().unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            samples,
            out,
            method,
            order,
            mode,
            d_tilde,
            reduced_order,
            reweighted,
            max_rotations,
            seed,
        } => cmd_fit(
            &samples,
            &out,
            &method,
            order,
            mode,
            d_tilde,
            reduced_order,
            reweighted,
            max_rotations,
            seed,
        ),
        Command::Experiment { config, out, tsv } => cmd_experiment(&config, out, tsv),
        Command::Eval { model, points, out } => cmd_eval(&model, &points, out),
        Command::Problems { name } => cmd_problems(name),
        Command::Version => {
            println!("rpce {}", rpce::VERSION);
            println!("model format {MODEL_FORMAT} v{MODEL_VERSION}");
            println!(
                "report format {} v{}",
                rpce::harness::REPORT_FORMAT,
                rpce::harness::REPORT_VERSION
            );
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
