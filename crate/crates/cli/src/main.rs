//! `fracsub` batch driver. Exit codes: 0 pass, 1 structured failure, 2 usage.

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracsub::asymptotics::{incomplete_gamma_f, karamata_pair_check, kernel_svf_check, MonotoneFn, LAMBDA_PROBES, TIME_PROBES};
use fracsub::experiment::{heat_probes, run_experiment, subordinate_probes, ExperimentConfig, McConfig, Stage, StageError};
use fracsub::laplace::GDensity;
use fracsub::montecarlo::laplace_exponent_check;
use fracsub::selftest::{run_selftests, Suite};
use fracsub::series::{FitModel, SeriesTag, TimeSeries};
use fracsub::special::gamma_fn;
use fracsub::subordination::fit_decay;
use fracsub::{Error, KernelSpec};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fracsub", version, about = "Subordinated fractional heat flows: kernels, inversion, Monte Carlo and long-time fits")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct KernelArg {
    /// Kernel as JSON, e.g. '{"class":"stable","params":{"theta":0.5}}';
    /// taken from --config when absent.
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate K(λ), Φ(λ), k(t), the slowly varying part and admissibility.
    KernelEval {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, num_args = 1.., default_values_t = [1e-3, 1.0, 1e3])]
        lambda: Vec<f64>,
        #[arg(long, num_args = 1.., default_values_t = [1e-2, 1.0, 1e2])]
        t: Vec<f64>,
    },
    /// Tabulate the inverse-subordinator density G_t(τ) as CSV (t,tau,G).
    GDensity {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, num_args = 1.., default_values_t = [1.0])]
        t: Vec<f64>,
        /// Number of τ points per time, spread over [0, τ_max(10^-10)].
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Solve the fractional heat equation at the probe points over the time grid.
    HeatSolve,
    /// Subordinate the probe series: v^E on the time grid.
    Subordinate,
    /// Fit M ≈ c·t^p·(ln t)^{-κ} to a (t,value) CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Fit window; the configured one when absent.
        #[arg(long, num_args = 2)]
        window: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Model::PurePower)]
        model: Model,
    },
    /// Monte Carlo check of E[e^{-λS_t}] = e^{-tΦ(λ)}.
    McCheck {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Path count; mc.n_paths from the config, else 10^5.
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Tauberian self-check on U(t) = t^ρ/Γ(1+ρ) plus the incomplete-gamma ratio.
    Tauberian {
        #[arg(long, default_value_t = 0.7)]
        rho: f64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[command(flatten)]
        kernel: KernelArg,
    },
    /// Run module invariant suites.
    Selftest {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Run the full experiment and write series, fits and the summary.
    Report,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Model {
    PurePower,
    PowerWithLog,
}

enum Failure {
    Usage(String),
    Stage(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> Failure {
    move |source| Failure::Stage(StageError { stage, source })
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>, Failure> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut c = ExperimentConfig::load(path).map_err(at(Stage::Config))?;
    if let Some(out) = &cli.out {
        c.output_dir = out.clone();
    }
    if let (Some(seed), Some(mc)) = (cli.seed, c.mc.as_mut()) {
        mc.seed = seed;
    }
    Ok(Some(c))
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    load_config(cli)?.ok_or_else(|| Failure::Usage("this subcommand needs --config".into()))
}

fn kernel(cli: &Cli, arg: &KernelArg) -> Result<KernelSpec, Failure> {
    if let Some(text) = &arg.kernel {
        return serde_json::from_str(text).map_err(|e| Failure::Usage(format!("--kernel: {e}")));
    }
    load_config(cli)?
        .map(|c| c.kernel)
        .ok_or_else(|| Failure::Usage("give --kernel or --config".into()))
}

/// Writes `name` under --out when given, else prints to stdout.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(dir) => write_file(dir, name, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let w = || -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text)
    };
    w().map_err(|e| at(Stage::Output)(e.into()))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::KernelEval { kernel: k, lambda, t } => kernel_eval(cli, &kernel(cli, k)?, lambda, t),
        Command::GDensity { kernel: k, t, points } => g_density(cli, &kernel(cli, k)?, t, *points),
        Command::HeatSolve => heat_solve(cli),
        Command::Subordinate => subordinate(cli),
        Command::Fit { input, window, model } => fit(cli, input, window.as_deref(), *model),
        Command::McCheck { kernel: k, t, lambda, paths } => mc_check(cli, &kernel(cli, k)?, *t, *lambda, *paths),
        Command::Tauberian { rho, theta, eps, kernel: k } => {
            let spec = if k.kernel.is_some() || cli.config.is_some() { Some(kernel(cli, k)?) } else { None };
            tauberian(cli, *rho, *theta, *eps, spec.as_ref())
        }
        Command::Selftest { suite } => {
            let suite = Suite::parse(suite).map_err(|e| Failure::Usage(e.to_string()))?;
            let r = run_selftests(suite);
            emit(cli, "selftest.json", &r.to_json())?;
            Ok(r.pass)
        }
        Command::Report => {
            let config = require_config(cli)?;
            let r = run_experiment(&config)?;
            println!("{}", r.to_json());
            Ok(r.pass)
        }
    }
}

fn kernel_eval(cli: &Cli, spec: &KernelSpec, lambdas: &[f64], times: &[f64]) -> Outcome {
    let e = at(Stage::Config);
    let mut symbol = Vec::new();
    for &l in lambdas {
        symbol.push(json!({
            "lambda": l,
            "K": spec.k_laplace(l).map_err(&e)?,
            "Phi": spec.phi(l).map_err(&e)?,
            "L": spec.svf(1.0 / l).map_err(&e)?,
        }));
    }
    let mut tail = Vec::new();
    for &t in times {
        tail.push(json!({ "t": t, "k": finite(spec.k_time(t).map_err(&e)?) }));
    }
    let adm = spec.admissibility_report();
    let pass = adm.pass;
    let v = json!({
        "kernel": spec,
        "varrho": spec.varrho(),
        "ell": spec.ell(),
        "symbol": symbol,
        "tail": tail,
        "admissibility": adm,
    });
    emit(cli, "kernel_eval.json", &pretty(&v))?;
    Ok(pass)
}

fn g_density(cli: &Cli, spec: &KernelSpec, times: &[f64], points: usize) -> Outcome {
    if points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let e = at(Stage::Subordination);
    let mut csv = String::from("t,tau,G\n");
    for &t in times {
        let g = GDensity::new(spec, t).map_err(&e)?;
        let hi = g.tau_max(1e-10).map_err(&e)?;
        for i in 0..points {
            let tau = hi * i as f64 / (points - 1) as f64;
            writeln!(csv, "{t:e},{tau:e},{:e}", g.density(tau).map_err(&e)?).expect("string write");
        }
    }
    emit(cli, "density.csv", csv.trim_end())?;
    Ok(true)
}

fn heat_solve(cli: &Cli) -> Outcome {
    let config = require_config(cli)?;
    let probes = heat_probes(&config)?;
    let mut norms = Vec::new();
    for (i, (v, mass)) in probes.iter().enumerate() {
        write_file(&config.output_dir, &format!("probe{i}_v.csv"), &v.to_csv())?;
        norms.push(json!({
            "probe": config.probe_points[i],
            "mass": mass.as_ref().map(|m| m.m),
            "l1_time": mass.as_ref().map(|m| finite(m.l1_time)),
            "l1_time_weighted": mass.as_ref().map(|m| finite(m.l1_time_weighted)),
        }));
    }
    let v = json!({ "config_hash": config.hash(), "probes": norms });
    write_file(&config.output_dir, "heat.json", &pretty(&v))?;
    println!("{}", pretty(&v));
    Ok(true)
}

fn subordinate(cli: &Cli) -> Outcome {
    let config = require_config(cli)?;
    for (i, (v, v_e)) in subordinate_probes(&config)?.iter().enumerate() {
        write_file(&config.output_dir, &format!("probe{i}_v.csv"), &v.to_csv())?;
        write_file(&config.output_dir, &format!("probe{i}_v_E.csv"), &v_e.to_csv())?;
    }
    Ok(true)
}

fn fit(cli: &Cli, input: &Path, window: Option<&[f64]>, model: Model) -> Outcome {
    let window = match window {
        Some(w) => [w[0], w[1]],
        None => require_config(cli)
            .map_err(|_| Failure::Usage("give --window or --config".into()))?
            .fit_window,
    };
    let text = std::fs::read_to_string(input).map_err(|e| at(Stage::Config)(e.into()))?;
    let series = TimeSeries::from_csv(&text, SeriesTag::Cesaro).map_err(at(Stage::Config))?;
    let model = match model {
        Model::PurePower => FitModel::PurePower,
        Model::PowerWithLog => FitModel::PowerWithLog,
    };
    let f = fit_decay(&series, window, model).map_err(at(Stage::Fit))?;
    emit(cli, "fit.json", &f.to_json())?;
    Ok(true)
}

fn mc_check(cli: &Cli, spec: &KernelSpec, t: f64, lambda: f64, paths: Option<usize>) -> Outcome {
    let mc: Option<McConfig> = load_config(cli)?.and_then(|c| c.mc);
    let n = paths.or(mc.as_ref().map(|m| m.n_paths)).unwrap_or(100_000);
    let seed = cli.seed.or(mc.as_ref().map(|m| m.seed)).unwrap_or(0);
    let est = laplace_exponent_check(spec, t, lambda, n, seed).map_err(at(Stage::MonteCarlo))?;
    emit(cli, "mc_check.json", &est.to_json())?;
    Ok(est.covered == Some(true))
}

fn tauberian(cli: &Cli, rho: f64, theta: f64, eps: f64, spec: Option<&KernelSpec>) -> Outcome {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Failure::Usage("--rho must be a nonnegative number".into()));
    }
    let e = at(Stage::Prediction);
    let u = move |t: f64| t.powf(rho) / gamma_fn(1.0 + rho);
    let one = |_: f64| 1.0;
    let k = karamata_pair_check(&MonotoneFn { u: &u, rho, svf: &one }, &LAMBDA_PROBES, &TIME_PROBES).map_err(&e)?;
    let extreme = |r: &[(f64, f64)]| r.last().map_or(f64::NAN, |p| p.1);
    let karamata_pass = (extreme(&k.transform_ratios) - 1.0).abs() < 0.01 && (extreme(&k.time_ratios) - 1.0).abs() < 0.01;
    let igf = incomplete_gamma_f(theta, eps).map_err(&e)?;
    let igf_pass = (igf.ratio - 1.0).abs() < 0.02;
    let mut pass = karamata_pass && igf_pass;
    let mut v = json!({
        "karamata": k,
        "karamata_pass": karamata_pass,
        "incomplete_gamma": igf,
        "incomplete_gamma_pass": igf_pass,
    });
    if let Some(spec) = spec {
        let table = kernel_svf_check(spec).map_err(&e)?;
        pass &= table.pass;
        if let Some(dir) = &cli.out {
            write_file(dir, "svf.csv", &table.to_csv())?;
        }
        v["kernel_svf_pass"] = json!(table.pass);
    }
    emit(cli, "tauberian.json", &pretty(&v))?;
    Ok(pass)
}
