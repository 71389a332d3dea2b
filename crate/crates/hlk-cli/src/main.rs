//! `hlk`: kernels, solver runs, verification suites and the counterexample
//! table from the command line.
//!
//! Exit codes: 0 pass, 1 a check failed, 2 usage or configuration error,
//! 3 numeric failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hlk::config::init_jobs;
use hlk::engine::{self, SolverConfig};
use hlk::potential::Potential;
use hlk::verify::{counterexample_demo, VerificationReport};
use hlk::{Error, Grid1D, KernelMatrix, Method, RunConfig, Suite};

#[derive(Parser)]
#[command(name = "hlk", version, about = "Half-line Schrödinger heat kernels and their Gaussian bounds")]
struct Cli {
    /// Worker threads; 0 means one per core.
    #[arg(long, global = true, env = "HLK_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Sample a kernel and write plot data (x,y,k,env_main) as CSV.
    Kernel(KernelArgs),
    /// Solve for a kernel and write it in the binary format; prints a summary.
    Solve(KernelArgs),
    /// Run a verification suite and write its JSON report.
    Verify(VerifyArgs),
    /// Run the finite-state oracle suite.
    Oracle(OracleArgs),
    /// Print the weighted-norm table for a positive rate as CSV.
    Demo(DemoArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// Potential: zero, well:s:a:b, exp:s, signed:s:a:b, with optional k* prefix and |n suffix.
    #[arg(long = "V", default_value = "zero")]
    v: String,
    #[arg(long)]
    t: f64,
    #[arg(long = "N", default_value_t = 400)]
    n: usize,
    /// Domain length; by default 4 (or the end of supp V) plus 10√t.
    #[arg(long = "L")]
    length: Option<f64>,
    /// closed-form, duhamel, crank-nicolson or lie-trotter; closed-form when V = 0.
    #[arg(long)]
    method: Option<String>,
    /// Constant of the env_main column.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "V")]
    v: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
    /// Rates of the weighted checks; for the counterexample suite, the positive rate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    xi: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Tolerance override `check=value`, repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0, 16.0])]
    t: Vec<f64>,
    #[arg(long = "L", value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
    lengths: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a verb before it becomes an exit code.
enum Failure {
    Checks,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_jobs(cli.jobs) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let outcome = match cli.verb {
        Verb::Kernel(a) => kernel(a, false),
        Verb::Solve(a) => kernel(a, true),
        Verb::Verify(a) => verify(a),
        Verb::Oracle(a) => oracle(a),
        Verb::Demo(a) => demo(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        // A closed pipe downstream (`| head`) is not an error of ours.
        Err(Failure::Lib(Error::Io(e))) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Error> {
    s.parse()
}

fn kernel(a: KernelArgs, binary: bool) -> Outcome {
    let v: Potential = parse(&a.v)?;
    let method = match &a.method {
        Some(m) => parse(m)?,
        None if v.is_zero() => Method::ClosedForm,
        None => Method::Duhamel,
    };
    if !(a.t > 0.0) || !a.t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be positive, got {}", a.t)).into());
    }
    let length = a.length.unwrap_or_else(|| v.support_end().max(4.0) + 10.0 * a.t.sqrt());
    let grid = Grid1D::new(length, a.n)?;
    let mut cfg = SolverConfig::default();
    if let Some(dt) = a.dt {
        cfg.dt = dt;
    }
    cfg.validate()?;
    let started = Instant::now();
    let k: KernelMatrix = engine::solve(method, &v, a.t, &grid, &cfg)?;
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    if binary {
        let path = a.out.ok_or_else(|| Error::InvalidArgument("solve needs --out for the binary kernel".into()))?;
        let mut w = BufWriter::new(File::create(&path)?);
        k.write_binary(&mut w)?;
        w.flush()?;
        let summary = serde_json::json!({
            "potential": v.id(),
            "method": k.method,
            "t": k.t,
            "n": k.n(),
            "length": length,
            "max": k.max_abs(),
            "error_estimate": k.error_estimate,
            "runtime_ms": runtime_ms,
            "out": path,
        });
        println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
    } else {
        let mut w = sink(&a.out)?;
        k.write_plot_csv(&mut w, a.c)?;
        w.flush()?;
    }
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn emit(report: &VerificationReport, out: &Option<PathBuf>, demo: bool) -> Outcome {
    let text = report.to_json()?;
    match out {
        Some(p) => write_file(p, &text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    for c in &report.checks {
        eprintln!("{} {} (max_ratio {:.6e}, threshold {:.6e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.max_ratio, c.threshold);
    }
    if demo || report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn write_file(p: &Path, text: &str) -> io::Result<()> {
    std::fs::write(p, text)
}

fn verify(a: VerifyArgs) -> Outcome {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = &a.suite {
        cfg.suite = parse::<Suite>(s)?;
    }
    if let Some(v) = &a.v {
        cfg.potential = parse(v)?;
    }
    if let Some(m) = &a.method {
        cfg.method = parse(m)?;
    }
    if let Some(seed) = a.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = a.n {
        cfg.sweep.n = n;
    }
    if let Some(t) = a.t {
        cfg.sweep.t = t;
    }
    if let Some(xi) = a.xi {
        if cfg.suite == Suite::Counterexample {
            match xi.as_slice() {
                [x] => cfg.counterexample.xi = *x,
                _ => return Err(Error::InvalidArgument("the counterexample suite takes one --xi".into()).into()),
            }
        } else {
            cfg.sweep.xi = xi;
        }
    }
    if let Some(p) = a.paths {
        cfg.mc.paths = p;
    }
    if let Some(t) = a.trials {
        cfg.oracle.trials = t;
    }
    for spec in &a.tol {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--tol expects name=value, got `{spec}`")))?;
        let value: f64 = value.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad tolerance `{value}`")))?;
        cfg.tolerances.insert(name.trim().to_string(), value);
    }
    cfg.output = a.out.clone();
    let report = hlk::run(&cfg)?;
    emit(&report, &a.out, cfg.suite.is_demo())
}

fn oracle(a: OracleArgs) -> Outcome {
    let mut cfg = load_config(&a.config)?;
    cfg.suite = Suite::Oracle;
    if let Some(t) = a.trials {
        cfg.oracle.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.mc.seed = s;
    }
    if let Some(r) = a.restarts {
        cfg.oracle.restarts = r;
    }
    cfg.output = a.out.clone();
    let report = hlk::run(&cfg)?;
    emit(&report, &a.out, false)
}

fn demo(a: DemoArgs) -> Outcome {
    let rows = counterexample_demo(a.xi, &a.t, &a.lengths)?;
    let mut w = sink(&a.out)?;
    writeln!(w, "xi,t,L,ratio,y")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.xi, r.t, r.length, r.ratio, r.y)?;
    }
    w.flush()?;
    Ok(())
}
