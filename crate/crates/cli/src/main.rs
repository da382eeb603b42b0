//! Command-line front end for the one-leg scheme experiments.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 solver
//! failure, 4 a study check did not hold.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::Value;

use oneleg::harness::{
    self, convergence_study, entropy_decay_report, scheme_report, write_convergence,
    write_schemes, write_snapshot, write_trace, ProblemSpec,
};
use oneleg::Error;

#[derive(Parser)]
#[command(name = "oneleg", version, about = "Entropy-dissipative one-leg schemes")]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// JSON problem specification.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in specification used when no config file is given.
    #[arg(long, default_value = "skt-test-b", value_parser = ["skt-test-b", "dlss"])]
    preset: String,
    /// `dotted.key=value` applied to the specification; the value is parsed
    /// as JSON, falling back to a string.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes trace.csv and snapshots/.
    Run(SpecArgs),
    /// Convergence-rate study against a fine reference run.
    Converge {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated, strictly decreasing step sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        /// Reference step size; defaults to min(taus)/16.
        #[arg(long)]
        tau_ref: Option<f64>,
        /// Comparison time.
        #[arg(long)]
        tm: f64,
        /// Fail with exit code 4 unless the fitted rate lies in LO,HI.
        #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
        expect_rate: Option<Vec<f64>>,
    },
    /// Entropy-decay study; writes trace.csv.
    Entropy {
        #[command(flatten)]
        spec: SpecArgs,
        /// Fail with exit code 4 if the entropy ever increases.
        #[arg(long)]
        require_monotone: bool,
        /// Fail with exit code 4 if the log-linear fit has lower R^2.
        #[arg(long)]
        min_r2: Option<f64>,
    },
    /// Scheme catalogue with G-stability certification; writes schemes.csv.
    Schemes {
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() {
            3
        } else if matches!(e, Error::Io(_) | Error::Csv(_)) {
            1
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn check_failed(message: String) -> Failure {
    Failure { code: 4, message }
}

fn preset(name: &str) -> ProblemSpec {
    match name {
        "dlss" => ProblemSpec::dlss_default(),
        _ => ProblemSpec::skt_test_b(),
    }
}

/// Sets `key` (dotted path) in `root` to `raw`, parsed as JSON if possible.
fn apply_override(root: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {assignment:?} is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| config_error(format!("override {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(config_error(format!("empty override key in {assignment:?}")))
}

fn load_spec(args: &SpecArgs) -> Result<ProblemSpec, Failure> {
    let mut value = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => serde_json::to_value(preset(&args.preset)).expect("preset serializes"),
    };
    for o in &args.overrides {
        apply_override(&mut value, o)?;
    }
    let spec = ProblemSpec::from_json(&value.to_string())?;
    Ok(spec)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {e}", path.display()),
    })?))
}

fn write_run_outputs(
    out: &Path,
    spec: &ProblemSpec,
    traj: &oneleg::integrator::Trajectory,
) -> Result<harness::EntropyDecayReport, Failure> {
    let report = entropy_decay_report(spec, traj)?;
    let mut f = create(&out.join("trace.csv"))?;
    write_trace(&mut f, spec, &report)?;
    f.flush()?;
    if !traj.snapshots.is_empty() {
        let dir = out.join("snapshots");
        fs::create_dir_all(&dir)?;
        for s in &traj.snapshots {
            let mut f = create(&dir.join(format!("step_{}.csv", s.step)))?;
            write_snapshot(&mut f, &s.state, s.step, s.time, spec.alpha.0)?;
            f.flush()?;
        }
    }
    Ok(report)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let spec = load_spec(&args)?;
            fs::create_dir_all(&args.out)?;
            match harness::run(&spec)? {
                Ok(traj) => {
                    let report = write_run_outputs(&args.out, &spec, &traj)?;
                    println!(
                        "steps={} H_final={} monotone={} min_w={}",
                        traj.records.len(),
                        report.trace.last().map_or(f64::NAN, |r| r.h),
                        report.monotone,
                        report.min_w
                    );
                    Ok(())
                }
                Err(failure) => {
                    // keep what was computed before the failure
                    write_run_outputs(&args.out, &spec, &failure.partial)?;
                    Err(failure.error.into())
                }
            }
        }
        Command::Converge {
            spec: args,
            taus,
            tau_ref,
            tm,
            expect_rate,
        } => {
            let spec = load_spec(&args)?;
            fs::create_dir_all(&args.out)?;
            let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
            let tau_ref = tau_ref.unwrap_or(tau_min / 16.0);
            info!("reference step {tau_ref:e}");
            let report = convergence_study(&spec, &taus, tau_ref, tm)?;
            let mut f = create(&args.out.join("convergence.csv"))?;
            write_convergence(&mut f, &spec, &report)?;
            f.flush()?;
            println!("rate={} r_squared={}", report.rate, report.r_squared);
            if let Some(range) = expect_rate {
                let [lo, hi] = range[..] else {
                    return Err(config_error("--expect-rate needs LO,HI".into()));
                };
                if !(report.rate >= lo && report.rate <= hi) {
                    return Err(check_failed(format!(
                        "fitted rate {} outside [{lo}, {hi}]",
                        report.rate
                    )));
                }
            }
            Ok(())
        }
        Command::Entropy {
            spec: args,
            require_monotone,
            min_r2,
        } => {
            let spec = load_spec(&args)?;
            fs::create_dir_all(&args.out)?;
            let traj = harness::run(&spec)?.map_err(|f| Failure::from(f.error))?;
            let report = write_run_outputs(&args.out, &spec, &traj)?;
            println!(
                "decay_rate={} r_squared={} monotone={} H_star={}",
                report.rate, report.r_squared, report.monotone, report.h_star
            );
            if require_monotone && !report.monotone {
                return Err(check_failed(format!(
                    "entropy increased (largest relative increase {:e})",
                    report.max_relative_increase
                )));
            }
            if let Some(min) = min_r2 {
                if report.r_squared.is_nan() || report.r_squared < min {
                    return Err(check_failed(format!(
                        "log-linear fit R^2 = {} below {min}",
                        report.r_squared
                    )));
                }
            }
            Ok(())
        }
        Command::Schemes { out } => {
            fs::create_dir_all(&out)?;
            let rows = scheme_report();
            let mut f = create(&out.join("schemes.csv"))?;
            write_schemes(&mut f, &rows)?;
            f.flush()?;
            let certified = rows.iter().filter(|r| r.certified).count();
            println!("rows={} certified={certified}", rows.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
