//! Command-line front end: equilibrium solves, potential identification,
//! simulation, verification and reproduction of the bundled examples.

mod json;
mod summary;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use opdg::bundled;
use opdg::experiment::{identify, noise_sweep, Baseline, IdentReport, Noise, DEFAULT_SEEDS, SWEEP_SNRS};
use opdg::game::{matrix_to_rows, validate_potential, LqGame, Method, PotentialFunction};
use opdg::identify::ido::IdoConfig;
use opdg::linalg::eigenvalues;
use opdg::riccati::NeSolution;
use opdg::sim::{simulate_closed_loop, trajectory_error, DEFAULT_STEP};
use opdg::verify::{check_exact_potential, verify_opdg, HamiltonianGradients};
use opdg::Error;
use serde_json::{json, Value};

/// Exit status for malformed or invalid input.
const EXIT_INPUT: u8 = 2;
/// Exit status for numerical failures.
const EXIT_NUMERICAL: u8 = 3;
/// Exit status for an infeasible identification.
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "opdg", version, about = "Feedback Nash equilibria and ordinal potential identification for LQ differential games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled Riccati equations and print the equilibrium as JSON.
    Ne { file: PathBuf },
    /// Identify a potential function and report its trajectory error.
    Identify {
        file: PathBuf,
        #[arg(long, value_enum, required_unless_present = "all", conflicts_with = "all")]
        method: Option<MethodArg>,
        /// Measurement noise level in dB applied before WTDO and IDO (`inf` for none).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run all three methods and print a comparison table.
        #[arg(long)]
        all: bool,
        /// Directory for reports and trajectory CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the equilibrium closed loop and print the trajectory as CSV.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Check a potential function against a game's equilibrium trajectory.
    Verify { file: PathBuf, potential: PathBuf },
    /// Run the full pipeline on a bundled example and write every artifact.
    Reproduce {
        #[arg(value_enum)]
        which: Example,
        /// Noise realizations per SNR level.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tfo,
    Wtdo,
    Ido,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tfo => Method::Tfo,
            MethodArg::Wtdo => Method::Wtdo,
            MethodArg::Ido => Method::Ido,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Example1,
    Example2,
}

impl Example {
    fn name(self) -> &'static str {
        match self {
            Example::Example1 => "example1",
            Example::Example2 => "example2",
        }
    }
}

/// A failed command: exit status, diagnostic for standard error and an
/// optional JSON payload for standard output.
struct Failure {
    code: u8,
    message: String,
    payload: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_) | Error::Parse(_) | Error::Dimension(_) | Error::Io(_) => EXIT_INPUT,
            Error::InfeasibleTfo { .. } | Error::InfeasibleWtdo { .. } => EXIT_INFEASIBLE,
            Error::NotStabilizable(_) | Error::NoConvergence { .. } | Error::SolverFailure(_) | Error::Diverged { .. } => {
                EXIT_NUMERICAL
            }
        };
        let payload = match &e {
            Error::InfeasibleTfo { report, .. } => serde_json::to_value(report.as_ref()).ok(),
            _ => None,
        };
        Failure {
            code,
            message: e.to_string(),
            payload,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ne { file } => cmd_ne(&file),
        Command::Identify {
            file,
            method,
            snr,
            seed,
            all,
            out,
        } => cmd_identify(&file, method.map(Method::from), snr.map(|snr_db| Noise { snr_db, seed }), all, out.as_deref()),
        Command::Simulate { file, horizon, step } => cmd_simulate(&file, horizon, step),
        Command::Verify { file, potential } => cmd_verify(&file, &potential),
        Command::Reproduce { which, seeds, out } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("reproduce_{}", which.name())));
            cmd_reproduce(which, seeds, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(p) = &f.payload {
                emit(&(json::to_string(p) + "\n"));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Writes to standard output, ignoring a closed pipe so that piping into
/// tools like `head` does not abort the program.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read_game(path: &Path) -> Result<LqGame, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read {}: {e}", path.display()),
        payload: None,
    })?;
    LqGame::from_json(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot write {}: {e}", path.display()),
        payload: None,
    })
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot create {}: {e}", path.display()),
        payload: None,
    })
}

fn ne_json(game: &LqGame, ne: &NeSolution) -> Value {
    let acl = opdg::riccati::ne_closed_loop(game, ne);
    json!({
        "players": ne.p.iter().zip(&ne.k).map(|(p, k)| json!({
            "P": matrix_to_rows(p),
            "K": matrix_to_rows(k),
        })).collect::<Vec<_>>(),
        "residual": ne.residual,
        "iterations": ne.iterations,
        "closed_loop_eigenvalues": eigenvalues(&acl).iter().map(|l| json!({"re": l.re, "im": l.im})).collect::<Vec<_>>(),
    })
}

fn cmd_ne(file: &Path) -> CmdResult {
    let game = read_game(file)?;
    let ne = opdg::riccati::solve_coupled_are(&game)?;
    emit(&(json::to_string(&ne_json(&game, &ne)) + "\n"));
    Ok(())
}

fn method_slug(m: Method) -> &'static str {
    match m {
        Method::Tfo => "tfo",
        Method::Wtdo => "wtdo",
        Method::Ido => "ido",
    }
}

/// Runs one method; noise applies only to the trajectory-based methods.
fn run_method(base: &Baseline, method: Method, noise: Option<Noise>) -> Result<IdentReport, Failure> {
    let noise = if method == Method::Tfo { None } else { noise };
    Ok(identify(base, method, noise, &IdoConfig::default())?)
}

/// Writes a report and, when feasible, the potential's closed loop and the
/// gradient table into `dir`.
fn write_report(dir: &Path, base: &Baseline, report: &IdentReport) -> CmdResult {
    let slug = method_slug(report.method);
    write(&dir.join(format!("report_{slug}.json")), &json::to_string(&report.to_json()))?;
    if let Some(pot) = &report.potential {
        let traj = base.potential_trajectory(pot)?;
        write(&dir.join(format!("trajectory_{slug}.csv")), &traj.to_csv())?;
        let grads = HamiltonianGradients::compute(&base.game, &base.ne, &pot.pp, &base.traj);
        write(&dir.join(format!("gradients_{slug}.csv")), &grads.to_csv(&base.traj))?;
    }
    Ok(())
}

fn infeasible(report: &IdentReport) -> Failure {
    Failure {
        code: EXIT_INFEASIBLE,
        message: format!(
            "{} identification: {}",
            report.method,
            report.error.as_deref().unwrap_or("infeasible")
        ),
        payload: None,
    }
}

fn cmd_identify(file: &Path, method: Option<Method>, noise: Option<Noise>, all: bool, out: Option<&Path>) -> CmdResult {
    let game = read_game(file)?;
    let base = Baseline::new(game)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("trajectory_ne.csv"), &base.traj.to_csv())?;
    }
    let methods = if all {
        vec![Method::Tfo, Method::Wtdo, Method::Ido]
    } else {
        vec![method.expect("clap requires --method without --all")]
    };
    let mut reports = Vec::new();
    for m in methods {
        let report = run_method(&base, m, noise)?;
        if let Some(dir) = out {
            write_report(dir, &base, &report)?;
        }
        reports.push(report);
    }
    if all {
        let table = summary::comparison_table(&reports);
        if let Some(dir) = out {
            write(&dir.join("comparison.md"), &table)?;
        }
        emit(&table);
        return Ok(());
    }
    let report = &reports[0];
    emit(&(json::to_string(&report.to_json()) + "\n"));
    if report.feasible {
        Ok(())
    } else {
        Err(infeasible(report))
    }
}

fn cmd_simulate(file: &Path, horizon: Option<f64>, step: f64) -> CmdResult {
    let game = read_game(file)?;
    let ne = opdg::riccati::solve_coupled_are(&game)?;
    let horizon = horizon.unwrap_or_else(|| opdg::sim::default_horizon(&game, &ne.k));
    let traj = simulate_closed_loop(&game, &ne.k, horizon, step)?;
    emit(&traj.to_csv());
    Ok(())
}

fn cmd_verify(file: &Path, potential: &Path) -> CmdResult {
    let game = read_game(file)?;
    let text = fs::read_to_string(potential).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read {}: {e}", potential.display()),
        payload: None,
    })?;
    let pot = PotentialFunction::from_json(&text)?;
    let problems = validate_potential(&game, &pot);
    if !problems.is_empty() {
        return Err(Error::Validation(problems).into());
    }
    let base = Baseline::new(game)?;
    let report = verify_opdg(&base.game, &base.ne, &pot, &base.traj);
    let (exact, residual) = check_exact_potential(&base.game, &base.ne, &pot);
    let e_x = trajectory_error(&base.potential_trajectory(&pot)?, &base.traj)?;
    let body = json!({
        "verification": report,
        "exact_potential": exact,
        "exact_residual": residual,
        "e_x": e_x.value,
        "degenerate_channels": e_x.degenerate_channels,
    });
    emit(&(json::to_string(&body) + "\n"));
    Ok(())
}

fn cmd_reproduce(which: Example, seeds: usize, out: &Path) -> CmdResult {
    let (game, text) = bundled::by_name(which.name()).expect("bundled example names are fixed");
    create_dir(out)?;
    write(&out.join("game.json"), text)?;
    let base = Baseline::new(game)?;
    write(&out.join("ne.json"), &json::to_string(&ne_json(&base.game, &base.ne)))?;
    write(&out.join("trajectory_ne.csv"), &base.traj.to_csv())?;
    let mut reports = Vec::new();
    for m in [Method::Tfo, Method::Wtdo, Method::Ido] {
        let report = run_method(&base, m, None)?;
        write_report(out, &base, &report)?;
        reports.push(report);
    }
    let sweep = match which {
        Example::Example1 => None,
        Example::Example2 => {
            let cells = noise_sweep(&base, &[Method::Wtdo, Method::Ido], &SWEEP_SNRS, seeds, &IdoConfig::default());
            write(&out.join("sweep.json"), &json::to_string(&serde_json::to_value(&cells).expect("cells serialize")))?;
            Some(cells)
        }
    };
    let md = summary::reproduction(which.name(), &base, &reports, sweep.as_deref(), seeds);
    write(&out.join("summary.md"), &md)?;
    emit(&md);
    Ok(())
}
