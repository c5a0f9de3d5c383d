use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use scalar_deform::cli::{load_problem, render_json, render_text, run_pipeline, Mode, Problem};
use scalar_deform::dynamics::{integrate_geodesic, write_csv, IntegratorConfig};
use scalar_deform::geometry::PhasePoint;

const INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "scalar-deform", version, about = "Find Phi with Phi(L) Lagrangian for forced dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the proportionality condition and functional dependence.
    Check(Common),
    /// Fit the generator f to a deformation family.
    Classify(Common),
    /// Build Phi.
    Synthesize(Common),
    /// Check the Euler-Lagrange equations of Phi(L).
    Verify(Common),
    /// Integrate the spray from a given point.
    Geodesic(GeodesicArgs),
    /// Full analysis including a simulated trajectory.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Problem file, or the name of a bundled problem.
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Identity tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GeodesicArgs {
    #[command(flatten)]
    common: Common,
    /// Initial position, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Vec<f64>,
    /// Initial velocity, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn load(c: &Common) -> Result<Problem, String> {
    let mut p = load_problem(&c.problem).map_err(|e| e.to_string())?;
    if let Some(seed) = c.seed {
        p.plan = p.plan.with_seed(seed);
    }
    if let Some(n) = c.samples {
        if n == 0 {
            return Err("--samples must be positive".into());
        }
        p.plan = p.plan.with_count(n);
    }
    if let Some(t) = c.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err("--tol must be positive".into());
        }
        p.tolerances.identity = t;
    }
    Ok(p)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analyze(c: &Common, mode: Mode) -> Result<u8, String> {
    let problem = load(c)?;
    let run = run_pipeline(&problem, mode);
    let text = match c.format {
        Format::Text => render_text(&run.report),
        Format::Json => render_json(&run.report).map_err(|e| e.to_string())? + "\n",
    };
    emit(&c.out, &text)?;
    Ok(run.report.verdict.exit_code() as u8)
}

fn geodesic(g: &GeodesicArgs) -> Result<u8, String> {
    let problem = load(&g.common)?;
    let n = problem.spec.dim;
    if g.x0.len() != n || g.y0.len() != n {
        return Err(format!("--x0 and --y0 need {n} components each"));
    }
    let start = PhasePoint::new(g.x0.clone(), g.y0.clone());
    let cfg = IntegratorConfig::new(g.step, g.horizon, start).within(problem.plan.bounds.clone());
    let traj = integrate_geodesic(&problem.system.spray, &cfg).map_err(|e| e.to_string())?;
    let run = run_pipeline(&problem, Mode::Analyze);
    let deformed = run.deformed(&problem);
    if let Some(path) = &g.csv {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_csv(&mut w, &traj, &problem.system, deformed.as_ref()).map_err(|e| e.to_string())?;
        w.flush().map_err(|e| e.to_string())?;
    }
    let end = traj.last();
    let last = format!("{:?} {:?}", end.x, end.y);
    let text = format!(
        "states: {}\ntruncated: {}\nfinal: {last}\nverdict: {:?}\n",
        traj.len(),
        traj.truncated,
        run.report.verdict
    );
    emit(&g.common.out, &text)?;
    Ok(if traj.truncated { 2 } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(c) | Command::Classify(c) | Command::Synthesize(c) | Command::Verify(c) => {
            analyze(c, Mode::Analyze)
        }
        Command::Report(c) => analyze(c, Mode::Full),
        Command::Geodesic(g) => geodesic(g),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
