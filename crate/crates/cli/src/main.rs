use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boussinesq::experiments::{estimate_stored, execute, ExperimentKind, RunConfig};
use boussinesq::io::{read_solution, write_json};
use boussinesq::mesh::write_mesh;
use boussinesq::Error;
use clap::{Args, Parser, Subcommand};

/// Finite element solver for stationary Boussinesq flow with Nitsche
/// boundary conditions and adaptive refinement.
#[derive(Parser)]
#[command(name = "boussinesq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uniform refinement study against the manufactured solution.
    Convergence(RunArgs),
    /// Solve-estimate-mark-refine loop.
    Adaptive(RunArgs),
    /// Channel flow past a cylinder with the outflow switch.
    Demo(RunArgs),
    /// Estimator (and, for convergence configs, true error) of a stored solution.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Solution file written by a previous run.
        #[arg(long)]
        solution: PathBuf,
    },
    /// Writes the initial mesh of a configuration.
    Mesh {
        #[command(flatten)]
        run: RunArgs,
        /// Experiment whose preset is used when no config file is given.
        #[arg(long, default_value = "adaptive")]
        kind: String,
    },
    /// Prints the effective configuration.
    Config {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "convergence")]
        kind: String,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long = "gamma-n")]
    gamma_n: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Output directory (or file for `mesh`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Further overrides, e.g. `--set rounds=5 --set geometry=t_shape`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    NotConverged(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidInput(_) => Failure::Config(e.to_string()),
            Error::PicardSolve { .. } => Failure::NotConverged(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn parse_kind(s: &str) -> Result<ExperimentKind, Failure> {
    match s {
        "convergence" => Ok(ExperimentKind::Convergence),
        "adaptive" => Ok(ExperimentKind::Adaptive),
        "demo" => Ok(ExperimentKind::Demo),
        other => Err(Failure::Config(format!("unknown experiment '{other}'"))),
    }
}

/// Preset or config file, then flag overrides.
fn load(args: &RunArgs, kind: ExperimentKind) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = RunConfig::read(path)?;
            if cfg.kind != kind {
                return Err(Failure::Config(format!(
                    "{} describes a {:?} run, not {:?}",
                    path.display(),
                    cfg.kind,
                    kind
                )));
            }
            cfg
        }
        None => RunConfig::preset(kind),
    };
    let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(|m| Failure::Config(format!("{k}: {m}")));
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override '{o}' is not KEY=VALUE")))?;
        set(k.trim(), v.trim().to_string())?;
    }
    if let Some(l) = args.levels {
        set("levels", l.to_string())?;
    }
    if let Some(g) = args.gamma_n {
        set("gamma_n", g.to_string())?;
    }
    if let Some(e) = args.eta {
        set("eta", e.to_string())?;
    }
    if let Some(o) = &args.out {
        set("output", o.display().to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| {
        Path::new("out").join(match cfg.kind {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Adaptive => "adaptive",
            ExperimentKind::Demo => "demo",
        })
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convergence(args) => run_experiment(&args, ExperimentKind::Convergence),
        Command::Adaptive(args) => run_experiment(&args, ExperimentKind::Adaptive),
        Command::Demo(args) => run_experiment(&args, ExperimentKind::Demo),
        Command::Estimate { run, solution } => {
            let kind = match &run.config {
                Some(p) => RunConfig::read(p)?.kind,
                None => ExperimentKind::Convergence,
            };
            let cfg = load(&run, kind)?;
            let sol = read_solution(&solution)?;
            let summary = estimate_stored(&cfg, &sol)?;
            println!("dofs {}  estimate {:.6e}", summary.dofs, summary.estimate);
            if let (Some(err), Some(eff)) = (summary.error, summary.effectivity) {
                println!("error {:.6e}  effectivity {:.3}", err.triple, eff);
            }
            let dir = output_dir(&cfg);
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let path = dir.join("report.json");
            write_json(&path, &summary)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Mesh { run, kind } => {
            let cfg = load(&run, parse_kind(&kind)?)?;
            let mesh = cfg.build_mesh()?;
            let path = run.out.unwrap_or_else(|| PathBuf::from("mesh.txt"));
            write_mesh(&mesh, &path)?;
            println!("{} cells, {} vertices -> {}", mesh.n_cells(), mesh.n_vertices(), path.display());
            Ok(())
        }
        Command::Config { run, kind } => {
            let kind = match &run.config {
                Some(p) => RunConfig::read(p)?.kind,
                None => parse_kind(&kind)?,
            };
            print!("{}", load(&run, kind)?.to_text());
            Ok(())
        }
    }
}

fn run_experiment(args: &RunArgs, kind: ExperimentKind) -> Result<(), Failure> {
    let cfg = load(args, kind)?;
    let dir = output_dir(&cfg);
    let summary = execute(&cfg, &dir)?;
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    if summary.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(
            "Picard iteration reached max_iters before the tolerance; see report.json".into(),
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(m)) => {
            eprintln!("not converged: {m}");
            ExitCode::from(2)
        }
    }
}
