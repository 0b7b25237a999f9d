use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;
mod plot;

/// Hybrid AC/DC grid laboratory: equilibria, stability certificates,
/// simulation and Monte Carlo basin checks.
#[derive(Parser, Debug)]
#[command(name = "hgl", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate the equilibrium set and the references in use.
    Equilibria(EquilibriaArgs),
    /// Evaluate the decentralized stability conditions.
    Certify(CertifyArgs),
    /// Integrate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Check that the storage function decreases along a run.
    LyapunovCheck(LyapunovCheckArgs),
    /// Monte Carlo estimate of the basin of the stable equilibrium.
    McAgas(McAgasArgs),
    /// Line plot of trajectory CSV columns as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct EquilibriaArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write equilibria.json and effective_config.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also write certificate.json here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Exit with status 3 when the certificate fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk45)]
    method: MethodArg,
    /// RK4 step size.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    /// Largest step the adaptive method may take.
    #[arg(long, default_value_t = 0.05)]
    max_step: f64,
    /// Keep every n-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Offset added to the stable equilibrium, as BLOCK:INDEX:VALUE
    /// (e.g. delta:0:3.1415). Repeatable.
    #[arg(long, value_parser = commands::parse_perturbation)]
    perturb: Vec<commands::Perturbation>,
    /// Stop early once the vector field residual drops below this.
    #[arg(long)]
    stop_below: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write trajectory.csv here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LyapunovCheckArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Largest tolerated step-to-step increase of V.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Exit with status 3 when the check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct McAgasArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200.0)]
    t_end: f64,
    /// Standard deviation of the electrical perturbation around y*.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Write mc_agas.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Trajectory CSV as written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated column names to plot against `t`.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Equilibria(a) => commands::equilibria(&a.config, a.out.as_deref()),
        Command::Certify(a) => commands::certify(&a.config, a.out.as_deref(), a.format == Format::Json, a.strict),
        Command::Simulate(a) => commands::simulate(&a.run.to_spec(), a.out.as_deref()),
        Command::LyapunovCheck(a) => commands::lyapunov_check(&a.run.to_spec(), a.tol, a.strict),
        Command::McAgas(a) => commands::mc_agas(&commands::McSpec {
            config: a.config,
            trials: a.trials,
            seed: a.seed,
            t_end: a.t_end,
            sigma: a.sigma,
            out: a.out,
        }),
        Command::Plot(a) => plot::plot_csv(&a.input, &a.columns, &a.out, a.title.as_deref()).map(|_| commands::Outcome::Ok),
    };
    match result {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::CheckFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

impl RunArgs {
    fn to_spec(&self) -> commands::RunSpec {
        let method = match self.method {
            MethodArg::Rk4 => hgl_core::simulator::Method::Rk4 { step: self.step },
            MethodArg::Rk45 => hgl_core::simulator::Method::Rk45 {
                rtol: self.rtol,
                atol: self.atol,
            },
        };
        commands::RunSpec {
            config: self.config.clone(),
            t_end: self.t_end,
            method,
            max_step: self.max_step,
            stride: self.stride,
            perturb: self.perturb.clone(),
            stop_below: self.stop_below,
        }
    }
}
