use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cryoflow::config::{dump_config, parse_config};
use cryoflow::ensemble::run_ensemble;
use cryoflow::oracles::{erfc_profile, hydrostatic_head, StefanProblem};
use cryoflow::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SCENARIO: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "cryoflow", version, about = "Coupled heat, water and evapotranspiration in permafrost soil columns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the `[run] workers` setting.
        #[arg(long)]
        workers: Option<usize>,
        /// Accepted for scripts; runs never use random numbers.
        #[arg(long, default_value_t = true)]
        seedless_deterministic: bool,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Print the normalized configuration.
        #[arg(long)]
        dump: bool,
    },
    /// Print analytical reference solutions.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Subcommand)]
enum Oracle {
    /// One-phase Stefan freezing front.
    Stefan(StefanArgs),
    /// Conduction profile after a surface temperature step.
    Erfc(ErfcArgs),
    /// Hydrostatic pressure head.
    Hydrostatic(HydrostaticArgs),
}

#[derive(Args)]
struct StefanArgs {
    /// Surface temperature, °C (negative).
    #[arg(long, allow_hyphen_values = true)]
    ts: f64,
    /// Frozen-zone thermal diffusivity, m²/s.
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    stefan_number: f64,
    /// Times in seconds at which to report the front depth.
    #[arg(long = "time", num_args = 1..)]
    times: Vec<f64>,
}

#[derive(Args)]
struct ErfcArgs {
    #[arg(long, allow_hyphen_values = true)]
    ts: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    time: f64,
    /// Depths in metres.
    #[arg(long = "z", num_args = 1..)]
    depths: Vec<f64>,
}

#[derive(Args)]
struct HydrostaticArgs {
    /// Pressure head at the surface, m.
    #[arg(long, allow_hyphen_values = true)]
    h_surface: f64,
    #[arg(long = "z", num_args = 1..)]
    depths: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, workers, seedless_deterministic: _ } => run(config, out, workers),
        Command::Validate { config, dump } => validate(config, dump),
        Command::Oracle(oracle) => match print_oracle(oracle) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

fn run(config: PathBuf, out: PathBuf, workers: Option<usize>) -> ExitCode {
    let cfg = match parse_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    let forcing = match cfg.forcing.load() {
        Ok(f) => f,
        Err(e) => return fail(&e, EXIT_CONFIG),
    };
    let workers = workers.unwrap_or(cfg.run.workers);
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let report = match run_ensemble(&cfg.scenarios, &forcing, workers, &out, cfg.run.plot_scripts) {
        Ok(r) => r,
        Err(e @ Error::Io(_)) => return fail(&e, EXIT_IO),
        Err(e) => return fail(&e, EXIT_SCENARIO),
    };
    print!("{}", report.to_text());
    if report.any_write_failure() {
        ExitCode::from(EXIT_IO)
    } else if !report.all_ok() {
        ExitCode::from(EXIT_SCENARIO)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(config: PathBuf, dump: bool) -> ExitCode {
    let checked = parse_config(&config).and_then(|cfg| cfg.forcing.load().map(|_| cfg));
    match checked {
        Ok(cfg) if dump => {
            print!("{}", dump_config(&cfg));
            ExitCode::SUCCESS
        }
        Ok(cfg) => {
            println!("ok: {} scenario(s)", cfg.scenarios.len());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, EXIT_CONFIG),
    }
}

fn fail(e: &Error, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn print_oracle(oracle: Oracle) -> cryoflow::Result<()> {
    match oracle {
        Oracle::Stefan(a) => {
            let problem = StefanProblem::new(a.ts, a.kappa, a.stefan_number)?;
            println!("lambda = {:.16e}", problem.lambda());
            for t in a.times {
                println!("front_m t={t:?} = {:.16e}", problem.front(t));
            }
        }
        Oracle::Erfc(a) => {
            if !(a.kappa > 0.0 && a.time > 0.0) {
                return Err(Error::InvalidArgument("kappa and time must be positive".into()));
            }
            for z in a.depths {
                println!("t_c z={z:?} = {:.16e}", erfc_profile(a.ts, a.kappa, z, a.time));
            }
        }
        Oracle::Hydrostatic(a) => {
            for z in a.depths {
                println!("h_m z={z:?} = {:.16e}", hydrostatic_head(a.h_surface, z));
            }
        }
    }
    Ok(())
}
