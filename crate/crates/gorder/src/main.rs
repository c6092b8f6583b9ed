use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gorder::commands::{self, Outcome, ProbeKind};
use gorder::output::{sibling, write_atomic};
use gorder::{init_threads, CliError};
use gorder_core::ordering::{Engine, OrderType};

#[derive(Parser)]
#[command(name = "gorder", version, about = "Ordering of nonlinear expectations of diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for Monte Carlo paths and condition sampling (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here (atomically) plus CSV files next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Pde,
    Mc,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Pde => Engine::Pde,
            EngineArg::Mc => Engine::Mc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Conv,
    Iconv,
    Mon,
    Conc,
    Iconc,
    /// Compare the risk values -E[-phi] instead.
    Risk,
}

#[derive(Subcommand)]
enum Command {
    /// Value the problem(s) of a scenario file.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
    },
    /// Certify an ordering between the two problems and check it numerically.
    Compare {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "conv")]
        order: OrderArg,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
    },
    /// Run a packaged scenario.
    Example {
        id: String,
        /// Parameter overrides, e.g. R=0.05 b2=0.3.
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
    },
    /// Shape and stability probes of the value function.
    Probe {
        file: PathBuf,
        #[arg(long, value_enum)]
        probe: Option<ProbeKind>,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
    },
    /// Check the standing assumptions only.
    Validate { file: PathBuf },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    init_threads()?;
    let seed = cli.seed;
    match cli.command {
        Command::Solve { file, engine } => commands::solve(&commands::read_file(&file, engine.map(Into::into), seed)?),
        Command::Compare { file, order, engine } => {
            let f = commands::read_file(&file, engine.map(Into::into), seed)?;
            let order = match order {
                OrderArg::Conv => Some(OrderType::Conv),
                OrderArg::Iconv => Some(OrderType::Iconv),
                OrderArg::Mon => Some(OrderType::Mon),
                OrderArg::Conc => Some(OrderType::Conc),
                OrderArg::Iconc => Some(OrderType::Iconc),
                OrderArg::Risk => None,
            };
            commands::compare(&f, order)
        }
        Command::Example { id, params, engine } => commands::example(&id, &params, engine.map(Into::into), seed),
        Command::Probe { file, probe, engine } => {
            commands::probe(&commands::read_file(&file, engine.map(Into::into), seed)?, probe)
        }
        Command::Validate { file } => commands::validate(&commands::read_file(&file, None, seed)?),
    }
}

fn emit(out: Option<&PathBuf>, o: &Outcome) -> Result<(), CliError> {
    let Some(path) = out else {
        print!("{}", o.report);
        return Ok(());
    };
    let io = |e: std::io::Error| CliError::solver(format!("cannot write {}: {e}", path.display()));
    for (suffix, bytes) in &o.companions {
        write_atomic(&sibling(path, suffix), bytes).map_err(io)?;
    }
    write_atomic(path, o.report.as_bytes()).map_err(io)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = run(cli).and_then(|o| emit(out.as_ref(), &o).map(|_| o.code));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("gorder: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
