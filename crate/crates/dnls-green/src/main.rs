use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dnls_green::config::{FlowKind, ScenarioConfig};
use dnls_green::scenario::{
    run_evolve, run_greens, run_invariants, run_sweep, run_verify, Outcome,
};
use dnls_green::Result;

#[derive(Parser)]
#[command(
    name = "dnls-green",
    version,
    about = "Diagonal Green's functions, A(kappa) and conservation-law checks for DNLS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// scenario file (sectioned key = value)
    #[arg(long)]
    config: PathBuf,
    /// replace the tau list; repeat or comma-separate for several
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tau: Vec<f64>,
    /// rescale the profile amplitude
    #[arg(long)]
    amplitude: Option<f64>,
    /// time step of the flow
    #[arg(long)]
    dt: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowArg {
    Dnls,
    Akappa,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonal Green's triples per tau (CSV)
    Greens(Common),
    /// Conserved quantities, A(kappa) by density and log det, asymptotics
    Invariants(Common),
    /// Evolve under DNLS or the A(kappa) flow (trajectory CSV)
    Evolve {
        #[command(flatten)]
        common: Common,
        /// flow to integrate; with akappa the first --tau is the generator
        #[arg(long, value_enum)]
        flow: Option<FlowArg>,
    },
    /// Full identity, conservation and Lax verification (JSON report)
    Verify(Common),
    /// Estimate-ratio sweep over amplitudes and tau (CSV)
    Sweep(Common),
}

fn load(c: &Common, flow: Option<FlowArg>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_file(&c.config)?;
    let flow = flow.map(|f| match f {
        FlowArg::Dnls => FlowKind::Dnls,
        FlowArg::Akappa => FlowKind::AKappa,
    });
    cfg.apply_overrides(&c.tau, c.amplitude, c.dt, c.out.clone(), flow)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Greens(c) => run_greens(&load(&c, None)?),
        Command::Invariants(c) => run_invariants(&load(&c, None)?),
        Command::Evolve { common, flow } => run_evolve(&load(&common, flow)?),
        Command::Verify(c) => run_verify(&load(&c, None)?),
        Command::Sweep(c) => run_sweep(&load(&c, None)?).map(|(o, _)| o),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for c in &out.report.checks {
                println!(
                    "{} {} residual={:e} tolerance={:e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance
                );
            }
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            println!("overall: {}", if out.report.pass { "PASS" } else { "FAIL" });
            if out.report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
