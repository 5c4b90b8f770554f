use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdbench::{execute, AdoptionInput, Command, Overrides};
use crowdbench_core::kernels::KernelKind;

#[derive(Parser)]
#[command(name = "crowdbench", version, about = "Human-relative idea-space crowding estimates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check corpora, units and kernel inputs without estimating.
    Validate(Common),
    /// Bootstrap crowding, excess crowding and diversity ratios.
    Estimate(Common),
    /// Rarefaction curves and relative drift.
    Rarefy(Common),
    /// Critical-benefit thresholds and expected redundancy costs.
    Adoption(AdoptionArgs),
    /// Protocol differences and temperature rank diagnostics.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Overrides estimator.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restricts the run to one kernel.
    #[arg(long)]
    kernel: Option<KernelKind>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AdoptionArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "kappa-h")]
    kappa_h: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    task: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            kernel: self.kernel,
            out: self.out.clone(),
            workers: self.workers,
        }
    }
}

const MAX_LISTED: usize = 20;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let none = AdoptionInput::default();
    let result = match &cli.command {
        Cmd::Validate(c) => execute(Command::Validate, Some(&c.config), &c.flags.overrides(), &none),
        Cmd::Estimate(c) => execute(Command::Estimate, Some(&c.config), &c.flags.overrides(), &none),
        Cmd::Rarefy(c) => execute(Command::Rarefy, Some(&c.config), &c.flags.overrides(), &none),
        Cmd::Compare(c) => execute(Command::Compare, Some(&c.config), &c.flags.overrides(), &none),
        Cmd::Adoption(a) => {
            let input = AdoptionInput {
                delta: a.delta,
                rho: a.rho,
                kappa_h: a.kappa_h,
                model: a.model.clone(),
                task: a.task.clone(),
            };
            execute(Command::Adoption, a.config.as_deref(), &a.flags.overrides(), &input)
        }
    };
    match result {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let text = e.to_string();
            let lines: Vec<&str> = text.lines().collect();
            for line in lines.iter().take(MAX_LISTED) {
                eprintln!("error: {line}");
            }
            if lines.len() > MAX_LISTED {
                eprintln!("error: ... and {} more", lines.len() - MAX_LISTED);
            }
            ExitCode::from(e.exit_code())
        }
    }
}
