use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use wpap::run::{run_file, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    ClassifyWeight,
    TestPap0,
    VerifyDichotomy,
    FitEstimates,
    SolveMild,
    HeatDemo,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::ClassifyWeight => Subcommand::ClassifyWeight,
            Command::TestPap0 => Subcommand::TestPap0,
            Command::VerifyDichotomy => Subcommand::VerifyDichotomy,
            Command::FitEstimates => Subcommand::FitEstimates,
            Command::SolveMild => Subcommand::SolveMild,
            Command::HeatDemo => Subcommand::HeatDemo,
        }
    }
}

/// Weighted pseudo almost periodic analysis and mild solution runs.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Iterate even when the a priori contraction constant exceeds the gate.
    #[arg(long)]
    override_contraction_gate: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        override_gate: cli.override_contraction_gate,
    };
    match run_file(cli.command.into(), &cli.config, &opts) {
        Ok(m) => {
            for f in &m.files {
                println!("{}  {}", f.sha256, opts.out.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
