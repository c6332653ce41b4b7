use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critmap_cli::Study;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "critmap",
    version,
    about = "Screen inputs, fit a Gaussian-process metamodel and map conditional exceedance probabilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Study configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Study directory for reports.
    #[arg(long, global = true, default_value = "critmap-out")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Global and target HSIC screening of the inputs.
    Screen,
    /// Sequential Gaussian-process metamodel on the screened inputs.
    Fit,
    /// Cross-validated Q², classification rate and calibration curve.
    Validate,
    /// Conditional exceedance probability over the two penalizing inputs.
    Map,
    /// Generate the learning sample of a synthetic study.
    Synth,
    /// synth (if configured), screen, fit, validate and map.
    RunAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Screen => "screen",
            Command::Fit => "fit",
            Command::Validate => "validate",
            Command::Map => "map",
            Command::Synth => "synth",
            Command::RunAll => "run-all",
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let Some(config) = &cli.config else {
        anyhow::bail!("--config <path> is required");
    };
    let study = Study::open(config, &cli.out, cli.seed)?;
    match cli.command {
        Command::Screen => {
            let report = study.screen()?;
            eprintln!("selected: {}", report.selected.join(", "));
        }
        Command::Fit => {
            let model = study.fit()?;
            eprintln!("model inputs: {:?}", model.input_indices());
        }
        Command::Validate => {
            let r = study.validate()?;
            eprintln!("Q2 = {:.4}, classification rate = {:.4}", r.q2, r.classification_rate);
        }
        Command::Map => {
            let s = study.map()?;
            eprintln!(
                "worst case {} = {}, {} = {}: probability {:.4}",
                s.worst_case.inputs[0],
                s.worst_case.location[0],
                s.worst_case.inputs[1],
                s.worst_case.location[1],
                s.worst_case.probability
            );
        }
        Command::Synth => study.synth()?,
        Command::RunAll => study.run_all()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({
                "error": {
                    "command": cli.command.name(),
                    "message": e.to_string(),
                    "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
