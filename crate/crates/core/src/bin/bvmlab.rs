use std::path::PathBuf;
use std::process::ExitCode;

use bvmlab::experiments::{emit_report, run_experiment, ExperimentConfig, ExperimentError, ExperimentKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bvmlab", version, about = "Bernstein–von Mises simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of concurrent replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-means posterior convergence with MLE and MAP panels.
    ParametricDemo(RunArgs),
    /// Partially linear regression marginal posterior against its normal limit.
    PlrBvm(RunArgs),
    /// Kernel-scale posterior in the Dirichlet location mixture.
    MixtureBvm(RunArgs),
    /// Support-boundary posterior against its exponential limit.
    BoundaryBvm(RunArgs),
    /// Credible and Wald interval coverage in the regression model.
    Coverage(RunArgs),
    /// Integrated-likelihood expansion remainder.
    IlanProbe(RunArgs),
    /// Nuisance posterior mass under a perturbed parameter.
    PerturbationProbe(RunArgs),
    /// Checks a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), ExperimentError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if config.experiment != kind {
        return Err(ExperimentError::Config(format!(
            "config is for {} but {} was requested",
            config.experiment.name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let output = run_experiment(&config, args.jobs)?;
    emit_report(&output, &config.output_dir)?;
    eprintln!("{}: {} rows written to {}", kind.name(), output.report.len(), config.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ParametricDemo(a) => run(ExperimentKind::ParametricDemo, a),
        Command::PlrBvm(a) => run(ExperimentKind::PlrBvm, a),
        Command::MixtureBvm(a) => run(ExperimentKind::MixtureBvm, a),
        Command::BoundaryBvm(a) => run(ExperimentKind::BoundaryBvm, a),
        Command::Coverage(a) => run(ExperimentKind::Coverage, a),
        Command::IlanProbe(a) => run(ExperimentKind::IlanProbe, a),
        Command::PerturbationProbe(a) => run(ExperimentKind::PerturbationProbe, a),
        Command::Validate { config } => ExperimentConfig::from_path(&config).map(|c| {
            println!("{}: ok ({} n-values, {} replications)", c.experiment.name(), c.n_values.len(), c.replications);
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
