use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scgm_cli::{
    cmd_constraints, cmd_fit, cmd_markov, cmd_search, cmd_selftest, cmd_validate, CliError, Report, RunConfig,
};
use scgm_core::Criterion;

#[derive(Parser)]
#[command(name = "scgm", version, about = "Stratified chain graph models for ordinal contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a graph file and report structural problems.
    Validate(GraphArgs),
    /// List the independence statements implied by a graph.
    Markov(GraphArgs),
    /// Print the linear constraints a graph imposes on a table.
    Constraints(ModelArgs),
    /// Fit a graph model by constrained maximum likelihood.
    Fit(ModelArgs),
    /// Run the three-step model search from a skeleton graph.
    Search(ModelArgs),
    /// Reference checks.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Planted round trips of the constraint generators.
    Selftest {
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Directory for output files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of text where supported.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Added to each count for the starting point of the fit.
    #[arg(long, default_value_t = 0.5)]
    smoothing: f64,
    #[arg(long, value_enum, default_value_t = CriterionArg::PaperMaxAic)]
    criterion: CriterionArg,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    PaperMaxAic,
    MinAic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::PaperMaxAic => Criterion::PaperMaxAic,
            CriterionArg::MinAic => Criterion::MinAic,
        }
    }
}

fn config(name: &str, common: &Common) -> RunConfig {
    let mut cfg = RunConfig::new(name);
    cfg.out = common.out.clone();
    cfg.seed = common.seed;
    cfg.json = common.json;
    cfg
}

fn model_config(name: &str, a: &ModelArgs) -> RunConfig {
    let mut cfg = config(name, &a.common);
    cfg.table = Some(a.table.clone());
    cfg.graph = Some(a.graph.clone());
    cfg.fit.smoothing = a.smoothing;
    if let Some(n) = a.max_iterations {
        cfg.fit.max_iterations = n;
    }
    cfg.criterion = a.criterion.into();
    cfg
}

fn run(cli: Cli) -> Result<(RunConfig, Report), CliError> {
    let (cfg, report) = match cli.command {
        Command::Validate(a) => {
            let mut cfg = config("validate", &a.common);
            cfg.graph = Some(a.graph);
            let r = cmd_validate(&cfg)?;
            (cfg, r)
        }
        Command::Markov(a) => {
            let mut cfg = config("markov", &a.common);
            cfg.graph = Some(a.graph);
            let r = cmd_markov(&cfg)?;
            (cfg, r)
        }
        Command::Constraints(a) => {
            let cfg = model_config("constraints", &a);
            let r = cmd_constraints(&cfg)?;
            (cfg, r)
        }
        Command::Fit(a) => {
            let cfg = model_config("fit", &a);
            let r = cmd_fit(&cfg)?;
            (cfg, r)
        }
        Command::Search(a) => {
            let cfg = model_config("search", &a);
            let r = cmd_search(&cfg)?;
            (cfg, r)
        }
        Command::Oracle {
            command: OracleCommand::Selftest { seeds, common },
        } => {
            let cfg = config("oracle selftest", &common);
            let r = cmd_selftest(&cfg, seeds)?;
            (cfg, r)
        }
    };
    Ok((cfg, report))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok((cfg, report)) => {
            print!("{}", report.text);
            if let Some(dir) = &cfg.out {
                if let Err(e) = report.write(dir) {
                    eprintln!("error: {}: {e}", dir.display());
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(report.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
