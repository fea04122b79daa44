use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lethargy_core::demo::{demo_dense_chain, DemoConfig, DemoTarget};
use lethargy_core::machinery::PlanMode;
use lethargy_core::scenario::{
    bundled_scenario, run_scenario, write_outputs, OutputFormat, ScenarioConfig, ScenarioReport, ScenarioStatus,
    Stage, BUNDLED,
};
use lethargy_core::Error;

const EXIT_VIOLATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_STALL: u8 = 4;

#[derive(Parser)]
#[command(name = "lethargy", version, about = "Distances, separation profiles and lethargy witnesses on subspace chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separation profile and condition checks.
    Analyze(ScenarioArgs),
    /// Anchor indices, step targets and the sandwich constant.
    Plan(ScenarioArgs),
    /// Builds the witness element.
    Witness(ScenarioArgs),
    /// Full pipeline with the per-level sandwich table.
    Verify(ScenarioArgs),
    /// Sup-norm distances from a grid function to polynomials of growing degree.
    DemoDense(DemoArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for report files; without it the JSON report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json, csv or both.
    #[arg(long, default_value = "both", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Seed for sphere sampling in non-Euclidean profiles.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// strict or literal; overrides the mode given in the config (strict when neither is set).
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PlanMode>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DemoArgs {
    /// JSON file with `grid`, `levels` and `target`; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// exp, step or quadratic.
    #[arg(long, value_parser = parse_target)]
    target: Option<DemoTarget>,
    /// Accepted for symmetry with the other subcommands; the demo is deterministic.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<PlanMode, String> {
    s.parse()
}

fn parse_target(s: &str) -> Result<DemoTarget, String> {
    s.parse()
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigInvalid { .. }
        | Error::InvalidSpace(_)
        | Error::DimensionMismatch { .. }
        | Error::HorizonTooLarge { .. }
        | Error::RankDeficientBasis { .. }
        | Error::NotNested { .. }
        | Error::NotStrict { .. }
        | Error::BadStaircase { .. }
        | Error::EmptyChain
        | Error::InvalidSequence(_)
        | Error::NotNonIncreasing { .. }
        | Error::InvalidProfile(_)
        | Error::TargetsNotMonotonic(_)
        | Error::MismatchedInputs(_)
        | Error::HorizonExhausted(_)
        | Error::DegreeExceedsGrid { .. }
        | Error::Json(_) => EXIT_CONFIG,
        Error::SolverStall { .. }
        | Error::NoProgress { .. }
        | Error::StalledPlan { .. }
        | Error::PlanStalled
        | Error::SimplexCycleGuard(_) => EXIT_STALL,
        _ => 1,
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, Error> {
    let mut config = match (&args.config, &args.scenario) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => bundled_scenario(name).ok_or_else(|| {
            let known: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
            Error::ConfigInvalid {
                path: String::new(),
                message: format!("unknown scenario `{name}` (bundled: {})", known.join(", ")),
            }
        })?,
        (None, None) => unreachable!("clap requires --config or --scenario"),
    };
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    Ok(config)
}

fn emit(report: &ScenarioReport, output: &OutputArgs) -> Result<(), Error> {
    match &output.out {
        Some(dir) => {
            for path in write_outputs(report, dir, output.format)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => println!("{}", report.to_json()?),
    }
    Ok(())
}

fn summarize(report: &ScenarioReport) {
    let name = report.name.as_deref().unwrap_or("scenario");
    eprintln!("{name}: {:?}", report.status);
    if let Some(stall) = &report.stall {
        eprintln!("  anchor recursion repeated an index at i = {}: n = {:?}", stall.stall_index, stall.plan.n);
    }
    if let Some(t) = &report.tilde_a {
        eprintln!("  tilde-a = {:.6}, upper factor = {:.6}", t.value, t.capped());
    }
    if let Some(s) = &report.sandwich {
        if let Some(row) = s.first_violation() {
            eprintln!(
                "  first violation at n = {}: achieved {:.3e} outside [{:.3e}, {:.3e}]",
                row.n, row.achieved, row.lower, row.upper
            );
        }
    }
}

fn run_stage(args: &ScenarioArgs, stage: Stage) -> Result<u8, Error> {
    let config = load_scenario(args)?;
    let report = run_scenario(&config, args.seed, stage)?;
    summarize(&report);
    emit(&report, &args.output)?;
    Ok(match report.status {
        ScenarioStatus::Pass => 0,
        ScenarioStatus::BoundViolation => EXIT_VIOLATION,
        ScenarioStatus::Stalled => EXIT_STALL,
    })
}

fn load_demo(args: &DemoArgs) -> Result<DemoConfig, Error> {
    let mut config = match &args.config {
        Some(path) => read_demo_config(path)?,
        None => DemoConfig::default(),
    };
    if let Some(grid) = args.grid {
        config.grid = grid;
    }
    if let Some(levels) = args.levels {
        config.levels = levels;
    }
    if let Some(target) = args.target {
        config.target = target;
    }
    Ok(config)
}

fn read_demo_config(path: &Path) -> Result<DemoConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid {
        path: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn run_demo(args: &DemoArgs) -> Result<u8, Error> {
    let config = load_demo(args)?;
    let report = demo_dense_chain(&config)?;
    eprintln!("{}", report.label);
    eprintln!("  smallest distance over n = 1..{}: {:.6}", config.levels, report.plateau);
    match &args.output.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if args.output.format != OutputFormat::Csv {
                let path = dir.join("demo.json");
                std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
                eprintln!("wrote {}", path.display());
            }
            if args.output.format != OutputFormat::Json {
                let path = dir.join("demo.csv");
                report.write_csv(std::fs::File::create(&path)?)?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Analyze(args) => run_stage(args, Stage::Analyze),
        Command::Plan(args) => run_stage(args, Stage::Plan),
        Command::Witness(args) => run_stage(args, Stage::Witness),
        Command::Verify(args) => run_stage(args, Stage::Verify),
        Command::DemoDense(args) => run_demo(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
