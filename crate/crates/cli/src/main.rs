mod error;
mod input;
mod jobs;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scenario_cert::canonical::CanonicalForm;
use scenario_cert::cascade::Stage;
use scenario_cert::scenario::CertTarget;
use scenario_cert::validate::{ExperimentConfig, Method};
use scenario_cert::BoundKind;

use error::CliError;
use input::{ExperimentGrid, ProblemFile, DEFAULT_CI_LEVEL, DEFAULT_N_FRESH, DEFAULT_SEED};
use jobs::{Job, Report};

/// β used by solve-type commands when neither --epsilon nor --beta is given.
const DEFAULT_BETA: f64 = 1e-6;

/// Scenario-approach solver and probabilistic certificates.
#[derive(Parser)]
#[command(name = "scenario-cert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every bound at (m, d, epsilon) or invert every bound at (m, d, beta).
    Certify {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[command(flatten)]
        kind: KindArgs,
        #[command(flatten)]
        target: RequiredTarget,
    },
    /// Smallest m with q(m, epsilon) <= beta.
    SampleSize {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        kind: KindArgs,
    },
    /// Smallest epsilon with q(m, epsilon) <= beta.
    Epsilon {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        kind: KindArgs,
    },
    /// Solve the scenario program on m sampled constraints and certify it.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Floyd)]
        kind: KindArg,
        /// Claim exactly d support constraints almost surely (equality for `exact`).
        #[arg(long)]
        assert_exact_support: bool,
    },
    /// Sampling and discarding: greedily remove r samples, then certify.
    Discard {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Discard)]
        kind: KindArg,
    },
    /// Fit a box to the samples and solve the robust program over it.
    #[command(name = "box")]
    BoxDesign {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Exact)]
        kind: KindArg,
    },
    /// Box design after removing r samples from the box facets.
    BoxDiscard {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Discard)]
        kind: KindArg,
    },
    /// Two-stage cascade; the problem file must carry `second_stage`.
    Cascade {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Floyd)]
        kind: KindArg,
    },
    /// Cascade with greedy removal driven by one stage's objective.
    CascadeDiscard {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = StageArg::Second)]
        stage: StageArg,
    },
    /// Repeat a design over independent multisamples and compare with its bound.
    Validate {
        problem_file: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Scenario)]
        method: MethodArg,
        /// Certificate kind for `scenario` and `box`.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long, default_value_t = 0)]
        r: usize,
        #[arg(long, value_enum, default_value_t = StageArg::Second)]
        stage: StageArg,
        /// Fresh draws per trial when violation is estimated by Monte Carlo.
        #[arg(long, default_value_t = DEFAULT_N_FRESH)]
        n_fresh: usize,
        #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
        ci_level: f64,
    },
    /// Run a grid sweep described by a config file.
    Experiment { config_file: PathBuf },
    /// Re-run the configuration embedded in a report.
    Replay { report_file: PathBuf },
    /// Print the problem file of a registered canonical form.
    Template {
        #[arg(value_enum)]
        form: FormArg,
    },
}

#[derive(Args)]
struct RunArgs {
    problem_file: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    target: OptionalTarget,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RequiredTarget {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct OptionalTarget {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

fn target(epsilon: Option<f64>, beta: Option<f64>) -> CertTarget {
    match (epsilon, beta) {
        (Some(e), _) => CertTarget::Epsilon(e),
        (None, Some(b)) => CertTarget::Beta(b),
        (None, None) => CertTarget::Beta(DEFAULT_BETA),
    }
}

#[derive(Args)]
struct KindArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Discarded samples; only for `discard` and `discard-unique`.
    #[arg(long, default_value_t = 0)]
    r: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Floyd,
    Exact,
    Discard,
    DiscardUnique,
    Vc,
}

impl KindArg {
    fn with_r(self, r: usize) -> Result<BoundKind, CliError> {
        match self {
            KindArg::Discard => Ok(BoundKind::Discard { r }),
            KindArg::DiscardUnique => Ok(BoundKind::DiscardUnique { r }),
            _ if r > 0 => Err(CliError::Usage("--r applies only to discard and discard-unique".into())),
            KindArg::Floyd => Ok(BoundKind::Floyd),
            KindArg::Exact => Ok(BoundKind::ExactBinomial),
            KindArg::Vc => Ok(BoundKind::Vc),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    First,
    Second,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::First => Stage::First,
            StageArg::Second => Stage::Second,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Scenario,
    Discard,
    Box,
    BoxDiscard,
    Cascade,
    CascadeDiscard,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    LowerMax,
    Interval,
    Cascade,
}

fn load_problem(path: &std::path::Path) -> Result<ProblemFile, CliError> {
    let file: ProblemFile = input::read(path)?;
    file.check()?;
    Ok(file)
}

fn build(command: Command) -> Result<Job, CliError> {
    Ok(match command {
        Command::Certify { m, d, kind, target: t } => Job::Certify {
            m,
            d,
            target: target(t.epsilon, t.beta),
            kind: kind.kind.with_r(kind.r)?,
        },
        Command::SampleSize { d, epsilon, beta, kind } => Job::SampleSize {
            d,
            epsilon,
            beta,
            kind: kind.kind.with_r(kind.r)?,
        },
        Command::Epsilon { m, d, beta, kind } => Job::Epsilon {
            m,
            d,
            beta,
            kind: kind.kind.with_r(kind.r)?,
        },
        Command::Solve { run, kind, assert_exact_support } => Job::Solve {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
            kind: kind.with_r(0)?,
            assert_exact_support,
        },
        Command::Discard { run, r, kind } => Job::Discard {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            r,
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
            kind: kind.with_r(r)?,
        },
        Command::BoxDesign { run, kind } => Job::Box {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
            kind: kind.with_r(0)?,
        },
        Command::BoxDiscard { run, r, kind } => Job::BoxDiscard {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            r,
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
            kind: kind.with_r(r)?,
        },
        Command::Cascade { run, kind } => Job::Cascade {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
            kind: kind.with_r(0)?,
        },
        Command::CascadeDiscard { run, r, stage } => Job::CascadeDiscard {
            input: load_problem(&run.problem_file)?,
            m: run.m,
            r,
            stage: stage.into(),
            seed: run.seed,
            target: target(run.target.epsilon, run.target.beta),
        },
        Command::Validate {
            problem_file,
            m,
            trials,
            epsilon,
            seed,
            method,
            kind,
            r,
            stage,
            n_fresh,
            ci_level,
        } => {
            let file = load_problem(&problem_file)?;
            let plain = |default: KindArg| kind.unwrap_or(default).with_r(0);
            let method = match method {
                MethodArg::Scenario => Method::Scenario { kind: plain(KindArg::Floyd)? },
                MethodArg::Box => Method::Box { kind: plain(KindArg::Exact)? },
                MethodArg::Discard => Method::Discard { r },
                MethodArg::BoxDiscard => Method::BoxDiscard { r },
                MethodArg::Cascade => Method::Cascade,
                MethodArg::CascadeDiscard => Method::CascadeDiscard { r, stage: stage.into() },
            };
            Job::Validate {
                config: ExperimentConfig {
                    problem: file.problem,
                    second_stage: file.second_stage,
                    canonical_tag: file.canonical_tag,
                    distribution: file.distribution,
                    m,
                    epsilon,
                    method,
                    trials,
                    seed,
                    n_fresh,
                    ci_level,
                },
            }
        }
        Command::Experiment { config_file } => {
            let grid: ExperimentGrid = input::read(&config_file)?;
            grid.check()?;
            Job::Experiment { grid }
        }
        Command::Replay { report_file } => {
            let report: Report = input::read(&report_file)?;
            report.config
        }
        Command::Template { .. } => unreachable!("handled before dispatch"),
    })
}

fn emit<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io("stdout".into(), e))
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    if let Command::Template { form } = cli.command {
        let form = match form {
            FormArg::LowerMax => CanonicalForm::LowerMax,
            FormArg::Interval => CanonicalForm::Interval,
            FormArg::Cascade => CanonicalForm::Cascade,
        };
        return emit(&ProblemFile::canonical(form));
    }
    let outcome = jobs::execute(build(cli.command)?)?;
    emit(&outcome.report)?;
    if outcome.failed {
        return Err(CliError::ValidationFailed);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
