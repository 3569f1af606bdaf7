//! A `Job` is the fully resolved configuration of one invocation. Reports
//! embed it, so a report can be replayed without the original files.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use scenario_cert::bounds::{epsilon_for, sample_size_for};
use scenario_cert::cascade::{discard_cascade, solve_cascade, Stage};
use scenario_cert::lp::LpSolution;
use scenario_cert::robust_box::{discard_box, solve_box_design, AxisBox};
use scenario_cert::sampling::draw;
use scenario_cert::scenario::{certify, discard, solve_scenario, CertTarget, Certificate, ConsistencyRecord};
use scenario_cert::validate::{run_experiment, ExperimentConfig, ExperimentReport, Verdict};
use scenario_cert::{BoundKind, Error, LpStatus};

use crate::error::CliError;
use crate::input::{ExperimentGrid, ProblemFile, DEFAULT_CI_LEVEL, DEFAULT_N_FRESH, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Certify {
        m: usize,
        d: usize,
        target: CertTarget,
        kind: BoundKind,
    },
    SampleSize {
        d: usize,
        epsilon: f64,
        beta: f64,
        kind: BoundKind,
    },
    Epsilon {
        m: usize,
        d: usize,
        beta: f64,
        kind: BoundKind,
    },
    Solve {
        input: ProblemFile,
        m: usize,
        seed: u64,
        target: CertTarget,
        kind: BoundKind,
        #[serde(default)]
        assert_exact_support: bool,
    },
    Discard {
        input: ProblemFile,
        m: usize,
        r: usize,
        seed: u64,
        target: CertTarget,
        kind: BoundKind,
    },
    Box {
        input: ProblemFile,
        m: usize,
        seed: u64,
        target: CertTarget,
        kind: BoundKind,
    },
    BoxDiscard {
        input: ProblemFile,
        m: usize,
        r: usize,
        seed: u64,
        target: CertTarget,
        kind: BoundKind,
    },
    Cascade {
        input: ProblemFile,
        m: usize,
        seed: u64,
        target: CertTarget,
        kind: BoundKind,
    },
    CascadeDiscard {
        input: ProblemFile,
        m: usize,
        r: usize,
        stage: Stage,
        seed: u64,
        target: CertTarget,
    },
    Validate {
        config: ExperimentConfig,
    },
    Experiment {
        grid: ExperimentGrid,
    },
}

impl Job {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Certify { .. } | Job::SampleSize { .. } | Job::Epsilon { .. } => None,
            Job::Solve { seed, .. }
            | Job::Discard { seed, .. }
            | Job::Box { seed, .. }
            | Job::BoxDiscard { seed, .. }
            | Job::Cascade { seed, .. }
            | Job::CascadeDiscard { seed, .. } => Some(*seed),
            Job::Validate { config } => Some(config.seed),
            Job::Experiment { grid } => Some(grid.seed),
        }
    }

    fn input(&self) -> Option<&ProblemFile> {
        match self {
            Job::Solve { input, .. }
            | Job::Discard { input, .. }
            | Job::Box { input, .. }
            | Job::BoxDiscard { input, .. }
            | Job::Cascade { input, .. }
            | Job::CascadeDiscard { input, .. } => Some(input),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    /// Seconds since the Unix epoch. The only field a replay may change.
    pub timestamp_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: Job,
    pub result: Value,
}

/// Result of executing a job: the report and whether a verdict failed.
pub struct Outcome {
    pub report: Report,
    pub failed: bool,
}

pub fn execute(job: Job) -> Result<Outcome, CliError> {
    if let Some(input) = job.input() {
        input.check()?;
    }
    let (result, failed) = run(&job)?;
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Ok(Outcome {
        report: Report {
            schema_version: SCHEMA_VERSION,
            tool: concat!("scenario-cert ", env!("CARGO_PKG_VERSION")).into(),
            timestamp_unix,
            seed: job.seed(),
            config: job,
            result,
        },
        failed,
    })
}

#[derive(Serialize)]
struct SolutionOut {
    status: LpStatus,
    x: Vec<f64>,
    objective: f64,
    active_rows: Vec<usize>,
}

impl From<&LpSolution> for SolutionOut {
    fn from(s: &LpSolution) -> Self {
        SolutionOut {
            status: s.status,
            x: s.x.clone(),
            objective: s.objective,
            active_rows: s.active_rows.clone(),
        }
    }
}

#[derive(Serialize)]
struct BoundRow {
    kind: BoundKind,
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    advisory: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn bound_row(m: usize, d: usize, target: CertTarget, kind: BoundKind) -> BoundRow {
    let value = match target {
        CertTarget::Epsilon(eps) => kind.q(m, d, eps),
        CertTarget::Beta(beta) => epsilon_for(m, d, beta, kind),
    };
    BoundRow {
        kind,
        label: kind.label().into(),
        value: value.as_ref().ok().copied(),
        advisory: kind == BoundKind::Vc,
        error: value.err().map(|e| e.to_string()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn samples(input: &ProblemFile, m: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(draw(&input.distribution, m, seed)?)
}

fn run(job: &Job) -> Result<(Value, bool), CliError> {
    let value = match job {
        Job::Certify { m, d, target, kind } => {
            let r = kind.discarded();
            let rows: Vec<BoundRow> = [
                BoundKind::Floyd,
                BoundKind::ExactBinomial,
                BoundKind::Discard { r },
                BoundKind::DiscardUnique { r },
                BoundKind::Vc,
            ]
            .into_iter()
            .map(|k| bound_row(*m, *d, *target, k))
            .collect();
            let headline = match target {
                CertTarget::Epsilon(eps) => kind.q(*m, *d, *eps)?,
                CertTarget::Beta(beta) => epsilon_for(*m, *d, *beta, *kind)?,
            };
            let name = match target {
                CertTarget::Epsilon(_) => "beta",
                CertTarget::Beta(_) => "epsilon",
            };
            serde_json::json!({ name: headline, "kind": kind, "bounds": rows })
        }
        Job::SampleSize { d, epsilon, beta, kind } => {
            let m = sample_size_for(*d, *epsilon, *beta, *kind)?;
            serde_json::json!({ "m": m, "q_at_m": kind.q(m, *d, *epsilon)? })
        }
        Job::Epsilon { m, d, beta, kind } => {
            let eps = epsilon_for(*m, *d, *beta, *kind)?;
            serde_json::json!({ "epsilon": eps, "q_at_epsilon": kind.q(*m, *d, eps)? })
        }
        Job::Solve { input, m, seed, target, kind, assert_exact_support } => {
            let samples = samples(input, *m, *seed)?;
            let (solution, record) = solve_scenario(&input.problem, &samples)?;
            if !record.consistent {
                return Err(Error::DegenerateProblem(record.diagnostics.unwrap_or_default()).into());
            }
            let certificate = certify(&record, *target, *kind, *assert_exact_support)?;
            to_value(&ScenarioOut {
                solution: (&solution).into(),
                removed: None,
                objectives: None,
                record,
                certificate,
            })
        }
        Job::Discard { input, m, r, seed, target, kind } => {
            let samples = samples(input, *m, *seed)?;
            let out = discard(&input.problem, &samples, *r)?;
            let certificate = certify(&out.record, *target, *kind, false)?;
            to_value(&ScenarioOut {
                solution: (&out.solution).into(),
                removed: Some(out.removed),
                objectives: Some(out.objectives),
                record: out.record,
                certificate,
            })
        }
        Job::Box { input, m, seed, target, kind } => {
            let samples = samples(input, *m, *seed)?;
            let design = solve_box_design(&input.problem, &samples, *target, *kind)?;
            to_value(&BoxOut {
                solution: (&design.solution).into(),
                fitted: design.fitted,
                support: Some(design.support),
                removed: None,
                objectives: None,
                certificate: design.certificate,
            })
        }
        Job::BoxDiscard { input, m, r, seed, target, kind } => {
            let samples = samples(input, *m, *seed)?;
            let out = discard_box(&input.problem, &samples, *r, *target, *kind)?;
            to_value(&BoxOut {
                solution: (&out.solution).into(),
                fitted: out.fitted,
                support: None,
                removed: Some(out.removed),
                objectives: Some(out.objectives),
                certificate: out.certificate,
            })
        }
        Job::Cascade { input, m, seed, target, kind } => {
            let samples = samples(input, *m, *seed)?;
            to_value(&solve_cascade(&input.problem, input.second_stage()?, &samples, *target, *kind)?)
        }
        Job::CascadeDiscard { input, m, r, stage, seed, target } => {
            let samples = samples(input, *m, *seed)?;
            to_value(&discard_cascade(&input.problem, input.second_stage()?, &samples, *r, *stage, *target)?)
        }
        Job::Validate { config } => {
            let report = run_experiment(config)?;
            let failed = report.verdict == Verdict::Fail;
            return Ok((to_value(&report), failed));
        }
        Job::Experiment { grid } => {
            grid.check()?;
            let mut cells: Vec<ExperimentReport> = Vec::new();
            for &m in &grid.m {
                for &epsilon in &grid.epsilon {
                    for &method in &grid.method {
                        let config = ExperimentConfig {
                            problem: grid.problem.clone(),
                            second_stage: grid.second_stage.clone(),
                            canonical_tag: grid.canonical_tag,
                            distribution: grid.distribution.clone(),
                            m,
                            epsilon,
                            method,
                            trials: grid.trials,
                            seed: grid.seed,
                            n_fresh: grid.n_fresh.unwrap_or(DEFAULT_N_FRESH),
                            ci_level: grid.ci_level.unwrap_or(DEFAULT_CI_LEVEL),
                        };
                        cells.push(run_experiment(&config)?);
                    }
                }
            }
            let failed = cells.iter().any(|c| c.verdict == Verdict::Fail);
            return Ok((serde_json::json!({ "cells": cells }), failed));
        }
    };
    Ok((value, false))
}

#[derive(Serialize)]
struct ScenarioOut {
    solution: SolutionOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    removed: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objectives: Option<Vec<f64>>,
    record: ConsistencyRecord,
    certificate: Certificate,
}

#[derive(Serialize)]
struct BoxOut {
    solution: SolutionOut,
    fitted: AxisBox,
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    removed: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objectives: Option<Vec<f64>>,
    certificate: Certificate,
}
