//! The scenario program: enforce `g(x, δᵢ) ≤ 0` for every drawn sample,
//! find the support constraints and a compression set, discard samples
//! greedily, and attach violation certificates.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::bounds::{epsilon_for, BoundKind};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, FEAS_TOL};
use crate::serde_ext;

pub use crate::canonical::violation_probability_exact_1d;

/// A removal counts as an improvement only below `objective - IMPROVE_TOL`.
pub const IMPROVE_TOL: f64 = 1e-7;
/// Componentwise tolerance when comparing re-solved decisions.
pub const REPRO_TOL: f64 = 1e-7;
/// A discarded sample must have `g` above this at the final decision.
pub const VIOL_TOL: f64 = 1e-9;

/// `g(x, δ) = (f0 + F δ)·x + h0 + h·δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainAffineConstraint {
    pub f0: Vec<f64>,
    /// `n_x` rows of `n_δ` entries.
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub h0: f64,
    pub h: Vec<f64>,
}

impl UncertainAffineConstraint {
    /// The LP row `coeffs·x ≤ rhs` this constraint becomes at `delta`.
    pub fn row_at(&self, delta: &[f64]) -> (Vec<f64>, f64) {
        let coeffs = self
            .f0
            .iter()
            .zip(&self.f)
            .map(|(a, row)| a + dot(row, delta))
            .collect();
        (coeffs, -self.h0 - dot(&self.h, delta))
    }

    pub fn eval(&self, x: &[f64], delta: &[f64]) -> f64 {
        let (coeffs, rhs) = self.row_at(delta);
        dot(&coeffs, x) - rhs
    }

    fn check(&self, n_x: usize, n_delta: usize) -> std::result::Result<(), String> {
        if self.f0.len() != n_x {
            return Err(format!("f0 has length {}, expected {n_x}", self.f0.len()));
        }
        if self.f.len() != n_x {
            return Err(format!("F has {} rows, expected {n_x}", self.f.len()));
        }
        if let Some((k, row)) = self.f.iter().enumerate().find(|(_, r)| r.len() != n_delta) {
            return Err(format!("F[{k}] has length {}, expected {n_delta}", row.len()));
        }
        if self.h.len() != n_delta {
            return Err(format!("h has length {}, expected {n_delta}", self.h.len()));
        }
        let finite = self.f0.iter().chain(self.f.iter().flatten()).chain(&self.h).all(|v| v.is_finite());
        if !finite || !self.h0.is_finite() {
            return Err("entries must be finite".into());
        }
        Ok(())
    }
}

/// `min cost·x` over `var_lower ≤ x ≤ var_upper` subject to `max_j g_j(x, δ) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProblem {
    pub n_x: usize,
    pub n_delta: usize,
    pub cost: Vec<f64>,
    #[serde(with = "serde_ext::lower")]
    pub var_lower: Vec<f64>,
    #[serde(with = "serde_ext::upper")]
    pub var_upper: Vec<f64>,
    pub constraints: Vec<UncertainAffineConstraint>,
}

impl ScenarioProblem {
    /// Problem with free variables.
    pub fn new(cost: Vec<f64>, n_delta: usize, constraints: Vec<UncertainAffineConstraint>) -> Self {
        let n_x = cost.len();
        ScenarioProblem {
            n_x,
            n_delta,
            cost,
            var_lower: vec![f64::NEG_INFINITY; n_x],
            var_upper: vec![f64::INFINITY; n_x],
            constraints,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_delta == 0 {
            return Err(Error::Dimension("n_x and n_delta must be positive".into()));
        }
        if self.cost.len() != self.n_x {
            return Err(Error::Dimension(format!(
                "cost has length {}, expected {}",
                self.cost.len(),
                self.n_x
            )));
        }
        if self.var_lower.len() != self.n_x || self.var_upper.len() != self.n_x {
            return Err(Error::Dimension("variable bounds must have length n_x".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::Dimension("at least one constraint is required".into()));
        }
        for (j, c) in self.constraints.iter().enumerate() {
            c.check(self.n_x, self.n_delta)
                .map_err(|e| Error::Dimension(format!("constraint {j}: {e}")))?;
        }
        Ok(())
    }

    /// `max_j g_j(x, δ)`.
    pub fn g(&self, x: &[f64], delta: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.eval(x, delta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_samples(&self, samples: &[Vec<f64>]) -> Result<()> {
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != self.n_delta) {
            return Err(Error::Dimension(format!(
                "sample {i} has length {}, expected {}",
                s.len(),
                self.n_delta
            )));
        }
        Ok(())
    }

    /// The LP enforcing every constraint at the samples listed in `indices`.
    pub fn sampled_lp(&self, samples: &[Vec<f64>], indices: &[usize]) -> LinearProgram {
        let mut lp = LinearProgram::new(self.cost.clone())
            .with_bounds(self.var_lower.clone(), self.var_upper.clone());
        for &i in indices {
            for c in &self.constraints {
                let (coeffs, rhs) = c.row_at(&samples[i]);
                lp.push_row(coeffs, rhs);
            }
        }
        lp
    }
}

/// Either level of a certificate; the other is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertTarget {
    Epsilon(f64),
    Beta(f64),
}

/// Support and compression structure of one scenario solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRecord {
    pub sample_count: usize,
    /// Compression set padded to `d_apriori` (or to all samples when fewer).
    pub compression_indices: Vec<usize>,
    /// Fixed point of the support-restriction iteration, before padding.
    pub raw_compression: Vec<usize>,
    pub support_indices: Vec<usize>,
    /// Samples removed by a discarding procedure, in removal order.
    pub discarded: Vec<usize>,
    pub d_apriori: usize,
    pub consistent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

/// `P^m{ V(x_m) > ε } ≤ β` (or `=` when `equality_claimed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub m: usize,
    pub d: usize,
    pub r: usize,
    pub kind: BoundKind,
    pub epsilon: f64,
    pub beta: f64,
    pub equality_claimed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_support: Option<usize>,
    pub notes: Vec<String>,
}

impl Certificate {
    /// Evaluates or inverts the bound for `(m, d, kind)`.
    pub fn issue(m: usize, d: usize, kind: BoundKind, target: CertTarget) -> Result<Self> {
        if kind == BoundKind::Vc {
            return Err(Error::CertificateRefused(
                "the VC bound is advisory and never certifies a solution".into(),
            ));
        }
        let floor = kind.min_samples(d, 0.5);
        if m < floor {
            return Err(Error::Domain(format!(
                "m = {m} below the floor {floor} for kind {kind}"
            )));
        }
        let (epsilon, beta) = match target {
            CertTarget::Epsilon(eps) => (eps, kind.q(m, d, eps)?),
            CertTarget::Beta(beta) => {
                let eps = epsilon_for(m, d, beta, kind)?;
                (eps, kind.q(m, d, eps)?)
            }
        };
        let mut notes = Vec::new();
        if beta >= 1.0 {
            debug!("vacuous certificate: q(m={m}, d={d}, eps={epsilon}) = 1 for kind {kind}");
            notes.push("vacuous: the bound equals 1".into());
        }
        Ok(Certificate {
            m,
            d,
            r: kind.discarded(),
            kind,
            epsilon,
            beta,
            equality_claimed: false,
            observed_support: None,
            notes,
        })
    }
}

/// Maps a non-optimal LP status to the assumption it breaks.
pub(crate) fn require_optimal(sol: LpSolution, what: &str) -> Result<LpSolution> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::AssumptionViolation {
            assumption: "non-empty feasible region",
            detail: format!("{what} is infeasible"),
        }),
        LpStatus::Unbounded => Err(Error::AssumptionViolation {
            assumption: "existence of a minimizer",
            detail: format!("{what} is unbounded"),
        }),
    }
}

fn solve_on(problem: &ScenarioProblem, samples: &[Vec<f64>], indices: &[usize]) -> Result<LpSolution> {
    lp::solve(&problem.sampled_lp(samples, indices))
}

fn objective_on(problem: &ScenarioProblem, samples: &[Vec<f64>], indices: &[usize]) -> Result<f64> {
    let sol = lp::solve_vertex(&problem.sampled_lp(samples, indices))?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Ok(f64::NEG_INFINITY),
        LpStatus::Infeasible => Err(Error::SolverFailure(
            "dropping a sample made the program infeasible".into(),
        )),
    }
}

fn without(indices: &[usize], drop: usize) -> Vec<usize> {
    indices.iter().copied().filter(|&i| i != drop).collect()
}

/// Samples among `active` whose removal lowers the objective below
/// `objective - IMPROVE_TOL`. Only samples with an active row at `x` are
/// re-solved: dropping a slack constraint cannot move a convex optimum.
pub(crate) fn supports_within(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
    active: &[usize],
    solution: &LpSolution,
) -> Result<Vec<usize>> {
    let mut support = Vec::new();
    for &i in active {
        if problem.g(&solution.x, &samples[i]) < -lp::ACT_TOL {
            continue;
        }
        if objective_on(problem, samples, &without(active, i))? < solution.objective - IMPROVE_TOL {
            support.push(i);
        }
    }
    if support.len() > problem.n_x {
        return Err(Error::DegenerateProblem(format!(
            "{} support constraints exceed n_x = {}",
            support.len(),
            problem.n_x
        )));
    }
    Ok(support)
}

/// Solves the scenario program on all samples and records its support and
/// compression structure. A compression failure is reported through
/// `consistent = false` rather than an error.
pub fn solve_scenario(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
) -> Result<(LpSolution, ConsistencyRecord)> {
    problem.validate()?;
    problem.check_samples(samples)?;
    if samples.is_empty() {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let all: Vec<usize> = (0..samples.len()).collect();
    let full = require_optimal(solve_on(problem, samples, &all)?, "the sampled program")?;
    let record = match compression_within(problem, samples, &all, &[], &full) {
        Ok(record) => record,
        Err(Error::DegenerateProblem(msg)) => ConsistencyRecord {
            sample_count: samples.len(),
            compression_indices: Vec::new(),
            raw_compression: Vec::new(),
            support_indices: supports_within(problem, samples, &all, &full).unwrap_or_default(),
            discarded: Vec::new(),
            d_apriori: problem.n_x,
            consistent: false,
            diagnostics: Some(msg),
        },
        Err(e) => return Err(e),
    };
    Ok((full, record))
}

/// Sample indices whose individual removal improves the objective.
pub fn support_constraints(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
    solution: &LpSolution,
) -> Result<Vec<usize>> {
    problem.validate()?;
    problem.check_samples(samples)?;
    let all: Vec<usize> = (0..samples.len()).collect();
    supports_within(problem, samples, &all, solution)
}

/// Iterates support restriction to a fixed point and verifies that the
/// resulting set reproduces the full solution and is consistent with every
/// sample.
pub fn compression_set(problem: &ScenarioProblem, samples: &[Vec<f64>]) -> Result<ConsistencyRecord> {
    problem.validate()?;
    problem.check_samples(samples)?;
    if samples.is_empty() {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let all: Vec<usize> = (0..samples.len()).collect();
    let full = require_optimal(solve_on(problem, samples, &all)?, "the sampled program")?;
    compression_within(problem, samples, &all, &[], &full)
}

/// Restricts `active` to its compression set. `removed` samples must be
/// violated by the reproduced solution.
pub(crate) fn compression_within(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
    active: &[usize],
    removed: &[usize],
    full: &LpSolution,
) -> Result<ConsistencyRecord> {
    let support = supports_within(problem, samples, active, full)?;
    let reproduces = |sol: &LpSolution| {
        sol.is_optimal() && (0..problem.n_x).all(|k| (sol.x[k] - full.x[k]).abs() <= REPRO_TOL)
    };
    let mut current = support.clone();
    let mut reduced = loop {
        let sol = solve_on(problem, samples, &current)?;
        if !sol.is_optimal() {
            break sol;
        }
        let next = supports_within(problem, samples, &current, &sol)?;
        if next == current {
            break sol;
        }
        current = next;
    };
    // Rows that do not depend on δ are copied into every sample and are
    // never support constraints; when the support set alone loses them,
    // add the lowest-index samples until the solution is reproduced.
    let unused: Vec<usize> = active.iter().copied().filter(|i| !current.contains(i)).collect();
    let mut pool = unused.into_iter();
    while !reproduces(&reduced) && current.len() < problem.n_x {
        let Some(i) = pool.next() else { break };
        current.push(i);
        current.sort_unstable();
        reduced = solve_on(problem, samples, &current)?;
    }
    if !reduced.is_optimal() {
        return Err(Error::DegenerateProblem(format!(
            "program on the compression candidate {current:?} is {:?}",
            reduced.status
        )));
    }
    if let Some(k) = (0..problem.n_x).find(|&k| (reduced.x[k] - full.x[k]).abs() > REPRO_TOL) {
        return Err(Error::DegenerateProblem(format!(
            "compression set {current:?} gives x[{k}] = {} instead of {}",
            reduced.x[k], full.x[k]
        )));
    }
    if let Some(&i) = active.iter().find(|&&i| problem.g(&reduced.x, &samples[i]) > FEAS_TOL) {
        return Err(Error::DegenerateProblem(format!(
            "compression solution violates sample {i}"
        )));
    }
    if let Some(&i) = removed.iter().find(|&&i| problem.g(&reduced.x, &samples[i]) <= VIOL_TOL) {
        return Err(Error::DegenerateRemoval { index: i });
    }
    let d = problem.n_x;
    Ok(ConsistencyRecord {
        sample_count: active.len() + removed.len(),
        compression_indices: pad(&current, active, d),
        raw_compression: current,
        support_indices: support,
        discarded: removed.to_vec(),
        d_apriori: d,
        consistent: true,
        diagnostics: None,
    })
}

/// Adds the lowest unused indices of `pool` until `set` has `d` elements.
pub(crate) fn pad(set: &[usize], pool: &[usize], d: usize) -> Vec<usize> {
    let mut out = set.to_vec();
    for &i in pool {
        if out.len() >= d {
            break;
        }
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

/// Attaches a certificate to a consistent record. `assert_exact_support`
/// is the caller's claim that the problem has exactly `d` support
/// constraints with probability one; only then does an exact-binomial
/// certificate claim equality.
pub fn certify(
    record: &ConsistencyRecord,
    target: CertTarget,
    kind: BoundKind,
    assert_exact_support: bool,
) -> Result<Certificate> {
    if !record.consistent {
        return Err(Error::CertificateRefused(format!(
            "record is not consistent{}",
            record
                .diagnostics
                .as_deref()
                .map(|d| format!(": {d}"))
                .unwrap_or_default()
        )));
    }
    check_discard_kind(kind, record.discarded.len())?;
    let mut cert = Certificate::issue(record.sample_count, record.d_apriori, kind, target)?;
    cert.observed_support = Some(record.support_indices.len());
    if assert_exact_support {
        if kind == BoundKind::ExactBinomial {
            cert.equality_claimed = true;
        } else {
            cert.notes
                .push(format!("exact-support assertion ignored for kind {kind}"));
        }
    }
    Ok(cert)
}

pub(crate) fn check_discard_kind(kind: BoundKind, discarded: usize) -> Result<()> {
    match kind {
        BoundKind::Discard { r } | BoundKind::DiscardUnique { r } if r != discarded => {
            Err(Error::CertificateRefused(format!(
                "kind {kind} does not match the {discarded} discarded samples"
            )))
        }
        BoundKind::Floyd | BoundKind::ExactBinomial | BoundKind::Vc if discarded > 0 => {
            Err(Error::CertificateRefused(format!(
                "{discarded} samples were discarded; use a discard kind"
            )))
        }
        _ => Ok(()),
    }
}

/// Result of greedy sampling-and-discarding.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscardOutcome {
    pub solution: LpSolution,
    pub removed: Vec<usize>,
    pub record: ConsistencyRecord,
    /// Objective before any removal and after each round.
    pub objectives: Vec<f64>,
}

/// Greedily removes `r` samples, each time the one whose removal lowers the
/// objective most (ties: lowest index), then checks that every removed
/// sample is violated by the final decision.
pub fn discard(problem: &ScenarioProblem, samples: &[Vec<f64>], r: usize) -> Result<DiscardOutcome> {
    problem.validate()?;
    problem.check_samples(samples)?;
    let m = samples.len();
    if m == 0 || m < problem.n_x + r {
        return Err(Error::Domain(format!(
            "discarding {r} samples needs m >= n_x + r = {} (m = {m})",
            problem.n_x + r
        )));
    }
    let mut active: Vec<usize> = (0..m).collect();
    let mut current = require_optimal(solve_on(problem, samples, &active)?, "the sampled program")?;
    let mut objectives = vec![current.objective];
    let mut removed = Vec::with_capacity(r);
    for _ in 0..r {
        let mut candidates = supports_within(problem, samples, &active, &current)?;
        if candidates.is_empty() {
            candidates = active.clone();
        }
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let value = objective_on(problem, samples, &without(&active, c))?;
            if value == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(_, b)| value < b - 1e-12) {
                best = Some((c, value));
            }
        }
        let Some((chosen, _)) = best else {
            return Err(Error::AssumptionViolation {
                assumption: "existence of a minimizer",
                detail: "every removal candidate leaves an unbounded program".into(),
            });
        };
        active.retain(|&i| i != chosen);
        removed.push(chosen);
        let next = require_optimal(solve_on(problem, samples, &active)?, "the reduced program")?;
        if next.objective > current.objective + 1e-9 {
            return Err(Error::SolverFailure(format!(
                "objective rose from {} to {} after a removal",
                current.objective, next.objective
            )));
        }
        objectives.push(next.objective);
        current = next;
    }
    if let Some(&i) = removed
        .iter()
        .find(|&&i| problem.g(&current.x, &samples[i]) <= VIOL_TOL)
    {
        return Err(Error::DegenerateRemoval { index: i });
    }
    let record = match compression_within(problem, samples, &active, &removed, &current) {
        Ok(record) => record,
        Err(Error::DegenerateProblem(msg)) => ConsistencyRecord {
            sample_count: m,
            compression_indices: Vec::new(),
            raw_compression: Vec::new(),
            support_indices: Vec::new(),
            discarded: removed.clone(),
            d_apriori: problem.n_x,
            consistent: false,
            diagnostics: Some(msg),
        },
        Err(e) => return Err(e),
    };
    Ok(DiscardOutcome {
        solution: current,
        removed,
        record,
        objectives,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
