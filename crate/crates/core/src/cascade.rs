//! Two scenario programs in cascade on shared samples: the second is
//! parameterized by the first minimizer, and the pair is certified jointly
//! with compression size `n_x + n_y`.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundKind;
use crate::error::{Error, Result};
use crate::lp::{LpSolution, LpStatus, FEAS_TOL};
use crate::scenario::{
    self, check_discard_kind, dot, pad, CertTarget, Certificate, ScenarioProblem,
    UncertainAffineConstraint, IMPROVE_TOL, REPRO_TOL, VIOL_TOL,
};
use crate::serde_ext;

/// `g̃(y, x, δ) = (a0 + A δ)·y + xᵀ Q δ + q·x + s·δ + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledConstraint {
    pub a0: Vec<f64>,
    /// `n_y` rows of `n_δ` entries.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    /// `n_x` rows of `n_δ` entries.
    #[serde(rename = "Q")]
    pub q_mat: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub t: f64,
}

impl CoupledConstraint {
    /// The constraint seen by the second stage once `x` is fixed.
    pub fn at(&self, x: &[f64]) -> UncertainAffineConstraint {
        let n_delta = self.s.len();
        let h = (0..n_delta)
            .map(|l| self.s[l] + x.iter().zip(&self.q_mat).map(|(xk, row)| xk * row[l]).sum::<f64>())
            .collect();
        UncertainAffineConstraint {
            f0: self.a0.clone(),
            f: self.a.clone(),
            h0: dot(&self.q, x) + self.t,
            h,
        }
    }

    pub fn eval(&self, y: &[f64], x: &[f64], delta: &[f64]) -> f64 {
        self.at(x).eval(y, delta)
    }

    fn check(&self, n_x: usize, n_y: usize, n_delta: usize) -> std::result::Result<(), String> {
        if self.a0.len() != n_y {
            return Err(format!("a0 has length {}, expected {n_y}", self.a0.len()));
        }
        if self.a.len() != n_y || self.a.iter().any(|r| r.len() != n_delta) {
            return Err(format!("A must be {n_y} x {n_delta}"));
        }
        if self.q_mat.len() != n_x || self.q_mat.iter().any(|r| r.len() != n_delta) {
            return Err(format!("Q must be {n_x} x {n_delta}"));
        }
        if self.q.len() != n_x {
            return Err(format!("q has length {}, expected {n_x}", self.q.len()));
        }
        if self.s.len() != n_delta {
            return Err(format!("s has length {}, expected {n_delta}", self.s.len()));
        }
        let finite = self
            .a0
            .iter()
            .chain(self.a.iter().flatten())
            .chain(self.q_mat.iter().flatten())
            .chain(&self.q)
            .chain(&self.s)
            .all(|v| v.is_finite());
        if !finite || !self.t.is_finite() {
            return Err("entries must be finite".into());
        }
        Ok(())
    }
}

/// The second program `min cost_y·y` subject to `g̃(y, x, δᵢ) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStageSpec {
    pub n_y: usize,
    pub cost_y: Vec<f64>,
    #[serde(with = "serde_ext::lower")]
    pub y_lower: Vec<f64>,
    #[serde(with = "serde_ext::upper")]
    pub y_upper: Vec<f64>,
    pub constraints: Vec<CoupledConstraint>,
}

impl SecondStageSpec {
    /// Stage with free variables.
    pub fn new(cost_y: Vec<f64>, constraints: Vec<CoupledConstraint>) -> Self {
        let n_y = cost_y.len();
        SecondStageSpec {
            n_y,
            cost_y,
            y_lower: vec![f64::NEG_INFINITY; n_y],
            y_upper: vec![f64::INFINITY; n_y],
            constraints,
        }
    }

    pub fn validate(&self, first: &ScenarioProblem) -> Result<()> {
        if self.n_y == 0 || self.cost_y.len() != self.n_y {
            return Err(Error::Dimension("cost_y must have positive length n_y".into()));
        }
        if self.y_lower.len() != self.n_y || self.y_upper.len() != self.n_y {
            return Err(Error::Dimension("second-stage bounds must have length n_y".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::Dimension("second stage needs at least one constraint".into()));
        }
        for (j, c) in self.constraints.iter().enumerate() {
            c.check(first.n_x, self.n_y, first.n_delta)
                .map_err(|e| Error::Dimension(format!("second-stage constraint {j}: {e}")))?;
        }
        Ok(())
    }

    /// The second stage as an ordinary scenario problem at a fixed `x`.
    pub fn at(&self, x: &[f64], n_delta: usize) -> ScenarioProblem {
        ScenarioProblem {
            n_x: self.n_y,
            n_delta,
            cost: self.cost_y.clone(),
            var_lower: self.y_lower.clone(),
            var_upper: self.y_upper.clone(),
            constraints: self.constraints.iter().map(|c| c.at(x)).collect(),
        }
    }

    /// `max_j g̃_j(y, x, δ)`.
    pub fn g(&self, y: &[f64], x: &[f64], delta: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.eval(y, x, delta))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which stage's objective drives greedy removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub first_objective: f64,
    pub second_objective: f64,
    pub cert: Certificate,
    pub first_support: Vec<usize>,
    pub second_support: Vec<usize>,
    /// Union of both stages' compression sets, padded to `n_x + n_y`.
    pub union_compression: Vec<usize>,
    pub removed: Vec<usize>,
}

/// True iff either stage's constraint is strictly positive at `delta`.
pub fn joint_violation(
    x: &[f64],
    y: &[f64],
    p1: &ScenarioProblem,
    p2: &SecondStageSpec,
    delta: &[f64],
) -> bool {
    p1.g(x, delta) > 0.0 || p2.g(y, x, delta) > 0.0
}

struct Pass {
    first: LpSolution,
    second: LpSolution,
}

fn sub(samples: &[Vec<f64>], indices: &[usize]) -> Vec<Vec<f64>> {
    indices.iter().map(|&i| samples[i].clone()).collect()
}

/// One x-then-y pass on the samples in `active`.
fn run_pass(
    p1: &ScenarioProblem,
    p2: &SecondStageSpec,
    samples: &[Vec<f64>],
    active: &[usize],
) -> Result<Pass> {
    let local = sub(samples, active);
    let all: Vec<usize> = (0..local.len()).collect();
    let first = scenario::require_optimal(
        crate::lp::solve(&p1.sampled_lp(&local, &all))?,
        "the first-stage program",
    )?;
    let stage_two = p2.at(&first.x, p1.n_delta);
    let second = crate::lp::solve(&stage_two.sampled_lp(&local, &all))?;
    match second.status {
        LpStatus::Optimal => Ok(Pass { first, second }),
        LpStatus::Infeasible => Err(Error::FeasibilitySetF),
        LpStatus::Unbounded => Err(Error::AssumptionViolation {
            assumption: "existence of a minimizer",
            detail: "the second-stage program is unbounded".into(),
        }),
    }
}

/// Per-stage compression sets of a pass over `active`, mapped back to
/// sample indices, and the verified union.
fn compress(
    p1: &ScenarioProblem,
    p2: &SecondStageSpec,
    samples: &[Vec<f64>],
    active: &[usize],
    removed: &[usize],
    pass: &Pass,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let local = sub(samples, active);
    let all: Vec<usize> = (0..local.len()).collect();
    let lift = |v: Vec<usize>| -> Vec<usize> { v.into_iter().map(|p| active[p]).collect() };

    let r1 = scenario::compression_within(p1, &local, &all, &[], &pass.first)?;
    let stage_two = p2.at(&pass.first.x, p1.n_delta);
    let r2 = scenario::compression_within(&stage_two, &local, &all, &[], &pass.second)?;

    let mut union = lift(r1.raw_compression.clone());
    for i in lift(r2.raw_compression.clone()) {
        if !union.contains(&i) {
            union.push(i);
        }
    }
    union.sort_unstable();
    let d = p1.n_x + p2.n_y;
    if union.len() > d {
        return Err(Error::DegenerateProblem(format!(
            "union compression has {} > n_x + n_y = {d} samples",
            union.len()
        )));
    }

    let replay = run_pass(p1, p2, samples, &union).map_err(|e| match e {
        Error::FeasibilitySetF => Error::DegenerateProblem("replay on the union is infeasible".into()),
        other => other,
    })?;
    let mismatch = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(u, v)| (u - v).abs() > REPRO_TOL);
    if mismatch(&replay.first.x, &pass.first.x) || mismatch(&replay.second.x, &pass.second.x) {
        return Err(Error::DegenerateProblem(format!(
            "replaying both stages on {union:?} does not reproduce (x, y)"
        )));
    }
    let (x, y) = (&replay.first.x, &replay.second.x);
    if let Some(&i) = active
        .iter()
        .find(|&&i| p1.g(x, &samples[i]) > FEAS_TOL || p2.g(y, x, &samples[i]) > FEAS_TOL)
    {
        return Err(Error::DegenerateProblem(format!(
            "replayed decision violates sample {i}"
        )));
    }
    if let Some(&i) = removed.iter().find(|&&i| {
        p1.g(x, &samples[i]) <= VIOL_TOL && p2.g(y, x, &samples[i]) <= VIOL_TOL
    }) {
        return Err(Error::DegenerateRemoval { index: i });
    }
    let padded = pad(&union, active, d);
    Ok((lift(r1.support_indices), lift(r2.support_indices), padded))
}

fn validate_inputs(p1: &ScenarioProblem, p2: &SecondStageSpec, samples: &[Vec<f64>], r: usize) -> Result<()> {
    p1.validate()?;
    p2.validate(p1)?;
    p1.check_samples(samples)?;
    let d = p1.n_x + p2.n_y;
    if samples.len() < d + r {
        return Err(Error::Domain(format!(
            "cascade needs m >= n_x + n_y + r = {} (m = {})",
            d + r,
            samples.len()
        )));
    }
    Ok(())
}

fn cascade_certificate(m: usize, d: usize, kind: BoundKind, r: usize, target: CertTarget) -> Result<Certificate> {
    match kind {
        BoundKind::ExactBinomial | BoundKind::DiscardUnique { .. } => {
            return Err(Error::CertificateRefused(
                "cascades admit no unique compression set; use floyd or discard".into(),
            ))
        }
        BoundKind::Vc => {
            return Err(Error::CertificateRefused("the VC bound is advisory only".into()))
        }
        _ => check_discard_kind(kind, r)?,
    }
    Certificate::issue(m, d, kind, target)
}

/// Solves stage one, then stage two at its minimizer on the same samples,
/// and certifies the joint violation with `d = n_x + n_y`.
pub fn solve_cascade(
    p1: &ScenarioProblem,
    p2: &SecondStageSpec,
    samples: &[Vec<f64>],
    target: CertTarget,
    kind: BoundKind,
) -> Result<CascadeResult> {
    validate_inputs(p1, p2, samples, 0)?;
    let d = p1.n_x + p2.n_y;
    let cert = cascade_certificate(samples.len(), d, kind, 0, target)?;
    let active: Vec<usize> = (0..samples.len()).collect();
    let pass = run_pass(p1, p2, samples, &active)?;
    let (first_support, second_support, union_compression) =
        compress(p1, p2, samples, &active, &[], &pass)?;
    Ok(CascadeResult {
        x: pass.first.x,
        y: pass.second.x,
        first_objective: pass.first.objective,
        second_objective: pass.second.objective,
        cert,
        first_support,
        second_support,
        union_compression,
        removed: Vec::new(),
    })
}

/// Greedy removal on the cascade. A candidate is acceptable only if
/// re-running the whole cascade without it strictly lowers the objective
/// of `target_stage`; the best acceptable candidate is removed each round.
pub fn discard_cascade(
    p1: &ScenarioProblem,
    p2: &SecondStageSpec,
    samples: &[Vec<f64>],
    r: usize,
    target_stage: Stage,
    target: CertTarget,
) -> Result<CascadeResult> {
    validate_inputs(p1, p2, samples, r)?;
    let d = p1.n_x + p2.n_y;
    let kind = if r == 0 { BoundKind::Floyd } else { BoundKind::Discard { r } };
    let cert = cascade_certificate(samples.len(), d, kind, r, target)?;
    let objective = |pass: &Pass| match target_stage {
        Stage::First => pass.first.objective,
        Stage::Second => pass.second.objective,
    };

    let mut active: Vec<usize> = (0..samples.len()).collect();
    let mut pass = run_pass(p1, p2, samples, &active)?;
    let mut removed = Vec::with_capacity(r);
    for _ in 0..r {
        let current = objective(&pass);
        let mut best: Option<(usize, f64, Pass)> = None;
        for &c in &active {
            // Only samples binding in some stage can move either decision.
            let binding = p1.g(&pass.first.x, &samples[c]) >= -crate::lp::ACT_TOL
                || p2.g(&pass.second.x, &pass.first.x, &samples[c]) >= -crate::lp::ACT_TOL;
            if !binding {
                continue;
            }
            let rest: Vec<usize> = active.iter().copied().filter(|&i| i != c).collect();
            let candidate = match run_pass(p1, p2, samples, &rest) {
                Ok(p) => p,
                Err(Error::FeasibilitySetF) | Err(Error::AssumptionViolation { .. }) => continue,
                Err(e) => return Err(e),
            };
            let value = objective(&candidate);
            if value >= current - IMPROVE_TOL {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b, _)| value < b - 1e-12) {
                best = Some((c, value, candidate));
            }
        }
        let Some((chosen, _, next)) = best else {
            return Err(Error::PartialRemoval {
                achieved: removed.len(),
                requested: r,
            });
        };
        active.retain(|&i| i != chosen);
        removed.push(chosen);
        pass = next;
    }
    if let Some(&i) = removed
        .iter()
        .find(|&&i| !joint_violation(&pass.first.x, &pass.second.x, p1, p2, &samples[i]))
    {
        return Err(Error::DegenerateRemoval { index: i });
    }
    let (first_support, second_support, union_compression) =
        compress(p1, p2, samples, &active, &removed, &pass)?;
    Ok(CascadeResult {
        x: pass.first.x,
        y: pass.second.x,
        first_objective: pass.first.objective,
        second_objective: pass.second.objective,
        cert,
        first_support,
        second_support,
        union_compression,
        removed,
    })
}
