//! Probabilistically robust design: fit the smallest axis-aligned box to
//! the samples, then solve the robust program over the whole box.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundKind;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, ACT_TOL, FEAS_TOL};
use crate::scenario::{
    check_discard_kind, dot, CertTarget, Certificate, ScenarioProblem, VIOL_TOL,
};

/// Above this uncertainty dimension corners are spot-checked instead of enumerated.
pub const CORNER_CHECK_MAX_DIM: usize = 12;
const SPOT_CHECK_CORNERS: usize = 256;

/// `[lower, upper]` in uncertainty space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension("box bounds must be nonempty and of equal length".into()));
        }
        if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] <= upper[k])) {
            return Err(Error::Domain(format!("box has lower > upper at coordinate {k}")));
        }
        Ok(AxisBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, delta: &[f64], tol: f64) -> bool {
        delta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(d, (l, u))| *d >= l - tol && *d <= u + tol)
    }

    /// Whether `self` contains `other` componentwise.
    pub fn contains_box(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|k| self.lower[k] <= other.lower[k] && other.upper[k] <= self.upper[k])
    }

    /// Corner selected by the bits of `mask` (bit ℓ set → upper side).
    pub fn corner(&self, mask: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|l| if mask >> l & 1 == 1 { self.upper[l] } else { self.lower[l] })
            .collect()
    }
}

/// Componentwise minimum and maximum of the samples.
pub fn fit_box(samples: &[Vec<f64>]) -> Result<AxisBox> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Domain("cannot fit a box to zero samples".into()))?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for (i, s) in samples.iter().enumerate() {
        if s.len() != first.len() {
            return Err(Error::Dimension(format!("sample {i} has length {}", s.len())));
        }
        for (l, (lo, hi)) in s.iter().zip(lower.iter_mut().zip(upper.iter_mut())) {
            *lo = lo.min(*l);
            *hi = hi.max(*l);
        }
    }
    AxisBox::new(lower, upper)
}

/// Indices attaining each coordinate's minimum and maximum (lowest index on
/// ties), deduplicated and sorted. At most `2 n_δ` entries.
pub fn fit_box_support(samples: &[Vec<f64>]) -> Result<Vec<usize>> {
    let fitted = fit_box(samples)?;
    let mut out = Vec::with_capacity(2 * fitted.dim());
    for l in 0..fitted.dim() {
        for target in [fitted.lower[l], fitted.upper[l]] {
            let i = samples.iter().position(|s| s[l] == target).expect("extreme is attained");
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Epigraph form of the robust program. Returns the program and the number
/// of leading decision variables.
fn epigraph_lp(problem: &ScenarioProblem, fitted: &AxisBox) -> LinearProgram {
    let n_x = problem.n_x;
    // (constraint, coordinate) pairs whose δ-coefficient depends on x.
    let mut epi = Vec::new();
    for (j, c) in problem.constraints.iter().enumerate() {
        for l in 0..problem.n_delta {
            if c.f.iter().any(|row| row[l] != 0.0) {
                epi.push((j, l));
            }
        }
    }
    let n = n_x + epi.len();
    let mut cost = problem.cost.clone();
    cost.resize(n, 0.0);
    let mut lower = problem.var_lower.clone();
    let mut upper = problem.var_upper.clone();
    lower.resize(n, f64::NEG_INFINITY);
    upper.resize(n, f64::INFINITY);
    let mut lp = LinearProgram::new(cost).with_bounds(lower, upper);

    for (col, &(j, l)) in epi.iter().enumerate() {
        let c = &problem.constraints[j];
        for b in [fitted.lower[l], fitted.upper[l]] {
            // b·(F[·][l]·x + h[l]) ≤ t
            let mut coeffs = vec![0.0; n];
            for k in 0..n_x {
                coeffs[k] = b * c.f[k][l];
            }
            coeffs[n_x + col] = -1.0;
            lp.push_row(coeffs, -b * c.h[l]);
        }
    }
    for (j, c) in problem.constraints.iter().enumerate() {
        let mut coeffs = vec![0.0; n];
        coeffs[..n_x].copy_from_slice(&c.f0);
        let mut constant = c.h0;
        for l in 0..problem.n_delta {
            match epi.iter().position(|&p| p == (j, l)) {
                Some(col) => coeffs[n_x + col] = 1.0,
                None => constant += (c.h[l] * fitted.lower[l]).max(c.h[l] * fitted.upper[l]),
            }
        }
        lp.push_row(coeffs, -constant);
    }
    lp
}

/// Exact worst case of `max_j g_j(x, ·)` over the box.
pub fn worst_case(problem: &ScenarioProblem, x: &[f64], fitted: &AxisBox) -> f64 {
    problem
        .constraints
        .iter()
        .map(|c| {
            let mut value = dot(&c.f0, x) + c.h0;
            for l in 0..problem.n_delta {
                let w: f64 = (0..problem.n_x).map(|k| c.f[k][l] * x[k]).sum::<f64>() + c.h[l];
                value += (w * fitted.lower[l]).max(w * fitted.upper[l]);
            }
            value
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_box(problem: &ScenarioProblem, fitted: &AxisBox) -> Result<()> {
    problem.validate()?;
    if fitted.dim() != problem.n_delta {
        return Err(Error::Dimension(format!(
            "box has dimension {}, problem has n_delta = {}",
            fitted.dim(),
            problem.n_delta
        )));
    }
    AxisBox::new(fitted.lower.clone(), fitted.upper.clone()).map(|_| ())
}

fn robust_objective(problem: &ScenarioProblem, fitted: &AxisBox) -> Result<f64> {
    let sol = lp::solve_vertex(&epigraph_lp(problem, fitted))?;
    Ok(match sol.status {
        LpStatus::Optimal => sol.objective,
        LpStatus::Unbounded => f64::NEG_INFINITY,
        LpStatus::Infeasible => f64::INFINITY,
    })
}

/// Solves `min cost·x  s.t.  g(x, δ) ≤ 0 for all δ in the box`.
///
/// The returned `active_rows` lists constraints `j` whose worst case over
/// the box is within [`ACT_TOL`] of zero.
pub fn robust_lp_over_box(problem: &ScenarioProblem, fitted: &AxisBox) -> Result<LpSolution> {
    check_box(problem, fitted)?;
    let program = epigraph_lp(problem, fitted);
    let sol = lp::solve_lex_prefix(&program, problem.n_x)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::AssumptionViolation {
                assumption: "robust feasible region has a non-empty interior",
                detail: "the robust program over the fitted box is infeasible".into(),
            })
        }
        LpStatus::Unbounded => {
            return Err(Error::AssumptionViolation {
                assumption: "existence of a minimizer",
                detail: "the robust program over the fitted box is unbounded".into(),
            })
        }
    }
    let x = sol.x[..problem.n_x].to_vec();
    verify_corners(problem, &x, fitted)?;
    let active_rows = problem
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let single = ScenarioProblem {
                constraints: vec![(*c).clone()],
                ..problem.clone()
            };
            worst_case(&single, &x, fitted) >= -ACT_TOL
        })
        .map(|(j, _)| j)
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: dot(&problem.cost, &x),
        x,
        active_rows,
        basis_rows: Vec::new(),
    })
}

fn verify_corners(problem: &ScenarioProblem, x: &[f64], fitted: &AxisBox) -> Result<()> {
    let n = fitted.dim();
    let worst = if n <= CORNER_CHECK_MAX_DIM {
        (0..1u64 << n)
            .map(|mask| problem.g(x, &fitted.corner(mask)))
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        warn!("n_delta = {n} exceeds {CORNER_CHECK_MAX_DIM}; spot-checking {SPOT_CHECK_CORNERS} corners");
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        (0..SPOT_CHECK_CORNERS)
            .map(|_| {
                let corner: Vec<f64> = (0..n)
                    .map(|l| if rng.random::<bool>() { fitted.upper[l] } else { fitted.lower[l] })
                    .collect();
                problem.g(x, &corner)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if worst > FEAS_TOL {
        return Err(Error::SolverFailure(format!(
            "robust solution violates a box corner by {worst:e}"
        )));
    }
    Ok(())
}

/// Solution, fitted box and certificate of the box design.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDesign {
    pub solution: LpSolution,
    pub fitted: AxisBox,
    /// Samples on the box facets; they alone reproduce the box.
    pub support: Vec<usize>,
    pub certificate: Certificate,
}

fn box_notes(cert: &mut Certificate) {
    cert.notes.push(
        "guarantee covers every feasible point of the robust program over the fitted box".into(),
    );
    if matches!(cert.kind, BoundKind::ExactBinomial | BoundKind::DiscardUnique { .. }) {
        cert.notes.push(
            "binomial tail bounds the box-exit probability; it is an upper bound, not tight".into(),
        );
    }
}

/// Fits the box, solves the robust program and certifies with `d = 2 n_δ`.
/// `kind` is exact-binomial (default) or Floyd.
pub fn solve_box_design(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
    target: CertTarget,
    kind: BoundKind,
) -> Result<BoxDesign> {
    problem.validate()?;
    problem.check_samples(samples)?;
    let d = 2 * problem.n_delta;
    if samples.len() < d {
        return Err(Error::Domain(format!(
            "box design needs m >= 2 n_delta = {d} (m = {})",
            samples.len()
        )));
    }
    if !matches!(kind, BoundKind::ExactBinomial | BoundKind::Floyd) {
        return Err(Error::CertificateRefused(format!(
            "box design certifies with exact or floyd, not {kind}"
        )));
    }
    let fitted = fit_box(samples)?;
    let support = fit_box_support(samples)?;
    let solution = robust_lp_over_box(problem, &fitted)?;
    let mut certificate = Certificate::issue(samples.len(), d, kind, target)?;
    certificate.observed_support = Some(support.len());
    box_notes(&mut certificate);
    Ok(BoxDesign {
        solution,
        fitted,
        support,
        certificate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDiscardOutcome {
    pub solution: LpSolution,
    pub fitted: AxisBox,
    pub removed: Vec<usize>,
    /// Robust objective before any removal and after each round.
    pub objectives: Vec<f64>,
    pub certificate: Certificate,
}

/// Removes `r` samples one at a time. Each round only samples on the
/// current box facets are candidates; the one whose removal shrinks the
/// robust objective most is dropped (ties: lowest index).
pub fn discard_box(
    problem: &ScenarioProblem,
    samples: &[Vec<f64>],
    r: usize,
    target: CertTarget,
    kind: BoundKind,
) -> Result<BoxDiscardOutcome> {
    problem.validate()?;
    problem.check_samples(samples)?;
    let d = 2 * problem.n_delta;
    let m = samples.len();
    if m < d + r {
        return Err(Error::Domain(format!(
            "discarding {r} samples needs m >= 2 n_delta + r = {} (m = {m})",
            d + r
        )));
    }
    let kind = match kind {
        BoundKind::ExactBinomial if r == 0 => kind,
        BoundKind::Floyd if r == 0 => kind,
        _ => {
            check_discard_kind(kind, r)?;
            if !matches!(kind, BoundKind::Discard { .. } | BoundKind::DiscardUnique { .. }) {
                return Err(Error::CertificateRefused(format!("{kind} cannot certify a discard")));
            }
            kind
        }
    };
    let subset = |active: &[usize]| -> Vec<Vec<f64>> { active.iter().map(|&i| samples[i].clone()).collect() };

    let mut active: Vec<usize> = (0..m).collect();
    let mut fitted = fit_box(samples)?;
    let mut current = robust_lp_over_box(problem, &fitted)?;
    let mut objectives = vec![current.objective];
    let mut removed = Vec::with_capacity(r);
    for _ in 0..r {
        let local = subset(&active);
        let candidates: Vec<usize> = fit_box_support(&local)?.into_iter().map(|p| active[p]).collect();
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let rest: Vec<usize> = active.iter().copied().filter(|&i| i != c).collect();
            let value = robust_objective(problem, &fit_box(&subset(&rest))?)?;
            if best.is_none_or(|(_, b)| value < b - 1e-12) {
                best = Some((c, value));
            }
        }
        let (chosen, _) = best.expect("a nonempty sample set has facet samples");
        active.retain(|&i| i != chosen);
        removed.push(chosen);
        fitted = fit_box(&subset(&active))?;
        let next = robust_lp_over_box(problem, &fitted)?;
        if next.objective > current.objective + 1e-9 {
            return Err(Error::SolverFailure(format!(
                "robust objective rose from {} to {} after a removal",
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
    let mut certificate = Certificate::issue(m, d, kind, target)?;
    certificate.observed_support = Some(fit_box_support(&subset(&active))?.len());
    box_notes(&mut certificate);
    Ok(BoxDiscardOutcome {
        solution: current,
        fitted,
        removed,
        objectives,
        certificate,
    })
}
