//! Registered one-dimensional problems whose violation probability has a
//! closed form. They anchor every statistical check in [`crate::validate`].

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cascade::{CoupledConstraint, SecondStageSpec};
use crate::error::{Error, Result};
use crate::sampling::DistributionSpec;
use crate::scenario::{ScenarioProblem, UncertainAffineConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalForm {
    /// `min x  s.t.  x ≥ δ`. Violation set `{δ > x}`.
    LowerMax,
    /// `min w  s.t.  |δ − c| ≤ w` over `(c, w)`. Violation set `{δ ∉ [c−w, c+w]}`.
    Interval,
    /// Stage one is `LowerMax`; stage two is `min y  s.t.  y ≥ x/2 − δ`.
    /// Joint violation set `{δ > x} ∪ {δ < x/2 − y}`.
    Cascade,
}

impl CanonicalForm {
    pub const ALL: [CanonicalForm; 3] = [
        CanonicalForm::LowerMax,
        CanonicalForm::Interval,
        CanonicalForm::Cascade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalForm::LowerMax => "lower_max",
            CanonicalForm::Interval => "interval",
            CanonicalForm::Cascade => "cascade",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Domain(format!("unregistered canonical form '{name}'")))
    }

    /// The (first-stage) scenario problem.
    pub fn problem(self) -> ScenarioProblem {
        match self {
            CanonicalForm::LowerMax | CanonicalForm::Cascade => ScenarioProblem::new(
                vec![1.0],
                1,
                vec![UncertainAffineConstraint {
                    f0: vec![-1.0],
                    f: vec![vec![0.0]],
                    h0: 0.0,
                    h: vec![1.0],
                }],
            ),
            CanonicalForm::Interval => ScenarioProblem::new(
                vec![0.0, 1.0],
                1,
                vec![
                    UncertainAffineConstraint {
                        f0: vec![-1.0, -1.0],
                        f: vec![vec![0.0], vec![0.0]],
                        h0: 0.0,
                        h: vec![1.0],
                    },
                    UncertainAffineConstraint {
                        f0: vec![1.0, -1.0],
                        f: vec![vec![0.0], vec![0.0]],
                        h0: 0.0,
                        h: vec![-1.0],
                    },
                ],
            ),
        }
    }

    pub fn second_stage(self) -> Option<SecondStageSpec> {
        match self {
            CanonicalForm::Cascade => Some(SecondStageSpec::new(
                vec![1.0],
                vec![CoupledConstraint {
                    a0: vec![-1.0],
                    a: vec![vec![0.0]],
                    q_mat: vec![vec![0.0]],
                    q: vec![0.5],
                    s: vec![-1.0],
                    t: 0.0,
                }],
            )),
            _ => None,
        }
    }

    /// The compression size the form is fully supported with.
    pub fn compression_size(self) -> usize {
        match self {
            CanonicalForm::LowerMax => 1,
            CanonicalForm::Interval | CanonicalForm::Cascade => 2,
        }
    }

    /// Whether `problem` (and `second_stage`) are exactly this form.
    pub fn matches(self, problem: &ScenarioProblem, second_stage: Option<&SecondStageSpec>) -> bool {
        *problem == self.problem() && second_stage == self.second_stage().as_ref()
    }

    /// The interval of δ values the decision accepts, `[lo, hi]`.
    fn accepted(self, solution: &[f64]) -> Result<(f64, f64)> {
        let want = match self {
            CanonicalForm::LowerMax => 1,
            CanonicalForm::Interval | CanonicalForm::Cascade => 2,
        };
        if solution.len() != want {
            return Err(Error::Dimension(format!(
                "{} expects a decision of length {want}, got {}",
                self.name(),
                solution.len()
            )));
        }
        Ok(match self {
            CanonicalForm::LowerMax => (f64::NEG_INFINITY, solution[0]),
            CanonicalForm::Interval => (solution[0] - solution[1], solution[0] + solution[1]),
            CanonicalForm::Cascade => (0.5 * solution[0] - solution[1], solution[0]),
        })
    }
}

/// `P(δ ≤ t)` and `P(δ < t)` of a one-dimensional distribution.
fn cdf_pair(dist: &DistributionSpec, t: f64) -> Result<(f64, f64)> {
    dist.validate()?;
    if dist.dim() != 1 {
        return Err(Error::Dimension(format!(
            "closed-form violation needs a one-dimensional distribution, got {}",
            dist.dim()
        )));
    }
    Ok(match dist {
        DistributionSpec::UniformBox { lower, upper } => {
            let p = ((t - lower[0]) / (upper[0] - lower[0])).clamp(0.0, 1.0);
            (p, p)
        }
        DistributionSpec::GaussianDiag { mean, stddev } => {
            let p = if t == f64::NEG_INFINITY {
                0.0
            } else {
                Normal::new(mean[0], stddev[0]).expect("validated").cdf(t)
            };
            (p, p)
        }
        DistributionSpec::Empirical { table } => {
            let n = table.len() as f64;
            let le = table.iter().filter(|r| r[0] <= t).count() as f64;
            let lt = table.iter().filter(|r| r[0] < t).count() as f64;
            (le / n, lt / n)
        }
    })
}

/// Exact `P(g(x, δ) > 0)` for a registered form. For the cascade form the
/// decision is `[x, y]` and the event is the joint violation.
pub fn violation_probability_exact_1d(
    form: CanonicalForm,
    solution: &[f64],
    dist: &DistributionSpec,
) -> Result<f64> {
    let (lo, hi) = form.accepted(solution)?;
    if lo > hi {
        return Ok(1.0);
    }
    let (below_hi, _) = cdf_pair(dist, hi)?;
    let (_, below_lo) = cdf_pair(dist, lo)?;
    Ok((1.0 - (below_hi - below_lo).max(0.0)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_max_violation() {
        let u = DistributionSpec::uniform_unit(1);
        let v = violation_probability_exact_1d(CanonicalForm::LowerMax, &[0.9], &u).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        assert_eq!(violation_probability_exact_1d(CanonicalForm::LowerMax, &[1.2], &u).unwrap(), 0.0);
    }

    #[test]
    fn interval_violation() {
        let u = DistributionSpec::uniform_unit(1);
        // [0.2, 0.7] as center 0.45, half-width 0.25.
        let v = violation_probability_exact_1d(CanonicalForm::Interval, &[0.45, 0.25], &u).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(violation_probability_exact_1d(CanonicalForm::Interval, &[0.5, -0.1], &u).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_and_empirical() {
        let g = DistributionSpec::GaussianDiag { mean: vec![0.0], stddev: vec![1.0] };
        let v = violation_probability_exact_1d(CanonicalForm::LowerMax, &[0.0], &g).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let e = DistributionSpec::Empirical { table: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]] };
        let v = violation_probability_exact_1d(CanonicalForm::Interval, &[1.5, 0.5], &e).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unregistered_or_mismatched() {
        assert!(CanonicalForm::from_name("ellipsoid").is_err());
        let u = DistributionSpec::uniform_unit(2);
        assert!(violation_probability_exact_1d(CanonicalForm::LowerMax, &[0.5], &u).is_err());
        assert!(violation_probability_exact_1d(CanonicalForm::Interval, &[0.5], &DistributionSpec::uniform_unit(1)).is_err());
    }

    #[test]
    fn forms_match_themselves() {
        for form in CanonicalForm::ALL {
            assert!(form.matches(&form.problem(), form.second_stage().as_ref()));
            assert_eq!(CanonicalForm::from_name(form.name()).unwrap(), form);
        }
        assert!(!CanonicalForm::LowerMax.matches(&CanonicalForm::Interval.problem(), None));
    }
}
