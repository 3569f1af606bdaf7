//! Confidence bounds q(m, ε) on the probability that a compressed
//! hypothesis is consistent with all m samples yet has error above ε.
//!
//! Every bound is evaluated in log space. Binomial coefficients come from
//! [`log_choose`], sums of exponentials are accumulated with a max shift, and
//! the result is clamped to `[0, 1]` only at the very end. The `log_*`
//! variants return the unclamped logarithm, which stays meaningful when the
//! bound underflows or exceeds one.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance of [`epsilon_for`].
pub const EPSILON_TOL: f64 = 1e-9;

/// Largest sample size [`sample_size_for`] will search.
pub const SAMPLE_SIZE_CAP: usize = 10_000_000;

/// Which q(m, ε) a certificate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundKind {
    /// `C(m,d) (1-ε)^(m-d)`, valid for any compression scheme of size d.
    Floyd,
    /// `P(Bin(m, ε) ≤ d-1)`, exact when the compression set is unique.
    #[serde(rename = "exact")]
    ExactBinomial,
    /// Floyd-style bound after discarding r samples.
    Discard { r: usize },
    /// Binomial-tail bound after discarding r samples under a unique compression set.
    DiscardUnique { r: usize },
    /// One-sided constrained failure bound for VC dimension d. Advisory only.
    Vc,
}

impl BoundKind {
    /// Number of discarded samples the kind accounts for.
    pub fn discarded(self) -> usize {
        match self {
            BoundKind::Discard { r } | BoundKind::DiscardUnique { r } => r,
            _ => 0,
        }
    }

    /// Smallest admissible sample count for compression size `d` at level `epsilon`.
    pub fn min_samples(self, d: usize, epsilon: f64) -> usize {
        match self {
            BoundKind::Floyd => d.max(1),
            BoundKind::ExactBinomial => d.max(1),
            BoundKind::Discard { r } | BoundKind::DiscardUnique { r } => (d + r).max(1),
            BoundKind::Vc => vc_min_samples(epsilon),
        }
    }

    /// Unclamped natural logarithm of q(m, ε).
    pub fn log_q(self, m: usize, d: usize, epsilon: f64) -> Result<f64> {
        match self {
            BoundKind::Floyd => log_q_floyd(m, d, epsilon),
            BoundKind::ExactBinomial => log_q_exact(m, d, epsilon),
            BoundKind::Discard { r } => log_q_discard(m, d, r, epsilon),
            BoundKind::DiscardUnique { r } => log_q_discard_unique(m, d, r, epsilon),
            BoundKind::Vc => log_q_vc(m, d, epsilon),
        }
    }

    /// q(m, ε) clamped to `[0, 1]`.
    pub fn q(self, m: usize, d: usize, epsilon: f64) -> Result<f64> {
        Ok(clamp_exp(self.log_q(m, d, epsilon)?))
    }

    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Floyd => "floyd",
            BoundKind::ExactBinomial => "exact",
            BoundKind::Discard { .. } => "discard",
            BoundKind::DiscardUnique { .. } => "discard_unique",
            BoundKind::Vc => "vc",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Discard { r } | BoundKind::DiscardUnique { r } => {
                write!(f, "{}(r={})", self.label(), r)
            }
            _ => f.write_str(self.label()),
        }
    }
}

/// A fully specified certificate query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateQuery {
    pub m: usize,
    pub d: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub kind: BoundKind,
}

impl CertificateQuery {
    /// Checks the sample-count floor of the kind and the ranges of ε and β.
    pub fn validate(&self) -> Result<()> {
        check_unit_open("epsilon", self.epsilon)?;
        check_unit_open("beta", self.beta)?;
        let floor = self.kind.min_samples(self.d, self.epsilon);
        if self.m < floor {
            return Err(Error::Domain(format!(
                "m = {} is below the floor {} for kind {}",
                self.m, floor, self.kind
            )));
        }
        Ok(())
    }

    /// Whether q(m, ε) ≤ β holds for this query.
    pub fn holds(&self) -> Result<bool> {
        self.validate()?;
        Ok(self.kind.q(self.m, self.d, self.epsilon)? <= self.beta)
    }
}

fn check_unit_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {value} must lie in (0,1)")))
    }
}

fn clamp_exp(log_value: f64) -> f64 {
    if log_value >= 0.0 {
        1.0
    } else {
        log_value.exp()
    }
}

/// `ln(n!) - (ln sqrt(2πn) + n ln n - n)` for n > 30, by its asymptotic series.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = n * n;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Natural logarithm of the binomial coefficient C(m, i).
pub fn log_choose(m: u64, i: u64) -> Result<f64> {
    if i > m {
        return Err(Error::Domain(format!("log_choose({m}, {i}): i exceeds m")));
    }
    let k = i.min(m - i);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= 30 {
        let base = (m - k) as f64;
        return Ok((1..=k).map(|j| ((base + j as f64) / j as f64).ln()).sum());
    }
    let n = m as f64;
    let k = k as f64;
    let rest = n - k;
    Ok(stirling_error(n) - stirling_error(k) - stirling_error(rest)
        + k * (n / k).ln()
        + rest * (k / rest).ln_1p()
        + 0.5 * (n / (2.0 * PI * k * rest)).ln())
}

fn choose(m: usize, i: usize) -> f64 {
    // Only called with i ≤ m.
    log_choose(m as u64, i as u64).expect("i <= m")
}

/// Max-shifted `ln Σ exp(terms)`.
fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_{i=0}^{upper} C(n,i) ε^i (1-ε)^(n-i)`, the log of P(Bin(n, ε) ≤ upper).
fn log_binomial_lower_tail(n: usize, upper: usize, epsilon: f64) -> f64 {
    let ln_eps = epsilon.ln();
    let ln_comp = (-epsilon).ln_1p();
    let upper = upper.min(n);
    log_sum_exp((0..=upper).map(|i| choose(n, i) + i as f64 * ln_eps + (n - i) as f64 * ln_comp))
}

pub fn log_q_floyd(m: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    if m < d {
        return Err(Error::Domain(format!("q_floyd requires m >= d (m={m}, d={d})")));
    }
    Ok(choose(m, d) + (m - d) as f64 * (-epsilon).ln_1p())
}

/// `min(1, C(m,d) (1-ε)^(m-d))`.
pub fn q_floyd(m: usize, d: usize, epsilon: f64) -> Result<f64> {
    log_q_floyd(m, d, epsilon).map(clamp_exp)
}

pub fn log_q_exact(m: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    if d == 0 || m < d {
        return Err(Error::Domain(format!("q_exact requires m >= d >= 1 (m={m}, d={d})")));
    }
    Ok(log_binomial_lower_tail(m, d - 1, epsilon))
}

/// `Σ_{i=0}^{d-1} C(m,i) ε^i (1-ε)^(m-i)`.
pub fn q_exact(m: usize, d: usize, epsilon: f64) -> Result<f64> {
    log_q_exact(m, d, epsilon).map(clamp_exp)
}

pub fn log_q_discard(m: usize, d: usize, r: usize, epsilon: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    if m < d + r {
        return Err(Error::Domain(format!(
            "q_discard requires m >= d + r (m={m}, d={d}, r={r})"
        )));
    }
    Ok(choose(m, d) + log_binomial_lower_tail(m - d, r, epsilon))
}

/// `min(1, C(m,d) Σ_{i=0}^{r} C(m-d,i) ε^i (1-ε)^(m-d-i))`.
pub fn q_discard(m: usize, d: usize, r: usize, epsilon: f64) -> Result<f64> {
    log_q_discard(m, d, r, epsilon).map(clamp_exp)
}

pub fn log_q_discard_unique(m: usize, d: usize, r: usize, epsilon: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    if d == 0 || m < d + r {
        return Err(Error::Domain(format!(
            "q_discard_unique requires d >= 1 and m >= d + r (m={m}, d={d}, r={r})"
        )));
    }
    Ok(choose(r + d - 1, r) + log_binomial_lower_tail(m, r + d - 1, epsilon))
}

/// `min(1, C(r+d-1, r) Σ_{i=0}^{r+d-1} C(m,i) ε^i (1-ε)^(m-i))`.
pub fn q_discard_unique(m: usize, d: usize, r: usize, epsilon: f64) -> Result<f64> {
    log_q_discard_unique(m, d, r, epsilon).map(clamp_exp)
}

fn vc_min_samples(epsilon: f64) -> usize {
    // Guard against 8/ε landing a hair above an integer.
    ((8.0 / epsilon) - 1e-9).ceil().max(1.0) as usize
}

pub fn log_q_vc(m: usize, d_vc: usize, epsilon: f64) -> Result<f64> {
    check_unit_open("epsilon", epsilon)?;
    let floor = vc_min_samples(epsilon);
    if m < floor {
        return Err(Error::Domain(format!(
            "q_vc requires m >= 8/epsilon = {floor} (m={m})"
        )));
    }
    let sum = log_sum_exp((0..=d_vc.min(2 * m)).map(|i| choose(2 * m, i)));
    Ok(LN_2 + sum - epsilon * m as f64 / 2.0 * LN_2)
}

/// `min(1, 2 Σ_{i=0}^{d_vc} C(2m,i) 2^(-εm/2))`.
pub fn q_vc(m: usize, d_vc: usize, epsilon: f64) -> Result<f64> {
    log_q_vc(m, d_vc, epsilon).map(clamp_exp)
}

/// Smallest ε (to [`EPSILON_TOL`]) with q(m, ε) ≤ β.
pub fn epsilon_for(m: usize, d: usize, beta: f64, kind: BoundKind) -> Result<f64> {
    check_unit_open("beta", beta)?;
    let q = |eps: f64| kind.q(m, d, eps);
    let top = 1.0 - 1e-12;
    if q(top)? > beta {
        return Err(Error::InfeasibleQuery(format!(
            "q(m={m}, d={d}, eps->1) exceeds beta={beta} for kind {kind}"
        )));
    }
    let mut lo = match kind {
        BoundKind::Vc => {
            let lo = 8.0 / m as f64;
            if lo >= top {
                return Err(Error::InfeasibleQuery(format!(
                    "m={m} too small for the VC bound at any epsilon"
                )));
            }
            if q(lo)? <= beta {
                return Ok(lo);
            }
            lo
        }
        _ => 0.0,
    };
    let mut hi = top;
    let mut q_lo = 1.0;
    let mut q_hi = q(hi)?;
    while hi - lo > EPSILON_TOL / 4.0 {
        let mid = 0.5 * (lo + hi);
        let q_mid = q(mid)?;
        if q_mid > q_lo || q_mid < q_hi {
            return Err(Error::SolverFailure(format!(
                "q not monotone in epsilon on [{lo}, {hi}] for kind {kind}"
            )));
        }
        if q_mid <= beta {
            hi = mid;
            q_hi = q_mid;
        } else {
            lo = mid;
            q_lo = q_mid;
        }
    }
    Ok(hi)
}

/// Smallest m with q(m, ε) ≤ β.
///
/// q is unimodal in m for fixed (d, ε): it may rise above its value at the
/// floor before decaying, but never dips below β during the rise because the
/// floor value already exceeds β whenever the search continues. Doubling
/// therefore brackets the first crossing and bisection on the bracket is
/// exact.
pub fn sample_size_for(d: usize, epsilon: f64, beta: f64, kind: BoundKind) -> Result<usize> {
    check_unit_open("epsilon", epsilon)?;
    check_unit_open("beta", beta)?;
    let q = |m: usize| kind.q(m, d, epsilon);
    let floor = kind.min_samples(d, epsilon);
    let q_floor = q(floor)?;
    if q_floor <= beta {
        return Ok(floor);
    }
    let mut lo = floor;
    let mut hi = floor;
    let q_hi = loop {
        hi = (hi * 2).max(hi + 1);
        if hi > SAMPLE_SIZE_CAP {
            return Err(Error::SampleSizeOverflow {
                cap: SAMPLE_SIZE_CAP,
            });
        }
        let value = q(hi)?;
        if value <= beta {
            break value;
        }
        lo = hi;
    };
    if q_hi >= q(lo)? {
        return Err(Error::SolverFailure(format!(
            "q does not decrease across the bracket [{lo}, {hi}]"
        )));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if q(mid)? <= beta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn log_choose_small_values() {
        assert_eq!(log_choose(5, 0).unwrap(), 0.0);
        assert!((log_choose(4, 2).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!((log_choose(4, 2).unwrap() - 1.791759).abs() < 1e-6);
        assert!(log_choose(3, 4).is_err());
    }

    #[test]
    fn log_choose_is_symmetric_across_branches() {
        for &(m, i) in &[(100u64, 31u64), (1000, 500), (1_000_000, 12), (1_000_000, 999_969)] {
            let a = log_choose(m, i).unwrap();
            let b = log_choose(m, m - i).unwrap();
            assert!(close(a, b, 1e-14), "{m} {i}");
        }
        // Across the summation/Stirling switch, Pascal's rule in log space.
        let lhs = log_choose(61, 31).unwrap();
        let rhs = log_sum_exp([log_choose(60, 30).unwrap(), log_choose(60, 31).unwrap()]);
        assert!(close(lhs, rhs, 1e-14));
    }

    #[test]
    fn floyd_examples() {
        for eps in [0.01, 0.3, 0.9] {
            assert_eq!(q_floyd(4, 4, eps).unwrap(), 1.0);
        }
        assert_eq!(q_floyd(20, 1, 0.1).unwrap(), 1.0);
        let expected = 200.0 * 0.9f64.powi(199);
        assert!(close(q_floyd(200, 1, 0.1).unwrap(), expected, 1e-12));
        assert!(close(expected, 1.5678e-7, 1e-4));
        assert!(q_floyd(10, 1, 0.0).is_err());
        assert!(q_floyd(10, 1, 1.0).is_err());
        assert!(q_floyd(1, 2, 0.5).is_err());
    }

    #[test]
    fn exact_examples() {
        for m in [1, 7, 50] {
            assert!(close(q_exact(m, 1, 0.2).unwrap(), 0.8f64.powi(m as i32), 1e-13));
        }
        assert!((q_exact(20, 1, 0.1).unwrap() - 0.12157665459056928).abs() < 1e-12);
        let expected = 0.85f64.powi(20) + 20.0 * 0.15 * 0.85f64.powi(19);
        assert!((q_exact(20, 2, 0.15).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.17556).abs() < 1e-5);
        assert!(q_exact(5, 0, 0.5).is_err());
    }

    #[test]
    fn discard_examples() {
        let expected = (30.0 * (0.7f64.powi(29) + 29.0 * 0.3 * 0.7f64.powi(28))).min(1.0);
        assert!(close(q_discard(30, 1, 1, 0.3).unwrap(), expected, 1e-12));
        let expected = 0.75f64.powi(20) + 20.0 * 0.25 * 0.75f64.powi(19);
        assert!(close(q_discard_unique(20, 1, 1, 0.25).unwrap(), expected, 1e-12));
        assert!(q_discard(4, 2, 3, 0.2).is_err());
        assert!(q_discard_unique(4, 2, 3, 0.2).is_err());
    }

    #[test]
    fn vc_examples() {
        assert!((q_vc(80, 0, 0.1).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(q_vc(80, 2, 0.1).unwrap(), 1.0);
        let err = q_vc(79, 0, 0.1).unwrap_err();
        assert!(err.to_string().contains("80"), "{err}");
    }

    #[test]
    fn epsilon_for_examples() {
        let eps = epsilon_for(100, 1, 0.01, BoundKind::ExactBinomial).unwrap();
        let closed = 1.0 - 0.01f64.powf(0.01);
        assert!((eps - closed).abs() < 1e-9);
        assert!((eps - 0.045007).abs() < 1e-6);
        assert!(matches!(
            epsilon_for(3, 3, 0.5, BoundKind::Floyd),
            Err(Error::InfeasibleQuery(_))
        ));
        let beta = q_exact(20, 2, 0.15).unwrap();
        let eps = epsilon_for(20, 2, beta, BoundKind::ExactBinomial).unwrap();
        assert!((eps - 0.15).abs() < 1e-8);
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(sample_size_for(1, 0.1, 0.01, BoundKind::ExactBinomial).unwrap(), 44);
        let scan = (1..)
            .find(|&m| q_floyd(m, 1, 0.1).unwrap() <= 0.01)
            .unwrap();
        assert_eq!(sample_size_for(1, 0.1, 0.01, BoundKind::Floyd).unwrap(), scan);
        assert!(matches!(
            sample_size_for(5, 1e-7, 1e-9, BoundKind::Floyd),
            Err(Error::SampleSizeOverflow { .. })
        ));
    }

    #[test]
    fn query_validation() {
        let q = CertificateQuery {
            m: 44,
            d: 1,
            epsilon: 0.1,
            beta: 0.01,
            kind: BoundKind::ExactBinomial,
        };
        assert!(q.holds().unwrap());
        let short = CertificateQuery {
            m: 3,
            kind: BoundKind::Discard { r: 3 },
            ..q
        };
        assert!(short.validate().is_err());
    }
}
