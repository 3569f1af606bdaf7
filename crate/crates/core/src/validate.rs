//! Monte Carlo replay of certificates.
//!
//! A trial draws `m` scenarios from its own stream, runs one design method
//! and measures the violation probability of the resulting decision, either
//! in closed form (registered canonical forms) or from fresh samples. The
//! frequency of `{V > ε}` over the trials is compared to the bound, or to
//! the exact law when one holds, with a three-standard-error band.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::{q_discard, BoundKind};
use crate::canonical::{violation_probability_exact_1d, CanonicalForm};
use crate::cascade::{self, joint_violation, SecondStageSpec, Stage};
use crate::error::{Error, Result};
use crate::lp::{self, FEAS_TOL};
use crate::robust_box::{discard_box, solve_box_design};
use crate::sampling::{derive, draw, DistributionSpec, GENERATOR};
use crate::scenario::{certify, discard, solve_scenario, CertTarget, ScenarioProblem};

/// Environment variable capping the worker count of parallel trials.
pub const THREADS_ENV: &str = "SCENARIO_CERT_THREADS";

/// Width of the acceptance band in binomial standard errors.
pub const SIGMA_BAND: f64 = 3.0;

/// Two-sided 1% critical value of the Kolmogorov distribution.
const KS_CRIT_1PCT: f64 = 1.6276;

/// Below this many trials the asymptotic KS critical value is unreliable.
const KS_MIN_TRIALS: usize = 35;

const PARTITION_MAX_M: usize = 12;
const PARTITION_MAX_D: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Fraction of fresh draws flagged by an evaluator, with an exact binomial
/// (Clopper–Pearson) interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_fresh: usize,
    pub level: f64,
}

impl ViolationEstimate {
    pub fn straddles(&self, epsilon: f64) -> bool {
        self.ci_low <= epsilon && epsilon <= self.ci_high
    }
}

/// Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, level: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Domain(format!("need 0 <= k <= n and n > 0 (k = {k}, n = {n})")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let tail = (1.0 - level) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let beta = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::Domain(e.to_string()));
    let lo = if k == 0 { 0.0 } else { beta(kf, nf - kf + 1.0)?.inverse_cdf(tail) };
    let hi = if k == n { 1.0 } else { beta(kf + 1.0, nf - kf)?.inverse_cdf(1.0 - tail) };
    Ok((lo.min(kf / nf), hi.max(kf / nf)))
}

/// Estimates `P{evaluator(δ)}` from `n_fresh` draws of `dist`.
pub fn estimate_violation<F>(
    evaluator: F,
    dist: &DistributionSpec,
    n_fresh: usize,
    seed: u64,
    level: f64,
) -> Result<ViolationEstimate>
where
    F: Fn(&[f64]) -> bool,
{
    if n_fresh == 0 {
        return Err(Error::Domain("n_fresh must be positive".into()));
    }
    let hits = draw(dist, n_fresh, seed)?.iter().filter(|d| evaluator(d)).count();
    let (ci_low, ci_high) = clopper_pearson(hits, n_fresh, level)?;
    Ok(ViolationEstimate {
        point: hits as f64 / n_fresh as f64,
        ci_low,
        ci_high,
        n_fresh,
        level,
    })
}

/// The design replayed in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Method {
    /// Plain scenario program; `kind` is floyd or exact.
    Scenario { kind: BoundKind },
    Discard { r: usize },
    /// Box design; `kind` is exact or floyd.
    Box { kind: BoundKind },
    BoxDiscard { r: usize },
    Cascade,
    CascadeDiscard {
        r: usize,
        #[serde(default)]
        stage: Stage,
    },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Scenario { kind } => format!("scenario/{kind}"),
            Method::Discard { r } => format!("discard(r={r})"),
            Method::Box { kind } => format!("box/{kind}"),
            Method::BoxDiscard { r } => format!("box_discard(r={r})"),
            Method::Cascade => "cascade".into(),
            Method::CascadeDiscard { r, .. } => format!("cascade_discard(r={r})"),
        }
    }
}

fn default_n_fresh() -> usize {
    100_000
}

fn default_ci_level() -> f64 {
    0.99
}

/// Everything a replay depends on. Reports are a pure function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ScenarioProblem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage: Option<SecondStageSpec>,
    /// When set, the problem must be exactly this form and violations are
    /// computed in closed form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_tag: Option<CanonicalForm>,
    pub distribution: DistributionSpec,
    pub m: usize,
    pub epsilon: f64,
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_n_fresh")]
    pub n_fresh: usize,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

impl ExperimentConfig {
    /// A registered form under `Uniform[0, 1]`.
    pub fn canonical(form: CanonicalForm, m: usize, epsilon: f64, method: Method, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            problem: form.problem(),
            second_stage: form.second_stage(),
            canonical_tag: Some(form),
            distribution: DistributionSpec::uniform_unit(1),
            m,
            epsilon,
            method,
            trials,
            seed,
            n_fresh: default_n_fresh(),
            ci_level: default_ci_level(),
        }
    }

    fn is_cascade(&self) -> bool {
        matches!(self.method, Method::Cascade | Method::CascadeDiscard { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("an experiment needs at least one trial".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if self.n_fresh == 0 {
            return Err(Error::Domain("n_fresh must be positive".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Domain(format!("ci_level {} outside (0, 1)", self.ci_level)));
        }
        self.problem.validate()?;
        self.distribution.validate()?;
        if self.distribution.dim() != self.problem.n_delta {
            return Err(Error::Dimension(format!(
                "distribution has dimension {}, problem has n_delta = {}",
                self.distribution.dim(),
                self.problem.n_delta
            )));
        }
        match (&self.second_stage, self.is_cascade()) {
            (Some(p2), true) => p2.validate(&self.problem)?,
            (None, true) => {
                return Err(Error::Domain(format!(
                    "method {} needs a second stage",
                    self.method.label()
                )))
            }
            _ => {}
        }
        if let Some(form) = self.canonical_tag {
            let stage_matches = !self.is_cascade() || self.second_stage == form.second_stage();
            if form.problem() != self.problem || !stage_matches {
                return Err(Error::Domain(format!(
                    "problem does not match the registered form '{}'",
                    form.name()
                )));
            }
            if self.is_cascade() != (form == CanonicalForm::Cascade) {
                return Err(Error::Domain(format!(
                    "method {} does not apply to the form '{}'",
                    self.method.label(),
                    form.name()
                )));
            }
        }
        Ok(())
    }

    fn d(&self) -> usize {
        match self.method {
            Method::Scenario { .. } | Method::Discard { .. } => self.problem.n_x,
            Method::Box { .. } | Method::BoxDiscard { .. } => 2 * self.problem.n_delta,
            Method::Cascade | Method::CascadeDiscard { .. } => {
                self.problem.n_x + self.second_stage.as_ref().map_or(0, |p| p.n_y)
            }
        }
    }

    /// q(m, ε) of the certificate the method issues.
    pub fn bound_value(&self) -> Result<f64> {
        let (m, d, eps) = (self.m, self.d(), self.epsilon);
        match self.method {
            Method::Scenario { kind } | Method::Box { kind } => kind.q(m, d, eps),
            Method::Discard { r } | Method::BoxDiscard { r } | Method::CascadeDiscard { r, .. } => {
                q_discard(m, d, r, eps)
            }
            Method::Cascade => BoundKind::Floyd.q(m, d, eps),
        }
    }

    /// The exact law of `{V > ε}` where one holds: fully supported
    /// canonical scenario programs and the canonical box-exit event.
    pub fn exact_law_value(&self) -> Result<Option<f64>> {
        let Some(form) = self.canonical_tag else {
            return Ok(None);
        };
        if !matches!(self.distribution, DistributionSpec::UniformBox { .. } | DistributionSpec::GaussianDiag { .. }) {
            return Ok(None);
        }
        let law = |d: usize| BoundKind::ExactBinomial.q(self.m, d, self.epsilon).map(Some);
        match (self.method, form) {
            (Method::Scenario { .. }, CanonicalForm::LowerMax | CanonicalForm::Interval) => {
                law(form.compression_size())
            }
            (Method::Box { .. }, CanonicalForm::Interval) => law(2 * self.problem.n_delta),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: usize,
    pub m: usize,
    pub epsilon: f64,
    pub method: Method,
    /// Trials that produced a decision and a certificate.
    pub completed_trials: usize,
    /// Fraction of completed trials with violation probability above ε.
    pub empirical_freq: f64,
    pub bound_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_law_value: Option<f64>,
    /// Half-width of the acceptance band.
    pub band: f64,
    /// Trials whose Monte Carlo interval contained ε.
    pub straddling_trials: usize,
    pub verdict: Verdict,
    pub caveats: Vec<String>,
    pub generator: String,
}

/// Decision produced by one trial.
enum Decision {
    Single(Vec<f64>),
    Pair(Vec<f64>, Vec<f64>),
}

fn run_method(cfg: &ExperimentConfig, samples: &[Vec<f64>]) -> Result<Decision> {
    let target = CertTarget::Epsilon(cfg.epsilon);
    let p = &cfg.problem;
    Ok(match cfg.method {
        Method::Scenario { kind } => {
            let (sol, record) = solve_scenario(p, samples)?;
            certify(&record, target, kind, false)?;
            Decision::Single(sol.x)
        }
        Method::Discard { r } => {
            let out = discard(p, samples, r)?;
            certify(&out.record, target, BoundKind::Discard { r }, false)?;
            Decision::Single(out.solution.x)
        }
        Method::Box { kind } => Decision::Single(solve_box_design(p, samples, target, kind)?.solution.x),
        Method::BoxDiscard { r } => {
            let kind = if r == 0 { BoundKind::ExactBinomial } else { BoundKind::Discard { r } };
            Decision::Single(discard_box(p, samples, r, target, kind)?.solution.x)
        }
        Method::Cascade => {
            let p2 = cfg.second_stage.as_ref().expect("validated");
            let res = cascade::solve_cascade(p, p2, samples, target, BoundKind::Floyd)?;
            Decision::Pair(res.x, res.y)
        }
        Method::CascadeDiscard { r, stage } => {
            let p2 = cfg.second_stage.as_ref().expect("validated");
            let res = cascade::discard_cascade(p, p2, samples, r, stage, target)?;
            Decision::Pair(res.x, res.y)
        }
    })
}

struct TrialOutcome {
    exceeded: bool,
    straddles: bool,
}

fn run_trial(cfg: &ExperimentConfig, k: usize) -> Result<TrialOutcome> {
    let trial_seed = derive(cfg.seed, k as u64);
    let samples = draw(&cfg.distribution, cfg.m, trial_seed)?;
    let decision = run_method(cfg, &samples)?;
    if let (Some(form), 1) = (cfg.canonical_tag, cfg.distribution.dim()) {
        let flat = match &decision {
            Decision::Single(x) => x.clone(),
            Decision::Pair(x, y) => x.iter().chain(y).copied().collect(),
        };
        let v = violation_probability_exact_1d(form, &flat, &cfg.distribution)?;
        return Ok(TrialOutcome {
            exceeded: v > cfg.epsilon,
            straddles: false,
        });
    }
    let fresh_seed = derive(trial_seed, 0);
    let est = match &decision {
        Decision::Single(x) => estimate_violation(
            |d| cfg.problem.g(x, d) > 0.0,
            &cfg.distribution,
            cfg.n_fresh,
            fresh_seed,
            cfg.ci_level,
        )?,
        Decision::Pair(x, y) => {
            let p2 = cfg.second_stage.as_ref().expect("validated");
            estimate_violation(
                |d| joint_violation(x, y, &cfg.problem, p2, d),
                &cfg.distribution,
                cfg.n_fresh,
                fresh_seed,
                cfg.ci_level,
            )?
        }
    };
    Ok(TrialOutcome {
        exceeded: est.point > cfg.epsilon,
        straddles: est.straddles(cfg.epsilon),
    })
}

/// Runs `f` on a pool capped by [`THREADS_ENV`] when it is set.
pub fn with_worker_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn band(p: f64, n: usize) -> f64 {
    SIGMA_BAND * (p * (1.0 - p) / n as f64).sqrt()
}

/// Replays the configured method over `trials` independent multisamples.
/// Trials are independent streams merged by index, so the report does not
/// depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let bound_value = cfg.bound_value()?;
    let exact_law_value = cfg.exact_law_value()?;
    let outcomes: Vec<Result<TrialOutcome>> =
        with_worker_pool(|| (0..cfg.trials).into_par_iter().map(|k| run_trial(cfg, k)).collect());

    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let (mut completed, mut exceeded, mut straddling) = (0usize, 0usize, 0usize);
    for outcome in outcomes {
        match outcome {
            Ok(t) => {
                completed += 1;
                exceeded += usize::from(t.exceeded);
                straddling += usize::from(t.straddles);
            }
            Err(e @ (Error::Domain(_) | Error::Dimension(_) | Error::CertificateRefused(_))) => {
                return Err(e)
            }
            Err(e) => *failures.entry(error_class(&e)).or_default() += 1,
        }
    }

    let mut caveats: Vec<String> = failures
        .iter()
        .map(|(class, n)| format!("{n} of {} trials excluded: {class}", cfg.trials))
        .collect();
    if failures.contains_key(FEASIBILITY_CLASS) {
        caveats.push(
            "frequencies are conditional on the multisamples for which the second stage is feasible".into(),
        );
    }
    if bound_value >= 1.0 {
        caveats.push("the bound is vacuous at this (m, epsilon); the comparison is trivial".into());
    }

    let empirical_freq = if completed == 0 { f64::NAN } else { exceeded as f64 / completed as f64 };
    let (band, verdict) = if completed == 0 {
        caveats.push("no trial completed".into());
        (f64::NAN, Verdict::Inconclusive)
    } else {
        let (band, pass) = match exact_law_value {
            Some(p) => {
                let b = band(p, completed);
                (b, (empirical_freq - p).abs() <= b)
            }
            None => {
                let b = band(bound_value.min(1.0), completed);
                (b, empirical_freq <= bound_value + b)
            }
        };
        let straddle_limit = completed as f64 * 0.01;
        if straddling as f64 > straddle_limit {
            caveats.push(format!(
                "{straddling} of {completed} Monte Carlo intervals contain epsilon"
            ));
            (band, Verdict::Inconclusive)
        } else if pass {
            (band, Verdict::Pass)
        } else {
            (band, Verdict::Fail)
        }
    };

    Ok(ExperimentReport {
        trials: cfg.trials,
        m: cfg.m,
        epsilon: cfg.epsilon,
        method: cfg.method,
        completed_trials: completed,
        empirical_freq,
        bound_value,
        exact_law_value,
        band,
        straddling_trials: straddling,
        verdict,
        caveats,
        generator: GENERATOR.into(),
    })
}

const FEASIBILITY_CLASS: &str = "second stage infeasible on the shared samples";

fn error_class(e: &Error) -> String {
    match e {
        Error::FeasibilitySetF => FEASIBILITY_CLASS.into(),
        Error::DegenerateRemoval { .. } => "a removed sample is not violated by the final decision".into(),
        Error::DegenerateProblem(_) => "degenerate problem (compression check failed)".into(),
        Error::PartialRemoval { .. } => "fewer acceptable removals than requested".into(),
        other => other.to_string(),
    }
}

/// Kolmogorov–Smirnov comparison of violations against `F(α) = α^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub form: CanonicalForm,
    pub d: usize,
    pub trials: usize,
    pub statistic: f64,
    /// 1% critical value, `1.6276 / √T`.
    pub critical_value: f64,
    pub verdict: Verdict,
    pub caveats: Vec<String>,
}

fn require_unique_compression(form: CanonicalForm) -> Result<()> {
    if form == CanonicalForm::Cascade {
        return Err(Error::Domain(
            "the cascade form has no unique compression set; use lower_max or interval".into(),
        ));
    }
    Ok(())
}

/// One-sample KS statistic of `values` against the continuous CDF `cdf`.
pub fn ks_statistic(values: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Builds the hypothesis from `d` uniform samples alone, `T` times, and
/// tests the law of its violation probability against `α^d`.
pub fn error_distribution_check(form: CanonicalForm, d: usize, trials: usize, seed: u64) -> Result<KsReport> {
    require_unique_compression(form)?;
    if d != form.compression_size() {
        return Err(Error::Domain(format!(
            "form '{}' has compression size {}, not {d}",
            form.name(),
            form.compression_size()
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let dist = DistributionSpec::uniform_unit(1);
    let problem = form.problem();
    let violations: Vec<Result<f64>> = with_worker_pool(|| {
        (0..trials)
            .into_par_iter()
            .map(|k| {
                let samples = draw(&dist, d, derive(seed, k as u64))?;
                let (sol, _) = solve_scenario(&problem, &samples)?;
                violation_probability_exact_1d(form, &sol.x, &dist)
            })
            .collect()
    });
    let mut violations = violations.into_iter().collect::<Result<Vec<f64>>>()?;
    let statistic = ks_statistic(&mut violations, |a| a.clamp(0.0, 1.0).powi(d as i32));
    let critical_value = KS_CRIT_1PCT / (trials as f64).sqrt();
    let mut caveats = Vec::new();
    let verdict = if trials < KS_MIN_TRIALS {
        caveats.push(format!(
            "{trials} trials are too few for the asymptotic KS critical value"
        ));
        Verdict::Inconclusive
    } else if statistic < critical_value {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(KsReport {
        form,
        d,
        trials,
        statistic,
        critical_value,
        verdict,
        caveats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub form: CanonicalForm,
    pub m: usize,
    pub d: usize,
    pub trials: usize,
    /// Trials with exactly one consistent index set.
    pub unique: usize,
    /// `(trial, number of consistent index sets)` for every other trial.
    pub counterexamples: Vec<(usize, usize)>,
    pub verdict: Verdict,
    pub caveats: Vec<String>,
}

/// All `d`-subsets of `0..m` in lexicographic order.
fn subsets(m: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..d).rev().find(|&p| idx[p] < m - d + p) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..d {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Number of `d`-subsets whose scenario solution satisfies every sample.
fn consistent_subsets(problem: &ScenarioProblem, samples: &[Vec<f64>], d: usize) -> Result<usize> {
    let mut count = 0;
    for subset in subsets(samples.len(), d) {
        let sol = lp::solve(&problem.sampled_lp(samples, &subset))?;
        if sol.is_optimal() && samples.iter().all(|s| problem.g(&sol.x, s) <= FEAS_TOL) {
            count += 1;
        }
    }
    Ok(count)
}

/// Enumerates every `d`-subset of `T` random multisamples and counts the
/// subsets that yield a hypothesis consistent with the whole multisample.
/// Counterexamples are reported, not treated as a refutation: the property
/// may fail on a null set.
pub fn partition_check(form: CanonicalForm, m: usize, trials: usize, seed: u64) -> Result<PartitionReport> {
    require_unique_compression(form)?;
    let d = form.compression_size();
    if d > PARTITION_MAX_D || m > PARTITION_MAX_M || m < d {
        return Err(Error::Domain(format!(
            "exhaustive enumeration needs d <= m <= {PARTITION_MAX_M} and d <= {PARTITION_MAX_D} (m = {m}, d = {d})"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let dist = DistributionSpec::uniform_unit(1);
    let problem = form.problem();
    let counts: Vec<Result<usize>> = with_worker_pool(|| {
        (0..trials)
            .into_par_iter()
            .map(|k| consistent_subsets(&problem, &draw(&dist, m, derive(seed, k as u64))?, d))
            .collect()
    });
    let mut unique = 0;
    let mut counterexamples = Vec::new();
    for (k, count) in counts.into_iter().enumerate() {
        match count? {
            1 => unique += 1,
            n => counterexamples.push((k, n)),
        }
    }
    let mut caveats = Vec::new();
    if !counterexamples.is_empty() {
        caveats.push("counterexamples may lie in a null set; they are reported, not proof of failure".into());
    }
    Ok(PartitionReport {
        form,
        m,
        d,
        trials,
        unique,
        verdict: if counterexamples.is_empty() { Verdict::Pass } else { Verdict::Fail },
        counterexamples,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_evaluators() {
        let u = DistributionSpec::uniform_unit(1);
        let never = estimate_violation(|_| false, &u, 1000, 1, 0.99).unwrap();
        assert_eq!(never.point, 0.0);
        assert_eq!(never.ci_low, 0.0);
        let always = estimate_violation(|_| true, &u, 1000, 1, 0.99).unwrap();
        assert_eq!(always.point, 1.0);
        assert_eq!(always.ci_high, 1.0);
    }

    #[test]
    fn estimate_of_lower_max_solution() {
        let u = DistributionSpec::uniform_unit(1);
        let p = CanonicalForm::LowerMax.problem();
        let est = estimate_violation(|d| p.g(&[0.9], d) > 0.0, &u, 100_000, 77, 0.99).unwrap();
        assert!(est.ci_low <= 0.1 && 0.1 <= est.ci_high, "{est:?}");
        assert!(est.ci_low <= est.point && est.point <= est.ci_high);
    }

    #[test]
    fn clopper_pearson_known_values() {
        // k = 0: upper limit is 1 - (α/2)^(1/n).
        let (lo, hi) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-10);
        let (lo, hi) = clopper_pearson(10, 10, 0.95).unwrap();
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-10);
        assert_eq!(hi, 1.0);
        assert!(clopper_pearson(1, 0, 0.9).is_err());
    }

    #[test]
    fn zero_trials_is_an_error() {
        let cfg = ExperimentConfig::canonical(
            CanonicalForm::LowerMax,
            20,
            0.1,
            Method::Scenario { kind: BoundKind::ExactBinomial },
            0,
            1,
        );
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn small_exact_law_experiment() {
        let cfg = ExperimentConfig::canonical(
            CanonicalForm::LowerMax,
            20,
            0.1,
            Method::Scenario { kind: BoundKind::ExactBinomial },
            300,
            3,
        );
        let report = run_experiment(&cfg).unwrap();
        assert!((report.exact_law_value.unwrap() - 0.9f64.powi(20)).abs() < 1e-12);
        assert_eq!(report.completed_trials, 300);
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
        assert_eq!(run_experiment(&cfg).unwrap(), report);
    }

    #[test]
    fn method_must_fit_the_form() {
        let cfg = ExperimentConfig::canonical(CanonicalForm::LowerMax, 20, 0.1, Method::Cascade, 10, 1);
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn ks_single_trial_is_inconclusive() {
        let r = error_distribution_check(CanonicalForm::LowerMax, 1, 1, 5).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(error_distribution_check(CanonicalForm::LowerMax, 2, 10, 5).is_err());
        assert!(error_distribution_check(CanonicalForm::Cascade, 2, 10, 5).is_err());
    }

    #[test]
    fn partition_small_cases() {
        let r = partition_check(CanonicalForm::LowerMax, 8, 20, 1).unwrap();
        assert_eq!(r.unique, 20);
        let r = partition_check(CanonicalForm::Interval, 8, 20, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = partition_check(CanonicalForm::Interval, 2, 5, 1).unwrap();
        assert_eq!(r.unique, 5);
        assert!(partition_check(CanonicalForm::Interval, 13, 1, 1).is_err());
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(subsets(5, 1).len(), 5);
    }

    #[test]
    fn ks_statistic_of_a_perfect_grid() {
        let mut v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&mut v, |a| a) - 0.005).abs() < 1e-12);
    }
}
