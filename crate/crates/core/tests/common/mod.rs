#![allow(dead_code)]

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scenario_cert::lp::LinearProgram;
use scenario_cert::scenario::{ScenarioProblem, UncertainAffineConstraint};

// ---------- exact rational bounds ----------

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn binom(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `ε = a / 2^s` exactly, since `ε` is a binary float in (0, 1).
fn dyadic(eps: f64) -> (BigInt, BigInt, u64) {
    let r = rat(eps);
    let den = r.denom().clone();
    let s = den.bits() - 1;
    assert_eq!(den, BigInt::one() << s);
    let num = r.numer().clone();
    let rest = (BigInt::one() << s) - &num;
    (num, rest, s)
}

/// `Σ_{i ≤ upto} C(m,i) ε^i (1-ε)^(m-i)` over the common denominator `2^(s m)`.
fn binom_tail_numer(m: u64, upto: u64, eps: f64) -> (BigInt, u64) {
    let (a, b, s) = dyadic(eps);
    let sum = (0..=upto.min(m)).fold(BigInt::zero(), |acc, i| {
        acc + binom(m, i) * num::pow(a.clone(), i as usize) * num::pow(b.clone(), (m - i) as usize)
    });
    (sum, s * m)
}

fn ratio(numer: BigInt, log2_den: u64) -> f64 {
    to_f64(&BigRational::new(numer, BigInt::one() << log2_den))
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("representable")
}

pub fn oracle_floyd(m: u64, d: u64, eps: f64) -> f64 {
    let (_, b, s) = dyadic(eps);
    ratio(binom(m, d) * num::pow(b, (m - d) as usize), s * (m - d))
}

pub fn oracle_exact(m: u64, d: u64, eps: f64) -> f64 {
    let (n, l) = binom_tail_numer(m, d - 1, eps);
    ratio(n, l)
}

pub fn oracle_discard(m: u64, d: u64, r: u64, eps: f64) -> f64 {
    let (n, l) = binom_tail_numer(m - d, r, eps);
    ratio(binom(m, d) * n, l)
}

pub fn oracle_discard_unique(m: u64, d: u64, r: u64, eps: f64) -> f64 {
    let (n, l) = binom_tail_numer(m, r + d - 1, eps);
    ratio(binom(r + d - 1, r) * n, l)
}

/// `2 Σ_{i ≤ d} C(2m, i)` exactly, times `2^(-εm/2)` in floating point.
pub fn oracle_vc(m: u64, d: u64, eps: f64) -> f64 {
    let sum = (0..=d).fold(BigInt::zero(), |acc, i| acc + binom(2 * m, i));
    let head = to_f64(&BigRational::from_integer(sum * 2));
    head * (-eps * m as f64 / 2.0).exp2()
}

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    let want = want.min(1.0);
    (got - want).abs() <= tol * want.abs().max(f64::MIN_POSITIVE)
}

// ---------- LP vertex enumeration ----------

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if m < k {
        return vec![];
    }
    let mut out = subsets(m - 1, k);
    for mut s in subsets(m - 1, k - 1) {
        s.push(m - 1);
        out.push(s);
    }
    out
}

pub enum OracleResult {
    Infeasible,
    Optimal { objective: f64, lex_point: Vec<f64> },
}

/// Every bound must be finite. Returns the optimal value and the
/// lexicographically smallest optimal vertex.
pub fn vertex_oracle(lp: &LinearProgram) -> OracleResult {
    let n = lp.cost.len();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        rows.push((e.clone(), lp.var_upper[k]));
        e[k] = -1.0;
        rows.push((e, -lp.var_lower[k]));
    }
    let feasible = |x: &[f64]| {
        rows.iter().all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9)
    };
    let mut vertices = Vec::new();
    for s in subsets(rows.len(), n) {
        let a = s.iter().map(|&i| rows[i].0.clone()).collect();
        let b = s.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                vertices.push(x);
            }
        }
    }
    if vertices.is_empty() {
        return OracleResult::Infeasible;
    }
    let obj = |x: &[f64]| lp.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
    let best = vertices.iter().map(|v| obj(v)).fold(f64::INFINITY, f64::min);
    let lex_less = |a: &[f64], b: &[f64]| {
        for (p, q) in a.iter().zip(b) {
            if (p - q).abs() > 1e-9 {
                return p < q;
            }
        }
        false
    };
    let mut lex_point: Option<Vec<f64>> = None;
    for v in vertices.iter().filter(|v| obj(v) <= best + 1e-9 * (1.0 + best.abs())) {
        if lex_point.as_ref().is_none_or(|p| lex_less(v, p)) {
            lex_point = Some(v.clone());
        }
    }
    OracleResult::Optimal {
        objective: best,
        lex_point: lex_point.unwrap(),
    }
}

// ---------- random instances ----------

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Scenario problem with `x = 0` strictly feasible for `δ ∈ [-1, 1]^n_δ`
/// and every variable in `[-10, 10]`.
pub fn random_problem(rng: &mut ChaCha8Rng, n_x: usize, n_delta: usize, n_cons: usize, uncertain_f: bool) -> ScenarioProblem {
    let constraints = (0..n_cons)
        .map(|_| UncertainAffineConstraint {
            f0: (0..n_x).map(|_| normal(rng)).collect(),
            f: (0..n_x)
                .map(|_| {
                    (0..n_delta)
                        .map(|_| if uncertain_f { 0.5 * normal(rng) } else { 0.0 })
                        .collect()
                })
                .collect(),
            h0: -1.0 - rng.random::<f64>(),
            h: (0..n_delta).map(|_| rng.random_range(-0.3..0.3)).collect(),
        })
        .collect();
    let mut p = ScenarioProblem::new((0..n_x).map(|_| normal(rng)).collect(), n_delta, constraints);
    p.var_lower = vec![-10.0; n_x];
    p.var_upper = vec![10.0; n_x];
    p
}

pub fn uniform_samples(rng: &mut ChaCha8Rng, m: usize, n_delta: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n_delta).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Random LP in `n` variables; all bounds finite, possibly infeasible.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=3);
    let n_rows = rng.random_range(1..=6);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let l = rng.random_range(-5.0..1.0);
        lower.push(l);
        upper.push(l + rng.random_range(0.0..6.0));
    }
    let mut lp = LinearProgram::new((0..n).map(|_| normal(rng)).collect()).with_bounds(lower, upper);
    for _ in 0..n_rows {
        let coeffs: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        lp.push_row(coeffs, rng.random_range(-3.0..3.0));
    }
    // Occasionally make the cost degenerate so the optimal face is not a vertex.
    if rng.random::<f64>() < 0.2 {
        lp.cost = lp.rows[0].coeffs.iter().map(|c| -c).collect();
    }
    if rng.random::<f64>() < 0.1 {
        lp.cost = vec![0.0; n];
    }
    lp
}
