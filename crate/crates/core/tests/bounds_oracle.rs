mod common;

use common::*;
use num::{BigInt, One};
use scenario_cert::bounds::*;
use scenario_cert::BoundKind;

/// ln of a big integer through its top 64 bits.
fn big_ln(n: &BigInt) -> f64 {
    let bits = n.bits();
    let shift = bits.saturating_sub(64);
    let top: BigInt = n >> shift;
    let top = num::ToPrimitive::to_f64(&top).unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[test]
fn log_choose_against_big_integers() {
    for (n, k) in [(1000u64, 500u64), (1000, 3), (1000, 31), (5000, 2500), (60, 30), (100_000, 40)] {
        let want = big_ln(&binom(n, k));
        let got = log_choose(n, k).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs(), "({n}, {k}): {got} vs {want}");
    }
    assert_eq!(log_choose(5, 0).unwrap(), 0.0);
    assert!((log_choose(4, 2).unwrap() - 6f64.ln()).abs() < 1e-15);
    assert!(log_choose(3, 4).is_err());
}

#[test]
fn log_choose_large_arguments() {
    // Exact factorial ratio for a million via an incremental product.
    let n = 1_000_000u64;
    let k = 12u64;
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    let want = big_ln(&acc);
    assert!((log_choose(n, k).unwrap() - want).abs() <= 1e-12 * want);
    let want = big_ln(&binom(n, 40));
    assert!((log_choose(n, 40).unwrap() - want).abs() <= 1e-12 * want);
}

#[test]
fn worked_values() {
    let want = oracle_discard(50, 2, 3, 0.2);
    assert!(rel_close(q_discard(50, 2, 3, 0.2).unwrap(), want, 1e-10));
    let want = oracle_discard_unique(50, 2, 3, 0.2);
    assert!(rel_close(q_discard_unique(50, 2, 3, 0.2).unwrap(), want, 1e-10));
    let direct = 30.0 * (0.7f64.powi(29) + 29.0 * 0.3 * 0.7f64.powi(28));
    assert!(rel_close(q_discard(30, 1, 1, 0.3).unwrap(), direct.min(1.0), 1e-12));
    let direct = 0.75f64.powi(20) + 20.0 * 0.25 * 0.75f64.powi(19);
    assert!(rel_close(q_discard_unique(20, 1, 1, 0.25).unwrap(), direct, 1e-12));
    assert!(rel_close(q_vc(2000, 2, 0.1).unwrap(), oracle_vc(2000, 2, 0.1), 1e-10));
    assert!((q_vc(80, 0, 0.1).unwrap() - 0.125).abs() < 1e-15);
    assert_eq!(q_vc(80, 2, 0.1).unwrap(), 1.0);
    assert!(q_vc(79, 0, 0.1).is_err());
    assert!((q_exact(20, 2, 0.15).unwrap() - (0.85f64.powi(20) + 3.0 * 0.85f64.powi(19))).abs() < 1e-13);
}

#[test]
fn ordering_and_monotonicity_grid() {
    for d in 1..=10usize {
        for &eps in &[0.01, 0.05, 0.1, 0.2, 0.5] {
            let mut prev_m = f64::INFINITY;
            for m in d..=200 {
                let exact = q_exact(m, d, eps).unwrap();
                assert!(exact <= q_floyd(m, d, eps).unwrap() + 1e-12, "({m},{d},{eps})");
                assert!(exact <= prev_m + 1e-15, "q_exact increased in m at ({m},{d},{eps})");
                prev_m = exact;
                if d < m {
                    assert!(q_exact(m, d + 1, eps).unwrap() + 1e-15 >= exact);
                }
            }
        }
        for m in d..=200 {
            let mut prev = f64::INFINITY;
            for &eps in &[0.01, 0.05, 0.1, 0.2, 0.5] {
                // Strictly decreasing in ε; use the log to see past underflow.
                let l = log_q_exact(m, d, eps).unwrap();
                assert!(l < prev || (m == d && d == 0), "({m},{d},{eps})");
                prev = l;
            }
        }
    }
}

#[test]
fn collapse_identities() {
    for m in 1..=120usize {
        for d in 1..=m.min(8) {
            for &eps in &[0.01, 0.1, 0.3, 0.7] {
                let f = q_floyd(m, d, eps).unwrap();
                assert!((q_discard(m, d, 0, eps).unwrap() - f).abs() <= 1e-12);
                let e = q_exact(m, d, eps).unwrap();
                assert!((q_discard_unique(m, d, 0, eps).unwrap() - e).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn limit_vanishes() {
    let ln_tiny = 1e-50f64.ln();
    let m = 100_000;
    for kind in [
        BoundKind::Floyd,
        BoundKind::ExactBinomial,
        BoundKind::Discard { r: 3 },
        BoundKind::DiscardUnique { r: 3 },
        BoundKind::Vc,
    ] {
        assert!(kind.log_q(m, 5, 0.1).unwrap() < ln_tiny, "{kind}");
    }
}

#[test]
fn rational_oracle_small_m() {
    for m in 1..=60u64 {
        for d in 1..=m.min(10) {
            for &eps in &[0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
                let (mu, du) = (m as usize, d as usize);
                assert!(rel_close(q_floyd(mu, du, eps).unwrap(), oracle_floyd(m, d, eps), 1e-10));
                assert!(rel_close(q_exact(mu, du, eps).unwrap(), oracle_exact(m, d, eps), 1e-10));
                for r in 0..=3u64 {
                    if m < d + r {
                        continue;
                    }
                    let ru = r as usize;
                    assert!(rel_close(q_discard(mu, du, ru, eps).unwrap(), oracle_discard(m, d, r, eps), 1e-10));
                    assert!(rel_close(
                        q_discard_unique(mu, du, ru, eps).unwrap(),
                        oracle_discard_unique(m, d, r, eps),
                        1e-10
                    ));
                }
            }
        }
    }
}

#[test]
fn inversions() {
    let eps = epsilon_for(100, 1, 0.01, BoundKind::ExactBinomial).unwrap();
    assert!((eps - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-9);
    let eps = epsilon_for(20, 2, q_exact(20, 2, 0.15).unwrap(), BoundKind::ExactBinomial).unwrap();
    assert!((eps - 0.15).abs() < 1e-8);
    assert!(epsilon_for(3, 3, 0.5, BoundKind::Floyd).is_err());
    assert_eq!(sample_size_for(1, 0.1, 0.01, BoundKind::ExactBinomial).unwrap(), 44);
    let scan = (1..).find(|&m| q_floyd(m, 1, 0.1).unwrap() <= 0.01).unwrap();
    assert_eq!(sample_size_for(1, 0.1, 0.01, BoundKind::Floyd).unwrap(), scan);
    assert!(sample_size_for(1, 1e-9, 1e-12, BoundKind::Floyd).is_err());
}
