mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use scenario_cert::canonical::CanonicalForm;
use scenario_cert::cascade::{joint_violation, solve_cascade, SecondStageSpec};
use scenario_cert::lp;
use scenario_cert::robust_box::{fit_box, fit_box_support, robust_lp_over_box, solve_box_design};
use scenario_cert::sampling::{draw, DistributionSpec};
use scenario_cert::scenario::{compression_set, discard, CertTarget};
use scenario_cert::{BoundKind, Error};

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn compression_reproduces_and_is_consistent(seed in any::<u64>(), n_x in 1usize..=4, m in 5usize..=30) {
        let mut r = rng(seed);
        // n_δ > n_x: otherwise the optimum can sit where g does not depend on δ.
        let problem = random_problem(&mut r, n_x, n_x + 1, 1 + (seed % 2) as usize, true);
        let samples = uniform_samples(&mut r, m, n_x + 1);
        let record = compression_set(&problem, &samples).unwrap();
        prop_assert!(record.support_indices.len() <= n_x);
        prop_assert!(record.raw_compression.len() <= n_x);
        prop_assert_eq!(record.compression_indices.len(), n_x.min(m));
        let all: Vec<usize> = (0..m).collect();
        let full = lp::solve(&problem.sampled_lp(&samples, &all)).unwrap();
        let reduced = lp::solve(&problem.sampled_lp(&samples, &record.compression_indices)).unwrap();
        for k in 0..n_x {
            prop_assert!((full.x[k] - reduced.x[k]).abs() <= 1e-7);
        }
        for s in &samples {
            prop_assert!(problem.g(&reduced.x, s) <= lp::FEAS_TOL);
        }
    }

    #[test]
    fn discard_rounds_never_raise_the_objective(seed in any::<u64>(), r in 1usize..=3) {
        let mut rr = rng(seed);
        let problem = random_problem(&mut rr, 2, 3, 1, true);
        let samples = uniform_samples(&mut rr, 15, 3);
        match discard(&problem, &samples, r) {
            Ok(out) => {
                for w in out.objectives.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9);
                }
                for &i in &out.removed {
                    prop_assert!(problem.g(&out.solution.x, &samples[i]) > 1e-9);
                }
            }
            Err(Error::DegenerateRemoval { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn box_containment_is_monotone(seed in any::<u64>(), n_delta in 1usize..=3, m in 1usize..=20, extra in 1usize..=10) {
        let mut r = rng(seed);
        let sub = uniform_samples(&mut r, m, n_delta);
        let mut sup = sub.clone();
        sup.extend(uniform_samples(&mut r, extra, n_delta));
        prop_assert!(fit_box(&sup).unwrap().contains_box(&fit_box(&sub).unwrap()));
    }

    #[test]
    fn box_support_reproduces_the_design(seed in any::<u64>(), n_delta in 1usize..=3, m in 6usize..=30) {
        let mut r = rng(seed);
        let problem = random_problem(&mut r, 2, n_delta, 2, true);
        let samples = uniform_samples(&mut r, m, n_delta);
        let design = solve_box_design(&problem, &samples, CertTarget::Epsilon(0.2), BoundKind::ExactBinomial).unwrap();
        let support = fit_box_support(&samples).unwrap();
        prop_assert!(support.len() <= 2 * n_delta);
        let reduced: Vec<Vec<f64>> = support.iter().map(|&i| samples[i].clone()).collect();
        let refit = fit_box(&reduced).unwrap();
        prop_assert_eq!(&refit, &design.fitted);
        let again = robust_lp_over_box(&problem, &refit).unwrap();
        for k in 0..2 {
            prop_assert!((again.x[k] - design.solution.x[k]).abs() <= 1e-7);
        }
    }

    #[test]
    fn cascade_union_is_small_and_consistent(seed in any::<u64>(), m in 2usize..=25) {
        let p1 = CanonicalForm::Cascade.problem();
        let p2 = CanonicalForm::Cascade.second_stage().unwrap();
        let samples = draw(&DistributionSpec::uniform_unit(1), m, seed).unwrap();
        let res = solve_cascade(&p1, &p2, &samples, CertTarget::Epsilon(0.2), BoundKind::Floyd).unwrap();
        prop_assert!(res.union_compression.len() <= 2);
        for s in &samples {
            prop_assert!(!joint_violation(&res.x, &res.y, &p1, &p2, s));
        }
    }
}

#[test]
fn box_violation_is_inside_box_exit() {
    let mut r = rng(99);
    for case in 0..30 {
        let n_delta = 1 + case % 3;
        let problem = random_problem(&mut r, 2, n_delta, 2, true);
        let spec = DistributionSpec::UniformBox {
            lower: vec![-1.0; n_delta],
            upper: vec![1.0; n_delta],
        };
        let samples = draw(&spec, 4 * n_delta + 4, r.random()).unwrap();
        let design = solve_box_design(&problem, &samples, CertTarget::Epsilon(0.2), BoundKind::ExactBinomial).unwrap();
        let fresh = draw(&spec, 10_000, r.random()).unwrap();
        let violated = fresh.iter().filter(|d| problem.g(&design.solution.x, d) > 0.0).count();
        let outside = fresh.iter().filter(|d| !design.fitted.contains(d, 0.0)).count();
        assert!(violated <= outside, "case {case}: {violated} > {outside}");
    }
}

#[test]
fn cascade_random_second_stages() {
    let mut r = rng(5);
    let p1 = CanonicalForm::LowerMax.problem();
    let mut checked = 0;
    for _ in 0..100 {
        // y >= a x + b δ + c with random slopes; always feasible and bounded.
        let (a, b, c) = (normal(&mut r), normal(&mut r), normal(&mut r));
        let p2 = SecondStageSpec::new(
            vec![1.0],
            vec![scenario_cert::cascade::CoupledConstraint {
                a0: vec![-1.0],
                a: vec![vec![0.0]],
                q_mat: vec![vec![0.0]],
                q: vec![a],
                s: vec![b],
                t: c,
            }],
        );
        let samples = draw(&DistributionSpec::uniform_unit(1), 12, r.random()).unwrap();
        let res = solve_cascade(&p1, &p2, &samples, CertTarget::Epsilon(0.3), BoundKind::Floyd).unwrap();
        assert!(res.union_compression.len() <= 2);
        let x = samples.iter().map(|s| s[0]).fold(f64::MIN, f64::max);
        let y = samples.iter().map(|s| a * x + b * s[0] + c).fold(f64::MIN, f64::max);
        assert!((res.x[0] - x).abs() < 1e-9 && (res.y[0] - y).abs() < 1e-9);
        checked += 1;
    }
    assert_eq!(checked, 100);
}
