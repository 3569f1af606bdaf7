mod common;

use rand::Rng;
use scenario_cert::sampling::{draw, DistributionSpec};
use scenario_cert::validate::{clopper_pearson, ks_statistic};

#[test]
fn uniform_marginals_pass_ks() {
    let n = 100_000;
    let spec = DistributionSpec::UniformBox {
        lower: vec![0.0, -2.0],
        upper: vec![1.0, 3.0],
    };
    let xs = draw(&spec, n, 31337).unwrap();
    // Asymptotic 0.1% critical value.
    let crit = 1.9495 / (n as f64).sqrt();
    for (k, (lo, hi)) in [(0.0, 1.0), (-2.0, 3.0)].into_iter().enumerate() {
        let mut col: Vec<f64> = xs.iter().map(|v| v[k]).collect();
        let d = ks_statistic(&mut col, |t| ((t - lo) / (hi - lo)).clamp(0.0, 1.0));
        assert!(d < crit, "coordinate {k}: {d} >= {crit}");
    }
}

#[test]
fn gaussian_marginal_pass_ks() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = 50_000;
    let xs = draw(&DistributionSpec::GaussianDiag { mean: vec![1.0], stddev: vec![2.0] }, n, 4).unwrap();
    let normal = Normal::new(1.0, 2.0).unwrap();
    let mut col: Vec<f64> = xs.iter().map(|v| v[0]).collect();
    let d = ks_statistic(&mut col, |t| normal.cdf(t));
    assert!(d < 1.9495 / (n as f64).sqrt());
}

#[test]
fn clopper_pearson_coverage() {
    let mut r = common::rng(8);
    let mut covered = 0;
    let reps = 1000;
    for rep in 0..reps {
        let p = [0.001, 0.01, 0.05, 0.2, 0.5][rep % 5];
        let n = 2000;
        let k = (0..n).filter(|_| r.random::<f64>() < p).count();
        let (lo, hi) = clopper_pearson(k, n, 0.99).unwrap();
        assert!(lo <= k as f64 / n as f64 && k as f64 / n as f64 <= hi);
        covered += usize::from(lo <= p && p <= hi);
    }
    assert!(covered as f64 >= 0.98 * reps as f64, "coverage {covered}/{reps}");
}
