//! Monte Carlo checks of moments and marginal laws against closed forms.
//! Sample sizes are kept small enough for the default test run; the
//! acceptance target repeats the heavier versions.

use renewal_gauss_core::gauss_kernels::fbm_covariance;
use renewal_gauss_core::paths::{ensemble, exact_bm, exact_fbm};
use renewal_gauss_core::renewal::{simulate_renewal, simulate_reward};
use renewal_gauss_core::sign_kernel::{build_theta, Polynomial};
use renewal_gauss_core::stats::{
    empirical_covariance, flagged_gap_ks, ks_test, ks_two_sample, mean_with_se, normal_cdf_scaled,
    pair_moment_constant, pair_moment_oracle_exponential,
};
use renewal_gauss_core::{
    InterarrivalLaw, PathGenerator, Process, ScaleSchedule, StreamSet, TimeGrid,
};

fn within(estimate: f64, se: f64, target: f64, what: &str) {
    assert!(
        (estimate - target).abs() <= 3.0 * se + 1e-12,
        "{what}: {estimate} ± {se} vs {target}"
    );
}

#[test]
fn poisson_count_mean() {
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let counts: Vec<f64> = (0..10_000)
        .map(|i| {
            let mut s = StreamSet::for_path(1, i);
            simulate_renewal(&law, 10.0, &mut s.arrivals)
                .unwrap()
                .count(10.0)
                .unwrap() as f64
        })
        .collect();
    let (m, se) = mean_with_se(&counts).unwrap();
    within(m, se, 10.0, "E[L(10)]");
}

#[test]
fn tiny_horizon_has_no_arrivals() {
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let empty = (0..10_000)
        .filter(|&i| {
            let mut s = StreamSet::for_path(2, i);
            simulate_renewal(&law, 1e-9, &mut s.arrivals)
                .unwrap()
                .count(1e-9)
                .unwrap()
                == 0
        })
        .count();
    assert!(empty as f64 / 10_000.0 >= 0.999);
}

#[test]
fn parity_mean_and_correlation() {
    // η_0 makes the parity centred; each later reward flips it with
    // probability 1/2, so the correlation with time 0 is P(L(t) = 0) = e^{-t}.
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let t = 1.0;
    let (mut level, mut corr) = (Vec::new(), Vec::new());
    for i in 0..100_000 {
        let path = simulate_reward(&law, t, &mut StreamSet::for_path(3, i)).unwrap();
        let end = path.parity(t).unwrap() as f64;
        level.push(end);
        corr.push(end * path.parity(0.0).unwrap() as f64);
    }
    let (m, se) = mean_with_se(&level).unwrap();
    within(m, se, 0.0, "parity mean");
    let (m, se) = mean_with_se(&corr).unwrap();
    within(m, se, (-t).exp(), "parity correlation");
}

#[test]
fn flip_count_scales_with_inverse_beta() {
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let schedule = ScaleSchedule::fixed(0.01).unwrap();
    let flips: Vec<f64> = (0..2000)
        .map(|i| {
            build_theta(&law, 1, &schedule, &mut StreamSet::for_path(4, i))
                .unwrap()
                .flip_points
                .len() as f64
        })
        .collect();
    let (m, se) = mean_with_se(&flips).unwrap();
    within(m, se, 50.0, "flip count");
}

#[test]
fn pair_moment_and_odd_moments() {
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let beta = 0.05;
    let schedule = ScaleSchedule::fixed(beta).unwrap();
    let one = Polynomial::constant(1.0);
    let x = Polynomial::new(vec![0.0, 1.0]);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for i in 0..100_000 {
        let theta = build_theta(&law, 1, &schedule, &mut StreamSet::for_path(5, i)).unwrap();
        first.push(theta.integrate_primitive(&one));
        second.push(theta.integrate_primitive(&x));
    }
    let oracle_one = pair_moment_constant(1.0, beta);
    assert!(
        (pair_moment_oracle_exponential(|_| 1.0, 1.0, beta, 1e-10).unwrap() - oracle_one).abs()
            < 1e-8
    );
    let oracle_x = pair_moment_oracle_exponential(|x| x, 1.0, beta, 1e-10).unwrap();
    for (vals, oracle, name) in [(&first, oracle_one, "f=1"), (&second, oracle_x, "f=x")] {
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let (m, se) = mean_with_se(&sq).unwrap();
        within(m, se, oracle, name);
        for k in [1, 3] {
            let odd: Vec<f64> = vals.iter().map(|v| v.powi(k)).collect();
            let (m, se) = mean_with_se(&odd).unwrap();
            within(m, se, 0.0, "odd moment");
        }
    }
}

#[test]
fn xn_marginal_is_nearly_standard_normal() {
    let law = InterarrivalLaw::exponential(1.0).unwrap();
    let generator = PathGenerator::new(
        Process::Xn {
            law,
            n: 1,
            schedule: ScaleSchedule::fixed(1e-3).unwrap(),
        },
        TimeGrid::from_points(vec![0.0, 0.5, 1.0]).unwrap(),
    )
    .unwrap();
    let e = ensemble(&generator, 4000, 6).unwrap();
    let ends = e.marginal(1.0).unwrap();
    let sq: Vec<f64> = ends.iter().map(|v| v * v).collect();
    let (var, se) = mean_with_se(&sq).unwrap();
    // At β = 1e-3 the variance is 1 - β(1 - e^{-1/β}) below 1.
    within(var, se, pair_moment_constant(1.0, 1e-3), "Var x_n(1)");
    assert!(
        ks_test(&ends, |v| normal_cdf_scaled(v, 1.0), "x_n(1)")
            .unwrap()
            .pass
    );
    let (cov, se) = empirical_covariance(&e, 0.5, 1.0).unwrap();
    within(cov, se, 0.5, "Cov(x_n(1/2), x_n(1))");
}

#[test]
fn exact_references_agree() {
    let grid = TimeGrid::from_points(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let mut bm = Vec::new();
    let mut fbm = Vec::new();
    let mut rough = Vec::new();
    for i in 0..10_000 {
        bm.push(
            *exact_bm(&grid, &mut StreamSet::for_path(7, i))
                .unwrap()
                .values
                .last()
                .unwrap(),
        );
        let p = exact_fbm(0.5, &grid, &mut StreamSet::for_path(8, i)).unwrap();
        fbm.push(*p.values.last().unwrap());
        let q = exact_fbm(0.7, &grid, &mut StreamSet::for_path(9, i)).unwrap();
        rough.push((q.at(0.5).unwrap(), q.at(1.0).unwrap()));
    }
    assert!(
        ks_two_sample(&bm, &fbm, "exact bm vs fbm(1/2)")
            .unwrap()
            .pass
    );
    let sq: Vec<f64> = fbm.iter().map(|v| v * v).collect();
    let (var, se) = mean_with_se(&sq).unwrap();
    within(var, se, 1.0, "Var fbm(1)");
    let prod: Vec<f64> = rough.iter().map(|(a, b)| a * b).collect();
    let (cov, se) = mean_with_se(&prod).unwrap();
    within(cov, se, fbm_covariance(0.7, 0.5, 1.0), "Cov fbm_0.7");
}

#[test]
fn flagged_gaps_are_exponential() {
    let law = InterarrivalLaw::UniformUnit;
    let r = flagged_gap_ks(&law, 20_000, 10).unwrap();
    assert!(r.pass, "{r}");
}
