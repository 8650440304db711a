//! Verification suites. Each suite is a deterministic function of its seed
//! and sample scale; paths run on the current rayon pool.

use renewal_gauss_core::gauss_kernels::{eval_kernel, fbm_covariance, l2_increment};
use renewal_gauss_core::paths::{simulate_iterated, Integrand, TABULATED_TOL};
use renewal_gauss_core::renewal::{
    geometric_increment_pmf, geometric_joint_by_enumeration, geometric_joint_pmf, simulate_renewal,
};
use renewal_gauss_core::seed::path_seed;
use renewal_gauss_core::sign_kernel::{build_theta, Polynomial};
use renewal_gauss_core::stats::{
    chi_square_independence, chi_square_pmf_test, domination_observation, domination_summary,
    empirical_covariance, flagged_gap_ks, ks_test, mean_with_se, moment_observation,
    moment_ratio_summary, normal_cdf_scaled, pair_moment_oracle_exponential,
};
use renewal_gauss_core::{
    InterarrivalLaw, KernelSpec, PathEnsemble, PathGenerator, Process, Result, ScaleSchedule,
    StreamSet, TestReport, TimeGrid,
};
use serde::Serialize;

use crate::parallel::map_indexed;

/// Smallest sample size any suite runs with, whatever the scale.
pub const MIN_SAMPLES: usize = 200;

pub struct Ctx {
    pub seed: u64,
    pub scale: f64,
}

impl Ctx {
    fn size(&self, base: usize) -> usize {
        ((base as f64 * self.scale).ceil() as usize).max(MIN_SAMPLES)
    }

    fn sub(&self, j: u64) -> u64 {
        path_seed(self.seed, j)
    }
}

type SuiteFn = fn(&Ctx) -> Result<Vec<TestReport>>;

/// Registry order fixes each suite's seed, so `all` and a single suite agree.
pub const SUITES: &[(&str, SuiteFn)] = &[
    ("geometric-laws", geometric_laws),
    ("geometric-independence", geometric_independence),
    ("pair-moment", pair_moment),
    ("xn-marginal", xn_marginal),
    ("fbm-covariance", fbm_covariance_suite),
    ("kernel-certification", kernel_certification),
    ("iterated-identities", iterated_identities),
    ("domination", domination),
    ("moment-bound", moment_bound),
];

pub fn names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub seed: u64,
    pub pass: bool,
    pub reports: Vec<TestReport>,
}

/// Run a registered suite. A run-time error becomes a failing report.
pub fn run_suite(name: &str, master_seed: u64, scale: f64) -> Option<SuiteOutcome> {
    let idx = SUITES.iter().position(|s| s.0 == name)?;
    let seed = path_seed(master_seed, idx as u64);
    let ctx = Ctx { seed, scale };
    let reports = match (SUITES[idx].1)(&ctx) {
        Ok(r) => r,
        Err(e) => vec![TestReport::new(name, &format!("suite aborted: {e}")).with_seed(seed)],
    };
    let reports: Vec<TestReport> = reports.into_iter().map(|r| r.with_suite(name)).collect();
    Some(SuiteOutcome {
        name: name.into(),
        seed,
        pass: !reports.is_empty() && reports.iter().all(|r| r.pass),
        reports,
    })
}

fn geometric_counts(
    law: &InterarrivalLaw,
    times: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    map_indexed(count, |i| {
        let mut streams = StreamSet::for_path(seed, i);
        let path = simulate_renewal(law, horizon, &mut streams.arrivals)?;
        times.iter().map(|&t| path.count(t)).collect()
    })
}

fn geometric_laws(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let n = ctx.size(100_000);
    for (j, &(p, s, t)) in [(0.5, 2.5, 5.2), (0.3, 1.0, 3.0)].iter().enumerate() {
        let law = InterarrivalLaw::geometric(p)?;
        let seed = ctx.sub(j as u64);
        let counts = geometric_counts(&law, &[s, t], n, seed)?;
        let fs = s.floor() as usize;
        let w = (t.floor() - s.floor()) as usize + 1;
        let mut joint = vec![0u64; (fs + 1) * w];
        let mut inc = vec![0u64; w];
        for c in &counts {
            joint[c[0] * w + (c[1] - c[0])] += 1;
            inc[c[1] - c[0]] += 1;
        }
        let mut joint_pmf = Vec::with_capacity(joint.len());
        for m in 0..=fs as u64 {
            for k in 0..w as u64 {
                joint_pmf.push(geometric_joint_pmf(p, s, t, m, k)?);
            }
        }
        let inc_pmf = (0..w as u64)
            .map(|k| geometric_increment_pmf(p, s, t, k))
            .collect::<Result<Vec<_>>>()?;
        let tag = |r: TestReport| r.with_seed(seed).param("p", p).param("s", s).param("t", t);
        out.push(tag(chi_square_pmf_test(
            &joint,
            &joint_pmf,
            "joint law of (L(s), L(t) - L(s))",
        )?));
        out.push(tag(chi_square_pmf_test(
            &inc,
            &inc_pmf,
            "law of L(t) - L(s)",
        )?));
    }
    // Closed forms against brute-force enumeration of inter-arrival tuples.
    let mut worst: f64 = 0.0;
    let mut cells = 0u64;
    for &p in &[0.3, 0.5, 0.7] {
        for &(s, t) in &[
            (0.0, 1.0),
            (1.0, 3.0),
            (2.0, 4.0),
            (0.5, 4.9),
            (2.5, 3.2),
            (1.5, 4.0),
        ] {
            let table = geometric_joint_by_enumeration(p, s, t)?;
            for (m, row) in table.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    worst =
                        worst.max((geometric_joint_pmf(p, s, t, m as u64, k as u64)? - v).abs());
                    cells += 1;
                }
            }
            for k in 0..table[0].len() {
                let marginal: f64 = table.iter().map(|r| r[k]).sum();
                worst = worst.max((geometric_increment_pmf(p, s, t, k as u64)? - marginal).abs());
            }
        }
    }
    let mut r = TestReport::new(
        "geometric-laws",
        "joint and increment pmfs match enumeration for floor(t) <= 4",
    )
    .param("p", vec![0.3, 0.5, 0.7]);
    r.statistic = worst;
    r.pass = worst <= 1e-10;
    r.tolerance = Some(1e-10);
    r.n_samples = cells;
    out.push(r);
    Ok(out)
}

fn geometric_independence(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let p = 0.5;
    let law = InterarrivalLaw::geometric(p)?;
    let counts = geometric_counts(&law, &[1.0, 3.0, 5.0], ctx.size(100_000), ctx.seed)?;
    let incs: Vec<[usize; 3]> = counts
        .iter()
        .map(|c| [c[0], c[1] - c[0], c[2] - c[1]])
        .collect();
    let names = ["L(1)", "L(3) - L(1)", "L(5) - L(3)"];
    let mut out = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let mut table = vec![vec![0u64; 3]; 3];
        for v in &incs {
            table[v[a]][v[b]] += 1;
        }
        let desc = format!("independence of {} and {}", names[a], names[b]);
        out.push(
            chi_square_independence(&table, &desc)?
                .with_seed(ctx.seed)
                .param("p", p),
        );
    }
    Ok(out)
}

fn within_se_report(
    desc: &str,
    estimate: f64,
    se: f64,
    target: f64,
    slack: f64,
    n: usize,
) -> TestReport {
    let mut r = TestReport::new("", desc)
        .param("estimate", estimate)
        .param("standard_error", se)
        .param("target", target)
        .param("slack", slack);
    r.statistic = (estimate - target).abs();
    r.pass = r.statistic <= 3.0 * se + slack;
    r.tolerance = Some(3.0 * se + slack);
    r.n_samples = n as u64;
    r
}

fn pair_moment(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let law = InterarrivalLaw::exponential(1.0)?;
    let fs = [Polynomial::constant(1.0), Polynomial::new(vec![0.0, 1.0])];
    let n = ctx.size(100_000);
    let mut out = Vec::new();
    for (j, &beta) in [0.05, 0.01].iter().enumerate() {
        let seed = ctx.sub(j as u64);
        let schedule = ScaleSchedule::fixed(beta)?;
        let vals = map_indexed(n, |i| {
            let theta = build_theta(&law, 1, &schedule, &mut StreamSet::for_path(seed, i))?;
            Ok([
                theta.integrate_primitive(&fs[0]),
                theta.integrate_primitive(&fs[1]),
            ])
        })?;
        for (k, f) in fs.iter().enumerate() {
            let sq: Vec<f64> = vals.iter().map(|v| v[k] * v[k]).collect();
            let (m, se) = mean_with_se(&sq)?;
            let oracle = pair_moment_oracle_exponential(|x| f.eval(x), 1.0, beta, 1e-10)?;
            let desc = format!(
                "E[(int f theta)^2] for f = {f} matches the exponential pair-moment oracle"
            );
            out.push(
                within_se_report(&desc, m, se, oracle, 0.0, n)
                    .with_seed(seed)
                    .param("beta", beta)
                    .param("f", format!("{f}")),
            );
        }
    }
    Ok(out)
}

fn covariance_grid() -> Result<TimeGrid> {
    TimeGrid::from_points(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
}

fn run_ensemble(process: Process, grid: TimeGrid, count: usize, seed: u64) -> Result<PathEnsemble> {
    let generator = PathGenerator::new(process, grid.clone())?;
    let rows = map_indexed(count, |i| generator.generate(path_seed(seed, i)))?;
    PathEnsemble::from_rows(grid, seed, rows)
}

/// Largest `|Ĉ(s, t) - c(s, t)|` over the non-zero grid points.
fn covariance_report<C: Fn(f64, f64) -> f64>(
    e: &PathEnsemble,
    limit: C,
    desc: &str,
) -> Result<TestReport> {
    let pts: Vec<f64> = e
        .grid
        .points()
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .collect();
    let mut worst: f64 = 0.0;
    let mut at = vec![0.0, 0.0];
    for (i, &s) in pts.iter().enumerate() {
        for &t in &pts[i..] {
            let (c, _) = empirical_covariance(e, s, t)?;
            let err = (c - limit(s, t)).abs();
            if err > worst {
                worst = err;
                at = vec![s, t];
            }
        }
    }
    let mut r = TestReport::new("", desc)
        .param("grid", pts)
        .param("worst_at", at);
    r.statistic = worst;
    r.pass = worst <= 0.05;
    r.tolerance = Some(0.05);
    r.n_samples = e.count() as u64;
    Ok(r.with_seed(e.master_seed))
}

fn normal_ks(values: &[f64], desc: &str, seed: u64) -> Result<TestReport> {
    Ok(ks_test(values, |v| normal_cdf_scaled(v, 1.0), desc)?.with_seed(seed))
}

fn xn_marginal(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let law = InterarrivalLaw::exponential(1.0)?;
    let beta = 1e-4;
    let process = Process::Xn {
        law,
        n: 1,
        schedule: ScaleSchedule::fixed(beta)?,
    };
    let e = run_ensemble(process, covariance_grid()?, ctx.size(10_000), ctx.seed)?;
    let tag = |r: TestReport| r.param("law", format!("{law}")).param("beta", beta);
    Ok(vec![
        tag(normal_ks(
            &e.marginal(1.0)?,
            "x_n(1) against N(0, 1)",
            ctx.seed,
        )?),
        tag(covariance_report(
            &e,
            f64::min,
            "covariance of x_n against min(s, t)",
        )?),
    ])
}

fn fbm_covariance_suite(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let law = InterarrivalLaw::UniformUnit;
    let beta = 1e-4;
    let mut out = Vec::new();
    for (j, &h) in [0.3, 0.7].iter().enumerate() {
        let kernel = KernelSpec::fbm(h)?;
        let process = Process::Yn {
            law,
            n: 1,
            schedule: ScaleSchedule::fixed(beta)?,
            kernel: kernel.clone(),
            tol: TABULATED_TOL,
        };
        let seed = ctx.sub(j as u64);
        let e = run_ensemble(process, covariance_grid()?, ctx.size(10_000), seed)?;
        let tag = |r: TestReport| {
            r.param("law", format!("{law}"))
                .param("beta", beta)
                .param("kernel", format!("{kernel}"))
        };
        out.push(tag(covariance_report(
            &e,
            |s, t| fbm_covariance(h, s, t),
            "covariance of Y^n against the fBm covariance",
        )?));
        out.push(tag(normal_ks(
            &e.marginal(1.0)?,
            "Y^n(1) against N(0, 1)",
            seed,
        )?));
    }
    Ok(out)
}

const CERTIFICATION_PAIRS: [(f64, f64); 10] = [
    (0.0, 0.1),
    (0.1, 0.2),
    (0.2, 0.5),
    (0.3, 0.35),
    (0.5, 1.0),
    (0.0, 1.0),
    (0.25, 0.75),
    (0.6, 0.9),
    (0.05, 0.95),
    (0.9, 1.0),
];

fn kernel_certification(_ctx: &Ctx) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for &h in &[0.3, 0.5, 0.7] {
        let spec = KernelSpec::fbm(h)?;
        let mut worst: f64 = 0.0;
        for &(s, t) in &CERTIFICATION_PAIRS {
            let v = l2_increment(&spec, s, t, 1e-9)?;
            worst = worst.max((v - (t - s).powf(2.0 * h)).abs());
        }
        let mut r = TestReport::new("", "L2 increments of the kernel match |t - s|^{2H}")
            .param("kernel", format!("{spec}"))
            .param(
                "pairs",
                CERTIFICATION_PAIRS
                    .iter()
                    .flat_map(|p| [p.0, p.1])
                    .collect::<Vec<_>>(),
            );
        r.statistic = worst;
        r.pass = worst <= 1e-4;
        r.tolerance = Some(1e-4);
        r.n_samples = CERTIFICATION_PAIRS.len() as u64;
        out.push(r);
    }
    let half = KernelSpec::fbm(0.5)?;
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        for j in 0..10 {
            let (t, r) = (i as f64 / 10.0, (2 * j + 1) as f64 / 20.0);
            let a = eval_kernel(&half, t, r)?;
            let b = eval_kernel(&KernelSpec::BrownianIndicator, t, r)?;
            worst = worst.max((a - b).abs());
        }
    }
    let mut r = TestReport::new(
        "",
        "the H = 1/2 kernel equals the Brownian indicator on a 10 x 10 grid",
    );
    r.statistic = worst;
    r.pass = worst <= 1e-12;
    r.tolerance = Some(1e-12);
    r.n_samples = 100;
    out.push(r);
    Ok(out)
}

fn iterated_identities(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let law = InterarrivalLaw::exponential(1.0)?;
    let beta = 1e-3;
    let schedule = ScaleSchedule::fixed(beta)?;
    let one = Polynomial::constant(1.0);
    let tol = 1e-10;
    let mut out = Vec::new();

    let grid = TimeGrid::uniform(101)?;
    let fs: Vec<&dyn Integrand> = vec![&one; 4];
    let count = 100;
    let seed = ctx.sub(0);
    let errs = map_indexed(count, |i| {
        let fam = simulate_iterated(
            &law,
            1,
            &schedule,
            &fs,
            &grid,
            &mut StreamSet::for_path(seed, i),
            tol,
        )?;
        let x = fam.theta.running_integral(grid.points())?;
        let mut worst: f64 = 0.0;
        let mut fact = 1.0;
        for (k, level) in fam.levels.iter().enumerate() {
            fact *= (k + 1) as f64;
            for (y, xv) in level.values.iter().zip(&x) {
                worst = worst.max((y - xv.powi(k as i32 + 1) / fact).abs());
            }
        }
        Ok(worst)
    })?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let mut r = TestReport::new("", "with f_k = 1 the family equals x_n^k / k! for k <= 4")
        .param("beta", beta)
        .param("tol", tol)
        .with_seed(seed);
    r.statistic = worst;
    r.pass = worst <= 1e-8;
    r.tolerance = Some(1e-8);
    r.n_samples = count as u64;
    out.push(r);

    let ends = TimeGrid::from_points(vec![0.0, 1.0])?;
    let fs: Vec<&dyn Integrand> = vec![&one; 3];
    let n = ctx.size(10_000);
    let seed = ctx.sub(1);
    let vals = map_indexed(n, |i| {
        let fam = simulate_iterated(
            &law,
            1,
            &schedule,
            &fs,
            &ends,
            &mut StreamSet::for_path(seed, i),
            tol,
        )?;
        Ok([fam.levels[1].values[1], fam.levels[2].values[1]])
    })?;
    for (k, target, desc) in [
        (0, 0.75, "E[Y_2(1)^2] against E[W^4]/4 = 3/4"),
        (1, 15.0 / 36.0, "E[Y_3(1)^2] against E[W^6]/36 = 15/36"),
    ] {
        let sq: Vec<f64> = vals.iter().map(|v| v[k] * v[k]).collect();
        let (m, se) = mean_with_se(&sq)?;
        out.push(
            within_se_report(desc, m, se, target, 0.02, n)
                .with_seed(seed)
                .param("beta", beta),
        );
    }
    Ok(out)
}

fn domination(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let intervals = [(0.0, 0.5), (1.0, 1.5), (2.0, 3.0)];
    let mut out = Vec::new();
    for (j, law) in [
        InterarrivalLaw::UniformUnit,
        InterarrivalLaw::gamma(0.5, 2.0)?,
    ]
    .iter()
    .enumerate()
    {
        let gap_seed = ctx.sub(2 * j as u64);
        out.push(flagged_gap_ks(law, ctx.size(100_000), gap_seed)?);
        let seed = ctx.sub(2 * j as u64 + 1);
        let obs = map_indexed(ctx.size(100_000), |i| {
            domination_observation(law, &intervals, &mut StreamSet::for_path(seed, i))
        })?;
        out.push(domination_summary(law, &intervals, &obs, seed)?);
    }
    Ok(out)
}

fn moment_bound(ctx: &Ctx) -> Result<Vec<TestReport>> {
    let law = InterarrivalLaw::exponential(1.0)?;
    let betas = [1e-1, 1e-2, 1e-3, 1e-4];
    let fs = [
        Polynomial::constant(1.0),
        Polynomial::new(vec![0.0, 1.0]),
        Polynomial::new(vec![-1.0 / 3.0, 0.0, 1.0]),
    ];
    let n = ctx.size(10_000);
    let values = betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            map_indexed(n, |i| {
                moment_observation(
                    &law,
                    beta,
                    &fs,
                    &mut StreamSet::for_path(ctx.seed, (b as u64) << 32 | i),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![moment_ratio_summary(
        &law, &betas, &fs, &values, ctx.seed,
    )?])
}
