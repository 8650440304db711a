//! Estimators, goodness-of-fit tests and the numeric oracles used by the
//! verification suites.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::distributions::InterarrivalLaw;
use crate::paths::PathEnsemble;
use crate::quad;
use crate::renewal::simulate_coupled;
use crate::seed::StreamSet;
use crate::sign_kernel::{build_theta, normalization, Polynomial, ScaleSchedule};
use crate::special::{chi_square_sf, kolmogorov_sf};
use crate::{Error, Result};

/// Significance level shared by every suite.
pub const LEVEL: f64 = 1e-3;

/// Minimum expected count per retained chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Minimum sample size for the KS tests.
pub const KS_MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Int(u64),
    Num(f64),
    Text(String),
    List(Vec<f64>),
}

impl From<u64> for Param {
    fn from(v: u64) -> Self {
        Param::Int(v)
    }
}
impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as u64)
    }
}
impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Num(v)
    }
}
impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.into())
    }
}
impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Text(v)
    }
}
impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::List(v)
    }
}

/// Self-describing outcome of one statistical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub description: String,
    pub params: BTreeMap<String, Param>,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub seed: Option<u64>,
    pub n_samples: u64,
    pub tolerance: Option<f64>,
}

impl TestReport {
    pub fn new(suite: &str, description: &str) -> Self {
        TestReport {
            suite: suite.into(),
            description: description.into(),
            params: BTreeMap::new(),
            statistic: 0.0,
            p_value: None,
            pass: false,
            seed: None,
            n_samples: 0,
            tolerance: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_suite(mut self, suite: &str) -> Self {
        self.suite = suite.into();
        self
    }
}

/// Unbiased sample covariance and its standard error, the sample standard
/// deviation of the centred products over `√count`.
pub fn sample_covariance(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::invalid(
            "samples",
            format!("lengths differ: {} vs {}", x.len(), y.len()),
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / (nf - 1.0);
    let mp = prods.iter().sum::<f64>() / nf;
    let var_p = prods.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (nf - 1.0);
    Ok((cov, (var_p / nf).sqrt()))
}

/// `Cov(X_s, X_t)` over the ensemble with its standard error.
pub fn empirical_covariance(e: &PathEnsemble, s: f64, t: f64) -> Result<(f64, f64)> {
    sample_covariance(&e.marginal(s)?, &e.marginal(t)?)
}

/// Mean and its standard error.
pub fn mean_with_se(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let m = x.iter().sum::<f64>() / nf;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0);
    Ok((m, (v / nf).sqrt()))
}

/// Streaming covariance (Welford update, Chan merge).
///
/// Merging the same partial accumulators in the same order is bit-identical;
/// different merge trees agree to rounding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceAccumulator {
    pub count: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    /// `Σ (x - x̄)(y - ȳ)`.
    pub comoment: f64,
}

impl CovarianceAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dx = x - self.mean_x;
        self.mean_x += dx / n;
        self.mean_y += (y - self.mean_y) / n;
        self.comoment += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.comoment += other.comoment + dx * dy * na * nb / n;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.count += other.count;
    }

    pub fn covariance(&self) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.count as usize,
            });
        }
        Ok(self.comoment / (self.count as f64 - 1.0))
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("samples", format!("non-finite sample {v}")));
    }
    Ok(())
}

/// Kolmogorov–Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    check_finite(samples)?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic KS p-value with Stephens' finite-sample correction.
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d).clamp(0.0, 1.0)
}

/// One-sample two-sided KS test against a continuous `cdf` at level [`LEVEL`].
pub fn ks_test<F: Fn(f64) -> f64>(
    samples: &[f64],
    cdf: F,
    description: &str,
) -> Result<TestReport> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let d = ks_statistic(samples, cdf)?;
    let p = ks_p_value(d, samples.len() as f64);
    Ok(TestReport {
        statistic: d,
        p_value: Some(p),
        pass: p > LEVEL,
        n_samples: samples.len() as u64,
        tolerance: Some(LEVEL),
        ..TestReport::new("ks", description)
    })
}

/// Two-sample two-sided KS test at level [`LEVEL`].
pub fn ks_two_sample(a: &[f64], b: &[f64], description: &str) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: KS_MIN_SAMPLES,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let p = ks_p_value(d, n * m / (n + m));
    Ok(TestReport {
        statistic: d,
        p_value: Some(p),
        pass: p > LEVEL,
        n_samples: (xs.len() + ys.len()) as u64,
        tolerance: Some(LEVEL),
        ..TestReport::new("ks_two_sample", description)
    })
}

/// Merge adjacent cells left to right until each expected count reaches
/// [`MIN_EXPECTED`]; a short remainder joins the last retained cell.
fn pool_cells(observed: &[u64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi as f64;
        e += ei;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o;
            *le += e;
        } else {
            obs.push(o);
            exp.push(e);
        }
    }
    (obs, exp)
}

/// Pearson goodness of fit of `counts` to the cell probabilities `pmf`
/// (same length, summing to 1), with tail pooling.
pub fn chi_square_pmf_test(counts: &[u64], pmf: &[f64], description: &str) -> Result<TestReport> {
    if counts.len() != pmf.len() {
        return Err(Error::invalid(
            "pmf",
            format!("{} cells vs {} counts", pmf.len(), counts.len()),
        ));
    }
    let total_p: f64 = pmf.iter().sum();
    if pmf.iter().any(|p| !(*p >= 0.0)) || (total_p - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "pmf",
            format!("must be non-negative and sum to 1, sums to {total_p}"),
        ));
    }
    let n: u64 = counts.iter().sum();
    let expected: Vec<f64> = pmf.iter().map(|p| p * n as f64).collect();
    let (obs, exp) = pool_cells(counts, &expected);
    if obs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "only {} cell(s) left after pooling {} observations",
            obs.len(),
            n
        )));
    }
    let stat: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = (obs.len() - 1) as f64;
    let p = chi_square_sf(stat, dof);
    Ok(TestReport {
        statistic: stat,
        p_value: Some(p),
        pass: p > LEVEL,
        n_samples: n,
        tolerance: Some(LEVEL),
        ..TestReport::new("chi_square_pmf", description)
            .param("cells", obs.len())
            .param("dof", dof)
    })
}

fn merge_lines(table: &mut Vec<Vec<f64>>, from: usize, into: usize) {
    let src = table.remove(from);
    let into = if into > from { into - 1 } else { into };
    for (a, b) in table[into].iter_mut().zip(src) {
        *a += b;
    }
}

fn transpose(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..t[0].len())
        .map(|j| t.iter().map(|r| r[j]).collect())
        .collect()
}

/// Pearson test of independence on a contingency table of ordered
/// categories. Empty rows and columns are dropped; while some expected count
/// is below [`MIN_EXPECTED`], the sparsest row or column is merged into its
/// sparser neighbour.
pub fn chi_square_independence(table: &[Vec<u64>], description: &str) -> Result<TestReport> {
    let width = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != width) {
        return Err(Error::Degenerate("ragged contingency table".into()));
    }
    let mut t: Vec<Vec<f64>> = table
        .iter()
        .filter(|r| r.iter().any(|&c| c > 0))
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    if t.is_empty() {
        return Err(Error::Degenerate("empty contingency table".into()));
    }
    t = transpose(&t)
        .into_iter()
        .filter(|c| c.iter().any(|&v| v > 0.0))
        .collect();
    t = transpose(&t);
    let n: f64 = t.iter().flatten().sum();
    loop {
        if t.len() < 2 || t[0].len() < 2 {
            return Err(Error::Degenerate(format!(
                "table reduced to {}x{} after pooling",
                t.len(),
                t.first().map_or(0, |r| r.len())
            )));
        }
        let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..t[0].len())
            .map(|j| t.iter().map(|r| r[j]).sum())
            .collect();
        let (ri, rmin) = argmin(&rows);
        let (ci, cmin) = argmin(&cols);
        if rmin * cmin / n >= MIN_EXPECTED {
            break;
        }
        // Merge whichever margin is sparser relative to the table size.
        if rmin / n <= cmin / n {
            let nb = sparser_neighbour(&rows, ri);
            merge_lines(&mut t, ri, nb);
        } else {
            let nb = sparser_neighbour(&cols, ci);
            let mut tt = transpose(&t);
            merge_lines(&mut tt, ci, nb);
            t = transpose(&tt);
        }
    }
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..t[0].len())
        .map(|j| t.iter().map(|r| r[j]).sum())
        .collect();
    let mut stat = 0.0;
    for (i, r) in t.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            stat += (o - e) * (o - e) / e;
        }
    }
    let dof = ((t.len() - 1) * (t[0].len() - 1)) as f64;
    let p = chi_square_sf(stat, dof);
    Ok(TestReport {
        statistic: stat,
        p_value: Some(p),
        pass: p > LEVEL,
        n_samples: n as u64,
        tolerance: Some(LEVEL),
        ..TestReport::new("chi_square_independence", description)
            .param("rows", t.len())
            .param("cols", t[0].len())
            .param("dof", dof)
    })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty")
}

fn sparser_neighbour(totals: &[f64], i: usize) -> usize {
    match (i.checked_sub(1), (i + 1 < totals.len()).then_some(i + 1)) {
        (Some(l), Some(r)) => {
            if totals[l] <= totals[r] {
                l
            } else {
                r
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => i,
    }
}

/// `E[(∫ f θ_n)²]` for Exponential(`rate`) inter-arrivals:
/// `(2/G²) ∬_{x₁<x₂} f(x₁) f(x₂) e^{-rate (x₂-x₁)/β} dx₁ dx₂`.
///
/// Nested adaptive quadrature in the lag `w = x₂ - x₁`; the inner integral is
/// truncated where the exponential falls below `e^{-40}`.
pub fn pair_moment_oracle_exponential<F: Fn(f64) -> f64>(
    f: F,
    rate: f64,
    beta_n: f64,
    tol: f64,
) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(
            "rate",
            format!("must be positive, got {rate}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    let law = InterarrivalLaw::exponential(rate)?;
    let g2 = normalization(&law, beta_n)?.powi(2);
    let c = rate / beta_n;
    let reach = 40.0 / c;
    let scale = 2.0 / g2;
    // The inner integral is at most 1/c in size; split the budget evenly.
    let inner_tol = 0.5 * tol / scale;
    let mut failure = None;
    let outer = quad::integrate(
        |x2| {
            let fx2 = f(x2);
            if fx2 == 0.0 {
                return 0.0;
            }
            let top = x2.min(reach);
            let inner = quad::integrate(|w| f(x2 - w) * (-c * w).exp(), 0.0, top, inner_tol);
            match inner {
                Ok(v) => fx2 * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        0.5 * tol / scale,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(scale * outer?)
}

/// Closed form of [`pair_moment_oracle_exponential`] for `f ≡ 1`.
pub fn pair_moment_constant(rate: f64, beta_n: f64) -> f64 {
    let a = rate / beta_n;
    // (2/G²)(β/λ)²(e^{-λ/β} - 1 + λ/β) with 2/G² = λ/β.
    ((-a).exp_m1() + a) / a
}

/// Per-path record for the domination suite: for each interval `(s, t]`,
/// whether the renewal process and the flagged Poisson subset have no point there.
pub fn domination_observation(
    law: &InterarrivalLaw,
    intervals: &[(f64, f64)],
    streams: &mut StreamSet,
) -> Result<Vec<(bool, bool)>> {
    let horizon = intervals.iter().map(|iv| iv.1).fold(0.0, f64::max);
    let path = simulate_coupled(law, horizon, streams)?;
    intervals
        .iter()
        .map(|&(s, t)| {
            let l = path.base.count(t)? - path.base.count(s)?;
            let f = path.flagged_count(t)? - path.flagged_count(s)?;
            Ok((l == 0, f == 0))
        })
        .collect()
}

fn check_intervals(intervals: &[(f64, f64)]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::invalid("intervals", "need at least one interval"));
    }
    if let Some(&(s, t)) = intervals.iter().find(|(s, t)| !(*s >= 0.0 && t > s)) {
        return Err(Error::invalid(
            "intervals",
            format!("({s}, {t}] must satisfy 0 <= s < t"),
        ));
    }
    Ok(())
}

/// Verdict of the domination suite from per-path observations.
///
/// Per interval `(s, t]`: `P̂{L(t) - L(s) = 0} ≤ P̂{N(t) - N(s) = 0} + 3 s.e.`
/// (paired difference) and `P̂{L(t) - L(s) = 0} ≤ e^{-λ(t-s)} + 3 s.e.`.
pub fn domination_summary(
    law: &InterarrivalLaw,
    intervals: &[(f64, f64)],
    observations: &[Vec<(bool, bool)>],
    seed: u64,
) -> Result<TestReport> {
    check_intervals(intervals)?;
    let lambda = law.hazard_floor()?;
    let n = observations.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mut report = TestReport::new(
        "domination",
        "renewal increments are empty no more often than the embedded Poisson(λ) increments",
    )
    .param("law", format!("{law}"))
    .param("lambda", lambda);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for (k, &(s, t)) in intervals.iter().enumerate() {
        let diffs: Vec<f64> = observations
            .iter()
            .map(|o| o[k].0 as u8 as f64 - o[k].1 as u8 as f64)
            .collect();
        let p_l = observations.iter().filter(|o| o[k].0).count() as f64 / nf;
        let p_f = observations.iter().filter(|o| o[k].1).count() as f64 / nf;
        let (d, se_d) = mean_with_se(&diffs)?;
        let se_l = (p_l * (1.0 - p_l) / nf).sqrt();
        let bound = (-lambda * (t - s)).exp();
        let ok_pair = d <= 3.0 * se_d;
        let ok_bound = p_l <= bound + 3.0 * se_l;
        pass &= ok_pair && ok_bound;
        worst = worst.max(p_l - p_f).max(p_l - bound);
        report = report.param(
            &format!("interval_{k}"),
            vec![s, t, p_l, p_f, bound, se_d, se_l],
        );
    }
    report.params.insert(
        "interval_fields".into(),
        Param::Text(
            "s, t, P(L inc = 0), P(flagged inc = 0), exp(-lambda (t-s)), s.e. paired, s.e. L"
                .into(),
        ),
    );
    report.statistic = worst;
    report.pass = pass;
    report.seed = Some(seed);
    report.n_samples = n as u64;
    report.tolerance = Some(3.0);
    Ok(report)
}

/// Sequential domination suite over `n_samples` coupled paths.
pub fn domination_suite(
    law: &InterarrivalLaw,
    intervals: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> Result<TestReport> {
    check_intervals(intervals)?;
    let obs = (0..n_samples as u64)
        .map(|i| domination_observation(law, intervals, &mut StreamSet::for_path(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    domination_summary(law, intervals, &obs, seed)
}

/// The first `count` gaps between flagged epochs of one long coupled path
/// (the first gap measured from 0).
pub fn flagged_gaps(law: &InterarrivalLaw, count: usize, seed: u64) -> Result<Vec<f64>> {
    let lambda = law.hazard_floor()?;
    let c = count as f64;
    let mut horizon = (c + 10.0 * c.sqrt() + 10.0) / lambda;
    loop {
        // The simulation is sequential, so a longer horizon extends the same path.
        let path = simulate_coupled(law, horizon, &mut StreamSet::new(seed))?;
        let times: Vec<f64> = path.flagged_times().collect();
        if times.len() >= count {
            let mut prev = 0.0;
            return Ok(times[..count]
                .iter()
                .map(|&x| {
                    let g = x - prev;
                    prev = x;
                    g
                })
                .collect());
        }
        horizon *= 2.0;
    }
}

/// KS test of the flagged gaps against Exponential(λ).
pub fn flagged_gap_ks(law: &InterarrivalLaw, count: usize, seed: u64) -> Result<TestReport> {
    let lambda = law.hazard_floor()?;
    let gaps = flagged_gaps(law, count, seed)?;
    let r = ks_test(
        &gaps,
        |x| -(-lambda * x).exp_m1(),
        "flagged epochs form a Poisson process",
    )?;
    Ok(r.with_suite("flagged_gaps")
        .with_seed(seed)
        .param("law", format!("{law}"))
        .param("lambda", lambda))
}

/// `∫ f θ_n` for each `f`, on one realization of `θ_n` with scale `beta`.
pub fn moment_observation(
    law: &InterarrivalLaw,
    beta: f64,
    fs: &[Polynomial],
    streams: &mut StreamSet,
) -> Result<Vec<f64>> {
    let theta = build_theta(law, 1, &ScaleSchedule::fixed(beta)?, streams)?;
    Ok(fs.iter().map(|f| theta.integrate_primitive(f)).collect())
}

/// Fourth-moment ratios `Ê[(∫fθ)⁴] / (∫f²)²` per scale and test function.
///
/// `values[b][path][f]`. The monitor raises an alarm for a test function whose
/// ratio increases monotonically along `betas` and ends more than 50% above
/// where it started. A step counts as an increase only when it exceeds three
/// combined standard errors, so Monte Carlo noise around a plateau does not
/// read as growth.
pub fn moment_ratio_summary(
    law: &InterarrivalLaw,
    betas: &[f64],
    fs: &[Polynomial],
    values: &[Vec<Vec<f64>>],
    seed: u64,
) -> Result<TestReport> {
    if betas.len() != values.len() || betas.len() < 2 {
        return Err(Error::invalid(
            "betas",
            "need at least two scales with one sample set each",
        ));
    }
    let mut report = TestReport::new(
        "moment_bound",
        "fourth moment of the sign-kernel integral stays bounded by a multiple of the squared L2 norm",
    )
    .param("law", format!("{law}"))
    .param("betas", betas.to_vec());
    let mut pass = true;
    let mut largest: f64 = 0.0;
    let mut n_samples = 0;
    for (j, f) in fs.iter().enumerate() {
        let norm = f.l2_norm_sq();
        let (ratios, ses): (Vec<f64>, Vec<f64>) = values
            .iter()
            .map(|paths| {
                let fourth: Vec<f64> = paths.iter().map(|v| v[j].powi(4)).collect();
                let (m4, se) = mean_with_se(&fourth)?;
                Ok((m4 / (norm * norm), se / (norm * norm)))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        n_samples = values.iter().map(|v| v.len() as u64).sum();
        let monotone =
            (1..ratios.len()).all(|b| ratios[b] - ratios[b - 1] > 3.0 * ses[b].hypot(ses[b - 1]));
        let growth = ratios[ratios.len() - 1] / ratios[0];
        let alarm = monotone && growth > 1.5;
        pass &= !alarm;
        largest = largest.max(ratios.iter().copied().fold(0.0, f64::max));
        report = report
            .param(&format!("ratios[{f}]"), ratios)
            .param(&format!("ratio_se[{f}]"), ses);
    }
    report.statistic = largest;
    report.pass = pass;
    report.seed = Some(seed);
    report.n_samples = n_samples;
    report.tolerance = Some(1.5);
    Ok(report)
}

/// Sequential moment-bound monitor with `samples` paths per scale.
pub fn moment_ratio_monitor(
    law: &InterarrivalLaw,
    betas: &[f64],
    fs: &[Polynomial],
    samples: usize,
    seed: u64,
) -> Result<TestReport> {
    let values = betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            (0..samples as u64)
                .map(|i| {
                    let mut streams = StreamSet::for_path(seed, (b as u64) << 32 | i);
                    moment_observation(law, beta, fs, &mut streams)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    moment_ratio_summary(law, betas, fs, &values, seed)
}

/// Standard normal CDF, for KS tests against `N(0, σ²)` by rescaling.
pub fn normal_cdf_scaled(x: f64, sd: f64) -> f64 {
    crate::special::normal_cdf(x / sd)
}

impl core::fmt::Display for TestReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] {}: statistic {:.6e}",
            self.suite, self.statistic
        )?;
        if let Some(p) = self.p_value {
            write!(f, ", p = {p:.4e}")?;
        }
        write!(f, ", n = {}", self.n_samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            })
            .collect()
    }

    #[test]
    fn covariance_of_constant_paths_is_zero() {
        let z = vec![0.0; 50];
        assert_eq!(sample_covariance(&z, &z).unwrap(), (0.0, 0.0));
        assert!(matches!(
            sample_covariance(&[1.0], &[1.0]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn accumulator_merge_matches_two_pass() {
        let x = normals(1, 1000, 0.3);
        let y: Vec<f64> = x
            .iter()
            .zip(normals(2, 1000, 0.0))
            .map(|(a, b)| 0.5 * a + b)
            .collect();
        let (two_pass, _) = sample_covariance(&x, &y).unwrap();
        let mut parts = [CovarianceAccumulator::default(); 4];
        for (i, (a, b)) in x.iter().zip(&y).enumerate() {
            parts[i % 4].push(*a, *b);
        }
        let mut left = parts[0];
        for p in &parts[1..] {
            left.merge(p);
        }
        let mut right = parts[3];
        for p in parts[..3].iter().rev() {
            right.merge(p);
        }
        assert!((left.covariance().unwrap() - two_pass).abs() < 1e-12);
        assert!((right.covariance().unwrap() - two_pass).abs() < 1e-12);
        let mut again = parts[0];
        for p in &parts[1..] {
            again.merge(p);
        }
        assert_eq!(again, left);
    }

    #[test]
    fn ks_null_power_and_degenerate() {
        let x = normals(3, 10_000, 0.0);
        assert!(ks_test(&x, normal_cdf, "null").unwrap().pass);
        let shifted = normals(4, 10_000, 0.5);
        let r = ks_test(&shifted, normal_cdf, "shifted").unwrap();
        assert!(r.p_value.unwrap() < 1e-3);
        let constant = vec![0.0; 200];
        assert!(
            ks_test(&constant, normal_cdf, "constant")
                .unwrap()
                .statistic
                >= 0.5
        );
        assert!(ks_test(&x[..50], normal_cdf, "few").is_err());
    }

    #[test]
    fn ks_matches_reference_statistic() {
        // Midpoint lattice against the uniform law: D = 1/(2n).
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.005).abs() < 1e-15);
    }

    #[test]
    fn two_sample_ks() {
        let a = normals(5, 5000, 0.0);
        let b = normals(6, 5000, 0.0);
        assert!(ks_two_sample(&a, &b, "same").unwrap().pass);
        let c = normals(7, 5000, 0.3);
        assert!(!ks_two_sample(&a, &c, "shift").unwrap().pass);
    }

    #[test]
    fn chi_square_exact_proportions_and_pooling() {
        let pmf = [0.25, 0.5, 0.25];
        let r = chi_square_pmf_test(&[250, 500, 250], &pmf, "exact").unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
        let pmf = [0.001, 0.499, 0.499, 0.001];
        let r = chi_square_pmf_test(&[1, 499, 499, 1], &pmf, "pooled").unwrap();
        assert_eq!(r.params["cells"], Param::Int(2));
        assert!(chi_square_pmf_test(&[3, 0], &[0.5, 0.5], "tiny").is_err());
        assert!(chi_square_pmf_test(&[3, 0], &[0.5, 0.6], "bad").is_err());
    }

    #[test]
    fn chi_square_tail_agrees_with_statrs() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let counts = [90, 210, 300, 220, 180];
        let pmf = [0.1, 0.2, 0.3, 0.2, 0.2];
        let r = chi_square_pmf_test(&counts, &pmf, "ref").unwrap();
        let want = 1.0 - ChiSquared::new(4.0).unwrap().cdf(r.statistic);
        assert!((r.p_value.unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn independence_of_product_table() {
        let rows = [10u64, 20, 30];
        let cols = [6u64, 12, 18, 24];
        let table: Vec<Vec<u64>> = rows
            .iter()
            .map(|r| cols.iter().map(|c| r * c).collect())
            .collect();
        let r = chi_square_independence(&table, "product").unwrap();
        assert!(r.statistic.abs() < 1e-12);
        let dependent = vec![vec![100, 0], vec![0, 100]];
        assert!(!chi_square_independence(&dependent, "diag").unwrap().pass);
        assert!(chi_square_independence(&[vec![5, 5]], "one row").is_err());
    }

    #[test]
    fn independence_pools_sparse_lines() {
        let table = vec![vec![50, 50, 1], vec![50, 50, 1], vec![1, 0, 0]];
        let r = chi_square_independence(&table, "sparse").unwrap();
        assert_eq!(r.params["rows"], Param::Int(2));
        assert_eq!(r.params["cols"], Param::Int(2));
    }

    #[test]
    fn pair_moment_oracle_examples() {
        assert_eq!(
            pair_moment_oracle_exponential(|_| 0.0, 1.0, 0.05, 1e-10).unwrap(),
            0.0
        );
        for &(rate, beta) in &[(1.0, 0.05), (2.0, 0.01), (1.0, 0.5)] {
            let q = pair_moment_oracle_exponential(|_| 1.0, rate, beta, 1e-10).unwrap();
            assert!((q - pair_moment_constant(rate, beta)).abs() < 1e-10, "{q}");
        }
        let q = pair_moment_oracle_exponential(|_| 1.0, 1.0, 1e-4, 1e-10).unwrap();
        assert!((0.99..=1.01).contains(&q));
        // f(x) = x: (λ/β)∬ x₁x₂ e^{-a(x₂-x₁)} against a brute-force double sum.
        let (rate, beta) = (1.0, 0.05);
        let a = rate / beta;
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut brute = 0.0;
        for i in 0..m {
            let x2 = (i as f64 + 0.5) * h;
            // Inner integral ∫_0^{x2} x1 e^{-a(x2-x1)} in closed form.
            let inner = (x2 * a - 1.0 + (-a * x2).exp()) / (a * a);
            brute += x2 * inner * h;
        }
        brute *= a;
        let q = pair_moment_oracle_exponential(|x| x, rate, beta, 1e-10).unwrap();
        assert!((q - brute).abs() < 1e-6, "{q} vs {brute}");
    }

    #[test]
    fn domination_examples() {
        let unif = InterarrivalLaw::UniformUnit;
        let r = domination_suite(&unif, &[(0.0, 0.5), (1.0, 1.5)], 4000, 3).unwrap();
        assert!(r.pass, "{r:?}");
        let Param::List(first) = &r.params["interval_0"] else {
            panic!()
        };
        // P{U > 0.5} = 0.5.
        assert!((first[2] - 0.5).abs() < 4.0 * (0.25f64 / 4000.0).sqrt());
        let exp = InterarrivalLaw::exponential(2.0).unwrap();
        let r = domination_suite(&exp, &[(0.0, 0.5)], 4000, 4).unwrap();
        let Param::List(v) = &r.params["interval_0"] else {
            panic!()
        };
        // Every epoch is flagged: the paired difference vanishes.
        assert_eq!(v[2], v[3]);
        assert!(domination_suite(
            &InterarrivalLaw::geometric(0.5).unwrap(),
            &[(0.0, 1.0)],
            10,
            1
        )
        .is_err());
    }

    #[test]
    fn flagged_gaps_are_exponential() {
        let law = InterarrivalLaw::gamma(0.5, 2.0).unwrap();
        let r = flagged_gap_ks(&law, 5000, 8).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(
            flagged_gaps(&law, 300, 8).unwrap()[..],
            flagged_gaps(&law, 5000, 8).unwrap()[..300]
        );
    }

    #[test]
    fn moment_monitor_flags_growth_only() {
        let fs = [Polynomial::constant(1.0)];
        let flat = vec![vec![vec![1.0]; 4], vec![vec![1.1]; 4]];
        let law = InterarrivalLaw::exponential(1.0).unwrap();
        assert!(
            moment_ratio_summary(&law, &[0.1, 0.01], &fs, &flat, 0)
                .unwrap()
                .pass
        );
        let growing = vec![vec![vec![1.0]; 4], vec![vec![1.2]; 4], vec![vec![1.4]; 4]];
        assert!(
            !moment_ratio_summary(&law, &[0.1, 0.01, 0.001], &fs, &growing, 0)
                .unwrap()
                .pass
        );
        // Growth then a plateau whose last step is within noise.
        let noisy = |a: f64, b: f64| vec![vec![a], vec![b], vec![a], vec![b]];
        let plateau = vec![vec![vec![1.0]; 4], noisy(1.1, 1.3), noisy(1.12, 1.3)];
        assert!(
            moment_ratio_summary(&law, &[0.1, 0.01, 0.001], &fs, &plateau, 0)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn report_serialises_with_flat_params() {
        let r = TestReport::new("demo", "d")
            .param("n", 3usize)
            .param("x", 0.5)
            .param("law", "exp:1");
        let s = alloc::format!("{r}");
        assert!(s.contains("FAIL"));
        assert_eq!(r.params.len(), 3);
    }
}
