//! Sample paths of `x_n`, `Y^n`, the iterated family `Y_1^n, ..., Y_l^n`, and
//! exact Gaussian reference paths, plus seeded ensembles of them.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::InterarrivalLaw;
use crate::gauss_kernels::{self, fbm_covariance, KernelSpec};
use crate::quad::{gauss_legendre, legendre_all};
use crate::seed::{path_seed, StreamSet};
use crate::sign_kernel::{build_theta, Polynomial, ScaleSchedule, SegmentIntegrand, StepSign};
use crate::{Error, Result};

/// Tolerances at or above this are met by telescoping the tabulated fBm
/// primitive; tighter ones integrate every segment adaptively.
pub const TABULATED_TOL: f64 = 1e-10;

/// Gauss–Legendre points per refined segment in the iterated recursion.
pub const ITERATED_ORDER: usize = 5;

/// Largest grid accepted by the covariance factorization.
pub const MAX_EXACT_GRID: usize = 1000;

/// Diagonal regularisation added before factorizing a covariance matrix.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Strictly increasing points of `[0, 1]` including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// `count` equally spaced points `0, 1/(count-1), ..., 1`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(
                "grid",
                format!("a uniform grid needs at least 2 points, got {count}"),
            ));
        }
        let last = (count - 1) as f64;
        let points = (0..count)
            .map(|i| if i + 1 == count { 1.0 } else { i as f64 / last })
            .collect();
        Ok(TimeGrid { points })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.first() != Some(&0.0) || points.last() != Some(&1.0) {
            return Err(Error::invalid(
                "grid",
                "points must start at 0 and end at 1",
            ));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "grid",
                format!(
                    "points must be strictly increasing, found {} then {}",
                    w[0], w[1]
                ),
            ));
        }
        Ok(TimeGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the grid point equal to `t` (up to 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.points.partition_point(|&p| p < t - 1e-12);
        (i < self.points.len() && (self.points[i] - t).abs() <= 1e-12).then_some(i)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::from_points(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessTag {
    Xn,
    Yn,
    Iterated,
    ExactBm,
    ExactFbm,
}

impl fmt::Display for ProcessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessTag::Xn => "xn",
            ProcessTag::Yn => "yn",
            ProcessTag::Iterated => "iterated",
            ProcessTag::ExactBm => "exact_bm",
            ProcessTag::ExactFbm => "exact_fbm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub process: ProcessTag,
    /// Level `k` within an iterated family.
    pub level: Option<usize>,
    pub n: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub meta: PathMeta,
}

impl SamplePath {
    /// Value at grid point `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.grid.index_of(t).map(|i| self.values[i])
    }
}

/// `x_n(t) = ∫_0^t θ_n` on the grid.
pub fn simulate_xn(
    law: &InterarrivalLaw,
    n: u64,
    schedule: &ScaleSchedule,
    grid: &TimeGrid,
    streams: &mut StreamSet,
) -> Result<SamplePath> {
    let theta = build_theta(law, n, schedule, streams)?;
    Ok(SamplePath {
        grid: grid.clone(),
        values: theta.running_integral(grid.points())?,
        meta: PathMeta {
            process: ProcessTag::Xn,
            level: None,
            n: Some(n),
            seed: streams.seed(),
        },
    })
}

/// `Y^n_t = ∫_0^1 K(t, x) θ_n(x) dx` for one realization of `θ_n`.
pub fn yn_values(
    theta: &StepSign,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Vec<f64>> {
    struct Slice<'a> {
        kernel: &'a KernelSpec,
        t: f64,
        tol: f64,
    }
    impl SegmentIntegrand for Slice<'_> {
        fn integral(&self, a: f64, b: f64) -> Result<f64> {
            gauss_kernels::segment_integral(self.kernel, self.t, a, b, self.tol)
        }
    }
    let adaptive = matches!(kernel, KernelSpec::Fbm(_)) && tol < TABULATED_TOL;
    grid.points()
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                Ok(0.0)
            } else if adaptive {
                theta
                    .restrict(0.0, t)?
                    .integrate_against(&Slice { kernel, t, tol })
            } else {
                Ok(theta.integrate_primitive(&kernel.at(t)))
            }
        })
        .collect()
}

/// `Y^n` on the grid, integrating `K(t, ·)` over each constant segment of `θ_n`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_yn(
    law: &InterarrivalLaw,
    n: u64,
    schedule: &ScaleSchedule,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    streams: &mut StreamSet,
    tol: f64,
) -> Result<SamplePath> {
    check_tol(tol)?;
    let theta = build_theta(law, n, schedule, streams)?;
    Ok(SamplePath {
        grid: grid.clone(),
        values: yn_values(&theta, kernel, grid, tol)?,
        meta: PathMeta {
            process: ProcessTag::Yn,
            level: None,
            n: Some(n),
            seed: streams.seed(),
        },
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "tol",
            format!("must be finite and positive, got {tol}"),
        ))
    }
}

/// A deterministic integrand `f_k` of the iterated recursion, evaluated pointwise.
pub trait Integrand: Sync {
    fn value(&self, x: f64) -> f64;
    fn label(&self) -> String;
}

impl Integrand for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn label(&self) -> String {
        format!("{self}")
    }
}

/// A closure with a human-readable label.
pub struct Labeled<F>(pub String, pub F);

impl<F: Fn(f64) -> f64 + Sync> Integrand for Labeled<F> {
    fn value(&self, x: f64) -> f64 {
        (self.1)(x)
    }
    fn label(&self) -> String {
        self.0.clone()
    }
}

/// `Y_1^n, ..., Y_l^n` driven by one realization of `θ_n`.
///
/// Each level is stored densely as a Legendre series of degree
/// [`ITERATED_ORDER`] on every segment of the flip-refined grid.
#[derive(Debug, Clone)]
pub struct IteratedFamily {
    pub levels: Vec<SamplePath>,
    pub integrands: Vec<String>,
    pub theta: StepSign,
    breaks: Vec<f64>,
    /// `[level][segment][ITERATED_ORDER + 1]`, flattened.
    coeffs: Vec<f64>,
}

const STRIDE: usize = ITERATED_ORDER + 1;

impl IteratedFamily {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Segment breakpoints: the grid refined by every flip of `θ_n` (and by
    /// any bisections).
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// `Y_k^n(x)` for `k ≥ 1` at any `x ∈ [0, 1]`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k == 0 || k > self.depth() {
            return Err(Error::invalid(
                "k",
                format!("level must lie in 1..={}, got {k}", self.depth()),
            ));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid("x", format!("must lie in [0, 1], got {x}")));
        }
        let segs = self.breaks.len() - 1;
        let j = self.breaks.partition_point(|&b| b <= x).clamp(1, segs) - 1;
        let (a, b) = (self.breaks[j], self.breaks[j + 1]);
        let s = (2.0 * x - a - b) / (b - a);
        let off = ((k - 1) * segs + j) * STRIDE;
        let mut p = [0.0; STRIDE];
        legendre_all(ITERATED_ORDER, s, &mut p);
        Ok(self.coeffs[off..off + STRIDE]
            .iter()
            .zip(&p)
            .map(|(c, p)| c * p)
            .sum())
    }
}

struct LegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `P_j(node_i)` for `j ≤ ITERATED_ORDER`, row per node.
    basis: Vec<[f64; STRIDE]>,
}

impl LegendreRule {
    fn new() -> Self {
        let (nodes, weights) = gauss_legendre(ITERATED_ORDER);
        let basis = nodes
            .iter()
            .map(|&x| {
                let mut p = [0.0; STRIDE];
                legendre_all(ITERATED_ORDER, x, &mut p);
                p
            })
            .collect();
        LegendreRule {
            nodes,
            weights,
            basis,
        }
    }
}

/// Integrate one segment for every level.
///
/// `start[k]` holds `Y_k` at the left end (index 0 is `Y_0 ≡ 1`). Writes the
/// series of `Y_1..Y_l` into `out` and returns the largest error estimate.
fn integrate_segment(
    rule: &LegendreRule,
    integrands: &[&dyn Integrand],
    a: f64,
    b: f64,
    slope: f64,
    start: &[f64],
    out: &mut [[f64; STRIDE]],
) -> f64 {
    let m = ITERATED_ORDER;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut worst: f64 = 0.0;
    for (k, f) in integrands.iter().enumerate() {
        // g = f_k · Y_{k-1} at the nodes.
        let mut legendre = [0.0; STRIDE];
        for i in 0..m {
            let prev = if k == 0 {
                1.0
            } else {
                out[k - 1]
                    .iter()
                    .zip(&rule.basis[i])
                    .map(|(c, p)| c * p)
                    .sum()
            };
            let g = f.value(mid + half * rule.nodes[i]) * prev;
            for (j, l) in legendre.iter_mut().take(m).enumerate() {
                *l += (2 * j + 1) as f64 * 0.5 * rule.weights[i] * g * rule.basis[i][j];
            }
        }
        // Next-coefficient estimate: Legendre coefficients of a smooth g decay
        // geometrically, so |a_m| ≈ a_{m-1}² / |a_{m-2}|, capped by |a_{m-1}|.
        let (last, prev) = (legendre[m - 1].abs(), legendre[m - 2].abs());
        let next = if prev > last {
            last * last / prev
        } else {
            last
        };
        worst = worst.max((slope * half * next).abs());
        // ∫_{-1}^s P_0 = P_0 + P_1; ∫_{-1}^s P_j = (P_{j+1} - P_{j-1}) / (2j+1).
        let mut y = [0.0; STRIDE];
        y[0] += legendre[0];
        y[1] += legendre[0];
        for j in 1..m {
            let c = legendre[j] / (2 * j + 1) as f64;
            y[j + 1] += c;
            y[j - 1] -= c;
        }
        for c in y.iter_mut() {
            *c *= slope * half;
        }
        y[0] += start[k + 1];
        out[k] = y;
    }
    worst
}

/// Iterated integrals `Y_k^n(t) = ∫_0^t f_k Y_{k-1}^n θ_n`, `Y_0 ≡ 1`,
/// `k = 1..=integrands.len()`, all driven by the same `θ_n`.
///
/// Each refined segment carries a fixed-order Gauss–Legendre rule; a segment
/// whose Legendre tail signals an error above `tol` is bisected once, and an
/// error above `tol` after bisection is reported.
pub fn simulate_iterated(
    law: &InterarrivalLaw,
    n: u64,
    schedule: &ScaleSchedule,
    integrands: &[&dyn Integrand],
    grid: &TimeGrid,
    streams: &mut StreamSet,
    tol: f64,
) -> Result<IteratedFamily> {
    let theta = build_theta(law, n, schedule, streams)?;
    iterated_from_theta(theta, integrands, grid, tol, streams.seed())
}

/// [`simulate_iterated`] for a given realization of `θ_n`.
pub fn iterated_from_theta(
    theta: StepSign,
    integrands: &[&dyn Integrand],
    grid: &TimeGrid,
    tol: f64,
    seed: u64,
) -> Result<IteratedFamily> {
    check_tol(tol)?;
    let l = integrands.len();
    if l == 0 {
        return Err(Error::invalid("integrands", "need at least one level"));
    }
    if theta.start != 0.0 || theta.end != 1.0 {
        return Err(Error::invalid("theta", "must be defined on [0, 1]"));
    }
    let rule = LegendreRule::new();
    // Refinement of the grid by the flip points.
    let mut nodes = Vec::with_capacity(grid.len() + theta.flip_points.len());
    let (mut gi, mut fi) = (0, 0);
    let (g, fl) = (grid.points(), &theta.flip_points);
    while gi < g.len() || fi < fl.len() {
        let next = match (g.get(gi), fl.get(fi)) {
            (Some(&x), Some(&y)) if x <= y => {
                gi += 1;
                if x == y {
                    fi += 1;
                }
                x
            }
            (_, Some(&y)) => {
                fi += 1;
                y
            }
            (Some(&x), None) => {
                gi += 1;
                x
            }
            (None, None) => unreachable!(),
        };
        nodes.push(next);
    }

    let mut breaks = Vec::with_capacity(nodes.len() + 8);
    breaks.push(0.0);
    let mut segs: Vec<[f64; STRIDE]> = Vec::with_capacity(l * nodes.len());
    let mut per_level: Vec<Vec<[f64; STRIDE]>> = vec![Vec::with_capacity(nodes.len()); l];
    let mut values = vec![Vec::with_capacity(grid.len()); l];
    let mut state = vec![0.0; l + 1];
    state[0] = 1.0;
    for v in values.iter_mut() {
        v.push(0.0);
    }
    let mut gridx = 1;
    let mut flip = 0;
    let mut sign = theta.initial_sign as f64;
    let mut out = vec![[0.0; STRIDE]; l];
    let mut halves = vec![[0.0; STRIDE]; l];
    let mut mid_state = vec![0.0; l + 1];
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        while flip < fl.len() && fl[flip] <= a {
            sign = -sign;
            flip += 1;
        }
        let slope = sign * theta.amplitude;
        let err = integrate_segment(&rule, integrands, a, b, slope, &state, &mut out);
        if err > tol {
            let m = 0.5 * (a + b);
            let e1 = integrate_segment(&rule, integrands, a, m, slope, &state, &mut halves);
            mid_state[0] = 1.0;
            for k in 0..l {
                mid_state[k + 1] = halves[k].iter().sum();
                per_level[k].push(halves[k]);
            }
            breaks.push(m);
            let e2 = integrate_segment(&rule, integrands, m, b, slope, &mid_state, &mut out);
            if e1.max(e2) > tol {
                return Err(Error::Quadrature {
                    a,
                    b,
                    tol,
                    estimate: e1.max(e2),
                });
            }
        }
        for k in 0..l {
            // P_j(1) = 1.
            state[k + 1] = out[k].iter().sum();
            per_level[k].push(out[k]);
        }
        breaks.push(b);
        if gridx < g.len() && g[gridx] == b {
            for k in 0..l {
                values[k].push(state[k + 1]);
            }
            gridx += 1;
        }
    }
    for level in per_level {
        segs.extend(level);
    }
    let coeffs = segs.into_iter().flatten().collect();
    let levels = values
        .into_iter()
        .enumerate()
        .map(|(k, values)| SamplePath {
            grid: grid.clone(),
            values,
            meta: PathMeta {
                process: ProcessTag::Iterated,
                level: Some(k + 1),
                n: Some(theta.n),
                seed,
            },
        })
        .collect();
    Ok(IteratedFamily {
        levels,
        integrands: integrands.iter().map(|f| f.label()).collect(),
        theta,
        breaks,
        coeffs,
    })
}

/// Lower Cholesky factor of a Gaussian covariance on the grid points `t > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFactor {
    /// Row-major lower triangle, `dim × dim`.
    lower: Vec<f64>,
    dim: usize,
}

impl GaussianFactor {
    /// Factor `cov(s, t)` on `grid` minus the origin, after adding
    /// [`CHOLESKY_JITTER`] to the diagonal.
    pub fn new<C: Fn(f64, f64) -> f64>(grid: &TimeGrid, cov: C) -> Result<Self> {
        if grid.len() > MAX_EXACT_GRID {
            return Err(Error::invalid(
                "grid",
                format!(
                    "exact Gaussian sampling supports at most {MAX_EXACT_GRID} points, got {}",
                    grid.len()
                ),
            ));
        }
        let ts = &grid.points()[1..];
        let dim = ts.len();
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = cov(ts[i], ts[j]);
                if i == j {
                    sum += CHOLESKY_JITTER;
                }
                for k in 0..j {
                    sum -= l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    l[i * dim + i] = sum.sqrt();
                } else {
                    l[i * dim + j] = sum / l[j * dim + j];
                }
            }
        }
        Ok(GaussianFactor { lower: l, dim })
    }

    /// One path, `0` at the origin, using the `gaussian` stream.
    pub fn sample(&self, streams: &mut StreamSet) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut streams.gaussian))
            .collect();
        let mut out = Vec::with_capacity(self.dim + 1);
        out.push(0.0);
        for i in 0..self.dim {
            let row = &self.lower[i * self.dim..i * self.dim + i + 1];
            out.push(row.iter().zip(&z).map(|(l, z)| l * z).sum());
        }
        out
    }
}

/// Brownian motion on the grid by covariance factorization.
pub fn exact_bm(grid: &TimeGrid, streams: &mut StreamSet) -> Result<SamplePath> {
    let factor = GaussianFactor::new(grid, |s, t| s.min(t))?;
    Ok(exact_path(grid, &factor, ProcessTag::ExactBm, streams))
}

/// Fractional Brownian motion with Hurst index `hurst` by covariance factorization.
pub fn exact_fbm(hurst: f64, grid: &TimeGrid, streams: &mut StreamSet) -> Result<SamplePath> {
    check_hurst(hurst)?;
    let factor = GaussianFactor::new(grid, |s, t| fbm_covariance(hurst, s, t))?;
    Ok(exact_path(grid, &factor, ProcessTag::ExactFbm, streams))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "H",
            format!("must lie in (0, 1), got {hurst}"),
        ))
    }
}

fn exact_path(
    grid: &TimeGrid,
    factor: &GaussianFactor,
    process: ProcessTag,
    streams: &mut StreamSet,
) -> SamplePath {
    SamplePath {
        grid: grid.clone(),
        values: factor.sample(streams),
        meta: PathMeta {
            process,
            level: None,
            n: None,
            seed: streams.seed(),
        },
    }
}

/// What an ensemble simulates.
#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Xn {
        law: InterarrivalLaw,
        n: u64,
        schedule: ScaleSchedule,
    },
    Yn {
        law: InterarrivalLaw,
        n: u64,
        schedule: ScaleSchedule,
        kernel: KernelSpec,
        tol: f64,
    },
    /// Records level `record` of the family driven by `integrands`.
    Iterated {
        law: InterarrivalLaw,
        n: u64,
        schedule: ScaleSchedule,
        integrands: Vec<Polynomial>,
        record: usize,
        tol: f64,
    },
    ExactBm,
    ExactFbm {
        hurst: f64,
    },
}

/// Self-description of a generator, as written to ensemble sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub generator: String,
    pub law: Option<String>,
    pub n: Option<u64>,
    pub beta_n: Option<f64>,
    pub kernel: Option<String>,
}

impl Process {
    pub fn tag(&self) -> ProcessTag {
        match self {
            Process::Xn { .. } => ProcessTag::Xn,
            Process::Yn { .. } => ProcessTag::Yn,
            Process::Iterated { .. } => ProcessTag::Iterated,
            Process::ExactBm => ProcessTag::ExactBm,
            Process::ExactFbm { .. } => ProcessTag::ExactFbm,
        }
    }

    pub fn info(&self) -> Result<GeneratorInfo> {
        let tag = format!("{}", self.tag());
        Ok(match self {
            Process::Xn { law, n, schedule }
            | Process::Iterated {
                law, n, schedule, ..
            } => GeneratorInfo {
                generator: tag,
                law: Some(format!("{law}")),
                n: Some(*n),
                beta_n: Some(schedule.beta(*n)?),
                kernel: None,
            },
            Process::Yn {
                law,
                n,
                schedule,
                kernel,
                ..
            } => GeneratorInfo {
                generator: tag,
                law: Some(format!("{law}")),
                n: Some(*n),
                beta_n: Some(schedule.beta(*n)?),
                kernel: Some(format!("{kernel}")),
            },
            Process::ExactBm => GeneratorInfo {
                generator: tag,
                law: None,
                n: None,
                beta_n: None,
                kernel: Some("bm".into()),
            },
            Process::ExactFbm { hurst } => GeneratorInfo {
                generator: tag,
                law: None,
                n: None,
                beta_n: None,
                kernel: Some(format!("fbm:{hurst}")),
            },
        })
    }
}

/// A validated process on a fixed grid; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct PathGenerator {
    process: Process,
    grid: TimeGrid,
    factor: Option<Arc<GaussianFactor>>,
}

impl PathGenerator {
    pub fn new(process: Process, grid: TimeGrid) -> Result<Self> {
        let factor = match &process {
            Process::ExactBm => Some(GaussianFactor::new(&grid, |s, t| s.min(t))?),
            Process::ExactFbm { hurst } => {
                check_hurst(*hurst)?;
                Some(GaussianFactor::new(&grid, |s, t| {
                    fbm_covariance(*hurst, s, t)
                })?)
            }
            Process::Xn { n, schedule, .. } => {
                schedule.beta(*n)?;
                None
            }
            Process::Yn {
                n, schedule, tol, ..
            } => {
                schedule.beta(*n)?;
                check_tol(*tol)?;
                None
            }
            Process::Iterated {
                n,
                schedule,
                integrands,
                record,
                tol,
                ..
            } => {
                schedule.beta(*n)?;
                check_tol(*tol)?;
                if integrands.is_empty() || *record == 0 || *record > integrands.len() {
                    return Err(Error::invalid(
                        "record",
                        format!("level must lie in 1..={}, got {record}", integrands.len()),
                    ));
                }
                None
            }
        };
        Ok(PathGenerator {
            process,
            grid,
            factor: factor.map(Arc::new),
        })
    }

    pub fn process(&self) -> &Process {
        &self.process
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Grid values of the path with the given seed.
    pub fn generate(&self, seed: u64) -> Result<Vec<f64>> {
        Ok(self.generate_path(seed)?.values)
    }

    pub fn generate_path(&self, seed: u64) -> Result<SamplePath> {
        let mut streams = StreamSet::new(seed);
        let grid = &self.grid;
        match &self.process {
            Process::Xn { law, n, schedule } => simulate_xn(law, *n, schedule, grid, &mut streams),
            Process::Yn {
                law,
                n,
                schedule,
                kernel,
                tol,
            } => simulate_yn(law, *n, schedule, kernel, grid, &mut streams, *tol),
            Process::Iterated {
                law,
                n,
                schedule,
                integrands,
                record,
                tol,
            } => {
                let fs: Vec<&dyn Integrand> =
                    integrands.iter().map(|p| p as &dyn Integrand).collect();
                let fam = simulate_iterated(law, *n, schedule, &fs, grid, &mut streams, *tol)?;
                Ok(fam
                    .levels
                    .into_iter()
                    .nth(record - 1)
                    .expect("record validated"))
            }
            Process::ExactBm | Process::ExactFbm { .. } => {
                let factor = self.factor.as_ref().expect("factor built in new");
                Ok(exact_path(grid, factor, self.process.tag(), &mut streams))
            }
        }
    }
}

/// `count` paths on a common grid, row-major, path `i` seeded with
/// [`path_seed`]`(master_seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    values: Vec<f64>,
}

impl PathEnsemble {
    /// Assemble from rows in path-index order.
    pub fn from_rows(grid: TimeGrid, master_seed: u64, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("count", "must be at least 1"));
        }
        let width = grid.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::invalid(
                    "rows",
                    format!("row {i} has {} values, grid has {width}", r.len()),
                ));
            }
            values.extend_from_slice(r);
        }
        let seeds = (0..rows.len() as u64)
            .map(|i| path_seed(master_seed, i))
            .collect();
        Ok(PathEnsemble {
            grid,
            master_seed,
            seeds,
            values,
        })
    }

    pub fn count(&self) -> usize {
        self.seeds.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.len())
    }

    /// Values of every path at grid index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Values of every path at grid point `t`.
    pub fn marginal(&self, t: f64) -> Result<Vec<f64>> {
        let j = self
            .grid
            .index_of(t)
            .ok_or_else(|| Error::invalid("t", format!("{t} is not a grid point")))?;
        Ok(self.column(j))
    }
}

/// Sequential ensemble; parallel drivers must produce the same rows in the
/// same order.
pub fn ensemble(generator: &PathGenerator, count: usize, master_seed: u64) -> Result<PathEnsemble> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    let rows = (0..count as u64)
        .map(|i| generator.generate(path_seed(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    PathEnsemble::from_rows(generator.grid().clone(), master_seed, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn law() -> InterarrivalLaw {
        InterarrivalLaw::exponential(1.0).unwrap()
    }

    #[test]
    fn grids_validate() {
        let g = TimeGrid::uniform(5).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(TimeGrid::uniform(1).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.9]).is_err());
        assert_eq!(g.index_of(0.75), Some(3));
        assert_eq!(g.index_of(0.7), None);
    }

    #[test]
    fn xn_starts_at_zero_and_is_lipschitz() {
        let grid = TimeGrid::uniform(101).unwrap();
        let schedule = ScaleSchedule::fixed(1e-3).unwrap();
        let mut streams = StreamSet::new(5);
        let p = simulate_xn(&law(), 1, &schedule, &grid, &mut streams).unwrap();
        assert_eq!(p.values[0], 0.0);
        let amp = 1.0 / crate::sign_kernel::normalization(&law(), 1e-3).unwrap();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let (s, t) = (grid.points()[i], grid.points()[j]);
                assert!((p.values[j] - p.values[i]).abs() <= (t - s) * amp * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn yn_with_indicator_equals_xn() {
        let grid = TimeGrid::uniform(51).unwrap();
        let schedule = ScaleSchedule::fixed(1e-3).unwrap();
        let x = simulate_xn(&law(), 1, &schedule, &grid, &mut StreamSet::new(9)).unwrap();
        let y = simulate_yn(
            &law(),
            1,
            &schedule,
            &KernelSpec::BrownianIndicator,
            &grid,
            &mut StreamSet::new(9),
            1e-9,
        )
        .unwrap();
        for (a, b) in x.values.iter().zip(&y.values) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn tabulated_and_adaptive_yn_agree() {
        let grid = TimeGrid::uniform(6).unwrap();
        let schedule = ScaleSchedule::fixed(0.01).unwrap();
        let kernel = KernelSpec::fbm(0.3).unwrap();
        let unif = InterarrivalLaw::UniformUnit;
        let fast = simulate_yn(
            &unif,
            1,
            &schedule,
            &kernel,
            &grid,
            &mut StreamSet::new(3),
            1e-8,
        )
        .unwrap();
        let slow = simulate_yn(
            &unif,
            1,
            &schedule,
            &kernel,
            &grid,
            &mut StreamSet::new(3),
            1e-12,
        )
        .unwrap();
        assert_eq!(fast.values[0], 0.0);
        for (a, b) in fast.values.iter().zip(&slow.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn iterated_constant_integrands_give_powers_of_xn() {
        let grid = TimeGrid::uniform(21).unwrap();
        let schedule = ScaleSchedule::fixed(1e-3).unwrap();
        let one = Polynomial::constant(1.0);
        let fs: Vec<&dyn Integrand> = vec![&one; 4];
        let fam = simulate_iterated(
            &law(),
            1,
            &schedule,
            &fs,
            &grid,
            &mut StreamSet::new(11),
            1e-10,
        )
        .unwrap();
        let x = simulate_xn(&law(), 1, &schedule, &grid, &mut StreamSet::new(11)).unwrap();
        let mut fact = 1.0;
        for k in 1..=4 {
            fact *= k as f64;
            for (i, &xv) in x.values.iter().enumerate() {
                let want = xv.powi(k as i32) / fact;
                assert!((fam.levels[k - 1].values[i] - want).abs() <= 1e-8);
            }
        }
        for (a, b) in fam.levels[0].values.iter().zip(&x.values) {
            assert!((a - b).abs() <= 1e-13);
        }
        // Dense evaluation between grid points follows the same identity.
        for i in 0..200 {
            let t = (i as f64 + 0.37) / 200.0;
            let xt = fam.eval(1, t).unwrap();
            assert!((fam.eval(3, t).unwrap() - xt.powi(3) / 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn iterated_levels_satisfy_their_ode() {
        let grid = TimeGrid::uniform(11).unwrap();
        let schedule = ScaleSchedule::fixed(0.002).unwrap();
        let f1 = Polynomial::new(vec![0.0, 1.0]);
        let f2 = Labeled("cos".into(), |x: f64| x.cos());
        let fs: [&dyn Integrand; 2] = [&f1, &f2];
        let fam = simulate_iterated(
            &law(),
            1,
            &schedule,
            &fs,
            &grid,
            &mut StreamSet::new(2),
            1e-9,
        )
        .unwrap();
        assert_eq!(fam.integrands, vec!["x".to_string(), "cos".to_string()]);
        let br = fam.breakpoints();
        let h = 1e-6;
        for w in br.windows(2).step_by(37) {
            if w[1] - w[0] < 10.0 * h {
                continue;
            }
            let x = 0.5 * (w[0] + w[1]);
            let theta = fam.theta.evaluate(x).unwrap();
            for (k, f) in fs.iter().enumerate() {
                let level = k + 1;
                let d =
                    (fam.eval(level, x + h).unwrap() - fam.eval(level, x - h).unwrap()) / (2.0 * h);
                let prev = if level == 1 {
                    1.0
                } else {
                    fam.eval(level - 1, x).unwrap()
                };
                let want = f.value(x) * prev * theta;
                assert!(
                    (d - want).abs() <= 1e-6,
                    "level {level} at {x}: {d} vs {want}"
                );
            }
        }
    }

    #[test]
    fn iterated_needs_a_level() {
        let grid = TimeGrid::uniform(3).unwrap();
        let s = ScaleSchedule::fixed(0.1).unwrap();
        assert!(
            simulate_iterated(&law(), 1, &s, &[], &grid, &mut StreamSet::new(1), 1e-8).is_err()
        );
    }

    #[test]
    fn exact_paths_start_at_zero_and_factor_checks_size() {
        let grid = TimeGrid::uniform(20).unwrap();
        let p = exact_fbm(0.7, &grid, &mut StreamSet::new(1)).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p.values.len(), 20);
        let big = TimeGrid::uniform(1001).unwrap();
        assert!(exact_bm(&big, &mut StreamSet::new(1)).is_err());
        let not_psd = GaussianFactor::new(&grid, |s, t| if s == t { 1.0 } else { 2.0 });
        assert!(matches!(not_psd, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn ensembles_are_reproducible_and_match_direct_calls() {
        let grid = TimeGrid::uniform(11).unwrap();
        let gen = PathGenerator::new(
            Process::Xn {
                law: law(),
                n: 10,
                schedule: ScaleSchedule::InverseSquare,
            },
            grid.clone(),
        )
        .unwrap();
        let a = ensemble(&gen, 5, 99).unwrap();
        let b = ensemble(&gen, 5, 99).unwrap();
        assert_eq!(a, b);
        let one = ensemble(&gen, 1, 99).unwrap();
        let direct = simulate_xn(
            &law(),
            10,
            &ScaleSchedule::InverseSquare,
            &grid,
            &mut StreamSet::new(path_seed(99, 0)),
        )
        .unwrap();
        assert_eq!(one.row(0), direct.values.as_slice());
        assert_eq!(a.row(0), one.row(0));
        assert_eq!(a.column(0), vec![0.0; 5]);
    }
}
