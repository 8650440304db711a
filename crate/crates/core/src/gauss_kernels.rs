//! Deterministic Volterra kernels `K(t, x)`: the Brownian indicator and the
//! Molchan–Golosov kernel of fractional Brownian motion.
//!
//! The fBm kernel is self-similar, `K(t, r) = t^{H-1/2} k(r/t)` with
//! `k(ρ) = K(1, ρ)`, so everything reduces to the unit profile `k` on `(0, 1)`.
//! Substituting `u = r(1 + z)` in the inner integral gives
//!
//! ```text
//! k(ρ) = c_H [ d^{H-1/2} + (H-1/2)² ρ^{H-1/2} Q(d/ρ) ],   d = 1 - ρ,
//! Q(Z) = ∫_0^Z z^{H-3/2} ((1+z)^{H-1/2} - 1) / (H-1/2) dz,
//! ```
//!
//! whose integrand is positive and behaves like `z^{H-1/2}` at the origin.
//! `Q` is computed by adaptive quadrature; the profile and its primitive are
//! then tabulated once per kernel on dyadic Chebyshev panels graded towards
//! both singular ends.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::quad::{self, ChebSeries};
use crate::sign_kernel::Primitive;
use crate::special::gamma;
use crate::{Error, Result};

/// Points per Chebyshev panel.
const PANEL_NODES: usize = 20;
/// Dyadic levels per side; the innermost panel `[0, 2^-LEVELS]` uses the
/// leading power law.
const LEVELS: i32 = 50;
/// Relative accuracy requested from the inner quadrature.
const INNER_REL_TOL: f64 = 1e-13;

/// `c_H = (2H Γ(3/2-H) / (Γ(H+1/2) Γ(2-2H)))^{1/2}`.
pub fn c_h(hurst: f64) -> f64 {
    (2.0 * hurst * gamma(1.5 - hurst) / (gamma(hurst + 0.5) * gamma(2.0 - 2.0 * hurst))).sqrt()
}

/// `½(t^{2H} + s^{2H} - |t-s|^{2H})`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// `Q(Z)` from the module docs, for `H ≠ 1/2`.
fn q_integral(hurst: f64, big_z: f64) -> Result<f64> {
    let b = hurst - 0.5;
    let a = hurst - 1.5;
    let g = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        let v = z.powf(a) * (b * z.ln_1p()).exp_m1() / b;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let head_end = big_z.min(1.0);
    // g(z) ≈ z^{H-1/2} near 0 fixes the scale of the head.
    let head_scale = head_end.powf(hurst + 0.5) / (hurst + 0.5);
    let head = quad::integrate_singular(
        |_, dz, _| g(dz),
        0.0,
        head_end,
        true,
        false,
        INNER_REL_TOL * head_scale,
    )?;
    if big_z <= 1.0 {
        return Ok(head);
    }
    // Tail in the log variable z = e^s.
    let tail = quad::integrate_relative(
        |s: f64| {
            let z = s.exp();
            z * g(z)
        },
        0.0,
        big_z.ln(),
        INNER_REL_TOL,
    )?;
    Ok(head + tail)
}

/// `k(ρ)` by direct quadrature, given `ρ` and its complement `d = 1 - ρ`.
fn unit_kernel_direct(hurst: f64, c: f64, rho: f64, d: f64) -> Result<f64> {
    if hurst == 0.5 {
        return Ok(c);
    }
    let b = hurst - 0.5;
    let q = q_integral(hurst, d / rho)?;
    Ok(c * (d.powf(b) + b * b * rho.powf(b) * q))
}

#[derive(Debug, Clone)]
struct TablePanel {
    density: ChebSeries,
    mass: ChebSeries,
    offset: f64,
}

/// Profile and primitive on one half of `(0, 1)`, in the coordinate `c`
/// measured from the singular end (`c = ρ` on the left, `c = 1 - ρ` on the right).
#[derive(Debug, Clone)]
struct HalfTable {
    /// Leading exponent `γ` with `k ≈ k(ε) (c/ε)^γ` near `c = 0`.
    gamma: f64,
    inner_edge: f64,
    inner_density: f64,
    inner_mass: f64,
    panels: Vec<TablePanel>,
}

impl HalfTable {
    fn build<F: FnMut(f64) -> Result<f64>>(gamma: f64, mut k: F) -> Result<Self> {
        let inner_edge = 2f64.powi(-LEVELS);
        let inner_density = k(inner_edge)?;
        let inner_mass = inner_density * inner_edge / (gamma + 1.0);
        let mut panels = Vec::with_capacity(LEVELS as usize - 1);
        let mut offset = inner_mass;
        for level in (1..LEVELS).rev() {
            let lo = 2f64.powi(-level - 1).max(inner_edge);
            let hi = 2f64.powi(-level);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let values = ChebSeries::reference_nodes(PANEL_NODES)
                .map(|s| k(mid + half * s))
                .collect::<Result<Vec<_>>>()?;
            let density = ChebSeries::fit_values(lo, hi, &values);
            let mass = density.antiderivative();
            let total = mass.eval(hi);
            panels.push(TablePanel {
                density,
                mass,
                offset,
            });
            offset += total;
        }
        Ok(HalfTable {
            gamma,
            inner_edge,
            inner_density,
            inner_mass,
            panels,
        })
    }

    fn panel(&self, c: f64) -> &TablePanel {
        let (_, exp) = libm::frexp(c);
        // c ∈ [2^(exp-1), 2^exp); panel 0 starts at 2^-LEVELS.
        let idx = (exp - 1 + LEVELS).clamp(0, self.panels.len() as i32 - 1);
        &self.panels[idx as usize]
    }

    fn density(&self, c: f64) -> f64 {
        if c < self.inner_edge {
            return self.inner_density * (c / self.inner_edge).powf(self.gamma);
        }
        self.panel(c).density.eval(c)
    }

    fn mass(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        if c < self.inner_edge {
            return self.inner_mass * (c / self.inner_edge).powf(self.gamma + 1.0);
        }
        let p = self.panel(c);
        p.offset + p.mass.eval(c)
    }

    fn total(&self) -> f64 {
        let last = self.panels.last().expect("tables have panels");
        last.offset + last.mass.eval(last.mass.b)
    }
}

/// Tabulated unit profile `k` and its primitive `Ā(y) = ∫_0^y k`.
#[derive(Debug, Clone)]
struct UnitTable {
    left: HalfTable,
    right: HalfTable,
    total: f64,
}

impl UnitTable {
    fn build(hurst: f64, c: f64) -> Result<Self> {
        let b = hurst - 0.5;
        let left = HalfTable::build(-b.abs(), |rho| unit_kernel_direct(hurst, c, rho, 1.0 - rho))?;
        let right = HalfTable::build(b, |d| unit_kernel_direct(hurst, c, 1.0 - d, d))?;
        let total = left.total() + right.total();
        Ok(UnitTable { left, right, total })
    }

    /// `k(ρ)` with `d = 1 - ρ` supplied by the caller.
    fn density(&self, rho: f64, d: f64) -> f64 {
        if rho <= 0.5 {
            self.left.density(rho)
        } else {
            self.right.density(d)
        }
    }

    /// `Ā(ρ)` with `d = 1 - ρ` supplied by the caller.
    fn primitive(&self, rho: f64, d: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else if d <= 0.0 {
            self.total
        } else if rho <= 0.5 {
            self.left.mass(rho)
        } else {
            self.total - self.right.mass(d)
        }
    }
}

/// Molchan–Golosov kernel with Hurst index `H ∈ (0, 1)`.
#[derive(Clone)]
pub struct FbmKernel {
    hurst: f64,
    c_h: f64,
    table: Arc<UnitTable>,
}

impl fmt::Debug for FbmKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbmKernel")
            .field("hurst", &self.hurst)
            .field("c_h", &self.c_h)
            .finish()
    }
}

impl PartialEq for FbmKernel {
    fn eq(&self, other: &Self) -> bool {
        self.hurst == other.hurst
    }
}

impl FbmKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::invalid(
                "H",
                format!("must lie in (0, 1), got {hurst}"),
            ));
        }
        let c = c_h(hurst);
        let table = Arc::new(UnitTable::build(hurst, c)?);
        Ok(FbmKernel {
            hurst,
            c_h: c,
            table,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    /// `k(ρ) = K(1, ρ)` from the table.
    pub fn unit_kernel(&self, rho: f64) -> f64 {
        self.table.density(rho, 1.0 - rho)
    }

    /// `k(ρ)` by direct quadrature of the defining integral (slow; used to
    /// build and validate the table).
    pub fn unit_kernel_direct(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::KernelDomain {
                t: 1.0,
                r: rho,
                reason: "unit profile is defined on (0, 1)",
            });
        }
        unit_kernel_direct(self.hurst, self.c_h, rho, 1.0 - rho)
    }

    /// `K(t, r)` for `0 < r < t`, with `gap = t - r` supplied accurately.
    fn eval_with_gap(&self, t: f64, r: f64, gap: f64) -> f64 {
        t.powf(self.hurst - 0.5) * self.table.density(r / t, gap / t)
    }

    /// `∫_0^x K(t, u) du`.
    pub fn primitive(&self, t: f64, x: f64) -> f64 {
        if t <= 0.0 || x <= 0.0 {
            return 0.0;
        }
        let x = x.min(t);
        t.powf(self.hurst + 0.5) * self.table.primitive(x / t, (t - x) / t)
    }
}

/// A deterministic kernel `K(t, x)`, zero for `x > t` and at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `K(t, x) = 1_{[0,t]}(x)`.
    BrownianIndicator,
    Fbm(FbmKernel),
}

impl KernelSpec {
    pub fn fbm(hurst: f64) -> Result<Self> {
        Ok(KernelSpec::Fbm(FbmKernel::new(hurst)?))
    }

    /// Hurst index of the limit process (1/2 for the indicator).
    pub fn hurst(&self) -> f64 {
        match self {
            KernelSpec::BrownianIndicator => 0.5,
            KernelSpec::Fbm(k) => k.hurst,
        }
    }

    /// Covariance of the limit Gaussian process.
    pub fn limit_covariance(&self, s: f64, t: f64) -> f64 {
        match self {
            KernelSpec::BrownianIndicator => s.min(t),
            KernelSpec::Fbm(k) => fbm_covariance(k.hurst, s, t),
        }
    }

    /// Modulus exponent used by [`check_hypothesis_h`]: `2H`, or 1 for the indicator.
    pub fn modulus_exponent(&self) -> f64 {
        2.0 * self.hurst()
    }

    /// The integrand `K(t, ·)` as a primitive, for telescoped integration
    /// against a step function.
    pub fn at(&self, t: f64) -> KernelSlice<'_> {
        KernelSlice { spec: self, t }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::BrownianIndicator => f.write_str("bm"),
            KernelSpec::Fbm(k) => write!(f, "fbm:{}", k.hurst),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: &str| Error::Parse {
            what: "kernel",
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = s.trim();
        if trimmed == "bm" {
            return Ok(KernelSpec::BrownianIndicator);
        }
        let Some(h) = trimmed.strip_prefix("fbm:") else {
            return Err(parse_err("expected `bm` or `fbm:<H>` with H in (0, 1)"));
        };
        let hurst: f64 = h
            .trim()
            .parse()
            .map_err(|_| parse_err("H must be a number in (0, 1)"))?;
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(parse_err(&format!(
                "H must lie in the open range (0, 1), got {hurst}"
            )));
        }
        KernelSpec::fbm(hurst)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `K(t, ·)` for a fixed `t`.
#[derive(Debug, Clone, Copy)]
pub struct KernelSlice<'a> {
    spec: &'a KernelSpec,
    t: f64,
}

impl Primitive for KernelSlice<'_> {
    fn primitive(&self, x: f64) -> f64 {
        match self.spec {
            KernelSpec::BrownianIndicator => x.clamp(0.0, self.t.max(0.0)),
            KernelSpec::Fbm(k) => k.primitive(self.t, x),
        }
    }

    fn support_end(&self) -> f64 {
        self.t.max(0.0)
    }
}

/// `K(t, r)`.
///
/// Zero for `r > t` and for `t = 0` (including `r = 0`). For `H ≠ 1/2` the fBm kernel is singular
/// at `r = t` (and, for `H < 1/2`, at `r = 0`); evaluating there is an error.
pub fn eval_kernel(spec: &KernelSpec, t: f64, r: f64) -> Result<f64> {
    if !(t.is_finite() && r.is_finite()) {
        return Err(Error::KernelDomain {
            t,
            r,
            reason: "arguments must be finite",
        });
    }
    match spec {
        // K(0, ·) = 0 takes precedence over 1_{[0,t]} at the single point t = r = 0.
        KernelSpec::BrownianIndicator => Ok(if t > 0.0 && r >= 0.0 && r <= t {
            1.0
        } else {
            0.0
        }),
        KernelSpec::Fbm(k) => {
            if r > t || t <= 0.0 || r < 0.0 {
                return Ok(0.0);
            }
            if k.hurst == 0.5 {
                return Ok(k.c_h);
            }
            if r == t {
                return Err(Error::KernelDomain {
                    t,
                    r,
                    reason: "fBm kernel is singular on the diagonal r = t",
                });
            }
            if r == 0.0 {
                return Err(Error::KernelDomain {
                    t,
                    r,
                    reason: "fBm kernel is singular or vanishing at r = 0",
                });
            }
            Ok(k.eval_with_gap(t, r, t - r))
        }
    }
}

/// `∫_a^b K(t, x) dx` within absolute tolerance `tol`.
pub fn segment_integral(spec: &KernelSpec, t: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a > b {
        return Err(Error::invalid(
            "segment",
            format!("a = {a} exceeds b = {b}"),
        ));
    }
    let lo = a.max(0.0);
    let hi = b.min(t);
    if hi <= lo {
        return Ok(0.0);
    }
    match spec {
        KernelSpec::BrownianIndicator => Ok(hi - lo),
        KernelSpec::Fbm(k) if k.hurst == 0.5 => Ok(k.c_h * (hi - lo)),
        KernelSpec::Fbm(k) => {
            let left = lo == 0.0;
            let right = hi == t;
            quad::integrate_singular(
                |x, _, db| {
                    let gap = if right { db } else { t - x };
                    k.eval_with_gap(t, x, gap)
                },
                lo,
                hi,
                left,
                right,
                tol,
            )
        }
    }
}

/// `∫_0^1 (K(t,x) - K(s,x))² dx`.
pub fn l2_increment(spec: &KernelSpec, s: f64, t: f64, tol: f64) -> Result<f64> {
    check_unit(s, t)?;
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    if s == t {
        return Ok(0.0);
    }
    let k = match spec {
        KernelSpec::BrownianIndicator => return Ok(t - s),
        KernelSpec::Fbm(k) if k.hurst == 0.5 => return Ok(k.c_h * k.c_h * (t - s)),
        KernelSpec::Fbm(k) => k,
    };
    // [0, s]: both kernels live; K(s,·) is singular at s.
    let inner = if s > 0.0 {
        quad::integrate_singular(
            |x, _, ds| {
                let diff = k.eval_with_gap(t, x, (t - s) + ds) - k.eval_with_gap(s, x, ds);
                diff * diff
            },
            0.0,
            s,
            true,
            true,
            0.5 * tol,
        )?
    } else {
        0.0
    };
    // [s, t]: only K(t,·), singular at t.
    let outer = quad::integrate_singular(
        |x, _, dt| {
            let v = k.eval_with_gap(t, x, dt);
            v * v
        },
        s,
        t,
        s == 0.0,
        true,
        0.5 * tol,
    )?;
    Ok(inner + outer)
}

/// `∫_0^1 K(t,x) K(s,x) dx`.
pub fn covariance(spec: &KernelSpec, s: f64, t: f64, tol: f64) -> Result<f64> {
    check_unit(s, t)?;
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo <= 0.0 {
        return Ok(0.0);
    }
    let k = match spec {
        KernelSpec::BrownianIndicator => return Ok(lo),
        KernelSpec::Fbm(k) if k.hurst == 0.5 => return Ok(k.c_h * k.c_h * lo),
        KernelSpec::Fbm(k) => k,
    };
    quad::integrate_singular(
        |x, _, dl| k.eval_with_gap(hi, x, (hi - lo) + dl) * k.eval_with_gap(lo, x, dl),
        0.0,
        lo,
        true,
        true,
        tol,
    )
}

fn check_unit(s: f64, t: f64) -> Result<()> {
    for (field, v) in [("s", s), ("t", t)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(
                field,
                format!("must lie in [0, 1], got {v}"),
            ));
        }
    }
    Ok(())
}

/// Outcome of checking `∫(K(t,·) - K(s,·))² ≤ (G(t) - G(s))^α + tol` on a grid
/// with the linear candidate modulus `G(u) = c u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub pairs: Vec<(f64, f64)>,
    pub measured: Vec<f64>,
    /// Slope `c` of the candidate modulus.
    pub modulus_scale: f64,
    pub alpha: f64,
    pub tolerance: f64,
    /// Per-pair verdicts.
    pub within: Vec<bool>,
    pub pass: bool,
}

/// Measure the L² increments on `pairs` and test them against `G(u) = c u`.
///
/// `c` is calibrated on the widest pair, `c^α = measured / (t-s)^α`. The
/// remaining pairs then test the shape of the modulus, so an exponent that is
/// too large shows up on the small increments. Pair order is preserved.
pub fn check_hypothesis_h(
    spec: &KernelSpec,
    pairs: &[(f64, f64)],
    alpha: f64,
    tol: f64,
) -> Result<ModulusReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("grid", "needs at least one pair"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must be positive, got {alpha}"),
        ));
    }
    let mut measured = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if !(s < t) {
            return Err(Error::invalid(
                "grid",
                format!("pair ({s}, {t}) must satisfy s < t"),
            ));
        }
        measured.push(l2_increment(spec, s, t, tol)?);
    }
    let (widest, _) = pairs
        .iter()
        .enumerate()
        .max_by(|(_, p), (_, q)| (p.1 - p.0).total_cmp(&(q.1 - q.0)))
        .expect("pairs is non-empty");
    let (s0, t0) = pairs[widest];
    let modulus_scale = (measured[widest] / (t0 - s0).powf(alpha)).powf(1.0 / alpha);
    // Quadrature error in the calibration pair propagates to the bound.
    let slack = 4.0 * tol;
    let within: Vec<bool> = pairs
        .iter()
        .zip(&measured)
        .map(|(&(s, t), &m)| m <= (modulus_scale * (t - s)).powf(alpha) + slack)
        .collect();
    let pass = within.iter().all(|&w| w);
    Ok(ModulusReport {
        pairs: pairs.to_vec(),
        measured,
        modulus_scale,
        alpha,
        tolerance: slack,
        within,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sign_kernel::StepSign;

    const TEN_PAIRS: [(f64, f64); 10] = [
        (0.0, 1.0),
        (0.0, 0.3),
        (0.1, 0.2),
        (0.2, 0.9),
        (0.25, 0.5),
        (0.4, 0.41),
        (0.5, 1.0),
        (0.6, 0.75),
        (0.7, 0.95),
        (0.9, 1.0),
    ];

    #[test]
    fn c_h_matches_known_values() {
        assert!((c_h(0.5) - 1.0).abs() < 1e-14);
        // 2H Γ(3/2-H) / (Γ(H+1/2) Γ(2-2H)) by statrs.
        for &h in &[0.1, 0.3, 0.7, 0.9] {
            let g = statrs::function::gamma::gamma;
            let want = (2.0 * h * g(1.5 - h) / (g(h + 0.5) * g(2.0 - 2.0 * h))).sqrt();
            assert!((c_h(h) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn indicator_examples() {
        let bm = KernelSpec::BrownianIndicator;
        assert_eq!(eval_kernel(&bm, 0.7, 0.3).unwrap(), 1.0);
        assert_eq!(eval_kernel(&bm, 0.7, 0.8).unwrap(), 0.0);
        assert!((segment_integral(&bm, 0.5, 0.3, 0.8, 1e-12).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(l2_increment(&bm, 0.2, 0.7, 1e-12).unwrap(), 0.7 - 0.2);
        assert_eq!(covariance(&bm, 0.2, 0.7, 1e-12).unwrap(), 0.2);
    }

    #[test]
    fn half_hurst_is_the_indicator_pointwise() {
        let k = KernelSpec::fbm(0.5).unwrap();
        let bm = KernelSpec::BrownianIndicator;
        for i in 0..100 {
            let r = i as f64 / 99.0;
            for &t in &[0.0, 0.37, 1.0] {
                assert_eq!(
                    eval_kernel(&k, t, r).unwrap(),
                    eval_kernel(&bm, t, r).unwrap(),
                    "t={t} r={r}"
                );
            }
        }
    }

    #[test]
    fn kernel_vanishes_outside_support() {
        let k = KernelSpec::fbm(0.3).unwrap();
        assert_eq!(eval_kernel(&k, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(eval_kernel(&k, 0.4, 0.5).unwrap(), 0.0);
        assert_eq!(segment_integral(&k, 0.4, 0.4, 0.9, 1e-10).unwrap(), 0.0);
        assert_eq!(segment_integral(&k, 0.4, 0.5, 0.9, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_is_a_domain_error() {
        let k = KernelSpec::fbm(0.7).unwrap();
        assert!(matches!(
            eval_kernel(&k, 0.5, 0.5),
            Err(Error::KernelDomain { .. })
        ));
    }

    #[test]
    fn h07_vanishes_like_power_02_at_the_diagonal() {
        let k = KernelSpec::fbm(0.7).unwrap();
        let vals: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&r| eval_kernel(&k, 1.0, r).unwrap())
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] > 0.0);
        for w in vals.windows(2) {
            // Each factor 10 closer to the diagonal scales K by about 10^-0.2.
            let slope = (w[0] / w[1]).log10();
            assert!((slope - 0.2).abs() < 0.02, "slope {slope}");
        }
    }

    #[test]
    fn table_agrees_with_direct_quadrature() {
        for &h in &[0.05, 0.3, 0.45, 0.55, 0.7, 0.95] {
            let KernelSpec::Fbm(k) = KernelSpec::fbm(h).unwrap() else {
                unreachable!()
            };
            for i in 1..200 {
                let rho = (i as f64 / 200.0).powi(3);
                for r in [rho, 1.0 - rho] {
                    let direct = k.unit_kernel_direct(r).unwrap();
                    let table = k.unit_kernel(r);
                    assert!(
                        (table - direct).abs() <= 1e-11 * direct.abs().max(1.0),
                        "H={h} ρ={r}: {table} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn tabulated_primitive_matches_quadrature() {
        let spec = KernelSpec::fbm(0.3).unwrap();
        let KernelSpec::Fbm(k) = &spec else {
            unreachable!()
        };
        for &(t, x) in &[(1.0, 0.2), (1.0, 0.7), (0.6, 0.1), (0.6, 0.59), (0.3, 0.3)] {
            let q = segment_integral(&spec, t, 0.0, x, 1e-13).unwrap();
            assert!((k.primitive(t, x) - q).abs() < 1e-11, "t={t} x={x}");
        }
    }

    /// Composite Simpson rule with 10⁶ panels after smoothing substitutions
    /// `x = y⁵/2` on `[0, 1/2]` and `x = 1 - y⁵/2` on `[1/2, 1]`.
    fn brute_force_unit_integral(k: &FbmKernel) -> f64 {
        let n = 500_000;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for side in 0..2 {
            let f = |y: f64| {
                if y == 0.0 {
                    return 0.0;
                }
                let off = 0.5 * y.powi(5);
                let jac = 2.5 * y.powi(4);
                let (rho, d) = if side == 0 {
                    (off, 1.0 - off)
                } else {
                    (1.0 - off, off)
                };
                jac * k.table.density(rho, d)
            };
            let mut s = f(0.0) + f(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(i as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    #[test]
    fn segment_integral_matches_brute_force_rule() {
        let spec = KernelSpec::fbm(0.3).unwrap();
        let KernelSpec::Fbm(k) = &spec else {
            unreachable!()
        };
        let tol = 1e-9;
        let got = segment_integral(&spec, 1.0, 0.0, 1.0, tol).unwrap();
        let oracle = brute_force_unit_integral(k);
        assert!((got - oracle).abs() <= 10.0 * tol, "{got} vs {oracle}");
    }

    #[test]
    fn increments_certify_normalisation() {
        for &h in &[0.3, 0.5, 0.7] {
            let spec = KernelSpec::fbm(h).unwrap();
            for &(s, t) in &TEN_PAIRS {
                let v = l2_increment(&spec, s, t, 1e-10).unwrap();
                let want = (t - s).powf(2.0 * h);
                assert!((v - want).abs() <= 1e-4, "H={h} ({s},{t}): {v} vs {want}");
                // The kernel is far more accurate than the certified bound.
                assert!((v - want).abs() <= 1e-8, "H={h} ({s},{t}): {v} vs {want}");
            }
            assert_eq!(l2_increment(&spec, 0.4, 0.4, 1e-10).unwrap(), 0.0);
        }
    }

    #[test]
    fn covariance_matches_fbm_formula_and_is_symmetric() {
        let tol = 1e-10;
        for &h in &[0.2, 0.7] {
            let spec = KernelSpec::fbm(h).unwrap();
            for &(s, t) in &[(0.5, 1.0), (0.1, 0.9), (0.3, 0.3), (1.0, 1.0), (0.0, 0.4)] {
                let c = covariance(&spec, s, t, tol).unwrap();
                assert!(
                    (c - fbm_covariance(h, s, t)).abs() < 1e-8,
                    "H={h} ({s},{t})"
                );
                let c2 = covariance(&spec, t, s, tol).unwrap();
                assert!((c - c2).abs() <= 2.0 * tol);
            }
        }
    }

    #[test]
    fn covariance_matrix_is_positive_semidefinite() {
        let spec = KernelSpec::fbm(0.3).unwrap();
        let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
        let m = nalgebra::DMatrix::from_fn(8, 8, |i, j| {
            covariance(&spec, grid[i], grid[j], 1e-11).unwrap()
        });
        let eig = m.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-8, "{eig}");
    }

    #[test]
    fn hypothesis_h_examples() {
        let bm = KernelSpec::BrownianIndicator;
        let r = check_hypothesis_h(&bm, &TEN_PAIRS, 1.0, 1e-10).unwrap();
        assert!(r.pass);
        assert!((r.modulus_scale - 1.0).abs() < 1e-15);
        let r = check_hypothesis_h(&bm, &TEN_PAIRS, 2.0, 1e-10).unwrap();
        assert!(!r.pass);
        let fbm = KernelSpec::fbm(0.3).unwrap();
        let r = check_hypothesis_h(&fbm, &TEN_PAIRS, 0.6, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.modulus_scale - 1.0).abs() < 1e-6);
    }

    #[test]
    fn step_integration_uses_the_table_consistently() {
        let spec = KernelSpec::fbm(0.7).unwrap();
        let theta = StepSign {
            n: 1,
            beta_n: 1.0,
            amplitude: 1.0,
            initial_sign: 1,
            flip_points: alloc::vec![0.1, 0.35, 0.6, 0.85],
            start: 0.0,
            end: 1.0,
        };
        let t = 0.7;
        let fast = theta.integrate_primitive(&spec.at(t));
        struct Direct<'a>(&'a KernelSpec, f64);
        impl crate::sign_kernel::SegmentIntegrand for Direct<'_> {
            fn integral(&self, a: f64, b: f64) -> Result<f64> {
                segment_integral(self.0, self.1, a, b, 1e-13)
            }
        }
        let slow = theta.integrate_against(&Direct(&spec, t)).unwrap();
        assert!((fast - slow).abs() < 1e-11);
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "bm".parse::<KernelSpec>().unwrap(),
            KernelSpec::BrownianIndicator
        );
        let k: KernelSpec = "fbm:0.7".parse().unwrap();
        assert_eq!(k.hurst(), 0.7);
        assert_eq!(k.to_string(), "fbm:0.7");
        let err = "fbm:1.5".parse::<KernelSpec>().unwrap_err().to_string();
        assert!(err.contains("(0, 1)"), "{err}");
        assert!("fbm:x".parse::<KernelSpec>().is_err());
        assert!("ou:1".parse::<KernelSpec>().is_err());
    }
}
