//! Quadrature: adaptive Gauss–Kronrod, power-law endpoint substitution,
//! Gauss–Legendre rules and Chebyshev panels.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Maximum number of subintervals before the adaptive rule gives up.
pub const MAX_SUBINTERVALS: usize = 4000;

/// Exponent of the power-law substitution used at singular endpoints.
///
/// With `x = a + (b-a) u^8` an integrable singularity `(x-a)^γ`, `γ > -7/8`,
/// becomes `u^{8γ+7}` with a positive exponent.
pub const SINGULAR_POWER: i32 = 8;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
        fv[j] = (f1, f2);
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let abs_sum = abs_sum * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    if !value.is_finite() {
        err = f64::INFINITY;
    }
    Panel { a, b, value, err }
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let first = kronrod15(&mut f, a, b);
    let mut total_err = first.err;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while total_err > tol {
        if heap.len() >= MAX_SUBINTERVALS {
            let estimate = total_err;
            return Err(Error::Quadrature {
                a,
                b,
                tol,
                estimate,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            return Err(Error::Quadrature {
                a: worst.a,
                b: worst.b,
                tol,
                estimate: worst.err,
            });
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        if total_err.is_nan() {
            return Err(Error::Quadrature {
                a,
                b,
                tol,
                estimate: f64::NAN,
            });
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(panels.iter().map(|p| p.value).sum())
}

/// Integrate `f` over `[a, b]` where `f` may carry an integrable algebraic
/// singularity at either endpoint.
///
/// `f` receives `(x, x - a, b - x)`; the offset from a flagged endpoint is
/// computed without cancellation so that `f` can evaluate `(b - x)^γ`
/// accurately arbitrarily close to the singularity. Flagged ends are smoothed
/// with [`SINGULAR_POWER`]; when both ends are flagged the interval is split
/// at its midpoint.
pub fn integrate_singular<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    left: bool,
    right: bool,
    tol: f64,
) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    match (left, right) {
        (false, false) => integrate(|x| f(x, x - a, b - x), a, b, tol),
        (true, false) => one_sided(f, a, b, true, tol),
        (false, true) => one_sided(f, a, b, false, tol),
        (true, true) => {
            let m = 0.5 * (a + b);
            let lo = one_sided(|x, da, _| f(x, da, b - x), a, m, true, 0.5 * tol)?;
            let hi = one_sided(|x, _, db| f(x, x - a, db), m, b, false, 0.5 * tol)?;
            Ok(lo + hi)
        }
    }
}

fn one_sided<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    at_left: bool,
    tol: f64,
) -> Result<f64> {
    let p = SINGULAR_POWER;
    let pf = p as f64;
    let w = b - a;
    integrate(
        |u| {
            let up = u.powi(p - 1);
            let off = w * up * u;
            let v = if at_left {
                f(a + off, off, w - off)
            } else {
                f(b - off, w - off, off)
            };
            pf * w * up * v
        },
        0.0,
        1.0,
        tol,
    )
}

/// Adaptive quadrature to a tolerance relative to the size of the integral,
/// for integrands of one sign.
pub fn integrate_relative<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rough = kronrod15(&mut f, a, b).value.abs();
    let tol = (rel * rough).max(f64::MIN_POSITIVE);
    integrate(f, a, b, tol)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// All Legendre polynomials `P_0..=P_n` at `x`.
pub fn legendre_all(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for k in 2..=n {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Chebyshev expansion `Σ c_k T_k(s)` of a function on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl ChebSeries {
    /// Interpolate at `n` Chebyshev points of the first kind.
    pub fn fit_values(a: f64, b: f64, values: &[f64]) -> Self {
        let n = values.len();
        let nf = n as f64;
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / nf).cos())
                    .sum();
                if k == 0 {
                    s / nf
                } else {
                    2.0 * s / nf
                }
            })
            .collect();
        ChebSeries { a, b, coeffs }
    }

    /// The `n` first-kind Chebyshev nodes in the reference variable `s ∈ (-1, 1)`,
    /// ordered to match [`ChebSeries::fit_values`].
    pub fn reference_nodes(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |j| (PI * (j as f64 + 0.5) / n as f64).cos())
    }

    pub fn eval_reference(&self, s: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * x - self.a - self.b) / (self.b - self.a);
        self.eval_reference(s)
    }

    /// Antiderivative vanishing at the left end `a`.
    pub fn antiderivative(&self) -> ChebSeries {
        let n = self.coeffs.len();
        let c = |k: usize| if k < n { self.coeffs[k] } else { 0.0 };
        let mut d = alloc::vec![0.0; n + 1];
        // ∫T_0 = T_1, ∫T_1 = T_2/4, ∫T_k = T_{k+1}/(2(k+1)) - T_{k-1}/(2(k-1)).
        for (j, dj) in d.iter_mut().enumerate().skip(1) {
            let jf = j as f64;
            let lower = if j == 1 {
                2.0 * c(0) - c(2)
            } else {
                c(j - 1) - c(j + 1)
            };
            *dj = lower / (2.0 * jf);
        }
        let half = 0.5 * (self.b - self.a);
        for dj in d.iter_mut() {
            *dj *= half;
        }
        let at_left: f64 = d
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
            .sum();
        d[0] = -at_left;
        ChebSeries {
            a: self.a,
            b: self.b,
            coeffs: d,
        }
    }
}
