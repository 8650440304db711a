//! The sign kernel `θ_n(x) = (-1)^{T(x/β(n))} / G(n)` as an exact step
//! function on `[0, 1]`, and integration of deterministic integrands against it.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::distributions::InterarrivalLaw;
use crate::renewal::{simulate_reward, RewardPath};
use crate::seed::StreamSet;
use crate::{Error, Result};

/// Rule `n ↦ β(n) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScaleSchedule {
    /// `β(n) = n^{-2}`.
    #[default]
    InverseSquare,
    /// `β(n) = n^{-exponent}`, summable for `exponent > 1`.
    Power { exponent: f64 },
    /// The same `β` for every `n`; used when a single scale is requested directly.
    Fixed { beta: f64 },
}

impl ScaleSchedule {
    pub fn power(exponent: f64) -> Result<Self> {
        if exponent.is_finite() && exponent > 1.0 {
            Ok(Self::Power { exponent })
        } else {
            Err(Error::invalid(
                "exponent",
                format!("must exceed 1 for a summable schedule, got {exponent}"),
            ))
        }
    }

    pub fn fixed(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Self::Fixed { beta })
        } else {
            Err(Error::invalid(
                "beta",
                format!("must be finite and positive, got {beta}"),
            ))
        }
    }

    pub fn beta(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n", "indices start at 1"));
        }
        let nf = n as f64;
        Ok(match *self {
            Self::InverseSquare => 1.0 / (nf * nf),
            Self::Power { exponent } => nf.powf(-exponent),
            Self::Fixed { beta } => beta,
        })
    }

    /// Whether `Σ_n β(n) < ∞`.
    pub fn is_summable(&self) -> bool {
        match *self {
            Self::InverseSquare => true,
            Self::Power { exponent } => exponent > 1.0,
            Self::Fixed { .. } => false,
        }
    }
}

/// `G(n) = (β(n) E[U²] / E[U])^{1/2}`.
pub fn normalization(law: &InterarrivalLaw, beta_n: f64) -> Result<f64> {
    if !(beta_n.is_finite() && beta_n > 0.0) {
        return Err(Error::invalid(
            "beta_n",
            format!("must be finite and positive, got {beta_n}"),
        ));
    }
    let (m1, m2) = law.moments();
    Ok((beta_n * m2 / m1).sqrt())
}

/// Deterministic integrand that can report `∫_a^b f` for any subinterval.
pub trait SegmentIntegrand {
    fn integral(&self, a: f64, b: f64) -> Result<f64>;
}

/// Integrand with a known antiderivative.
pub trait Primitive {
    fn primitive(&self, x: f64) -> f64;

    /// The primitive is constant on `[support_end(), ∞)`.
    fn support_end(&self) -> f64 {
        f64::INFINITY
    }
}

impl<P: Primitive> SegmentIntegrand for P {
    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.primitive(b) - self.primitive(a))
    }
}

/// `c_0 + c_1 x + c_2 x² + ...`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial {
            coeffs: alloc::vec![c],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `∫_0^1 f²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in self.coeffs.iter().enumerate() {
                total += a * b / (i + j + 1) as f64;
            }
        }
        total
    }
}

impl Primitive for Polynomial {
    fn primitive(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + c / (k + 1) as f64)
            * x
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mag = c.abs();
            match (first, c < 0.0) {
                (true, true) => f.write_str("-")?,
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
                (true, false) => {}
            }
            first = false;
            if k == 0 || mag != 1.0 {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => f.write_str("x")?,
                _ => write!(f, "x^{k}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// One realization of `θ_n` restricted to `[start, end] ⊆ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSign {
    pub n: u64,
    pub beta_n: f64,
    /// `1 / G(n)`.
    pub amplitude: f64,
    /// Sign on `[start, first flip)`.
    pub initial_sign: i8,
    /// Points in `(start, end]` where the sign changes, strictly increasing.
    pub flip_points: Vec<f64>,
    pub start: f64,
    pub end: f64,
}

impl StepSign {
    /// Compress a reward path into `θ_n` on `[0, 1]`: only epochs with
    /// `η_k = 1` change the parity, and they sit at `β S_k`.
    pub fn from_reward_path(path: &RewardPath, n: u64, beta_n: f64, amplitude: f64) -> Self {
        let mut initial_sign: i8 = if path.eta0 { -1 } else { 1 };
        let mut flip_points = Vec::with_capacity(path.flips.len() / 2 + 1);
        for (&s, &eta) in path.base.jump_times.iter().zip(&path.flips) {
            if !eta {
                continue;
            }
            let x = beta_n * s;
            if x > 1.0 {
                break;
            }
            if x <= 0.0 {
                initial_sign = -initial_sign;
            } else if flip_points.last() == Some(&x) {
                // Two flips at one point cancel.
                flip_points.pop();
            } else {
                flip_points.push(x);
            }
        }
        StepSign {
            n,
            beta_n,
            amplitude,
            initial_sign,
            flip_points,
            start: 0.0,
            end: 1.0,
        }
    }

    /// Number of flip points `<= x`.
    fn flips_up_to(&self, x: f64) -> usize {
        self.flip_points.partition_point(|&f| f <= x)
    }

    /// `±1`: the sign at `x`, right-continuous.
    pub fn sign_at(&self, x: f64) -> Result<i8> {
        if !(x >= self.start && x <= self.end) {
            return Err(Error::invalid(
                "x",
                format!("{x} outside [{}, {}]", self.start, self.end),
            ));
        }
        let k = self.flips_up_to(x);
        Ok(if k % 2 == 0 {
            self.initial_sign
        } else {
            -self.initial_sign
        })
    }

    /// `θ_n(x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.amplitude * self.sign_at(x)? as f64)
    }

    /// Constancy segments `(a, b, sign)` covering `[start, end]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, i8)> + '_ {
        let bounds = core::iter::once(self.start)
            .chain(self.flip_points.iter().copied())
            .chain(core::iter::once(self.end));
        let mut prev: Option<f64> = None;
        let mut sign = -self.initial_sign;
        bounds.filter_map(move |x| {
            let out = prev.map(|a| (a, x, sign));
            prev = Some(x);
            sign = -sign;
            out
        })
    }

    /// The same function seen only on `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<StepSign> {
        if a > b {
            return Err(Error::invalid(
                "a, b",
                format!("need a <= b, got a={a}, b={b}"),
            ));
        }
        if a < self.start || b > self.end {
            return Err(Error::invalid(
                "a, b",
                format!("[{a}, {b}] is not inside [{}, {}]", self.start, self.end),
            ));
        }
        let lo = self.flips_up_to(a);
        let hi = self.flips_up_to(b);
        Ok(StepSign {
            initial_sign: self.sign_at(a)?,
            flip_points: self.flip_points[lo..hi].to_vec(),
            start: a,
            end: b,
            ..*self
        })
    }

    /// `∫ f θ_n` over `[start, end]`, segment by segment.
    pub fn integrate_against<F: SegmentIntegrand + ?Sized>(&self, f: &F) -> Result<f64> {
        let mut total = 0.0;
        for (a, b, sign) in self.segments() {
            if b > a {
                total += sign as f64 * f.integral(a, b)?;
            }
        }
        Ok(self.amplitude * total)
    }

    /// Same as [`StepSign::integrate_against`] for integrands with a
    /// primitive, telescoped so each flip point costs one evaluation.
    pub fn integrate_primitive<P: Primitive + ?Sized>(&self, f: &P) -> f64 {
        let end = self.end.min(f.support_end().max(self.start));
        let k = self.flips_up_to(end);
        let flips = &self.flip_points[..k];
        let mut sign = self.initial_sign as f64;
        let mut total = -sign * f.primitive(self.start);
        for &x in flips {
            total += 2.0 * sign * f.primitive(x);
            sign = -sign;
        }
        total += sign * f.primitive(end);
        self.amplitude * total
    }

    /// `x_n(t) = ∫_start^t θ_n` at each of the sorted points `ts`.
    pub fn running_integral(&self, ts: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(ts.len());
        let mut acc = 0.0;
        let mut pos = self.start;
        let mut idx = 0;
        let mut sign = self.initial_sign as f64;
        for &t in ts {
            if t < pos || t > self.end {
                return Err(Error::invalid(
                    "t",
                    format!(
                        "points must be sorted inside [{}, {}]",
                        self.start, self.end
                    ),
                ));
            }
            while idx < self.flip_points.len() && self.flip_points[idx] <= t {
                let f = self.flip_points[idx];
                acc += sign * (f - pos);
                pos = f;
                sign = -sign;
                idx += 1;
            }
            acc += sign * (t - pos);
            pos = t;
            out.push(self.amplitude * acc);
        }
        Ok(out)
    }
}

/// Simulate one realization of `θ_n` with `β = schedule.beta(n)`.
pub fn build_theta(
    law: &InterarrivalLaw,
    n: u64,
    schedule: &ScaleSchedule,
    streams: &mut StreamSet,
) -> Result<StepSign> {
    let beta_n = schedule.beta(n)?;
    let (theta, _) = build_theta_with_path(law, n, beta_n, streams)?;
    Ok(theta)
}

/// `θ_n` together with the reward path it was compressed from.
pub fn build_theta_with_path(
    law: &InterarrivalLaw,
    n: u64,
    beta_n: f64,
    streams: &mut StreamSet,
) -> Result<(StepSign, RewardPath)> {
    let amplitude = 1.0 / normalization(law, beta_n)?;
    let path = simulate_reward(law, 1.0 / beta_n, streams)?;
    let theta = StepSign::from_reward_path(&path, n, beta_n, amplitude);
    Ok((theta, path))
}
