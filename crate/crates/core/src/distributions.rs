//! Inter-arrival laws `U_1`: sampling, moments, distribution function, hazard
//! (failure rate) and certified hazard floors.

use alloc::format;
use alloc::string::{String, ToString};
use core::f64::consts::{FRAC_2_PI, LN_2, PI};
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::{gamma_q, inverse_mills, ln_gamma, ln_gamma_q, ln_normal_sf, normal_sf};
use crate::{Error, Result};

/// Distribution of the i.i.d. gaps between renewal epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InterarrivalLaw {
    Exponential {
        rate: f64,
    },
    /// Support `{1, 2, ...}`, `P(U = k) = p (1-p)^{k-1}`.
    Geometric {
        p: f64,
    },
    /// Shape restricted to `(0, 1)` so that the hazard decreases to `rate`.
    Gamma {
        shape: f64,
        rate: f64,
    },
    UniformUnit,
    /// `|Z|` with `Z` standard normal.
    HalfNormal,
}

fn check_positive(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(
            field,
            format!("must be a finite positive number, got {v}"),
        ))
    }
}

impl InterarrivalLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential {
            rate: check_positive("rate", rate)?,
        })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self::Geometric { p })
        } else {
            Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")))
        }
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape < 1.0) {
            return Err(Error::invalid(
                "shape",
                format!("must lie in (0, 1), got {shape}"),
            ));
        }
        Ok(Self::Gamma {
            shape,
            rate: check_positive("rate", rate)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Geometric { .. } => "geometric",
            Self::Gamma { .. } => "gamma",
            Self::UniformUnit => "uniform",
            Self::HalfNormal => "half-normal",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Geometric { .. })
    }

    fn require_continuous(&self) -> Result<()> {
        if self.is_discrete() {
            Err(Error::DiscreteLaw { law: self.name() })
        } else {
            Ok(())
        }
    }

    /// One draw of `U_1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Self::Geometric { p } => {
                1.0 + Geometric::new(p).expect("validated p").sample(rng) as f64
            }
            // rand_distr handles shape < 1 by the boosting rejection scheme
            // Gamma(α) = Gamma(α + 1) · U^{1/α}, Gamma(α + 1) by Marsaglia–Tsang.
            Self::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            Self::UniformUnit => rng.random::<f64>(),
            Self::HalfNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z.abs()
            }
        }
    }

    /// First and second raw moments `(E[U], E[U²])`.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { rate } => (1.0 / rate, 2.0 / (rate * rate)),
            Self::Geometric { p } => (1.0 / p, (2.0 - p) / (p * p)),
            Self::Gamma { shape, rate } => (shape / rate, shape * (shape + 1.0) / (rate * rate)),
            Self::UniformUnit => (0.5, 1.0 / 3.0),
            Self::HalfNormal => (FRAC_2_PI.sqrt(), 1.0),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// `P(U > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Geometric { p } => (1.0 - p).powf(t.floor()),
            Self::Gamma { shape, rate } => gamma_q(shape, rate * t),
            Self::UniformUnit => (1.0 - t).max(0.0),
            Self::HalfNormal => 2.0 * normal_sf(t),
        }
    }

    /// Cumulative hazard `-ln P(U > t) = ∫_0^t r(s) ds`; `+∞` past the support.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        self.require_continuous()?;
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            Self::Exponential { rate } => rate * t,
            Self::Gamma { shape, rate } => -ln_gamma_q(shape, rate * t),
            Self::UniformUnit => {
                if t >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-t).ln_1p()
                }
            }
            Self::HalfNormal => -(LN_2 + ln_normal_sf(t)),
            Self::Geometric { .. } => unreachable!(),
        })
    }

    /// Probability density of a continuous law.
    pub fn density(&self, t: f64) -> Result<f64> {
        self.require_continuous()?;
        if t < 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            Self::Exponential { rate } => rate * (-rate * t).exp(),
            Self::Gamma { shape, rate } => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    (shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(shape)).exp()
                }
            }
            Self::UniformUnit => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::HalfNormal => 2.0 * (-0.5 * t * t).exp() / (2.0 * PI).sqrt(),
            Self::Geometric { .. } => unreachable!(),
        })
    }

    /// Hazard `r(t) = f(t) / (1 - F(t))`, `+∞` where the survival vanishes.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.require_continuous()?;
        if t < 0.0 {
            return Err(Error::invalid("t", format!("hazard needs t >= 0, got {t}")));
        }
        Ok(match *self {
            Self::Exponential { rate } => rate,
            Self::UniformUnit => {
                if t < 1.0 {
                    1.0 / (1.0 - t)
                } else {
                    f64::INFINITY
                }
            }
            Self::HalfNormal => inverse_mills(t),
            Self::Gamma { shape, rate } => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    let ln_f =
                        shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(shape);
                    (ln_f - ln_gamma_q(shape, rate * t)).exp()
                }
            }
            Self::Geometric { .. } => unreachable!(),
        })
    }

    /// A constant `λ > 0` with `r(t) >= λ` for every `t >= 0`.
    ///
    /// Half-normal: the Mills-ratio bound `r(t) >= (t + sqrt(t² + 8/π)) / 2`
    /// gives `λ = sqrt(2/π) = r(0)`, which is the infimum since `r` increases.
    pub fn hazard_floor(&self) -> Result<f64> {
        self.require_continuous()?;
        Ok(match *self {
            Self::Exponential { rate } => rate,
            Self::UniformUnit => 1.0,
            Self::HalfNormal => FRAC_2_PI.sqrt(),
            Self::Gamma { rate, .. } => rate,
            Self::Geometric { .. } => unreachable!(),
        })
    }
}

impl fmt::Display for InterarrivalLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Geometric { p } => write!(f, "geom:{p}"),
            Self::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            Self::UniformUnit => f.write_str("unif"),
            Self::HalfNormal => f.write_str("halfnormal"),
        }
    }
}

fn parse_number(input: &str, field: &'static str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        what: "law",
        input: input.to_string(),
        reason: format!("field `{field}` is not a number: `{raw}`"),
    })
}

fn reject(input: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::Parse {
            what: "law",
            input: input.to_string(),
            reason: format!("field `{field}` {reason}"),
        },
        other => other,
    }
}

impl FromStr for InterarrivalLaw {
    type Err = Error;

    /// `exp:<rate>`, `geom:<p>`, `gamma:<shape>,<rate>`, `unif`, `halfnormal`.
    fn from_str(s: &str) -> Result<Self> {
        let (tag, args) = match s.split_once(':') {
            Some((t, a)) => (t, Some(a)),
            None => (s, None),
        };
        let no_args = |law: Self| match args {
            None => Ok(law),
            Some(_) => Err(Error::Parse {
                what: "law",
                input: s.to_string(),
                reason: format!("`{tag}` takes no parameters"),
            }),
        };
        let need = |field: &'static str| {
            args.ok_or_else(|| Error::Parse {
                what: "law",
                input: s.to_string(),
                reason: format!("missing field `{field}`"),
            })
        };
        match tag {
            "exp" => {
                let rate = parse_number(s, "rate", need("rate")?)?;
                Self::exponential(rate).map_err(|e| reject(s, e))
            }
            "geom" => {
                let p = parse_number(s, "p", need("p")?)?;
                Self::geometric(p).map_err(|e| reject(s, e))
            }
            "gamma" => {
                let raw = need("shape")?;
                let (shape, rate) = raw.split_once(',').ok_or_else(|| Error::Parse {
                    what: "law",
                    input: s.to_string(),
                    reason: String::from("missing field `rate` (expected gamma:<shape>,<rate>)"),
                })?;
                let shape = parse_number(s, "shape", shape)?;
                let rate = parse_number(s, "rate", rate)?;
                Self::gamma(shape, rate).map_err(|e| reject(s, e))
            }
            "unif" => no_args(Self::UniformUnit),
            "halfnormal" => no_args(Self::HalfNormal),
            _ => Err(Error::Parse {
                what: "law",
                input: s.to_string(),
                reason: String::from("unknown law; expected exp:<rate>, geom:<p>, gamma:<shape>,<rate>, unif or halfnormal"),
            }),
        }
    }
}
