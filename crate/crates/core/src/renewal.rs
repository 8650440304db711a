//! Renewal sequences, the renewal reward process, the Poisson-embedding
//! coupling and the exact counting laws for geometric inter-arrivals.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::distributions::InterarrivalLaw;
use crate::seed::StreamSet;
use crate::{Error, Result};

/// Absolute time tolerance when inverting the residual cumulative hazard.
pub const RESIDUAL_TIME_TOL: f64 = 1e-9;

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "horizon",
            format!("must be finite and positive, got {horizon}"),
        ))
    }
}

/// Renewal epochs `S_k = U_1 + ... + U_k` up to and including the first epoch
/// beyond the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalPath {
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

impl RenewalPath {
    /// Build from explicit epochs; the last epoch must exceed `horizon`.
    pub fn from_jumps(jump_times: Vec<f64>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if jump_times.windows(2).any(|w| w[1] < w[0])
            || jump_times.first().is_some_and(|&s| s < 0.0)
        {
            return Err(Error::invalid(
                "jump_times",
                "must be nonnegative and nondecreasing",
            ));
        }
        if jump_times.last().is_none_or(|&s| s <= horizon) {
            return Err(Error::invalid(
                "jump_times",
                "the last epoch must exceed the horizon",
            ));
        }
        Ok(RenewalPath {
            jump_times,
            horizon,
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.horizon {
            Ok(())
        } else {
            Err(Error::BeyondHorizon {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// `L(t)`: number of epochs in the closed interval `[0, t]`.
    pub fn count(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.count_unchecked(t))
    }

    pub(crate) fn count_unchecked(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// Epochs that fall inside `[0, horizon]`.
    pub fn epochs_within(&self) -> &[f64] {
        &self.jump_times[..self.count_unchecked(self.horizon)]
    }
}

/// Partial sums of i.i.d. draws from `law` until the horizon is exceeded.
pub fn simulate_renewal<R: Rng + ?Sized>(
    law: &InterarrivalLaw,
    horizon: f64,
    rng: &mut R,
) -> Result<RenewalPath> {
    check_horizon(horizon)?;
    let (m1, _) = law.moments();
    let mut jump_times = Vec::with_capacity((horizon / m1 * 1.1) as usize + 8);
    let mut s = 0.0;
    loop {
        s += law.sample(rng);
        jump_times.push(s);
        if s > horizon {
            break;
        }
    }
    Ok(RenewalPath {
        jump_times,
        horizon,
    })
}

/// Renewal path with Bernoulli(1/2) rewards: `T(t) = η_0 + Σ η_k 1{S_k <= t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardPath {
    pub base: RenewalPath,
    pub eta0: bool,
    /// `η_k`, aligned with `base.jump_times`.
    pub flips: Vec<bool>,
}

impl RewardPath {
    /// Attach rewards drawn from `rng` to an existing renewal path.
    pub fn with_rewards<R: Rng + ?Sized>(base: RenewalPath, rng: &mut R) -> Self {
        let eta0 = rng.random::<bool>();
        let flips = (0..base.jump_times.len())
            .map(|_| rng.random::<bool>())
            .collect();
        RewardPath { base, eta0, flips }
    }

    /// `T(t)`.
    pub fn reward_count(&self, t: f64) -> Result<usize> {
        self.base.check_time(t)?;
        let k = self.base.count_unchecked(t);
        Ok(self.eta0 as usize + self.flips[..k].iter().filter(|&&b| b).count())
    }

    /// `(-1)^{T(t)}`.
    pub fn parity(&self, t: f64) -> Result<i8> {
        Ok(if self.reward_count(t)? % 2 == 0 {
            1
        } else {
            -1
        })
    }
}

/// Renewal path with rewards: epochs from `streams.arrivals`, rewards from
/// `streams.rewards`.
pub fn simulate_reward(
    law: &InterarrivalLaw,
    horizon: f64,
    streams: &mut StreamSet,
) -> Result<RewardPath> {
    let base = simulate_renewal(law, horizon, &mut streams.arrivals)?;
    Ok(RewardPath::with_rewards(base, &mut streams.rewards))
}

/// Renewal path in which a subset of epochs, the flagged ones, forms a
/// Poisson process of intensity `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub base: RenewalPath,
    pub poisson_flags: Vec<bool>,
    pub lambda: f64,
}

impl CoupledPath {
    /// Number of flagged epochs in `[0, t]`.
    pub fn flagged_count(&self, t: f64) -> Result<usize> {
        self.base.check_time(t)?;
        let k = self.base.count_unchecked(t);
        Ok(self.poisson_flags[..k].iter().filter(|&&b| b).count())
    }

    /// Flagged epochs inside `[0, horizon]`.
    pub fn flagged_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.base
            .epochs_within()
            .iter()
            .zip(&self.poisson_flags)
            .filter_map(|(&s, &f)| f.then_some(s))
    }
}

/// Smallest age `a` in `[0, limit]` with `H(a) - λ a >= target`, by bisection.
fn invert_residual(law: &InterarrivalLaw, lambda: f64, target: f64, limit: f64) -> Result<f64> {
    let residual = |a: f64| -> Result<f64> { Ok(law.cumulative_hazard(a)? - lambda * a) };
    let (mut lo, mut hi) = (0.0, limit);
    while hi - lo > RESIDUAL_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Competing-clocks construction of a renewal path with an embedded Poisson
/// process of intensity `λ = law.hazard_floor()`.
///
/// Each gap is the minimum of the global exponential clock (stream
/// `clock`) and a residual clock with hazard `r(age) - λ` that restarts at
/// every epoch (stream `arrivals`). Epochs where the exponential clock rings
/// are flagged; the gap hazard is `λ + (r - λ) = r`, so the epochs form a
/// renewal process with law `law` and the flagged subset is Poisson(λ).
pub fn simulate_coupled(
    law: &InterarrivalLaw,
    horizon: f64,
    streams: &mut StreamSet,
) -> Result<CoupledPath> {
    check_horizon(horizon)?;
    let lambda = law.hazard_floor()?;
    let clock =
        Exp::new(lambda).map_err(|_| Error::invalid("lambda", "hazard floor must be positive"))?;
    let (m1, _) = law.moments();
    let capacity = (horizon / m1 * 1.1) as usize + 8;
    let mut jump_times = Vec::with_capacity(capacity);
    let mut poisson_flags = Vec::with_capacity(capacity);
    let mut next_ring = clock.sample(&mut streams.clock);
    let mut s = 0.0;
    loop {
        let remaining = next_ring - s;
        let target: f64 = Exp1.sample(&mut streams.arrivals);
        let residual_at_ring = law.cumulative_hazard(remaining)? - lambda * remaining;
        if residual_at_ring <= target {
            s = next_ring;
            next_ring += clock.sample(&mut streams.clock);
            poisson_flags.push(true);
        } else {
            s += invert_residual(law, lambda, target, remaining)?;
            poisson_flags.push(false);
        }
        jump_times.push(s);
        if s > horizon {
            break;
        }
    }
    Ok(CoupledPath {
        base: RenewalPath {
            jump_times,
            horizon,
        },
        poisson_flags,
        lambda,
    })
}

fn check_geometric(p: f64, s: f64, t: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    if !(s.is_finite() && t.is_finite() && s >= 0.0 && t >= s) {
        return Err(Error::invalid(
            "s, t",
            format!("need 0 <= s <= t, got s={s}, t={t}"),
        ));
    }
    Ok(())
}

/// Binomial coefficient as a float, zero outside `0 <= k <= n`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `P{L(s) = m, L(t) - L(s) = n}` for geometric(p) inter-arrivals on `{1, 2, ...}`:
/// `C(⌊s⌋, m) C(⌊t⌋-⌊s⌋, n) q^{⌊t⌋} (p/q)^{m+n}`; zero outside the support.
pub fn geometric_joint_pmf(p: f64, s: f64, t: f64, m: u64, n: u64) -> Result<f64> {
    check_geometric(p, s, t)?;
    let fs = s.floor() as u64;
    let ft = t.floor() as u64;
    if m > fs || n > ft - fs {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let jumps = (m + n) as i32;
    Ok(binomial(fs, m) * binomial(ft - fs, n) * p.powi(jumps) * q.powi((ft - m - n) as i32))
}

/// `P{L(t) - L(s) = n}`: binomial(⌊t⌋ - ⌊s⌋, p) at `n`.
pub fn geometric_increment_pmf(p: f64, s: f64, t: f64, n: u64) -> Result<f64> {
    check_geometric(p, s, t)?;
    let d = t.floor() as u64 - s.floor() as u64;
    if n > d {
        return Ok(0.0);
    }
    Ok(binomial(d, n) * p.powi(n as i32) * (1.0 - p).powi((d - n) as i32))
}

/// `P{L(t) = n} = q^{⌊t⌋} C(⌊t⌋, n) (p/q)^n`.
pub fn geometric_count_pmf(p: f64, t: f64, n: u64) -> Result<f64> {
    geometric_increment_pmf(p, 0.0, t, n)
}

/// Joint law of `(L(s), L(t) - L(s))` for geometric(p) inter-arrivals by
/// exhaustive enumeration of inter-arrival tuples, independent of the closed
/// forms. Entry `[m][n]`.
///
/// Every branch stops at the first epoch beyond `⌊t⌋`, whose probability
/// `q^{⌊t⌋ - S}` is lumped, so the enumeration is exact. Cost grows like
/// `2^{⌊t⌋}`.
pub fn geometric_joint_by_enumeration(p: f64, s: f64, t: f64) -> Result<Vec<Vec<f64>>> {
    check_geometric(p, s, t)?;
    let fs = s.floor() as u64;
    let ft = t.floor() as u64;
    if ft > 30 {
        return Err(Error::invalid(
            "t",
            format!("enumeration is limited to ⌊t⌋ <= 30, got {ft}"),
        ));
    }
    let q = 1.0 - p;
    let mut table = alloc::vec![alloc::vec![0.0; (ft - fs + 1) as usize]; (fs + 1) as usize];
    // Depth-first over (epoch, L(s), L(t) - L(s), probability).
    let mut stack = alloc::vec![(0u64, 0usize, 0usize, 1.0f64)];
    while let Some((at, m, n, w)) = stack.pop() {
        table[m][n] += w * q.powi((ft - at) as i32);
        for k in 1..=ft - at {
            let next = at + k;
            let wk = w * p * q.powi(k as i32 - 1);
            if next <= fs {
                stack.push((next, m + 1, n, wk));
            } else {
                stack.push((next, m, n + 1, wk));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn count_uses_closed_interval() {
        let path = RenewalPath::from_jumps(vec![1.0, 2.0, 3.0, 5.0], 4.0).unwrap();
        assert_eq!(path.count(2.0).unwrap(), 2);
        assert_eq!(path.count(0.0).unwrap(), 0);
        assert_eq!(path.count(1.0 - 1e-12).unwrap(), 0);
        assert_eq!(path.count(4.0).unwrap(), 3);
        assert!(matches!(path.count(4.5), Err(Error::BeyondHorizon { .. })));
        assert!(path.count(-0.1).is_err());
    }

    #[test]
    fn from_jumps_validates() {
        assert!(RenewalPath::from_jumps(vec![1.0, 2.0], 3.0).is_err());
        assert!(RenewalPath::from_jumps(vec![2.0, 1.0, 5.0], 3.0).is_err());
        assert!(RenewalPath::from_jumps(vec![], 3.0).is_err());
        assert!(RenewalPath::from_jumps(vec![5.0], 0.0).is_err());
    }

    #[test]
    fn reward_count_examples() {
        let base = RenewalPath::from_jumps(vec![1.0, 2.0, 5.0], 4.0).unwrap();
        let silent = RewardPath {
            base: base.clone(),
            eta0: false,
            flips: vec![false; 3],
        };
        for t in [0.0, 1.5, 4.0] {
            assert_eq!(silent.reward_count(t).unwrap(), 0);
        }
        let started = RewardPath {
            base,
            eta0: true,
            flips: vec![true, false, true],
        };
        assert_eq!(started.reward_count(0.5).unwrap(), 1);
        assert_eq!(started.reward_count(1.0).unwrap(), 2);
        assert_eq!(started.reward_count(3.0).unwrap(), 2);
        assert_eq!(started.parity(3.0).unwrap(), 1);
    }

    #[test]
    fn geometric_pmf_examples() {
        assert!((geometric_joint_pmf(0.5, 0.0, 1.0, 0, 0).unwrap() - 0.5).abs() < 1e-15);
        let total: f64 = (0..=2)
            .flat_map(|m| (0..=2).map(move |n| (m, n)))
            .map(|(m, n)| geometric_joint_pmf(0.5, 2.0, 4.0, m, n).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((geometric_increment_pmf(0.5, 0.2, 2.9, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(geometric_increment_pmf(0.3, 1.5, 1.7, 0).unwrap(), 1.0);
        assert!(
            (geometric_increment_pmf(0.3, 1.0, 4.0, 0).unwrap() - 0.7f64.powi(3)).abs() < 1e-15
        );
        assert_eq!(geometric_joint_pmf(0.3, 1.0, 3.0, 2, 0).unwrap(), 0.0);
        assert_eq!(geometric_increment_pmf(0.3, 1.0, 3.0, 3).unwrap(), 0.0);
        assert!(geometric_joint_pmf(1.0, 1.0, 3.0, 0, 0).is_err());
        assert!(geometric_increment_pmf(0.5, 3.0, 1.0, 0).is_err());
    }

    #[test]
    fn increment_pmf_is_joint_marginal() {
        for &(p, s, t) in &[(0.4, 2.5, 5.2), (0.3, 1.0, 3.0), (0.7, 0.0, 6.9)] {
            let d = t.floor() as u64 - s.floor() as u64;
            for n in 0..=d {
                let marginal: f64 = (0..=s.floor() as u64)
                    .map(|m| geometric_joint_pmf(p, s, t, m, n).unwrap())
                    .sum();
                assert!((marginal - geometric_increment_pmf(p, s, t, n).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exponential_coupling_flags_everything() {
        let law = InterarrivalLaw::exponential(2.0).unwrap();
        let mut streams = StreamSet::new(3);
        let path = simulate_coupled(&law, 50.0, &mut streams).unwrap();
        assert!(path.poisson_flags.iter().all(|&f| f));
        assert_eq!(path.lambda, 2.0);
    }

    #[test]
    fn coupled_flags_are_a_subset() {
        for law in [
            InterarrivalLaw::UniformUnit,
            InterarrivalLaw::HalfNormal,
            InterarrivalLaw::Gamma {
                shape: 0.5,
                rate: 2.0,
            },
        ] {
            let mut streams = StreamSet::new(11);
            let path = simulate_coupled(&law, 20.0, &mut streams).unwrap();
            assert!(path.base.jump_times.windows(2).all(|w| w[0] < w[1]));
            for i in 0..=200 {
                let t = 0.1 * i as f64;
                assert!(path.flagged_count(t).unwrap() <= path.base.count(t).unwrap());
            }
            assert!(path.poisson_flags.iter().any(|&f| !f));
        }
        let geometric = InterarrivalLaw::geometric(0.5).unwrap();
        assert!(simulate_coupled(&geometric, 5.0, &mut StreamSet::new(1)).is_err());
    }
}
