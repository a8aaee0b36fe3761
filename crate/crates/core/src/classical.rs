//! Fixed-design baselines (permutation, Besag–Clifford, negative binomial)
//! and calibrators turning discrete permutation p-values into e-values.

use std::cell::RefCell;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{IndicatorSource, IndicatorStream};
use crate::types::Indicator;

/// Support `{r/(T+1) : r = 1..=T+1}` of the permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteSupport {
    pub horizon: u64,
}

impl DiscreteSupport {
    pub fn new(horizon: u64) -> Self {
        Self { horizon }
    }

    pub fn points(&self) -> impl Iterator<Item = Ratio<u64>> + '_ {
        (1..=self.horizon + 1).map(move |r| Ratio::new(r, self.horizon + 1))
    }

    /// Index `r` of `p = r/(T+1)`, or an off-support error.
    pub fn rank(&self, p: f64) -> Result<u64> {
        let n = (self.horizon + 1) as f64;
        let r = (p * n).round();
        if (p * n - r).abs() > 1e-9 * n.max(1.0) || r < 1.0 || r > n {
            return Err(Error::OffSupport { p, horizon: self.horizon });
        }
        Ok(r as u64)
    }
}

/// `(1 + L)/(T + 1)`.
pub fn perm_pvalue(losses: u64, horizon: u64) -> Ratio<u64> {
    Ratio::new(1 + losses, horizon + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequentialPValue {
    pub p_value: Ratio<u64>,
    pub stop_time: u64,
    pub losses: u64,
}

impl SequentialPValue {
    pub fn p_f64(&self) -> f64 {
        *self.p_value.numer() as f64 / *self.p_value.denom() as f64
    }
}

/// Besag–Clifford: stop at the `h`-th loss or after `horizon` draws.
pub fn bc_from_source<S: IndicatorSource + ?Sized>(source: &mut S, h: u64, horizon: u64) -> Result<SequentialPValue> {
    if h == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("Besag–Clifford needs h >= 1 and T >= 1".into()));
    }
    let (mut t, mut l) = (0u64, 0u64);
    while t < horizon && l < h {
        l += source.next_indicator()?.is_loss() as u64;
        t += 1;
    }
    let p_value = if l == h { Ratio::new(h, t) } else { perm_pvalue(l, horizon) };
    Ok(SequentialPValue {
        p_value,
        stop_time: t,
        losses: l,
    })
}

pub fn bc_pvalue(indicators: &[Indicator], h: u64, horizon: u64) -> Result<SequentialPValue> {
    bc_from_source(&mut IndicatorStream::explicit(indicators.to_vec()), h, horizon)
}

/// Negative-binomial test: `h / gamma(h)` at the `h`-th loss.
pub fn negbin_from_source<S: IndicatorSource + ?Sized>(source: &mut S, h: u64) -> Result<SequentialPValue> {
    if h == 0 {
        return Err(Error::InvalidParameter("negative binomial test needs h >= 1".into()));
    }
    let (mut t, mut l) = (0u64, 0u64);
    while l < h {
        l += source.next_indicator()?.is_loss() as u64;
        t += 1;
    }
    Ok(SequentialPValue {
        p_value: Ratio::new(h, t),
        stop_time: t,
        losses: l,
    })
}

pub fn negbin_pvalue(indicators: &[Indicator], h: u64) -> Result<SequentialPValue> {
    negbin_from_source(&mut IndicatorStream::explicit(indicators.to_vec()), h)
}

/// Cached partial sums `v_n = sum 1/i` and `s_n = sum 1/sqrt(i)`.
#[derive(Debug, Clone, Default)]
pub struct CalibrationCache {
    harmonic: Vec<f64>,
    sqrt_sums: Vec<f64>,
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self {
            harmonic: vec![0.0],
            sqrt_sums: vec![0.0],
        }
    }

    fn ensure(&mut self, n: usize) {
        if self.harmonic.is_empty() {
            *self = Self::new();
        }
        while self.harmonic.len() <= n {
            let i = self.harmonic.len() as f64;
            self.harmonic.push(self.harmonic.last().unwrap() + 1.0 / i);
            self.sqrt_sums.push(self.sqrt_sums.last().unwrap() + 1.0 / i.sqrt());
        }
    }

    pub fn harmonic_number(&mut self, n: u64) -> f64 {
        self.ensure(n as usize);
        self.harmonic[n as usize]
    }

    pub fn sqrt_sum(&mut self, n: u64) -> f64 {
        self.ensure(n as usize);
        self.sqrt_sums[n as usize]
    }

    /// `(T+1) / (r v_{T+1})`.
    pub fn harmonic(&mut self, r: u64, horizon: u64) -> f64 {
        (horizon + 1) as f64 / (r as f64 * self.harmonic_number(horizon + 1))
    }

    /// `(T+1) / (sqrt(r) s_{T+1})`.
    pub fn sqrt(&mut self, r: u64, horizon: u64) -> f64 {
        (horizon + 1) as f64 / ((r as f64).sqrt() * self.sqrt_sum(horizon + 1))
    }
}

thread_local! {
    static CACHE: RefCell<CalibrationCache> = RefCell::new(CalibrationCache::new());
}

pub fn calibrate_harmonic(p: f64, horizon: u64) -> Result<f64> {
    let r = DiscreteSupport::new(horizon).rank(p)?;
    Ok(CACHE.with(|c| c.borrow_mut().harmonic(r, horizon)))
}

pub fn calibrate_sqrt(p: f64, horizon: u64) -> Result<f64> {
    let r = DiscreteSupport::new(horizon).rank(p)?;
    Ok(CACHE.with(|c| c.borrow_mut().sqrt(r, horizon)))
}

/// Exact harmonic calibrator at `p = r/(T+1)`.
pub fn calibrate_harmonic_exact(r: u64, horizon: u64) -> Result<BigRational> {
    if r == 0 || r > horizon + 1 {
        return Err(Error::OffSupport {
            p: r as f64 / (horizon + 1) as f64,
            horizon,
        });
    }
    let v: BigRational = (1..=horizon + 1)
        .map(|i| BigRational::new(BigInt::one(), BigInt::from(i)))
        .fold(BigRational::zero(), |a, b| a + b);
    Ok(BigRational::from_integer(BigInt::from(horizon + 1)) / (BigRational::from_integer(BigInt::from(r)) * v))
}

/// Continuous power calibrator `kappa p^(kappa - 1)`.
pub fn power_calibrator(p: f64, kappa: f64) -> f64 {
    kappa * p.powf(kappa - 1.0)
}

/// Calibrator values over the support, `r = 1..=T+1`.
pub fn calibrator_values(horizon: u64, f: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    DiscreteSupport::new(horizon)
        .points()
        .map(|p| f(*p.numer() as f64 / *p.denom() as f64))
        .collect()
}

/// A calibrator is admissible for the permutation p-value iff its values
/// over the support sum to `T + 1`.
pub fn check_admissible(values: &[f64], horizon: u64) -> bool {
    let n = (horizon + 1) as f64;
    values.len() as u64 == horizon + 1
        && values.iter().all(|v| *v >= 0.0)
        && (values.iter().sum::<f64>() - n).abs() <= 1e-10 * n.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::polya_sequence_probability_exact;

    fn paths(t: u32) -> impl Iterator<Item = Vec<Indicator>> {
        (0u32..1 << t).map(move |m| (0..t).map(|i| Indicator::from(m >> i & 1 == 1)).collect())
    }

    fn big(r: Ratio<u64>) -> BigRational {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn losses_at(t: usize, step: &[usize]) -> Vec<Indicator> {
        (1..=t).map(|i| Indicator::from(step.contains(&i))).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(perm_pvalue(0, 19), Ratio::new(1, 20));
        assert_eq!(perm_pvalue(4, 99), Ratio::new(1, 20));
        let r = bc_pvalue(&losses_at(100, &[10, 50]), 2, 100).unwrap();
        assert_eq!((r.p_value, r.stop_time), (Ratio::new(2, 50), 50));
        let r = bc_pvalue(&losses_at(100, &[30]), 2, 100).unwrap();
        assert_eq!((r.p_value, r.stop_time), (Ratio::new(2, 101), 100));
        assert_eq!(negbin_pvalue(&losses_at(10, &[4]), 1).unwrap().p_value, Ratio::new(1, 4));
        assert_eq!(negbin_pvalue(&losses_at(3, &[1, 2, 3]), 3).unwrap().p_value, Ratio::new(1, 1));
        assert!(matches!(negbin_pvalue(&losses_at(5, &[2]), 2), Err(Error::StreamExhausted(_))));
    }

    #[test]
    fn perm_exact_under_null() {
        for t in 1..=12u32 {
            let mut cdf = vec![BigRational::zero(); t as usize + 2];
            for path in paths(t) {
                let l = path.iter().filter(|i| i.is_loss()).count();
                cdf[l + 1] += polya_sequence_probability_exact(&path);
            }
            let mut acc = BigRational::zero();
            for (r, mass) in cdf.iter().enumerate().skip(1) {
                acc += mass.clone();
                assert_eq!(acc, big(Ratio::new(r as u64, t as u64 + 1)));
            }
        }
    }

    #[test]
    fn bc_matches_perm_decision() {
        for (t, h) in [(10u64, 1u64), (12, 2), (12, 3), (8, 2), (10, 2)] {
            let alpha = Ratio::new(h, t);
            for path in paths(t as u32) {
                let bc = bc_pvalue(&path, h, t).unwrap().p_value <= alpha;
                let l = path[..t as usize - 1].iter().filter(|i| i.is_loss()).count() as u64;
                let perm = perm_pvalue(l, t - 1) <= alpha;
                assert_eq!(bc, perm, "t={t} h={h}");
            }
        }
    }

    #[test]
    fn harmonic_values() {
        let got: Vec<BigRational> = (1..=3).map(|r| calibrate_harmonic_exact(r, 2).unwrap()).collect();
        let want = [18, 9, 6].map(|n| BigRational::new(n.into(), 11.into()));
        assert_eq!(got, want);
        for t in [1u64, 2, 7, 30] {
            let sum: BigRational = (1..=t + 1).map(|r| calibrate_harmonic_exact(r, t).unwrap()).sum();
            assert_eq!(sum, BigRational::from_integer((t + 1).into()));
            let v = calibrator_values(t, |p| calibrate_harmonic(p, t)).unwrap();
            assert!(check_admissible(&v, t));
            assert!(v[t as usize] < 1.0);
        }
        assert!(calibrate_harmonic(0.3, 2).is_err());
    }

    #[test]
    fn sqrt_dominance_and_admissibility() {
        for t in 1..=1000u64 {
            let v = calibrator_values(t, |p| calibrate_sqrt(p, t)).unwrap();
            assert!(check_admissible(&v, t));
            for (r, e) in v.iter().enumerate() {
                let p = (r + 1) as f64 / (t + 1) as f64;
                assert!(*e > 1.0 / (2.0 * p.sqrt()), "t={t} r={r}");
            }
        }
    }

    #[test]
    fn power_calibrator_inadmissible() {
        let v = calibrator_values(2, |p| Ok(power_calibrator(p, 0.5))).unwrap();
        let mean = v.iter().sum::<f64>() / 3.0;
        let want = (3f64.sqrt() + 1.5f64.sqrt() + 1.0) / 6.0;
        assert!((mean - want).abs() < 1e-15 && (mean - 0.6595).abs() < 1e-4);
        assert!(!check_admissible(&v, 2));
        assert!(check_admissible(&[1.0; 5], 4));
    }

    #[test]
    fn calibrated_e_values_give_valid_p_values() {
        for t in 1..=10u32 {
            let mut mass = vec![BigRational::zero(); t as usize + 1];
            for path in paths(t) {
                let l = path.iter().filter(|i| i.is_loss()).count();
                mass[l] += polya_sequence_probability_exact(&path);
            }
            for cal in [calibrate_harmonic as fn(f64, u64) -> Result<f64>, calibrate_sqrt] {
                for r in 1..=t as u64 + 1 {
                    let level = r as f64 / (t + 1) as f64;
                    let mut prob = 0.0;
                    for (l, m) in mass.iter().enumerate() {
                        let p = (l + 1) as f64 / (t + 1) as f64;
                        if 1.0 / cal(p, t as u64).unwrap() <= level {
                            prob += num_traits::ToPrimitive::to_f64(m).unwrap();
                        }
                    }
                    assert!(prob <= level + 1e-12);
                }
            }
        }
    }
}
