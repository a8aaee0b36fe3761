//! Backward reconstruction of loss-count e-values as sequential bets, and
//! the anytime-valid permutation and Besag–Clifford p-values built on it.
//!
//! Computations are generic over [`Scalar`] so the same code runs in `f64`
//! and in exact rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Alpha, Indicator};

/// Number type for reconstruction: `f64` or [`BigRational`].
pub trait Scalar: Clone + PartialOrd + Num + FromPrimitive + Debug {
    /// `floor(self)`; the float version absorbs rounding just below an
    /// integer.
    fn floor_u64(&self) -> u64;
    /// Equality with `target` up to the float summation tolerance.
    fn sum_matches(&self, target: &Self) -> bool;
    fn to_f64_lossy(&self) -> f64;
    fn from_u64(v: u64) -> Self {
        <Self as FromPrimitive>::from_u64(v).unwrap()
    }
}

impl Scalar for f64 {
    fn floor_u64(&self) -> u64 {
        (self + 1e-9).floor().max(0.0) as u64
    }

    fn sum_matches(&self, target: &Self) -> bool {
        (self - target).abs() <= 1e-10 * target.abs().max(1.0)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn floor_u64(&self) -> u64 {
        self.floor().to_integer().to_u64().unwrap_or(0)
    }

    fn sum_matches(&self, target: &Self) -> bool {
        self == target
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Betting function `E_t(l)`, `l = 0..=t`, with `sum_l E_t(l) = t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EValueVector<S = f64> {
    pub horizon: u64,
    pub values: Vec<S>,
}

impl<S: Scalar> EValueVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty e-value vector".into()));
        }
        if values.iter().any(|v| *v < S::zero()) {
            return Err(Error::InvalidParameter("e-values must be nonnegative".into()));
        }
        let horizon = values.len() as u64 - 1;
        let sum = values.iter().cloned().fold(S::zero(), |a, b| a + b);
        let expected = <S as Scalar>::from_u64(horizon + 1);
        if !sum.sum_matches(&expected) {
            return Err(Error::InvalidTarget {
                expected: expected.to_f64_lossy(),
                actual: sum.to_f64_lossy(),
            });
        }
        Ok(Self { horizon, values })
    }

    pub fn get(&self, losses: u64) -> &S {
        &self.values[losses as usize]
    }
}

/// Per-step bets `B_{r|l}` for `r = 1..=t`, `l = 0..r`, and the
/// intermediate vectors `E_0, ..., E_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionTable<S = f64> {
    pub horizon: u64,
    /// `vectors[r]` is `E_r`.
    pub vectors: Vec<Vec<S>>,
    /// `bets[r - 1][l]` is `[B_{r|l}(0), B_{r|l}(1)]`.
    pub bets: Vec<Vec<[S; 2]>>,
}

impl<S: Scalar> ReconstructionTable<S> {
    /// Bet at step `r` after `losses` losses.
    pub fn bet(&self, r: u64, losses: u64) -> &[S; 2] {
        &self.bets[r as usize - 1][losses as usize]
    }

    /// Running wealth along an indicator path of length at most the horizon.
    pub fn wealth_path(&self, indicators: &[Indicator]) -> Vec<S> {
        let mut w = S::one();
        let mut l = 0u64;
        indicators
            .iter()
            .enumerate()
            .map(|(i, ind)| {
                let bet = self.bet(i as u64 + 1, l);
                w = w.clone() * bet[ind.is_loss() as usize].clone();
                l += ind.is_loss() as u64;
                w.clone()
            })
            .collect()
    }

    /// Wealth after the whole path.
    pub fn product(&self, indicators: &[Indicator]) -> S {
        self.wealth_path(indicators).pop().unwrap_or_else(S::one)
    }
}

fn ratio<S: Scalar>(num: &S, den: &S) -> S {
    if den.is_zero() {
        S::zero()
    } else {
        num.clone() / den.clone()
    }
}

/// Turns a betting function at horizon `t` into a sequential strategy whose
/// wealth at `t` equals `E_t(L_t)` on every path.
pub fn backward_reconstruct<S: Scalar>(target: &EValueVector<S>) -> Result<ReconstructionTable<S>> {
    let target = EValueVector::new(target.values.clone())?;
    let t = target.horizon as usize;
    let mut vectors: Vec<Vec<S>> = vec![Vec::new(); t + 1];
    vectors[t] = target.values;
    let mut bets: Vec<Vec<[S; 2]>> = vec![Vec::new(); t];
    for r in (1..=t).rev() {
        let er = &vectors[r];
        let prev: Vec<S> = (0..r)
            .map(|l| {
                let up = <S as Scalar>::from_u64(l as u64 + 1) * er[l + 1].clone();
                let stay = <S as Scalar>::from_u64((r - l) as u64) * er[l].clone();
                (up + stay) / <S as Scalar>::from_u64(r as u64 + 1)
            })
            .collect();
        bets[r - 1] = (0..r)
            .map(|l| [ratio(&er[l], &prev[l]), ratio(&er[l + 1], &prev[l])])
            .collect();
        vectors[r - 1] = prev;
    }
    Ok(ReconstructionTable {
        horizon: t as u64,
        vectors,
        bets,
    })
}

/// Betting function at horizon `horizon` paying `1/alpha` for fewer than
/// `k` losses, the remainder `horizon + 1 - k/alpha` at exactly `k` losses,
/// and 0 above.
pub fn threshold_target<S: Scalar>(horizon: u64, k: u64, alpha: &S) -> Result<EValueVector<S>> {
    let inv = S::one() / alpha.clone();
    let n = horizon as usize + 1;
    let k = (k as usize).min(n);
    let mut values = vec![S::zero(); n];
    for v in values.iter_mut().take(k) {
        *v = inv.clone();
    }
    if k < n {
        let a = <S as Scalar>::from_u64(n as u64) - <S as Scalar>::from_u64(k as u64) * inv.clone();
        values[k] = if a < S::zero() { S::zero() } else { a };
    }
    // Absorb float rounding of the remainder into the sum check.
    EValueVector::new(values)
}

/// Betting function of the level-`alpha` permutation test with `horizon`
/// resamples.
pub fn perm_target_evalue(horizon: u64, alpha: Alpha) -> EValueVector<f64> {
    perm_target(horizon, &alpha.value()).expect("permutation target is always valid")
}

pub fn perm_target<S: Scalar>(horizon: u64, alpha: &S) -> Result<EValueVector<S>> {
    let k = (<S as Scalar>::from_u64(horizon + 1) * alpha.clone()).floor_u64();
    threshold_target(horizon, k, alpha)
}

/// Horizon at which the level-`alpha` Besag–Clifford decision is settled:
/// `min(T_max, ceil(h/alpha) - 1)`.
pub fn bc_target_horizon<S: Scalar>(h: u64, t_max: Option<u64>, alpha: &S) -> u64 {
    let q = <S as Scalar>::from_u64(h) / alpha.clone();
    let fl = q.floor_u64();
    let ceil = if <S as Scalar>::from_u64(fl) >= q { fl } else { fl + 1 };
    let horizon = ceil.saturating_sub(1);
    t_max.map_or(horizon, |m| m.min(horizon))
}

/// Betting function of the level-`alpha` Besag–Clifford test with `h`
/// losses and at most `t_max` resamples (`None` for unbounded).
pub fn bc_target<S: Scalar>(h: u64, t_max: Option<u64>, alpha: &S) -> Result<EValueVector<S>> {
    if h == 0 {
        return Err(Error::InvalidParameter("h must be at least 1".into()));
    }
    let horizon = bc_target_horizon(h, t_max, alpha);
    let k = (<S as Scalar>::from_u64(horizon + 1) * alpha.clone()).floor_u64().min(h);
    threshold_target(horizon, k, alpha)
}

/// Anytime-valid permutation p-value `(L + 1 + T - tau)/(T + 1)`. Past
/// `tau = T` the value is frozen at `tau = T`.
pub fn anytime_perm_pvalue(losses: u64, tau: u64, horizon: u64) -> Ratio<u64> {
    let tau = tau.min(horizon);
    let losses = losses.min(tau);
    Ratio::new(losses + 1 + horizon - tau, horizon + 1)
}

/// Anytime-valid Besag–Clifford p-value
/// `min(h/(tau + h - L), (L + 1 + T_max - tau)/(T_max + 1))`.
pub fn anytime_bc_pvalue(losses: u64, tau: u64, t_max: Option<u64>, h: u64) -> Ratio<u64> {
    let tau = t_max.map_or(tau, |m| tau.min(m));
    let losses = losses.min(tau);
    let first = Ratio::new(h, tau + h - losses.min(h));
    match t_max {
        Some(m) => first.min(anytime_perm_pvalue(losses, tau, m)),
        None => first,
    }
}

/// Anytime permutation p-value after each prefix of `indicators`.
pub fn anytime_perm_path(indicators: &[Indicator], horizon: u64) -> Vec<Ratio<u64>> {
    let mut l = 0;
    indicators
        .iter()
        .take(horizon as usize)
        .enumerate()
        .map(|(i, ind)| {
            l += ind.is_loss() as u64;
            anytime_perm_pvalue(l, i as u64 + 1, horizon)
        })
        .collect()
}

/// Anytime Besag–Clifford p-value after each prefix, frozen once `h`
/// losses are seen or `t_max` is reached.
pub fn anytime_bc_path(indicators: &[Indicator], t_max: Option<u64>, h: u64) -> Vec<Ratio<u64>> {
    let mut l = 0;
    let mut frozen: Option<Ratio<u64>> = None;
    indicators
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            if let Some(v) = frozen {
                return v;
            }
            l += ind.is_loss() as u64;
            let tau = i as u64 + 1;
            let v = anytime_bc_pvalue(l, tau, t_max, h);
            if l >= h || t_max.is_some_and(|m| tau >= m) {
                frozen = Some(v);
            }
            v
        })
        .collect()
}

pub fn to_big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{binomial_bet, binomial_wealth};
    use num_traits::Zero;

    fn paths(t: u32) -> impl Iterator<Item = Vec<Indicator>> {
        (0u32..1 << t).map(move |m| (0..t).map(|i| Indicator::from(m >> i & 1 == 1)).collect())
    }

    #[test]
    fn one_step() {
        let p = 0.3;
        let table = backward_reconstruct(&EValueVector::new(vec![2.0 - 2.0 * p, 2.0 * p]).unwrap()).unwrap();
        let b = table.bet(1, 0);
        assert!((b[0] - 1.4).abs() < 1e-15 && (b[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn binomial_target_recovers_binomial_bets() {
        let (t, p) = (3u64, 0.3);
        let target = EValueVector::new((0..=t).map(|l| binomial_wealth(t, l, p).exp()).collect()).unwrap();
        let table = backward_reconstruct(&target).unwrap();
        for r in 1..=t {
            for l in 0..r {
                let want = binomial_bet(r, l, p, false);
                let got = table.bet(r, l);
                assert!((got[0] - want.b0).abs() < 1e-12 && (got[1] - want.b1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_target() {
        assert!(matches!(
            EValueVector::new(vec![1.0, 2.0]),
            Err(Error::InvalidTarget { .. })
        ));
        assert!(EValueVector::new(vec![3.0, -1.0]).is_err());
    }

    #[test]
    fn perm_targets() {
        let a = Alpha::new(0.05).unwrap();
        let e = perm_target_evalue(19, a);
        assert_eq!(e.values[0], 20.0);
        assert!(e.values[1..].iter().all(|&v| v == 0.0));
        let e = perm_target_evalue(9, a);
        assert_eq!(e.values[0], 10.0);
        assert!(e.values[1..].iter().all(|&v| v == 0.0));
        for t in [0u64, 5, 37, 99, 1000] {
            let e = perm_target_evalue(t, a);
            let s: f64 = e.values.iter().sum();
            assert!((s - (t + 1) as f64).abs() < 1e-9);
            assert!(e.values.iter().all(|&v| v <= 20.0));
        }
        let table = backward_reconstruct(&perm_target_evalue(19, a)).unwrap();
        assert!((table.product(&[Indicator::Win; 19]) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn bc_h1_is_aggressive() {
        let table = backward_reconstruct(&bc_target(1, None, &0.05).unwrap()).unwrap();
        assert_eq!(table.horizon, 19);
        for r in 1..=19u64 {
            let b = table.bet(r, 0);
            assert!((b[0] - (r + 1) as f64 / r as f64).abs() < 1e-12);
            assert_eq!(b[1], 0.0);
        }
    }

    #[test]
    fn exact_products_and_sums() {
        let alpha = BigRational::new(1.into(), 7.into());
        for t in 0..=8u64 {
            let table = backward_reconstruct(&perm_target(t, &alpha).unwrap()).unwrap();
            for (r, v) in table.vectors.iter().enumerate() {
                let s = v.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
                assert_eq!(s, <BigRational as Scalar>::from_u64(r as u64 + 1));
            }
            for path in paths(t as u32) {
                let l = path.iter().filter(|i| i.is_loss()).count();
                assert_eq!(table.product(&path), table.vectors[t as usize][l]);
            }
        }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(anytime_perm_pvalue(4, 100, 100), Ratio::new(5, 101));
        assert_eq!(anytime_perm_pvalue(1, 4, 10), Ratio::new(8, 11));
        assert_eq!(anytime_perm_pvalue(0, 0, 10), Ratio::new(1, 1));
        assert_eq!(anytime_bc_pvalue(9, 100, Some(200), 10), Ratio::new(10, 101));
        for k in 1..30 {
            assert_eq!(anytime_bc_pvalue(1, k, None, 1), Ratio::new(1, k));
        }
        // At the stopping time the value is the classical one.
        assert_eq!(anytime_bc_pvalue(2, 50, Some(100), 2), Ratio::new(2, 50));
        assert_eq!(anytime_bc_pvalue(1, 100, Some(100), 2), Ratio::new(2, 101));
    }

    #[test]
    fn perm_path_invariant_under_loss() {
        for t in 1..=12u32 {
            for path in paths(t) {
                let pv = anytime_perm_path(&path, t as u64);
                let mut prev = Ratio::new(1, 1);
                for (v, ind) in pv.iter().zip(&path) {
                    if ind.is_loss() {
                        assert_eq!(*v, prev);
                    } else {
                        assert!(*v < prev);
                    }
                    prev = *v;
                }
            }
        }
    }
}
