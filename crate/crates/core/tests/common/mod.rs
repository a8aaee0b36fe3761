//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use permbet::{Indicator, Strategy};

/// Every indicator sequence of length `t`, loss = bit set.
pub fn sequences(t: u32) -> impl Iterator<Item = Vec<Indicator>> {
    (0u32..1 << t).map(move |mask| (0..t).map(|i| Indicator::from(mask >> i & 1 == 1)).collect())
}

pub fn losses(seq: &[Indicator]) -> u64 {
    seq.iter().filter(|i| i.is_loss()).count() as u64
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Null probability `1 / ((t+1) C(t, l))` of one sequence of length `t`
/// with `l` losses (uniform limiting p-value, exchangeable draws).
pub fn polya_prob(t: u64, l: u64) -> f64 {
    1.0 / ((t + 1) as f64 * binomial(t, l) as f64)
}

pub fn polya_prob_exact(t: u64, l: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from((t + 1) as u128 * binomial(t, l)))
}

pub fn rational(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Wealth after `seq` by multiplying the strategy's bets directly.
pub fn wealth_by_bets(strategy: &Strategy, seq: &[Indicator]) -> f64 {
    let mut w = 1.0;
    let mut l = 0;
    for (i, ind) in seq.iter().enumerate() {
        if w == 0.0 {
            break;
        }
        let bet = strategy.bet(i as u64 + 1, l).expect("bet");
        w *= bet.payoff(ind.is_loss());
        l += ind.is_loss() as u64;
    }
    w
}

/// `ln[(T+1) C(T, l) p^l (1-p)^(T-l)]` via a direct log-factorial sum.
pub fn ln_binomial_likelihood(t: u64, l: u64, p: f64) -> f64 {
    let ln_fact = |n: u64| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let xlny = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * y.ln() };
    ((t + 1) as f64).ln() + ln_fact(t) - ln_fact(l) - ln_fact(t - l) + xlny(l as f64, p) + xlny((t - l) as f64, 1.0 - p)
}

/// Adaptive Simpson on `[a, b]`, first split into `panels` pieces.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let xm = 0.5 * (x0 + x1);
            let (f0, fm, f1) = (f(x0), f(xm), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            rec(f, x0, x1, f0, fm, f1, whole, tol / panels as f64, 50)
        })
        .sum()
}

/// Deterministic xorshift generator for test inputs.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
