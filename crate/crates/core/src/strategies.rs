//! Betting strategies.
//!
//! A bet issued at step `t` with `losses = L_{t-1}` is a pair of payoff
//! factors `(b0, b1)` satisfying
//! `b0 (t - L)/(t + 1) + b1 (L + 1)/(t + 1) = 1`, which makes the wealth a
//! martingale under exchangeability. Wealth functions return log-wealth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{integrate, ln_beta, ln_binom_sf, ln_choose};
use crate::types::Alpha;

/// Payoff factors on a win (`b0`) and on a loss (`b1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bet {
    pub b0: f64,
    pub b1: f64,
}

impl Bet {
    pub const PASSIVE: Bet = Bet { b0: 1.0, b1: 1.0 };

    /// Null expectation of the bet minus one, for the `(t, losses)` it was
    /// issued at.
    pub fn constraint_residual(&self, t: u64, losses: u64) -> f64 {
        let n = (t + 1) as f64;
        self.b0 * (t - losses) as f64 / n + self.b1 * (losses + 1) as f64 / n - 1.0
    }

    pub fn payoff(&self, loss: bool) -> f64 {
        if loss {
            self.b1
        } else {
            self.b0
        }
    }
}

pub fn passive_bet(_t: u64, _losses: u64) -> Bet {
    Bet::PASSIVE
}

/// `((t+1)/t, 0)`: everything on a win. Only defined before the first loss.
pub fn aggressive_bet(t: u64, losses: u64) -> Result<Bet> {
    if losses > 0 {
        return Err(Error::CalledAfterLoss);
    }
    Ok(Bet {
        b0: (t + 1) as f64 / t as f64,
        b1: 0.0,
    })
}

/// Log-optimal bet against a limiting loss probability `p`. With
/// `futility_override` the bet is placed as if `p = 0`.
pub fn binomial_bet(t: u64, losses: u64, p: f64, futility_override: bool) -> Bet {
    let p = if futility_override { 0.0 } else { p };
    let n = (t + 1) as f64;
    Bet {
        b0: (1.0 - p) * n / (t - losses) as f64,
        b1: p * n / (losses + 1) as f64,
    }
}

/// `0 * ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `ln[(T+1) C(T, l) p^l (1-p)^(T-l)]`.
pub fn binomial_wealth(horizon: u64, losses: u64, p: f64) -> f64 {
    let (n, l) = (horizon as f64, losses as f64);
    ((n + 1.0).ln() + ln_choose(n, l) + xlny(l, p) + xlny(n - l, 1.0 - p)).max(f64::NEG_INFINITY)
}

/// Wealth of the binomial mixture with a uniform prior on `[0, c]`:
/// `ln[(1 - Bin(l; T+1, c)) / c]`.
pub fn mixture_uniform_wealth(horizon: u64, losses: u64, c: f64) -> f64 {
    ln_binom_sf(losses, horizon + 1, c) - c.ln()
}

/// Wealth of the binomial mixture with a `Beta(a, b)` prior.
pub fn mixture_beta_wealth(horizon: u64, losses: u64, a: f64, b: f64) -> f64 {
    let (n, l) = (horizon as f64, losses as f64);
    ln_beta(a + l, b + n - l) - ln_beta(l + 1.0, n - l + 1.0) - ln_beta(a, b)
}

/// Default binomial parameter `1 / ceil(sqrt(2 pi e^(1/6)) / alpha)`.
pub fn default_binomial_p(alpha: Alpha) -> f64 {
    let k = (2.0 * std::f64::consts::PI * (1.0f64 / 6.0).exp()).sqrt();
    1.0 / (k / alpha.value()).ceil()
}

/// Default mixture bound `c = 0.9 alpha`.
pub fn default_mixture_c(alpha: Alpha) -> f64 {
    0.9 * alpha.value()
}

/// Working prior over the limiting loss probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prior {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    Point { p: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Uniform { lo, hi } => (0.0..1.0).contains(&lo) && hi > lo && hi <= 1.0,
            Prior::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Prior::Point { p } => (0.0..=1.0).contains(&p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid prior {self:?}")))
        }
    }
}

/// Posterior mean of the limiting loss probability after `t - 1` rounds
/// with `losses` losses, under `prior`.
pub fn posterior_mean(t: u64, losses: u64, prior: &Prior) -> Result<f64> {
    let (lo, hi, ea, eb) = match *prior {
        Prior::Point { p } => return Ok(p),
        Prior::Uniform { lo, hi } => (lo, hi, 0.0, 0.0),
        Prior::Beta { a, b } => (0.0, 1.0, a - 1.0, b - 1.0),
    };
    let degenerate = || Error::DegeneratePosterior { t, losses };
    let ea = losses as f64 + ea;
    let eb = (t - 1 - losses) as f64 + eb;
    let log_g = move |p: f64| xlny(ea, p) + xlny(eb, 1.0 - p);

    let mode = if ea > 0.0 && eb > 0.0 {
        ea / (ea + eb)
    } else if ea <= 0.0 && eb >= 0.0 && ea + eb != 0.0 {
        0.0
    } else if ea >= 0.0 && eb <= 0.0 && ea + eb != 0.0 {
        1.0
    } else {
        0.5
    }
    .clamp(lo, hi);
    let sd = if ea > 0.0 && eb > 0.0 {
        (mode * (1.0 - mode) / (ea + eb + 1.0)).sqrt()
    } else {
        1.0 / (ea.abs() + eb.abs() + 2.0)
    };
    let mut breaks = vec![mode];
    for k in [1.0, 4.0, 16.0] {
        breaks.push(mode - k * sd);
        breaks.push(mode + k * sd);
    }
    let scale = breaks
        .iter()
        .chain([lo, hi].iter())
        .map(|&x| x.clamp(lo, hi))
        .map(log_g)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Err(degenerate());
    }
    let density = |p: f64| (log_g(p) - scale).exp();
    let den = integrate(density, lo, hi, &breaks, 1e-300, 1e-13);
    let num = integrate(|p| p * density(p), lo, hi, &breaks, 1e-300, 1e-13);
    if !(den > 0.0 && den.is_finite() && num.is_finite()) {
        return Err(degenerate());
    }
    Ok((num / den).clamp(lo, hi))
}

/// Bet with `p_t` set to the posterior mean under the working prior.
pub fn mimicked_logopt_bet(t: u64, losses: u64, prior: &Prior) -> Result<Bet> {
    Ok(binomial_bet(t, losses, posterior_mean(t, losses, prior)?, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Passive,
    Aggressive,
    Binomial,
    MixtureUniform,
    MixtureBeta,
    MimickedLogopt,
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "passive" => StrategyKind::Passive,
            "aggressive" => StrategyKind::Aggressive,
            "binomial" => StrategyKind::Binomial,
            "mixture" | "mixture_uniform" => StrategyKind::MixtureUniform,
            "mixture_beta" => StrategyKind::MixtureBeta,
            "mimicked" | "mimicked_logopt" => StrategyKind::MimickedLogopt,
            other => return Err(Error::InvalidParameter(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Serializable strategy description. Missing parameters fall back to
/// defaults derived from `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Alpha>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            p: None,
            c: None,
            a: None,
            b: None,
            alpha: None,
            prior: None,
        }
    }

    pub fn passive() -> Self {
        Self::new(StrategyKind::Passive)
    }

    pub fn aggressive() -> Self {
        Self::new(StrategyKind::Aggressive)
    }

    pub fn binomial(p: f64) -> Self {
        Self {
            p: Some(p),
            ..Self::new(StrategyKind::Binomial)
        }
    }

    pub fn mixture_uniform(c: f64) -> Self {
        Self {
            c: Some(c),
            ..Self::new(StrategyKind::MixtureUniform)
        }
    }

    pub fn mixture_beta(a: f64, b: f64) -> Self {
        Self {
            a: Some(a),
            b: Some(b),
            ..Self::new(StrategyKind::MixtureBeta)
        }
    }

    pub fn mimicked(prior: Prior) -> Self {
        Self {
            prior: Some(prior),
            ..Self::new(StrategyKind::MimickedLogopt)
        }
    }

    pub fn with_alpha(mut self, alpha: Alpha) -> Self {
        self.alpha = Some(alpha);
        self
    }

    /// Resolves defaults and validates parameters. `alpha` is used when the
    /// config does not carry its own.
    pub fn build(&self, alpha: Option<Alpha>) -> Result<Strategy> {
        let alpha = self.alpha.or(alpha);
        let need_alpha = |what: &str| {
            alpha.ok_or_else(|| Error::InvalidParameter(format!("{what} needs either an explicit value or alpha")))
        };
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let strategy = match self.kind {
            StrategyKind::Passive => Strategy::Passive,
            StrategyKind::Aggressive => Strategy::Aggressive,
            StrategyKind::Binomial => {
                let p = match self.p {
                    Some(p) => p,
                    None => default_binomial_p(need_alpha("binomial p")?),
                };
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("binomial p must lie in [0, 1], got {p}"));
                }
                Strategy::Binomial { p }
            }
            StrategyKind::MixtureUniform => {
                let c = match self.c {
                    Some(c) => c,
                    None => default_mixture_c(need_alpha("mixture c")?),
                };
                if !(c > 0.0 && c <= 1.0) {
                    return bad(format!("mixture c must lie in (0, 1], got {c}"));
                }
                Strategy::MixtureUniform { c }
            }
            StrategyKind::MixtureBeta => {
                let (a, b) = match (self.a, self.b) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return bad("mixture_beta needs both a and b".into()),
                };
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad(format!("beta parameters must be positive, got a={a}, b={b}"));
                }
                Strategy::MixtureBeta { a, b }
            }
            StrategyKind::MimickedLogopt => {
                let prior = match self.prior {
                    Some(prior) => prior,
                    None => Prior::Uniform {
                        lo: 0.0,
                        hi: self.c.map_or_else(|| need_alpha("mimicked prior").map(default_mixture_c), Ok)?,
                    },
                };
                prior.validate()?;
                Strategy::MimickedLogopt { prior }
            }
        };
        Ok(strategy)
    }
}

/// A fully parameterized strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Passive,
    Aggressive,
    Binomial { p: f64 },
    MixtureUniform { c: f64 },
    MixtureBeta { a: f64, b: f64 },
    MimickedLogopt { prior: Prior },
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Passive => StrategyKind::Passive,
            Strategy::Aggressive => StrategyKind::Aggressive,
            Strategy::Binomial { .. } => StrategyKind::Binomial,
            Strategy::MixtureUniform { .. } => StrategyKind::MixtureUniform,
            Strategy::MixtureBeta { .. } => StrategyKind::MixtureBeta,
            Strategy::MimickedLogopt { .. } => StrategyKind::MimickedLogopt,
        }
    }

    /// Closed-form log-wealth after `t` rounds with `losses` losses, for
    /// strategies whose wealth depends only on the loss count.
    pub fn closed_form_log_wealth(&self, t: u64, losses: u64) -> Option<f64> {
        match *self {
            Strategy::Passive => Some(0.0),
            Strategy::Aggressive => Some(if losses == 0 { ((t + 1) as f64).ln() } else { f64::NEG_INFINITY }),
            Strategy::Binomial { p } => Some(binomial_wealth(t, losses, p)),
            Strategy::MixtureUniform { c } => Some(mixture_uniform_wealth(t, losses, c)),
            Strategy::MixtureBeta { a, b } => Some(mixture_beta_wealth(t, losses, a, b)),
            Strategy::MimickedLogopt { prior: Prior::Point { p } } => Some(binomial_wealth(t, losses, p)),
            Strategy::MimickedLogopt { .. } => None,
        }
    }

    /// Bet for step `t` given `losses = L_{t-1}`.
    pub fn bet(&self, t: u64, losses: u64) -> Result<Bet> {
        debug_assert!(t >= 1 && losses < t);
        match *self {
            Strategy::Passive => Ok(passive_bet(t, losses)),
            Strategy::Aggressive => aggressive_bet(t, losses),
            Strategy::Binomial { p } => Ok(binomial_bet(t, losses, p, false)),
            Strategy::MixtureUniform { c } => {
                // Loss payoff W_t(l+1)/W_{t-1}(l) is a ratio of binomial
                // tails; the win payoff follows from the constraint.
                let b1 = (ln_binom_sf(losses + 1, t + 1, c) - ln_binom_sf(losses, t, c)).exp();
                let p = b1 * (losses + 1) as f64 / (t + 1) as f64;
                Ok(binomial_bet(t, losses, p, false))
            }
            Strategy::MixtureBeta { a, b } => {
                let p = (losses as f64 + a) / ((t - 1) as f64 + a + b);
                Ok(binomial_bet(t, losses, p, false))
            }
            Strategy::MimickedLogopt { prior } => mimicked_logopt_bet(t, losses, &prior),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn bet_examples() {
        let b = binomial_bet(5, 1, 0.2, false);
        assert!(close(b.b0, 1.2, 1e-15) && close(b.b1, 0.6, 1e-15));
        assert_eq!(passive_bet(10, 3).constraint_residual(10, 3), 0.0);
        assert_eq!(aggressive_bet(1, 0).unwrap(), Bet { b0: 2.0, b1: 0.0 });
        assert!(aggressive_bet(3, 1).is_err());
        for (t, l) in [(4u64, 0u64), (9, 3), (20, 19)] {
            let b = binomial_bet(t, l, (l + 1) as f64 / (t + 1) as f64, false);
            assert!(close(b.b0, 1.0, 1e-14) && close(b.b1, 1.0, 1e-14));
        }
        let b = binomial_bet(7, 2, 0.3, true);
        assert_eq!(b.b1, 0.0);
        assert!(b.constraint_residual(7, 2).abs() < 1e-15);
    }

    #[test]
    fn default_p() {
        assert_eq!(default_binomial_p(Alpha::new(0.05).unwrap()), 1.0 / 55.0);
    }

    #[test]
    fn wealth_examples() {
        assert!(close(binomial_wealth(2, 1, 0.5), 1.5f64.ln(), 1e-14));
        assert!(close(binomial_wealth(7, 0, 0.1), (8.0 * 0.9f64.powi(7)).ln(), 1e-14));
        assert!(close(mixture_beta_wealth(2, 0, 1.0, 2.0), 1.5f64.ln(), 1e-14));
        for t in 0..30 {
            for l in 0..=t {
                assert!(mixture_beta_wealth(t, l, 1.0, 1.0).abs() < 1e-12);
                assert!(mixture_uniform_wealth(t, l, 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_integer_closed_form() {
        for b in 1..6u64 {
            for t in 0..40u64 {
                for l in 0..=t {
                    let mut w = b as f64;
                    for j in 0..=l {
                        w *= (t + 1 - j) as f64 / (t + b - j) as f64;
                    }
                    let got = mixture_beta_wealth(t, l, 1.0, b as f64);
                    assert!(close(got, w.ln(), 1e-10), "b={b} t={t} l={l}");
                }
            }
        }
    }

    #[test]
    fn mixture_thresholds() {
        let first = |c: f64| (1..).find(|&t| mixture_uniform_wealth(t, 0, c) >= 20f64.ln()).unwrap();
        assert_eq!(first(0.04), 39);
        assert_eq!(first(0.049), 77);
        assert!(mixture_uniform_wealth(200, 5, 0.04) > 20f64.ln());
    }

    #[test]
    fn mixture_decreasing_and_bounded() {
        for &c in &[0.01, 0.045, 0.3] {
            for t in [1u64, 10, 100, 1000] {
                let (mut prev, mut prev_sf) = (f64::INFINITY, 0.0);
                for l in 0..=t {
                    let w = mixture_uniform_wealth(t, l, c);
                    let sf = ln_binom_sf(l, t + 1, c);
                    assert!(sf < prev_sf, "c={c} t={t} l={l}");
                    assert!(w <= prev && w <= -c.ln());
                    prev = w;
                    prev_sf = sf;
                }
            }
        }
    }

    #[test]
    fn posterior_means() {
        let uniform = Prior::Uniform { lo: 0.0, hi: 1.0 };
        for (t, l) in [(1u64, 0u64), (5, 2), (40, 39), (200, 3)] {
            let p = posterior_mean(t, l, &uniform).unwrap();
            assert!(close(p, (l + 1) as f64 / (t + 1) as f64, 1e-12), "{t} {l} {p}");
        }
        let beta = Prior::Beta { a: 2.0, b: 5.0 };
        for (t, l) in [(1u64, 0u64), (10, 4), (300, 20)] {
            let p = posterior_mean(t, l, &beta).unwrap();
            let want = (l as f64 + 2.0) / ((t - 1) as f64 + 7.0);
            assert!(close(p, want, 1e-12), "{t} {l} {p} {want}");
        }
        let b = mimicked_logopt_bet(6, 2, &Prior::Point { p: 0.3 }).unwrap();
        assert_eq!(b, binomial_bet(6, 2, 0.3, false));
    }

    #[test]
    fn point_prior_outside_support_is_degenerate() {
        // Uniform prior on a sliver of [0, 1] far from the data.
        let prior = Prior::Uniform { lo: 0.0, hi: 1e-300 };
        assert!(matches!(
            posterior_mean(5000, 4000, &prior),
            Err(Error::DegeneratePosterior { .. }) | Ok(_)
        ));
    }

    #[test]
    fn config_json() {
        let cfg: StrategyConfig = serde_json::from_str(r#"{"kind":"binomial","alpha":0.05}"#).unwrap();
        assert_eq!(cfg.build(None).unwrap(), Strategy::Binomial { p: 1.0 / 55.0 });
        let cfg: StrategyConfig = serde_json::from_str(r#"{"kind":"mixture_uniform"}"#).unwrap();
        assert!(cfg.build(None).is_err());
        let s = cfg.build(Some(Alpha::new(0.05).unwrap())).unwrap();
        assert!(matches!(s, Strategy::MixtureUniform { c } if close(c, 0.045, 1e-15)));
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"kind":"passive","q":1}"#).is_err());
        let cfg = StrategyConfig::mimicked(Prior::Beta { a: 1.0, b: 2.0 });
        let back: StrategyConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(StrategyConfig::binomial(1.5).build(None).is_err());
    }

    fn strategies() -> Vec<Strategy> {
        vec![
            Strategy::Passive,
            Strategy::Binomial { p: 0.1 },
            Strategy::Binomial { p: 1.0 / 55.0 },
            Strategy::MixtureUniform { c: 0.045 },
            Strategy::MixtureBeta { a: 1.0, b: 2.0 },
            Strategy::MixtureBeta { a: 0.5, b: 3.0 },
        ]
    }

    #[test]
    fn order_invariance() {
        for s in strategies() {
            for t in 1..=10u32 {
                let mut by_count: Vec<Option<f64>> = vec![None; t as usize + 1];
                for mask in 0u32..(1 << t) {
                    let (mut lw, mut l) = (0.0f64, 0u64);
                    for r in 0..t {
                        let loss = mask >> r & 1 == 1;
                        lw += s.bet(r as u64 + 1, l).unwrap().payoff(loss).ln();
                        l += loss as u64;
                    }
                    match by_count[l as usize] {
                        None => by_count[l as usize] = Some(lw),
                        Some(v) => assert!(close(lw, v, 1e-10), "{s:?} t={t}"),
                    }
                    let cf = s.closed_form_log_wealth(t as u64, l).unwrap();
                    assert!(close(lw, cf, 1e-10), "{s:?} t={t} l={l}: {lw} vs {cf}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn bets_satisfy_constraint(t in 1u64..5000, frac in 0.0f64..1.0, p in 0.0f64..=1.0, c in 0.001f64..0.999) {
            let l = ((t as f64 * frac) as u64).min(t - 1);
            let mut all = strategies();
            all.push(Strategy::Binomial { p });
            all.push(Strategy::MixtureUniform { c });
            for s in all {
                let bet = s.bet(t, l).unwrap();
                prop_assert!(bet.b0 >= 0.0 && bet.b1 >= 0.0);
                prop_assert!(bet.constraint_residual(t, l).abs() < 1e-12, "{:?} {} {}", s, t, l);
            }
            if l == 0 {
                prop_assert!(aggressive_bet(t, 0).unwrap().constraint_residual(t, 0).abs() < 1e-12);
            }
        }

        #[test]
        fn mimicked_constraint(t in 1u64..400, frac in 0.0f64..1.0, c in 0.01f64..1.0) {
            let l = ((t as f64 * frac) as u64).min(t - 1);
            let bet = mimicked_logopt_bet(t, l, &Prior::Uniform { lo: 0.0, hi: c }).unwrap();
            prop_assert!(bet.constraint_residual(t, l).abs() < 1e-12);
        }
    }
}
