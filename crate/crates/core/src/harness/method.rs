use serde::{Deserialize, Serialize};

use crate::classical::{bc_from_source, perm_pvalue};
use crate::engine::{stochastic_round, RoundingGuard, SequentialTest, StopReason, StoppingRule};
use crate::error::{Error, Result};
use crate::harness::{MethodConfig, MethodKind};
use crate::strategies::Strategy;
use crate::stream::IndicatorSource;
use crate::types::Alpha;

#[derive(Debug, Clone, PartialEq)]
pub enum MethodBody {
    Betting {
        strategy: Strategy,
        rounding: bool,
        futility: bool,
    },
    BesagClifford {
        h: u64,
    },
    Permutation,
}

/// A method with all parameters resolved against an experiment's alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedMethod {
    pub label: String,
    /// Own permutation budget, if set.
    pub horizon: Option<u64>,
    pub body: MethodBody,
}

impl ResolvedMethod {
    pub fn resolve(cfg: &MethodConfig, alpha: Alpha) -> Result<Self> {
        let body = match cfg.kind {
            MethodKind::BesagClifford => match cfg.h {
                Some(h) if h > 0 => MethodBody::BesagClifford { h },
                _ => return Err(Error::InvalidParameter("besag_clifford needs h >= 1".into())),
            },
            MethodKind::Permutation => MethodBody::Permutation,
            _ => MethodBody::Betting {
                strategy: cfg.strategy_config().unwrap().build(Some(alpha))?,
                rounding: cfg.rounding,
                futility: cfg.futility,
            },
        };
        if cfg.horizon == Some(0) {
            return Err(Error::InvalidParameter("method T must be >= 1".into()));
        }
        Ok(Self {
            label: cfg.display_label(),
            horizon: cfg.horizon,
            body,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Budget of this method inside an experiment with budget `default`.
    pub fn horizon_or(&self, default: u64) -> u64 {
        self.horizon.unwrap_or(default)
    }
}

/// Result of one method on one indicator stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub rejected: bool,
    pub stop_time: u64,
    pub stop_reason: String,
    pub p_value: f64,
    pub e_value: Option<f64>,
    pub losses: u64,
}

/// Runs `method` on `source` with at most `horizon` draws (the method's own
/// budget takes precedence). A rounding ticket `(seed, stream)` is taken
/// from `guard` only when rounding is on and the test did not reject
/// outright.
pub fn run_method<S: IndicatorSource + ?Sized>(
    method: &ResolvedMethod,
    source: &mut S,
    alpha: Alpha,
    horizon: u64,
    guard: &RoundingGuard,
    rounding_key: (u64, u64),
) -> Result<MethodOutcome> {
    let horizon = method.horizon_or(horizon);
    let reject = |p: f64| p <= alpha.value() * (1.0 + 1e-12);
    match &method.body {
        MethodBody::Betting {
            strategy,
            rounding,
            futility,
        } => {
            let mut rule = StoppingRule::new(alpha).with_max_steps(horizon);
            if !futility {
                rule = rule.without_futility();
            }
            let out = SequentialTest::new(*strategy, rule)?.run(source)?;
            let mut rejected = out.stop_reason == StopReason::Rejected;
            let mut reason = out.stop_reason.to_string();
            if *rounding && !rejected {
                let ticket = guard.ticket(rounding_key.0, rounding_key.1)?;
                if stochastic_round(out.e_value, alpha, ticket).rejects(alpha) {
                    rejected = true;
                    reason.push_str("+rounded");
                }
            }
            Ok(MethodOutcome {
                rejected,
                stop_time: out.stop_time,
                stop_reason: reason,
                p_value: out.p_value,
                e_value: Some(out.e_value),
                losses: out.losses,
            })
        }
        MethodBody::BesagClifford { h } => {
            let r = bc_from_source(source, *h, horizon)?;
            let p = r.p_f64();
            Ok(MethodOutcome {
                rejected: reject(p),
                stop_time: r.stop_time,
                stop_reason: if r.losses == *h { "h_losses" } else { "horizon" }.into(),
                p_value: p,
                e_value: None,
                losses: r.losses,
            })
        }
        MethodBody::Permutation => {
            let mut losses = 0;
            for _ in 0..horizon {
                losses += source.next_indicator()?.is_loss() as u64;
            }
            let p = perm_pvalue(losses, horizon);
            let p = *p.numer() as f64 / *p.denom() as f64;
            Ok(MethodOutcome {
                rejected: reject(p),
                stop_time: horizon,
                stop_reason: "horizon".into(),
                p_value: p,
                e_value: None,
                losses,
            })
        }
    }
}
