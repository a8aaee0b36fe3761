use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{RoundingGuard, SequentialTest, StopReason, StoppingRule};
use crate::error::Result;
use crate::harness::{run_method, with_pool, MethodConfig, ResolvedMethod};
use crate::rng::{derive_seed, RandomSource};
use crate::strategies::Strategy;
use crate::stream::IndicatorStream;
use crate::types::Alpha;

const ROUNDING_DOMAIN: u64 = 0x5249_534b_0000_0000;

/// Monte-Carlo estimate of the resampling risk at a fixed limiting
/// p-value `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub label: String,
    pub q: f64,
    pub runs: u64,
    pub rejections: u64,
    /// Fraction of runs whose decision differs from `1{q <= alpha}`.
    pub risk: f64,
    pub std_error: f64,
    pub mean_stop: f64,
}

impl RiskEstimate {
    fn new(label: String, q: f64, alpha: Alpha, rejections: u64, stops: &[u64]) -> Self {
        let runs = stops.len() as u64;
        let wrong = if q <= alpha.value() { runs - rejections } else { rejections };
        let risk = wrong as f64 / runs as f64;
        Self {
            label,
            q,
            runs,
            rejections,
            risk,
            std_error: (risk * (1.0 - risk) / runs as f64).sqrt(),
            mean_stop: stops.iter().sum::<u64>() as f64 / runs as f64,
        }
    }
}

/// `1 - (1 - q)^ceil(1/alpha - 1)`: the aggressive strategy rejects only
/// if the first `ceil(1/alpha - 1)` draws are all wins.
pub fn aggressive_resampling_risk(q: f64, alpha: Alpha) -> f64 {
    let k = (1.0 / alpha.value() - 1.0 - 1e-9).ceil();
    1.0 - (1.0 - q).powf(k)
}

/// Runs `method` on `runs` i.i.d. Bernoulli(`q`) loss streams, each capped
/// at `cap` draws.
pub fn estimate_resampling_risk(
    method: &MethodConfig,
    q: f64,
    alpha: Alpha,
    runs: u64,
    cap: u64,
    seed: u64,
    jobs: Option<usize>,
) -> Result<RiskEstimate> {
    let resolved = ResolvedMethod::resolve(method, alpha)?;
    let guard = RoundingGuard::new();
    let rounding_seed = derive_seed(seed, ROUNDING_DOMAIN);
    let outs = with_pool(jobs, || {
        (0..runs)
            .into_par_iter()
            .map(|run| {
                let mut stream = IndicatorStream::bernoulli(q, RandomSource::new(seed, run))?.with_max_len(cap);
                run_method(&resolved, &mut stream, alpha, cap, &guard, (rounding_seed, run))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rejections = outs.iter().filter(|o| o.rejected).count() as u64;
    let stops: Vec<u64> = outs.iter().map(|o| o.stop_time).collect();
    Ok(RiskEstimate::new(resolved.label().to_string(), q, alpha, rejections, &stops))
}

/// Mixture with `c = alpha` that stops once wealth reaches
/// `(1 - eps)/alpha` and then rejects iff a fresh uniform is at most
/// `1 - eps`.
pub fn randomized_threshold_risk(
    q: f64,
    alpha: Alpha,
    eps: f64,
    runs: u64,
    cap: u64,
    seed: u64,
    jobs: Option<usize>,
) -> Result<RiskEstimate> {
    let guard = RoundingGuard::new();
    let rounding_seed = derive_seed(seed, ROUNDING_DOMAIN ^ 1);
    let strategy = Strategy::MixtureUniform { c: alpha.value() };
    let rule = StoppingRule::new(alpha)
        .without_futility()
        .with_max_steps(cap)
        .with_reject_threshold((1.0 - eps) / alpha.value());
    let outs = with_pool(jobs, || {
        (0..runs)
            .into_par_iter()
            .map(|run| {
                let mut stream = IndicatorStream::bernoulli(q, RandomSource::new(seed, run))?.with_max_len(cap);
                let out = SequentialTest::new(strategy, rule.clone())?.run(&mut stream)?;
                let rejected = out.stop_reason == StopReason::Rejected && {
                    guard.ticket(rounding_seed, run)?.draw() <= 1.0 - eps
                };
                Ok((rejected, out.stop_time))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rejections = outs.iter().filter(|o| o.0).count() as u64;
    let stops: Vec<u64> = outs.iter().map(|o| o.1).collect();
    Ok(RiskEstimate::new(format!("mixture_c{}_eps{}", alpha.value(), eps), q, alpha, rejections, &stops))
}
