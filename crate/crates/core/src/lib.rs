//! Anytime-valid sequential Monte-Carlo tests by betting.
//!
//! A Monte-Carlo (permutation, randomization) test compares an observed
//! statistic `y0` against statistics `y1, y2, ...` computed on resampled
//! data. Instead of fixing the number of resamples in advance, this crate
//! turns the comparison into a betting game on the loss indicators
//! `I_t = 1{y_t >= y0}`: every bet is fair under exchangeability, so the
//! gambler's wealth is a test martingale and can be monitored continuously.
//!
//! Module map:
//!
//! - [`types`], [`rng`], [`stream`]: domain types, reproducible randomness,
//!   and indicator streams (statistics, Bernoulli, Pólya-urn nulls).
//! - [`strategies`]: per-step bets and closed-form wealth of the passive,
//!   aggressive, binomial, binomial-mixture and mimicked log-optimal
//!   strategies.
//! - [`engine`]: the sequential driver, stopping rules, p-process and
//!   stochastic rounding.
//! - [`reconstruct`]: backward reconstruction of any loss-count e-value as
//!   a sequence of bets, and anytime-valid permutation / Besag–Clifford
//!   p-values.
//! - [`classical`]: fixed-design baselines and p-to-e calibrators.
//! - [`harness`]: seeded simulation experiments.
//! - [`special`]: numerics (log-gamma, binomial tails, quadrature).

pub mod classical;
pub mod engine;
pub mod error;
pub mod harness;
pub mod reconstruct;
pub mod rng;
pub mod special;
pub mod strategies;
pub mod stream;
pub mod types;

pub use engine::{run_test, SequentialTest, StopReason, StoppingRule, TestOutcome};
pub use error::{Error, Result};
pub use strategies::{Bet, Prior, Strategy, StrategyConfig, StrategyKind};
pub use stream::{IndicatorSource, IndicatorStream, TiePolicy};
pub use types::{Alpha, Indicator, TestState};
