//! Sequential driver: bet, reveal, update wealth, check stopping rules.

use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::strategies::{binomial_bet, Bet, Strategy, StrategyConfig};
use crate::stream::IndicatorSource;
use crate::types::{Alpha, Indicator, TestState};

/// Relative slack when comparing wealth against a threshold in log space,
/// so exact hits such as `W_19 = 20` survive rounding.
pub const THRESHOLD_SLACK: f64 = 1e-12;

/// `true` when `log_wealth` reaches `threshold`.
pub fn reaches(log_wealth: f64, threshold: f64) -> bool {
    log_wealth >= threshold.ln() - THRESHOLD_SLACK
}

pub type ExternalStop = Arc<dyn Fn(&TestState) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct StoppingRule {
    pub alpha: Alpha,
    /// Reject once wealth reaches this value; `1/alpha` by default.
    pub reject_threshold: f64,
    /// Stop for futility once wealth is strictly below this value; 0
    /// disables futility stopping and the binomial look-ahead override.
    pub futility_threshold: f64,
    pub max_steps: u64,
    pub external_stop: Option<ExternalStop>,
}

impl fmt::Debug for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoppingRule")
            .field("alpha", &self.alpha)
            .field("reject_threshold", &self.reject_threshold)
            .field("futility_threshold", &self.futility_threshold)
            .field("max_steps", &self.max_steps)
            .field("external_stop", &self.external_stop.is_some())
            .finish()
    }
}

impl StoppingRule {
    pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

    pub fn new(alpha: Alpha) -> Self {
        Self {
            alpha,
            reject_threshold: alpha.threshold(),
            futility_threshold: alpha.value(),
            max_steps: Self::DEFAULT_MAX_STEPS,
            external_stop: None,
        }
    }

    pub fn without_futility(mut self) -> Self {
        self.futility_threshold = 0.0;
        self
    }

    pub fn with_futility(mut self, threshold: f64) -> Self {
        self.futility_threshold = threshold;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Overrides the rejection threshold; `f64::INFINITY` never rejects.
    pub fn with_reject_threshold(mut self, threshold: f64) -> Self {
        self.reject_threshold = threshold;
        self
    }

    pub fn with_external_stop(mut self, stop: impl Fn(&TestState) -> bool + Send + Sync + 'static) -> Self {
        self.external_stop = Some(Arc::new(stop));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reject_threshold.is_nan() || self.reject_threshold <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "reject threshold must exceed 1, got {}",
                self.reject_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.futility_threshold) {
            return Err(Error::InvalidParameter(format!(
                "futility threshold must lie in [0, 1), got {}",
                self.futility_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Rejected,
    Futility,
    /// Stream ran out or `max_steps` was reached.
    Exhausted,
    External,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Rejected => "rejected",
            StopReason::Futility => "futility",
            StopReason::Exhausted => "exhausted",
            StopReason::External => "external",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub losses: u64,
    pub log_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub stop_time: u64,
    pub stop_reason: StopReason,
    /// Wealth at the stopping time.
    pub e_value: f64,
    pub p_value: f64,
    pub losses: u64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl TestOutcome {
    pub fn rejected(&self) -> bool {
        self.stop_reason == StopReason::Rejected
    }
}

/// Anytime-valid p-value `1 / sup_s W_s` of a wealth path, clamped to 1.
pub fn p_process_value(wealth_path: &[f64]) -> f64 {
    let max = wealth_path.iter().copied().fold(0.0f64, f64::max);
    if max <= 1.0 {
        1.0
    } else {
        1.0 / max
    }
}

/// Incremental sequential test. Each call to [`SequentialTest::observe`]
/// plays one round; once a stopping rule fires, further rounds are refused.
#[derive(Debug, Clone)]
pub struct SequentialTest {
    strategy: Strategy,
    rule: StoppingRule,
    state: TestState,
    stopped: Option<StopReason>,
    decimation: Option<u64>,
    trajectory: Vec<TrajectoryPoint>,
    seed: Option<u64>,
}

impl SequentialTest {
    pub fn new(strategy: Strategy, rule: StoppingRule) -> Result<Self> {
        rule.validate()?;
        Ok(Self {
            strategy,
            rule,
            state: TestState::new(),
            stopped: None,
            decimation: None,
            trajectory: Vec::new(),
            seed: None,
        })
    }

    pub fn from_config(config: &StrategyConfig, rule: StoppingRule) -> Result<Self> {
        let strategy = config.build(Some(rule.alpha))?;
        Self::new(strategy, rule)
    }

    /// Records `(t, L_t, log W_t)` every `every` steps and at the stop.
    pub fn record_trajectory(mut self, every: u64) -> Self {
        self.decimation = Some(every.max(1));
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn state(&self) -> &TestState {
        &self.state
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn rule(&self) -> &StoppingRule {
        &self.rule
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stopped
    }

    fn futility_enabled(&self) -> bool {
        self.rule.futility_threshold > 0.0
    }

    /// The bet for the next round, using only past information.
    pub fn next_bet(&self) -> Result<Bet> {
        if let Some(reason) = self.stopped {
            return Err(Error::AlreadyStopped(reason.to_string()));
        }
        let t = self.state.t + 1;
        let l = self.state.losses;
        if self.state.is_absorbed() {
            return Ok(Bet::PASSIVE);
        }
        match self.strategy {
            Strategy::Binomial { p } if self.futility_enabled() => {
                // Look-ahead: if even a loss cannot keep wealth above the
                // futility threshold, bet everything on a win.
                let log_after_loss = self.state.log_wealth + (p * (t + 1) as f64 / (l + 1) as f64).ln();
                let hopeless = log_after_loss < self.rule.futility_threshold.ln();
                Ok(binomial_bet(t, l, p, hopeless))
            }
            s => s.bet(t, l),
        }
    }

    /// Plays one round with the revealed indicator.
    pub fn observe(&mut self, indicator: Indicator) -> Result<Option<StopReason>> {
        let bet = self.next_bet()?;
        let t = self.state.t + 1;
        let losses = self.state.losses + indicator.is_loss() as u64;
        let log_wealth = match self.strategy {
            Strategy::MixtureUniform { .. } | Strategy::MixtureBeta { .. } => {
                self.strategy.closed_form_log_wealth(t, losses).unwrap()
            }
            _ => self.state.log_wealth + bet.payoff(indicator.is_loss()).ln(),
        };
        self.state.advance(indicator, log_wealth);
        self.stopped = self.check();
        if let Some(every) = self.decimation {
            if self.state.t.is_multiple_of(every) || self.stopped.is_some() {
                self.push_point();
            }
        }
        Ok(self.stopped)
    }

    fn push_point(&mut self) {
        let point = TrajectoryPoint {
            t: self.state.t,
            losses: self.state.losses,
            log_wealth: self.state.log_wealth,
        };
        if self.trajectory.last() != Some(&point) {
            self.trajectory.push(point);
        }
    }

    fn check(&self) -> Option<StopReason> {
        let s = &self.state;
        if reaches(s.log_wealth, self.rule.reject_threshold) {
            Some(StopReason::Rejected)
        } else if s.is_absorbed() || s.log_wealth < self.rule.futility_threshold.ln() {
            // Zero wealth can never recover, so it ends the test even when
            // futility stopping is disabled.
            Some(StopReason::Futility)
        } else if self.rule.external_stop.as_ref().is_some_and(|f| f(s)) {
            Some(StopReason::External)
        } else if s.t >= self.rule.max_steps {
            Some(StopReason::Exhausted)
        } else {
            None
        }
    }

    /// Draws one indicator and plays it. Exhaustion of the source stops
    /// the test with [`StopReason::Exhausted`].
    pub fn step<S: IndicatorSource + ?Sized>(&mut self, source: &mut S) -> Result<Option<StopReason>> {
        if let Some(reason) = self.stopped {
            return Err(Error::AlreadyStopped(reason.to_string()));
        }
        match source.next_indicator() {
            Ok(indicator) => self.observe(indicator),
            Err(Error::StreamExhausted(_)) => {
                self.stopped = Some(StopReason::Exhausted);
                if self.decimation.is_some() {
                    self.push_point();
                }
                Ok(self.stopped)
            }
            Err(e) => Err(e),
        }
    }

    /// Runs until a rule fires.
    pub fn run<S: IndicatorSource + ?Sized>(mut self, source: &mut S) -> Result<TestOutcome> {
        if self.seed.is_none() {
            self.seed = source.seed();
        }
        if self.stopped.is_none() && self.rule.max_steps == 0 {
            self.stopped = Some(StopReason::Exhausted);
        }
        while self.stopped.is_none() {
            self.step(source)?;
        }
        Ok(self.outcome())
    }

    /// Current outcome; the stop reason is `Exhausted` if no rule fired.
    pub fn outcome(&self) -> TestOutcome {
        TestOutcome {
            stop_time: self.state.t,
            stop_reason: self.stopped.unwrap_or(StopReason::Exhausted),
            e_value: self.state.wealth(),
            p_value: self.state.p_value(),
            losses: self.state.losses,
            seed: self.seed,
            trajectory: self.decimation.map(|_| self.trajectory.clone()),
        }
    }
}

/// Runs a complete test of `config` on `source` under `rule`.
pub fn run_test<S: IndicatorSource + ?Sized>(
    source: &mut S,
    config: &StrategyConfig,
    rule: StoppingRule,
) -> Result<TestOutcome> {
    SequentialTest::from_config(config, rule)?.run(source)
}

/// Hands out single-use random streams for stochastic rounding. A
/// `(seed, stream)` pair can be issued only once per guard.
#[derive(Debug, Default)]
pub struct RoundingGuard {
    used: Mutex<HashSet<(u64, u64)>>,
}

/// A random stream that can be consumed by exactly one rounding.
#[derive(Debug)]
pub struct RoundingTicket {
    rng: RandomSource,
}

impl RoundingTicket {
    /// The single uniform this ticket grants.
    pub fn draw(self) -> f64 {
        let mut rng = self.rng;
        rng.uniform()
    }
}

impl RoundingGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ticket(&self, seed: u64, stream: u64) -> Result<RoundingTicket> {
        if !self.used.lock().unwrap().insert((seed, stream)) {
            return Err(Error::RngReuse { seed, stream });
        }
        Ok(RoundingTicket {
            rng: RandomSource::new(seed, stream),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundedEValue {
    pub value: f64,
    pub uniform_draw: f64,
}

impl RoundedEValue {
    pub fn rejects(&self, alpha: Alpha) -> bool {
        self.value > 0.0 && reaches(self.value.ln(), alpha.threshold())
    }
}

/// Stochastic rounding of a stopped e-value: values below `1/alpha` become
/// `1/alpha` with probability `W alpha` and 0 otherwise.
pub fn stochastic_round(final_wealth: f64, alpha: Alpha, ticket: RoundingTicket) -> RoundedEValue {
    let u = ticket.draw();
    let value = if final_wealth > 0.0 && reaches(final_wealth.ln(), alpha.threshold()) {
        final_wealth
    } else if u <= final_wealth * alpha.value() {
        alpha.threshold()
    } else {
        0.0
    };
    RoundedEValue { value, uniform_draw: u }
}
