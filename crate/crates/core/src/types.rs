//! Core domain types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance level, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Rejection threshold `1/alpha` for the wealth.
    pub fn threshold(self) -> f64 {
        1.0 / self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Outcome of one round: a loss means the generated statistic was at least
/// as large as the observed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    Win,
    Loss,
}

impl Indicator {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Indicator::Win),
            1 => Some(Indicator::Loss),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Indicator::Win => 0,
            Indicator::Loss => 1,
        }
    }

    pub fn is_loss(self) -> bool {
        self == Indicator::Loss
    }
}

impl From<bool> for Indicator {
    /// `true` is a loss.
    fn from(loss: bool) -> Self {
        if loss {
            Indicator::Loss
        } else {
            Indicator::Win
        }
    }
}

/// Running state of a sequential test.
///
/// Wealth is kept in log space; `f64::NEG_INFINITY` is zero wealth and is
/// absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestState {
    pub t: u64,
    pub losses: u64,
    pub log_wealth: f64,
    pub max_log_wealth: f64,
}

impl Default for TestState {
    fn default() -> Self {
        Self::new()
    }
}

impl TestState {
    pub fn new() -> Self {
        Self {
            t: 0,
            losses: 0,
            log_wealth: 0.0,
            max_log_wealth: 0.0,
        }
    }

    pub fn wealth(&self) -> f64 {
        self.log_wealth.exp()
    }

    pub fn max_wealth(&self) -> f64 {
        self.max_log_wealth.exp()
    }

    pub fn is_absorbed(&self) -> bool {
        self.log_wealth == f64::NEG_INFINITY
    }

    /// Advances one round with the given indicator and new log-wealth.
    pub(crate) fn advance(&mut self, indicator: Indicator, log_wealth: f64) {
        self.t += 1;
        if indicator.is_loss() {
            self.losses += 1;
        }
        self.log_wealth = if self.is_absorbed() {
            f64::NEG_INFINITY
        } else {
            log_wealth
        };
        if self.log_wealth > self.max_log_wealth {
            self.max_log_wealth = self.log_wealth;
        }
    }

    /// Anytime-valid p-value `1 / max_{s<=t} W_s`, clamped to 1.
    pub fn p_value(&self) -> f64 {
        (-self.max_log_wealth).exp().min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_bounds() {
        assert!(Alpha::new(0.05).is_ok());
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(1.0).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<Alpha>("1.5").is_err());
        assert_eq!(serde_json::from_str::<Alpha>("0.01").unwrap().value(), 0.01);
    }

    #[test]
    fn zero_wealth_is_absorbing() {
        let mut s = TestState::new();
        s.advance(Indicator::Win, 2f64.ln());
        s.advance(Indicator::Loss, f64::NEG_INFINITY);
        s.advance(Indicator::Win, 5.0);
        assert!(s.is_absorbed());
        assert_eq!(s.losses, 1);
        assert_eq!(s.t, 3);
        assert!((s.max_wealth() - 2.0).abs() < 1e-12);
        assert!((s.p_value() - 0.5).abs() < 1e-12);
    }
}
