use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::RoundingGuard;
use crate::error::{Error, Result};
use crate::harness::{aggregate, run_method, with_pool, ExperimentTable, Experiment, MethodConfig, MethodOutcome, ResolvedMethod};
use crate::rng::{derive_seed, RandomSource};
use crate::stream::{IndicatorCache, IndicatorStream, StatisticIter, TiePolicy};
use crate::types::Alpha;

const ROUNDING_DOMAIN: u64 = 0x434f_554e_5400_0000;

/// Binary outcomes of two groups as `(successes, total)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub treated: (u64, u64),
    pub control: (u64, u64),
}

impl CountTable {
    pub fn validate(&self) -> Result<()> {
        let ok = |(s, n): (u64, u64)| n > 0 && s <= n;
        if ok(self.treated) && ok(self.control) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid count table {self:?}")))
        }
    }

    fn statistic(&self, treated_successes: u64) -> f64 {
        let total = self.treated.0 + self.control.0;
        treated_successes as f64 / self.treated.1 as f64
            - (total - treated_successes) as f64 / self.control.1 as f64
    }

    /// Difference in success proportions, treated minus control.
    pub fn observed(&self) -> f64 {
        self.statistic(self.treated.0)
    }

    /// Statistics of independent random relabelings of the pooled
    /// outcomes.
    pub fn permutation_statistics(self, mut rng: RandomSource) -> StatisticIter {
        let n = (self.treated.1 + self.control.1) as usize;
        let ones = (self.treated.0 + self.control.0) as usize;
        let mut outcome: Vec<bool> = (0..n).map(|i| i < ones).collect();
        let k = self.treated.1 as usize;
        Box::new(std::iter::repeat_with(move || {
            let mut s = 0u64;
            for i in 0..k {
                let j = i + rng.below(n - i);
                outcome.swap(i, j);
                s += outcome[i] as u64;
            }
            Ok(self.statistic(s))
        }))
    }
}

fn default_repeats() -> u64 {
    1000
}

fn default_max_permutations() -> u64 {
    5000
}

/// Repeated sequential tests on one fixed two-group binary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountTableConfig {
    pub experiment: Experiment,
    pub treated: (u64, u64),
    pub control: (u64, u64),
    #[serde(default = "default_repeats")]
    pub repeats: u64,
    pub alpha: Alpha,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_permutations")]
    pub max_permutations: u64,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    pub strategies: Vec<MethodConfig>,
}

impl CountTableConfig {
    pub const KEYS: &'static [&'static str] = &[
        "experiment",
        "treated",
        "control",
        "repeats",
        "alpha",
        "seed",
        "max_permutations",
        "tie_policy",
        "strategies",
    ];

    pub fn counts(&self) -> CountTable {
        CountTable {
            treated: self.treated,
            control: self.control,
        }
    }
}

/// Runs every method `repeats` times on fresh relabeling streams of the
/// same table; methods within a repeat share one stream.
pub fn run_count_table_experiment(cfg: &CountTableConfig, jobs: Option<usize>) -> Result<ExperimentTable> {
    let counts = cfg.counts();
    counts.validate()?;
    let methods: Vec<ResolvedMethod> = cfg
        .strategies
        .iter()
        .map(|m| ResolvedMethod::resolve(m, cfg.alpha))
        .collect::<Result<_>>()?;
    let budget = methods
        .iter()
        .map(|m| m.horizon_or(cfg.max_permutations))
        .max()
        .unwrap_or(cfg.max_permutations);
    let guard = RoundingGuard::new();
    let rounding_seed = derive_seed(cfg.seed, ROUNDING_DOMAIN);
    let y0 = counts.observed();
    let per_repeat: Vec<Vec<MethodOutcome>> = with_pool(jobs, || {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|rep| {
                let base = RandomSource::new(cfg.seed, rep);
                let stream = IndicatorStream::statistics(
                    y0,
                    counts.permutation_statistics(base.child(0)),
                    cfg.tie_policy,
                    base.child(1),
                )
                .with_max_len(budget);
                let mut cache = IndicatorCache::new(stream);
                methods
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        let key = (rounding_seed, rep * methods.len() as u64 + j as u64);
                        run_method(m, &mut cache.cursor(), cfg.alpha, cfg.max_permutations, &guard, key)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rows = methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let outs: Vec<MethodOutcome> = per_repeat.iter().map(|o| o[j].clone()).collect();
            aggregate(m.label(), None, m.horizon_or(cfg.max_permutations), &outs)
        })
        .collect();
    Ok(ExperimentTable { rows })
}
