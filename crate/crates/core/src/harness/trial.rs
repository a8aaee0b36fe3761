use rayon::prelude::*;

use crate::engine::RoundingGuard;
use crate::error::Result;
use crate::harness::{aggregate, with_pool, ExperimentTable, MethodOutcome, ResolvedMethod, Response, SimulateConfig};
use crate::rng::{derive_seed, RandomSource};
use crate::stream::{IndicatorCache, IndicatorStream, StatisticIter};

/// Domain tag separating rounding streams from data streams.
const ROUNDING_DOMAIN: u64 = 0x524f_554e_4400_0000;

/// Responses and treatment labels of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData {
    pub y: Vec<f64>,
    pub treated: Vec<bool>,
}

impl TwoSampleData {
    /// Draws labels with `P(treated) = prob` (redrawn until both groups
    /// are nonempty) and responses shifted by `mu` under treatment.
    pub fn simulate(n: usize, mu: f64, prob: f64, response: Response, rng: &mut RandomSource) -> Self {
        let treated = loop {
            let z: Vec<bool> = (0..n).map(|_| rng.bernoulli(prob)).collect();
            let k = z.iter().filter(|&&b| b).count();
            if k > 0 && k < n {
                break z;
            }
        };
        let y = treated
            .iter()
            .map(|&z| {
                let e = rng.standard_normal();
                let base = match response {
                    Response::Normal => e,
                    Response::Lognormal => e.exp(),
                };
                base + if z { mu } else { 0.0 }
            })
            .collect();
        Self { y, treated }
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&b| b).count()
    }

    /// Difference in group means for a treated-sum `s`.
    fn statistic(s: f64, total: f64, n1: usize, n0: usize) -> f64 {
        s / n1 as f64 - (total - s) / n0 as f64
    }

    pub fn observed(&self) -> f64 {
        let s: f64 = self.y.iter().zip(&self.treated).filter(|(_, &z)| z).map(|(y, _)| y).sum();
        let total: f64 = self.y.iter().sum();
        let n1 = self.n_treated();
        Self::statistic(s, total, n1, self.y.len() - n1)
    }

    /// Statistics of independent uniformly random relabelings (with
    /// replacement across draws), by partial Fisher–Yates.
    pub fn permutation_statistics(self, mut rng: RandomSource) -> StatisticIter {
        let n = self.y.len();
        let n1 = self.n_treated();
        let n0 = n - n1;
        let total: f64 = self.y.iter().sum();
        // Sample the smaller group; a uniform subset of either size
        // determines the relabeling.
        let (k, pick_treated) = if n1 <= n0 { (n1, true) } else { (n0, false) };
        let mut idx: Vec<usize> = (0..n).collect();
        let y = self.y;
        Box::new(std::iter::repeat_with(move || {
            let mut s = 0.0;
            for i in 0..k {
                let j = i + rng.below(n - i);
                idx.swap(i, j);
                s += y[idx[i]];
            }
            let s1 = if pick_treated { s } else { total - s };
            Ok(Self::statistic(s1, total, n1, n0))
        }))
    }
}

/// Runs every method on one trial. All methods read the same cached
/// indicator stream.
pub fn run_two_sample_trial(
    cfg: &SimulateConfig,
    mu_index: usize,
    trial: u64,
    methods: &[ResolvedMethod],
    guard: &RoundingGuard,
) -> Result<Vec<MethodOutcome>> {
    let base = RandomSource::new(cfg.seed, trial);
    let mut data_rng = base.child(0);
    let data = TwoSampleData::simulate(
        cfg.n as usize,
        cfg.mu[mu_index],
        cfg.treatment_prob,
        cfg.response,
        &mut data_rng,
    );
    let y0 = data.observed();
    let stats = data.permutation_statistics(base.child(1));
    let budget = methods.iter().map(|m| m.horizon_or(cfg.horizon)).max().unwrap_or(cfg.horizon);
    let stream = IndicatorStream::statistics(y0, stats, cfg.tie_policy, base.child(2)).with_max_len(budget);
    let mut cache = IndicatorCache::new(stream);
    let rounding_seed = derive_seed(cfg.seed, ROUNDING_DOMAIN ^ mu_index as u64);
    methods
        .iter()
        .enumerate()
        .map(|(j, method)| {
            let key = (rounding_seed, trial * methods.len() as u64 + j as u64);
            crate::harness::run_method(method, &mut cache.cursor(), cfg.alpha, cfg.horizon, guard, key)
        })
        .collect()
}

/// Runs all trials for every `mu` and aggregates one row per
/// `(mu, method)`.
pub fn run_simulation(cfg: &SimulateConfig, jobs: Option<usize>) -> Result<ExperimentTable> {
    cfg.validate()?;
    let methods: Vec<ResolvedMethod> = cfg
        .strategies
        .iter()
        .map(|m| ResolvedMethod::resolve(m, cfg.alpha))
        .collect::<Result<_>>()?;
    let guard = RoundingGuard::new();
    let mut table = ExperimentTable::default();
    for (mu_index, &mu) in cfg.mu.iter().enumerate() {
        let per_trial: Vec<Vec<MethodOutcome>> = with_pool(jobs, || {
            (0..cfg.m)
                .into_par_iter()
                .map(|trial| run_two_sample_trial(cfg, mu_index, trial, &methods, &guard))
                .collect::<Result<Vec<_>>>()
        })??;
        for (j, method) in methods.iter().enumerate() {
            let outs: Vec<MethodOutcome> = per_trial.iter().map(|o| o[j].clone()).collect();
            table.rows.push(aggregate(method.label(), Some(mu), method.horizon_or(cfg.horizon), &outs));
        }
    }
    Ok(table)
}
