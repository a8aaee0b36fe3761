//! Indicator streams.
//!
//! An indicator stream hides the raw statistics and reveals only whether
//! each generated statistic ties or beats the observed one. Four sources
//! are supported: a statistic stream (observed `y0` followed by generated
//! statistics), i.i.d. Bernoulli indicators at a fixed limiting p-value,
//! the exchangeable Pólya-urn null, and an explicit indicator list.

use std::io::{BufRead, Read};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::Indicator;

/// Default cap on the number of indicators a stream will produce.
pub const DEFAULT_MAX_LEN: u64 = 1_000_000;

/// How ties `y_t == y0` are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Each statistic carries an independent uniform; ties are broken by
    /// comparing the uniforms. Uniforms are drawn only when a tie occurs.
    #[default]
    Randomized,
    /// Every tie counts as a loss.
    Conservative,
}

/// Anything that reveals loss indicators one at a time.
pub trait IndicatorSource {
    /// Next indicator, or `Error::StreamExhausted` when the source is done.
    fn next_indicator(&mut self) -> Result<Indicator>;

    /// Seed identifying the randomness behind the stream, if any.
    fn seed(&self) -> Option<u64> {
        None
    }
}

pub type StatisticIter = Box<dyn Iterator<Item = Result<f64>>>;

enum Source {
    Statistics {
        y0: f64,
        stats: StatisticIter,
        tie_policy: TiePolicy,
        theta0: Option<f64>,
    },
    Bernoulli {
        q: f64,
    },
    Polya,
    Explicit {
        indicators: Vec<Indicator>,
        pos: usize,
    },
}

/// A lazily evaluated stream of loss indicators.
pub struct IndicatorStream {
    source: Source,
    rng: RandomSource,
    emitted: u64,
    losses: u64,
    max_len: u64,
}

impl std::fmt::Debug for IndicatorStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = match &self.source {
            Source::Statistics { .. } => "statistics",
            Source::Bernoulli { .. } => "bernoulli",
            Source::Polya => "polya",
            Source::Explicit { .. } => "explicit",
        };
        f.debug_struct("IndicatorStream")
            .field("mode", &mode)
            .field("emitted", &self.emitted)
            .field("losses", &self.losses)
            .field("max_len", &self.max_len)
            .finish()
    }
}

impl IndicatorStream {
    fn with_source(source: Source, rng: RandomSource) -> Self {
        Self {
            source,
            rng,
            emitted: 0,
            losses: 0,
            max_len: DEFAULT_MAX_LEN,
        }
    }

    /// Observed statistic `y0` followed by generated statistics.
    pub fn statistics(y0: f64, stats: StatisticIter, tie_policy: TiePolicy, rng: RandomSource) -> Self {
        Self::with_source(
            Source::Statistics {
                y0,
                stats,
                tie_policy,
                theta0: None,
            },
            rng,
        )
    }

    /// Convenience wrapper over an in-memory vector of generated statistics.
    pub fn from_statistics(y0: f64, stats: Vec<f64>, tie_policy: TiePolicy, rng: RandomSource) -> Self {
        Self::statistics(y0, Box::new(stats.into_iter().map(Ok)), tie_policy, rng)
    }

    /// I.i.d. Bernoulli(q) losses: the alternative at a fixed limiting
    /// permutation p-value `q`.
    pub fn bernoulli(q: f64, rng: RandomSource) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {q}")));
        }
        Ok(Self::with_source(Source::Bernoulli { q }, rng))
    }

    /// Exchangeable null: `P(I_t = 1 | L_{t-1} = l) = (l + 1) / (t + 1)`.
    pub fn polya(rng: RandomSource) -> Self {
        Self::with_source(Source::Polya, rng)
    }

    pub fn explicit(indicators: Vec<Indicator>) -> Self {
        Self::with_source(Source::Explicit { indicators, pos: 0 }, RandomSource::new(0, 0))
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let indicators = bits
            .iter()
            .map(|&b| {
                Indicator::from_bit(b).ok_or_else(|| Error::InvalidParameter(format!("indicator must be 0 or 1, got {b}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::explicit(indicators))
    }

    pub fn with_max_len(mut self, max_len: u64) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    fn draw(&mut self) -> Result<Indicator> {
        let t = self.emitted + 1;
        let losses = self.losses;
        let rng = &mut self.rng;
        match &mut self.source {
            Source::Statistics {
                y0,
                stats,
                tie_policy,
                theta0,
            } => {
                let y = match stats.next() {
                    Some(y) => y?,
                    None => return Err(Error::StreamExhausted(self.emitted)),
                };
                if y > *y0 {
                    Ok(Indicator::Loss)
                } else if y < *y0 {
                    Ok(Indicator::Win)
                } else {
                    match tie_policy {
                        TiePolicy::Conservative => Ok(Indicator::Loss),
                        TiePolicy::Randomized => {
                            let th0 = *theta0.get_or_insert_with(|| rng.uniform());
                            let th = rng.uniform();
                            Ok(Indicator::from(th > th0))
                        }
                    }
                }
            }
            Source::Bernoulli { q } => Ok(Indicator::from(rng.bernoulli(*q))),
            Source::Polya => {
                let p = (losses as f64 + 1.0) / (t as f64 + 1.0);
                Ok(Indicator::from(rng.bernoulli(p)))
            }
            Source::Explicit { indicators, pos } => {
                let out = indicators
                    .get(*pos)
                    .copied()
                    .ok_or(Error::StreamExhausted(self.emitted))?;
                *pos += 1;
                Ok(out)
            }
        }
    }
}

impl IndicatorSource for IndicatorStream {
    fn next_indicator(&mut self) -> Result<Indicator> {
        if self.emitted >= self.max_len {
            return Err(Error::StreamExhausted(self.emitted));
        }
        let ind = self.draw()?;
        self.emitted += 1;
        if ind.is_loss() {
            self.losses += 1;
        }
        Ok(ind)
    }

    fn seed(&self) -> Option<u64> {
        match self.source {
            Source::Explicit { .. } => None,
            _ => Some(self.rng.master_seed()),
        }
    }
}

impl Iterator for IndicatorStream {
    type Item = Indicator;

    fn next(&mut self) -> Option<Indicator> {
        self.next_indicator().ok()
    }
}

/// Records indicators from a stream so several tests can consume the exact
/// same sequence (paired comparisons within a trial).
#[derive(Debug)]
pub struct IndicatorCache<S> {
    source: S,
    buffer: Vec<Indicator>,
    exhausted: bool,
}

impl<S: IndicatorSource> IndicatorCache<S> {
    pub fn new(source: S) -> Self {
        Self {
            source,
            buffer: Vec::new(),
            exhausted: false,
        }
    }

    /// A fresh reader starting at the first indicator.
    pub fn cursor(&mut self) -> CacheCursor<'_, S> {
        CacheCursor { cache: self, pos: 0 }
    }

    /// Number of indicators drawn from the underlying source so far.
    pub fn drawn(&self) -> usize {
        self.buffer.len()
    }

    pub fn recorded(&self) -> &[Indicator] {
        &self.buffer
    }
}

pub struct CacheCursor<'a, S> {
    cache: &'a mut IndicatorCache<S>,
    pos: usize,
}

impl<S: IndicatorSource> IndicatorSource for CacheCursor<'_, S> {
    fn next_indicator(&mut self) -> Result<Indicator> {
        if self.pos == self.cache.buffer.len() {
            if self.cache.exhausted {
                return Err(Error::StreamExhausted(self.pos as u64));
            }
            match self.cache.source.next_indicator() {
                Ok(ind) => self.cache.buffer.push(ind),
                Err(Error::StreamExhausted(n)) => {
                    self.cache.exhausted = true;
                    return Err(Error::StreamExhausted(n));
                }
                Err(e) => return Err(e),
            }
        }
        let ind = self.cache.buffer[self.pos];
        self.pos += 1;
        Ok(ind)
    }

    fn seed(&self) -> Option<u64> {
        self.cache.source.seed()
    }
}

/// Null probability of one specific indicator sequence under
/// exchangeability: `l! (t - l)! / (t + 1)!`.
pub fn polya_sequence_probability(indicators: &[Indicator]) -> f64 {
    let t = indicators.len() as f64;
    let l = indicators.iter().filter(|i| i.is_loss()).count() as f64;
    (-(t + 1.0).ln() - crate::special::ln_choose(t, l)).exp()
}

/// Exact rational version of [`polya_sequence_probability`].
pub fn polya_sequence_probability_exact(indicators: &[Indicator]) -> BigRational {
    let t = indicators.len() as u64;
    let l = indicators.iter().filter(|i| i.is_loss()).count() as u64;
    let fact = |n: u64| (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k));
    BigRational::new(fact(l) * fact(t - l), fact(t + 1))
}

fn parse_value(raw: &str, line: u64) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("cannot parse {raw:?} as a number: {e}"),
    })
}

/// Reads a statistic stream from CSV with a `y` column. The first data row
/// is the observed statistic. Rows after the first are parsed lazily, so a
/// test that stops early never reads the rest of the input.
pub fn read_statistics_csv<R: Read + 'static>(reader: R) -> Result<(f64, StatisticIter)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = headers.iter().position(|h| h == "y").ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing column `y`".into(),
    })?;
    let mut records = rdr.into_records();
    let mut next_value = move || -> Option<Result<f64>> {
        let rec = records.next()?;
        Some(rec.map_err(Error::from).and_then(|r| {
            let line = r.position().map(|p| p.line()).unwrap_or(0);
            let raw = r.get(col).ok_or_else(|| Error::Parse {
                line,
                message: "missing `y` field".into(),
            })?;
            parse_value(raw, line)
        }))
    };
    let y0 = match next_value() {
        Some(v) => v?,
        None => {
            return Err(Error::Parse {
                line: 2,
                message: "no observed statistic".into(),
            })
        }
    };
    Ok((y0, Box::new(std::iter::from_fn(next_value))))
}

/// Reads one value per line; blank lines and `#` comments are skipped.
pub fn read_statistics_lines<R: BufRead + 'static>(reader: R) -> Result<(f64, StatisticIter)> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i as u64 + 1;
        match line {
            Err(e) => Some(Err(Error::Io(e))),
            Ok(s) => {
                let s = s.trim();
                if s.is_empty() || s.starts_with('#') {
                    None
                } else {
                    Some(parse_value(s, line_no))
                }
            }
        }
    });
    let y0 = match lines.next() {
        Some(v) => v?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "no observed statistic".into(),
            })
        }
    };
    Ok((y0, Box::new(lines)))
}

/// Reads a 0/1 indicator sequence: either CSV with an `indicator` column or
/// one bit per line.
pub fn read_indicators<R: Read>(reader: R) -> Result<Vec<Indicator>> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    let mut column: Option<usize> = None;
    while let Some((_, first)) = lines.peek() {
        let first = first.trim();
        if first.is_empty() || first.starts_with('#') {
            lines.next();
            continue;
        }
        if first.chars().next().is_some_and(|c| c.is_alphabetic()) {
            column = Some(
                first
                    .split(',')
                    .position(|h| h.trim() == "indicator")
                    .ok_or_else(|| Error::Parse {
                        line: 1,
                        message: "missing column `indicator`".into(),
                    })?,
            );
            lines.next();
        }
        break;
    }
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let field = match column {
            Some(c) => s.split(',').nth(c).map(str::trim).ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing `indicator` field".into(),
            })?,
            None => s,
        };
        let bit = match field {
            "0" => Indicator::Win,
            "1" => Indicator::Loss,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("indicator must be 0 or 1, got {other:?}"),
                })
            }
        };
        out.push(bit);
    }
    Ok(out)
}
