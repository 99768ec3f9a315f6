//! Seeded simulation of the reflected walk.
//!
//! Every trial draws from its own ChaCha8 stream, selected by the trial index,
//! and all accumulators are integers, so a run is a pure function of
//! `(n, trials, seed)` whatever the thread count.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::closed_form::max_distribution;
use crate::error::{Error, Result};

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.5758293035489004;
/// Confidence intervals are only reported from this many trials on.
pub const CI_MIN_TRIALS: u64 = 10_000;
const CHUNK: u64 = 4096;
/// Chi-squared bins are pooled until their expected count reaches this.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    /// Thread count; 0 uses the rayon default.
    pub workers: usize,
}

impl SimConfig {
    pub fn new(n: u64, trials: u64, seed: u64) -> Self {
        Self {
            n,
            trials,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ZeroSteps(self.n));
        }
        if self.trials == 0 || self.trials >= 1 << 63 {
            return Err(Error::InvalidConfig(format!(
                "trials must be in [1, 2^63), got {}",
                self.trials
            )));
        }
        Ok(())
    }
}

/// One step from `s`: up from the origin, otherwise up iff `up`.
#[inline]
pub fn reflected_step(s: u64, up: bool) -> u64 {
    if s == 0 || up {
        s + 1
    } else {
        s - 1
    }
}

/// Samples `(S_n, A_n)`, consuming one random bit per step.
pub fn simulate_walk<R: RngCore + ?Sized>(n: u64, rng: &mut R) -> (u64, u64) {
    let mut s = 0u64;
    let mut a = 0u64;
    let mut left = n;
    while left > 0 {
        let take = left.min(64);
        let mut bits = rng.next_u64();
        for _ in 0..take {
            s = reflected_step(s, bits & 1 == 1);
            a = a.max(s);
            bits >>= 1;
        }
        left -= take;
    }
    (s, a)
}

fn trial_rng(key: &[u8; 32], trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(trial);
    rng
}

#[derive(Clone)]
struct Tally {
    sum_s: u128,
    sum_s2: u128,
    sum_a: u128,
    sum_a2: u128,
    hist_s: Vec<u64>,
    hist_a: Vec<u64>,
}

impl Tally {
    fn new(n: u64) -> Self {
        Self {
            sum_s: 0,
            sum_s2: 0,
            sum_a: 0,
            sum_a2: 0,
            hist_s: vec![0; n as usize + 1],
            hist_a: vec![0; n as usize + 1],
        }
    }

    fn record(&mut self, s: u64, a: u64) {
        let (s, a) = (u128::from(s), u128::from(a));
        self.sum_s += s;
        self.sum_s2 += s * s;
        self.sum_a += a;
        self.sum_a2 += a * a;
        self.hist_s[s as usize] += 1;
        self.hist_a[a as usize] += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        self.sum_s += other.sum_s;
        self.sum_s2 += other.sum_s2;
        self.sum_a += other.sum_a;
        self.sum_a2 += other.sum_a2;
        for (x, y) in self.hist_s.iter_mut().zip(&other.hist_s) {
            *x += y;
        }
        for (x, y) in self.hist_a.iter_mut().zip(&other.hist_a) {
            *x += y;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub config: SimConfig,
    pub mean_s: f64,
    pub var_s: f64,
    pub mean_a: f64,
    pub var_a: f64,
    /// 99% normal-approximation half-widths, present when `trials ≥ 10⁴`.
    pub ci_halfwidth_s: Option<f64>,
    pub ci_halfwidth_a: Option<f64>,
    pub hist_s: BTreeMap<u64, u64>,
    pub hist_a: BTreeMap<u64, u64>,
}

fn mean_var(sum: u128, sum2: u128, trials: u64) -> (f64, f64) {
    let t = trials as f64;
    let mean = sum as f64 / t;
    if trials < 2 {
        return (mean, 0.0);
    }
    // Σ(x − x̄)² = (tΣx² − (Σx)²)/t, exact in integers before the division.
    let t128 = u128::from(trials);
    let centered = t128 * sum2 - sum * sum;
    (mean, centered as f64 / t / (t - 1.0))
}

impl SimSummary {
    pub fn std_error_a(&self) -> f64 {
        (self.var_a / self.config.trials as f64).sqrt()
    }

    pub fn std_error_s(&self) -> f64 {
        (self.var_s / self.config.trials as f64).sqrt()
    }

    pub fn empirical_max_prob(&self, a: u64) -> f64 {
        self.hist_a.get(&a).copied().unwrap_or(0) as f64 / self.config.trials as f64
    }
}

pub fn run(config: SimConfig) -> Result<SimSummary> {
    config.validate()?;
    let key = ChaCha8Rng::seed_from_u64(config.seed).get_seed();
    let n = config.n;
    let chunks = config.trials.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .fold(
                || Tally::new(n),
                |mut tally, c| {
                    let end = ((c + 1) * CHUNK).min(config.trials);
                    for trial in c * CHUNK..end {
                        let (s, a) = simulate_walk(n, &mut trial_rng(&key, trial));
                        tally.record(s, a);
                    }
                    tally
                },
            )
            .reduce(|| Tally::new(n), Tally::merge)
    };
    let tally = if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)
    };

    let (mean_s, var_s) = mean_var(tally.sum_s, tally.sum_s2, config.trials);
    let (mean_a, var_a) = mean_var(tally.sum_a, tally.sum_a2, config.trials);
    let ci = |var: f64| {
        (config.trials >= CI_MIN_TRIALS).then(|| Z99 * (var / config.trials as f64).sqrt())
    };
    let sparse = |h: &[u64]| {
        h.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k as u64, c))
            .collect::<BTreeMap<_, _>>()
    };
    Ok(SimSummary {
        config,
        mean_s,
        var_s,
        mean_a,
        var_a,
        ci_halfwidth_s: ci(var_s),
        ci_halfwidth_a: ci(var_a),
        hist_s: sparse(&tally.hist_s),
        hist_a: sparse(&tally.hist_a),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    /// Number of pooled bins.
    pub bins: usize,
}

/// Pearson test of `hist_a` against the exact law of `A_n`; adjacent levels
/// are pooled until each bin expects at least 5 counts.
pub fn chi_squared_max(summary: &SimSummary) -> Result<ChiSquaredResult> {
    let n = summary.config.n;
    let trials = summary.config.trials as f64;
    let law = max_distribution(n)?;
    let mut bins: Vec<(f64, u64)> = Vec::new();
    let mut open = (0.0, 0u64);
    for a in 1..=n {
        open.0 += law.get(a).copied().unwrap_or(0.0) * trials;
        open.1 += summary.hist_a.get(&a).copied().unwrap_or(0);
        if open.0 >= MIN_EXPECTED {
            bins.push(open);
            open = (0.0, 0);
        }
    }
    match bins.last_mut() {
        Some(last) => {
            last.0 += open.0;
            last.1 += open.1;
        }
        None => bins.push(open),
    }
    let statistic: f64 = bins.iter().map(|&(e, o)| (o as f64 - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1) as u64;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .sf(statistic)
    };
    Ok(ChiSquaredResult {
        statistic,
        dof,
        p_value,
        bins: bins.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub a: u64,
    pub count: u64,
    pub empirical_prob: f64,
    pub exact_prob: f64,
    pub z_score: f64,
}

/// One row per level `1..=max(observed)`, with the binomial z-score of the count.
pub fn histogram_rows(summary: &SimSummary) -> Result<Vec<HistogramRow>> {
    let law = max_distribution(summary.config.n)?;
    let trials = summary.config.trials as f64;
    let top = summary.hist_a.keys().next_back().copied().unwrap_or(0);
    Ok((1..=top)
        .map(|a| {
            let count = summary.hist_a.get(&a).copied().unwrap_or(0);
            let p = law.get(a).copied().unwrap_or(0.0);
            let sd = (trials * p * (1.0 - p)).sqrt();
            let dev = count as f64 - trials * p;
            HistogramRow {
                a,
                count,
                empirical_prob: count as f64 / trials,
                exact_prob: p,
                z_score: if sd > 0.0 { dev / sd } else { 0.0 },
            }
        })
        .collect())
}
