//! Seeded sampling from `{2, …, n}` and the two convergence experiments: how
//! the selected divisor's exact generalization error behaves as the domain
//! grows, and how the boosting round weights decay. Emits one flat CSV
//! schema for both.
//!
//! Randomness comes from SplitMix64, a 64-bit add-and-mix generator, with
//! one substream per (experiment, n, trial) key derived by hashing the key
//! into the seed. Trials therefore parallelize without any shared state and
//! a fixed config reproduces its output byte for byte. Determinism is
//! promised within this implementation only, not across rewrites.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaboost::{
    exact_strong_accuracy, run_adaboost_with, BoostOptions, BoostRound, TraceStatus,
};
use crate::erm::{HypothesisClass, Sample};
use crate::error::{Error, Result};
use crate::hypotheses::{exact_generalization_error, Hypothesis};
use crate::primes::{even_count, PrimeTable};

/// SplitMix64: `state += φ·2⁶⁴`, then two xor-multiply finalizer rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Generator for the substream addressed by `path` under `seed`: each
    /// path component is mixed into the running state, so distinct keys give
    /// de-correlated streams.
    pub fn substream(seed: u64, path: &[u64]) -> Self {
        let mut state = mix64(seed ^ GOLDEN_GAMMA);
        for &part in path {
            state = mix64(state ^ mix64(part.wrapping_add(GOLDEN_GAMMA)));
        }
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw from `{2, …, n}` by scaled reduction: the 64-bit output
    /// maps onto `[0, n−2]` through a 128-bit multiply-shift, then shifts
    /// up by 2. No rejection; the residual bias is (n−1)/2⁶⁴.
    pub fn uniform_in(&mut self, n: u64) -> u64 {
        debug_assert!(n >= 2);
        let r = self.next_u64();
        2 + ((u128::from(r) * u128::from(n - 1)) >> 64) as u64
    }
}

/// Sample-size rule `m(n) = ⌈coefficient · (ln n)^exponent⌉`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MRule {
    pub coefficient: f64,
    pub exponent: u32,
}

impl MRule {
    pub fn sample_size(&self, n: u64) -> usize {
        let m = (self.coefficient * (n as f64).ln().powi(self.exponent as i32)).ceil();
        (m as usize).max(1)
    }
}

/// Full description of an experiment run. JSON form mirrors the fields;
/// only `seed` may be omitted (defaults to 0).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    /// Ascending domain bounds, each ≥ 4.
    pub n_grid: Vec<u64>,
    pub m_rule: MRule,
    /// Independent samples per domain bound.
    pub trials: u32,
    /// Boosting rounds per trial.
    pub rounds: u32,
    #[serde(default)]
    pub seed: u64,
    /// Candidate class for selection: prime divisors or all divisors.
    pub class: HypothesisClass,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            m_rule: MRule {
                coefficient: 1.0,
                exponent: 3,
            },
            trials: 100,
            rounds: 5,
            seed: 0,
            class: HypothesisClass::PrimeDivisors,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid must be non-empty".to_string()));
        }
        if self.n_grid.iter().any(|&n| n < 4) {
            return Err(Error::config("every n must be at least 4".to_string()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("n_grid must be strictly ascending".to_string()));
        }
        if !(self.m_rule.coefficient > 0.0 && self.m_rule.coefficient.is_finite()) {
            return Err(Error::config(
                "m_rule.coefficient must be positive and finite".to_string(),
            ));
        }
        if !matches!(self.m_rule.exponent, 2 | 3) {
            return Err(Error::config(
                "m_rule.exponent must be 2 or 3".to_string(),
            ));
        }
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1".to_string()));
        }
        if self.rounds < 1 {
            return Err(Error::config("rounds must be at least 1".to_string()));
        }
        Ok(())
    }

    pub fn max_n(&self) -> u64 {
        self.n_grid.iter().copied().max().unwrap_or(0)
    }

    /// Parse a config from a JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

/// Which experiment a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Erm,
    Boost,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Erm => "erm",
            ExperimentKind::Boost => "boost",
        }
    }
}

/// An exact rational alongside its float rendering.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ExactValue {
    pub num: i64,
    pub den: i64,
    pub value: f64,
}

impl From<Rational64> for ExactValue {
    fn from(r: Rational64) -> Self {
        ExactValue {
            num: *r.numer(),
            den: *r.denom(),
            value: *r.numer() as f64 / *r.denom() as f64,
        }
    }
}

impl ExactValue {
    pub fn exact(&self) -> Rational64 {
        Rational64::new(self.num, self.den)
    }
}

/// One trial's outcome. ERM trials leave the boosting fields empty.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub n: u64,
    pub m: usize,
    pub trial: u32,
    /// Divisor selected on the first (or only) selection.
    pub d_s: u64,
    /// Exact generalization error of the selected divisor rule.
    pub gen_error: ExactValue,
    pub ds_ne_2: bool,
    pub rounds: Vec<BoostRound>,
    /// Exact domain-wide accuracy of the voted classifier.
    pub acc_strong: Option<ExactValue>,
    /// Exact domain-wide accuracy of the rule with divisor 2.
    pub acc_baseline: Option<ExactValue>,
    pub status: Option<TraceStatus>,
}

const STREAM_ERM: u64 = 0x45524d; // "ERM"
const STREAM_BOOST: u64 = 0x424f4f5354; // "BOOST"

/// `m` uniform draws from `{2, …, n}` with uniform weights and labels.
pub fn sample_uniform(
    n: u64,
    m: usize,
    rng: &mut SplitMix64,
    table: &PrimeTable,
) -> Result<Sample<f64>> {
    if n < 2 {
        return Err(Error::domain(format!("domain bound must be ≥ 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::out_of_range(format!(
            "domain bound {n} beyond sieve limit {}",
            table.limit()
        )));
    }
    if m == 0 {
        return Err(Error::domain("sample size must be positive".to_string()));
    }
    let instances: Vec<u64> = (0..m).map(|_| rng.uniform_in(n)).collect();
    Sample::uniform(instances, table)
}

/// Expected step of the ±1/0 comparison walk between even-composite and
/// odd-composite draws: `(2(t(n)−1) + π(n))/(n−1) − 1`, exactly.
pub fn mu_n(n: u64, table: &PrimeTable) -> Result<Rational64> {
    if n < 2 {
        return Err(Error::domain(format!("domain bound must be ≥ 2, got {n}")));
    }
    let t = even_count(n)? as i64;
    let pi = table.prime_count(n)? as i64;
    let nm1 = (n - 1) as i64;
    Ok(Rational64::new(2 * (t - 1) + pi, nm1) - Rational64::new(1, 1))
}

/// `e^{−m·μ_n²/2}` when μ_n > 0, else the vacuous bound 1.
pub fn hoeffding_bound(n: u64, m: usize, table: &PrimeTable) -> Result<f64> {
    let mu = mu_n(n, table)?;
    if mu <= Rational64::new(0, 1) {
        return Ok(1.0);
    }
    let mu_f = *mu.numer() as f64 / *mu.denom() as f64;
    Ok((-(m as f64) * mu_f * mu_f / 2.0).exp())
}

/// One record per (n, trial): draw, select, and score the selected rule's
/// exact generalization error.
pub fn run_erm_convergence(
    config: &ExperimentConfig,
    table: &PrimeTable,
) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    if config.max_n() > table.limit() {
        return Err(Error::out_of_range(format!(
            "n_grid reaches {} beyond sieve limit {}",
            config.max_n(),
            table.limit()
        )));
    }
    let tasks = task_grid(config);
    tasks
        .par_iter()
        .map(|&(n, trial)| erm_trial(config, table, n, trial))
        .collect()
}

fn erm_trial(
    config: &ExperimentConfig,
    table: &PrimeTable,
    n: u64,
    trial: u32,
) -> Result<TrialRecord> {
    let m = config.m_rule.sample_size(n);
    let mut rng = SplitMix64::substream(config.seed, &[STREAM_ERM, n, u64::from(trial)]);
    let sample = sample_uniform(n, m, &mut rng, table)?;
    let d_s = sample.erm_select_in_class(config.class, table)?;
    let gen = exact_generalization_error(&Hypothesis::Divisor(d_s), n, table)?;
    Ok(TrialRecord {
        experiment: ExperimentKind::Erm,
        n,
        m,
        trial,
        d_s,
        gen_error: gen.into(),
        ds_ne_2: d_s != 2,
        rounds: Vec::new(),
        acc_strong: None,
        acc_baseline: None,
        status: None,
    })
}

/// One record per (n, trial): run boosting, keep every round, and score the
/// voted classifier and the divisor-2 baseline exactly over `[2, n]`.
pub fn run_weight_convergence(
    config: &ExperimentConfig,
    table: &PrimeTable,
) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    if config.max_n() > table.limit() {
        return Err(Error::out_of_range(format!(
            "n_grid reaches {} beyond sieve limit {}",
            config.max_n(),
            table.limit()
        )));
    }
    let tasks = task_grid(config);
    tasks
        .par_iter()
        .map(|&(n, trial)| boost_trial(config, table, n, trial))
        .collect()
}

fn boost_trial(
    config: &ExperimentConfig,
    table: &PrimeTable,
    n: u64,
    trial: u32,
) -> Result<TrialRecord> {
    let m = config.m_rule.sample_size(n);
    let mut rng = SplitMix64::substream(config.seed, &[STREAM_BOOST, n, u64::from(trial)]);
    let sample = sample_uniform(n, m, &mut rng, table)?;
    let opts = BoostOptions {
        class: config.class,
        ..BoostOptions::default()
    };
    let trace = run_adaboost_with(&sample, config.rounds, table, opts)?;
    let d_s = trace.rounds[0].divisor;
    let gen = exact_generalization_error(&Hypothesis::Divisor(d_s), n, table)?;
    let acc_strong = exact_strong_accuracy(&trace, n, table)?;
    let baseline_err = exact_generalization_error(&Hypothesis::Divisor(2), n, table)?;
    let acc_baseline = Rational64::new(1, 1) - baseline_err;
    Ok(TrialRecord {
        experiment: ExperimentKind::Boost,
        n,
        m,
        trial,
        d_s,
        gen_error: gen.into(),
        ds_ne_2: d_s != 2,
        rounds: trace.rounds,
        acc_strong: Some(acc_strong.into()),
        acc_baseline: Some(acc_baseline.into()),
        status: Some(trace.status),
    })
}

fn task_grid(config: &ExperimentConfig) -> Vec<(u64, u32)> {
    let mut tasks = Vec::with_capacity(config.n_grid.len() * config.trials as usize);
    for &n in &config.n_grid {
        for trial in 0..config.trials {
            tasks.push((n, trial));
        }
    }
    tasks
}

/// Flat CSV header shared by both experiments.
pub const CSV_HEADER: &str = "experiment,n,m,trial,t,d_t,eps_t,W_t,d_S,L_gen_num,L_gen_den,L_gen_float,dS_ne_2,acc_strong,acc_baseline,status";

/// Write records in their given order: one row per ERM trial, one row per
/// boosting round, with trial-level columns repeated on each round row and
/// inapplicable cells left empty. Floats render shortest-round-trip.
pub fn write_csv_to<Wr: io::Write>(records: &[TrialRecord], mut out: Wr) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for rec in records {
        if rec.rounds.is_empty() {
            write_row(&mut out, rec, None)?;
        } else {
            for round in &rec.rounds {
                write_row(&mut out, rec, Some(round))?;
            }
        }
    }
    Ok(())
}

fn write_row<Wr: io::Write>(
    out: &mut Wr,
    rec: &TrialRecord,
    round: Option<&BoostRound>,
) -> io::Result<()> {
    let (t, d_t, eps_t, w_t) = match round {
        Some(r) => (
            r.round.to_string(),
            r.divisor.to_string(),
            r.error.to_string(),
            r.weight.to_string(),
        ),
        None => Default::default(),
    };
    let fmt_acc = |v: &Option<ExactValue>| v.map(|e| e.value.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{t},{d_t},{eps_t},{w_t},{},{},{},{},{},{},{},{}",
        rec.experiment.as_str(),
        rec.n,
        rec.m,
        rec.trial,
        rec.d_s,
        rec.gen_error.num,
        rec.gen_error.den,
        rec.gen_error.value,
        u8::from(rec.ds_ne_2),
        fmt_acc(&rec.acc_strong),
        fmt_acc(&rec.acc_baseline),
        rec.status.map(|s| s.as_str()).unwrap_or_default(),
    )
}

/// [`write_csv_to`] against a filesystem path.
pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv_to(records, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Per-n aggregate of ERM records.
#[derive(Debug, Clone, Serialize)]
pub struct ErmSummary {
    pub n: u64,
    pub m: usize,
    pub trials: usize,
    pub mean_gen_error: f64,
    pub median_gen_error: f64,
    /// Fraction of trials whose selected divisor differed from 2.
    pub freq_ds_ne_2: f64,
    pub hoeffding: f64,
}

/// Group ERM records by n (records keep grid order).
pub fn summarize_erm(records: &[TrialRecord], table: &PrimeTable) -> Result<Vec<ErmSummary>> {
    let mut out = Vec::new();
    for group in group_by_n(records) {
        let n = group[0].n;
        let m = group[0].m;
        let mut errors: Vec<f64> = group.iter().map(|r| r.gen_error.value).collect();
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let ne2 = group.iter().filter(|r| r.ds_ne_2).count();
        out.push(ErmSummary {
            n,
            m,
            trials: group.len(),
            mean_gen_error: mean,
            median_gen_error: median(&mut errors),
            freq_ds_ne_2: ne2 as f64 / group.len() as f64,
            hoeffding: hoeffding_bound(n, m, table)?,
        });
    }
    Ok(out)
}

/// Per-n aggregate of boosting records.
#[derive(Debug, Clone, Serialize)]
pub struct WeightSummary {
    pub n: u64,
    pub m: usize,
    pub trials: usize,
    /// Median over trials of |W₁|.
    pub median_abs_w1: f64,
    /// Median over trials of max_t |W_t|.
    pub median_max_abs_w: f64,
}

pub fn summarize_weights(records: &[TrialRecord]) -> Vec<WeightSummary> {
    let mut out = Vec::new();
    for group in group_by_n(records) {
        let mut w1: Vec<f64> = group
            .iter()
            .filter_map(|r| r.rounds.first().map(|x| x.weight.abs()))
            .collect();
        let mut wmax: Vec<f64> = group
            .iter()
            .map(|r| {
                r.rounds
                    .iter()
                    .map(|x| x.weight.abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        out.push(WeightSummary {
            n: group[0].n,
            m: group[0].m,
            trials: group.len(),
            median_abs_w1: median(&mut w1),
            median_max_abs_w: median(&mut wmax),
        });
    }
    out
}

fn group_by_n(records: &[TrialRecord]) -> Vec<&[TrialRecord]> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].n != records[start].n {
            groups.push(&records[start..i]);
            start = i;
        }
    }
    groups
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}
