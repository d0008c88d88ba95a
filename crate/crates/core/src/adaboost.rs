//! Boosting over the divisor rules: per-round weak-learner selection,
//! round weights `W = ½·ln(1/ε − 1)`, the exponential distribution update in
//! ±1 form, and the signed-sum output classifier.
//!
//! The weak learner reuses the minimal-maximizer selection rule, so the
//! chosen divisor each round is prime. Errors of exactly 0 or 1 would give
//! infinite round weights; they are clamped at a configurable floor, a clamp
//! mark is recorded on the trace, and a perfect round ends the run early.
//! An error above ½ keeps its negative weight rather than flipping the
//! hypothesis.

use num_rational::Rational64;
use serde::Serialize;
use std::io;

use crate::erm::{DivisorPool, HypothesisClass, Sample};
use crate::error::{Error, Result};
use crate::hypotheses::Hypothesis;
use crate::primes::PrimeTable;

/// Default floor keeping `½·ln(1/ε − 1)` finite at ε ∈ {0, 1}.
pub const DEFAULT_EPS_FLOOR: f64 = 1e-12;

/// Normalization slack for boosting distributions.
pub const DIST_SUM_TOL: f64 = 1e-10;

/// Per-instance weights, nonnegative and summing to one.
#[derive(Debug, Clone)]
pub struct BoostDistribution {
    weights: Vec<f64>,
}

impl BoostDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain(
                "distribution must cover at least one instance".to_string(),
            ));
        }
        if !weights.iter().all(|w| *w >= 0.0) {
            return Err(Error::domain(
                "distribution weights must be nonnegative".to_string(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::domain(format!(
                "distribution must sum to 1, got {total}"
            )));
        }
        Ok(BoostDistribution { weights })
    }

    /// `1/m` everywhere.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain(
                "distribution must cover at least one instance".to_string(),
            ));
        }
        Ok(BoostDistribution {
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// How a boosting run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// All requested rounds ran.
    Completed,
    /// A round reached weighted error 0 before clamping.
    StoppedPerfect,
    /// A round reached weighted error 1 before clamping. Unreachable for
    /// divisor rules on samples with positive composite weight; kept so the
    /// trace format is total.
    StoppedDegenerate,
}

impl TraceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceStatus::Completed => "completed",
            TraceStatus::StoppedPerfect => "stopped_perfect",
            TraceStatus::StoppedDegenerate => "stopped_degenerate",
        }
    }
}

/// One boosting round: chosen divisor, weighted error, round weight.
#[derive(Debug, Clone, Serialize)]
pub struct BoostRound {
    /// 1-based round index.
    pub round: u32,
    pub divisor: u64,
    /// Weighted error before clamping.
    pub error: f64,
    pub weight: f64,
    /// True when the error hit the clamp floor or ceiling.
    pub clamped: bool,
}

/// Full run record.
#[derive(Debug, Clone, Serialize)]
pub struct BoostTrace {
    pub rounds: Vec<BoostRound>,
    pub status: TraceStatus,
}

impl BoostTrace {
    /// Rows `trial_id,n,m,t,d_t,eps_t,W_t,status` under a caller-supplied
    /// context; header included.
    pub fn write_csv<Wr: io::Write>(
        &self,
        trial_id: u64,
        n: u64,
        m: usize,
        mut out: Wr,
    ) -> io::Result<()> {
        writeln!(out, "trial_id,n,m,t,d_t,eps_t,W_t,status")?;
        for r in &self.rounds {
            writeln!(
                out,
                "{trial_id},{n},{m},{},{},{},{},{}",
                r.round,
                r.divisor,
                r.error,
                r.weight,
                self.status.as_str()
            )?;
        }
        Ok(())
    }
}

/// Options for a boosting run.
#[derive(Debug, Clone, Copy)]
pub struct BoostOptions {
    pub class: HypothesisClass,
    pub eps_floor: f64,
}

impl Default for BoostOptions {
    fn default() -> Self {
        BoostOptions {
            class: HypothesisClass::PrimeDivisors,
            eps_floor: DEFAULT_EPS_FLOOR,
        }
    }
}

/// Best divisor rule under `dist` and its weighted error (before clamping).
/// Searches prime divisors; widening to all divisors returns the same rule.
pub fn weak_learn(
    sample: &Sample<f64>,
    dist: &BoostDistribution,
    table: &PrimeTable,
) -> Result<(u64, f64)> {
    weak_learn_in_class(sample, dist, HypothesisClass::PrimeDivisors, table)
}

/// [`weak_learn`] over an explicit candidate class.
pub fn weak_learn_in_class(
    sample: &Sample<f64>,
    dist: &BoostDistribution,
    class: HypothesisClass,
    table: &PrimeTable,
) -> Result<(u64, f64)> {
    if dist.len() != sample.len() {
        return Err(Error::domain(format!(
            "distribution of {} over a sample of {}",
            dist.len(),
            sample.len()
        )));
    }
    let pool = DivisorPool::build(sample.instances(), sample.labels(), class, table)?;
    Ok(select_round(sample, &pool, dist.as_slice()))
}

fn select_round(sample: &Sample<f64>, pool: &DivisorPool, dist: &[f64]) -> (u64, f64) {
    let (d, _) = pool.select(dist);
    let eps = weighted_error(sample, dist, d);
    (d, eps)
}

fn weighted_error(sample: &Sample<f64>, dist: &[f64], d: u64) -> f64 {
    let h = Hypothesis::Divisor(d);
    sample
        .instances()
        .iter()
        .zip(sample.labels())
        .zip(dist)
        .filter(|((&x, label), _)| {
            let predicted = u8::from(!h.zero_on(x));
            predicted != label.bit()
        })
        .map(|(_, &w)| w)
        .sum()
}

/// `½·ln(1/ε − 1)` with ε clamped into `[floor, 1 − floor]`; natural log.
pub fn weight_from_error(eps: f64) -> f64 {
    weight_from_error_clamped(eps, DEFAULT_EPS_FLOOR).0
}

/// [`weight_from_error`] reporting whether the clamp engaged.
pub fn weight_from_error_clamped(eps: f64, floor: f64) -> (f64, bool) {
    let clamped = !(floor..=1.0 - floor).contains(&eps);
    let e = eps.clamp(floor, 1.0 - floor);
    (0.5 * (1.0 / e - 1.0).ln(), clamped)
}

/// Multiply each weight by `e^{−W·r(x)·h(x)}` (labels and outputs in ±1
/// form) and renormalize. Misclassified instances gain weight when `W > 0`.
pub fn update_distribution(
    dist: &BoostDistribution,
    w: f64,
    h: &Hypothesis,
    sample: &Sample<f64>,
) -> Result<BoostDistribution> {
    if dist.len() != sample.len() {
        return Err(Error::domain(format!(
            "distribution of {} over a sample of {}",
            dist.len(),
            sample.len()
        )));
    }
    if !w.is_finite() {
        return Err(Error::domain(format!("round weight must be finite, got {w}")));
    }
    let mut next = Vec::with_capacity(dist.len());
    for ((&x, label), &d_i) in sample
        .instances()
        .iter()
        .zip(sample.labels())
        .zip(dist.as_slice())
    {
        let margin = f64::from(label.pm() * h.evaluate_pm(x)?);
        next.push(d_i * (-w * margin).exp());
    }
    let total: f64 = next.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return Err(Error::domain(
            "distribution update normalizer vanished".to_string(),
        ));
    }
    for v in &mut next {
        *v /= total;
    }
    BoostDistribution::new(next)
}

/// Run boosting for up to `rounds` rounds with default options.
pub fn run_adaboost(sample: &Sample<f64>, rounds: u32, table: &PrimeTable) -> Result<BoostTrace> {
    run_adaboost_with(sample, rounds, table, BoostOptions::default())
}

/// [`run_adaboost`] with explicit options.
pub fn run_adaboost_with(
    sample: &Sample<f64>,
    rounds: u32,
    table: &PrimeTable,
    opts: BoostOptions,
) -> Result<BoostTrace> {
    if rounds == 0 {
        return Err(Error::domain("need at least one round".to_string()));
    }
    let pool = DivisorPool::build(sample.instances(), sample.labels(), opts.class, table)?;
    let mut dist = BoostDistribution::uniform(sample.len())?;
    let mut trace = BoostTrace {
        rounds: Vec::with_capacity(rounds as usize),
        status: TraceStatus::Completed,
    };

    for t in 1..=rounds {
        let (d, eps) = select_round(sample, &pool, dist.as_slice());
        let (w, clamped) = weight_from_error_clamped(eps, opts.eps_floor);
        trace.rounds.push(BoostRound {
            round: t,
            divisor: d,
            error: eps,
            weight: w,
            clamped,
        });
        if eps <= 0.0 {
            trace.status = TraceStatus::StoppedPerfect;
            break;
        }
        if eps >= 1.0 {
            trace.status = TraceStatus::StoppedDegenerate;
            break;
        }
        if t < rounds {
            dist = update_distribution(&dist, w, &Hypothesis::Divisor(d), sample)?;
        }
    }
    Ok(trace)
}

/// Sign of the weight-summed vote, with sign(0) = +1 ("prime").
pub fn strong_classify(trace: &BoostTrace, x: u64) -> Result<i32> {
    if trace.rounds.is_empty() {
        return Err(Error::domain("trace holds no rounds".to_string()));
    }
    if x < 2 {
        return Err(Error::domain(format!("instances start at 2, got {x}")));
    }
    let mut score = 0.0;
    for r in &trace.rounds {
        let h = Hypothesis::Divisor(r.divisor);
        score += r.weight * f64::from(h.evaluate_pm(x)?);
    }
    Ok(if score >= 0.0 { 1 } else { -1 })
}

/// Exact agreement rate of the voted classifier with the prime labeling over
/// all of `[2, n]`: one pass, one divisibility test per round per point.
pub fn exact_strong_accuracy(
    trace: &BoostTrace,
    n: u64,
    table: &PrimeTable,
) -> Result<Rational64> {
    if trace.rounds.is_empty() {
        return Err(Error::domain("trace holds no rounds".to_string()));
    }
    if n < 2 {
        return Err(Error::domain(format!("domain bound must be ≥ 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::out_of_range(format!(
            "domain bound {n} beyond sieve limit {}",
            table.limit()
        )));
    }
    let mut agree = 0i64;
    for x in 2..=n {
        let mut score = 0.0;
        for r in &trace.rounds {
            let zero = x > r.divisor && x % r.divisor == 0;
            score += if zero { -r.weight } else { r.weight };
        }
        let vote = score >= 0.0;
        if vote == table.is_prime(x) {
            agree += 1;
        }
    }
    Ok(Rational64::new(agree, (n - 1) as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::exact_generalization_error;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn table() -> &'static PrimeTable {
        static TABLE: OnceLock<PrimeTable> = OnceLock::new();
        TABLE.get_or_init(|| PrimeTable::build(10_000).unwrap())
    }

    fn uniform(instances: Vec<u64>) -> Sample<f64> {
        Sample::uniform(instances, table()).unwrap()
    }

    #[test]
    fn weak_learn_examples() {
        let s = uniform(vec![4, 6, 9, 7]);
        let dist = BoostDistribution::uniform(4).unwrap();
        let (d, eps) = weak_learn(&s, &dist, table()).unwrap();
        assert_eq!(d, 2);
        assert!((eps - 0.25).abs() < 1e-15);

        let primes = uniform(vec![3, 5, 7]);
        let (d, eps) = weak_learn(&primes, &BoostDistribution::uniform(3).unwrap(), table()).unwrap();
        assert_eq!(d, 2);
        assert_eq!(eps, 0.0);

        let s = uniform(vec![4, 6, 9]);
        let dist = BoostDistribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let (d, eps) = weak_learn(&s, &dist, table()).unwrap();
        assert_eq!(d, 3);
        assert!((eps - 0.1).abs() < 1e-12);
    }

    #[test]
    fn weak_learn_classes_agree() {
        let s = uniform(vec![12, 30, 36, 49, 11, 100]);
        let dist = BoostDistribution::uniform(6).unwrap();
        assert_eq!(
            weak_learn_in_class(&s, &dist, HypothesisClass::PrimeDivisors, table()).unwrap(),
            weak_learn_in_class(&s, &dist, HypothesisClass::AllDivisors, table()).unwrap()
        );
    }

    #[test]
    fn weight_formula() {
        assert_eq!(weight_from_error(0.5), 0.0);
        let e2 = 1.0 / (1.0 + std::f64::consts::E.powi(2));
        assert!((weight_from_error(e2) - 1.0).abs() < 1e-12);
        assert!((weight_from_error(0.25) - 0.5 * 3f64.ln()).abs() < 1e-15);
        // Clamp keeps the endpoints finite and symmetric.
        let (w0, c0) = weight_from_error_clamped(0.0, DEFAULT_EPS_FLOOR);
        let (w1, c1) = weight_from_error_clamped(1.0, DEFAULT_EPS_FLOOR);
        assert!(c0 && c1);
        assert!(w0.is_finite() && w1.is_finite());
        assert!(w1 < 0.0 && 0.0 < w0);
        // Roughly ±½·ln(1/floor); computing 1/(1−ε)−1 costs a few digits.
        let magnitude = 0.5 * (1.0 / DEFAULT_EPS_FLOOR).ln();
        assert!((w0 - magnitude).abs() < 1e-3);
        assert!((w1 + magnitude).abs() < 1e-3);
        // Errors above ½ yield negative weights, kept as-is.
        assert!(weight_from_error(0.75) < 0.0);
    }

    #[test]
    fn update_reweights_miss_to_half() {
        let s = uniform(vec![4, 6, 9, 7]);
        let dist = BoostDistribution::uniform(4).unwrap();
        let w = 0.5 * 3f64.ln();
        let next = update_distribution(&dist, w, &Hypothesis::Divisor(2), &s).unwrap();
        let expect = [1.0 / 6.0, 1.0 / 6.0, 0.5, 1.0 / 6.0];
        for (got, want) in next.as_slice().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn update_identities() {
        let s = uniform(vec![4, 6, 9, 7]);
        let dist = BoostDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        // W = 0 leaves the distribution unchanged.
        let same = update_distribution(&dist, 0.0, &Hypothesis::Divisor(2), &s).unwrap();
        for (a, b) in dist.as_slice().iter().zip(same.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        // A hypothesis that classifies everything correctly changes nothing:
        // the uniform factor cancels in normalization. Divisor 5 covers no
        // instance here and none of 4, 6, 9 is prime... 5 misses the
        // composites, so use the all-prime sample instead.
        let primes = uniform(vec![3, 5, 7]);
        let d3 = BoostDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = update_distribution(&d3, 0.7, &Hypothesis::Divisor(11), &primes).unwrap();
        for (a, b) in d3.as_slice().iter().zip(out.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn run_single_round() {
        let s = uniform(vec![4, 6, 9, 7]);
        let trace = run_adaboost(&s, 1, table()).unwrap();
        assert_eq!(trace.status, TraceStatus::Completed);
        assert_eq!(trace.rounds.len(), 1);
        let r = &trace.rounds[0];
        assert_eq!((r.round, r.divisor), (1, 2));
        assert!((r.error - 0.25).abs() < 1e-15);
        assert!((r.weight - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!(!r.clamped);
    }

    #[test]
    fn run_second_round_follows_reweighting() {
        let s = uniform(vec![4, 6, 9, 7]);
        let trace = run_adaboost(&s, 2, table()).unwrap();
        assert_eq!(trace.rounds.len(), 2);
        let r2 = &trace.rounds[1];
        // Under D² = (1/6, 1/6, 1/2, 1/6), rule 3 errs only on the first
        // instance: ε₂ = 1/6. Recompute by hand as the oracle.
        let d2 = [1.0 / 6.0, 1.0 / 6.0, 0.5, 1.0 / 6.0];
        let h3 = Hypothesis::Divisor(3);
        let eps_oracle: f64 = s
            .instances()
            .iter()
            .zip(s.labels())
            .zip(d2)
            .filter(|((&x, l), _)| h3.evaluate(x).unwrap() != l.bit())
            .map(|(_, w)| w)
            .sum();
        assert!((eps_oracle - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r2.divisor, 3);
        assert!((r2.error - eps_oracle).abs() < 1e-12);
    }

    #[test]
    fn all_prime_sample_stops_perfect() {
        let s = uniform(vec![3, 5, 7]);
        let trace = run_adaboost(&s, 5, table()).unwrap();
        assert_eq!(trace.status, TraceStatus::StoppedPerfect);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.rounds[0].error, 0.0);
        assert!(trace.rounds[0].clamped);
        assert!(trace.rounds[0].weight.is_finite());
    }

    #[test]
    fn fully_covered_sample_stops_perfect() {
        let s = uniform(vec![4, 8, 16]);
        let trace = run_adaboost(&s, 3, table()).unwrap();
        assert_eq!(trace.status, TraceStatus::StoppedPerfect);
    }

    #[test]
    fn strong_classify_examples() {
        let s = uniform(vec![4, 6, 9, 7]);
        let trace = run_adaboost(&s, 1, table()).unwrap();
        // 9 is not a proper multiple of 2, so the single rule votes +1.
        assert_eq!(strong_classify(&trace, 9).unwrap(), 1);
        assert_eq!(strong_classify(&trace, 4).unwrap(), -1);

        // All-zero weights vote +1 everywhere: sign(0) is "prime".
        let zero = BoostTrace {
            rounds: vec![BoostRound {
                round: 1,
                divisor: 2,
                error: 0.5,
                weight: 0.0,
                clamped: false,
            }],
            status: TraceStatus::Completed,
        };
        for x in [2u64, 4, 9, 17] {
            assert_eq!(strong_classify(&zero, x).unwrap(), 1);
        }

        // Two rules, both crossing out 6.
        let two = BoostTrace {
            rounds: vec![
                BoostRound {
                    round: 1,
                    divisor: 2,
                    error: 0.3,
                    weight: 0.5,
                    clamped: false,
                },
                BoostRound {
                    round: 2,
                    divisor: 3,
                    error: 0.4,
                    weight: 0.2,
                    clamped: false,
                },
            ],
            status: TraceStatus::Completed,
        };
        assert_eq!(strong_classify(&two, 6).unwrap(), -1);

        let empty = BoostTrace {
            rounds: vec![],
            status: TraceStatus::Completed,
        };
        assert!(matches!(
            strong_classify(&empty, 6),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exact_accuracy_matches_pointwise_classification() {
        let s = uniform(vec![4, 6, 9, 7, 30, 121]);
        let trace = run_adaboost(&s, 3, table()).unwrap();
        let n = 500;
        let acc = exact_strong_accuracy(&trace, n, table()).unwrap();
        let mut agree = 0i64;
        for x in 2..=n {
            let vote = strong_classify(&trace, x).unwrap();
            let truth = if table().is_prime(x) { 1 } else { -1 };
            if vote == truth {
                agree += 1;
            }
        }
        assert_eq!(acc, Rational64::new(agree, (n - 1) as i64));
    }

    #[test]
    fn single_rule_accuracy_complements_generalization_error() {
        let s = uniform(vec![4, 6, 8, 10, 7]);
        let trace = run_adaboost(&s, 1, table()).unwrap();
        assert_eq!(trace.rounds[0].divisor, 2);
        assert!(trace.rounds[0].weight > 0.0);
        let n = 1000;
        let acc = exact_strong_accuracy(&trace, n, table()).unwrap();
        let err = exact_generalization_error(&Hypothesis::Divisor(2), n, table()).unwrap();
        assert_eq!(acc + err, Rational64::new(1, 1));
    }

    #[test]
    fn trace_csv_layout() {
        let s = uniform(vec![4, 6, 9, 7]);
        let trace = run_adaboost(&s, 1, table()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(7, 10, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("trial_id,n,m,t,d_t,eps_t,W_t,status"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("7,10,4,1,2,0.25,"));
        assert!(row.ends_with(",completed"));
    }

    proptest! {
        // Each update keeps the distribution normalized and within the
        // per-round multiplicative envelope e^{∓2|W|}.
        #[test]
        fn update_envelope(raw in prop::collection::vec(2u64..3000, 2..20), seed_w in -2.0f64..2.0) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let dist = BoostDistribution::uniform(s.len()).unwrap();
            let next = update_distribution(&dist, seed_w, &Hypothesis::Divisor(2), &s).unwrap();
            let total: f64 = next.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() <= DIST_SUM_TOL);
            let lo = (-2.0 * seed_w.abs()).exp();
            let hi = (2.0 * seed_w.abs()).exp();
            for (&before, &after) in dist.as_slice().iter().zip(next.as_slice()) {
                let ratio = after / before;
                prop_assert!(ratio >= lo * (1.0 - 1e-9) && ratio <= hi * (1.0 + 1e-9));
            }
        }

        // The weak learner's error is minimal over every divisor rule with a
        // divisor up to the largest instance.
        #[test]
        fn weak_learner_is_optimal(raw in prop::collection::vec(2u64..500, 1..10)) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let dist = BoostDistribution::uniform(s.len()).unwrap();
            let (_, eps) = weak_learn(&s, &dist, table()).unwrap();
            let max_x = *s.instances().iter().max().unwrap();
            for d in 2..=max_x {
                let rival = s.weighted_risk(&Hypothesis::Divisor(d)).unwrap();
                prop_assert!(eps <= rival + 1e-9, "d={d}: {eps} > {rival}");
            }
        }

        // With every round error below ½, the usual exponential product
        // bounds the training error of the voted classifier.
        #[test]
        fn product_bound_on_training_error(raw in prop::collection::vec(2u64..2000, 3..25)) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let trace = run_adaboost(&s, 4, table()).unwrap();
            prop_assume!(trace.rounds.iter().all(|r| r.error > 0.0 && r.error < 0.5));
            let bound: f64 = trace
                .rounds
                .iter()
                .map(|r| 2.0 * (r.error * (1.0 - r.error)).sqrt())
                .product();
            let m = s.len() as f64;
            let training_error: f64 = s
                .instances()
                .iter()
                .zip(s.labels())
                .filter(|(&x, l)| strong_classify(&trace, x).unwrap() != l.pm())
                .count() as f64
                / m;
            prop_assert!(training_error <= bound + 1e-9);
        }
    }
}
