//! Weighted samples, the coverage functional, and the minimal-maximizer
//! selection rule.
//!
//! The selected divisor maximizes coverage (the weight of composite
//! instances it properly divides), with ties broken toward the smallest
//! divisor. Coverage only moves when a divisor properly divides some
//! composite instance, so the arg-max over all integers reduces to the
//! divisors of the composite instances (falling back to 2 when nothing is
//! covered), and the winner is always prime: any prime factor of a divisor
//! covers at least as much.
//!
//! Weights come in two flavors behind [`SampleWeight`]: exact rationals,
//! where coverage ties compare exactly, and floats, where ties compare
//! within 10⁻¹². The rational path is the reference semantics; floats are
//! what the sampling experiments run on.

use std::collections::BTreeMap;
use std::io;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::{prime_label, Hypothesis, Label};
use crate::primes::PrimeTable;

/// Tolerance for float-weight sums and coverage ties.
pub const FLOAT_WEIGHT_TOL: f64 = 1e-12;

/// Weight arithmetic a [`Sample`] is generic over.
pub trait SampleWeight:
    Copy + std::fmt::Debug + PartialOrd + std::ops::Add<Output = Self> + Zero
{
    fn uniform(m: usize) -> Self;
    /// Do two coverage values tie for the arg-max?
    fn ties(a: Self, b: Self) -> bool;
    fn sums_to_one(total: Self) -> bool;
    fn is_nonnegative(self) -> bool;
    fn to_f64(self) -> f64;
}

impl SampleWeight for f64 {
    fn uniform(m: usize) -> Self {
        1.0 / m as f64
    }

    fn ties(a: Self, b: Self) -> bool {
        (a - b).abs() <= FLOAT_WEIGHT_TOL
    }

    fn sums_to_one(total: Self) -> bool {
        (total - 1.0).abs() <= FLOAT_WEIGHT_TOL
    }

    fn is_nonnegative(self) -> bool {
        self >= 0.0
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl SampleWeight for Rational64 {
    fn uniform(m: usize) -> Self {
        Rational64::new(1, m as i64)
    }

    fn ties(a: Self, b: Self) -> bool {
        a == b
    }

    fn sums_to_one(total: Self) -> bool {
        total == Rational64::new(1, 1)
    }

    fn is_nonnegative(self) -> bool {
        !self.is_negative()
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Which divisors the selection rule ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisClass {
    /// Prime divisors of the composite instances only.
    PrimeDivisors,
    /// Every divisor of the composite instances.
    AllDivisors,
}

/// Labeled, weighted instances from `[2, limit]`.
#[derive(Debug, Clone)]
pub struct Sample<W: SampleWeight> {
    instances: Vec<u64>,
    labels: Vec<Label>,
    weights: Vec<W>,
}

impl<W: SampleWeight> Sample<W> {
    /// Labels are attached from the table; weights must be nonnegative and
    /// sum to one.
    pub fn new(instances: Vec<u64>, weights: Vec<W>, table: &PrimeTable) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::domain(
                "sample must hold at least one instance".to_string(),
            ));
        }
        if weights.len() != instances.len() {
            return Err(Error::domain(format!(
                "{} weights for {} instances",
                weights.len(),
                instances.len()
            )));
        }
        if !weights.iter().all(|w| w.is_nonnegative()) {
            return Err(Error::domain("weights must be nonnegative".to_string()));
        }
        let total = weights.iter().fold(W::zero(), |acc, &w| acc + w);
        if !W::sums_to_one(total) {
            return Err(Error::domain(format!(
                "weights must sum to 1, got {total:?}"
            )));
        }
        let labels = instances
            .iter()
            .map(|&x| prime_label(x, table))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sample {
            instances,
            labels,
            weights,
        })
    }

    /// Uniform weights 1/m.
    pub fn uniform(instances: Vec<u64>, table: &PrimeTable) -> Result<Self> {
        let m = instances.len();
        if m == 0 {
            return Err(Error::domain(
                "sample must hold at least one instance".to_string(),
            ));
        }
        Sample::new(instances, vec![W::uniform(m); m], table)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[u64] {
        &self.instances
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn weights(&self) -> &[W] {
        &self.weights
    }

    /// Total weight on composite-labeled instances.
    pub fn composite_weight(&self) -> W {
        self.labels
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| **l == Label::Composite)
            .fold(W::zero(), |acc, (_, &w)| acc + w)
    }

    /// Weight of composite instances that are proper multiples of `d`.
    pub fn coverage(&self, d: u64) -> Result<W> {
        if d < 2 {
            return Err(Error::domain(format!("divisor must be ≥ 2, got {d}")));
        }
        let mut total = W::zero();
        for ((&x, label), &w) in self.instances.iter().zip(&self.labels).zip(&self.weights) {
            if *label == Label::Composite && x > d && x % d == 0 {
                total = total + w;
            }
        }
        Ok(total)
    }

    /// Total weight on instances the hypothesis mislabels.
    pub fn weighted_risk(&self, h: &Hypothesis) -> Result<W> {
        let mut total = W::zero();
        for ((&x, label), &w) in self.instances.iter().zip(&self.labels).zip(&self.weights) {
            if h.evaluate(x)? != label.bit() {
                total = total + w;
            }
        }
        Ok(total)
    }

    /// The minimal divisor attaining maximal coverage, searched over every
    /// divisor of the composite instances. Always prime.
    pub fn erm_select(&self, table: &PrimeTable) -> Result<u64> {
        self.erm_select_in_class(HypothesisClass::AllDivisors, table)
    }

    /// [`Sample::erm_select`] over a chosen candidate class. Restricting to
    /// prime divisors provably returns the same divisor.
    pub fn erm_select_in_class(&self, class: HypothesisClass, table: &PrimeTable) -> Result<u64> {
        let pool = DivisorPool::build(&self.instances, &self.labels, class, table)?;
        let (d, _) = pool.select(&self.weights);
        debug_assert!(d <= table.limit() && table.is_prime(d), "selected {d}");
        Ok(d)
    }

    /// One row per instance: `instance,label,weight`.
    pub fn write_csv<Wr: io::Write>(&self, mut out: Wr) -> io::Result<()> {
        writeln!(out, "instance,label,weight")?;
        for ((&x, label), &w) in self.instances.iter().zip(&self.labels).zip(&self.weights) {
            writeln!(out, "{x},{},{}", label.bit(), w.to_f64())?;
        }
        Ok(())
    }
}

/// Candidate divisors per composite instance, precomputed once so repeated
/// selections (boosting rounds) skip refactorization.
#[derive(Debug)]
pub(crate) struct DivisorPool {
    /// Empty for prime-labeled instances.
    per_instance: Vec<Vec<u64>>,
}

impl DivisorPool {
    pub(crate) fn build(
        instances: &[u64],
        labels: &[Label],
        class: HypothesisClass,
        table: &PrimeTable,
    ) -> Result<Self> {
        let mut per_instance = Vec::with_capacity(instances.len());
        for (&x, label) in instances.iter().zip(labels) {
            if *label == Label::Prime {
                per_instance.push(Vec::new());
                continue;
            }
            let divisors = match class {
                HypothesisClass::AllDivisors => table
                    .divisors(x)?
                    .into_iter()
                    .filter(|&d| d >= 2 && x / d >= 2)
                    .collect(),
                HypothesisClass::PrimeDivisors => {
                    // Every prime factor of a composite properly divides it.
                    table.factorize(x)?.into_iter().map(|(p, _)| p).collect()
                }
            };
            per_instance.push(divisors);
        }
        Ok(DivisorPool { per_instance })
    }

    /// Minimal divisor attaining maximal coverage under `weights`, and that
    /// maximal coverage. Falls back to 2 when nothing is covered.
    pub(crate) fn select<W: SampleWeight>(&self, weights: &[W]) -> (u64, W) {
        debug_assert_eq!(weights.len(), self.per_instance.len());
        let mut coverage: BTreeMap<u64, W> = BTreeMap::new();
        for (divisors, &w) in self.per_instance.iter().zip(weights) {
            for &d in divisors {
                let slot = coverage.entry(d).or_insert_with(W::zero);
                *slot = *slot + w;
            }
        }
        let max = coverage
            .values()
            .fold(W::zero(), |acc, &v| if v > acc { v } else { acc });
        if W::ties(max, W::zero()) {
            // Nothing is covered; 2 is the smallest divisor attaining the
            // maximum over the whole domain.
            return (2, W::zero());
        }
        // Smallest divisor tying with the maximum; BTreeMap iterates ascending.
        for (&d, &v) in &coverage {
            if W::ties(v, max) {
                return (d, v);
            }
        }
        unreachable!("maximum is attained by some entry");
    }
}

/// A fully composite sample no divisor rule covers twice: instance `i` is
/// `p_{2i−1}·p_{2i}`, so the instances are pairwise coprime and each divisor
/// covers at most one of them. Uniform exact weights.
pub fn adversarial_sample(m: usize, table: &PrimeTable) -> Result<Sample<Rational64>> {
    if m == 0 {
        return Err(Error::domain(
            "sample must hold at least one instance".to_string(),
        ));
    }
    if table.primes().len() < 2 * m {
        return Err(Error::capacity(format!(
            "need {} primes for {m} instances, table holds {}",
            2 * m,
            table.primes().len()
        )));
    }
    let mut instances = Vec::with_capacity(m);
    for i in 0..m {
        let x = table.primes()[2 * i] * table.primes()[2 * i + 1];
        if x > table.limit() {
            return Err(Error::capacity(format!(
                "instance {x} exceeds the sieve limit {}",
                table.limit()
            )));
        }
        instances.push(x);
    }
    Sample::uniform(instances, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn table() -> &'static PrimeTable {
        static TABLE: OnceLock<PrimeTable> = OnceLock::new();
        TABLE.get_or_init(|| PrimeTable::build(10_000).unwrap())
    }

    fn rat(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn rational_sample(instances: &[u64], weights: &[(i64, i64)]) -> Sample<Rational64> {
        let w = weights.iter().map(|&(n, d)| rat(n, d)).collect();
        Sample::new(instances.to_vec(), w, table()).unwrap()
    }

    #[test]
    fn coverage_examples() {
        let s: Sample<Rational64> = Sample::uniform(vec![4, 6, 9], table()).unwrap();
        assert_eq!(s.coverage(2).unwrap(), rat(2, 3));
        assert_eq!(s.coverage(3).unwrap(), rat(2, 3));

        let primes: Sample<Rational64> = Sample::uniform(vec![3, 5, 7], table()).unwrap();
        for d in 2..=10 {
            assert_eq!(primes.coverage(d).unwrap(), rat(0, 1));
        }

        let weighted = rational_sample(&[4, 6, 9], &[(1, 10), (2, 10), (7, 10)]);
        assert_eq!(weighted.coverage(3).unwrap(), rat(9, 10));
    }

    #[test]
    fn weighted_risk_examples() {
        let s: Sample<Rational64> = Sample::uniform(vec![4, 6, 9], table()).unwrap();
        assert_eq!(s.weighted_risk(&Hypothesis::Divisor(2)).unwrap(), rat(1, 3));

        let primes: Sample<Rational64> = Sample::uniform(vec![3, 5, 7], table()).unwrap();
        for d in 2..=12 {
            assert_eq!(
                primes.weighted_risk(&Hypothesis::Divisor(d)).unwrap(),
                rat(0, 1)
            );
        }

        let four: Sample<Rational64> = Sample::uniform(vec![4, 6, 9, 7], table()).unwrap();
        assert_eq!(
            four.weighted_risk(&Hypothesis::Divisor(2)).unwrap(),
            rat(1, 4)
        );
    }

    #[test]
    fn erm_select_examples() {
        let s: Sample<Rational64> = Sample::uniform(vec![4, 6, 9], table()).unwrap();
        // Coverage ties at 2/3 between 2 and 3; the smaller wins.
        assert_eq!(s.erm_select(table()).unwrap(), 2);

        let weighted = rational_sample(&[4, 6, 9], &[(1, 10), (2, 10), (7, 10)]);
        assert_eq!(weighted.erm_select(table()).unwrap(), 3);

        let primes: Sample<Rational64> = Sample::uniform(vec![3, 5, 7], table()).unwrap();
        assert_eq!(primes.erm_select(table()).unwrap(), 2);
    }

    #[test]
    fn erm_select_classes_agree() {
        let s: Sample<Rational64> =
            Sample::uniform(vec![12, 30, 36, 49, 11, 100], table()).unwrap();
        assert_eq!(
            s.erm_select_in_class(HypothesisClass::AllDivisors, table())
                .unwrap(),
            s.erm_select_in_class(HypothesisClass::PrimeDivisors, table())
                .unwrap()
        );
    }

    #[test]
    fn risk_plus_coverage_is_composite_weight() {
        let weighted = rational_sample(&[4, 6, 9, 7], &[(1, 10), (2, 10), (3, 10), (4, 10)]);
        for d in 2..=20 {
            let risk = weighted.weighted_risk(&Hypothesis::Divisor(d)).unwrap();
            let cov = weighted.coverage(d).unwrap();
            assert_eq!(risk + cov, weighted.composite_weight(), "d={d}");
        }
    }

    #[test]
    fn sample_validation() {
        let t = table();
        assert!(matches!(
            Sample::<f64>::new(vec![], vec![], t),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Sample::<f64>::new(vec![4, 6], vec![0.5], t),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Sample::<f64>::new(vec![4, 6], vec![0.9, 0.2], t),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Sample::<f64>::new(vec![4, 6], vec![1.5, -0.5], t),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Sample::<f64>::uniform(vec![1, 6], t),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Sample::<f64>::uniform(vec![t.limit() + 1], t),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn adversarial_instances() {
        assert_eq!(adversarial_sample(1, table()).unwrap().instances(), &[6]);
        assert_eq!(
            adversarial_sample(2, table()).unwrap().instances(),
            &[6, 35]
        );
        assert_eq!(
            adversarial_sample(3, table()).unwrap().instances(),
            &[6, 35, 143]
        );
        let s = adversarial_sample(4, table()).unwrap();
        assert!(s.labels().iter().all(|l| *l == Label::Composite));
    }

    #[test]
    fn adversarial_capacity() {
        let tiny = PrimeTable::build(10).unwrap();
        // Only 4 primes sieved: three instances need six.
        assert!(matches!(
            adversarial_sample(3, &tiny),
            Err(Error::Capacity(_))
        ));
        // 5·7 = 35 exceeds a sieve limit of 10 even though 4 primes exist.
        assert!(matches!(
            adversarial_sample(2, &tiny),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn adversarial_risk_floor() {
        for m in 1..=6usize {
            let s = adversarial_sample(m, table()).unwrap();
            let max_x = *s.instances().iter().max().unwrap();
            let max_w = rat(1, m as i64);
            let floor = rat(1, 1) - max_w;
            for d in 2..=max_x {
                let risk = s.weighted_risk(&Hypothesis::Divisor(d)).unwrap();
                assert!(risk >= floor, "m={m} d={d} risk={risk}");
            }
        }
    }

    #[test]
    fn sample_csv_layout() {
        let s: Sample<Rational64> = Sample::uniform(vec![4, 7], table()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "instance,label,weight\n4,0,0.5\n7,1,0.5\n");
    }

    /// Reference selection: scan every divisor up to the largest instance.
    fn brute_force_select(s: &Sample<f64>) -> u64 {
        let max_x = *s.instances().iter().max().unwrap();
        let mut best = 0.0f64;
        for d in 2..=max_x {
            let cov = s.coverage(d).unwrap();
            if cov > best {
                best = cov;
            }
        }
        if best <= FLOAT_WEIGHT_TOL {
            return 2;
        }
        (2..=max_x)
            .find(|&d| (s.coverage(d).unwrap() - best).abs() <= FLOAT_WEIGHT_TOL)
            .unwrap()
    }

    proptest! {
        #[test]
        fn selection_matches_brute_force(raw in prop::collection::vec(2u64..1000, 1..12)) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let selected = s.erm_select(table()).unwrap();
            prop_assert_eq!(selected, brute_force_select(&s));
        }

        #[test]
        fn selected_divisor_is_prime(raw in prop::collection::vec(2u64..5000, 1..20)) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let d = s.erm_select(table()).unwrap();
            prop_assert!(table().is_prime(d));
        }

        #[test]
        fn risk_coverage_identity_float(raw in prop::collection::vec(2u64..2000, 1..15), d in 2u64..60) {
            let s: Sample<f64> = Sample::uniform(raw, table()).unwrap();
            let lhs = s.weighted_risk(&Hypothesis::Divisor(d)).unwrap() + s.coverage(d).unwrap();
            prop_assert!((lhs - s.composite_weight()).abs() < 1e-9);
        }
    }
}
