//! Shattering checks with re-verified certificates, the product construction
//! of shatterable sets, the closed-form VC-dimension of the prime rules
//! restricted to a finite range, and a certified search for the VC-dimension
//! of the progression classes.
//!
//! A dichotomy over a candidate set `{c_1, …, c_ℓ}` is written as the bit
//! string `b_1 … b_ℓ` (first candidate leftmost) and indexed by the integer
//! it spells in binary. A certificate maps every one of the 2^ℓ dichotomies
//! to a hypothesis realizing it and can always be re-checked by direct
//! evaluation.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hypotheses::Hypothesis;
use crate::primes::PrimeTable;

/// Hard cap on the constructive set size: members are products of `2^{ℓ−1}`
/// primes, so ℓ = 8 already yields ≈ 300-digit integers.
pub const MAX_CONSTRUCT_SET_SIZE: u32 = 8;

/// Default cap on candidate-set size for shattering checks (2^20 dichotomies).
pub const DEFAULT_SHATTER_CAP: usize = 20;

/// The `2^ell` subsets of `{1, …, ell}` in binary order: `i ∈ A_j` iff bit
/// `i−1` of `j−1` is set. `A_1` is the empty set.
#[derive(Debug, Clone, Copy)]
pub struct SubsetEnumeration {
    ell: u32,
}

impl SubsetEnumeration {
    pub fn new(ell: u32) -> Result<Self> {
        if ell > 32 {
            return Err(Error::capacity(format!(
                "subset enumeration over {ell} elements is too large"
            )));
        }
        Ok(SubsetEnumeration { ell })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Number of subsets, `2^ell`.
    pub fn count(&self) -> u64 {
        1u64 << self.ell
    }

    /// Is element `i` (1-based) in subset `A_j` (1-based)?
    pub fn contains(&self, j: u64, i: u32) -> bool {
        assert!(j >= 1 && j <= self.count(), "subset index {j} out of range");
        assert!(i >= 1 && i <= self.ell, "element {i} out of range");
        (j - 1) >> (i - 1) & 1 == 1
    }

    /// Members of `A_j`, ascending.
    pub fn members(&self, j: u64) -> Vec<u32> {
        (1..=self.ell).filter(|&i| self.contains(j, i)).collect()
    }
}

/// A candidate set together with one verified witness per dichotomy.
#[derive(Debug, Clone)]
pub struct ShatterCertificate {
    candidates: Vec<BigUint>,
    /// `witnesses[code]` realizes the dichotomy whose bits spell `code`.
    witnesses: Vec<Hypothesis>,
}

impl ShatterCertificate {
    pub fn candidates(&self) -> &[BigUint] {
        &self.candidates
    }

    pub fn set_size(&self) -> usize {
        self.candidates.len()
    }

    pub fn dichotomy_count(&self) -> usize {
        self.witnesses.len()
    }

    pub fn witness_by_code(&self, code: usize) -> &Hypothesis {
        &self.witnesses[code]
    }

    /// Witness for an explicit label vector (one 0/1 per candidate).
    pub fn witness(&self, labels: &[u8]) -> Option<&Hypothesis> {
        if labels.len() != self.set_size() {
            return None;
        }
        let code = labels.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        self.witnesses.get(code)
    }

    /// The label vector a code spells.
    pub fn labels_of_code(&self, code: usize) -> Vec<u8> {
        let ell = self.set_size();
        (0..ell)
            .map(|i| (code >> (ell - 1 - i) & 1) as u8)
            .collect()
    }

    fn bitstring(&self, code: usize) -> String {
        self.labels_of_code(code)
            .iter()
            .map(|b| if *b == 0 { '0' } else { '1' })
            .collect()
    }

    /// Re-check every witness by direct evaluation.
    pub fn verify(&self) -> Result<()> {
        let ell = self.set_size();
        if self.witnesses.len() != 1usize << ell {
            return Err(Error::domain(format!(
                "certificate has {} witnesses for a set of {ell}",
                self.witnesses.len()
            )));
        }
        for (code, witness) in self.witnesses.iter().enumerate() {
            for (i, c) in self.candidates.iter().enumerate() {
                let expected = (code >> (ell - 1 - i) & 1) as u8;
                if witness.evaluate_big(c)? != expected {
                    return Err(Error::domain(format!(
                        "witness {witness} does not realize dichotomy {} at candidate {c}",
                        self.bitstring(code)
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Serialize for ShatterCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ShatterCertificate", 2)?;
        let candidates: Vec<String> = self.candidates.iter().map(|c| c.to_string()).collect();
        let witnesses: BTreeMap<String, String> = self
            .witnesses
            .iter()
            .enumerate()
            .map(|(code, w)| (self.bitstring(code), w.to_string()))
            .collect();
        st.serialize_field("candidates", &candidates)?;
        st.serialize_field("witnesses", &witnesses)?;
        st.end()
    }
}

/// Outcome of a shattering check.
#[derive(Debug)]
pub enum ShatterOutcome {
    Shattered(ShatterCertificate),
    /// Not shattered; carries one unrealized label vector.
    Missing { dichotomy: Vec<u8> },
}

impl ShatterOutcome {
    pub fn is_shattered(&self) -> bool {
        matches!(self, ShatterOutcome::Shattered(_))
    }

    pub fn certificate(&self) -> Option<&ShatterCertificate> {
        match self {
            ShatterOutcome::Shattered(cert) => Some(cert),
            ShatterOutcome::Missing { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<ShatterCertificate> {
        match self {
            ShatterOutcome::Shattered(cert) => Some(cert),
            ShatterOutcome::Missing { .. } => None,
        }
    }
}

/// Does `class` realize all `2^|candidates|` dichotomies of `candidates`?
///
/// Witnesses are chosen first-come in class order, so a deterministic class
/// enumeration yields a deterministic certificate.
pub fn check_shatter(candidates: &[BigUint], class: &[Hypothesis]) -> Result<ShatterOutcome> {
    check_shatter_with_cap(candidates, class, DEFAULT_SHATTER_CAP)
}

/// [`check_shatter`] with an explicit cap on the candidate-set size.
pub fn check_shatter_with_cap(
    candidates: &[BigUint],
    class: &[Hypothesis],
    cap: usize,
) -> Result<ShatterOutcome> {
    let ell = candidates.len();
    if ell == 0 {
        return Err(Error::domain("cannot shatter an empty set".to_string()));
    }
    if ell > cap || cap > 25 {
        return Err(Error::capacity(format!(
            "candidate set of {ell} exceeds the dichotomy cap {}",
            cap.min(25)
        )));
    }
    let two = BigUint::from(2u32);
    let mut seen = BTreeSet::new();
    for c in candidates {
        if *c < two {
            return Err(Error::domain(format!("candidate {c} is below 2")));
        }
        if !seen.insert(c.clone()) {
            return Err(Error::domain(format!("candidate {c} repeats")));
        }
    }

    let size = 1usize << ell;
    let mut witness_of: Vec<Option<&Hypothesis>> = vec![None; size];
    let mut found = 0usize;
    for h in class {
        let mut code = 0usize;
        for c in candidates {
            code = code << 1 | h.evaluate_big(c)? as usize;
        }
        if witness_of[code].is_none() {
            witness_of[code] = Some(h);
            found += 1;
            if found == size {
                break;
            }
        }
    }

    if found == size {
        let cert = ShatterCertificate {
            candidates: candidates.to_vec(),
            witnesses: witness_of.into_iter().map(|w| *w.unwrap()).collect(),
        };
        cert.verify()?;
        Ok(ShatterOutcome::Shattered(cert))
    } else {
        let code = witness_of.iter().position(|w| w.is_none()).unwrap();
        let dichotomy = (0..ell)
            .map(|i| (code >> (ell - 1 - i) & 1) as u8)
            .collect();
        Ok(ShatterOutcome::Missing { dichotomy })
    }
}

/// Build a set of `ell` integers shattered by the rules of the first `2^ell`
/// primes: member `i` is the product of `p_k` over exactly those subsets
/// `A_k` (binary order) that contain `i`, giving `2^{ℓ−1}` primes per member.
///
/// For `ell = 1` the product degenerates to a bare prime, and no rule can
/// send a prime to 0; the smallest singleton the first two prime rules
/// shatter, `p_1² = 4`, is returned instead.
pub fn construct_shatter_set(ell: u32, table: &PrimeTable) -> Result<Vec<BigUint>> {
    if ell < 1 {
        return Err(Error::domain("set size must be at least 1".to_string()));
    }
    if ell > MAX_CONSTRUCT_SET_SIZE {
        return Err(Error::capacity(format!(
            "set size {ell} exceeds the construction cap {MAX_CONSTRUCT_SET_SIZE}"
        )));
    }
    let needed = 1usize << ell;
    if table.primes().len() < needed {
        return Err(Error::capacity(format!(
            "need {needed} primes but the table holds {}",
            table.primes().len()
        )));
    }
    if ell == 1 {
        let p = table.primes()[0];
        return Ok(vec![BigUint::from(p * p)]);
    }
    let subsets = SubsetEnumeration::new(ell)?;
    let mut out = Vec::with_capacity(ell as usize);
    for i in 1..=ell {
        let mut c = BigUint::one();
        for j in 1..=subsets.count() {
            if subsets.contains(j, i) {
                c *= table.primes()[(j - 1) as usize];
            }
        }
        out.push(c);
    }
    Ok(out)
}

fn floor_log2(m: u64) -> u32 {
    debug_assert!(m >= 1);
    63 - m.leading_zeros()
}

fn ceil_log2(m: u64) -> u32 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros()
    }
}

/// VC-dimension of the prime rules with divisor ≤ n: ⌊log₂ π(n)⌋, computed
/// by bit length so powers of two never round wrong.
pub fn vc_dim_restricted_formula(n: u64, table: &PrimeTable) -> Result<u32> {
    if n < 2 {
        return Err(Error::domain(format!("domain bound must be ≥ 2, got {n}")));
    }
    let pi = table.prime_count(n)?;
    debug_assert!(pi >= 1);
    Ok(floor_log2(pi))
}

/// Per-clause result of the prime-structure validation of a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct PrimeStructureReport {
    /// Each candidate is divisible by the product of the distinct witness
    /// primes that send it to 0 (2^{ℓ−1} of them).
    pub divisor_product_ok: bool,
    /// Each candidate strictly exceeds every witness prime that zeroes it.
    pub exceeds_zeroing_primes: bool,
    /// Distinct primes across the product of all candidates.
    pub distinct_prime_count: u64,
    /// 2^ℓ − 1.
    pub required_distinct_primes: u64,
    pub distinct_primes_ok: bool,
}

impl PrimeStructureReport {
    pub fn all_pass(&self) -> bool {
        self.divisor_product_ok && self.exceeds_zeroing_primes && self.distinct_primes_ok
    }
}

/// Check the divisibility structure a prime-rule shattering forces on its
/// candidate set. Witnesses must all be prime rules.
pub fn validate_certificate_prime_structure(
    cert: &ShatterCertificate,
    table: &PrimeTable,
) -> Result<PrimeStructureReport> {
    cert.verify()?;
    let ell = cert.set_size();
    let mut witness_primes = Vec::with_capacity(cert.dichotomy_count());
    for code in 0..cert.dichotomy_count() {
        match cert.witness_by_code(code) {
            Hypothesis::Prime(p) => witness_primes.push(*p),
            other => {
                return Err(Error::domain(format!(
                    "prime-structure validation needs prime-rule witnesses, found {other}"
                )))
            }
        }
    }

    let mut divisor_product_ok = true;
    let mut exceeds_zeroing_primes = true;
    for (i, c) in cert.candidates().iter().enumerate() {
        let zeroing: BTreeSet<u64> = (0..cert.dichotomy_count())
            .filter(|code| code >> (ell - 1 - i) & 1 == 0)
            .map(|code| witness_primes[code])
            .collect();
        // A verified certificate cannot reuse a prime across two dichotomies,
        // so the set has exactly 2^{ℓ−1} members.
        debug_assert_eq!(zeroing.len(), 1usize << (ell - 1));
        let product = zeroing
            .iter()
            .fold(BigUint::one(), |acc, &p| acc * BigUint::from(p));
        if !(c % &product).is_zero() {
            divisor_product_ok = false;
        }
        if !zeroing.iter().all(|&p| *c > BigUint::from(p)) {
            exceeds_zeroing_primes = false;
        }
    }

    let mut distinct: BTreeSet<u64> = BTreeSet::new();
    for c in cert.candidates() {
        for (p, _) in table.factorize_big(c)? {
            distinct.insert(p);
        }
    }
    let required = (1u64 << ell) - 1;
    Ok(PrimeStructureReport {
        divisor_product_ok,
        exceeds_zeroing_primes,
        distinct_prime_count: distinct.len() as u64,
        required_distinct_primes: required,
        distinct_primes_ok: distinct.len() as u64 >= required,
    })
}

/// Closed-form VC-dimension bounds for the progression classes with
/// progression length `k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProgressionBounds {
    pub lower: u32,
    pub upper: u32,
    /// ⌊(log₂ k)/2⌋, the range whose prime count drives the lower bound.
    pub eta: u64,
    /// True when π(eta) = 0 left the lower bound undefined and it was
    /// clamped to 0.
    pub lower_clamped: bool,
}

/// Formula bounds `⌊log₂ π(η_k)⌋ ≤ dim ≤ ⌈log₂(k−1)⌉ + 1` with
/// `η_k = ⌊(log₂ k)/2⌋`; the lower bound clamps to 0 whenever π(η_k) = 0.
pub fn progression_vc_bounds(k: u64) -> Result<ProgressionBounds> {
    if k < 2 {
        return Err(Error::domain(format!(
            "progression length must be ≥ 2, got {k}"
        )));
    }
    let upper = ceil_log2(k - 1) + 1;
    // ⌊(log₂ k)/2⌋ = ⌊⌊log₂ k⌋/2⌋ for integer k.
    let eta = u64::from(floor_log2(k)) / 2;
    let pi_eta = small_prime_count(eta);
    let (lower, lower_clamped) = if pi_eta == 0 {
        (0, true)
    } else {
        (floor_log2(pi_eta), false)
    };
    debug_assert!(lower <= upper);
    Ok(ProgressionBounds {
        lower,
        upper,
        eta,
        lower_clamped,
    })
}

fn small_prime_count(x: u64) -> u64 {
    (2..=x).filter(|&v| is_prime_u64(v)).count() as u64
}

fn is_prime_u64(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= x {
        if x % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Options for the certified progression-class search.
#[derive(Debug, Clone, Copy)]
pub struct VcSearchOptions {
    /// Maximum number of candidate sets examined before giving up.
    pub set_budget: u64,
}

impl Default for VcSearchOptions {
    fn default() -> Self {
        VcSearchOptions {
            set_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VcSearchStatus {
    /// Lower and upper bound met; the dimension is exact.
    Certified,
    /// Search space below the domain bound exhausted without closing the gap
    /// to the structural upper bound.
    Unresolved,
    /// The set budget ran out first.
    BudgetExhausted,
}

/// Result of [`certified_vc_progression`].
#[derive(Debug, Clone)]
pub struct ProgressionVcSearch {
    pub k: u64,
    pub prime_only: bool,
    pub domain_bound: u64,
    /// Largest set size with a found (attached) certificate.
    pub lower: u32,
    pub upper: u32,
    pub status: VcSearchStatus,
    pub certificate: Option<ShatterCertificate>,
}

impl ProgressionVcSearch {
    /// The exact dimension when the search certified one.
    pub fn dimension(&self) -> Option<u32> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

/// Certified VC-dimension search for the progression class with length `k`
/// (divisors restricted to primes when `prime_only` is set).
///
/// Candidate sets are enumerated through their divisor structure: a member of
/// a shattered ℓ-set must admit at least `2^{ℓ−1}` distinct divisors `d` with
/// `2 ≤ x/d ≤ k`, which also caps the dimension at the largest ℓ with
/// `2^{ℓ−1} ≤ k−1`. Found sets come with re-verified certificates.
pub fn certified_vc_progression(
    k: u64,
    domain_bound: u64,
    table: &PrimeTable,
    prime_only: bool,
) -> Result<ProgressionVcSearch> {
    certified_vc_progression_with(k, domain_bound, table, prime_only, VcSearchOptions::default())
}

/// [`certified_vc_progression`] with an explicit search budget.
pub fn certified_vc_progression_with(
    k: u64,
    domain_bound: u64,
    table: &PrimeTable,
    prime_only: bool,
    opts: VcSearchOptions,
) -> Result<ProgressionVcSearch> {
    if k < 2 {
        return Err(Error::domain(format!(
            "progression length must be ≥ 2, got {k}"
        )));
    }
    if domain_bound < 2 * k {
        return Err(Error::domain(format!(
            "domain bound {domain_bound} is below 2k = {}",
            2 * k
        )));
    }

    // Largest ℓ with 2^{ℓ−1} ≤ k−1: no larger set survives the
    // divisor-count requirement anywhere, not just below the bound.
    let structural_upper = floor_log2(k - 1) + 1;

    let mut budget = opts.set_budget;
    let mut lower = 0u32;
    let mut certificate = None;
    let mut budget_hit = false;

    for ell in 1..=structural_upper {
        if ell > 25 {
            budget_hit = true;
            break;
        }
        let min_divisors = 1usize << (ell - 1);
        let eligible = eligible_candidates(k, domain_bound, prime_only, min_divisors, table);
        if eligible.len() < ell as usize {
            break;
        }
        match search_level(&eligible, ell as usize, k, domain_bound, prime_only, &mut budget)? {
            LevelOutcome::Found(cert) => {
                lower = ell;
                certificate = Some(cert);
            }
            LevelOutcome::NotFound => break,
            LevelOutcome::BudgetExhausted => {
                budget_hit = true;
                break;
            }
        }
    }

    let mut upper = structural_upper;
    let status = if lower == upper {
        VcSearchStatus::Certified
    } else if budget_hit {
        VcSearchStatus::BudgetExhausted
    } else if prime_only && k.checked_mul(k).is_some_and(|ksq| domain_bound >= ksq) {
        // For prime divisors the exhausted search is globally conclusive at
        // sizes ≥ 2: an element with two distinct prime divisors p ≠ q and
        // cofactors a, b ≤ k satisfies a·p = b·q, so p | b and q | a, forcing
        // p, q ≤ k and the element itself ≤ k². Nothing above k² can belong
        // to a shattered set of size ≥ 2, and [2, k²] was fully searched.
        upper = lower;
        VcSearchStatus::Certified
    } else {
        VcSearchStatus::Unresolved
    };

    Ok(ProgressionVcSearch {
        k,
        prime_only,
        domain_bound,
        lower,
        upper,
        status,
        certificate,
    })
}

/// Divisors `d` of `x` with `2 ≤ x/d ≤ k` (prime `d` only when requested),
/// ascending.
fn progression_divisors(x: u64, k: u64, prime_only: bool, table: &PrimeTable) -> Vec<u64> {
    let mut out = Vec::new();
    let a_max = k.min(x / 2);
    for a in 2..=a_max {
        if x % a == 0 {
            let d = x / a;
            let prime_ok = !prime_only
                || (d <= table.limit() && table.is_prime(d))
                || (d > table.limit() && is_prime_u64(d));
            if prime_ok {
                out.push(d);
            }
        }
    }
    out.sort_unstable();
    out
}

fn eligible_candidates(
    k: u64,
    domain_bound: u64,
    prime_only: bool,
    min_divisors: usize,
    table: &PrimeTable,
) -> Vec<(u64, Vec<u64>)> {
    let mut out = Vec::new();
    for x in 4..=domain_bound {
        let divs = progression_divisors(x, k, prime_only, table);
        if divs.len() >= min_divisors {
            out.push((x, divs));
        }
    }
    out
}

enum LevelOutcome {
    Found(ShatterCertificate),
    NotFound,
    BudgetExhausted,
}

fn search_level(
    eligible: &[(u64, Vec<u64>)],
    ell: usize,
    k: u64,
    domain_bound: u64,
    prime_only: bool,
    budget: &mut u64,
) -> Result<LevelOutcome> {
    let size = 1usize << ell;
    let all_ones = size - 1;
    let far = far_divisor(domain_bound, prime_only);

    // Lexicographic combinations over the eligible candidates.
    let mut idx: Vec<usize> = (0..ell).collect();
    loop {
        if *budget == 0 {
            return Ok(LevelOutcome::BudgetExhausted);
        }
        *budget -= 1;

        let members: Vec<u64> = idx.iter().map(|&i| eligible[i].0).collect();
        let mut divisors: Vec<u64> = idx
            .iter()
            .flat_map(|&i| eligible[i].1.iter().copied())
            .collect();
        divisors.sort_unstable();
        divisors.dedup();

        let mut witness_d: Vec<Option<u64>> = vec![None; size];
        witness_d[all_ones] = Some(far);
        let mut found = 1usize;
        for &d in &divisors {
            let mut code = 0usize;
            for &c in &members {
                let zero = c % d == 0 && (2..=k).contains(&(c / d));
                code = code << 1 | usize::from(!zero);
            }
            if witness_d[code].is_none() {
                witness_d[code] = Some(d);
                found += 1;
                if found == size {
                    break;
                }
            }
        }

        if found == size {
            let cert = ShatterCertificate {
                candidates: members.iter().map(|&c| BigUint::from(c)).collect(),
                witnesses: witness_d
                    .into_iter()
                    .map(|d| Hypothesis::Progression { d: d.unwrap(), k })
                    .collect(),
            };
            cert.verify()?;
            return Ok(LevelOutcome::Found(cert));
        }

        // Advance the combination.
        let mut pos = ell;
        loop {
            if pos == 0 {
                return Ok(LevelOutcome::NotFound);
            }
            pos -= 1;
            if idx[pos] + (ell - pos) < eligible.len() {
                idx[pos] += 1;
                for j in pos + 1..ell {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// A divisor whose whole zero set lies beyond the domain bound, so it labels
/// every candidate 1.
fn far_divisor(domain_bound: u64, prime_only: bool) -> u64 {
    if !prime_only {
        return domain_bound + 1;
    }
    let mut d = domain_bound + 1;
    while !is_prime_u64(d) {
        d += 1;
    }
    d
}
