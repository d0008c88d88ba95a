//! The three divisor-rule families, the prime labeling, and exact
//! generalization errors under the uniform distribution on `{2, …, n}`.
//!
//! All three families output 1 on every prime: a rule can only send `x` to 0
//! when `x` is a proper multiple of its divisor, and proper multiples are
//! composite. That observation is what makes the generalization error
//! computable in closed form: the disagreement set is exactly the composites
//! a rule fails to cross out.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::primes::PrimeTable;

/// A single prime/composite rule.
///
/// String form (used in CSV traces and JSON certificates): `p:<int>` for
/// prime rules, `d:<int>` for divisor rules, `dk:<int>:<int>` for
/// progression rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Outputs 0 exactly on proper multiples of the prime `p`.
    Prime(u64),
    /// Outputs 0 exactly on proper multiples of `d` (any integer ≥ 2).
    Divisor(u64),
    /// Outputs 0 exactly on `{2d, 3d, …, kd}`.
    Progression { d: u64, k: u64 },
}

impl Hypothesis {
    /// The divisor the rule tests against.
    pub fn divisor(&self) -> u64 {
        match *self {
            Hypothesis::Prime(d) | Hypothesis::Divisor(d) | Hypothesis::Progression { d, .. } => d,
        }
    }

    fn check_well_formed(&self) -> Result<()> {
        match *self {
            Hypothesis::Prime(d) | Hypothesis::Divisor(d) if d < 2 => Err(Error::domain(
                format!("divisor must be at least 2, got {d}"),
            )),
            Hypothesis::Progression { d, .. } if d < 2 => Err(Error::domain(format!(
                "progression divisor must be at least 2, got {d}"
            ))),
            Hypothesis::Progression { k, .. } if k < 2 => Err(Error::domain(format!(
                "progression length must be at least 2, got {k}"
            ))),
            _ => Ok(()),
        }
    }

    /// Full validation, including primality of a `Prime` rule's divisor.
    pub fn validate(&self, table: &PrimeTable) -> Result<()> {
        self.check_well_formed()?;
        if let Hypothesis::Prime(p) = *self {
            if p > table.limit() {
                return Err(Error::out_of_range(format!(
                    "cannot check primality of {p} with sieve limit {}",
                    table.limit()
                )));
            }
            if !table.is_prime(p) {
                return Err(Error::domain(format!("{p} is not prime")));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn zero_on(&self, x: u64) -> bool {
        match *self {
            Hypothesis::Prime(d) | Hypothesis::Divisor(d) => x > d && x % d == 0,
            Hypothesis::Progression { d, k } => {
                if x % d != 0 {
                    return false;
                }
                let q = x / d;
                (2..=k).contains(&q)
            }
        }
    }

    /// Evaluate the rule on a machine-word instance. Returns 0 or 1.
    pub fn evaluate(&self, x: u64) -> Result<u8> {
        self.check_well_formed()?;
        if x < 2 {
            return Err(Error::domain(format!("instances start at 2, got {x}")));
        }
        Ok(if self.zero_on(x) { 0 } else { 1 })
    }

    /// Evaluate in ±1 form (0 ↦ −1, 1 ↦ +1).
    pub fn evaluate_pm(&self, x: u64) -> Result<i32> {
        Ok(if self.evaluate(x)? == 0 { -1 } else { 1 })
    }

    /// Evaluate on an arbitrary-precision instance. Shattering sets outgrow
    /// machine words quickly, so this path exists alongside the word-sized
    /// one; sampling and error computations never need it.
    pub fn evaluate_big(&self, x: &BigUint) -> Result<u8> {
        self.check_well_formed()?;
        if *x < BigUint::from(2u32) {
            return Err(Error::domain(format!("instances start at 2, got {x}")));
        }
        let zero = match *self {
            Hypothesis::Prime(d) | Hypothesis::Divisor(d) => {
                *x > BigUint::from(d) && (x % d).is_zero()
            }
            Hypothesis::Progression { d, k } => {
                if (x % d).is_zero() {
                    let q = x / d;
                    q >= BigUint::from(2u32) && q <= BigUint::from(k)
                } else {
                    false
                }
            }
        };
        Ok(if zero { 0 } else { 1 })
    }

    /// How many instances in `[2, n]` the rule sends to 0.
    pub(crate) fn zero_count_up_to(&self, n: u64) -> u64 {
        match *self {
            Hypothesis::Prime(d) | Hypothesis::Divisor(d) => (n / d).saturating_sub(1),
            Hypothesis::Progression { d, k } => (n / d).min(k).saturating_sub(1),
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Hypothesis::Prime(p) => write!(f, "p:{p}"),
            Hypothesis::Divisor(d) => write!(f, "d:{d}"),
            Hypothesis::Progression { d, k } => write!(f, "dk:{d}:{k}"),
        }
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("cannot parse hypothesis {s:?}"));
        let mut parts = s.split(':');
        let tag = parts.next().ok_or_else(bad)?;
        let h = match tag {
            "p" | "d" => {
                let v: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if parts.next().is_some() {
                    return Err(bad());
                }
                if tag == "p" {
                    Hypothesis::Prime(v)
                } else {
                    Hypothesis::Divisor(v)
                }
            }
            "dk" => {
                let d: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let k: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if parts.next().is_some() {
                    return Err(bad());
                }
                Hypothesis::Progression { d, k }
            }
            _ => return Err(bad()),
        };
        h.check_well_formed()?;
        Ok(h)
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Binary label with its ±1 remapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Composite,
    Prime,
}

impl Label {
    /// 1 for prime, 0 for composite.
    #[inline]
    pub fn bit(self) -> u8 {
        match self {
            Label::Composite => 0,
            Label::Prime => 1,
        }
    }

    /// +1 for prime, −1 for composite.
    #[inline]
    pub fn pm(self) -> i32 {
        match self {
            Label::Composite => -1,
            Label::Prime => 1,
        }
    }
}

/// r(x): `Prime` iff x is prime.
pub fn prime_label(x: u64, table: &PrimeTable) -> Result<Label> {
    if x < 2 {
        return Err(Error::domain(format!("instances start at 2, got {x}")));
    }
    if x > table.limit() {
        return Err(Error::out_of_range(format!(
            "cannot label {x} with sieve limit {}",
            table.limit()
        )));
    }
    Ok(if table.is_prime(x) {
        Label::Prime
    } else {
        Label::Composite
    })
}

/// P(h(X) ≠ r(X)) for X uniform on `{2, …, n}`, as an exact rational.
///
/// A rule only outputs 0 on composites, so the disagreements are exactly the
/// composites it leaves at 1: (#composites − #zeros) / (n−1).
pub fn exact_generalization_error(
    h: &Hypothesis,
    n: u64,
    table: &PrimeTable,
) -> Result<Rational64> {
    h.check_well_formed()?;
    if n < 2 {
        return Err(Error::domain(format!("domain bound must be ≥ 2, got {n}")));
    }
    let pi_n = table.prime_count(n)?;
    let composites = (n - 1) - pi_n;
    let zeros = h.zero_count_up_to(n);
    debug_assert!(zeros <= composites);
    Ok(Rational64::new(
        (composites - zeros) as i64,
        (n - 1) as i64,
    ))
}
