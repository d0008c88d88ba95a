//! Prime-divisibility hypothesis classes and the machinery around them:
//! shattering certificates and VC-dimension search, exact generalization
//! errors under the uniform distribution on `{2, …, n}`, the weighted ERM
//! rule, AdaBoost over divisor rules, and a seeded experiment harness that
//! measures how the learned divisors and boosting weights behave as the
//! domain grows.

pub mod adaboost;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod hypotheses;
pub mod primes;
pub mod shattering;

pub use error::{Error, Result};
pub use hypotheses::{exact_generalization_error, prime_label, Hypothesis, Label};
pub use primes::{even_count, PrimeTable};
