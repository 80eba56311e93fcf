//! Exact E_P[S] by enumerating every outcome sequence.

use evariables::{EVarSpec, RipNumericOptions, TwoSampleEvaluator};
use serde::{Deserialize, Serialize};
use two_sample::{null_ll, Base, GeneratedAlternative, PairSums};

use crate::LabError;

/// Largest n enumerated: 4^6 = 4096 Bernoulli pair sequences.
pub const MAX_BRUTE_N: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub n: usize,
    /// E[X] of the null member.
    pub null_mean: f64,
    pub expectation: f64,
    /// Certified projection gap for RIP-numeric.
    pub gap: Option<f64>,
}

/// Sum of P(u^n) S(u^n) over all u^n, for the null member with E[X] =
/// `null_mean`. Only finite outcome spaces are enumerated.
pub fn brute_validity(
    alt: &GeneratedAlternative,
    spec: &EVarSpec,
    null_mean: f64,
    n: usize,
    rip: RipNumericOptions,
) -> Result<ValidityReport, LabError> {
    let base = alt.base();
    if base != Base::Bernoulli {
        return Err(LabError::Unsupported(format!(
            "exhaustive validity needs a finite outcome space; {} is not",
            base.name()
        )));
    }
    if n == 0 || n > MAX_BRUTE_N {
        return Err(LabError::InvalidParameter(format!(
            "n must be in 1..={MAX_BRUTE_N}, got {n}"
        )));
    }
    if !base.in_mean_space(0.5 * null_mean) {
        return Err(LabError::InvalidParameter(format!(
            "{null_mean} is not a null mean"
        )));
    }
    let eval = TwoSampleEvaluator::new(*alt, vec![spec.clone()], vec![n], rip)?;
    let mut total = 0.0;
    let mut u = vec![0.0; 2 * n];
    for code in 0..1usize << (2 * n) {
        for (j, v) in u.iter_mut().enumerate() {
            *v = ((code >> j) & 1) as f64;
        }
        let log_s = eval.evaluate(&u)?[0][0];
        let log_p = null_ll(base, null_mean, &PairSums::from_pairs(&u));
        total += (log_p + log_s).exp();
    }
    Ok(ValidityReport {
        n,
        null_mean,
        expectation: total,
        gap: eval.certificate(0, 0).map(|c| c.gap),
    })
}
