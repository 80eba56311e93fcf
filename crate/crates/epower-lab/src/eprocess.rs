//! Cross-expectation check of whether RIPr/COND e-variables with
//! n-dependent null priors W_n can form an e-process.
//!
//! With S^(n) = q(U^n) / p_{W_n}(U^n), an e-process would need both
//! E_{P_{W_{n+1}}}[q / p_{W_n}] <= 1 and E_{P_{W_n}}[q / p_{W_{n+1}}] <= 1 on
//! U^n; when the two marginals differ, one of them exceeds 1.

use evariables::{EVarKind, EVarSpec, RipNumericOptions, TwoSampleEvaluator};
use expfam_core::special::log_sum_exp;
use ripr_solver::DiscretePrior;
use serde::{Deserialize, Serialize};
use two_sample::{suffstat_law, Base, GeneratedAlternative, Hypothesis, ZSupport};

use crate::LabError;

/// A cross-expectation must exceed 1 by this much to count.
pub const EPROCESS_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone)]
pub enum EProcessSetting {
    /// One-dimensional Gaussian location null with variance `var_p` against
    /// variance `var_q`, W1 = N(mu1, prior_var) (0 for a fixed alternative).
    /// W_n = N(mu1, prior_var + (var_q - var_p)/n); the check runs on the
    /// sample mean discretized into `cells` cells.
    Gaussian {
        var_q: f64,
        var_p: f64,
        prior_var: f64,
        cells: usize,
    },
    /// Discrete two-sample test; W_n comes from the numerical projection.
    TwoSample {
        alt: GeneratedAlternative,
        prior: DiscretePrior,
        rip: RipNumericOptions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EProcessVerdict {
    NotEProcess,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EProcessReport {
    pub n: usize,
    /// E_{P_{W_{n+1}}}[q(U^n) / p_{W_n}(U^n)].
    pub forward: Option<f64>,
    /// E_{P_{W_n}}[q(U^n) / p_{W_{n+1}}(U^n)].
    pub backward: Option<f64>,
    pub verdict: EProcessVerdict,
    pub reason: String,
}

impl EProcessReport {
    fn inconclusive(n: usize, forward: Option<f64>, backward: Option<f64>, reason: &str) -> Self {
        Self {
            n,
            forward,
            backward,
            verdict: EProcessVerdict::Inconclusive,
            reason: reason.into(),
        }
    }

    fn judge(n: usize, forward: f64, backward: f64) -> Self {
        let (name, v) = if forward >= backward {
            ("forward", forward)
        } else {
            ("backward", backward)
        };
        if v > 1.0 + EPROCESS_MARGIN {
            Self {
                n,
                forward: Some(forward),
                backward: Some(backward),
                verdict: EProcessVerdict::NotEProcess,
                reason: format!("{name} cross-expectation {v:.6} exceeds 1"),
            }
        } else {
            Self::inconclusive(
                n,
                Some(forward),
                Some(backward),
                "both cross-expectations are within the margin of 1",
            )
        }
    }
}

pub fn eprocess_counterexample(
    setting: &EProcessSetting,
    n: usize,
) -> Result<EProcessReport, LabError> {
    if n == 0 {
        return Ok(EProcessReport::inconclusive(
            0,
            None,
            None,
            "n = 0: no data, the process starts at 1",
        ));
    }
    match setting {
        EProcessSetting::Gaussian {
            var_q,
            var_p,
            prior_var,
            cells,
        } => gaussian(*var_q, *var_p, *prior_var, *cells, n),
        EProcessSetting::TwoSample { alt, prior, rip } => two_sample(alt, prior, *rip, n),
    }
}

fn gaussian(
    var_q: f64,
    var_p: f64,
    prior_var: f64,
    cells: usize,
    n: usize,
) -> Result<EProcessReport, LabError> {
    if !(var_q > 0.0 && var_p > 0.0 && prior_var >= 0.0) || cells < 2 {
        return Err(LabError::InvalidParameter(format!(
            "need positive variances, prior_var >= 0 and cells >= 2 (got {var_q}, {var_p}, {prior_var}, {cells})"
        )));
    }
    let nf = n as f64;
    let fixed_simple = prior_var == 0.0 && var_q <= var_p;
    if (var_q - var_p).abs() <= 1e-12 * var_p || fixed_simple {
        return Ok(EProcessReport::inconclusive(
            n,
            Some(1.0),
            Some(1.0),
            "W_n = W_{n+1}: the RIPr prior does not move",
        ));
    }
    let w = |k: f64| prior_var + (var_q - var_p) / k;
    for k in [nf, nf + 1.0] {
        if w(k) < 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "RIPr prior variance {:e} < 0 at n = {k}",
                w(k)
            )));
        }
    }
    // laws of the sample mean (centred at mu1)
    let s_q = prior_var + var_q / nf;
    let s_p = |k: f64| var_p / nf + w(k);
    let (s_n, s_m) = (s_p(nf), s_p(nf + 1.0));
    let cross = |s_a: f64, s_b: f64| -> f64 {
        // integral of N(x; s_a) N(x; s_q) / N(x; s_b) over a cell grid
        let curv = 1.0 / s_a + 1.0 / s_q - 1.0 / s_b;
        if curv <= 0.0 {
            return f64::INFINITY;
        }
        let half = 12.0 * (1.0 / curv).sqrt();
        let h = 2.0 * half / cells as f64;
        let ln = |x: f64, s: f64| -0.5 * (x * x / s + (2.0 * std::f64::consts::PI * s).ln());
        let terms: Vec<f64> = (0..cells)
            .map(|i| {
                let x = -half + (i as f64 + 0.5) * h;
                ln(x, s_a) + ln(x, s_q) - ln(x, s_b)
            })
            .collect();
        (log_sum_exp(&terms) + h.ln()).exp()
    };
    Ok(EProcessReport::judge(n, cross(s_m, s_n), cross(s_n, s_m)))
}

fn two_sample(
    alt: &GeneratedAlternative,
    prior: &DiscretePrior,
    rip: RipNumericOptions,
    n: usize,
) -> Result<EProcessReport, LabError> {
    let base = alt.base();
    if !matches!(base, Base::Bernoulli | Base::Poisson) {
        return Err(LabError::Unsupported(format!(
            "e-process check needs a discrete base, got {}",
            base.name()
        )));
    }
    let spec = EVarSpec::new(EVarKind::RipNumeric).with_prior(prior.clone());
    let eval = TwoSampleEvaluator::new(*alt, vec![spec], vec![n, n + 1], rip)?;
    let certs = [
        eval.certificate(0, 0).expect("rip-numeric slot"),
        eval.certificate(0, 1).expect("rip-numeric slot"),
    ];

    let points: Vec<(f64, f64, f64)> = prior
        .atoms()
        .iter()
        .zip(prior.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(b, w)| alt.point(b[0]).map(|(x, y)| (x, y, w.ln())))
        .collect::<Result<_, _>>()?;
    let support = match base {
        Base::Bernoulli => ZSupport::Lattice { len: 2 * n + 1 },
        _ => {
            let top_alt = points.iter().map(|(a, b, _)| a + b).fold(0.0, f64::max);
            let top_null = certs
                .iter()
                .flat_map(|c| c.atoms.iter().map(|m| m[0]))
                .fold(0.0, f64::max);
            let top = n as f64 * top_alt.max(top_null);
            ZSupport::Lattice {
                len: (top + 12.0 * top.sqrt() + 25.0).ceil() as usize,
            }
        }
    };
    let mixture = |laws: Vec<(Hypothesis, f64)>| -> Result<Vec<f64>, LabError> {
        let masses: Vec<(Vec<f64>, f64)> = laws
            .into_iter()
            .map(|(h, lw)| Ok((suffstat_law(base, h, n)?.log_masses(&support), lw)))
            .collect::<Result<_, LabError>>()?;
        Ok((0..support.len())
            .map(|j| log_sum_exp(&masses.iter().map(|(m, lw)| lw + m[j]).collect::<Vec<_>>()))
            .collect())
    };
    let q = mixture(
        points
            .iter()
            .map(|&(a, b, lw)| (Hypothesis::Alt(a, b), lw))
            .collect(),
    )?;
    let p_at = |c: &ripr_solver::RiprCertificate| {
        mixture(
            c.atoms
                .iter()
                .zip(&c.weights)
                .map(|(m, w)| (Hypothesis::Null(m[0]), w.ln()))
                .collect(),
        )
    };
    let (p_n, p_m) = (p_at(certs[0])?, p_at(certs[1])?);
    let cross = |a: &[f64], b: &[f64]| -> f64 {
        let terms: Vec<f64> = (0..support.len())
            .map(|j| a[j] + q[j] - b[j])
            .filter(|v| v.is_finite())
            .collect();
        log_sum_exp(&terms).exp()
    };
    Ok(EProcessReport::judge(
        n,
        cross(&p_m, &p_n),
        cross(&p_n, &p_m),
    ))
}
