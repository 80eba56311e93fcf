//! Reverse information projection: the mixture of null members closest
//! in KL to a target law, with a Frank-Wolfe duality-gap certificate.

mod solver;

pub use solver::{kl_to_mixture_logs, solve_mixture, MixtureSolution, SolverOptions};

use expfam_core::special::log_sum_exp;
use expfam_core::Family;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiprError {
    #[error("empty mean grid")]
    EmptyGrid,
    #[error("component {component} has {found} support points, expected {expected}")]
    Dimension {
        component: usize,
        expected: usize,
        found: usize,
    },
    #[error("target puts mass on support point {support_index} where every component has none")]
    Domain { support_index: usize },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error(transparent)]
    ExpFam(#[from] expfam_core::ExpFamError),
}

/// Finitely supported prior on mean parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePrior {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscretePrior {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, RiprError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(RiprError::InvalidPrior(format!(
                "{} atoms, {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(RiprError::InvalidPrior(
                "negative or non-finite weight".into(),
            ));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(RiprError::InvalidPrior(format!("weights sum to {s}")));
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform weights over `atoms`.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self, RiprError> {
        let k = atoms.len();
        Self::new(atoms, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn point(atom: Vec<f64>) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.atoms[0].len();
        let mut m = vec![0.0; d];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mi, ai) in m.iter_mut().zip(a) {
                *mi += w * ai;
            }
        }
        m
    }

    /// log sum_k w_k exp(f(atom_k)).
    pub fn log_mix<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w.ln() + f(a))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Certificate of a projection: achieved KL, Frank-Wolfe gap, effort and the
/// prior that achieves it. The optimum lies in [kl - gap, kl].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiprCertificate {
    pub kl: f64,
    pub gap: f64,
    pub iters: usize,
    pub tol: f64,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl RiprCertificate {
    pub fn lower_bound(&self) -> f64 {
        self.kl - self.gap
    }

    pub fn converged(&self) -> bool {
        self.gap <= self.tol
    }
}

/// `n` equally spaced one-dimensional atoms on [lo, hi], endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    match n {
        0 => vec![],
        1 => vec![vec![0.5 * (lo + hi)]],
        _ => (0..n)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
            .collect(),
    }
}

fn finish(
    grid: &[Vec<f64>],
    sol: MixtureSolution,
    tol: f64,
) -> Result<(DiscretePrior, RiprCertificate), RiprError> {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (a, w) in grid.iter().zip(&sol.weights) {
        if *w > 0.0 {
            atoms.push(a.clone());
            weights.push(*w);
        }
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let prior = DiscretePrior::new(atoms.clone(), weights.clone())?;
    let cert = RiprCertificate {
        kl: sol.kl,
        gap: sol.gap,
        iters: sol.iters,
        tol,
        atoms,
        weights,
        trace: sol.trace,
    };
    Ok((prior, cert))
}

/// Project a law of the sufficient statistic onto mixtures of null laws.
///
/// `target_log` holds log masses on a finite support; `component_map`
/// returns the null law of a grid mean on the same support.
pub fn solve_ripr_z<F>(
    target_log: &[f64],
    component_map: F,
    grid: &[Vec<f64>],
    opts: SolverOptions,
) -> Result<(DiscretePrior, RiprCertificate), RiprError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if grid.is_empty() {
        return Err(RiprError::EmptyGrid);
    }
    let comps: Vec<Vec<f64>> = grid.iter().map(|mu| component_map(mu)).collect();
    let sol = solve_mixture(target_log, &comps, opts)?;
    finish(grid, sol, opts.tol)
}

/// Projection of a single-outcome law onto mixtures of `null` members.
///
/// The target is given by log masses at `outcomes`; `log_cell` is the log
/// measure attached to each outcome (0 on lattices, log cell volume for
/// discretized continuous outcomes).
pub fn local_ripr(
    q_log: &[f64],
    outcomes: &[Vec<f64>],
    log_cell: &[f64],
    null: &dyn Family,
    grid: &[Vec<f64>],
    opts: SolverOptions,
) -> Result<(DiscretePrior, RiprCertificate), RiprError> {
    if grid.is_empty() {
        return Err(RiprError::EmptyGrid);
    }
    let mut comps = Vec::with_capacity(grid.len());
    for mu in grid {
        let mut c = Vec::with_capacity(outcomes.len());
        for (u, lc) in outcomes.iter().zip(log_cell) {
            c.push(null.log_density(mu, u)? + lc);
        }
        comps.push(c);
    }
    let sol = solve_mixture(q_log, &comps, opts)?;
    finish(grid, sol, opts.tol)
}

/// KL(target || P_W) for a prior over the component map.
pub fn kl_to_mixture<F>(target_log: &[f64], prior: &DiscretePrior, component_map: F) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let comps: Vec<Vec<f64>> = prior.atoms().iter().map(|a| component_map(a)).collect();
    kl_to_mixture_logs(target_log, prior.weights(), &comps)
}
