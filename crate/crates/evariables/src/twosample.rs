//! Streaming evaluation of every two-sample e-statistic on the prefixes of
//! one data sequence.

use expfam_core::special::log_sum_exp;
use ripr_solver::{solve_ripr_z, uniform_grid, DiscretePrior, RiprCertificate, SolverOptions};
use two_sample::{
    alt_ll, null_ll, null_log_sup, suffstat_law, Base, GeneratedAlternative, Hypothesis, PairSums,
    ZLaw, ZSupport,
};

use crate::{EVarError, EVarKind, EVarSpec, LogEValue, Plugin};

/// Controls for the numerically projected RIPr statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipNumericOptions {
    /// Null means in the projection grid (W1 atom means are added).
    pub grid_size: usize,
    /// Cells used to discretize a continuous Z.
    pub cells: usize,
    pub solver: SolverOptions,
    /// Fail when the certified gap exceeds the solver tolerance.
    pub require_converged: bool,
}

impl Default for RipNumericOptions {
    fn default() -> Self {
        Self {
            grid_size: 512,
            cells: 4096,
            solver: SolverOptions::default(),
            require_converged: true,
        }
    }
}

/// x0 = 1 for Bernoulli, the anchor's E[X] otherwise; n0 = 1.
pub fn default_plugin(alt: &GeneratedAlternative) -> Plugin {
    let (a, b) = alt.anchor();
    let x0 = match alt.base() {
        Base::Bernoulli => 1.0,
        _ => a + b,
    };
    Plugin::new(vec![x0], 1.0)
}

/// Uniform prior over `points` beta cell midpoints of [lo, hi] within the
/// admissible set.
pub fn beta_prior(
    alt: &GeneratedAlternative,
    points: usize,
    lo: f64,
    hi: f64,
) -> Result<DiscretePrior, EVarError> {
    let betas = alt.prior_grid(points, lo, hi)?;
    Ok(DiscretePrior::uniform(
        betas.into_iter().map(|b| vec![b]).collect(),
    )?)
}

#[derive(Debug, Clone)]
struct CurvePrior {
    points: Vec<(f64, f64)>,
    log_w: Vec<f64>,
}

impl CurvePrior {
    fn new(alt: &GeneratedAlternative, prior: &DiscretePrior) -> Result<Self, EVarError> {
        let mut points = Vec::new();
        let mut log_w = Vec::new();
        for (atom, w) in prior.atoms().iter().zip(prior.weights()) {
            if *w > 0.0 {
                points.push(alt.point(atom[0])?);
                log_w.push(w.ln());
            }
        }
        Ok(Self { points, log_w })
    }

    fn log_q(&self, base: Base, s: &PairSums, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(
            self.points
                .iter()
                .zip(&self.log_w)
                .map(|(&(a, b), lw)| lw + alt_ll(base, a, b, s)),
        );
        log_sum_exp(buf)
    }

    fn log_p(&self, base: Base, s: &PairSums, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(
            self.points
                .iter()
                .zip(&self.log_w)
                .map(|(&(a, b), lw)| lw + null_ll(base, a + b, s)),
        );
        log_sum_exp(buf)
    }
}

/// Projection of the W1 mixture's Z-law at one sample size.
#[derive(Debug, Clone)]
struct RipAtN {
    q_laws: Vec<ZLaw>,
    q_log_w: Vec<f64>,
    p_laws: Vec<ZLaw>,
    p_log_w: Vec<f64>,
    cert: RiprCertificate,
}

impl RipAtN {
    fn log_ratio(&self, z: f64, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(
            self.q_laws
                .iter()
                .zip(&self.q_log_w)
                .map(|(l, w)| w + l.log_density(z)),
        );
        let q = log_sum_exp(buf);
        buf.clear();
        buf.extend(
            self.p_laws
                .iter()
                .zip(&self.p_log_w)
                .map(|(l, w)| w + l.log_density(z)),
        );
        q - log_sum_exp(buf)
    }
}

#[derive(Debug, Clone)]
enum Slot {
    UiSimple,
    Cond,
    UiPlugin(Plugin),
    SeqRip(Plugin),
    UiMixture(CurvePrior),
    Pseudo(CurvePrior),
    RipNumeric(Vec<RipAtN>),
}

/// Evaluates a list of e-statistics at every n of a grid from one pass over
/// the data. All Q-side quantities refer to the generated alternative; the
/// fixed alternative is its anchor.
#[derive(Debug, Clone)]
pub struct TwoSampleEvaluator {
    alt: GeneratedAlternative,
    specs: Vec<EVarSpec>,
    slots: Vec<Slot>,
    n_grid: Vec<usize>,
}

impl TwoSampleEvaluator {
    pub fn new(
        alt: GeneratedAlternative,
        specs: Vec<EVarSpec>,
        n_grid: Vec<usize>,
        rip_opts: RipNumericOptions,
    ) -> Result<Self, EVarError> {
        if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EVarError::InvalidParameter(format!(
                "n-grid must be positive and strictly increasing: {n_grid:?}"
            )));
        }
        let mut slots = Vec::with_capacity(specs.len());
        for spec in &specs {
            spec.validate()?;
            let slot = match spec.kind {
                EVarKind::UiSimple => Slot::UiSimple,
                EVarKind::Cond => Slot::Cond,
                EVarKind::UiPlugin | EVarKind::SeqRip => {
                    let p = spec.plugin.clone().expect("validated");
                    if p.x0.len() != 1 || !alt.base().in_mean_space(0.5 * p.x0[0]) {
                        return Err(EVarError::InvalidParameter(format!(
                            "plug-in x0 {:?} is not a null mean",
                            p.x0
                        )));
                    }
                    if spec.kind == EVarKind::UiPlugin {
                        Slot::UiPlugin(p)
                    } else {
                        Slot::SeqRip(p)
                    }
                }
                EVarKind::UiMixture => Slot::UiMixture(CurvePrior::new(
                    &alt,
                    spec.prior.as_ref().expect("validated"),
                )?),
                EVarKind::PseudoW1 => Slot::Pseudo(CurvePrior::new(
                    &alt,
                    spec.prior.as_ref().expect("validated"),
                )?),
                EVarKind::RipNumeric => {
                    let prior = CurvePrior::new(&alt, spec.prior.as_ref().expect("validated"))?;
                    let per_n = n_grid
                        .iter()
                        .map(|&n| project(&alt, &prior, n, &rip_opts))
                        .collect::<Result<_, _>>()?;
                    Slot::RipNumeric(per_n)
                }
                kind @ (EVarKind::Rip | EVarKind::Haar) => {
                    return Err(EVarError::Unsupported {
                        kind,
                        setting: "two-sample data".into(),
                    })
                }
            };
            slots.push(slot);
        }
        Ok(Self {
            alt,
            specs,
            slots,
            n_grid,
        })
    }

    pub fn specs(&self) -> &[EVarSpec] {
        &self.specs
    }

    pub fn n_grid(&self) -> &[usize] {
        &self.n_grid
    }

    pub fn alternative(&self) -> &GeneratedAlternative {
        &self.alt
    }

    /// Certificate of the projection behind a RIP-numeric spec at grid index `i`.
    pub fn certificate(&self, spec: usize, i: usize) -> Option<&RiprCertificate> {
        match self.slots.get(spec)? {
            Slot::RipNumeric(per_n) => per_n.get(i).map(|r| &r.cert),
            _ => None,
        }
    }

    /// log S for every spec (outer) at every grid n (inner). `u` holds at
    /// least n_max pairs flattened as (ya, yb, ya, yb, ...).
    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<Vec<f64>>, EVarError> {
        let n_max = *self.n_grid.last().expect("nonempty grid");
        if u.len() < 2 * n_max {
            return Err(EVarError::InvalidParameter(format!(
                "{} pairs supplied, {n_max} needed",
                u.len() / 2
            )));
        }
        let base = self.alt.base();
        let (a, b) = self.alt.anchor();
        let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(self.n_grid.len()); self.slots.len()];
        // running sums of the sequential statistics, one per slot
        let mut seq = vec![0.0; self.slots.len()];
        let mut states: Vec<_> = self
            .slots
            .iter()
            .map(|s| match s {
                Slot::UiPlugin(p) | Slot::SeqRip(p) => Some(p.state()),
                _ => None,
            })
            .collect();
        let mut sums = PairSums::default();
        let mut buf = Vec::new();
        let mut next = 0;
        for (i, pair) in u.chunks_exact(2).take(n_max).enumerate() {
            let (ya, yb) = (pair[0], pair[1]);
            let x = ya + yb;
            let one = PairSums { n: 1, a: ya, b: yb };
            for (k, slot) in self.slots.iter().enumerate() {
                if let (Slot::UiPlugin(_) | Slot::SeqRip(_), Some(st)) = (slot, states[k].as_mut())
                {
                    let m = st.mean1();
                    let (pa, pb) = self.alt.point_for_mean(m)?;
                    let lq = alt_ll(base, pa, pb, &one);
                    seq[k] += match slot {
                        Slot::UiPlugin(_) => lq,
                        _ => lq - seq_rip_denominator(base, pa, pb, x, &one),
                    };
                    st.push(&[x]);
                }
            }
            sums.push(ya, yb);
            if i + 1 != self.n_grid[next] {
                continue;
            }
            let n = i + 1;
            let sup = null_log_sup(base, &sums);
            for (k, slot) in self.slots.iter().enumerate() {
                let v = match slot {
                    Slot::UiSimple => alt_ll(base, a, b, &sums) - sup,
                    Slot::Cond => base.log_cond(a, b, sums.a, sums.b, n),
                    Slot::UiPlugin(_) => seq[k] - sup,
                    Slot::SeqRip(_) => seq[k],
                    Slot::UiMixture(w) => w.log_q(base, &sums, &mut buf) - sup,
                    Slot::Pseudo(w) => {
                        w.log_q(base, &sums, &mut buf) - w.log_p(base, &sums, &mut buf)
                    }
                    Slot::RipNumeric(per_n) => {
                        base.log_cond(a, b, sums.a, sums.b, n)
                            + per_n[next].log_ratio(sums.z(), &mut buf)
                    }
                };
                out[k].push(v);
            }
            next += 1;
        }
        Ok(out)
    }

    /// log S of spec `spec` on all of `u`, whose length must be a grid n.
    pub fn log_s(&self, spec: usize, u: &[f64]) -> Result<LogEValue, EVarError> {
        let n = u.len() / 2;
        let i = self.n_grid.iter().position(|&m| m == n).ok_or_else(|| {
            EVarError::InvalidParameter(format!("n = {n} is not on the evaluation grid"))
        })?;
        let kind = self
            .specs
            .get(spec)
            .ok_or_else(|| EVarError::InvalidParameter(format!("no spec {spec}")))?
            .kind;
        let sub = Self {
            n_grid: self.n_grid[..=i].to_vec(),
            ..self.clone()
        };
        Ok(LogEValue::new(kind, n, sub.evaluate(u)?[spec][i]))
    }
}

/// log of the single-outcome RIPr density at u for the alternative (a, b).
///
/// Bernoulli, Poisson and Gaussian: the null member with the same E[X].
/// Exponential: the Gamma(2) mixture matching the law of X exactly, whose
/// density at u is q_X(x) / x.
fn seq_rip_denominator(base: Base, a: f64, b: f64, x: f64, one: &PairSums) -> f64 {
    match base {
        Base::Exponential => log_exp_pair_sum_density(a, b, x) - x.ln(),
        _ => null_ll(base, a + b, one),
    }
}

/// log density of Ya + Yb for independent exponentials with means a, b.
fn log_exp_pair_sum_density(a: f64, b: f64, x: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let gap = 1.0 / lo - 1.0 / hi;
    if gap == 0.0 || x * gap < 1e-300 {
        return x.ln() - 2.0 * lo.ln() - x / lo;
    }
    // (e^{-x/hi} - e^{-x/lo}) / (hi - lo), with hi - lo = lo hi gap
    -x / hi + (-(-x * gap).exp_m1()).ln() - (lo * hi * gap).ln()
}

/// Support and null grid for the projection at sample size n.
fn projection_setup(
    alt: &GeneratedAlternative,
    prior: &CurvePrior,
    n: usize,
    opts: &RipNumericOptions,
) -> (ZSupport, Vec<Vec<f64>>) {
    let base = alt.base();
    let nf = n as f64;
    let means: Vec<f64> = prior.points.iter().map(|(a, b)| a + b).collect();
    let (mlo, mhi) = means
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), m| {
            (l.min(*m), h.max(*m))
        });
    let mut grid = match base {
        Base::Bernoulli => uniform_grid(1e-4, 2.0 - 1e-4, opts.grid_size),
        Base::Gaussian { .. } => {
            let pad = (0.25 * (mhi - mlo)).max(1.0);
            uniform_grid(mlo - pad, mhi + pad, opts.grid_size)
        }
        Base::Poisson | Base::Exponential => {
            uniform_grid((mlo / 4.0).ln(), (4.0 * mhi).ln(), opts.grid_size)
                .into_iter()
                .map(|v| vec![v[0].exp()])
                .collect()
        }
    };
    grid.extend(means.iter().map(|m| vec![*m]));
    let support = match base {
        Base::Bernoulli => ZSupport::Lattice { len: 2 * n + 1 },
        Base::Poisson => {
            let top = nf * mhi;
            ZSupport::Lattice {
                len: (top + 12.0 * top.sqrt() + 25.0).ceil() as usize,
            }
        }
        Base::Gaussian { var } => {
            let sd = (2.0 * nf * var).sqrt();
            let (lo, hi) = (nf * mlo - 12.0 * sd, nf * mhi + 12.0 * sd);
            ZSupport::Cells {
                lo,
                width: (hi - lo) / opts.cells as f64,
                len: opts.cells,
            }
        }
        Base::Exponential => {
            let spread = prior
                .points
                .iter()
                .map(|(a, b)| nf * (a + b) + 25.0 * (nf * (a * a + b * b)).sqrt());
            let hi = spread.fold(0.0, f64::max);
            ZSupport::Cells {
                lo: 0.0,
                width: hi / opts.cells as f64,
                len: opts.cells,
            }
        }
    };
    (support, grid)
}

fn project(
    alt: &GeneratedAlternative,
    prior: &CurvePrior,
    n: usize,
    opts: &RipNumericOptions,
) -> Result<RipAtN, EVarError> {
    let base = alt.base();
    let (support, grid) = projection_setup(alt, prior, n, opts);
    let q_laws: Vec<ZLaw> = prior
        .points
        .iter()
        .map(|&(a, b)| suffstat_law(base, Hypothesis::Alt(a, b), n))
        .collect::<Result<_, _>>()?;
    let q_masses: Vec<Vec<f64>> = q_laws.iter().map(|l| l.log_masses(&support)).collect();
    let target: Vec<f64> = (0..support.len())
        .map(|j| {
            let terms: Vec<f64> = q_masses
                .iter()
                .zip(&prior.log_w)
                .map(|(m, w)| w + m[j])
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    let comp = |mu: &[f64]| {
        suffstat_law(base, Hypothesis::Null(mu[0]), n)
            .map(|l| l.log_masses(&support))
            .unwrap_or_else(|_| vec![f64::NEG_INFINITY; support.len()])
    };
    let (w0, cert) = solve_ripr_z(&target, comp, &grid, opts.solver)?;
    if opts.require_converged && !cert.converged() {
        return Err(EVarError::NotConverged {
            gap: cert.gap,
            tol: cert.tol,
        });
    }
    let p_laws = w0
        .atoms()
        .iter()
        .map(|mu| suffstat_law(base, Hypothesis::Null(mu[0]), n))
        .collect::<Result<_, _>>()?;
    let p_log_w = w0.weights().iter().map(|w| w.ln()).collect();
    Ok(RipAtN {
        q_laws,
        q_log_w: prior.log_w.clone(),
        p_laws,
        p_log_w,
        cert,
    })
}
