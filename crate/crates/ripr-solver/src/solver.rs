use nalgebra::{DMatrix, DVector};

use crate::RiprError;

/// Stopping and pruning controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target Frank-Wolfe duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Weights below this are dropped after convergence.
    pub prune: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            prune: 1e-12,
        }
    }
}

/// Output of [`solve_mixture`]: one weight per component.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSolution {
    pub weights: Vec<f64>,
    pub kl: f64,
    pub gap: f64,
    pub iters: usize,
    /// KL after every iteration; non-increasing. Steps whose KL change is
    /// below rounding resolution are recorded as no change.
    pub trace: Vec<f64>,
}

// Target and components restricted to target-positive support points,
// each column rescaled by its largest component mass.
struct Problem {
    t: Vec<f64>,
    // sum_j t_j (log t_j - s_j)
    offset: f64,
    c: Vec<Vec<f64>>,
}

impl Problem {
    fn new(target_log: &[f64], comps_log: &[Vec<f64>]) -> Result<Self, RiprError> {
        if comps_log.is_empty() {
            return Err(RiprError::EmptyGrid);
        }
        let s_len = target_log.len();
        for (k, c) in comps_log.iter().enumerate() {
            if c.len() != s_len {
                return Err(RiprError::Dimension {
                    component: k,
                    expected: s_len,
                    found: c.len(),
                });
            }
        }
        let keep: Vec<usize> = (0..s_len)
            .filter(|&j| target_log[j] > f64::NEG_INFINITY)
            .collect();
        if keep.is_empty() {
            return Err(RiprError::InvalidTarget("target has no mass".into()));
        }
        let lmax = keep
            .iter()
            .map(|&j| target_log[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = keep.iter().map(|&j| (target_log[j] - lmax).exp()).sum();
        let lnorm = lmax + total.ln();
        let mut t = Vec::with_capacity(keep.len());
        let mut scale = Vec::with_capacity(keep.len());
        let mut offset = 0.0;
        for &j in &keep {
            let s = comps_log
                .iter()
                .map(|c| c[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if s == f64::NEG_INFINITY || s.is_nan() {
                return Err(RiprError::Domain { support_index: j });
            }
            let lt = target_log[j] - lnorm;
            let tj = lt.exp();
            t.push(tj);
            scale.push(s);
            offset += tj * (lt - s);
        }
        let c = comps_log
            .iter()
            .map(|c| {
                keep.iter()
                    .zip(&scale)
                    .map(|(&j, s)| (c[j] - s).exp())
                    .collect()
            })
            .collect();
        Ok(Self { t, offset, c })
    }

    fn k(&self) -> usize {
        self.c.len()
    }

    fn mixture(&self, w: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.t.len()];
        for (wk, ck) in w.iter().zip(&self.c) {
            if *wk > 0.0 {
                for (mj, cj) in m.iter_mut().zip(ck) {
                    *mj += wk * cj;
                }
            }
        }
        m
    }

    // sum_j t_j log(t_j / m_j) in the original scale
    fn kl(&self, m: &[f64]) -> f64 {
        let mut acc = self.offset;
        for (tj, mj) in self.t.iter().zip(m) {
            if *mj <= 0.0 {
                return f64::INFINITY;
            }
            acc -= tj * mj.ln();
        }
        acc
    }

    // g_k = sum_j t_j c_kj / m_j
    fn ratios(&self, m: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = self.t.iter().zip(m).map(|(t, m)| t / m).collect();
        self.c
            .iter()
            .map(|ck| ck.iter().zip(&r).map(|(c, r)| c * r).sum())
            .collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    // lowest index wins ties
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

// Absolute resolution of a computed KL difference near the optimum.
const KL_RESOLUTION: f64 = 1e-14;

/// Exact line search on the segment m -> c by bisection on the derivative.
fn line_search(t: &[f64], m: &[f64], c: &[f64]) -> f64 {
    let dphi = |g: f64| -> f64 {
        let mut acc = 0.0;
        for ((tj, mj), cj) in t.iter().zip(m).zip(c) {
            let den = (1.0 - g) * mj + g * cj;
            acc -= tj * (cj - mj) / den;
        }
        acc
    };
    let d1 = dphi(1.0);
    if d1.is_finite() && d1 <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let d = dphi(mid);
        if d.is_finite() && d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

// Change in KL(t || m) when the mixture moves from m0 to m1, computed
// without cancelling the large constant part.
fn kl_change(t: &[f64], m0: &[f64], m1: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((tj, a), b) in t.iter().zip(m0).zip(m1) {
        if *b <= 0.0 {
            return f64::INFINITY;
        }
        let x = (b - a) / a;
        // ln_1p only where it helps; far from 1 the ratio can round to -1
        let l = if x.abs() < 0.5 {
            x.ln_1p()
        } else {
            b.ln() - a.ln()
        };
        acc -= tj * l;
    }
    acc
}

/// Newton iterations on F restricted to the support of `w`. Returns true
/// if anything changed.
fn newton_polish(p: &Problem, w: &mut [f64], sweeps: usize, tol: f64) -> bool {
    let mut changed = false;
    let mut lambda = 1e-12;
    for _ in 0..sweeps {
        let active: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
        let a = active.len();
        let m = p.mixture(w);
        let w_sum: f64 = w.iter().sum();
        let r: Vec<f64> = p.t.iter().zip(&m).map(|(t, m)| t / m).collect();
        let grad: Vec<f64> = active
            .iter()
            .map(|&k| 1.0 - p.c[k].iter().zip(&r).map(|(c, r)| c * r).sum::<f64>())
            .collect();
        if grad.iter().all(|g| g.abs() < 0.01 * tol) {
            break;
        }
        let r2: Vec<f64> = r.iter().zip(&m).map(|(r, m)| r / m).collect();
        let mut h = DMatrix::<f64>::zeros(a, a);
        for (i, &ki) in active.iter().enumerate() {
            let wi: Vec<f64> = p.c[ki].iter().zip(&r2).map(|(c, r)| c * r).collect();
            for (l, &kl) in active.iter().enumerate().skip(i) {
                let v: f64 = wi.iter().zip(&p.c[kl]).map(|(x, c)| x * c).sum();
                h[(i, l)] = v;
                h[(l, i)] = v;
            }
        }
        let diag_max = (0..a).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let rhs = DVector::from_iterator(a, grad.iter().map(|g| -g));
        // Levenberg-Marquardt damping: the Hessian of nearly collinear
        // components is numerically singular, so the damping adapts.
        let mut trial = w.to_vec();
        let mut accepted = false;
        while lambda <= 1e4 {
            let mut hr = h.clone();
            for i in 0..a {
                hr[(i, i)] += lambda * diag_max;
            }
            let Some(ch) = hr.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let dir = ch.solve(&rhs);
            let slope: f64 = grad.iter().zip(dir.iter()).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) {
                lambda *= 10.0;
                continue;
            }
            // largest step keeping every weight nonnegative
            let mut amax = f64::INFINITY;
            let mut blocking = None;
            for (i, &k) in active.iter().enumerate() {
                if dir[i] < 0.0 {
                    let s = -w[k] / dir[i];
                    if s < amax {
                        amax = s;
                        blocking = Some(k);
                    }
                }
            }
            let alpha = amax.min(1.0);
            for (i, &k) in active.iter().enumerate() {
                trial[k] = (w[k] + alpha * dir[i]).max(0.0);
            }
            if alpha == amax {
                if let Some(k) = blocking {
                    trial[k] = 0.0;
                }
            }
            // F(w) = KL(t || C w) + sum w; its minimizer over w >= 0 lies on the simplex
            let df = kl_change(&p.t, &m, &p.mixture(&trial)) + trial.iter().sum::<f64>() - w_sum;
            if df <= 1e-4 * alpha * slope {
                accepted = true;
                lambda = (lambda * 0.1).max(1e-16);
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
        w.copy_from_slice(&trial);
        changed = true;
    }
    // rescaling onto the simplex can only lower F
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in w.iter_mut() {
            *x /= s;
        }
    }
    changed
}

/// Minimize KL(target || sum_k w_k component_k) over the simplex.
///
/// Inputs are log masses on a shared finite support; the target is
/// normalized, components are taken as given.
pub fn solve_mixture(
    target_log: &[f64],
    comps_log: &[Vec<f64>],
    opts: SolverOptions,
) -> Result<MixtureSolution, RiprError> {
    let p = Problem::new(target_log, comps_log)?;
    let k = p.k();
    // start from the best single component, or uniform if none is finite
    let single: Vec<f64> = p.c.iter().map(|c| p.kl(c)).collect();
    let k0 = (0..k).fold(0, |b, i| if single[i] < single[b] { i } else { b });
    let mut w = vec![0.0; k];
    if single[k0].is_finite() {
        w[k0] = 1.0;
    } else {
        w.iter_mut().for_each(|x| *x = 1.0 / k as f64);
    }
    let mut m = p.mixture(&w);
    let mut kl = p.kl(&m);
    let mut trace = vec![kl];
    let mut gap;
    let mut iters = 0;
    let mut stalled = 0;
    let mut g = p.ratios(&m);
    loop {
        iters += 1;
        let best = argmax(&g);
        gap = (g[best] - 1.0).max(0.0);
        if gap <= opts.tol || iters >= opts.max_iter || stalled >= 20 {
            break;
        }
        let gamma = line_search(&p.t, &m, &p.c[best]);
        let mut w_new = w.clone();
        for x in w_new.iter_mut() {
            *x *= 1.0 - gamma;
        }
        w_new[best] += gamma;
        newton_polish(&p, &mut w_new, 30, opts.tol);
        let m_new = p.mixture(&w_new);
        let dkl = kl_change(&p.t, &m, &m_new);
        let g_new = p.ratios(&m_new);
        let gap_new = g_new[argmax(&g_new)] - 1.0;
        if dkl < 0.0 {
            stalled = 0;
            kl += dkl;
        } else if dkl <= KL_RESOLUTION && gap_new < gap {
            // the objective change is below rounding resolution; progress
            // is measured by the certificate instead
            stalled = 0;
        } else {
            stalled += 1;
            trace.push(kl);
            continue;
        }
        w = w_new;
        m = m_new;
        g = g_new;
        trace.push(kl);
    }
    kl = p.kl(&m);
    // prune and re-certify
    if w.iter().any(|x| *x > 0.0 && *x < opts.prune) {
        let mut wp: Vec<f64> = w
            .iter()
            .map(|x| if *x < opts.prune { 0.0 } else { *x })
            .collect();
        let s: f64 = wp.iter().sum();
        wp.iter_mut().for_each(|x| *x /= s);
        let mp = p.mixture(&wp);
        let klp = p.kl(&mp);
        let gp = p.ratios(&mp);
        let gap_p = (gp[argmax(&gp)] - 1.0).max(0.0);
        // tail atoms with tiny weight can carry the certificate; keep them then
        if klp.is_finite() && gap_p <= gap.max(opts.tol) {
            w = wp;
            kl = klp;
            gap = gap_p;
        }
    }
    Ok(MixtureSolution {
        weights: w,
        kl,
        gap,
        iters,
        trace,
    })
}

/// KL(target || sum_k w_k component_k) by direct evaluation; +inf when the
/// mixture has no mass where the target does.
pub fn kl_to_mixture_logs(target_log: &[f64], weights: &[f64], comps_log: &[Vec<f64>]) -> f64 {
    let lmax = target_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lnorm = lmax
        + target_log
            .iter()
            .map(|l| (l - lmax).exp())
            .sum::<f64>()
            .ln();
    let mut acc = 0.0;
    for (j, lt) in target_log.iter().enumerate() {
        if *lt == f64::NEG_INFINITY {
            continue;
        }
        let terms: Vec<f64> = weights
            .iter()
            .zip(comps_log)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c[j])
            .collect();
        let lm = expfam_core::special::log_sum_exp(&terms);
        if lm == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        let lt = lt - lnorm;
        acc += lt.exp() * (lt - lm);
    }
    acc
}
