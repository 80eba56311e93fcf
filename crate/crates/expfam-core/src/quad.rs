//! Adaptive Gauss-Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Log-scale truncation: the integrand is dropped where it falls below
/// 1e-14 of its peak.
pub const LOG_TRUNCATION: f64 = 32.236_191_301_916_64;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_depth: 40,
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integral of `f` over [a, b] with a global error target.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut stack = vec![(a, b, v, e, 0u32)];
    let mut total = 0.0;
    let mut err = 0.0;
    let target_of = |est: f64| opts.abs_tol.max(opts.rel_tol * est.abs());
    let whole = v;
    while let Some((lo, hi, v, e, depth)) = stack.pop() {
        let share = (hi - lo) / (b - a);
        if e <= target_of(whole) * share.max(1e-3) || depth >= opts.max_depth || e < 1e-300 {
            total += v;
            err += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        stack.push((lo, mid, v1, e1, depth + 1));
        stack.push((mid, hi, v2, e2, depth + 1));
    }
    (total, err)
}

/// Stable log of the integral of exp(h) over (lo, hi), given the location of the
/// maximum of `h` (a unimodal log-integrand is assumed).
pub fn log_integrate_peaked<H: Fn(f64) -> f64>(
    h: H,
    lo: f64,
    hi: f64,
    mode: f64,
    opts: QuadOptions,
) -> f64 {
    let mode = mode.clamp(lo, hi);
    let hmax = h(mode);
    if !hmax.is_finite() {
        return hmax;
    }
    let floor = hmax - LOG_TRUNCATION;
    let left = edge(&h, mode, lo, floor);
    let right = edge(&h, mode, hi, floor);
    let g = |x: f64| (h(x) - hmax).exp();
    let mut total = 0.0;
    if mode > left {
        total += integrate(g, left, mode, opts).0;
    }
    if right > mode {
        total += integrate(g, mode, right, opts).0;
    }
    hmax + total.ln()
}

// Truncation point between `from` (above the floor) and `to`.
fn edge<H: Fn(f64) -> f64>(h: &H, from: f64, to: f64, floor: f64) -> f64 {
    if from == to {
        return to;
    }
    if to.is_finite() && h(to) >= floor {
        return to;
    }
    // march outward geometrically to bracket the crossing
    let dir = if to > from { 1.0 } else { -1.0 };
    let mut step = 1e-3 * (1.0 + from.abs());
    let mut inside = from;
    let mut outside;
    loop {
        let cand = from + dir * step;
        let beyond = if dir > 0.0 { cand >= to } else { cand <= to };
        if beyond {
            outside = to;
            break;
        }
        if h(cand) < floor {
            outside = cand;
            break;
        }
        inside = cand;
        step *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        let v = h(mid);
        if v.is_finite() && v >= floor {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    outside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| x * x, 0.0, 3.0, QuadOptions::default());
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_gaussian() {
        let s = 1e-3;
        let h = |x: f64| -0.5 * ((x - 0.3) / s).powi(2);
        let v = log_integrate_peaked(h, 0.0, 1.0, 0.3, QuadOptions::default());
        let exact = (s * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((v - exact).abs() < 1e-11, "{v} {exact}");
    }
}
