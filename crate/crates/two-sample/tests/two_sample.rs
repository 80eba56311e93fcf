use expfam_core::quad::{integrate, QuadOptions};
use expfam_core::special::log_sum_exp;
use expfam_core::{kl, kl_generic, Family};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use two_sample::base::log_beta_mgf;
use two_sample::*;

const BASES: [Base; 4] = [
    Base::Bernoulli,
    Base::Exponential,
    Base::Poisson,
    Base::Gaussian { var: 1.3 },
];

#[test]
fn curve_anchors() {
    let (a, b) = bernoulli_curve(1.7, 0.0);
    let (a2, b2) = GeneratedAlternative::from_effect(Base::Bernoulli, 1.7)
        .unwrap()
        .anchor();
    assert!((a - a2).abs() < 1e-15 && (b - b2).abs() < 1e-15);
    let (a, b) = bernoulli_curve(2.0 * 19f64.ln(), 0.0);
    assert!((a - 0.95).abs() < 1e-15 && (b - 0.05).abs() < 1e-15);
    for beta in [-3.0, 0.0, 0.4, 7.0] {
        let (a, b) = bernoulli_curve(0.0, beta);
        assert_eq!(a, b);
    }
    assert_eq!(exponential_curve(-1.0, 0.0).unwrap(), (2.0, 2.0 / 3.0));
    let (a, b) = exponential_curve(-1.0, 0.25).unwrap();
    assert!((1.0 / a - 1.0 / b + 1.0).abs() < 1e-15);
    assert!(matches!(
        exponential_curve(-1.0, 0.5),
        Err(TwoSampleError::Domain { .. })
    ));
    assert!(matches!(
        exponential_curve(-1.0, 3.0),
        Err(TwoSampleError::Domain { .. })
    ));
}

#[test]
fn effect_size_constant_along_curves() {
    for (base, delta) in [
        (Base::Bernoulli, 1.0),
        (Base::Bernoulli, 5.9),
        (Base::Exponential, -1.0),
        (Base::Poisson, 0.7),
        (Base::Gaussian { var: 1.0 }, 0.4),
    ] {
        let g = GeneratedAlternative::from_effect(base, delta).unwrap();
        for beta in g.prior_grid(201, -10.0, 10.0).unwrap() {
            let (a, b) = g.point(beta).unwrap();
            let e = base.effect_size(a, b);
            // the Bernoulli logit of a value near 1 is only as precise as 1 - a
            let tol = match base {
                Base::Bernoulli => 1e-12 + 4.0 * f64::EPSILON / (a * (1.0 - a)).min(b * (1.0 - b)),
                _ => 1e-12 * (1.0 + delta.abs()),
            };
            assert!(
                (e - delta).abs() < tol,
                "{base:?} beta {beta}: {e} vs {delta}"
            );
        }
    }
}

#[test]
fn exponential_prior_window() {
    let g = GeneratedAlternative::from_effect(Base::Exponential, -1.0).unwrap();
    let grid = g.prior_grid(201, -10.0, 10.0).unwrap();
    assert_eq!(grid.len(), 201);
    assert!(grid[0] > -10.0 && *grid.last().unwrap() < 0.5);
    assert!(grid.iter().all(|b| g.point(*b).is_ok()));
}

#[test]
fn beta_for_mean_inverts_mean() {
    for (base, delta) in [
        (Base::Bernoulli, 5.9),
        (Base::Bernoulli, -1.0),
        (Base::Exponential, -1.0),
        (Base::Exponential, 0.8),
        (Base::Poisson, 2.0),
        (Base::Gaussian { var: 2.0 }, 1.0),
    ] {
        let g = GeneratedAlternative::from_effect(base, delta).unwrap();
        for beta in [-6.0, -1.0, 0.0, 0.3, 2.0] {
            let Ok(m) = g.mean(beta) else { continue };
            let back = g.beta_for_mean(m).unwrap();
            assert!(
                (g.mean(back).unwrap() - m).abs() < 1e-10 * (1.0 + m.abs()),
                "{base:?} {beta}"
            );
        }
    }
}

#[test]
fn bernoulli_z_laws() {
    let ZLaw::Lattice(lp) = suffstat_law(Base::Bernoulli, Hypothesis::Null(1.0), 1).unwrap() else {
        panic!()
    };
    let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    for (x, y) in p.iter().zip([0.25, 0.5, 0.25]) {
        assert!((x - y).abs() < 1e-14);
    }
    // enumerate the four outcomes of (Ya, Yb)
    let (a, b) = (0.95, 0.05);
    let mut oracle = [0.0; 3];
    for ya in 0..2 {
        for yb in 0..2 {
            let pa = if ya == 1 { a } else { 1.0 - a };
            let pb = if yb == 1 { b } else { 1.0 - b };
            oracle[ya + yb] += pa * pb;
        }
    }
    let law = suffstat_law(Base::Bernoulli, Hypothesis::Alt(a, b), 1).unwrap();
    for (z, o) in oracle.iter().enumerate() {
        assert!((law.log_density(z as f64).exp() - o).abs() < 1e-14);
    }
    assert!((oracle[0] - 0.0475).abs() < 1e-15);
}

#[test]
fn discrete_laws_sum_to_one() {
    for n in [1, 7, 60, 500] {
        for hyp in [
            Hypothesis::Null(0.3),
            Hypothesis::Alt(0.95, 0.05),
            Hypothesis::Alt(0.286, 0.128),
        ] {
            let ZLaw::Lattice(lp) = suffstat_law(Base::Bernoulli, hyp, n).unwrap() else {
                panic!()
            };
            assert_eq!(lp.len(), 2 * n + 1);
            assert!(log_sum_exp(&lp).abs() < 1e-10);
        }
        let law = suffstat_law(Base::Poisson, Hypothesis::Alt(1.5, 0.4), n).unwrap();
        let terms: Vec<f64> = (0..20 * n + 200)
            .map(|z| law.log_density(z as f64))
            .collect();
        assert!(log_sum_exp(&terms).abs() < 1e-10);
    }
}

#[test]
fn continuous_laws_integrate_to_one() {
    let o = QuadOptions {
        rel_tol: 1e-10,
        ..QuadOptions::default()
    };
    for n in [1, 5, 40, 200] {
        for hyp in [
            Hypothesis::Null(8.0 / 3.0),
            Hypothesis::Alt(2.0, 2.0 / 3.0),
            Hypothesis::Alt(0.3, 40.0),
        ] {
            let law = suffstat_law(Base::Exponential, hyp, n).unwrap();
            let (m, s) = (law.mean(), law.var().sqrt());
            let hi = m + 40.0 * s;
            let knots = [0.0, (m - 8.0 * s).max(0.0), m, m + 8.0 * s, hi];
            let total: f64 = knots
                .windows(2)
                .map(|w| integrate(|z| law.log_density(z).exp(), w[0], w[1], o).0)
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "n {n} {hyp:?}: {total}");
        }
    }
}

#[test]
fn exponential_convolution_matches_quadrature() {
    let (a, b) = (2.0, 2.0 / 3.0);
    let law = suffstat_law(Base::Exponential, Hypothesis::Alt(a, b), 1).unwrap();
    let z = 2.0;
    let f = |t: f64| (-t / a).exp() / a * (-(z - t) / b).exp() / b;
    let (conv, _) = integrate(f, 0.0, z, QuadOptions::default());
    assert!((law.log_density(z).exp() - conv).abs() < 1e-12);
    // P(Z <= 2) over the triangle versus the integrated density
    let inner = |ya: f64| {
        integrate(
            |yb: f64| (-ya / a).exp() / a * (-yb / b).exp() / b,
            0.0,
            z - ya,
            QuadOptions::default(),
        )
        .0
    };
    let (cdf2d, _) = integrate(inner, 0.0, z, QuadOptions::default());
    let (cdf1d, _) = integrate(|t| law.log_density(t).exp(), 0.0, z, QuadOptions::default());
    assert!((cdf2d - cdf1d).abs() < 1e-10, "{cdf2d} {cdf1d}");
    // n > 1 against a direct convolution of the two gamma densities
    let n = 4;
    let law = suffstat_law(Base::Exponential, Hypothesis::Alt(a, b), n).unwrap();
    let g = |t: f64, s: f64| 3.0 * t.ln() - t / s - 4.0 * s.ln() - 6f64.ln();
    for z in [1.0, 5.0, 12.0, 30.0] {
        let (conv, _) = integrate(
            |t| (g(t, a) + g(z - t, b)).exp(),
            0.0,
            z,
            QuadOptions::default(),
        );
        assert!((law.log_density(z) - conv.ln()).abs() < 1e-10, "z {z}");
    }
}

#[test]
fn proposition_one_laws_coincide() {
    for (base, a, b) in [
        (Base::Poisson, 2.5, 0.3),
        (Base::Gaussian { var: 0.7 }, 1.2, -0.4),
    ] {
        for n in [1, 3, 25] {
            let alt = suffstat_law(base, Hypothesis::Alt(a, b), n).unwrap();
            let null = suffstat_law(base, Hypothesis::Null(a + b), n).unwrap();
            for z in 0..60 {
                let z = z as f64 * 0.5
                    - if matches!(base, Base::Gaussian { .. }) {
                        10.0
                    } else {
                        0.0
                    };
                assert_eq!(alt.log_density(z), null.log_density(z));
            }
        }
    }
}

#[test]
fn beta_mgf_matches_direct_integral() {
    for n in [1usize, 2, 5, 30] {
        for c in [-40.0, -3.0, -1e-3, 0.0, 0.5, 7.0, 60.0] {
            let lb = expfam_core::special::ln_gamma(2.0 * n as f64)
                - 2.0 * expfam_core::special::ln_gamma(n as f64);
            let f = |t: f64| (lb + (n as f64 - 1.0) * (t.ln() + (1.0 - t).ln()) - c * t).exp();
            let (v, _) = integrate(f, 0.0, 1.0, QuadOptions::default());
            assert!((log_beta_mgf(n, c) - v.ln()).abs() < 1e-10, "n {n} c {c}");
        }
    }
}

// log q(u)/p_mu(u) - log q°(z)/p°_mu(z), a generic oracle for the conditional ratio
fn generic_cond(base: Base, a: f64, b: f64, us: &[f64], mu: f64) -> f64 {
    let s = PairSums::from_pairs(us);
    let n = s.n;
    let q = suffstat_law(base, Hypothesis::Alt(a, b), n).unwrap();
    let p = suffstat_law(base, Hypothesis::Null(mu), n).unwrap();
    alt_ll(base, a, b, &s) - null_ll(base, mu, &s) - q.log_density(s.z()) + p.log_density(s.z())
}

#[test]
fn conditional_ratio_matches_generic_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (base, a, b, mus) in [
        (Base::Bernoulli, 0.95, 0.05, [0.6, 1.3]),
        (Base::Bernoulli, 0.286, 0.128, [0.2, 1.9]),
        (Base::Exponential, 2.0, 2.0 / 3.0, [1.0, 5.0]),
        (Base::Poisson, 2.5, 0.3, [0.5, 4.0]),
        (Base::Gaussian { var: 1.3 }, 1.0, -0.5, [-2.0, 3.0]),
    ] {
        for n in [1, 2, 9, 40] {
            let us = sample_alt(base, a, b, n, &mut rng);
            let s = PairSums::from_pairs(&us);
            let closed = base.log_cond(a, b, s.a, s.b, n);
            let g1 = generic_cond(base, a, b, &us, mus[0]);
            let g2 = generic_cond(base, a, b, &us, mus[1]);
            assert!(
                (g1 - g2).abs() < 1e-9 * (1.0 + g1.abs()),
                "{base:?} reference invariance"
            );
            assert!(
                (closed - g1).abs() < 1e-8 * (1.0 + g1.abs()),
                "{base:?} n {n}: {closed} vs {g1}"
            );
            // any curve point gives the same conditional ratio
            let g = GeneratedAlternative::from_anchor(base, a, b).unwrap();
            let (a2, b2) = g.point(-0.3).unwrap();
            assert!(
                (base.log_cond(a2, b2, s.a, s.b, n) - closed).abs() < 1e-8 * (1.0 + closed.abs())
            );
        }
    }
}

#[test]
fn null_family_invariants() {
    for base in BASES {
        let f = TwoSampleNull::new(base);
        let grid: Vec<f64> = match base {
            Base::Bernoulli => vec![0.2, 1.0, 1.7],
            Base::Gaussian { .. } => vec![-1.0, 0.0, 2.5],
            _ => vec![0.4, 1.0, 6.0],
        };
        for &m1 in &grid {
            for &m2 in &grid {
                let c = kl(&f, &[m1], &[m2]).unwrap();
                let g = kl_generic(&f, &[m1], &[m2]).unwrap();
                assert!((c - g).abs() < 1e-10 * (1.0 + c), "{base:?}");
            }
            let beta = f.mean_to_canonical(&[m1]).unwrap();
            let h = 1e-6;
            let grad =
                (f.log_partition(&[beta[0] + h]) - f.log_partition(&[beta[0] - h])) / (2.0 * h);
            assert!((grad - m1).abs() < 1e-6 * (1.0 + m1.abs()), "{base:?} grad");
        }
        // density versus the closed-form pair density
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = f.sample(&[grid[1]], &mut rng);
        let direct = base.log_density(0.5 * grid[1], u[0]) + base.log_density(0.5 * grid[1], u[1]);
        assert!((f.log_density(&[grid[1]], &u).unwrap() - direct).abs() < 1e-12);
        let canon = f.log_density_canonical(&f.mean_to_canonical(&[grid[1]]).unwrap(), &u);
        assert!((canon - direct).abs() < 1e-10, "{base:?}");
    }
}

#[test]
fn paper_kl_values() {
    assert!((alt_null_kl(Base::Bernoulli, 0.95, 0.05) - 0.9893).abs() < 5e-5);
    assert!((alt_null_kl(Base::Exponential, 2.0, 2.0 / 3.0) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    let (a, b) = (2.0 / 7.0, 2.0 / (5.0 * std::f64::consts::E + 2.0));
    assert!(
        (GeneratedAlternative::from_anchor(Base::Bernoulli, a, b)
            .unwrap()
            .delta()
            - 1.0)
            .abs()
            < 1e-12
    );
    assert!((alt_null_kl(Base::Bernoulli, a, b) - 0.0385).abs() < 5e-5);
}

#[test]
fn closed_form_log_likelihoods() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for base in BASES {
        let fam = base.family();
        let (a, b) = match base {
            Base::Bernoulli => (0.3, 0.8),
            Base::Gaussian { .. } => (-0.4, 1.1),
            _ => (0.7, 2.2),
        };
        let us = sample_alt(base, a, b, 30, &mut rng);
        let s = PairSums::from_pairs(&us);
        let carrier: f64 = us.iter().map(|y| fam.log_base(&[*y])).sum();
        let direct: f64 = us
            .chunks(2)
            .map(|u| {
                fam.log_density(&[a], &u[..1]).unwrap() + fam.log_density(&[b], &u[1..]).unwrap()
            })
            .sum();
        assert!(
            (alt_ll(base, a, b, &s) + carrier - direct).abs() < 1e-9,
            "{base:?}"
        );
        // the supremum dominates every member and is attained at the MLE
        let mhat = s.z() / s.n as f64;
        let sup = null_log_sup(base, &s);
        assert!(
            (sup - null_ll(base, mhat, &s)).abs() < 1e-9,
            "{base:?} {sup} {}",
            null_ll(base, mhat, &s)
        );
        assert!(sup >= null_ll(base, mhat * 1.01, &s));
    }
    let s = PairSums {
        n: 3,
        a: 3.0,
        b: 3.0,
    };
    assert_eq!(null_log_sup(Base::Bernoulli, &s), 0.0);
}

#[test]
fn sampler_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 200_000;
    for base in BASES {
        let (a, b) = match base {
            Base::Bernoulli => (0.95, 0.05),
            Base::Gaussian { .. } => (0.5, -0.5),
            _ => (2.0, 2.0 / 3.0),
        };
        let s = PairSums::from_pairs(&sample_alt(base, a, b, n, &mut rng));
        for (sum, m) in [(s.a, a), (s.b, b)] {
            let se = (base.var(m) / n as f64).sqrt();
            assert!((sum / n as f64 - m).abs() < 4.0 * se, "{base:?}");
        }
    }
}

proptest! {
    #[test]
    fn bernoulli_beta_roundtrip(delta in -8.0f64..8.0, m in 0.01f64..1.99) {
        let g = GeneratedAlternative::from_effect(Base::Bernoulli, delta).unwrap();
        let beta = g.beta_for_mean(m).unwrap();
        prop_assert!((g.mean(beta).unwrap() - m).abs() < 1e-10);
    }

    #[test]
    fn exponential_beta_roundtrip(delta in -3.0f64..3.0, m in 0.05f64..50.0) {
        let g = GeneratedAlternative::from_effect(Base::Exponential, delta).unwrap();
        let beta = g.beta_for_mean(m).unwrap();
        prop_assert!(beta < g.beta_range().1);
        prop_assert!((g.mean(beta).unwrap() - m).abs() < 1e-10 * (1.0 + m));
    }

    #[test]
    fn exponential_curve_effect(beta in -10.0f64..0.49) {
        let (a, b) = exponential_curve(-1.0, beta).unwrap();
        prop_assert!((1.0 / a - 1.0 / b + 1.0).abs() < 1e-12);
    }
}
