use expfam_core::quad::{integrate, QuadOptions};
use expfam_core::*;
use gauss_analytic::CovMatrix;
use proptest::prelude::*;

fn all_families() -> Vec<(Box<dyn Family>, Vec<Vec<f64>>)> {
    let g2 = CovMatrix::new(2, &[1.0, 0.3, 0.3, 0.5]).unwrap();
    vec![
        (Box::new(Bernoulli), vec![vec![0.1], vec![0.5], vec![0.93]]),
        (Box::new(Poisson), vec![vec![0.2], vec![1.0], vec![7.5]]),
        (Box::new(Exponential), vec![vec![0.3], vec![1.0], vec![4.0]]),
        (
            Box::new(GaussLocation::new(g2).unwrap()),
            vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![-0.5, 3.0]],
        ),
        (
            Box::new(GaussLocationScale),
            vec![vec![0.0, 1.0], vec![1.0, 1.5], vec![-2.0, 4.5]],
        ),
        (
            Box::new(Gamma),
            vec![
                Gamma::mean_coords(0.7, 2.0),
                Gamma::mean_coords(3.0, 0.5),
                Gamma::mean_coords(12.0, 1.3),
            ],
        ),
    ]
}

#[test]
fn paper_kl_values() {
    let e = Exponential;
    let v = kl(&e, &[2.0], &[4.0 / 3.0]).unwrap() + kl(&e, &[2.0 / 3.0], &[4.0 / 3.0]).unwrap();
    assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-14);
    assert!((v - 0.2877).abs() < 5e-5);
    let b = Bernoulli;
    let v = kl(&b, &[0.95], &[0.5]).unwrap() + kl(&b, &[0.05], &[0.5]).unwrap();
    assert!((v - 0.9893).abs() < 5e-5, "{v}");
}

#[test]
fn kl_zero_on_diagonal_and_boundary_rejected() {
    for (f, grid) in all_families() {
        for mu in &grid {
            assert!(
                kl(f.as_ref(), mu, mu).unwrap().abs() < 1e-12,
                "{}",
                f.name()
            );
        }
    }
    assert!(matches!(
        kl(&Bernoulli, &[1.0], &[0.5]),
        Err(ExpFamError::NotInterior { .. })
    ));
}

#[test]
fn generic_kl_matches_closed_form() {
    for (f, grid) in all_families() {
        for a in &grid {
            for b in &grid {
                let c = kl(f.as_ref(), a, b).unwrap();
                let g = kl_generic(f.as_ref(), a, b).unwrap();
                assert!(
                    (c - g).abs() < 1e-9 * (1.0 + c.abs()),
                    "{} {a:?} {b:?}: {c} vs {g}",
                    f.name()
                );
                assert!(c >= 0.0);
            }
        }
    }
}

#[test]
fn gradient_and_hessian_of_log_partition() {
    for (f, grid) in all_families() {
        let d = f.dim();
        for mu in &grid {
            let beta = f.mean_to_canonical(mu).unwrap();
            let back = f.canonical_to_mean(&beta).unwrap();
            for j in 0..d {
                assert!(
                    (back[j] - mu[j]).abs() < 1e-9 * (1.0 + mu[j].abs()),
                    "{} roundtrip",
                    f.name()
                );
            }
            let h = 1e-5;
            let cov = f.cov(mu).unwrap();
            for j in 0..d {
                let mut bp = beta.clone();
                let mut bm = beta.clone();
                bp[j] += h;
                bm[j] -= h;
                let grad = (f.log_partition(&bp) - f.log_partition(&bm)) / (2.0 * h);
                assert!(
                    (grad - mu[j]).abs() < 1e-6 * (1.0 + mu[j].abs()),
                    "{} grad {grad} vs {}",
                    f.name(),
                    mu[j]
                );
                for k in 0..d {
                    let hh = 1e-4;
                    let lz = |dj: f64, dk: f64| {
                        let mut b = beta.clone();
                        b[j] += dj;
                        b[k] += dk;
                        f.log_partition(&b)
                    };
                    let hess =
                        (lz(hh, hh) - lz(hh, -hh) - lz(-hh, hh) + lz(-hh, -hh)) / (4.0 * hh * hh);
                    let c = cov.get(j, k);
                    assert!(
                        (hess - c).abs() < 1e-4 * (c.abs() + 1e-2),
                        "{} hess {hess} vs {c}",
                        f.name()
                    );
                }
            }
            assert!(cov.is_spd());
        }
    }
}

#[test]
fn lattice_densities_sum_to_one() {
    for mu in [0.1, 0.5, 0.93] {
        let s: f64 = [0.0, 1.0]
            .iter()
            .map(|u| Bernoulli.log_density(&[mu], &[*u]).unwrap().exp())
            .sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
    for mu in [0.2, 1.0, 7.5] {
        let s: f64 = (0..200)
            .map(|k| Poisson.log_density(&[mu], &[k as f64]).unwrap().exp())
            .sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn continuous_densities_integrate_to_one() {
    let o = QuadOptions::default();
    for (f, grid) in all_families() {
        if f.kind() != ObsKind::Continuous || f.obs_dim() != 1 {
            continue;
        }
        for mu in &grid {
            let (lo, hi) = if f.name() == "gauss-loc-scale" {
                (-60.0, 60.0)
            } else {
                (0.0, 400.0)
            };
            let g = |x: f64| {
                if x <= 0.0 && lo == 0.0 {
                    0.0
                } else {
                    f.log_density(mu, &[x]).unwrap().exp()
                }
            };
            // split near the origin where the gamma density may be singular
            let (a, _) = integrate(g, lo, 1e-6f64.max(lo), o);
            let (b, _) = integrate(g, 1e-6f64.max(lo), hi, o);
            let total = if lo == 0.0 {
                a + b
            } else {
                integrate(g, lo, hi, o).0
            };
            let tol = if f.name() == "gamma" && mu[1] < 2.0 {
                1e-5
            } else {
                1e-8
            };
            assert!((total - 1.0).abs() < tol, "{} {mu:?}: {total}", f.name());
        }
    }
}

#[test]
fn kl_extended_boundary_and_interior() {
    let b = Bernoulli;
    let all_ones = ExtendedMean::new(&b, vec![1.0]);
    assert!(!all_ones.interior);
    assert!((kl_extended(&b, &all_ones, &[0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
    let inner = ExtendedMean::new(&b, vec![0.3]);
    assert_eq!(
        kl_extended(&b, &inner, &[0.6]).unwrap(),
        kl(&b, &[0.3], &[0.6]).unwrap()
    );
    assert_eq!(
        kl_extended(&b, &ExtendedMean::new(&b, vec![0.6]), &[0.6]).unwrap(),
        0.0
    );
    let outside = ExtendedMean {
        value: vec![1.5],
        interior: false,
    };
    assert!(matches!(
        kl_extended(&b, &outside, &[0.5]),
        Err(ExpFamError::OutsideHull { .. })
    ));
    // Poisson all-zero sample: sup of exp(-mu) / exp(-mu*) is exp(mu*)
    let z = ExtendedMean::new(&Poisson, vec![0.0]);
    assert!((kl_extended(&Poisson, &z, &[2.5]).unwrap() - 2.5).abs() < 1e-15);
}

#[test]
fn robustness_identity() {
    for (f, grid) in all_families() {
        for (k, mu) in grid.iter().enumerate() {
            let us = sample_iid(f.as_ref(), mu, 40, 100 + k as u64).unwrap();
            let xs = suffstats(f.as_ref(), &us);
            let mh = mle(f.as_ref(), &xs).unwrap();
            if !mh.interior {
                continue;
            }
            for star in &grid {
                let lhs = 40.0 * kl_extended(f.as_ref(), &mh, star).unwrap();
                let rhs = log_lik(f.as_ref(), &mh.value, &us).unwrap()
                    - log_lik(f.as_ref(), star, &us).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()),
                    "{}: {lhs} vs {rhs}",
                    f.name()
                );
            }
        }
    }
}

#[test]
fn log_lik_max_handles_boundary() {
    let us = [1.0, 1.0, 1.0];
    assert!(log_lik_max(&Bernoulli, &us).unwrap().abs() < 1e-12);
    let us = [0.0, 1.0, 1.0, 0.0];
    assert!((log_lik_max(&Bernoulli, &us).unwrap() - 4.0 * 0.5f64.ln()).abs() < 1e-12);
}

#[test]
fn sampler_law_of_large_numbers() {
    let n = 1_000_000;
    for (f, grid) in all_families() {
        let mu = &grid[1];
        let us = sample_iid(f.as_ref(), mu, n, 7).unwrap();
        let xs = suffstats(f.as_ref(), &us);
        let m = mle(f.as_ref(), &xs).unwrap();
        let cov = f.cov(mu).unwrap();
        for j in 0..f.dim() {
            let se = (cov.get(j, j) / n as f64).sqrt();
            assert!(
                (m.value[j] - mu[j]).abs() < 4.0 * se,
                "{} coord {j}: {} vs {}",
                f.name(),
                m.value[j],
                mu[j]
            );
        }
    }
}

#[test]
fn sampler_determinism_and_empty() {
    assert!(sample_iid(&Exponential, &[1.0], 0, 1).unwrap().is_empty());
    let a = sample_iid(&Gamma, &Gamma::mean_coords(2.0, 1.0), 50, 9).unwrap();
    let b = sample_iid(&Gamma, &Gamma::mean_coords(2.0, 1.0), 50, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn prequential_and_mle() {
    let xs = [1.0, 0.0, 2.0, 2.0];
    let p = prequential(&Poisson, &[1.0], 1.0, &xs).unwrap();
    assert_eq!(p[0], vec![1.0]);
    for (i, v) in p.iter().enumerate() {
        let s: f64 = xs[..i].iter().sum();
        assert!((v[0] - (1.0 + s) / (i as f64 + 1.0)).abs() < 1e-15);
    }
    let zeros = mle(&Bernoulli, &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(
        zeros,
        ExtendedMean {
            value: vec![0.0],
            interior: false
        }
    );
    assert_eq!(mle(&Bernoulli, &[]), Err(ExpFamError::EmptySample));
    assert!(prequential(&Bernoulli, &[0.5], 0.0, &xs).is_err());
}

#[test]
fn registry() {
    for name in FAMILY_NAMES {
        assert_eq!(family_by_name(name, None).unwrap().name(), name);
    }
    assert!(matches!(
        family_by_name("landau", None),
        Err(ExpFamError::UnknownFamily(_))
    ));
}

proptest! {
    #[test]
    fn prequential_stays_interior(xs in prop::collection::vec(0u8..2, 0..40), x0 in 0.05f64..0.95, n0 in 0.1f64..5.0) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        for m in prequential(&Bernoulli, &[x0], n0, &xs).unwrap() {
            prop_assert!(Bernoulli.in_mean_space(&m));
        }
    }

    #[test]
    fn gamma_mean_roundtrip(shape in 0.05f64..50.0, scale in 0.01f64..20.0) {
        let mu = Gamma::mean_coords(shape, scale);
        let (a, s) = Gamma::shape_scale(&mu).unwrap();
        prop_assert!((a - shape).abs() < 1e-8 * shape);
        prop_assert!((s - scale).abs() < 1e-8 * scale);
    }

    #[test]
    fn bernoulli_kl_nonnegative(a in 0.001f64..0.999, b in 0.001f64..0.999) {
        prop_assert!(kl(&Bernoulli, &[a], &[b]).unwrap() >= 0.0);
    }
}
