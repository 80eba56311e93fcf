use evariables::twosample::{beta_prior, default_plugin};
use evariables::{EVarKind, EVarSpec, Plugin, RipNumericOptions, TwoSampleEvaluator};
use expfam_core::quad::{integrate, QuadOptions};
use ripr_solver::DiscretePrior;
use two_sample::{Base, GeneratedAlternative};

fn bern() -> GeneratedAlternative {
    GeneratedAlternative::from_anchor(Base::Bernoulli, 0.95, 0.05).unwrap()
}

// all 4^n outcomes as flat pair sequences
fn outcomes(n: usize) -> Vec<Vec<f64>> {
    (0..4usize.pow(n as u32))
        .map(|code| {
            (0..n)
                .flat_map(|i| {
                    let y = (code >> (2 * i)) & 3;
                    [(y & 1) as f64, (y >> 1) as f64]
                })
                .collect()
        })
        .collect()
}

fn log_bern(p: f64, y: f64) -> f64 {
    if y == 1.0 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

fn log_prob_null(mu: f64, u: &[f64]) -> f64 {
    u.iter().map(|y| log_bern(0.5 * mu, *y)).sum()
}

fn log_prob_alt(a: f64, b: f64, u: &[f64]) -> f64 {
    u.chunks(2)
        .map(|p| log_bern(a, p[0]) + log_bern(b, p[1]))
        .sum()
}

fn all_kinds(alt: &GeneratedAlternative, prior_points: usize) -> Vec<EVarSpec> {
    let w1 = beta_prior(alt, prior_points, -10.0, 10.0).unwrap();
    let plug = default_plugin(alt);
    vec![
        EVarSpec::new(EVarKind::UiSimple),
        EVarSpec::new(EVarKind::UiPlugin).with_plugin(plug.clone()),
        EVarSpec::new(EVarKind::UiMixture).with_prior(w1.clone()),
        EVarSpec::new(EVarKind::Cond),
        EVarSpec::new(EVarKind::SeqRip).with_plugin(plug),
        EVarSpec::new(EVarKind::RipNumeric).with_prior(w1.clone()),
        EVarSpec::new(EVarKind::PseudoW1).with_prior(w1),
    ]
}

#[test]
fn ui_table_n2() {
    // frozen from an independent enumeration; index = outcome code
    let table = [
        -6.094051135883081,
        -0.9002715782414086,
        -6.789149536574288,
        -3.321462413643301,
        -0.9002715782414086,
        2.5674155446895788,
        -3.321462413643301,
        -0.9002715782414095,
        -6.789149536574288,
        -3.321462413643301,
        -9.21034037197618,
        -6.78914953657429,
        -3.321462413643301,
        -0.9002715782414095,
        -6.78914953657429,
        -6.094051135883083,
    ];
    let ev = TwoSampleEvaluator::new(
        bern(),
        vec![EVarSpec::new(EVarKind::UiSimple)],
        vec![2],
        Default::default(),
    )
    .unwrap();
    for (u, want) in outcomes(2).iter().zip(table) {
        let got = ev.log_s(0, u).unwrap();
        assert_eq!(got.n, 2);
        assert!(
            (got.value - want).abs() < 1e-12,
            "{u:?}: {} vs {want}",
            got.value
        );
    }
}

#[test]
fn cond_by_enumeration_n3() {
    // q(u | z) / p(u | z) with both conditionals summed over all outcomes
    let (a, b) = (0.95, 0.05);
    let n = 3;
    let all = outcomes(n);
    let z = |u: &[f64]| u.iter().sum::<f64>() as usize;
    let mut qz = vec![0.0; 2 * n + 1];
    let mut pz = vec![0.0; 2 * n + 1];
    for u in &all {
        qz[z(u)] += log_prob_alt(a, b, u).exp();
        pz[z(u)] += log_prob_null(0.7, u).exp();
    }
    let ev = TwoSampleEvaluator::new(
        bern(),
        vec![EVarSpec::new(EVarKind::Cond)],
        vec![n],
        Default::default(),
    )
    .unwrap();
    for mu in [0.1, 0.7, 1.0, 1.6] {
        let mut e = 0.0;
        for u in &all {
            let v = ev.log_s(0, u).unwrap().value;
            let by_def =
                log_prob_alt(a, b, u) - qz[z(u)].ln() - log_prob_null(0.7, u) + pz[z(u)].ln();
            assert!((v - by_def).abs() < 1e-10);
            e += (log_prob_null(mu, u) + v).exp();
        }
        assert!((e - 1.0).abs() < 1e-9, "{mu}: {e}");
    }
}

#[test]
fn exhaustive_validity_up_to_five() {
    let alt = bern();
    let specs = all_kinds(&alt, 41);
    let grid: Vec<usize> = (1..=5).collect();
    let ev = TwoSampleEvaluator::new(
        alt,
        specs.clone(),
        grid.clone(),
        RipNumericOptions::default(),
    )
    .unwrap();
    for (i, n) in grid.iter().enumerate() {
        let cert = ev.certificate(5, i).unwrap();
        assert!(cert.gap <= 1e-8, "n={n} gap {}", cert.gap);
        let all = outcomes(*n);
        let values: Vec<Vec<f64>> = all
            .iter()
            .map(|u| {
                let mut padded = u.clone();
                padded.resize(10, 0.0);
                ev.evaluate(&padded)
                    .unwrap()
                    .into_iter()
                    .map(|v| v[i])
                    .collect()
            })
            .collect();
        for mu in [0.02, 0.5, 1.0, 1.37, 1.9] {
            for (k, spec) in specs.iter().enumerate() {
                let e: f64 = all
                    .iter()
                    .zip(&values)
                    .map(|(u, v)| (log_prob_null(mu, u) + v[k]).exp())
                    .sum();
                match spec.kind {
                    EVarKind::PseudoW1 => {}
                    EVarKind::Cond => assert!((e - 1.0).abs() < 1e-9, "cond n={n} mu={mu}: {e}"),
                    EVarKind::RipNumeric => {
                        assert!(e <= 1.0 + cert.gap + 1e-9, "rip n={n} mu={mu}: {e}")
                    }
                    kind => assert!(e <= 1.0 + 1e-9, "{kind} n={n} mu={mu}: {e}"),
                }
            }
        }
    }
}

#[test]
fn pseudo_single_pair_by_direct_sums() {
    let alt = bern();
    let w1 = beta_prior(&alt, 11, -3.0, 3.0).unwrap();
    let ev = TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::PseudoW1).with_prior(w1.clone())],
        vec![1],
        Default::default(),
    )
    .unwrap();
    for u in outcomes(1) {
        let (mut q, mut p) = (0.0, 0.0);
        for (beta, w) in w1.atoms().iter().zip(w1.weights()) {
            let (a, b) = alt.point(beta[0]).unwrap();
            q += w * log_prob_alt(a, b, &u).exp();
            p += w * log_prob_null(a + b, &u).exp();
        }
        let got = ev.log_s(0, &u).unwrap();
        assert!(!got.is_guaranteed());
        assert!((got.value - (q / p).ln()).abs() < 1e-12);
    }
}

#[test]
fn bernoulli_seq_rip_is_plugin_ratio() {
    let alt = bern();
    let plug = Plugin::new(vec![1.0], 1.0);
    let ev = TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::SeqRip).with_plugin(plug)],
        vec![6],
        Default::default(),
    )
    .unwrap();
    let u = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let mut expect = 0.0;
    let mut sum = 1.0;
    for (i, p) in u.chunks(2).enumerate() {
        let m = sum / (i as f64 + 1.0);
        let (a, b) = alt.point_for_mean(m).unwrap();
        assert!((a + b - m).abs() < 1e-12);
        expect += log_prob_alt(a, b, p) - log_prob_null(m, p);
        sum += p[0] + p[1];
    }
    assert!((ev.log_s(0, &u).unwrap().value - expect).abs() < 1e-12);
}

fn pseudo_random(seed: u64, len: usize) -> Vec<f64> {
    // small deterministic generator for data values in (0, 1)
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        })
        .collect()
}

#[test]
fn proposition_one_settings_agree() {
    let cases = [
        GeneratedAlternative::from_anchor(Base::Poisson, 3.0, 1.0).unwrap(),
        GeneratedAlternative::from_anchor(Base::Gaussian { var: 1.0 }, 0.5, -0.5).unwrap(),
    ];
    for alt in cases {
        let base = alt.base();
        let (a, b) = alt.anchor();
        let point = DiscretePrior::point(vec![0.0]);
        let specs = vec![
            EVarSpec::new(EVarKind::Cond),
            EVarSpec::new(EVarKind::SeqRip).with_plugin(default_plugin(&alt)),
            EVarSpec::new(EVarKind::RipNumeric).with_prior(point),
        ];
        let grid = vec![1, 4, 15];
        let ev = TwoSampleEvaluator::new(alt, specs, grid.clone(), RipNumericOptions::default())
            .unwrap();
        for i in 0..grid.len() {
            assert!(ev.certificate(2, i).unwrap().gap <= 1e-8);
        }
        for rep in 0..20 {
            let raw = pseudo_random(rep, 30);
            let u: Vec<f64> = raw
                .chunks(2)
                .flat_map(|p| match base {
                    // crude inverse-cdf draws are enough here
                    Base::Poisson => [
                        (-(1.0 - p[0]).ln() * a).floor(),
                        (-(1.0 - p[1]).ln() * b).floor(),
                    ],
                    _ => [a + 4.0 * (p[0] - 0.5), b + 4.0 * (p[1] - 0.5)],
                })
                .collect();
            let v = ev.evaluate(&u).unwrap();
            for i in 0..grid.len() {
                assert!(
                    (v[0][i] - v[1][i]).abs() < 1e-9,
                    "{base:?} seq {} cond {}",
                    v[1][i],
                    v[0][i]
                );
                assert!(
                    (v[0][i] - v[2][i]).abs() < 1e-6,
                    "{base:?} rip {} cond {}",
                    v[2][i],
                    v[0][i]
                );
            }
        }
    }
}

#[test]
fn exponential_seq_rip_denominator_is_the_matching_mixture() {
    // p_W(u) = int s^2 e^{-s x} dW(s) with W proportional to s^{-2} on [1/b, 1/a]
    let (a, b) = (0.5, 2.0);
    let alt = GeneratedAlternative::from_anchor(Base::Exponential, a, b).unwrap();
    let plug = Plugin::new(vec![a + b], 1.0);
    let ev = TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::SeqRip).with_plugin(plug)],
        vec![1],
        Default::default(),
    )
    .unwrap();
    let opts = QuadOptions::default();
    for (ya, yb) in [(0.3, 1.2), (2.0, 0.1), (0.01, 0.02), (5.0, 7.0)] {
        let x: f64 = ya + yb;
        let p_w = integrate(|s| (-s * x).exp(), 1.0 / b, 1.0 / a, opts).0 / (b - a);
        let q = (-ya / a - yb / b).exp() / (a * b);
        let got = ev.log_s(0, &[ya, yb]).unwrap().value;
        assert!(
            (got - (q / p_w).ln()).abs() < 1e-9,
            "{got} {}",
            (q / p_w).ln()
        );
    }
    // validity of one step under several null members, by 2-d quadrature
    for mu in [0.3f64, 2.5, 9.0] {
        let s = 2.0 / mu;
        let inner = |ya: f64| {
            integrate(
                |yb| {
                    let x = ya + yb;
                    let log_ratio = ev.log_s(0, &[ya, yb]).unwrap().value;
                    s * s * (-s * x + log_ratio).exp()
                },
                0.0,
                60.0 * mu.max(b),
                opts,
            )
            .0
        };
        let e = integrate(inner, 0.0, 60.0 * mu.max(b), opts).0;
        assert!(e <= 1.0 + 1e-7, "{mu}: {e}");
    }
}

#[test]
fn streaming_matches_single_evaluation() {
    let alt = bern();
    let specs = all_kinds(&alt, 21);
    let grid = vec![1, 3, 8];
    let ev = TwoSampleEvaluator::new(alt, specs.clone(), grid.clone(), Default::default()).unwrap();
    let u: Vec<f64> = pseudo_random(3, 16)
        .into_iter()
        .map(|v| if v < 0.6 { 1.0 } else { 0.0 })
        .collect();
    let all = ev.evaluate(&u).unwrap();
    for (i, n) in grid.iter().enumerate() {
        for k in 0..specs.len() {
            assert_eq!(ev.log_s(k, &u[..2 * n]).unwrap().value, all[k][i]);
        }
    }
}

#[test]
fn construction_errors() {
    let alt = bern();
    assert!(TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::UiMixture)],
        vec![1],
        Default::default()
    )
    .is_err());
    assert!(TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::Haar)],
        vec![1],
        Default::default()
    )
    .is_err());
    assert!(TwoSampleEvaluator::new(
        alt,
        vec![EVarSpec::new(EVarKind::Cond)],
        vec![3, 2],
        Default::default()
    )
    .is_err());
    let bad = EVarSpec::new(EVarKind::UiPlugin).with_plugin(Plugin::new(vec![2.5], 1.0));
    assert!(TwoSampleEvaluator::new(alt, vec![bad], vec![1], Default::default()).is_err());
}

#[test]
fn kind_names_round_trip() {
    for k in evariables::ALL_KINDS {
        assert_eq!(k.name().parse::<EVarKind>().unwrap(), k);
    }
    assert_eq!("pseudo".parse::<EVarKind>().unwrap(), EVarKind::PseudoW1);
    assert!("nope".parse::<EVarKind>().is_err());
}
