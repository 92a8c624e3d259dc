use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::rng::{self, SimRng, Stream};

fn random_state(r: &mut SimRng) -> StateVector {
    StateVector {
        stage: r.random_range(5.0..90.0),
        lai: r.random_range(0.0..6.0),
        esw: [
            r.random_range(0.0..26.0),
            r.random_range(0.0..22.0),
            r.random_range(0.0..46.0),
            r.random_range(0.0..44.0),
            r.random_range(0.0..41.0),
        ],
        cu_irrig: r.random_range(0.0..500.0),
        cu_rain: r.random_range(0.0..400.0),
    }
}

/// Central finite difference of log π(a|x) with respect to θ[i].
fn fd_log_prob(p: &PolicyParameters, x: &[f64], a: usize, i: usize, h: f64) -> f64 {
    let mut plus = p.clone();
    plus.theta[i] += h;
    let mut minus = p.clone();
    minus.theta[i] -= h;
    let lp = plus.forward_features(x).unwrap()[a].ln();
    let lm = minus.forward_features(x).unwrap()[a].ln();
    (lp - lm) / (2.0 * h)
}

#[test]
fn parameter_counts() {
    assert_eq!(param_count(&Architecture::default()), 1_448_005);
    let term_by_term = (9 * 400) + (400 * 600 + 600) + (600 * 800 + 800) + (800 * 600 + 600) + (600 * 400 + 400) + (400 * 5 + 5);
    assert_eq!(term_by_term, 1_448_005);
    assert_eq!(param_count(&Architecture::new(vec![8])), 117);
    assert_eq!(param_count(&Architecture::new(vec![])), 50);
    let with_bias = Architecture {
        bias_on_first_hidden: true,
        ..Architecture::new(vec![8])
    };
    assert_eq!(param_count(&with_bias), 125);
}

#[test]
fn zero_theta_is_uniform() {
    let p = PolicyParameters::zeros(Architecture::new(vec![16, 8])).unwrap();
    let mut r = rng::stream(0, Stream::Init);
    for _ in 0..10 {
        let probs = forward(&p, &random_state(&mut r)).unwrap();
        assert_eq!(probs, vec![0.2; 5]);
    }
}

#[test]
fn two_action_closed_form() {
    // no hidden layers, one input feature: logits (w0·x + b0, w1·x + b1) = (1, 0)
    let arch = Architecture {
        input_dim: 1,
        hidden_dims: vec![],
        output_dim: 2,
        bias_on_first_hidden: false,
    };
    let p = PolicyParameters::from_theta(arch, vec![0.5, 0.0, 0.0, 0.0]).unwrap();
    let probs = p.forward_features(&[2.0]).unwrap();
    let e = std::f64::consts::E;
    assert!((probs[0] - e / (e + 1.0)).abs() < 1e-15);
    assert!((probs[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
    assert!((probs[0] - 0.7311).abs() < 1e-4);
}

#[test]
fn linear_softmax_gradient_is_outer_product() {
    let p = PolicyParameters::zeros(Architecture::new(vec![])).unwrap();
    let s = StateVector {
        stage: 30.0,
        lai: 2.0,
        esw: [10.0, 11.0, 12.0, 13.0, 14.0],
        cu_irrig: 60.0,
        cu_rain: 74.0,
    };
    let g = grad_log_prob(&p, &s, 0).unwrap();
    let x = s.to_array();
    let logit_grad = [0.8, -0.2, -0.2, -0.2, -0.2];
    for (o, d) in logit_grad.iter().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            assert!((g[o * 9 + i] - d * xi).abs() < 1e-12);
        }
        assert!((g[45 + o] - d).abs() < 1e-15);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let arch = Architecture::new(vec![8]);
    let mut r = rng::stream(5, Stream::Init);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = init_parameters(&arch, &mut r, 0.3).unwrap();
        let x = random_state(&mut r).to_array();
        // keep inputs moderate so the FD step resolves log π
        let x: Vec<f64> = x.iter().map(|v| v / 50.0).collect();
        let a = r.random_range(0..5);
        let mut g = vec![0.0; p.len()];
        p.accumulate_grad_log_prob(&x, a, 1.0, &mut g).unwrap();
        for i in 0..p.len() {
            let fd = fd_log_prob(&p, &x, a, i, h);
            if g[i].abs() < 1e-6 {
                assert!((g[i] - fd).abs() < 1e-8, "θ[{i}]: {} vs {fd}", g[i]);
            } else {
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs());
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn score_identity_holds() {
    let arch = Architecture::new(vec![12, 7]);
    let mut r = rng::stream(9, Stream::Init);
    for _ in 0..50 {
        let p = init_parameters(&arch, &mut r, 0.2).unwrap();
        let s = random_state(&mut r);
        let probs = forward(&p, &s).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut acc = vec![0.0; p.len()];
        for (a, pa) in probs.iter().enumerate() {
            p.accumulate_grad_log_prob(&s.to_array(), a, *pa, &mut acc).unwrap();
        }
        let worst = acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-8, "{worst}");
    }
}

#[test]
fn output_bias_shift_invariance() {
    let arch = Architecture::new(vec![6]);
    let mut r = rng::stream(2, Stream::Init);
    let p = init_parameters(&arch, &mut r, 0.5).unwrap();
    let mut q = p.clone();
    let n = q.len();
    for b in &mut q.theta[n - 5..] {
        *b += 3.7;
    }
    let s = random_state(&mut r);
    let a = forward(&p, &s).unwrap();
    let b = forward(&q, &s).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn huge_logits_stay_finite() {
    let arch = Architecture::new(vec![]);
    let mut p = PolicyParameters::zeros(arch).unwrap();
    p.theta[0] = 1e6;
    let probs = forward(&p, &StateVector { stage: 50.0, ..Default::default() }).unwrap();
    assert_eq!(probs[0], 1.0);
    assert!(probs.iter().all(|v| v.is_finite()));
}

#[test]
fn overflow_names_layer() {
    let arch = Architecture::new(vec![3]);
    let mut p = PolicyParameters::zeros(arch).unwrap();
    p.theta[0] = f64::MAX;
    let s = StateVector { stage: 10.0, ..Default::default() };
    let err = forward(&p, &s).unwrap_err();
    assert!(err.to_string().contains("hidden 1"), "{err}");
}

#[test]
fn init_statistics() {
    let arch = Architecture::default();
    let p = init_parameters(&arch, &mut rng::stream(0, Stream::Init), 1.0).unwrap();
    let n = p.len() as f64;
    let mean = p.theta.iter().sum::<f64>() / n;
    let sd = (p.theta.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.005, "mean {mean}");
    assert!((0.995..=1.005).contains(&sd), "sd {sd}");

    let q = init_parameters(&Architecture::new(vec![400, 400]), &mut rng::stream(1, Stream::Init), 0.01).unwrap();
    let m = q.len() as f64;
    let sd = (q.theta.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
    assert!((sd - 0.01).abs() < 1e-4, "sd {sd}");

    let again = init_parameters(&arch, &mut rng::stream(0, Stream::Init), 1.0).unwrap();
    assert_eq!(again, p);
    assert!(init_parameters(&arch, &mut rng::stream(0, Stream::Init), 0.0).is_err());
}

#[test]
fn sampling_frequencies() {
    let mut r = rng::stream(4, Stream::ActionSampling);
    for _ in 0..100 {
        assert_eq!(sample_action(&[1.0, 0.0, 0.0, 0.0, 0.0], &mut r).unwrap(), 0);
    }
    let probs = [0.8, 0.12, 0.08];
    let mut counts = [0usize; 3];
    for _ in 0..100_000 {
        counts[sample_action(&probs, &mut r).unwrap()] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        let f = *c as f64 / 100_000.0;
        assert!((f - p).abs() < 0.006, "{f} vs {p}");
    }
    assert!(sample_action(&[0.5, 0.4], &mut r).is_err());
}

#[test]
fn sampling_is_reproducible() {
    let probs = [0.1, 0.2, 0.3, 0.25, 0.15];
    let draw = || {
        let mut r = rng::stream(77, Stream::ActionSampling);
        (0..200).map(|_| sample_action(&probs, &mut r).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

#[test]
fn update_edge_cases() {
    let arch = Architecture::new(vec![4]);
    let mut p = init_parameters(&arch, &mut rng::stream(3, Stream::Init), 1.0).unwrap();
    let before = p.clone();
    let grad: Vec<f64> = (0..p.len()).map(|i| i as f64).collect();
    apply_update(&mut p, 0.0, 123.0, &grad).unwrap();
    assert_eq!(p, before);

    let mut unit = vec![0.0; p.len()];
    unit[7] = 1.0;
    apply_update(&mut p, 1.0, 1.0, &unit).unwrap();
    assert_eq!(p.theta[7], before.theta[7] + 1.0);

    let mut bad = vec![0.0; p.len()];
    bad[0] = f64::MAX;
    let snapshot = p.clone();
    assert!(matches!(apply_update(&mut p, 10.0, 10.0, &bad), Err(Error::Numeric(_))));
    assert_eq!(p, snapshot);
    assert!(apply_update(&mut p, 1.0, 1.0, &[1.0]).is_err());
}

proptest! {
    #[test]
    fn update_is_exact_elementwise(
        alpha in 0.0f64..1.0,
        g in -2000.0f64..2000.0,
        seed in 0u64..1000,
    ) {
        let arch = Architecture::new(vec![5]);
        let mut r = rng::stream(seed, Stream::Init);
        let mut p = init_parameters(&arch, &mut r, 1.0).unwrap();
        let grad = init_parameters(&arch, &mut r, 1.0).unwrap().theta;
        let before = p.theta.clone();
        apply_update(&mut p, alpha, g, &grad).unwrap();
        for i in 0..grad.len() {
            prop_assert_eq!(p.theta[i], before[i] + (alpha * g) * grad[i]);
        }
    }

    #[test]
    fn probabilities_form_a_distribution(seed in 0u64..10_000) {
        let mut r = rng::stream(seed, Stream::Init);
        let arch = Architecture::new(vec![10, 6]);
        let p = init_parameters(&arch, &mut r, 1.0).unwrap();
        let probs = forward(&p, &random_state(&mut r)).unwrap();
        prop_assert_eq!(probs.len(), 5);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
