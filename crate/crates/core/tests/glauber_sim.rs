use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use kac_glauber::girsanov::{disorder_replacement_error, martingale_diagnostic, rn_log_weight};
use kac_glauber::glauber::{flip_rate, hamiltonian, perturbed_rate, replica_rng, simulate, simulate_replicas};
use kac_glauber::replay::replay;
use kac_glauber::{
    sample_disorder, Color, DisorderField, FnField, KernelProfile, KernelSpec, Model, ModelParams, PotentialGrid,
    SimOptions, SpaceTimeField, SpinConfig,
};

fn colors() -> Vec<Color> {
    vec![Color { a: 1.0, p: 0.5 }, Color { a: -1.0, p: 0.5 }]
}

fn model(side: usize, theta: f64, horizon: f64) -> Model {
    let kernel = KernelSpec::new(KernelProfile::PeriodicGaussian { width: 0.1 });
    Model::new(ModelParams::new(1, side, theta, colors(), horizon, kernel).unwrap()).unwrap()
}

fn free_model(side: usize, theta: f64, horizon: f64, cs: Vec<Color>) -> Model {
    Model::new(ModelParams::new(1, side, theta, cs, horizon, KernelSpec::zero()).unwrap()).unwrap()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn flip_rate_examples() {
    let m = free_model(8, 1.0, 1.0, vec![Color { a: 1.0, p: 1.0 }, Color { a: -1.0, p: 0.0 }]);
    let alpha = sample_disorder(&m.params, 0);
    let up = SpinConfig::constant(1, &m.kernel).unwrap();
    assert!((flip_rate(&m, &up, 2, &alpha) - 0.1192029).abs() < 1e-7);
    assert!((flip_rate(&m, &up, 2, &alpha) - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
    let flat = free_model(8, 0.0, 1.0, colors());
    let alpha = sample_disorder(&flat.params, 0);
    assert_eq!(flip_rate(&flat, &up, 5, &alpha), 0.5);
}

#[test]
fn perturbed_rate_examples() {
    let m = model(16, 0.6, 1.0);
    let alpha = sample_disorder(&m.params, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = PotentialGrid::zero(1, 2);
    let sup = 1.3;
    let v = FnField::new(2, sup, move |i, t, r| sup * (2.0 * PI * (r[0] + 0.3 * i as f64 + t)).sin());
    for _ in 0..1000 {
        let spins: Vec<i8> = (0..16).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let sigma = SpinConfig::new(spins, &m.kernel).unwrap();
        let x = rng.random_range(0..16);
        let t = rng.random_range(0.0..1.0);
        let c = flip_rate(&m, &sigma, x, &alpha);
        assert_eq!(perturbed_rate(&m, &sigma, x, &alpha, &zero, t), c);
        let cv = perturbed_rate(&m, &sigma, x, &alpha, &v, t);
        assert!(cv <= (2.0 * sup).exp());
        let vx = v.value(alpha.color[x], t, &[x as f64 / 16.0]);
        assert!((cv - (-2.0 * sigma.spin(x) * vx).exp() * c).abs() < 1e-15);
    }
    let up = SpinConfig::constant(1, &m.kernel).unwrap();
    let flat = PotentialGrid::constant(1, &[0.4, 0.4]).unwrap();
    let ratio = perturbed_rate(&m, &up, 3, &alpha, &flat, 0.0) / flip_rate(&m, &up, 3, &alpha);
    assert!((ratio - (-0.8f64).exp()).abs() < 1e-15);
}

#[test]
fn independent_spins_relax_exponentially() {
    let m = free_model(256, 0.0, 5.0, colors());
    let alpha = sample_disorder(&m.params, 4);
    let opts = SimOptions { dt_rec: 5.0, snapshot_mesh: Some(1), record_events: false };
    let records =
        simulate_replicas(&m, &alpha, |_| SpinConfig::constant(1, &m.kernel), None, 5, 100, &opts).unwrap();
    let mags: Vec<f64> = records
        .iter()
        .map(|r| r.final_spins.iter().map(|&s| s as f64).sum::<f64>() / 256.0)
        .collect();
    let (mean, se) = mean_se(&mags);
    assert!((mean - (-5f64).exp()).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn zero_horizon_keeps_initial_configuration() {
    let m = model(16, 0.5, 0.0);
    let alpha = sample_disorder(&m.params, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sigma = SpinConfig::sample_with_mean(&[0.3; 16], &m.kernel, &mut rng).unwrap();
    let rec = simulate(&m, &alpha, sigma.clone(), None, 3, &SimOptions::default()).unwrap();
    assert_eq!(rec.events, 0);
    assert_eq!(rec.final_spins, sigma.spins());
    assert_eq!(rec.times, vec![0.0]);
}

#[test]
fn same_seed_gives_identical_records() {
    let m = model(32, 0.8, 1.0);
    let alpha = sample_disorder(&m.params, 7);
    let v = PotentialGrid::constant(1, &[0.2, -0.1]).unwrap();
    let run = || {
        let mut rng = replica_rng(9, 4);
        let sigma = SpinConfig::sample_with_mean(&[0.0; 32], &m.kernel, &mut rng).unwrap();
        kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma, Some(&v), &mut rng, &SimOptions::default()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.events > 0);
}

#[test]
fn snapshots_cover_the_horizon() {
    let m = model(32, 0.8, 1.0);
    let alpha = sample_disorder(&m.params, 7);
    let sigma = SpinConfig::constant(-1, &m.kernel).unwrap();
    let opts = SimOptions { dt_rec: 0.1, snapshot_mesh: Some(8), record_events: true };
    let rec = simulate(&m, &alpha, sigma, None, 1, &opts).unwrap();
    assert_eq!(rec.times.len(), 11);
    for (k, t) in rec.times.iter().enumerate() {
        assert!((t - 0.1 * k as f64).abs() < 1e-12);
    }
    assert_eq!(rec.snapshots[0].grid.side, 8);
    assert_eq!(rec.jump_term, 0.0);
    assert_eq!(rec.compensator, 0.0);
    let first_total: f64 = rec.snapshots[0].total().iter().sum::<f64>() / 8.0;
    assert!((first_total + 1.0).abs() < 1e-12);
    let last = replay(&m, &rec, |_, _, _| {}).unwrap();
    assert_eq!(last.spins(), &rec.final_spins[..]);
    let last_total: f64 = rec.snapshots.last().unwrap().total().iter().sum::<f64>() / 8.0;
    let mag = rec.final_spins.iter().map(|&s| s as f64).sum::<f64>() / 32.0;
    assert!((last_total - mag).abs() < 1e-12);
}

#[test]
fn invalid_options_are_rejected() {
    let m = model(16, 0.5, 1.0);
    let alpha = sample_disorder(&m.params, 1);
    let sigma = SpinConfig::constant(1, &m.kernel).unwrap();
    let bad = SimOptions { dt_rec: 0.0, ..SimOptions::default() };
    assert!(simulate(&m, &alpha, sigma.clone(), None, 1, &bad).is_err());
    let nan = PotentialGrid::constant(1, &[f64::NAN, 0.0]);
    if let Ok(v) = nan {
        assert!(simulate(&m, &alpha, sigma.clone(), Some(&v), 1, &SimOptions::default()).is_err());
    }
    let three = PotentialGrid::constant(1, &[0.1, 0.1, 0.1]).unwrap();
    assert!(simulate(&m, &alpha, sigma, Some(&three), 1, &SimOptions::default()).is_err());
}

/// Kolmogorov-Smirnov distance between samples and an exponential law of rate `rate`.
fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn thinning_first_jump_is_exponential() {
    let cs = vec![Color { a: 1.0, p: 0.5 }, Color { a: -1.0, p: 0.5 }];
    let m = free_model(2, 0.7, 20.0, cs);
    let alpha = DisorderField::from_colors(&m.params, vec![0, 1]).unwrap();
    let sigma = SpinConfig::new(vec![1, 1], &m.kernel).unwrap();
    let v = PotentialGrid::constant(1, &[0.3, -0.45]).unwrap();
    for tilt in [None, Some(&v as &dyn SpaceTimeField)] {
        let rate: f64 = (0..2)
            .map(|x| match tilt {
                Some(f) => perturbed_rate(&m, &sigma, x, &alpha, f, 0.0),
                None => flip_rate(&m, &sigma, x, &alpha),
            })
            .sum();
        let opts = SimOptions { dt_rec: 20.0, snapshot_mesh: Some(1), record_events: true };
        let firsts: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(31, r);
                let rec = kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma.clone(), tilt, &mut rng, &opts)
                    .unwrap();
                rec.event_log.unwrap()[0].0
            })
            .collect();
        let d = ks_exponential(firsts, rate);
        // p > 0.01 for n = 1e4
        assert!(d < 1.628 / 100.0, "KS distance {d}");
    }
}

#[test]
fn equilibrium_marginals_are_invariant() {
    let side = 8;
    let m = model(side, 0.6, 1.0);
    let alpha = sample_disorder(&m.params, 41);
    let configs: Vec<Vec<i8>> = (0..1u32 << side)
        .map(|bits| (0..side).map(|x| if bits >> x & 1 == 1 { 1 } else { -1 }).collect())
        .collect();
    let weights: Vec<f64> = configs
        .iter()
        .map(|s| (-hamiltonian(&m, &SpinConfig::new(s.clone(), &m.kernel).unwrap(), &alpha)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let marginal: Vec<f64> = (0..side)
        .map(|x| configs.iter().zip(&weights).filter(|(s, _)| s[x] == 1).map(|(_, w)| w).sum::<f64>() / z)
        .collect();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / z;
            Some(*acc)
        })
        .collect();
    let opts = SimOptions { dt_rec: 1.0, snapshot_mesh: Some(1), record_events: false };
    let replicas = 20_000;
    let finals: Vec<Vec<i8>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(42, r);
            let u: f64 = rng.random();
            let k = cumulative.partition_point(|&c| c < u).min(configs.len() - 1);
            let sigma = SpinConfig::new(configs[k].clone(), &m.kernel).unwrap();
            kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma, None, &mut rng, &opts).unwrap().final_spins
        })
        .collect();
    for x in 0..side {
        let p = marginal[x];
        let freq = finals.iter().filter(|s| s[x] == 1).count() as f64 / replicas as f64;
        let se = (p * (1.0 - p) / replicas as f64).sqrt();
        assert!((freq - p).abs() < 4.5 * se, "site {x}: {freq} vs {p}");
    }
}

#[test]
fn zero_potential_gives_zero_weights() {
    let m = model(16, 0.5, 0.5);
    let alpha = sample_disorder(&m.params, 51);
    let zero = PotentialGrid::zero(1, 2);
    let rec = simulate(&m, &alpha, SpinConfig::constant(1, &m.kernel).unwrap(), Some(&zero), 52, &SimOptions::default())
        .unwrap();
    assert!(rec.events > 0);
    assert_eq!((rec.jump_term, rec.compensator), (0.0, 0.0));
    let (eventwise, closed) = rn_log_weight(&m, &alpha, &rec, &zero).unwrap();
    assert_eq!(eventwise, 0.0);
    assert!(closed.abs() < 1e-15);
    let rep = disorder_replacement_error(&m, &alpha, &rec, &zero, 2, 0.1).unwrap();
    assert!(rep.error.abs() < 1e-15);
}

#[test]
fn time_dependent_weights_agree() {
    let m = model(12, 0.9, 0.4);
    let alpha = sample_disorder(&m.params, 53);
    let v = FnField::new(2, 0.6, |i, t, r| 0.3 * (2.0 * PI * r[0]).cos() * (1.0 + t) * if i == 0 { 1.0 } else { -1.0 })
        .with_time_derivative(|i, _, r| 0.3 * (2.0 * PI * r[0]).cos() * if i == 0 { 1.0 } else { -1.0 });
    let nodes = PotentialGrid::new(
        vec![0.0, 0.2, 0.4],
        kac_glauber::Torus::new(1, 12),
        (0..3)
            .map(|k| {
                let kf = k as f64;
                vec![(0..12).map(|c| 0.2 * (c as f64 * 0.5).sin() * kf).collect(), vec![-0.1 * kf; 12]]
            })
            .collect(),
    )
    .unwrap();
    for (field, tol) in [(&v as &dyn SpaceTimeField, 1e-8), (&nodes as &dyn SpaceTimeField, 1e-8)] {
        for r in 0..10 {
            let mut rng = replica_rng(54, r);
            let sigma = SpinConfig::sample_with_mean(&[0.2; 12], &m.kernel, &mut rng).unwrap();
            let rec =
                kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma, Some(field), &mut rng, &SimOptions::default())
                    .unwrap();
            let (eventwise, closed) = rn_log_weight(&m, &alpha, &rec, field).unwrap();
            assert!((eventwise - closed).abs() < tol, "{eventwise} vs {closed}");
        }
    }
}

#[test]
fn missing_event_log_is_an_error() {
    let m = model(8, 0.5, 0.2);
    let alpha = sample_disorder(&m.params, 1);
    let v = PotentialGrid::constant(1, &[0.1, 0.2]).unwrap();
    let opts = SimOptions { record_events: false, ..SimOptions::default() };
    let rec = simulate(&m, &alpha, SpinConfig::constant(1, &m.kernel).unwrap(), Some(&v), 1, &opts).unwrap();
    assert!(rn_log_weight(&m, &alpha, &rec, &v).is_err());
}

#[test]
fn martingale_mean_and_isometry() {
    let m = model(64, 0.5, 1.0);
    let alpha = sample_disorder(&m.params, 61);
    let g = FnField::stationary(2, 1.0, |i, r| (2.0 * PI * r[0]).cos() * if i == 0 { 1.0 } else { 0.5 });
    let m0 = |r: &[f64]| 0.3 * (2.0 * PI * r[0]).sin();
    let rep = martingale_diagnostic(&m, &alpha, &g, &m0, 500, 62).unwrap();
    assert!(rep.mean.abs() <= 3.0 * rep.std_error, "{rep:?}");
    let ratio = rep.variance / rep.mean_qv;
    assert!((0.8..=1.25).contains(&ratio), "{ratio}");
    assert!(martingale_diagnostic(&m, &alpha, &g, &m0, 1, 62).is_err());
}

#[test]
fn replacement_error_examples() {
    let cs = vec![Color { a: 1.0, p: 1.0 }, Color { a: -1.0, p: 0.0 }];
    let kernel = KernelSpec::new(KernelProfile::PeriodicGaussian { width: 0.1 });
    let m = Model::new(ModelParams::new(1, 32, 0.5, cs, 0.5, kernel).unwrap()).unwrap();
    let alpha = sample_disorder(&m.params, 71);
    let v = PotentialGrid::constant(1, &[0.3, -0.3]).unwrap();
    let rec = simulate(&m, &alpha, SpinConfig::constant(1, &m.kernel).unwrap(), Some(&v), 72, &SimOptions::default())
        .unwrap();
    let rep = disorder_replacement_error(&m, &alpha, &rec, &v, 2, 0.1).unwrap();
    assert!(rep.error < 1e-12, "{}", rep.error);
    assert_eq!(rep.defects, vec![0.0, 0.0]);
}

#[test]
fn replacement_error_decreases_with_lattice_size() {
    let v = PotentialGrid::constant(1, &[0.4, -0.3]).unwrap();
    let mean_error = |side: usize| -> f64 {
        let m = model(side, 0.7, 0.5);
        let errors: Vec<f64> = (0..30u64)
            .into_par_iter()
            .map(|s| {
                let alpha = sample_disorder(&m.params, 800 + s);
                let mut rng = replica_rng(900 + s, 0);
                let sigma = SpinConfig::sample_with_mean(&vec![0.2; side], &m.kernel, &mut rng).unwrap();
                let opts = SimOptions { dt_rec: 0.5, snapshot_mesh: Some(1), record_events: true };
                let rec = kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma, Some(&v), &mut rng, &opts).unwrap();
                disorder_replacement_error(&m, &alpha, &rec, &v, 2, 0.1).unwrap().error
            })
            .collect();
        errors.iter().sum::<f64>() / 30.0
    };
    let (a, b, c) = (mean_error(32), mean_error(64), mean_error(128));
    assert!(a > b && b > c, "{a} {b} {c}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detailed_balance_holds(seed in any::<u64>(), theta in 0.0f64..2.0, beta in 0.2f64..3.0) {
        let kernel = KernelSpec::new(KernelProfile::RaisedCosine);
        let mut params = ModelParams::new(1, 16, theta, colors(), 1.0, kernel).unwrap();
        params.beta = beta;
        let m = Model::new(params).unwrap();
        let alpha = sample_disorder(&m.params, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spins: Vec<i8> = (0..16).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let sigma = SpinConfig::new(spins, &m.kernel).unwrap();
        let x = rng.random_range(0..16);
        let mut flipped = sigma.clone();
        flipped.flip(x, &m.kernel);
        let lhs = flip_rate(&m, &sigma, x, &alpha) * (-beta * hamiltonian(&m, &sigma, &alpha)).exp();
        let rhs = flip_rate(&m, &flipped, x, &alpha) * (-beta * hamiltonian(&m, &flipped, &alpha)).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn constant_tilt_weights_agree(seed in any::<u64>(), v0 in -1.0f64..1.0, v1 in -1.0f64..1.0) {
        let m = model(8, 0.7, 0.2);
        let alpha = sample_disorder(&m.params, seed);
        let v = PotentialGrid::constant(1, &[v0, v1]).unwrap();
        let mut rng = replica_rng(seed, 1);
        let sigma = SpinConfig::sample_with_mean(&[0.0; 8], &m.kernel, &mut rng).unwrap();
        let rec = kac_glauber::glauber::simulate_with_rng(&m, &alpha, sigma, Some(&v), &mut rng, &SimOptions::default()).unwrap();
        let (eventwise, closed) = rn_log_weight(&m, &alpha, &rec, &v).unwrap();
        prop_assert!((eventwise - closed).abs() < 1e-9);
    }
}
