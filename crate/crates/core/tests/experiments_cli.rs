use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kac_glauber::experiments::*;
use kac_glauber::io::{read_path_csv, read_potential_csv, write_path_csv, write_potential_csv};
use kac_glauber::rate::Cost;
use kac_glauber::{Color, KernelProfile, KernelSpec, ModelParams, PathGrid, PotentialGrid, Torus};

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn model(side: usize, theta: f64, horizon: f64, colors: Vec<Color>) -> ModelParams {
    let kernel = KernelSpec::new(KernelProfile::PeriodicGaussian { width: 0.1 });
    ModelParams::new(1, side, theta, colors, horizon, kernel).unwrap()
}

fn sym() -> Vec<Color> {
    vec![Color { a: 1.0, p: 0.5 }, Color { a: -1.0, p: 0.5 }]
}

fn cos_test(colors: Option<Vec<usize>>) -> TestFunction {
    TestFunction { frequency: 1, sine: false, amplitude: 1.0, colors }
}

fn read(name: &str) -> String {
    std::fs::read_to_string(format!("{CONFIG_DIR}/{name}")).unwrap()
}

#[test]
fn shipped_configs_parse() {
    ModelParams::from_toml_str(&read("model.toml")).unwrap();
    let hydro: HydroConfig = toml::from_str(&read("hydro.toml")).unwrap();
    assert_eq!(hydro.dt_rec, 0.01);
    assert_eq!(hydro.tests[1].colors, Some(vec![0]));
    let tilt: TiltConfig = toml::from_str(&read("tilt.toml")).unwrap();
    assert_eq!(tilt.truncation, 16);
    assert_eq!(tilt.tilt, TiltSpec::Constant { values: vec![-0.5, 0.5] });
    let diag: DiagnosticsConfig = toml::from_str(&read("diagnostics.toml")).unwrap();
    assert_eq!(diag.diagnostics.len(), 2);
}

#[test]
fn seed_derivation_separates_streams() {
    assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| derive_seed(7, t)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
}

#[test]
fn initial_profiles() {
    let c = InitialProfile::Cosine { amplitude: 0.5, offset: 0.1, frequency: 2 };
    assert!((c.eval(&[0.0]) - 0.6).abs() < 1e-15);
    assert!((c.eval(&[0.25]) - (0.1 - 0.5)).abs() < 1e-15);
    assert!(InitialProfile::Cosine { amplitude: 0.8, offset: 0.3, frequency: 1 }.validate().is_err());
    assert!(InitialProfile::Constant { value: -1.2 }.validate().is_err());
    assert!(InitialProfile::Constant { value: 1.0 }.validate().is_ok());
}

#[test]
fn uncolored_hydro_deviation_shrinks() {
    let config = HydroConfig {
        model: model(64, 0.0, 1.0, vec![Color { a: 0.0, p: 1.0 }]),
        sides: vec![64, 128, 256],
        replicas: 40,
        initial: InitialProfile::Cosine { amplitude: 0.5, offset: 0.0, frequency: 1 },
        tests: vec![cos_test(None)],
        dt_rec: 0.01,
        pde_mesh: 256,
        pde_dt: 1e-3,
    };
    let report = run_hydrodynamic_convergence(&config, 41).unwrap();
    let means: Vec<f64> = report.levels.iter().map(|l| l.means[0]).collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    let scaled: Vec<f64> = report.levels.iter().map(|l| l.means[0] * (l.side as f64).sqrt()).collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo <= 2.0, "{scaled:?}");
}

#[test]
fn degenerate_color_deviations_coincide() {
    let config = HydroConfig {
        model: model(64, 0.5, 0.5, vec![Color { a: 1.0, p: 1.0 }, Color { a: -1.0, p: 0.0 }]),
        sides: vec![64],
        replicas: 8,
        initial: InitialProfile::Cosine { amplitude: 0.4, offset: 0.0, frequency: 1 },
        tests: vec![cos_test(None), cos_test(Some(vec![0]))],
        dt_rec: 0.01,
        pde_mesh: 64,
        pde_dt: 1e-3,
    };
    let report = run_hydrodynamic_convergence(&config, 42).unwrap();
    let level = &report.levels[0];
    for (a, b) in level.deviations[0].iter().zip(&level.deviations[1]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn hydro_report_is_reproducible() {
    let config: HydroConfig = toml::from_str(&read("hydro.toml")).unwrap();
    let small = HydroConfig { sides: vec![32], replicas: 4, ..config };
    let a = serde_json::to_string(&run_hydrodynamic_convergence(&small, 5).unwrap()).unwrap();
    let b = serde_json::to_string(&run_hydrodynamic_convergence(&small, 5).unwrap()).unwrap();
    let c = serde_json::to_string(&run_hydrodynamic_convergence(&small, 6).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.contains(VERSION));
}

fn tilt_config(values: Vec<f64>, delta: f64, sides: Vec<usize>, replicas: usize) -> TiltConfig {
    TiltConfig {
        model: model(16, 1.0, 1.0, sym()),
        sides,
        replicas,
        delta,
        tilt: TiltSpec::Constant { values },
        initial: InitialProfile::Constant { value: 0.0 },
        truncation: 16,
        dt_rec: 0.01,
        pde_mesh: 64,
        pde_dt: 1e-3,
    }
}

#[test]
fn untilted_estimate_is_free() {
    let report = run_tilted_estimate(&tilt_config(vec![0.0, 0.0], 0.35, vec![64, 256], 100), 43).unwrap();
    assert_eq!(report.cost_kv, 0.0);
    assert!(report.cost_i0.value() < 1e-8);
    for level in &report.levels {
        assert_eq!(level.mean_log_weight, 0.0);
        assert!((level.log_q - level.hit_fraction.ln()).abs() < 1e-12);
    }
    let (coarse, fine) = (&report.levels[0], &report.levels[1]);
    assert!(fine.hit_fraction >= coarse.hit_fraction && fine.hit_fraction > 0.95);
    assert!(fine.rate <= coarse.rate && fine.rate < 1e-3, "{} {}", coarse.rate, fine.rate);
}

#[test]
fn tilted_hit_fraction_grows() {
    let report = run_tilted_estimate(&tilt_config(vec![-0.5, 0.5], 0.35, vec![16, 32, 64], 600), 44).unwrap();
    assert!((report.cost_kv - 0.1759729).abs() < 1e-4);
    assert!(matches!(report.cost_i0, Cost::Finite(v) if (v - report.cost_kv).abs() < 1e-6));
    let hits: Vec<f64> = report.levels.iter().map(|l| l.hit_fraction).collect();
    assert!(hits[0] < hits[1] && hits[1] < hits[2], "{hits:?}");
}

#[test]
fn zero_hits_are_inconclusive() {
    let report = run_tilted_estimate(&tilt_config(vec![-0.5, 0.5], 1e-6, vec![16], 20), 45).unwrap();
    let level = &report.levels[0];
    assert_eq!(level.hits, 0);
    assert!(level.inconclusive);
}

#[test]
fn diagnostics_reports() {
    let m = model(64, 0.5, 0.5, sym());
    let empty = DiagnosticsConfig { model: m.clone(), initial: InitialProfile::Constant { value: 0.0 }, diagnostics: vec![] };
    assert!(run_diagnostics(&empty, 1).unwrap().results.is_empty());

    let suite = DiagnosticsConfig::default_suite(m);
    let a = run_diagnostics(&suite, 46).unwrap();
    assert_eq!(a.results.len(), 4);
    assert!(a.results.iter().all(|r| !r.values.is_empty() && r.values.iter().all(|v| v.is_finite())));
    let b = run_diagnostics(&suite, 46).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let shipped: DiagnosticsConfig = toml::from_str(&read("diagnostics.toml")).unwrap();
    let report = run_diagnostics(&shipped, 47).unwrap();
    assert_eq!(report.results.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["martingale", "delta"]);
}

#[test]
fn csv_round_trips() {
    let grid = Torus::new(2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let profiles = (0..4)
        .map(|_| {
            let values = (0..2).map(|_| (0..16).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
            kac_glauber::ColoredProfile::new(grid, values).unwrap()
        })
        .collect();
    let path = PathGrid::new(vec![0.0, 0.1, 0.2, 0.3], profiles).unwrap();
    let mut buf = Vec::new();
    write_path_csv(&path, &mut buf).unwrap();
    let back = read_path_csv(Cursor::new(buf), 2).unwrap();
    assert_eq!(back.times, path.times);
    assert_eq!(back.profiles, path.profiles);

    let v = PotentialGrid::new(
        vec![0.0, 0.5],
        grid,
        (0..2).map(|k| (0..2).map(|i| (0..16).map(|x| (k * 100 + i * 16 + x) as f64 * 0.01 - 0.3).collect()).collect()).collect(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_potential_csv(&v, &mut buf).unwrap();
    let back = read_potential_csv(Cursor::new(buf), 2).unwrap();
    assert_eq!(back.values, v.values);
    assert_eq!(back.times, v.times);
    assert!(read_path_csv(Cursor::new(b"t,x0,c0\nfoo".to_vec()), 1).is_err());
}
