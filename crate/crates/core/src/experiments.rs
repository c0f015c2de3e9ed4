//! Experiment drivers: hydrodynamic convergence, tilted importance sampling, diagnostics.
//!
//! Every driver is a pure function of its configuration and master seed; replica `r` of a
//! level draws all its randomness from stream `r` of a seed derived from the master seed.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_disorder, DisorderField};
use crate::error::{Error, Result};
use crate::girsanov::{disorder_replacement_error, martingale_diagnostic, MartingaleReport};
use crate::glauber::{replica_rng, simulate_with_rng, SimOptions};
use crate::measures::{delta_diagnostic, path_distance, TestBank, DEFAULT_TRUNCATION};
use crate::model::Model;
use crate::params::ModelParams;
use crate::pde::{MeshModel, SolveOptions};
use crate::potential::{FnField, PotentialGrid, SpaceTimeField};
use crate::profile::ColoredProfile;
use crate::rate::{i_m0, k_v_path, Cost};
use crate::spins::SpinConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SplitMix64 step, used to derive independent seeds from a master seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn one() -> f64 {
    1.0
}

fn one_i() -> i64 {
    1
}

/// Initial magnetization profile `m0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `offset + amplitude cos(2 pi frequency r_1)`.
    Cosine {
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one_i")]
        frequency: i64,
    },
}

impl InitialProfile {
    pub fn eval(&self, r: &[f64]) -> f64 {
        match *self {
            InitialProfile::Constant { value } => value,
            InitialProfile::Cosine { amplitude, offset, frequency } => {
                offset + amplitude * (2.0 * PI * frequency as f64 * r[0]).cos()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bound = match *self {
            InitialProfile::Constant { value } => value.abs(),
            InitialProfile::Cosine { amplitude, offset, .. } => offset.abs() + amplitude.abs(),
        };
        if !(bound <= 1.0) {
            return Err(Error::Config(format!("initial profile exceeds 1 in magnitude ({bound})")));
        }
        Ok(())
    }
}

/// `G_i(r) = amplitude cos(2 pi frequency r_1)` (or sine) on the listed colors, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    #[serde(default)]
    pub frequency: i64,
    #[serde(default)]
    pub sine: bool,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Colors carrying the function; all colors when absent.
    #[serde(default)]
    pub colors: Option<Vec<usize>>,
}

impl TestFunction {
    pub fn field(&self, n_colors: usize) -> FnField {
        let tf = self.clone();
        FnField::stationary(n_colors, self.amplitude.abs(), move |i, r| {
            if tf.colors.as_ref().is_some_and(|c| !c.contains(&i)) {
                return 0.0;
            }
            let phase = 2.0 * PI * tf.frequency as f64 * r[0];
            tf.amplitude * if tf.sine { phase.sin() } else { phase.cos() }
        })
    }
}

fn default_dt_rec() -> f64 {
    0.01
}

fn default_pde_dt() -> f64 {
    1e-3
}

fn default_hydro_mesh() -> usize {
    256
}

fn default_tilt_mesh() -> usize {
    64
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroConfig {
    pub model: ModelParams,
    pub sides: Vec<usize>,
    pub replicas: usize,
    pub initial: InitialProfile,
    pub tests: Vec<TestFunction>,
    #[serde(default = "default_dt_rec")]
    pub dt_rec: f64,
    #[serde(default = "default_hydro_mesh")]
    pub pde_mesh: usize,
    #[serde(default = "default_pde_dt")]
    pub pde_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroLevel {
    pub side: usize,
    /// `deviations[j][r]`: test function `j`, replica `r`.
    pub deviations: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroReport {
    pub version: String,
    pub seed: u64,
    pub config: HydroConfig,
    pub levels: Vec<HydroLevel>,
}

fn initial_spins(model: &Model, m0: &InitialProfile, rng: &mut rand_chacha::ChaCha8Rng) -> Result<SpinConfig> {
    let lattice = model.params.lattice();
    let mean: Vec<f64> = (0..lattice.len()).map(|x| m0.eval(&lattice.position(x))).collect();
    SpinConfig::sample_with_mean(&mean, &model.kernel, rng)
}

/// For each `L`, samples disorder and initial spins per replica, simulates, and records
/// `sup_t |<pi_t, G> - <m(t), G>|` against the colored flow.
pub fn run_hydrodynamic_convergence(config: &HydroConfig, seed: u64) -> Result<HydroReport> {
    config.model.validate()?;
    config.initial.validate()?;
    if config.replicas == 0 || config.sides.is_empty() || config.tests.is_empty() {
        return Err(Error::Config("need replicas, lattice sides and test functions".into()));
    }
    let params = &config.model;
    let nc = params.n_colors();
    let fields: Vec<FnField> = config.tests.iter().map(|t| t.field(nc)).collect();
    let mm = MeshModel::new(params, config.pde_mesh)?;
    let m0 = ColoredProfile::proportional(mm.grid(), &params.colors, |r| config.initial.eval(r));
    let solution = mm.integrate(&m0, None, SolveOptions { dt: config.pde_dt, dt_rec: config.dt_rec })?;
    let reference: Vec<Vec<f64>> = fields
        .iter()
        .map(|g| solution.times.iter().zip(&solution.profiles).map(|(&t, p)| p.pair(g, t)).collect())
        .collect::<Result<_>>()?;
    let mut levels = Vec::new();
    for &side in &config.sides {
        let model = Model::new(params.with_side(side))?;
        let level_seed = derive_seed(seed, side as u64);
        let opts = SimOptions { dt_rec: config.dt_rec, snapshot_mesh: None, record_events: false };
        let per_replica: Vec<Vec<f64>> = (0..config.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(level_seed, r);
                let alpha = sample_disorder(&model.params, derive_seed(level_seed, 1 << 32 | r));
                let sigma0 = initial_spins(&model, &config.initial, &mut rng)?;
                let rec = simulate_with_rng(&model, &alpha, sigma0, None, &mut rng, &opts)?;
                if rec.times.len() != solution.times.len() {
                    return Err(Error::Mismatch("snapshot grid differs from solution grid".into()));
                }
                fields
                    .iter()
                    .zip(&reference)
                    .map(|(g, refs)| {
                        rec.times.iter().zip(&rec.snapshots).zip(refs).try_fold(0.0f64, |m, ((&t, snap), r)| {
                            Ok(m.max((snap.pair(g, t)? - r).abs()))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let deviations: Vec<Vec<f64>> =
            (0..fields.len()).map(|j| per_replica.iter().map(|d| d[j]).collect()).collect();
        levels.push(HydroLevel {
            side,
            medians: deviations.iter().map(|d| median(d)).collect(),
            means: deviations.iter().map(|d| mean(d)).collect(),
            deviations,
        });
    }
    Ok(HydroReport { version: VERSION.into(), seed, config: config.clone(), levels })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TiltSpec {
    /// Space- and time-constant `V_i`.
    Constant { values: Vec<f64> },
    /// Potential table in CSV form.
    File { path: String },
}

impl TiltSpec {
    pub fn potential(&self, params: &ModelParams) -> Result<PotentialGrid> {
        let v = match self {
            TiltSpec::Constant { values } => PotentialGrid::constant(params.dim, values)?,
            TiltSpec::File { path } => crate::io::load_potential(path, params.dim)?,
        };
        if v.n_colors() != params.n_colors() {
            return Err(Error::Config("tilt color count differs from model".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltConfig {
    pub model: ModelParams,
    pub sides: Vec<usize>,
    pub replicas: usize,
    pub delta: f64,
    pub tilt: TiltSpec,
    pub initial: InitialProfile,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_dt_rec")]
    pub dt_rec: f64,
    #[serde(default = "default_tilt_mesh")]
    pub pde_mesh: usize,
    #[serde(default = "default_pde_dt")]
    pub pde_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltLevel {
    pub side: usize,
    pub replicas: usize,
    pub hits: usize,
    pub hit_fraction: f64,
    /// `log Q^` of the neighborhood probability under the untilted law.
    pub log_q: f64,
    /// `-gamma^d log Q^`.
    pub rate: f64,
    /// Standard error of `Q^` relative to `Q^`.
    pub relative_error: f64,
    pub mean_log_weight: f64,
    /// No replica reached the neighborhood.
    pub inconclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltReport {
    pub version: String,
    pub seed: u64,
    pub config: TiltConfig,
    /// `K_V` along the tilted flow.
    pub cost_kv: f64,
    /// Quenched cost of the tilted flow.
    pub cost_i0: Cost,
    pub levels: Vec<TiltLevel>,
}

/// Importance-sampling estimate of the probability that the untilted dynamics stays within
/// `delta` of the tilted flow, sampled under the tilt and reweighted by the eventwise log-weight.
pub fn run_tilted_estimate(config: &TiltConfig, seed: u64) -> Result<TiltReport> {
    config.model.validate()?;
    config.initial.validate()?;
    if config.replicas == 0 || config.sides.is_empty() || !(config.delta >= 0.0) {
        return Err(Error::Config("need replicas, lattice sides and delta >= 0".into()));
    }
    let params = &config.model;
    let v = config.tilt.potential(params)?;
    let mm = MeshModel::new(params, config.pde_mesh)?;
    let m0: Vec<f64> = (0..mm.grid().len()).map(|c| config.initial.eval(&mm.grid().position(c))).collect();
    let start = ColoredProfile::proportional(mm.grid(), &params.colors, |r| config.initial.eval(r));
    let target = mm.integrate(&start, Some(&v), SolveOptions { dt: config.pde_dt, dt_rec: config.dt_rec })?;
    let cost_kv = k_v_path(&mm, &target, &v)?;
    let cost_i0 = i_m0(&mm, &target, &m0)?.value;
    let bank = TestBank::trigonometric(params.dim, config.truncation);
    let mut levels = Vec::new();
    for &side in &config.sides {
        let model = Model::new(params.with_side(side))?;
        let level_seed = derive_seed(seed, side as u64);
        let opts = SimOptions { dt_rec: config.dt_rec, snapshot_mesh: None, record_events: false };
        let outcomes: Vec<(bool, f64)> = (0..config.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(level_seed, r);
                let alpha = sample_disorder(&model.params, derive_seed(level_seed, 1 << 32 | r));
                let sigma0 = initial_spins(&model, &config.initial, &mut rng)?;
                let rec = simulate_with_rng(&model, &alpha, sigma0, Some(&v), &mut rng, &opts)?;
                let hit = path_distance(&rec.path()?, &target, &bank)? < config.delta;
                Ok((hit, rec.log_weight()))
            })
            .collect::<Result<_>>()?;
        levels.push(summarize_tilt(side, model.gamma_d(), &outcomes));
    }
    Ok(TiltReport { version: VERSION.into(), seed, config: config.clone(), cost_kv, cost_i0, levels })
}

fn summarize_tilt(side: usize, gamma_d: f64, outcomes: &[(bool, f64)]) -> TiltLevel {
    let n = outcomes.len();
    let hits = outcomes.iter().filter(|o| o.0).count();
    let mean_log_weight = outcomes.iter().map(|o| o.1).sum::<f64>() / n as f64;
    let terms: Vec<f64> = outcomes.iter().map(|&(h, w)| if h { -w } else { f64::NEG_INFINITY }).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hits == 0 || !top.is_finite() {
        return TiltLevel {
            side,
            replicas: n,
            hits,
            hit_fraction: 0.0,
            log_q: f64::NEG_INFINITY,
            rate: f64::INFINITY,
            relative_error: f64::INFINITY,
            mean_log_weight,
            inconclusive: true,
        };
    }
    // scaled terms e^{x - top} avoid underflow
    let scaled: Vec<f64> = terms.iter().map(|&x| (x - top).exp()).collect();
    let m = scaled.iter().sum::<f64>() / n as f64;
    let var = scaled.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let log_q = top + m.ln();
    TiltLevel {
        side,
        replicas: n,
        hits,
        hit_fraction: hits as f64 / n as f64,
        log_q,
        rate: -gamma_d * log_q,
        relative_error: (var / n as f64).sqrt() / m,
        mean_log_weight,
        inconclusive: false,
    }
}

fn default_replicas() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticSpec {
    ErgodicDefect {
        block_radius: usize,
        delta: f64,
        #[serde(default)]
        max: Option<f64>,
    },
    Delta {
        color: usize,
        test: TestFunction,
        #[serde(default = "default_replicas")]
        replicas: usize,
        #[serde(default)]
        max: Option<f64>,
    },
    Martingale {
        test: TestFunction,
        #[serde(default = "default_replicas")]
        replicas: usize,
    },
    Replacement {
        tilt: Vec<f64>,
        block_radius: usize,
        delta: f64,
        #[serde(default = "default_replicas")]
        replicas: usize,
        #[serde(default)]
        max: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub model: ModelParams,
    pub initial: InitialProfile,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSpec>,
}

impl DiagnosticsConfig {
    /// Ergodic defect, disorder-replacement, martingale and drift-replacement checks.
    pub fn default_suite(model: ModelParams) -> Self {
        let nc = model.n_colors();
        let tilt = (0..nc).map(|i| if i % 2 == 0 { -0.25 } else { 0.25 }).collect();
        let test = TestFunction { frequency: 1, sine: false, amplitude: 1.0, colors: None };
        DiagnosticsConfig {
            model,
            initial: InitialProfile::Constant { value: 0.0 },
            diagnostics: vec![
                DiagnosticSpec::ErgodicDefect { block_radius: 4, delta: 0.25, max: None },
                DiagnosticSpec::Delta { color: 0, test: test.clone(), replicas: 10, max: None },
                DiagnosticSpec::Martingale { test, replicas: 50 },
                DiagnosticSpec::Replacement { tilt, block_radius: 4, delta: 0.25, replicas: 10, max: None },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticResult {
    pub name: String,
    pub values: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub version: String,
    pub seed: u64,
    pub config: DiagnosticsConfig,
    pub results: Vec<DiagnosticResult>,
}

fn within(values: &[f64], max: Option<f64>) -> bool {
    values.iter().all(|v| v.is_finite() && max.is_none_or(|m| *v <= m))
}

fn replica_values<F>(model: &Model, alpha: &DisorderField, initial: &InitialProfile, seed: u64, replicas: usize, v: Option<&dyn SpaceTimeField>, f: F) -> Result<Vec<f64>>
where
    F: Fn(&crate::glauber::TrajectoryRecord) -> Result<f64> + Sync,
{
    let opts = SimOptions { dt_rec: model.params.horizon.max(1e-9), snapshot_mesh: Some(1), record_events: true };
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let sigma0 = initial_spins(model, initial, &mut rng)?;
            let rec = simulate_with_rng(model, alpha, sigma0, v, &mut rng, &opts)?;
            f(&rec)
        })
        .collect()
}

pub fn run_diagnostics(config: &DiagnosticsConfig, seed: u64) -> Result<DiagnosticsReport> {
    config.initial.validate()?;
    let model = Model::new(config.model.clone())?;
    let nc = model.params.n_colors();
    let alpha = sample_disorder(&model.params, derive_seed(seed, 0));
    let mut results = Vec::new();
    for (j, spec) in config.diagnostics.iter().enumerate() {
        let sub = derive_seed(seed, j as u64 + 1);
        let result = match spec {
            DiagnosticSpec::ErgodicDefect { block_radius, delta, max } => {
                let values = alpha.ergodic_defect(*block_radius, *delta);
                DiagnosticResult { name: "ergodic_defect".into(), pass: within(&values, *max), values }
            }
            DiagnosticSpec::Delta { color, test, replicas, max } => {
                let g = test.field(nc);
                let vals = replica_values(&model, &alpha, &config.initial, sub, *replicas, None, |rec| {
                    delta_diagnostic(&model, &alpha, rec, *color, &g)
                })?;
                let values = vec![mean(&vals), median(&vals)];
                DiagnosticResult { name: "delta".into(), pass: within(&values, *max), values }
            }
            DiagnosticSpec::Martingale { test, replicas } => {
                let g = test.field(nc);
                let init = config.initial.clone();
                let m0 = move |r: &[f64]| init.eval(r);
                let MartingaleReport { mean, std_error, variance, mean_qv, .. } =
                    martingale_diagnostic(&model, &alpha, &g, &m0, *replicas, sub)?;
                let values = vec![mean, std_error, variance, mean_qv];
                let pass = values.iter().all(|v| v.is_finite()) && mean.abs() <= 3.0 * std_error.max(1e-300);
                DiagnosticResult { name: "martingale".into(), values, pass }
            }
            DiagnosticSpec::Replacement { tilt, block_radius, delta, replicas, max } => {
                let v = PotentialGrid::constant(model.params.dim, tilt)?;
                let mut defects = Vec::new();
                let vals = replica_values(&model, &alpha, &config.initial, sub, *replicas, Some(&v), |rec| {
                    Ok(disorder_replacement_error(&model, &alpha, rec, &v, *block_radius, *delta)?.error)
                })?;
                defects.extend(alpha.ergodic_defect(*block_radius, *delta));
                let mut values = vec![mean(&vals), median(&vals)];
                values.extend(defects);
                DiagnosticResult { name: "disorder_replacement".into(), pass: within(&values[..2], *max), values }
            }
        };
        results.push(result);
    }
    Ok(DiagnosticsReport { version: VERSION.into(), seed, config: config.clone(), results })
}
