//! Continuous-time Glauber dynamics by thinning, with pathwise Girsanov accumulators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::potential::SpaceTimeField;
use crate::profile::{coarse_empirical, steps, ColoredProfile};
use crate::quadrature::gauss4_split;
use crate::spins::SpinConfig;

/// `(J_gamma * sigma)(x) + theta alpha(x)`.
pub fn local_drive(model: &Model, sigma: &SpinConfig, x: usize, alpha: &DisorderField) -> f64 {
    sigma.field(x) + model.params.theta * alpha.field(x)
}

/// Energy change `H(sigma^x) - H(sigma)` of flipping site `x`.
pub fn flip_energy(model: &Model, sigma: &SpinConfig, x: usize, alpha: &DisorderField) -> f64 {
    2.0 * sigma.spin(x) * local_drive(model, sigma, x, alpha)
}

/// Rate from an energy change: `1/(1 + exp(beta dH))`.
pub fn rate_from_energy(beta: f64, dh: f64) -> f64 {
    1.0 / (1.0 + (beta * dh).exp())
}

pub fn flip_rate(model: &Model, sigma: &SpinConfig, x: usize, alpha: &DisorderField) -> f64 {
    rate_from_energy(model.params.beta, flip_energy(model, sigma, x, alpha))
}

/// Tilted rate `exp(-2 sigma(x) V_{color(x)}(t, gamma x)) c_x(sigma)`.
pub fn perturbed_rate(
    model: &Model,
    sigma: &SpinConfig,
    x: usize,
    alpha: &DisorderField,
    v: &dyn SpaceTimeField,
    t: f64,
) -> f64 {
    let pos = sigma.lattice().position(x);
    let vx = v.value(alpha.color[x], t, &pos);
    (-2.0 * sigma.spin(x) * vx).exp() * flip_rate(model, sigma, x, alpha)
}

/// Full Hamiltonian `-1/2 sum J_gamma sigma sigma - theta sum alpha sigma`.
pub fn hamiltonian(model: &Model, sigma: &SpinConfig, alpha: &DisorderField) -> f64 {
    (0..sigma.len())
        .map(|x| -0.5 * sigma.spin(x) * sigma.field(x) - model.params.theta * alpha.field(x) * sigma.spin(x))
        .sum()
}

/// A potential sampled at lattice sites: `values[i][x] = V_i(t, gamma x)`.
pub(crate) enum SitePotential<'a> {
    Constant(Vec<Vec<f64>>),
    Nodes { times: Vec<f64>, values: Vec<Vec<Vec<f64>>> },
    General(&'a dyn SpaceTimeField),
}

impl<'a> SitePotential<'a> {
    pub(crate) fn new(field: &'a dyn SpaceTimeField, model: &Model) -> Self {
        let lattice = model.params.lattice();
        let sample_all = |t: f64| (0..field.n_colors()).map(|i| field.sample(i, t, lattice)).collect::<Vec<_>>();
        if field.is_time_constant() {
            return SitePotential::Constant(sample_all(0.0));
        }
        let times = field.breakpoints();
        if times.is_empty() {
            return SitePotential::General(field);
        }
        let values = times.iter().map(|&t| sample_all(t)).collect();
        SitePotential::Nodes { times, values }
    }

    pub(crate) fn is_constant(&self) -> bool {
        matches!(self, SitePotential::Constant(_))
    }

    pub(crate) fn breaks(&self) -> &[f64] {
        match self {
            SitePotential::Nodes { times, .. } => times,
            _ => &[],
        }
    }

    fn bracket(times: &[f64], t: f64) -> (usize, usize, f64) {
        let n = times.len();
        if n == 1 || t <= times[0] {
            (0, 0, 0.0)
        } else if t >= times[n - 1] {
            (n - 1, n - 1, 0.0)
        } else {
            let k = times.partition_point(|&s| s <= t) - 1;
            (k, k + 1, (t - times[k]) / (times[k + 1] - times[k]))
        }
    }

    pub(crate) fn at(&self, color: usize, x: usize, t: f64, model: &Model) -> f64 {
        match self {
            SitePotential::Constant(v) => v[color][x],
            SitePotential::Nodes { times, values } => {
                let (a, b, w) = Self::bracket(times, t);
                (1.0 - w) * values[a][color][x] + w * values[b][color][x]
            }
            SitePotential::General(f) => f.value(color, t, &model.params.lattice().position(x)),
        }
    }

    /// `values[i][x]` at time `t`.
    pub(crate) fn all(&self, t: f64, model: &Model) -> Vec<Vec<f64>> {
        match self {
            SitePotential::Constant(v) => v.clone(),
            SitePotential::Nodes { times, values } => {
                let (a, b, w) = Self::bracket(times, t);
                values[a]
                    .iter()
                    .zip(&values[b])
                    .map(|(u, v)| u.iter().zip(v).map(|(p, q)| (1.0 - w) * p + w * q).collect())
                    .collect()
            }
            SitePotential::General(f) => {
                let lattice = model.params.lattice();
                (0..f.n_colors()).map(|i| f.sample(i, t, lattice)).collect()
            }
        }
    }

    /// `d/dt values[i][x]` at time `t`.
    pub(crate) fn all_dt(&self, t: f64, model: &Model) -> Vec<Vec<f64>> {
        match self {
            SitePotential::Constant(v) => v.iter().map(|c| vec![0.0; c.len()]).collect(),
            SitePotential::Nodes { times, values } => {
                let n = times.len();
                if n == 1 || t < times[0] || t >= times[n - 1] {
                    return values[0].iter().map(|c| vec![0.0; c.len()]).collect();
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let h = times[k + 1] - times[k];
                values[k]
                    .iter()
                    .zip(&values[k + 1])
                    .map(|(u, v)| u.iter().zip(v).map(|(p, q)| (q - p) / h).collect())
                    .collect()
            }
            SitePotential::General(f) => {
                let lattice = model.params.lattice();
                (0..f.n_colors())
                    .map(|i| (0..lattice.len()).map(|x| f.time_derivative(i, t, &lattice.position(x))).collect())
                    .collect()
            }
        }
    }
}

/// `sum_x (c_x^V - c_x)` for the current configuration and site potential values.
pub(crate) fn compensator_density(model: &Model, sigma: &SpinConfig, alpha: &DisorderField, v: &[Vec<f64>]) -> f64 {
    (0..sigma.len())
        .map(|x| {
            let c = flip_rate(model, sigma, x, alpha);
            c * ((-2.0 * sigma.spin(x) * v[alpha.color[x]][x]).exp() - 1.0)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Snapshot spacing.
    pub dt_rec: f64,
    /// Snapshot mesh side; must divide `L`. Defaults to `L`.
    pub snapshot_mesh: Option<usize>,
    /// Keep the initial spins and the list of accepted flips.
    pub record_events: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt_rec: 0.01, snapshot_mesh: None, record_events: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<ColoredProfile>,
    /// Accepted flips.
    pub events: u64,
    /// Proposed flips.
    pub candidates: u64,
    /// `sum over flips of -2 sigma_{t-}(x) V(t, gamma x, alpha(x))`.
    pub jump_term: f64,
    /// `int_0^T sum_x (c_x^V - c_x) ds`.
    pub compensator: f64,
    pub seed: u64,
    pub stream: u64,
    pub final_spins: Vec<i8>,
    pub initial_spins: Option<Vec<i8>>,
    /// Accepted flips as (time, site).
    pub event_log: Option<Vec<(f64, u32)>>,
}

impl TrajectoryRecord {
    /// Eventwise Girsanov log-weight `log dP^V/dP`.
    pub fn log_weight(&self) -> f64 {
        self.jump_term - self.compensator
    }

    pub fn path(&self) -> Result<crate::profile::PathGrid> {
        crate::profile::PathGrid::new(self.times.clone(), self.snapshots.clone())
    }
}

/// Generator for replica `stream` of master seed `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate(
    model: &Model,
    alpha: &DisorderField,
    sigma0: SpinConfig,
    v: Option<&dyn SpaceTimeField>,
    seed: u64,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    let mut rng = replica_rng(seed, 0);
    let mut rec = simulate_with_rng(model, alpha, sigma0, v, &mut rng, opts)?;
    rec.seed = seed;
    Ok(rec)
}

pub fn simulate_with_rng(
    model: &Model,
    alpha: &DisorderField,
    mut sigma: SpinConfig,
    v: Option<&dyn SpaceTimeField>,
    rng: &mut ChaCha8Rng,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    let params = &model.params;
    let lattice = params.lattice();
    if sigma.lattice() != lattice || alpha.lattice != lattice {
        return Err(Error::Mismatch("initial spins or disorder not on the configured lattice".into()));
    }
    let horizon = params.horizon;
    let n_snap = steps(horizon, opts.dt_rec)?;
    let mesh = opts.snapshot_mesh.unwrap_or(lattice.side);
    let v = v.filter(|f| {
        let sup = f.sup_abs();
        sup != 0.0 || !sup.is_finite()
    });
    let bound = match v {
        Some(f) => {
            if f.n_colors() != params.n_colors() {
                return Err(Error::Mismatch("potential color count differs from model".into()));
            }
            let sup = f.sup_abs();
            if !sup.is_finite() {
                return Err(Error::Invalid("potential is not finite".into()));
            }
            (2.0 * sup).exp()
        }
        None => 1.0,
    };
    let sites = SitePotential::new_opt(v, model);
    if let Some(s) = &sites {
        if s.all(0.0, model).iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("potential is not finite".into()));
        }
    }
    let n = lattice.len();
    let total_rate = bound * n as f64;
    let stream = rng.get_stream();

    let mut rec = TrajectoryRecord {
        horizon,
        times: Vec::with_capacity(n_snap + 1),
        snapshots: Vec::with_capacity(n_snap + 1),
        events: 0,
        candidates: 0,
        jump_term: 0.0,
        compensator: 0.0,
        seed: 0,
        stream,
        final_spins: Vec::new(),
        initial_spins: opts.record_events.then(|| sigma.spins().to_vec()),
        event_log: opts.record_events.then(Vec::new),
    };

    let mut next_snap = 0usize;
    let mut record_until = |t: f64, sigma: &SpinConfig, rec: &mut TrajectoryRecord, inclusive: bool| -> Result<()> {
        while next_snap <= n_snap {
            let ts = next_snap as f64 * opts.dt_rec;
            if ts < t || (inclusive && ts <= t) {
                rec.times.push(ts);
                rec.snapshots.push(coarse_empirical(sigma, alpha, mesh)?);
                next_snap += 1;
            } else {
                break;
            }
        }
        Ok(())
    };

    let mut comp_density = match &sites {
        Some(s) if s.is_constant() => compensator_density(model, &sigma, alpha, &s.all(0.0, model)),
        _ => 0.0,
    };
    let mut last = 0.0;
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / total_rate;
        if t > horizon {
            break;
        }
        rec.candidates += 1;
        let x = rng.random_range(0..n);
        let c = flip_rate(model, &sigma, x, alpha);
        let (cv, vx) = match &sites {
            Some(s) => {
                let vx = s.at(alpha.color[x], x, t, model);
                ((-2.0 * sigma.spin(x) * vx).exp() * c, vx)
            }
            None => (c, 0.0),
        };
        let accept: f64 = rng.random();
        if accept * bound >= cv {
            continue;
        }
        record_until(t, &sigma, &mut rec, false)?;
        if let Some(s) = &sites {
            rec.compensator += interval_compensator(model, alpha, &sigma, s, last, t, comp_density);
            rec.jump_term += -2.0 * sigma.spin(x) * vx;
        }
        sigma.flip(x, &model.kernel);
        rec.events += 1;
        last = t;
        if let Some(log) = rec.event_log.as_mut() {
            log.push((t, x as u32));
        }
        if let Some(s) = &sites {
            if s.is_constant() {
                comp_density = compensator_density(model, &sigma, alpha, &s.all(0.0, model));
            }
        }
    }
    if let Some(s) = &sites {
        rec.compensator += interval_compensator(model, alpha, &sigma, s, last, horizon, comp_density);
    }
    record_until(horizon, &sigma, &mut rec, true)?;
    rec.final_spins = sigma.spins().to_vec();
    Ok(rec)
}

impl<'a> SitePotential<'a> {
    fn new_opt(v: Option<&'a dyn SpaceTimeField>, model: &Model) -> Option<Self> {
        v.map(|f| SitePotential::new(f, model))
    }
}

fn interval_compensator(
    model: &Model,
    alpha: &DisorderField,
    sigma: &SpinConfig,
    sites: &SitePotential,
    a: f64,
    b: f64,
    constant_density: f64,
) -> f64 {
    if sites.is_constant() {
        return constant_density * (b - a);
    }
    gauss4_split(a, b, sites.breaks(), |s| compensator_density(model, sigma, alpha, &sites.all(s, model)))
}

/// Runs `replicas` independent trajectories; replica `r` uses stream `r` of `seed`
/// and draws its initial spins from `init` before simulating.
pub fn simulate_replicas<F>(
    model: &Model,
    alpha: &DisorderField,
    init: F,
    v: Option<&dyn SpaceTimeField>,
    seed: u64,
    replicas: usize,
    opts: &SimOptions,
) -> Result<Vec<TrajectoryRecord>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<SpinConfig> + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let sigma0 = init(&mut rng)?;
            let mut rec = simulate_with_rng(model, alpha, sigma0, v, &mut rng, opts)?;
            rec.seed = seed;
            Ok(rec)
        })
        .collect()
}
