//! Likelihood ratios between tilted and untilted dynamics, and the martingale check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::glauber::{simulate_replicas, SimOptions, SitePotential, TrajectoryRecord};
use crate::model::Model;
use crate::potential::SpaceTimeField;
use crate::quadrature::gauss4_split;
use crate::replay::{initial_config, replay};
use crate::spins::SpinConfig;

/// `tanh(beta((J_gamma * sigma)(x) + a_i theta))` for color `i`.
fn drive_tanh(model: &Model, sigma: &SpinConfig, x: usize, a: f64) -> f64 {
    (model.params.beta * (sigma.field(x) + a * model.params.theta)).tanh()
}

/// `gamma^{-d} F_V(lambda(alpha), pi(sigma))` as a site sum.
pub fn f_disorder_sites(model: &Model, alpha: &DisorderField, sigma: &SpinConfig, v: &[Vec<f64>]) -> f64 {
    (0..sigma.len())
        .map(|x| {
            let i = alpha.color[x];
            let th = drive_tanh(model, sigma, x, alpha.colors[i].a);
            let (s2, c2) = ((2.0 * v[i][x]).sinh(), (2.0 * v[i][x]).cosh() - 1.0);
            th * s2 + c2 - sigma.spin(x) * (th * c2 + s2)
        })
        .sum()
}

/// `gamma^{-d} [F_V(lambda(alpha), pi) - F_V((p_i lambda), pi)]` as a site sum.
fn f_replacement_sites(model: &Model, alpha: &DisorderField, sigma: &SpinConfig, v: &[Vec<f64>]) -> f64 {
    (0..sigma.len())
        .map(|x| {
            alpha
                .colors
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let ind = if alpha.color[x] == i { 1.0 } else { 0.0 };
                    let th = drive_tanh(model, sigma, x, c.a);
                    (ind - c.p) * (th * (2.0 * v[i][x]).sinh() + (2.0 * v[i][x]).cosh() - 1.0)
                })
                .sum::<f64>()
        })
        .sum()
}

fn own_color_sum(alpha: &DisorderField, sigma: &[i8], v: &[Vec<f64>]) -> f64 {
    sigma.iter().enumerate().map(|(x, &s)| s as f64 * v[alpha.color[x]][x]).sum()
}

/// Returns `(eventwise, closedform)` log-weights of `dP^V/dP` on `[0, T]`.
///
/// The eventwise value is read from the accumulators filled during simulation; the closed form
/// replays the event log.
pub fn rn_log_weight(
    model: &Model,
    alpha: &DisorderField,
    record: &TrajectoryRecord,
    v: &dyn SpaceTimeField,
) -> Result<(f64, f64)> {
    let sites = SitePotential::new(v, model);
    let breaks = sites.breaks().to_vec();
    let sigma0 = initial_config(model, record)?;
    let mut integral = 0.0;
    let last = replay(model, record, |a, b, sigma| {
        integral += gauss4_split(a, b, &breaks, |s| {
            let vs = sites.all(s, model);
            let dvs = sites.all_dt(s, model);
            own_color_sum(alpha, sigma.spins(), &dvs) + 0.5 * f_disorder_sites(model, alpha, sigma, &vs)
        });
    })?;
    let linear = own_color_sum(alpha, last.spins(), &sites.all(record.horizon, model))
        - own_color_sum(alpha, sigma0.spins(), &sites.all(0.0, model));
    Ok((record.log_weight(), linear - integral))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplacementReport {
    /// `|int_0^T [F_V(lambda(alpha), pi_s) - F_V((p_i lambda), pi_s)] ds|`.
    pub error: f64,
    pub delta: f64,
    pub block_radius: usize,
    /// Ergodic defect per color at `(delta, block_radius)`.
    pub defects: Vec<f64>,
}

pub fn disorder_replacement_error(
    model: &Model,
    alpha: &DisorderField,
    record: &TrajectoryRecord,
    v: &dyn SpaceTimeField,
    l: usize,
    delta: f64,
) -> Result<ReplacementReport> {
    let sites = SitePotential::new(v, model);
    let breaks = sites.breaks().to_vec();
    let mut integral = 0.0;
    replay(model, record, |a, b, sigma| {
        integral += gauss4_split(a, b, &breaks, |s| f_replacement_sites(model, alpha, sigma, &sites.all(s, model)));
    })?;
    Ok(ReplacementReport {
        error: (model.gamma_d() * integral).abs(),
        delta,
        block_radius: l,
        defects: alpha.ergodic_defect(l, delta),
    })
}

/// `(N(T), <N,N>(T))` for the test field `G` along one trajectory.
pub fn martingale_value(
    model: &Model,
    alpha: &DisorderField,
    record: &TrajectoryRecord,
    g: &dyn SpaceTimeField,
) -> Result<(f64, f64)> {
    let sites = SitePotential::new(g, model);
    let breaks = sites.breaks().to_vec();
    let sigma0 = initial_config(model, record)?;
    let (mut drift, mut qv) = (0.0, 0.0);
    let last = replay(model, record, |a, b, sigma| {
        drift += gauss4_split(a, b, &breaks, |s| {
            let gs = sites.all(s, model);
            let dgs = sites.all_dt(s, model);
            (0..sigma.len())
                .map(|x| {
                    let i = alpha.color[x];
                    let th = drive_tanh(model, sigma, x, alpha.colors[i].a);
                    sigma.spin(x) * (gs[i][x] - dgs[i][x]) - gs[i][x] * th
                })
                .sum()
        });
        qv += gauss4_split(a, b, &breaks, |s| {
            let gs = sites.all(s, model);
            (0..sigma.len())
                .map(|x| {
                    let i = alpha.color[x];
                    let th = drive_tanh(model, sigma, x, alpha.colors[i].a);
                    gs[i][x] * gs[i][x] * (1.0 - sigma.spin(x) * th)
                })
                .sum()
        });
    })?;
    let gd = model.gamma_d();
    let linear = own_color_sum(alpha, last.spins(), &sites.all(record.horizon, model))
        - own_color_sum(alpha, sigma0.spins(), &sites.all(0.0, model));
    Ok((gd * (linear + drift), 2.0 * gd * gd * qv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
    /// Mean predicted quadratic variation.
    pub mean_qv: f64,
}

/// Samples `N^G(T)` over independent replicas started from independent signs with mean `m0`.
pub fn martingale_diagnostic(
    model: &Model,
    alpha: &DisorderField,
    g: &dyn SpaceTimeField,
    m0: &(dyn Fn(&[f64]) -> f64 + Sync),
    replicas: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if replicas < 2 {
        return Err(Error::Invalid(format!("need at least 2 replicas, got {replicas}")));
    }
    let lattice = model.params.lattice();
    let mean: Vec<f64> = (0..lattice.len()).map(|x| m0(&lattice.position(x))).collect();
    let opts = SimOptions { dt_rec: model.params.horizon.max(1e-12), snapshot_mesh: Some(1), record_events: true };
    let opts = if model.params.horizon == 0.0 { SimOptions { dt_rec: 1.0, ..opts } } else { opts };
    let records = simulate_replicas(
        model,
        alpha,
        |rng| SpinConfig::sample_with_mean(&mean, &model.kernel, rng),
        None,
        seed,
        replicas,
        &opts,
    )?;
    let values: Vec<(f64, f64)> =
        records.par_iter().map(|r| martingale_value(model, alpha, r, g)).collect::<Result<_>>()?;
    let n = values.len() as f64;
    let m = values.iter().map(|v| v.0).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.0 - m).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_qv = values.iter().map(|v| v.1).sum::<f64>() / n;
    Ok(MartingaleReport { replicas, mean: m, std_error: (var / n).sqrt(), variance: var, mean_qv })
}
