//! Test-function bank, the weak metric on colored measures and its path version.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::glauber::{SitePotential, TrajectoryRecord};
use crate::model::Model;
use crate::potential::SpaceTimeField;
use crate::profile::{ColoredProfile, PathGrid};
use crate::quadrature::gauss4_split;
use crate::replay::replay;
use crate::torus::Torus;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub freq: Vec<i64>,
    pub sine: bool,
}

impl TrigMode {
    pub fn eval(&self, r: &[f64]) -> f64 {
        let phase: f64 = 2.0 * PI * self.freq.iter().zip(r).map(|(&n, &x)| n as f64 * x).sum::<f64>();
        if self.sine {
            phase.sin()
        } else {
            phase.cos()
        }
    }
}

/// Real trigonometric functions `H_0 = 1, H_1, ..., H_K`, ordered by total frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBank {
    pub dim: usize,
    pub modes: Vec<TrigMode>,
}

pub const DEFAULT_TRUNCATION: usize = 16;

fn frequencies_with_norm(dim: usize, s: i64) -> Vec<Vec<i64>> {
    if dim == 1 {
        return vec![vec![s]];
    }
    let mut out = Vec::new();
    for first in -s..=s {
        let rest = s - first.abs();
        for mut tail in all_with_norm(dim - 1, rest) {
            let mut v = vec![first];
            v.append(&mut tail);
            out.push(v);
        }
    }
    // keep one of each +-n pair: first nonzero component positive
    out.retain(|v| v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0));
    out.sort();
    out
}

fn all_with_norm(dim: usize, s: i64) -> Vec<Vec<i64>> {
    if dim == 1 {
        return if s == 0 { vec![vec![0]] } else { vec![vec![-s], vec![s]] };
    }
    let mut out = Vec::new();
    for first in -s..=s {
        for mut tail in all_with_norm(dim - 1, s - first.abs()) {
            let mut v = vec![first];
            v.append(&mut tail);
            out.push(v);
        }
    }
    out
}

impl TestBank {
    /// Bank with modes `H_0..=H_K`.
    pub fn trigonometric(dim: usize, truncation: usize) -> Self {
        let mut modes = vec![TrigMode { freq: vec![0; dim], sine: false }];
        let mut s = 1;
        while modes.len() <= truncation {
            for freq in frequencies_with_norm(dim, s) {
                modes.push(TrigMode { freq: freq.clone(), sine: false });
                modes.push(TrigMode { freq, sine: true });
            }
            s += 1;
        }
        modes.truncate(truncation + 1);
        TestBank { dim, modes }
    }

    pub fn truncation(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn eval(&self, k: usize, r: &[f64]) -> f64 {
        self.modes[k].eval(r)
    }

    /// `pairings[i][k] = <m_i, H_k>`.
    pub fn pairings(&self, m: &ColoredProfile) -> Result<Vec<Vec<f64>>> {
        if m.grid.dim != self.dim {
            return Err(Error::Mismatch(format!("profile dimension {} vs bank dimension {}", m.grid.dim, self.dim)));
        }
        let samples = self.samples(m.grid);
        Ok((0..m.n_colors())
            .map(|i| samples.iter().map(|h| m.pair_color_sampled(i, h)).collect())
            .collect())
    }

    fn samples(&self, grid: Torus) -> Vec<Vec<f64>> {
        let pos: Vec<Vec<f64>> = (0..grid.len()).map(|c| grid.position(c)).collect();
        self.modes.iter().map(|m| pos.iter().map(|r| m.eval(r)).collect()).collect()
    }
}

fn weighted_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| {
            u.iter()
                .zip(v)
                .enumerate()
                .map(|(k, (x, y))| (x - y).abs() * 0.5f64.powi(k as i32))
                .sum::<f64>()
        })
        .sum()
}

/// `sum_i sum_{k<=K} 2^{-k} |<mu_i - nu_i, H_k>|`.
pub fn rho(mu: &ColoredProfile, nu: &ColoredProfile, bank: &TestBank) -> Result<f64> {
    if mu.n_colors() != nu.n_colors() {
        return Err(Error::Mismatch("color counts differ".into()));
    }
    Ok(weighted_gap(&bank.pairings(mu)?, &bank.pairings(nu)?))
}

/// Sup over the snapshots of `mu` of the colored `rho`; `nu` is interpolated linearly in time if its grid differs.
pub fn path_distance(mu: &PathGrid, nu: &PathGrid, bank: &TestBank) -> Result<f64> {
    let (t_mu, t_nu) = (mu.horizon(), nu.horizon());
    if (t_mu - t_nu).abs() > 1e-9 * t_mu.max(1.0) || (mu.times[0] - nu.times[0]).abs() > 1e-9 {
        return Err(Error::Mismatch(format!("paths cover different time ranges ({t_mu} vs {t_nu})")));
    }
    if mu.n_colors() != nu.n_colors() {
        return Err(Error::Mismatch("color counts differ".into()));
    }
    let pm: Vec<_> = mu.profiles.iter().map(|p| bank.pairings(p)).collect::<Result<_>>()?;
    let pn: Vec<_> = nu.profiles.iter().map(|p| bank.pairings(p)).collect::<Result<_>>()?;
    let same_grid = mu.times.len() == nu.times.len()
        && mu.times.iter().zip(&nu.times).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    let mut sup: f64 = 0.0;
    for (k, &t) in mu.times.iter().enumerate() {
        let other = if same_grid { pn[k].clone() } else { interpolate_pairings(&nu.times, &pn, t) };
        sup = sup.max(weighted_gap(&pm[k], &other));
    }
    Ok(sup)
}

fn interpolate_pairings(times: &[f64], p: &[Vec<Vec<f64>>], t: f64) -> Vec<Vec<f64>> {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return p[0].clone();
    }
    if t >= times[n - 1] {
        return p[n - 1].clone();
    }
    let k = (times.partition_point(|&s| s <= t) - 1).min(n - 2);
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    p[k].iter()
        .zip(&p[k + 1])
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect())
        .collect()
}

/// Whether the snapshot path of `record` lies strictly within `delta` of `target`.
pub fn in_neighborhood(record: &TrajectoryRecord, target: &PathGrid, delta: f64, bank: &TestBank) -> Result<bool> {
    Ok(path_distance(&record.path()?, target, bank)? < delta)
}

/// `int_0^T |<lambda_i(alpha) - p_i lambda, G_i(s) tanh(beta(pi_s * J + a_i theta))>| ds`,
/// with Lebesgue measure discretized on the lattice.
pub fn delta_diagnostic(
    model: &Model,
    alpha: &DisorderField,
    record: &TrajectoryRecord,
    color: usize,
    g: &dyn SpaceTimeField,
) -> Result<f64> {
    if color >= alpha.n_colors() {
        return Err(Error::Invalid(format!("color {color} out of range")));
    }
    let sites = SitePotential::new(g, model);
    let breaks = sites.breaks().to_vec();
    let (a, p) = (alpha.colors[color].a, alpha.colors[color].p);
    let (beta, theta) = (model.params.beta, model.params.theta);
    let gd = model.gamma_d();
    let mut total = 0.0;
    replay(model, record, |t0, t1, sigma| {
        total += gauss4_split(t0, t1, &breaks, |s| {
            let gs = sites.all(s, model);
            let sum: f64 = (0..sigma.len())
                .map(|x| {
                    let ind = if alpha.color[x] == color { 1.0 } else { 0.0 };
                    (ind - p) * gs[color][x] * (beta * (sigma.field(x) + a * theta)).tanh()
                })
                .sum();
            (gd * sum).abs()
        });
    })?;
    Ok(total)
}
