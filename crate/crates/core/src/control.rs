//! Tilting potentials that steer the flow along a prescribed path, and path mollification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::PeriodicKernel;
use crate::pde::{MeshModel, SolveOptions};
use crate::potential::PotentialGrid;
use crate::profile::{ColoredProfile, PathGrid};

pub const DEFAULT_MARGIN: f64 = 1e-3;

/// `V` with `m` the solution of the tilted flow:
/// `2V_i = log(m_i' cosh A_i + sqrt((m_i' cosh A_i)^2 + p_i^2 - m_i^2)) - A_i - log(p_i - m_i)`.
pub fn synthesize_v(mm: &MeshModel, path: &PathGrid, min_margin: f64) -> Result<PotentialGrid> {
    let colors = &mm.params.colors;
    let margin = path.margin(colors);
    if margin < min_margin {
        return Err(Error::Margin(format!("path margin {margin:.3e} below {min_margin:.3e}")));
    }
    let deriv = path.derivative()?;
    let grid = path.grid();
    let mut values = Vec::with_capacity(path.len());
    for (k, prof) in path.profiles.iter().enumerate() {
        let drives = mm.drives(prof)?;
        let slice = colors
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (0..grid.len())
                    .map(|x| {
                        let (a, m) = (drives[i][x], prof.values[i][x]);
                        let gc = deriv[k].values[i][x] * a.cosh();
                        let rest = c.p * c.p - m * m;
                        let root = (gc * gc + rest).sqrt();
                        let d = if gc >= 0.0 { gc + root } else { rest / (root - gc) };
                        0.5 * (d.ln() - a - (c.p - m).ln())
                    })
                    .collect()
            })
            .collect();
        values.push(slice);
    }
    PotentialGrid::new(path.times.clone(), grid, values)
}

#[derive(Clone, Debug)]
pub struct RoundTrip {
    pub sup_error: f64,
    pub potential: PotentialGrid,
    pub solution: PathGrid,
}

/// Synthesizes `V` for `path`, integrates the tilted flow from the path's start and
/// reports the sup-norm error over snapshots.
pub fn verify_roundtrip(mm: &MeshModel, path: &PathGrid, dt: f64) -> Result<RoundTrip> {
    let potential = synthesize_v(mm, path, DEFAULT_MARGIN)?;
    let mut local = mm.clone();
    local.params.horizon = path.horizon() - path.times[0];
    let solution = local.integrate(&path.profiles[0], Some(&potential), SolveOptions { dt, dt_rec: path.dt() })?;
    let sup_error = solution
        .profiles
        .iter()
        .zip(&path.profiles)
        .map(|(a, b)| a.sup_distance(b))
        .fold(0.0, f64::max);
    Ok(RoundTrip { sup_error, potential, solution })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierWidths {
    /// Temporal kernel support `[0, eps0]`.
    pub eps0: f64,
    /// Spatial bump radius.
    pub eps1: f64,
    /// Splice time: original path on `[0, eta]`, mollified path from `2 eta`.
    pub eta: f64,
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// `C^2` smoothstep: 0 below 0, 1 above 1.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

/// Normalized spatial bump of radius `eps1` on the mesh.
fn spatial_mollifier(mm: &MeshModel, eps1: f64) -> PeriodicKernel {
    let grid = mm.grid();
    let n = grid.side as f64;
    let mut table: Vec<f64> = (0..grid.len())
        .map(|z| {
            let r2: f64 = grid.signed_offset(z).iter().map(|&c| (c as f64 / n).powi(2)).sum();
            bump(r2.sqrt() / eps1)
        })
        .collect();
    let total: f64 = table.iter().sum();
    table.iter_mut().for_each(|v| *v /= total);
    PeriodicKernel::from_table(grid, table)
}

/// Space-time mollification of `path`, spliced with the original near `t = 0`.
pub fn mollify_path(mm: &MeshModel, path: &PathGrid, widths: MollifierWidths) -> Result<PathGrid> {
    let MollifierWidths { eps0, eps1, eta } = widths;
    let horizon = path.horizon() - path.times[0];
    if !(eps0 > 0.0 && eps1 > 0.0 && eps1 <= 0.5) {
        return Err(Error::Config(format!("mollifier widths must be positive (eps0 = {eps0}, eps1 = {eps1})")));
    }
    if !(eta > 0.0 && 3.0 * eta < horizon) {
        return Err(Error::Config(format!("splice time must lie in (0, T/3), got {eta}")));
    }
    if path.len() < 2 {
        return Err(Error::Invalid("mollification needs at least two snapshots".into()));
    }
    let h = path.dt();
    let extra = (eps0 / h).ceil().max(1.0) as usize;
    let mut ext = mm.clone();
    ext.params.horizon = extra as f64 * h;
    let sub = (h / 1e-3).ceil().max(1.0);
    let tail = ext.integrate(path.profiles.last().unwrap(), None, SolveOptions { dt: h / sub, dt_rec: h })?;
    let mut times = path.times.clone();
    let mut profiles = path.profiles.clone();
    for (k, p) in tail.profiles.into_iter().enumerate().skip(1) {
        times.push(path.horizon() + k as f64 * h);
        profiles.push(p);
    }
    let extended = PathGrid::new(times, profiles)?;

    let nq = 16usize.max(4 * extra);
    let nodes: Vec<f64> = (0..nq).map(|j| (j as f64 + 0.5) * eps0 / nq as f64).collect();
    let mut weights: Vec<f64> = nodes.iter().map(|&s| bump(2.0 * s / eps0 - 1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);
    let space = spatial_mollifier(mm, eps1);

    let t0 = path.times[0];
    let mut out = Vec::with_capacity(path.len());
    for (k, &t) in path.times.iter().enumerate() {
        let chi2 = smoothstep((t - t0 - eta) / eta);
        if chi2 == 0.0 {
            out.push(path.profiles[k].clone());
            continue;
        }
        let mut avg = ColoredProfile::zeros(path.grid(), path.n_colors());
        for (s, w) in nodes.iter().zip(&weights) {
            avg = avg.axpy(*w, &extended.at(t + s));
        }
        let smooth = ColoredProfile {
            grid: avg.grid,
            values: avg.values.iter().map(|v| space.convolve(v)).collect::<Result<_>>()?,
        };
        out.push(path.profiles[k].lerp(&smooth, chi2));
    }
    PathGrid::new(path.times.clone(), out)
}
