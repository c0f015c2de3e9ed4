//! Colored grid functions, empirical measures and sampled paths.

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::params::Color;
use crate::potential::SpaceTimeField;
use crate::spins::SpinConfig;
use crate::torus::Torus;

/// Per-color densities `m_i` on the nodes of a periodic grid.
///
/// A density `w` on a grid with `n^d` nodes stands for the measure `n^{-d} sum_c w(c) delta_{c/n}`,
/// so profiles pair with test functions by the midpoint rule and empirical measures are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColoredProfile {
    pub grid: Torus,
    pub values: Vec<Vec<f64>>,
}

/// Colored empirical measure: densities `alpha_i(x) sigma(x)` on the lattice grid.
pub type ColoredEmpirical = ColoredProfile;

impl ColoredProfile {
    pub fn new(grid: Torus, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::Mismatch(format!("profile shape does not match grid of {} nodes", grid.len())));
        }
        Ok(ColoredProfile { grid, values })
    }

    pub fn zeros(grid: Torus, n_colors: usize) -> Self {
        ColoredProfile { grid, values: vec![vec![0.0; grid.len()]; n_colors] }
    }

    pub fn from_fn(grid: Torus, n_colors: usize, f: impl Fn(usize, &[f64]) -> f64) -> Self {
        let values = (0..n_colors)
            .map(|i| (0..grid.len()).map(|c| f(i, &grid.position(c))).collect())
            .collect();
        ColoredProfile { grid, values }
    }

    /// `m_i = p_i m0`.
    pub fn proportional(grid: Torus, colors: &[Color], m0: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, colors.len(), |i, r| colors[i].p * m0(r))
    }

    pub fn n_colors(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.len()];
        for v in &self.values {
            for (a, b) in m.iter_mut().zip(v) {
                *a += b;
            }
        }
        m
    }

    /// `<m_i, g>` for a function sampled on the grid nodes.
    pub fn pair_color_sampled(&self, i: usize, g: &[f64]) -> f64 {
        self.grid.cell_volume() * self.values[i].iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `sum_i <m_i, G_i(t, .)>`.
    pub fn pair(&self, field: &dyn SpaceTimeField, t: f64) -> Result<f64> {
        if field.n_colors() != self.n_colors() {
            return Err(Error::Mismatch(format!(
                "test field has {} colors, profile has {}",
                field.n_colors(),
                self.n_colors()
            )));
        }
        Ok((0..self.n_colors()).map(|i| self.pair_color_sampled(i, &field.sample(i, t, self.grid))).sum())
    }

    /// `min_i (p_i - ||m_i||_inf)`.
    pub fn margin(&self, colors: &[Color]) -> f64 {
        self.values
            .iter()
            .zip(colors)
            .map(|(v, c)| c.p - v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_box(&self, colors: &[Color], tol: f64) -> Result<()> {
        if colors.len() != self.n_colors() {
            return Err(Error::Mismatch("color count".into()));
        }
        let margin = self.margin(colors);
        if margin < -tol {
            return Err(Error::StepSize(format!("box exceeded by {:.3e}", -margin)));
        }
        Ok(())
    }

    pub fn sup_distance(&self, other: &ColoredProfile) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn axpy(&self, a: f64, other: &ColoredProfile) -> ColoredProfile {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| x + a * y).collect())
            .collect();
        ColoredProfile { grid: self.grid, values }
    }

    pub fn lerp(&self, other: &ColoredProfile, w: f64) -> ColoredProfile {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (1.0 - w) * x + w * y).collect())
            .collect();
        ColoredProfile { grid: self.grid, values }
    }
}

/// Exact colored empirical measure of `sigma`.
pub fn empirical(sigma: &SpinConfig, alpha: &DisorderField) -> Result<ColoredEmpirical> {
    coarse_empirical(sigma, alpha, sigma.lattice().side)
}

/// Cell of the mesh of side `m` nearest to lattice coordinate `x` on a lattice of side `l`.
fn nearest_cell(x: usize, l: usize, m: usize) -> usize {
    ((2 * x * m + l) / (2 * l)) % m
}

/// Block-averaged colored densities on a mesh of side `m` dividing `L`.
pub fn coarse_empirical(sigma: &SpinConfig, alpha: &DisorderField, m: usize) -> Result<ColoredProfile> {
    let lattice = sigma.lattice();
    if alpha.lattice != lattice {
        return Err(Error::Mismatch("disorder and spins live on different lattices".into()));
    }
    if m == 0 || !lattice.side.is_multiple_of(m) {
        return Err(Error::Config(format!("snapshot mesh {m} must divide lattice side {}", lattice.side)));
    }
    let mesh = Torus::new(lattice.dim, m);
    let weight = (m as f64 / lattice.side as f64).powi(lattice.dim as i32);
    let mut values = vec![vec![0.0; mesh.len()]; alpha.n_colors()];
    for x in 0..lattice.len() {
        let cell = if m == lattice.side {
            x
        } else {
            let c: Vec<usize> = lattice.coords(x).iter().map(|&k| nearest_cell(k, lattice.side, m)).collect();
            mesh.index(&c)
        };
        values[alpha.color[x]][cell] += weight * sigma.spin(x);
    }
    Ok(ColoredProfile { grid: mesh, values })
}

/// Profiles at uniformly spaced times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub profiles: Vec<ColoredProfile>,
    /// Exact time derivatives, when known.
    #[serde(default)]
    pub derivatives: Option<Vec<ColoredProfile>>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, profiles: Vec<ColoredProfile>) -> Result<Self> {
        if times.is_empty() || times.len() != profiles.len() {
            return Err(Error::Mismatch(format!("{} times for {} profiles", times.len(), profiles.len())));
        }
        if times.len() > 1 {
            let h = times[1] - times[0];
            if !(h > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
                return Err(Error::Invalid("path times must be uniformly spaced and increasing".into()));
            }
        }
        let grid = profiles[0].grid;
        let nc = profiles[0].n_colors();
        if profiles.iter().any(|p| p.grid != grid || p.n_colors() != nc) {
            return Err(Error::Mismatch("profiles on a path must share grid and colors".into()));
        }
        Ok(PathGrid { times, profiles, derivatives: None })
    }

    /// Samples `f(i, t, r)` at `t_k = k dt_rec`, `k = 0..=round(T/dt_rec)`.
    pub fn from_fn(grid: Torus, n_colors: usize, horizon: f64, dt_rec: f64, f: impl Fn(usize, f64, &[f64]) -> f64) -> Result<Self> {
        let n = steps(horizon, dt_rec)?;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt_rec).collect();
        let profiles = times.iter().map(|&t| ColoredProfile::from_fn(grid, n_colors, |i, r| f(i, t, r))).collect();
        Self::new(times, profiles)
    }

    pub fn with_derivatives(mut self, derivatives: Vec<ColoredProfile>) -> Result<Self> {
        if derivatives.len() != self.times.len() {
            return Err(Error::Mismatch("one derivative per snapshot is required".into()));
        }
        self.derivatives = Some(derivatives);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> Torus {
        self.profiles[0].grid
    }

    pub fn n_colors(&self) -> usize {
        self.profiles[0].n_colors()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn margin(&self, colors: &[Color]) -> f64 {
        self.profiles.iter().map(|p| p.margin(colors)).fold(f64::INFINITY, f64::min)
    }

    /// Time derivative: exact if stored, finite differences otherwise.
    pub fn derivative(&self) -> Result<Vec<ColoredProfile>> {
        match &self.derivatives {
            Some(d) => Ok(d.clone()),
            None => time_derivative(self),
        }
    }

    /// Linear interpolation in time, constant outside the sampled range.
    pub fn at(&self, t: f64) -> ColoredProfile {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.profiles[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.profiles[n - 1].clone();
        }
        let k = (self.times.partition_point(|&s| s <= t) - 1).min(n - 2);
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.profiles[k].lerp(&self.profiles[k + 1], w)
    }

    /// Snapshots `k0..=k1` as a new path.
    pub fn slice(&self, k0: usize, k1: usize) -> Result<PathGrid> {
        if k0 > k1 || k1 >= self.len() {
            return Err(Error::Invalid(format!("bad slice {k0}..={k1}")));
        }
        let mut p = PathGrid::new(self.times[k0..=k1].to_vec(), self.profiles[k0..=k1].to_vec())?;
        if let Some(d) = &self.derivatives {
            p.derivatives = Some(d[k0..=k1].to_vec());
        }
        Ok(p)
    }

    /// Uncolored path `sum_i m_i` as a one-color path.
    pub fn total(&self) -> PathGrid {
        let profiles = self
            .profiles
            .iter()
            .map(|p| ColoredProfile { grid: p.grid, values: vec![p.total()] })
            .collect();
        PathGrid { times: self.times.clone(), profiles, derivatives: None }
    }
}

pub(crate) fn steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= 0.0) {
        return Err(Error::Config(format!("horizon must be >= 0, got {horizon}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::Config(format!("horizon {horizon} is not a multiple of step {dt}")));
    }
    Ok(n as usize)
}

/// Central differences inside, one-sided second order at both ends.
pub fn time_derivative(path: &PathGrid) -> Result<Vec<ColoredProfile>> {
    let n = path.len();
    if n < 3 {
        return Err(Error::Invalid(format!("time derivative needs >= 3 snapshots, got {n}")));
    }
    let h = path.dt();
    let p = &path.profiles;
    let combine = |terms: &[(f64, usize)]| {
        let grid = p[0].grid;
        let values = (0..p[0].n_colors())
            .map(|i| {
                (0..grid.len())
                    .map(|c| terms.iter().map(|&(w, k)| w * p[k].values[i][c]).sum::<f64>() / h)
                    .collect()
            })
            .collect();
        ColoredProfile { grid, values }
    };
    let mut out = Vec::with_capacity(n);
    out.push(combine(&[(-1.5, 0), (2.0, 1), (-0.5, 2)]));
    for k in 1..n - 1 {
        out.push(combine(&[(-0.5, k - 1), (0.5, k + 1)]));
    }
    out.push(combine(&[(0.5, n - 3), (-2.0, n - 2), (1.5, n - 1)]));
    Ok(out)
}
