//! Nonlocal hydrodynamic equations on a periodic mesh.
//!
//! Colored flow `d/dt m_i = -m_i + p_i tanh(beta((J*m) + a_i theta))` with `m = sum_i m_i`,
//! and its tilted version driven by a potential `V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{build_mesh_kernel, PeriodicKernel};
use crate::params::ModelParams;
use crate::potential::SpaceTimeField;
use crate::profile::{steps, ColoredProfile, PathGrid};
use crate::torus::Torus;

pub const BOX_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dt: f64,
    pub dt_rec: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { dt: 1e-3, dt_rec: 1e-2 }
    }
}

/// Model parameters discretized on a mesh of `M^d` cells.
#[derive(Clone, Debug)]
pub struct MeshModel {
    pub params: ModelParams,
    pub kernel: PeriodicKernel,
}

/// `cosh(b)/cosh(a)` without overflow.
fn cosh_ratio(b: f64, a: f64) -> f64 {
    let (b, a) = (b.abs(), a.abs());
    (b - a).exp() * (1.0 + (-2.0 * b).exp()) / (1.0 + (-2.0 * a).exp())
}

impl MeshModel {
    pub fn new(params: &ModelParams, mesh_side: usize) -> Result<Self> {
        params.validate()?;
        Ok(MeshModel { params: params.clone(), kernel: build_mesh_kernel(params, mesh_side)? })
    }

    pub fn grid(&self) -> Torus {
        self.kernel.grid()
    }

    fn check(&self, m: &ColoredProfile) -> Result<()> {
        if m.grid != self.grid() || m.n_colors() != self.params.n_colors() {
            return Err(Error::Mismatch("profile does not match mesh or colors".into()));
        }
        Ok(())
    }

    /// `(J*m)` of the total profile.
    pub fn convolution(&self, m: &ColoredProfile) -> Result<Vec<f64>> {
        self.check(m)?;
        self.kernel.convolve(&m.total())
    }

    /// `A_i = beta((J*m) + a_i theta)` per color and cell.
    pub fn drives(&self, m: &ColoredProfile) -> Result<Vec<Vec<f64>>> {
        let conv = self.convolution(m)?;
        let beta = self.params.beta;
        Ok(self
            .params
            .colors
            .iter()
            .map(|c| conv.iter().map(|&j| beta * (j + c.a * self.params.theta)).collect())
            .collect())
    }

    pub fn rhs_colored(&self, m: &ColoredProfile) -> Result<ColoredProfile> {
        let drives = self.drives(m)?;
        let values = self
            .params
            .colors
            .iter()
            .enumerate()
            .map(|(i, c)| m.values[i].iter().zip(&drives[i]).map(|(&u, &a)| -u + c.p * a.tanh()).collect())
            .collect();
        Ok(ColoredProfile { grid: m.grid, values })
    }

    /// Uncolored flow `-m + sum_i p_i tanh(beta((J*m) + a_i theta))` for a scalar profile.
    pub fn rhs_uncolored(&self, m: &[f64]) -> Result<Vec<f64>> {
        let conv = self.kernel.convolve(m)?;
        let beta = self.params.beta;
        Ok(m.iter()
            .zip(&conv)
            .map(|(&u, &j)| {
                -u + self
                    .params
                    .colors
                    .iter()
                    .map(|c| c.p * (beta * (j + c.a * self.params.theta)).tanh())
                    .sum::<f64>()
            })
            .collect())
    }

    pub fn rhs_perturbed(&self, m: &ColoredProfile, v: &dyn SpaceTimeField, t: f64) -> Result<ColoredProfile> {
        let drives = self.drives(m)?;
        if v.n_colors() != m.n_colors() {
            return Err(Error::Mismatch("potential color count".into()));
        }
        let grid = m.grid;
        let mut values = Vec::with_capacity(m.n_colors());
        for (i, c) in self.params.colors.iter().enumerate() {
            let vi = v.sample(i, t, grid);
            if vi.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("potential is not finite".into()));
            }
            values.push(
                (0..grid.len())
                    .map(|k| {
                        let a = drives[i][k];
                        let b = a + 2.0 * vi[k];
                        (-m.values[i][k] + c.p * b.tanh()) * cosh_ratio(b, a)
                    })
                    .collect(),
            );
        }
        Ok(ColoredProfile { grid, values })
    }

    fn rhs(&self, m: &ColoredProfile, v: Option<&dyn SpaceTimeField>, t: f64) -> Result<ColoredProfile> {
        match v {
            Some(v) => self.rhs_perturbed(m, v, t),
            None => self.rhs_colored(m),
        }
    }

    fn guard(&self, m: &ColoredProfile, t: f64) -> Result<()> {
        if !m.is_finite() {
            return Err(Error::Diverged(format!("non-finite state at t = {t}")));
        }
        m.check_box(&self.params.colors, BOX_TOLERANCE)
            .map_err(|e| Error::StepSize(format!("at t = {t}: {e}")))
    }

    /// Classical RK4 from `m0` over `[0, T]`, recording every `dt_rec`.
    pub fn integrate(&self, m0: &ColoredProfile, v: Option<&dyn SpaceTimeField>, opts: SolveOptions) -> Result<PathGrid> {
        self.check(m0)?;
        self.guard(m0, 0.0)?;
        let horizon = self.params.horizon;
        let n = steps(horizon, opts.dt)?;
        let per_rec = steps(opts.dt_rec, opts.dt)?.max(1);
        if n % per_rec != 0 {
            return Err(Error::Config("horizon must be a multiple of dt_rec".into()));
        }
        let h = opts.dt;
        let mut m = m0.clone();
        let mut times = vec![0.0];
        let mut profiles = vec![m.clone()];
        for k in 0..n {
            let t = k as f64 * h;
            let k1 = self.rhs(&m, v, t)?;
            let k2 = self.rhs(&m.axpy(0.5 * h, &k1), v, t + 0.5 * h)?;
            let k3 = self.rhs(&m.axpy(0.5 * h, &k2), v, t + 0.5 * h)?;
            let k4 = self.rhs(&m.axpy(h, &k3), v, t + h)?;
            for i in 0..m.n_colors() {
                for c in 0..m.grid.len() {
                    m.values[i][c] += h / 6.0
                        * (k1.values[i][c] + 2.0 * k2.values[i][c] + 2.0 * k3.values[i][c] + k4.values[i][c]);
                }
            }
            let t1 = (k + 1) as f64 * h;
            self.guard(&m, t1)?;
            if (k + 1) % per_rec == 0 {
                times.push(t1);
                profiles.push(m.clone());
            }
        }
        PathGrid::new(times, profiles)
    }

    fn nonlinear(&self, m: &ColoredProfile) -> Result<ColoredProfile> {
        let drives = self.drives(m)?;
        let values = self
            .params
            .colors
            .iter()
            .enumerate()
            .map(|(i, c)| drives[i].iter().map(|a| c.p * a.tanh()).collect())
            .collect();
        Ok(ColoredProfile { grid: m.grid, values })
    }

    /// Largest `|tanh|` the drive can reach with `|m| <= 1`; `d = 1 - this`.
    pub fn tanh_ceiling(&self) -> f64 {
        let amax = self.params.colors.iter().map(|c| c.a.abs()).fold(0.0, f64::max);
        let jnorm = self.kernel.abs_total().max(self.params.kernel.abs_integral(self.params.dim));
        (self.params.beta * (jnorm + amax * self.params.theta)).tanh()
    }

    /// Solves the mild form `R_i(t) = e^{-t} m_i(0) + p_i int_0^t e^{-(t-s)} tanh(...) ds`
    /// with a fourth-order exponential integrator.
    pub fn reference_solution(&self, m0: &ColoredProfile, opts: SolveOptions) -> Result<ReferenceSolution> {
        self.check(m0)?;
        self.guard(m0, 0.0)?;
        let horizon = self.params.horizon;
        let n = steps(horizon, opts.dt)?;
        let per_rec = steps(opts.dt_rec, opts.dt)?.max(1);
        if n % per_rec != 0 {
            return Err(Error::Config("horizon must be a multiple of dt_rec".into()));
        }
        let h = opts.dt;
        let z = -h;
        let (e, e2) = (z.exp(), (0.5 * z).exp());
        let half = 0.5 * h * phi(1, 0.5 * z);
        let (p1, p2, p3) = (phi(1, z), phi(2, z), phi(3, z));
        let (f1, f2, f3) = (p1 - 3.0 * p2 + 4.0 * p3, 2.0 * (p2 - 2.0 * p3), 4.0 * p3 - p2);
        let combine = |terms: &[(f64, &ColoredProfile)]| {
            let grid = terms[0].1.grid;
            let values = (0..terms[0].1.n_colors())
                .map(|i| (0..grid.len()).map(|c| terms.iter().map(|(w, p)| w * p.values[i][c]).sum()).collect())
                .collect();
            ColoredProfile { grid, values }
        };
        let mut u = m0.clone();
        let mut times = vec![0.0];
        let mut profiles = vec![u.clone()];
        for k in 0..n {
            let nu = self.nonlinear(&u)?;
            let a = combine(&[(e2, &u), (half, &nu)]);
            let na = self.nonlinear(&a)?;
            let b = combine(&[(e2, &u), (half, &na)]);
            let nb = self.nonlinear(&b)?;
            let c = combine(&[(e2, &a), (2.0 * half, &nb), (-half, &nu)]);
            let nc = self.nonlinear(&c)?;
            u = combine(&[(e, &u), (h * f1, &nu), (h * f2, &na), (h * f2, &nb), (h * f3, &nc)]);
            let t1 = (k + 1) as f64 * h;
            self.guard(&u, t1)?;
            if (k + 1) % per_rec == 0 {
                times.push(t1);
                profiles.push(u.clone());
            }
        }
        let path = PathGrid::new(times, profiles)?;
        let margins = path.profiles.iter().map(|p| p.margin(&self.params.colors)).collect();
        Ok(ReferenceSolution { d: 1.0 - self.tanh_ceiling(), margins, path })
    }

    /// `p_i [1 - d(1 - e^{-t})]`, the a priori bound on `|R_i(t)|`.
    pub fn interior_bound(&self, color: usize, t: f64) -> f64 {
        let d = 1.0 - self.tanh_ceiling();
        self.params.colors[color].p * (1.0 - d * (1.0 - (-t).exp()))
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub path: PathGrid,
    /// `1 - max |tanh|` over the reachable drive range.
    pub d: f64,
    /// `min_i (p_i - ||R_i(t_k)||_inf)` per snapshot.
    pub margins: Vec<f64>,
}

impl ReferenceSolution {
    /// Smallest margin over snapshots at times `>= t0`.
    pub fn interior_margin(&self, t0: f64) -> f64 {
        self.path
            .times
            .iter()
            .zip(&self.margins)
            .filter(|(&t, _)| t >= t0)
            .map(|(_, &m)| m)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `phi_k(z) = sum_j z^j/(j+k)!`.
fn phi(k: u32, z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = 1.0 / (1..=k).map(|j| j as f64).product::<f64>();
        let mut sum = term;
        for j in 1..40 {
            term *= z / (j as f64 + k as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let mut val = z.exp();
        let mut fact = 1.0;
        for j in 0..k {
            if j > 0 {
                fact *= j as f64;
            }
            val -= z.powi(j as i32) / fact;
        }
        val / z.powi(k as i32)
    }
}

/// Convenience: colored flow from `m_i(0) = p_i m0` on a mesh of side `mesh`.
pub fn solve_colored(params: &ModelParams, mesh: usize, m0: impl Fn(&[f64]) -> f64, opts: SolveOptions) -> Result<PathGrid> {
    let mm = MeshModel::new(params, mesh)?;
    let init = ColoredProfile::proportional(mm.grid(), &params.colors, m0);
    mm.integrate(&init, None, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_match_closed_forms_away_from_zero() {
        for &z in &[-0.6, -1.0, 0.7] {
            let e: f64 = f64::exp(z);
            assert!((phi(1, z) - (e - 1.0) / z).abs() < 1e-14);
            assert!((phi(2, z) - (e - 1.0 - z) / (z * z)).abs() < 1e-13);
        }
        // continuity across the series switch
        assert!((phi(3, 0.4999999) - phi(3, 0.5000001)).abs() < 2e-8);
        assert!((phi(1, 0.0) - 1.0).abs() < 1e-16);
        assert!((phi(3, 0.0) - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn cosh_ratio_is_stable() {
        assert!((cosh_ratio(1.0, 0.5) - 1f64.cosh() / 0.5f64.cosh()).abs() < 1e-14);
        assert!(cosh_ratio(800.0, 799.0).is_finite());
    }
}
