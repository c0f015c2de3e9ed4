//! Pointwise Hamiltonians and path costs of the colored rate functional.
//!
//! For a color with weight `p`, density `u`, drift `g` and drive `A = beta((J*u) + a theta)`,
//! the dissipation is
//! `B(u, v) = (p-u)(1+tanh A)/2 (e^{2v}-1) + (p+u)(1-tanh A)/2 (e^{-2v}-1)`
//! and `H(u, g) = sup_v { g v - B(u, v)/2 }`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Color;
use crate::pde::MeshModel;
use crate::potential::SpaceTimeField;
use crate::profile::{ColoredProfile, PathGrid};
use crate::quadrature::trapezoid_weights;

pub const BOUNDARY_TOLERANCE: f64 = 1e-12;
const SEARCH_LIMIT: f64 = 30.0;
const SEARCH_TOLERANCE: f64 = 1e-10;
const EDGE_SLOPE: f64 = 1e-9;

/// A cost that may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn is_finite(&self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    /// The value as a float, `f64::INFINITY` when infinite.
    pub fn value(&self) -> f64 {
        match *self {
            Cost::Finite(v) => v,
            Cost::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Cost::Finite(v) => Some(v),
            Cost::Infinite => None,
        }
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::Finite(0.0), |a, b| a + b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseState {
    pub colors: Vec<Color>,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    /// `(J*u)` at the point, supplied by the caller.
    pub conv: f64,
    pub theta: f64,
    pub beta: f64,
}

impl PointwiseState {
    pub fn new(colors: Vec<Color>, u: Vec<f64>, g: Vec<f64>, conv: f64, theta: f64) -> Result<Self> {
        if u.len() != colors.len() || g.len() != colors.len() {
            return Err(Error::Mismatch("state vectors must have one entry per color".into()));
        }
        Ok(PointwiseState { colors, u, g, conv, theta, beta: 1.0 })
    }

    pub fn n_colors(&self) -> usize {
        self.colors.len()
    }

    /// `A_i = beta((J*u) + a_i theta)`.
    pub fn drive(&self, i: usize) -> f64 {
        self.beta * (self.conv + self.colors[i].a * self.theta)
    }

    /// `R_i = sqrt((g_i cosh A_i)^2 + p_i^2 - u_i^2)`.
    pub fn root(&self, i: usize) -> f64 {
        let (p, u) = (self.colors[i].p, self.u[i]);
        let gc = self.g[i] * self.drive(i).cosh();
        (gc * gc + (p * p - u * u).max(0.0)).sqrt()
    }

    /// `D_i = g_i cosh A_i + R_i`, evaluated without cancellation.
    pub fn d_term(&self, i: usize) -> f64 {
        let (p, u) = (self.colors[i].p, self.u[i]);
        let gc = self.g[i] * self.drive(i).cosh();
        let r = self.root(i);
        if gc >= 0.0 {
            gc + r
        } else {
            (p * p - u * u).max(0.0) / (r - gc)
        }
    }
}

/// `B_i(u, v)` for one color.
pub fn dissipation(state: &PointwiseState, i: usize, v: f64) -> f64 {
    let (p, u) = (state.colors[i].p, state.u[i]);
    let th = state.drive(i).tanh();
    (p - u) * 0.5 * (1.0 + th) * (2.0 * v).exp_m1() + (p + u) * 0.5 * (1.0 - th) * (-2.0 * v).exp_m1()
}

/// `dB_i/dv`.
pub fn dissipation_slope(state: &PointwiseState, i: usize, v: f64) -> f64 {
    let (p, u) = (state.colors[i].p, state.u[i]);
    let th = state.drive(i).tanh();
    (p - u) * (1.0 + th) * (2.0 * v).exp() - (p + u) * (1.0 - th) * (-2.0 * v).exp()
}

/// `B_i(u, v_i)` for every color.
pub fn b_dissipation(state: &PointwiseState, v: &[f64]) -> Vec<f64> {
    (0..state.n_colors()).map(|i| dissipation(state, i, v[i])).collect()
}

/// Closed-form `H_i` for one color.
pub fn hamiltonian_color(state: &PointwiseState, i: usize) -> Cost {
    let (p, u, g) = (state.colors[i].p, state.u[i], state.g[i]);
    let a = state.drive(i);
    let cosh_a = a.cosh();
    if p == 0.0 {
        return if u.abs() <= BOUNDARY_TOLERANCE && g == 0.0 { Cost::Finite(0.0) } else { Cost::Infinite };
    }
    if u.abs() > p + BOUNDARY_TOLERANCE {
        return Cost::Infinite;
    }
    if (p - u.abs()).abs() <= BOUNDARY_TOLERANCE {
        let s = u.signum();
        let compatible = (s > 0.0 && g <= 0.0) || (s < 0.0 && g >= 0.0);
        if !compatible {
            return Cost::Infinite;
        }
        let tail = p * (-s * a).exp() / (2.0 * cosh_a);
        let head = if g != 0.0 {
            0.5 * g.abs() * ((g.abs() * cosh_a / (p * (-s * a).exp())).ln() - 1.0)
        } else {
            0.0
        };
        return Cost::Finite(head + tail);
    }
    let r = state.root(i);
    let d = state.d_term(i);
    Cost::Finite(0.5 * g * ((d / (p - u)).ln() - a) + 0.5 * p - 0.5 * u * a.tanh() - r / (2.0 * cosh_a))
}

pub fn hamiltonian_closed(state: &PointwiseState) -> Vec<Cost> {
    (0..state.n_colors()).map(|i| hamiltonian_color(state, i)).collect()
}

/// `sum_i H_i`.
pub fn hamiltonian_total(state: &PointwiseState) -> Cost {
    hamiltonian_closed(state).into_iter().sum()
}

/// Maximizer of `g v - B(u, v)/2`, interior states only.
pub fn optimizer_v(state: &PointwiseState) -> Result<Vec<f64>> {
    (0..state.n_colors())
        .map(|i| {
            let (p, u) = (state.colors[i].p, state.u[i]);
            if u.abs() >= p - BOUNDARY_TOLERANCE {
                return Err(Error::Margin(format!("color {i}: |u| = {} reaches p = {p}", u.abs())));
            }
            Ok(0.5 * ((state.d_term(i) / (p - u)).ln() - state.drive(i)))
        })
        .collect()
}

/// Golden-section estimate of `sup_v { g v - B(u, v)/2 }` on `[-30, 30]`, with the maximizer.
pub fn hamiltonian_numeric_color(state: &PointwiseState, i: usize) -> (Cost, f64) {
    let g = state.g[i];
    let f = |v: f64| g * v - 0.5 * dissipation(state, i, v);
    let slope = |v: f64| g - 0.5 * dissipation_slope(state, i, v);
    let (lo, hi) = (-SEARCH_LIMIT, SEARCH_LIMIT);
    if slope(hi) > EDGE_SLOPE {
        return (Cost::Infinite, hi);
    }
    if slope(lo) < -EDGE_SLOPE {
        return (Cost::Infinite, lo);
    }
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > SEARCH_TOLERANCE {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (f(mid), mid);
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe > best.0 {
            best = (fe, edge);
        }
    }
    (Cost::Finite(best.0), best.1)
}

pub fn hamiltonian_numeric(state: &PointwiseState) -> Vec<Cost> {
    (0..state.n_colors()).map(|i| hamiltonian_numeric_color(state, i).0).collect()
}

/// `F_V(mu, pi)` for colored densities on a common mesh; `v[i]` is sampled on the same mesh.
pub fn f_gamma(mm: &MeshModel, mu: &ColoredProfile, pi: &ColoredProfile, v: &[Vec<f64>]) -> Result<f64> {
    if mu.grid != pi.grid || mu.n_colors() != pi.n_colors() || v.len() != mu.n_colors() {
        return Err(Error::Mismatch("F needs measures and potential on one mesh".into()));
    }
    let drives = mm.drives(pi)?;
    let cell = mu.grid.cell_volume();
    let mut total = 0.0;
    for i in 0..mu.n_colors() {
        for c in 0..mu.grid.len() {
            let th = drives[i][c].tanh();
            let (s2, c2) = ((2.0 * v[i][c]).sinh(), (2.0 * v[i][c]).cosh() - 1.0);
            total += mu.values[i][c] * (th * s2 + c2) - pi.values[i][c] * (th * c2 + s2);
        }
    }
    Ok(cell * total)
}

/// `Gamma_V(u) = F_V((p_i lambda), u)`.
pub fn gamma_v(mm: &MeshModel, u: &ColoredProfile, v: &[Vec<f64>]) -> Result<f64> {
    let mu = ColoredProfile::from_fn(u.grid, u.n_colors(), |i, _| mm.params.colors[i].p);
    f_gamma(mm, &mu, u, v)
}

/// `int <V, phi'> ds - 1/2 int Gamma_V(phi) ds`, trapezoid in time and midpoint in space.
pub fn k_v_path(mm: &MeshModel, path: &PathGrid, v: &dyn SpaceTimeField) -> Result<f64> {
    let deriv = path.derivative()?;
    let w = trapezoid_weights(path.len(), path.dt());
    let grid = path.grid();
    let mut total = 0.0;
    for (k, &t) in path.times.iter().enumerate() {
        let vs: Vec<Vec<f64>> = (0..path.n_colors()).map(|i| v.sample(i, t, grid)).collect();
        let linear: f64 = (0..path.n_colors()).map(|i| deriv[k].pair_color_sampled(i, &vs[i])).sum();
        total += w[k] * (linear - 0.5 * gamma_v(mm, &path.profiles[k], &vs)?);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub value: Cost,
    pub times: Vec<f64>,
    /// Spatial integral of the Hamiltonian at each snapshot.
    pub per_time: Vec<Cost>,
    /// Time-integrated cost of each color.
    pub per_color: Vec<Cost>,
    /// `per_cell[k][c]`: Hamiltonian density at snapshot `k`, cell `c`.
    pub per_cell: Vec<Vec<Cost>>,
    /// `boundary[k][c]`: some color sits on the box boundary.
    pub boundary: Vec<Vec<bool>>,
    pub time_rule: String,
    pub space_rule: String,
    pub dt: f64,
    pub mesh: usize,
}

impl CostReport {
    fn infinite(times: Vec<f64>, n_colors: usize, dt: f64, mesh: usize) -> Self {
        CostReport {
            value: Cost::Infinite,
            per_time: vec![Cost::Infinite; times.len()],
            per_color: vec![Cost::Infinite; n_colors],
            per_cell: Vec::new(),
            boundary: Vec::new(),
            times,
            time_rule: "trapezoid".into(),
            space_rule: "midpoint".into(),
            dt,
            mesh,
        }
    }
}

/// Pointwise state at snapshot `k`, cell `c`.
fn node_state(mm: &MeshModel, u: &ColoredProfile, g: &ColoredProfile, conv: &[f64], c: usize) -> PointwiseState {
    PointwiseState {
        colors: mm.params.colors.clone(),
        u: (0..u.n_colors()).map(|i| u.values[i][c]).collect(),
        g: (0..u.n_colors()).map(|i| g.values[i][c]).collect(),
        conv: conv[c],
        theta: mm.params.theta,
        beta: mm.params.beta,
    }
}

/// `I_0 = int_0^T int H(phi, phi') dr dt`.
pub fn i0_path(mm: &MeshModel, path: &PathGrid) -> Result<CostReport> {
    let deriv = path.derivative()?;
    let grid = path.grid();
    let nc = path.n_colors();
    let w = trapezoid_weights(path.len(), path.dt());
    let cell = grid.cell_volume();
    let mut per_time = Vec::with_capacity(path.len());
    let mut per_cell = Vec::with_capacity(path.len());
    let mut boundary = Vec::with_capacity(path.len());
    let mut per_color = vec![Cost::Finite(0.0); nc];
    for (k, prof) in path.profiles.iter().enumerate() {
        let conv = mm.convolution(prof)?;
        let mut row = Vec::with_capacity(grid.len());
        let mut brow = Vec::with_capacity(grid.len());
        let mut color_sums = vec![Cost::Finite(0.0); nc];
        for c in 0..grid.len() {
            let st = node_state(mm, prof, &deriv[k], &conv, c);
            let hs = hamiltonian_closed(&st);
            brow.push((0..nc).any(|i| (st.colors[i].p - st.u[i].abs()).abs() <= BOUNDARY_TOLERANCE));
            for (i, h) in hs.iter().enumerate() {
                color_sums[i] = color_sums[i] + *h;
            }
            row.push(hs.into_iter().sum());
        }
        let scale = |x: Cost| match x {
            Cost::Finite(v) => Cost::Finite(v * cell),
            Cost::Infinite => Cost::Infinite,
        };
        per_time.push(scale(row.iter().copied().sum()));
        for i in 0..nc {
            per_color[i] = per_color[i]
                + match color_sums[i] {
                    Cost::Finite(v) => Cost::Finite(v * cell * w[k]),
                    Cost::Infinite if w[k] > 0.0 => Cost::Infinite,
                    Cost::Infinite => Cost::Finite(0.0),
                };
        }
        per_cell.push(row);
        boundary.push(brow);
    }
    let value = if per_cell.iter().flatten().any(|c| !c.is_finite()) {
        Cost::Infinite
    } else {
        Cost::Finite(per_time.iter().zip(&w).map(|(c, wk)| c.value() * wk).sum())
    };
    Ok(CostReport {
        value,
        times: path.times.clone(),
        per_time,
        per_color,
        per_cell,
        boundary,
        time_rule: "trapezoid".into(),
        space_rule: "midpoint".into(),
        dt: path.dt(),
        mesh: grid.side,
    })
}

/// Quenched cost: `I_0` if `phi_i(0) = p_i m0` within `1e-6`, `+inf` otherwise.
pub fn i_m0(mm: &MeshModel, path: &PathGrid, m0: &[f64]) -> Result<CostReport> {
    let start = &path.profiles[0];
    if m0.len() != start.grid.len() {
        return Err(Error::Mismatch("initial profile size".into()));
    }
    let matches = mm
        .params
        .colors
        .iter()
        .enumerate()
        .all(|(i, c)| start.values[i].iter().zip(m0).all(|(a, b)| (a - c.p * b).abs() <= 1e-6));
    if matches {
        i0_path(mm, path)
    } else {
        Ok(CostReport::infinite(path.times.clone(), path.n_colors(), path.dt(), path.grid().side))
    }
}

/// Right side of the upper growth bound with constants `(k, c)`.
pub fn growth_upper(state: &PointwiseState, k: f64, c: f64) -> f64 {
    let mut total = c;
    for i in 0..state.n_colors() {
        let (p, u, g) = (state.colors[i].p, state.u[i], state.g[i]);
        if g == 0.0 {
            continue;
        }
        let side = if g > 0.0 { p - u } else { p + u };
        let barrier = if side <= 0.0 { f64::INFINITY } else { (1.0 / side).ln().max(0.0) };
        total += 0.5 * g.abs() * (g.abs().ln().max(0.0) + barrier + k);
    }
    total
}

/// Right side of the lower growth bound with constants `(k, c)`.
pub fn growth_lower(state: &PointwiseState, k: f64, c: f64) -> f64 {
    let mut total = -c;
    for &g in &state.g {
        if g != 0.0 {
            total += 0.5 * g.abs() * (g.abs().ln() - k);
        }
    }
    total
}

/// Whether every sample satisfies `lower <= sum_i H_i <= upper`.
pub fn growth_bounds_check(samples: &[PointwiseState], k: f64, c: f64) -> bool {
    samples.iter().all(|s| {
        let h = hamiltonian_total(s).value();
        growth_lower(s, k, c) <= h && h <= growth_upper(s, k, c)
    })
}

/// `J_G(pi) = l_T + l~_T - 2 sum_i int { <p_i, G_i^2> - <pi_i, G_i^2 tanh(beta(J*pi + a_i theta))> } ds`.
pub fn energy_jg(mm: &MeshModel, path: &PathGrid, g: &dyn SpaceTimeField) -> Result<f64> {
    let grid = path.grid();
    let nc = path.n_colors();
    let w = trapezoid_weights(path.len(), path.dt());
    let cell = grid.cell_volume();
    let n = path.len();
    let pair_at = |k: usize| -> Result<f64> { path.profiles[k].pair(g, path.times[k]) };
    let mut total = pair_at(n - 1)? - pair_at(0)?;
    for (k, &t) in path.times.iter().enumerate() {
        let prof = &path.profiles[k];
        let drives = mm.drives(prof)?;
        let mut integrand = 0.0;
        for i in 0..nc {
            let gi = g.sample(i, t, grid);
            let p = mm.params.colors[i].p;
            for c in 0..grid.len() {
                let r = grid.position(c);
                let th = drives[i][c].tanh();
                let m = prof.values[i][c];
                let dg = g.time_derivative(i, t, &r);
                integrand += -m * dg + m * gi[c] - p * gi[c] * th;
                integrand += -2.0 * (p * gi[c] * gi[c] - m * gi[c] * gi[c] * th);
            }
        }
        total += w[k] * cell * integrand;
    }
    Ok(total)
}

/// Maximum of `J_G` over a bank of test fields.
pub fn energy_sup(mm: &MeshModel, path: &PathGrid, bank: &[&dyn SpaceTimeField]) -> Result<f64> {
    bank.iter().map(|g| energy_jg(mm, path, *g)).try_fold(f64::NEG_INFINITY, |m, v| Ok(m.max(v?)))
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub cost: CostReport,
    /// Best colored decomposition found.
    pub split: PathGrid,
    pub sweeps: usize,
}

/// Time cost of one cell for a given color-1 trajectory `s` (two colors).
fn cell_cost(mm: &MeshModel, total: &[f64], s: &[f64], conv: &[f64], h: f64, w: &[f64]) -> f64 {
    let n = s.len();
    let colors = &mm.params.colors;
    let deriv = |f: &dyn Fn(usize) -> f64, k: usize| -> f64 {
        if k == 0 {
            (-1.5 * f(0) + 2.0 * f(1) - 0.5 * f(2)) / h
        } else if k == n - 1 {
            (0.5 * f(n - 3) - 2.0 * f(n - 2) + 1.5 * f(n - 1)) / h
        } else {
            0.5 * (f(k + 1) - f(k - 1)) / h
        }
    };
    let mut acc = 0.0;
    for k in 0..n {
        let s1 = |j: usize| s[j];
        let s2 = |j: usize| total[j] - s[j];
        let st = PointwiseState {
            colors: colors.clone(),
            u: vec![s[k], total[k] - s[k]],
            g: vec![deriv(&s1, k), deriv(&s2, k)],
            conv: conv[k],
            theta: mm.params.theta,
            beta: mm.params.beta,
        };
        match hamiltonian_total(&st) {
            Cost::Finite(v) => acc += w[k] * v,
            Cost::Infinite => return f64::INFINITY,
        }
    }
    acc
}

/// Color-1 trajectory of one cell following its own flow `s' = -s + p_1 tanh(beta(conv + a_1 theta))`
/// with `conv` interpolated linearly between snapshots, clamped to the admissible band.
fn free_flow_split(mm: &MeshModel, total: &[f64], conv: &[f64], h: f64) -> Vec<f64> {
    let (c1, p2) = (mm.params.colors[0], mm.params.colors[1].p);
    let (beta, theta) = (mm.params.beta, mm.params.theta);
    let sub = (h / 1e-3).ceil().max(1.0) as usize;
    let dt = h / sub as f64;
    let rhs = |s: f64, j: f64| -s + c1.p * (beta * (j + c1.a * theta)).tanh();
    let mut s = c1.p * total[0];
    let mut out = vec![s];
    for k in 1..total.len() {
        let at = |f: f64| conv[k - 1] + f * (conv[k] - conv[k - 1]);
        for q in 0..sub {
            let f0 = q as f64 / sub as f64;
            let (fm, f1) = (f0 + 0.5 / sub as f64, f0 + 1.0 / sub as f64);
            let k1 = rhs(s, at(f0));
            let k2 = rhs(s + 0.5 * dt * k1, at(fm));
            let k3 = rhs(s + 0.5 * dt * k2, at(fm));
            let k4 = rhs(s + dt * k3, at(f1));
            s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        s = s.clamp((-c1.p).max(total[k] - p2), c1.p.min(total[k] + p2));
        out.push(s);
    }
    out
}

/// Approximate infimum of the quenched colored cost over splits `pi_1 + pi_2 = pi` with
/// `pi_i(0) = p_i pi(0)`, by projected coordinate descent from the cheaper of the proportional
/// split and the free-flow split.
pub fn contraction_infimum(mm: &MeshModel, pi: &PathGrid, max_sweeps: usize) -> Result<ContractionReport> {
    if mm.params.n_colors() != 2 || pi.n_colors() != 1 {
        return Err(Error::Config("contraction expects an uncolored path and two colors".into()));
    }
    if pi.len() < 3 {
        return Err(Error::Invalid("contraction needs >= 3 snapshots".into()));
    }
    let grid = pi.grid();
    let (p1, p2) = (mm.params.colors[0].p, mm.params.colors[1].p);
    let n = pi.len();
    let h = pi.dt();
    let w = trapezoid_weights(n, h);
    let proportional = |vals: &[Vec<f64>]| -> Result<PathGrid> {
        let profiles = (0..n)
            .map(|k| {
                let tot = &pi.profiles[k].values[0];
                ColoredProfile::new(grid, vec![vals[k].clone(), tot.iter().zip(&vals[k]).map(|(t, a)| t - a).collect()])
            })
            .collect::<Result<Vec<_>>>()?;
        PathGrid::new(pi.times.clone(), profiles)
    };
    let mut split: Vec<Vec<f64>> = pi.profiles.iter().map(|p| p.values[0].iter().map(|&x| p1 * x).collect()).collect();
    if pi.profiles.iter().flat_map(|p| &p.values[0]).any(|x| x.abs() > 1.0 + BOUNDARY_TOLERANCE) {
        let cost = CostReport::infinite(pi.times.clone(), 2, h, grid.side);
        return Ok(ContractionReport { cost, split: proportional(&split)?, sweeps: 0 });
    }
    let convs: Vec<Vec<f64>> = pi.profiles.iter().map(|p| mm.kernel.convolve(&p.values[0])).collect::<Result<_>>()?;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut sweeps = 0;
    for c in 0..grid.len() {
        let total: Vec<f64> = (0..n).map(|k| pi.profiles[k].values[0][c]).collect();
        let conv: Vec<f64> = (0..n).map(|k| convs[k][c]).collect();
        let mut s: Vec<f64> = (0..n).map(|k| split[k][c]).collect();
        let mut best = cell_cost(mm, &total, &s, &conv, h, &w);
        let free = free_flow_split(mm, &total, &conv, h);
        let free_cost = cell_cost(mm, &total, &free, &conv, h, &w);
        if free_cost < best {
            s = free;
            best = free_cost;
        }
        let mut done = 0;
        for _ in 0..max_sweeps {
            done += 1;
            let before = best;
            for k in 1..n {
                let lo = (-p1).max(total[k] - p2);
                let hi = p1.min(total[k] + p2);
                let eval = |x: f64, s: &mut Vec<f64>| {
                    let old = s[k];
                    s[k] = x;
                    let v = cell_cost(mm, &total, s, &conv, h, &w);
                    s[k] = old;
                    v
                };
                let (mut a, mut b) = (lo, hi);
                let mut x1 = b - ratio * (b - a);
                let mut x2 = a + ratio * (b - a);
                let (mut f1, mut f2) = (eval(x1, &mut s), eval(x2, &mut s));
                while b - a > 1e-13 {
                    if f1 > f2 {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + ratio * (b - a);
                        f2 = eval(x2, &mut s);
                    } else {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - ratio * (b - a);
                        f1 = eval(x1, &mut s);
                    }
                }
                let x = 0.5 * (a + b);
                let fx = eval(x, &mut s);
                if fx < best {
                    s[k] = x;
                    best = fx;
                }
            }
            if best.is_finite() && before - best <= 1e-16 {
                break;
            }
        }
        sweeps = sweeps.max(done);
        for k in 0..n {
            split[k][c] = s[k];
        }
    }
    let split = proportional(&split)?;
    let cost = i0_path(mm, &split)?;
    Ok(ContractionReport { cost, split, sweeps })
}
