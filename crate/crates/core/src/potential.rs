//! Per-color space-time fields: tilting potentials and test functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::Torus;

/// A per-color field `(t, r) -> G_i(t, r)` on the unit torus.
pub trait SpaceTimeField: Send + Sync {
    fn n_colors(&self) -> usize;

    fn value(&self, color: usize, t: f64, r: &[f64]) -> f64;

    fn time_derivative(&self, color: usize, t: f64, r: &[f64]) -> f64 {
        let h = 1e-5;
        (self.value(color, t + h, r) - self.value(color, t - h, r)) / (2.0 * h)
    }

    fn is_time_constant(&self) -> bool {
        false
    }

    /// Times where the field may fail to be smooth; quadratures split there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Upper bound for `|G_i(t, r)|`.
    fn sup_abs(&self) -> f64;

    /// Values at every node of `grid` for one color.
    fn sample(&self, color: usize, t: f64, grid: Torus) -> Vec<f64> {
        (0..grid.len()).map(|x| self.value(color, t, &grid.position(x))).collect()
    }
}

/// Field stored on a time x space grid: piecewise linear in time, multilinear in space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialGrid {
    pub times: Vec<f64>,
    pub grid: Torus,
    /// `values[k][i][c]`: time node `k`, color `i`, mesh node `c`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl PotentialGrid {
    pub fn new(times: Vec<f64>, grid: Torus, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Mismatch(format!("{} times for {} value slices", times.len(), values.len())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("potential times must increase".into()));
        }
        let nc = values[0].len();
        for slice in &values {
            if slice.len() != nc || slice.iter().any(|v| v.len() != grid.len()) {
                return Err(Error::Mismatch("potential slices have inconsistent shapes".into()));
            }
            if slice.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("potential has non-finite values".into()));
            }
        }
        Ok(PotentialGrid { times, grid, values })
    }

    /// Time- and space-constant potential `V_i = per_color[i]`.
    pub fn constant(dim: usize, per_color: &[f64]) -> Result<Self> {
        let grid = Torus::new(dim, 1);
        Self::new(vec![0.0], grid, vec![per_color.iter().map(|&v| vec![v]).collect()])
    }

    /// Time-constant potential given on a mesh.
    pub fn stationary(grid: Torus, per_color: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![0.0], grid, vec![per_color])
    }

    pub fn zero(dim: usize, n_colors: usize) -> Self {
        Self::constant(dim, &vec![0.0; n_colors]).expect("finite")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().flatten().all(|&v| v == 0.0)
    }

    fn spatial(&self, k: usize, color: usize, r: &[f64]) -> f64 {
        let vals = &self.values[k][color];
        let n = self.grid.side;
        if n == 1 {
            return vals[0];
        }
        let d = self.grid.dim;
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for &x in r {
            let s = x.rem_euclid(1.0) * n as f64;
            let i0 = s.floor();
            base.push(i0 as usize % n);
            frac.push(s - i0);
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let hi = (mask >> a) & 1 == 1;
                corner[a] = if hi { (base[a] + 1) % n } else { base[a] };
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * vals[self.grid.index(&corner)];
            }
        }
        acc
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, k + 1, w)
    }
}

impl SpaceTimeField for PotentialGrid {
    fn n_colors(&self) -> usize {
        self.values[0].len()
    }

    fn value(&self, color: usize, t: f64, r: &[f64]) -> f64 {
        let (k0, k1, w) = self.bracket(t);
        let v0 = self.spatial(k0, color, r);
        if k0 == k1 || w == 0.0 {
            return v0;
        }
        (1.0 - w) * v0 + w * self.spatial(k1, color, r)
    }

    fn time_derivative(&self, color: usize, t: f64, r: &[f64]) -> f64 {
        let n = self.times.len();
        if n == 1 || t < self.times[0] || t >= self.times[n - 1] {
            return 0.0;
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        (self.spatial(k + 1, color, r) - self.spatial(k, color, r)) / (self.times[k + 1] - self.times[k])
    }

    fn is_time_constant(&self) -> bool {
        self.times.len() == 1
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.times.clone()
    }

    fn sup_abs(&self) -> f64 {
        self.values.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

type FieldFn = dyn Fn(usize, f64, &[f64]) -> f64 + Send + Sync;

/// Field given by a closure, with optional analytic time derivative.
#[derive(Clone)]
pub struct FnField {
    n_colors: usize,
    sup: f64,
    time_constant: bool,
    f: Arc<FieldFn>,
    dt: Option<Arc<FieldFn>>,
}

impl FnField {
    pub fn new(n_colors: usize, sup: f64, f: impl Fn(usize, f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnField { n_colors, sup, time_constant: false, f: Arc::new(f), dt: None }
    }

    /// Field that does not depend on time.
    pub fn stationary(n_colors: usize, sup: f64, f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnField {
            n_colors,
            sup,
            time_constant: true,
            f: Arc::new(move |i, _t, r| f(i, r)),
            dt: Some(Arc::new(|_, _, _| 0.0)),
        }
    }

    pub fn with_time_derivative(mut self, dt: impl Fn(usize, f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(dt));
        self
    }
}

impl SpaceTimeField for FnField {
    fn n_colors(&self) -> usize {
        self.n_colors
    }

    fn value(&self, color: usize, t: f64, r: &[f64]) -> f64 {
        (self.f)(color, t, r)
    }

    fn time_derivative(&self, color: usize, t: f64, r: &[f64]) -> f64 {
        match &self.dt {
            Some(d) => d(color, t, r),
            None => {
                let h = 1e-5;
                ((self.f)(color, t + h, r) - (self.f)(color, t - h, r)) / (2.0 * h)
            }
        }
    }

    fn is_time_constant(&self) -> bool {
        self.time_constant
    }

    fn sup_abs(&self) -> f64 {
        self.sup
    }
}
