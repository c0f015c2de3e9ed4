//! Kac kernel tables on periodic grids and circular convolution.
//!
//! The lattice table holds `gamma^d J(gamma z)` with the self-interaction entry set to zero.
//! The mesh table holds the midpoint weights `M^{-d} J(z/M)` of the continuum convolution.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::{KernelSpec, ModelParams};
use crate::torus::Torus;

/// Grids up to this side use the direct double sum.
pub const DIRECT_MAX_SIDE: usize = 64;

#[derive(Clone)]
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<Complex<f64>>,
}

#[derive(Clone)]
pub struct PeriodicKernel {
    grid: Torus,
    table: Vec<f64>,
    support: Vec<(Vec<i64>, f64)>,
    spectral: Option<Spectral>,
}

impl fmt::Debug for PeriodicKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicKernel")
            .field("grid", &self.grid)
            .field("support", &self.support.len())
            .finish()
    }
}

/// Lattice kernel `gamma^d J(gamma z)` with zero self-interaction.
pub fn build_kernel(params: &ModelParams) -> Result<PeriodicKernel> {
    params.kernel.validate(params.dim)?;
    Ok(PeriodicKernel::from_spec(&params.kernel, params.lattice(), false))
}

/// Mesh kernel for the continuum convolution on `M^d` cells (midpoint rule, self term kept).
pub fn build_mesh_kernel(params: &ModelParams, mesh_side: usize) -> Result<PeriodicKernel> {
    params.kernel.validate(params.dim)?;
    if mesh_side == 0 {
        return Err(Error::Config("mesh side must be positive".into()));
    }
    Ok(PeriodicKernel::from_spec(&params.kernel, Torus::new(params.dim, mesh_side), true))
}

impl PeriodicKernel {
    pub fn from_spec(spec: &KernelSpec, grid: Torus, keep_self: bool) -> Self {
        let n = grid.side as f64;
        let w = grid.cell_volume();
        let table: Vec<f64> = (0..grid.len())
            .map(|z| {
                if z == 0 && !keep_self {
                    return 0.0;
                }
                let r: Vec<f64> = grid.signed_offset(z).iter().map(|&c| c.abs() as f64 / n).collect();
                w * spec.value(&r)
            })
            .collect();
        Self::from_table(grid, table)
    }

    /// Wraps an explicit table indexed by offset.
    pub fn from_table(grid: Torus, table: Vec<f64>) -> Self {
        assert_eq!(table.len(), grid.len());
        let support = table
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(z, &v)| (grid.signed_offset(z), v))
            .collect();
        let spectral = (grid.side > DIRECT_MAX_SIDE).then(|| Spectral::new(grid, &table));
        PeriodicKernel { grid, table, support, spectral }
    }

    pub fn grid(&self) -> Torus {
        self.grid
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn at(&self, offset: usize) -> f64 {
        self.table[offset]
    }

    /// Nonzero entries as (signed offset, weight).
    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn abs_total(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).sum()
    }

    /// `x -> sum_y table(x - y) f(y)`; direct sum on small grids, FFT otherwise.
    pub fn convolve(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(match &self.spectral {
            Some(s) => s.apply(self.grid, f),
            None => self.direct(f),
        })
    }

    pub fn convolve_direct(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(self.direct(f))
    }

    pub fn convolve_fft(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(match &self.spectral {
            Some(s) => s.apply(self.grid, f),
            None => Spectral::new(self.grid, &self.table).apply(self.grid, f),
        })
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.len() {
            return Err(Error::Mismatch(format!(
                "grid function has {} values, kernel grid has {}",
                f.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn direct(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let nz: Vec<usize> = (0..n).filter(|&y| f[y] != 0.0).collect();
        (0..n)
            .map(|x| nz.iter().map(|&y| self.table[self.grid.difference(x, y)] * f[y]).sum())
            .collect()
    }
}

impl Spectral {
    fn new(grid: Torus, table: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.side);
        let inverse = planner.plan_fft_inverse(grid.side);
        let mut symbol: Vec<Complex<f64>> = table.iter().map(|&v| Complex::new(v, 0.0)).collect();
        transform(grid, &mut symbol, &forward);
        Spectral { forward, inverse, symbol }
    }

    fn apply(&self, grid: Torus, f: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        transform(grid, &mut buf, &self.forward);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= s;
        }
        transform(grid, &mut buf, &self.inverse);
        let scale = 1.0 / grid.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

fn transform(grid: Torus, data: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
    let n = grid.side;
    let total = grid.len();
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        for start in 0..total {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for k in 0..n {
                line[k] = data[start + k * stride];
            }
            fft.process(&mut line);
            for k in 0..n {
                data[start + k * stride] = line[k];
            }
        }
    }
}
