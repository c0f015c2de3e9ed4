//! Spin configurations with an incrementally maintained local field.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::PeriodicKernel;
use crate::torus::Torus;

/// Flips between two full recomputations of the cached field.
pub const REFRESH_EVERY: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConfig {
    lattice: Torus,
    sigma: Vec<i8>,
    field: Vec<f64>,
    flips_since_refresh: u64,
}

impl SpinConfig {
    pub fn new(sigma: Vec<i8>, kernel: &PeriodicKernel) -> Result<Self> {
        let lattice = kernel.grid();
        if sigma.len() != lattice.len() {
            return Err(Error::Mismatch(format!("{} spins for {} sites", sigma.len(), lattice.len())));
        }
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Invalid("spins must be +1 or -1".into()));
        }
        let mut cfg = SpinConfig { lattice, sigma, field: Vec::new(), flips_since_refresh: 0 };
        cfg.refresh(kernel);
        Ok(cfg)
    }

    pub fn constant(value: i8, kernel: &PeriodicKernel) -> Result<Self> {
        Self::new(vec![value; kernel.grid().len()], kernel)
    }

    /// Independent signs with `E sigma(x) = mean(x)`.
    pub fn sample_with_mean<R: Rng>(mean: &[f64], kernel: &PeriodicKernel, rng: &mut R) -> Result<Self> {
        let sigma = mean
            .iter()
            .map(|&m| {
                let u: f64 = rng.random();
                if u < 0.5 * (1.0 + m) {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Self::new(sigma, kernel)
    }

    pub fn lattice(&self) -> Torus {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.sigma
    }

    pub fn spin(&self, x: usize) -> f64 {
        self.sigma[x] as f64
    }

    /// Cached `(J_gamma * sigma)(x)`.
    pub fn field(&self, x: usize) -> f64 {
        self.field[x]
    }

    pub fn fields(&self) -> &[f64] {
        &self.field
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.sigma.iter().map(|&s| s as f64).collect()
    }

    pub fn magnetization(&self) -> f64 {
        self.sigma.iter().map(|&s| s as f64).sum::<f64>() / self.sigma.len() as f64
    }

    pub fn refresh(&mut self, kernel: &PeriodicKernel) {
        self.field = kernel.convolve(&self.as_f64()).expect("kernel grid matches lattice");
        self.flips_since_refresh = 0;
    }

    /// Flips `sigma(x)` and updates the field over the kernel support.
    pub fn flip(&mut self, x: usize, kernel: &PeriodicKernel) {
        let delta = -2.0 * self.sigma[x] as f64;
        self.sigma[x] = -self.sigma[x];
        if self.lattice.dim == 1 {
            let n = self.lattice.side as i64;
            for (off, w) in kernel.support() {
                let y = (x as i64 + off[0]).rem_euclid(n) as usize;
                self.field[y] += w * delta;
            }
        } else {
            for (off, w) in kernel.support() {
                let y = self.lattice.shift(x, off);
                self.field[y] += w * delta;
            }
        }
        self.flips_since_refresh += 1;
        if self.flips_since_refresh >= REFRESH_EVERY {
            self.refresh(kernel);
        }
    }
}
