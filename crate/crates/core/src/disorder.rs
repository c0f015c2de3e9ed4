//! Quenched color assignment and ergodicity diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Color, ModelParams};
use crate::torus::Torus;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    pub lattice: Torus,
    pub colors: Vec<Color>,
    /// Color index per site.
    pub color: Vec<usize>,
    pub seed: u64,
}

pub fn sample_disorder(params: &ModelParams, seed: u64) -> DisorderField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = params.lattice();
    let last = params.colors.iter().rposition(|c| c.p > 0.0).unwrap_or(0);
    let color = (0..lattice.len())
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, c) in params.colors.iter().enumerate() {
                acc += c.p;
                if u < acc && c.p > 0.0 {
                    return i;
                }
            }
            last
        })
        .collect();
    DisorderField { lattice, colors: params.colors.clone(), color, seed }
}

impl DisorderField {
    /// Disorder with explicitly given colors.
    pub fn from_colors(params: &ModelParams, color: Vec<usize>) -> Result<Self> {
        let lattice = params.lattice();
        if color.len() != lattice.len() {
            return Err(Error::Mismatch(format!("{} colors for {} sites", color.len(), lattice.len())));
        }
        if color.iter().any(|&c| c >= params.n_colors()) {
            return Err(Error::Invalid("color index out of range".into()));
        }
        Ok(DisorderField { lattice, colors: params.colors.clone(), color, seed: 0 })
    }

    pub fn n_colors(&self) -> usize {
        self.colors.len()
    }

    /// Field value `a_{color(x)}`.
    pub fn field(&self, x: usize) -> f64 {
        self.colors[self.color[x]].a
    }

    /// Indicator `alpha_i(x)`.
    pub fn indicator(&self, i: usize) -> Vec<f64> {
        self.color.iter().map(|&c| if c == i { 1.0 } else { 0.0 }).collect()
    }

    pub fn fraction(&self, i: usize) -> f64 {
        self.color.iter().filter(|&&c| c == i).count() as f64 / self.color.len() as f64
    }

    /// `gamma^d #{x : |alpha_i^(l)(x) - p_i| > delta}` for each color.
    pub fn ergodic_defect(&self, l: usize, delta: f64) -> Vec<f64> {
        let n = self.lattice.len() as f64;
        (0..self.n_colors())
            .map(|i| {
                let avg = block_average(self.lattice, &self.indicator(i), l);
                let p = self.colors[i].p;
                avg.iter().filter(|&&v| (v - p).abs() > delta).count() as f64 / n
            })
            .collect()
    }
}

/// Average over the sup-norm box of radius `l`; once the box wraps an axis it covers that axis once.
pub fn block_average(grid: Torus, h: &[f64], l: usize) -> Vec<f64> {
    assert_eq!(h.len(), grid.len());
    let n = grid.side;
    let mut cur = h.to_vec();
    if l == 0 {
        return cur;
    }
    let width = (2 * l + 1).min(n);
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let mut next = vec![0.0; cur.len()];
        for start in 0..cur.len() {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            let line: Vec<f64> = (0..n).map(|k| cur[start + k * stride]).collect();
            for k in 0..n {
                let s: f64 = if width == n {
                    line.iter().sum()
                } else {
                    (0..width).map(|j| line[(k + n + j - l) % n]).sum()
                };
                next[start + k * stride] = s / width as f64;
            }
        }
        cur = next;
    }
    cur
}
