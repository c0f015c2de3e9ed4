//! Periodic grids `{0,..,n-1}^d` with flat row-major indexing; node `c` sits at `c/n` on the unit torus.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Torus {
    pub dim: usize,
    pub side: usize,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Self {
        Torus { dim, side }
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell, `n^{-d}`.
    pub fn cell_volume(&self) -> f64 {
        (self.side as f64).powi(-(self.dim as i32))
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for k in (0..self.dim).rev() {
            c[k] = idx % self.side;
            idx /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.side + c % self.side)
    }

    /// Position of a node on `[0,1)^d`.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        let n = self.side as f64;
        self.coords(idx).into_iter().map(|c| c as f64 / n).collect()
    }

    /// Signed offset of `idx` from the origin, each component in `[-n/2, n/2)`.
    pub fn signed_offset(&self, idx: usize) -> Vec<i64> {
        let n = self.side as i64;
        self.coords(idx)
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if 2 * c >= n {
                    c - n
                } else {
                    c
                }
            })
            .collect()
    }

    /// Index of `idx + off` with periodic wrap.
    pub fn shift(&self, idx: usize, off: &[i64]) -> usize {
        let n = self.side as i64;
        let c = self.coords(idx);
        let shifted: Vec<usize> = c
            .iter()
            .zip(off)
            .map(|(&a, &o)| (a as i64 + o).rem_euclid(n) as usize)
            .collect();
        self.index(&shifted)
    }

    /// Index of `a - b` with periodic wrap.
    pub fn difference(&self, a: usize, b: usize) -> usize {
        if self.dim == 1 {
            return (a + self.side - b) % self.side;
        }
        let ca = self.coords(a);
        let cb = self.coords(b);
        let d: Vec<usize> = ca
            .iter()
            .zip(&cb)
            .map(|(&x, &y)| (x + self.side - y) % self.side)
            .collect();
        self.index(&d)
    }
}
