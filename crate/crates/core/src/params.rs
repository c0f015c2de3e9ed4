//! Model parameters, colors and kernel profiles.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::Torus;

/// One value `a` of the random field, taken with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Color {
    pub a: f64,
    pub p: f64,
}

/// Shape of the interaction profile on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum KernelProfile {
    /// Gaussian of standard deviation `width`, summed over periodic images.
    PeriodicGaussian { width: f64 },
    /// `prod_k (1 + cos 2 pi r_k)`.
    RaisedCosine,
    /// `exp(1 - 1/(1 - (|r|/radius)^2))` inside the ball, zero outside; `radius <= 1/2`.
    CompactBump { radius: f64 },
    /// No interaction.
    Zero,
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub profile: KernelProfile,
    #[serde(default = "default_one")]
    pub scale: f64,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

impl KernelSpec {
    pub fn new(profile: KernelProfile) -> Self {
        KernelSpec { profile, scale: 1.0, normalize: true }
    }

    pub fn zero() -> Self {
        KernelSpec { profile: KernelProfile::Zero, scale: 1.0, normalize: false }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.profile {
            KernelProfile::PeriodicGaussian { width } if !(width > 0.0 && width.is_finite()) => {
                return Err(Error::Config(format!("gaussian width must be positive, got {width}")));
            }
            KernelProfile::CompactBump { radius } if !(radius > 0.0 && radius <= 0.5) => {
                return Err(Error::Config(format!("bump radius must lie in (0, 1/2], got {radius}")));
            }
            _ => {}
        }
        if !self.scale.is_finite() {
            return Err(Error::Config("kernel scale must be finite".into()));
        }
        if self.normalize && raw_integral(&self.profile, dim) <= 0.0 {
            return Err(Error::Config("kernel profile is not normalizable (integral <= 0)".into()));
        }
        Ok(())
    }

    /// Continuum value `J(r)`; components of `r` may be any reals (the profile is periodic).
    pub fn value(&self, r: &[f64]) -> f64 {
        let raw = raw_value(&self.profile, r);
        if self.normalize {
            self.scale * raw / raw_integral(&self.profile, r.len())
        } else {
            self.scale * raw
        }
    }

    /// `∫|J|` over the torus.
    pub fn abs_integral(&self, dim: usize) -> f64 {
        if self.normalize {
            self.scale.abs()
        } else {
            self.scale.abs() * raw_integral(&self.profile, dim)
        }
    }
}

fn wrap(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

fn raw_value(profile: &KernelProfile, r: &[f64]) -> f64 {
    match *profile {
        KernelProfile::PeriodicGaussian { width } => {
            let images = (10.0 * width).ceil() as i64 + 2;
            let s2 = 2.0 * width * width;
            r.iter()
                .map(|&x| {
                    let x = wrap(x);
                    (-images..=images).map(|n| (-(x + n as f64).powi(2) / s2).exp()).sum::<f64>()
                })
                .product()
        }
        KernelProfile::RaisedCosine => r.iter().map(|&x| 1.0 + (2.0 * PI * x).cos()).product(),
        KernelProfile::CompactBump { radius } => {
            let q: f64 = r.iter().map(|&x| wrap(x).powi(2)).sum::<f64>() / (radius * radius);
            if q < 1.0 {
                (1.0 - 1.0 / (1.0 - q)).exp()
            } else {
                0.0
            }
        }
        KernelProfile::Zero => 0.0,
    }
}

fn gamma_half_integer(d: usize) -> f64 {
    // Gamma(d/2) for positive integer d
    let (mut g, mut x) = if d.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x + 1e-9 < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

fn raw_integral(profile: &KernelProfile, dim: usize) -> f64 {
    match *profile {
        KernelProfile::PeriodicGaussian { width } => (width * (2.0 * PI).sqrt()).powi(dim as i32),
        KernelProfile::RaisedCosine => 1.0,
        KernelProfile::CompactBump { radius } => {
            let n = 20_000;
            let h = 1.0 / n as f64;
            let f = |x: f64| {
                if x >= 1.0 {
                    0.0
                } else {
                    x.powi(dim as i32 - 1) * (1.0 - 1.0 / (1.0 - x * x)).exp()
                }
            };
            let mut s = f(0.0) + f(1.0);
            for k in 1..n {
                s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let radial = s * h / 3.0;
            let sphere = 2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim);
            sphere * radius.powi(dim as i32) * radial
        }
        KernelProfile::Zero => 0.0,
    }
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    /// Lattice side `L`; `gamma = 1/L`.
    pub side: usize,
    pub theta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub colors: Vec<Color>,
    pub horizon: f64,
    pub kernel: KernelSpec,
}

impl ModelParams {
    pub fn new(dim: usize, side: usize, theta: f64, colors: Vec<Color>, horizon: f64, kernel: KernelSpec) -> Result<Self> {
        let p = ModelParams { dim, side, theta, beta: 1.0, colors, horizon, kernel };
        p.validate()?;
        Ok(p)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: ModelParams = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if self.side < 2 {
            return Err(Error::Config(format!("lattice side must be >= 2, got {}", self.side)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if self.colors.is_empty() {
            return Err(Error::Config("at least one color is required".into()));
        }
        for c in &self.colors {
            if !(0.0..=1.0).contains(&c.p) || !c.a.is_finite() {
                return Err(Error::Config(format!("invalid color {c:?}")));
            }
        }
        let total: f64 = self.colors.iter().map(|c| c.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("color probabilities sum to {total}, expected 1")));
        }
        self.kernel.validate(self.dim)
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.side as f64
    }

    pub fn n_colors(&self) -> usize {
        self.colors.len()
    }

    pub fn lattice(&self) -> Torus {
        Torus::new(self.dim, self.side)
    }

    /// Site count `L^d`.
    pub fn volume(&self) -> usize {
        self.lattice().len()
    }

    pub fn with_side(&self, side: usize) -> Self {
        ModelParams { side, ..self.clone() }
    }

    /// Upper bound for `|beta((J*u) + a_i theta)|` over profiles with `|u| <= 1`.
    pub fn max_drive(&self) -> f64 {
        let amax = self.colors.iter().map(|c| c.a.abs()).fold(0.0, f64::max);
        self.beta * (self.kernel.abs_integral(self.dim) + amax * self.theta)
    }
}
