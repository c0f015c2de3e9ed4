use crate::error::Result;
use crate::kernel::{build_kernel, PeriodicKernel};
use crate::params::ModelParams;

/// Parameters together with the lattice kernel they induce.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: ModelParams,
    pub kernel: PeriodicKernel,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let kernel = build_kernel(&params)?;
        Ok(Model { params, kernel })
    }

    pub fn gamma_d(&self) -> f64 {
        self.params.lattice().cell_volume()
    }
}
