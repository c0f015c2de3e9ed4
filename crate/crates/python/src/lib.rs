//! Python bindings for the kac-glauber core.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kac_glauber::experiments::{
    run_diagnostics, run_hydrodynamic_convergence, run_tilted_estimate, DiagnosticsConfig, HydroConfig, TiltConfig,
};
use kac_glauber::glauber::{rate_from_energy, replica_rng, simulate_with_rng};
use kac_glauber::measures::{path_distance, TestBank};
use kac_glauber::pde::{MeshModel, SolveOptions};
use kac_glauber::rate::{hamiltonian_total, i0_path, PointwiseState};
use kac_glauber::{
    control, io, sample_disorder, Color, ColoredProfile, KernelProfile, KernelSpec, Model, ModelParams, PathGrid,
    PotentialGrid, SimOptions, SpaceTimeField, SpinConfig,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn colors_from(pairs: Vec<(f64, f64)>) -> Vec<Color> {
    pairs.into_iter().map(|(a, p)| Color { a, p }).collect()
}

#[pyclass(name = "Model", frozen, module = "kac_glauber_py")]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    /// `colors` is a list of `(a, p)` pairs; the kernel is a periodic Gaussian of the given width.
    #[new]
    #[pyo3(signature = (side, theta, colors, horizon = 1.0, kernel_width = 0.1, dim = 1, beta = 1.0))]
    fn new(side: usize, theta: f64, colors: Vec<(f64, f64)>, horizon: f64, kernel_width: f64, dim: usize, beta: f64) -> PyResult<Self> {
        let kernel = KernelSpec::new(KernelProfile::PeriodicGaussian { width: kernel_width });
        let mut params = ModelParams::new(dim, side, theta, colors_from(colors), horizon, kernel).map_err(err)?;
        params.beta = beta;
        params.validate().map_err(err)?;
        Ok(PyModel { inner: Model::new(params).map_err(err)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let params = ModelParams::from_toml_str(text).map_err(err)?;
        Ok(PyModel { inner: Model::new(params).map_err(err)? })
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.params.side
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.params.dim
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.params.theta
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.params.horizon
    }

    #[getter]
    fn n_colors(&self) -> usize {
        self.inner.params.n_colors()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.params.gamma()
    }

    fn kernel_table(&self) -> Vec<f64> {
        self.inner.kernel.table().to_vec()
    }

    /// Simulates one replica from independent spins of mean `initial`, optionally under a constant tilt.
    #[pyo3(signature = (seed, initial = 0.0, dt_rec = 0.01, tilt = None, replica = 0))]
    fn simulate(&self, seed: u64, initial: f64, dt_rec: f64, tilt: Option<Vec<f64>>, replica: u64) -> PyResult<PyTrajectory> {
        let model = &self.inner;
        let alpha = sample_disorder(&model.params, seed);
        let mut rng = replica_rng(seed, replica);
        let mean = vec![initial; model.params.volume()];
        let sigma0 = SpinConfig::sample_with_mean(&mean, &model.kernel, &mut rng).map_err(err)?;
        let v = tilt.map(|t| PotentialGrid::constant(model.params.dim, &t)).transpose().map_err(err)?;
        let opts = SimOptions { dt_rec, snapshot_mesh: None, record_events: false };
        let rec = simulate_with_rng(model, &alpha, sigma0, v.as_ref().map(|v| v as &dyn SpaceTimeField), &mut rng, &opts)
            .map_err(err)?;
        Ok(PyTrajectory {
            events: rec.events,
            candidates: rec.candidates,
            log_weight: rec.log_weight(),
            path: rec.path().map_err(err)?,
        })
    }

    /// Integrates the colored flow on a mesh from `offset + amplitude cos(2 pi r_1)`.
    #[pyo3(signature = (mesh, offset = 0.0, amplitude = 0.0, dt = 1e-3, dt_rec = 0.01, tilt = None))]
    fn solve(&self, mesh: usize, offset: f64, amplitude: f64, dt: f64, dt_rec: f64, tilt: Option<Vec<f64>>) -> PyResult<PyPath> {
        let params = &self.inner.params;
        let mm = MeshModel::new(params, mesh).map_err(err)?;
        let m0 = ColoredProfile::proportional(mm.grid(), &params.colors, |r| {
            offset + amplitude * (2.0 * std::f64::consts::PI * r[0]).cos()
        });
        let v = tilt.map(|t| PotentialGrid::constant(params.dim, &t)).transpose().map_err(err)?;
        let path = mm
            .integrate(&m0, v.as_ref().map(|v| v as &dyn SpaceTimeField), SolveOptions { dt, dt_rec })
            .map_err(err)?;
        Ok(PyPath { inner: path })
    }

    /// Quenched cost of a path on its own mesh; `inf` when infinite.
    fn cost(&self, path: &PyPath) -> PyResult<f64> {
        let mm = MeshModel::new(&self.inner.params, path.inner.grid().side).map_err(err)?;
        Ok(i0_path(&mm, &path.inner).map_err(err)?.value.value())
    }

    /// Potential driving the flow along `path`, as `values[k][c][i]`.
    fn synthesize(&self, path: &PyPath) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let mm = MeshModel::new(&self.inner.params, path.inner.grid().side).map_err(err)?;
        let v = control::synthesize_v(&mm, &path.inner, control::DEFAULT_MARGIN).map_err(err)?;
        Ok(v.values)
    }

    /// Sup-norm error of re-integrating the synthesized potential along `path`.
    #[pyo3(signature = (path, dt = 1e-4))]
    fn roundtrip_error(&self, path: &PyPath, dt: f64) -> PyResult<f64> {
        let mm = MeshModel::new(&self.inner.params, path.inner.grid().side).map_err(err)?;
        Ok(control::verify_roundtrip(&mm, &path.inner, dt).map_err(err)?.sup_error)
    }
}

#[pyclass(name = "Path", frozen, module = "kac_glauber_py")]
struct PyPath {
    inner: PathGrid,
}

#[pymethods]
impl PyPath {
    #[staticmethod]
    #[pyo3(signature = (file, dim = 1))]
    fn load(file: &str, dim: usize) -> PyResult<Self> {
        Ok(PyPath { inner: io::load_path(file, dim).map_err(err)? })
    }

    fn save(&self, file: &str) -> PyResult<()> {
        io::save_path(&self.inner, file).map_err(err)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn mesh(&self) -> usize {
        self.inner.grid().side
    }

    /// `values[k][i][c]`: snapshot, color, mesh cell.
    fn values(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.profiles.iter().map(|p| p.values.clone()).collect()
    }

    /// Total magnetization profile at each snapshot.
    fn totals(&self) -> Vec<Vec<f64>> {
        self.inner.profiles.iter().map(|p| p.total()).collect()
    }

    #[pyo3(signature = (other, truncation = 16))]
    fn distance(&self, other: &PyPath, truncation: usize) -> PyResult<f64> {
        let bank = TestBank::trigonometric(self.inner.grid().dim, truncation);
        path_distance(&self.inner, &other.inner, &bank).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Trajectory", frozen, module = "kac_glauber_py")]
struct PyTrajectory {
    #[pyo3(get)]
    events: u64,
    #[pyo3(get)]
    candidates: u64,
    #[pyo3(get)]
    log_weight: f64,
    path: PathGrid,
}

#[pymethods]
impl PyTrajectory {
    fn path(&self) -> PyPath {
        PyPath { inner: self.path.clone() }
    }
}

#[pyfunction]
fn flip_rate(beta: f64, energy_change: f64) -> f64 {
    rate_from_energy(beta, energy_change)
}

/// Pointwise Hamiltonian summed over colors; `inf` when infinite.
#[pyfunction]
#[pyo3(signature = (colors, u, g, conv, theta))]
fn hamiltonian(colors: Vec<(f64, f64)>, u: Vec<f64>, g: Vec<f64>, conv: f64, theta: f64) -> PyResult<f64> {
    let state = PointwiseState::new(colors_from(colors), u, g, conv, theta).map_err(err)?;
    Ok(hamiltonian_total(&state).value())
}

/// Runs `hydro`, `tilt` or `diagnostics` from a TOML configuration; returns the JSON report.
#[pyfunction]
fn run_experiment(kind: &str, config: &str, seed: u64) -> PyResult<String> {
    let json = match kind {
        "hydro" => {
            let c: HydroConfig = toml::from_str(config).map_err(err)?;
            serde_json::to_string(&run_hydrodynamic_convergence(&c, seed).map_err(err)?)
        }
        "tilt" => {
            let c: TiltConfig = toml::from_str(config).map_err(err)?;
            serde_json::to_string(&run_tilted_estimate(&c, seed).map_err(err)?)
        }
        "diagnostics" => {
            let c: DiagnosticsConfig = toml::from_str(config).map_err(err)?;
            serde_json::to_string(&run_diagnostics(&c, seed).map_err(err)?)
        }
        other => return Err(PyValueError::new_err(format!("unknown experiment {other:?}"))),
    };
    json.map_err(err)
}

#[pymodule]
fn kac_glauber_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(flip_rate, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
