use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use kac_glauber::control::{synthesize_v, verify_roundtrip, DEFAULT_MARGIN};
use kac_glauber::experiments::{
    derive_seed, run_diagnostics, run_hydrodynamic_convergence, run_tilted_estimate, DiagnosticsConfig,
    HydroConfig, InitialProfile, TiltConfig, VERSION,
};
use kac_glauber::glauber::{replica_rng, simulate_with_rng};
use kac_glauber::io::{load_path, load_potential, save_json, save_path, save_potential};
use kac_glauber::measures::{path_distance, rho, TestBank, DEFAULT_TRUNCATION};
use kac_glauber::pde::{MeshModel, SolveOptions};
use kac_glauber::rate::{i0_path, i_m0};
use kac_glauber::{
    sample_disorder, Color, ColoredProfile, KernelProfile, KernelSpec, Model, ModelParams, PathGrid, PotentialGrid,
    SimOptions, SpaceTimeField, SpinConfig,
};

const THREADS_ENV: &str = "KAC_THREADS";

#[derive(Parser)]
#[command(name = "kacsim", version, about = "Glauber dynamics with Kac potentials and random colors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicas and write snapshot tables.
    Simulate(SimulateArgs),
    /// Integrate the colored mean-field flow on a mesh.
    SolvePde(SolveArgs),
    /// Evaluate the quenched cost of a stored path.
    Rate(RateArgs),
    /// Synthesize the potential that drives the flow along a stored path.
    SynthesizeControl(ControlArgs),
    /// Importance-sampling estimate of a tilted neighborhood probability.
    TiltEstimate(ExperimentArgs),
    /// Hydrodynamic convergence over lattice sizes.
    Hydro(ExperimentArgs),
    /// Distance between two stored paths or between their final profiles.
    Metrics(MetricsArgs),
    /// Run a diagnostics suite.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model parameters in TOML (keys of ModelParams).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Lattice side L.
    #[arg(long)]
    side: Option<usize>,
    /// Time horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Periodic Gaussian kernel width.
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Colors as `a:p,a:p,...`.
    #[arg(long, allow_hyphen_values = true)]
    colors: Option<String>,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        let mut p = match &self.model {
            Some(file) => ModelParams::from_file(file).with_context(|| format!("reading {}", file.display()))?,
            None => ModelParams {
                dim: 1,
                side: 64,
                theta: 0.0,
                beta: 1.0,
                colors: vec![Color { a: 1.0, p: 0.5 }, Color { a: -1.0, p: 0.5 }],
                horizon: 1.0,
                kernel: KernelSpec::new(KernelProfile::PeriodicGaussian { width: 0.1 }),
            },
        };
        if let Some(v) = self.dim {
            p.dim = v;
        }
        if let Some(v) = self.side {
            p.side = v;
        }
        if let Some(v) = self.horizon {
            p.horizon = v;
        }
        if let Some(v) = self.theta {
            p.theta = v;
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(w) = self.kernel_width {
            p.kernel = KernelSpec::new(KernelProfile::PeriodicGaussian { width: w });
        }
        if let Some(c) = &self.colors {
            p.colors = parse_colors(c)?;
        }
        p.validate()?;
        Ok(p)
    }
}

fn parse_colors(s: &str) -> Result<Vec<Color>> {
    s.split(',')
        .map(|item| {
            let (a, p) = item.split_once(':').ok_or_else(|| anyhow!("color {item:?} is not a:p"))?;
            Ok(Color { a: a.trim().parse()?, p: p.trim().parse()? })
        })
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| Ok(v.trim().parse::<f64>()?)).collect()
}

/// `constant:V` or `cosine:AMPLITUDE[:OFFSET[:FREQUENCY]]`.
fn parse_initial(s: &str) -> Result<InitialProfile> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |k: usize, d: f64| -> Result<f64> { parts.get(k).map_or(Ok(d), |v| Ok(v.parse()?)) };
    let profile = match parts[0] {
        "constant" => InitialProfile::Constant { value: num(1, 0.0)? },
        "cosine" => InitialProfile::Cosine {
            amplitude: num(1, 0.5)?,
            offset: num(2, 0.0)?,
            frequency: parts.get(3).map_or(Ok(1), |v| v.parse())?,
        },
        other => bail!("unknown initial profile {other:?}"),
    };
    profile.validate()?;
    Ok(profile)
}

fn tilt_from(file: &Option<PathBuf>, constant: &Option<String>, params: &ModelParams) -> Result<Option<PotentialGrid>> {
    let v = match (file, constant) {
        (Some(_), Some(_)) => bail!("give either a tilt file or a constant tilt"),
        (Some(f), None) => Some(load_potential(f, params.dim)?),
        (None, Some(c)) => Some(PotentialGrid::constant(params.dim, &parse_list(c)?)?),
        (None, None) => None,
    };
    if let Some(v) = &v {
        if v.n_colors() != params.n_colors() {
            bail!("tilt has {} colors, model has {}", v.n_colors(), params.n_colors());
        }
    }
    Ok(v)
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long, default_value_t = 0.01)]
    dt_rec: f64,
    /// Snapshot mesh side; must divide L.
    #[arg(long)]
    snapshot_mesh: Option<usize>,
    #[arg(long, default_value = "constant:0")]
    initial: String,
    /// Potential CSV.
    #[arg(long)]
    tilt: Option<PathBuf>,
    /// Constant potential per color, `v0,v1,...`.
    #[arg(long, allow_hyphen_values = true)]
    tilt_constant: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 256)]
    mesh: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0.01)]
    dt_rec: f64,
    #[arg(long, default_value = "constant:0")]
    initial: String,
    /// Initial colored profile from the first snapshot of a path CSV.
    #[arg(long)]
    initial_csv: Option<PathBuf>,
    #[arg(long)]
    tilt: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    tilt_constant: Option<String>,
    /// Exponential integrator instead of RK4 (untilted only).
    #[arg(long)]
    reference: bool,
    #[arg(long, default_value = "path.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    path: PathBuf,
    /// Use every k-th snapshot for the time quadrature.
    #[arg(long, default_value_t = 1)]
    time_stride: usize,
    /// Also charge the initial condition against this profile.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, default_value = "rate.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ControlArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    path: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Step for the round-trip integration.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value = "potential.csv")]
    out: PathBuf,
    #[arg(long, default_value = "roundtrip.json")]
    report: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration in TOML.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncation: usize,
    /// Compare only the final profiles.
    #[arg(long)]
    final_only: bool,
}

#[derive(Args)]
struct DiagnosticsArgs {
    /// Diagnostics configuration in TOML; the default suite runs on the model otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "diagnostics.json")]
    out: PathBuf,
}

fn read_toml<T: DeserializeOwned>(file: &Path) -> Result<T> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    Ok(toml::from_str(&text)?)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let params = args.model.params()?;
    let initial = parse_initial(&args.initial)?;
    let v = tilt_from(&args.tilt, &args.tilt_constant, &params)?;
    let model = Model::new(params.clone())?;
    let alpha = sample_disorder(&params, derive_seed(args.seed, u64::MAX));
    let lattice = params.lattice();
    let mean: Vec<f64> = (0..lattice.len()).map(|x| initial.eval(&lattice.position(x))).collect();
    let opts = SimOptions { dt_rec: args.dt_rec, snapshot_mesh: args.snapshot_mesh, record_events: false };
    fs::create_dir_all(&args.out)?;
    use rayon::prelude::*;
    let summaries: Vec<serde_json::Value> = (0..args.replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<serde_json::Value> {
            let mut rng = replica_rng(args.seed, r);
            let sigma0 = SpinConfig::sample_with_mean(&mean, &model.kernel, &mut rng)?;
            let field = v.as_ref().map(|v| v as &dyn SpaceTimeField);
            let rec = simulate_with_rng(&model, &alpha, sigma0, field, &mut rng, &opts)?;
            let file = args.out.join(format!("replica_{r}.csv"));
            save_path(&rec.path()?, &file)?;
            let magnetization = rec.final_spins.iter().map(|&s| s as f64).sum::<f64>() / rec.final_spins.len() as f64;
            Ok(json!({
                "replica": r,
                "events": rec.events,
                "candidates": rec.candidates,
                "log_weight": rec.log_weight(),
                "final_magnetization": magnetization,
                "snapshots": file,
            }))
        })
        .collect::<Result<_>>()?;
    let fractions: Vec<f64> = (0..params.n_colors()).map(|i| alpha.fraction(i)).collect();
    let summary = json!({
        "version": VERSION,
        "seed": args.seed,
        "params": params,
        "initial": initial,
        "tilted": v.is_some(),
        "color_fractions": fractions,
        "replicas": summaries,
    });
    save_json(&summary, args.out.join("summary.json"))?;
    print_json(&summary)
}

fn solve_pde(args: SolveArgs) -> Result<()> {
    let params = args.model.params()?;
    let mm = MeshModel::new(&params, args.mesh)?;
    let m0 = match &args.initial_csv {
        Some(f) => {
            let p = load_path(f, params.dim)?;
            if p.grid() != mm.grid() {
                bail!("initial profile mesh {} differs from --mesh {}", p.grid().side, args.mesh);
            }
            p.profiles[0].clone()
        }
        None => {
            let init = parse_initial(&args.initial)?;
            ColoredProfile::proportional(mm.grid(), &params.colors, |r| init.eval(r))
        }
    };
    let v = tilt_from(&args.tilt, &args.tilt_constant, &params)?;
    let opts = SolveOptions { dt: args.dt, dt_rec: args.dt_rec };
    let (path, scheme) = if args.reference {
        if v.is_some() {
            bail!("the exponential integrator handles the untilted flow only");
        }
        (mm.reference_solution(&m0, opts)?.path, "etdrk4")
    } else {
        (mm.integrate(&m0, v.as_ref().map(|v| v as &dyn SpaceTimeField), opts)?, "rk4")
    };
    save_path(&path, &args.out)?;
    let last = path.profiles.last().expect("non-empty path");
    print_json(&json!({
        "version": VERSION,
        "scheme": scheme,
        "mesh": args.mesh,
        "snapshots": path.len(),
        "margin": path.margin(&params.colors),
        "final_total": last.total().iter().sum::<f64>() / last.grid.len() as f64,
        "out": args.out,
    }))
}

fn strided(path: &PathGrid, k: usize) -> Result<PathGrid> {
    if k <= 1 {
        return Ok(path.clone());
    }
    if (path.len() - 1) % k != 0 {
        bail!("stride {k} does not divide {} intervals", path.len() - 1);
    }
    let idx: Vec<usize> = (0..path.len()).step_by(k).collect();
    Ok(PathGrid::new(
        idx.iter().map(|&i| path.times[i]).collect(),
        idx.iter().map(|&i| path.profiles[i].clone()).collect(),
    )?)
}

fn rate(args: RateArgs) -> Result<()> {
    let params = args.model.params()?;
    let path = strided(&load_path(&args.path, params.dim)?, args.time_stride)?;
    let mm = MeshModel::new(&params, path.grid().side)?;
    let report = match &args.initial {
        Some(s) => {
            let init = parse_initial(s)?;
            let m0: Vec<f64> = (0..mm.grid().len()).map(|c| init.eval(&mm.grid().position(c))).collect();
            i_m0(&mm, &path, &m0)?
        }
        None => i0_path(&mm, &path)?,
    };
    save_json(&report, &args.out)?;
    let table = args.out.with_extension("csv");
    let mut rows = String::from("t,cost\n");
    for (t, c) in report.times.iter().zip(&report.per_time) {
        rows.push_str(&format!("{t},{}\n", c.value()));
    }
    fs::write(&table, rows)?;
    print_json(&json!({ "value": report.value, "per_color": report.per_color, "report": args.out, "per_time": table }))
}

fn synthesize_control(args: ControlArgs) -> Result<()> {
    let params = args.model.params()?;
    let path = load_path(&args.path, params.dim)?;
    let mm = MeshModel::new(&params, path.grid().side)?;
    let v = synthesize_v(&mm, &path, args.margin)?;
    save_potential(&v, &args.out)?;
    let rt = verify_roundtrip(&mm, &path, args.dt)?;
    let report = json!({
        "version": VERSION,
        "sup_error": rt.sup_error,
        "sup_potential": v.sup_abs(),
        "margin": path.margin(&params.colors),
        "potential": args.out,
    });
    save_json(&report, &args.report)?;
    print_json(&report)
}

fn tilt_estimate(args: ExperimentArgs) -> Result<()> {
    let config: TiltConfig = read_toml(&args.config)?;
    let report = run_tilted_estimate(&config, args.seed)?;
    save_json(&report, &args.out)?;
    let levels: Vec<_> = report
        .levels
        .iter()
        .map(|l| json!({"side": l.side, "rate": l.rate, "hit_fraction": l.hit_fraction, "inconclusive": l.inconclusive}))
        .collect();
    print_json(&json!({ "cost_kv": report.cost_kv, "cost_i0": report.cost_i0, "levels": levels }))
}

fn hydro(args: ExperimentArgs) -> Result<()> {
    let config: HydroConfig = read_toml(&args.config)?;
    let report = run_hydrodynamic_convergence(&config, args.seed)?;
    save_json(&report, &args.out)?;
    let levels: Vec<_> = report
        .levels
        .iter()
        .map(|l| json!({"side": l.side, "medians": l.medians, "means": l.means}))
        .collect();
    print_json(&json!({ "levels": levels }))
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let a = load_path(&args.a, args.dim)?;
    let b = load_path(&args.b, args.dim)?;
    let bank = TestBank::trigonometric(args.dim, args.truncation);
    let value = if args.final_only {
        rho(a.profiles.last().unwrap(), b.profiles.last().unwrap(), &bank)?
    } else {
        path_distance(&a, &b, &bank)?
    };
    print_json(&json!({ "distance": value, "final_only": args.final_only, "truncation": args.truncation }))
}

fn diagnostics(args: DiagnosticsArgs) -> Result<()> {
    let config = match &args.config {
        Some(f) => read_toml::<DiagnosticsConfig>(f)?,
        None => DiagnosticsConfig::default_suite(args.model.params()?),
    };
    let report = run_diagnostics(&config, args.seed)?;
    save_json(&report, &args.out)?;
    print_json(&serde_json::to_value(&report.results)?)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    configure_threads()?;
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::SolvePde(a) => solve_pde(a),
        Command::Rate(a) => rate(a),
        Command::SynthesizeControl(a) => synthesize_control(a),
        Command::TiltEstimate(a) => tilt_estimate(a),
        Command::Hydro(a) => hydro(a),
        Command::Metrics(a) => metrics(a),
        Command::Diagnostics(a) => diagnostics(a),
    }
}
