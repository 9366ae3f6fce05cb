use std::fs;
use std::path::{Path, PathBuf};

use lama::initnet::{init_reconstruct, zero_filled_fbp};
use lama::io::{self, TensorContainer};
use lama::metrics::{data_range, MetricReport};
use lama::objective::Smoothness;
use lama::solver::{lama_solve, loss_report, SolveResult, SolverConfig};
use lama::tomo;
use lama::{Error as CoreError, Image, Sinogram};

use crate::checks::{self, CheckOutcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::scenario::Scenario;

/// Random probes per regularizer Lipschitz estimate.
pub const LIPSCHITZ_PROBES: usize = 4;

/// Keep solver iterates for re-evaluation only below this footprint.
const REEVALUATION_BUDGET_BYTES: usize = 256 << 20;

pub const SIMULATION_FILE: &str = "simulation.lama";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.lama";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(dir)
}

/// Writes the phantom, its full and sparse sinograms and, with noise
/// configured, the noisy variants that the solver actually sees.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = prepare_output(cfg)?;
    let sc = Scenario::simulate(cfg)?;
    let mut c = TensorContainer::new();
    c.insert_image("phantom", &sc.truth)?;
    c.insert_sinogram("full_sinogram", &sc.full)?;
    c.insert_sinogram("sparse_sinogram", &tomo::select(&sc.full, &sc.selector)?)?;
    if cfg.noise_std > 0.0 {
        c.insert_image("noisy_phantom", &sc.scanned)?;
        c.insert_sinogram("noisy_full_sinogram", &sc.scanned_full)?;
        c.insert_sinogram("noisy_sparse_sinogram", &sc.measured)?;
    }
    let container = dir.join(SIMULATION_FILE);
    io::save(&container, &c)?;
    let preview = dir.join("phantom.pgm");
    io::export_pgm(&sc.truth, &preview, pgm_range(&sc.truth))?;
    Ok(vec![dir.join(CONFIG_FILE), container, preview])
}

fn pgm_range(truth: &Image) -> f64 {
    let r = data_range(truth);
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReconstructOptions {
    /// Stop after the zero-filled FBP and the initializer.
    pub baseline_only: bool,
    /// Simulation container to read instead of simulating from the config.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Solve {
    pub config: SolverConfig,
    pub result: SolveResult,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub scenario: Scenario,
    pub zero_filled: Image,
    pub x0: Image,
    pub z0: Sinogram,
    pub solve: Option<Solve>,
}

impl Reconstruction {
    /// `(method, metrics)` rows against the clean phantom and its sinogram.
    /// The zero-filled baseline is scored with its zero-filled sinogram.
    pub fn metrics(&self) -> Result<Vec<(&'static str, MetricReport)>, CliError> {
        let sc = &self.scenario;
        let zero_sino = tomo::embed(&sc.measured, &sc.selector)?;
        let mut rows = vec![
            ("zero_filled_fbp", MetricReport::evaluate(&self.zero_filled, &sc.truth, &zero_sino, &sc.full)?),
            ("init", MetricReport::evaluate(&self.x0, &sc.truth, &self.z0, &sc.full)?),
        ];
        if let Some(s) = &self.solve {
            let it = &s.result.iterate;
            rows.push(("lama", MetricReport::evaluate(&it.x, &sc.truth, &it.z, &sc.full)?));
        }
        Ok(rows)
    }
}

/// Baselines, initializer and solve without touching the file system.
pub fn reconstruct(cfg: &RunConfig, scenario: Scenario, baseline_only: bool) -> Result<Reconstruction, CliError> {
    let sc = scenario;
    let zero_filled = zero_filled_fbp(&sc.measured, &sc.selector, &sc.geometry)?;
    let (x0, z0) = init_reconstruct(&cfg.initializer()?, &sc.measured, &sc.selector, &sc.geometry)?;
    let solve = if baseline_only {
        None
    } else {
        let problem = sc.problem(cfg)?;
        let config = cfg.solver.solver_config();
        let result = lama_solve(&problem, x0.clone(), z0.clone(), &config)?;
        let loss = loss_report(&problem, &result, &sc.truth, cfg.solver.ssim_weight)?;
        Some(Solve { config, result, loss })
    };
    Ok(Reconstruction {
        scenario: sc,
        zero_filled,
        x0,
        z0,
        solve,
    })
}

fn load_scenario(cfg: &RunConfig, input: &Path) -> Result<Scenario, CliError> {
    let c = io::load(input)?;
    let measured = match c.get("noisy_sparse_sinogram") {
        Some(_) => c.sinogram("noisy_sparse_sinogram")?,
        None => c.sinogram("sparse_sinogram")?,
    };
    Scenario::from_measurement(cfg, c.image("phantom")?, measured)
}

/// Runs [`reconstruct`] and writes the container, PGM previews, the trace
/// and the metrics table. A failed line search still leaves its partial
/// trace on disk.
pub fn cmd_reconstruct(cfg: &RunConfig, opts: &ReconstructOptions) -> Result<Reconstruction, CliError> {
    let dir = prepare_output(cfg)?;
    let scenario = match &opts.input {
        Some(path) => load_scenario(cfg, path)?,
        None => Scenario::simulate(cfg)?,
    };
    let rec = match reconstruct(cfg, scenario, opts.baseline_only) {
        Err(CliError::Numerical(CoreError::LineSearchFailure { iteration, backtracks, trace })) => {
            io::export_csv_trace(&trace, dir.join(TRACE_FILE))?;
            return Err(CliError::Numerical(CoreError::LineSearchFailure { iteration, backtracks, trace }));
        }
        other => other?,
    };

    let range = pgm_range(&rec.scenario.truth);
    let mut c = TensorContainer::new();
    c.insert_image("zero_filled_fbp", &rec.zero_filled)?;
    c.insert_image("init_image", &rec.x0)?;
    c.insert_sinogram("init_sinogram", &rec.z0)?;
    io::export_pgm(&rec.zero_filled, dir.join("zero_filled_fbp.pgm"), range)?;
    io::export_pgm(&rec.x0, dir.join("init.pgm"), range)?;
    if let Some(s) = &rec.solve {
        let it = &s.result.iterate;
        c.insert_image("image", &it.x)?;
        c.insert_sinogram("sinogram", &it.z)?;
        c.insert_scalar("final_eps", it.eps)?;
        c.insert_scalar("loss", s.loss)?;
        io::export_pgm(&it.x, dir.join("lama.pgm"), range)?;
        io::export_csv_trace(&s.result.trace, dir.join(TRACE_FILE))?;
    }
    io::save(dir.join(RECONSTRUCTION_FILE), &c)?;

    let mut table = format!("method,{}\n", MetricReport::CSV_HEADER);
    for (name, m) in rec.metrics()? {
        table.push_str(&format!("{name},{}\n", m.csv_row()));
    }
    fs::write(dir.join(METRICS_FILE), table)?;
    Ok(rec)
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Perturb the back-projection inside the adjoint check.
    pub corrupt_adjoint: bool,
}

/// Every invariant check, in report order. Checks that fail do not stop the
/// battery; only errors outside the solver do.
pub fn run_checks(cfg: &RunConfig, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>, CliError> {
    let seed = cfg.seed;
    let mut out = vec![checks::adjoint_check(&cfg.geometry()?, 20, seed, opts.corrupt_adjoint)?];
    out.extend(checks::gradient_checks(20, seed)?);
    out.push(checks::huber_check(20, seed)?);

    let sc = Scenario::simulate(cfg)?;
    let problem = sc.problem(cfg)?;
    let smoothness: Smoothness = problem.smoothness(LIPSCHITZ_PROBES)?;
    let mut config = cfg.solver.solver_config();
    let (n, _) = sc.geometry.image_shape();
    let (v, d) = sc.geometry.sinogram_shape();
    config.record_iterates = (config.max_iters + 1) * (n * n + v * d) * 8 <= REEVALUATION_BUDGET_BYTES;
    let (x0, z0) = init_reconstruct(&cfg.initializer()?, &sc.measured, &sc.selector, &sc.geometry)?;
    match lama_solve(&problem, x0, z0, &config) {
        Ok(result) => out.extend(checks::solve_checks(&problem, &config, &result, &smoothness)?),
        Err(e @ (CoreError::NumericalFailure(_) | CoreError::LineSearchFailure { .. })) => {
            out.push(CheckOutcome::new("solver run", false, e.to_string()));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

/// Prints one line per check and fails with the number of failed checks.
pub fn cmd_verify(cfg: &RunConfig, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>, CliError> {
    prepare_output(cfg)?;
    let outcomes = run_checks(cfg, opts)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    println!("{} checks, {failed} failed", outcomes.len());
    if failed > 0 {
        return Err(CliError::Verification { failed });
    }
    Ok(outcomes)
}
