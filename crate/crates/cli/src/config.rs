//! Run configuration: one TOML file plus dotted `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use lama::initnet::ViewShiftOperator;
use lama::io;
use lama::regnet::RegularizerNet;
use lama::solver::SolverConfig;
use lama::tomo::{Geometry, ViewSelector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds the noise added to the ground truth.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Standard deviation of Gaussian noise added to the phantom before
    /// projection. Zero disables it.
    pub noise_std: f64,
    pub geometry: GeometryConfig,
    pub phantom: PhantomConfig,
    pub regularizer: RegularizerConfig,
    pub init: InitConfig,
    pub solver: SolverSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub image_size: usize,
    /// Full-view count; must be divisible by `rate`.
    pub n_views: usize,
    /// Detector bins. Zero picks `ceil(√2·image_size)`.
    pub n_detectors: usize,
    /// Keep every `rate`-th view.
    pub rate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum PhantomConfig {
    #[default]
    SheppLogan,
    Disk { radius: f64, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizerConfig {
    pub image: RegularizerSpec,
    pub sinogram: RegularizerSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "preset", rename_all = "kebab-case")]
pub enum RegularizerSpec {
    Zero,
    TvLike { weight: f64 },
    /// Weights saved with `lama::io::save_net`.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub kind: InitKind,
    /// Weight file for the learned kind.
    pub weights: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Nearest,
    LinearInterp,
    Learned,
}

/// Every [`SolverConfig`] field plus the consistency weight `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_bar0: f64,
    pub beta_bar0: f64,
    pub rho: f64,
    pub delta: f64,
    pub eta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub eps_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub stationary_tol: f64,
    /// Weight of the SSIM term in the reported loss.
    pub ssim_weight: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("lama-out"),
            noise_std: 0.0,
            geometry: GeometryConfig::default(),
            phantom: PhantomConfig::SheppLogan,
            regularizer: RegularizerConfig::default(),
            init: InitConfig::default(),
            solver: SolverSection::default(),
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            image_size: 128,
            n_views: 360,
            n_detectors: 0,
            rate: 6,
        }
    }
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            image: RegularizerSpec::TvLike { weight: 1e-5 },
            sinogram: RegularizerSpec::TvLike { weight: 1e-5 },
        }
    }
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::LinearInterp,
            weights: None,
        }
    }
}

impl Default for SolverSection {
    /// Block steps matched to the standard geometry: `α = 1/(1+λ)` for the
    /// z-block and `β ≈ 1.6/‖A‖²` for the x-block.
    fn default() -> Self {
        let base = SolverConfig::default();
        Self {
            lambda: lama::objective::DEFAULT_LAMBDA,
            alpha: 0.5,
            beta: 0.6,
            alpha_hat: 0.25,
            beta_hat: 0.3,
            alpha_bar0: base.alpha_bar0,
            beta_bar0: base.beta_bar0,
            rho: base.rho,
            delta: base.delta,
            eta: base.eta,
            sigma: base.sigma,
            gamma: base.gamma,
            eps0: base.eps0,
            eps_tol: base.eps_tol,
            max_iters: 900,
            max_backtracks: base.max_backtracks,
            stationary_tol: base.stationary_tol,
            ssim_weight: lama::solver::DEFAULT_SSIM_WEIGHT,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            beta: self.beta,
            alpha_hat: self.alpha_hat,
            beta_hat: self.beta_hat,
            alpha_bar0: self.alpha_bar0,
            beta_bar0: self.beta_bar0,
            rho: self.rho,
            delta: self.delta,
            eta: self.eta,
            sigma: self.sigma,
            gamma: self.gamma,
            eps0: self.eps0,
            eps_tol: self.eps_tol,
            max_iters: self.max_iters,
            max_backtracks: self.max_backtracks,
            stationary_tol: self.stationary_tol,
            record_iterates: false,
        }
    }
}

impl RegularizerSpec {
    pub fn build(&self) -> Result<RegularizerNet, CliError> {
        match self {
            Self::Zero => Ok(RegularizerNet::zero()),
            Self::TvLike { weight } if weight.is_finite() && *weight >= 0.0 => Ok(RegularizerNet::tv_like(*weight)),
            Self::TvLike { weight } => Err(CliError::Config(format!("tv-like weight must be >= 0, got {weight}"))),
            Self::File { path } => Ok(io::load_net(path)?),
        }
    }
}

impl RunConfig {
    /// Layers the file at `path` and then `overrides` over the defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = toml::Table::try_from(Self::default()).expect("defaults serialize");
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let file = text
                .parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            merge(&mut table, file, "");
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(self.solver.ssim_weight.is_finite() && self.solver.ssim_weight >= 0.0) {
            return bad(format!("ssim_weight must be >= 0, got {}", self.solver.ssim_weight));
        }
        if let PhantomConfig::Disk { radius, value } = self.phantom {
            if !(radius.is_finite() && radius > 0.0) || !(0.0..=1.0).contains(&value) {
                return bad(format!("disk needs radius > 0 and value in [0, 1], got {radius}, {value}"));
            }
        }
        if self.init.kind == InitKind::Learned && self.init.weights.is_none() {
            return bad("init.kind = \"learned\" needs init.weights".into());
        }
        self.geometry()?;
        self.selector()?;
        self.solver.solver_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.solver.lambda.is_finite() && self.solver.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.solver.lambda));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry, CliError> {
        let g = &self.geometry;
        let standard = Geometry::standard(g.image_size, g.n_views).map_err(|e| CliError::Config(e.to_string()))?;
        if g.n_detectors == 0 {
            return Ok(standard);
        }
        Geometry::new(g.image_size, g.n_detectors, g.n_views, standard.detector_spacing, standard.pixel_spacing)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn selector(&self) -> Result<ViewSelector, CliError> {
        ViewSelector::new(self.geometry.rate, 0, self.geometry.n_views).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn initializer(&self) -> Result<ViewShiftOperator, CliError> {
        Ok(match self.init.kind {
            InitKind::Nearest => ViewShiftOperator::Nearest,
            InitKind::LinearInterp => ViewShiftOperator::LinearInterp,
            InitKind::Learned => {
                let path = self.init.weights.as_ref().expect("validated");
                ViewShiftOperator::learned(io::load_net(path)?).map_err(|e| CliError::Config(e.to_string()))?
            }
        })
    }
}

/// Tables holding an internally tagged enum, with their tag key. Switching
/// the tag replaces the whole table so stale variant fields do not linger.
const TAGGED: [(&str, &str); 3] = [
    ("phantom", "kind"),
    ("regularizer.image", "preset"),
    ("regularizer.sinogram", "preset"),
];

fn tag_of(path: &str) -> Option<&'static str> {
    TAGGED.iter().find(|(p, _)| *p == path).map(|(_, tag)| *tag)
}

fn merge(base: &mut toml::Table, incoming: toml::Table, prefix: &str) {
    for (key, value) in incoming {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(v)) if tag_of(&path).is_none() => merge(b, v, &path),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// `a.b.c=value`: the value is read as a TOML literal, or as a bare string
/// when it does not parse as one.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut node = table;
    for part in parents {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {part} is not a table")))?;
    }
    if tag_of(&parents.join(".")) == Some(*last) && node.get(*last) != Some(&value) {
        node.clear();
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(
            None,
            &[
                "solver.max_iters=7".into(),
                "geometry.image_size=32".into(),
                "geometry.n_views=64".into(),
                "geometry.rate=4".into(),
                "regularizer.image.weight=0.03".into(),
                "regularizer.sinogram.preset=zero".into(),
                "init.kind=nearest".into(),
                "output_dir=some/dir".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.solver.max_iters, 7);
        assert_eq!(cfg.geometry.image_size, 32);
        assert_eq!(cfg.regularizer.image, RegularizerSpec::TvLike { weight: 0.03 });
        assert_eq!(cfg.regularizer.sinogram, RegularizerSpec::Zero);
        assert_eq!(cfg.init.kind, InitKind::Nearest);
        assert_eq!(cfg.output_dir, PathBuf::from("some/dir"));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for o in ["solver.alhpa=1", "geometry.rate=7", "solver.rho=1.5", "noise_std=-1", "solver", "x..y=1"] {
            assert!(matches!(RunConfig::load(None, &[o.into()]), Err(CliError::Config(_))), "{o}");
        }
    }

    #[test]
    fn detector_count_override() {
        let cfg = RunConfig::load(None, &["geometry.n_detectors=200".into()]).unwrap();
        assert_eq!(cfg.geometry().unwrap().n_detectors, 200);
        assert_eq!(RunConfig::default().geometry().unwrap().n_detectors, 182);
    }
}
