//! Simulated acquisition described by a [`RunConfig`].

use lama::objective::Problem;
use lama::tomo::{self, Geometry, ViewSelector};
use lama::{Image, Sinogram};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{PhantomConfig, RunConfig};
use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub geometry: Geometry,
    pub selector: ViewSelector,
    /// Clean phantom, the reference for image metrics.
    pub truth: Image,
    /// `A·truth`, the reference for sinogram metrics.
    pub full: Sinogram,
    /// Object actually scanned: the phantom plus noise when configured.
    pub scanned: Image,
    pub scanned_full: Sinogram,
    /// Measured views of `scanned_full`.
    pub measured: Sinogram,
}

impl Scenario {
    pub fn simulate(cfg: &RunConfig) -> Result<Self, CliError> {
        let geometry = cfg.geometry()?;
        let selector = cfg.selector()?;
        let n = geometry.image_size;
        let truth = match cfg.phantom {
            PhantomConfig::SheppLogan => tomo::shepp_logan(n)?,
            PhantomConfig::Disk { radius, value } => tomo::disk_phantom(n, radius, value)?,
        };
        let scanned = add_noise(&truth, cfg.noise_std, cfg.seed);
        Self::from_images(geometry, selector, truth, scanned)
    }

    /// Rebuilds the scenario around a phantom and a measurement read from
    /// disk. The scanned object is unknown, so the clean one stands in.
    pub fn from_measurement(cfg: &RunConfig, truth: Image, measured: Sinogram) -> Result<Self, CliError> {
        let geometry = cfg.geometry()?;
        let selector = cfg.selector()?;
        geometry
            .check_image(&truth, "input phantom")
            .map_err(|e| CliError::Config(e.to_string()))?;
        let expected = (selector.sparse_view_count(), geometry.n_detectors);
        if measured.shape() != expected {
            return Err(CliError::Config(format!(
                "input sparse sinogram is {:?}, the config expects {expected:?}",
                measured.shape()
            )));
        }
        let full = tomo::project(&truth, &geometry)?;
        Ok(Self {
            geometry,
            selector,
            scanned: truth.clone(),
            scanned_full: full.clone(),
            truth,
            full,
            measured,
        })
    }

    fn from_images(geometry: Geometry, selector: ViewSelector, truth: Image, scanned: Image) -> Result<Self, CliError> {
        let full = tomo::project(&truth, &geometry)?;
        let scanned_full = tomo::project(&scanned, &geometry)?;
        let measured = tomo::select(&scanned_full, &selector)?;
        Ok(Self {
            geometry,
            selector,
            truth,
            full,
            scanned,
            scanned_full,
            measured,
        })
    }

    pub fn problem(&self, cfg: &RunConfig) -> Result<Problem, CliError> {
        Ok(Problem::new(
            self.geometry.clone(),
            self.selector,
            self.measured.clone(),
            cfg.solver.lambda,
            cfg.regularizer.image.build()?,
            cfg.regularizer.sinogram.build()?,
        )?)
    }
}

/// `img + N(0, std²)` per pixel in row-major order, seeded.
pub fn add_noise(img: &Image, std: f64, seed: u64) -> Image {
    if std == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("validated std");
    Image::new(img.data.mapv(|v| v + normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::load(
            None,
            &["geometry.image_size=16".into(), "geometry.n_views=32".into(), "geometry.rate=4".into()],
        )
        .unwrap()
    }

    #[test]
    fn clean_scenario_measures_the_phantom() {
        let s = Scenario::simulate(&small()).unwrap();
        assert_eq!(s.scanned, s.truth);
        assert_eq!(s.measured.shape(), (8, s.geometry.n_detectors));
        assert_eq!(s.measured, tomo::select(&s.full, &s.selector).unwrap());
    }

    #[test]
    fn noise_is_seeded_and_has_the_requested_scale() {
        let img = Image::zeros(64, 64);
        let a = add_noise(&img, 0.03, 5);
        assert_eq!(a, add_noise(&img, 0.03, 5));
        assert_ne!(a, add_noise(&img, 0.03, 6));
        let std = (a.norm_sq() / 4096.0).sqrt();
        assert!((std - 0.03).abs() < 0.002, "{std}");
    }

    #[test]
    fn measurement_shape_is_checked() {
        let cfg = small();
        let s = Scenario::simulate(&cfg).unwrap();
        assert!(Scenario::from_measurement(&cfg, s.truth.clone(), s.full.clone()).is_err());
        let back = Scenario::from_measurement(&cfg, s.truth.clone(), s.measured.clone()).unwrap();
        assert_eq!(back.full, s.full);
    }
}
