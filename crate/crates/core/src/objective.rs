//! Dual-domain objective
//!
//! ```text
//! f(x, z)   = ½‖Ax − z‖² + (λ/2)‖P₀z − s‖²
//! Φ(x, z)   = f(x, z) + ‖g_R(x)‖₂,₁ + ‖g_Q(z)‖₂,₁
//! Φ_ε(x, z) = f(x, z) + r_ε^R(x) + r_ε^Q(z)
//! ```
//!
//! Gradient norms are Euclidean norms of the stacked `(x, z)` vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::regnet::{self, LipschitzEstimate, RegularizerNet};
use crate::tomo::{self, Geometry, ViewSelector};
use crate::{Image, Sinogram};

pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct Problem {
    pub geometry: Geometry,
    /// `P₀`
    pub selector: ViewSelector,
    /// Sparse-view measurement `s`.
    pub measured: Sinogram,
    pub lambda: f64,
    /// Image-domain extractor (`R`).
    pub reg_x: RegularizerNet,
    /// Sinogram-domain extractor (`Q`).
    pub reg_z: RegularizerNet,
}

/// Solver state `(x_k, z_k, ε_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: Image,
    pub z: Sinogram,
    pub eps: f64,
}

impl Iterate {
    pub fn new(x: Image, z: Sinogram, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("smoothing level must be positive, got {eps}")));
        }
        Ok(Self { x, z, eps })
    }
}

/// Estimated Lipschitz constants of the objective's gradient pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothness {
    /// Largest eigenvalue of the Hessian of `f`.
    pub data_term: f64,
    pub reg_x: LipschitzEstimate,
    pub reg_z: LipschitzEstimate,
}

impl Smoothness {
    /// `L̂_ε` for `∇Φ_ε`: the block-diagonal regularizer Hessian adds at most
    /// the larger of the two regularizer constants.
    pub fn bound(&self, eps: f64) -> f64 {
        self.data_term + self.reg_x.bound(eps).max(self.reg_z.bound(eps))
    }
}

/// Value of `Φ_ε` split by term, plus `Ax` for reuse.
#[derive(Clone, Debug)]
pub(crate) struct Evaluation {
    pub projection: Sinogram,
    pub phi: f64,
}

impl Problem {
    pub fn new(
        geometry: Geometry,
        selector: ViewSelector,
        measured: Sinogram,
        lambda: f64,
        reg_x: RegularizerNet,
        reg_z: RegularizerNet,
    ) -> Result<Self> {
        geometry.validate()?;
        if selector.full_view_count != geometry.n_views_full {
            return Err(Error::shape(
                "problem selector",
                &[geometry.n_views_full],
                &[selector.full_view_count],
            ));
        }
        if measured.shape() != (selector.sparse_view_count(), geometry.n_detectors) {
            return Err(Error::shape(
                "problem measurement",
                &[selector.sparse_view_count(), geometry.n_detectors],
                &[measured.rows(), measured.cols()],
            ));
        }
        if !measured.is_finite() {
            return Err(Error::invalid("measured sinogram must be finite"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            geometry,
            selector,
            measured,
            lambda,
            reg_x,
            reg_z,
        })
    }

    fn check(&self, x: &Image, z: &Sinogram) -> Result<()> {
        self.geometry.check_image(x, "objective image")?;
        self.geometry.check_sinogram(z, "objective sinogram")
    }

    /// `P₀z − s`
    fn consistency_residual(&self, z: &Sinogram) -> Result<Sinogram> {
        let selected = tomo::select(z, &self.selector)?;
        Ok(selected.add_scaled(-1.0, &self.measured))
    }

    fn f_from_projection(&self, ax: &Sinogram, z: &Sinogram) -> Result<f64> {
        let fidelity = ax.distance(z).powi(2);
        let consistency = self.consistency_residual(z)?.norm_sq();
        Ok(0.5 * fidelity + 0.5 * self.lambda * consistency)
    }

    /// `∇_z f = −(Ax − z) + λ P₀ᵀ(P₀z − s)`
    fn grad_z_from_projection(&self, ax: &Sinogram, z: &Sinogram) -> Result<Sinogram> {
        let lifted = tomo::embed(&self.consistency_residual(z)?, &self.selector)?;
        Ok(z.add_scaled(-1.0, ax).add_scaled(self.lambda, &lifted))
    }

    pub(crate) fn evaluate(&self, x: &Image, z: &Sinogram, eps: f64) -> Result<Evaluation> {
        self.check(x, z)?;
        let projection = tomo::project(x, &self.geometry)?;
        let phi = self.f_from_projection(&projection, z)?
            + regnet::smoothed_value(&self.reg_x, &x.data.view(), eps)?
            + regnet::smoothed_value(&self.reg_z, &z.data.view(), eps)?;
        Ok(Evaluation { projection, phi })
    }

    /// `∇Φ_ε(x, z)` given `Ax`.
    pub(crate) fn gradient(&self, x: &Image, z: &Sinogram, projection: &Sinogram, eps: f64) -> Result<(Image, Sinogram)> {
        let gx = tomo::backproject(&projection.add_scaled(-1.0, z), &self.geometry)?;
        let gx = Image::new(gx.data + regnet::smoothed_gradient(&self.reg_x, &x.data.view(), eps)?);
        let gz = self.grad_z_from_projection(projection, z)?;
        let gz = Sinogram::new(gz.data + regnet::smoothed_gradient(&self.reg_z, &z.data.view(), eps)?);
        Ok((gx, gz))
    }

    /// Largest Hessian eigenvalue of `f` by power iteration, then the
    /// regularizer estimates at this problem's shapes.
    pub fn smoothness(&self, probes: usize) -> Result<Smoothness> {
        Ok(Smoothness {
            data_term: self.data_term_lipschitz()?,
            reg_x: regnet::lipschitz_estimate(&self.reg_x, self.geometry.image_shape(), probes)?,
            reg_z: regnet::lipschitz_estimate(&self.reg_z, self.geometry.sinogram_shape(), probes)?,
        })
    }

    /// `L̂_f`: power iteration on the Hessian of `f`,
    /// `(u, w) ↦ (Aᵀ(Au − w), −(Au − w) + λP₀ᵀP₀w)`.
    pub fn data_term_lipschitz(&self) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4c66);
        let (n, _) = self.geometry.image_shape();
        let (v, d) = self.geometry.sinogram_shape();
        let mut u = Image::from_shape_vec(n, n, (0..n * n).map(|_| StandardNormal.sample(&mut rng)).collect())?;
        let mut w = Sinogram::from_shape_vec(v, d, (0..v * d).map(|_| StandardNormal.sample(&mut rng)).collect())?;
        let mut estimate = 0.0;
        for _ in 0..DATA_TERM_POWER_ITERATIONS {
            let norm = (u.norm_sq() + w.norm_sq()).sqrt();
            u = u.scaled(1.0 / norm);
            w = w.scaled(1.0 / norm);
            let residual = tomo::project(&u, &self.geometry)?.add_scaled(-1.0, &w);
            let hu = tomo::backproject(&residual, &self.geometry)?;
            let selected = tomo::select(&w, &self.selector)?;
            let hw = tomo::embed(&selected, &self.selector)?
                .scaled(self.lambda)
                .add_scaled(-1.0, &residual);
            estimate = (hu.norm_sq() + hw.norm_sq()).sqrt();
            u = hu;
            w = hw;
        }
        Ok(estimate)
    }
}

/// The leading eigenvalue is well separated, so a few dozen steps settle it
/// to well under a percent.
const DATA_TERM_POWER_ITERATIONS: usize = 40;

/// `½‖Ax − z‖² + (λ/2)‖P₀z − s‖²`
pub fn f_value(p: &Problem, x: &Image, z: &Sinogram) -> Result<f64> {
    p.check(x, z)?;
    p.f_from_projection(&tomo::project(x, &p.geometry)?, z)
}

/// `Aᵀ(Ax − z)`
pub fn grad_f_x(p: &Problem, x: &Image, z: &Sinogram) -> Result<Image> {
    p.check(x, z)?;
    let residual = tomo::project(x, &p.geometry)?.add_scaled(-1.0, z);
    tomo::backproject(&residual, &p.geometry)
}

/// `−(Ax − z) + λP₀ᵀ(P₀z − s)`
pub fn grad_f_z(p: &Problem, x: &Image, z: &Sinogram) -> Result<Sinogram> {
    p.check(x, z)?;
    p.grad_z_from_projection(&tomo::project(x, &p.geometry)?, z)
}

/// Nonsmooth objective `Φ(x, z)`.
pub fn phi_value(p: &Problem, x: &Image, z: &Sinogram) -> Result<f64> {
    let r = regnet::l21_norm(&regnet::feature_forward(&p.reg_x, &x.data.view())?);
    let q = regnet::l21_norm(&regnet::feature_forward(&p.reg_z, &z.data.view())?);
    Ok(f_value(p, x, z)? + r + q)
}

pub fn phi_eps_value(p: &Problem, it: &Iterate) -> Result<f64> {
    Ok(p.evaluate(&it.x, &it.z, it.eps)?.phi)
}

pub fn grad_phi_eps(p: &Problem, it: &Iterate) -> Result<(Image, Sinogram)> {
    p.check(&it.x, &it.z)?;
    let projection = tomo::project(&it.x, &p.geometry)?;
    p.gradient(&it.x, &it.z, &projection, it.eps)
}

/// Euclidean norm of the stacked gradient pair.
pub fn stacked_norm(gx: &Image, gz: &Sinogram) -> f64 {
    (gx.norm_sq() + gz.norm_sq()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_problem(reg_x: RegularizerNet, reg_z: RegularizerNet, seed: u64) -> (Problem, Image, Sinogram) {
        let geo = Geometry::new(8, 10, 6, 0.125, 0.125).unwrap();
        let sel = ViewSelector::new(3, 0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let measured = Sinogram::from_shape_vec(2, 10, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let x = Image::from_shape_vec(8, 8, (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let z = Sinogram::from_shape_vec(6, 10, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        (Problem::new(geo, sel, measured, 0.7, reg_x, reg_z).unwrap(), x, z)
    }

    fn fd_error_x(p: &Problem, x: &Image, z: &Sinogram, g: &Image, value: impl Fn(&Image, &Sinogram) -> f64) -> f64 {
        let h = 1e-5 * (1.0 + x.data.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut fd = p.geometry.zero_image();
        for idx in 0..x.data.len() {
            let (i, j) = (idx / x.cols(), idx % x.cols());
            let mut xp = x.clone();
            xp.data[[i, j]] += h;
            let mut xm = x.clone();
            xm.data[[i, j]] -= h;
            fd.data[[i, j]] = (value(&xp, z) - value(&xm, z)) / (2.0 * h);
        }
        fd.distance(g) / g.norm()
    }

    fn fd_error_z(x: &Image, z: &Sinogram, g: &Sinogram, value: impl Fn(&Image, &Sinogram) -> f64) -> f64 {
        let h = 1e-5 * (1.0 + z.data.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut fd = Sinogram::zeros(z.rows(), z.cols());
        for idx in 0..z.data.len() {
            let (i, j) = (idx / z.cols(), idx % z.cols());
            let mut zp = z.clone();
            zp.data[[i, j]] += h;
            let mut zm = z.clone();
            zm.data[[i, j]] -= h;
            fd.data[[i, j]] = (value(x, &zp) - value(x, &zm)) / (2.0 * h);
        }
        fd.distance(g) / g.norm()
    }

    #[test]
    fn zero_everything_gives_zero() {
        let (mut p, _, _) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 1);
        p.measured = Sinogram::zeros(2, 10);
        let (x, z) = (p.geometry.zero_image(), p.geometry.zero_sinogram());
        assert_eq!(f_value(&p, &x, &z).unwrap(), 0.0);
    }

    #[test]
    fn consistent_pair_has_zero_fidelity_and_gradient() {
        let (mut p, x, _) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 2);
        let z = tomo::project(&x, &p.geometry).unwrap();
        p.measured = tomo::select(&z, &p.selector).unwrap();
        assert!(f_value(&p, &x, &z).unwrap().abs() < 1e-28);
        assert!(grad_f_x(&p, &x, &z).unwrap().norm() < 1e-14);
        assert!(grad_f_z(&p, &x, &z).unwrap().norm() < 1e-14);
    }

    #[test]
    fn lambda_scales_only_the_consistency_term() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 3);
        let mut doubled = p.clone();
        doubled.lambda *= 2.0;
        let consistency = p.consistency_residual(&z).unwrap().norm_sq();
        let delta = f_value(&doubled, &x, &z).unwrap() - f_value(&p, &x, &z).unwrap();
        assert!((delta - 0.5 * p.lambda * consistency).abs() < 1e-12);
    }

    #[test]
    fn data_gradients_match_finite_differences() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 4);
        let value = |x: &Image, z: &Sinogram| f_value(&p, x, z).unwrap();
        assert!(fd_error_x(&p, &x, &z, &grad_f_x(&p, &x, &z).unwrap(), value) < 1e-6);
        assert!(fd_error_z(&x, &z, &grad_f_z(&p, &x, &z).unwrap(), value) < 1e-6);
    }

    #[test]
    fn data_gradients_are_additive() {
        let (p, x1, z1) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 5);
        let (_, x2, z2) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 6);
        let gx = grad_f_x(&p, &x1.add_scaled(1.0, &x2), &z1.add_scaled(1.0, &z2)).unwrap();
        let sum = grad_f_x(&p, &x1, &z1).unwrap().add_scaled(1.0, &grad_f_x(&p, &x2, &z2).unwrap());
        assert!(gx.distance(&sum) < 1e-12);
    }

    #[test]
    fn unselected_rows_carry_no_consistency_term() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 7);
        let gz = grad_f_z(&p, &x, &z).unwrap();
        let ax = tomo::project(&x, &p.geometry).unwrap();
        for v in (0..6).filter(|v| v % 3 != 0) {
            for d in 0..10 {
                assert!((gz.data[[v, d]] - (z.data[[v, d]] - ax.data[[v, d]])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn phi_terms_add_up() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 8);
        assert_eq!(phi_value(&p, &x, &z).unwrap(), f_value(&p, &x, &z).unwrap());

        let (p, x, z) = small_problem(RegularizerNet::identity(), RegularizerNet::identity(), 8);
        let l1 = x.data.iter().map(|v| v.abs()).sum::<f64>() + z.data.iter().map(|v| v.abs()).sum::<f64>();
        assert!((phi_value(&p, &x, &z).unwrap() - f_value(&p, &x, &z).unwrap() - l1).abs() < 1e-12);

        let net = RegularizerNet::random(&[3, 2], 3, 0.05, 1).unwrap();
        let (p, x, z) = small_problem(net.clone(), RegularizerNet::tv_like(0.5), 9);
        let r = regnet::l21_norm(&regnet::feature_forward(&net, &x.data.view()).unwrap());
        let q = regnet::l21_norm(&regnet::feature_forward(&RegularizerNet::tv_like(0.5), &z.data.view()).unwrap());
        let f = 0.5 * tomo::project(&x, &p.geometry).unwrap().distance(&z).powi(2)
            + 0.35 * tomo::select(&z, &p.selector).unwrap().distance(&p.measured).powi(2);
        assert!((phi_value(&p, &x, &z).unwrap() - (f + r + q)).abs() < 1e-10);
    }

    #[test]
    fn smoothed_objective_is_sandwiched() {
        let net = RegularizerNet::random(&[3, 2], 3, 0.05, 2).unwrap();
        let (p, x, z) = small_problem(net, RegularizerNet::tv_like(0.3), 10);
        let positions = (64 + 60) as f64;
        for eps in [1.0, 0.1, 0.01] {
            let it = Iterate::new(x.clone(), z.clone(), eps).unwrap();
            let smooth = phi_eps_value(&p, &it).unwrap();
            let exact = phi_value(&p, &x, &z).unwrap();
            assert!(smooth <= exact + 1e-12);
            assert!(exact <= smooth + positions * eps / 2.0 + 1e-12);
        }
        // Huge ε keeps every position on the quadratic branch.
        let it = Iterate::new(x.clone(), z.clone(), 1e6).unwrap();
        let quad = f_value(&p, &x, &z).unwrap()
            + regnet::feature_forward(&p.reg_x, &x.data.view()).unwrap().data.mapv(|v| v * v).sum() / 2e6
            + regnet::feature_forward(&p.reg_z, &z.data.view()).unwrap().data.mapv(|v| v * v).sum() / 2e6;
        assert!((phi_eps_value(&p, &it).unwrap() - quad).abs() < 1e-10);
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for eps in [1.0, 0.1, 0.01] {
            let net_x = RegularizerNet::random(&[3, 2], 3, 0.05, rng.gen()).unwrap();
            let net_z = RegularizerNet::random(&[3, 2], 3, 0.05, rng.gen()).unwrap();
            let (p, x, z) = small_problem(net_x, net_z, rng.gen());
            let it = Iterate::new(x.clone(), z.clone(), eps).unwrap();
            let (gx, gz) = grad_phi_eps(&p, &it).unwrap();
            let value = |x: &Image, z: &Sinogram| phi_eps_value(&p, &Iterate::new(x.clone(), z.clone(), eps).unwrap()).unwrap();
            assert!(fd_error_x(&p, &x, &z, &gx, value) < 1e-6);
            assert!(fd_error_z(&x, &z, &gz, value) < 1e-6);
        }
    }

    #[test]
    fn zero_nets_reduce_to_data_gradients() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 12);
        let it = Iterate::new(x.clone(), z.clone(), 0.1).unwrap();
        let (gx, gz) = grad_phi_eps(&p, &it).unwrap();
        assert_eq!(gx, grad_f_x(&p, &x, &z).unwrap());
        assert_eq!(gz, grad_f_z(&p, &x, &z).unwrap());
    }

    #[test]
    fn data_term_constant_bounds_random_quotients() {
        let (p, x, z) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 13);
        let l = p.data_term_lipschitz().unwrap();
        let (_, x2, z2) = small_problem(RegularizerNet::zero(), RegularizerNet::zero(), 14);
        let dgx = grad_f_x(&p, &x, &z).unwrap().add_scaled(-1.0, &grad_f_x(&p, &x2, &z2).unwrap());
        let dgz = grad_f_z(&p, &x, &z).unwrap().add_scaled(-1.0, &grad_f_z(&p, &x2, &z2).unwrap());
        let dist = (x.distance(&x2).powi(2) + z.distance(&z2).powi(2)).sqrt();
        assert!(stacked_norm(&dgx, &dgz) <= l * dist * (1.0 + 1e-9));
        assert!(l > 1.0);
    }

    #[test]
    fn problem_validation() {
        let geo = Geometry::standard(8, 6).unwrap();
        let sel = ViewSelector::new(3, 0, 6).unwrap();
        let good = Sinogram::zeros(2, geo.n_detectors);
        assert!(Problem::new(geo.clone(), sel, good.clone(), 0.0, RegularizerNet::zero(), RegularizerNet::zero()).is_err());
        assert!(Problem::new(geo.clone(), sel, Sinogram::zeros(3, geo.n_detectors), 1.0, RegularizerNet::zero(), RegularizerNet::zero()).is_err());
        let wrong_sel = ViewSelector::new(2, 0, 8).unwrap();
        assert!(Problem::new(geo, wrong_sel, good, 1.0, RegularizerNet::zero(), RegularizerNet::zero()).is_err());
        assert!(Iterate::new(Image::zeros(2, 2), Sinogram::zeros(2, 2), 0.0).is_err());
    }
}
