use super::*;
use crate::objective::{grad_f_x, grad_f_z, grad_phi_eps, phi_eps_value};
use crate::regnet::RegularizerNet;
use crate::tomo::{Geometry, ViewSelector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(reg_x: RegularizerNet, reg_z: RegularizerNet, lambda: f64) -> Problem {
    let geo = Geometry::standard(8, 12).unwrap();
    let sel = ViewSelector::new(3, 0, 12).unwrap();
    let truth = tomo::shepp_logan(8).unwrap();
    let s = tomo::select(&tomo::project(&truth, &geo).unwrap(), &sel).unwrap();
    Problem::new(geo, sel, s, lambda, reg_x, reg_z).unwrap()
}

fn random_iterate(p: &Problem, eps: f64, seed: u64) -> Iterate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, _) = p.geometry.image_shape();
    let (v, d) = p.geometry.sinogram_shape();
    let x = Image::from_shape_vec(n, n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let z = Sinogram::from_shape_vec(v, d, (0..v * d).map(|_| rng.gen_range(0.0..0.5)).collect()).unwrap();
    Iterate::new(x, z, eps).unwrap()
}

/// Dense `A` by projecting every basis image.
fn dense_projector(geo: &Geometry) -> DMatrix<f64> {
    let n = geo.image_size;
    let (v, d) = geo.sinogram_shape();
    let mut a = DMatrix::zeros(v * d, n * n);
    for k in 0..n * n {
        let mut e = geo.zero_image();
        e.data[[k / n, k % n]] = 1.0;
        for (r, &value) in tomo::project(&e, geo).unwrap().data.iter().enumerate() {
            a[(r, k)] = value;
        }
    }
    a
}

fn flat_image(x: &Image) -> DVector<f64> {
    DVector::from_iterator(x.data.len(), x.data.iter().copied())
}

fn flat_sino(z: &Sinogram) -> DVector<f64> {
    DVector::from_iterator(z.data.len(), z.data.iter().copied())
}

/// `P₀ᵀP₀` as a diagonal mask and `P₀ᵀs` on the full sinogram.
fn selection_mask(p: &Problem) -> (DVector<f64>, DVector<f64>) {
    let (v, d) = p.geometry.sinogram_shape();
    let mut mask = DVector::zeros(v * d);
    let mut lifted = DVector::zeros(v * d);
    for (j, view) in p.selector.indices().enumerate() {
        for b in 0..d {
            mask[view * d + b] = 1.0;
            lifted[view * d + b] = p.measured.data[[j, b]];
        }
    }
    (mask, lifted)
}

fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn zero_net_config() -> SolverConfig {
    let mut cfg = SolverConfig::with_data_lipschitz(4.0);
    cfg.alpha_hat = 0.0;
    cfg.beta_hat = 0.0;
    cfg
}

#[test]
fn candidate_with_zero_nets_is_alternating_gradient_step() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1.0);
    let it = random_iterate(&p, 1.0, 1);
    let cfg = zero_net_config();
    let (u_x, u_z) = palm_candidate(&p, &it, &cfg).unwrap();
    let expected_z = it.z.add_scaled(-cfg.alpha, &grad_f_z(&p, &it.x, &it.z).unwrap());
    let expected_x = it.x.add_scaled(-cfg.beta, &grad_f_x(&p, &it.x, &expected_z).unwrap());
    assert!(u_z.distance(&expected_z) <= 1e-14 * (1.0 + expected_z.norm()));
    assert!(u_x.distance(&expected_x) <= 1e-14 * (1.0 + expected_x.norm()));
}

#[test]
fn candidate_matches_dense_oracle() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 2.0);
    let it = random_iterate(&p, 0.5, 2);
    let cfg = SolverConfig::with_data_lipschitz(6.0);
    let a = dense_projector(&p.geometry);
    let (mask, lifted) = selection_mask(&p);
    let (x, z) = (flat_image(&it.x), flat_sino(&it.z));
    // u_z = z − α(−(Ax − z) + λ(P₀ᵀP₀z − P₀ᵀs));  u_x = x − βAᵀ(Ax − u_z)
    let ax = &a * &x;
    let grad_z = -(&ax - &z) + (mask.component_mul(&z) - &lifted) * p.lambda;
    let u_z = &z - grad_z * cfg.alpha;
    let u_x = &x - a.transpose() * (&ax - &u_z) * cfg.beta;
    let (got_x, got_z) = palm_candidate(&p, &it, &cfg).unwrap();
    assert!(max_abs_diff(&flat_sino(&got_z), &u_z) < 1e-13);
    assert!(max_abs_diff(&flat_image(&got_x), &u_x) < 1e-13);
}

#[test]
fn candidate_applies_regularizer_steps_at_the_gradient_points() {
    let reg = RegularizerNet::tv_like(0.3);
    let p = problem(reg.clone(), reg.clone(), 1.0);
    let it = random_iterate(&p, 0.1, 3);
    let cfg = SolverConfig::with_data_lipschitz(4.0);
    let b = it.z.add_scaled(-cfg.alpha, &grad_f_z(&p, &it.x, &it.z).unwrap());
    let u_z = Sinogram::new(&b.data - &(regnet::smoothed_gradient(&reg, &b.data.view(), 0.1).unwrap() * cfg.alpha_hat));
    let c = it.x.add_scaled(-cfg.beta, &grad_f_x(&p, &it.x, &u_z).unwrap());
    let u_x = Image::new(&c.data - &(regnet::smoothed_gradient(&reg, &c.data.view(), 0.1).unwrap() * cfg.beta_hat));
    let (got_x, got_z) = palm_candidate(&p, &it, &cfg).unwrap();
    assert!(got_z.distance(&u_z) < 1e-14);
    assert!(got_x.distance(&u_x) < 1e-14);
}

/// A noise-free truth with `z = Ax` is a global minimizer of the
/// zero-regularizer objective.
fn stationary_iterate(p: &Problem) -> Iterate {
    let truth = tomo::shepp_logan(p.geometry.image_size).unwrap();
    let z = tomo::project(&truth, &p.geometry).unwrap();
    Iterate::new(truth, z, 1.0).unwrap()
}

#[test]
fn stationary_point_is_a_fixed_point() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1.0);
    let it = stationary_iterate(&p);
    let (gx, gz) = grad_phi_eps(&p, &it).unwrap();
    assert!(stacked_norm(&gx, &gz) < 1e-14);
    let (u_x, u_z) = palm_candidate(&p, &it, &zero_net_config()).unwrap();
    assert!(u_x.distance(&it.x) < 1e-14 && u_z.distance(&it.z) < 1e-14);
    let (v_x, v_z) = bcd_step(&p, &it, 0.5, 0.5).unwrap();
    assert!(v_x.distance(&it.x) < 1e-14 && v_z.distance(&it.z) < 1e-14);
    assert!(safeguard_check(&p, &it, &it.x, &it.z, 1e6).unwrap());
}

#[test]
fn bcd_step_matches_dense_oracle() {
    let reg = RegularizerNet::tv_like(0.2);
    let p = problem(reg.clone(), RegularizerNet::zero(), 1.5);
    let it = random_iterate(&p, 0.3, 4);
    let (ab, bb) = (0.3, 0.2);
    let a = dense_projector(&p.geometry);
    let (mask, lifted) = selection_mask(&p);
    let (x, z) = (flat_image(&it.x), flat_sino(&it.z));
    let ax = &a * &x;
    let grad_z = -(&ax - &z) + (mask.component_mul(&z) - &lifted) * p.lambda;
    let v_z = &z - grad_z * ab;
    let grad_r = flat_image(&Image::new(regnet::smoothed_gradient(&reg, &it.x.data.view(), 0.3).unwrap()));
    let v_x = &x - (a.transpose() * (&ax - &v_z) + grad_r) * bb;
    let (got_x, got_z) = bcd_step(&p, &it, ab, bb).unwrap();
    assert!(max_abs_diff(&flat_sino(&got_z), &v_z) < 1e-13);
    assert!(max_abs_diff(&flat_image(&got_x), &v_x) < 1e-13);
}

#[test]
fn safeguard_rejects_a_stalled_candidate_away_from_stationarity() {
    let p = problem(RegularizerNet::tv_like(0.1), RegularizerNet::zero(), 1.0);
    let it = random_iterate(&p, 0.5, 5);
    // Zero displacement cannot bound a nonzero gradient.
    assert!(!safeguard_check(&p, &it, &it.x, &it.z, 1e-3).unwrap());
}

#[test]
fn safeguard_acceptance_is_monotone_in_eta() {
    let p = problem(RegularizerNet::tv_like(0.05), RegularizerNet::zero(), 1.0);
    let cfg = SolverConfig::with_data_lipschitz(4.0);
    for seed in 0..5 {
        let it = random_iterate(&p, 0.5, 10 + seed);
        let (u_x, u_z) = palm_candidate(&p, &it, &cfg).unwrap();
        let etas = [1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0, 1e3];
        let verdicts: Vec<bool> = etas.iter().map(|&e| safeguard_check(&p, &it, &u_x, &u_z, e).unwrap()).collect();
        assert!(verdicts[0], "tiny η must accept a descent candidate");
        assert!(!verdicts[etas.len() - 1], "huge η must reject");
        for w in verdicts.windows(2) {
            assert!(w[0] || !w[1], "acceptance must not reappear as η grows: {verdicts:?}");
        }
    }
}

#[test]
fn line_search_with_small_steps_needs_no_backtracking() {
    let p = problem(RegularizerNet::tv_like(0.1), RegularizerNet::zero(), 1.0);
    let it = random_iterate(&p, 0.5, 6);
    let mut cfg = SolverConfig::with_data_lipschitz(4.0);
    cfg.alpha_bar0 = 1e-3;
    cfg.beta_bar0 = 1e-3;
    let out = line_search(&p, &it, &cfg).unwrap();
    assert_eq!(out.backtracks, 0);
    assert_eq!((out.step_z, out.step_x), (1e-3, 1e-3));
    let (v_x, v_z) = bcd_step(&p, &it, 1e-3, 1e-3).unwrap();
    assert_eq!((out.x, out.z), (v_x, v_z));
}

#[test]
fn line_search_backtracks_within_the_bound() {
    let reg = RegularizerNet::tv_like(0.2);
    let p = problem(reg, RegularizerNet::zero(), 30.0);
    let smooth = p.smoothness(4).unwrap();
    let mut cfg = SolverConfig::with_data_lipschitz(smooth.data_term);
    cfg.alpha_bar0 = 0.99;
    cfg.beta_bar0 = 0.99;
    for seed in 0..4 {
        let it = random_iterate(&p, 0.05, 20 + seed);
        let out = line_search(&p, &it, &cfg).unwrap();
        assert!(out.backtracks > 0, "λ = 30 makes the initial z-step unstable");
        assert!(out.backtracks <= cfg.backtrack_bound(smooth.bound(it.eps)));
        let shrink = cfg.rho.powi(out.backtracks as i32);
        assert_eq!(out.step_z, 0.99 * shrink);
        let before = phi_eps_value(&p, &it).unwrap();
        let after = phi_eps_value(&p, &Iterate::new(out.x.clone(), out.z.clone(), it.eps).unwrap()).unwrap();
        let moved = out.x.distance(&it.x).powi(2) + out.z.distance(&it.z).powi(2);
        assert!(after - before <= -cfg.delta * moved);
    }
}

#[test]
fn line_search_failure_reports_the_iteration() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1000.0);
    let it = random_iterate(&p, 1.0, 7);
    let mut cfg = SolverConfig::with_data_lipschitz(1.0);
    cfg.alpha_bar0 = 0.99;
    cfg.max_backtracks = 1;
    match line_search(&p, &it, &cfg) {
        Err(Error::LineSearchFailure { iteration, backtracks, trace }) => {
            assert_eq!((iteration, backtracks), (0, 1));
            assert!(trace.is_empty());
        }
        other => panic!("expected a line-search failure, got {other:?}"),
    }
}

#[test]
fn eps_update_examples() {
    assert_eq!(eps_update(0.1, 1.0, 1.0, 0.5), 0.5);
    // The comparison is strict.
    assert_eq!(eps_update(0.5, 1.0, 1.0, 0.5), 1.0);
    assert_eq!(eps_update(0.6, 1.0, 1.0, 0.5), 1.0);
    assert_eq!(eps_update(0.6, 1.0, 2.0, 0.5), 0.5);
    assert_eq!(eps_update(0.0, 0.25, 1.0, 0.9), 0.225);
}

#[test]
fn solve_returns_immediately_at_a_stationary_point() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1.0);
    let it = stationary_iterate(&p);
    let res = lama_solve(&p, it.x.clone(), it.z.clone(), &SolverConfig::default()).unwrap();
    assert_eq!(res.termination, Termination::Stationary);
    assert!(res.trace.is_empty());
    assert_eq!(res.iterate.x, it.x);
}

#[test]
fn solve_with_eps0_below_tolerance_does_nothing() {
    let p = problem(RegularizerNet::tv_like(0.1), RegularizerNet::zero(), 1.0);
    let it = random_iterate(&p, 1.0, 8);
    let cfg = SolverConfig {
        eps0: 1e-5,
        ..SolverConfig::default()
    };
    let res = lama_solve(&p, it.x.clone(), it.z.clone(), &cfg).unwrap();
    assert_eq!(res.termination, Termination::EpsTolReached);
    assert!(res.trace.is_empty());
}

fn run(eta: f64, iters: usize) -> (Problem, SolverConfig, SolveResult) {
    let p = problem(RegularizerNet::tv_like(0.05), RegularizerNet::tv_like(0.02), 1.0);
    let smooth = p.smoothness(4).unwrap();
    let mut cfg = SolverConfig::with_data_lipschitz(smooth.data_term);
    cfg.eta = eta;
    cfg.max_iters = iters;
    cfg.record_iterates = true;
    let x0 = p.geometry.zero_image();
    let z0 = p.geometry.zero_sinogram();
    let res = lama_solve(&p, x0, z0, &cfg).unwrap();
    (p, cfg, res)
}

#[test]
fn huge_eta_forces_the_safeguard_branch() {
    let (_, cfg, res) = run(1e6, 40);
    assert!(res.trace.iter().all(|r| r.branch == Branch::Safeguard));
    check_branch_certificates(&res.trace, &cfg).unwrap();
}

#[test]
fn tiny_eta_accepts_every_candidate() {
    let (_, cfg, res) = run(1e-12, 40);
    assert!(res.trace.iter().all(|r| r.branch == Branch::CandidateAccepted));
    check_branch_certificates(&res.trace, &cfg).unwrap();
}

#[test]
fn trace_is_consistent_with_recorded_iterates() {
    let (p, cfg, res) = run(0.5, 60);
    assert_eq!(res.iterates.len(), res.trace.len() + 1);
    for (i, rec) in res.trace.iter().enumerate() {
        assert_eq!(rec.k, i);
        let again = reevaluate_record(&p, rec, &res.iterates[i], &res.iterates[i + 1]).unwrap();
        assert!((again.phi - rec.phi).abs() <= 1e-12 * rec.phi.abs().max(1.0));
        assert!((again.grad_norm - rec.grad_norm).abs() <= 1e-10 * rec.grad_norm.max(1e-12));
        assert!((again.dx - rec.dx).abs() <= 1e-14 && (again.dz - rec.dz).abs() <= 1e-14);
    }
    check_branch_certificates(&res.trace, &cfg).unwrap();
    check_fixed_eps_descent(&res.trace, 1e-10).unwrap();
    check_eps_schedule(&res.trace, &cfg).unwrap();
}

#[test]
fn solve_is_deterministic() {
    let (_, _, a) = run(0.5, 30);
    let (_, _, b) = run(0.5, 30);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.iterate.x, b.iterate.x);
}

#[test]
fn solve_rejects_non_finite_start() {
    let p = problem(RegularizerNet::tv_like(0.1), RegularizerNet::zero(), 1.0);
    let mut x0 = p.geometry.zero_image();
    x0.data[[0, 0]] = f64::NAN;
    assert!(lama_solve(&p, x0, p.geometry.zero_sinogram(), &SolverConfig::default()).is_err());
}

#[test]
fn tampered_records_fail_certificates() {
    let (_, cfg, res) = run(0.5, 20);
    let mut trace = res.trace.clone();
    trace[3].phi = trace[3].phi_prev + 1.0;
    assert!(check_branch_certificates(&trace, &cfg).is_err());
    assert!(check_fixed_eps_descent(&trace, 1e-10).is_err());
    let mut trace = res.trace.clone();
    trace[2].eps_reduced = !trace[2].eps_reduced;
    assert!(check_eps_schedule(&trace, &cfg).is_err());
}

#[test]
fn loss_report_vanishes_at_the_truth() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1.0);
    let it = stationary_iterate(&p);
    let truth = it.x.clone();
    let result = SolveResult {
        iterate: it,
        trace: Vec::new(),
        termination: Termination::Stationary,
        iterates: Vec::new(),
    };
    assert_eq!(loss_report(&p, &result, &truth, DEFAULT_SSIM_WEIGHT).unwrap(), 0.0);
}

#[test]
fn loss_report_without_ssim_is_squared_distance() {
    let p = problem(RegularizerNet::zero(), RegularizerNet::zero(), 1.0);
    let it = random_iterate(&p, 1.0, 9);
    let truth = tomo::shepp_logan(8).unwrap();
    let reference = tomo::project(&truth, &p.geometry).unwrap();
    let expected = it.x.distance(&truth).powi(2) + it.z.distance(&reference).powi(2);
    let result = SolveResult {
        iterate: it,
        trace: Vec::new(),
        termination: Termination::MaxIters,
        iterates: Vec::new(),
    };
    let got = loss_report(&p, &result, &truth, 0.0).unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected);
    assert!(loss_report(&p, &result, &truth, 1.0).unwrap() > got);
}
