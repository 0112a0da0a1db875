use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bregman_pnp::denoiser::{Anchor, Denoise, Denoiser};
use bregman_pnp::experiment::{degrade, phantom};
use bregman_pnp::fidelity::Fidelity;
use bregman_pnp::geometry::{ReferenceFunction, RegularizerKind};
use bregman_pnp::signal::{
    ConvolutionOperator, DenseOperator, IdentityOperator, Image, Kernel, LinearOperator, Shape,
};
use bregman_pnp::solver::{
    self, red_objective, Algorithm, Init, ObjectiveKind, SolverConfig,
};
use bregman_pnp::Error;

fn vector(v: &[f64]) -> Image {
    Image::vector(v.to_vec()).unwrap()
}

fn identity_fidelity_poisson(y: &[f64]) -> Fidelity {
    let y = vector(y);
    Fidelity::poisson(y.clone(), Arc::new(IdentityOperator::new(y.shape()))).unwrap()
}

fn blur_instance(seed: u64, peak: f64) -> (Image, Fidelity) {
    let gt = phantom::blocks(32);
    let kernel = Kernel::uniform(5).unwrap();
    let y = degrade(&gt, &kernel, peak, seed).unwrap();
    let op = Arc::new(ConvolutionOperator::new(kernel, y.shape()).unwrap());
    (gt, Fidelity::poisson(y, op).unwrap())
}

#[test]
fn pgm_solves_scalar_lasso() {
    // ½(x − 3)² + |x| is minimized at x = 2
    let fid = Fidelity::gaussian(vector(&[3.0]), Arc::new(DenseOperator::diagonal(&[1.0]))).unwrap();
    let cfg = SolverConfig::new(Algorithm::Pgm, fid)
        .with_regularizer(RegularizerKind::L1(1.0))
        .with_gamma(0.5)
        .with_iters(200)
        .with_tol(1e-14)
        .with_init(Init::Given(vector(&[0.0])));
    let report = solver::pgm(&cfg).unwrap();
    assert!((report.final_image.data()[0] - 2.0).abs() < 1e-10);
    assert!(report.converged);
}

#[test]
fn bpgm_poisson_identity_converges_to_measurements() {
    let y = [3.0, 7.0, 1.0, 12.0];
    let fid = identity_fidelity_poisson(&y);
    let burg = ReferenceFunction::burg(1e-4, 12.0).unwrap();
    let l = fid.relative_smoothness(&burg).unwrap();
    let cfg = SolverConfig::new(Algorithm::Bpgm, fid)
        .with_reference(burg)
        .with_gamma(1.0 / l)
        .with_iters(2000)
        .with_tol(1e-14)
        .with_init(Init::Given(vector(&[1.0, 1.0, 1.0, 1.0])));
    let report = solver::bpgm(&cfg).unwrap();
    assert!(report.final_image.max_abs_diff(&vector(&y)).unwrap() < 1e-6);
}

#[test]
fn red_sd_without_prior_weight_finds_least_squares() {
    let fid = Fidelity::gaussian(vector(&[2.0, -1.0]), Arc::new(DenseOperator::diagonal(&[1.0, 2.0]))).unwrap();
    let cfg = SolverConfig::new(Algorithm::RedSd, fid)
        .with_denoiser(Arc::new(Denoiser::Identity))
        .with_tau(0.0)
        .with_gamma(0.2)
        .with_iters(500)
        .with_tol(1e-14)
        .with_init(Init::Given(vector(&[0.0, 0.0])));
    let report = solver::red_sd(&cfg).unwrap();
    assert!(report.final_image.max_abs_diff(&vector(&[2.0, -0.5])).unwrap() < 1e-10);
}

#[test]
fn red_sd_fixed_point_balances_data_and_prior() {
    // ½(x − 1)² + τ x (x − c) with D ≡ c: gradient x − 1 + τ(x − c) = 0
    let (tau, c) = (0.5, 4.0);
    let fid = Fidelity::gaussian(vector(&[1.0]), Arc::new(DenseOperator::diagonal(&[1.0]))).unwrap();
    let d = Denoiser::contraction(0.0, Anchor::Constant(c)).unwrap();
    let cfg = SolverConfig::new(Algorithm::RedSd, fid)
        .with_denoiser(Arc::new(d))
        .with_tau(tau)
        .with_gamma(0.5)
        .with_iters(500)
        .with_tol(1e-15)
        .with_init(Init::Given(vector(&[0.0])));
    let x = solver::red_sd(&cfg).unwrap().final_image.data()[0];
    assert!((x - (1.0 + tau * c) / (1.0 + tau)).abs() < 1e-10);
}

#[test]
fn pnp_pgm_with_contraction_decays_geometrically() {
    // x⁺ = ρ(x − γ(x − 0)) = ρ(1 − γ)x
    let fid = Fidelity::gaussian(vector(&[0.0]), Arc::new(DenseOperator::diagonal(&[1.0]))).unwrap();
    let d = Denoiser::contraction(0.5, Anchor::Constant(0.0)).unwrap();
    let cfg = SolverConfig::new(Algorithm::PnpPgm, fid)
        .with_denoiser(Arc::new(d))
        .with_gamma(0.5)
        .with_iters(10)
        .with_tol(0.0)
        .with_init(Init::Given(vector(&[1.0])))
        .recording_iterates();
    let report = solver::pnp_pgm(&cfg).unwrap();
    for pair in report.iterates.windows(2) {
        assert!((pair[1].data()[0] / pair[0].data()[0] - 0.25).abs() < 1e-14);
    }
}

#[test]
fn zero_iterations_returns_initial_point() {
    let (_, fid) = blur_instance(1, 16.0);
    let x0 = fid.measurements().map(|v| v + 1.0);
    let cfg = SolverConfig::new(Algorithm::PnpBpgm, fid)
        .with_denoiser(Arc::new(Denoiser::Identity))
        .with_iters(0)
        .with_init(Init::Given(x0.clone()));
    let report = solver::solve(&cfg).unwrap();
    assert_eq!(report.final_image, x0);
    assert_eq!(report.iterations_used, 0);
    assert!(report.residuals.is_empty());
}

#[test]
fn burg_iterates_stay_positive_under_safeguard() {
    let (gt, fid) = blur_instance(2, 32.0);
    let d: Arc<dyn Denoise> = Arc::new(Denoiser::smoother(0.5, Kernel::uniform(3).unwrap()).unwrap());
    for algo in [Algorithm::Bpgm, Algorithm::PnpBpgm, Algorithm::RedBsd] {
        // deliberately aggressive step so the safeguard has to fire
        let cfg = SolverConfig::new(algo, fid.clone())
            .with_denoiser(d.clone())
            .with_gamma(2.0)
            .with_iters(40)
            .with_tol(0.0)
            .with_ground_truth(gt.scale(32.0), 32.0)
            .recording_iterates();
        let report = solver::solve(&cfg).unwrap();
        assert!(report.backtracks > 0, "{algo}: safeguard never fired");
        for x in &report.iterates {
            assert!(x.is_positive(), "{algo}");
        }
        assert_eq!(report.psnr_trace.as_ref().unwrap().len(), report.iterations_used);
    }
}

#[test]
fn unsafeguarded_burg_step_reports_dual_domain() {
    let fid = identity_fidelity_poisson(&[50.0]);
    let mut cfg = SolverConfig::new(Algorithm::Bpgm, fid)
        .with_gamma(1.0)
        .with_init(Init::Given(vector(&[1.0])));
    cfg.safeguard = false;
    assert!(matches!(solver::bpgm(&cfg), Err(Error::DualDomain { count: 1 })));
}

#[test]
fn exhausted_safeguard_names_the_iteration() {
    let fid = identity_fidelity_poisson(&[1e9]);
    let mut cfg = SolverConfig::new(Algorithm::Bpgm, fid)
        .with_gamma(1.0)
        .with_init(Init::Given(vector(&[1e-3])));
    cfg.max_halvings = 2;
    match solver::bpgm(&cfg) {
        Err(e @ Error::SafeguardExhausted { iteration: 0, halvings: 2, offending: 1 }) => {
            assert!(e.is_solver_abort())
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fast_path_matches_generic_composition() {
    let (_, fid) = blur_instance(3, 32.0);
    let d: Arc<dyn Denoise> = Arc::new(Denoiser::smoother(0.5, Kernel::uniform(3).unwrap()).unwrap());
    for algo in [Algorithm::Bpgm, Algorithm::PnpBpgm, Algorithm::RedBsd] {
        let fast = SolverConfig::new(algo, fid.clone())
            .with_denoiser(d.clone())
            .with_gamma(0.05)
            .with_tau(0.1)
            .with_iters(5)
            .with_tol(0.0)
            .recording_iterates();
        let mut slow = fast.clone();
        slow.fast_path = false;
        let a = solver::solve(&fast).unwrap();
        let b = solver::solve(&slow).unwrap();
        for (p, q) in a.iterates.iter().zip(&b.iterates) {
            let rel = p.zip_map(q, |u, v| (u - v).abs() / v.abs()).unwrap().max();
            assert!(rel < 1e-10, "{algo}: {rel}");
        }
    }
}

#[test]
fn shannon_geometry_runs_every_bregman_algorithm() {
    let (_, fid) = blur_instance(4, 16.0);
    let h = ReferenceFunction::shannon(1e-4, 16.0).unwrap();
    let d: Arc<dyn Denoise> = Arc::new(Denoiser::median(3).unwrap());
    for algo in [Algorithm::Bpgm, Algorithm::PnpBpgm, Algorithm::RedBsd] {
        let cfg = SolverConfig::new(algo, fid.clone())
            .with_reference(h)
            .with_denoiser(d.clone())
            .with_regularizer(RegularizerKind::L1(0.01))
            .with_gamma(0.01)
            .with_iters(20);
        let report = solver::solve(&cfg).unwrap();
        assert!(report.final_image.is_positive());
        assert!(report.objective.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn bpgm_with_l1_decreases_composite_objective() {
    let (_, fid) = blur_instance(5, 32.0);
    let burg = ReferenceFunction::burg(1e-4, 32.0).unwrap();
    let l = fid.relative_smoothness(&burg).unwrap();
    let cfg = SolverConfig::new(Algorithm::Bpgm, fid)
        .with_reference(burg)
        .with_regularizer(RegularizerKind::L1(0.05))
        .with_gamma(1.0 / l)
        .with_iters(100)
        .with_tol(0.0);
    let report = solver::bpgm(&cfg).unwrap();
    assert_eq!(report.objective_kind, ObjectiveKind::Composite);
    let mut prev = report.initial_objective;
    for &f in &report.objective {
        assert!(f <= prev + 1e-10, "{f} > {prev}");
        prev = f;
    }
}

#[test]
fn red_objective_labels() {
    let (_, fid) = blur_instance(6, 16.0);
    let base = SolverConfig::new(Algorithm::RedBsd, fid.clone())
        .with_gamma(0.02)
        .with_iters(3);
    let linear = base
        .clone()
        .with_denoiser(Arc::new(Denoiser::smoother(0.5, Kernel::uniform(3).unwrap()).unwrap()));
    let report = solver::solve(&linear).unwrap();
    assert_eq!(report.objective_kind, ObjectiveKind::Red);
    let x = &report.final_image;
    let d = linear.denoiser.as_deref().unwrap();
    let expected = red_objective(&fid, d, linear.tau, x).unwrap();
    assert!((report.objective.last().unwrap() - expected).abs() <= 1e-12 * expected.abs());
    let median = base.with_denoiser(Arc::new(Denoiser::median(3).unwrap()));
    assert_eq!(solver::solve(&median).unwrap().objective_kind, ObjectiveKind::RedSurrogate);
}

#[test]
fn early_stop_on_tolerance() {
    let fid = identity_fidelity_poisson(&[2.0, 5.0]);
    let cfg = SolverConfig::new(Algorithm::Bpgm, fid)
        .with_gamma(0.1)
        .with_iters(10_000)
        .with_tol(1e-6);
    let report = solver::bpgm(&cfg).unwrap();
    assert!(report.converged);
    assert!(report.iterations_used < 10_000);
    assert!(*report.residuals.last().unwrap() < 1e-6);
}

#[test]
fn runs_are_bit_identical() {
    let (gt, fid) = blur_instance(7, 8.0);
    let d: Arc<dyn Denoise> = Arc::new(Denoiser::smoother(0.25, Kernel::uniform(3).unwrap()).unwrap());
    for algo in Algorithm::ALL {
        let cfg = SolverConfig::new(algo, fid.clone())
            .with_denoiser(d.clone())
            .with_gamma(0.05)
            .with_iters(15)
            .with_ground_truth(gt.scale(8.0), 8.0);
        let a = solver::solve(&cfg).unwrap();
        let b = solver::solve(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap(), "{algo}");
        let bits = |img: &Image| img.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.final_image), bits(&b.final_image));
    }
}

#[test]
fn config_errors() {
    let (_, fid) = blur_instance(8, 8.0);
    let cfg = SolverConfig::new(Algorithm::PnpBpgm, fid.clone());
    assert!(matches!(solver::solve(&cfg), Err(Error::Config(_))));
    let cfg = SolverConfig::new(Algorithm::Pgm, fid.clone()).with_gamma(-1.0);
    assert!(matches!(solver::solve(&cfg), Err(Error::Config(_))));
    let cfg = SolverConfig::new(Algorithm::Pgm, fid.clone());
    assert!(solver::bpgm(&cfg).is_err());
    let bad_init = Init::Given(Image::zeros(Shape::new(3, 3)));
    let cfg = SolverConfig::new(Algorithm::Pgm, fid).with_init(bad_init);
    assert!(solver::solve(&cfg).is_err());
}

#[test]
fn report_json_has_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape = Shape::new(8, 8);
    let y = Image::from_fn(shape, |_, _| rng.random_range(0.0..5.0f64).round());
    let op: Arc<dyn LinearOperator> = Arc::new(IdentityOperator::new(shape));
    let cfg = SolverConfig::new(Algorithm::Bpgm, Fidelity::poisson(y, op).unwrap())
        .with_gamma(0.1)
        .with_iters(5);
    let json: serde_json::Value = serde_json::from_str(&solver::solve(&cfg).unwrap().to_json().unwrap()).unwrap();
    assert_eq!(json["algorithm"], "bpgm");
    assert_eq!(json["reference"], "burg");
    assert_eq!(json["residuals"].as_array().unwrap().len(), 5);
    assert_eq!(json["objective"].as_array().unwrap().len(), 5);
    assert!(json.get("final_image").is_none());
}
