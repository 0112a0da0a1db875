//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use bregman_pnp::denoiser::{Denoise, Denoiser};
use bregman_pnp::experiment::{degrade, phantom};
use bregman_pnp::signal::{ConvolutionOperator, Image, Kernel};
use bregman_pnp::solver::{Algorithm, SolverConfig};
use bregman_pnp::Fidelity;

pub const PEAK: f64 = 32.0;

/// Blocks phantom of side `n`, blurred with the 9×9 box kernel and Poisson
/// sampled at peak 32.
pub fn deblurring_problem(n: usize) -> (Image, Fidelity) {
    let gt = phantom::blocks(n);
    let kernel = Kernel::uniform(9).unwrap();
    let y = degrade(&gt, &kernel, PEAK, 0).unwrap();
    let op = Arc::new(ConvolutionOperator::new(kernel, y.shape()).unwrap());
    (gt, Fidelity::poisson(y, op).unwrap())
}

pub fn solver_config(algorithm: Algorithm, n: usize, iters: usize) -> SolverConfig {
    let (_, fid) = deblurring_problem(n);
    let d: Arc<dyn Denoise> = Arc::new(Denoiser::smoother(0.25, Kernel::uniform(3).unwrap()).unwrap());
    SolverConfig::new(algorithm, fid)
        .with_denoiser(d)
        .with_gamma(1.0 / PEAK)
        .with_iters(iters)
        .with_tol(0.0)
}
