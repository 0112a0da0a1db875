//! Bregman proximal gradient, plug-and-play and RED solvers for linear
//! inverse problems with Poisson noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: images, blur kernels, circular convolution, PSNR and image I/O.
//! - [`geometry`]: reference functions, Bregman distances and Bregman
//!   proximal operators.
//! - [`fidelity`]: Poisson and Gaussian data terms and their relative
//!   smoothness constants.
//! - [`denoiser`]: the plug-in denoiser interface and a few reference
//!   denoisers.
//! - [`solver`]: PGM, BPGM, PnP-PGM, PnP-BPGM, RED-SD and RED-BSD, plus the
//!   convergence certificate for PnP-BPGM.
//! - [`experiment`]: Poisson degradation, restoration and PSNR benchmarks.
//!
//! ```
//! use bregman_pnp::experiment::{degrade, phantom, restore, MethodSpec};
//! use bregman_pnp::signal::Kernel;
//! use bregman_pnp::solver::Algorithm;
//!
//! let clean = phantom::bump(16);
//! let kernel = Kernel::uniform(3).unwrap();
//! let y = degrade(&clean, &kernel, 20.0, 0).unwrap();
//! let method = MethodSpec { gamma: 0.02, iters: 20, ..MethodSpec::new(Algorithm::PnpBpgm) };
//! let (x, report) = restore(&y, &kernel, 20.0, &method, 0, None).unwrap();
//! assert!(x.is_positive());
//! assert_eq!(report.residuals.len(), report.iterations_used);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoiser;
pub mod error;
pub mod experiment;
pub mod fidelity;
pub mod geometry;
pub mod power;
pub mod signal;
pub mod solver;

pub use denoiser::{Denoise, Denoiser};
pub use error::{Error, Result};
pub use fidelity::{Fidelity, FidelityKind};
pub use geometry::{ReferenceFunction, ReferenceKind, RegularizerKind};
pub use signal::{Image, Kernel, KernelSpec, LinearOperator, Shape};
pub use solver::{solve, Algorithm, RunReport, SolverConfig, TheoremCertificate};
