//! Euclidean and Bregman proximal-gradient, plug-and-play and RED iterations.
//!
//! | algorithm | update                                          |
//! |-----------|-------------------------------------------------|
//! | PGM       | `prox_{γg}(x − γ∇f(x))`                         |
//! | BPGM      | `prox^h_{γg}(∇h*(∇h(x) − γ∇f(x)))`              |
//! | PnP-PGM   | `D(x − γ∇f(x))`                                 |
//! | PnP-BPGM  | `D(∇h*(∇h(x) − γ∇f(x)))`                        |
//! | RED-SD    | `x − γ(∇f(x) + τ(x − D(x)))`                    |
//! | RED-BSD   | `∇h*(∇h(x) − γ(∇f(x) + τ(x − D(x))))`           |
//!
//! With Burg's entropy the mirror step has the closed form
//! `x ⊘ (1 + γ x ⊙ d)`, which is used unless [`SolverConfig::fast_path`] is
//! off. Either way the step size is halved per iteration whenever a
//! denominator would drop below `eps_pos`.

pub mod step;
pub mod theorem;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::denoiser::Denoise;
use crate::error::{Error, Result};
use crate::fidelity::{Fidelity, DEFAULT_EPS_POS};
use crate::geometry::{bpo, bpo_euclidean, ReferenceFunction, ReferenceKind, RegularizerKind};
use crate::signal::{psnr, Image};

use self::step::{burg_mirror_step, mirror_step, safe_burg_step_size, SafeStep, DEFAULT_MAX_HALVINGS};

pub use self::step::burg_backtrack;
pub use self::theorem::{theorem_gate, LipschitzBound, TheoremCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pgm,
    Bpgm,
    PnpPgm,
    PnpBpgm,
    RedSd,
    RedBsd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pgm,
        Algorithm::Bpgm,
        Algorithm::PnpPgm,
        Algorithm::PnpBpgm,
        Algorithm::RedSd,
        Algorithm::RedBsd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pgm => "pgm",
            Algorithm::Bpgm => "bpgm",
            Algorithm::PnpPgm => "pnp-pgm",
            Algorithm::PnpBpgm => "pnp-bpgm",
            Algorithm::RedSd => "red-sd",
            Algorithm::RedBsd => "red-bsd",
        }
    }

    /// Whether the algorithm uses the configured reference function (the
    /// Euclidean ones always use the quadratic).
    pub fn is_bregman(self) -> bool {
        matches!(self, Algorithm::Bpgm | Algorithm::PnpBpgm | Algorithm::RedBsd)
    }

    pub fn needs_denoiser(self) -> bool {
        !matches!(self, Algorithm::Pgm | Algorithm::Bpgm)
    }

    pub fn is_red(self) -> bool {
        matches!(self, Algorithm::RedSd | Algorithm::RedBsd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown algorithm {s:?} (expected pgm, bpgm, pnp-pgm, pnp-bpgm, red-sd or red-bsd)"
                ))
            })
    }
}

/// How the starting point is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Given(Image),
    /// Measurements (mapped through `Aᵀ` when shapes differ) plus white
    /// Gaussian noise of the given standard deviation.
    Measurements { noise_std: f64, seed: u64 },
}

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 1e-3;
pub const DEFAULT_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Reference function for the Bregman algorithms.
    pub reference: ReferenceFunction,
    pub fidelity: Fidelity,
    /// Regularizer for PGM/BPGM.
    pub regularizer: RegularizerKind,
    /// Denoiser for the PnP and RED algorithms.
    pub denoiser: Option<Arc<dyn Denoise>>,
    pub gamma: f64,
    pub tau: f64,
    pub max_iters: usize,
    /// Relative fixed-point residual below which the run stops early.
    pub tol: f64,
    /// Halve the step when a Burg mirror step would leave the dual domain.
    pub safeguard: bool,
    pub max_halvings: usize,
    /// Use the Burg closed form instead of composing `∇h*` and `∇h`.
    pub fast_path: bool,
    pub eps_pos: f64,
    pub init: Init,
    /// When set, a PSNR trace against this image is recorded.
    pub ground_truth: Option<Image>,
    pub psnr_peak: f64,
    /// Keep every iterate in the report.
    pub record_iterates: bool,
}

impl SolverConfig {
    /// Defaults: Burg's entropy on `[1e-4, max y]` for the Bregman algorithms,
    /// `γ = 0.5`, `τ = 1e-3`, 100 iterations, initialization at the
    /// measurements with noise of std `1e-3 · max y`.
    pub fn new(algorithm: Algorithm, fidelity: Fidelity) -> Self {
        let ymax = fidelity.measurements().max().abs().max(1.0);
        let reference = if algorithm.is_bregman() {
            ReferenceFunction::with_default_box(ReferenceKind::Burg, ymax)
                .unwrap_or_else(|_| ReferenceFunction::quadratic())
        } else {
            ReferenceFunction::quadratic()
        };
        SolverConfig {
            algorithm,
            reference,
            fidelity,
            regularizer: RegularizerKind::Zero,
            denoiser: None,
            gamma: DEFAULT_GAMMA,
            tau: DEFAULT_TAU,
            max_iters: DEFAULT_ITERS,
            tol: DEFAULT_TOL,
            safeguard: true,
            max_halvings: DEFAULT_MAX_HALVINGS,
            fast_path: true,
            eps_pos: DEFAULT_EPS_POS,
            init: Init::Measurements {
                noise_std: 1e-3 * ymax,
                seed: 0,
            },
            ground_truth: None,
            psnr_peak: 1.0,
            record_iterates: false,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_reference(mut self, h: ReferenceFunction) -> Self {
        self.reference = h;
        self
    }

    pub fn with_regularizer(mut self, g: RegularizerKind) -> Self {
        self.regularizer = g;
        self
    }

    pub fn with_denoiser(mut self, d: Arc<dyn Denoise>) -> Self {
        self.denoiser = Some(d);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_ground_truth(mut self, gt: Image, peak: f64) -> Self {
        self.ground_truth = Some(gt);
        self.psnr_peak = peak;
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    /// Geometry the configured algorithm actually runs in.
    pub fn geometry(&self) -> ReferenceFunction {
        if self.algorithm.is_bregman() {
            self.reference
        } else {
            ReferenceFunction::quadratic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.gamma));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be nonnegative, got {}", self.tau));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tolerance must be nonnegative, got {}", self.tol));
        }
        if !(self.eps_pos > 0.0) {
            return bad(format!("eps_pos must be positive, got {}", self.eps_pos));
        }
        if self.algorithm.needs_denoiser() && self.denoiser.is_none() {
            return bad(format!("{} needs a denoiser", self.algorithm));
        }
        let input = self.fidelity.operator().input_shape();
        match &self.init {
            Init::Given(x) if x.shape() != input => {
                return bad(format!("initial point is {}, expected {input}", x.shape()))
            }
            Init::Measurements { noise_std, .. } if !(*noise_std >= 0.0) => {
                return bad(format!("init noise std must be nonnegative, got {noise_std}"))
            }
            _ => {}
        }
        if let Some(gt) = &self.ground_truth {
            if gt.shape() != input {
                return bad(format!("ground truth is {}, expected {input}", gt.shape()));
            }
            if !(self.psnr_peak > 0.0) {
                return bad(format!("PSNR peak must be positive, got {}", self.psnr_peak));
            }
        }
        Ok(())
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm != algorithm {
            return Err(Error::Config(format!(
                "configuration is for {}, not {algorithm}",
                self.algorithm
            )));
        }
        self.validate()
    }

    fn denoiser(&self) -> &dyn Denoise {
        self.denoiser
            .as_deref()
            .expect("validated configuration carries a denoiser")
    }

    /// Starting point, clamped into the positive orthant for entropic geometries.
    pub fn initial_point(&self) -> Result<Image> {
        let op = self.fidelity.operator();
        let x0 = match &self.init {
            Init::Given(x) => x.clone(),
            Init::Measurements { noise_std, seed } => {
                let y = self.fidelity.measurements();
                let base = if y.shape() == op.input_shape() {
                    y.clone()
                } else {
                    op.adjoint(y)?
                };
                if *noise_std > 0.0 {
                    let noise = Normal::new(0.0, *noise_std)
                        .map_err(|e| Error::Config(e.to_string()))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    base.map(|v| v + noise.sample(&mut rng))
                } else {
                    base
                }
            }
        };
        Ok(if self.geometry().kind().needs_positive() {
            x0.clamp_min(self.eps_pos)
        } else {
            x0
        })
    }
}

/// What the objective trace in a [`RunReport`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// `f + g`
    Composite,
    /// `f` alone; PnP has no explicit regularizer.
    DataTerm,
    /// `f + τ xᵀ(x − D(x))` with a denoiser whose Jacobian is symmetric.
    Red,
    /// Same expression, but the denoiser violates the conditions under which
    /// it is a true objective.
    RedSurrogate,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub reference: ReferenceKind,
    pub gamma: f64,
    pub tau: f64,
    #[serde(skip)]
    pub final_image: Image,
    pub width: usize,
    pub height: usize,
    pub objective_kind: ObjectiveKind,
    /// Objective at the starting point.
    pub initial_objective: f64,
    /// `‖x^{k+1} − x^k‖ / ‖x^k‖` per iteration.
    pub residuals: Vec<f64>,
    /// Objective at `x^{k+1}` per iteration.
    pub objective: Vec<f64>,
    pub psnr_trace: Option<Vec<f64>>,
    pub iterations_used: usize,
    /// Iterations in which the step-size safeguard halved γ.
    pub backtracks: usize,
    pub converged: bool,
    #[serde(skip)]
    pub iterates: Vec<Image>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `f(x) + τ xᵀ(x − D(x))`
pub fn red_objective(fid: &Fidelity, d: &dyn Denoise, tau: f64, x: &Image) -> Result<f64> {
    let dx = d.denoise(x)?;
    red_objective_with(fid, tau, x, &dx)
}

fn red_objective_with(fid: &Fidelity, tau: f64, x: &Image, dx: &Image) -> Result<f64> {
    let f = fid.value(x)?;
    if tau == 0.0 {
        return Ok(f);
    }
    Ok(f + tau * x.dot(&x.sub(dx)?)?)
}

/// `∇f(x) + τ(x − D(x))`
fn red_direction(fid: &Fidelity, tau: f64, x: &Image, dx: &Image) -> Result<Image> {
    let grad = fid.grad(x)?;
    let prior = x.sub(dx)?;
    grad.axpy(tau, &prior)
}

struct StepOut {
    x: Image,
    objective: f64,
    backtracked: bool,
}

/// Mirror step in geometry `h` with the Burg safeguard and fast path applied
/// as configured. Returns the new point and the step size used.
fn bregman_step(
    cfg: &SolverConfig,
    h: &ReferenceFunction,
    x: &Image,
    direction: &Image,
) -> Result<(Image, SafeStep)> {
    match h.kind() {
        ReferenceKind::Burg => {
            let safe = if cfg.safeguard {
                safe_burg_step_size(x, direction, cfg.gamma, cfg.max_halvings, cfg.eps_pos)?
            } else {
                SafeStep {
                    gamma: cfg.gamma,
                    halvings: 0,
                }
            };
            let z = if cfg.fast_path {
                burg_mirror_step(x, direction, safe.gamma)?
            } else {
                mirror_step(h, x, direction, safe.gamma)?
            };
            Ok((z, safe))
        }
        _ => Ok((
            mirror_step(h, x, direction, cfg.gamma)?,
            SafeStep {
                gamma: cfg.gamma,
                halvings: 0,
            },
        )),
    }
}

fn drive(
    cfg: &SolverConfig,
    objective_kind: ObjectiveKind,
    x0: Image,
    initial_objective: f64,
    mut step: impl FnMut(&Image) -> Result<StepOut>,
) -> Result<RunReport> {
    let mut x = x0;
    let mut residuals = Vec::new();
    let mut objective = Vec::new();
    let mut psnr_trace = cfg.ground_truth.as_ref().map(|_| Vec::new());
    let mut iterates = Vec::new();
    let mut backtracks = 0;
    let mut converged = false;
    if cfg.record_iterates {
        iterates.push(x.clone());
    }
    for k in 0..cfg.max_iters {
        let out = step(&x).map_err(|e| match e {
            Error::SafeguardExhausted {
                halvings, offending, ..
            } => Error::SafeguardExhausted {
                iteration: k,
                halvings,
                offending,
            },
            other => other,
        })?;
        let residual = out.x.distance_l2(&x)? / x.norm_l2().max(1e-12);
        residuals.push(residual);
        objective.push(out.objective);
        if out.backtracked {
            backtracks += 1;
        }
        if let (Some(trace), Some(gt)) = (psnr_trace.as_mut(), cfg.ground_truth.as_ref()) {
            trace.push(psnr(gt, &out.x, cfg.psnr_peak)?);
        }
        if cfg.record_iterates {
            iterates.push(out.x.clone());
        }
        x = out.x;
        if residual < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(RunReport {
        algorithm: cfg.algorithm,
        reference: cfg.geometry().kind(),
        gamma: cfg.gamma,
        tau: cfg.tau,
        width: x.width(),
        height: x.height(),
        final_image: x,
        objective_kind,
        initial_objective,
        iterations_used: residuals.len(),
        residuals,
        objective,
        psnr_trace,
        backtracks,
        converged,
        iterates,
    })
}

fn composite_objective(cfg: &SolverConfig, x: &Image) -> Result<f64> {
    Ok(cfg.fidelity.value(x)? + cfg.regularizer.value(x))
}

/// Runs whichever algorithm the configuration names.
pub fn solve(cfg: &SolverConfig) -> Result<RunReport> {
    match cfg.algorithm {
        Algorithm::Pgm => pgm(cfg),
        Algorithm::Bpgm => bpgm(cfg),
        Algorithm::PnpPgm => pnp_pgm(cfg),
        Algorithm::PnpBpgm => pnp_bpgm(cfg),
        Algorithm::RedSd => red_sd(cfg),
        Algorithm::RedBsd => red_bsd(cfg),
    }
}

/// Proximal gradient method.
pub fn pgm(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::Pgm)?;
    let x0 = cfg.initial_point()?;
    let f0 = composite_objective(cfg, &x0)?;
    drive(cfg, ObjectiveKind::Composite, x0, f0, |x| {
        let z = x.axpy(-cfg.gamma, &cfg.fidelity.grad(x)?)?;
        let next = bpo_euclidean(&z, cfg.regularizer, cfg.gamma)?;
        Ok(StepOut {
            objective: composite_objective(cfg, &next)?,
            x: next,
            backtracked: false,
        })
    })
}

/// Bregman proximal gradient method: mirror step followed by the Bregman
/// proximal operator of the regularizer.
pub fn bpgm(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::Bpgm)?;
    let h = cfg.geometry();
    let x0 = cfg.initial_point()?;
    let f0 = composite_objective(cfg, &x0)?;
    drive(cfg, ObjectiveKind::Composite, x0, f0, |x| {
        let (z, safe) = bregman_step(cfg, &h, x, &cfg.fidelity.grad(x)?)?;
        let next = bpo(&h, &z, cfg.regularizer, safe.gamma)?;
        Ok(StepOut {
            objective: composite_objective(cfg, &next)?,
            x: next,
            backtracked: safe.halvings > 0,
        })
    })
}

/// Plug-and-play proximal gradient method.
pub fn pnp_pgm(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::PnpPgm)?;
    let d = cfg.denoiser();
    let x0 = cfg.initial_point()?;
    let f0 = cfg.fidelity.value(&x0)?;
    drive(cfg, ObjectiveKind::DataTerm, x0, f0, |x| {
        let z = x.axpy(-cfg.gamma, &cfg.fidelity.grad(x)?)?;
        let next = d.denoise(&z)?;
        Ok(StepOut {
            objective: cfg.fidelity.value(&next)?,
            x: next,
            backtracked: false,
        })
    })
}

/// Plug-and-play Bregman proximal gradient method.
pub fn pnp_bpgm(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::PnpBpgm)?;
    let h = cfg.geometry();
    let d = cfg.denoiser();
    let positive = h.kind().needs_positive();
    let x0 = cfg.initial_point()?;
    let f0 = cfg.fidelity.value(&x0)?;
    drive(cfg, ObjectiveKind::DataTerm, x0, f0, |x| {
        let (z, safe) = bregman_step(cfg, &h, x, &cfg.fidelity.grad(x)?)?;
        let mut next = d.denoise(&z)?;
        if positive {
            next = next.clamp_min(cfg.eps_pos);
        }
        Ok(StepOut {
            objective: cfg.fidelity.value(&next)?,
            x: next,
            backtracked: safe.halvings > 0,
        })
    })
}

fn red_kind(d: &dyn Denoise) -> ObjectiveKind {
    if d.has_symmetric_jacobian() {
        ObjectiveKind::Red
    } else {
        ObjectiveKind::RedSurrogate
    }
}

/// RED steepest descent.
pub fn red_sd(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::RedSd)?;
    run_red(cfg, false)
}

/// RED Bregman steepest descent (mirror descent on the RED objective).
pub fn red_bsd(cfg: &SolverConfig) -> Result<RunReport> {
    cfg.expect(Algorithm::RedBsd)?;
    run_red(cfg, true)
}

fn run_red(cfg: &SolverConfig, bregman: bool) -> Result<RunReport> {
    let h = cfg.geometry();
    let d = cfg.denoiser();
    let x0 = cfg.initial_point()?;
    // D(x^k) is needed for both the step and the objective at x^k
    let mut denoised = d.denoise(&x0)?;
    let f0 = red_objective_with(&cfg.fidelity, cfg.tau, &x0, &denoised)?;
    drive(cfg, red_kind(d), x0, f0, |x| {
        let direction = red_direction(&cfg.fidelity, cfg.tau, x, &denoised)?;
        let (next, halvings) = if bregman {
            let (z, safe) = bregman_step(cfg, &h, x, &direction)?;
            (z, safe.halvings)
        } else {
            (x.axpy(-cfg.gamma, &direction)?, 0)
        };
        denoised = d.denoise(&next)?;
        Ok(StepOut {
            objective: red_objective_with(&cfg.fidelity, cfg.tau, &next, &denoised)?,
            x: next,
            backtracked: halvings > 0,
        })
    })
}
