//! Denoising operators plugged into the PnP and RED iterations.
//!
//! Anything implementing [`Denoise`] can be handed to a solver. The built-in
//! [`Denoiser`] kinds are classical operators with known Lipschitz behaviour.

use std::fmt::{self, Debug};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::power::power_iteration;
use crate::signal::{conv2d_adjoint, conv2d_forward, Image, Kernel, Shape};

/// An image-to-image denoising operator.
pub trait Denoise: Debug + Send + Sync {
    fn denoise(&self, x: &Image) -> Result<Image>;

    /// Known upper bound on the Lipschitz constant, if any.
    fn declared_lipschitz(&self) -> Option<f64> {
        None
    }

    /// True when the operator is linear (or affine) with a symmetric linear
    /// part, in which case the RED regularizer gradient is exact.
    fn has_symmetric_jacobian(&self) -> bool {
        false
    }
}

/// Fixed point of a [`Denoiser::ScaledContraction`].
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    Constant(f64),
    Image(Image),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Denoiser {
    Identity,
    /// `(1 − α) x + α (k ⊛ x)`
    LinearSmoother { alpha: f64, kernel: Kernel },
    /// `anchor + ρ (x − anchor)`
    ScaledContraction { rho: f64, anchor: Anchor },
    /// Median over a `window`x`window` neighbourhood with periodic boundary.
    MedianFilter { window: usize },
}

impl Denoiser {
    pub fn smoother(alpha: f64, kernel: Kernel) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "smoother weight must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Denoiser::LinearSmoother { alpha, kernel })
    }

    pub fn contraction(rho: f64, anchor: Anchor) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "contraction factor must lie in [0, 1), got {rho}"
            )));
        }
        if let Anchor::Constant(c) = anchor {
            if !c.is_finite() {
                return Err(Error::InvalidParameter("non-finite anchor".into()));
            }
        }
        Ok(Denoiser::ScaledContraction { rho, anchor })
    }

    pub fn median(window: usize) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "median window must be odd, got {window}"
            )));
        }
        Ok(Denoiser::MedianFilter { window })
    }

    fn is_affine(&self) -> bool {
        !matches!(self, Denoiser::MedianFilter { .. })
    }

    /// Adjoint of the linear part of an affine denoiser.
    fn linear_adjoint(&self, v: &Image) -> Result<Image> {
        match self {
            Denoiser::Identity => Ok(v.clone()),
            Denoiser::LinearSmoother { alpha, kernel } => {
                let corr = conv2d_adjoint(v, kernel)?;
                v.zip_map(&corr, |a, b| (1.0 - alpha) * a + alpha * b)
            }
            Denoiser::ScaledContraction { rho, .. } => Ok(v.scale(*rho)),
            Denoiser::MedianFilter { .. } => Err(Error::Unsupported(
                "median filter has no linear part".into(),
            )),
        }
    }

    fn linear_part(&self, v: &Image) -> Result<Image> {
        match self {
            Denoiser::ScaledContraction { rho, .. } => Ok(v.scale(*rho)),
            _ => self.denoise(v),
        }
    }
}

impl Denoise for Denoiser {
    fn denoise(&self, x: &Image) -> Result<Image> {
        match self {
            Denoiser::Identity => Ok(x.clone()),
            Denoiser::LinearSmoother { alpha, kernel } => {
                let blurred = conv2d_forward(x, kernel)?;
                x.zip_map(&blurred, |a, b| (1.0 - alpha) * a + alpha * b)
            }
            Denoiser::ScaledContraction { rho, anchor } => match anchor {
                Anchor::Constant(c) => Ok(x.map(|v| c + rho * (v - c))),
                Anchor::Image(a) => x.zip_map(a, |v, c| c + rho * (v - c)),
            },
            Denoiser::MedianFilter { window } => median_filter(x, *window),
        }
    }

    fn declared_lipschitz(&self) -> Option<f64> {
        match self {
            Denoiser::Identity => Some(1.0),
            // Young's inequality: a nonnegative kernel summing to one is nonexpansive
            Denoiser::LinearSmoother { kernel, .. } if kernel.is_nonnegative() => Some(1.0),
            Denoiser::LinearSmoother { .. } => None,
            Denoiser::ScaledContraction { rho, .. } => Some(*rho),
            Denoiser::MedianFilter { .. } => None,
        }
    }

    fn has_symmetric_jacobian(&self) -> bool {
        match self {
            Denoiser::Identity | Denoiser::ScaledContraction { .. } => true,
            Denoiser::LinearSmoother { kernel, .. } => kernel.is_symmetric(),
            Denoiser::MedianFilter { .. } => false,
        }
    }
}

fn median_filter(x: &Image, window: usize) -> Result<Image> {
    let (h, w) = (x.height(), x.width());
    if window > h || window > w {
        return Err(Error::dims(
            format!("median window no larger than image {}", x.shape()),
            format!("window {window}"),
        ));
    }
    let r = window / 2;
    let mut buf = Vec::with_capacity(window * window);
    Ok(Image::from_fn(x.shape(), |i, j| {
        buf.clear();
        for di in 0..window {
            let si = (i + h + di - r) % h;
            for dj in 0..window {
                let sj = (j + w + dj - r) % w;
                buf.push(x.get(si, sj));
            }
        }
        let mid = buf.len() / 2;
        *buf.select_nth_unstable_by(mid, f64::total_cmp).1
    }))
}

impl fmt::Display for Denoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denoiser::Identity => f.write_str("identity"),
            Denoiser::LinearSmoother { alpha, .. } => write!(f, "smooth:{alpha}"),
            Denoiser::ScaledContraction { rho, .. } => write!(f, "contract:{rho}"),
            Denoiser::MedianFilter { window } => write!(f, "median:{window}"),
        }
    }
}

/// Parses `identity`, `smooth:α` (3x3 box kernel), `contract:ρ` (zero anchor)
/// and `median:w`.
impl FromStr for Denoiser {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidParameter(format!(
                "unknown denoiser {s:?} (expected identity, smooth:ALPHA, contract:RHO or median:W)"
            ))
        };
        if s == "identity" {
            return Ok(Denoiser::Identity);
        }
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        match name {
            "smooth" => Denoiser::smoother(arg.parse().map_err(|_| bad())?, Kernel::uniform(3)?),
            "contract" => {
                Denoiser::contraction(arg.parse().map_err(|_| bad())?, Anchor::Constant(0.0))
            }
            "median" => Denoiser::median(arg.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// False when `value` is only an empirical lower bound.
    pub exact: bool,
}

/// Estimates the Lipschitz constant of a denoiser on images of `probe` shape.
///
/// Affine denoisers get the operator norm of their linear part by power
/// iteration (`trials` iterations, at least 100). The median filter gets the
/// largest observed ratio `‖D(x) − D(x')‖ / ‖x − x'‖` over `trials` random
/// pairs, which only bounds the constant from below.
pub fn lipschitz_estimate(
    d: &Denoiser,
    probe: Shape,
    trials: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if d.is_affine() {
        let top = power_iteration(
            probe,
            |v| d.linear_adjoint(&d.linear_part(v)?),
            trials.max(100),
            1e-15,
            seed,
        )?;
        return Ok(LipschitzEstimate {
            value: top.max(0.0).sqrt(),
            exact: true,
        });
    }
    Ok(LipschitzEstimate {
        value: empirical_lipschitz(d, probe, trials, seed)?,
        exact: false,
    })
}

/// Largest ratio `‖D(x) − D(x')‖ / ‖x − x'‖` over random pairs.
pub fn empirical_lipschitz(
    d: &dyn Denoise,
    probe: Shape,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for t in 0..trials {
        let x = Image::from_fn(probe, |_, _| rng.random_range(0.0..1.0));
        // alternate between independent pairs and small perturbations
        let spread = if t % 2 == 0 { 1.0 } else { 1e-3 };
        let x2 = x.map(|v| v + spread * rng.random_range(-1.0..1.0));
        let den = x.distance_l2(&x2)?;
        if den == 0.0 {
            continue;
        }
        let num = d.denoise(&x)?.distance_l2(&d.denoise(&x2)?)?;
        best = best.max(num / den);
    }
    Ok(best)
}
