//! Data-fidelity terms for Poisson and Gaussian noise.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ReferenceFunction, ReferenceKind};
use crate::power::power_iteration;
use crate::signal::{Image, LinearOperator};

pub const DEFAULT_EPS_POS: f64 = 1e-8;

const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-8;
const POWER_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityKind {
    /// Negative Poisson log-likelihood, up to the constant `1ᵀ log(y!)`.
    Poisson,
    /// `½‖Ax − y‖²`
    Gaussian,
}

impl FidelityKind {
    pub fn name(self) -> &'static str {
        match self {
            FidelityKind::Poisson => "poisson",
            FidelityKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for FidelityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Data term `f(x)` tied to measurements `y` and a forward operator `A`.
#[derive(Debug, Clone)]
pub struct Fidelity {
    kind: FidelityKind,
    y: Image,
    op: Arc<dyn LinearOperator>,
    eps_pos: f64,
}

impl Fidelity {
    pub fn new(kind: FidelityKind, y: Image, op: Arc<dyn LinearOperator>) -> Result<Self> {
        y.ensure_shape(op.output_shape())?;
        if kind == FidelityKind::Poisson && !y.is_nonnegative() {
            return Err(Error::InvalidParameter(
                "poisson measurements must be nonnegative counts".into(),
            ));
        }
        Ok(Fidelity {
            kind,
            y,
            op,
            eps_pos: DEFAULT_EPS_POS,
        })
    }

    pub fn poisson(y: Image, op: Arc<dyn LinearOperator>) -> Result<Self> {
        Self::new(FidelityKind::Poisson, y, op)
    }

    pub fn gaussian(y: Image, op: Arc<dyn LinearOperator>) -> Result<Self> {
        Self::new(FidelityKind::Gaussian, y, op)
    }

    /// Replaces the positivity clamp used inside `log` and divisions.
    pub fn with_eps(mut self, eps_pos: f64) -> Result<Self> {
        if !(eps_pos > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_pos must be positive, got {eps_pos}"
            )));
        }
        self.eps_pos = eps_pos;
        Ok(self)
    }

    pub fn kind(&self) -> FidelityKind {
        self.kind
    }

    pub fn measurements(&self) -> &Image {
        &self.y
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator> {
        &self.op
    }

    pub fn eps_pos(&self) -> f64 {
        self.eps_pos
    }

    pub fn value(&self, x: &Image) -> Result<f64> {
        f_value(self, x)
    }

    pub fn grad(&self, x: &Image) -> Result<Image> {
        f_grad(self, x)
    }

    pub fn relative_smoothness(&self, h: &ReferenceFunction) -> Result<f64> {
        relative_smoothness(self, h)
    }
}

pub fn f_value(fid: &Fidelity, x: &Image) -> Result<f64> {
    let ax = fid.op.forward(x)?;
    let y = fid.y.data();
    Ok(match fid.kind {
        FidelityKind::Poisson => {
            let eps = fid.eps_pos;
            ax.data()
                .iter()
                .zip(y)
                .map(|(&a, &yi)| {
                    if yi == 0.0 {
                        a
                    } else {
                        a - yi * a.max(eps).ln()
                    }
                })
                .sum()
        }
        FidelityKind::Gaussian => {
            0.5 * ax
                .data()
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        }
    })
}

pub fn f_grad(fid: &Fidelity, x: &Image) -> Result<Image> {
    let ax = fid.op.forward(x)?;
    let residual = match fid.kind {
        FidelityKind::Poisson => {
            let eps = fid.eps_pos;
            ax.zip_map(&fid.y, |a, yi| 1.0 - yi / a.max(eps))?
        }
        FidelityKind::Gaussian => ax.sub(&fid.y)?,
    };
    fid.op.adjoint(&residual)
}

/// Constant L such that `L h − f` is convex.
///
/// Poisson with Burg's entropy gives `‖y‖₁`; Gaussian with the quadratic gives
/// `‖A‖₂²`, estimated by power iteration on `AᵀA`.
pub fn relative_smoothness(fid: &Fidelity, h: &ReferenceFunction) -> Result<f64> {
    match (fid.kind, h.kind()) {
        (FidelityKind::Poisson, ReferenceKind::Burg) => Ok(fid.y.norm_l1()),
        (FidelityKind::Gaussian, ReferenceKind::Quadratic) => power_iteration(
            fid.op.input_shape(),
            |v| fid.op.normal(v),
            POWER_ITERS,
            POWER_TOL,
            POWER_SEED,
        ),
        (f, r) => Err(Error::UnsupportedPair {
            fidelity: f.name(),
            reference: r.name(),
        }),
    }
}
