//! Reference functions, Bregman distances and closed-form Bregman proximal
//! operators.
//!
//! Three Legendre functions are supported:
//!
//! | kind      | h(x)          | grad h      | grad h*      |
//! |-----------|---------------|-------------|--------------|
//! | quadratic | ½‖x‖²         | x           | z            |
//! | Burg      | −Σ log xᵢ     | −1/x        | −1/z (z < 0) |
//! | Shannon   | Σ xᵢ log xᵢ   | 1 + log x   | exp(z − 1)   |
//!
//! Strong convexity and smoothness constants of the entropies are only finite
//! on a box `[lo, hi]` with `lo > 0`, which the caller declares.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Quadratic,
    Burg,
    Shannon,
}

impl ReferenceKind {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::Quadratic => "quadratic",
            ReferenceKind::Burg => "burg",
            ReferenceKind::Shannon => "shannon",
        }
    }

    /// Whether the domain of h is the positive orthant.
    pub fn needs_positive(self) -> bool {
        !matches!(self, ReferenceKind::Quadratic)
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(ReferenceKind::Quadratic),
            "burg" => Ok(ReferenceKind::Burg),
            "shannon" => Ok(ReferenceKind::Shannon),
            _ => Err(Error::InvalidParameter(format!(
                "unknown reference function {s:?} (expected quadratic, burg or shannon)"
            ))),
        }
    }
}

/// Default lower edge of the working box for the entropies.
pub const DEFAULT_BOX_LO: f64 = 1e-4;

/// Reference function h together with the box its constants are valid on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFunction {
    kind: ReferenceKind,
    lo: f64,
    hi: f64,
}

impl ReferenceFunction {
    pub fn quadratic() -> Self {
        ReferenceFunction {
            kind: ReferenceKind::Quadratic,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn burg(lo: f64, hi: f64) -> Result<Self> {
        Self::entropy(ReferenceKind::Burg, lo, hi)
    }

    pub fn shannon(lo: f64, hi: f64) -> Result<Self> {
        Self::entropy(ReferenceKind::Shannon, lo, hi)
    }

    /// Reference function of the given kind on `[DEFAULT_BOX_LO, peak]`
    /// (the box is ignored for the quadratic).
    pub fn with_default_box(kind: ReferenceKind, peak: f64) -> Result<Self> {
        match kind {
            ReferenceKind::Quadratic => Ok(Self::quadratic()),
            k => Self::entropy(k, DEFAULT_BOX_LO, peak.max(2.0 * DEFAULT_BOX_LO)),
        }
    }

    fn entropy(kind: ReferenceKind, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{kind} entropy needs a box 0 < lo < hi < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(ReferenceFunction { kind, lo, hi })
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn domain_box(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Strong convexity modulus of h on the declared box.
    pub fn mu(&self) -> f64 {
        match self.kind {
            ReferenceKind::Quadratic => 1.0,
            ReferenceKind::Burg => 1.0 / (self.hi * self.hi),
            ReferenceKind::Shannon => 1.0 / self.hi,
        }
    }

    /// Lipschitz constant of grad h on the declared box.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ReferenceKind::Quadratic => 1.0,
            ReferenceKind::Burg => 1.0 / (self.lo * self.lo),
            ReferenceKind::Shannon => 1.0 / self.lo,
        }
    }

    fn check_interior(&self, x: &Image, what: &'static str) -> Result<()> {
        if self.kind.needs_positive() {
            let count = x.data().iter().filter(|&&v| v <= 0.0).count();
            if count > 0 {
                return Err(Error::Domain { what, count });
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Image) -> Result<f64> {
        h_value(self, x)
    }

    pub fn grad(&self, x: &Image) -> Result<Image> {
        grad_h(self, x)
    }

    pub fn grad_conj(&self, z: &Image) -> Result<Image> {
        grad_h_conj(self, z)
    }
}

pub fn h_value(h: &ReferenceFunction, x: &Image) -> Result<f64> {
    let d = x.data();
    match h.kind {
        ReferenceKind::Quadratic => Ok(0.5 * d.iter().map(|v| v * v).sum::<f64>()),
        ReferenceKind::Burg => {
            h.check_interior(x, "burg entropy")?;
            Ok(-d.iter().map(|v| v.ln()).sum::<f64>())
        }
        ReferenceKind::Shannon => {
            let count = d.iter().filter(|&&v| v < 0.0).count();
            if count > 0 {
                return Err(Error::Domain {
                    what: "shannon entropy",
                    count,
                });
            }
            // 0 log 0 = 0 by continuity
            Ok(d.iter()
                .map(|&v| if v == 0.0 { 0.0 } else { v * v.ln() })
                .sum())
        }
    }
}

pub fn grad_h(h: &ReferenceFunction, x: &Image) -> Result<Image> {
    h.check_interior(x, "reference gradient")?;
    Ok(match h.kind {
        ReferenceKind::Quadratic => x.clone(),
        ReferenceKind::Burg => x.map(|v| -1.0 / v),
        ReferenceKind::Shannon => x.map(|v| 1.0 + v.ln()),
    })
}

/// Gradient of the Fenchel conjugate h*, the inverse of [`grad_h`].
pub fn grad_h_conj(h: &ReferenceFunction, z: &Image) -> Result<Image> {
    Ok(match h.kind {
        ReferenceKind::Quadratic => z.clone(),
        ReferenceKind::Burg => {
            let count = z.data().iter().filter(|&&v| v >= 0.0).count();
            if count > 0 {
                return Err(Error::DualDomain { count });
            }
            z.map(|v| -1.0 / v)
        }
        ReferenceKind::Shannon => z.map(|v| (v - 1.0).exp()),
    })
}

/// `B_h(x; y) = h(x) − h(y) − ⟨grad h(y), x − y⟩`
///
/// Evaluated coordinatewise in a cancellation-free form for the entropies.
pub fn bregman_distance(h: &ReferenceFunction, x: &Image, y: &Image) -> Result<f64> {
    y.ensure_shape(x.shape())?;
    h.check_interior(y, "bregman distance anchor")?;
    let pairs = x.data().iter().zip(y.data());
    match h.kind {
        ReferenceKind::Quadratic => Ok(0.5 * pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
        ReferenceKind::Burg => {
            h.check_interior(x, "bregman distance argument")?;
            Ok(pairs
                .map(|(a, b)| {
                    let r = a / b;
                    r - r.ln() - 1.0
                })
                .sum())
        }
        ReferenceKind::Shannon => {
            let count = x.data().iter().filter(|&&v| v < 0.0).count();
            if count > 0 {
                return Err(Error::Domain {
                    what: "bregman distance argument",
                    count,
                });
            }
            Ok(pairs
                .map(|(&a, &b)| {
                    let xlogx = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
                    xlogx - a + b
                })
                .sum())
        }
    }
}

/// Regularizers g with closed-form (Bregman) proximal operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RegularizerKind {
    Zero,
    /// Indicator of the nonnegative orthant.
    NonnegIndicator,
    /// `λ‖x‖₁`
    L1(f64),
}

impl RegularizerKind {
    /// `g(x)`, infinite when the indicator constraint is violated.
    pub fn value(&self, x: &Image) -> f64 {
        match *self {
            RegularizerKind::Zero => 0.0,
            RegularizerKind::NonnegIndicator => {
                if x.is_nonnegative() {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegularizerKind::L1(lambda) => lambda * x.norm_l1(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let RegularizerKind::L1(lambda) = *self {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "l1 weight must be nonnegative, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerKind::Zero => f.write_str("zero"),
            RegularizerKind::NonnegIndicator => f.write_str("nonneg"),
            RegularizerKind::L1(l) => write!(f, "l1:{l}"),
        }
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let g = match s {
            "zero" => RegularizerKind::Zero,
            "nonneg" => RegularizerKind::NonnegIndicator,
            _ => match s.strip_prefix("l1:").map(str::parse::<f64>) {
                Some(Ok(l)) => RegularizerKind::L1(l),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown regularizer {s:?} (expected zero, nonneg or l1:LAMBDA)"
                    )))
                }
            },
        };
        g.validate()?;
        Ok(g)
    }
}

impl TryFrom<String> for RegularizerKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RegularizerKind> for String {
    fn from(g: RegularizerKind) -> String {
        g.to_string()
    }
}

fn check_step(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Classical proximal operator `prox_{γg}(z)`.
pub fn bpo_euclidean(z: &Image, g: RegularizerKind, gamma: f64) -> Result<Image> {
    check_step(gamma)?;
    g.validate()?;
    Ok(match g {
        RegularizerKind::Zero => z.clone(),
        RegularizerKind::NonnegIndicator => z.map(|v| v.max(0.0)),
        RegularizerKind::L1(lambda) => {
            let t = gamma * lambda;
            z.map(|v| v.signum() * (v.abs() - t).max(0.0))
        }
    })
}

/// Left Bregman proximal operator under Burg's entropy,
/// `argmin_x B_h(x, z) + γ g(x)`.
pub fn bpo_burg(z: &Image, g: RegularizerKind, gamma: f64) -> Result<Image> {
    check_step(gamma)?;
    g.validate()?;
    let count = z.data().iter().filter(|&&v| v <= 0.0).count();
    if count > 0 {
        return Err(Error::Domain {
            what: "burg proximal input",
            count,
        });
    }
    Ok(match g {
        RegularizerKind::Zero | RegularizerKind::NonnegIndicator => z.clone(),
        // stationarity: −1/x + 1/z + γλ = 0
        RegularizerKind::L1(lambda) => z.map(|v| v / (1.0 + gamma * lambda * v)),
    })
}

/// Left Bregman proximal operator under Shannon's entropy.
pub fn bpo_shannon(z: &Image, g: RegularizerKind, gamma: f64) -> Result<Image> {
    check_step(gamma)?;
    g.validate()?;
    let count = z.data().iter().filter(|&&v| v <= 0.0).count();
    if count > 0 {
        return Err(Error::Domain {
            what: "shannon proximal input",
            count,
        });
    }
    Ok(match g {
        RegularizerKind::Zero | RegularizerKind::NonnegIndicator => z.clone(),
        // stationarity: log x − log z + γλ = 0
        RegularizerKind::L1(lambda) => {
            let shrink = (-gamma * lambda).exp();
            z.map(|v| v * shrink)
        }
    })
}

/// Bregman proximal operator for whichever geometry `h` defines.
pub fn bpo(h: &ReferenceFunction, z: &Image, g: RegularizerKind, gamma: f64) -> Result<Image> {
    match h.kind {
        ReferenceKind::Quadratic => bpo_euclidean(z, g, gamma),
        ReferenceKind::Burg => bpo_burg(z, g, gamma),
        ReferenceKind::Shannon => bpo_shannon(z, g, gamma),
    }
}

/// Bregman projection onto the probability simplex under Shannon's entropy.
pub fn bregman_simplex_projection(z: &Image) -> Result<Image> {
    let count = z.data().iter().filter(|&&v| v <= 0.0).count();
    if count > 0 {
        return Err(Error::Domain {
            what: "simplex projection input",
            count,
        });
    }
    let total = z.norm_l1();
    Ok(z.map(|v| v / total))
}
