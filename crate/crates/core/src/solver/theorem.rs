//! Sufficient conditions for the PnP-BPGM fixed-point iteration to converge.
//!
//! With h μ_h-strongly convex and L_h-smooth, f μ_f-strongly convex and
//! L_f-smooth, and an M-Lipschitz denoiser, the iteration converges when
//!
//! ```text
//! M < μ_h (μ_f + L_f) / (L_h L_f − μ_h μ_f)
//! (μ_h / μ_f)(L_h / μ_h − 1/M) < γ < (μ_h / L_f)(1 + 1/M)
//! ```

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound on the denoiser Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzBound {
    Finite(f64),
    /// The bound's denominator vanishes: no constraint on M.
    Unbounded,
}

impl Serialize for LipschitzBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            LipschitzBound::Finite(b) => s.serialize_f64(b),
            LipschitzBound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl LipschitzBound {
    pub fn admits(&self, m: f64) -> bool {
        match *self {
            LipschitzBound::Finite(b) => m < b,
            LipschitzBound::Unbounded => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCertificate {
    pub mu_h: f64,
    pub l_h: f64,
    pub mu_f: f64,
    pub l_f: f64,
    pub m: f64,
    pub m_bound: LipschitzBound,
    /// Admissible step sizes `(lower, upper)`, reported even when empty.
    pub gamma_interval: (f64, f64),
    pub gamma_interval_nonempty: bool,
    pub satisfied: bool,
}

impl TheoremCertificate {
    /// Whether `gamma` lies strictly inside the step-size interval of a
    /// satisfied certificate.
    pub fn admits(&self, gamma: f64) -> bool {
        self.satisfied && self.gamma_interval.0 < gamma && gamma < self.gamma_interval.1
    }

    pub fn gamma_midpoint(&self) -> f64 {
        0.5 * (self.gamma_interval.0 + self.gamma_interval.1)
    }
}

pub fn theorem_gate(mu_h: f64, l_h: f64, mu_f: f64, l_f: f64, m: f64) -> Result<TheoremCertificate> {
    for (name, v) in [("mu_h", mu_h), ("L_h", l_h), ("mu_f", mu_f), ("L_f", l_f), ("M", m)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if mu_h > l_h {
        return Err(Error::InvalidParameter(format!(
            "mu_h = {mu_h} exceeds L_h = {l_h}"
        )));
    }
    if mu_f > l_f {
        return Err(Error::InvalidParameter(format!(
            "mu_f = {mu_f} exceeds L_f = {l_f}"
        )));
    }
    let denom = l_h * l_f - mu_h * mu_f;
    let m_bound = if denom > 0.0 {
        LipschitzBound::Finite(mu_h * (mu_f + l_f) / denom)
    } else {
        LipschitzBound::Unbounded
    };
    let lower = ((mu_h / mu_f) * (l_h / mu_h - 1.0 / m)).max(0.0);
    let upper = (mu_h / l_f) * (1.0 + 1.0 / m);
    let nonempty = lower < upper;
    Ok(TheoremCertificate {
        mu_h,
        l_h,
        mu_f,
        l_f,
        m,
        m_bound,
        gamma_interval: (lower, upper),
        gamma_interval_nonempty: nonempty,
        satisfied: m_bound.admits(m) && nonempty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let c = theorem_gate(1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(c.m_bound, LipschitzBound::Finite(3.0));
        assert!((c.gamma_interval.0 - 0.5).abs() < 1e-15);
        assert!((c.gamma_interval.1 - 0.75).abs() < 1e-15);
        assert!(c.satisfied);
        assert!(c.admits(0.6) && !c.admits(0.8));
    }

    #[test]
    fn vanishing_denominator_is_unbounded() {
        for m in [0.1, 1.0, 50.0] {
            let c = theorem_gate(1.0, 1.0, 1.0, 1.0, m).unwrap();
            assert_eq!(c.m_bound, LipschitzBound::Unbounded);
            assert!(c.gamma_interval_nonempty);
            assert!(c.satisfied);
        }
    }

    #[test]
    fn lipschitz_above_bound_fails_but_reports_interval() {
        let c = theorem_gate(1.0, 1.0, 1.0, 2.0, 4.0).unwrap();
        assert!(!c.satisfied);
        assert!((c.gamma_interval.0 - 0.75).abs() < 1e-15);
        assert!((c.gamma_interval.1 - 0.625).abs() < 1e-15);
        assert!(!c.gamma_interval_nonempty);
    }

    #[test]
    fn rejects_inconsistent_constants() {
        assert!(theorem_gate(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(theorem_gate(2.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(theorem_gate(1.0, 1.0, 3.0, 1.0, 1.0).is_err());
        assert!(theorem_gate(1.0, 1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn serializes_unbounded_as_string() {
        let c = theorem_gate(1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        let json = serde_json::to_value(c).unwrap();
        assert_eq!(json["m_bound"], "unbounded");
        let c = theorem_gate(1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(serde_json::to_value(c).unwrap()["m_bound"], 3.0);
    }
}
