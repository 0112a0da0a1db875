//! Mirror steps, the Burg closed forms and the positivity safeguard.

use crate::error::{Error, Result};
use crate::geometry::{grad_h, grad_h_conj, ReferenceFunction};
use crate::signal::Image;

pub const DEFAULT_MAX_HALVINGS: usize = 30;

/// `∇h*(∇h(x) − γ·grad)`. For the quadratic this is `x − γ·grad`.
pub fn mirror_step(h: &ReferenceFunction, x: &Image, grad: &Image, gamma: f64) -> Result<Image> {
    let dual = grad_h(h, x)?.axpy(-gamma, grad)?;
    grad_h_conj(h, &dual)
}

/// Closed form of the Burg mirror step, `x ⊘ (1 + γ x ⊙ d)`.
///
/// With `d = ∇f(x)` this is the PnP-BPGM pre-denoising update; with
/// `d = ∇f(x) + τ(x − D(x))` it is the full RED-BSD update. Fails when a
/// denominator is not strictly positive.
pub fn burg_mirror_step(x: &Image, direction: &Image, gamma: f64) -> Result<Image> {
    let count = denominators(x, direction, gamma)?
        .iter()
        .filter(|&&d| !(d > 0.0))
        .count();
    if count > 0 {
        return Err(Error::DualDomain { count });
    }
    x.zip_map(direction, |xi, di| xi / (1.0 + gamma * xi * di))
}

fn denominators(x: &Image, direction: &Image, gamma: f64) -> Result<Vec<f64>> {
    direction.ensure_shape(x.shape())?;
    Ok(x.data()
        .iter()
        .zip(direction.data())
        .map(|(xi, di)| 1.0 + gamma * xi * di)
        .collect())
}

/// Outcome of the step-size safeguard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeStep {
    pub gamma: f64,
    pub halvings: usize,
}

/// Halves `gamma` until every Burg denominator `1 + γ x ⊙ d` exceeds `eps`.
pub fn safe_burg_step_size(
    x: &Image,
    direction: &Image,
    gamma: f64,
    max_halvings: usize,
    eps: f64,
) -> Result<SafeStep> {
    let mut g = gamma;
    let mut offending = 0;
    for halvings in 0..=max_halvings {
        offending = denominators(x, direction, g)?
            .iter()
            .filter(|&&d| !(d > eps))
            .count();
        if offending == 0 {
            return Ok(SafeStep { gamma: g, halvings });
        }
        g *= 0.5;
    }
    Err(Error::SafeguardExhausted {
        iteration: 0,
        halvings: max_halvings,
        offending,
    })
}

/// Burg mirror step with step-size halving. Returns the new point and the
/// step size actually used; the caller's `gamma` is left untouched.
pub fn burg_backtrack(
    x: &Image,
    grad: &Image,
    gamma: f64,
    max_halvings: usize,
    eps: f64,
) -> Result<(Image, f64)> {
    let safe = safe_burg_step_size(x, grad, gamma, max_halvings, eps)?;
    Ok((burg_mirror_step(x, grad, safe.gamma)?, safe.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(d: &[f64]) -> Image {
        Image::vector(d.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_is_gradient_descent() {
        let q = ReferenceFunction::quadratic();
        let z = mirror_step(&q, &v(&[2.0]), &v(&[1.0]), 0.5).unwrap();
        assert_eq!(z.data(), &[1.5]);
    }

    #[test]
    fn burg_step_matches_closed_form() {
        let b = ReferenceFunction::burg(1e-4, 10.0).unwrap();
        let z = mirror_step(&b, &v(&[1.0]), &v(&[0.5]), 0.1).unwrap();
        assert!((z.data()[0] - 1.0 / 1.05).abs() < 1e-15);
        let fast = burg_mirror_step(&v(&[1.0]), &v(&[0.5]), 0.1).unwrap();
        assert!((fast.data()[0] - z.data()[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed() {
        let x = v(&[0.3, 2.0]);
        let zero = v(&[0.0, 0.0]);
        for h in [
            ReferenceFunction::quadratic(),
            ReferenceFunction::burg(1e-4, 10.0).unwrap(),
            ReferenceFunction::shannon(1e-4, 10.0).unwrap(),
        ] {
            let z = mirror_step(&h, &x, &zero, 0.7).unwrap();
            assert!(z.max_abs_diff(&x).unwrap() < 1e-15);
        }
    }

    #[test]
    fn burg_dual_violation_reports_count() {
        let b = ReferenceFunction::burg(1e-4, 10.0).unwrap();
        let err = mirror_step(&b, &v(&[1.0, 1.0]), &v(&[-3.0, 0.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::DualDomain { count: 1 }));
        assert!(matches!(
            burg_mirror_step(&v(&[1.0]), &v(&[-3.0]), 0.5),
            Err(Error::DualDomain { count: 1 })
        ));
    }

    #[test]
    fn backtrack_traces_halving() {
        let (z, g) = burg_backtrack(&v(&[1.0]), &v(&[-3.0]), 0.5, 30, 1e-8).unwrap();
        assert_eq!(g, 0.25);
        assert_eq!(z.data(), &[4.0]);
    }

    #[test]
    fn backtrack_noop_when_feasible() {
        let x = v(&[1.0, 2.0]);
        let grad = v(&[0.5, -0.1]);
        let (z, g) = burg_backtrack(&x, &grad, 0.3, 30, 1e-8).unwrap();
        assert_eq!(g, 0.3);
        let b = ReferenceFunction::burg(1e-4, 10.0).unwrap();
        assert!(z.max_abs_diff(&mirror_step(&b, &x, &grad, 0.3).unwrap()).unwrap() < 1e-15);
        let (z, g) = burg_backtrack(&x, &v(&[0.0, 0.0]), 0.3, 30, 1e-8).unwrap();
        assert_eq!((z, g), (x, 0.3));
    }

    #[test]
    fn backtrack_exhaustion() {
        let err = burg_backtrack(&v(&[1.0]), &v(&[-1e12]), 1.0, 3, 1e-8).unwrap_err();
        assert!(matches!(
            err,
            Error::SafeguardExhausted { halvings: 3, offending: 1, .. }
        ));
    }
}
