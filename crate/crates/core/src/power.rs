use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::signal::{Image, Shape};

/// Largest eigenvalue of a symmetric positive semidefinite map by power
/// iteration with a Rayleigh-quotient estimate.
///
/// Stops after `max_iters` products or when the estimate changes by less than
/// `rel_tol` relative to itself. The start vector is drawn from `seed`.
pub fn power_iteration(
    shape: Shape,
    apply: impl Fn(&Image) -> Result<Image>,
    max_iters: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Image::from_fn(shape, |_, _| rng.random_range(0.0..1.0));
    v = v.scale(1.0 / v.norm_l2());
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let w = apply(&v)?;
        let next = v.dot(&w)?;
        let norm = w.norm_l2();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w.scale(1.0 / norm);
        let converged = (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    Ok(estimate)
}
