//! Synthetic test images with intensities in `[0, 1]`.

use crate::error::{Error, Result};
use crate::signal::{Image, Shape};

pub const NAMES: [&str; 2] = ["blocks", "bump"];

/// Piecewise-constant scene: rectangles, a disk and a thin bar on a dim
/// background. Geometry scales with `n`.
pub fn blocks(n: usize) -> Image {
    let s = n as f64 / 64.0;
    let inside = |lo: f64, hi: f64, v: usize| (v as f64) >= lo * s && (v as f64) < hi * s;
    Image::from_fn(Shape::new(n, n), |r, c| {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        let (dy, dx) = (y - 40.0 * s, x - 42.0 * s);
        if dy * dy + dx * dx < (13.0 * s).powi(2) {
            1.0
        } else if inside(6.0, 30.0, r) && inside(6.0, 34.0, c) {
            0.7
        } else if inside(46.0, 58.0, r) && inside(6.0, 26.0, c) {
            0.45
        } else if inside(4.0, 60.0, r) && inside(56.0, 59.0, c) {
            0.9
        } else {
            0.2
        }
    })
}

/// Smooth isotropic bump on a dim background.
pub fn bump(n: usize) -> Image {
    let c = (n as f64 - 1.0) / 2.0;
    let sigma = n as f64 / 5.0;
    Image::from_fn(Shape::new(n, n), |r, q| {
        let d2 = (r as f64 - c).powi(2) + (q as f64 - c).powi(2);
        0.1 + 0.85 * (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Looks up a phantom by name at size `n`.
pub fn by_name(name: &str, n: usize) -> Result<Image> {
    match name {
        "blocks" => Ok(blocks(n)),
        "bump" => Ok(bump(n)),
        _ => Err(Error::InvalidParameter(format!(
            "unknown phantom {name:?} (expected one of {NAMES:?})"
        ))),
    }
}
