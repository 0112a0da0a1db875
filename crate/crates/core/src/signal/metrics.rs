use crate::error::{Error, Result};
use crate::signal::image::Image;

/// Value reported by [`psnr`] when the two images are identical.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Peak signal-to-noise ratio in dB: `10 log10(peak^2 / MSE)`.
///
/// Returns [`PSNR_CAP_DB`] when the mean squared error is zero; the result is
/// never larger than the cap.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "PSNR peak must be positive, got {peak}"
        )));
    }
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    test.ensure_shape(reference.shape())?;
    let n = reference.len() as f64;
    Ok(reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}
