use crate::error::{invalid, Error, Result};
use crate::image::Image;

/// Default PSNR peak for 8-bit data.
pub const DEFAULT_PEAK: f64 = 255.0;

/// Mean squared error between two images of the same shape.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "mse")?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak^2 / mse)`; `+inf` when the images are identical.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(invalid(format!("psnr peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// `sum |w1_n - w2_n|`.
pub fn l1_filter_distance(w1: &[f64], w2: &[f64]) -> Result<f64> {
    if w1.len() != w2.len() {
        return Err(Error::DimensionMismatch(format!(
            "filter lengths {} and {}",
            w1.len(),
            w2.len()
        )));
    }
    Ok(w1.iter().zip(w2).map(|(a, b)| (a - b).abs()).sum())
}
