use crate::error::{Error, Result};

use super::LineImage;

/// Normalize raw 8-bit gray values to `[0, 1]`, invert so ink is high, and
/// resize bilinearly to `target_height` keeping the aspect ratio.
///
/// Two-valued (binarized) inputs stay two-valued: after resizing they are
/// thresholded at 0.5.
pub fn preprocess(raw: &LineImage, target_height: usize) -> Result<LineImage> {
    if target_height == 0 {
        return Err(Error::Image("target height is zero".into()));
    }
    let binary = raw.pixels().iter().all(|&v| v == 0.0 || v == 255.0);
    let inverted: Vec<f32> = raw.pixels().iter().map(|&v| 1.0 - (v / 255.0).clamp(0.0, 1.0)).collect();
    let img = LineImage::new(raw.width(), raw.height(), inverted)?;
    let width = ((raw.width() as f64 * target_height as f64 / raw.height() as f64).round() as usize).max(1);
    let mut out = resize_bilinear(&img, width, target_height)?;
    if binary && out.height() != raw.height() {
        let px: Vec<f32> = out.pixels().iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect();
        out = LineImage::new(out.width(), out.height(), px)?;
    }
    Ok(out)
}

/// Pixel-centre aligned bilinear resampling with edge clamping.
pub fn resize_bilinear(img: &LineImage, width: usize, height: usize) -> Result<LineImage> {
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let coord = |d: usize, s: f64, n: usize| -> (usize, usize, f32) {
        let c = ((d as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = c.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        (lo, hi, (c - lo as f64) as f32)
    };
    let mut out = LineImage::filled(width, height, 0.0)?;
    for x in 0..width {
        let (x0, x1, fx) = coord(x, sx, img.width());
        for y in 0..height {
            let (y0, y1, fy) = coord(y, sy, img.height());
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bot = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            out.set(x, y, top * (1.0 - fy) + bot * fy);
        }
    }
    Ok(out)
}
