//! Structural similarity with a uniform window.

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_SSIM_WINDOW: usize = 7;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Mean SSIM over every fully contained `window x window` patch, using
/// population statistics and the stabilizers for unit dynamic range.
pub fn ssim(img_a: &Image, img_b: &Image, window: usize) -> Result<f64> {
    img_a.same_shape(img_b)?;
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("SSIM window must be odd and at least 3, got {window}")));
    }
    let (h, w) = (img_a.height(), img_a.width());
    if window > h || window > w {
        return Err(Error::InvalidArgument(format!("SSIM window {window} exceeds image {h}x{w}")));
    }
    let (a, b) = (img_a.pixels(), img_b.pixels());
    let np = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=h - window {
        for left in 0..=w - window {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in top..top + window {
                for c in left..left + window {
                    let (x, y) = (a[r * w + c], b[r * w + c]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / np, sb / np);
            let va = (saa / np - ma * ma).max(0.0);
            let vb = (sbb / np - mb * mb).max(0.0);
            let cov = sab / np - ma * mb;
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
