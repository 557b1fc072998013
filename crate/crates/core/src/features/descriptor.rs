use std::f64::consts::TAU;

use super::{PatchCenter, RasterImage};
use crate::dataset::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CELLS: usize = 4;
const BINS: usize = 8;

/// 4x4 spatial cells times 8 orientation bins.
pub const DESCRIPTOR_DIM: usize = CELLS * CELLS * BINS;

/// Per-component cap applied between the two normalizations.
pub const DESCRIPTOR_CLAMP: f64 = 0.2;

/// Gradient-orientation histogram of the square patch centered at `center`.
///
/// Layout: component `(cy * 4 + cx) * 8 + bin`. Gradients are central
/// differences (one-sided at the image border); each pixel votes its
/// gradient magnitude into the two nearest orientation bins with linear
/// weights. The histogram is L2-normalized, clamped at
/// [`DESCRIPTOR_CLAMP`], and normalized again. A patch without any gradient
/// yields the zero vector.
pub fn describe_patch<T: Scalar>(
    img: &RasterImage,
    center: PatchCenter,
    patch_size: usize,
) -> Result<FeatureVector<T>> {
    let half = patch_size / 2;
    let out_of_bounds = || Error::PatchOutOfBounds {
        x: center.x,
        y: center.y,
        size: patch_size,
        width: img.width(),
        height: img.height(),
    };
    if patch_size == 0 || center.x < half || center.y < half {
        return Err(out_of_bounds());
    }
    let (x0, y0) = (center.x - half, center.y - half);
    if x0 + patch_size > img.width() || y0 + patch_size > img.height() {
        return Err(out_of_bounds());
    }

    let mut hist = [0.0f64; DESCRIPTOR_DIM];
    for py in 0..patch_size {
        let y = y0 + py;
        let cy = py * CELLS / patch_size;
        for px in 0..patch_size {
            let x = x0 + px;
            let cx = px * CELLS / patch_size;
            let (gx, gy) = gradient(img, x, y);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(TAU);
            let pos = theta / TAU * BINS as f64;
            let lo = (pos.floor() as usize) % BINS;
            let hi = (lo + 1) % BINS;
            let frac = pos - pos.floor();
            let base = (cy * CELLS + cx) * BINS;
            hist[base + lo] += mag * (1.0 - frac);
            hist[base + hi] += mag * frac;
        }
    }

    if !normalize_and_clamp(&mut hist) {
        return Ok(FeatureVector::zeros(DESCRIPTOR_DIM));
    }
    Ok(FeatureVector::from_f64(&hist))
}

/// Normalize, clamp, renormalize. False for an all-zero histogram.
fn normalize_and_clamp(hist: &mut [f64]) -> bool {
    if !normalize(hist) {
        return false;
    }
    for v in hist.iter_mut() {
        *v = v.min(DESCRIPTOR_CLAMP);
    }
    normalize(hist)
}

fn gradient(img: &RasterImage, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let diff = |a: f32, b: f32, span: usize| (a as f64 - b as f64) / span as f64;
    let gx = if w < 2 {
        0.0
    } else {
        let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
        diff(img.at(r, y), img.at(l, y), r - l)
    };
    let gy = if h < 2 {
        0.0
    } else {
        let (u, d) = (y.saturating_sub(1), (y + 1).min(h - 1));
        diff(img.at(x, d), img.at(x, u), d - u)
    };
    (gx, gy)
}

/// Returns false (leaving `v` untouched) when the norm is zero.
fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}
