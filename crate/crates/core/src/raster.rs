//! Bilinear resampling with half-pixel centre alignment.
//!
//! Output pixel `i` of an axis resized from `n_in` to `n_out` samples the
//! continuous source coordinate `(i + 0.5) * n_in / n_out - 0.5`, clamped to
//! the valid pixel range. Every output value is a convex combination of
//! inputs, so bounds (intensities in `[0,1]`, positive depth) are preserved.

use crate::data::{BoundingBox, DepthMap, ImageRaster};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Interpolation taps along one axis: `(lo, hi, weight_hi)`.
#[derive(Debug, Clone, Copy)]
struct Tap<T> {
    lo: usize,
    hi: usize,
    t: T,
}

fn tap<T: Scalar>(src: T, n_in: usize) -> Tap<T> {
    let max = T::from_usize_lossy(n_in - 1);
    let s = src.max(T::zero()).min(max);
    let lo = s.floor().to_usize().unwrap_or(0).min(n_in - 1);
    let hi = (lo + 1).min(n_in - 1);
    Tap {
        lo,
        hi,
        t: s - T::from_usize_lossy(lo),
    }
}

fn axis_taps<T: Scalar>(n_in: usize, n_out: usize) -> Vec<Tap<T>> {
    let scale = T::from_usize_lossy(n_in) / T::from_usize_lossy(n_out);
    let half = T::lit(0.5);
    (0..n_out)
        .map(|i| tap((T::from_usize_lossy(i) + half) * scale - half, n_in))
        .collect()
}

/// Taps sampling the normalized span `[a, b]` of an axis of `n_in` pixels
/// at `n_out` evenly spaced cell centres.
fn span_taps<T: Scalar>(a: T, b: T, n_in: usize, n_out: usize) -> Vec<Tap<T>> {
    let n = T::from_usize_lossy(n_in);
    let step = (b - a) / T::from_usize_lossy(n_out);
    let half = T::lit(0.5);
    (0..n_out)
        .map(|i| tap((a + (T::from_usize_lossy(i) + half) * step) * n - half, n_in))
        .collect()
}

#[inline]
fn lerp<T: Scalar>(a: T, b: T, t: T) -> T {
    if t.is_zero() {
        a
    } else {
        a + (b - a) * t
    }
}

fn sample_grid<T: Scalar>(
    get: impl Fn(usize, usize) -> T,
    xs: &[Tap<T>],
    ys: &[Tap<T>],
    out: &mut Vec<T>,
) {
    for ty in ys {
        for tx in xs {
            let top = lerp(get(tx.lo, ty.lo), get(tx.hi, ty.lo), tx.t);
            let bottom = lerp(get(tx.lo, ty.hi), get(tx.hi, ty.hi), tx.t);
            out.push(lerp(top, bottom, ty.t));
        }
    }
}

/// Resize a raster to `width x height`; intensities are clamped to `[0,1]`.
pub fn resize_raster<T: Scalar>(img: &ImageRaster<T>, width: usize, height: usize) -> Result<ImageRaster<T>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "target size {width}x{height} must be positive"
        )));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let xs = axis_taps::<T>(img.width(), width);
    let ys = axis_taps::<T>(img.height(), height);
    let channels = img.channels();
    let mut planes: Vec<Vec<T>> = Vec::with_capacity(channels);
    for c in 0..channels {
        let mut plane = Vec::with_capacity(width * height);
        sample_grid(|x, y| img.get(x, y, c), &xs, &ys, &mut plane);
        planes.push(plane);
    }
    let mut data = Vec::with_capacity(width * height * channels);
    for i in 0..width * height {
        for plane in &planes {
            data.push(plane[i].max(T::zero()).min(T::one()));
        }
    }
    Ok(ImageRaster::from_parts_unchecked(width, height, channels, data))
}

/// Resize a depth map; positivity is preserved by convexity.
pub fn resize_depth<T: Scalar>(depth: &DepthMap<T>, width: usize, height: usize) -> Result<DepthMap<T>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "target size {width}x{height} must be positive"
        )));
    }
    if width == depth.width() && height == depth.height() {
        return Ok(depth.clone());
    }
    let xs = axis_taps::<T>(depth.width(), width);
    let ys = axis_taps::<T>(depth.height(), height);
    let mut data = Vec::with_capacity(width * height);
    sample_grid(|x, y| depth.get(x, y), &xs, &ys, &mut data);
    Ok(DepthMap::from_parts_unchecked(width, height, data))
}

/// Crop the normalized `region` out of `depth` and resample it onto a
/// `width x height` grid.
pub fn crop_depth<T: Scalar>(
    depth: &DepthMap<T>,
    region: &BoundingBox<T>,
    width: usize,
    height: usize,
) -> DepthMap<T> {
    let xs = span_taps(region.x1, region.x2, depth.width(), width.max(1));
    let ys = span_taps(region.y1, region.y2, depth.height(), height.max(1));
    let mut data = Vec::with_capacity(xs.len() * ys.len());
    sample_grid(|x, y| depth.get(x, y), &xs, &ys, &mut data);
    DepthMap::from_parts_unchecked(xs.len(), ys.len(), data)
}
