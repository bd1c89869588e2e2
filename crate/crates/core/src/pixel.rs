//! Pixel-level comparison: size-normalized Minkowski distance.

use crate::data::ImageRaster;
use crate::error::{Error, Result};
use crate::raster::resize_raster;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMetricConfig<T> {
    /// Minkowski exponent, `p >= 1`.
    pub p: T,
    /// Both rasters are resampled to `canonical_size x canonical_size`.
    pub canonical_size: usize,
}

impl<T: Scalar> Default for PixelMetricConfig<T> {
    fn default() -> Self {
        Self {
            p: T::lit(2.0),
            canonical_size: 512,
        }
    }
}

impl<T: Scalar> PixelMetricConfig<T> {
    pub fn new(p: T, canonical_size: usize) -> Result<Self> {
        if !(p.is_finite() && p >= T::one()) {
            return Err(Error::InvalidInput(format!("Minkowski exponent {p} must be >= 1")));
        }
        if canonical_size == 0 {
            return Err(Error::InvalidInput("canonical size must be >= 1".into()));
        }
        Ok(Self { p, canonical_size })
    }
}

/// Raw Minkowski sum `(Σ|a_i - b_i|^p)^(1/p)` over equally sized slices.
pub fn minkowski<T: Scalar>(a: &[T], b: &[T], p: T) -> T {
    debug_assert_eq!(a.len(), b.len());
    let two = T::lit(2.0);
    if p == two {
        a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
    } else if p == T::one() {
        a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (*x - *y).abs().powf(p))
            .sum::<T>()
            .powf(p.recip())
    }
}

/// `L_pix`: Minkowski distance over the flattened canonical rasters divided
/// by `N^(1/p)`, `N = size² · channels`. Lies in `[0,1]`.
pub fn pixel_distance<T: Scalar>(
    ori: &ImageRaster<T>,
    gen: &ImageRaster<T>,
    cfg: &PixelMetricConfig<T>,
) -> Result<T> {
    if ori.channels() != gen.channels() {
        return Err(Error::DimensionMismatch {
            what: "raster channels",
            expected: ori.channels(),
            found: gen.channels(),
        });
    }
    let s = cfg.canonical_size;
    let a = resize_raster(ori, s, s)?;
    let b = resize_raster(gen, s, s)?;
    let n = T::from_usize_lossy(a.data().len());
    let d = minkowski(a.data(), b.data(), cfg.p) / n.powf(cfg.p.recip());
    Ok(d.max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: f64, size: usize) -> PixelMetricConfig<f64> {
        PixelMetricConfig::new(p, size).unwrap()
    }

    #[test]
    fn identical_images_have_zero_distance() {
        let img = ImageRaster::new(2, 2, 1, vec![0.1, 0.7, 0.3, 0.9]).unwrap();
        assert_eq!(pixel_distance(&img, &img, &cfg(2.0, 4)).unwrap(), 0.0);
    }

    #[test]
    fn black_vs_white_is_one_for_any_p() {
        let a = ImageRaster::filled(5, 3, 3, 0.0).unwrap();
        let b = ImageRaster::filled(5, 3, 3, 1.0).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let d = pixel_distance(&a, &b, &cfg(p, 8)).unwrap();
            assert!((d - 1.0).abs() < 1e-12, "p={p}: {d}");
        }
    }

    #[test]
    fn two_of_four_pixels_differ() {
        let a = ImageRaster::new(2, 2, 1, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = ImageRaster::new(2, 2, 1, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let d = pixel_distance(&a, &b, &cfg(2.0, 2)).unwrap();
        assert!((d - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let a = ImageRaster::filled(2, 2, 1, 0.0).unwrap();
        let b = ImageRaster::filled(2, 2, 3, 0.0).unwrap();
        assert!(pixel_distance(&a, &b, &cfg(2.0, 2)).is_err());
    }

    #[test]
    fn config_rejects_sub_unit_exponent() {
        assert!(PixelMetricConfig::new(0.5, 4).is_err());
        assert!(PixelMetricConfig::new(2.0, 0).is_err());
        assert_eq!(PixelMetricConfig::<f32>::default().canonical_size, 512);
    }

    fn raster(v: &[f64]) -> ImageRaster<f64> {
        ImageRaster::new(4, 4, 1, v.to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn symmetric(a in proptest::collection::vec(0.0f64..=1.0, 16),
                     b in proptest::collection::vec(0.0f64..=1.0, 16),
                     p in 1.0f64..5.0) {
            let c = cfg(p, 4);
            let d1 = pixel_distance(&raster(&a), &raster(&b), &c).unwrap();
            let d2 = pixel_distance(&raster(&b), &raster(&a), &c).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn unnormalized_triangle_inequality(a in proptest::collection::vec(0.0f64..=1.0, 16),
                                            b in proptest::collection::vec(0.0f64..=1.0, 16),
                                            c in proptest::collection::vec(0.0f64..=1.0, 16)) {
            let ab = minkowski(&a, &b, 2.0);
            let bc = minkowski(&b, &c, 2.0);
            let ac = minkowski(&a, &c, 2.0);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn moving_a_pixel_away_never_decreases(a in proptest::collection::vec(0.0f64..=1.0, 16),
                                               b in proptest::collection::vec(0.0f64..=1.0, 16),
                                               idx in 0usize..16, step in 0.0f64..1.0) {
            let c = cfg(2.0, 4);
            let before = pixel_distance(&raster(&a), &raster(&b), &c).unwrap();
            let mut moved = b.clone();
            moved[idx] = if b[idx] >= a[idx] {
                (b[idx] + step).min(1.0)
            } else {
                (b[idx] - step).max(0.0)
            };
            let after = pixel_distance(&raster(&a), &raster(&moved), &c).unwrap();
            prop_assert!(after >= before);
        }
    }
}
