//! Shared domain types: rasters, features, boxes, depth maps and the
//! perception bundle that carries one image's machine perception.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major, channel-interleaved intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageRaster<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "raster size {width}x{height} must be positive"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "raster channel count {channels} must be 1 or 3"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "raster data",
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data
            .iter()
            .position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::InvalidInput(format!(
                "raster intensity {} at index {i} outside [0,1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Uniform raster with every channel at `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Bilinear resize with half-pixel centre alignment; see [`crate::raster`].
    pub fn resize(&self, width: usize, height: usize) -> Result<Self> {
        crate::raster::resize_raster(self, width, height)
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }
}

/// Embedding vector produced by an image encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    /// Extractor-produced vector: non-empty, finite, strictly positive norm.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let v = Self::new_allow_zero(values)?;
        if v.norm() <= T::zero() {
            return Err(Error::ZeroNorm);
        }
        Ok(v)
    }

    /// The all-zero "absent" sentinel of the given dimension.
    pub fn absent(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim.max(1)],
        }
    }

    fn new_allow_zero(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("feature vector must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature vector has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_absent(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            values: self.values.iter().map(|v| *v * k).collect(),
        }
    }
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<T> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self> {
        let unit = |v: T| v.is_finite() && v >= T::zero() && v <= T::one();
        if !(unit(x1) && unit(y1) && unit(x2) && unit(y2)) || x1 >= x2 || y1 >= y2 {
            return Err(Error::DegenerateBox {
                x1: x1.to_f64_lossy(),
                y1: y1.to_f64_lossy(),
                x2: x2.to_f64_lossy(),
                y2: y2.to_f64_lossy(),
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Converts an absolute pixel box, clipping it to the image.
    pub fn from_pixels(x1: T, y1: T, x2: T, y2: T, width: usize, height: usize) -> Result<Self> {
        let w = T::from_usize_lossy(width);
        let h = T::from_usize_lossy(height);
        let clip = |v: T| v.max(T::zero()).min(T::one());
        Self::new(clip(x1 / w), clip(y1 / h), clip(x2 / w), clip(y2 / h))
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        ((self.x1 + self.x2) * half, (self.y1 + self.y2) * half)
    }

    pub fn contains_point(&self, x: T, y: T) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub bbox: BoundingBox<T>,
    pub label: String,
    pub feature: FeatureVector<T>,
    pub confidence: T,
}

impl<T: Scalar> Detection<T> {
    pub fn new(
        bbox: BoundingBox<T>,
        label: impl Into<String>,
        feature: FeatureVector<T>,
        confidence: T,
    ) -> Result<Self> {
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "detection confidence {confidence} outside [0,1]"
            )));
        }
        Ok(Self {
            bbox,
            label: label.into(),
            feature,
            confidence,
        })
    }
}

/// Relative depth, row-major, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> DepthMap<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "depth size {width}x{height} must be positive"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "depth data",
                expected: width * height,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(Error::NonPositiveDepth {
                index,
                value: data[index].to_f64_lossy(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Every depth multiplied by `k > 0`.
    pub fn scaled(&self, k: T) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|v| *v * k).collect(),
        )
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Generated,
    Synthetic,
}

/// One image's full perception record.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionBundle<T> {
    pub image: ImageRaster<T>,
    pub global_feature: FeatureVector<T>,
    pub detections: Vec<Detection<T>>,
    pub depth: DepthMap<T>,
    pub source: Source,
    pub meta: BTreeMap<String, String>,
}

impl<T: Scalar> PerceptionBundle<T> {
    pub fn new(
        image: ImageRaster<T>,
        global_feature: FeatureVector<T>,
        detections: Vec<Detection<T>>,
        depth: DepthMap<T>,
        source: Source,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        let bundle = Self {
            image,
            global_feature,
            detections,
            depth,
            source,
            meta,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.depth.width() != self.image.width() || self.depth.height() != self.image.height() {
            return Err(Error::InvalidInput(format!(
                "depth {}x{} does not match image {}x{}",
                self.depth.width(),
                self.depth.height(),
                self.image.width(),
                self.image.height()
            )));
        }
        let dim = self.global_feature.dim();
        for d in &self.detections {
            if d.feature.dim() != dim {
                return Err(Error::DimensionMismatch {
                    what: "detection feature",
                    expected: dim,
                    found: d.feature.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.global_feature.dim()
    }
}

/// The five sub-scores that feed aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubScores<T> {
    pub l_pix: T,
    pub l_sem: T,
    pub l_obj: T,
    pub l_ciou: T,
    pub l_dep: T,
}

impl<T: Scalar> SubScores<T> {
    pub fn new(l_pix: T, l_sem: T, l_obj: T, l_ciou: T, l_dep: T) -> Result<Self> {
        let s = Self {
            l_pix,
            l_sem,
            l_obj,
            l_ciou,
            l_dep,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-9);
        let checks = [
            ("l_pix", self.l_pix, T::zero(), T::one()),
            ("l_sem", self.l_sem, -T::one(), T::one()),
            ("l_obj", self.l_obj, T::zero(), T::lit(2.0)),
            ("l_ciou", self.l_ciou, T::zero(), T::lit(3.0)),
            ("l_dep", self.l_dep, T::zero(), T::infinity()),
        ];
        for (name, v, lo, hi) in checks {
            if !v.is_finite() || v < lo - tol || v > hi + tol {
                return Err(Error::InvalidInput(format!("{name} = {v} out of range")));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.l_pix, self.l_sem, self.l_obj, self.l_ciou, self.l_dep]
    }

    pub fn from_array(a: [T; 5]) -> Self {
        Self {
            l_pix: a[0],
            l_sem: a[1],
            l_obj: a[2],
            l_ciou: a[3],
            l_dep: a[4],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_rejects_out_of_range_and_bad_lengths() {
        assert!(ImageRaster::new(2, 2, 1, vec![0.0f64, 0.5, 1.0, 1.5]).is_err());
        assert!(ImageRaster::new(2, 2, 1, vec![0.0f64; 3]).is_err());
        assert!(ImageRaster::new(2, 2, 2, vec![0.0f64; 8]).is_err());
        assert!(ImageRaster::new(2, 2, 3, vec![0.25f64; 12]).is_ok());
    }

    #[test]
    fn box_requires_positive_area_inside_unit_square() {
        assert!(BoundingBox::new(0.0, 0.0, 0.5, 0.5).is_ok());
        assert!(BoundingBox::new(0.5, 0.0, 0.5, 0.5).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.2, 0.5).is_err());
        let b = BoundingBox::from_pixels(-4.0, 10.0, 50.0, 40.0, 100, 50).unwrap();
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (0.0, 0.2, 0.5, 0.8));
    }

    #[test]
    fn depth_must_be_positive() {
        let err = DepthMap::new(2, 1, vec![1.0f64, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDepth { index: 1, .. }));
    }

    #[test]
    fn feature_sentinel_is_the_only_zero_vector() {
        assert!(matches!(FeatureVector::new(vec![0.0f64; 4]), Err(Error::ZeroNorm)));
        assert!(FeatureVector::<f64>::absent(4).is_absent());
    }

    #[test]
    fn bundle_checks_depth_and_feature_dims() {
        let image = ImageRaster::filled(2, 2, 3, 0.5f64).unwrap();
        let feat = FeatureVector::new(vec![1.0, 0.0]).unwrap();
        let depth = DepthMap::new(2, 1, vec![1.0, 1.0]).unwrap();
        let r = PerceptionBundle::new(
            image.clone(),
            feat.clone(),
            vec![],
            depth,
            Source::Synthetic,
            BTreeMap::new(),
        );
        assert!(r.is_err());
        let depth = DepthMap::new(2, 2, vec![1.0; 4]).unwrap();
        let det = Detection::new(
            BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
            "x",
            FeatureVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let r = PerceptionBundle::new(image, feat, vec![det], depth, Source::Synthetic, BTreeMap::new());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn subscores_range_checks() {
        assert!(SubScores::new(0.0f64, 1.0, 0.0, 0.0, 0.0).is_ok());
        assert!(SubScores::new(1.5f64, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(SubScores::new(0.0f64, 1.0, 0.0, 0.0, f64::NAN).is_err());
    }
}
