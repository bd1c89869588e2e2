//! Reference-free image-caption evaluation by cyclic comparison.
//!
//! A caption is scored by comparing the original image with an image
//! generated from the caption. Both images arrive as [`PerceptionBundle`]s
//! (raster, global feature, detections, depth map) and are compared at the
//! pixel, semantic and object level; a small MLP folds the five sub-scores
//! into one value. The [`stats`] module holds the Kendall and pairwise
//! accuracy machinery for validating metrics against human judgments.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod aggregator;
pub mod bundle_io;
pub mod commands;
pub mod data;
pub mod error;
pub mod numfmt;
pub mod object;
pub mod pipeline;
pub mod pixel;
pub mod raster;
pub mod scalar;
pub mod semantic;
pub mod stats;
pub mod synthetic;

pub use bundle_io::{load_bundle, save_bundle};
pub use data::{BoundingBox, DepthMap, Detection, FeatureVector, ImageRaster, PerceptionBundle, Source, SubScores};
pub use error::{Error, Result};
pub use object::DepthMode;
pub use pipeline::{score_pair, ScoreConfig};
pub use scalar::Scalar;

pub type Bundle = data::PerceptionBundle<f64>;
pub type Image = data::ImageRaster<f64>;
pub type Feature = data::FeatureVector<f64>;
pub type BBox = data::BoundingBox<f64>;
pub type Det = data::Detection<f64>;
pub type Depth = data::DepthMap<f64>;
pub type Scores = data::SubScores<f64>;
pub type Model = aggregator::AggregatorModel<f64>;
pub type Config = pipeline::ScoreConfig<f64>;
pub type Costs = object::CostMatrix<f64>;
