//! Foveated, semantics-driven visual search.
//!
//! A fovea of concentric, progressively downsampled layers is placed on each
//! fixation; detections from every layer are remapped to the image and fused
//! into a grid of Dirichlet beliefs, and the next fixation is the cell most
//! likely to hold the target. Generated scanpaths can be scored against
//! reference scanpaths with sequence-alignment metrics.

pub mod bridge;
pub mod error;
pub mod fovea;
pub mod geometry;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod search;
pub mod semantics;
pub mod simdet;

pub use error::{Error, Result};
pub use fovea::{build_pyramid, layer_side, pixel_cost, remap_bbox, FoveaConfig, LayerFrame, PixelCost};
pub use geometry::{BBox, Frame, Pixel};
pub use raster::Raster;
pub use scene::{SceneSpec, COCO_CLASSES};
pub use search::{run_episode, EpisodeConfig, Scanpath};
pub use semantics::{kaplan_update, BeliefGrid, ClassSet, GridGeometry, ScoreVector};
pub use simdet::{detect_layer, filter_detections, Detection, DetectorModel};
