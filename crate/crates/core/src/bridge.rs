//! File-handshake bridge to an external detector process, and the detection
//! wire format it shares with the synthetic detector.
//!
//! Per fixation the engine creates `<work>/<scene_id>/fix_<t>/` holding the
//! layer PNGs and `manifest.json`, then waits for the detector to write
//! `detections.json` (one entry per layer) followed by `done.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::fovea::{build_pyramid, write_layers, FoveaConfig, LayerFrame, LayerManifest, MANIFEST_FILE};
use crate::geometry::{BBox, Frame, Pixel};
use crate::raster::Raster;
use crate::scene::SceneSpec;
use crate::semantics::{ClassSet, ScoreVector};
use crate::simdet::Detection;

pub const DETECTIONS_FILE: &str = "detections.json";
pub const DONE_FILE: &str = "done.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireDetection {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub scores: BTreeMap<String, f64>,
}

/// Detections of one layer, boxes in that layer's frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDetections {
    pub scene_id: String,
    pub fixation_index: usize,
    pub layer: u32,
    pub detections: Vec<WireDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LayerDetections {
    pub fn from_detections(
        scene_id: &str,
        fixation_index: usize,
        layer: u32,
        dets: &[Detection],
        classes: &ClassSet,
    ) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            fixation_index,
            layer,
            detections: dets
                .iter()
                .map(|d| WireDetection {
                    bbox: d.bbox.as_array(),
                    scores: d
                        .scores
                        .as_slice()
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s > 0.0)
                        .map(|(k, &s)| (classes.label(k).to_string(), s))
                        .collect(),
                })
                .collect(),
            error: None,
        }
    }

    /// Validates against the expected scene, fixation and layer geometry and
    /// converts to dense score vectors. Labels missing from a score map score zero.
    pub fn into_detections(self, classes: &ClassSet, base_side: u32) -> Result<Vec<Detection>> {
        let l1 = base_side as f64;
        self.detections
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let ctx = |m: String| Error::Wire(format!("layer {} detection {i}: {m}", self.layer));
                let [x0, y0, x1, y1] = w.bbox;
                if !w.bbox.iter().all(|v| v.is_finite() && (0.0..=l1).contains(v)) {
                    return Err(ctx(format!("box {:?} outside [0, {base_side}]", w.bbox)));
                }
                if x0 > x1 || y0 > y1 {
                    return Err(ctx(format!("box {:?} has inverted corners", w.bbox)));
                }
                let mut dense = vec![0.0; classes.len()];
                for (label, s) in &w.scores {
                    let k = classes
                        .index_of(label)
                        .ok_or_else(|| ctx(format!("unknown label {label:?}")))?;
                    dense[k] = *s;
                }
                let scores = ScoreVector::new(dense).map_err(|e| ctx(e.to_string()))?;
                Ok(Detection {
                    scores,
                    bbox: BBox::new(x0, y0, x1, y1, Frame::Layer(self.layer)),
                    source_layer: self.layer,
                })
            })
            .collect()
    }
}

/// Strict parse of a `detections.json` document: an array with exactly one
/// entry per layer `1..=levels`, all for the given scene and fixation.
pub fn parse_detection_document(
    text: &str,
    scene_id: &str,
    fixation_index: usize,
    levels: u32,
    base_side: u32,
    classes: &ClassSet,
) -> Result<Vec<Vec<Detection>>> {
    let docs: Vec<LayerDetections> =
        serde_json::from_str(text).map_err(|e| Error::Wire(format!("malformed document: {e}")))?;
    let mut by_layer: Vec<Option<Vec<Detection>>> = vec![None; levels as usize];
    for doc in docs {
        if doc.scene_id != scene_id {
            return Err(Error::Wire(format!("scene_id {:?}, expected {scene_id:?}", doc.scene_id)));
        }
        if doc.fixation_index != fixation_index {
            return Err(Error::Wire(format!(
                "fixation_index {}, expected {fixation_index}",
                doc.fixation_index
            )));
        }
        if doc.layer == 0 || doc.layer > levels {
            return Err(Error::Wire(format!("layer {} outside 1..={levels}", doc.layer)));
        }
        let slot = doc.layer as usize - 1;
        if by_layer[slot].is_some() {
            return Err(Error::Wire(format!("layer {} reported twice", doc.layer)));
        }
        if let Some(e) = &doc.error {
            log::warn!("detector error on {scene_id} fixation {fixation_index} layer {}: {e}", doc.layer);
        }
        by_layer[slot] = Some(doc.into_detections(classes, base_side)?);
    }
    by_layer
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| Error::Wire(format!("layer {} missing", i + 1))))
        .collect()
}

/// Manifest plus the job identity the external detector echoes back.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeManifest {
    #[serde(flatten)]
    pub layers: LayerManifest,
    pub scene_id: String,
    pub fixation_index: usize,
}

#[derive(Clone, Debug)]
pub struct BridgeDetector {
    pub work_dir: PathBuf,
    pub timeout: Duration,
    pub poll: Duration,
}

impl BridgeDetector {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            work_dir: work_dir.into(),
            timeout: Duration::from_secs(600),
            poll: Duration::from_millis(20),
        }
    }

    pub fn job_dir(&self, scene_id: &str, fixation_index: usize) -> PathBuf {
        self.work_dir.join(scene_id).join(format!("fix_{fixation_index}"))
    }

    /// Publishes the layers for one fixation and blocks until the detector
    /// answers (or the timeout passes).
    pub fn run_job(
        &self,
        image: &Raster,
        scene_id: &str,
        fixation_index: usize,
        focal: Pixel,
        cfg: &FoveaConfig,
        classes: &ClassSet,
    ) -> Result<Vec<Vec<Detection>>> {
        let dir = self.job_dir(scene_id, fixation_index);
        let done = dir.join(DONE_FILE);
        // stale answers from an earlier run must not be picked up
        for f in [DONE_FILE, crate::bridge::DETECTIONS_FILE] {
            let p = dir.join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(io_err(&p))?;
            }
        }
        let layers = build_pyramid(image, focal, cfg)?;
        let manifest = write_layers(&dir, focal, cfg, &layers)?;
        let manifest = BridgeManifest {
            layers: manifest,
            scene_id: scene_id.to_string(),
            fixation_index,
        };
        let mpath = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(json_err(&mpath))?;
        fs::write(&mpath, text).map_err(io_err(&mpath))?;

        let start = Instant::now();
        while !done.exists() {
            if start.elapsed() > self.timeout {
                return Err(Error::BridgeTimeout(done));
            }
            std::thread::sleep(self.poll);
        }
        let dpath = dir.join(DETECTIONS_FILE);
        let text = fs::read_to_string(&dpath).map_err(io_err(&dpath))?;
        parse_detection_document(&text, scene_id, fixation_index, cfg.levels(), cfg.base_side(), classes)
    }
}

/// The image a bridge job should see: the scene's own file when it names one
/// (relative to `scene_dir`), else a flat rendering of the ground truth.
pub fn scene_image(scene: &SceneSpec, scene_dir: Option<&Path>) -> Result<Raster> {
    match (&scene.image, scene_dir) {
        (Some(rel), Some(dir)) => Raster::load(&dir.join(rel)),
        (Some(p), None) => Raster::load(p),
        (None, _) => Ok(scene.render()),
    }
}

/// Frames for one manifest, rebuilt from its stored geometry.
pub fn manifest_frames(m: &LayerManifest) -> Vec<LayerFrame> {
    m.layers
        .iter()
        .map(|l| LayerFrame {
            index: l.n,
            side: l.side,
            top_left: Pixel::new(l.top_left[0], l.top_left[1]),
            bottom_right: Pixel::new(l.bottom_right[0], l.bottom_right[1]),
            scale: l.scale,
        })
        .collect()
}
