//! Search episodes: foveate, detect, remap, filter, fuse, check, inhibit,
//! select, repeat.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::bridge::BridgeDetector;
use crate::error::{Error, Result};
use crate::fovea::{layer_frames, remap_bbox, FoveaConfig, LayerFrame};
use crate::geometry::Pixel;
use crate::raster::Raster;
use crate::rng::keyed_rng;
use crate::scene::{fixated_label, oracle_hit, SceneSpec};
use crate::semantics::{BeliefGrid, BeliefSnapshot, ClassSet, GridGeometry};
use crate::simdet::{detect_layer, filter_detections, Detection, DetectorModel};

/// Produces per-layer detections (layer frame) for one fixation.
pub trait DetectionSource {
    fn detect(
        &self,
        scene: &SceneSpec,
        fixation_index: usize,
        focal: Pixel,
        frames: &[LayerFrame],
    ) -> Result<Vec<Vec<Detection>>>;
}

pub struct SimDetector<'a> {
    pub model: &'a DetectorModel,
    pub classes: &'a ClassSet,
}

impl DetectionSource for SimDetector<'_> {
    fn detect(&self, scene: &SceneSpec, _t: usize, _f: Pixel, frames: &[LayerFrame]) -> Result<Vec<Vec<Detection>>> {
        Ok(frames
            .iter()
            .map(|fr| detect_layer(scene, fr, self.model, self.classes))
            .collect())
    }
}

/// Bridge-backed detection over a fixed scene image.
pub struct BridgeSource<'a> {
    pub bridge: &'a BridgeDetector,
    pub image: &'a Raster,
    pub fovea: &'a FoveaConfig,
    pub classes: &'a ClassSet,
}

impl DetectionSource for BridgeSource<'_> {
    fn detect(&self, scene: &SceneSpec, t: usize, f: Pixel, _frames: &[LayerFrame]) -> Result<Vec<Vec<Detection>>> {
        self.bridge
            .run_job(self.image, &scene.scene_id, t, f, self.fovea, self.classes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop as soon as a fixation lands on a target box.
    Oracle,
    /// Stop once the next selected cell's target expectation reaches `τ`; that
    /// cell is still fixated.
    Confidence(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GazePolicy {
    /// Argmax of the target expectation.
    Greedy,
    /// Uniformly random non-inhibited cell; a reference baseline.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    /// Fixations allowed after the initial central one.
    pub max_fixations: usize,
    pub fovea: FoveaConfig,
    pub grid: GridGeometry,
    pub threshold: f64,
    pub stop_rule: StopRule,
    pub policy: GazePolicy,
    /// Minimum overlap, as a fraction of a cell's area, for a detection to
    /// update that cell (0 = any positive overlap).
    pub min_overlap_fraction: f64,
    /// Keep a belief snapshot after every fixation.
    pub trace: bool,
}

impl EpisodeConfig {
    pub fn new(fovea: FoveaConfig, grid: GridGeometry) -> Self {
        Self {
            max_fixations: 6,
            fovea,
            grid,
            threshold: crate::simdet::DEFAULT_THRESHOLD,
            stop_rule: StopRule::Oracle,
            policy: GazePolicy::Greedy,
            min_overlap_fraction: 0.0,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_fixations == 0 {
            return Err(Error::InvalidGrid("max_fixations must be at least 1".into()));
        }
        if self.fovea.image_height() != self.grid.image_height() || self.fovea.image_width() != self.grid.image_width() {
            return Err(Error::InvalidGrid("fovea and grid disagree on the image size".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidScores(format!("threshold {} is not a probability", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixation {
    pub px: [i64; 2],
    pub cell: [usize; 2],
    pub label: String,
}

/// One episode's gaze sequence; `fixations[0]` is the central start.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scanpath {
    pub scene_id: String,
    pub target: String,
    pub found: bool,
    pub found_at: Option<usize>,
    pub fixations: Vec<Fixation>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub scanpath: Scanpath,
    pub grid: BeliefGrid,
    /// Belief state after each fixation's fusion, when tracing.
    pub snapshots: Vec<BeliefSnapshot>,
    /// Detections discarded because remapping left them with zero area.
    pub discarded: usize,
}

/// Detections of one fixation in fusion order: innermost layer first, then
/// by descending maximum score within a layer.
pub fn fusion_order(per_layer: Vec<Vec<Detection>>) -> Vec<Detection> {
    per_layer
        .into_iter()
        .flat_map(|mut dets| {
            dets.sort_by(|a, b| b.scores.max().total_cmp(&a.scores.max()));
            dets
        })
        .collect()
}

pub fn run_episode(
    scene: &SceneSpec,
    cfg: &EpisodeConfig,
    classes: &ClassSet,
    source: &dyn DetectionSource,
) -> Result<Episode> {
    cfg.validate()?;
    scene.validate(classes)?;
    if scene.height != cfg.fovea.image_height() || scene.width != cfg.fovea.image_width() {
        return Err(scene.invalid(format!(
            "scene is {}x{} but the run is configured for {}x{}",
            scene.height,
            scene.width,
            cfg.fovea.image_height(),
            cfg.fovea.image_width()
        )));
    }
    let target = classes.index_of(&scene.target).expect("validated");
    let geom = &cfg.grid;
    let mut grid = BeliefGrid::new(geom, classes);
    let mut random = match cfg.policy {
        GazePolicy::Random { seed } => Some(keyed_rng(seed, &["random-gaze", &scene.scene_id])),
        GazePolicy::Greedy => None,
    };

    let mut path = Scanpath {
        scene_id: scene.scene_id.clone(),
        target: scene.target.clone(),
        found: false,
        found_at: None,
        fixations: Vec::new(),
        exhausted: false,
        subject: None,
    };
    let mut snapshots = Vec::new();
    let mut discarded = 0;
    let mut focal = scene.center();
    let mut cell = geom.cell_of(focal);

    for t in 0.. {
        path.fixations.push(Fixation {
            px: [focal.x, focal.y],
            cell: [cell.0, cell.1],
            label: fixated_label(focal, scene).to_string(),
        });

        let frames = layer_frames(focal, &cfg.fovea);
        let per_layer = source
            .detect(scene, t, focal, &frames)?
            .into_iter()
            .map(|d| filter_detections(d, cfg.threshold))
            .collect();
        for det in fusion_order(per_layer) {
            let r = remap_bbox(
                &det.bbox,
                focal,
                det.source_layer,
                cfg.fovea.base_side(),
                cfg.fovea.image_height(),
                cfg.fovea.image_width(),
            );
            if r.bbox.area() <= 0.0 {
                discarded += 1;
                continue;
            }
            grid.deposit(geom, &r.bbox, &det.scores, cfg.min_overlap_fraction)?;
        }
        if cfg.trace {
            snapshots.push(grid.snapshot());
        }

        if oracle_hit(focal, scene) && path.found_at.is_none() {
            path.found_at = Some(t);
            path.found = true;
            if cfg.stop_rule == StopRule::Oracle {
                break;
            }
        }
        grid.apply_ior(cell)?;
        if t == cfg.max_fixations {
            break;
        }

        let next = match random.as_mut() {
            None => grid.select_gaze(target),
            Some(rng) => {
                let open: Vec<_> = (0..geom.rows())
                    .flat_map(|y| (0..geom.cols()).map(move |x| (x, y)))
                    .filter(|&c| !grid.is_inhibited(c).expect("in bounds"))
                    .collect();
                open.choose(rng).copied().ok_or(Error::SearchExhausted)
            }
        };
        cell = match next {
            Ok(c) => c,
            Err(Error::SearchExhausted) => {
                path.exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        focal = geom.cell_center(cell);

        if let StopRule::Confidence(tau) = cfg.stop_rule {
            if grid.expectation(cell, target)? >= tau {
                path.fixations.push(Fixation {
                    px: [focal.x, focal.y],
                    cell: [cell.0, cell.1],
                    label: fixated_label(focal, scene).to_string(),
                });
                if oracle_hit(focal, scene) && path.found_at.is_none() {
                    path.found_at = Some(t + 1);
                    path.found = true;
                }
                break;
            }
        }
    }

    Ok(Episode {
        scanpath: path,
        grid,
        snapshots,
        discarded,
    })
}
