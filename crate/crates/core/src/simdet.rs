//! Synthetic object detector.
//!
//! Stands in for a neural detector: it looks at the ground-truth scene through
//! one fovea layer and reports what a detector plausibly would. Recall falls
//! off with the layer's downsampling factor and tiny (after downsampling)
//! objects are never seen. All draws come from a stream keyed by the run seed,
//! the scene and the layer placement, so results replay exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::fovea::LayerFrame;
use crate::geometry::{BBox, Frame};
use crate::rng::keyed_rng;
use crate::scene::SceneSpec;
use crate::semantics::{ClassSet, ScoreVector};

/// A score vector with its box, tagged with the pyramid level it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub scores: ScoreVector,
    pub bbox: BBox,
    pub source_layer: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    /// Detection probability of a visible object at scale 1.
    pub true_positive_base: f64,
    /// Recall is multiplied by `2^-exponent` per doubling of the downsample factor.
    pub degradation_exponent: f64,
    /// Objects whose downsampled visible area (px²) falls below this are missed.
    pub min_visible_area: f64,
    /// Mean number of spurious detections per layer.
    pub false_positive_rate: f64,
    /// Ratio of the true-class score to each distractor score.
    pub score_concentration: f64,
    /// Maximum corner jitter in image pixels at scale 1; grows with the scale.
    pub jitter_px: f64,
    /// Detection attempts per visible object per layer.
    pub duplicates: u32,
    pub rng_seed: u64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            true_positive_base: 0.95,
            degradation_exponent: 0.5,
            min_visible_area: 64.0,
            false_positive_rate: 0.3,
            score_concentration: 20.0,
            jitter_px: 2.0,
            duplicates: 1,
            rng_seed: 0,
        }
    }
}

impl DetectorModel {
    /// A detector that finds every visible object at every scale and never
    /// hallucinates.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            true_positive_base: 1.0,
            degradation_exponent: 0.0,
            min_visible_area: 0.0,
            false_positive_rate: 0.0,
            jitter_px: 0.0,
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        if !(0.0..=1.0).contains(&self.true_positive_base) {
            return bad("true_positive_base must be a probability");
        }
        if self.degradation_exponent.is_nan() || self.degradation_exponent < 0.0 {
            return bad("degradation_exponent must be non-negative");
        }
        if self.min_visible_area.is_nan() || self.min_visible_area < 0.0 {
            return bad("min_visible_area must be non-negative");
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return bad("false_positive_rate must be a finite non-negative rate");
        }
        if !(self.score_concentration > 1.0 && self.score_concentration.is_finite()) {
            return bad("score_concentration must exceed 1");
        }
        if self.jitter_px.is_nan() || self.jitter_px < 0.0 {
            return bad("jitter_px must be non-negative");
        }
        Ok(())
    }

    /// Probability that a visible object is reported in level `n`.
    pub fn detection_probability(&self, n: u32) -> f64 {
        self.true_positive_base * 2f64.powf(-self.degradation_exponent * (n - 1) as f64)
    }

    /// Normalized score vector concentrated on class `k`.
    pub fn scores_for(&self, k: usize, classes: usize) -> ScoreVector {
        let total = self.score_concentration + (classes - 1) as f64;
        let mut s = vec![1.0 / total; classes];
        s[k] = self.score_concentration / total;
        ScoreVector::new(s).expect("positive by construction")
    }
}

/// Simulated detections for one fovea layer, boxes in that layer's frame.
pub fn detect_layer(
    scene: &SceneSpec,
    layer: &LayerFrame,
    model: &DetectorModel,
    classes: &ClassSet,
) -> Vec<Detection> {
    let mut rng = keyed_rng(
        model.rng_seed,
        &[
            "detect",
            &scene.scene_id,
            &layer.index.to_string(),
            &layer.top_left.x.to_string(),
            &layer.top_left.y.to_string(),
        ],
    );
    let square = layer.square();
    let scale = layer.scale as f64;
    let l1 = (layer.side / layer.scale) as f64;
    let p_detect = model.detection_probability(layer.index);
    let mut out = Vec::new();

    for obj in &scene.objects {
        let Some(k) = classes.index_of(&obj.label) else {
            continue;
        };
        let gt = obj.bbox();
        let Some(visible) = gt.intersection(&square) else {
            continue;
        };
        if visible.area() / (scale * scale) < model.min_visible_area {
            continue;
        }
        for _ in 0..model.duplicates {
            if rng.random::<f64>() >= p_detect {
                continue;
            }
            let j = model.jitter_px * scale;
            let mut jitter = || if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
            let jittered = BBox::image(
                gt.x0 + jitter(),
                gt.y0 + jitter(),
                gt.x1 + jitter(),
                gt.y1 + jitter(),
            );
            if let Some(bbox) = clip_to_layer(layer.to_layer(&jittered), l1) {
                out.push(Detection {
                    scores: model.scores_for(k, classes.len()),
                    bbox,
                    source_layer: layer.index,
                });
            }
        }
    }

    out.extend(false_positives(&mut rng, layer, model, classes, l1));
    out
}

fn false_positives(
    rng: &mut ChaCha8Rng,
    layer: &LayerFrame,
    model: &DetectorModel,
    classes: &ClassSet,
    l1: f64,
) -> Vec<Detection> {
    if model.false_positive_rate <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(model.false_positive_rate)
        .expect("rate validated positive")
        .sample(rng) as usize;
    (0..count)
        .filter_map(|_| {
            let k = rng.random_range(0..classes.len());
            let side = rng.random_range(l1 / 16.0..=l1 / 4.0);
            let x0 = rng.random_range(0.0..=l1 - side);
            let y0 = rng.random_range(0.0..=l1 - side);
            let bbox = BBox::new(x0, y0, x0 + side, y0 + side, Frame::Layer(layer.index));
            clip_to_layer(bbox, l1).map(|bbox| Detection {
                scores: model.scores_for(k, classes.len()),
                bbox,
                source_layer: layer.index,
            })
        })
        .collect()
}

fn clip_to_layer(b: BBox, l1: f64) -> Option<BBox> {
    let (c, _) = b.clip(l1, l1);
    (c.area() > 0.0).then_some(c)
}

/// Keeps detections whose normalized maximum score reaches `threshold`,
/// preserving order.
pub fn filter_detections(dets: Vec<Detection>, threshold: f64) -> Vec<Detection> {
    dets.into_iter()
        .filter(|d| d.scores.normalized_max() >= threshold)
        .collect()
}

pub const DEFAULT_THRESHOLD: f64 = 0.01;
