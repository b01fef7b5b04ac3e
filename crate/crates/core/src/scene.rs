//! Ground-truth scenes: image size, labelled object boxes and the search target.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::geometry::{BBox, Pixel};
use crate::raster::Raster;
use crate::rng::keyed_rng;
use crate::semantics::ClassSet;

pub const BACKGROUND: &str = "background";

/// The 80 COCO object categories, in the usual contiguous order.
pub const COCO_CLASSES: [&str; 80] = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
    "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
    "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
    "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard", "cell phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];

pub fn coco_classes() -> ClassSet {
    ClassSet::new(COCO_CLASSES).expect("COCO labels are unique")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

impl SceneObject {
    pub fn bbox(&self) -> BBox {
        let [x0, y0, x1, y1] = self.bbox;
        BBox::image(x0, y0, x1, y1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub scene_id: String,
    pub height: u32,
    pub width: u32,
    pub target: String,
    pub objects: Vec<SceneObject>,
    /// Optional image file, relative to the scene file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

impl SceneSpec {
    pub fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidScene {
            scene: self.scene_id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks bounds, labels and that the target is present.
    pub fn validate(&self, classes: &ClassSet) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(self.invalid("empty scene_id"));
        }
        if self.height == 0 || self.width == 0 {
            return Err(self.invalid("zero image dimension"));
        }
        if classes.index_of(&self.target).is_none() {
            return Err(self.invalid(format!("unknown target class {:?}", self.target)));
        }
        for o in &self.objects {
            if classes.index_of(&o.label).is_none() {
                return Err(self.invalid(format!("unknown object class {:?}", o.label)));
            }
            let [x0, y0, x1, y1] = o.bbox;
            if !o.bbox.iter().all(|v| v.is_finite()) || !(x0 < x1 && y0 < y1) {
                return Err(self.invalid(format!("degenerate box {:?}", o.bbox)));
            }
            if x0 < 0.0 || y0 < 0.0 || x1 > self.width as f64 || y1 > self.height as f64 {
                return Err(self.invalid(format!("box {:?} leaves the image", o.bbox)));
            }
        }
        if !self.objects.iter().any(|o| o.label == self.target) {
            return Err(self.invalid("target class has no instance in the scene"));
        }
        Ok(())
    }

    pub fn center(&self) -> Pixel {
        Pixel::new(self.width as i64 / 2, self.height as i64 / 2)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(json_err(path))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(json_err(path))?;
        fs::write(path, text).map_err(io_err(path))
    }

    /// Paints a flat synthetic image: mid-gray background and one solid color
    /// per class, larger boxes drawn first.
    pub fn render(&self) -> Raster {
        let mut r = Raster::zeros(self.height, self.width, 3);
        r.fill_rect(0, 0, self.width as i64, self.height as i64, &[114, 114, 114]);
        let mut objs: Vec<_> = self.objects.iter().collect();
        objs.sort_by(|a, b| b.bbox().area().total_cmp(&a.bbox().area()));
        for o in objs {
            let b = o.bbox();
            r.fill_rect(
                b.x0.floor() as i64,
                b.y0.floor() as i64,
                b.x1.ceil() as i64,
                b.y1.ceil() as i64,
                &label_color(&o.label),
            );
        }
        r
    }
}

fn label_color(label: &str) -> [u8; 3] {
    let h = crate::rng::fnv1a(label.as_bytes());
    [(h >> 8) as u8, (h >> 24) as u8, (h >> 40) as u8]
}

/// True iff `p` lies inside (inclusive) any ground-truth box of the target class.
pub fn oracle_hit(p: Pixel, scene: &SceneSpec) -> bool {
    scene
        .objects
        .iter()
        .filter(|o| o.label == scene.target)
        .any(|o| o.bbox().contains(p.x as f64, p.y as f64))
}

/// Label of the smallest ground-truth box containing `p`, or `"background"`.
pub fn fixated_label(p: Pixel, scene: &SceneSpec) -> &str {
    scene
        .objects
        .iter()
        .filter(|o| o.bbox().contains(p.x as f64, p.y as f64))
        .min_by(|a, b| a.bbox().area().total_cmp(&b.bbox().area()))
        .map_or(BACKGROUND, |o| o.label.as_str())
}

/// Random target-present scenes.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGenerator {
    pub height: u32,
    pub width: u32,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_side: f64,
    pub max_side: f64,
    /// Side of the centered square the target box must lie in; `None` lets
    /// the target go anywhere in the image.
    pub target_window: Option<f64>,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        Self {
            height: 1050,
            width: 1680,
            min_objects: 4,
            max_objects: 12,
            min_side: 30.0,
            max_side: 180.0,
            target_window: Some(1024.0),
        }
    }
}

impl SceneGenerator {
    /// Scene number `index` of the stream keyed by `seed`. Exactly one target
    /// instance, never covering the image center and inside the target window;
    /// distractors use other classes and may go anywhere.
    pub fn generate(&self, seed: u64, index: usize, classes: &ClassSet) -> SceneSpec {
        let scene_id = format!("syn_{index:05}");
        let mut rng = keyed_rng(seed, &["scene", &scene_id]);
        let target = classes.label(rng.random_range(0..classes.len())).to_string();
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let random_box = |rng: &mut rand_chacha::ChaCha8Rng| {
            let w = rng.random_range(self.min_side..=self.max_side).round();
            let h = rng.random_range(self.min_side..=self.max_side).round();
            let x0 = rng.random_range(0.0..=(self.width as f64 - w)).floor();
            let y0 = rng.random_range(0.0..=(self.height as f64 - h)).floor();
            [x0, y0, x0 + w, y0 + h]
        };
        let target_box = loop {
            let b = random_box(&mut rng);
            let bb = BBox::image(b[0], b[1], b[2], b[3]);
            let inside_window = self.target_window.is_none_or(|side| {
                let half = side / 2.0;
                bb.x0 >= cx - half && bb.x1 <= cx + half && bb.y0 >= cy - half && bb.y1 <= cy + half
            });
            if inside_window && !bb.contains(cx.floor(), cy.floor()) {
                break b;
            }
        };
        let mut objects = vec![SceneObject {
            label: target.clone(),
            bbox: target_box,
        }];
        let n = rng.random_range(self.min_objects..=self.max_objects.max(self.min_objects));
        for _ in 1..n {
            let label = loop {
                let l = classes.label(rng.random_range(0..classes.len()));
                if l != target {
                    break l.to_string();
                }
            };
            objects.push(SceneObject {
                label,
                bbox: random_box(&mut rng),
            });
        }
        SceneSpec {
            scene_id,
            height: self.height,
            width: self.width,
            target,
            objects,
            image: None,
        }
    }
}
