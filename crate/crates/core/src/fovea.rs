//! Multi-scale fovea: concentric square layers around a focal point, each twice
//! the side of the previous one and resampled down to the base side.
//!
//! Layer `n` (1-based) has side `l_n = 2^(n-1) * l1` and spans
//! `[x_c - l_n/2, x_c + l_n/2) × [y_c - l_n/2, y_c + l_n/2)` in image pixels.
//! The source image is zero padded by `l_N/2` on every side so every layer
//! fits for any in-bounds focal point; the padding is virtual (out-of-image
//! reads return zero) rather than materialized.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::geometry::{BBox, Frame, Pixel};
use crate::raster::{quantize, Raster};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FoveaConfig {
    levels: u32,
    base_side: u32,
    image_height: u32,
    image_width: u32,
}

impl FoveaConfig {
    pub fn new(levels: u32, base_side: u32, image_height: u32, image_width: u32) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidFovea("at least one level is required".into()));
        }
        if levels > 16 {
            return Err(Error::InvalidFovea(format!("{levels} levels is unreasonably deep")));
        }
        if base_side == 0 || !base_side.is_multiple_of(2) {
            return Err(Error::InvalidFovea(format!(
                "base side must be a positive even number of pixels, got {base_side}"
            )));
        }
        if image_height == 0 || image_width == 0 {
            return Err(Error::InvalidFovea("image dimensions must be positive".into()));
        }
        if base_side >= image_height.min(image_width) {
            return Err(Error::InvalidFovea(format!(
                "base side {base_side} must be smaller than min({image_height}, {image_width})"
            )));
        }
        Ok(Self {
            levels,
            base_side,
            image_height,
            image_width,
        })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn base_side(&self) -> u32 {
        self.base_side
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    /// Zero padding applied on each side of the image: half the outermost side.
    pub fn padding(&self) -> u64 {
        layer_side(self.levels, self.base_side) / 2
    }

    pub fn check_focal(&self, f: Pixel) -> Result<()> {
        if f.x < 0 || f.y < 0 || f.x >= self.image_width as i64 || f.y >= self.image_height as i64 {
            return Err(Error::FocalOutOfBounds {
                x: f.x,
                y: f.y,
                width: self.image_width,
                height: self.image_height,
            });
        }
        Ok(())
    }
}

/// Side length of level `n`: `2^(n-1) * l1`.
pub fn layer_side(n: u32, base_side: u32) -> u64 {
    debug_assert!(n >= 1 && base_side >= 1);
    (base_side as u64) << (n - 1)
}

/// Placement of one pyramid level, corners in image-frame pixels (they may lie
/// in the padding, i.e. be negative or exceed the image size).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerFrame {
    pub index: u32,
    pub side: u64,
    pub top_left: Pixel,
    pub bottom_right: Pixel,
    pub scale: u64,
}

impl LayerFrame {
    pub fn new(f: Pixel, n: u32, base_side: u32) -> Self {
        let side = layer_side(n, base_side);
        let half = (side / 2) as i64;
        Self {
            index: n,
            side,
            top_left: Pixel::new(f.x - half, f.y - half),
            bottom_right: Pixel::new(f.x + half, f.y + half),
            scale: 1 << (n - 1),
        }
    }

    /// The square this layer covers, as an image-frame box.
    pub fn square(&self) -> BBox {
        BBox::image(
            self.top_left.x as f64,
            self.top_left.y as f64,
            self.bottom_right.x as f64,
            self.bottom_right.y as f64,
        )
    }

    /// Maps an image-frame box into this layer's frame (inverse of [`remap_bbox`]).
    pub fn to_layer(&self, b: &BBox) -> BBox {
        let s = self.scale as f64;
        BBox::new(
            (b.x0 - self.top_left.x as f64) / s,
            (b.y0 - self.top_left.y as f64) / s,
            (b.x1 - self.top_left.x as f64) / s,
            (b.y1 - self.top_left.y as f64) / s,
            Frame::Layer(self.index),
        )
    }
}

/// Frames of all `N` levels centered on `f`, innermost first.
pub fn layer_frames(f: Pixel, cfg: &FoveaConfig) -> Vec<LayerFrame> {
    (1..=cfg.levels)
        .map(|n| LayerFrame::new(f, n, cfg.base_side))
        .collect()
}

/// Builds the `N` layer rasters around `f`. Level 1 is an exact crop; outer
/// levels are bilinearly downsampled to `l1 × l1`.
pub fn build_pyramid(image: &Raster, f: Pixel, cfg: &FoveaConfig) -> Result<Vec<(LayerFrame, Raster)>> {
    if image.height() != cfg.image_height || image.width() != cfg.image_width {
        return Err(Error::InvalidFovea(format!(
            "config is for {}x{} but the image is {}x{}",
            cfg.image_height,
            cfg.image_width,
            image.height(),
            image.width()
        )));
    }
    cfg.check_focal(f)?;
    Ok(layer_frames(f, cfg)
        .into_iter()
        .map(|frame| {
            let raster = if frame.scale == 1 {
                crop(image, &frame, cfg.base_side)
            } else {
                downsample(image, &frame, cfg.base_side)
            };
            (frame, raster)
        })
        .collect())
}

fn crop(image: &Raster, frame: &LayerFrame, l1: u32) -> Raster {
    let ch = image.channels();
    let mut out = Raster::zeros(l1, l1, ch);
    for j in 0..l1 {
        for i in 0..l1 {
            for c in 0..ch {
                let v = image.get_or_zero(frame.top_left.x + i as i64, frame.top_left.y + j as i64, c);
                out.set(i, j, c, v);
            }
        }
    }
    out
}

/// Bilinear resampling with half-pixel-centered sample positions: output pixel
/// `i` reads source position `(i + 0.5) * scale - 0.5` within the layer square.
fn downsample(image: &Raster, frame: &LayerFrame, l1: u32) -> Raster {
    let ch = image.channels();
    let s = frame.scale as f64;
    let max = frame.side as f64 - 1.0;
    let taps = |i: u32| {
        let p = ((i as f64 + 0.5) * s - 0.5).clamp(0.0, max);
        let lo = p.floor();
        let hi = (lo + 1.0).min(max);
        (lo as i64, hi as i64, p - lo)
    };
    let xs: Vec<_> = (0..l1).map(taps).collect();
    let mut out = Raster::zeros(l1, l1, ch);
    for j in 0..l1 {
        let (y0, y1, wy) = taps(j);
        let (y0, y1) = (frame.top_left.y + y0, frame.top_left.y + y1);
        for (i, &(x0, x1, wx)) in xs.iter().enumerate() {
            let (x0, x1) = (frame.top_left.x + x0, frame.top_left.x + x1);
            for c in 0..ch {
                let p = |x, y| image.get_or_zero(x, y, c) as f64;
                let top = p(x0, y0) * (1.0 - wx) + p(x1, y0) * wx;
                let bottom = p(x0, y1) * (1.0 - wx) + p(x1, y1) * wx;
                out.set(i as u32, j, c, quantize(top * (1.0 - wy) + bottom * wy));
            }
        }
    }
    out
}

/// Result of mapping a layer-frame box into the image frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Remapped {
    pub bbox: BBox,
    /// Box before clamping to the image bounds.
    pub unclipped: BBox,
    pub clipped: bool,
}

/// Maps a box from level `n`'s frame to the image frame:
/// `p = f - l_n/2 + p' * 2^(n-1)`, then clamps it to the image.
pub fn remap_bbox(
    b_layer: &BBox,
    f: Pixel,
    n: u32,
    base_side: u32,
    image_height: u32,
    image_width: u32,
) -> Remapped {
    let frame = LayerFrame::new(f, n, base_side);
    let s = frame.scale as f64;
    let (ox, oy) = (frame.top_left.x as f64, frame.top_left.y as f64);
    let unclipped = BBox::image(
        ox + b_layer.x0 * s,
        oy + b_layer.y0 * s,
        ox + b_layer.x1 * s,
        oy + b_layer.y1 * s,
    );
    let (bbox, clipped) = unclipped.clip(image_width as f64, image_height as f64);
    Remapped {
        bbox,
        unclipped,
        clipped,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCost {
    pub pixels: u64,
    /// Percentage of the full image, in `[0, 100 * N]`.
    pub percent: f64,
}

/// Pixels handed to the detector per fixation: `N * l1²`.
pub fn pixel_cost(cfg: &FoveaConfig) -> PixelCost {
    let pixels = cfg.levels as u64 * (cfg.base_side as u64).pow(2);
    let full = cfg.image_height as f64 * cfg.image_width as f64;
    PixelCost {
        pixels,
        percent: 100.0 * pixels as f64 / full,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub n: u32,
    pub side: u64,
    pub top_left: [i64; 2],
    pub bottom_right: [i64; 2],
    pub scale: u64,
}

/// Sidecar written next to the `layer_<n>.png` files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub focal: [i64; 2],
    pub levels: u32,
    pub base_side: u32,
    pub layers: Vec<ManifestLayer>,
}

impl LayerManifest {
    pub fn new(f: Pixel, cfg: &FoveaConfig, frames: &[LayerFrame]) -> Self {
        Self {
            focal: [f.x, f.y],
            levels: cfg.levels,
            base_side: cfg.base_side,
            layers: frames
                .iter()
                .map(|fr| ManifestLayer {
                    n: fr.index,
                    side: fr.side,
                    top_left: [fr.top_left.x, fr.top_left.y],
                    bottom_right: [fr.bottom_right.x, fr.bottom_right.y],
                    scale: fr.scale,
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(json_err(path))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn layer_file_name(n: u32) -> String {
    format!("layer_{n}.png")
}

/// Writes `layer_<n>.png` for every level plus `manifest.json` into `dir`.
pub fn write_layers(dir: &Path, f: Pixel, cfg: &FoveaConfig, layers: &[(LayerFrame, Raster)]) -> Result<LayerManifest> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (frame, raster) in layers {
        raster.save_png(&dir.join(layer_file_name(frame.index)))?;
    }
    let frames: Vec<_> = layers.iter().map(|(fr, _)| *fr).collect();
    let manifest = LayerManifest::new(f, cfg, &frames);
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(json_err(&path))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, l1: u32) -> FoveaConfig {
        FoveaConfig::new(n, l1, 1050, 1680).unwrap()
    }

    #[test]
    fn layer_side_values() {
        assert_eq!(layer_side(1, 160), 160);
        assert_eq!(layer_side(4, 160), 1280);
        assert_eq!(layer_side(3, 256), 1024);
        assert_eq!(layer_side(5, 64), 1024);
        assert_eq!(layer_side(4, 128), 1024);
    }

    #[test]
    fn config_validation() {
        assert!(FoveaConfig::new(0, 160, 1050, 1680).is_err());
        assert!(FoveaConfig::new(4, 161, 1050, 1680).is_err());
        assert!(FoveaConfig::new(4, 0, 1050, 1680).is_err());
        assert!(FoveaConfig::new(1, 1050, 1050, 1680).is_err());
        assert!(FoveaConfig::new(1, 1048, 1050, 1680).is_ok());
    }

    #[test]
    fn corners_follow_focal_point() {
        let fr = LayerFrame::new(Pixel::new(840, 525), 4, 160);
        assert_eq!(fr.side, 1280);
        assert_eq!(fr.scale, 8);
        assert_eq!(fr.top_left, Pixel::new(200, -115));
        assert_eq!(fr.bottom_right, Pixel::new(1480, 1165));
    }

    #[test]
    fn remap_hand_case() {
        let bl = BBox::new(10.0, 20.0, 50.0, 60.0, Frame::Layer(2));
        let r = remap_bbox(&bl, Pixel::new(840, 525), 2, 160, 1050, 1680);
        assert_eq!(r.unclipped.as_array(), [700.0, 405.0, 780.0, 485.0]);
        assert!(!r.clipped);
    }

    #[test]
    fn remap_level_one_is_translation() {
        let bl = BBox::new(3.0, 7.5, 100.0, 159.0, Frame::Layer(1));
        let f = Pixel::new(400, 300);
        let r = remap_bbox(&bl, f, 1, 160, 1050, 1680);
        assert_eq!(r.bbox.as_array(), [323.0, 227.5, 420.0, 379.0]);
    }

    #[test]
    fn remap_of_outer_edge_is_clipped_into_image() {
        // layer 4 of a 4x160 fovea at the image corner spills well past the border
        let bl = BBox::new(0.0, 0.0, 160.0, 160.0, Frame::Layer(4));
        let r = remap_bbox(&bl, Pixel::new(0, 0), 4, 160, 1050, 1680);
        assert_eq!(r.unclipped.as_array(), [-640.0, -640.0, 640.0, 640.0]);
        assert!(r.clipped);
        assert_eq!(r.bbox.as_array(), [0.0, 0.0, 640.0, 640.0]);
    }

    #[test]
    fn pixel_cost_matches_formula() {
        let c = pixel_cost(&cfg(4, 160));
        assert_eq!(c.pixels, 102_400);
        assert!((c.percent - 5.8050).abs() < 1e-3);
        let c = pixel_cost(&cfg(3, 256));
        assert_eq!(c.pixels, 196_608);
        assert!((c.percent - 11.1456).abs() < 1e-3);
        let c = pixel_cost(&cfg(5, 64));
        assert_eq!(c.pixels, 20_480);
        assert!((c.percent - 1.1610).abs() < 1e-3);
    }

    #[test]
    fn focal_outside_is_rejected() {
        let img = Raster::zeros(64, 64, 1);
        let c = FoveaConfig::new(2, 16, 64, 64).unwrap();
        assert!(matches!(
            build_pyramid(&img, Pixel::new(64, 3), &c),
            Err(Error::FocalOutOfBounds { .. })
        ));
        assert!(build_pyramid(&img, Pixel::new(-1, 0), &c).is_err());
        assert!(build_pyramid(&img, Pixel::new(63, 63), &c).is_ok());
    }

    #[test]
    fn corner_focal_reads_padding_as_zero() {
        let mut img = Raster::zeros(64, 64, 1);
        img.fill_rect(0, 0, 64, 64, &[200]);
        let c = FoveaConfig::new(3, 16, 64, 64).unwrap();
        let layers = build_pyramid(&img, Pixel::new(0, 0), &c).unwrap();
        for (_, r) in &layers {
            // top-left quadrant of every layer lies in the padding
            assert_eq!(r.get(0, 0, 0), 0);
            assert_eq!(r.get(15, 15, 0), 200);
        }
    }

    #[test]
    fn downsample_preserves_constants() {
        let mut img = Raster::zeros(200, 300, 3);
        img.fill_rect(0, 0, 300, 200, &[17, 99, 250]);
        let c = FoveaConfig::new(3, 32, 200, 300).unwrap();
        let layers = build_pyramid(&img, Pixel::new(150, 100), &c).unwrap();
        for (fr, r) in &layers {
            assert_eq!((r.width(), r.height()), (32, 32), "level {}", fr.index);
            for px in r.samples().chunks(3) {
                assert_eq!(px, [17, 99, 250]);
            }
        }
    }

    #[test]
    fn scale_two_averages_pairs() {
        // a horizontal ramp 0,2,4,... averages to odd values at scale 2
        let samples: Vec<u8> = (0..64u32).flat_map(|_| (0..64u32).map(|x| (2 * x) as u8)).collect();
        let img = Raster::from_samples(64, 64, 1, samples).unwrap();
        let c = FoveaConfig::new(2, 8, 64, 64).unwrap();
        let layers = build_pyramid(&img, Pixel::new(32, 32), &c).unwrap();
        let r = &layers[1].1;
        // layer 2 spans x in [24, 40); output i averages columns 24+2i and 25+2i
        for i in 0..8 {
            let expected = (2 * (24 + 2 * i) + 2 * (25 + 2 * i)) as f64 / 2.0;
            assert_eq!(r.get(i, 0, 0), quantize(expected));
        }
    }
}
