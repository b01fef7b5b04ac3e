//! 8-bit interleaved raster images.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    height: u32,
    width: u32,
    channels: u8,
    samples: Vec<u8>,
}

impl Raster {
    pub fn zeros(height: u32, width: u32, channels: u8) -> Self {
        let n = height as usize * width as usize * channels as usize;
        Self {
            height,
            width,
            channels,
            samples: vec![0; n],
        }
    }

    pub fn from_samples(height: u32, width: u32, channels: u8, samples: Vec<u8>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Raster("channel count must be positive".into()));
        }
        let expected = height as usize * width as usize * channels as usize;
        if samples.len() != expected {
            return Err(Error::Raster(format!(
                "{} samples for a {height}x{width}x{channels} raster (expected {expected})",
                samples.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            samples,
        })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    fn offset(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.samples[self.offset(x, y, c)]
    }

    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let i = self.offset(x, y, c);
        self.samples[i] = v;
    }

    /// Sample at signed coordinates; anything outside the raster reads as zero.
    #[inline]
    pub fn get_or_zero(&self, x: i64, y: i64, c: u8) -> u8 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0
        } else {
            self.get(x as u32, y as u32, c)
        }
    }

    /// Fills the pixel rectangle `[x0, x1) × [y0, y1)`, clamped to the raster.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, value: &[u8]) {
        let xs = x0.clamp(0, self.width as i64) as u32..x1.clamp(0, self.width as i64) as u32;
        let ys = y0.clamp(0, self.height as i64) as u32..y1.clamp(0, self.height as i64) as u32;
        for y in ys {
            for x in xs.clone() {
                for c in 0..self.channels {
                    self.set(x, y, c, value[c as usize % value.len()]);
                }
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        Ok(match img {
            DynamicImage::ImageLuma8(buf) => {
                let (w, h) = buf.dimensions();
                Self::from_samples(h, w, 1, buf.into_raw())?
            }
            other => {
                let buf = other.to_rgb8();
                let (w, h) = buf.dimensions();
                Self::from_samples(h, w, 3, buf.into_raw())?
            }
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        match self.channels {
            1 => ImageBuffer::<Luma<u8>, _>::from_raw(self.width, self.height, self.samples.clone())
                .expect("sample count checked at construction")
                .save_with_format(path, image::ImageFormat::Png)?,
            3 => ImageBuffer::<Rgb<u8>, _>::from_raw(self.width, self.height, self.samples.clone())
                .expect("sample count checked at construction")
                .save_with_format(path, image::ImageFormat::Png)?,
            c => return Err(Error::Raster(format!("cannot encode {c}-channel PNG"))),
        }
        Ok(())
    }
}

/// Re-quantizes a real-valued intensity to 8 bits, rounding half up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
