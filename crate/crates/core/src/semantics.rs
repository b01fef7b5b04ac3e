//! Dirichlet semantic beliefs over a regular grid of image cells.
//!
//! Each cell holds `K` Dirichlet parameters. Detections are folded in with
//! Kaplan's fusion rule and the next fixation is the non-inhibited cell with
//! the highest expected probability of the target class.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Pixel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSet {
    labels: Vec<String>,
}

impl ClassSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidClasses(format!(
                "at least two classes are required, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(Error::InvalidClasses("empty label".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidClasses(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Per-class likelihoods of one detection. Non-negative with at least one
/// positive entry; not necessarily normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        check_scores(&scores)?;
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Largest score divided by the sum of all scores.
    pub fn normalized_max(&self) -> f64 {
        self.max() / self.0.iter().sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &s) in self.0.iter().enumerate() {
            if s > self.0[best] {
                best = k;
            }
        }
        best
    }
}

fn check_scores(s: &[f64]) -> Result<()> {
    if let Some(bad) = s.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidScores(format!("score {bad} is not a finite non-negative number")));
    }
    if !s.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidScores("all scores are zero".into()));
    }
    Ok(())
}

/// Kaplan fusion of one score vector into Dirichlet parameters:
///
/// `β'_k = β_k (1 + s_k / Σ_j β_j s_j) / (1 + min_i s_i / Σ_j β_j s_j)`
pub fn kaplan_update(beta: &[f64], scores: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != scores.len() {
        return Err(Error::InvalidScores(format!(
            "{} scores for {} classes",
            scores.len(),
            beta.len()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidScores(format!("Dirichlet parameter {b} is not positive")));
    }
    check_scores(scores)?;
    let mut out = beta.to_vec();
    kaplan_in_place(&mut out, scores);
    Ok(out)
}

/// Unchecked core of [`kaplan_update`]. Written as `β_k (D + s_k) / (D + min s)`
/// with `D = Σ β_j s_j`, which is the same ratio with `D` multiplied through.
fn kaplan_in_place(beta: &mut [f64], scores: &[f64]) {
    let d: f64 = beta.iter().zip(scores).map(|(b, s)| b * s).sum();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let denom = d + min;
    for (b, s) in beta.iter_mut().zip(scores) {
        *b = *b * (d + s) / denom;
    }
}

/// Expected categorical probability of class `k` under Dirichlet `beta`.
pub fn dirichlet_mean(beta: &[f64], k: usize) -> f64 {
    beta[k] / beta.iter().sum::<f64>()
}

/// Partition of an image into `rows × cols` equal (real-valued) cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridGeometry {
    rows: usize,
    cols: usize,
    image_height: u32,
    image_width: u32,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, image_height: u32, image_width: u32) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid(format!("{rows}x{cols} grid is empty")));
        }
        if image_height == 0 || image_width == 0 {
            return Err(Error::InvalidGrid("image dimensions must be positive".into()));
        }
        if rows > image_height as usize || cols > image_width as usize {
            return Err(Error::InvalidGrid(format!(
                "{rows}x{cols} grid is finer than the {image_height}x{image_width} image"
            )));
        }
        Ok(Self {
            rows,
            cols,
            image_height,
            image_width,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn cell_width(&self) -> f64 {
        self.image_width as f64 / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.image_height as f64 / self.rows as f64
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains_cell(&self, (x, y): (usize, usize)) -> bool {
        x < self.cols && y < self.rows
    }

    pub fn cell_rect(&self, (x, y): (usize, usize)) -> BBox {
        let (cw, ch) = (self.cell_width(), self.cell_height());
        BBox::image(x as f64 * cw, y as f64 * ch, (x + 1) as f64 * cw, (y + 1) as f64 * ch)
    }

    /// Center-most pixel of a cell: the floor of the real-valued cell center.
    pub fn cell_center(&self, (x, y): (usize, usize)) -> Pixel {
        Pixel::new(
            ((x as f64 + 0.5) * self.cell_width()).floor() as i64,
            ((y as f64 + 0.5) * self.cell_height()).floor() as i64,
        )
    }

    /// Cell containing pixel `p`; pixels outside the image are clamped to the border cells.
    pub fn cell_of(&self, p: Pixel) -> (usize, usize) {
        let x = ((p.x as f64 + 0.5) / self.cell_width()).floor();
        let y = ((p.y as f64 + 0.5) / self.cell_height()).floor();
        (
            (x.max(0.0) as usize).min(self.cols - 1),
            (y.max(0.0) as usize).min(self.rows - 1),
        )
    }

    /// Row-major index of a cell.
    pub fn cell_index(&self, (x, y): (usize, usize)) -> usize {
        y * self.cols + x
    }

    /// Cells whose rectangle overlaps `b`. An overlap counts when its area is
    /// strictly positive and at least `min_fraction` of the cell area.
    pub fn overlapped_cells(&self, b: &BBox, min_fraction: f64) -> Vec<(usize, usize)> {
        let (cw, ch) = (self.cell_width(), self.cell_height());
        let x_lo = ((b.x0 / cw).floor().max(0.0) as usize).min(self.cols);
        let x_hi = ((b.x1 / cw).ceil().max(0.0) as usize).min(self.cols);
        let y_lo = ((b.y0 / ch).floor().max(0.0) as usize).min(self.rows);
        let y_hi = ((b.y1 / ch).ceil().max(0.0) as usize).min(self.rows);
        let need = min_fraction * cw * ch;
        let mut cells = Vec::new();
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let a = self.cell_rect((x, y)).intersection_area(b);
                if a > 0.0 && a >= need {
                    cells.push((x, y));
                }
            }
        }
        cells
    }
}

/// `Y × X` cells of `K` Dirichlet parameters plus the inhibition-of-return mask.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefGrid {
    rows: usize,
    cols: usize,
    classes: usize,
    beta: Vec<f64>,
    ior: Vec<bool>,
    /// Detections dropped because their box had zero area.
    pub zero_area_warnings: u64,
}

impl BeliefGrid {
    /// Flat prior: every parameter is 1 and nothing is inhibited.
    pub fn new(geom: &GridGeometry, classes: &ClassSet) -> Self {
        let cells = geom.cell_count();
        Self {
            rows: geom.rows(),
            cols: geom.cols(),
            classes: classes.len(),
            beta: vec![1.0; cells * classes.len()],
            ior: vec![false; cells],
            zero_area_warnings: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn check_cell(&self, (x, y): (usize, usize)) -> Result<usize> {
        if x >= self.cols || y >= self.rows {
            return Err(Error::CellOutOfBounds { x, y });
        }
        Ok(y * self.cols + x)
    }

    pub fn cell(&self, cell: (usize, usize)) -> Result<&[f64]> {
        let i = self.check_cell(cell)?;
        Ok(&self.beta[i * self.classes..(i + 1) * self.classes])
    }

    pub fn is_inhibited(&self, cell: (usize, usize)) -> Result<bool> {
        Ok(self.ior[self.check_cell(cell)?])
    }

    pub fn inhibited_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ior
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i % self.cols, i / self.cols))
    }

    /// Multiplies every parameter in the grid by `factor`.
    pub fn scale_all(&mut self, factor: f64) {
        assert!(factor > 0.0);
        self.beta.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn update_cell(&mut self, cell: (usize, usize), scores: &ScoreVector) -> Result<()> {
        let i = self.check_cell(cell)?;
        if scores.len() != self.classes {
            return Err(Error::InvalidScores(format!(
                "{} scores for {} classes",
                scores.len(),
                self.classes
            )));
        }
        kaplan_in_place(&mut self.beta[i * self.classes..(i + 1) * self.classes], scores.as_slice());
        Ok(())
    }

    /// Fuses one image-frame detection into every cell it overlaps. Returns the
    /// number of updated cells; a zero-area box updates nothing and bumps
    /// [`Self::zero_area_warnings`].
    pub fn deposit(
        &mut self,
        geom: &GridGeometry,
        bbox: &BBox,
        scores: &ScoreVector,
        min_fraction: f64,
    ) -> Result<usize> {
        if bbox.area().is_nan() || bbox.area() <= 0.0 {
            self.zero_area_warnings += 1;
            return Ok(0);
        }
        let cells = geom.overlapped_cells(bbox, min_fraction);
        for &c in &cells {
            self.update_cell(c, scores)?;
        }
        Ok(cells.len())
    }

    pub fn expectation(&self, cell: (usize, usize), k: usize) -> Result<f64> {
        if k >= self.classes {
            return Err(Error::InvalidClasses(format!("class index {k} out of range")));
        }
        Ok(dirichlet_mean(self.cell(cell)?, k))
    }

    /// Highest target expectation over all cells, inhibited or not.
    pub fn max_expectation(&self, k: usize) -> f64 {
        self.beta
            .chunks(self.classes)
            .map(|b| dirichlet_mean(b, k))
            .fold(f64::MIN, f64::max)
    }

    /// Non-inhibited cell maximizing the expectation of class `k`; ties go to
    /// the first cell in row-major order.
    pub fn select_gaze(&self, k: usize) -> Result<(usize, usize)> {
        if k >= self.classes {
            return Err(Error::InvalidClasses(format!("class index {k} out of range")));
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in self.beta.chunks(self.classes).enumerate() {
            if self.ior[i] {
                continue;
            }
            let e = dirichlet_mean(b, k);
            if best.is_none_or(|(_, be)| e > be) {
                best = Some((i, e));
            }
        }
        best.map(|(i, _)| (i % self.cols, i / self.cols))
            .ok_or(Error::SearchExhausted)
    }

    /// Inhibits the 3×3 block centered on `cell`, clipped at the grid border.
    /// Returns how many cells the block covers.
    pub fn apply_ior(&mut self, cell: (usize, usize)) -> Result<usize> {
        self.check_cell(cell)?;
        let (x, y) = cell;
        let mut n = 0;
        for yy in y.saturating_sub(1)..=(y + 1).min(self.rows - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(self.cols - 1) {
                self.ior[yy * self.cols + xx] = true;
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            rows: self.rows,
            cols: self.cols,
            classes: self.classes,
            beta: self.beta.clone(),
            ior: self.ior.clone(),
        }
    }
}

/// JSON form of a belief grid: parameters in row-major cell order, `K` per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    #[serde(rename = "Y")]
    pub rows: usize,
    #[serde(rename = "X")]
    pub cols: usize,
    #[serde(rename = "K")]
    pub classes: usize,
    pub beta: Vec<f64>,
    pub ior: Vec<bool>,
}
