//! Run configuration: defaults, then the config file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fovsearch::DetectorModel;
use serde::Deserialize;

/// Named fovea configurations. All four cover a 1024×1024 (or larger) outer layer.
pub const PRESETS: [(&str, u32, u32); 4] = [("5x64", 5, 64), ("4x128", 4, 128), ("4x160", 4, 160), ("3x256", 3, 256)];

/// Pixel percentages printed in the published comparison table, keyed by preset.
pub const PUBLISHED_PERCENT: [(&str, f64); 4] = [("5x64", 0.01), ("4x128", 3.72), ("4x160", 5.80), ("3x256", 11.1)];

pub fn preset(name: &str) -> Option<FoveaSpec> {
    PRESETS
        .iter()
        .find(|(n, ..)| *n == name)
        .map(|&(_, levels, base_side)| FoveaSpec { levels, base_side })
}

pub fn published_percent(label: &str) -> Option<f64> {
    PUBLISHED_PERCENT.iter().find(|(n, _)| *n == label).map(|&(_, p)| p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FoveaSpec {
    pub levels: u32,
    pub base_side: u32,
}

impl FoveaSpec {
    pub fn label(&self) -> String {
        format!("{}x{}", self.levels, self.base_side)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Sim,
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Greedy,
    Random,
}

/// Detector-model overrides accepted in the config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub true_positive_base: Option<f64>,
    pub degradation_exponent: Option<f64>,
    pub min_visible_area: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub score_concentration: Option<f64>,
    pub jitter_px: Option<f64>,
    pub duplicates: Option<u32>,
}

/// Every setting is optional so that file and flags can be layered.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub levels: Option<u32>,
    pub base: Option<u32>,
    pub grid: Option<String>,
    pub max_fix: Option<usize>,
    pub threshold: Option<f64>,
    pub detector: Option<DetectorKind>,
    pub bridge_dir: Option<PathBuf>,
    pub trace: Option<bool>,
    pub jobs: Option<usize>,
    pub policy: Option<Policy>,
    pub stop_confidence: Option<f64>,
    pub classes: Option<Vec<String>>,
    pub model: Option<ModelFile>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Values set in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            seed: over.seed.or(self.seed),
            preset: over.preset.or(self.preset),
            levels: over.levels.or(self.levels),
            base: over.base.or(self.base),
            grid: over.grid.or(self.grid),
            max_fix: over.max_fix.or(self.max_fix),
            threshold: over.threshold.or(self.threshold),
            detector: over.detector.or(self.detector),
            bridge_dir: over.bridge_dir.or(self.bridge_dir),
            trace: over.trace.or(self.trace),
            jobs: over.jobs.or(self.jobs),
            policy: over.policy.or(self.policy),
            stop_confidence: over.stop_confidence.or(self.stop_confidence),
            classes: over.classes.or(self.classes),
            model: over.model.or(self.model),
        }
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// One entry per fovea configuration to run (a preset list is a sweep).
    pub foveas: Vec<(String, FoveaSpec)>,
    pub grid: (usize, usize),
    pub seed: u64,
    pub max_fixations: usize,
    pub threshold: f64,
    pub detector: DetectorKind,
    pub bridge_dir: Option<PathBuf>,
    pub trace: bool,
    pub jobs: usize,
    pub policy: Policy,
    pub stop_confidence: Option<f64>,
    pub classes: Option<Vec<String>>,
    pub model: DetectorModel,
}

pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (y, x) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid {s:?} is not of the form YxX"))?;
    let y: usize = y.trim().parse().with_context(|| format!("grid rows in {s:?}"))?;
    let x: usize = x.trim().parse().with_context(|| format!("grid columns in {s:?}"))?;
    if y == 0 || x == 0 {
        bail!("grid {s:?} has an empty dimension");
    }
    Ok((y, x))
}

impl RunConfig {
    pub fn resolve(s: Settings) -> Result<Self> {
        let foveas = match (&s.preset, s.levels, s.base) {
            (_, Some(levels), Some(base_side)) => {
                let f = FoveaSpec { levels, base_side };
                vec![(f.label(), f)]
            }
            (Some(list), None, None) => list
                .split(',')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(|n| {
                    preset(n)
                        .map(|f| (n.to_string(), f))
                        .with_context(|| format!("unknown preset {n:?} (known: 5x64, 4x128, 4x160, 3x256)"))
                })
                .collect::<Result<_>>()?,
            (None, None, None) => vec![("4x160".to_string(), preset("4x160").expect("built-in"))],
            _ => bail!("--levels and --base must be given together"),
        };
        if foveas.is_empty() {
            bail!("no fovea configuration selected");
        }
        let seed = s.seed.unwrap_or(0);
        let mut model = DetectorModel {
            rng_seed: seed,
            ..DetectorModel::default()
        };
        if let Some(m) = s.model {
            let d = &mut model;
            d.true_positive_base = m.true_positive_base.unwrap_or(d.true_positive_base);
            d.degradation_exponent = m.degradation_exponent.unwrap_or(d.degradation_exponent);
            d.min_visible_area = m.min_visible_area.unwrap_or(d.min_visible_area);
            d.false_positive_rate = m.false_positive_rate.unwrap_or(d.false_positive_rate);
            d.score_concentration = m.score_concentration.unwrap_or(d.score_concentration);
            d.jitter_px = m.jitter_px.unwrap_or(d.jitter_px);
            d.duplicates = m.duplicates.unwrap_or(d.duplicates);
        }
        model.validate()?;
        let detector = s.detector.unwrap_or(DetectorKind::Sim);
        if detector == DetectorKind::Bridge && s.bridge_dir.is_none() {
            bail!("--detector bridge requires --bridge-dir");
        }
        let max_fixations = s.max_fix.unwrap_or(6);
        if max_fixations == 0 {
            bail!("--max-fix must be at least 1");
        }
        let threshold = s.threshold.unwrap_or(fovsearch::simdet::DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            bail!("--threshold {threshold} is not a probability");
        }
        Ok(Self {
            foveas,
            grid: parse_grid(s.grid.as_deref().unwrap_or("20x32"))?,
            seed,
            max_fixations,
            threshold,
            detector,
            bridge_dir: s.bridge_dir,
            trace: s.trace.unwrap_or(false),
            jobs: s.jobs.unwrap_or(1).max(1),
            policy: s.policy.unwrap_or(Policy::Greedy),
            stop_confidence: s.stop_confidence,
            classes: s.classes,
            model,
        })
    }
}
