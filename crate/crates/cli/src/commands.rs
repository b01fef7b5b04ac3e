use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fovsearch::bridge::{scene_image, BridgeDetector};
use fovsearch::metrics::{
    cumulative_performance, human_consistency, model_vs_reference, AlignmentScoring, MetricsReport,
};
use fovsearch::scene::{coco_classes, SceneGenerator};
use fovsearch::search::{BridgeSource, DetectionSource, GazePolicy, SimDetector, StopRule};
use fovsearch::{
    build_pyramid, pixel_cost, run_episode, ClassSet, EpisodeConfig, FoveaConfig, GridGeometry, Pixel, Raster,
    Scanpath, SceneSpec,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{published_percent, DetectorKind, FoveaSpec, Policy, RunConfig};

/// How a command finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some inputs were skipped.
    Partial,
}

pub fn cmd_foveate(image: &Path, focal: Pixel, fovea: FoveaSpec, out: &Path) -> Result<Vec<PathBuf>> {
    let raster = Raster::load(image).with_context(|| format!("reading {}", image.display()))?;
    let cfg = FoveaConfig::new(fovea.levels, fovea.base_side, raster.height(), raster.width())?;
    let layers = build_pyramid(&raster, focal, &cfg)?;
    fovsearch::fovea::write_layers(out, focal, &cfg, &layers)?;
    Ok(layers
        .iter()
        .map(|(fr, _)| out.join(fovsearch::fovea::layer_file_name(fr.index)))
        .collect())
}

pub fn class_set(cfg: &RunConfig) -> Result<ClassSet> {
    Ok(match &cfg.classes {
        Some(labels) => ClassSet::new(labels.iter().cloned())?,
        None => coco_classes(),
    })
}

/// Scene files (`*.json`) of a directory in file-name order.
pub fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchSummary {
    pub preset: String,
    pub levels: u32,
    pub base_side: u32,
    pub image_height: u32,
    pub image_width: u32,
    pub pixels: u64,
    pub pixel_percent: f64,
    /// Percentage printed in the published table for this preset, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_percent: Option<f64>,
    pub scenes: usize,
    pub skipped: usize,
    pub found_rate: f64,
    pub cumulative: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SearchRun {
    pub summaries: Vec<SearchSummary>,
    pub outcome: Outcome,
}

struct LoadedScene {
    spec: SceneSpec,
    dir: PathBuf,
}

pub fn cmd_search(scene_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<SearchRun> {
    let classes = class_set(cfg)?;
    let files = scene_files(scene_dir)?;
    if files.is_empty() {
        bail!("no scene files in {}", scene_dir.display());
    }
    let mut skipped = 0;
    let mut scenes = Vec::new();
    for f in &files {
        match SceneSpec::read(f).and_then(|s| s.validate(&classes).map(|_| s)) {
            Ok(spec) => scenes.push(LoadedScene {
                spec,
                dir: f.parent().unwrap_or(Path::new(".")).to_path_buf(),
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", f.display());
                skipped += 1;
            }
        }
    }
    scenes.sort_by(|a, b| a.spec.scene_id.cmp(&b.spec.scene_id));
    if let Some(w) = scenes.windows(2).find(|w| w[0].spec.scene_id == w[1].spec.scene_id) {
        bail!("scene_id {:?} appears in more than one file", w[0].spec.scene_id);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let mut summaries = Vec::new();
    let mut partial = skipped > 0;
    for (label, fovea) in &cfg.foveas {
        let results: Vec<Result<_>> = pool.install(|| {
            scenes
                .par_iter()
                .map(|s| run_scene(s, *fovea, cfg, &classes))
                .collect()
        });
        let mut lines = String::new();
        let mut paths = Vec::new();
        let mut run_skipped = skipped;
        for (s, r) in scenes.iter().zip(results) {
            match r {
                Ok(ep) => {
                    lines.push_str(&serde_json::to_string(&ep.scanpath)?);
                    lines.push('\n');
                    if cfg.trace {
                        let dir = out.join(format!("trace_{label}"));
                        fs::create_dir_all(&dir)?;
                        let p = dir.join(format!("{}.json", s.spec.scene_id));
                        fs::write(&p, serde_json::to_string(&ep.snapshots)?)?;
                    }
                    paths.push(ep.scanpath);
                }
                Err(e) => {
                    log::warn!("scene {} failed under {label}: {e:#}", s.spec.scene_id);
                    run_skipped += 1;
                }
            }
        }
        partial |= run_skipped > 0;
        fs::write(out.join(format!("scanpaths_{label}.jsonl")), lines)?;

        let (h, w) = scenes
            .first()
            .map_or((1050, 1680), |s| (s.spec.height, s.spec.width));
        let cost = pixel_cost(&FoveaConfig::new(fovea.levels, fovea.base_side, h, w)?);
        let cumulative = cumulative_performance(&paths, cfg.max_fixations);
        let found_rate = if paths.is_empty() {
            0.0
        } else {
            paths.iter().filter(|p| p.found).count() as f64 / paths.len() as f64
        };
        let summary = SearchSummary {
            preset: label.clone(),
            levels: fovea.levels,
            base_side: fovea.base_side,
            image_height: h,
            image_width: w,
            pixels: cost.pixels,
            pixel_percent: cost.percent,
            published_percent: published_percent(label),
            scenes: paths.len(),
            skipped: run_skipped,
            found_rate,
            cumulative,
        };
        fs::write(
            out.join(format!("summary_{label}.json")),
            serde_json::to_string_pretty(&summary)?,
        )?;
        summaries.push(summary);
    }
    Ok(SearchRun {
        summaries,
        outcome: if partial { Outcome::Partial } else { Outcome::Success },
    })
}

fn run_scene(
    scene: &LoadedScene,
    fovea: FoveaSpec,
    cfg: &RunConfig,
    classes: &ClassSet,
) -> Result<fovsearch::search::Episode> {
    let spec = &scene.spec;
    let fcfg = FoveaConfig::new(fovea.levels, fovea.base_side, spec.height, spec.width)?;
    let geom = GridGeometry::new(cfg.grid.0, cfg.grid.1, spec.height, spec.width)?;
    let mut ecfg = EpisodeConfig::new(fcfg, geom);
    ecfg.max_fixations = cfg.max_fixations;
    ecfg.threshold = cfg.threshold;
    ecfg.trace = cfg.trace;
    ecfg.stop_rule = cfg.stop_confidence.map_or(StopRule::Oracle, StopRule::Confidence);
    ecfg.policy = match cfg.policy {
        Policy::Greedy => GazePolicy::Greedy,
        Policy::Random => GazePolicy::Random { seed: cfg.seed },
    };
    match cfg.detector {
        DetectorKind::Sim => {
            let src = SimDetector {
                model: &cfg.model,
                classes,
            };
            Ok(run_episode(spec, &ecfg, classes, &src)?)
        }
        DetectorKind::Bridge => {
            let bridge = BridgeDetector::new(
                cfg.bridge_dir
                    .clone()
                    .context("bridge mode needs a work directory")?
                    .join(fovea.label()),
            );
            let image = scene_image(spec, Some(&scene.dir))?;
            let src = BridgeSource {
                bridge: &bridge,
                image: &image,
                fovea: &fcfg,
                classes,
            };
            Ok(run_episode(spec, &ecfg, classes, &src as &dyn DetectionSource)?)
        }
    }
}

/// Reads scanpath JSON lines; blank lines are ignored.
pub fn read_scanpaths(path: &Path) -> Result<Vec<Scanpath>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn group_by_scene(paths: Vec<Scanpath>) -> BTreeMap<String, Vec<Scanpath>> {
    let mut m: BTreeMap<String, Vec<Scanpath>> = BTreeMap::new();
    for p in paths {
        m.entry(p.scene_id.clone()).or_default().push(p);
    }
    m
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub grid: (usize, usize),
    pub image_size: (u32, u32),
    pub scoring: AlignmentScoring,
    pub consistency: bool,
    pub max_fixations: usize,
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub model: MetricsReport,
    pub consistency: Option<MetricsReport>,
    pub cumulative: Vec<f64>,
    pub warnings: usize,
}

fn metrics_csv(r: &MetricsReport) -> String {
    let mut s = String::from("metric,mean,n_pairs\n");
    for (name, v) in [
        ("SemSS", r.means.sem_ss),
        ("SemFED", r.means.sem_fed),
        ("SS", r.means.ss),
        ("FED", r.means.fed),
    ] {
        writeln!(s, "{name},{v:.6},{}", r.n_pairs).expect("write to string");
    }
    s
}

fn cumulative_csv(c: &[f64]) -> String {
    let mut s = String::from("t,ratio\n");
    for (t, r) in c.iter().enumerate() {
        writeln!(s, "{t},{r:.6}").expect("write to string");
    }
    s
}

pub fn cmd_eval(model_file: &Path, reference_file: &Path, out: &Path, opts: &EvalOptions) -> Result<EvalResult> {
    let (h, w) = opts.image_size;
    let geom = GridGeometry::new(opts.grid.0, opts.grid.1, h, w)?;
    let model_paths = read_scanpaths(model_file)?;
    let reference = group_by_scene(read_scanpaths(reference_file)?);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut model = BTreeMap::new();
    let mut duplicates = 0;
    for p in &model_paths {
        if model.insert(p.scene_id.clone(), p.clone()).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate model scanpaths; the last one per scene is used");
    }
    let report = model_vs_reference(&model, &reference, &geom, &opts.scoring);
    if report.excluded > 0 {
        log::warn!("{} scenes present in only one file were excluded", report.excluded);
    }
    fs::write(out.join("metrics.csv"), metrics_csv(&report))?;
    let cumulative = cumulative_performance(&model_paths, opts.max_fixations);
    fs::write(out.join("cumulative.csv"), cumulative_csv(&cumulative))?;

    let consistency = opts.consistency.then(|| {
        let r = human_consistency(&reference, &geom, &opts.scoring);
        if r.excluded > 0 {
            log::warn!("{} reference scenes had fewer than two scanpaths", r.excluded);
        }
        r
    });
    if let Some(c) = &consistency {
        fs::write(out.join("consistency.csv"), metrics_csv(c))?;
    }
    Ok(EvalResult {
        warnings: report.excluded,
        model: report,
        consistency,
        cumulative,
    })
}

/// Pixel-cost table for the named presets.
pub fn cmd_report(out: &Path, image_size: (u32, u32)) -> Result<String> {
    let (h, w) = image_size;
    let mut csv = String::from("preset,levels,base_side,pixels,percent,published_percent,note\n");
    for (name, levels, base) in crate::config::PRESETS {
        let cost = pixel_cost(&FoveaConfig::new(levels, base, h, w)?);
        let published = published_percent(name).expect("every preset has a published value");
        let note = if (cost.percent - published).abs() > 0.05 {
            "published value disagrees with N*l1^2/(H*W)"
        } else {
            ""
        };
        writeln!(
            csv,
            "{name},{levels},{base},{},{:.3},{published},{note}",
            cost.pixels, cost.percent
        )?;
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("pixel_cost.csv"), &csv)?;
    Ok(csv)
}

/// Writes `count` synthetic scenes as `<scene_id>.json`.
pub fn cmd_gen_scenes(out: &Path, count: usize, seed: u64, cfg: &RunConfig) -> Result<()> {
    let classes = class_set(cfg)?;
    fs::create_dir_all(out)?;
    let gen = SceneGenerator::default();
    for i in 0..count {
        let s = gen.generate(seed, i, &classes);
        s.write(&out.join(format!("{}.json", s.scene_id)))?;
    }
    Ok(())
}
