use std::path::Path;
use std::time::Duration;

use fovsearch::bridge::{parse_detection_document, BridgeDetector, BridgeManifest, DETECTIONS_FILE, DONE_FILE};
use fovsearch::fovea::layer_frames;
use fovsearch::scene::{coco_classes, oracle_hit, SceneGenerator, SceneObject};
use fovsearch::search::{fusion_order, BridgeSource, GazePolicy, SimDetector, StopRule};
use fovsearch::*;
use proptest::prelude::*;

fn cfg(levels: u32, l1: u32) -> EpisodeConfig {
    EpisodeConfig::new(
        FoveaConfig::new(levels, l1, 1050, 1680).unwrap(),
        GridGeometry::new(20, 32, 1050, 1680).unwrap(),
    )
}

fn one_object(bbox: [f64; 4]) -> SceneSpec {
    SceneSpec {
        scene_id: "one".into(),
        height: 1050,
        width: 1680,
        target: "cup".into(),
        objects: vec![SceneObject { label: "cup".into(), bbox }],
        image: None,
    }
}

#[test]
fn detection_rate_falls_with_layer() {
    let classes = coco_classes();
    let scene = one_object([790.0, 475.0, 890.0, 575.0]);
    let fcfg = FoveaConfig::new(4, 160, 1050, 1680).unwrap();
    let trials = 600u64;
    let mut hits = [0u32; 4];
    for seed in 0..trials {
        let model = DetectorModel { false_positive_rate: 0.0, rng_seed: seed, ..DetectorModel::default() };
        for fr in layer_frames(Pixel::new(840, 525), &fcfg) {
            hits[fr.index as usize - 1] += detect_layer(&scene, &fr, &model, &classes).len() as u32;
        }
    }
    let rates: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    for (n, r) in rates.iter().enumerate() {
        let p = 0.95 * 2f64.powf(-0.5 * n as f64);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((r - p).abs() < 4.0 * sigma, "layer {}: {r} vs {p}", n + 1);
    }
    assert!(rates.windows(2).all(|w| w[0] > w[1]), "{rates:?}");
}

#[test]
fn small_objects_vanish_from_outer_layers() {
    let classes = coco_classes();
    // 20×20 = 400 px: 25 px at scale 4 (below 64), 6.25 at scale 8
    let scene = one_object([830.0, 515.0, 850.0, 535.0]);
    let model = DetectorModel::noiseless(0);
    let fcfg = FoveaConfig::new(4, 160, 1050, 1680).unwrap();
    let found: Vec<usize> = layer_frames(Pixel::new(840, 525), &fcfg)
        .iter()
        .map(|fr| detect_layer(&scene, fr, &DetectorModel { min_visible_area: 64.0, ..model.clone() }, &classes).len())
        .collect();
    assert_eq!(found, vec![1, 1, 0, 0]);
}

/// Mean target expectation in the target's cell after fusing one fixation.
fn posterior_at(bbox: [f64; 4], seeds: u64) -> f64 {
    let classes = coco_classes();
    let scene = one_object(bbox);
    let c = cfg(4, 160);
    let k = classes.index_of("cup").unwrap();
    let f = Pixel::new(840, 525);
    let center = Pixel::new(((bbox[0] + bbox[2]) / 2.0) as i64, ((bbox[1] + bbox[3]) / 2.0) as i64);
    let cell = c.grid.cell_of(center);
    let mut total = 0.0;
    for seed in 0..seeds {
        let model = DetectorModel { rng_seed: seed, ..DetectorModel::default() };
        let mut grid = BeliefGrid::new(&c.grid, &classes);
        let per_layer = layer_frames(f, &c.fovea)
            .iter()
            .map(|fr| filter_detections(detect_layer(&scene, fr, &model, &classes), c.threshold))
            .collect();
        for d in fusion_order(per_layer) {
            let r = remap_bbox(&d.bbox, f, d.source_layer, 160, 1050, 1680);
            grid.deposit(&c.grid, &r.bbox, &d.scores, 0.0).unwrap();
        }
        total += grid.expectation(cell, k).unwrap();
    }
    total / seeds as f64
}

#[test]
fn confidence_falls_with_eccentricity() {
    // inside level 1, in the level-2 ring, in the level-4 ring
    let near = posterior_at([800.0, 500.0, 860.0, 560.0], 500);
    let mid = posterior_at([1000.0, 500.0, 1060.0, 560.0], 500);
    let far = posterior_at([1300.0, 500.0, 1360.0, 560.0], 500);
    assert!(near > mid && mid > far, "{near} {mid} {far}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filter_keeps_exactly_confident_detections(
        raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 0..20), thr in 0.0f64..1.0
    ) {
        let dets: Vec<Detection> = raw
            .iter()
            .filter(|s| s.iter().any(|&v| v > 0.0))
            .enumerate()
            .map(|(i, s)| Detection {
                scores: ScoreVector::new(s.clone()).unwrap(),
                bbox: BBox::image(i as f64, 0.0, i as f64 + 1.0, 1.0),
                source_layer: 1,
            })
            .collect();
        let mut want = Vec::new();
        for d in &dets {
            let s = d.scores.as_slice();
            let sum: f64 = s.iter().sum();
            let mut m = 0.0;
            for &v in s {
                if v > m {
                    m = v;
                }
            }
            if m / sum >= thr {
                want.push(d.bbox.x0);
            }
        }
        let got: Vec<f64> = filter_detections(dets, thr).iter().map(|d| d.bbox.x0).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn episodes_are_deterministic_and_well_formed(seed in 0u64..1000, index in 0usize..50, max_fix in 1usize..8) {
        let classes = coco_classes();
        let scene = SceneGenerator::default().generate(seed, index, &classes);
        let model = DetectorModel { rng_seed: seed, ..DetectorModel::default() };
        let src = SimDetector { model: &model, classes: &classes };
        let mut c = cfg(4, 160);
        c.max_fixations = max_fix;
        let a = run_episode(&scene, &c, &classes, &src).unwrap();
        let b = run_episode(&scene, &c, &classes, &src).unwrap();
        prop_assert_eq!(&a.scanpath, &b.scanpath);
        prop_assert_eq!(a.grid.snapshot(), b.grid.snapshot());

        let fx = &a.scanpath.fixations;
        prop_assert!(!fx.is_empty() && fx.len() <= max_fix + 1);
        prop_assert_eq!(fx[0].px, [840, 525]);
        for (t, f) in fx.iter().enumerate() {
            let p = Pixel::new(f.px[0], f.px[1]);
            prop_assert_eq!(c.grid.cell_of(p), (f.cell[0], f.cell[1]));
            if t > 0 {
                prop_assert_eq!(c.grid.cell_center((f.cell[0], f.cell[1])), p);
                // never inside an earlier fixation's inhibited block
                for e in &fx[..t] {
                    prop_assert!(e.cell[0].abs_diff(f.cell[0]) > 1 || e.cell[1].abs_diff(f.cell[1]) > 1);
                }
            }
        }
        let first_hit = fx.iter().position(|f| oracle_hit(Pixel::new(f.px[0], f.px[1]), &scene));
        prop_assert_eq!(a.scanpath.found_at, first_hit);
        prop_assert_eq!(a.scanpath.found, first_hit.is_some());
        if let Some(t) = first_hit {
            prop_assert_eq!(t + 1, fx.len());
        }
    }
}

#[test]
fn confidence_stop_rule_ends_early() {
    let classes = coco_classes();
    let scene = one_object([200.0, 200.0, 300.0, 300.0]);
    let model = DetectorModel::noiseless(1);
    let src = SimDetector { model: &model, classes: &classes };
    let mut c = cfg(4, 160);
    c.stop_rule = StopRule::Confidence(1e-9);
    let e = run_episode(&scene, &c, &classes, &src).unwrap();
    assert_eq!(e.scanpath.fixations.len(), 2);
}

#[test]
fn random_policy_is_seeded() {
    let classes = coco_classes();
    let scene = SceneGenerator::default().generate(3, 0, &classes);
    let model = DetectorModel::default();
    let src = SimDetector { model: &model, classes: &classes };
    let run = |seed| {
        let mut c = cfg(4, 160);
        c.policy = GazePolicy::Random { seed };
        run_episode(&scene, &c, &classes, &src).unwrap().scanpath
    };
    assert_eq!(run(5), run(5));
    let paths: Vec<_> = (0..8).map(run).collect();
    assert!(paths.windows(2).any(|w| w[0] != w[1]));
}

fn wire_doc(scene: &str, t: usize, layers: &[u32], bbox: [f64; 4]) -> String {
    let docs: Vec<_> = layers
        .iter()
        .map(|&n| {
            let dets = if n == 2 {
                serde_json::json!([{ "box": bbox, "scores": { "cup": 1.0 } }])
            } else {
                serde_json::json!([])
            };
            serde_json::json!({ "scene_id": scene, "fixation_index": t, "layer": n, "detections": dets })
        })
        .collect();
    serde_json::to_string(&docs).unwrap()
}

#[test]
fn wire_documents_are_parsed_strictly() {
    let classes = coco_classes();
    let ok = wire_doc("s", 0, &[1, 2, 3, 4], [40.0, 40.0, 80.0, 80.0]);
    let parsed = parse_detection_document(&ok, "s", 0, 4, 160, &classes).unwrap();
    assert_eq!(parsed.iter().map(Vec::len).collect::<Vec<_>>(), vec![0, 1, 0, 0]);
    assert_eq!(parsed[1][0].source_layer, 2);
    assert_eq!(parsed[1][0].bbox.as_array(), [40.0, 40.0, 80.0, 80.0]);

    let bad = [
        wire_doc("s", 0, &[1, 2, 3], [40.0, 40.0, 80.0, 80.0]),
        wire_doc("s", 0, &[1, 2, 2, 3, 4], [40.0, 40.0, 80.0, 80.0]),
        wire_doc("other", 0, &[1, 2, 3, 4], [40.0, 40.0, 80.0, 80.0]),
        wire_doc("s", 1, &[1, 2, 3, 4], [40.0, 40.0, 80.0, 80.0]),
        wire_doc("s", 0, &[1, 2, 3, 4], [40.0, 40.0, 180.0, 80.0]),
        wire_doc("s", 0, &[1, 2, 3, 4], [80.0, 40.0, 40.0, 80.0]),
        ok.replace("\"cup\"", "\"unicorn\""),
        ok.replace("\"layer\":1", "\"layer\":1,\"extra\":0"),
        "{".to_string(),
    ];
    for doc in bad {
        assert!(parse_detection_document(&doc, "s", 0, 4, 160, &classes).is_err(), "{doc}");
    }
}

/// Stand-in for the external detector: answers every job in `fixations` with
/// one `cup` box in layer 2.
fn stub_detector(root: &Path, scene: &str, fixations: usize, bbox: [f64; 4]) -> std::thread::JoinHandle<Vec<BridgeManifest>> {
    let root = root.to_path_buf();
    let scene = scene.to_string();
    std::thread::spawn(move || {
        let mut seen = Vec::new();
        for t in 0..fixations {
            let dir = root.join(&scene).join(format!("fix_{t}"));
            let manifest = dir.join("manifest.json");
            let start = std::time::Instant::now();
            while !manifest.exists() {
                assert!(start.elapsed() < Duration::from_secs(30), "no job {t}");
                std::thread::sleep(Duration::from_millis(5));
            }
            // the manifest is written after the layer images
            std::thread::sleep(Duration::from_millis(20));
            let m: BridgeManifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
            for l in &m.layers.layers {
                assert!(dir.join(format!("layer_{}.png", l.n)).exists());
            }
            std::fs::write(dir.join(DETECTIONS_FILE), wire_doc(&scene, t, &[1, 2, 3, 4], bbox)).unwrap();
            std::fs::write(dir.join(DONE_FILE), "{}").unwrap();
            seen.push(m);
        }
        seen
    })
}

#[test]
fn bridge_round_trip_with_stub_detector() {
    let work = tempfile::tempdir().unwrap();
    let classes = coco_classes();
    let scene = SceneSpec { scene_id: "bridge".into(), ..one_object([100.0, 100.0, 150.0, 150.0]) };
    let image = scene.render();
    let mut c = cfg(4, 160);
    c.max_fixations = 1;
    c.trace = true;
    let mut bridge = BridgeDetector::new(work.path());
    bridge.timeout = Duration::from_secs(30);
    bridge.poll = Duration::from_millis(5);
    let stub = stub_detector(work.path(), "bridge", 2, [40.0, 40.0, 80.0, 80.0]);
    let src = BridgeSource { bridge: &bridge, image: &image, fovea: &c.fovea, classes: &classes };
    let e = run_episode(&scene, &c, &classes, &src).unwrap();
    let manifests = stub.join().unwrap();

    assert_eq!(manifests[0].scene_id, "bridge");
    assert_eq!(manifests[0].fixation_index, 0);
    assert_eq!(manifests[0].layers.focal, [840, 525]);
    assert_eq!(manifests[0].layers.layers[1].top_left, [680, 365]);

    // layer 2 at f0 = (840, 525): the box maps to [760, 445, 840, 525],
    // i.e. grid cells x 14..=15, y 8..=9 at 52.5 px per cell.
    let k = classes.index_of("cup").unwrap();
    let snap = &e.snapshots[0];
    for y in 0..20 {
        for x in 0..32 {
            let beta = &snap.beta[(y * 32 + x) * 80..(y * 32 + x + 1) * 80];
            let updated = (14..=15).contains(&x) && (8..=9).contains(&y);
            assert_eq!(beta[k], if updated { 2.0 } else { 1.0 }, "cell ({x},{y})");
        }
    }
    // (15, 9) is inhibited by f0's block, the tie among the rest goes to (14, 8)
    let fx = &e.scanpath.fixations;
    assert_eq!(fx.len(), 2);
    assert_eq!(fx[1].cell, [14, 8]);
    assert_eq!(fx[1].px, [761, 446]);
    assert_eq!(manifests[1].layers.focal, [761, 446]);
}

#[test]
fn bridge_times_out_without_detector() {
    let work = tempfile::tempdir().unwrap();
    let classes = coco_classes();
    let scene = one_object([100.0, 100.0, 150.0, 150.0]);
    let c = cfg(2, 64);
    let mut bridge = BridgeDetector::new(work.path());
    bridge.timeout = Duration::from_millis(50);
    let err = bridge
        .run_job(&scene.render(), "one", 0, Pixel::new(840, 525), &c.fovea, &classes)
        .unwrap_err();
    assert!(matches!(err, Error::BridgeTimeout(_)));
}
