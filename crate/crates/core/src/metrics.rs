//! Scanpath comparison: sequence score (Needleman–Wunsch), fixation edit
//! distance (Levenshtein), their semantic variants, cumulative search
//! performance and inter-subject consistency.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::Pixel;
use crate::search::Scanpath;
use crate::semantics::GridGeometry;

/// Fixations compared per scanpath, not counting the initial central one.
pub const MAX_COMPARED: usize = 6;

/// Grid-cell token sequence: the row-major cell of every fixation after the
/// first, truncated to [`MAX_COMPARED`].
pub fn tokenize_spatial(path: &Scanpath, geom: &GridGeometry) -> Vec<usize> {
    path.fixations
        .iter()
        .skip(1)
        .take(MAX_COMPARED)
        .map(|f| geom.cell_index(geom.cell_of(Pixel::new(f.px[0], f.px[1]))))
        .collect()
}

/// Fixated-object labels after the first fixation, truncated to [`MAX_COMPARED`].
pub fn tokenize_semantic(path: &Scanpath) -> Vec<String> {
    path.fixations
        .iter()
        .skip(1)
        .take(MAX_COMPARED)
        .map(|f| f.label.clone())
        .collect()
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.len() < b.len() {
        return edit_distance(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (up + 1).min(row[j] + 1).min(diag + usize::from(ca != cb));
            diag = up;
        }
    }
    row[b.len()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum Normalization {
    /// Divide by `match_score * max(len a, len b)`.
    #[default]
    MaxLength,
    /// Divide by `match_score * (len a + len b) / 2`.
    MeanLength,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlignmentScoring {
    pub match_score: f64,
    pub mismatch: f64,
    pub gap: f64,
    pub normalization: Normalization,
}

impl Default for AlignmentScoring {
    fn default() -> Self {
        Self {
            match_score: 1.0,
            mismatch: 0.0,
            gap: 0.0,
            normalization: Normalization::MaxLength,
        }
    }
}

/// Best global alignment score (Needleman–Wunsch).
pub fn alignment_score<T: PartialEq>(a: &[T], b: &[T], p: &AlignmentScoring) -> f64 {
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * p.gap).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * p.gap;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { p.match_score } else { p.mismatch };
            cur[j + 1] = sub.max(prev[j + 1] + p.gap).max(cur[j] + p.gap);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized sequence score. Two empty sequences score 1, one empty
/// sequence against a non-empty one scores 0.
pub fn sequence_score_with<T: PartialEq>(a: &[T], b: &[T], p: &AlignmentScoring) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let denom = match p.normalization {
        Normalization::MaxLength => a.len().max(b.len()) as f64,
        Normalization::MeanLength => (a.len() + b.len()) as f64 / 2.0,
    };
    alignment_score(a, b, p) / (p.match_score * denom)
}

pub fn sequence_score<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    sequence_score_with(a, b, &AlignmentScoring::default())
}

/// The four pairwise scores for two scanpaths.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct PairScores {
    pub sem_ss: f64,
    pub sem_fed: f64,
    pub ss: f64,
    pub fed: f64,
}

impl PairScores {
    fn add(&mut self, o: &PairScores) {
        self.sem_ss += o.sem_ss;
        self.sem_fed += o.sem_fed;
        self.ss += o.ss;
        self.fed += o.fed;
    }

    fn scaled(&self, f: f64) -> PairScores {
        PairScores {
            sem_ss: self.sem_ss * f,
            sem_fed: self.sem_fed * f,
            ss: self.ss * f,
            fed: self.fed * f,
        }
    }
}

pub fn compare(a: &Scanpath, b: &Scanpath, geom: &GridGeometry, p: &AlignmentScoring) -> PairScores {
    let (sa, sb) = (tokenize_spatial(a, geom), tokenize_spatial(b, geom));
    let (ta, tb) = (tokenize_semantic(a), tokenize_semantic(b));
    PairScores {
        sem_ss: sequence_score_with(&ta, &tb, p),
        sem_fed: edit_distance(&ta, &tb) as f64,
        ss: sequence_score_with(&sa, &sb, p),
        fed: edit_distance(&sa, &sb) as f64,
    }
}

/// Fraction of episodes whose target was found within `t` fixations, for
/// `t = 0..=max_fixations`.
pub fn cumulative_performance(paths: &[Scanpath], max_fixations: usize) -> Vec<f64> {
    if paths.is_empty() {
        return vec![0.0; max_fixations + 1];
    }
    let mut hits = vec![0usize; max_fixations + 1];
    for p in paths {
        if let (true, Some(t)) = (p.found, p.found_at) {
            if t <= max_fixations {
                hits[t] += 1;
            }
        }
    }
    let mut acc = 0;
    hits.iter()
        .map(|h| {
            acc += h;
            acc as f64 / paths.len() as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct MetricsReport {
    pub means: PairScores,
    pub n_pairs: usize,
    pub n_scenes: usize,
    /// Scenes left out (too few scanpaths, or absent from one side).
    pub excluded: usize,
}

/// Inter-subject agreement: every metric averaged over all unordered pairs of
/// a scene's scanpaths, then over scenes.
pub fn human_consistency(
    by_scene: &BTreeMap<String, Vec<Scanpath>>,
    geom: &GridGeometry,
    p: &AlignmentScoring,
) -> MetricsReport {
    let mut report = MetricsReport::default();
    let mut total = PairScores::default();
    for paths in by_scene.values() {
        if paths.len() < 2 {
            report.excluded += 1;
            continue;
        }
        let mut scene = PairScores::default();
        let mut n = 0;
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                scene.add(&compare(&paths[i], &paths[j], geom, p));
                n += 1;
            }
        }
        total.add(&scene.scaled(1.0 / n as f64));
        report.n_pairs += n;
        report.n_scenes += 1;
    }
    if report.n_scenes > 0 {
        report.means = total.scaled(1.0 / report.n_scenes as f64);
    }
    report
}

/// Model against reference: per scene, the model path is compared with every
/// reference path and averaged; scenes are then averaged. Scenes present on
/// only one side are excluded and counted.
pub fn model_vs_reference(
    model: &BTreeMap<String, Scanpath>,
    reference: &BTreeMap<String, Vec<Scanpath>>,
    geom: &GridGeometry,
    p: &AlignmentScoring,
) -> MetricsReport {
    let mut report = MetricsReport::default();
    let mut total = PairScores::default();
    for (id, m) in model {
        let Some(refs) = reference.get(id).filter(|r| !r.is_empty()) else {
            report.excluded += 1;
            continue;
        };
        let mut scene = PairScores::default();
        for r in refs {
            scene.add(&compare(m, r, geom, p));
        }
        total.add(&scene.scaled(1.0 / refs.len() as f64));
        report.n_pairs += refs.len();
        report.n_scenes += 1;
    }
    report.excluded += reference.keys().filter(|k| !model.contains_key(*k)).count();
    if report.n_scenes > 0 {
        report.means = total.scaled(1.0 / report.n_scenes as f64);
    }
    report
}
