use std::collections::BTreeMap;

use fovsearch::metrics::*;
use fovsearch::search::Fixation;
use fovsearch::*;
use proptest::prelude::*;

/// Plain recursive Levenshtein, exponential but obviously correct.
fn edit_oracle(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = edit_oracle(ra, rb) + usize::from(x != y);
            sub.min(edit_oracle(ra, b) + 1).min(edit_oracle(a, rb) + 1)
        }
    }
}

/// Scores of every global alignment, listed explicitly.
fn all_alignment_scores(a: &[u8], b: &[u8], p: &AlignmentScoring, acc: f64, out: &mut Vec<f64>) {
    if a.is_empty() && b.is_empty() {
        out.push(acc);
        return;
    }
    if let (Some((x, ra)), Some((y, rb))) = (a.split_first(), b.split_first()) {
        let s = if x == y { p.match_score } else { p.mismatch };
        all_alignment_scores(ra, rb, p, acc + s, out);
    }
    if let Some((_, ra)) = a.split_first() {
        all_alignment_scores(ra, b, p, acc + p.gap, out);
    }
    if let Some((_, rb)) = b.split_first() {
        all_alignment_scores(a, rb, p, acc + p.gap, out);
    }
}

fn nw_oracle(a: &[u8], b: &[u8], p: &AlignmentScoring) -> f64 {
    let mut scores = Vec::new();
    all_alignment_scores(a, b, p, 0.0, &mut scores);
    scores.into_iter().fold(f64::MIN, f64::max)
}

/// Longest common subsequence by trying every subset of `a`.
fn lcs_by_subsets(a: &[u8], b: &[u8]) -> usize {
    let is_subseq = |s: &[u8]| {
        let mut it = b.iter();
        s.iter().all(|c| it.any(|d| d == c))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let s: Vec<u8> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            is_subseq(&s).then_some(s.len())
        })
        .max()
        .unwrap_or(0)
}

fn seq(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..5, 0..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn edit_distance_matches_recursion(a in seq(8), b in seq(8)) {
        prop_assert_eq!(edit_distance(&a, &b), edit_oracle(&a, &b));
    }

    #[test]
    fn alignment_matches_enumeration(
        a in seq(6), b in seq(6), m in 0.5f64..3.0, mm in -2.0f64..0.5, gap in -2.0f64..0.1
    ) {
        let p = AlignmentScoring { match_score: m, mismatch: mm, gap, normalization: Normalization::MaxLength };
        prop_assert!((alignment_score(&a, &b, &p) - nw_oracle(&a, &b, &p)).abs() < 1e-9);
    }

    #[test]
    fn default_score_is_normalized_lcs(a in seq(6), b in seq(6)) {
        let want = match (a.is_empty(), b.is_empty()) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            _ => lcs_by_subsets(&a, &b) as f64 / a.len().max(b.len()) as f64,
        };
        prop_assert!((sequence_score(&a, &b) - want).abs() < 1e-12);
    }

    #[test]
    fn metric_invariants(a in seq(6), b in seq(6), c in seq(6)) {
        let d = |x: &[u8], y: &[u8]| edit_distance(x, y);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) <= a.len().max(b.len()));
        let ss = sequence_score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ss));
        prop_assert_eq!(ss, sequence_score(&b, &a));
        prop_assert_eq!(sequence_score(&a, &a), 1.0);
        let mean = AlignmentScoring { normalization: Normalization::MeanLength, ..AlignmentScoring::default() };
        let sm = sequence_score_with(&a, &b, &mean);
        prop_assert!((0.0..=1.0).contains(&sm) && sm >= ss);
    }
}

fn geom() -> GridGeometry {
    GridGeometry::new(20, 32, 1050, 1680).unwrap()
}

fn path(id: &str, cells: &[(usize, usize)], labels: &[&str], found_at: Option<usize>) -> Scanpath {
    let g = geom();
    Scanpath {
        scene_id: id.into(),
        target: "cup".into(),
        found: found_at.is_some(),
        found_at,
        fixations: cells
            .iter()
            .zip(labels)
            .map(|(&c, l)| {
                let p = g.cell_center(c);
                Fixation { px: [p.x, p.y], cell: [c.0, c.1], label: l.to_string() }
            })
            .collect(),
        exhausted: false,
        subject: None,
    }
}

#[test]
fn first_fixation_skipped_and_tail_truncated() {
    let cells: Vec<_> = (0..9).map(|i| (i, 0)).collect();
    let labels = ["a"; 9];
    let p = path("s", &cells, &labels, None);
    assert_eq!(tokenize_spatial(&p, &geom()), vec![1, 2, 3, 4, 5, 6]);
    assert_eq!(tokenize_semantic(&p).len(), 6);
    // differences beyond the sixth compared fixation are invisible
    let mut q = p.clone();
    q.fixations[8].px = [10, 1000];
    assert_eq!(compare(&p, &q, &geom(), &AlignmentScoring::default()).fed, 0.0);
}

#[test]
fn hand_computed_pair() {
    let a = path("s", &[(16, 10), (1, 1), (2, 2), (3, 3)], &["x", "cup", "bowl", "cup"], None);
    let b = path("s", &[(16, 10), (2, 2), (1, 1)], &["x", "bowl", "cup"], None);
    let s = compare(&a, &b, &geom(), &AlignmentScoring::default());
    // spatial: [33, 66, 99] vs [66, 33]; LCS 1 over length 3, two edits
    assert!((s.ss - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.fed, 2.0);
    // semantic: [cup, bowl, cup] vs [bowl, cup]; LCS 2, one deletion
    assert!((s.sem_ss - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.sem_fed, 1.0);
}

proptest! {
    #[test]
    fn cumulative_curve_counts_hits(found in prop::collection::vec(prop::option::of(0usize..9), 1..40)) {
        let paths: Vec<_> = found.iter().map(|&f| path("s", &[], &[], f)).collect();
        let curve = cumulative_performance(&paths, 6);
        prop_assert_eq!(curve.len(), 7);
        for (t, v) in curve.iter().enumerate() {
            let hits = found.iter().filter(|f| f.is_some_and(|x| x <= t)).count();
            prop_assert!((v - hits as f64 / found.len() as f64).abs() < 1e-12);
        }
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn consistency_averages_pairs_then_scenes() {
    let p = |cells: &[(usize, usize)]| path("s", cells, &vec!["l"; cells.len()], None);
    let mut by_scene = BTreeMap::new();
    // scene a: three identical paths, every pair has FED 0
    by_scene.insert("a".to_string(), vec![p(&[(0, 0), (1, 0)]); 3]);
    // scene b: two paths one substitution apart
    by_scene.insert("b".to_string(), vec![p(&[(0, 0), (1, 0)]), p(&[(0, 0), (2, 0)])]);
    // scene c: a single path cannot be paired
    by_scene.insert("c".to_string(), vec![p(&[(0, 0)])]);
    let r = human_consistency(&by_scene, &geom(), &AlignmentScoring::default());
    assert_eq!((r.n_scenes, r.n_pairs, r.excluded), (2, 4, 1));
    assert!((r.means.fed - 0.5).abs() < 1e-12);
    assert!((r.means.ss - 0.5).abs() < 1e-12);
    assert!((r.means.sem_ss - 1.0).abs() < 1e-12);
}

#[test]
fn model_against_reference_excludes_unmatched_scenes() {
    let mut model = BTreeMap::new();
    model.insert("a".to_string(), path("a", &[(0, 0), (1, 0)], &["x", "y"], None));
    model.insert("z".to_string(), path("z", &[(0, 0)], &["x"], None));
    let mut refs = BTreeMap::new();
    refs.insert(
        "a".to_string(),
        vec![path("a", &[(0, 0), (1, 0)], &["x", "y"], None), path("a", &[(0, 0), (3, 0)], &["x", "q"], None)],
    );
    refs.insert("b".to_string(), vec![path("b", &[(0, 0)], &["x"], None)]);
    let r = model_vs_reference(&model, &refs, &geom(), &AlignmentScoring::default());
    assert_eq!((r.n_scenes, r.n_pairs, r.excluded), (1, 2, 2));
    assert!((r.means.ss - 0.5).abs() < 1e-12);
    assert!((r.means.fed - 0.5).abs() < 1e-12);
}
