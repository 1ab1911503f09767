mod common;

use hiereval::annotation::{parse_ground_truth, parse_task1_submission, parse_task2_submission, to_json_bytes};
use hiereval::eval::{ground_truth_levels, image_grid, predicted_levels};
use hiereval::fixtures::{generate_scene, self_submissions, NoiseConfig};
use hiereval::geometry::{intersection_area, mask_area, RleMask};
use hiereval::metrics::MatchCounts;
use hiereval::{evaluate_task1, evaluate_task2, EvalOptions};
use proptest::prelude::*;

#[test]
fn jitter_only_keeps_every_match_but_loosens_tightness() {
    let mut cfg = common::noiseless(21, 8);
    cfg.noise = NoiseConfig {
        jitter_px: 0.75,
        ..NoiseConfig::default()
    };
    let b = generate_scene(&cfg).unwrap();
    let r = evaluate_task1(&b.gt, &b.task1, &EvalOptions::default()).unwrap();
    assert_eq!(r.word.f1, 1.0);
    assert!(r.word.tightness < 1.0);
}

#[test]
fn drop_rate_sets_expected_recall() {
    let d = 0.3;
    let mut cfg = common::noiseless(22, 250);
    cfg.illegible_fraction = 0.0;
    cfg.noise.drop_prob = d;
    let b = generate_scene(&cfg).unwrap();
    let legible = b.gt.images().iter().flat_map(|i| i.words()).filter(|w| w.legible).count();
    assert!(legible >= 2000, "only {legible} words");
    let r = evaluate_task1(&b.gt, &b.task1, &EvalOptions::default()).unwrap();
    assert!((r.word.recall - (1.0 - d)).abs() <= 0.05, "recall {}", r.word.recall);
    assert_eq!(r.word.precision, 1.0);
}

#[test]
fn ground_truth_round_trips_through_json() {
    for seed in 0..100 {
        let b = generate_scene(&common::random_small_config(seed)).or_else(|_| generate_scene(&common::noiseless(seed, 2))).unwrap();
        let back = parse_ground_truth(&to_json_bytes(&b.gt)).unwrap();
        assert_eq!(back, b.gt, "seed {seed}");
        assert_eq!(parse_task1_submission(&to_json_bytes(&b.task1)).unwrap(), b.task1);
        assert_eq!(parse_task2_submission(&to_json_bytes(&b.task2)).unwrap(), b.task2);
    }
}

#[test]
fn self_evaluation_is_perfect_for_generated_scenes() {
    for seed in 0..25 {
        let mut cfg = common::random_small_config(seed);
        cfg.noise = NoiseConfig::default();
        let Ok(b) = generate_scene(&cfg) else { continue };
        let (t1, t2) = self_submissions(&b.gt);
        let r = evaluate_task1(&b.gt, &t1, &EvalOptions::default()).unwrap();
        for m in [r.word, r.line, r.paragraph] {
            assert_eq!([m.precision, m.recall, m.f1, m.tightness, m.pq], [1.0; 5], "seed {seed}");
        }
        assert_eq!(r.hpq.value(), 1.0);
        let w = evaluate_task2(&b.gt, &t2, &EvalOptions::default()).unwrap().word;
        assert_eq!([w.precision, w.recall, w.f1, w.tightness, w.pq], [1.0; 5]);
    }
}

fn is_subset(child: &RleMask, parent: &RleMask) -> bool {
    intersection_area(child, parent).unwrap() == mask_area(child)
}

#[test]
fn words_lie_inside_lines_and_lines_inside_paragraphs() {
    let mut cfg = common::noiseless(23, 6);
    cfg.illegible_fraction = 0.0;
    cfg.noise.jitter_px = 1.5;
    let b = generate_scene(&cfg).unwrap();
    for ann in b.gt.images() {
        let [w, l, p] = ground_truth_levels(ann, true).unwrap();
        // One paragraph and one line per index; find each child's parent.
        for m in &w.masks {
            assert!(l.masks.iter().any(|lm| is_subset(m, lm)));
        }
        for m in &l.masks {
            assert!(p.masks.iter().any(|pm| is_subset(m, pm)));
        }
        let [pw, pl, pp] = predicted_levels(&ann.image_id, &b.task1.images[&ann.image_id], image_grid(ann).unwrap()).unwrap();
        for m in &pw.masks {
            assert!(pl.masks.iter().any(|lm| is_subset(m, lm)));
        }
        for m in &pl.masks {
            assert!(pp.masks.iter().any(|pm| is_subset(m, pm)));
        }
    }
}

#[test]
fn pooled_counts_equal_sum_of_per_image_counts() {
    let mut cfg = common::random_small_config(24);
    cfg.image_count = 12;
    cfg.paragraphs_per_image.max = 2;
    let b = generate_scene(&cfg).unwrap();
    let opts = EvalOptions {
        per_image_breakdown: true,
        ..EvalOptions::default()
    };
    let r = evaluate_task1(&b.gt, &b.task1, &opts).unwrap();
    let per = r.per_image.as_ref().unwrap();
    assert_eq!(per.len(), 12);
    let sum = |f: fn(&hiereval::eval::LevelTriple) -> MatchCounts| per.values().map(f).fold(MatchCounts::default(), |a, c| a + c);
    let [w, l, p] = r.level_counts();
    for (total, parts) in [(w, sum(|t| t.word.counts())), (l, sum(|t| t.line.counts())), (p, sum(|t| t.paragraph.counts()))] {
        assert_eq!((total.tp, total.fp, total.fn_), (parts.tp, parts.fp, parts.fn_));
        assert!((total.iou_sum - parts.iou_sum).abs() < 1e-9);
    }
    let r2 = evaluate_task2(&b.gt, &b.task2, &opts).unwrap();
    let parts = r2.per_image.unwrap().values().map(|m| m.counts()).fold(MatchCounts::default(), |a, c| a + c);
    assert_eq!((r2.word.tp, r2.word.fp, r2.word.fn_), (parts.tp, parts.fp, parts.fn_));
}

#[test]
fn worker_count_does_not_change_reports() {
    let mut cfg = common::random_small_config(25);
    cfg.image_count = 30;
    cfg.paragraphs_per_image.max = 2;
    let b = generate_scene(&cfg).unwrap();
    let run = |workers| {
        let opts = EvalOptions {
            parallelism: workers,
            per_image_breakdown: true,
            ..EvalOptions::default()
        };
        evaluate_task1(&b.gt, &b.task1, &opts).unwrap()
    };
    let one = run(1);
    for workers in [2, 8, 0] {
        assert_eq!(run(workers), one);
    }
}

fn valid_gt_bytes() -> Vec<u8> {
    to_json_bytes(&generate_scene(&common::noiseless(26, 1)).unwrap().gt)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parsers_never_panic_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_ground_truth(&bytes);
        let _ = parse_task1_submission(&bytes);
        let _ = parse_task2_submission(&bytes);
    }

    #[test]
    fn parsers_never_panic_on_mutated_documents(edits in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8), cut in any::<prop::sample::Index>()) {
        let mut bytes = valid_gt_bytes();
        for (at, b) in edits {
            let i = at.index(bytes.len());
            bytes[i] = b;
        }
        bytes.truncate(cut.index(bytes.len() + 1).max(1));
        if let Ok(gt) = parse_ground_truth(&bytes) {
            let (t1, t2) = self_submissions(&gt);
            let _ = evaluate_task1(&gt, &t1, &EvalOptions::default());
            let _ = evaluate_task2(&gt, &t2, &EvalOptions::default());
        }
    }

    #[test]
    fn extreme_coordinates_never_panic(coords in proptest::collection::vec(prop_oneof![-1e12f64..1e12, -50.0f64..300.0, Just(f64::MAX), Just(-f64::MAX)], 6..16)) {
        let vertices: Vec<String> = coords.chunks_exact(2).map(|c| format!("[{:e},{:e}]", c[0], c[1])).collect();
        let doc = format!(
            r#"{{"annotations":[{{"image_id":"a","image_width":64,"image_height":48,"paragraphs":[{{"lines":[{{"words":[{{"vertices":[{}],"text":"x","legible":true}}]}}]}}]}}]}}"#,
            vertices.join(",")
        );
        if let Ok(gt) = parse_ground_truth(doc.as_bytes()) {
            let (t1, t2) = self_submissions(&gt);
            let _ = evaluate_task1(&gt, &t1, &EvalOptions::default());
            let _ = evaluate_task2(&gt, &t2, &EvalOptions::default());
        }
    }
}
