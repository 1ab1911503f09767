//! End-to-end evaluation of the two competition tasks.
//!
//! Task 1 scores a predicted paragraph/line/word forest as three instance
//! segmentation problems and ranks by H-PQ. Task 2 scores transcribed word
//! polygons, where a true positive also needs the exact (case-sensitive)
//! transcription, and ranks by F1.
//!
//! Counts are pooled over the whole dataset. Images are processed in
//! `image_id` order and reduced sequentially, so the result does not depend
//! on the worker count.

mod levels;
mod report;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

pub use levels::{
    build_ground_truth_instances, build_predicted_instances, ground_truth_levels, image_grid,
    predicted_levels, Level, LevelInstances,
};
pub use report::{report_to_json, LevelTriple, Task1Report, Task2Report};

use crate::annotation::{
    parse_ground_truth, parse_task1_submission, parse_task2_submission, GroundTruthDataset,
    ImageAnnotation, Paragraph, Task1Submission, Task2Submission, WordPrediction,
};
use crate::error::{Error, Result};
use crate::geometry::{rasterize_polygon, RleMask};
use crate::matching::{filter_dontcare, greedy_match, IouThreshold};
use crate::metrics::{h_pq, MatchCounts};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    /// `iou >= threshold` when true, `iou > threshold` otherwise.
    pub inclusive_threshold: bool,
    /// Predictions with IoU strictly above this against a don't-care region
    /// are discarded.
    pub dontcare_threshold: f64,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub per_image_breakdown: bool,
    /// Unknown image ids are an error when set, dropped with a warning when not.
    pub strict: bool,
    /// Treat all-illegible lines and paragraphs as don't-care in Task 1.
    pub task1_dontcare_propagation: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            inclusive_threshold: true,
            dontcare_threshold: 0.5,
            parallelism: 0,
            per_image_breakdown: false,
            strict: true,
            task1_dontcare_propagation: true,
        }
    }
}

impl EvalOptions {
    fn match_threshold(&self) -> Result<IouThreshold> {
        IouThreshold::new(self.iou_threshold, self.inclusive_threshold)
    }

    fn validate(&self) -> Result<()> {
        self.match_threshold()?;
        if !(self.dontcare_threshold > 0.0 && self.dontcare_threshold <= 1.0) {
            return Err(Error::contract(format!(
                "don't-care threshold {} outside (0, 1]",
                self.dontcare_threshold
            )));
        }
        Ok(())
    }
}

/// Matches one level and applies don't-care filtering to the leftovers.
fn score_level(
    preds: &[RleMask],
    gt: &LevelInstances,
    opts: &EvalOptions,
    text_gate: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<MatchCounts> {
    let m = greedy_match(preds, &gt.masks, opts.match_threshold()?, text_gate)?;
    let leftovers: Vec<&RleMask> = m.unmatched_preds.iter().map(|&i| &preds[i]).collect();
    let split = filter_dontcare(&leftovers, &gt.dontcare_masks, opts.dontcare_threshold)?;
    Ok(MatchCounts {
        tp: m.pairs.len() as u64,
        fp: split.kept.len() as u64,
        fn_: m.unmatched_gts.len() as u64,
        iou_sum: m.iou_sum,
    })
}

pub fn evaluate_task1_image(
    ann: &ImageAnnotation,
    preds: &[Paragraph],
    opts: &EvalOptions,
) -> Result<[MatchCounts; 3]> {
    let gt = ground_truth_levels(ann, opts.task1_dontcare_propagation)?;
    let pred = predicted_levels(&ann.image_id, preds, image_grid(ann)?)?;
    Ok([
        score_level(&pred[0].masks, &gt[0], opts, None)?,
        score_level(&pred[1].masks, &gt[1], opts, None)?,
        score_level(&pred[2].masks, &gt[2], opts, None)?,
    ])
}

pub fn evaluate_task2_image(
    ann: &ImageAnnotation,
    preds: &[WordPrediction],
    opts: &EvalOptions,
) -> Result<MatchCounts> {
    let grid = image_grid(ann)?;
    let mut gt = LevelInstances {
        level: Level::Word,
        masks: Vec::new(),
        dontcare_masks: Vec::new(),
    };
    let mut gt_text: Vec<&str> = Vec::new();
    for w in ann.words() {
        let mask = rasterize_polygon(&w.polygon, grid);
        if mask.is_empty() {
            log::warn!("{}: dropping ground-truth word with an empty mask", ann.image_id);
        } else if w.legible {
            gt.masks.push(mask);
            gt_text.push(&w.text);
        } else {
            gt.dontcare_masks.push(mask);
        }
    }
    let mut pred_masks = Vec::with_capacity(preds.len());
    let mut pred_text: Vec<&str> = Vec::with_capacity(preds.len());
    for p in preds {
        let mask = rasterize_polygon(&p.polygon, grid);
        if mask.is_empty() {
            log::warn!("{}: dropping predicted word with an empty mask", ann.image_id);
        } else {
            pred_masks.push(mask);
            pred_text.push(&p.text);
        }
    }
    let same_text = |p: usize, g: usize| pred_text[p] == gt_text[g];
    score_level(&pred_masks, &gt, opts, Some(&same_text))
}

/// Pairs every ground-truth image (sorted by id) with its predictions,
/// applying the strict/lenient rule to ids the ground truth does not know.
fn align<'a, P>(
    gt: &'a GroundTruthDataset,
    sub: &'a BTreeMap<String, Vec<P>>,
    strict: bool,
) -> Result<Vec<(&'a ImageAnnotation, &'a [P])>> {
    let by_id: HashMap<&str, &ImageAnnotation> =
        gt.images().iter().map(|i| (i.image_id.as_str(), i)).collect();
    let unknown: Vec<String> = sub.keys().filter(|k| !by_id.contains_key(k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        if strict {
            return Err(Error::UnknownImages(unknown));
        }
        for id in &unknown {
            log::warn!("dropping predictions for unknown image {id:?}");
        }
    }
    let mut images: Vec<&ImageAnnotation> = gt.images().iter().collect();
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(images
        .into_iter()
        .map(|img| (img, sub.get(&img.image_id).map_or(&[][..], Vec::as_slice)))
        .collect())
}

fn run_parallel<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

pub fn evaluate_task1(
    gt: &GroundTruthDataset,
    sub: &Task1Submission,
    opts: &EvalOptions,
) -> Result<Task1Report> {
    opts.validate()?;
    let jobs = align(gt, &sub.images, opts.strict)?;
    let per_image = run_parallel(&jobs, opts.parallelism, |(ann, preds)| {
        evaluate_task1_image(ann, preds, opts)
    })?;

    let mut total = [MatchCounts::default(); 3];
    for counts in &per_image {
        for (t, c) in total.iter_mut().zip(counts) {
            *t = *t + *c;
        }
    }
    let [word, line, paragraph] = [total[0].bundle()?, total[1].bundle()?, total[2].bundle()?];
    let breakdown = if opts.per_image_breakdown {
        let mut map = BTreeMap::new();
        for ((ann, _), c) in jobs.iter().zip(&per_image) {
            map.insert(
                ann.image_id.clone(),
                LevelTriple {
                    word: c[0].bundle()?,
                    line: c[1].bundle()?,
                    paragraph: c[2].bundle()?,
                },
            );
        }
        Some(map)
    } else {
        None
    };
    Ok(Task1Report {
        images: jobs.len(),
        hpq: h_pq(word.pq, line.pq, paragraph.pq),
        word,
        line,
        paragraph,
        per_image: breakdown,
    })
}

pub fn evaluate_task2(
    gt: &GroundTruthDataset,
    sub: &Task2Submission,
    opts: &EvalOptions,
) -> Result<Task2Report> {
    opts.validate()?;
    let jobs = align(gt, &sub.images, opts.strict)?;
    let per_image = run_parallel(&jobs, opts.parallelism, |(ann, preds)| {
        evaluate_task2_image(ann, preds, opts)
    })?;
    let total = per_image.iter().fold(MatchCounts::default(), |acc, c| acc + *c);
    let breakdown = if opts.per_image_breakdown {
        let mut map = BTreeMap::new();
        for ((ann, _), c) in jobs.iter().zip(&per_image) {
            map.insert(ann.image_id.clone(), c.bundle()?);
        }
        Some(map)
    } else {
        None
    };
    Ok(Task2Report {
        images: jobs.len(),
        word: total.bundle()?,
        per_image: breakdown,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// File-path entry point for host-language wrappers and the CLI.
pub fn evaluate_task1_file(gt_path: &Path, sub_path: &Path, opts: &EvalOptions) -> Result<Task1Report> {
    let gt = parse_ground_truth(&read(gt_path)?)?;
    let sub = parse_task1_submission(&read(sub_path)?)?;
    evaluate_task1(&gt, &sub, opts)
}

pub fn evaluate_task2_file(gt_path: &Path, sub_path: &Path, opts: &EvalOptions) -> Result<Task2Report> {
    let gt = parse_ground_truth(&read(gt_path)?)?;
    let sub = parse_task2_submission(&read(sub_path)?)?;
    evaluate_task2(&gt, &sub, opts)
}
