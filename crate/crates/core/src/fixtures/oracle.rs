//! Brute-force reference evaluator.
//!
//! Shares only the annotation types and the pixel-center rule with the main
//! pipeline: masks are dense boolean images, every IoU is computed, and the
//! greedy selection and don't-care filtering are written out separately.
//! Predictions for image ids missing from the ground truth are ignored.

use crate::annotation::{
    GroundTruthDataset, ImageAnnotation, Paragraph, Polygon, Task1Submission, Task2Submission, Word, WordPrediction,
};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Task1Report, Task2Report};
use crate::metrics::{h_pq, MatchCounts};

/// Largest image side the oracle accepts.
pub const ORACLE_MAX_SIDE: u32 = 512;
/// Largest number of instances (ground truth plus predictions) per image and level.
pub const ORACLE_MAX_INSTANCES: usize = 300;

#[derive(Clone)]
struct Dense {
    width: usize,
    pixels: Vec<bool>,
    /// Inclusive pixel box, `None` when empty.
    bbox: Option<(usize, usize, usize, usize)>,
    area: u64,
}

impl Dense {
    fn blank(width: usize, height: usize) -> Self {
        Dense {
            width,
            pixels: vec![false; width * height],
            bbox: None,
            area: 0,
        }
    }

    fn set(&mut self, x: usize, y: usize) {
        let p = &mut self.pixels[y * self.width + x];
        if !*p {
            *p = true;
            self.area += 1;
            self.bbox = Some(match self.bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }

    fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    fn union(parts: &[&Dense], width: usize, height: usize) -> Dense {
        let mut out = Dense::blank(width, height);
        for part in parts {
            if let Some((x0, y0, x1, y1)) = part.bbox {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if part.get(x, y) {
                            out.set(x, y);
                        }
                    }
                }
            }
        }
        out
    }
}

fn inside(poly: &Polygon, px: f64, py: f64) -> bool {
    let vs = poly.vertices();
    let mut odd = false;
    for k in 0..vs.len() {
        let a = vs[k];
        let b = vs[(k + 1) % vs.len()];
        let (t, u) = if a.y < b.y { (a, b) } else { (b, a) };
        if t.y == u.y || py < t.y || py >= u.y {
            continue;
        }
        if t.x + (py - t.y) * (u.x - t.x) / (u.y - t.y) <= px {
            odd = !odd;
        }
    }
    odd
}

/// Pixel indices whose centers can lie within `[lo, hi]`.
fn candidate_range(lo: f64, hi: f64, limit: usize) -> std::ops::Range<usize> {
    let clamp = |v: f64| v.clamp(0.0, limit as f64) as usize;
    clamp(lo.floor())..clamp(hi.ceil())
}

fn rasterize(poly: &Polygon, width: usize, height: usize) -> Dense {
    let mut out = Dense::blank(width, height);
    let (x0, y0, x1, y1) = poly.bounds();
    for y in candidate_range(y0, y1, height) {
        for x in candidate_range(x0, x1, width) {
            if inside(poly, x as f64 + 0.5, y as f64 + 0.5) {
                out.set(x, y);
            }
        }
    }
    out
}

fn iou(a: &Dense, b: &Dense) -> f64 {
    let (Some(ab), Some(bb)) = (a.bbox, b.bbox) else {
        return 0.0;
    };
    let (x0, y0) = (ab.0.max(bb.0), ab.1.max(bb.1));
    let (x1, y1) = (ab.2.min(bb.2), ab.3.min(bb.3));
    let mut inter = 0u64;
    if x0 <= x1 && y0 <= y1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if a.get(x, y) && b.get(x, y) {
                    inter += 1;
                }
            }
        }
    }
    let union = a.area + b.area - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn check_limits(ann: &ImageAnnotation, instances: usize) -> Result<()> {
    if ann.width > ORACLE_MAX_SIDE || ann.height > ORACLE_MAX_SIDE {
        return Err(Error::OracleLimit(format!(
            "{}: {}x{} exceeds {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}",
            ann.image_id, ann.width, ann.height
        )));
    }
    if instances > ORACLE_MAX_INSTANCES {
        return Err(Error::OracleLimit(format!(
            "{}: {instances} instances exceeds {ORACLE_MAX_INSTANCES}",
            ann.image_id
        )));
    }
    Ok(())
}

fn passes(value: f64, opts: &EvalOptions) -> bool {
    if opts.inclusive_threshold {
        value >= opts.iou_threshold
    } else {
        value > opts.iou_threshold
    }
}

/// Greedy matching over an explicit IoU table, then don't-care removal.
fn score(preds: &[Dense], gts: &[Dense], dontcare: &[Dense], gate: &dyn Fn(usize, usize) -> bool, opts: &EvalOptions) -> MatchCounts {
    let mut table: Vec<(f64, usize, usize)> = Vec::new();
    for (g, gm) in gts.iter().enumerate() {
        for (p, pm) in preds.iter().enumerate() {
            let v = iou(pm, gm);
            if passes(v, opts) && gate(p, g) {
                table.push((v, g, p));
            }
        }
    }
    // Highest IoU first; among equals, lowest gt index, then lowest pred index.
    table.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_taken = vec![false; gts.len()];
    let mut pred_taken = vec![false; preds.len()];
    let mut counts = MatchCounts::default();
    for (v, g, p) in table {
        if gt_taken[g] || pred_taken[p] {
            continue;
        }
        gt_taken[g] = true;
        pred_taken[p] = true;
        counts.tp += 1;
        counts.iou_sum += v;
    }
    counts.fn_ = gt_taken.iter().filter(|t| !**t).count() as u64;
    for (p, pm) in preds.iter().enumerate() {
        if pred_taken[p] {
            continue;
        }
        let ignored = dontcare.iter().any(|d| iou(pm, d) > opts.dontcare_threshold);
        if !ignored {
            counts.fp += 1;
        }
    }
    counts
}

struct GtCluster {
    evaluated: Vec<Dense>,
    dontcare: Vec<Dense>,
}

fn gt_cluster(words: &[(&Word, &Dense)], w: usize, h: usize, propagate: bool, out: &mut GtCluster) {
    let pick = |legible_only: bool| -> Dense {
        let parts: Vec<&Dense> = words.iter().filter(|(wd, _)| !legible_only || wd.legible).map(|(_, m)| *m).collect();
        Dense::union(&parts, w, h)
    };
    let any_legible = words.iter().any(|(wd, _)| wd.legible);
    let (mask, is_dontcare) = if !propagate {
        (pick(false), false)
    } else if any_legible {
        (pick(true), false)
    } else {
        (pick(false), true)
    };
    if mask.area == 0 {
        return;
    }
    if is_dontcare {
        out.dontcare.push(mask);
    } else {
        out.evaluated.push(mask);
    }
}

fn oracle_task1_image(ann: &ImageAnnotation, preds: &[Paragraph], opts: &EvalOptions) -> Result<[MatchCounts; 3]> {
    let (w, h) = (ann.width as usize, ann.height as usize);
    let gt_words = ann.word_count();
    let pred_words: usize = preds.iter().map(|p| p.words().count()).sum();
    check_limits(ann, gt_words + pred_words)?;

    let mut levels: [GtCluster; 3] = std::array::from_fn(|_| GtCluster {
        evaluated: Vec::new(),
        dontcare: Vec::new(),
    });
    for para in &ann.paragraphs {
        let rasters: Vec<Vec<Dense>> = para
            .lines
            .iter()
            .map(|l| l.words.iter().map(|wd| rasterize(&wd.polygon, w, h)).collect())
            .collect();
        let mut para_words: Vec<(&Word, &Dense)> = Vec::new();
        for (line, masks) in para.lines.iter().zip(&rasters) {
            let pairs: Vec<(&Word, &Dense)> = line.words.iter().zip(masks).collect();
            for (wd, m) in &pairs {
                if m.area == 0 {
                    continue;
                }
                if wd.legible {
                    levels[0].evaluated.push((*m).clone());
                } else {
                    levels[0].dontcare.push((*m).clone());
                }
            }
            gt_cluster(&pairs, w, h, opts.task1_dontcare_propagation, &mut levels[1]);
            para_words.extend(pairs);
        }
        gt_cluster(&para_words, w, h, opts.task1_dontcare_propagation, &mut levels[2]);
    }

    let mut pred_levels: [Vec<Dense>; 3] = Default::default();
    for para in preds {
        let mut para_parts: Vec<Dense> = Vec::new();
        for line in &para.lines {
            let words: Vec<Dense> = line.words.iter().map(|wd| rasterize(&wd.polygon, w, h)).collect();
            let refs: Vec<&Dense> = words.iter().collect();
            let line_mask = Dense::union(&refs, w, h);
            para_parts.push(line_mask.clone());
            pred_levels[0].extend(words.into_iter().filter(|m| m.area > 0));
            if line_mask.area > 0 {
                pred_levels[1].push(line_mask);
            }
        }
        let refs: Vec<&Dense> = para_parts.iter().collect();
        let para_mask = Dense::union(&refs, w, h);
        if para_mask.area > 0 {
            pred_levels[2].push(para_mask);
        }
    }
    let always = |_: usize, _: usize| true;
    Ok(std::array::from_fn(|i| score(&pred_levels[i], &levels[i].evaluated, &levels[i].dontcare, &always, opts)))
}

fn oracle_task2_image(ann: &ImageAnnotation, preds: &[WordPrediction], opts: &EvalOptions) -> Result<MatchCounts> {
    let (w, h) = (ann.width as usize, ann.height as usize);
    check_limits(ann, ann.word_count() + preds.len())?;
    let mut gts = Vec::new();
    let mut gt_text = Vec::new();
    let mut dontcare = Vec::new();
    for wd in ann.words() {
        let m = rasterize(&wd.polygon, w, h);
        if m.area == 0 {
            continue;
        }
        if wd.legible {
            gts.push(m);
            gt_text.push(wd.text.as_str());
        } else {
            dontcare.push(m);
        }
    }
    let mut masks = Vec::new();
    let mut text = Vec::new();
    for p in preds {
        let m = rasterize(&p.polygon, w, h);
        if m.area > 0 {
            masks.push(m);
            text.push(p.text.as_str());
        }
    }
    let gate = |p: usize, g: usize| text[p] == gt_text[g];
    Ok(score(&masks, &gts, &dontcare, &gate, opts))
}

fn sorted_images(gt: &GroundTruthDataset) -> Vec<&ImageAnnotation> {
    let mut images: Vec<&ImageAnnotation> = gt.images().iter().collect();
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    images
}

/// Same report as [`crate::eval::evaluate_task1`], without a per-image breakdown.
pub fn oracle_evaluate_task1(gt: &GroundTruthDataset, sub: &Task1Submission, opts: &EvalOptions) -> Result<Task1Report> {
    let mut total = [MatchCounts::default(); 3];
    let images = sorted_images(gt);
    for ann in &images {
        let preds = sub.images.get(&ann.image_id).map_or(&[][..], Vec::as_slice);
        let counts = oracle_task1_image(ann, preds, opts)?;
        for (t, c) in total.iter_mut().zip(counts) {
            *t = *t + c;
        }
    }
    let [word, line, paragraph] = [total[0].bundle()?, total[1].bundle()?, total[2].bundle()?];
    Ok(Task1Report {
        images: images.len(),
        hpq: h_pq(word.pq, line.pq, paragraph.pq),
        word,
        line,
        paragraph,
        per_image: None,
    })
}

/// Same report as [`crate::eval::evaluate_task2`], without a per-image breakdown.
pub fn oracle_evaluate_task2(gt: &GroundTruthDataset, sub: &Task2Submission, opts: &EvalOptions) -> Result<Task2Report> {
    let mut total = MatchCounts::default();
    let images = sorted_images(gt);
    for ann in &images {
        let preds = sub.images.get(&ann.image_id).map_or(&[][..], Vec::as_slice);
        total = total + oracle_task2_image(ann, preds, opts)?;
    }
    Ok(Task2Report {
        images: images.len(),
        word: total.bundle()?,
        per_image: None,
    })
}
