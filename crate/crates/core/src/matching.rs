//! One-to-one greedy matching of predictions to ground truth by mask IoU,
//! and removal of predictions that land on don't-care regions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersection_area, iou_from_areas, RleMask};

/// IoU acceptance test, either `iou >= value` or `iou > value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouThreshold {
    pub value: f64,
    pub inclusive: bool,
}

impl IouThreshold {
    pub fn new(value: f64, inclusive: bool) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::contract(format!("IoU threshold {value} outside (0, 1]")));
        }
        Ok(IouThreshold { value, inclusive })
    }

    pub fn inclusive(value: f64) -> Result<Self> {
        IouThreshold::new(value, true)
    }

    pub fn strict(value: f64) -> Result<Self> {
        IouThreshold::new(value, false)
    }

    pub fn admits(&self, iou: f64) -> bool {
        if self.inclusive {
            iou >= self.value
        } else {
            iou > self.value
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub pred_index: usize,
    pub gt_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
    pub iou_sum: f64,
}

/// Precomputed area and bounds so most non-overlapping pairs are rejected
/// without walking runs.
struct Footprint<'a> {
    mask: &'a RleMask,
    area: u64,
    bounds: Option<(u32, u32, u32, u32)>,
}

impl<'a> Footprint<'a> {
    fn new(mask: &'a RleMask) -> Self {
        Footprint {
            mask,
            area: mask.area(),
            bounds: mask.bounds(),
        }
    }

    fn overlaps(&self, other: &Footprint) -> bool {
        match (self.bounds, other.bounds) {
            (Some((ax0, ay0, ax1, ay1)), Some((bx0, by0, bx1, by1))) => {
                ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1
            }
            _ => false,
        }
    }
}

fn check_grids(preds: &[RleMask], gts: &[RleMask]) -> Result<()> {
    let mut grids = preds.iter().chain(gts).map(RleMask::grid);
    if let Some(first) = grids.next() {
        if grids.any(|g| g != first) {
            return Err(Error::contract("masks to match are not on one grid"));
        }
    }
    Ok(())
}

/// Greedy one-to-one matching.
///
/// A `(pred, gt)` pair is a candidate when `threshold` admits its IoU and
/// `text_gate`, if given, accepts it. Candidates are taken by descending IoU,
/// ties broken by smaller gt index and then smaller pred index, skipping any
/// pair whose prediction or ground truth is already matched.
pub fn greedy_match(
    preds: &[RleMask],
    gts: &[RleMask],
    threshold: IouThreshold,
    text_gate: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<MatchResult> {
    check_grids(preds, gts)?;
    let pf: Vec<Footprint> = preds.iter().map(Footprint::new).collect();
    let gf: Vec<Footprint> = gts.iter().map(Footprint::new).collect();

    let mut candidates: Vec<MatchPair> = Vec::new();
    for (gi, g) in gf.iter().enumerate() {
        for (pi, p) in pf.iter().enumerate() {
            if !p.overlaps(g) {
                continue;
            }
            // IoU can never exceed the area ratio.
            let (lo, hi) = (p.area.min(g.area), p.area.max(g.area));
            if !threshold.admits(lo as f64 / hi as f64) {
                continue;
            }
            if let Some(gate) = text_gate {
                if !gate(pi, gi) {
                    continue;
                }
            }
            let inter = intersection_area(p.mask, g.mask)?;
            let iou = iou_from_areas(inter, p.area, g.area);
            if threshold.admits(iou) {
                candidates.push(MatchPair {
                    pred_index: pi,
                    gt_index: gi,
                    iou,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap_or(Ordering::Equal)
            .then(a.gt_index.cmp(&b.gt_index))
            .then(a.pred_index.cmp(&b.pred_index))
    });

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut iou_sum = 0.0;
    for c in candidates {
        if pred_used[c.pred_index] || gt_used[c.gt_index] {
            continue;
        }
        pred_used[c.pred_index] = true;
        gt_used[c.gt_index] = true;
        iou_sum += c.iou;
        pairs.push(c);
    }
    Ok(MatchResult {
        pairs,
        unmatched_preds: (0..preds.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_gts: (0..gts.len()).filter(|&i| !gt_used[i]).collect(),
        iou_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DontCareSplit {
    /// Positions (into the filtered list) that remain false positives.
    pub kept: Vec<usize>,
    /// Positions discarded because they cover a don't-care region.
    pub removed: Vec<usize>,
}

/// Removes predictions whose best IoU against any don't-care mask is
/// strictly greater than `threshold`.
pub fn filter_dontcare(
    unmatched_preds: &[&RleMask],
    dontcare: &[RleMask],
    threshold: f64,
) -> Result<DontCareSplit> {
    let dc: Vec<Footprint> = dontcare.iter().map(Footprint::new).collect();
    let mut split = DontCareSplit::default();
    for (i, &mask) in unmatched_preds.iter().enumerate() {
        let p = Footprint::new(mask);
        let mut best = 0.0f64;
        for d in dc.iter().filter(|d| p.overlaps(d)) {
            if d.mask.grid() != mask.grid() {
                return Err(Error::contract("don't-care mask on a different grid"));
            }
            let inter = intersection_area(mask, d.mask)?;
            best = best.max(iou_from_areas(inter, p.area, d.area));
        }
        if best > threshold {
            split.removed.push(i);
        } else {
            split.kept.push(i);
        }
    }
    Ok(split)
}
