//! Detection quality metrics: precision, recall, F1, tightness and panoptic
//! quality, the harmonic H-PQ ranking score, and dataset statistics.

use std::collections::HashMap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::annotation::GroundTruthDataset;
use crate::error::{Error, Result};

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Match counts for one level plus every derived ratio.
///
/// All zero-denominator ratios are 0. `pq` equals `tightness * f1` whenever
/// `tp > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricBundle {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub iou_sum: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tightness: f64,
    pub pq: f64,
}

/// Raw counts, the unit that is summed across images.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            iou_sum: self.iou_sum + o.iou_sum,
        }
    }
}

impl MatchCounts {
    pub fn bundle(&self) -> Result<MetricBundle> {
        bundle_from_counts(self.tp, self.fp, self.fn_, self.iou_sum)
    }
}

pub fn bundle_from_counts(tp: u64, fp: u64, fn_: u64, iou_sum: f64) -> Result<MetricBundle> {
    let slack = 1e-9 * (tp as f64).max(1.0);
    if !iou_sum.is_finite() || iou_sum < 0.0 || iou_sum > tp as f64 + slack {
        return Err(Error::contract(format!(
            "iou_sum {iou_sum} must lie in [0, tp = {tp}]"
        )));
    }
    let (tpf, fpf, fnf) = (tp as f64, fp as f64, fn_ as f64);
    let precision = ratio(tpf, tpf + fpf);
    let recall = ratio(tpf, tpf + fnf);
    Ok(MetricBundle {
        tp,
        fp,
        fn_,
        iou_sum,
        precision,
        recall,
        f1: f1_score(precision, recall),
        tightness: ratio(iou_sum, tpf),
        pq: ratio(iou_sum, tpf + 0.5 * fpf + 0.5 * fnf),
    })
}

impl MetricBundle {
    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            iou_sum: self.iou_sum,
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// Harmonic mean of the word, line and paragraph PQ; 0 if any is 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HpqScore(pub f64);

impl HpqScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn h_pq(pq_word: f64, pq_line: f64, pq_paragraph: f64) -> HpqScore {
    let xs = [pq_word, pq_line, pq_paragraph];
    if xs.iter().any(|&x| x <= 0.0) {
        return HpqScore(0.0);
    }
    HpqScore(3.0 / xs.iter().map(|x| 1.0 / x).sum::<f64>())
}

/// Round to two decimals on the percent scale, halves away from zero.
///
/// `0.76852` becomes `76.85`.
pub fn percent_2dp(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}", percent_2dp(fraction))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::contract(format!(
            "pearson inputs differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::contract("pearson needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::contract("pearson input has zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Character counts over legible word transcriptions, sorted by descending
/// count and then by code point.
pub fn char_histogram(ds: &GroundTruthDataset) -> Vec<(char, u64)> {
    let mut counts: HashMap<char, u64> = HashMap::new();
    for word in ds.images().iter().flat_map(|i| i.words()).filter(|w| w.legible) {
        for c in word.text.chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut out: Vec<(char, u64)> = counts.into_iter().collect();
    out.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Mean number of words per image.
pub fn word_density(ds: &GroundTruthDataset) -> Result<f64> {
    if ds.images().is_empty() {
        return Err(Error::contract("word density of an empty dataset"));
    }
    Ok(ds.word_count() as f64 / ds.images().len() as f64)
}
