use serde::{Deserialize, Serialize};

use crate::annotation::{ImageAnnotation, Paragraph, Word};
use crate::error::Result;
use crate::geometry::{mask_union, rasterize_polygon, Grid, RleMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Line,
    Paragraph,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Word, Level::Line, Level::Paragraph];

    pub fn name(self) -> &'static str {
        match self {
            Level::Word => "word",
            Level::Line => "line",
            Level::Paragraph => "paragraph",
        }
    }
}

/// Instances to score at one level of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelInstances {
    pub level: Level,
    pub masks: Vec<RleMask>,
    pub dontcare_masks: Vec<RleMask>,
}

impl LevelInstances {
    fn new(level: Level) -> Self {
        LevelInstances {
            level,
            masks: Vec::new(),
            dontcare_masks: Vec::new(),
        }
    }
}

fn warn_empty(image_id: &str, what: &str, level: Level) {
    log::warn!("{image_id}: dropping {what} {} with an empty mask", level.name());
}

struct RasterWord {
    mask: RleMask,
    legible: bool,
}

fn rasterize_words(words: &[Word], grid: Grid) -> Vec<RasterWord> {
    words
        .iter()
        .map(|w| RasterWord {
            mask: rasterize_polygon(&w.polygon, grid),
            legible: w.legible,
        })
        .collect()
}

/// Evaluated and don't-care masks for a cluster of words.
///
/// With propagation on, the evaluated mask is the union of the legible words
/// only, and a cluster with no legible word becomes a don't-care region.
/// Without it, legibility is ignored above the word level.
fn cluster_masks(
    words: &[&RasterWord],
    grid: Grid,
    propagate: bool,
) -> Result<(Option<RleMask>, Option<RleMask>)> {
    let nonempty = |m: RleMask| (!m.is_empty()).then_some(m);
    if !propagate {
        let all: Vec<&RleMask> = words.iter().map(|w| &w.mask).collect();
        return Ok((nonempty(mask_union(grid, &all)?), None));
    }
    let legible: Vec<&RleMask> = words.iter().filter(|w| w.legible).map(|w| &w.mask).collect();
    if !legible.is_empty() {
        return Ok((nonempty(mask_union(grid, &legible)?), None));
    }
    let all: Vec<&RleMask> = words.iter().map(|w| &w.mask).collect();
    Ok((None, nonempty(mask_union(grid, &all)?)))
}

pub fn image_grid(ann: &ImageAnnotation) -> Result<Grid> {
    Grid::new(ann.width, ann.height)
}

/// Ground-truth instances for all three levels of one image.
///
/// Illegible words are don't-care at the word level. Line and paragraph
/// clusters follow [`cluster_masks`]. Entities whose mask is empty (zero area
/// or entirely outside the image) are dropped with a warning.
pub fn ground_truth_levels(ann: &ImageAnnotation, propagate_dontcare: bool) -> Result<[LevelInstances; 3]> {
    let grid = image_grid(ann)?;
    let mut word = LevelInstances::new(Level::Word);
    let mut line = LevelInstances::new(Level::Line);
    let mut paragraph = LevelInstances::new(Level::Paragraph);
    for para in &ann.paragraphs {
        let mut para_words: Vec<RasterWord> = Vec::new();
        for l in &para.lines {
            let raster = rasterize_words(&l.words, grid);
            for w in &raster {
                if w.mask.is_empty() {
                    warn_empty(&ann.image_id, "ground-truth", Level::Word);
                } else if w.legible {
                    word.masks.push(w.mask.clone());
                } else {
                    word.dontcare_masks.push(w.mask.clone());
                }
            }
            let refs: Vec<&RasterWord> = raster.iter().collect();
            push_cluster(&mut line, cluster_masks(&refs, grid, propagate_dontcare)?, &ann.image_id);
            para_words.extend(raster);
        }
        let refs: Vec<&RasterWord> = para_words.iter().collect();
        push_cluster(&mut paragraph, cluster_masks(&refs, grid, propagate_dontcare)?, &ann.image_id);
    }
    Ok([word, line, paragraph])
}

fn push_cluster(
    out: &mut LevelInstances,
    (evaluated, dontcare): (Option<RleMask>, Option<RleMask>),
    image_id: &str,
) {
    match (evaluated, dontcare) {
        (Some(m), _) => out.masks.push(m),
        (None, Some(d)) => out.dontcare_masks.push(d),
        (None, None) => warn_empty(image_id, "ground-truth", out.level),
    }
}

/// Predicted instances for all three levels, built with the same union rule
/// as ground truth. Predictions have no don't-care regions.
pub fn predicted_levels(image_id: &str, paragraphs: &[Paragraph], grid: Grid) -> Result<[LevelInstances; 3]> {
    let mut word = LevelInstances::new(Level::Word);
    let mut line = LevelInstances::new(Level::Line);
    let mut paragraph = LevelInstances::new(Level::Paragraph);
    let keep = |out: &mut LevelInstances, m: RleMask| {
        if m.is_empty() {
            warn_empty(image_id, "predicted", out.level);
        } else {
            out.masks.push(m);
        }
    };
    for para in paragraphs {
        let mut line_masks = Vec::with_capacity(para.lines.len());
        for l in &para.lines {
            let masks: Vec<RleMask> = l.words.iter().map(|w| rasterize_polygon(&w.polygon, grid)).collect();
            let refs: Vec<&RleMask> = masks.iter().collect();
            line_masks.push(mask_union(grid, &refs)?);
            for m in masks {
                keep(&mut word, m);
            }
        }
        let refs: Vec<&RleMask> = line_masks.iter().collect();
        let para_mask = mask_union(grid, &refs)?;
        for m in line_masks {
            keep(&mut line, m);
        }
        keep(&mut paragraph, para_mask);
    }
    Ok([word, line, paragraph])
}

/// Instances of a single level; see [`ground_truth_levels`].
pub fn build_ground_truth_instances(ann: &ImageAnnotation, level: Level, propagate_dontcare: bool) -> Result<LevelInstances> {
    let [w, l, p] = ground_truth_levels(ann, propagate_dontcare)?;
    Ok(match level {
        Level::Word => w,
        Level::Line => l,
        Level::Paragraph => p,
    })
}

/// Instances of a single level; see [`predicted_levels`].
pub fn build_predicted_instances(paragraphs: &[Paragraph], grid: Grid, level: Level) -> Result<LevelInstances> {
    let [w, l, p] = predicted_levels("<prediction>", paragraphs, grid)?;
    Ok(match level {
        Level::Word => w,
        Level::Line => l,
        Level::Paragraph => p,
    })
}
