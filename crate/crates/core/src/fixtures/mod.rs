//! Deterministic synthetic scenes with controlled detector noise, and a dense
//! brute-force evaluator used to cross-check the main pipeline.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Stream 0 drives the ground-truth layout and stream
//! 1 drives the noise, so changing noise settings never moves ground truth.
//!
//! Scenes contain geometry and strings only. Words are quarter-pixel
//! quadrilaterals, optionally rotated a few degrees about their center.
//! Words of a line share a baseline, lines of a paragraph are stacked, and
//! paragraphs are placed without overlapping each other.

mod oracle;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use oracle::{oracle_evaluate_task1, oracle_evaluate_task2, ORACLE_MAX_INSTANCES, ORACLE_MAX_SIDE};

use crate::annotation::{
    to_json_bytes, GroundTruthDataset, ImageAnnotation, Line, Paragraph, Polygon, Task1Submission,
    Task2Submission, Vertex, Word, WordPrediction,
};
use crate::error::{Error, Result};

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub min: u32,
    pub max: u32,
}

impl Span {
    pub const fn new(min: u32, max: u32) -> Self {
        Span { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Each vertex coordinate moves by up to this many pixels.
    pub jitter_px: f64,
    pub drop_prob: f64,
    /// Chance, per legible ground-truth word, of adding one hallucinated word.
    pub spurious_prob: f64,
    /// Chance of merging each line into the previous one in Task 1 output.
    pub merge_line_prob: f64,
    pub case_flip_prob: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            jitter_px: 0.0,
            drop_prob: 0.0,
            spurious_prob: 0.0,
            merge_line_prob: 0.0,
            case_flip_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub image_count: usize,
    pub width: u32,
    pub height: u32,
    pub paragraphs_per_image: Span,
    pub lines_per_paragraph: Span,
    pub words_per_line: Span,
    pub word_width: Span,
    pub word_height: Span,
    pub max_rotation_deg: f64,
    pub illegible_fraction: f64,
    pub noise: NoiseConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            image_count: 4,
            width: 256,
            height: 256,
            paragraphs_per_image: Span::new(1, 3),
            lines_per_paragraph: Span::new(1, 3),
            words_per_line: Span::new(1, 4),
            word_width: Span::new(10, 30),
            word_height: Span::new(8, 14),
            max_rotation_deg: 3.0,
            illegible_fraction: 0.1,
            noise: NoiseConfig::default(),
        }
    }
}

impl SceneConfig {
    fn validate(&self) -> Result<()> {
        let spans = [
            ("paragraphs_per_image", self.paragraphs_per_image),
            ("lines_per_paragraph", self.lines_per_paragraph),
            ("words_per_line", self.words_per_line),
            ("word_width", self.word_width),
            ("word_height", self.word_height),
        ];
        for (name, s) in spans {
            if s.min > s.max {
                return Err(Error::contract(format!("{name} range {}..={} is empty", s.min, s.max)));
            }
        }
        if self.lines_per_paragraph.min == 0 || self.words_per_line.min == 0 {
            return Err(Error::contract("lines and paragraphs cannot be empty"));
        }
        if self.word_width.min == 0 || self.word_height.min < 2 {
            return Err(Error::contract("word sizes must be at least 1x2 pixels"));
        }
        let n = &self.noise;
        let probs = [
            self.illegible_fraction,
            n.drop_prob,
            n.spurious_prob,
            n.merge_line_prob,
            n.case_flip_prob,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::contract("probabilities must lie in [0, 1]"));
        }
        if !(n.jitter_px >= 0.0 && n.jitter_px.is_finite()) || !(0.0..=45.0).contains(&self.max_rotation_deg) {
            return Err(Error::contract("jitter must be finite and non-negative, rotation within 45 degrees"));
        }
        crate::geometry::Grid::new(self.width, self.height)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceTag {
    Copied,
    Jittered,
    DroppedGt,
    Spurious,
    Merged,
    CaseFlipped,
}

/// Position of a word in an image's paragraph/line/word forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPath {
    pub paragraph: usize,
    pub line: usize,
    pub word: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub image_id: String,
    /// Index into the image's Task 2 word list; the Task 1 forest flattened
    /// in order has the same words. `None` for dropped ground truth.
    pub prediction: Option<usize>,
    pub source: Option<WordPath>,
    pub tags: Vec<ProvenanceTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureBundle {
    pub gt: GroundTruthDataset,
    pub task1: Task1Submission,
    pub task2: Task2Submission,
    pub provenance: Vec<ProvenanceEntry>,
}

impl FixtureBundle {
    /// Writes `gt.json`, `task1.json`, `task2.json` and `provenance.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("gt.json", to_json_bytes(&self.gt)),
            ("task1.json", to_json_bytes(&self.task1)),
            ("task2.json", to_json_bytes(&self.task2)),
            ("provenance.json", to_json_bytes(&self.provenance)),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

const CASED: &[char] = &[
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'K', 'M', 'N', 'P', 'R', 'S', 'T', 'W', 'a', 'b', 'c',
    'd', 'e', 'f', 'g', 'h', 'k', 'm', 'n', 'p', 'r', 's', 't', 'w', 'Ω', 'λ', 'Ж', 'я', 'É', 'ñ',
];
const OTHER: &[char] = &['0', '1', '2', '5', '7', '9', '.', ',', '-', '!', '\'', '&', '%'];

fn random_text(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..=8);
    let mut s = String::with_capacity(len * 2);
    s.push(*CASED.choose(rng).expect("non-empty"));
    for _ in 1..len {
        let pool = if rng.gen_bool(0.75) { CASED } else { OTHER };
        s.push(*pool.choose(rng).expect("non-empty"));
    }
    s
}

/// Swaps the case of every cased character.
pub fn flip_case(text: &str) -> String {
    text.chars()
        .flat_map(|c| {
            if c.is_lowercase() {
                c.to_uppercase().collect::<Vec<_>>()
            } else {
                c.to_lowercase().collect::<Vec<_>>()
            }
        })
        .collect()
}

fn quantize(v: f64) -> f64 {
    (v * 4.0).round() / 4.0
}

fn word_polygon(x: f64, y: f64, w: f64, h: f64, angle: f64) -> Polygon {
    let (cx, cy) = (x + w / 2.0, y + h / 2.0);
    let (sin, cos) = angle.sin_cos();
    let corners = [(-w / 2.0, -h / 2.0), (w / 2.0, -h / 2.0), (w / 2.0, h / 2.0), (-w / 2.0, h / 2.0)];
    let vertices = corners
        .iter()
        .map(|&(dx, dy)| Vertex::new(quantize(cx + dx * cos - dy * sin), quantize(cy + dx * sin + dy * cos)))
        .collect();
    Polygon::new(vertices).expect("four finite vertices")
}

struct Rect {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl Rect {
    fn overlaps(&self, o: &Rect, margin: u32) -> bool {
        self.x0 < o.x1 + margin && o.x0 < self.x1 + margin && self.y0 < o.y1 + margin && o.y0 < self.y1 + margin
    }
}

const EDGE_MARGIN: u32 = 3;
const PARAGRAPH_GAP: u32 = 6;
const PLACEMENT_ATTEMPTS: usize = 400;

fn generate_image(cfg: &SceneConfig, index: usize, rng: &mut ChaCha8Rng) -> Result<ImageAnnotation> {
    let image_id = format!("img_{index:05}");
    let mut placed: Vec<Rect> = Vec::new();
    let mut paragraphs = Vec::new();
    let max_angle = cfg.max_rotation_deg.to_radians();
    for _ in 0..cfg.paragraphs_per_image.sample(rng) {
        let h = cfg.word_height.sample(rng);
        let word_gap = (h / 3).max(3);
        let line_gap = (h / 2).max(4);
        let lines: Vec<Vec<u32>> = (0..cfg.lines_per_paragraph.sample(rng))
            .map(|_| (0..cfg.words_per_line.sample(rng)).map(|_| cfg.word_width.sample(rng)).collect())
            .collect();
        let line_width = |ws: &Vec<u32>| ws.iter().sum::<u32>() + word_gap * (ws.len() as u32 - 1);
        let pw = lines.iter().map(line_width).max().unwrap_or(0);
        let ph = lines.len() as u32 * h + (lines.len() as u32 - 1) * line_gap;
        if pw + 2 * EDGE_MARGIN > cfg.width || ph + 2 * EDGE_MARGIN > cfg.height {
            return Err(Error::Generation(format!(
                "{image_id}: paragraph of {pw}x{ph} px does not fit a {}x{} grid",
                cfg.width, cfg.height
            )));
        }
        let spot = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let x0 = rng.gen_range(EDGE_MARGIN..=cfg.width - pw - EDGE_MARGIN);
            let y0 = rng.gen_range(EDGE_MARGIN..=cfg.height - ph - EDGE_MARGIN);
            let r = Rect {
                x0,
                y0,
                x1: x0 + pw,
                y1: y0 + ph,
            };
            (!placed.iter().any(|p| p.overlaps(&r, PARAGRAPH_GAP))).then_some(r)
        });
        let Some(rect) = spot else {
            return Err(Error::Generation(format!(
                "{image_id}: no room for paragraph {} of {pw}x{ph} px",
                paragraphs.len()
            )));
        };
        let mut out_lines = Vec::with_capacity(lines.len());
        for (li, widths) in lines.iter().enumerate() {
            let y = f64::from(rect.y0 + li as u32 * (h + line_gap));
            let mut x = rect.x0;
            let mut words = Vec::with_capacity(widths.len());
            for &w in widths {
                // Rotation is capped so corners stay within the gaps.
                let limit = max_angle.min((f64::from(line_gap) / 2.0 - 0.5) / f64::from(w).max(1.0));
                let angle = if limit > 0.0 { rng.gen_range(-limit..=limit) } else { 0.0 };
                let polygon = word_polygon(f64::from(x), y, f64::from(w), f64::from(h), angle);
                let legible = !rng.gen_bool(cfg.illegible_fraction);
                let text = random_text(rng);
                words.push(Word::new(polygon, if legible { text } else { String::new() }, legible));
                x += w + word_gap;
            }
            out_lines.push(Line::new(words));
        }
        paragraphs.push(Paragraph::new(out_lines));
        placed.push(rect);
    }
    Ok(ImageAnnotation {
        image_id,
        width: cfg.width,
        height: cfg.height,
        paragraphs,
    })
}

fn jitter(p: &Polygon, amount: f64, rng: &mut impl Rng) -> Polygon {
    let vertices = p
        .vertices()
        .iter()
        .map(|v| {
            Vertex::new(
                quantize(v.x + rng.gen_range(-amount..=amount)),
                quantize(v.y + rng.gen_range(-amount..=amount)),
            )
        })
        .collect();
    Polygon::new(vertices).expect("finite vertices")
}

struct PredictedImage {
    forest: Vec<Paragraph>,
    flat: Vec<WordPrediction>,
    provenance: Vec<ProvenanceEntry>,
}

fn apply_noise(cfg: &SceneConfig, ann: &ImageAnnotation, rng: &mut ChaCha8Rng) -> PredictedImage {
    let n = &cfg.noise;
    let mut out = PredictedImage {
        forest: Vec::new(),
        flat: Vec::new(),
        provenance: Vec::new(),
    };
    // (text, provenance index) per predicted word, per line, per paragraph.
    let mut forest: Vec<Vec<Vec<(Word, usize)>>> = Vec::new();
    let mut spurious: Vec<(Word, usize)> = Vec::new();
    for (pi, para) in ann.paragraphs.iter().enumerate() {
        let mut lines = Vec::new();
        for (li, line) in para.lines.iter().enumerate() {
            let mut words = Vec::new();
            for (wi, gt_word) in line.words.iter().enumerate().filter(|(_, w)| w.legible) {
                let source = Some(WordPath {
                    paragraph: pi,
                    line: li,
                    word: wi,
                });
                if rng.gen_bool(n.drop_prob) {
                    out.provenance.push(ProvenanceEntry {
                        image_id: ann.image_id.clone(),
                        prediction: None,
                        source,
                        tags: vec![ProvenanceTag::DroppedGt],
                    });
                } else {
                    let mut tags = Vec::new();
                    let polygon = if n.jitter_px > 0.0 {
                        tags.push(ProvenanceTag::Jittered);
                        jitter(&gt_word.polygon, n.jitter_px, rng)
                    } else {
                        tags.push(ProvenanceTag::Copied);
                        gt_word.polygon.clone()
                    };
                    let text = if rng.gen_bool(n.case_flip_prob) {
                        tags.push(ProvenanceTag::CaseFlipped);
                        flip_case(&gt_word.text)
                    } else {
                        gt_word.text.clone()
                    };
                    out.provenance.push(ProvenanceEntry {
                        image_id: ann.image_id.clone(),
                        prediction: None,
                        source,
                        tags,
                    });
                    words.push((Word::new(polygon, text, true), out.provenance.len() - 1));
                }
                if rng.gen_bool(n.spurious_prob) {
                    let w = f64::from(cfg.word_width.sample(rng));
                    let h = f64::from(cfg.word_height.sample(rng));
                    let x = rng.gen_range(0.0..(f64::from(cfg.width) - w).max(1.0));
                    let y = rng.gen_range(0.0..(f64::from(cfg.height) - h).max(1.0));
                    let polygon = word_polygon(x, y, w, h, 0.0);
                    out.provenance.push(ProvenanceEntry {
                        image_id: ann.image_id.clone(),
                        prediction: None,
                        source: None,
                        tags: vec![ProvenanceTag::Spurious],
                    });
                    spurious.push((Word::new(polygon, random_text(rng), true), out.provenance.len() - 1));
                }
            }
            if !words.is_empty() {
                lines.push(words);
            }
        }
        let mut merged: Vec<Vec<(Word, usize)>> = Vec::new();
        for words in lines {
            match merged.last_mut() {
                Some(prev) if rng.gen_bool(n.merge_line_prob) => {
                    for (_, prov) in prev.iter().chain(words.iter()) {
                        let tags = &mut out.provenance[*prov].tags;
                        if !tags.contains(&ProvenanceTag::Merged) {
                            tags.push(ProvenanceTag::Merged);
                        }
                    }
                    prev.extend(words);
                }
                _ => merged.push(words),
            }
        }
        if !merged.is_empty() {
            forest.push(merged);
        }
    }
    forest.extend(spurious.into_iter().map(|w| vec![vec![w]]));

    for para in forest {
        let mut lines = Vec::with_capacity(para.len());
        for line in para {
            let mut words = Vec::with_capacity(line.len());
            for (word, prov) in line {
                out.provenance[prov].prediction = Some(out.flat.len());
                out.flat.push(WordPrediction {
                    polygon: word.polygon.clone(),
                    text: word.text,
                });
                words.push(Word::detection(word.polygon));
            }
            lines.push(Line::new(words));
        }
        out.forest.push(Paragraph::new(lines));
    }
    out
}

/// Generates a scene and its noisy Task 1 and Task 2 submissions.
pub fn generate_scene(cfg: &SceneConfig) -> Result<FixtureBundle> {
    cfg.validate()?;
    let mut layout = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise.set_stream(1);

    let mut images = Vec::with_capacity(cfg.image_count);
    let mut task1 = BTreeMap::new();
    let mut task2 = BTreeMap::new();
    let mut provenance = Vec::new();
    for i in 0..cfg.image_count {
        let ann = generate_image(cfg, i, &mut layout)?;
        let pred = apply_noise(cfg, &ann, &mut noise);
        task1.insert(ann.image_id.clone(), pred.forest);
        task2.insert(ann.image_id.clone(), pred.flat);
        provenance.extend(pred.provenance);
        images.push(ann);
    }
    Ok(FixtureBundle {
        gt: GroundTruthDataset::new(images)?,
        task1: Task1Submission { images: task1 },
        task2: Task2Submission { images: task2 },
        provenance,
    })
}

/// The Task 1 forest a perfect system would output: every legible word,
/// grouped exactly as in the ground truth.
pub fn legible_forest(ann: &ImageAnnotation) -> Vec<Paragraph> {
    ann.paragraphs
        .iter()
        .filter_map(|p| {
            let lines: Vec<Line> = p
                .lines
                .iter()
                .filter_map(|l| {
                    let words: Vec<Word> =
                        l.words.iter().filter(|w| w.legible).map(|w| Word::detection(w.polygon.clone())).collect();
                    (!words.is_empty()).then(|| Line::new(words))
                })
                .collect();
            (!lines.is_empty()).then(|| Paragraph::new(lines))
        })
        .collect()
}

/// Self-submissions for both tasks built from the legible ground truth.
pub fn self_submissions(gt: &GroundTruthDataset) -> (Task1Submission, Task2Submission) {
    let task1 = gt.images().iter().map(|a| (a.image_id.clone(), legible_forest(a))).collect();
    let task2 = gt
        .images()
        .iter()
        .map(|a| {
            let words = a
                .words()
                .filter(|w| w.legible)
                .map(|w| WordPrediction {
                    polygon: w.polygon.clone(),
                    text: w.text.clone(),
                })
                .collect();
            (a.image_id.clone(), words)
        })
        .collect();
    (Task1Submission { images: task1 }, Task2Submission { images: task2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::validate_dataset;
    use crate::geometry::{intersection_area, rasterize_polygon, Grid};

    fn cfg(seed: u64) -> SceneConfig {
        SceneConfig {
            seed,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn same_seed_same_bundle() {
        assert_eq!(generate_scene(&cfg(7)).unwrap(), generate_scene(&cfg(7)).unwrap());
        assert_ne!(generate_scene(&cfg(7)).unwrap().gt, generate_scene(&cfg(8)).unwrap().gt);
    }

    #[test]
    fn zero_noise_predictions_equal_legible_ground_truth() {
        let b = generate_scene(&cfg(3)).unwrap();
        let (t1, t2) = self_submissions(&b.gt);
        assert_eq!(b.task1, t1);
        assert_eq!(b.task2, t2);
        assert!(b.provenance.iter().all(|p| p.tags == [ProvenanceTag::Copied]));
    }

    #[test]
    fn full_drop_empties_task2() {
        let mut c = cfg(5);
        c.noise.drop_prob = 1.0;
        let b = generate_scene(&c).unwrap();
        assert_eq!(b.task2.prediction_count(), 0);
        let legible = b.gt.images().iter().flat_map(|i| i.words()).filter(|w| w.legible).count();
        assert_eq!(b.provenance.len(), legible);
    }

    #[test]
    fn noise_does_not_move_ground_truth() {
        let mut noisy = cfg(11);
        noisy.noise = NoiseConfig {
            jitter_px: 2.0,
            drop_prob: 0.3,
            spurious_prob: 0.2,
            merge_line_prob: 0.5,
            case_flip_prob: 0.5,
        };
        assert_eq!(generate_scene(&noisy).unwrap().gt, generate_scene(&cfg(11)).unwrap().gt);
    }

    #[test]
    fn provenance_covers_every_prediction() {
        let mut c = cfg(13);
        c.noise = NoiseConfig {
            jitter_px: 1.0,
            drop_prob: 0.2,
            spurious_prob: 0.3,
            merge_line_prob: 0.5,
            case_flip_prob: 0.5,
        };
        let b = generate_scene(&c).unwrap();
        for (id, words) in &b.task2.images {
            let mut covered: Vec<usize> = b
                .provenance
                .iter()
                .filter(|p| &p.image_id == id)
                .filter_map(|p| p.prediction)
                .collect();
            covered.sort_unstable();
            assert_eq!(covered, (0..words.len()).collect::<Vec<_>>());
            let forest_words: usize = b.task1.images[id].iter().map(|p| p.words().count()).sum();
            assert_eq!(forest_words, words.len());
        }
        assert!(b.provenance.iter().any(|p| p.tags.contains(&ProvenanceTag::Merged)));
        assert!(b.provenance.iter().any(|p| p.tags == [ProvenanceTag::DroppedGt]));
    }

    #[test]
    fn ground_truth_words_do_not_overlap_and_validate() {
        let mut c = cfg(17);
        c.max_rotation_deg = 6.0;
        c.image_count = 6;
        let b = generate_scene(&c).unwrap();
        assert!(validate_dataset(&b.gt).is_clean());
        for img in b.gt.images() {
            let g = Grid::new(img.width, img.height).unwrap();
            let masks: Vec<_> = img.words().map(|w| rasterize_polygon(&w.polygon, g)).collect();
            for (i, a) in masks.iter().enumerate() {
                assert!(!a.is_empty());
                for b in &masks[i + 1..] {
                    assert_eq!(intersection_area(a, b).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn infeasible_packing_is_an_error() {
        let c = SceneConfig {
            width: 40,
            height: 40,
            words_per_line: Span::new(8, 8),
            ..cfg(1)
        };
        assert!(matches!(generate_scene(&c), Err(Error::Generation(_))));
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = cfg(1);
        c.noise.drop_prob = 1.5;
        assert!(generate_scene(&c).is_err());
        let c = SceneConfig {
            words_per_line: Span::new(3, 2),
            ..cfg(1)
        };
        assert!(generate_scene(&c).is_err());
    }

    #[test]
    fn case_flip_always_changes_generated_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let t = random_text(&mut rng);
            assert_ne!(flip_case(&t), t);
        }
        assert_eq!(flip_case("aB3Ж"), "Ab3ж");
    }
}
