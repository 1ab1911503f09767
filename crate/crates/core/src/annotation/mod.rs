//! Hierarchical annotation model: words grouped into lines, lines into
//! paragraphs, paragraphs per image.
//!
//! Ground truth and both submission formats share the same geometry types.
//! Task 1 predictions reuse [`Paragraph`] with word text and legibility
//! ignored; Task 2 predictions are a flat list of [`WordPrediction`].

mod parse;
mod validate;

use std::collections::BTreeMap;

use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use parse::{
    parse_ground_truth, parse_ground_truth_with_warnings, parse_task1_submission,
    parse_task1_submission_with_warnings, parse_task2_submission,
    parse_task2_submission_with_warnings, to_json_bytes,
};
pub use validate::{validate_dataset, Counts, Severity, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn new(x: f64, y: f64) -> Self {
        Vertex { x, y }
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.end()
    }
}

/// A closed polygon with at least three finite vertices.
///
/// Zero-area polygons are representable; [`validate_dataset`] reports them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Vertex>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::contract(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::contract("polygon vertex is not finite"));
        }
        Ok(Polygon { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`, vertices clockwise in
    /// image coordinates starting at the top-left corner.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Polygon::new(vec![
            Vertex::new(x0, y0),
            Vertex::new(x1, y0),
            Vertex::new(x1, y1),
            Vertex::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Vertices with consecutive duplicates (including the wrap-around pair)
    /// removed.
    pub fn deduplicated(&self) -> Vec<Vertex> {
        let mut out: Vec<Vertex> = Vec::with_capacity(self.vertices.len());
        for &v in &self.vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        out
    }

    /// Signed shoelace area of the closed vertex sequence.
    pub fn signed_area(&self) -> f64 {
        let vs = self.deduplicated();
        if vs.len() < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for (i, a) in vs.iter().enumerate() {
            let b = vs[(i + 1) % vs.len()];
            twice += a.x * b.y - b.x * a.y;
        }
        twice / 2.0
    }

    pub fn is_degenerate(&self) -> bool {
        self.signed_area().abs() < 1e-9
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| Vertex::new(v.x + dx, v.y + dy))
                .collect(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)`
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), v| (x0.min(v.x), y0.min(v.y), x1.max(v.x), y1.max(v.y)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Word {
    #[serde(rename = "vertices")]
    pub polygon: Polygon,
    pub text: String,
    pub legible: bool,
}

impl Word {
    pub fn new(polygon: Polygon, text: impl Into<String>, legible: bool) -> Self {
        Word {
            polygon,
            text: text.into(),
            legible,
        }
    }

    /// A word without transcription, as found in Task 1 predictions.
    pub fn detection(polygon: Polygon) -> Self {
        Word::new(polygon, String::new(), true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line {
    pub words: Vec<Word>,
}

impl Line {
    pub fn new(words: Vec<Word>) -> Self {
        Line { words }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paragraph {
    pub lines: Vec<Line>,
}

impl Paragraph {
    pub fn new(lines: Vec<Line>) -> Self {
        Paragraph { lines }
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.lines.iter().flat_map(|l| l.words.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageAnnotation {
    pub image_id: String,
    #[serde(rename = "image_width")]
    pub width: u32,
    #[serde(rename = "image_height")]
    pub height: u32,
    pub paragraphs: Vec<Paragraph>,
}

impl ImageAnnotation {
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.paragraphs.iter().flat_map(|p| p.words())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

/// One split of the ground truth. Image ids are unique.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GroundTruthDataset {
    #[serde(rename = "annotations")]
    images: Vec<ImageAnnotation>,
}

impl GroundTruthDataset {
    pub fn new(images: Vec<ImageAnnotation>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for img in &images {
            if !seen.insert(img.image_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate image_id {:?}",
                    img.image_id
                )));
            }
        }
        Ok(GroundTruthDataset { images })
    }

    pub fn images(&self) -> &[ImageAnnotation] {
        &self.images
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageAnnotation> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    pub fn word_count(&self) -> usize {
        self.images.iter().map(ImageAnnotation::word_count).sum()
    }
}

/// Task 1 predictions: per image, a forest of paragraph → line → word.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Task1Submission {
    pub images: BTreeMap<String, Vec<Paragraph>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordPrediction {
    pub polygon: Polygon,
    pub text: String,
}

/// Task 2 predictions: per image, a flat list of transcribed word polygons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Task2Submission {
    pub images: BTreeMap<String, Vec<WordPrediction>>,
}

impl Task2Submission {
    pub fn prediction_count(&self) -> usize {
        self.images.values().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_needs_three_finite_vertices() {
        assert!(Polygon::new(vec![Vertex::new(0.0, 0.0), Vertex::new(1.0, 0.0)]).is_err());
        assert!(Polygon::new(vec![
            Vertex::new(0.0, 0.0),
            Vertex::new(f64::NAN, 0.0),
            Vertex::new(1.0, 1.0)
        ])
        .is_err());
    }

    #[test]
    fn shoelace_area_ignores_duplicates() {
        let p = Polygon::new(vec![
            Vertex::new(0.0, 0.0),
            Vertex::new(2.0, 0.0),
            Vertex::new(2.0, 0.0),
            Vertex::new(2.0, 3.0),
            Vertex::new(0.0, 3.0),
            Vertex::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(p.signed_area(), 6.0);
        assert_eq!(p.deduplicated().len(), 4);
    }

    #[test]
    fn identical_vertices_are_degenerate() {
        let v = Vertex::new(1.5, 1.5);
        assert!(Polygon::new(vec![v, v, v, v]).unwrap().is_degenerate());
        let collinear =
            Polygon::new(vec![Vertex::new(0.0, 0.0), Vertex::new(1.0, 1.0), Vertex::new(2.0, 2.0)])
                .unwrap();
        assert!(collinear.is_degenerate());
    }

    #[test]
    fn duplicate_image_ids_rejected() {
        let img = ImageAnnotation {
            image_id: "a".into(),
            width: 4,
            height: 4,
            paragraphs: vec![],
        };
        assert!(matches!(
            GroundTruthDataset::new(vec![img.clone(), img]),
            Err(Error::Validation(_))
        ));
    }
}
