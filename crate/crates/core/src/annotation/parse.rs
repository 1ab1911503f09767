//! JSON decoding for ground truth and submissions.
//!
//! Documents are first parsed into a generic JSON tree and then walked by
//! hand so that schema errors can name the offending path, e.g.
//! `annotations[0].paragraphs[1].lines[0].words[2].vertices`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};
use unicode_normalization::UnicodeNormalization;

use super::{
    GroundTruthDataset, ImageAnnotation, Line, Paragraph, Polygon, Task1Submission,
    Task2Submission, Vertex, Word, WordPrediction,
};
use crate::error::{Error, Result};

pub fn parse_ground_truth(bytes: &[u8]) -> Result<GroundTruthDataset> {
    let (ds, warnings) = parse_ground_truth_with_warnings(bytes)?;
    log_warnings(&warnings);
    Ok(ds)
}

pub fn parse_task1_submission(bytes: &[u8]) -> Result<Task1Submission> {
    let (sub, warnings) = parse_task1_submission_with_warnings(bytes)?;
    log_warnings(&warnings);
    Ok(sub)
}

pub fn parse_task2_submission(bytes: &[u8]) -> Result<Task2Submission> {
    let (sub, warnings) = parse_task2_submission_with_warnings(bytes)?;
    log_warnings(&warnings);
    Ok(sub)
}

pub fn parse_ground_truth_with_warnings(bytes: &[u8]) -> Result<(GroundTruthDataset, Vec<String>)> {
    let root = parse_json(bytes)?;
    let mut d = Decoder::default();
    let images = d.annotations(&root, |d, path, obj| d.gt_image(path, obj))?;
    Ok((GroundTruthDataset::new(images)?, d.warnings))
}

pub fn parse_task1_submission_with_warnings(bytes: &[u8]) -> Result<(Task1Submission, Vec<String>)> {
    let root = parse_json(bytes)?;
    let mut d = Decoder::default();
    let entries = d.annotations(&root, |d, path, obj| {
        d.warn_unknown(path, obj, &["image_id", "image_width", "image_height", "paragraphs"]);
        let id = d.string(path, obj, "image_id")?;
        let paragraphs = d.array(path, obj, "paragraphs", |d, p, v| d.paragraph(p, v, false))?;
        Ok((id, paragraphs))
    })?;
    Ok((Task1Submission { images: collect_unique(entries)? }, d.warnings))
}

pub fn parse_task2_submission_with_warnings(bytes: &[u8]) -> Result<(Task2Submission, Vec<String>)> {
    let root = parse_json(bytes)?;
    let mut d = Decoder::default();
    let entries = d.annotations(&root, |d, path, obj| {
        d.warn_unknown(path, obj, &["image_id", "image_width", "image_height", "words"]);
        let id = d.string(path, obj, "image_id")?;
        let words = d.array(path, obj, "words", |d, p, v| {
            let obj = as_object(p, v)?;
            d.warn_unknown(p, obj, &["vertices", "text"]);
            Ok(WordPrediction {
                polygon: d.polygon(p, obj)?,
                text: normalize(&d.string(p, obj, "text")?),
            })
        })?;
        Ok((id, words))
    })?;
    Ok((Task2Submission { images: collect_unique(entries)? }, d.warnings))
}

/// Serializes any annotation document with keys in schema order.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("annotation documents always serialize")
}

fn log_warnings(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn normalize(text: &str) -> String {
    text.nfc().collect()
}

fn collect_unique<T>(entries: Vec<(String, T)>) -> Result<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    for (id, v) in entries {
        if out.insert(id.clone(), v).is_some() {
            return Err(Error::Validation(format!(
                "duplicate image_id {id:?} in submission"
            )));
        }
    }
    Ok(out)
}

fn parse_json(bytes: &[u8]) -> Result<Value> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn as_object<'a>(path: &str, v: &'a Value) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::schema(path, "expected an object"))
}

#[derive(Default)]
struct Decoder {
    warnings: Vec<String>,
}

impl Decoder {
    fn annotations<T>(
        &mut self,
        root: &Value,
        mut f: impl FnMut(&mut Self, &str, &Map<String, Value>) -> Result<T>,
    ) -> Result<Vec<T>> {
        let obj = as_object("$", root)?;
        self.warn_unknown("$", obj, &["annotations"]);
        self.array("$", obj, "annotations", |d, p, v| f(d, p, as_object(p, v)?))
            .map_err(strip_root)
    }

    fn gt_image(&mut self, path: &str, obj: &Map<String, Value>) -> Result<ImageAnnotation> {
        self.warn_unknown(path, obj, &["image_id", "image_width", "image_height", "paragraphs"]);
        Ok(ImageAnnotation {
            image_id: self.string(path, obj, "image_id")?,
            width: self.dimension(path, obj, "image_width")?,
            height: self.dimension(path, obj, "image_height")?,
            paragraphs: self.array(path, obj, "paragraphs", |d, p, v| d.paragraph(p, v, true))?,
        })
    }

    fn paragraph(&mut self, path: &str, v: &Value, gt: bool) -> Result<Paragraph> {
        let obj = as_object(path, v)?;
        self.warn_unknown(path, obj, &["lines", "legible"]);
        let lines = self.array(path, obj, "lines", |d, p, v| {
            let obj = as_object(p, v)?;
            d.warn_unknown(p, obj, &["words", "legible"]);
            let words = d.array(p, obj, "words", |d, p, v| d.word(p, v, gt))?;
            Ok(Line { words })
        })?;
        Ok(Paragraph { lines })
    }

    fn word(&mut self, path: &str, v: &Value, gt: bool) -> Result<Word> {
        let obj = as_object(path, v)?;
        self.warn_unknown(path, obj, &["vertices", "text", "legible"]);
        let polygon = self.polygon(path, obj)?;
        if !gt {
            // Task 1 does not score transcriptions.
            return Ok(Word::detection(polygon));
        }
        let text = normalize(&self.string(path, obj, "text")?);
        let legible = match obj.get("legible") {
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(Error::schema(format!("{path}.legible"), "expected a boolean")),
            None => return Err(Error::schema(path, "missing field `legible`")),
        };
        Ok(Word {
            polygon,
            text,
            legible,
        })
    }

    fn polygon(&mut self, path: &str, obj: &Map<String, Value>) -> Result<Polygon> {
        let vpath = format!("{path}.vertices");
        let raw = obj
            .get("vertices")
            .ok_or_else(|| Error::schema(path, "missing field `vertices`"))?
            .as_array()
            .ok_or_else(|| Error::schema(&vpath, "expected an array of [x, y] pairs"))?;
        let mut vertices = Vec::with_capacity(raw.len());
        for (i, pair) in raw.iter().enumerate() {
            let coords = pair
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some(Vertex::new(a[0].as_f64()?, a[1].as_f64()?)))
                .ok_or_else(|| Error::schema(format!("{vpath}[{i}]"), "expected [x, y] numbers"))?;
            vertices.push(coords);
        }
        if vertices.len() < 3 {
            return Err(Error::schema(
                vpath,
                format!("polygon needs at least 3 vertices, got {}", vertices.len()),
            ));
        }
        Polygon::new(vertices).map_err(|e| Error::schema(path, e.to_string()))
    }

    fn array<T>(
        &mut self,
        path: &str,
        obj: &Map<String, Value>,
        key: &str,
        mut f: impl FnMut(&mut Self, &str, &Value) -> Result<T>,
    ) -> Result<Vec<T>> {
        let items = obj
            .get(key)
            .ok_or_else(|| Error::schema(path, format!("missing field `{key}`")))?
            .as_array()
            .ok_or_else(|| Error::schema(format!("{path}.{key}"), "expected an array"))?;
        items
            .iter()
            .enumerate()
            .map(|(i, v)| f(self, &format!("{path}.{key}[{i}]"), v))
            .collect()
    }

    fn string(&mut self, path: &str, obj: &Map<String, Value>, key: &str) -> Result<String> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(Error::schema(format!("{path}.{key}"), "expected a string")),
            None => Err(Error::schema(path, format!("missing field `{key}`"))),
        }
    }

    fn dimension(&mut self, path: &str, obj: &Map<String, Value>, key: &str) -> Result<u32> {
        let v = obj
            .get(key)
            .ok_or_else(|| Error::schema(path, format!("missing field `{key}`")))?;
        v.as_u64()
            .filter(|&n| n >= 1)
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| Error::schema(format!("{path}.{key}"), "expected a positive integer"))
    }

    fn warn_unknown(&mut self, path: &str, obj: &Map<String, Value>, known: &[&str]) {
        for key in obj.keys().filter(|k| !known.contains(&k.as_str())) {
            self.warnings.push(format!("{path}: ignoring unknown field `{key}`"));
        }
    }
}

fn strip_root(e: Error) -> Error {
    match e {
        Error::Schema { path, message } => Error::Schema {
            path: path.strip_prefix("$.").map(str::to_owned).unwrap_or(path),
            message,
        },
        other => other,
    }
}

#[derive(Serialize)]
struct Document<T> {
    annotations: Vec<T>,
}

#[derive(Serialize)]
struct DetectionWord<'a> {
    vertices: &'a Polygon,
}

#[derive(Serialize)]
struct DetectionLine<'a> {
    words: Vec<DetectionWord<'a>>,
}

#[derive(Serialize)]
struct DetectionParagraph<'a> {
    lines: Vec<DetectionLine<'a>>,
}

#[derive(Serialize)]
struct Task1Image<'a> {
    image_id: &'a str,
    paragraphs: Vec<DetectionParagraph<'a>>,
}

#[derive(Serialize)]
struct Task2Word<'a> {
    vertices: &'a Polygon,
    text: &'a str,
}

#[derive(Serialize)]
struct Task2Image<'a> {
    image_id: &'a str,
    words: Vec<Task2Word<'a>>,
}

impl Serialize for Task1Submission {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let annotations = self
            .images
            .iter()
            .map(|(id, paragraphs)| Task1Image {
                image_id: id,
                paragraphs: paragraphs
                    .iter()
                    .map(|p| DetectionParagraph {
                        lines: p
                            .lines
                            .iter()
                            .map(|l| DetectionLine {
                                words: l
                                    .words
                                    .iter()
                                    .map(|w| DetectionWord {
                                        vertices: &w.polygon,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Document { annotations }.serialize(s)
    }
}

impl Serialize for Task2Submission {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let annotations = self
            .images
            .iter()
            .map(|(id, words)| Task2Image {
                image_id: id,
                words: words
                    .iter()
                    .map(|w| Task2Word {
                        vertices: &w.polygon,
                        text: &w.text,
                    })
                    .collect(),
            })
            .collect();
        Document { annotations }.serialize(s)
    }
}
