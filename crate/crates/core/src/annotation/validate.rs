use std::collections::HashSet;

use serde::Serialize;

use super::GroundTruthDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub images: usize,
    pub paragraphs: usize,
    pub lines: usize,
    pub words: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub counts: Counts,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
            .count()
    }

    fn push(&mut self, path: String, severity: Severity, message: impl Into<String>) {
        self.violations.push(Violation {
            path,
            severity,
            message: message.into(),
        });
    }
}

/// Checks hierarchy semantics that the parser does not enforce.
///
/// Duplicate consecutive vertices are warnings; everything else is an error.
pub fn validate_dataset(ds: &GroundTruthDataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut ids = HashSet::new();
    for (i, img) in ds.images().iter().enumerate() {
        let ipath = format!("annotations[{i}]");
        report.counts.images += 1;
        if !ids.insert(img.image_id.as_str()) {
            report.push(ipath.clone(), Severity::Error, format!("duplicate image_id {:?}", img.image_id));
        }
        if img.width == 0 || img.height == 0 {
            report.push(ipath.clone(), Severity::Error, "image dimensions must be at least 1");
        }
        for (p, para) in img.paragraphs.iter().enumerate() {
            let ppath = format!("{ipath}.paragraphs[{p}]");
            report.counts.paragraphs += 1;
            if para.lines.is_empty() {
                report.push(ppath.clone(), Severity::Error, "paragraph has no lines");
            }
            for (l, line) in para.lines.iter().enumerate() {
                let lpath = format!("{ppath}.lines[{l}]");
                report.counts.lines += 1;
                if line.words.is_empty() {
                    report.push(lpath.clone(), Severity::Error, "line has no words");
                }
                for (w, word) in line.words.iter().enumerate() {
                    let wpath = format!("{lpath}.words[{w}]");
                    report.counts.words += 1;
                    if word.polygon.is_degenerate() {
                        report.push(wpath.clone(), Severity::Error, "polygon has zero area");
                    } else if word.polygon.deduplicated().len() != word.polygon.vertices().len() {
                        report.push(wpath.clone(), Severity::Warning, "polygon repeats a vertex");
                    }
                    if word.legible && word.text.is_empty() {
                        report.push(wpath, Severity::Error, "legible word has empty text");
                    }
                }
            }
        }
    }
    report
}
