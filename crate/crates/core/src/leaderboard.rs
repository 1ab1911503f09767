//! Submission deduplication, ranking and table rendering.
//!
//! Each team keeps only its latest submission. Two submissions belong to
//! the same team when they share a `user_id`, or when their author lists and
//! method descriptions are identical after whitespace normalization and case
//! folding. Task 1 ranks by H-PQ and Task 2 by F1.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Task1Report, Task2Report};
use crate::metrics::{format_percent, MetricBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Task1,
    Task2,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "task1" => Ok(Task::Task1),
            "2" | "task2" => Ok(Task::Task2),
            other => Err(Error::contract(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Task1 => "task1",
            Task::Task2 => "task2",
        })
    }
}

/// Published-style ratios of one level, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tightness: f64,
    pub pq: f64,
}

impl From<&MetricBundle> for LevelScores {
    fn from(b: &MetricBundle) -> Self {
        LevelScores {
            precision: b.precision,
            recall: b.recall,
            f1: b.f1,
            tightness: b.tightness,
            pq: b.pq,
        }
    }
}

/// The score columns a leaderboard shows. Read from report documents, which
/// carry more fields than these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scores {
    Task1 {
        word: LevelScores,
        line: LevelScores,
        paragraph: LevelScores,
        hpq: f64,
    },
    Task2 {
        word: LevelScores,
    },
}

impl Scores {
    pub fn task(&self) -> Task {
        match self {
            Scores::Task1 { .. } => Task::Task1,
            Scores::Task2 { .. } => Task::Task2,
        }
    }

    /// H-PQ for Task 1, word F1 for Task 2.
    pub fn key_metric(&self) -> f64 {
        match self {
            Scores::Task1 { hpq, .. } => *hpq,
            Scores::Task2 { word } => word.f1,
        }
    }
}

impl From<&Task1Report> for Scores {
    fn from(r: &Task1Report) -> Self {
        Scores::Task1 {
            word: (&r.word).into(),
            line: (&r.line).into(),
            paragraph: (&r.paragraph).into(),
            hpq: r.hpq.value(),
        }
    }
}

impl From<&Task2Report> for Scores {
    fn from(r: &Task2Report) -> Self {
        Scores::Task2 {
            word: (&r.word).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub user_id: String,
    pub method_name: String,
    #[serde(default)]
    pub method_description: String,
    #[serde(default)]
    pub authors: String,
    /// Seconds on any monotonic scale; manifests may also give RFC 3339.
    pub timestamp: i64,
    pub task: Task,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub key_metric: f64,
    pub record: SubmissionRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dedup {
    pub kept: Vec<SubmissionRecord>,
    /// Superseded submissions, kept for reference.
    pub removed: Vec<SubmissionRecord>,
}

fn normalize_identity(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Within each group, marks all but the latest record (ties go to the later
/// input position) as superseded.
fn supersede<K: std::hash::Hash + Eq>(
    records: &[SubmissionRecord],
    alive: &mut [bool],
    key: impl Fn(&SubmissionRecord) -> Option<K>,
) {
    let mut latest: HashMap<K, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if !alive[i] {
            continue;
        }
        let Some(k) = key(r) else { continue };
        match latest.get(&k) {
            Some(&j) if records[j].timestamp > r.timestamp => alive[i] = false,
            Some(&j) => {
                alive[j] = false;
                latest.insert(k, i);
            }
            None => {
                latest.insert(k, i);
            }
        }
    }
}

pub fn partition_submissions(records: &[SubmissionRecord]) -> Dedup {
    let mut alive = vec![true; records.len()];
    supersede(records, &mut alive, |r| Some(r.user_id.clone()));
    supersede(records, &mut alive, |r| {
        let key = (normalize_identity(&r.authors), normalize_identity(&r.method_description));
        // Blank metadata identifies nobody.
        (!(key.0.is_empty() && key.1.is_empty())).then_some(key)
    });
    let mut out = Dedup::default();
    for (r, keep) in records.iter().zip(alive) {
        if keep {
            out.kept.push(r.clone());
        } else {
            out.removed.push(r.clone());
        }
    }
    out
}

/// Keeps the latest submission of each team, in input order.
pub fn dedup_submissions(records: &[SubmissionRecord]) -> Vec<SubmissionRecord> {
    partition_submissions(records).kept
}

/// Sorts by key metric descending, earlier timestamp first on ties, and
/// numbers the rows from 1.
pub fn rank_entries(records: &[SubmissionRecord]) -> Vec<LeaderboardRow> {
    let mut sorted: Vec<&SubmissionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        b.scores
            .key_metric()
            .total_cmp(&a.scores.key_metric())
            .then(a.timestamp.cmp(&b.timestamp))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| LeaderboardRow {
            rank: i + 1,
            key_metric: r.scores.key_metric(),
            record: r.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    PlainTable,
    Csv,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" | "plain-table" => Ok(ReportFormat::PlainTable),
            "csv" => Ok(ReportFormat::Csv),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::contract(format!("unknown report format {other:?}"))),
        }
    }
}

fn header(task: Task) -> Vec<String> {
    let mut h: Vec<String> = vec!["rank".into(), "user".into(), "method".into()];
    let levels: &[&str] = match task {
        Task::Task1 => {
            h.push("hpq".into());
            &["word", "line", "paragraph"]
        }
        Task::Task2 => &["word"],
    };
    for level in levels {
        for col in ["pq", "f", "p", "r", "t"] {
            h.push(format!("{level}_{col}"));
        }
    }
    h
}

fn level_cells(s: &LevelScores) -> [String; 5] {
    [s.pq, s.f1, s.precision, s.recall, s.tightness].map(format_percent)
}

fn row_cells(row: &LeaderboardRow) -> Vec<String> {
    let r = &row.record;
    let mut cells = vec![row.rank.to_string(), r.user_id.clone(), r.method_name.clone()];
    match &r.scores {
        Scores::Task1 {
            word,
            line,
            paragraph,
            hpq,
        } => {
            cells.push(format_percent(*hpq));
            for level in [word, line, paragraph] {
                cells.extend(level_cells(level));
            }
        }
        Scores::Task2 { word } => cells.extend(level_cells(word)),
    }
    cells
}

#[derive(Serialize, Deserialize)]
struct StructuredBoard {
    task: Task,
    rows: Vec<LeaderboardRow>,
}

fn check_rows(rows: &[LeaderboardRow], task: Task) -> Result<()> {
    match rows.iter().find(|r| r.record.scores.task() != task) {
        Some(bad) => Err(Error::contract(format!(
            "row for {:?} does not hold {task} scores",
            bad.record.method_name
        ))),
        None => Ok(()),
    }
}

pub fn render_report(rows: &[LeaderboardRow], task: Task, format: ReportFormat) -> Result<Vec<u8>> {
    check_rows(rows, task)?;
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header(task))?;
            for row in rows {
                w.write_record(row_cells(row))?;
            }
            w.into_inner()
                .map_err(|e| Error::contract(format!("csv flush failed: {e}")))
        }
        ReportFormat::PlainTable => {
            let mut table = vec![header(task)];
            table.extend(rows.iter().map(row_cells));
            let widths: Vec<usize> = (0..table[0].len())
                .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for (i, r) in table.iter().enumerate() {
                let line: Vec<String> = r
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (cell, w))| {
                        // Text columns left-aligned, numbers right-aligned.
                        if c == 1 || c == 2 {
                            format!("{cell:<w$}")
                        } else {
                            format!("{cell:>w$}")
                        }
                    })
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
                if i == 0 {
                    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                    out.push_str(&"-".repeat(rule));
                    out.push('\n');
                }
            }
            Ok(out.into_bytes())
        }
        ReportFormat::Structured => {
            let board = StructuredBoard {
                task,
                rows: rows.to_vec(),
            };
            let mut out = serde_json::to_vec_pretty(&board).expect("leaderboard serializes");
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Inverse of the structured rendering.
pub fn parse_structured(bytes: &[u8]) -> Result<(Task, Vec<LeaderboardRow>)> {
    let board: StructuredBoard = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        offset: 0,
        message: e.to_string(),
    })?;
    Ok((board.task, board.rows))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Timestamp {
    Seconds(i64),
    Rfc3339(String),
}

impl Timestamp {
    fn seconds(&self, path: &str) -> Result<i64> {
        match self {
            Timestamp::Seconds(s) => Ok(*s),
            Timestamp::Rfc3339(s) => chrono::DateTime::parse_from_rfc3339(s)
                .map(|t| t.timestamp())
                .map_err(|e| Error::schema(path, format!("bad timestamp {s:?}: {e}"))),
        }
    }
}

#[derive(Deserialize)]
struct ManifestEntry {
    user_id: String,
    method_name: String,
    #[serde(default)]
    method_description: String,
    #[serde(default)]
    authors: String,
    timestamp: Timestamp,
    /// Path to a report document, relative to the manifest.
    report: Option<String>,
    scores: Option<Scores>,
}

#[derive(Deserialize)]
struct Manifest {
    task: Task,
    entries: Vec<ManifestEntry>,
}

/// Reads a manifest whose entries either point at report documents or carry
/// their scores inline.
pub fn load_manifest(path: &Path) -> Result<(Task, Vec<SubmissionRecord>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::schema("manifest", e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::with_capacity(manifest.entries.len());
    for (i, e) in manifest.entries.into_iter().enumerate() {
        let epath = format!("entries[{i}]");
        let scores = match (e.scores, e.report) {
            (Some(s), None) => s,
            (None, Some(rel)) => {
                let rpath = base.join(rel);
                let doc = std::fs::read(&rpath).map_err(|err| Error::io(&rpath, err))?;
                serde_json::from_slice(&doc)
                    .map_err(|err| Error::schema(format!("{epath}.report"), err.to_string()))?
            }
            _ => {
                return Err(Error::schema(epath, "exactly one of `report` or `scores` is required"));
            }
        };
        if scores.task() != manifest.task {
            return Err(Error::schema(epath, format!("scores are not {} scores", manifest.task)));
        }
        records.push(SubmissionRecord {
            timestamp: e.timestamp.seconds(&epath)?,
            user_id: e.user_id,
            method_name: e.method_name,
            method_description: e.method_description,
            authors: e.authors,
            task: manifest.task,
            scores,
        });
    }
    Ok((manifest.task, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(f1: f64) -> LevelScores {
        LevelScores {
            precision: f1,
            recall: f1,
            f1,
            tightness: 0.8,
            pq: 0.8 * f1,
        }
    }

    fn rec(user: &str, authors: &str, desc: &str, t: i64, f1: f64) -> SubmissionRecord {
        SubmissionRecord {
            user_id: user.into(),
            method_name: format!("{user}-{t}"),
            method_description: desc.into(),
            authors: authors.into(),
            timestamp: t,
            task: Task::Task2,
            scores: Scores::Task2 { word: level(f1) },
        }
    }

    #[test]
    fn same_user_keeps_latest() {
        let out = dedup_submissions(&[rec("u", "A", "x", 2, 0.5), rec("u", "A", "y", 1, 0.9)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].timestamp, 2);
    }

    #[test]
    fn identical_metadata_merges_users() {
        let d = partition_submissions(&[
            rec("u1", "Ann  Lee", "Big model", 5, 0.5),
            rec("u2", "ann lee", "big   MODEL", 3, 0.9),
            rec("u3", "", "", 1, 0.1),
            rec("u4", "", "", 2, 0.1),
        ]);
        let ids: Vec<&str> = d.kept.iter().map(|r| r.user_id.as_str()).collect();
        assert_eq!(ids, ["u1", "u3", "u4"]);
        assert_eq!(d.removed.len(), 1);
        assert!(dedup_submissions(&[]).is_empty());
    }

    #[test]
    fn ranking_ties_prefer_earlier() {
        let rows = rank_entries(&[rec("a", "", "", 9, 0.7), rec("b", "", "", 3, 0.7), rec("c", "", "", 5, 0.8)]);
        let users: Vec<&str> = rows.iter().map(|r| r.record.user_id.as_str()).collect();
        assert_eq!(users, ["c", "b", "a"]);
        assert_eq!(rows.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
        let single = rank_entries(&[rec("z", "", "", 0, 0.1)]);
        assert_eq!(single[0].rank, 1);
    }

    #[test]
    fn csv_rendering() {
        let empty = render_report(&[], Task::Task2, ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "rank,user,method,word_pq,word_f,word_p,word_r,word_t\n");
        let rows = rank_entries(&[rec("a, inc", "", "", 1, 0.5)]);
        let csv = String::from_utf8(render_report(&rows, Task::Task2, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "1,\"a, inc\",\"a, inc-1\",40.00,50.00,50.00,50.00,80.00");
    }

    #[test]
    fn unknown_format_and_task_mismatch() {
        assert!("xml".parse::<ReportFormat>().is_err());
        let rows = rank_entries(&[rec("a", "", "", 1, 0.5)]);
        assert!(render_report(&rows, Task::Task1, ReportFormat::Csv).is_err());
    }

    #[test]
    fn plain_table_has_rule_and_rows() {
        let rows = rank_entries(&[rec("a", "", "", 1, 0.5), rec("bb", "", "", 2, 0.25)]);
        let t = String::from_utf8(render_report(&rows, Task::Task2, ReportFormat::PlainTable).unwrap()).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].chars().all(|c| c == '-'));
        assert!(lines[2].starts_with("   1  a "));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn records() -> impl Strategy<Value = Vec<SubmissionRecord>> {
            prop::collection::vec((0u8..4, 0u8..3, 0u8..3, 0i64..20, 0.0f64..1.0), 0..12).prop_map(|v| {
                v.into_iter()
                    .map(|(u, a, d, t, f)| rec(&format!("u{u}"), &format!("a{a}"), &format!("d{d}"), t, f))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn dedup_is_idempotent(rs in records()) {
                let once = dedup_submissions(&rs);
                prop_assert_eq!(dedup_submissions(&once), once.clone());
                let d = partition_submissions(&rs);
                prop_assert_eq!(d.kept.len() + d.removed.len(), rs.len());
            }

            #[test]
            fn ranking_is_a_sorted_permutation(rs in records()) {
                let rows = rank_entries(&rs);
                let mut a: Vec<String> = rs.iter().map(|r| format!("{r:?}")).collect();
                let mut b: Vec<String> = rows.iter().map(|r| format!("{:?}", r.record)).collect();
                a.sort();
                b.sort();
                prop_assert_eq!(a, b);
                prop_assert!(rows.windows(2).all(|w| w[0].key_metric >= w[1].key_metric));
                prop_assert!(rows.iter().enumerate().all(|(i, r)| r.rank == i + 1));
            }

            #[test]
            fn structured_round_trips(rs in records()) {
                let rows = rank_entries(&rs);
                let bytes = render_report(&rows, Task::Task2, ReportFormat::Structured).unwrap();
                let (task, back) = parse_structured(&bytes).unwrap();
                prop_assert_eq!(task, Task::Task2);
                prop_assert_eq!(back, rows);
            }
        }
    }
}
