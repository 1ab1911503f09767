use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::metrics::{format_percent, HpqScore, MatchCounts, MetricBundle};

/// A fraction rendered as a percent literal with exactly two decimals.
struct Percent(f64);

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_percent(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct PercentView {
    precision: Percent,
    recall: Percent,
    f1: Percent,
    tightness: Percent,
    pq: Percent,
}

impl Serialize for MetricBundle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("MetricBundle", 10)?;
        st.serialize_field("tp", &self.tp)?;
        st.serialize_field("fp", &self.fp)?;
        st.serialize_field("fn", &self.fn_)?;
        st.serialize_field("iou_sum", &self.iou_sum)?;
        st.serialize_field("precision", &self.precision)?;
        st.serialize_field("recall", &self.recall)?;
        st.serialize_field("f1", &self.f1)?;
        st.serialize_field("tightness", &self.tightness)?;
        st.serialize_field("pq", &self.pq)?;
        st.serialize_field(
            "percent",
            &PercentView {
                precision: Percent(self.precision),
                recall: Percent(self.recall),
                f1: Percent(self.f1),
                tightness: Percent(self.tightness),
                pq: Percent(self.pq),
            },
        )?;
        st.end()
    }
}

/// Per-image scores at the three levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTriple {
    pub word: MetricBundle,
    pub line: MetricBundle,
    pub paragraph: MetricBundle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task1Report {
    pub images: usize,
    pub word: MetricBundle,
    pub line: MetricBundle,
    pub paragraph: MetricBundle,
    pub hpq: HpqScore,
    pub per_image: Option<BTreeMap<String, LevelTriple>>,
}

impl Task1Report {
    pub fn level_counts(&self) -> [MatchCounts; 3] {
        [self.word.counts(), self.line.counts(), self.paragraph.counts()]
    }
}

impl Serialize for Task1Report {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Task1Report", 8)?;
        st.serialize_field("task", "task1")?;
        st.serialize_field("images", &self.images)?;
        st.serialize_field("word", &self.word)?;
        st.serialize_field("line", &self.line)?;
        st.serialize_field("paragraph", &self.paragraph)?;
        st.serialize_field("hpq", &self.hpq.value())?;
        st.serialize_field("hpq_percent", &Percent(self.hpq.value()))?;
        if let Some(per_image) = &self.per_image {
            st.serialize_field("per_image", per_image)?;
        }
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task2Report {
    pub images: usize,
    pub word: MetricBundle,
    pub per_image: Option<BTreeMap<String, MetricBundle>>,
}

impl Serialize for Task2Report {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Task2Report", 4)?;
        st.serialize_field("task", "task2")?;
        st.serialize_field("images", &self.images)?;
        st.serialize_field("word", &self.word)?;
        if let Some(per_image) = &self.per_image {
            st.serialize_field("per_image", per_image)?;
        }
        st.end()
    }
}

/// Pretty JSON with a trailing newline; stable key order.
pub fn report_to_json<T: Serialize>(report: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("reports always serialize");
    out.push(b'\n');
    out
}
