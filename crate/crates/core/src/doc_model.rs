//! Geometric and textual types shared by every pipeline stage.
//!
//! Coordinates are page-local points with the origin at the top-left corner
//! and `y` growing downward. Line indices in an [`IndexedDocument`] are
//! document-global: they run `0..len` across all pages.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocError {
    #[error("invalid bounding box [{0}, {1}, {2}, {3}]")]
    InvalidBox(f64, f64, f64, f64),
    #[error("primitive text is empty")]
    EmptyText,
    #[error("line {index} contains a line break")]
    LineBreak { index: usize },
    #[error("line at position {position} has index {found}")]
    IndexGap { position: usize, found: usize },
    #[error("line range [{start}, {end}] is out of bounds for a document of {len} lines")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
}

/// Axis-aligned rectangle in page points.
///
/// Serialized as a four-element array `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, DocError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !finite || x_min > x_max || y_min > y_max {
            return Err(DocError::InvalidBox(x_min, y_min, x_max, y_max));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn center_y(&self) -> f64 {
        (self.y_min + self.y_max) / 2.0
    }

    /// Closed containment: points on the border are inside.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    /// Union of a non-empty sequence of boxes.
    pub fn union_all<'a>(boxes: impl IntoIterator<Item = &'a BoundingBox>) -> Option<BoundingBox> {
        boxes.into_iter().fold(None, |acc, b| match acc {
            None => Some(*b),
            Some(a) => Some(a.union(b)),
        })
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = DocError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Where a primitive's text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Metadata,
    Ocr,
}

/// One positioned text fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrimitive")]
pub struct TextPrimitive {
    pub text: String,
    pub bbox: BoundingBox,
    pub page: usize,
    pub source: Source,
}

#[derive(Deserialize)]
struct RawPrimitive {
    text: String,
    bbox: BoundingBox,
    page: usize,
    source: Source,
}

impl TryFrom<RawPrimitive> for TextPrimitive {
    type Error = DocError;

    fn try_from(raw: RawPrimitive) -> Result<Self, Self::Error> {
        TextPrimitive::new(raw.text, raw.bbox, raw.page, raw.source)
    }
}

impl TextPrimitive {
    pub fn new(
        text: impl Into<String>,
        bbox: BoundingBox,
        page: usize,
        source: Source,
    ) -> Result<Self, DocError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DocError::EmptyText);
        }
        Ok(Self { text, bbox, page, source })
    }
}

/// Index of a primitive within the slice handed to a detector.
pub type PrimitiveId = usize;

/// A rectangular region whose content reads correctly top-to-bottom,
/// left-to-right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSegment {
    pub bbox: BoundingBox,
    pub page: usize,
    pub member_ids: Vec<PrimitiveId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedLine {
    pub index: usize,
    pub text: String,
    pub bbox: BoundingBox,
    #[serde(rename = "segment")]
    pub segment_ordinal: usize,
    /// Provenance only; not part of the serialized document.
    #[serde(skip)]
    pub source_primitive_ids: Vec<PrimitiveId>,
}

/// The linearized, line-numbered text every downstream stage refers to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct IndexedDocument {
    pub page_count: usize,
    lines: Vec<IndexedLine>,
}

#[derive(Deserialize)]
struct RawDocument {
    page_count: usize,
    lines: Vec<IndexedLine>,
}

impl TryFrom<RawDocument> for IndexedDocument {
    type Error = DocError;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        IndexedDocument::new(raw.lines, raw.page_count)
    }
}

impl IndexedDocument {
    pub fn new(lines: Vec<IndexedLine>, page_count: usize) -> Result<Self, DocError> {
        for (position, line) in lines.iter().enumerate() {
            if line.index != position {
                return Err(DocError::IndexGap { position, found: line.index });
            }
            if line.text.contains(['\n', '\r']) {
                return Err(DocError::LineBreak { index: position });
            }
        }
        Ok(Self { page_count, lines })
    }

    /// Builds a single-page document from bare line texts, stacking lines
    /// at a fixed pitch. Convenient for fixtures and tests.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self, DocError> {
        let lines = texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                let y = 10.0 + 14.0 * index as f64;
                IndexedLine {
                    index,
                    text: t.as_ref().to_string(),
                    bbox: BoundingBox { x_min: 10.0, y_min: y, x_max: 300.0, y_max: y + 10.0 },
                    segment_ordinal: 0,
                    source_primitive_ids: Vec::new(),
                }
            })
            .collect();
        IndexedDocument::new(lines, usize::from(!texts.is_empty()))
    }

    pub fn lines(&self) -> &[IndexedLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// All line texts joined by newlines.
    pub fn full_text(&self) -> String {
        self.lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join("\n")
    }
}

/// Inclusive range of line indices, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Number of lines covered; zero for an inverted range.
    pub fn len(&self) -> usize {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of lines shared with `other`.
    pub fn intersection_len(&self, other: &LineRange) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if hi < lo {
            0
        } else {
            hi - lo + 1
        }
    }
}

impl From<[usize; 2]> for LineRange {
    fn from(v: [usize; 2]) -> Self {
        LineRange { start: v[0], end: v[1] }
    }
}

impl From<LineRange> for [usize; 2] {
    fn from(r: LineRange) -> Self {
        [r.start, r.end]
    }
}

impl fmt::Display for LineRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Renders the document as `[i]: text` lines separated by `\n`.
pub fn render_indexed(doc: &IndexedDocument) -> String {
    let mut out = String::new();
    for (i, line) in doc.lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[{}]: {}", line.index, line.text));
    }
    out
}

/// Inverse of [`render_indexed`]: recovers line texts from rendered output.
///
/// Returns `None` if a line does not carry the expected `[i]: ` prefix.
pub fn parse_rendered(rendered: &str) -> Option<Vec<String>> {
    if rendered.is_empty() {
        return Some(Vec::new());
    }
    rendered
        .split('\n')
        .enumerate()
        .map(|(i, line)| line.strip_prefix(&format!("[{i}]: ")).map(str::to_string))
        .collect()
}

/// Verbatim newline-joined texts of lines `start..=end`.
pub fn slice_lines(doc: &IndexedDocument, range: LineRange) -> Result<String, DocError> {
    if range.start > range.end || range.end >= doc.len() {
        return Err(DocError::RangeOutOfBounds { start: range.start, end: range.end, len: doc.len() });
    }
    Ok(doc.lines[range.start..=range.end]
        .iter()
        .map(|l| l.text.as_str())
        .collect::<Vec<_>>()
        .join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bbox_rejects_inverted_and_negative() {
        assert!(BoundingBox::new(5.0, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(-1.0, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn primitive_rejects_blank_text() {
        let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(TextPrimitive::new("  ", b, 0, Source::Ocr), Err(DocError::EmptyText));
        let json = r#"{"text":" ","bbox":[0,0,1,1],"page":0,"source":"ocr"}"#;
        assert!(serde_json::from_str::<TextPrimitive>(json).is_err());
    }

    #[test]
    fn primitive_json_shape() {
        let json = r#"{"text":"Gu Dabai","bbox":[1,2,3,4],"page":0,"source":"metadata"}"#;
        let p: TextPrimitive = serde_json::from_str(json).unwrap();
        assert_eq!(p.bbox, BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap());
        assert_eq!(p.source, Source::Metadata);
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(back, r#"{"text":"Gu Dabai","bbox":[1.0,2.0,3.0,4.0],"page":0,"source":"metadata"}"#);
    }

    #[test]
    fn document_json_shape() {
        let doc = IndexedDocument::from_texts(&["a"]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["page_count"], 1);
        assert_eq!(v["lines"][0]["index"], 0);
        assert_eq!(v["lines"][0]["segment"], 0);
        assert_eq!(v["lines"][0]["bbox"].as_array().unwrap().len(), 4);
        let back: IndexedDocument = serde_json::from_value(v).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn document_rejects_index_gaps() {
        let json = r#"{"page_count":1,"lines":[{"index":1,"text":"x","bbox":[0,0,1,1],"segment":0}]}"#;
        assert!(serde_json::from_str::<IndexedDocument>(json).is_err());
        let json = r#"{"page_count":1,"lines":[{"index":0,"text":"x\ny","bbox":[0,0,1,1],"segment":0}]}"#;
        assert!(serde_json::from_str::<IndexedDocument>(json).is_err());
    }

    #[test]
    fn render_matches_indexed_prefix_style() {
        let doc = IndexedDocument::from_texts(&["Gu Dabai", "Phone: 13987898888"]).unwrap();
        assert_eq!(render_indexed(&doc), "[0]: Gu Dabai\n[1]: Phone: 13987898888");
    }

    #[test]
    fn render_empty_document() {
        assert_eq!(render_indexed(&IndexedDocument::default()), "");
    }

    #[test]
    fn render_three_lines_has_only_index_prefixes() {
        let doc = IndexedDocument::from_texts(&["alpha", "beta gamma", "delta"]).unwrap();
        let out = render_indexed(&doc);
        // Scan every bracket token independently of the renderer.
        let mut prefixes = Vec::new();
        let bytes = out.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'[' {
                let close = out[i..].find(']').map(|c| i + c).unwrap();
                prefixes.push(out[i + 1..close].to_string());
                i = close;
            }
            i += 1;
        }
        assert_eq!(prefixes, vec!["0", "1", "2"]);
        for (i, line) in out.lines().enumerate() {
            assert!(line.starts_with(&format!("[{i}]: ")));
        }
    }

    #[test]
    fn slice_example_range() {
        let texts: Vec<String> = (0..30).map(|i| format!("line {i}")).collect();
        let doc = IndexedDocument::from_texts(&texts).unwrap();
        let s = slice_lines(&doc, LineRange::new(15, 25)).unwrap();
        assert_eq!(s.split('\n').count(), 11);
        assert_eq!(s, texts[15..=25].join("\n"));
        assert_eq!(slice_lines(&doc, LineRange::new(7, 7)).unwrap(), "line 7");
    }

    #[test]
    fn slice_out_of_bounds() {
        let doc = IndexedDocument::from_texts(&["a", "b"]).unwrap();
        assert!(matches!(
            slice_lines(&doc, LineRange::new(0, 2)),
            Err(DocError::RangeOutOfBounds { .. })
        ));
        assert!(matches!(
            slice_lines(&doc, LineRange::new(1, 0)),
            Err(DocError::RangeOutOfBounds { .. })
        ));
    }

    #[test]
    fn line_range_serializes_as_pair() {
        assert_eq!(serde_json::to_string(&LineRange::new(15, 25)).unwrap(), "[15,25]");
        assert_eq!(LineRange::new(10, 20).intersection_len(&LineRange::new(15, 24)), 6);
        assert_eq!(LineRange::new(10, 20).intersection_len(&LineRange::new(21, 30)), 0);
    }

    fn line_text() -> impl Strategy<Value = String> {
        "[^\r\n]{0,24}"
    }

    proptest! {
        #[test]
        fn render_round_trips(texts in proptest::collection::vec(line_text(), 0..20)) {
            let doc = IndexedDocument::from_texts(&texts).unwrap();
            prop_assert_eq!(parse_rendered(&render_indexed(&doc)).unwrap(), texts);
        }

        #[test]
        fn full_slice_is_full_text(texts in proptest::collection::vec(line_text(), 1..20)) {
            let doc = IndexedDocument::from_texts(&texts).unwrap();
            let all = slice_lines(&doc, LineRange::new(0, doc.len() - 1)).unwrap();
            prop_assert_eq!(all, texts.join("\n"));
        }
    }
}
