//! Reading-order reconstruction.
//!
//! Each page is split into layout segments whose content reads correctly
//! with a plain top-to-bottom, left-to-right sort. Segments are ordered by
//! their top-left corners, lines are rebuilt inside each segment, and the
//! concatenation is numbered into an [`IndexedDocument`].

use std::cmp::Ordering;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc_model::{BoundingBox, DocError, IndexedDocument, IndexedLine, LayoutSegment, PrimitiveId, TextPrimitive};
use crate::ingest::PageGeometry;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("detector transport error: {0}")]
    Transport(String),
    #[error("detector protocol error: {0}")]
    Protocol(String),
    #[error("detector returned an invalid partition: {0}")]
    InvalidPartition(String),
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("no page geometry for page {0}")]
    MissingPage(usize),
    #[error(transparent)]
    Document(#[from] DocError),
}

/// Splits one page into linearly readable segments.
///
/// `member_ids` in the returned segments index into `primitives`. Every
/// primitive must be claimed by exactly one segment.
pub trait SegmentDetector: Send + Sync {
    fn detect(&self, page: &PageGeometry, primitives: &[TextPrimitive]) -> Result<Vec<LayoutSegment>, DetectorError>;
}

/// Recursive projection-gap cut.
///
/// At every level the widest whitespace gap in the x projection is tried
/// first, then the y projection. A gap at least as wide as the axis
/// threshold splits the set; otherwise the set becomes one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricCutDetector {
    pub min_gap_x: f64,
    pub min_gap_y: f64,
    pub max_depth: usize,
}

impl Default for GeometricCutDetector {
    fn default() -> Self {
        GeometricCutDetector { min_gap_x: 18.0, min_gap_y: 14.0, max_depth: 6 }
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn span(b: &BoundingBox, axis: Axis) -> (f64, f64) {
    match axis {
        Axis::X => (b.x_min, b.x_max),
        Axis::Y => (b.y_min, b.y_max),
    }
}

/// Widest gap between merged projection intervals as `(gap_start, width)`.
/// Ties go to the first gap along the axis.
fn widest_gap(primitives: &[TextPrimitive], ids: &[PrimitiveId], axis: Axis) -> Option<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> = ids.iter().map(|&i| span(&primitives[i].bbox, axis)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best: Option<(f64, f64)> = None;
    let mut reach = spans.first()?.1;
    for &(lo, hi) in &spans[1..] {
        if lo > reach {
            let width = lo - reach;
            if best.is_none_or(|(_, w)| width > w) {
                best = Some((reach, width));
            }
        }
        reach = reach.max(hi);
    }
    best
}

impl GeometricCutDetector {
    fn cut(&self, primitives: &[TextPrimitive], ids: Vec<PrimitiveId>, depth: usize, out: &mut Vec<Vec<PrimitiveId>>) {
        if ids.len() > 1 && depth < self.max_depth {
            for (axis, threshold) in [(Axis::X, self.min_gap_x), (Axis::Y, self.min_gap_y)] {
                if let Some((gap_start, width)) = widest_gap(primitives, &ids, axis) {
                    if width >= threshold {
                        let (before, after): (Vec<_>, Vec<_>) =
                            ids.into_iter().partition(|&i| span(&primitives[i].bbox, axis).1 <= gap_start);
                        self.cut(primitives, before, depth + 1, out);
                        self.cut(primitives, after, depth + 1, out);
                        return;
                    }
                }
            }
        }
        if !ids.is_empty() {
            out.push(ids);
        }
    }
}

impl SegmentDetector for GeometricCutDetector {
    fn detect(&self, page: &PageGeometry, primitives: &[TextPrimitive]) -> Result<Vec<LayoutSegment>, DetectorError> {
        let mut groups = Vec::new();
        self.cut(primitives, (0..primitives.len()).collect(), 0, &mut groups);
        Ok(groups.into_iter().map(|ids| segment_from_members(page.page, primitives, ids)).collect())
    }
}

/// One segment per page: the whole page is sorted as a single block.
/// This is the layout-free baseline used for ablations.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveSortDetector;

impl SegmentDetector for NaiveSortDetector {
    fn detect(&self, page: &PageGeometry, primitives: &[TextPrimitive]) -> Result<Vec<LayoutSegment>, DetectorError> {
        if primitives.is_empty() {
            return Ok(Vec::new());
        }
        Ok(vec![segment_from_members(page.page, primitives, (0..primitives.len()).collect())])
    }
}

fn segment_from_members(page: usize, primitives: &[TextPrimitive], member_ids: Vec<PrimitiveId>) -> LayoutSegment {
    let bbox = BoundingBox::union_all(member_ids.iter().map(|&i| &primitives[i].bbox))
        .expect("segment has members");
    LayoutSegment { bbox, page, member_ids }
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    page: &'a PageGeometry,
    primitives: &'a [TextPrimitive],
}

#[derive(Deserialize)]
struct DetectResponse {
    segments: Vec<RemoteSegment>,
}

#[derive(Deserialize)]
struct RemoteSegment {
    bbox: BoundingBox,
    member_ids: Vec<PrimitiveId>,
}

/// Delegates segmentation to an HTTP service.
///
/// Request: `POST {"page": {...}, "primitives": [...]}`.
/// Response: `{"segments": [{"bbox": [x0,y0,x1,y1], "member_ids": [..]}]}`.
pub struct ExternalDetector {
    url: String,
    agent: ureq::Agent,
}

impl ExternalDetector {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        ExternalDetector { url: url.into(), agent }
    }
}

impl SegmentDetector for ExternalDetector {
    fn detect(&self, page: &PageGeometry, primitives: &[TextPrimitive]) -> Result<Vec<LayoutSegment>, DetectorError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(DetectRequest { page, primitives })
            .map_err(|e| DetectorError::Transport(e.to_string()))?;
        let body: DetectResponse =
            response.body_mut().read_json().map_err(|e| DetectorError::Protocol(e.to_string()))?;
        Ok(body
            .segments
            .into_iter()
            .map(|s| LayoutSegment { bbox: s.bbox, page: page.page, member_ids: s.member_ids })
            .collect())
    }
}

/// Checks that `segments` partition `0..n` and that each member's center
/// lies inside its segment.
pub fn validate_partition(segments: &[LayoutSegment], primitives: &[TextPrimitive]) -> Result<(), DetectorError> {
    let mut seen = vec![false; primitives.len()];
    for (s, seg) in segments.iter().enumerate() {
        if seg.member_ids.is_empty() {
            return Err(DetectorError::InvalidPartition(format!("segment {s} has no members")));
        }
        for &id in &seg.member_ids {
            let p = primitives
                .get(id)
                .ok_or_else(|| DetectorError::InvalidPartition(format!("segment {s} references unknown primitive {id}")))?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(DetectorError::InvalidPartition(format!("primitive {id} claimed twice")));
            }
            let (cx, cy) = p.bbox.center();
            if !seg.bbox.contains_point(cx, cy) {
                return Err(DetectorError::InvalidPartition(format!("primitive {id} lies outside segment {s}")));
            }
        }
    }
    if let Some(id) = seen.iter().position(|s| !s) {
        return Err(DetectorError::InvalidPartition(format!("primitive {id} not assigned")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Segments whose top edges are this close (points) share a row band.
    pub row_tolerance: f64,
    /// Fragments whose vertical centers differ by at most this multiple of
    /// the median fragment height share a line.
    pub y_tolerance_ratio: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams { row_tolerance: 10.0, y_tolerance_ratio: 0.6 }
    }
}

/// Orders segments by page, then row band of the top edge, then left edge.
pub fn order_segments(mut segments: Vec<LayoutSegment>, row_tolerance: f64) -> Vec<LayoutSegment> {
    segments.sort_by(|a, b| {
        a.page
            .cmp(&b.page)
            .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
            .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
    });
    let mut banded = Vec::with_capacity(segments.len());
    let mut band = 0usize;
    let mut anchor: Option<(usize, f64)> = None;
    for seg in segments {
        match anchor {
            Some((page, y)) if page == seg.page && seg.bbox.y_min - y <= row_tolerance => {}
            Some(_) => {
                band += 1;
                anchor = Some((seg.page, seg.bbox.y_min));
            }
            None => anchor = Some((seg.page, seg.bbox.y_min)),
        }
        banded.push((band, seg));
    }
    banded.sort_by(|(ba, a), (bb, b)| {
        ba.cmp(bb)
            .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
            .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
    });
    banded.into_iter().map(|(_, s)| s).collect()
}

/// A rebuilt line before global indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDraft {
    pub text: String,
    pub bbox: BoundingBox,
    pub primitive_ids: Vec<PrimitiveId>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn reading_cmp(a: &TextPrimitive, b: &TextPrimitive) -> Ordering {
    a.bbox
        .x_min
        .total_cmp(&b.bbox.x_min)
        .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
        .then_with(|| a.text.cmp(&b.text))
}

/// Rebuilds the lines of one segment.
pub fn group_lines(segment: &LayoutSegment, primitives: &[TextPrimitive], y_tolerance_ratio: f64) -> Vec<LineDraft> {
    let mut members: Vec<PrimitiveId> = segment.member_ids.clone();
    if members.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<f64> = members.iter().map(|&i| primitives[i].bbox.height()).collect();
    let tolerance = y_tolerance_ratio * median(&mut heights);

    members.sort_by(|&a, &b| {
        let (pa, pb) = (&primitives[a], &primitives[b]);
        pa.bbox.center_y().total_cmp(&pb.bbox.center_y()).then_with(|| reading_cmp(pa, pb))
    });

    let mut lines: Vec<Vec<PrimitiveId>> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for id in members {
        let cy = primitives[id].bbox.center_y();
        match lines.last_mut() {
            Some(line) if cy - anchor <= tolerance => line.push(id),
            _ => {
                anchor = cy;
                lines.push(vec![id]);
            }
        }
    }

    let mut drafts: Vec<(f64, LineDraft)> = lines
        .into_iter()
        .map(|mut ids| {
            ids.sort_by(|&a, &b| reading_cmp(&primitives[a], &primitives[b]));
            let text = ids
                .iter()
                .map(|&i| primitives[i].text.replace(['\r', '\n'], " ").trim().to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let bbox = BoundingBox::union_all(ids.iter().map(|&i| &primitives[i].bbox)).expect("non-empty line");
            let mean_y = ids.iter().map(|&i| primitives[i].bbox.center_y()).sum::<f64>() / ids.len() as f64;
            (mean_y, LineDraft { text, bbox, primitive_ids: ids })
        })
        .collect();
    drafts.sort_by(|(ya, a), (yb, b)| ya.total_cmp(yb).then(a.bbox.x_min.total_cmp(&b.bbox.x_min)));
    drafts.into_iter().map(|(_, d)| d).collect()
}

/// Canonical order used before detection so results never depend on how
/// the caller ordered its primitives.
fn canonical_cmp(a: &TextPrimitive, b: &TextPrimitive) -> Ordering {
    a.bbox
        .y_min
        .total_cmp(&b.bbox.y_min)
        .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
        .then_with(|| a.text.cmp(&b.text))
        .then(a.bbox.y_max.total_cmp(&b.bbox.y_max))
        .then(a.bbox.x_max.total_cmp(&b.bbox.x_max))
}

/// Full reading-order reconstruction for a document.
///
/// `source_primitive_ids` on the output lines index into `primitives`.
pub fn linearize(
    pages: &[PageGeometry],
    primitives: &[TextPrimitive],
    detector: &dyn SegmentDetector,
    params: LayoutParams,
) -> Result<IndexedDocument, LayoutError> {
    let mut page_ids: Vec<usize> = pages.iter().map(|p| p.page).collect();
    page_ids.extend(primitives.iter().map(|p| p.page));
    page_ids.sort_unstable();
    page_ids.dedup();

    let per_page: Vec<Vec<(usize, LineDraft)>> = page_ids
        .par_iter()
        .map(|&page_no| -> Result<Vec<(usize, LineDraft)>, LayoutError> {
            let mut original: Vec<usize> = (0..primitives.len()).filter(|&i| primitives[i].page == page_no).collect();
            if original.is_empty() {
                return Ok(Vec::new());
            }
            let geometry = pages.iter().find(|p| p.page == page_no).ok_or(LayoutError::MissingPage(page_no))?;
            original.sort_by(|&a, &b| canonical_cmp(&primitives[a], &primitives[b]));
            let local: Vec<TextPrimitive> = original.iter().map(|&i| primitives[i].clone()).collect();

            let segments = detector.detect(geometry, &local)?;
            validate_partition(&segments, &local)?;
            let ordered = order_segments(segments, params.row_tolerance);

            let mut out = Vec::new();
            for (ordinal, seg) in ordered.iter().enumerate() {
                for mut draft in group_lines(seg, &local, params.y_tolerance_ratio) {
                    draft.primitive_ids = draft.primitive_ids.iter().map(|&i| original[i]).collect();
                    out.push((ordinal, draft));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let mut lines = Vec::new();
    let mut segment_base = 0;
    for page_lines in per_page {
        let page_segments = page_lines.iter().map(|(s, _)| s + 1).max().unwrap_or(0);
        for (ordinal, draft) in page_lines {
            lines.push(IndexedLine {
                index: lines.len(),
                text: draft.text,
                bbox: draft.bbox,
                segment_ordinal: segment_base + ordinal,
                source_primitive_ids: draft.primitive_ids,
            });
        }
        segment_base += page_segments;
    }
    let page_count = page_ids.last().map_or(0, |p| p + 1);
    Ok(IndexedDocument::new(lines, page_count)?)
}
