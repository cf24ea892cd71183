//! Hybrid content intake: OCR dispatch regions and metadata/OCR fusion.
//!
//! The PDF metadata reader and the OCR engine live outside this crate. They
//! hand over [`TextPrimitive`]s as JSONL in page-point coordinates; this
//! module decides where OCR has to run and merges both streams.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc_model::{BoundingBox, TextPrimitive};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid page geometry: {0}")]
    InvalidGeometry(String),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageGeometry {
    pub page: usize,
    pub width: f64,
    pub height: f64,
}

impl PageGeometry {
    /// A4 portrait in points.
    pub const A4: (f64, f64) = (595.0, 842.0);

    pub fn new(page: usize, width: f64, height: f64) -> Result<Self, IngestError> {
        let g = PageGeometry { page, width, height };
        g.validate()?;
        Ok(g)
    }

    pub fn a4(page: usize) -> Self {
        PageGeometry { page, width: Self::A4.0, height: Self::A4.1 }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.width.is_finite() && self.height.is_finite() && self.width > 0.0 && self.height > 0.0) {
            return Err(IngestError::InvalidGeometry(format!(
                "page {} has size {}x{}",
                self.page, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox { x_min: 0.0, y_min: 0.0, x_max: self.width, y_max: self.height }
    }
}

/// A page area not covered by metadata text, to be sent to OCR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcrRegion {
    pub page: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    /// Side of a grid cell in points.
    pub grid_resolution: f64,
    /// Regions below this area (pt²) are dropped.
    pub min_area: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        RegionParams { grid_resolution: 4.0, min_area: 400.0 }
    }
}

/// Cell-level occupancy grid over one page.
struct Grid {
    cols: usize,
    rows: usize,
    res: f64,
    covered: Vec<bool>,
}

impl Grid {
    fn new(page: &PageGeometry, res: f64) -> Self {
        let cols = (page.width / res).ceil() as usize;
        let rows = (page.height / res).ceil() as usize;
        Grid { cols, rows, res, covered: vec![false; cols * rows] }
    }

    /// Marks every cell whose interior intersects `b`.
    fn mask(&mut self, b: &BoundingBox) {
        if b.width() <= 0.0 || b.height() <= 0.0 {
            return;
        }
        let c0 = (b.x_min / self.res).floor() as usize;
        let r0 = (b.y_min / self.res).floor() as usize;
        let c1 = ((b.x_max / self.res).ceil() as usize).min(self.cols);
        let r1 = ((b.y_max / self.res).ceil() as usize).min(self.rows);
        for r in r0..r1 {
            for c in c0..c1 {
                self.covered[r * self.cols + c] = true;
            }
        }
    }
}

/// Maximal uncovered rectangles of the page grid, merged greedily in
/// row-major order.
///
/// Each free cell that is not yet claimed starts a rectangle which is
/// extended right as far as possible, then down while the whole row span
/// stays free. Rectangles are clipped to the page and dropped when smaller
/// than `params.min_area`.
pub fn compute_ocr_regions(
    page: &PageGeometry,
    metadata_boxes: &[BoundingBox],
    params: RegionParams,
) -> Result<Vec<OcrRegion>, IngestError> {
    page.validate()?;
    if !(params.grid_resolution.is_finite() && params.grid_resolution > 0.0) {
        return Err(IngestError::InvalidGeometry(format!(
            "grid resolution {} must be positive",
            params.grid_resolution
        )));
    }
    let mut grid = Grid::new(page, params.grid_resolution);
    for b in metadata_boxes {
        grid.mask(b);
    }

    let (cols, rows) = (grid.cols, grid.rows);
    let mut claimed = grid.covered.clone();
    let mut regions = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if claimed[r * cols + c] {
                continue;
            }
            let mut c_end = c;
            while c_end + 1 < cols && !claimed[r * cols + c_end + 1] {
                c_end += 1;
            }
            let mut r_end = r;
            while r_end + 1 < rows && (c..=c_end).all(|cc| !claimed[(r_end + 1) * cols + cc]) {
                r_end += 1;
            }
            for rr in r..=r_end {
                for cc in c..=c_end {
                    claimed[rr * cols + cc] = true;
                }
            }
            let res = grid.res;
            let bbox = BoundingBox {
                x_min: c as f64 * res,
                y_min: r as f64 * res,
                x_max: ((c_end + 1) as f64 * res).min(page.width),
                y_max: ((r_end + 1) as f64 * res).min(page.height),
            };
            if bbox.area() >= params.min_area {
                regions.push(OcrRegion { page: page.page, bbox });
            }
        }
    }
    Ok(regions)
}

/// Fraction of `ocr`'s own area covered by `meta`. A degenerate OCR box
/// counts as fully covered when it lies inside the metadata box.
fn overlap_over_own_area(ocr: &BoundingBox, meta: &BoundingBox) -> f64 {
    let area = ocr.area();
    if area <= 0.0 {
        return if meta.contains(ocr) { 1.0 } else { 0.0 };
    }
    ocr.intersection_area(meta) / area
}

/// Merges both streams: every metadata primitive is kept, and an OCR
/// primitive survives unless more than `overlap_threshold` of its own area
/// lies under a metadata primitive on the same page.
///
/// Output order is metadata in input order followed by surviving OCR in
/// input order.
pub fn fuse_content(
    metadata: &[TextPrimitive],
    ocr: &[TextPrimitive],
    overlap_threshold: f64,
) -> Vec<TextPrimitive> {
    let mut out = metadata.to_vec();
    out.extend(
        ocr.iter()
            .filter(|o| {
                !metadata.iter().any(|m| {
                    m.page == o.page && overlap_over_own_area(&o.bbox, &m.bbox) > overlap_threshold
                })
            })
            .cloned(),
    );
    out
}

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

pub fn read_primitives_jsonl<R: BufRead>(reader: R) -> Result<Vec<TextPrimitive>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line).map_err(|source| IngestError::Parse { line: i + 1, source })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_primitives_jsonl<W: Write>(mut writer: W, primitives: &[TextPrimitive]) -> Result<(), IngestError> {
    for p in primitives {
        serde_json::to_writer(&mut writer, p).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
