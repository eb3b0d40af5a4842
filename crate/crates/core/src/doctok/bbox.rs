use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution of the normalized layout grid.
pub const LAYOUT_GRID: u32 = 1000;

/// Pixel-space box, `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        BBox { x0, y0, x1, y1 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BBox {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn is_ordered(&self) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1
    }

    pub fn is_finite(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn within_page(&self, width: f64, height: f64) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= width && self.y1 <= height
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn center_y(&self) -> f64 {
        (self.y0 + self.y1) / 2.0
    }
}

/// Union of character boxes.
pub fn token_bbox(char_boxes: &[BBox]) -> Result<BBox> {
    let (first, rest) = char_boxes
        .split_first()
        .ok_or_else(|| Error::invalid("token has no character boxes"))?;
    Ok(rest.iter().fold(*first, |acc, b| acc.union(b)))
}

/// Result of enlarging a token box by the context ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropBox {
    pub bbox: BBox,
    /// The source box had zero width or height; a 1px extent was assumed
    /// for that side when computing the margin.
    pub degenerate: bool,
}

/// Enlarges `bbox` by `r` times its width (height) on the left and right
/// (top and bottom) and clamps to the page.
pub fn crop_box(bbox: &BBox, r: f64, page_w: f64, page_h: f64) -> Result<CropBox> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("context ratio must be >= 0, got {r}")));
    }
    if !bbox.is_ordered() || !bbox.is_finite() {
        return Err(Error::invalid(format!("malformed box {bbox:?}")));
    }
    let (w, h) = (bbox.width(), bbox.height());
    let degenerate = w == 0.0 || h == 0.0;
    let mx = r * if w == 0.0 { 1.0 } else { w };
    let my = r * if h == 0.0 { 1.0 } else { h };
    Ok(CropBox {
        bbox: BBox {
            x0: (bbox.x0 - mx).clamp(0.0, page_w),
            y0: (bbox.y0 - my).clamp(0.0, page_h),
            x1: (bbox.x1 + mx).clamp(0.0, page_w),
            y1: (bbox.y1 + my).clamp(0.0, page_h),
        },
        degenerate,
    })
}

/// `(x0, y0, x1, y1, w, h)` on the 0..=1000 grid.
pub type NormBox = [u32; 6];

fn scale(v: f64, dim: f64) -> u32 {
    // Round half up, then clamp.
    let s = (v * f64::from(LAYOUT_GRID) / dim + 0.5).floor();
    s.clamp(0.0, f64::from(LAYOUT_GRID)) as u32
}

/// Scales a pixel box onto the layout grid. Width and height are taken
/// after rounding so that `w == x1 - x0` holds exactly.
pub fn normalize_box(bbox: &BBox, page_w: f64, page_h: f64) -> Result<NormBox> {
    if !(page_w > 0.0 && page_h > 0.0) {
        return Err(Error::invalid(format!(
            "page dimensions must be positive, got {page_w}x{page_h}"
        )));
    }
    let x0 = scale(bbox.x0, page_w);
    let y0 = scale(bbox.y0, page_h);
    let x1 = scale(bbox.x1, page_w).max(x0);
    let y1 = scale(bbox.y1, page_h).max(y0);
    Ok([x0, y0, x1, y1, x1 - x0, y1 - y0])
}
