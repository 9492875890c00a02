//! Axis-aligned rectangle kernel over integer nanometer coordinates.
//!
//! All lengths are stored as integer nanometers; micrometers appear only at
//! I/O boundaries. Areas are therefore exact (`u64` nm²) and free of
//! floating-point drift.

use alloc::vec::Vec;
use core::fmt;

/// Integer nanometer coordinate.
pub type Nm = i64;

/// Nanometers per micrometer.
pub const NM_PER_UM: i64 = 1000;

/// Convert an exact nm² area to µm² for reporting.
pub fn nm2_to_um2(a: u64) -> f64 {
    a as f64 / 1.0e6
}

/// Axis-aligned rectangle on a layer.
///
/// Layer 0 is the device plane (cell footprints); routing layers are
/// numbered from 1 (M1) upward.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub layer: u8,
    pub lx: Nm,
    pub ly: Nm,
    pub ux: Nm,
    pub uy: Nm,
}

impl fmt::Debug for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Rect(M{} {} {} {} {})",
            self.layer, self.lx, self.ly, self.ux, self.uy
        )
    }
}

impl Rect {
    pub fn new(layer: u8, lx: Nm, ly: Nm, ux: Nm, uy: Nm) -> Self {
        debug_assert!(lx < ux && ly < uy, "degenerate rect");
        Rect { layer, lx, ly, ux, uy }
    }

    pub fn width(&self) -> Nm {
        self.ux - self.lx
    }

    pub fn height(&self) -> Nm {
        self.uy - self.ly
    }

    pub fn area(&self) -> u64 {
        (self.ux - self.lx) as u64 * (self.uy - self.ly) as u64
    }

    pub fn center_x(&self) -> Nm {
        (self.lx + self.ux) / 2
    }

    pub fn center_y(&self) -> Nm {
        (self.ly + self.uy) / 2
    }

    /// Geometric intersection, ignoring layers. Empty results are `None`.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let lx = self.lx.max(other.lx);
        let ly = self.ly.max(other.ly);
        let ux = self.ux.min(other.ux);
        let uy = self.uy.min(other.uy);
        if lx < ux && ly < uy {
            Some(Rect { layer: self.layer, lx, ly, ux, uy })
        } else {
            None
        }
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.lx < other.ux && other.lx < self.ux && self.ly < other.uy && other.ly < self.uy
    }

    pub fn contains(&self, other: &Rect) -> bool {
        self.lx <= other.lx && self.ly <= other.ly && self.ux >= other.ux && self.uy >= other.uy
    }

    pub fn contains_point(&self, x: Nm, y: Nm) -> bool {
        self.lx <= x && x <= self.ux && self.ly <= y && y <= self.uy
    }

    pub fn expand(&self, dx: Nm, dy: Nm) -> Rect {
        Rect {
            layer: self.layer,
            lx: self.lx - dx,
            ly: self.ly - dy,
            ux: self.ux + dx,
            uy: self.uy + dy,
        }
    }
}

/// Geometry contract violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeomError {
    /// `union_area` was handed rects from more than one layer.
    MixedLayers { expected: u8, found: u8 },
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::MixedLayers { expected, found } => {
                write!(f, "union over mixed layers: expected M{expected}, found M{found}")
            }
        }
    }
}

impl core::error::Error for GeomError {}

/// Exact area of the union of rects on one layer, overlaps counted once.
pub fn union_area(rects: &[Rect]) -> Result<u64, GeomError> {
    if let Some(first) = rects.first() {
        for r in rects {
            if r.layer != first.layer {
                return Err(GeomError::MixedLayers {
                    expected: first.layer,
                    found: r.layer,
                });
            }
        }
    }
    Ok(union_area_planar(rects))
}

/// Union area ignoring the layer tag (plan-view projection).
///
/// Slab decomposition: x coordinates split the plane into vertical slabs,
/// within which the union is a 1-D interval union over y.
pub fn union_area_planar(rects: &[Rect]) -> u64 {
    if rects.is_empty() {
        return 0;
    }
    let mut xs: Vec<Nm> = Vec::with_capacity(rects.len() * 2);
    for r in rects {
        xs.push(r.lx);
        xs.push(r.ux);
    }
    xs.sort_unstable();
    xs.dedup();

    let mut total: u64 = 0;
    let mut spans: Vec<(Nm, Nm)> = Vec::new();
    for w in xs.windows(2) {
        let (slab_lo, slab_hi) = (w[0], w[1]);
        spans.clear();
        for r in rects {
            if r.lx <= slab_lo && r.ux >= slab_hi {
                spans.push((r.ly, r.uy));
            }
        }
        if spans.is_empty() {
            continue;
        }
        spans.sort_unstable();
        let slab_w = (slab_hi - slab_lo) as u64;
        let (mut lo, mut hi) = spans[0];
        let mut len: u64 = 0;
        for &(a, b) in &spans[1..] {
            if a > hi {
                len += (hi - lo) as u64;
                lo = a;
                hi = b;
            } else if b > hi {
                hi = b;
            }
        }
        len += (hi - lo) as u64;
        total += slab_w * len;
    }
    total
}

/// Area of `shape` not covered by any occluder, in nm².
///
/// Occluders may live on any layer; only their plan-view footprint matters.
/// The result is clamped to `[0, area(shape)]` by construction.
pub fn exposed_region(shape: &Rect, occluders: &[Rect]) -> u64 {
    let clipped: Vec<Rect> = occluders
        .iter()
        .filter_map(|o| shape.intersect(o))
        .collect();
    shape.area() - union_area_planar(&clipped)
}
