//! Technology description: site dimensions, routing layer stack, vias,
//! and macro (cell master) geometry.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geom::{Nm, Rect};

/// Preferred routing direction of a metal layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Horizontal,
    Vertical,
}

/// One routing layer of the metal stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// 1-based stack index (1 = M1).
    pub index: u8,
    pub name: String,
    pub dir: Dir,
    pub pitch: Nm,
    pub default_width: Nm,
    pub min_spacing: Nm,
}

/// Via master connecting `lower` to `lower + 1`; the cut rect is an offset
/// around the via point.
#[derive(Clone, Debug, PartialEq)]
pub struct ViaDef {
    pub name: String,
    pub lower: u8,
    pub cut: Rect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinDir {
    Input,
    Output,
    Inout,
}

/// Pin of a macro: a fixed offset rect inside the cell outline.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroPin {
    pub name: String,
    pub dir: PinDir,
    /// Offset rect relative to the cell origin (lower-left, N orientation).
    pub rect: Rect,
}

/// Cell master: outline plus per-pin offset rects.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroDef {
    pub name: String,
    pub size_x: Nm,
    pub size_y: Nm,
    pub pins: Vec<MacroPin>,
}

impl MacroDef {
    pub fn pin(&self, name: &str) -> Option<&MacroPin> {
        self.pins.iter().find(|p| p.name == name)
    }
}

/// Technology: placement grid, metal stack, vias, and macro library.
#[derive(Clone, Debug, PartialEq)]
pub struct Technology {
    pub site_width: Nm,
    pub site_height: Nm,
    /// Routing layers in stack order; `layers[0]` is M1.
    pub layers: Vec<Layer>,
    pub vias: Vec<ViaDef>,
    pub macros: BTreeMap<String, MacroDef>,
    /// Ceiling layer for demoting asset nets (the Phase-A constraint).
    pub m_top: u8,
}

/// Structural problems detected when assembling a technology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TechError {
    BadSite,
    NoRoutingLayers,
    BadLayerOrder { index: u8 },
    BadMTop { m_top: u8, top_metal: u8 },
    BadLayerParams { layer: String },
}

impl fmt::Display for TechError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TechError::BadSite => write!(f, "site dimensions must be positive"),
            TechError::NoRoutingLayers => write!(f, "technology has no routing layers"),
            TechError::BadLayerOrder { index } => {
                write!(f, "layer indices must be 1..top without gaps (saw {index})")
            }
            TechError::BadMTop { m_top, top_metal } => {
                write!(f, "m_top {m_top} outside 1..={top_metal}")
            }
            TechError::BadLayerParams { layer } => {
                write!(f, "layer {layer}: need pitch > width >= 0 and spacing > 0")
            }
        }
    }
}

impl core::error::Error for TechError {}

/// Demotion ceiling used when none is configured: Table-style defaults of
/// M4 for 10-metal stacks and M3 otherwise, clamped to the stack height.
pub fn default_m_top(top_metal: u8) -> u8 {
    if top_metal >= 10 {
        4
    } else {
        top_metal.min(3)
    }
}

impl Technology {
    /// Validate invariants; intended to run once after construction.
    pub fn validate(&self) -> Result<(), TechError> {
        if self.site_width <= 0 || self.site_height <= 0 {
            return Err(TechError::BadSite);
        }
        if self.layers.is_empty() {
            return Err(TechError::NoRoutingLayers);
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.index as usize != i + 1 {
                return Err(TechError::BadLayerOrder { index: l.index });
            }
            if !(l.pitch > l.default_width && l.default_width >= 0 && l.min_spacing > 0) {
                return Err(TechError::BadLayerParams { layer: l.name.clone() });
            }
        }
        let top = self.top_metal();
        if self.m_top < 1 || self.m_top > top {
            return Err(TechError::BadMTop { m_top: self.m_top, top_metal: top });
        }
        Ok(())
    }

    pub fn top_metal(&self) -> u8 {
        self.layers.len() as u8
    }

    /// Layer by 1-based stack index.
    pub fn layer(&self, index: u8) -> &Layer {
        &self.layers[(index - 1) as usize]
    }

    pub fn layer_by_name(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Track coordinates of a layer across the die: first track half a
    /// pitch in from the lower edge, then every pitch.
    pub fn track_coords(&self, layer: u8, die_lo: Nm, die_hi: Nm) -> Vec<Nm> {
        let l = self.layer(layer);
        let mut v = Vec::new();
        let mut c = die_lo + l.pitch / 2;
        while c + l.default_width / 2 <= die_hi {
            v.push(c);
            c += l.pitch;
        }
        v
    }
}
