//! Shared fixtures for unit tests.

use alloc::collections::BTreeMap;
use alloc::vec;

use crate::geom::{Nm, Rect};
use crate::layout::{Instance, Layout, Orient, Row};
use crate::tech::{Dir, Layer, Technology};

pub fn tiny_tech() -> Technology {
    Technology {
        site_width: 190,
        site_height: 1400,
        layers: vec![
            Layer {
                index: 1,
                name: "M1".into(),
                dir: Dir::Horizontal,
                pitch: 200,
                default_width: 70,
                min_spacing: 70,
            },
            Layer {
                index: 2,
                name: "M2".into(),
                dir: Dir::Vertical,
                pitch: 190,
                default_width: 70,
                min_spacing: 70,
            },
        ],
        vias: vec![],
        macros: BTreeMap::new(),
        m_top: 2,
    }
}

/// Empty layout with a uniform grid of `rows` x `sites` and the tiny
/// two-layer technology.
pub fn grid_layout(rows: u32, sites: u32) -> Layout {
    let tech = tiny_tech();
    let die = Rect::new(
        0,
        0,
        0,
        sites as Nm * tech.site_width,
        rows as Nm * tech.site_height,
    );
    Layout {
        tech,
        design_name: "t".into(),
        die,
        rows: (0..rows)
            .map(|i| Row {
                index: i,
                origin_x: 0,
                origin_y: i as Nm * 1400,
                num_sites: sites,
                orient: if i % 2 == 0 { Orient::N } else { Orient::FS },
            })
            .collect(),
        instances: vec![],
        nets: vec![],
        io_pins: vec![],
        special_wires: vec![],
    }
}

pub fn inst(name: &str, row: u32, site_x: u32, w: u32) -> Instance {
    Instance {
        name: name.into(),
        master: "X".into(),
        width_sites: w,
        row,
        site_x,
        fixed: false,
        is_asset: false,
    }
}
