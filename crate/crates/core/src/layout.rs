//! In-memory layout: rows, placed instances, signal nets with routed
//! geometry, IO pins, and the immutable power mesh.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geom::{Nm, Rect};
use crate::tech::{PinDir, Technology};

/// Row orientation. FS rows flip cell geometry about the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orient {
    N,
    FS,
}

/// One placement row: `num_sites` sites of `site_width` starting at the
/// origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub index: u32,
    pub origin_x: Nm,
    pub origin_y: Nm,
    pub num_sites: u32,
    pub orient: Orient,
}

/// A placed cell, snapped to the site grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub master: String,
    pub width_sites: u32,
    pub row: u32,
    /// Leftmost occupied site within the row.
    pub site_x: u32,
    pub fixed: bool,
    pub is_asset: bool,
}

/// Die-boundary pin with an absolute rect on a routing layer.
#[derive(Clone, Debug, PartialEq)]
pub struct IoPin {
    pub name: String,
    pub dir: PinDir,
    pub layer: u8,
    pub rect: Rect,
}

/// Connection point of a net.
#[derive(Clone, Debug, PartialEq)]
pub enum PinRef {
    /// Pin of a placed instance; `offset` is the master's pin rect.
    Cell { inst: u32, pin: String, offset: Rect },
    /// Index into `Layout::io_pins`.
    Io { io: u32 },
}

/// Via placement: cut between `lower_layer` and `lower_layer + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ViaPlacement {
    pub lower_layer: u8,
    pub x: Nm,
    pub y: Nm,
}

/// Signal net with routed wire rects and via placements.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub name: String,
    pub pins: Vec<PinRef>,
    pub is_asset: bool,
    pub widened: bool,
    /// Width multiplier for non-default-rule routing (1 = default width).
    pub ndr_width_mult: f64,
    pub preferred_bot: Option<u8>,
    pub preferred_top: Option<u8>,
    pub wires: Vec<Rect>,
    pub vias: Vec<ViaPlacement>,
}

impl Net {
    pub fn new(name: String) -> Self {
        Net {
            name,
            pins: Vec::new(),
            is_asset: false,
            widened: false,
            ndr_width_mult: 1.0,
            preferred_bot: None,
            preferred_top: None,
            wires: Vec::new(),
            vias: Vec::new(),
        }
    }

    pub fn has_wires_on(&self, layer: u8) -> bool {
        self.wires.iter().any(|w| w.layer == layer)
    }
}

/// Power-mesh stripe; never modified by any hardening operation.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecialWire {
    pub net: String,
    pub rect: Rect,
}

/// Security-sensitive instance and net names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssetSet {
    pub cell_assets: BTreeSet<String>,
    pub net_assets: BTreeSet<String>,
}

/// Full layout: technology plus die, rows, placement, and routing.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub tech: Technology,
    pub design_name: String,
    pub die: Rect,
    pub rows: Vec<Row>,
    pub instances: Vec<Instance>,
    pub nets: Vec<Net>,
    pub io_pins: Vec<IoPin>,
    pub special_wires: Vec<SpecialWire>,
}

/// Placement-legality failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegalityError {
    /// Two instances overlap in sites; names in deterministic order.
    Overlap { a: String, b: String, row: u32 },
    OutsideRow { inst: String },
    UnknownRow { inst: String, row: u32 },
}

impl fmt::Display for LegalityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LegalityError::Overlap { a, b, row } => {
                write!(f, "instances {a} and {b} overlap in row {row}")
            }
            LegalityError::OutsideRow { inst } => {
                write!(f, "instance {inst} extends past its row")
            }
            LegalityError::UnknownRow { inst, row } => {
                write!(f, "instance {inst} references missing row {row}")
            }
        }
    }
}

impl core::error::Error for LegalityError {}

/// Per-row bitmap of occupied sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteGrid {
    rows: Vec<Vec<bool>>,
}

impl SiteGrid {
    pub fn empty(layout: &Layout) -> Self {
        SiteGrid {
            rows: layout
                .rows
                .iter()
                .map(|r| alloc::vec![false; r.num_sites as usize])
                .collect(),
        }
    }

    pub fn occupied(&self, row: u32, site: u32) -> bool {
        self.rows[row as usize][site as usize]
    }

    pub fn row(&self, row: u32) -> &[bool] {
        &self.rows[row as usize]
    }

    pub fn set(&mut self, row: u32, site: u32, v: bool) {
        self.rows[row as usize][site as usize] = v;
    }

    /// True if `sites..sites+len` in `row` are all free.
    pub fn run_free(&self, row: u32, site: u32, len: u32) -> bool {
        let r = &self.rows[row as usize];
        let end = site as usize + len as usize;
        if end > r.len() {
            return false;
        }
        r[site as usize..end].iter().all(|&b| !b)
    }

    pub fn total_occupied(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count() as u64)
            .sum()
    }

    pub fn total_sites(&self) -> u64 {
        self.rows.iter().map(|r| r.len() as u64).sum()
    }
}

/// Occupancy grid over a legal placement; overlapping instances are a
/// legality error naming the offenders.
pub fn build_occupancy(layout: &Layout) -> Result<SiteGrid, LegalityError> {
    let mut grid = SiteGrid::empty(layout);
    // owner of each marked site, for overlap reporting
    let mut owner: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for (idx, inst) in layout.instances.iter().enumerate() {
        let row = layout
            .rows
            .get(inst.row as usize)
            .ok_or_else(|| LegalityError::UnknownRow { inst: inst.name.clone(), row: inst.row })?;
        if inst.site_x + inst.width_sites > row.num_sites {
            return Err(LegalityError::OutsideRow { inst: inst.name.clone() });
        }
        for s in inst.site_x..inst.site_x + inst.width_sites {
            if grid.occupied(inst.row, s) {
                let other = owner[&(inst.row, s)];
                let (mut a, mut b) =
                    (layout.instances[other as usize].name.clone(), inst.name.clone());
                if b < a {
                    core::mem::swap(&mut a, &mut b);
                }
                return Err(LegalityError::Overlap { a, b, row: inst.row });
            }
            grid.set(inst.row, s, true);
            owner.insert((inst.row, s), idx as u32);
        }
    }
    Ok(grid)
}

impl Layout {
    /// Device-plane footprint of an instance.
    pub fn inst_rect(&self, inst: &Instance) -> Rect {
        let row = &self.rows[inst.row as usize];
        let lx = row.origin_x + inst.site_x as Nm * self.tech.site_width;
        Rect {
            layer: 0,
            lx,
            ly: row.origin_y,
            ux: lx + inst.width_sites as Nm * self.tech.site_width,
            uy: row.origin_y + self.tech.site_height,
        }
    }

    pub fn inst_index(&self, name: &str) -> Option<u32> {
        self.instances
            .iter()
            .position(|i| i.name == name)
            .map(|i| i as u32)
    }

    pub fn net_index(&self, name: &str) -> Option<u32> {
        self.nets.iter().position(|n| n.name == name).map(|i| i as u32)
    }

    /// Absolute rect of a net pin, applying row orientation for cell pins.
    pub fn pin_rect(&self, pin: &PinRef) -> Rect {
        match pin {
            PinRef::Cell { inst, offset, .. } => {
                let inst = &self.instances[*inst as usize];
                let row = &self.rows[inst.row as usize];
                let base = self.inst_rect(inst);
                let (ly, uy) = match row.orient {
                    Orient::N => (base.ly + offset.ly, base.ly + offset.uy),
                    Orient::FS => (
                        base.ly + self.tech.site_height - offset.uy,
                        base.ly + self.tech.site_height - offset.ly,
                    ),
                };
                Rect {
                    layer: offset.layer,
                    lx: base.lx + offset.lx,
                    ly,
                    ux: base.lx + offset.ux,
                    uy,
                }
            }
            PinRef::Io { io } => self.io_pins[*io as usize].rect,
        }
    }

    /// Half-perimeter of a net's pin bounding box.
    pub fn net_hpwl(&self, net: &Net) -> Nm {
        let mut lx = Nm::MAX;
        let mut ly = Nm::MAX;
        let mut ux = Nm::MIN;
        let mut uy = Nm::MIN;
        for p in &net.pins {
            let r = self.pin_rect(p);
            lx = lx.min(r.center_x());
            ly = ly.min(r.center_y());
            ux = ux.max(r.center_x());
            uy = uy.max(r.center_y());
        }
        if lx > ux {
            0
        } else {
            (ux - lx) + (uy - ly)
        }
    }

    /// Total routed wirelength per layer (centerline length), in nm.
    pub fn wirelength_by_layer(&self) -> Vec<u64> {
        let mut per = alloc::vec![0u64; self.tech.layers.len() + 1];
        for net in &self.nets {
            for w in &net.wires {
                let wl = self.tech.layer(w.layer);
                let len = match wl.dir {
                    crate::tech::Dir::Horizontal => w.width() - w.height(),
                    crate::tech::Dir::Vertical => w.height() - w.width(),
                };
                per[w.layer as usize] += len.max(0) as u64;
            }
        }
        per
    }

    /// Via count per cut level (index k = vias between Mk and Mk+1).
    pub fn vias_by_level(&self) -> Vec<u64> {
        let mut per = alloc::vec![0u64; self.tech.layers.len()];
        for net in &self.nets {
            for v in &net.vias {
                per[v.lower_layer as usize] += 1;
            }
        }
        per
    }

    /// Placement density: occupied sites over total sites.
    pub fn density(&self) -> f64 {
        let total: u64 = self.rows.iter().map(|r| r.num_sites as u64).sum();
        if total == 0 {
            return 0.0;
        }
        let occ: u64 = self.instances.iter().map(|i| i.width_sites as u64).sum();
        occ as f64 / total as f64
    }

    /// Mark asset flags from a resolved asset set.
    pub fn bind_assets(&mut self, assets: &AssetSet) {
        for inst in &mut self.instances {
            inst.is_asset = assets.cell_assets.contains(&inst.name);
        }
        for net in &mut self.nets {
            net.is_asset = assets.net_assets.contains(&net.name);
        }
    }

    /// All metal rects (signal and special) on one layer.
    pub fn metal_on_layer(&self, layer: u8) -> Vec<Rect> {
        let mut v: Vec<Rect> = Vec::new();
        for net in &self.nets {
            for w in &net.wires {
                if w.layer == layer {
                    v.push(*w);
                }
            }
        }
        for s in &self.special_wires {
            if s.rect.layer == layer {
                v.push(s.rect);
            }
        }
        v
    }
}

/// Routing-connectivity failures (used by generators and pipeline checks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectError {
    PinNotCovered { net: String, pin: usize },
    Disconnected { net: String },
}

impl fmt::Display for ConnectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectError::PinNotCovered { net, pin } => {
                write!(f, "net {net}: pin {pin} not covered by routing")
            }
            ConnectError::Disconnected { net } => {
                write!(f, "net {net}: routed shapes form more than one component")
            }
        }
    }
}

impl core::error::Error for ConnectError {}

/// Verify that every multi-pin net's wires and vias form one connected
/// component touching all pins.
pub fn check_connectivity(layout: &Layout) -> Result<(), ConnectError> {
    for net in &layout.nets {
        if net.pins.len() < 2 {
            continue;
        }
        // nodes: wires, then pins
        let n_wires = net.wires.len();
        let n = n_wires + net.pins.len();
        let mut dsu: Vec<u32> = (0..n as u32).collect();
        fn find(dsu: &mut [u32], x: u32) -> u32 {
            let mut x = x;
            while dsu[x as usize] != x {
                dsu[x as usize] = dsu[dsu[x as usize] as usize];
                x = dsu[x as usize];
            }
            x
        }
        fn union(dsu: &mut [u32], a: u32, b: u32) {
            let (ra, rb) = (find(dsu, a), find(dsu, b));
            if ra != rb {
                dsu[ra as usize] = rb;
            }
        }
        for i in 0..n_wires {
            for j in i + 1..n_wires {
                let (a, b) = (&net.wires[i], &net.wires[j]);
                if a.layer == b.layer && touches(a, b) {
                    union(&mut dsu, i as u32, j as u32);
                }
            }
        }
        for v in &net.vias {
            // connect wires the via lands on, on both layers
            let mut below: Option<u32> = None;
            let mut above: Option<u32> = None;
            for (i, w) in net.wires.iter().enumerate() {
                if w.contains_point(v.x, v.y) {
                    if w.layer == v.lower_layer {
                        below = Some(i as u32);
                    } else if w.layer == v.lower_layer + 1 {
                        above = Some(i as u32);
                    }
                }
            }
            if let (Some(a), Some(b)) = (below, above) {
                union(&mut dsu, a, b);
            }
        }
        for (pi, pin) in net.pins.iter().enumerate() {
            let pr = layout.pin_rect(pin);
            let mut hit = false;
            for (i, w) in net.wires.iter().enumerate() {
                if w.layer == pr.layer && touches(w, &pr) {
                    union(&mut dsu, i as u32, (n_wires + pi) as u32);
                    hit = true;
                }
            }
            if !hit {
                return Err(ConnectError::PinNotCovered { net: net.name.clone(), pin: pi });
            }
        }
        let root = find(&mut dsu, n_wires as u32);
        for i in 0..n as u32 {
            // unreferenced wires are allowed to dangle only if they touch the tree
            if i >= n_wires as u32 && find(&mut dsu, i) != root {
                return Err(ConnectError::Disconnected { net: net.name.clone() });
            }
        }
    }
    Ok(())
}

/// Closed-boundary contact test (shared edges or corners count).
fn touches(a: &Rect, b: &Rect) -> bool {
    a.lx <= b.ux && b.lx <= a.ux && a.ly <= b.uy && b.ly <= a.uy
}
