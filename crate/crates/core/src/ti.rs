//! Placement hardening against Trojan insertion: eliminate vulnerable
//! regions with one-site nudges and one-row pushes, legalized by a
//! minimal-displacement row legalizer.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::RunConfig;
use crate::geom::Nm;
use crate::layout::{build_occupancy, Layout, LegalityError, SiteGrid};
use crate::route::{self, RouteError};
use crate::vuln::{find_corners, find_vulnerable_regions, VulnerableRegion};

/// Search radius for corner candidates, in rows.
pub const SEARCH_RADIUS_ROWS: i64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveMode {
    Nudge,
    Push,
}

impl fmt::Display for MoveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveMode::Nudge => write!(f, "nudge"),
            MoveMode::Push => write!(f, "push"),
        }
    }
}

/// One iteration of the hardening loop.
#[derive(Clone, Debug)]
pub struct TiRound {
    pub iteration: u32,
    pub mode: MoveMode,
    pub regions_before: usize,
    pub regions_after: usize,
    pub sites_before: u64,
    pub sites_after: u64,
    pub moved_cells: Vec<String>,
}

#[derive(Debug)]
pub enum TiError {
    IllegalInput(LegalityError),
    /// The loop hit the iteration cap with regions remaining; the round
    /// log is attached for diagnosis.
    NonConvergence { rounds: Vec<TiRound>, remaining: usize },
    /// Restoring connectivity for nets attached to moved cells failed.
    Reroute(RouteError),
}

impl fmt::Display for TiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiError::IllegalInput(e) => write!(f, "illegal input placement: {e}"),
            TiError::NonConvergence { rounds, remaining } => write!(
                f,
                "no convergence after {} rounds; {} regions remain",
                rounds.len(),
                remaining
            ),
            TiError::Reroute(e) => write!(f, "post-move reroute failed: {e}"),
        }
    }
}

impl core::error::Error for TiError {}

/// Per-row instance index: (site_x, instance id) sorted within each row.
pub struct RowIndex {
    rows: Vec<Vec<(u32, u32)>>,
}

impl RowIndex {
    pub fn build(layout: &Layout) -> Self {
        let mut rows = alloc::vec![Vec::new(); layout.rows.len()];
        for (i, inst) in layout.instances.iter().enumerate() {
            rows[inst.row as usize].push((inst.site_x, i as u32));
        }
        for r in &mut rows {
            r.sort_unstable();
        }
        RowIndex { rows }
    }

    fn update(&mut self, inst: u32, old_row: u32, old_x: u32, new_row: u32, new_x: u32) {
        let r = &mut self.rows[old_row as usize];
        if let Ok(pos) = r.binary_search(&(old_x, inst)) {
            r.remove(pos);
        }
        let r = &mut self.rows[new_row as usize];
        if let Err(pos) = r.binary_search(&(new_x, inst)) {
            r.insert(pos, (new_x, inst));
        }
    }
}

/// Nearest movable instance abutting the region periphery, by Euclidean
/// distance from `corner` to the instance center; ties break on the
/// lexicographically smaller name.
///
/// An instance abuts the periphery when its footprint, expanded by one
/// site horizontally and one row vertically, overlaps the region bbox.
/// Candidates beyond [`SEARCH_RADIUS_ROWS`] rows from the corner are
/// ignored; `None` means this corner is skipped for the round.
pub fn find_cell_near(
    layout: &Layout,
    index: &RowIndex,
    corner: (Nm, Nm),
    region: &VulnerableRegion,
) -> Option<u32> {
    let sw = layout.tech.site_width;
    let sh = layout.tech.site_height;
    let bbox = &region.bbox;
    let mut best: Option<(i64, &str, u32)> = None;
    for (ri, row) in layout.rows.iter().enumerate() {
        let row_center = row.origin_y + sh / 2;
        if (row_center - corner.1).abs() > SEARCH_RADIUS_ROWS * sh {
            continue;
        }
        if row.origin_y + sh < bbox.ly - sh || row.origin_y > bbox.uy + sh {
            continue;
        }
        for &(site_x, id) in &index.rows[ri] {
            let inst = &layout.instances[id as usize];
            let lx = row.origin_x + site_x as Nm * sw;
            let ux = lx + inst.width_sites as Nm * sw;
            if ux + sw <= bbox.lx {
                continue;
            }
            if lx - sw >= bbox.ux {
                break; // sorted by site_x
            }
            if inst.fixed {
                continue;
            }
            let cx = (lx + ux) / 2;
            let cy = row_center;
            let d2 = (cx - corner.0) * (cx - corner.0) + (cy - corner.1) * (cy - corner.1);
            let better = match &best {
                None => true,
                Some((bd, bn, _)) => d2 < *bd || (d2 == *bd && inst.name.as_str() < *bn),
            };
            if better {
                best = Some((d2, inst.name.as_str(), id));
            }
        }
    }
    best.map(|(_, _, id)| id)
}

/// Shift a cell one site horizontally toward `target_x`, staying in its
/// row. Returns false without moving when the cell is already centered on
/// the target, sits at a row end, or the destination site is occupied.
pub fn nudge(layout: &mut Layout, grid: &mut SiteGrid, inst_id: u32, target_x: Nm) -> bool {
    let inst = &layout.instances[inst_id as usize];
    let row = &layout.rows[inst.row as usize];
    let sw = layout.tech.site_width;
    let lx = row.origin_x + inst.site_x as Nm * sw;
    let cx = lx + inst.width_sites as Nm * sw / 2;
    let (vacated, claimed, new_x) = if target_x > cx {
        if inst.site_x + inst.width_sites >= row.num_sites {
            return false;
        }
        (inst.site_x, inst.site_x + inst.width_sites, inst.site_x + 1)
    } else if target_x < cx {
        if inst.site_x == 0 {
            return false;
        }
        (inst.site_x + inst.width_sites - 1, inst.site_x - 1, inst.site_x - 1)
    } else {
        return false;
    };
    if grid.occupied(inst.row, claimed) {
        return false;
    }
    let row_id = inst.row;
    grid.set(row_id, vacated, false);
    grid.set(row_id, claimed, true);
    layout.instances[inst_id as usize].site_x = new_x;
    true
}

/// Move a cell one row toward `target_y`, keeping its site_x. The result
/// may overlap; the caller must legalize immediately. A cell already in
/// the target row is pushed upward (downward at the top boundary) so the
/// disturbance can unblock stalled nudges.
///
/// Returns the previous row on success so the caller can revert.
pub fn push(layout: &mut Layout, inst_id: u32, target_y: Nm) -> Option<u32> {
    let inst = &layout.instances[inst_id as usize];
    let row = &layout.rows[inst.row as usize];
    let sh = layout.tech.site_height;
    let cy = row.origin_y + sh / 2;
    let up_first = target_y >= cy;
    let candidates: [i64; 2] = if up_first {
        [inst.row as i64 + 1, inst.row as i64 - 1]
    } else {
        [inst.row as i64 - 1, inst.row as i64 + 1]
    };
    let tries: &[i64] = if target_y == cy { &candidates } else { &candidates[..1] };
    for &cand in tries {
        if cand < 0 || cand as usize >= layout.rows.len() {
            continue;
        }
        let new_row = &layout.rows[cand as usize];
        if inst.site_x + inst.width_sites > new_row.num_sites {
            continue;
        }
        let old = inst.row;
        layout.instances[inst_id as usize].row = cand as u32;
        return Some(old);
    }
    None
}

/// Row legalization failure: a touched row cannot hold its cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcoPlaceError {
    pub row: u32,
}

impl fmt::Display for EcoPlaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {} capacity exceeded during legalization", self.row)
    }
}

impl core::error::Error for EcoPlaceError {}

/// A cell displaced by legalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcoMove {
    pub inst: u32,
    pub from_site: u32,
    pub to_site: u32,
}

/// Legalize the rows containing `pushed` instances.
///
/// Cells are processed by position and packed abacus-style: clusters of
/// colliding cells settle at the lower median of their anchor positions,
/// which minimizes total displacement under order preservation. Fixed
/// cells split rows into independent segments; cells that cannot stay in
/// their segment spill to the nearest one with room. Nothing is modified
/// on failure.
pub fn eco_place(layout: &mut Layout, pushed: &[u32]) -> Result<Vec<EcoMove>, EcoPlaceError> {
    let mut touched: BTreeSet<u32> = BTreeSet::new();
    for &p in pushed {
        touched.insert(layout.instances[p as usize].row);
    }
    let mut moves: Vec<EcoMove> = Vec::new();
    let mut placements: Vec<(u32, u32)> = Vec::new();
    for &row_id in &touched {
        let row = &layout.rows[row_id as usize];
        let mut movable: Vec<(u32, u32)> = Vec::new(); // (desired site, inst)
        let mut walls: Vec<(u32, u32)> = Vec::new();
        for (i, inst) in layout.instances.iter().enumerate() {
            if inst.row != row_id {
                continue;
            }
            if inst.fixed {
                walls.push((inst.site_x, inst.site_x + inst.width_sites));
            } else {
                movable.push((inst.site_x, i as u32));
            }
        }
        walls.sort_unstable();
        let mut segments: Vec<(u32, u32)> = Vec::new();
        let mut cursor = 0u32;
        for &(ws, we) in &walls {
            if ws > cursor {
                segments.push((cursor, ws));
            }
            cursor = cursor.max(we);
        }
        if cursor < row.num_sites {
            segments.push((cursor, row.num_sites));
        }
        let placed = legalize_row(layout, row_id, &segments, &movable)?;
        for (inst, site) in placed {
            let old = layout.instances[inst as usize].site_x;
            if old != site {
                moves.push(EcoMove { inst, from_site: old, to_site: site });
            }
            placements.push((inst, site));
        }
    }
    for (inst, site) in placements {
        layout.instances[inst as usize].site_x = site;
    }
    Ok(moves)
}

fn legalize_row(
    layout: &Layout,
    row_id: u32,
    segments: &[(u32, u32)],
    movable: &[(u32, u32)],
) -> Result<Vec<(u32, u32)>, EcoPlaceError> {
    if movable.is_empty() {
        return Ok(Vec::new());
    }
    if segments.is_empty() {
        return Err(EcoPlaceError { row: row_id });
    }
    let n_seg = segments.len();
    let capacity: Vec<u32> = segments.iter().map(|&(s, e)| e - s).collect();
    let mut load = alloc::vec![0u32; n_seg];
    let mut assign: Vec<Vec<(u32, u32)>> = alloc::vec![Vec::new(); n_seg];
    let mut ordered = movable.to_vec();
    ordered.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            layout.instances[a.1 as usize]
                .name
                .cmp(&layout.instances[b.1 as usize].name)
        })
    });
    for &(desired, inst) in &ordered {
        let w = layout.instances[inst as usize].width_sites;
        let mut seg_order: Vec<usize> = (0..n_seg).collect();
        seg_order.sort_by_key(|&s| {
            let (lo, hi) = segments[s];
            if desired >= lo && desired < hi {
                0u64
            } else if desired < lo {
                (lo - desired) as u64
            } else {
                (desired - hi + 1) as u64
            }
        });
        let mut placed = false;
        for s in seg_order {
            if load[s] + w <= capacity[s] {
                assign[s].push((desired, inst));
                load[s] += w;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(EcoPlaceError { row: row_id });
        }
    }
    let mut out = Vec::new();
    for (s, cells) in assign.iter().enumerate() {
        let (lo, hi) = segments[s];
        out.extend(pack_segment(layout, lo, hi, cells));
    }
    Ok(out)
}

/// Order-preserving single-segment packing: clusters settle at the lower
/// median of their anchors (desired position minus intra-cluster offset).
fn pack_segment(layout: &Layout, lo: u32, hi: u32, cells: &[(u32, u32)]) -> Vec<(u32, u32)> {
    struct Cluster {
        first: usize,
        count: usize,
        width: i64,
        anchors: Vec<i64>, // sorted
        pos: i64,
    }
    let lo = lo as i64;
    let hi = hi as i64;
    let settle = |c: &mut Cluster| {
        let med = c.anchors[(c.anchors.len() - 1) / 2];
        c.pos = med.clamp(lo, (hi - c.width).max(lo));
    };
    let mut cells = cells.to_vec();
    cells.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            layout.instances[a.1 as usize]
                .name
                .cmp(&layout.instances[b.1 as usize].name)
        })
    });
    let widths: Vec<i64> = cells
        .iter()
        .map(|&(_, inst)| layout.instances[inst as usize].width_sites as i64)
        .collect();
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, &(desired, _)) in cells.iter().enumerate() {
        let mut c = Cluster {
            first: i,
            count: 1,
            width: widths[i],
            anchors: alloc::vec![desired as i64],
            pos: 0,
        };
        settle(&mut c);
        clusters.push(c);
        while clusters.len() >= 2 {
            let prev = clusters.len() - 2;
            if clusters[prev].pos + clusters[prev].width > clusters[prev + 1].pos {
                let tail = clusters.pop().unwrap();
                let head = clusters.last_mut().unwrap();
                for &a in &tail.anchors {
                    let shifted = a - head.width;
                    let at = head.anchors.partition_point(|&x| x <= shifted);
                    head.anchors.insert(at, shifted);
                }
                head.width += tail.width;
                head.count += tail.count;
                settle(head);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::new();
    for c in &clusters {
        let mut x = c.pos;
        for i in c.first..c.first + c.count {
            out.push((cells[i].1, x as u32));
            x += widths[i];
        }
    }
    out
}

/// Run the full hardening loop until no vulnerable regions remain.
///
/// Bookkeeping follows the stuck-counter scheme: an improving round
/// resets the counter, and after `stuck_max` consecutive non-improving
/// rounds the loop pushes instead of nudging until the count improves.
/// Pushes that cannot be legalized are reverted and simply leave the
/// round unimproved. Nets attached to moved cells are rerouted once at
/// the end when the layout carries routing; placement-only layouts skip
/// that step.
pub fn harden_ti(layout: &mut Layout, cfg: &RunConfig) -> Result<Vec<TiRound>, TiError> {
    let mut grid = build_occupancy(layout).map_err(TiError::IllegalInput)?;
    let mut index = RowIndex::build(layout);
    let mut regions = find_vulnerable_regions(layout, &grid, cfg.vr_threshold);
    let mut best_count = usize::MAX;
    let mut stuck: u32 = 0;
    let mut rounds: Vec<TiRound> = Vec::new();
    let mut moved_insts: BTreeSet<u32> = BTreeSet::new();

    while !regions.is_empty() {
        if rounds.len() as u32 >= cfg.max_ti_iters {
            let remaining = regions.len();
            return Err(TiError::NonConvergence { rounds, remaining });
        }
        let count = regions.len();
        if count < best_count {
            best_count = count;
            stuck = 0;
        } else {
            stuck += 1;
        }
        let mode = if stuck < cfg.stuck_max { MoveMode::Nudge } else { MoveMode::Push };
        let sites_before: u64 = regions.iter().map(|r| r.num_sites).sum();
        let mut moved_cells: Vec<String> = Vec::new();

        for region in &regions {
            let centroid = (region.bbox.center_x(), region.bbox.center_y());
            for corner in find_corners(region) {
                let Some(cell) = find_cell_near(layout, &index, corner, region) else {
                    continue;
                };
                match mode {
                    MoveMode::Nudge => {
                        let before = layout.instances[cell as usize].site_x;
                        if nudge(layout, &mut grid, cell, centroid.0) {
                            let inst = &layout.instances[cell as usize];
                            index.update(cell, inst.row, before, inst.row, inst.site_x);
                            moved_cells.push(inst.name.clone());
                            moved_insts.insert(cell);
                        }
                    }
                    MoveMode::Push => {
                        let old_x = layout.instances[cell as usize].site_x;
                        let Some(old_row) = push(layout, cell, centroid.1) else {
                            continue;
                        };
                        match eco_place(layout, &[cell]) {
                            Ok(eco_moves) => {
                                apply_moves(layout, &mut grid, &mut index, cell, old_row, old_x, &eco_moves);
                                moved_cells.push(layout.instances[cell as usize].name.clone());
                                moved_insts.insert(cell);
                                for m in &eco_moves {
                                    moved_insts.insert(m.inst);
                                    moved_cells.push(layout.instances[m.inst as usize].name.clone());
                                }
                            }
                            Err(_) => {
                                // revert; the round counts as stuck via the counter
                                layout.instances[cell as usize].row = old_row;
                            }
                        }
                    }
                }
            }
        }

        regions = find_vulnerable_regions(layout, &grid, cfg.vr_threshold);
        let sites_after: u64 = regions.iter().map(|r| r.num_sites).sum();
        moved_cells.sort_unstable();
        moved_cells.dedup();
        rounds.push(TiRound {
            iteration: rounds.len() as u32 + 1,
            mode,
            regions_before: count,
            regions_after: regions.len(),
            sites_before,
            sites_after,
            moved_cells,
        });
    }

    // restore connectivity for routed nets whose pins moved
    let dirty: Vec<u32> = layout
        .nets
        .iter()
        .enumerate()
        .filter(|(_, net)| {
            !net.wires.is_empty()
                && net.pins.iter().any(|p| match p {
                    crate::layout::PinRef::Cell { inst, .. } => moved_insts.contains(inst),
                    crate::layout::PinRef::Io { .. } => false,
                })
        })
        .map(|(i, _)| i as u32)
        .collect();
    if !dirty.is_empty() {
        route::route_detail(layout, &dirty).map_err(TiError::Reroute)?;
    }
    Ok(rounds)
}

/// Rebuild grid and index entries after a successful push + legalization.
fn apply_moves(
    layout: &Layout,
    grid: &mut SiteGrid,
    index: &mut RowIndex,
    pushed: u32,
    old_row: u32,
    old_x: u32,
    eco_moves: &[EcoMove],
) {
    let pw = layout.instances[pushed as usize].width_sites;
    for s in old_x..old_x + pw {
        grid.set(old_row, s, false);
    }
    for m in eco_moves {
        if m.inst == pushed {
            continue;
        }
        let inst = &layout.instances[m.inst as usize];
        for s in m.from_site..m.from_site + inst.width_sites {
            grid.set(inst.row, s, false);
        }
    }
    let inst = &layout.instances[pushed as usize];
    for s in inst.site_x..inst.site_x + pw {
        grid.set(inst.row, s, true);
    }
    index.update(pushed, old_row, old_x, inst.row, inst.site_x);
    for m in eco_moves {
        if m.inst == pushed {
            continue;
        }
        let inst = &layout.instances[m.inst as usize];
        for s in inst.site_x..inst.site_x + inst.width_sites {
            grid.set(inst.row, s, true);
        }
        index.update(m.inst, inst.row, m.from_site, inst.row, m.to_site);
    }
}
