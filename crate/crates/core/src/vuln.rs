//! Detection of placement regions vulnerable to Trojan insertion, and the
//! site/track metrics computed over them.

use alloc::vec::Vec;

use crate::geom::{Nm, Rect};
use crate::layout::{Layout, SiteGrid};
use crate::tech::Dir;

/// Maximal run of empty sites within one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmptyRun {
    pub row: u32,
    /// First empty site.
    pub site_start: u32,
    /// Last empty site (inclusive).
    pub site_end: u32,
}

impl EmptyRun {
    pub fn len(&self) -> u32 {
        self.site_end - self.site_start + 1
    }
}

/// Group of threshold-length empty runs, merged across vertically adjacent
/// rows when their site spans overlap horizontally.
#[derive(Clone, Debug, PartialEq)]
pub struct VulnerableRegion {
    pub runs: Vec<EmptyRun>,
    pub bbox: Rect,
    pub num_sites: u64,
}

/// Region bbox corner, in the fixed processing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

impl Corner {
    pub const ORDER: [Corner; 4] = [
        Corner::UpperLeft,
        Corner::UpperRight,
        Corner::LowerLeft,
        Corner::LowerRight,
    ];
}

/// Corner coordinates of a region bbox: UL, UR, LL, LR.
pub fn find_corners(region: &VulnerableRegion) -> [(Nm, Nm); 4] {
    let b = &region.bbox;
    [(b.lx, b.uy), (b.ux, b.uy), (b.lx, b.ly), (b.ux, b.ly)]
}

/// Find all vulnerable regions: maximal empty runs of at least
/// `threshold` sites, merged vertically when adjacent rows' runs overlap
/// horizontally. Output is ordered by bbox lower-left.
pub fn find_vulnerable_regions(layout: &Layout, grid: &SiteGrid, threshold: u32) -> Vec<VulnerableRegion> {
    let runs = collect_runs(layout, grid, threshold);
    merge_runs(layout, &runs)
}

fn collect_runs(layout: &Layout, grid: &SiteGrid, threshold: u32) -> Vec<EmptyRun> {
    let mut runs = Vec::new();
    for row in &layout.rows {
        let bits = grid.row(row.index);
        let mut s = 0usize;
        while s < bits.len() {
            if bits[s] {
                s += 1;
                continue;
            }
            let mut e = s;
            while e + 1 < bits.len() && !bits[e + 1] {
                e += 1;
            }
            if (e - s + 1) as u32 >= threshold {
                runs.push(EmptyRun {
                    row: row.index,
                    site_start: s as u32,
                    site_end: e as u32,
                });
            }
            s = e + 1;
        }
    }
    runs
}

/// Geometric x-interval of a run, in nm.
fn run_span(layout: &Layout, run: &EmptyRun) -> (Nm, Nm) {
    let row = &layout.rows[run.row as usize];
    let sw = layout.tech.site_width;
    (
        row.origin_x + run.site_start as Nm * sw,
        row.origin_x + (run.site_end + 1) as Nm * sw,
    )
}

fn merge_runs(layout: &Layout, runs: &[EmptyRun]) -> Vec<VulnerableRegion> {
    let n = runs.len();
    let mut dsu: Vec<u32> = (0..n as u32).collect();
    fn find(dsu: &mut [u32], x: u32) -> u32 {
        let mut x = x;
        while dsu[x as usize] != x {
            dsu[x as usize] = dsu[dsu[x as usize] as usize];
            x = dsu[x as usize];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&runs[i], &runs[j]);
            if a.row.abs_diff(b.row) != 1 {
                continue;
            }
            let (alx, aux) = run_span(layout, a);
            let (blx, bux) = run_span(layout, b);
            if alx < bux && blx < aux {
                let (ra, rb) = (find(&mut dsu, i as u32), find(&mut dsu, j as u32));
                if ra != rb {
                    dsu[ra as usize] = rb;
                }
            }
        }
    }
    let mut groups: alloc::collections::BTreeMap<u32, Vec<EmptyRun>> =
        alloc::collections::BTreeMap::new();
    for i in 0..n {
        let root = find(&mut dsu, i as u32);
        groups.entry(root).or_default().push(runs[i]);
    }
    let sh = layout.tech.site_height;
    let mut regions: Vec<VulnerableRegion> = groups
        .into_values()
        .map(|mut runs| {
            runs.sort_unstable_by_key(|r| (r.row, r.site_start));
            let mut bbox: Option<Rect> = None;
            let mut sites = 0u64;
            for r in &runs {
                let (lx, ux) = run_span(layout, r);
                let ly = layout.rows[r.row as usize].origin_y;
                let rr = Rect { layer: 0, lx, ly, ux, uy: ly + sh };
                sites += r.len() as u64;
                bbox = Some(match bbox {
                    None => rr,
                    Some(b) => Rect {
                        layer: 0,
                        lx: b.lx.min(rr.lx),
                        ly: b.ly.min(rr.ly),
                        ux: b.ux.max(rr.ux),
                        uy: b.uy.max(rr.uy),
                    },
                });
            }
            VulnerableRegion { runs, bbox: bbox.unwrap(), num_sites: sites }
        })
        .collect();
    regions.sort_by_key(|r| (r.bbox.ly, r.bbox.lx, r.bbox.uy, r.bbox.ux));
    regions
}

/// Security metrics over detected regions: exploitable placement sites
/// and free routing-track segments crossing each region's neighborhood.
///
/// A track segment counts as free when no wire or special stripe on its
/// layer touches the track strip inside the region bbox expanded by one
/// site in x and one row in y. Counting is per (layer, track, region),
/// summed over all layers of the stack.
pub fn ti_metrics(layout: &Layout, regions: &[VulnerableRegion]) -> (u64, u64) {
    let ti_sts: u64 = regions.iter().map(|r| r.num_sites).sum();
    let mut ti_fts = 0u64;
    if regions.is_empty() {
        return (ti_sts, 0);
    }
    // per-layer metal, gathered once
    let top = layout.tech.top_metal();
    let mut metal: Vec<Vec<Rect>> = Vec::with_capacity(top as usize + 1);
    metal.push(Vec::new());
    for k in 1..=top {
        metal.push(layout.metal_on_layer(k));
    }
    let sw = layout.tech.site_width;
    let sh = layout.tech.site_height;
    for region in regions {
        let ebox = Rect {
            layer: 0,
            lx: (region.bbox.lx - sw).max(layout.die.lx),
            ly: (region.bbox.ly - sh).max(layout.die.ly),
            ux: (region.bbox.ux + sw).min(layout.die.ux),
            uy: (region.bbox.uy + sh).min(layout.die.uy),
        };
        for k in 1..=top {
            let l = layout.tech.layer(k);
            let w2 = l.default_width / 2;
            let (die_lo, die_hi, box_lo, box_hi) = match l.dir {
                Dir::Horizontal => (layout.die.ly, layout.die.uy, ebox.ly, ebox.uy),
                Dir::Vertical => (layout.die.lx, layout.die.ux, ebox.lx, ebox.ux),
            };
            for coord in layout.tech.track_coords(k, die_lo, die_hi) {
                if coord < box_lo || coord > box_hi {
                    continue;
                }
                let strip = match l.dir {
                    Dir::Horizontal => Rect {
                        layer: k,
                        lx: ebox.lx,
                        ly: coord - w2,
                        ux: ebox.ux,
                        uy: coord + w2,
                    },
                    Dir::Vertical => Rect {
                        layer: k,
                        lx: coord - w2,
                        ly: ebox.ly,
                        ux: coord + w2,
                        uy: ebox.uy,
                    },
                };
                let occupied = metal[k as usize].iter().any(|m| m.overlaps(&strip));
                if !occupied {
                    ti_fts += 1;
                }
            }
        }
    }
    (ti_sts, ti_fts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_occupancy, Instance};
    use crate::testutil::grid_layout;
    use alloc::format;

    fn fill(layout: &mut Layout, row: u32, ranges: &[(u32, u32)]) {
        for (i, &(s, e)) in ranges.iter().enumerate() {
            layout.instances.push(Instance {
                name: format!("r{row}i{i}"),
                master: "X".into(),
                width_sites: e - s,
                row,
                site_x: s,
                fixed: false,
                is_asset: false,
            });
        }
    }

    #[test]
    fn run_below_threshold_is_ignored() {
        let mut l = grid_layout(1, 40);
        // sites 0..10 and 29..40 occupied; empty run of 19
        fill(&mut l, 0, &[(0, 10), (29, 40)]);
        let g = build_occupancy(&l).unwrap();
        assert!(find_vulnerable_regions(&l, &g, 20).is_empty());
    }

    #[test]
    fn single_run_of_25_is_one_region() {
        let mut l = grid_layout(1, 40);
        fill(&mut l, 0, &[(0, 10), (35, 40)]);
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].num_sites, 25);
        assert_eq!(regions[0].runs.len(), 1);
    }

    #[test]
    fn adjacent_overlapping_runs_merge() {
        let mut l = grid_layout(3, 60);
        fill(&mut l, 0, &[(0, 10), (35, 60)]); // run 10..34
        fill(&mut l, 1, &[(0, 20), (50, 60)]); // run 20..49, overlaps row 0 run
        fill(&mut l, 2, &[(0, 60)]); // full
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].num_sites, 25 + 30);
        // bbox covers both rows
        assert_eq!(regions[0].bbox.ly, 0);
        assert_eq!(regions[0].bbox.uy, 2 * 1400);
    }

    #[test]
    fn disjoint_spans_stay_separate_regions() {
        let mut l = grid_layout(2, 100);
        fill(&mut l, 0, &[(0, 5), (30, 100)]); // run 5..29
        fill(&mut l, 1, &[(0, 60), (85, 100)]); // run 60..84 (no overlap)
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        assert_eq!(regions.len(), 2);
    }

    #[test]
    fn corners_are_bbox_corners() {
        let mut l = grid_layout(1, 60);
        fill(&mut l, 0, &[(0, 10), (41, 60)]); // run 10..40
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        let c = find_corners(&regions[0]);
        let b = &regions[0].bbox;
        assert_eq!(c[0], (b.lx, b.uy));
        assert_eq!(c[1], (b.ux, b.uy));
        assert_eq!(c[2], (b.lx, b.ly));
        assert_eq!(c[3], (b.ux, b.ly));
        // single-row region: upper and lower corners share x
        assert_eq!(b.lx, 10 * 190);
        assert_eq!(b.ux, 41 * 190);
    }

    /// Independent line-scan oracle: enumerates empty runs per row without
    /// the production run collector.
    pub(crate) fn oracle_runs(l: &Layout, g: &SiteGrid, threshold: u32) -> Vec<EmptyRun> {
        let mut out = Vec::new();
        for row in &l.rows {
            let mut len = 0u32;
            for s in 0..=row.num_sites {
                let occ = s == row.num_sites || g.occupied(row.index, s);
                if occ {
                    if len >= threshold {
                        out.push(EmptyRun {
                            row: row.index,
                            site_start: s - len,
                            site_end: s - 1,
                        });
                    }
                    len = 0;
                } else {
                    len += 1;
                }
            }
        }
        out
    }

    #[test]
    fn detection_matches_scan_oracle_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for case in 0..500 {
            let rows = rng.gen_range(1..6);
            let sites = rng.gen_range(30..120);
            let mut l = grid_layout(rows, sites);
            let mut id = 0;
            for row in 0..rows {
                let mut x = 0u32;
                while x < sites {
                    if rng.gen_bool(0.45) {
                        let w = rng.gen_range(1..12).min(sites - x);
                        l.instances.push(Instance {
                            name: format!("c{id}"),
                            master: "X".into(),
                            width_sites: w,
                            row,
                            site_x: x,
                            fixed: false,
                            is_asset: false,
                        });
                        x += w;
                        id += 1;
                    } else {
                        x += rng.gen_range(1..10);
                    }
                }
            }
            let g = build_occupancy(&l).unwrap();
            let threshold = rng.gen_range(5..30);
            let regions = find_vulnerable_regions(&l, &g, threshold);
            let mut got: Vec<EmptyRun> = regions.iter().flat_map(|r| r.runs.clone()).collect();
            got.sort_unstable_by_key(|r| (r.row, r.site_start));
            let mut want = oracle_runs(&l, &g, threshold);
            want.sort_unstable_by_key(|r| (r.row, r.site_start));
            assert_eq!(got, want, "case {case}");
            // per-row site conservation
            for row in &l.rows {
                let occ = (0..row.num_sites)
                    .filter(|&s| g.occupied(row.index, s))
                    .count() as u64;
                let in_regions: u64 = regions
                    .iter()
                    .flat_map(|r| &r.runs)
                    .filter(|r| r.row == row.index)
                    .map(|r| r.len() as u64)
                    .sum();
                let short_runs: u64 = {
                    let all = oracle_runs(&l, &g, 1);
                    all.iter()
                        .filter(|r| r.row == row.index && r.len() < threshold)
                        .map(|r| r.len() as u64)
                        .sum()
                };
                assert_eq!(occ + in_regions + short_runs, row.num_sites as u64);
            }
        }
    }

    #[test]
    fn empty_region_list_gives_zero_metrics() {
        let l = grid_layout(1, 40);
        assert_eq!(ti_metrics(&l, &[]), (0, 0));
    }

    #[test]
    fn free_tracks_match_geometric_count_when_unrouted() {
        let mut l = grid_layout(3, 60);
        fill(&mut l, 0, &[(0, 60)]);
        fill(&mut l, 1, &[(0, 10), (35, 60)]); // run 10..34 in middle row
        fill(&mut l, 2, &[(0, 60)]);
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        assert_eq!(regions.len(), 1);
        let (sts, fts) = ti_metrics(&l, &regions);
        assert_eq!(sts, 25);
        // expanded bbox: x in [10*190-190, 35*190+190], y in [1400-1400, 2800+1400]
        // M1 horizontal, pitch 200 over y in [0, 4200]: tracks 100..4100 -> 21
        // M2 vertical, pitch 190 over x in [1710, 6840]: tracks at 95+190k in range -> 27
        let m1: Vec<Nm> = l.tech.track_coords(1, l.die.ly, l.die.uy);
        let m1_count = m1.iter().filter(|&&y| (0..=4200).contains(&y)).count() as u64;
        let m2: Vec<Nm> = l.tech.track_coords(2, l.die.lx, l.die.ux);
        let m2_count = m2.iter().filter(|&&x| (1710..=6840).contains(&x)).count() as u64;
        assert_eq!(fts, m1_count + m2_count);
    }

    #[test]
    fn wires_only_reduce_free_tracks() {
        use crate::layout::Net;
        let mut l = grid_layout(3, 60);
        fill(&mut l, 0, &[(0, 60)]);
        fill(&mut l, 1, &[(0, 10), (35, 60)]);
        fill(&mut l, 2, &[(0, 60)]);
        let g = build_occupancy(&l).unwrap();
        let regions = find_vulnerable_regions(&l, &g, 20);
        let (_, base) = ti_metrics(&l, &regions);
        let mut net = Net::new("n".into());
        net.wires.push(Rect::new(1, 0, 2065, 11_000, 2135)); // on M1 track y=2100
        l.nets.push(net);
        let (_, with_wire) = ti_metrics(&l, &regions);
        assert!(with_wire < base);
        // monotonicity under any additional wire
        let mut l2 = l.clone();
        l2.nets[0]
            .wires
            .push(Rect::new(2, 2530 - 35, 0, 2530 + 35, 4200));
        let (_, with_two) = ti_metrics(&l2, &regions);
        assert!(with_two <= with_wire);
    }
}
