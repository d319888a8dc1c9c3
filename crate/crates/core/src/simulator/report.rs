//! Rule-based stand-in for a vision-language region report.

use crate::semantic_field::{
    cell_rect, format_report, Category, GridCell, Priority, RegionSize, SemanticRegion,
};

use super::render::DepthRender;

/// Incidence cosine below which a surface counts as grazing.
pub const GRAZING_COS: f64 = 0.35;
const OCCLUSION_MIN_FRACTION: f64 = 0.03;
const GRAZING_HIGH_FRACTION: f64 = 0.30;
const GRAZING_MEDIUM_FRACTION: f64 = 0.10;
const MIN_REGIONS: usize = 5;
const MAX_REGIONS: usize = 8;

#[derive(Default, Clone, Copy)]
struct CellStats {
    pixels: usize,
    hits: usize,
    edges: usize,
    grazing: usize,
    border_edges: usize,
}

fn size_of(fraction: f64) -> RegionSize {
    if fraction > 0.5 {
        RegionSize::Large
    } else if fraction > 0.15 {
        RegionSize::Medium
    } else {
        RegionSize::Small
    }
}

fn cell_stats(render: &DepthRender, cell: GridCell) -> CellStats {
    let (w, h) = render.depth.dims();
    let (x0, y0, cw, ch) = cell_rect(cell, w, h);
    let mut s = CellStats::default();
    for v in (y0.floor() as usize)..((y0 + ch).ceil() as usize).min(h) {
        for u in (x0.floor() as usize)..((x0 + cw).ceil() as usize).min(w) {
            // pixel belongs to the cell containing its center
            let (pu, pv) = (u as f64 + 0.5, v as f64 + 0.5);
            if pu < x0 || pu >= x0 + cw || pv < y0 || pv >= y0 + ch {
                continue;
            }
            s.pixels += 1;
            if !render.is_hit(u, v) {
                continue;
            }
            s.hits += 1;
            let edge = render.is_edge(u, v);
            if edge {
                s.edges += 1;
                if u == 0 || v == 0 || u + 1 == w || v + 1 == h {
                    s.border_edges += 1;
                }
            }
            if *render.incidence.get(u, v) < GRAZING_COS {
                s.grazing += 1;
            }
        }
    }
    s
}

/// Regions for a render: depth discontinuities become OCCLUSION/HIGH,
/// grazing surfaces GEOMETRIC/HIGH or MEDIUM, silhouettes cut by the frame
/// BOUNDARY/MEDIUM; one region per cell at most, padded with TEXTURE/LOW
/// filler to five and capped at eight.
pub fn detect_regions(render: &DepthRender) -> Vec<SemanticRegion> {
    let mut flagged = Vec::new();
    let mut fillers = Vec::new();
    for cell in GridCell::all() {
        let s = cell_stats(render, cell);
        if s.pixels == 0 {
            continue;
        }
        let frac = |n: usize| n as f64 / s.pixels as f64;
        let region = |category, priority, n: usize, reason: &str| SemanticRegion {
            cell,
            category,
            priority,
            size: size_of(frac(n)),
            reason: reason.to_string(),
        };
        if frac(s.edges) >= OCCLUSION_MIN_FRACTION && s.edges > s.border_edges {
            flagged.push(region(
                Category::Occlusion,
                Priority::High,
                s.edges,
                "depth discontinuity hides geometry behind a foreground edge",
            ));
        } else if frac(s.grazing) >= GRAZING_MEDIUM_FRACTION {
            let priority = if frac(s.grazing) >= GRAZING_HIGH_FRACTION { Priority::High } else { Priority::Medium };
            flagged.push(region(Category::Geometric, priority, s.grazing, "surface seen at a grazing angle"));
        } else if s.border_edges > 0 {
            flagged.push(region(
                Category::Boundary,
                Priority::Medium,
                s.border_edges.max(1),
                "structure cut off by the image border",
            ));
        } else if s.hits > 0 {
            fillers.push((s.hits, region(Category::Texture, Priority::Low, s.hits, "uniform surface with little texture")));
        }
    }
    let rank = |r: &SemanticRegion| match (r.category, r.priority) {
        (Category::Occlusion, _) => 0,
        (Category::Geometric, Priority::High) => 1,
        (Category::Geometric, _) => 2,
        _ => 3,
    };
    // stable sort keeps cell order within a rank
    flagged.sort_by_key(rank);
    flagged.truncate(MAX_REGIONS);
    fillers.sort_by_key(|f| std::cmp::Reverse(f.0));
    for (_, f) in fillers {
        if flagged.len() >= MIN_REGIONS {
            break;
        }
        flagged.push(f);
    }
    flagged
}

/// Report text in the REGION/TYPE/PRIORITY/SIZE/REASON line grammar.
pub fn synth_semantic_report(render: &DepthRender) -> String {
    format_report(&detect_regions(render))
}
