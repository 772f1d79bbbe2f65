//! Deterministic synthetic vessel trees with known radii and topology.
//!
//! Every bifurcation splits a parent of radius `r` into two children of
//! radius `r * 2^(-1/α)`, so the ground truth satisfies Murray's law at `α`
//! exactly. Branch angles are perturbed by a 32-bit linear congruential
//! generator (`a = 1664525`, `c = 1013904223`) so fixtures are reproducible in
//! any language.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Node, NodeKind, VesselGraph};
use crate::grid::{Alphabet, MaskGrid, ScalarField, Shape, VesselClass, ARTERY, BOTH, VEIN};
use crate::raster::edt;

pub const LCG_A: u32 = 1_664_525;
pub const LCG_C: u32 = 1_013_904_223;
/// A pixel is drawn when its center lies within `radius - STROKE_INSET` of
/// the segment axis.
pub const STROKE_INSET: f64 = 0.0;
/// The split angle shrinks by this factor per level so subtrees fan out
/// instead of curling back over each other.
pub const ANGLE_DECAY: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct Lcg(u32);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed as u32 ^ (seed >> 32) as u32)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self.0.wrapping_mul(LCG_A).wrapping_add(LCG_C);
        self.0
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.next_u32() as f64 / 4_294_967_296.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub alpha: f64,
    pub depth: usize,
    pub root_radius: f64,
    /// Full angle between the two children of the root, degrees.
    pub branch_angle: f64,
    pub length_ratio: f64,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            alpha: 3.0,
            depth: 3,
            root_radius: 8.0,
            branch_angle: 80.0,
            length_ratio: 0.8,
            seed: 42,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be finite and > 0"));
        }
        if self.depth < 1 {
            return Err(Error::invalid("depth", "must be >= 1"));
        }
        if !(self.root_radius >= 2.0) {
            return Err(Error::invalid("root_radius", "must be >= 2"));
        }
        if !(self.branch_angle > 0.0 && self.branch_angle < 180.0) {
            return Err(Error::invalid("branch_angle", "must lie in (0, 180) degrees"));
        }
        if !(self.length_ratio > 0.0 && self.length_ratio <= 1.5) {
            return Err(Error::invalid("length_ratio", "must lie in (0, 1.5]"));
        }
        Ok(())
    }
}

/// One straight vessel segment in continuous `(y, x)` pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub radius: f64,
    pub parent: Option<usize>,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub struct SynthTree {
    pub params: TreeParams,
    pub segments: Vec<Segment>,
    /// Ground truth with exact real radii.
    pub graph: VesselGraph,
    pub mask: MaskGrid,
    /// Distance transform of `mask`.
    pub rm_gt: ScalarField,
}

impl SynthTree {
    /// One-pixel centrelines as a probability field and a radius map holding
    /// each segment's exact radius times `ratio^level`, so every junction's
    /// child/parent ratio is scaled by `ratio`. Later segments overwrite
    /// shared lattice points.
    pub fn centerline_fields(&self, ratio: f64) -> (ScalarField, ScalarField) {
        let shape = self.mask.shape();
        let mut p = vec![0.0; shape.len()];
        let mut rm = vec![0.0; shape.len()];
        for s in &self.segments {
            let r = s.radius * ratio.powi(s.level as i32);
            for q in lattice_line(s.start, s.end) {
                if let Some(i) = shape.index_of(&q) {
                    p[i] = 1.0;
                    rm[i] = r;
                }
            }
        }
        (self.rm_gt.with_values(p), self.rm_gt.with_values(rm))
    }
}

/// Continuous segments of a tree rooted at the origin growing along `heading`
/// (radians, measured from +x towards +y).
pub fn tree_segments(params: &TreeParams, heading: f64) -> Result<Vec<Segment>> {
    params.validate()?;
    let mut rng = Lcg::new(params.seed);
    let shrink = 2f64.powf(-1.0 / params.alpha);
    let half = params.branch_angle.to_radians() / 2.0;
    let root_len = 12.0 * params.root_radius;
    let mut segs = vec![Segment {
        start: [0.0, 0.0],
        end: [root_len * heading.sin(), root_len * heading.cos()],
        radius: params.root_radius,
        parent: None,
        level: 0,
    }];
    let mut frontier = vec![(0usize, heading, root_len)];
    for level in 1..=params.depth {
        let spread = half * ANGLE_DECAY.powi(level as i32 - 1);
        let mut next = Vec::new();
        for &(p, dir, len) in &frontier {
            let parent = segs[p];
            let len = len * params.length_ratio;
            for side in [-1.0, 1.0] {
                let jitter = 1.0 + 0.1 * (2.0 * rng.next_f64() - 1.0);
                let d = dir + side * spread * jitter;
                let start = parent.end;
                segs.push(Segment {
                    start,
                    end: [start[0] + len * d.sin(), start[1] + len * d.cos()],
                    radius: parent.radius * shrink,
                    parent: Some(p),
                    level,
                });
                next.push((segs.len() - 1, d, len));
            }
        }
        frontier = next;
    }
    check_collisions(&segs)?;
    Ok(segs)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

fn segment_distance(s: &Segment, t: &Segment) -> f64 {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let d1 = cross(t.start, t.end, s.start);
    let d2 = cross(t.start, t.end, s.end);
    let d3 = cross(s.start, s.end, t.start);
    let d4 = cross(s.start, s.end, t.end);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(s.start, t.start, t.end)
        .min(point_segment_distance(s.end, t.start, t.end))
        .min(point_segment_distance(t.start, s.start, s.end))
        .min(point_segment_distance(t.end, s.start, s.end))
}

fn touching(a: &Segment, b: &Segment) -> bool {
    let same = |p: [f64; 2], q: [f64; 2]| p == q;
    same(a.start, b.start) || same(a.start, b.end) || same(a.end, b.start) || same(a.end, b.end)
}

/// Segments that do not share an endpoint must keep a background gap.
fn check_collisions(segs: &[Segment]) -> Result<()> {
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a, b) = (&segs[i], &segs[j]);
            if touching(a, b) {
                continue;
            }
            if segment_distance(a, b) <= a.radius + b.radius + 2.0 {
                return Err(Error::GeometryOverflow(format!(
                    "segments {i} and {j} collide; use a wider branch angle or a shorter length ratio"
                )));
            }
        }
    }
    Ok(())
}

/// Lattice chain from `a` to `b` (8-connected, rounded).
fn lattice_line(a: [f64; 2], b: [f64; 2]) -> Vec<Vec<usize>> {
    let (y0, x0) = (a[0].round() as i64, a[1].round() as i64);
    let (y1, x1) = (b[0].round() as i64, b[1].round() as i64);
    let n = (y1 - y0).abs().max((x1 - x0).abs());
    (0..=n)
        .map(|k| {
            let t = if n == 0 { 0.0 } else { k as f64 / n as f64 };
            let y = (y0 as f64 + t * (y1 - y0) as f64).round() as usize;
            let x = (x0 as f64 + t * (x1 - x0) as f64).round() as usize;
            vec![y, x]
        })
        .collect()
}

fn ground_truth(segs: &[Segment], class: VesselClass) -> VesselGraph {
    // node 0 is the root start; segment k ends at node k + 1
    let mut nodes = vec![(segs[0].start, NodeKind::End)];
    let has_children: Vec<bool> = (0..segs.len())
        .map(|k| segs.iter().any(|s| s.parent == Some(k)))
        .collect();
    for (k, s) in segs.iter().enumerate() {
        let kind = if has_children[k] {
            NodeKind::Branch
        } else {
            NodeKind::End
        };
        nodes.push((s.end, kind));
    }
    let round = |p: [f64; 2]| vec![p[0].round() as usize, p[1].round() as usize];
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| {
        let p = round(nodes[i].0);
        (p[0], p[1], i)
    });
    let mut id_of = vec![0; nodes.len()];
    for (id, &i) in order.iter().enumerate() {
        id_of[i] = id;
    }
    let graph_nodes = order
        .iter()
        .enumerate()
        .map(|(id, &i)| Node {
            id,
            pos: round(nodes[i].0),
            kind: nodes[i].1,
        })
        .collect();
    let mut edges: Vec<Edge> = segs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let from = s.parent.map_or(0, |p| p + 1);
            let (mut u, mut v) = (id_of[from], id_of[k + 1]);
            let mut polyline = lattice_line(s.start, s.end);
            if u > v {
                std::mem::swap(&mut u, &mut v);
                polyline.reverse();
            }
            let length_px = polyline
                .windows(2)
                .map(|w| {
                    let steps = (0..2).filter(|&a| w[0][a] != w[1][a]).count();
                    (steps as f64).sqrt()
                })
                .sum();
            Edge {
                u,
                v,
                samples: vec![s.radius; polyline.len()],
                polyline,
                length_px,
                radius_px: s.radius,
                radius_um: s.radius,
                low_confidence: false,
            }
        })
        .collect();
    edges.sort_by(|a, b| (a.u, a.v, &a.polyline).cmp(&(b.u, b.v, &b.polyline)));
    VesselGraph {
        spacing: vec![1.0, 1.0],
        class,
        nodes: graph_nodes,
        edges,
    }
}

fn rasterize(segs: &[Segment], shape: Shape) -> Vec<bool> {
    let [_, h, w] = shape.dims3();
    let mut cells = vec![false; shape.len()];
    for s in segs {
        let t = s.radius - STROKE_INSET;
        let lo_y = (s.start[0].min(s.end[0]) - t).floor().max(0.0) as usize;
        let hi_y = ((s.start[0].max(s.end[0]) + t).ceil() as usize).min(h - 1);
        let lo_x = (s.start[1].min(s.end[1]) - t).floor().max(0.0) as usize;
        let hi_x = ((s.start[1].max(s.end[1]) + t).ceil() as usize).min(w - 1);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                if point_segment_distance([y as f64, x as f64], s.start, s.end) <= t {
                    cells[shape.index(0, y, x)] = true;
                }
            }
        }
    }
    cells
}

fn translate(segs: &mut [Segment], dy: f64, dx: f64) {
    for s in segs {
        s.start = [s.start[0] + dy, s.start[1] + dx];
        s.end = [s.end[0] + dy, s.end[1] + dx];
    }
}

/// Integer shift and canvas size that put every stroke at least `margin`
/// pixels from the border.
fn fit_canvas(segs: &[Segment], margin: f64) -> ([f64; 2], Shape) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in segs {
        for p in [s.start, s.end] {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a] - s.radius);
                hi[a] = hi[a].max(p[a] + s.radius);
            }
        }
    }
    let shift = [(margin - lo[0]).ceil(), (margin - lo[1]).ceil()];
    let h = (hi[0] + shift[0] + margin).ceil() as usize + 1;
    let w = (hi[1] + shift[1] + margin).ceil() as usize + 1;
    (shift, Shape::new_2d(h, w))
}

pub fn gen_tree(params: &TreeParams) -> Result<SynthTree> {
    // roots grow towards -y
    let mut segs = tree_segments(params, -std::f64::consts::FRAC_PI_2)?;
    let (shift, shape) = fit_canvas(&segs, 4.0);
    // half-pixel offset keeps the axis-aligned root off the lattice columns,
    // where the EDT would read one pixel wide for integer radii
    translate(&mut segs, shift[0], shift[1] + 0.5);
    let cells = rasterize(&segs, shape);
    let mask = MaskGrid::from_bools(shape, &cells)?;
    let rm_gt = edt(&mask, VesselClass::Single)?;
    Ok(SynthTree {
        params: *params,
        graph: ground_truth(&segs, VesselClass::Single),
        segments: segs,
        mask,
        rm_gt,
    })
}

/// Mirror-image artery and vein trees sharing an optic-disc position.
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub artery: SynthTree,
    pub vein: SynthTree,
    /// Labels 0 / artery / vein / both.
    pub labels: MaskGrid,
    /// `[y, x]` lattice coordinates.
    pub disc: [f64; 2],
    pub macula_center: [f64; 2],
    pub macula_radius: f64,
}

/// Both trees leave the disc towards +x, the artery tilted up and the vein
/// mirrored across the horizontal line through the disc. `vein_scale`
/// multiplies every vein radius (1 for a symmetric pair).
pub fn gen_av_pair(params: &TreeParams, tilt_deg: f64, artery_scale: f64, vein_scale: f64) -> Result<SynthPair> {
    if !(artery_scale > 0.0 && vein_scale > 0.0) {
        return Err(Error::invalid("scale", "radius scales must be > 0"));
    }
    let tilt = tilt_deg.to_radians();
    let gap = params.root_radius + 2.0;
    let mut art = tree_segments(params, -tilt)?;
    translate(&mut art, -gap, 0.0);
    let mut ven: Vec<Segment> = art
        .iter()
        .map(|s| Segment {
            start: [-s.start[0], s.start[1]],
            end: [-s.end[0], s.end[1]],
            ..*s
        })
        .collect();
    for s in &mut art {
        s.radius *= artery_scale;
    }
    for s in &mut ven {
        s.radius *= vein_scale;
    }
    let all: Vec<Segment> = art.iter().chain(&ven).copied().collect();
    check_collisions(&all)?;
    let (shift, shape) = fit_canvas(&all, 4.0);
    translate(&mut art, shift[0], shift[1]);
    translate(&mut ven, shift[0], shift[1]);
    let disc = [shift[0], shift[1]];

    let a_cells = rasterize(&art, shape);
    let v_cells = rasterize(&ven, shape);
    let labels: Vec<u8> = a_cells
        .iter()
        .zip(&v_cells)
        .map(|(&a, &v)| match (a, v) {
            (true, true) => BOTH,
            (true, false) => ARTERY,
            (false, true) => VEIN,
            _ => 0,
        })
        .collect();
    let labels = MaskGrid::new(shape, &[1.0, 1.0], Alphabet::ArteryVein, labels)?;
    let make = |segs: Vec<Segment>, cells: &[bool], class| -> Result<SynthTree> {
        let mask = MaskGrid::from_bools(shape, cells)?;
        let rm_gt = edt(&mask, VesselClass::Single)?;
        Ok(SynthTree {
            params: *params,
            graph: ground_truth(&segs, class),
            segments: segs,
            mask,
            rm_gt,
        })
    };
    let leaves: Vec<[f64; 2]> = art
        .iter()
        .chain(&ven)
        .filter(|s| s.level == params.depth)
        .map(|s| s.end)
        .collect();
    let n = leaves.len() as f64;
    let center = [
        leaves.iter().map(|p| p[0]).sum::<f64>() / n,
        leaves.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let radius = leaves
        .iter()
        .map(|p| ((p[0].round() - center[0]).powi(2) + (p[1].round() - center[1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
        + 1.0;
    Ok(SynthPair {
        artery: make(art, &a_cells, VesselClass::Artery)?,
        vein: make(ven, &v_cells, VesselClass::Vein)?,
        labels,
        disc,
        macula_center: center,
        macula_radius: radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bifurcations;
    use crate::murray::solve_alpha;

    #[test]
    fn lcg_sequence_is_fixed() {
        let mut r = Lcg::new(0);
        assert_eq!(r.next_u32(), 1_013_904_223);
        assert_eq!(r.next_u32(), 1_196_435_762);
    }

    #[test]
    fn depth_one_children_follow_murray() {
        let p = TreeParams {
            depth: 1,
            ..TreeParams::default()
        };
        let t = gen_tree(&p).unwrap();
        assert_eq!(t.graph.edges.len(), 3);
        let recs = bifurcations(&t.graph);
        assert_eq!(recs.len(), 1);
        let c = 8.0 * 2f64.powf(-1.0 / 3.0);
        assert_eq!(recs[0].parent_radius_px, 8.0);
        assert!(recs[0].children_px.iter().all(|&r| (r - c).abs() < 1e-12));
        let a = solve_alpha(recs[0].parent_radius_px, &recs[0].children_px).unwrap();
        assert!((a.alpha().unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_satisfies_murray_everywhere() {
        for alpha in [2.4, 2.7, 3.0] {
            let p = TreeParams {
                alpha,
                depth: 4,
                root_radius: 6.0,
                ..TreeParams::default()
            };
            let t = gen_tree(&p).unwrap();
            for r in bifurcations(&t.graph) {
                let a = solve_alpha(r.parent_radius_px, &r.children_px)
                    .unwrap()
                    .alpha()
                    .unwrap();
                assert!((a - alpha).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = TreeParams::default();
        let a = gen_tree(&p).unwrap();
        let b = gen_tree(&p).unwrap();
        assert_eq!(a.mask, b.mask);
        let c = gen_tree(&TreeParams { seed: 7, ..p }).unwrap();
        assert_ne!(a.segments, c.segments);
    }

    #[test]
    fn tight_angles_overflow() {
        let p = TreeParams {
            branch_angle: 8.0,
            depth: 3,
            ..TreeParams::default()
        };
        assert!(matches!(gen_tree(&p), Err(Error::GeometryOverflow(_))));
    }

    #[test]
    fn pair_is_mirrored() {
        let p = TreeParams {
            depth: 2,
            root_radius: 5.0,
            ..TreeParams::default()
        };
        let pair = gen_av_pair(&p, 30.0, 1.0, 1.0).unwrap();
        let shape = pair.labels.shape();
        let [_, h, w] = shape.dims3();
        let dy = pair.disc[0] as usize;
        for y in 0..h {
            let my = 2 * dy as i64 - y as i64;
            if my < 0 || my >= h as i64 {
                continue;
            }
            for x in 0..w {
                let a = pair.artery.mask.is_set(shape.index(0, y, x));
                let v = pair.vein.mask.is_set(shape.index(0, my as usize, x));
                assert_eq!(a, v);
            }
        }
        assert_eq!(pair.artery.graph.edges.len(), pair.vein.graph.edges.len());
    }
}
