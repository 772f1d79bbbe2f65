//! Skeleton graphs with per-segment radii and bifurcation records.
//!
//! Nodes are end and branch pixels of the thinned mask. Each node pixel is
//! surrounded by a moat: the skeleton pixels reachable from it along the
//! skeleton within `max(2, ceil(EDT))` pixels. Connected moat pixels form one
//! graph node. What is left of the skeleton splits into simple paths, each of
//! which becomes an edge whose radius is the trimmed mean of the distance
//! transform along the path, away from junction-inflated values.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Connectivity, MaskGrid, Shape, VesselClass};
use crate::raster::{edt_with_spacing, label_cells};
use crate::skeleton::{neighbor_counts, thin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Branch,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    /// Lattice coordinates, slowest axis first (`[y, x]` or `[z, y, x]`).
    pub pos: Vec<usize>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Lattice-adjacent chain from node `u` to node `v`.
    pub polyline: Vec<Vec<usize>>,
    pub length_px: f64,
    pub radius_px: f64,
    pub radius_um: f64,
    /// Distance-transform samples (px) along the part outside the moats.
    pub samples: Vec<f64>,
    /// Fewer than three samples; the radius is an untrimmed mean.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselGraph {
    /// Physical size per axis; `radius_um = radius_px * spacing.last()`.
    pub spacing: Vec<f64>,
    pub class: VesselClass,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl VesselGraph {
    pub fn empty(spacing: Vec<f64>, class: VesselClass) -> Self {
        VesselGraph {
            spacing,
            class,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.spacing.last().copied().unwrap_or(1.0)
    }

    /// Edge ids incident to each node (a self-loop appears once).
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (k, e) in self.edges.iter().enumerate() {
            inc[e.u].push(k);
            if e.v != e.u {
                inc[e.v].push(k);
            }
        }
        inc
    }

    /// `|E| - |V| + C` of the node/edge multigraph.
    pub fn cycle_rank(&self) -> i64 {
        let mut uf = UnionFind::new(self.nodes.len());
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        let c = (0..self.nodes.len()).filter(|&i| uf.find(i) == i).count();
        self.edges.len() as i64 - self.nodes.len() as i64 + c as i64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::format("graph", format!("node {i} has id {}", node.id)));
            }
        }
        for e in &self.edges {
            if e.u >= n || e.v >= n {
                return Err(Error::format(
                    "graph",
                    format!("edge ({}, {}) names a missing node", e.u, e.v),
                ));
            }
            if !(e.radius_px > 0.0) || !(e.length_px >= 0.0) {
                return Err(Error::format("graph", "edge radius must be > 0 and length >= 0"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: VesselGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }
}

/// One bifurcation: the widest incident edge is the parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRecord {
    pub node: usize,
    pub parent_radius_px: f64,
    pub parent_radius_um: f64,
    pub children_px: Vec<f64>,
    pub class: VesselClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MoatPolicy {
    /// `max(min, ceil(EDT at the node))` pixels.
    Adaptive {
        min: usize,
    },
    Fixed(usize),
}

impl Default for MoatPolicy {
    fn default() -> Self {
        MoatPolicy::Adaptive { min: 2 }
    }
}

impl MoatPolicy {
    fn radius(self, edt: f64) -> usize {
        match self {
            MoatPolicy::Adaptive { min } => min.max(edt.ceil() as usize),
            MoatPolicy::Fixed(r) => r,
        }
    }
}

/// Trimmed mean: sort, drop `floor(0.1 n)` from each end, average the rest.
pub fn segment_radius(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("segment has no radius samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let drop = s.len() / 10;
    let kept = &s[drop..s.len() - drop];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Graph plus the intermediate rasters it was built from.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub graph: VesselGraph,
    pub skeleton: MaskGrid,
    /// Skeleton pixels assigned to nodes (moats and contracted debris).
    pub moat: MaskGrid,
}

pub fn extract_graph(mask: &MaskGrid, class: VesselClass, policy: MoatPolicy) -> Result<VesselGraph> {
    Ok(extract(mask, class, policy)?.graph)
}

pub fn extract(mask: &MaskGrid, class: VesselClass, policy: MoatPolicy) -> Result<Extraction> {
    let m = mask.class_mask(class);
    let spacing = mask.spacing();
    let shape = m.shape();
    if m.count() == 0 {
        return Ok(Extraction {
            graph: VesselGraph::empty(spacing, class),
            skeleton: m.clone(),
            moat: m,
        });
    }
    let last = *spacing.last().unwrap();
    let rel: Vec<f64> = spacing.iter().map(|s| s / last).collect();
    let dist = edt_with_spacing(&m, VesselClass::Single, &rel)?;
    let dist = dist.values();
    let skel = thin(&m);
    let sk = skel.to_bools();
    let counts = neighbor_counts(&skel);
    let is_node = |i: usize| sk[i] && counts[i] != 2;

    // moats: geodesic balls along the skeleton
    let mut in_moat = vec![false; sk.len()];
    let node_pixels: Vec<usize> = (0..sk.len()).filter(|&i| is_node(i)).collect();
    let full = Connectivity::Full.offsets(shape.ndim());
    let mut stamp = vec![u32::MAX; sk.len()];
    let mut queue = VecDeque::new();
    for (k, &p) in node_pixels.iter().enumerate() {
        let r = policy.radius(dist[p]) as f64;
        let r2 = r * r;
        let pc = shape.coords(p);
        stamp[p] = k as u32;
        in_moat[p] = true;
        queue.push_back(p);
        while let Some(i) = queue.pop_front() {
            for &o in full {
                let Some(j) = shape.offset(i, o) else { continue };
                if !sk[j] || stamp[j] == k as u32 {
                    continue;
                }
                let jc = shape.coords(j);
                let d2: f64 = (0..3).map(|a| (jc[a] as f64 - pc[a] as f64).powi(2)).sum();
                if d2 <= r2 {
                    stamp[j] = k as u32;
                    in_moat[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    let moat_cc = label_cells(shape, &in_moat, Connectivity::Full);
    let n_clusters = moat_cc.count;
    let residual: Vec<bool> = (0..sk.len()).map(|i| sk[i] && !in_moat[i]).collect();
    let seg_cc = label_cells(shape, &residual, Connectivity::Full);
    let mut segments: Vec<Vec<usize>> = vec![Vec::new(); seg_cc.count];
    for (i, &l) in seg_cc.labels.iter().enumerate() {
        if l != 0 {
            segments[l as usize - 1].push(i);
        }
    }

    // order each segment and find the clusters its ends touch
    struct Segment {
        path: Vec<usize>,
        ends: Option<(usize, usize)>,
    }
    let cluster_of = |i: usize| moat_cc.labels[i] as usize - 1;
    let moat_neighbor = |i: usize, exclude: Option<usize>| -> Option<usize> {
        full.iter()
            .filter_map(|&o| shape.offset(i, o))
            .find(|&j| in_moat[j] && Some(j) != exclude)
    };
    let mut segs = Vec::with_capacity(segments.len());
    for cells in &segments {
        let res_deg = |i: usize| {
            full.iter()
                .filter_map(|&o| shape.offset(i, o))
                .filter(|&j| residual[j])
                .count()
        };
        let start = cells.iter().copied().find(|&i| res_deg(i) <= 1);
        let is_cycle = start.is_none();
        let start = start.unwrap_or(cells[0]);
        let mut path = vec![start];
        let mut seen = std::collections::HashSet::from([start]);
        let mut cur = start;
        loop {
            let next = full
                .iter()
                .filter_map(|&o| shape.offset(cur, o))
                .find(|&j| residual[j] && !seen.contains(&j));
            let Some(next) = next else { break };
            seen.insert(next);
            path.push(next);
            cur = next;
        }
        if is_cycle {
            path.push(start);
            segs.push(Segment { path, ends: None });
            continue;
        }
        let first = path[0];
        let last = *path.last().unwrap();
        let a = moat_neighbor(first, None);
        let b = if path.len() == 1 {
            a.and_then(|a| {
                full.iter()
                    .filter_map(|&o| shape.offset(first, o))
                    .find(|&j| in_moat[j] && j != a && cluster_of(j) != cluster_of(a))
                    .or(Some(a))
            })
        } else {
            moat_neighbor(last, None)
        };
        let a = a.map(|p| (p, cluster_of(p)));
        let b = b.map(|p| (p, cluster_of(p)));
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (
                a,
                nearest_moat(shape, &in_moat, last)
                    .map(|p| (p, cluster_of(p)))
                    .unwrap_or(a),
            ),
            (None, Some(b)) => (
                nearest_moat(shape, &in_moat, first)
                    .map(|p| (p, cluster_of(p)))
                    .unwrap_or(b),
                b,
            ),
            (None, None) => {
                // unreachable for a thinned skeleton: treat as an isolated loop
                segs.push(Segment { path, ends: None });
                continue;
            }
        };
        path.insert(0, a.0);
        path.push(b.0);
        segs.push(Segment {
            path,
            ends: Some((a.1, b.1)),
        });
    }

    // contract short segments between distinct clusters
    let mut uf = UnionFind::new(n_clusters);
    let mut absorbed = vec![false; segs.len()];
    for (k, s) in segs.iter().enumerate() {
        if let Some((a, b)) = s.ends {
            let interior = s.path.len() - 2;
            if interior < 3 && uf.find(a) != uf.find(b) {
                uf.union(a, b);
                absorbed[k] = true;
            }
        }
    }
    let root_of: Vec<usize> = (0..n_clusters).map(|c| uf.find(c)).collect();
    let mut region = vec![u32::MAX; sk.len()];
    for i in 0..sk.len() {
        if in_moat[i] {
            region[i] = root_of[cluster_of(i)] as u32;
        }
    }
    for (k, s) in segs.iter().enumerate() {
        if absorbed[k] {
            let (a, _) = s.ends.unwrap();
            for &p in &s.path[1..s.path.len() - 1] {
                region[p] = root_of[a] as u32;
            }
        }
    }

    // one node per region: the node pixel nearest the centroid of its node pixels
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for &p in &node_pixels {
        members[region[p] as usize].push(p);
    }
    let mut anchors: Vec<(usize, usize, NodeKind)> = Vec::new(); // (pixel, region, kind)
    for (r, px) in members.iter().enumerate() {
        if px.is_empty() {
            continue;
        }
        let mut c = [0.0; 3];
        for &p in px {
            let pc = shape.coords(p);
            for a in 0..3 {
                c[a] += pc[a] as f64 / px.len() as f64;
            }
        }
        let best = *px
            .iter()
            .min_by(|&&p, &&q| {
                let d = |i: usize| {
                    let ic = shape.coords(i);
                    (0..3).map(|a| (ic[a] as f64 - c[a]).powi(2)).sum::<f64>()
                };
                d(p).total_cmp(&d(q)).then(p.cmp(&q))
            })
            .unwrap();
        let kind = if px.iter().any(|&p| counts[p] >= 3) {
            NodeKind::Branch
        } else {
            NodeKind::End
        };
        anchors.push((best, r, kind));
    }
    // synthetic nodes on isolated loops
    for s in segs.iter().filter(|s| s.ends.is_none()) {
        anchors.push((s.path[0], usize::MAX, NodeKind::End));
    }
    anchors.sort_by_key(|a| a.0);
    let mut node_of_region = vec![usize::MAX; n_clusters];
    let mut node_of_pixel = std::collections::HashMap::new();
    let nodes: Vec<Node> = anchors
        .iter()
        .enumerate()
        .map(|(id, &(p, r, kind))| {
            if r != usize::MAX {
                node_of_region[r] = id;
            }
            node_of_pixel.insert(p, id);
            Node {
                id,
                pos: shape.position(p),
                kind,
            }
        })
        .collect();

    // in-region paths from every region pixel to its node pixel
    let mut parent = vec![u32::MAX; sk.len()];
    for &(p, r, _) in &anchors {
        if r == usize::MAX {
            continue;
        }
        parent[p] = p as u32;
        queue.push_back(p);
        while let Some(i) = queue.pop_front() {
            for &o in full {
                let Some(j) = shape.offset(i, o) else { continue };
                if region[j] == r as u32 && parent[j] == u32::MAX {
                    parent[j] = i as u32;
                    queue.push_back(j);
                }
            }
        }
    }
    let path_to_node = |mut i: usize| -> Vec<usize> {
        let mut out = vec![i];
        while parent[i] as usize != i {
            i = parent[i] as usize;
            out.push(i);
        }
        out
    };

    let scale = last;
    let mut edges = Vec::new();
    for (k, s) in segs.iter().enumerate() {
        if absorbed[k] {
            continue;
        }
        let (pixels, interior, u, v) = match s.ends {
            None => {
                let id = node_of_pixel[&s.path[0]];
                (s.path.clone(), &s.path[..s.path.len() - 1], id, id)
            }
            Some((a, b)) => {
                let mut pixels: Vec<usize> = path_to_node(s.path[0]);
                pixels.reverse();
                pixels.extend_from_slice(&s.path[1..s.path.len() - 1]);
                pixels.extend(path_to_node(*s.path.last().unwrap()));
                let u = node_of_region[root_of[a]];
                let v = node_of_region[root_of[b]];
                (pixels, &s.path[1..s.path.len() - 1], u, v)
            }
        };
        let samples: Vec<f64> = interior.iter().map(|&p| dist[p]).collect();
        let radius_px = segment_radius(&samples)?;
        let (u, v, pixels) = if u > v || (u == v && pixels.last() < pixels.first()) {
            let mut p = pixels;
            p.reverse();
            (v, u, p)
        } else {
            (u, v, pixels)
        };
        edges.push(Edge {
            u,
            v,
            length_px: polyline_length(shape, &pixels),
            polyline: pixels.iter().map(|&p| shape.position(p)).collect(),
            radius_px,
            radius_um: radius_px * scale,
            low_confidence: samples.len() < 3,
            samples,
        });
    }
    edges.sort_by(|a, b| (a.u, a.v, &a.polyline).cmp(&(b.u, b.v, &b.polyline)));

    let moat_mask = skel.map_bools(region.iter().map(|&r| r != u32::MAX).collect());
    Ok(Extraction {
        graph: VesselGraph {
            spacing,
            class,
            nodes,
            edges,
        },
        skeleton: skel,
        moat: moat_mask,
    })
}

fn nearest_moat(shape: Shape, in_moat: &[bool], from: usize) -> Option<usize> {
    let fc = shape.coords(from);
    (0..in_moat.len()).filter(|&i| in_moat[i]).min_by_key(|&i| {
        let c = shape.coords(i);
        (0..3).map(|a| (c[a] as i64 - fc[a] as i64).pow(2)).sum::<i64>()
    })
}

/// Sum of lattice step lengths (1, √2, √3).
pub fn polyline_length(shape: Shape, pixels: &[usize]) -> f64 {
    pixels
        .windows(2)
        .map(|w| {
            let (a, b) = (shape.coords(w[0]), shape.coords(w[1]));
            let steps = (0..3).filter(|&k| a[k] != b[k]).count();
            (steps as f64).sqrt()
        })
        .sum()
}

/// Widest of `edges`; ties go to the longer edge, then the lower id.
pub(crate) fn parent_edge(g: &VesselGraph, edges: &[usize]) -> usize {
    *edges
        .iter()
        .max_by(|&&a, &&b| {
            let (ea, eb) = (&g.edges[a], &g.edges[b]);
            ea.radius_px
                .total_cmp(&eb.radius_px)
                .then(ea.length_px.total_cmp(&eb.length_px))
                .then(b.cmp(&a))
        })
        .unwrap()
}

/// One record per branch node with at least three incident edges.
pub fn bifurcations(g: &VesselGraph) -> Vec<BifurcationRecord> {
    let scale = g.scale();
    let inc = g.incidence();
    let mut out = Vec::new();
    for node in &g.nodes {
        let edges = &inc[node.id];
        if node.kind != NodeKind::Branch || edges.len() < 3 {
            continue;
        }
        let parent = parent_edge(g, edges);
        let r_p = g.edges[parent].radius_px;
        out.push(BifurcationRecord {
            node: node.id,
            parent_radius_px: r_p,
            parent_radius_um: r_p * scale,
            children_px: edges
                .iter()
                .filter(|&&e| e != parent)
                .map(|&e| g.edges[e].radius_px)
                .collect(),
            class: g.class,
        });
    }
    out
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Smaller root wins, so roots are stable under insertion order.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}
