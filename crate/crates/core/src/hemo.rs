//! Poiseuille flow on vessel graphs: orientation from the optic disc, flow
//! partitioning by the Murray exponent, pressure drops, the
//! arteriovenous pressure difference and branching morphology.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bifurcations, parent_edge, NodeKind, UnionFind, VesselGraph};
use crate::grid::VesselClass;
use crate::murray::{fixed_table, ExponentTable};

pub const P_IN_MMHG: f64 = 76.9;
pub const P_OUT_MMHG: f64 = 21.0;
/// Polyline steps used for branch tangents.
pub const TANGENT_STEPS: usize = 5;

/// How the venous drop enters the arteriovenous difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VenousSign {
    /// `(P_in - P_out) - (ΔP_A - ΔP_V)`.
    #[default]
    Paper,
    /// `(P_in - P_out) - (ΔP_A + ΔP_V)`.
    Physical,
}

impl std::str::FromStr for VenousSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(VenousSign::Paper),
            "physical" => Ok(VenousSign::Physical),
            other => Err(Error::invalid(
                "venous-sign",
                format!("expected paper|physical, got {other}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p_in: f64,
    pub p_out: f64,
    /// Viscosity; 0 gives a resistance-free network.
    pub eta: f64,
    /// Pixel-to-pressure calibration.
    pub k: f64,
    /// `[y, x]` (or `[z, y, x]`) lattice coordinates.
    pub disc: Vec<f64>,
    pub macula_center: Vec<f64>,
    pub macula_radius: f64,
    pub venous_sign: VenousSign,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            p_in: P_IN_MMHG,
            p_out: P_OUT_MMHG,
            eta: 1.0,
            k: 1.0,
            disc: vec![0.0, 0.0],
            macula_center: vec![0.0, 0.0],
            macula_radius: 0.0,
            venous_sign: VenousSign::Paper,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_in > self.p_out) {
            return Err(Error::invalid("p_in", "must exceed p_out"));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", "must be finite and >= 0"));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::invalid("k", "must be finite and > 0"));
        }
        if !(self.macula_radius >= 0.0) {
            return Err(Error::invalid("macula_radius", "must be >= 0"));
        }
        if self.disc.len() != self.macula_center.len() {
            return Err(Error::invalid("disc", "disc and macula need the same dimension"));
        }
        Ok(())
    }
}

/// `Q_i = Q0 r_i^α / Σ r_j^α`; the widest child takes the remainder so the
/// flows add up to `Q0`.
pub fn partition_flow(q0: f64, radii: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(q0 >= 0.0) {
        return Err(Error::invalid("q0", "flow must be >= 0"));
    }
    if radii.is_empty() {
        return Err(Error::Empty("no child radii".into()));
    }
    if let Some(&r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::NonPositiveRadius(r));
    }
    // shift by the widest child so powers cannot overflow
    let ln_max = radii.iter().map(|r| r.ln()).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = radii.iter().map(|r| (alpha * (r.ln() - ln_max)).exp()).collect();
    let total: f64 = w.iter().sum();
    let widest = (0..radii.len())
        .max_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(b.cmp(&a)))
        .unwrap();
    let mut q: Vec<f64> = w.iter().map(|w| q0 * w / total).collect();
    let rest: f64 = q.iter().enumerate().filter(|&(i, _)| i != widest).map(|(_, q)| q).sum();
    q[widest] = q0 - rest;
    Ok(q)
}

/// `K |Q| 8 η L / (π r^4)`.
pub fn poiseuille_dp(q: f64, length: f64, radius: f64, eta: f64, k: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    if !(length >= 0.0) {
        return Err(Error::invalid("length", "must be >= 0"));
    }
    Ok(k * q.abs() * resistance(length, radius, eta))
}

fn resistance(length: f64, radius: f64, eta: f64) -> f64 {
    8.0 * eta * length / (std::f64::consts::PI * radius.powi(4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    /// Index of the source edge in the vessel graph.
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub length_px: f64,
    pub radius_px: f64,
    pub radius_um: f64,
    pub q: f64,
    /// `8 η L / (π r^4)`.
    pub resistance: f64,
    pub dp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub class: VesselClass,
    pub positions: Vec<Vec<usize>>,
    pub edges: Vec<FlowEdge>,
    pub roots: Vec<usize>,
    /// Graph edges dropped to break cycles.
    pub removed_edges: Vec<usize>,
    /// Incoming flow edge per node (`None` at roots and unreached nodes).
    pub parent: Vec<Option<usize>>,
    /// Outgoing flow edges per node, in breadth-first order.
    pub children: Vec<Vec<usize>>,
    /// Breadth-first node order from the roots.
    pub order: Vec<usize>,
    pub pressure: Vec<f64>,
    /// Drop accumulated from the root.
    pub cumulative_dp: Vec<f64>,
    pub propagated: bool,
}

impl FlowGraph {
    /// Non-root nodes without outgoing edges.
    pub fn endpoints(&self) -> Vec<usize> {
        (0..self.positions.len())
            .filter(|&n| self.parent[n].is_some() && self.children[n].is_empty())
            .collect()
    }

    /// Largest relative imbalance `|in - Σ out| / in` over nodes with children.
    pub fn conservation_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..self.positions.len() {
            if self.children[n].is_empty() {
                continue;
            }
            let q_in = match self.parent[n] {
                Some(e) => self.edges[e].q,
                None => 1.0,
            };
            let q_out: f64 = self.children[n].iter().map(|&e| self.edges[e].q).sum();
            if q_in > 0.0 {
                worst = worst.max((q_in - q_out).abs() / q_in);
            }
        }
        worst
    }
}

fn squared_distance(pos: &[usize], p: &[f64]) -> f64 {
    pos.iter().zip(p).map(|(&a, b)| (a as f64 - b).powi(2)).sum()
}

/// Roots each component at the node nearest `disc` and orients edges away
/// from it. Cycles are broken by a spanning tree of least resistance, which
/// drops the most resistive edge of every cycle.
pub fn root_and_orient(g: &VesselGraph, disc: &[f64]) -> Result<FlowGraph> {
    g.validate()?;
    if g.nodes.is_empty() {
        return Err(Error::Empty("vessel graph has no nodes".into()));
    }
    if disc.len() != g.nodes[0].pos.len() {
        return Err(Error::invalid("disc", "dimension differs from the graph"));
    }
    let n = g.nodes.len();
    let mut by_resistance: Vec<usize> = (0..g.edges.len()).collect();
    let weight = |k: usize| g.edges[k].length_px / g.edges[k].radius_px.powi(4);
    by_resistance.sort_by(|&a, &b| weight(a).total_cmp(&weight(b)).then(a.cmp(&b)));
    let mut uf = UnionFind::new(n);
    let mut kept = vec![false; g.edges.len()];
    let mut removed = Vec::new();
    for k in by_resistance {
        let e = &g.edges[k];
        if uf.union(e.u, e.v) {
            kept[k] = true;
        } else {
            removed.push(k);
        }
    }
    removed.sort_unstable();

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in g.edges.iter().enumerate() {
        if kept[k] {
            adj[e.u].push((k, e.v));
            adj[e.v].push((k, e.u));
        }
    }
    let mut best: Vec<Option<usize>> = vec![None; n];
    for node in 0..n {
        let c = uf.find(node);
        let d = squared_distance(&g.nodes[node].pos, disc);
        match best[c] {
            Some(b) if squared_distance(&g.nodes[b].pos, disc) <= d => {}
            _ => best[c] = Some(node),
        }
    }
    let roots: Vec<usize> = (0..n).filter_map(|c| best[c]).collect();

    let mut edges = Vec::new();
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for &r in &roots {
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(k, v) in &adj[u] {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                let e = &g.edges[k];
                let id = edges.len();
                edges.push(FlowEdge {
                    edge: k,
                    from: u,
                    to: v,
                    length_px: e.length_px,
                    radius_px: e.radius_px,
                    radius_um: e.radius_um,
                    q: 0.0,
                    resistance: 0.0,
                    dp: 0.0,
                });
                parent[v] = Some(id);
                children[u].push(id);
                queue.push_back(v);
            }
        }
    }
    Ok(FlowGraph {
        class: g.class,
        positions: g.nodes.iter().map(|n| n.pos.clone()).collect(),
        edges,
        roots,
        removed_edges: removed,
        parent,
        children,
        order,
        pressure: vec![f64::NAN; n],
        cumulative_dp: vec![0.0; n],
        propagated: false,
    })
}

/// Unit inflow at every root, split at each node by the exponent looked up
/// at the parent width; arterial pressures fall from `p_in`, venous ones
/// rise from `p_out` by the same arithmetic.
pub fn propagate(fg: &FlowGraph, cfg: &SimConfig, table: Option<&ExponentTable>) -> Result<FlowGraph> {
    cfg.validate()?;
    let fallback;
    let table = match table {
        Some(t) => t,
        None => {
            fallback = fixed_table(3.0)?;
            &fallback
        }
    };
    let mut out = fg.clone();
    let n = out.positions.len();
    if out.order.len() != n
        || out
            .parent
            .iter()
            .enumerate()
            .any(|(v, p)| p.is_some_and(|e| out.edges[e].to != v))
    {
        return Err(Error::CyclicGraph);
    }
    let base = if out.class == VesselClass::Vein {
        cfg.p_out
    } else {
        cfg.p_in
    };
    let sign = if out.class == VesselClass::Vein { 1.0 } else { -1.0 };
    let order = out.order.clone();
    for &u in &order {
        let (q_in, width_um) = match out.parent[u] {
            Some(e) => (out.edges[e].q, out.edges[e].radius_um),
            None => {
                out.cumulative_dp[u] = 0.0;
                out.pressure[u] = base;
                let widest = out.children[u]
                    .iter()
                    .map(|&e| out.edges[e].radius_um)
                    .fold(0.0, f64::max);
                (1.0, widest)
            }
        };
        let kids = out.children[u].clone();
        if kids.is_empty() {
            continue;
        }
        let radii: Vec<f64> = kids.iter().map(|&e| out.edges[e].radius_px).collect();
        let alpha = table.lookup(width_um);
        let flows = partition_flow(q_in, &radii, alpha)?;
        for (&e, q) in kids.iter().zip(flows) {
            let edge = &mut out.edges[e];
            edge.q = q;
            edge.resistance = resistance(edge.length_px, edge.radius_px, cfg.eta);
            edge.dp = poiseuille_dp(q, edge.length_px, edge.radius_px, cfg.eta, cfg.k)?;
            let v = edge.to;
            out.cumulative_dp[v] = out.cumulative_dp[u] + edge.dp;
            out.pressure[v] = base + sign * out.cumulative_dp[v];
        }
    }
    out.propagated = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDrop {
    pub endpoint: Vec<usize>,
    pub cum_dp: f64,
    pub class: VesselClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvDifference {
    pub delta_p_av: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub delta_p_a: f64,
    pub delta_p_v: f64,
    pub venous_sign: VenousSign,
    pub per_path: Vec<PathDrop>,
    /// Graph edges removed to break cycles, per class.
    pub flags: Vec<(VesselClass, Vec<usize>)>,
}

impl AvDifference {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn macular_drops(fg: &FlowGraph, cfg: &SimConfig) -> Result<Vec<PathDrop>> {
    if !fg.propagated {
        return Err(Error::invalid("flow graph", "propagate before measuring drops"));
    }
    let r2 = cfg.macula_radius * cfg.macula_radius;
    let drops: Vec<PathDrop> = fg
        .endpoints()
        .into_iter()
        .filter(|&v| squared_distance(&fg.positions[v], &cfg.macula_center) <= r2)
        .map(|v| PathDrop {
            endpoint: fg.positions[v].clone(),
            cum_dp: fg.cumulative_dp[v],
            class: fg.class,
        })
        .collect();
    if drops.is_empty() {
        return Err(Error::NoMacularEndpoints(fg.class.name().into()));
    }
    Ok(drops)
}

/// Mean over paths, summed in ascending order so equal multisets give
/// identical results.
fn mean_drop(drops: &[PathDrop]) -> f64 {
    let mut v: Vec<f64> = drops.iter().map(|d| d.cum_dp).collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Arteriovenous pressure difference from the mean root-to-macula drops.
pub fn delta_p_av(art: &FlowGraph, ven: &FlowGraph, cfg: &SimConfig) -> Result<AvDifference> {
    cfg.validate()?;
    let a = macular_drops(art, cfg)?;
    let v = macular_drops(ven, cfg)?;
    let (da, dv) = (mean_drop(&a), mean_drop(&v));
    let span = cfg.p_in - cfg.p_out;
    let delta = match cfg.venous_sign {
        VenousSign::Paper => span - (da - dv),
        VenousSign::Physical => span - (da + dv),
    };
    Ok(AvDifference {
        delta_p_av: delta,
        p_in: cfg.p_in,
        p_out: cfg.p_out,
        delta_p_a: da,
        delta_p_v: dv,
        venous_sign: cfg.venous_sign,
        per_path: a.into_iter().chain(v).collect(),
        flags: vec![
            (art.class, art.removed_edges.clone()),
            (ven.class, ven.removed_edges.clone()),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphStats {
    pub class: VesselClass,
    /// Degrees, one per child edge of every bifurcation.
    pub branch_angles: Vec<f64>,
    pub mean_branch_angle: f64,
    /// Mean over edges of the standard deviation of their radius samples.
    pub radius_continuity: f64,
    /// Mean of `1 - min/max` over the two widest children of each bifurcation.
    pub asymmetry: f64,
    pub n_bifurcations: usize,
}

impl MorphStats {
    pub const HEADER: &'static str = "class,branch_angle_deg,radius_continuity,asymmetry,n_bifurcations";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.class.name(),
            self.mean_branch_angle,
            self.radius_continuity,
            self.asymmetry,
            self.n_bifurcations
        )
    }
}

/// Direction leaving `node` along edge `k`, over the first few polyline steps.
fn tangent(g: &VesselGraph, k: usize, node: usize) -> Option<Vec<f64>> {
    let e = &g.edges[k];
    if e.polyline.len() < 2 {
        return None;
    }
    let pts: Vec<&Vec<usize>> = if e.u == node {
        e.polyline.iter().collect()
    } else {
        e.polyline.iter().rev().collect()
    };
    let m = TANGENT_STEPS.min(pts.len() - 1);
    let t: Vec<f64> = pts[m].iter().zip(pts[0]).map(|(&a, &b)| a as f64 - b as f64).collect();
    if t.iter().all(|&c| c == 0.0) {
        None
    } else {
        Some(t)
    }
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn morph_stats(g: &VesselGraph) -> MorphStats {
    let inc = g.incidence();
    let mut angles = Vec::new();
    let mut n_bif = 0;
    for node in &g.nodes {
        let edges: Vec<usize> = inc[node.id]
            .iter()
            .copied()
            .filter(|&k| g.edges[k].u != g.edges[k].v)
            .collect();
        if node.kind != NodeKind::Branch || edges.len() < 3 {
            continue;
        }
        n_bif += 1;
        let parent = parent_edge(g, &edges);
        let Some(pv) = tangent(g, parent, node.id) else {
            continue;
        };
        for &k in edges.iter().filter(|&&k| k != parent) {
            if let Some(cv) = tangent(g, k, node.id) {
                angles.push(180.0 - angle_deg(&pv, &cv));
            }
        }
    }
    let continuity: Vec<f64> = g
        .edges
        .iter()
        .filter(|e| !e.samples.is_empty())
        .map(|e| {
            // shifted by the first sample so constant profiles give exactly 0
            let d: Vec<f64> = e.samples.iter().map(|s| s - e.samples[0]).collect();
            let m = mean(&d);
            (d.iter().map(|s| (s - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
        })
        .collect();
    let asym: Vec<f64> = bifurcations(g)
        .iter()
        .map(|b| {
            let mut c = b.children_px.clone();
            c.sort_by(|a, b| b.total_cmp(a));
            1.0 - c[1] / c[0]
        })
        .collect();
    MorphStats {
        class: g.class,
        mean_branch_angle: mean(&angles),
        branch_angles: angles,
        radius_continuity: mean(&continuity),
        asymmetry: mean(&asym),
        n_bifurcations: n_bif,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn edge(u: usize, v: usize, r: f64, len: f64, polyline: Vec<Vec<usize>>) -> Edge {
        Edge {
            u,
            v,
            polyline,
            length_px: len,
            radius_px: r,
            radius_um: r,
            samples: vec![r; 4],
            low_confidence: false,
        }
    }

    fn node(id: usize, pos: [usize; 2], kind: NodeKind) -> Node {
        Node {
            id,
            pos: pos.to_vec(),
            kind,
        }
    }

    fn line(a: [usize; 2], b: [usize; 2]) -> Vec<Vec<usize>> {
        let n = a[0].abs_diff(b[0]).max(a[1].abs_diff(b[1]));
        (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                let f = |i: usize| (a[i] as f64 + t * (b[i] as f64 - a[i] as f64)).round() as usize;
                vec![f(0), f(1)]
            })
            .collect()
    }

    /// Stem from (20,10) up to (10,10), arms to (5,5) and (5,15)... as a T:
    /// arms go left and right from the branch point.
    fn t_graph(class: VesselClass) -> VesselGraph {
        let nodes = vec![
            node(0, [10, 2], NodeKind::End),
            node(1, [10, 10], NodeKind::Branch),
            node(2, [10, 18], NodeKind::End),
            node(3, [20, 10], NodeKind::End),
        ];
        let edges = vec![
            edge(0, 1, 2.0, 8.0, line([10, 2], [10, 10])),
            edge(1, 2, 2.0, 8.0, line([10, 10], [10, 18])),
            edge(1, 3, 3.0, 10.0, line([10, 10], [20, 10])),
        ];
        VesselGraph {
            spacing: vec![1.0, 1.0],
            class,
            nodes,
            edges,
        }
    }

    #[test]
    fn partition_examples() {
        let q = partition_flow(1.0, &[1.5, 1.5], 2.7).unwrap();
        assert_eq!(q, vec![0.5, 0.5]);
        let q = partition_flow(9.0, &[2.0, 1.0], 3.0).unwrap();
        assert!((q[0] - 8.0).abs() < 1e-12 && (q[1] - 1.0).abs() < 1e-12);
        let a = fixed_table(2.39).unwrap().lookup(5.0);
        let q = partition_flow(1.0, &[2.0, 1.0], a).unwrap();
        let s = 2f64.powf(2.39) + 1.0;
        assert!((q[0] - 2f64.powf(2.39) / s).abs() < 1e-14);
        assert!((q[1] - 1.0 / s).abs() < 1e-14);
        assert_eq!(q[0] + q[1], 1.0);
        assert!(partition_flow(1.0, &[0.0, 1.0], 3.0).is_err());
    }

    #[test]
    fn poiseuille_examples() {
        let pi = std::f64::consts::PI;
        assert!((poiseuille_dp(1.0, pi, 1.0, 1.0, 1.0).unwrap() - 8.0).abs() < 1e-14);
        assert_eq!(poiseuille_dp(0.0, 3.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let a = poiseuille_dp(1.0, 3.0, 1.0, 1.0, 1.0).unwrap();
        let b = poiseuille_dp(1.0, 3.0, 2.0, 1.0, 1.0).unwrap();
        assert!((a / b - 16.0).abs() < 1e-12);
        assert!(poiseuille_dp(1.0, 3.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn stem_root_orients_down_the_tree() {
        let g = t_graph(VesselClass::Artery);
        let fg = root_and_orient(&g, &[21.0, 10.0]).unwrap();
        assert_eq!(fg.roots, vec![3]);
        let stem = fg.edges.iter().find(|e| e.edge == 2).unwrap();
        assert_eq!((stem.from, stem.to), (3, 1));
        for k in [0, 1] {
            let arm = fg.edges.iter().find(|e| e.edge == k).unwrap();
            assert_eq!(arm.from, 1);
        }
    }

    #[test]
    fn disjoint_trees_get_their_own_roots() {
        let mut g = t_graph(VesselClass::Artery);
        let off = g.nodes.len();
        let extra = t_graph(VesselClass::Artery);
        for n in &extra.nodes {
            g.nodes.push(node(n.id + off, [n.pos[0] + 30, n.pos[1]], n.kind));
        }
        for e in &extra.edges {
            let mut e = e.clone();
            e.u += off;
            e.v += off;
            g.edges.push(e);
        }
        let fg = root_and_orient(&g, &[21.0, 10.0]).unwrap();
        assert_eq!(fg.roots.len(), 2);
        assert_eq!(fg.edges.len(), 6);
    }

    #[test]
    fn cycle_loses_its_most_resistive_edge() {
        let mut g = t_graph(VesselClass::Artery);
        // thin bridge closing a loop between the two arm ends
        g.edges.push(edge(0, 2, 0.5, 16.0, line([10, 2], [10, 18])));
        let fg = root_and_orient(&g, &[21.0, 10.0]).unwrap();
        assert_eq!(fg.removed_edges, vec![3]);
        assert_eq!(fg.edges.len(), 3);
        assert!(fg.edges.iter().all(|e| e.edge != 3));
    }

    #[test]
    fn single_edge_pressures() {
        let g = VesselGraph {
            spacing: vec![1.0, 1.0],
            class: VesselClass::Artery,
            nodes: vec![node(0, [0, 0], NodeKind::End), node(1, [0, 6], NodeKind::End)],
            edges: vec![edge(0, 1, 1.0, 6.0, line([0, 0], [0, 6]))],
        };
        let cfg = SimConfig::default();
        let fg = propagate(&root_and_orient(&g, &[0.0, 0.0]).unwrap(), &cfg, None).unwrap();
        let dp = poiseuille_dp(1.0, 6.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(fg.pressure[0], P_IN_MMHG);
        assert_eq!(fg.pressure[1], P_IN_MMHG - dp);
    }

    #[test]
    fn t_junction_angles_are_right_angles() {
        let s = morph_stats(&t_graph(VesselClass::Single));
        assert_eq!(s.n_bifurcations, 1);
        assert_eq!(s.branch_angles.len(), 2);
        for a in &s.branch_angles {
            assert!((a - 90.0).abs() < 1e-9, "{a}");
        }
        assert_eq!(s.asymmetry, 0.0);
        assert_eq!(s.radius_continuity, 0.0);
    }

    #[test]
    fn eta_zero_gives_the_pressure_span() {
        let art = t_graph(VesselClass::Artery);
        let ven = t_graph(VesselClass::Vein);
        let cfg = SimConfig {
            eta: 0.0,
            disc: vec![21.0, 10.0],
            macula_center: vec![10.0, 10.0],
            macula_radius: 9.0,
            ..SimConfig::default()
        };
        let a = propagate(&root_and_orient(&art, &cfg.disc).unwrap(), &cfg, None).unwrap();
        let v = propagate(&root_and_orient(&ven, &cfg.disc).unwrap(), &cfg, None).unwrap();
        let r = delta_p_av(&a, &v, &cfg).unwrap();
        assert_eq!(r.delta_p_av, P_IN_MMHG - P_OUT_MMHG);
        assert_eq!(r.per_path.len(), 4);
    }

    #[test]
    fn missing_macular_endpoints_name_the_class() {
        let art = t_graph(VesselClass::Artery);
        let cfg = SimConfig {
            disc: vec![21.0, 10.0],
            macula_center: vec![100.0, 100.0],
            macula_radius: 1.0,
            ..SimConfig::default()
        };
        let a = propagate(&root_and_orient(&art, &cfg.disc).unwrap(), &cfg, None).unwrap();
        let err = delta_p_av(&a, &a, &cfg).unwrap_err();
        assert!(err.to_string().contains("artery"));
    }
}
