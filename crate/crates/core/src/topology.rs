//! Digital-topology helpers: simple-point tests, Betti numbers and the cycle
//! rank of a skeleton's pixel adjacency graph.
//!
//! Foreground uses full connectivity (8 / 26) and background face
//! connectivity (4 / 6) throughout.

use std::sync::OnceLock;

use crate::grid::{Connectivity, MaskGrid, Shape};
use crate::raster::{count_components, label_cells};

/// Neighbor configuration bit order for 2D: the eight offsets of
/// `Connectivity::Full` in raster order.
const RING_2D: [(i32, i32); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn components_in_ring(
    cells: &[(i32, i32, i32)],
    member: impl Fn(usize) -> bool,
    adjacent: impl Fn(usize, usize) -> bool,
    counted: impl Fn(usize) -> bool,
) -> usize {
    let n = cells.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] || !member(s) {
            continue;
        }
        let mut stack = vec![s];
        seen[s] = true;
        let mut hit = false;
        while let Some(i) = stack.pop() {
            hit |= counted(i);
            for j in 0..n {
                if !seen[j] && member(j) && adjacent(i, j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if hit {
            count += 1;
        }
    }
    count
}

fn chebyshev(a: (i32, i32, i32), b: (i32, i32, i32)) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs()).max((a.2 - b.2).abs())
}

fn manhattan(a: (i32, i32, i32), b: (i32, i32, i32)) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs() + (a.2 - b.2).abs()
}

fn simple_2d_from_config(config: u8) -> bool {
    let cells: Vec<(i32, i32, i32)> = RING_2D.iter().map(|&(y, x)| (0, y, x)).collect();
    let fg = |i: usize| config & (1 << i) != 0;
    let t8 = components_in_ring(&cells, fg, |i, j| chebyshev(cells[i], cells[j]) == 1, |_| true);
    let t4 = components_in_ring(
        &cells,
        |i| !fg(i),
        |i, j| manhattan(cells[i], cells[j]) == 1,
        |i| manhattan(cells[i], (0, 0, 0)) == 1,
    );
    t8 == 1 && t4 == 1
}

fn simple_2d_table() -> &'static [bool; 256] {
    static TABLE: OnceLock<[bool; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [false; 256];
        for (c, slot) in t.iter_mut().enumerate() {
            *slot = simple_2d_from_config(c as u8);
        }
        t
    })
}

/// (8,4)-simple test for a 2D neighbor configuration in [`RING_2D`] bit order.
#[inline]
pub fn is_simple_2d(config: u8) -> bool {
    simple_2d_table()[config as usize]
}

struct Ring3d {
    cells: Vec<(i32, i32, i32)>,
    full_adj: Vec<Vec<usize>>,
    face_adj: Vec<Vec<usize>>,
    in_n18: Vec<bool>,
    is_face: Vec<bool>,
}

fn ring_3d() -> &'static Ring3d {
    static RING: OnceLock<Ring3d> = OnceLock::new();
    RING.get_or_init(|| {
        let cells: Vec<(i32, i32, i32)> = crate::grid::Connectivity::Full
            .offsets(3)
            .iter()
            .map(|o| (o[0] as i32, o[1] as i32, o[2] as i32))
            .collect();
        let n = cells.len();
        let adj = |d: &dyn Fn(usize, usize) -> bool| -> Vec<Vec<usize>> {
            (0..n)
                .map(|i| (0..n).filter(|&j| j != i && d(i, j)).collect())
                .collect()
        };
        let full_adj = adj(&|i, j| chebyshev(cells[i], cells[j]) == 1);
        let face_adj = adj(&|i, j| manhattan(cells[i], cells[j]) == 1);
        let origin = (0, 0, 0);
        Ring3d {
            in_n18: cells.iter().map(|&c| manhattan(c, origin) <= 2).collect(),
            is_face: cells.iter().map(|&c| manhattan(c, origin) == 1).collect(),
            cells,
            full_adj,
            face_adj,
        }
    })
}

/// (26,6)-simple test for a 3D configuration; bit `k` is the `k`-th offset of
/// `Connectivity::Full` in 3D.
pub fn is_simple_3d(config: u32) -> bool {
    let ring = ring_3d();
    let n = ring.cells.len();
    let fg = |i: usize| config & (1 << i) != 0;
    let count = |member: &dyn Fn(usize) -> bool, adj: &Vec<Vec<usize>>, counted: &dyn Fn(usize) -> bool| {
        let mut seen = [false; 26];
        let mut comps = 0;
        let mut stack = Vec::with_capacity(26);
        for s in 0..n {
            if seen[s] || !member(s) {
                continue;
            }
            seen[s] = true;
            stack.push(s);
            let mut hit = false;
            while let Some(i) = stack.pop() {
                hit |= counted(i);
                for &j in &adj[i] {
                    if !seen[j] && member(j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            if hit {
                comps += 1;
                if comps > 1 {
                    return comps;
                }
            }
        }
        comps
    };
    if count(&fg, &ring.full_adj, &|_| true) != 1 {
        return false;
    }
    count(&|i| !fg(i) && ring.in_n18[i], &ring.face_adj, &|i| ring.is_face[i]) == 1
}

/// Neighbor configuration of `idx` (out-of-grid cells are background).
pub(crate) fn config_of(mask: &[bool], shape: Shape, idx: usize) -> u32 {
    let mut c = 0u32;
    for (k, &o) in Connectivity::Full.offsets(shape.ndim()).iter().enumerate() {
        if shape.offset(idx, o).is_some_and(|j| mask[j]) {
            c |= 1 << k;
        }
    }
    c
}

pub fn is_simple(mask: &[bool], shape: Shape, idx: usize) -> bool {
    let c = config_of(mask, shape, idx);
    if shape.ndim() == 2 {
        is_simple_2d(c as u8)
    } else {
        is_simple_3d(c)
    }
}

/// Betti numbers `(β0, β1)`.
///
/// In 2D, β0 counts 8-connected foreground components and β1 counts
/// 4-connected background components of the mask padded by one background
/// cell, minus the outer one. In 3D, β1 is the cycle rank of the thinned
/// skeleton's adjacency graph (see [`skeleton_cycle_rank`]), which counts
/// vessel loops but is not full cubical homology.
pub fn betti(mask: &MaskGrid) -> (usize, usize) {
    let cells = mask.to_bools();
    let b0 = count_components(mask.shape(), &cells, Connectivity::Full);
    let b1 = if mask.ndim() == 2 {
        holes_2d(mask.shape(), &cells)
    } else {
        let sk = crate::skeleton::thin(mask);
        skeleton_cycle_rank(&sk).max(0) as usize
    };
    (b0, b1)
}

fn holes_2d(shape: Shape, cells: &[bool]) -> usize {
    let [_, h, w] = shape.dims3();
    let padded = Shape::new_2d(h + 2, w + 2);
    let mut bg = vec![true; padded.len()];
    for y in 0..h {
        for x in 0..w {
            bg[padded.index(0, y + 1, x + 1)] = !cells[shape.index(0, y, x)];
        }
    }
    count_components(padded, &bg, Connectivity::Face) - 1
}

/// `|E| - |V| + C` of the full-connectivity adjacency graph of `mask`, where
/// an edge between two cells is dropped whenever another foreground cell lies
/// in the box they span (so staircase corners do not form triangles).
pub fn skeleton_cycle_rank(mask: &MaskGrid) -> i64 {
    let shape = mask.shape();
    let cells = mask.to_bools();
    let offsets = Connectivity::Full.offsets(shape.ndim());
    let mut v = 0i64;
    let mut e = 0i64;
    for i in 0..cells.len() {
        if !cells[i] {
            continue;
        }
        v += 1;
        for &o in offsets {
            // each undirected pair once
            if o <= [0, 0, 0] {
                continue;
            }
            let Some(j) = shape.offset(i, o) else { continue };
            if !cells[j] {
                continue;
            }
            if !box_has_other(&cells, shape, i, o) {
                e += 1;
            }
        }
    }
    let c = label_cells(shape, &cells, Connectivity::Full).count as i64;
    e - v + c
}

fn box_has_other(cells: &[bool], shape: Shape, i: usize, o: [isize; 3]) -> bool {
    let ranges: Vec<Vec<isize>> = o.iter().map(|&d| if d == 0 { vec![0] } else { vec![0, d] }).collect();
    for &a in &ranges[0] {
        for &b in &ranges[1] {
            for &c in &ranges[2] {
                let p = [a, b, c];
                if p == [0, 0, 0] || p == o {
                    continue;
                }
                if shape.offset(i, p).is_some_and(|j| cells[j]) {
                    return true;
                }
            }
        }
    }
    false
}
