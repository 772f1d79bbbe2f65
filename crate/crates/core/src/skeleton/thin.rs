//! Topology-preserving thinning.
//!
//! 2D: Zhang–Suen sub-iterations select deletion candidates from a snapshot,
//! and each candidate is then removed only if it is still a simple point with
//! at least two foreground neighbors. The guard keeps plain Zhang–Suen from
//! erasing 2×2 blocks and two-pixel-thick diagonals. 3D: six directional
//! sub-iterations over border voxels with the same (26,6) simple-point guard.
//! Both finish with a sweep that removes remaining simple non-end cells, so
//! the result has no redundant staircase corners.

use crate::grid::{MaskGrid, Shape};
use crate::topology::{is_simple_2d, is_simple_3d};

pub fn thin(mask: &MaskGrid) -> MaskGrid {
    let cells = mask.to_bools();
    let out = if mask.ndim() == 2 {
        thin_2d(mask.shape(), &cells)
    } else {
        thin_3d(mask.shape(), &cells)
    };
    mask.map_bools(out)
}

/// Padded working image: one background cell on every side so neighbor
/// lookups need no bounds checks.
struct Padded {
    shape: Shape,
    img: Vec<bool>,
    offsets: Vec<isize>,
}

impl Padded {
    fn new(shape: Shape, cells: &[bool]) -> Self {
        let [d, h, w] = shape.dims3();
        let pshape = if shape.ndim() == 2 {
            Shape::new_2d(h + 2, w + 2)
        } else {
            Shape::new_3d(d + 2, h + 2, w + 2)
        };
        let zoff = if shape.ndim() == 2 { 0 } else { 1 };
        let mut img = vec![false; pshape.len()];
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    img[pshape.index(z + zoff, y + 1, x + 1)] = cells[shape.index(z, y, x)];
                }
            }
        }
        let [_, ph, pw] = pshape.dims3();
        let offsets = crate::grid::Connectivity::Full
            .offsets(shape.ndim())
            .iter()
            .map(|o| (o[0] * (ph * pw) as isize) + o[1] * pw as isize + o[2])
            .collect();
        Padded {
            shape: pshape,
            img,
            offsets,
        }
    }

    #[inline]
    fn config(&self, p: usize) -> u32 {
        let mut c = 0u32;
        for (k, &o) in self.offsets.iter().enumerate() {
            if self.img[(p as isize + o) as usize] {
                c |= 1 << k;
            }
        }
        c
    }

    fn active(&self) -> Vec<usize> {
        (0..self.img.len()).filter(|&i| self.img[i]).collect()
    }

    fn unpad(&self, shape: Shape) -> Vec<bool> {
        let [d, h, w] = shape.dims3();
        let zoff = if shape.ndim() == 2 { 0 } else { 1 };
        let mut out = vec![false; shape.len()];
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    out[shape.index(z, y, x)] = self.img[self.shape.index(z + zoff, y + 1, x + 1)];
                }
            }
        }
        out
    }

    /// Repeatedly deletes simple cells with at least two neighbors, in raster
    /// order, until none is left.
    fn prune_redundant(&mut self, active: &mut Vec<usize>, simple: impl Fn(u32) -> bool) {
        loop {
            let mut changed = false;
            for &p in active.iter() {
                if !self.img[p] {
                    continue;
                }
                let c = self.config(p);
                if c.count_ones() >= 2 && simple(c) {
                    self.img[p] = false;
                    changed = true;
                }
            }
            active.retain(|&p| self.img[p]);
            if !changed {
                break;
            }
        }
    }
}

// Bits of the 2D ring (raster order): NW=0 N=1 NE=2 W=3 E=4 SW=5 S=6 SE=7.
const N: u32 = 1 << 1;
const NE: u32 = 1 << 2;
const E: u32 = 1 << 4;
const SE: u32 = 1 << 7;
const S: u32 = 1 << 6;
const SW: u32 = 1 << 5;
const W: u32 = 1 << 3;
const NW: u32 = 1 << 0;

fn zhang_suen_candidate(c: u32, step: usize) -> bool {
    let b = c.count_ones();
    if !(2..=6).contains(&b) {
        return false;
    }
    let seq = [N, NE, E, SE, S, SW, W, NW];
    let transitions = (0..8).filter(|&i| c & seq[i] == 0 && c & seq[(i + 1) % 8] != 0).count();
    if transitions != 1 {
        return false;
    }
    let all = |m: u32| c & m == m;
    if step == 0 {
        !all(N | E | S) && !all(E | S | W)
    } else {
        !all(N | E | W) && !all(N | S | W)
    }
}

fn thin_2d(shape: Shape, cells: &[bool]) -> Vec<bool> {
    let mut zs = [[false; 256]; 2];
    for (step, table) in zs.iter_mut().enumerate() {
        for (c, slot) in table.iter_mut().enumerate() {
            *slot = zhang_suen_candidate(c as u32, step);
        }
    }
    let mut pad = Padded::new(shape, cells);
    let mut active = pad.active();
    loop {
        let mut changed = false;
        for table in &zs {
            let candidates: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&p| pad.img[p] && table[pad.config(p) as usize])
                .collect();
            for p in candidates {
                let c = pad.config(p);
                if c.count_ones() >= 2 && is_simple_2d(c as u8) {
                    pad.img[p] = false;
                    changed = true;
                }
            }
        }
        active.retain(|&p| pad.img[p]);
        if !changed {
            break;
        }
    }
    pad.prune_redundant(&mut active, |c| is_simple_2d(c as u8));
    pad.unpad(shape)
}

fn thin_3d(shape: Shape, cells: &[bool]) -> Vec<bool> {
    let mut pad = Padded::new(shape, cells);
    let [_, ph, pw] = pad.shape.dims3();
    let plane = (ph * pw) as isize;
    let directions: [isize; 6] = [-plane, plane, -(pw as isize), pw as isize, -1, 1];
    let mut active = pad.active();
    loop {
        let mut changed = false;
        for &dir in &directions {
            let candidates: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&p| {
                    pad.img[p] && !pad.img[(p as isize + dir) as usize] && {
                        let c = pad.config(p);
                        c.count_ones() >= 2 && is_simple_3d(c)
                    }
                })
                .collect();
            for p in candidates {
                let c = pad.config(p);
                if c.count_ones() >= 2 && is_simple_3d(c) {
                    pad.img[p] = false;
                    changed = true;
                }
            }
        }
        active.retain(|&p| pad.img[p]);
        if !changed {
            break;
        }
    }
    pad.prune_redundant(&mut active, is_simple_3d);
    pad.unpad(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Connectivity;
    use crate::raster::label_components;
    use crate::topology::{betti, skeleton_cycle_rank};

    fn has_solid_block_2d(m: &MaskGrid) -> bool {
        let [_, h, w] = m.shape().dims3();
        (0..h.saturating_sub(1)).any(|y| {
            (0..w.saturating_sub(1)).any(|x| {
                let s = m.shape();
                [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .all(|&(dy, dx)| m.is_set(s.index(0, y + dy, x + dx)))
            })
        })
    }

    #[test]
    fn line_unchanged() {
        let m = MaskGrid::from_ascii(&[".......", ".#####.", "......."]);
        assert_eq!(thin(&m).labels(), m.labels());
    }

    #[test]
    fn disk_thins_to_connected_unit_width() {
        let mut rows = Vec::new();
        for y in 0..11i32 {
            let row: String = (0..11i32)
                .map(|x| {
                    if (y - 5).pow(2) + (x - 5).pow(2) <= 16 {
                        '#'
                    } else {
                        '.'
                    }
                })
                .collect();
            rows.push(row);
        }
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let m = MaskGrid::from_ascii(&refs);
        let t = thin(&m);
        assert!(t.count() >= 1);
        assert_eq!(label_components(&t, Connectivity::Full).count, 1);
        assert!(!has_solid_block_2d(&t));
    }

    #[test]
    fn annulus_keeps_one_cycle() {
        let mut rows = Vec::new();
        for y in 0..21i32 {
            let row: String = (0..21i32)
                .map(|x| {
                    let r2 = (y - 10).pow(2) + (x - 10).pow(2);
                    if (16..=64).contains(&r2) {
                        '#'
                    } else {
                        '.'
                    }
                })
                .collect();
            rows.push(row);
        }
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let m = MaskGrid::from_ascii(&refs);
        let t = thin(&m);
        assert_eq!(betti(&t), (1, 1));
        assert_eq!(skeleton_cycle_rank(&t), 1);
        assert!(!has_solid_block_2d(&t));
    }

    #[test]
    fn square_block_thins_to_a_segment() {
        let m = MaskGrid::from_ascii(&["....", ".##.", ".##.", "...."]);
        let t = thin(&m);
        assert!((1..=2).contains(&t.count()));
        assert_eq!(label_components(&t, Connectivity::Full).count, 1);
    }

    #[test]
    fn tube_3d_thins_to_a_curve() {
        let shape = Shape::new_3d(20, 9, 9);
        let cells: Vec<bool> = (0..shape.len())
            .map(|i| {
                let [z, y, x] = shape.coords(i);
                let (dy, dx) = (y as i32 - 4, x as i32 - 4);
                (2..18).contains(&z) && dy * dy + dx * dx <= 6
            })
            .collect();
        let m = MaskGrid::from_bools(shape, &cells).unwrap();
        let t = thin(&m);
        assert_eq!(label_components(&t, Connectivity::Full).count, 1);
        assert_eq!(skeleton_cycle_rank(&t), 0);
        // no solid 2x2x2 block
        let [d, h, w] = shape.dims3();
        for z in 0..d - 1 {
            for y in 0..h - 1 {
                for x in 0..w - 1 {
                    let solid = (0..8).all(|k| t.is_set(shape.index(z + (k >> 2), y + ((k >> 1) & 1), x + (k & 1))));
                    assert!(!solid);
                }
            }
        }
        // curve-like: every voxel has at most a few neighbors and ends exist
        let ends = t
            .foreground_indices()
            .into_iter()
            .filter(|&i| shape.neighbors(i, Connectivity::Full).filter(|&j| t.is_set(j)).count() == 1)
            .count();
        assert_eq!(ends, 2);
    }
}
