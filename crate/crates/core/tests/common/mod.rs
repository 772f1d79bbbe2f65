//! Brute-force references for the 2D topology and overlap metrics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vasctree::{MaskGrid, Shape};

pub struct Grid {
    pub h: usize,
    pub w: usize,
    pub cells: Vec<bool>,
}

impl Grid {
    pub fn from_mask(m: &MaskGrid) -> Self {
        let [_, h, w] = m.shape().dims3();
        Grid {
            h,
            w,
            cells: m.to_bools(),
        }
    }

    pub fn at(&self, y: isize, x: isize) -> bool {
        y >= 0
            && x >= 0
            && (y as usize) < self.h
            && (x as usize) < self.w
            && self.cells[y as usize * self.w + x as usize]
    }
}

/// Random blobs: a noise field thresholded after one box blur.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> MaskGrid {
    let density = rng.gen_range(0.3..0.7);
    let noise: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
    let cells: Vec<bool> = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            let mut s = 0.0;
            let mut n = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                        s += noise[yy as usize * w + xx as usize];
                        n += 1.0;
                    }
                }
            }
            s / n < density
        })
        .collect();
    MaskGrid::from_bools(Shape::new_2d(h, w), &cells).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fill(g: &Grid, labels: &mut [u32], y: isize, x: isize, label: u32, eight: bool, want: bool) {
    let in_grid = y >= 0 && x >= 0 && (y as usize) < g.h && (x as usize) < g.w;
    if !in_grid {
        return;
    }
    let i = y as usize * g.w + x as usize;
    if g.cells[i] != want || labels[i] != 0 {
        return;
    }
    labels[i] = label;
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if (dy, dx) == (0, 0) || (!eight && dy != 0 && dx != 0) {
                continue;
            }
            fill(g, labels, y + dy, x + dx, label, eight, want);
        }
    }
}

/// Recursive flood fill of cells equal to `want`, labels in raster order.
pub fn flood_labels(g: &Grid, eight: bool, want: bool) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; g.cells.len()];
    let mut count = 0;
    for y in 0..g.h {
        for x in 0..g.w {
            let i = y * g.w + x;
            if g.cells[i] == want && labels[i] == 0 {
                count += 1;
                fill(g, &mut labels, y as isize, x as isize, count, eight, want);
            }
        }
    }
    (labels, count as usize)
}

/// Euler characteristic of the union of closed unit squares, `V - E + F`.
pub fn euler(g: &Grid) -> i64 {
    let mut v = 0;
    let mut e = 0;
    let f = g.cells.iter().filter(|&&c| c).count() as i64;
    for y in 0..=g.h as isize {
        for x in 0..=g.w as isize {
            // lattice vertex shared by the four squares around it
            if g.at(y - 1, x - 1) || g.at(y - 1, x) || g.at(y, x - 1) || g.at(y, x) {
                v += 1;
            }
            // horizontal edge from (y, x) to (y, x + 1)
            if (x as usize) < g.w && (g.at(y - 1, x) || g.at(y, x)) {
                e += 1;
            }
            // vertical edge from (y, x) to (y + 1, x)
            if (y as usize) < g.h && (g.at(y, x - 1) || g.at(y, x)) {
                e += 1;
            }
        }
    }
    v - e + f
}

/// `(β0, β1)` from an 8-connected flood fill and the Euler characteristic.
pub fn betti(g: &Grid) -> (usize, usize) {
    let (_, b0) = flood_labels(g, true, true);
    let b1 = b0 as i64 - euler(g);
    (b0, b1 as usize)
}

pub fn boundary_points(g: &Grid) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for y in 0..g.h as isize {
        for x in 0..g.w as isize {
            if g.at(y, x) && (!g.at(y - 1, x) || !g.at(y + 1, x) || !g.at(y, x - 1) || !g.at(y, x + 1)) {
                out.push((y as f64, x as f64));
            }
        }
    }
    out
}

/// Pairwise maximum of minimum distances, both directions.
pub fn hausdorff(a: &Grid, b: &Grid, spacing: [f64; 2]) -> f64 {
    let (pa, pb) = (boundary_points(a), boundary_points(b));
    let d = |p: &(f64, f64), q: &(f64, f64)| {
        (((p.0 - q.0) * spacing[0]).powi(2) + ((p.1 - q.1) * spacing[1]).powi(2)).sqrt()
    };
    let directed = |from: &[(f64, f64)], to: &[(f64, f64)]| {
        from.iter()
            .map(|p| to.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(&pa, &pb).max(directed(&pb, &pa))
}

pub fn dice(a: &Grid, b: &Grid) -> f64 {
    let both = a.cells.iter().zip(&b.cells).filter(|(x, y)| **x && **y).count();
    let total = a.cells.iter().filter(|&&c| c).count() + b.cells.iter().filter(|&&c| c).count();
    if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    }
}

/// clDice from the given skeletons by plain set counting.
pub fn cldice(a: &Grid, b: &Grid, skel_a: &Grid, skel_b: &Grid) -> f64 {
    let frac = |s: &Grid, other: &Grid| {
        let n = s.cells.iter().filter(|&&c| c).count();
        if n == 0 {
            return 0.0;
        }
        s.cells.iter().zip(&other.cells).filter(|(s, o)| **s && **o).count() as f64 / n as f64
    };
    if a.cells.iter().all(|c| !c) && b.cells.iter().all(|c| !c) {
        return 1.0;
    }
    let (prec, sens) = (frac(skel_a, b), frac(skel_b, a));
    if prec + sens == 0.0 {
        0.0
    } else {
        2.0 * prec * sens / (prec + sens)
    }
}
