//! Binary morphology with discrete Euclidean balls.
//!
//! Dilation ignores cells outside the grid and erosion treats them as
//! foreground, which makes the pair an adjunction on the finite grid: closing
//! is extensive and both opening and closing are idempotent.

use serde::{Deserialize, Serialize};

use super::components::label_components;
use super::edt::squared_distance_to_set;
use crate::error::{Error, Result};
use crate::grid::{Connectivity, MaskGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Dilate,
    Erode,
    Open,
    Close,
}

pub fn morph(mask: &MaskGrid, op: MorphOp, radius: f64) -> Result<MaskGrid> {
    if !(radius >= 1.0) {
        return Err(Error::invalid("radius", format!("must be >= 1, got {radius}")));
    }
    Ok(match op {
        MorphOp::Dilate => dilate(mask, radius),
        MorphOp::Erode => erode(mask, radius),
        MorphOp::Open => dilate(&erode(mask, radius), radius),
        MorphOp::Close => erode(&dilate(mask, radius), radius),
    })
}

/// Lattice offsets of the discrete Euclidean ball `|o| <= radius`.
pub fn ball_offsets(radius: f64, ndim: usize) -> Vec<[isize; 3]> {
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let zr = if ndim == 3 { r } else { 0 };
    let mut out = Vec::new();
    for z in -zr..=zr {
        for y in -r..=r {
            for x in -r..=r {
                if ((z * z + y * y + x * x) as f64) <= r2 {
                    out.push([z, y, x]);
                }
            }
        }
    }
    out
}

pub fn dilate(mask: &MaskGrid, radius: f64) -> MaskGrid {
    let fg = mask.to_bools();
    if !fg.iter().any(|&b| b) {
        return mask.map_bools(fg);
    }
    let d2 = squared_distance_to_set(mask.shape(), &[1.0; 3], &fg);
    let r2 = radius * radius;
    mask.map_bools(d2.iter().map(|&d| d <= r2).collect())
}

pub fn erode(mask: &MaskGrid, radius: f64) -> MaskGrid {
    let bg: Vec<bool> = mask.labels().iter().map(|&l| l == 0).collect();
    if !bg.iter().any(|&b| b) {
        return mask.map_bools(vec![true; mask.len()]);
    }
    let d2 = squared_distance_to_set(mask.shape(), &[1.0; 3], &bg);
    let r2 = radius * radius;
    mask.map_bools(d2.iter().map(|&d| d > r2).collect())
}

/// Drops foreground components with fewer than `min_size` cells.
pub fn remove_small_regions(mask: &MaskGrid, min_size: usize, conn: Connectivity) -> MaskGrid {
    let comps = label_components(mask, conn);
    let sizes = comps.sizes();
    mask.map_bools(
        comps
            .labels
            .iter()
            .map(|&l| l != 0 && sizes[l as usize - 1] >= min_size)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;

    fn random_mask(seed: u64, h: usize, w: usize, density: f64) -> MaskGrid {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<bool> = (0..h * w).map(|_| rng.gen_bool(density)).collect();
        MaskGrid::from_bools(Shape::new_2d(h, w), &cells).unwrap()
    }

    fn naive_dilate(mask: &MaskGrid, radius: f64) -> Vec<bool> {
        let shape = mask.shape();
        let ball = ball_offsets(radius, mask.ndim());
        (0..mask.len())
            .map(|i| ball.iter().any(|&o| shape.offset(i, o).is_some_and(|j| mask.is_set(j))))
            .collect()
    }

    #[test]
    fn dilate_single_pixel_is_plus() {
        let m = MaskGrid::from_ascii(&[".....", ".....", "..#..", ".....", "....."]);
        let d = morph(&m, MorphOp::Dilate, 1.0).unwrap();
        let expected = MaskGrid::from_ascii(&[".....", "..#..", ".###.", "..#..", "....."]);
        assert_eq!(d.labels(), expected.labels());
    }

    #[test]
    fn edt_dilation_matches_stamping() {
        for seed in 0..5 {
            let m = random_mask(seed, 24, 19, 0.05);
            for r in [1.0, 1.5, 2.0, 3.0] {
                assert_eq!(dilate(&m, r).to_bools(), naive_dilate(&m, r));
            }
        }
    }

    #[test]
    fn closing_is_extensive_and_opening_idempotent() {
        for seed in 0..8 {
            let m = random_mask(100 + seed, 64, 64, 0.45);
            for r in [1.0, 2.0] {
                let closed = morph(&m, MorphOp::Close, r).unwrap();
                assert!((0..m.len()).all(|i| !m.is_set(i) || closed.is_set(i)));
                let open = morph(&m, MorphOp::Open, r).unwrap();
                let open2 = morph(&open, MorphOp::Open, r).unwrap();
                assert_eq!(open.labels(), open2.labels());
                let close2 = morph(&closed, MorphOp::Close, r).unwrap();
                assert_eq!(closed.labels(), close2.labels());
            }
        }
    }

    #[test]
    fn radius_below_one_rejected() {
        let m = MaskGrid::from_ascii(&["#."]);
        assert!(morph(&m, MorphOp::Dilate, 0.5).is_err());
    }

    #[test]
    fn small_regions_removed() {
        let m = MaskGrid::from_ascii(&["##....#", "##.....", ".....##"]);
        let out = remove_small_regions(&m, 3, Connectivity::Full);
        let expected = MaskGrid::from_ascii(&["##.....", "##.....", "......."]);
        assert_eq!(out.labels(), expected.labels());
        let comps = label_components(&out, Connectivity::Full);
        assert!(comps.sizes().iter().all(|&s| s >= 3));
    }
}
