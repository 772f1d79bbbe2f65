//! Exact Euclidean distance transform.
//!
//! Squared distances are computed with one lower-envelope-of-parabolas pass
//! per axis (Felzenszwalb & Huttenlocher), each pass weighted by the squared
//! spacing of its axis, followed by a square root.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{MaskGrid, ScalarField, Shape, VesselClass};

/// Distance of every `class` cell to the nearest non-`class` cell center, in
/// the physical units of the mask spacing. Background cells hold 0.
pub fn edt(mask: &MaskGrid, class: VesselClass) -> Result<ScalarField> {
    edt_with_spacing(mask, class, &mask.spacing())
}

/// As [`edt`] but with an explicit per-axis spacing (external axis order).
pub fn edt_with_spacing(mask: &MaskGrid, class: VesselClass, spacing: &[f64]) -> Result<ScalarField> {
    if mask.is_empty() {
        return Err(Error::Empty("mask has no cells".into()));
    }
    let fg: Vec<bool> = mask.labels().iter().map(|&l| class.contains(l)).collect();
    let n_fg = fg.iter().filter(|&&b| b).count();
    if n_fg == fg.len() {
        return Err(Error::NoBackground);
    }
    let bg: Vec<bool> = fg.iter().map(|&b| !b).collect();
    let sq = squared_distance_to_set(mask.shape(), &spacing3(mask.ndim(), spacing), &bg);
    let values = sq.into_iter().map(f64::sqrt).collect();
    ScalarField::new(mask.shape(), spacing, values)
}

pub(crate) fn spacing3(ndim: usize, spacing: &[f64]) -> [f64; 3] {
    let mut out = [1.0; 3];
    out[3 - ndim..].copy_from_slice(spacing);
    out
}

/// Squared distance from every cell to the nearest `target` cell center.
/// Cells are `f64::INFINITY` when there is no target at all.
pub fn squared_distance_to_set(shape: Shape, spacing: &[f64; 3], target: &[bool]) -> Vec<f64> {
    let mut f: Vec<f64> = target.iter().map(|&t| if t { 0.0 } else { f64::INFINITY }).collect();
    let dims = shape.dims3();
    let first_axis = 3 - shape.ndim();
    // Last axis first: contiguous lines.
    for axis in (first_axis..3).rev() {
        if dims[axis] > 1 {
            transform_axis(&mut f, dims, axis, spacing[axis] * spacing[axis]);
        }
    }
    f
}

fn transform_axis(f: &mut [f64], dims: [usize; 3], axis: usize, weight: f64) {
    let n = dims[axis];
    if axis == 2 {
        f.par_chunks_mut(n).for_each_init(
            || Scratch::new(n),
            |scratch, line| {
                scratch.input.copy_from_slice(line);
                scratch.run(weight);
                line.copy_from_slice(&scratch.output);
            },
        );
        return;
    }
    let stride: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let n_lines = outer * stride;
    let lines: Vec<Vec<f64>> = (0..n_lines)
        .into_par_iter()
        .map_init(
            || Scratch::new(n),
            |scratch, line| {
                let base = (line / stride) * n * stride + line % stride;
                for i in 0..n {
                    scratch.input[i] = f[base + i * stride];
                }
                scratch.run(weight);
                scratch.output.clone()
            },
        )
        .collect();
    for (line, values) in lines.iter().enumerate() {
        let base = (line / stride) * n * stride + line % stride;
        for (i, v) in values.iter().enumerate() {
            f[base + i * stride] = *v;
        }
    }
}

struct Scratch {
    input: Vec<f64>,
    output: Vec<f64>,
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            input: vec![0.0; n],
            output: vec![0.0; n],
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// `output[p] = min_q weight * (p - q)^2 + input[q]`.
    fn run(&mut self, weight: f64) {
        let n = self.input.len();
        let f = &self.input;
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + weight * (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.sites[0] = q;
                    self.bounds[0] = f64::NEG_INFINITY;
                    self.bounds[1] = f64::INFINITY;
                    break;
                }
                let v = self.sites[k as usize];
                let fv = f[v] + weight * (v * v) as f64;
                let s = (fq - fv) / (2.0 * weight * (q - v) as f64);
                if s <= self.bounds[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.sites[k as usize] = q;
                self.bounds[k as usize] = s;
                self.bounds[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            self.output.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for p in 0..n {
            while self.bounds[j + 1] < p as f64 {
                j += 1;
            }
            let v = self.sites[j];
            let d = p as f64 - v as f64;
            self.output[p] = weight * d * d + f[v];
        }
    }
}
