//! Hard thinning, differentiable soft skeletons and junction maps.

mod thin;

pub use thin::thin;

use serde::{Deserialize, Serialize};

use crate::autodiff::FieldTape;
use crate::error::{Error, Result};
use crate::grid::{Connectivity, MaskGrid, ScalarField, Shape};
use crate::raster::squared_distance_to_set;

/// Soft skeleton of a probability field with `k` erosion steps.
///
/// Each step adds the part of the eroded field that an opening removes,
/// `relu(x - open(x))`, without double counting what is already there; the
/// sum is divided by its global maximum. Pooling uses the cross stencil and
/// reads cells outside the grid as 0.
pub fn soft_skeleton(p: &ScalarField, k: usize) -> Result<ScalarField> {
    check_probability(p)?;
    if k == 0 {
        return Err(Error::invalid("k", "iteration count must be >= 1"));
    }
    let mut tape = FieldTape::new(p.shape());
    let x = tape.input(p.values().to_vec());
    let sk = soft_skeleton_node(&mut tape, x, k);
    Ok(p.with_values(tape.value(sk).to_vec()))
}

pub(crate) fn check_probability(p: &ScalarField) -> Result<()> {
    if p.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("p", "values must lie in [0, 1]"));
    }
    Ok(())
}

pub(crate) fn soft_skeleton_node(tape: &mut FieldTape, x0: usize, k: usize) -> usize {
    let open = |t: &mut FieldTape, x: usize| {
        let e = t.erode(x);
        t.dilate(e)
    };
    let o = open(tape, x0);
    let d = tape.sub(x0, o);
    let mut skel = tape.relu(d);
    let mut x = x0;
    for _ in 0..k {
        x = tape.erode(x);
        let o = open(tape, x);
        let d = tape.sub(x, o);
        let delta = tape.relu(d);
        let overlap = tape.mul(skel, delta);
        let fresh = tape.sub(delta, overlap);
        let fresh = tape.relu(fresh);
        skel = tape.add(skel, fresh);
    }
    tape.normalize_max(skel)
}

/// `ceil` of the largest distance from a cell of `p >= 0.5` to the nearest
/// cell below 0.5 or outside the grid; at least 1.
pub fn default_iterations(p: &ScalarField) -> usize {
    let shape = p.shape();
    let [d, h, w] = shape.dims3();
    let (pshape, zoff) = if shape.ndim() == 2 {
        (Shape::new_2d(h + 2, w + 2), 0)
    } else {
        (Shape::new_3d(d + 2, h + 2, w + 2), 1)
    };
    let mut bg = vec![true; pshape.len()];
    for i in 0..shape.len() {
        let [z, y, x] = shape.coords(i);
        bg[pshape.index(z + zoff, y + 1, x + 1)] = p.values()[i] < 0.5;
    }
    let d2 = squared_distance_to_set(pshape, &[1.0; 3], &bg);
    let max = d2.iter().cloned().fold(0.0, f64::max).sqrt();
    (max.ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    pub kernel_size: usize,
    pub sharpness: f64,
    pub offset: f64,
}

impl Default for JunctionParams {
    fn default() -> Self {
        JunctionParams {
            kernel_size: 3,
            sharpness: 50.0,
            offset: 3.5,
        }
    }
}

impl JunctionParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.kernel_size < 3 || self.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel_size", "must be odd and >= 3"));
        }
        Ok(())
    }
}

/// `j = sigmoid(sharpness * (box_sum(sk) - offset)) * sk`.
pub fn junction_map(sk: &ScalarField, params: &JunctionParams) -> Result<ScalarField> {
    params.validate()?;
    let mut tape = FieldTape::new(sk.shape());
    let s = tape.input(sk.values().to_vec());
    let j = junction_node(&mut tape, s, params);
    Ok(sk.with_values(tape.value(j).to_vec()))
}

pub(crate) fn junction_node(tape: &mut FieldTape, sk: usize, params: &JunctionParams) -> usize {
    let b = tape.box_sum(sk, params.kernel_size / 2);
    let s = tape.sigmoid(b, params.sharpness, params.offset);
    tape.mul(s, sk)
}

/// Endpoints and branch points of a unit-width skeleton, as raster-ordered
/// cell indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSet {
    pub ends: Vec<usize>,
    pub branches: Vec<usize>,
}

/// Number of foreground neighbors (full connectivity) of every cell.
pub fn neighbor_counts(skel: &MaskGrid) -> Vec<u8> {
    let shape = skel.shape();
    (0..skel.len())
        .map(|i| {
            if !skel.is_set(i) {
                return 0;
            }
            shape
                .neighbors(i, Connectivity::Full)
                .filter(|&j| skel.is_set(j))
                .count() as u8
        })
        .collect()
}

pub fn classify_nodes(skel: &MaskGrid) -> NodeSet {
    let mut set = NodeSet::default();
    for (i, &n) in neighbor_counts(skel).iter().enumerate() {
        if !skel.is_set(i) {
            continue;
        }
        match n {
            1 => set.ends.push(i),
            n if n >= 3 => set.branches.push(i),
            _ => {}
        }
    }
    set
}
