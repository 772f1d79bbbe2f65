//! Lattice containers shared by every stage of the pipeline.
//!
//! Grids are stored in C order with the last axis fastest. A 2D grid is kept
//! internally as a single-slice volume (`dims[0] == 1`) so that index
//! arithmetic is shared; neighborhoods are still generated from the true
//! dimensionality, so a 2D grid never sees out-of-plane neighbors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const ARTERY: u8 = 1;
pub const VEIN: u8 = 2;
pub const BOTH: u8 = 3;

/// Foreground label of a single-class mask.
pub const FOREGROUND: u8 = ARTERY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    ndim: usize,
    dims: [usize; 3],
}

impl Shape {
    pub fn new_2d(height: usize, width: usize) -> Self {
        Shape {
            ndim: 2,
            dims: [1, height, width],
        }
    }

    pub fn new_3d(depth: usize, height: usize, width: usize) -> Self {
        Shape {
            ndim: 3,
            dims: [depth, height, width],
        }
    }

    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        match *dims {
            [h, w] => Ok(Shape::new_2d(h, w)),
            [d, h, w] => Ok(Shape::new_3d(d, h, w)),
            _ => Err(Error::invalid(
                "dims",
                format!("expected 2 or 3 extents, got {}", dims.len()),
            )),
        }
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Extents in external order (`[h, w]` or `[d, h, w]`).
    pub fn dims(&self) -> Vec<usize> {
        self.dims[3 - self.ndim..].to_vec()
    }

    /// Internal `[d, h, w]` extents; `d == 1` for 2D grids.
    pub fn dims3(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], x]
    }

    /// Coordinates in external order.
    pub fn position(&self, idx: usize) -> Vec<usize> {
        self.coords(idx)[3 - self.ndim..].to_vec()
    }

    /// Flat index of an external-order position, if in bounds.
    pub fn index_of(&self, pos: &[usize]) -> Option<usize> {
        if pos.len() != self.ndim {
            return None;
        }
        let mut c = [0usize; 3];
        c[3 - self.ndim..].copy_from_slice(pos);
        if c.iter().zip(self.dims.iter()).any(|(a, d)| a >= d) {
            return None;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Index of `idx` displaced by `off`, or `None` when it leaves the grid.
    #[inline]
    pub fn offset(&self, idx: usize, off: [isize; 3]) -> Option<usize> {
        let c = self.coords(idx);
        let mut n = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as isize + off[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            n[a] = v as usize;
        }
        Some(self.index(n[0], n[1], n[2]))
    }

    /// In-grid neighbors of `idx` under `conn`, in raster order.
    pub fn neighbors(&self, idx: usize, conn: Connectivity) -> impl Iterator<Item = usize> + '_ {
        conn.offsets(self.ndim).iter().filter_map(move |&o| self.offset(idx, o))
    }
}

/// Foreground adjacency: `Face` is 4 (2D) / 6 (3D), `Full` is 8 / 26.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Face,
    Full,
}

const FACE_2D: [[isize; 3]; 4] = [[0, -1, 0], [0, 0, -1], [0, 0, 1], [0, 1, 0]];
const FULL_2D: [[isize; 3]; 8] = [
    [0, -1, -1],
    [0, -1, 0],
    [0, -1, 1],
    [0, 0, -1],
    [0, 0, 1],
    [0, 1, -1],
    [0, 1, 0],
    [0, 1, 1],
];
const FACE_3D: [[isize; 3]; 6] = [[-1, 0, 0], [0, -1, 0], [0, 0, -1], [0, 0, 1], [0, 1, 0], [1, 0, 0]];
static FULL_3D: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut k = 0;
    let mut z = -1;
    while z <= 1 {
        let mut y = -1;
        while y <= 1 {
            let mut x = -1;
            while x <= 1 {
                if !(z == 0 && y == 0 && x == 0) {
                    out[k] = [z, y, x];
                    k += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
};

impl Connectivity {
    /// Neighbor offsets (excluding the center) in raster order.
    pub fn offsets(self, ndim: usize) -> &'static [[isize; 3]] {
        match (self, ndim) {
            (Connectivity::Face, 2) => &FACE_2D,
            (Connectivity::Full, 2) => &FULL_2D,
            (Connectivity::Face, _) => &FACE_3D,
            (Connectivity::Full, _) => &FULL_3D,
        }
    }

    /// Parses the neighbor count form (4/8 in 2D, 6/26 in 3D).
    pub fn from_count(count: usize, ndim: usize) -> Result<Self> {
        match (count, ndim) {
            (4, 2) | (6, 3) => Ok(Connectivity::Face),
            (8, 2) | (26, 3) => Ok(Connectivity::Full),
            _ => Err(Error::invalid(
                "connectivity",
                format!("{count} is not valid in {ndim}D"),
            )),
        }
    }

    pub fn dual(self) -> Self {
        match self {
            Connectivity::Face => Connectivity::Full,
            Connectivity::Full => Connectivity::Face,
        }
    }
}

/// Which label set a class selects from a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VesselClass {
    /// Every non-background label.
    Single,
    Artery,
    Vein,
}

impl VesselClass {
    pub fn contains(self, label: u8) -> bool {
        match self {
            VesselClass::Single => label != BACKGROUND,
            VesselClass::Artery => label == ARTERY || label == BOTH,
            VesselClass::Vein => label == VEIN || label == BOTH,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VesselClass::Single => "single",
            VesselClass::Artery => "artery",
            VesselClass::Vein => "vein",
        }
    }
}

impl std::str::FromStr for VesselClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "vessel" => Ok(VesselClass::Single),
            "artery" => Ok(VesselClass::Artery),
            "vein" => Ok(VesselClass::Vein),
            other => Err(Error::invalid("class", format!("unknown class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    /// `{0, 1}`.
    Binary,
    /// `{0, artery, vein, both}`.
    ArteryVein,
}

fn check_spacing(ndim: usize, spacing: &[f64]) -> Result<[f64; 3]> {
    if spacing.len() != ndim {
        return Err(Error::invalid(
            "spacing",
            format!("expected {ndim} values, got {}", spacing.len()),
        ));
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("spacing", "values must be finite and > 0"));
    }
    let mut out = [1.0; 3];
    out[3 - ndim..].copy_from_slice(spacing);
    Ok(out)
}

/// Labelled segmentation domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    shape: Shape,
    spacing: [f64; 3],
    alphabet: Alphabet,
    labels: Vec<u8>,
}

impl MaskGrid {
    pub fn new(shape: Shape, spacing: &[f64], alphabet: Alphabet, labels: Vec<u8>) -> Result<Self> {
        let spacing = check_spacing(shape.ndim(), spacing)?;
        if labels.len() != shape.len() {
            return Err(Error::DimMismatch(format!(
                "{} labels for a grid of {} cells",
                labels.len(),
                shape.len()
            )));
        }
        let max = match alphabet {
            Alphabet::Binary => FOREGROUND,
            Alphabet::ArteryVein => BOTH,
        };
        if let Some(bad) = labels.iter().find(|&&l| l > max) {
            return Err(Error::invalid(
                "labels",
                format!("label {bad} outside the {alphabet:?} alphabet"),
            ));
        }
        Ok(MaskGrid {
            shape,
            spacing,
            alphabet,
            labels,
        })
    }

    /// Unit-spaced binary mask from a boolean buffer.
    pub fn from_bools(shape: Shape, cells: &[bool]) -> Result<Self> {
        let labels = cells.iter().map(|&b| b as u8).collect();
        MaskGrid::new(shape, &vec![1.0; shape.ndim()], Alphabet::Binary, labels)
    }

    /// Builds a binary 2D mask from rows of `'#'`/`'.'` characters.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let h = rows.len();
        let w = rows.first().map_or(0, |r| r.len());
        let cells: Vec<bool> = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        MaskGrid::from_bools(Shape::new_2d(h, w), &cells).expect("well-formed ascii mask")
    }

    pub fn empty_like(&self) -> Self {
        MaskGrid {
            shape: self.shape,
            spacing: self.spacing,
            alphabet: Alphabet::Binary,
            labels: vec![0; self.shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.spacing[3 - self.ndim()..].to_vec()
    }

    pub(crate) fn spacing3(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: &[f64]) -> Result<Self> {
        self.spacing = check_spacing(self.ndim(), spacing)?;
        Ok(self)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.labels[idx]
    }

    /// Foreground test for binary masks (any non-zero label).
    #[inline]
    pub fn is_set(&self, idx: usize) -> bool {
        self.labels[idx] != BACKGROUND
    }

    pub fn set(&mut self, idx: usize, on: bool) {
        self.labels[idx] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != BACKGROUND).count()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != BACKGROUND).collect()
    }

    pub fn foreground_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_set(i)).collect()
    }

    /// Binary mask of the cells whose label belongs to `class`.
    ///
    /// Crossing cells (`BOTH`) belong to both the artery and the vein mask.
    pub fn class_mask(&self, class: VesselClass) -> MaskGrid {
        MaskGrid {
            shape: self.shape,
            spacing: self.spacing,
            alphabet: Alphabet::Binary,
            labels: self.labels.iter().map(|&l| class.contains(l) as u8).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &MaskGrid) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        Ok(())
    }

    pub(crate) fn map_bools(&self, cells: Vec<bool>) -> MaskGrid {
        MaskGrid {
            shape: self.shape,
            spacing: self.spacing,
            alphabet: Alphabet::Binary,
            labels: cells.into_iter().map(|b| b as u8).collect(),
        }
    }
}

/// Real-valued field over a lattice (probabilities, skeletons, radii, distances).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    shape: Shape,
    spacing: [f64; 3],
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(shape: Shape, spacing: &[f64], values: Vec<f64>) -> Result<Self> {
        let spacing = check_spacing(shape.ndim(), spacing)?;
        if values.len() != shape.len() {
            return Err(Error::DimMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                shape.len()
            )));
        }
        Ok(ScalarField { shape, spacing, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        ScalarField {
            shape,
            spacing: [1.0; 3],
            values: vec![0.0; shape.len()],
        }
    }

    /// Unit-spaced field from raw values.
    pub fn from_values(shape: Shape, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(shape, &vec![1.0; shape.ndim()], values)
    }

    /// 0/1 field of a binary mask.
    pub fn from_mask(mask: &MaskGrid) -> Self {
        ScalarField {
            shape: mask.shape(),
            spacing: mask.spacing3(),
            values: mask
                .labels()
                .iter()
                .map(|&l| if l != BACKGROUND { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.spacing[3 - self.ndim()..].to_vec()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cells with value `>= threshold` as a binary mask.
    pub fn threshold(&self, threshold: f64) -> MaskGrid {
        MaskGrid {
            shape: self.shape,
            spacing: self.spacing,
            alphabet: Alphabet::Binary,
            labels: self.values.iter().map(|&v| (v >= threshold) as u8).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: Shape) -> Result<()> {
        if self.shape != other {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                self.shape.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> ScalarField {
        ScalarField {
            shape: self.shape,
            spacing: self.spacing,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_round_trip() {
        let s = Shape::new_3d(3, 4, 5);
        for i in 0..s.len() {
            let [z, y, x] = s.coords(i);
            assert_eq!(s.index(z, y, x), i);
        }
    }

    #[test]
    fn neighbor_counts() {
        let s2 = Shape::new_2d(3, 3);
        assert_eq!(s2.neighbors(4, Connectivity::Full).count(), 8);
        assert_eq!(s2.neighbors(4, Connectivity::Face).count(), 4);
        assert_eq!(s2.neighbors(0, Connectivity::Full).count(), 3);
        let s3 = Shape::new_3d(3, 3, 3);
        assert_eq!(s3.neighbors(13, Connectivity::Full).count(), 26);
        assert_eq!(s3.neighbors(13, Connectivity::Face).count(), 6);
    }

    #[test]
    fn class_masks_share_crossings() {
        let shape = Shape::new_2d(1, 4);
        let m = MaskGrid::new(shape, &[1.0, 1.0], Alphabet::ArteryVein, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(m.class_mask(VesselClass::Artery).labels(), &[0, 1, 0, 1]);
        assert_eq!(m.class_mask(VesselClass::Vein).labels(), &[0, 0, 1, 1]);
        assert_eq!(m.class_mask(VesselClass::Single).labels(), &[0, 1, 1, 1]);
    }

    #[test]
    fn rejects_bad_labels_and_spacing() {
        let shape = Shape::new_2d(1, 2);
        assert!(MaskGrid::new(shape, &[1.0, 1.0], Alphabet::Binary, vec![0, 2]).is_err());
        assert!(MaskGrid::new(shape, &[1.0, 0.0], Alphabet::Binary, vec![0, 1]).is_err());
        assert!(MaskGrid::new(shape, &[1.0, 1.0], Alphabet::Binary, vec![0]).is_err());
    }
}
