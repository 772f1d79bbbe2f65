//! Pixel and voxel sizes of the public vessel datasets.

use crate::error::{Error, Result};

/// Retinal arc length per visual degree, mm.
pub const MM_PER_DEGREE: f64 = 0.26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dataset {
    pub name: &'static str,
    /// Isotropic cell size.
    pub size: f64,
    pub unit: &'static str,
    pub ndim: usize,
}

pub const DATASETS: &[Dataset] = &[
    Dataset {
        name: "RITE",
        size: 21.1,
        unit: "um",
        ndim: 2,
    },
    Dataset {
        name: "LES-AV",
        size: 5.43,
        unit: "um",
        ndim: 2,
    },
    Dataset {
        name: "F-AVSeg",
        size: 9.22,
        unit: "um",
        ndim: 2,
    },
    Dataset {
        name: "HRF-AV",
        size: 4.81,
        unit: "um",
        ndim: 2,
    },
    Dataset {
        name: "ImageCAS",
        size: 0.70,
        unit: "mm",
        ndim: 3,
    },
    Dataset {
        name: "CCA",
        size: 0.60,
        unit: "mm",
        ndim: 3,
    },
    Dataset {
        name: "MIDAS",
        size: 1.14,
        unit: "mm",
        ndim: 3,
    },
];

/// Case-insensitive lookup by dataset name.
pub fn dataset(name: &str) -> Result<Dataset> {
    DATASETS
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .copied()
        .ok_or_else(|| Error::invalid("dataset", format!("unknown dataset {name}")))
}

/// Per-axis spacing for a dataset.
pub fn spacing(name: &str) -> Result<Vec<f64>> {
    let d = dataset(name)?;
    Ok(vec![d.size; d.ndim])
}

pub fn degrees_to_mm(deg: f64) -> f64 {
    deg * MM_PER_DEGREE
}

pub fn mm_to_degrees(mm: f64) -> f64 {
    mm / MM_PER_DEGREE
}

pub fn px_to_um(px: f64, um_per_px: f64) -> f64 {
    px * um_per_px
}
