//! Distance transform, morphology and connectivity primitives for 2D and 3D masks.

mod components;
mod edt;
mod morph;

pub(crate) use components::label_cells;
pub use components::{count_components, label_components, Components};
pub(crate) use edt::spacing3;
pub use edt::{edt, edt_with_spacing, squared_distance_to_set};
pub use morph::{ball_offsets, dilate, erode, morph, remove_small_regions, MorphOp};

use crate::grid::{Connectivity, MaskGrid};

/// Labels components of `mask` under `conn`; see [`Components`].
pub fn components(mask: &MaskGrid, conn: Connectivity) -> (Vec<u32>, usize) {
    let c = label_components(mask, conn);
    (c.labels, c.count)
}
