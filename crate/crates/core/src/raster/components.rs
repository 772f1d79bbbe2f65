use std::collections::VecDeque;

use crate::grid::{Connectivity, MaskGrid, Shape};

/// Connected-component labelling: `labels[i]` is 0 for background and
/// `1..=count` otherwise, numbered in raster order of discovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub shape: Shape,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Cell count per component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            if l != 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

pub fn label_components(mask: &MaskGrid, conn: Connectivity) -> Components {
    label_cells(mask.shape(), &mask.to_bools(), conn)
}

pub(crate) fn label_cells(shape: Shape, cells: &[bool], conn: Connectivity) -> Components {
    let offsets = conn.offsets(shape.ndim());
    let mut labels = vec![0u32; cells.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if !cells[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for &o in offsets {
                if let Some(j) = shape.offset(i, o) {
                    if cells[j] && labels[j] == 0 {
                        labels[j] = count;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    Components {
        shape,
        labels,
        count: count as usize,
    }
}

/// Number of components, without materialising the label field.
pub fn count_components(shape: Shape, cells: &[bool], conn: Connectivity) -> usize {
    label_cells(shape, cells, conn).count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pixels() {
        let m = MaskGrid::from_ascii(&["#.", ".#"]);
        assert_eq!(label_components(&m, Connectivity::Face).count, 2);
        assert_eq!(label_components(&m, Connectivity::Full).count, 1);
    }

    #[test]
    fn raster_order_labels() {
        let m = MaskGrid::from_ascii(&["..#", "#..", "#.#"]);
        let c = label_components(&m, Connectivity::Face);
        assert_eq!(c.count, 3);
        assert_eq!(c.labels, vec![0, 0, 1, 2, 0, 0, 2, 0, 3]);
    }
}
