//! Overlap, centreline and topology metrics between binary or labelled masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Connectivity, MaskGrid, VesselClass};
use crate::raster::{count_components, dilate, spacing3, squared_distance_to_set};
use crate::skeleton::thin;
use crate::topology::betti;

pub const CAL_RADIUS: f64 = 2.0;

/// Fraction of cells whose labels agree over the full label alphabet,
/// background included.
pub fn accuracy(pred: &MaskGrid, gt: &MaskGrid) -> Result<f64> {
    pred.check_same_shape(gt)?;
    if pred.alphabet() != gt.alphabet() {
        return Err(Error::invalid("alphabet", "pred and gt use different label sets"));
    }
    if pred.is_empty() {
        return Ok(1.0);
    }
    let same = pred.labels().iter().zip(gt.labels()).filter(|(a, b)| a == b).count();
    Ok(same as f64 / pred.len() as f64)
}

fn count_and(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(a, b)| **a && **b).count()
}

fn count(a: &[bool]) -> usize {
    a.iter().filter(|&&b| b).count()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// `2|P∩G| / (|P|+|G|)`; 1 when both are empty.
pub fn dice(pred: &MaskGrid, gt: &MaskGrid, class: VesselClass) -> Result<f64> {
    pred.check_same_shape(gt)?;
    let p = pred.class_mask(class).to_bools();
    let g = gt.class_mask(class).to_bools();
    Ok(ratio(2 * count_and(&p, &g), count(&p) + count(&g)))
}

/// Harmonic mean of topology precision `|thin(P)∩G|/|thin(P)|` and
/// sensitivity `|thin(G)∩P|/|thin(G)|`, with hard thinning.
pub fn cldice(pred: &MaskGrid, gt: &MaskGrid, class: VesselClass) -> Result<f64> {
    pred.check_same_shape(gt)?;
    let pm = pred.class_mask(class);
    let gm = gt.class_mask(class);
    let (p, g) = (pm.to_bools(), gm.to_bools());
    if count(&p) == 0 && count(&g) == 0 {
        return Ok(1.0);
    }
    let sp = thin(&pm).to_bools();
    let sg = thin(&gm).to_bools();
    let tprec = if count(&sp) == 0 {
        0.0
    } else {
        ratio(count_and(&sp, &g), count(&sp))
    };
    let tsens = if count(&sg) == 0 {
        0.0
    } else {
        ratio(count_and(&sg, &p), count(&sg))
    };
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cal {
    pub c: f64,
    pub a: f64,
    pub l: f64,
    pub product: f64,
}

/// Connectivity, area and length agreement with dilation radius `radius`.
pub fn cal(pred: &MaskGrid, gt: &MaskGrid, radius: f64) -> Result<Cal> {
    pred.check_same_shape(gt)?;
    let pm = pred.class_mask(VesselClass::Single);
    let gm = gt.class_mask(VesselClass::Single);
    let (p, g) = (pm.to_bools(), gm.to_bools());
    let n_gt = count(&g);
    if n_gt == 0 {
        return Err(Error::Empty("ground-truth mask".into()));
    }
    let shape = pred.shape();
    let cp = count_components(shape, &p, Connectivity::Full) as f64;
    let cg = count_components(shape, &g, Connectivity::Full) as f64;
    let c = 1.0 - ((cp - cg).abs() / n_gt as f64).min(1.0);

    let dp = dilate(&pm, radius).to_bools();
    let dg = dilate(&gm, radius).to_bools();
    let union = |a: &[bool], b: &[bool]| -> Vec<bool> { a.iter().zip(b).map(|(a, b)| *a || *b).collect() };
    let and = |a: &[bool], b: &[bool]| -> Vec<bool> { a.iter().zip(b).map(|(a, b)| *a && *b).collect() };

    let a_num = count(&union(&and(&dp, &g), &and(&p, &dg)));
    let a = ratio(a_num, count(&union(&p, &g)));

    let sp = thin(&pm).to_bools();
    let sg = thin(&gm).to_bools();
    let l_num = count(&union(&and(&sp, &dg), &and(&dp, &sg)));
    let l = ratio(l_num, count(&union(&sp, &sg)));
    Ok(Cal {
        c,
        a,
        l,
        product: c * a * l,
    })
}

/// `(|β0(pred) - β0(gt)|, |β1(pred) - β1(gt)|)`.
pub fn betti_error(pred: &MaskGrid, gt: &MaskGrid) -> Result<(usize, usize)> {
    pred.check_same_shape(gt)?;
    let (p0, p1) = betti(&pred.class_mask(VesselClass::Single));
    let (g0, g1) = betti(&gt.class_mask(VesselClass::Single));
    Ok((p0.abs_diff(g0), p1.abs_diff(g1)))
}

/// Foreground cells with a face neighbour in the background or outside the grid.
pub fn boundary(mask: &MaskGrid) -> Vec<bool> {
    let shape = mask.shape();
    let cells = mask.to_bools();
    let faces = 2 * shape.ndim();
    (0..cells.len())
        .map(|i| {
            if !cells[i] {
                return false;
            }
            let inside: Vec<usize> = shape.neighbors(i, Connectivity::Face).collect();
            inside.len() < faces || inside.iter().any(|&n| !cells[n])
        })
        .collect()
}

/// Symmetric Hausdorff distance between boundary cells, in physical units.
pub fn hausdorff(pred: &MaskGrid, gt: &MaskGrid, spacing: &[f64]) -> Result<f64> {
    pred.check_same_shape(gt)?;
    if spacing.len() != pred.ndim() || spacing.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("spacing", "one positive value per axis"));
    }
    let bp = boundary(&pred.class_mask(VesselClass::Single));
    let bg = boundary(&gt.class_mask(VesselClass::Single));
    if count(&bp) == 0 || count(&bg) == 0 {
        return Err(Error::Empty("hausdorff needs two non-empty masks".into()));
    }
    let sp = spacing3(pred.ndim(), spacing);
    let directed = |from: &[bool], to: &[bool]| -> f64 {
        let d2 = squared_distance_to_set(pred.shape(), &sp, to);
        from.iter()
            .zip(&d2)
            .filter(|(f, _)| **f)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    };
    Ok(directed(&bp, &bg).max(directed(&bg, &bp)).sqrt())
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub accuracy: f64,
    pub dice: f64,
    pub cldice: f64,
    pub cal: f64,
    pub beta0_err: usize,
    pub beta1_err: usize,
    pub hausdorff: f64,
}

impl MetricRow {
    pub const HEADER: &'static str = "id,accuracy,dice,cldice,cal,beta0_err,beta1_err,hausdorff";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.id, self.accuracy, self.dice, self.cldice, self.cal, self.beta0_err, self.beta1_err, self.hausdorff
        )
    }
}

/// Every metric for one prediction. Accuracy runs over the full alphabet;
/// the rest treat any non-background label as vessel.
pub fn evaluate(id: &str, pred: &MaskGrid, gt: &MaskGrid) -> Result<MetricRow> {
    let (beta0_err, beta1_err) = betti_error(pred, gt)?;
    let hausdorff = if pred.count() == 0 || gt.count() == 0 {
        f64::INFINITY
    } else {
        hausdorff(pred, gt, &gt.spacing())?
    };
    Ok(MetricRow {
        id: id.to_string(),
        accuracy: accuracy(pred, gt)?,
        dice: dice(pred, gt, VesselClass::Single)?,
        cldice: cldice(pred, gt, VesselClass::Single)?,
        cal: cal(pred, gt, CAL_RADIUS)?.product,
        beta0_err,
        beta1_err,
        hausdorff,
    })
}
