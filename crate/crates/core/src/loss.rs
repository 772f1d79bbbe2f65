//! Composite segmentation objective with a junction-weighted Murray penalty
//! and hand-written reverse-mode gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{FieldTape, Tape, Var};
use crate::error::{Error, Result};
use crate::grid::{Connectivity, MaskGrid, ScalarField, Shape, VesselClass};
use crate::murray::{default_candidates, ExponentTable};
use crate::skeleton::{check_probability, default_iterations, junction_node, soft_skeleton_node, JunctionParams};

pub const DICE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub beta: f64,
    /// Temperature of the per-arm radius softmax.
    pub tau: f64,
    /// Fraction of the largest Murray errors dropped per call.
    pub trim: f64,
    pub t_argmin: f64,
    pub candidates: Vec<f64>,
    pub junction: JunctionParams,
    /// Cells with `j > j_min` enter the Murray penalty.
    pub j_min: f64,
    /// Neighbours with `sk > arm_threshold` form junction arms.
    pub arm_threshold: f64,
    /// Soft-skeleton iterations; `None` picks [`default_iterations`] per channel.
    pub iterations: Option<usize>,
    pub um_per_px: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 0.1,
            beta: 0.1,
            tau: 0.1,
            trim: 0.1,
            t_argmin: 0.05,
            candidates: default_candidates(),
            junction: JunctionParams::default(),
            j_min: 0.5,
            arm_threshold: 0.5,
            iterations: None,
            um_per_px: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::invalid("lambda/beta", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.trim) {
            return Err(Error::invalid("trim", "must lie in [0, 1)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be > 0"));
        }
        if !(self.t_argmin > 0.0) {
            return Err(Error::invalid("t_argmin", "must be > 0"));
        }
        if self.candidates.is_empty() {
            return Err(Error::invalid("candidates", "must not be empty"));
        }
        if !(self.um_per_px > 0.0) {
            return Err(Error::invalid("um_per_px", "must be > 0"));
        }
        if self.iterations == Some(0) {
            return Err(Error::invalid("iterations", "must be >= 1"));
        }
        self.junction.validate()
    }
}

/// One class of a (possibly multi-class) prediction.
///
/// `gt` is read through [`MaskGrid::class_mask`] for `class`.
#[derive(Debug, Clone, Copy)]
pub struct Channel<'a> {
    pub class: VesselClass,
    pub p: &'a ScalarField,
    pub rm_pred: &'a ScalarField,
    pub gt: &'a MaskGrid,
    pub rm_gt: &'a ScalarField,
    pub table: &'a ExponentTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub class: VesselClass,
    pub pos: Vec<usize>,
    pub j: f64,
    pub alpha_pred: f64,
    pub alpha_gt: f64,
    /// `(alpha_pred - alpha_gt)^2`.
    pub error: f64,
    /// `j * error`.
    pub penalty: f64,
    pub trimmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MurrayTerm {
    pub class: VesselClass,
    pub value: f64,
    pub elements: usize,
    pub trimmed: usize,
    /// No junction survived selection; the term is 0.
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub dice: f64,
    pub mse: f64,
    pub murray: Vec<MurrayTerm>,
    pub radius: f64,
    pub penalties: Vec<Penalty>,
    /// `∂L/∂p` per channel.
    #[serde(skip)]
    pub grad_p: Vec<ScalarField>,
    /// `∂L/∂rm_pred` per channel.
    #[serde(skip)]
    pub grad_rm: Vec<ScalarField>,
}

impl LossReport {
    pub fn murray_sum(&self) -> f64 {
        self.murray.iter().map(|m| m.value).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn gt_values(p: &ScalarField, gt: &MaskGrid) -> Result<Vec<f64>> {
    p.check_same_shape(gt.shape())?;
    Ok(gt.labels().iter().map(|&l| (l != 0) as u8 as f64).collect())
}

/// `1 - (2 Σ p g + ε) / (Σ p + Σ g + ε)` against the non-background cells of `gt`.
pub fn dice_loss(p: &ScalarField, gt: &MaskGrid) -> Result<f64> {
    let g = gt_values(p, gt)?;
    Ok(dice_parts(p.values(), &g).0)
}

/// Mean of `(p - g)^2`.
pub fn mse_loss(p: &ScalarField, gt: &MaskGrid) -> Result<f64> {
    let g = gt_values(p, gt)?;
    Ok(mse_parts(p.values(), &g).0)
}

fn dice_parts(p: &[f64], g: &[f64]) -> (f64, Vec<f64>) {
    let num = 2.0 * p.iter().zip(g).map(|(p, g)| p * g).sum::<f64>() + DICE_EPS;
    let den = p.iter().sum::<f64>() + g.iter().sum::<f64>() + DICE_EPS;
    let grad = g.iter().map(|g| -(2.0 * g * den - num) / (den * den)).collect();
    (1.0 - num / den, grad)
}

fn mse_parts(p: &[f64], g: &[f64]) -> (f64, Vec<f64>) {
    let n = p.len().max(1) as f64;
    let value = p.iter().zip(g).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / n;
    let grad = p.iter().zip(g).map(|(p, g)| 2.0 * (p - g) / n).collect();
    (value, grad)
}

/// Mean over all cells of `|rm_pred·sk - rm_gt·sk|`.
pub fn radius_loss(rm_pred: &ScalarField, rm_gt: &ScalarField, sk: &ScalarField) -> Result<f64> {
    rm_pred.check_same_shape(rm_gt.shape())?;
    rm_pred.check_same_shape(sk.shape())?;
    Ok(radius_parts(rm_pred.values(), rm_gt.values(), sk.values()).0)
}

/// Value, `∂/∂rm_pred` and `∂/∂sk`; the sign subgradient is 0 at 0.
fn radius_parts(rm: &[f64], gt: &[f64], sk: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = rm.len().max(1) as f64;
    let mut value = 0.0;
    let mut d_rm = vec![0.0; rm.len()];
    let mut d_sk = vec![0.0; rm.len()];
    for i in 0..rm.len() {
        let d = (rm[i] - gt[i]) * sk[i];
        value += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        d_rm[i] = s * sk[i] / n;
        d_sk[i] = s * (rm[i] - gt[i]) / n;
    }
    (value / n, d_rm, d_sk)
}

/// Neighbours of `idx` on the skeleton, grouped into face-connected arms.
fn junction_arms(shape: Shape, sk: &[f64], idx: usize, threshold: f64) -> Vec<Vec<usize>> {
    let ring: Vec<usize> = shape
        .neighbors(idx, Connectivity::Full)
        .filter(|&n| sk[n] > threshold)
        .collect();
    let mut arm_of: Vec<Option<usize>> = vec![None; ring.len()];
    let mut arms: Vec<Vec<usize>> = Vec::new();
    for start in 0..ring.len() {
        if arm_of[start].is_some() {
            continue;
        }
        let id = arms.len();
        arm_of[start] = Some(id);
        let mut stack = vec![start];
        let mut arm = Vec::new();
        while let Some(a) = stack.pop() {
            arm.push(ring[a]);
            let ca = shape.coords(ring[a]);
            for b in 0..ring.len() {
                if arm_of[b].is_none() {
                    let cb = shape.coords(ring[b]);
                    let manhattan: usize = (0..3).map(|k| ca[k].abs_diff(cb[k])).sum();
                    if manhattan == 1 {
                        arm_of[b] = Some(id);
                        stack.push(b);
                    }
                }
            }
        }
        arm.sort_unstable();
        arms.push(arm);
    }
    arms
}

struct Element {
    idx: usize,
    alpha_pred: f64,
    alpha_gt: f64,
    error: f64,
    /// `∂error/∂rm` at the arm cells.
    grads: Vec<(usize, f64)>,
}

/// Murray error of one junction cell on a scalar tape.
fn element(idx: usize, arms: &[Vec<usize>], rm: &[f64], table: &ExponentTable, cfg: &LossConfig) -> Option<Element> {
    let mut t = Tape::new();
    let mut leaves: Vec<(usize, Var)> = Vec::new();
    let mut radii: Vec<Var> = Vec::with_capacity(arms.len());
    for arm in arms {
        if arm.iter().any(|&c| !(rm[c] > 0.0 && rm[c].is_finite())) {
            return None;
        }
        let rs: Vec<Var> = arm
            .iter()
            .map(|&c| {
                let v = t.leaf(rm[c]);
                leaves.push((c, v));
                v
            })
            .collect();
        let mut m = rs[0];
        for &r in &rs[1..] {
            m = t.max(m, r);
        }
        let tm = t.scale(m, cfg.tau);
        let z: Vec<Var> = rs.iter().map(|&r| t.div(r, tm)).collect();
        let l = t.lse(&z);
        let terms: Vec<Var> = z
            .iter()
            .zip(&rs)
            .map(|(&z, &r)| {
                let d = t.sub(z, l);
                let w = t.exp(d);
                t.mul(w, r)
            })
            .collect();
        radii.push(t.dot(&terms, &vec![1.0; terms.len()]));
    }
    let mut parent = 0;
    for (k, &r) in radii.iter().enumerate() {
        if t.val(r) > t.val(radii[parent]) {
            parent = k;
        }
    }
    let ln_p = t.ln(radii[parent]);
    let ln_c: Vec<Var> = radii
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != parent)
        .map(|(_, &r)| t.ln(r))
        .collect();

    let z: Vec<Var> = cfg
        .candidates
        .iter()
        .map(|&a| {
            let lhs = t.scale(ln_p, a);
            let xs: Vec<Var> = ln_c.iter().map(|&x| t.scale(x, a)).collect();
            let cap = t.lse(&xs);
            let r = t.sub(lhs, cap);
            let e = t.square(r);
            t.scale(e, -1.0 / cfg.t_argmin)
        })
        .collect();
    let alpha_pred = softmax_dot(&mut t, &z, &cfg.candidates);

    let ln_s = t.leaf(cfg.um_per_px.ln());
    let ln_um = t.add(ln_p, ln_s);
    let s2 = 2.0 * table.sigma_log * table.sigma_log;
    let g: Vec<Var> = table
        .bins
        .iter()
        .map(|b| {
            let c = t.leaf(b.width_um.ln());
            let d = t.sub(c, ln_um);
            let d2 = t.square(d);
            t.scale(d2, -1.0 / s2)
        })
        .collect();
    let alpha_gt = softmax_dot(&mut t, &g, &table.alphas());

    let diff = t.sub(alpha_pred, alpha_gt);
    let err = t.square(diff);
    let adj = t.grad(err);
    Some(Element {
        idx,
        alpha_pred: t.val(alpha_pred),
        alpha_gt: t.val(alpha_gt),
        error: t.val(err),
        grads: leaves.into_iter().map(|(c, v)| (c, Tape::adjoint(&adj, v))).collect(),
    })
}

/// `Σ_k c_k softmax(z)_k`.
fn softmax_dot(t: &mut Tape, z: &[Var], coeffs: &[f64]) -> Var {
    let l = t.lse(z);
    let w: Vec<Var> = z
        .iter()
        .map(|&z| {
            let d = t.sub(z, l);
            t.exp(d)
        })
        .collect();
    t.dot(&w, coeffs)
}

struct MurrayParts {
    term: MurrayTerm,
    penalties: Vec<Penalty>,
    d_j: Vec<f64>,
    d_rm: Vec<f64>,
}

fn murray_parts(
    class: VesselClass,
    shape: Shape,
    sk: &[f64],
    j: &[f64],
    rm: &[f64],
    table: &ExponentTable,
    cfg: &LossConfig,
) -> MurrayParts {
    let n = shape.len();
    let mut elements: Vec<Element> = (0..n)
        .into_par_iter()
        .filter(|&i| j[i] > cfg.j_min)
        .filter_map(|i| {
            let arms = junction_arms(shape, sk, i, cfg.arm_threshold);
            if arms.len() < 3 {
                return None;
            }
            element(i, &arms, rm, table, cfg)
        })
        .collect();
    elements.sort_by_key(|e| e.idx);

    // selection is detached from the gradient
    let n_trim = (cfg.trim * elements.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..elements.len()).collect();
    order.sort_by(|&a, &b| {
        elements[b]
            .error
            .total_cmp(&elements[a].error)
            .then(elements[a].idx.cmp(&elements[b].idx))
    });
    let mut trimmed = vec![false; elements.len()];
    for &k in &order[..n_trim] {
        trimmed[k] = true;
    }

    let mut sum_j = 0.0;
    let mut sum_je = 0.0;
    for (e, &cut) in elements.iter().zip(&trimmed) {
        if !cut {
            sum_j += j[e.idx];
            sum_je += j[e.idx] * e.error;
        }
    }
    let empty = !(sum_j > 0.0);
    let value = if empty { 0.0 } else { sum_je / sum_j };

    let mut d_j = vec![0.0; n];
    let mut d_rm = vec![0.0; n];
    if !empty {
        for (e, &cut) in elements.iter().zip(&trimmed) {
            if cut {
                continue;
            }
            d_j[e.idx] += (e.error - value) / sum_j;
            let w = j[e.idx] / sum_j;
            for &(c, g) in &e.grads {
                d_rm[c] += w * g;
            }
        }
    }

    let penalties = elements
        .iter()
        .zip(&trimmed)
        .map(|(e, &cut)| Penalty {
            class,
            pos: shape.position(e.idx),
            j: j[e.idx],
            alpha_pred: e.alpha_pred,
            alpha_gt: e.alpha_gt,
            error: e.error,
            penalty: j[e.idx] * e.error,
            trimmed: cut,
        })
        .collect();
    MurrayParts {
        term: MurrayTerm {
            class,
            value,
            elements: elements.len(),
            trimmed: n_trim,
            empty,
        },
        penalties,
        d_j,
        d_rm,
    }
}

/// Junction-weighted Murray penalty of one probability/radius pair.
pub fn murray_loss(
    p: &ScalarField,
    rm_pred: &ScalarField,
    table: &ExponentTable,
    cfg: &LossConfig,
) -> Result<(MurrayTerm, Vec<Penalty>)> {
    cfg.validate()?;
    table.validate()?;
    check_probability(p)?;
    p.check_same_shape(rm_pred.shape())?;
    let k = cfg.iterations.unwrap_or_else(|| default_iterations(p));
    let mut tape = FieldTape::new(p.shape());
    let x = tape.input(p.values().to_vec());
    let sk = soft_skeleton_node(&mut tape, x, k);
    let j = junction_node(&mut tape, sk, &cfg.junction);
    let parts = murray_parts(
        VesselClass::Single,
        p.shape(),
        tape.value(sk),
        tape.value(j),
        rm_pred.values(),
        table,
        cfg,
    );
    Ok((parts.term, parts.penalties))
}

fn check_channel(c: &Channel) -> Result<()> {
    check_probability(c.p)?;
    let shape = c.p.shape();
    c.rm_pred.check_same_shape(shape)?;
    c.rm_gt.check_same_shape(shape)?;
    c.p.check_same_shape(c.gt.shape())?;
    c.table.validate()
}

/// Soft-skeleton iterations per channel.
pub fn resolve_iterations(channels: &[Channel], cfg: &LossConfig) -> Vec<usize> {
    channels
        .iter()
        .map(|c| cfg.iterations.unwrap_or_else(|| default_iterations(c.p)))
        .collect()
}

/// `dice + mse + λ Σ murray + β radius`, with Dice, MSE and radius terms
/// averaged over channels and Murray terms summed; gradients included.
pub fn total_loss(channels: &[Channel], cfg: &LossConfig) -> Result<LossReport> {
    cfg.validate()?;
    if channels.is_empty() {
        return Err(Error::Empty("no channels".into()));
    }
    for c in channels {
        check_channel(c)?;
        c.p.check_same_shape(channels[0].p.shape())?;
    }
    let ks = resolve_iterations(channels, cfg);
    Ok(evaluate(channels, cfg, &ks))
}

/// `(∂L/∂p, ∂L/∂rm_pred)` per channel.
pub fn loss_gradients(channels: &[Channel], cfg: &LossConfig) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    let r = total_loss(channels, cfg)?;
    Ok((r.grad_p, r.grad_rm))
}

struct ChannelParts {
    dice: f64,
    mse: f64,
    radius: f64,
    murray: MurrayParts,
    grad_p: Vec<f64>,
    grad_rm: Vec<f64>,
}

fn evaluate_channel(c: &Channel, cfg: &LossConfig, k: usize, weight: f64) -> ChannelParts {
    let shape = c.p.shape();
    let g: Vec<f64> = c.gt.class_mask(c.class).labels().iter().map(|&l| l as f64).collect();
    let p = c.p.values();
    let (dice, d_dice) = dice_parts(p, &g);
    let (mse, d_mse) = mse_parts(p, &g);

    let mut tape = FieldTape::new(shape);
    let x = tape.input(p.to_vec());
    let sk = soft_skeleton_node(&mut tape, x, k);
    let j = junction_node(&mut tape, sk, &cfg.junction);
    let (radius, d_rad_rm, d_rad_sk) = radius_parts(c.rm_pred.values(), c.rm_gt.values(), tape.value(sk));
    let murray = murray_parts(
        c.class,
        shape,
        tape.value(sk),
        tape.value(j),
        c.rm_pred.values(),
        c.table,
        cfg,
    );

    let rad_w = cfg.beta * weight;
    let seed_sk: Vec<f64> = d_rad_sk.iter().map(|d| rad_w * d).collect();
    let seed_j: Vec<f64> = murray.d_j.iter().map(|d| cfg.lambda * d).collect();
    let grads = tape.backward(vec![(sk, seed_sk), (j, seed_j)]);
    let through_skeleton = &grads[x];
    let grad_p = (0..p.len())
        .map(|i| {
            let skel = through_skeleton.get(i).copied().unwrap_or(0.0);
            weight * (d_dice[i] + d_mse[i]) + skel
        })
        .collect();
    let grad_rm = (0..p.len())
        .map(|i| rad_w * d_rad_rm[i] + cfg.lambda * murray.d_rm[i])
        .collect();
    ChannelParts {
        dice,
        mse,
        radius,
        murray,
        grad_p,
        grad_rm,
    }
}

fn evaluate(channels: &[Channel], cfg: &LossConfig, ks: &[usize]) -> LossReport {
    let weight = 1.0 / channels.len() as f64;
    let parts: Vec<ChannelParts> = channels
        .par_iter()
        .zip(ks.par_iter())
        .map(|(c, &k)| evaluate_channel(c, cfg, k, weight))
        .collect();
    let dice = parts.iter().map(|c| c.dice).sum::<f64>() * weight;
    let mse = parts.iter().map(|c| c.mse).sum::<f64>() * weight;
    let radius = parts.iter().map(|c| c.radius).sum::<f64>() * weight;
    let murray: Vec<MurrayTerm> = parts.iter().map(|c| c.murray.term.clone()).collect();
    let murray_sum: f64 = murray.iter().map(|m| m.value).sum();
    let total = dice + mse + cfg.lambda * murray_sum + cfg.beta * radius;
    let mut penalties = Vec::new();
    let mut grad_p = Vec::new();
    let mut grad_rm = Vec::new();
    for (c, part) in channels.iter().zip(parts) {
        penalties.extend(part.murray.penalties);
        grad_p.push(c.p.with_values(part.grad_p));
        grad_rm.push(c.rm_pred.with_values(part.grad_rm));
    }
    LossReport {
        total,
        dice,
        mse,
        murray,
        radius,
        penalties,
        grad_p,
        grad_rm,
    }
}

/// Which input a checked cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradInput {
    P,
    RmPred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCell {
    pub channel: usize,
    pub input: GradInput,
    pub pos: Vec<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// Within `TIE_EPS` of a face neighbour, so a pooling choice may flip.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    pub cells: Vec<GradCheckCell>,
}

impl GradCheck {
    /// Fraction of non-tie cells within tolerance.
    pub fn pass_fraction(&self) -> f64 {
        let checked: Vec<&GradCheckCell> = self.cells.iter().filter(|c| !c.tie).collect();
        if checked.is_empty() {
            return 1.0;
        }
        let ok = checked.iter().filter(|c| c.rel_error < self.tolerance).count();
        ok as f64 / checked.len() as f64
    }
}

pub const GRADCHECK_STEP: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
pub const TIE_EPS: f64 = 1e-6;

/// Central differences of the total loss at `n` interior cells per input
/// field, chosen by a seeded RNG. Iteration counts are frozen at the base
/// point.
pub fn gradcheck(channels: &[Channel], cfg: &LossConfig, n: usize, seed: u64) -> Result<GradCheck> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let base = total_loss(channels, cfg)?;
    let ks = resolve_iterations(channels, cfg);
    let shape = channels[0].p.shape();
    let interior: Vec<usize> = (0..shape.len())
        .filter(|&i| {
            let c = shape.coords(i);
            let dims = shape.dims3();
            (3 - shape.ndim()..3).all(|a| c[a] > 0 && c[a] + 1 < dims[a])
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = GRADCHECK_STEP;
    let mut cells = Vec::new();
    for (ci, c) in channels.iter().enumerate() {
        for input in [GradInput::P, GradInput::RmPred] {
            let picks: Vec<usize> = interior
                .choose_multiple(&mut rng, n.min(interior.len()))
                .copied()
                .collect();
            for idx in picks {
                let field = match input {
                    GradInput::P => c.p,
                    GradInput::RmPred => c.rm_pred,
                };
                let at = |delta: f64| {
                    let mut v = field.values().to_vec();
                    v[idx] += delta;
                    let moved = field.with_values(v);
                    let mut chans = channels.to_vec();
                    match input {
                        GradInput::P => chans[ci].p = &moved,
                        GradInput::RmPred => chans[ci].rm_pred = &moved,
                    }
                    evaluate(&chans, cfg, &ks).total
                };
                let numeric = (at(h) - at(-h)) / (2.0 * h);
                let analytic = match input {
                    GradInput::P => base.grad_p[ci].get(idx),
                    GradInput::RmPred => base.grad_rm[ci].get(idx),
                };
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                let tie = input == GradInput::P && near_tie(field, idx);
                cells.push(GradCheckCell {
                    channel: ci,
                    input,
                    pos: shape.position(idx),
                    analytic,
                    numeric,
                    rel_error: (analytic - numeric).abs() / scale,
                    tie,
                });
            }
        }
    }
    Ok(GradCheck {
        step: h,
        tolerance: GRADCHECK_TOLERANCE,
        cells,
    })
}

fn near_tie(field: &ScalarField, idx: usize) -> bool {
    let v = field.values();
    field
        .shape()
        .neighbors(idx, Connectivity::Face)
        .any(|n| (v[n] - v[idx]).abs() < TIE_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::murray::{fixed_table, solve_alpha};

    fn field(shape: Shape, v: Vec<f64>) -> ScalarField {
        ScalarField::from_values(shape, v).unwrap()
    }

    /// One-pixel Y: stem up from the centre, arms to the lower left and right.
    fn hard_y(r_p: f64, r_c: (f64, f64)) -> (ScalarField, ScalarField) {
        let n = 21;
        let shape = Shape::new_2d(n, n);
        let mut p = vec![0.0; n * n];
        let mut rm = vec![0.0; n * n];
        let c = 10usize;
        for y in 1..=c {
            p[y * n + c] = 1.0;
            rm[y * n + c] = r_p;
        }
        for k in 1..9 {
            let (y, l, r) = (c + k, c - k, c + k);
            p[y * n + l] = 1.0;
            rm[y * n + l] = r_c.0;
            p[y * n + r] = 1.0;
            rm[y * n + r] = r_c.1;
        }
        (field(shape, p), field(shape, rm))
    }

    #[test]
    fn dice_and_mse_by_hand() {
        let shape = Shape::new_2d(2, 2);
        let gt = MaskGrid::from_ascii(&["#.", "#."]);
        let p = field(shape, vec![0.5; 4]);
        // dice: 1 - (2*1 + eps)/(2 + 2 + eps); mse: 4 * 0.25 / 4
        let want = 1.0 - (2.0 + DICE_EPS) / (4.0 + DICE_EPS);
        assert!((dice_loss(&p, &gt).unwrap() - want).abs() < 1e-15);
        assert!((mse_loss(&p, &gt).unwrap() - 0.25).abs() < 1e-15);
        let exact = ScalarField::from_mask(&gt);
        assert!(dice_loss(&exact, &gt).unwrap().abs() < 1e-12);
        assert_eq!(mse_loss(&exact, &gt).unwrap(), 0.0);
        let zero = ScalarField::zeros(shape);
        assert!((dice_loss(&zero, &gt).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dice_mse_gradient_closed_form() {
        let p = [0.2, 0.7, 0.4, 0.9];
        let g = [1.0, 0.0, 1.0, 0.0];
        let (_, dd) = dice_parts(&p, &g);
        let (_, dm) = mse_parts(&p, &g);
        // S = Σp = 2.2, I = Σpg = 0.6, G = 2
        let (num, den) = (2.0 * 0.6 + DICE_EPS, 2.2 + 2.0 + DICE_EPS);
        for i in 0..4 {
            let want = (num - 2.0 * g[i] * den) / (den * den);
            assert!((dd[i] - want).abs() < 1e-14);
            assert!((dm[i] - (p[i] - g[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn radius_loss_examples() {
        let shape = Shape::new_2d(1, 3);
        let rm = field(shape, vec![1.0, 2.0, 3.0]);
        let gt = field(shape, vec![1.0, 1.0, 1.0]);
        let sk = field(shape, vec![0.0, 1.0, 1.0]);
        assert!((radius_loss(&rm, &gt, &sk).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(radius_loss(&rm, &rm, &sk).unwrap(), 0.0);
        assert_eq!(radius_loss(&rm, &gt, &ScalarField::zeros(shape)).unwrap(), 0.0);
        let bad = ScalarField::zeros(Shape::new_2d(3, 1));
        assert!(radius_loss(&rm, &bad, &sk).is_err());
    }

    #[test]
    fn y_arms_are_three() {
        let (p, _) = hard_y(4.0, (3.0, 3.0));
        let arms = junction_arms(p.shape(), p.values(), 10 * 21 + 10, 0.5);
        assert_eq!(arms.len(), 3);
    }

    #[test]
    fn consistent_junction_has_no_murray_loss() {
        let a = 3.0;
        let rc = 4.0 * 2f64.powf(-1.0 / a);
        let (p, rm) = hard_y(4.0, (rc, rc));
        let cfg = LossConfig {
            iterations: Some(1),
            ..LossConfig::default()
        };
        let (term, pens) = murray_loss(&p, &rm, &fixed_table(a).unwrap(), &cfg).unwrap();
        assert!(!term.empty);
        assert_eq!(pens.len(), 1);
        assert!(term.value < 1e-6, "{term:?}");
    }

    #[test]
    fn inconsistent_junction_costs_about_one() {
        let a = 2.5;
        // children whose consistent exponent is a + 1
        let rc = 4.0 * 2f64.powf(-1.0 / (a + 1.0));
        let (p, rm) = hard_y(4.0, (rc, rc));
        let oracle = solve_alpha(4.0, &[rc, rc]).unwrap().alpha().unwrap();
        assert!((oracle - (a + 1.0)).abs() < 1e-9);
        let cfg = LossConfig {
            iterations: Some(1),
            trim: 0.0,
            ..LossConfig::default()
        };
        let (term, _) = murray_loss(&p, &rm, &fixed_table(a).unwrap(), &cfg).unwrap();
        assert!((term.value - 1.0).abs() < 0.02, "{term:?}");
    }

    #[test]
    fn empty_junction_set_is_zero() {
        let shape = Shape::new_2d(8, 8);
        let p = ScalarField::zeros(shape);
        let (term, pens) = murray_loss(&p, &p, &fixed_table(3.0).unwrap(), &LossConfig::default()).unwrap();
        assert_eq!(term.value, 0.0);
        assert!(term.empty);
        assert!(pens.is_empty());
    }

    #[test]
    fn trim_drops_the_largest_errors() {
        let a = 3.0;
        let good = 4.0 * 2f64.powf(-1.0 / a);
        let bad = 4.0 * 2f64.powf(-1.0 / (a + 1.5));
        let (p1, r1) = hard_y(4.0, (good, good));
        let (p2, r2) = hard_y(4.0, (bad, bad));
        let side = |a: &ScalarField, b: &ScalarField| {
            let mut v = Vec::new();
            for y in 0..21 {
                v.extend_from_slice(&a.values()[y * 21..(y + 1) * 21]);
                v.extend_from_slice(&b.values()[y * 21..(y + 1) * 21]);
            }
            field(Shape::new_2d(21, 42), v)
        };
        let (p, rm) = (side(&p1, &p2), side(&r1, &r2));
        let table = fixed_table(a).unwrap();
        let keep = LossConfig {
            iterations: Some(1),
            trim: 0.0,
            ..LossConfig::default()
        };
        let (all, _) = murray_loss(&p, &rm, &table, &keep).unwrap();
        assert_eq!(all.elements, 2);
        assert!(all.value > 0.5);
        let cut = LossConfig { trim: 0.5, ..keep };
        let (term, pens) = murray_loss(&p, &rm, &table, &cut).unwrap();
        assert_eq!(term.trimmed, 1);
        assert!(term.value < 1e-6);
        assert!(pens.iter().any(|q| q.trimmed && q.pos == vec![10, 31]));
        assert!(LossConfig {
            trim: 1.0,
            ..LossConfig::default()
        }
        .validate()
        .is_err());
    }
}
