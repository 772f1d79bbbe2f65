//! Reverse-mode differentiation for the loss stack.
//!
//! [`FieldTape`] records whole-field operations (pooling, pointwise algebra,
//! box sums); [`Tape`] records scalar operations for the per-junction Murray
//! arithmetic. Both are append-only and swept once in reverse.

use rayon::prelude::*;

use crate::grid::{Connectivity, Shape};

/// Marks a pooling winner that lies outside the grid.
const PADDING: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum FieldOp {
    Input,
    Pool { src: usize, arg: Vec<u32> },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Relu(usize),
    NormalizeMax { src: usize, arg: Option<usize> },
    BoxSum { src: usize, radius: usize },
    Sigmoid { src: usize, sharpness: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct FieldTape {
    shape: Shape,
    values: Vec<Vec<f64>>,
    ops: Vec<FieldOp>,
}

impl FieldTape {
    pub(crate) fn new(shape: Shape) -> Self {
        FieldTape {
            shape,
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub(crate) fn value(&self, node: usize) -> &[f64] {
        &self.values[node]
    }

    fn push(&mut self, value: Vec<f64>, op: FieldOp) -> usize {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub(crate) fn input(&mut self, value: Vec<f64>) -> usize {
        debug_assert_eq!(value.len(), self.shape.len());
        self.push(value, FieldOp::Input)
    }

    /// Min (`erode`) or max pooling over the cross stencil. Cells outside the
    /// grid read as 0 and lose ties; among in-grid cells the first in raster
    /// order wins.
    fn pool(&mut self, src: usize, erode: bool) -> usize {
        let shape = self.shape;
        let x = &self.values[src];
        let face = Connectivity::Face.offsets(shape.ndim());
        let split = face.len() / 2;
        let (out, arg): (Vec<f64>, Vec<u32>) = (0..x.len())
            .into_par_iter()
            .map(|i| {
                let mut best = f64::NAN;
                let mut best_at = PADDING;
                let mut padded = false;
                let mut consider = |j: Option<usize>| match j {
                    Some(j) => {
                        let v = x[j];
                        let better = best.is_nan() || if erode { v < best } else { v > best };
                        if better {
                            best = v;
                            best_at = j as u32;
                        }
                    }
                    None => padded = true,
                };
                for &o in &face[..split] {
                    consider(shape.offset(i, o));
                }
                consider(Some(i));
                for &o in &face[split..] {
                    consider(shape.offset(i, o));
                }
                if padded && (if erode { 0.0 < best } else { 0.0 > best }) {
                    (0.0, PADDING)
                } else {
                    (best, best_at)
                }
            })
            .unzip();
        self.push(out, FieldOp::Pool { src, arg })
    }

    pub(crate) fn erode(&mut self, src: usize) -> usize {
        self.pool(src, true)
    }

    pub(crate) fn dilate(&mut self, src: usize) -> usize {
        self.pool(src, false)
    }

    fn zip(&mut self, a: usize, b: usize, f: impl Fn(f64, f64) -> f64, op: FieldOp) -> usize {
        let v = self.values[a]
            .iter()
            .zip(&self.values[b])
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(v, op)
    }

    pub(crate) fn add(&mut self, a: usize, b: usize) -> usize {
        self.zip(a, b, |x, y| x + y, FieldOp::Add(a, b))
    }

    pub(crate) fn sub(&mut self, a: usize, b: usize) -> usize {
        self.zip(a, b, |x, y| x - y, FieldOp::Sub(a, b))
    }

    pub(crate) fn mul(&mut self, a: usize, b: usize) -> usize {
        self.zip(a, b, |x, y| x * y, FieldOp::Mul(a, b))
    }

    pub(crate) fn relu(&mut self, a: usize) -> usize {
        let v = self.values[a].iter().map(|&x| x.max(0.0)).collect();
        self.push(v, FieldOp::Relu(a))
    }

    /// Divides by the global maximum; an all-non-positive field maps to zero.
    pub(crate) fn normalize_max(&mut self, src: usize) -> usize {
        let x = &self.values[src];
        let mut arg = None;
        let mut m = 0.0;
        for (i, &v) in x.iter().enumerate() {
            if v > m {
                m = v;
                arg = Some(i);
            }
        }
        let v = match arg {
            Some(_) => x.iter().map(|&v| v / m).collect(),
            None => vec![0.0; x.len()],
        };
        self.push(v, FieldOp::NormalizeMax { src, arg })
    }

    /// Sum over the `(2r+1)^d` box around each cell, zero outside the grid.
    pub(crate) fn box_sum(&mut self, src: usize, radius: usize) -> usize {
        let v = box_sum(self.shape, &self.values[src], radius);
        self.push(v, FieldOp::BoxSum { src, radius })
    }

    /// `sigmoid(sharpness * (x - offset))`.
    pub(crate) fn sigmoid(&mut self, src: usize, sharpness: f64, offset: f64) -> usize {
        let v = self.values[src]
            .iter()
            .map(|&x| sigmoid(sharpness * (x - offset)))
            .collect();
        self.push(v, FieldOp::Sigmoid { src, sharpness })
    }

    /// Reverse sweep from the given output adjoints; returns the adjoint of
    /// every node (empty vectors for nodes that received nothing).
    pub(crate) fn backward(&self, seeds: Vec<(usize, Vec<f64>)>) -> Vec<Vec<f64>> {
        let n = self.shape.len();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.values.len()];
        for (node, g) in seeds {
            accumulate(&mut grads[node], &g, n);
        }
        for node in (0..self.values.len()).rev() {
            if grads[node].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[node]);
            match &self.ops[node] {
                FieldOp::Input => {}
                FieldOp::Pool { src, arg } => {
                    let mut d = vec![0.0; n];
                    for (i, &a) in arg.iter().enumerate() {
                        if a != PADDING {
                            d[a as usize] += g[i];
                        }
                    }
                    accumulate(&mut grads[*src], &d, n);
                }
                FieldOp::Add(a, b) => {
                    accumulate(&mut grads[*a], &g, n);
                    accumulate(&mut grads[*b], &g, n);
                }
                FieldOp::Sub(a, b) => {
                    accumulate(&mut grads[*a], &g, n);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    accumulate(&mut grads[*b], &neg, n);
                }
                FieldOp::Mul(a, b) => {
                    let da: Vec<f64> = g.iter().zip(&self.values[*b]).map(|(g, y)| g * y).collect();
                    let db: Vec<f64> = g.iter().zip(&self.values[*a]).map(|(g, x)| g * x).collect();
                    accumulate(&mut grads[*a], &da, n);
                    accumulate(&mut grads[*b], &db, n);
                }
                FieldOp::Relu(a) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(&self.values[*a])
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[*a], &d, n);
                }
                FieldOp::NormalizeMax { src, arg } => {
                    let Some(am) = *arg else { continue };
                    let x = &self.values[*src];
                    let m = x[am];
                    let mut d: Vec<f64> = g.iter().map(|g| g / m).collect();
                    let dot: f64 = g.iter().zip(x).map(|(g, x)| g * x).sum();
                    d[am] -= dot / (m * m);
                    accumulate(&mut grads[*src], &d, n);
                }
                FieldOp::BoxSum { src, radius } => {
                    let d = box_sum(self.shape, &g, *radius);
                    accumulate(&mut grads[*src], &d, n);
                }
                FieldOp::Sigmoid { src, sharpness } => {
                    let y = &self.values[node];
                    let d: Vec<f64> = g.iter().zip(y).map(|(g, &s)| g * sharpness * s * (1.0 - s)).collect();
                    accumulate(&mut grads[*src], &d, n);
                }
            }
            grads[node] = g;
        }
        grads
    }
}

fn accumulate(dst: &mut Vec<f64>, src: &[f64], n: usize) {
    if dst.is_empty() {
        dst.resize(n, 0.0);
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn box_sum(shape: Shape, x: &[f64], radius: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    let dims = shape.dims3();
    let first_axis = 3 - shape.ndim();
    for (axis, &extent) in dims.iter().enumerate().skip(first_axis) {
        let stride: usize = dims[axis + 1..].iter().product();
        let mut next = vec![0.0; cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let c = (i / stride) % extent;
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(extent - 1);
            let base = i - c * stride;
            *out = (lo..=hi).map(|k| cur[base + k * stride]).sum();
        }
        cur = next;
    }
    cur
}

/// Handle to a scalar node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Ln(usize),
    Exp(usize),
    Max(usize, usize),
    Affine(usize, f64),
    Lse(Vec<usize>),
    Dot(Vec<usize>, Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Tape {
    values: Vec<f64>,
    ops: Vec<Op>,
}

impl Tape {
    pub(crate) fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, v: f64, op: Op) -> Var {
        self.values.push(v);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub(crate) fn val(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    /// Leaf variable (also used for constants; their adjoint is ignored).
    pub(crate) fn leaf(&mut self, v: f64) -> Var {
        self.push(v, Op::Leaf)
    }

    pub(crate) fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) + self.val(b), Op::Add(a.0, b.0))
    }

    pub(crate) fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) - self.val(b), Op::Sub(a.0, b.0))
    }

    pub(crate) fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) * self.val(b), Op::Mul(a.0, b.0))
    }

    pub(crate) fn div(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) / self.val(b), Op::Div(a.0, b.0))
    }

    pub(crate) fn ln(&mut self, a: Var) -> Var {
        self.push(self.val(a).ln(), Op::Ln(a.0))
    }

    pub(crate) fn exp(&mut self, a: Var) -> Var {
        self.push(self.val(a).exp(), Op::Exp(a.0))
    }

    pub(crate) fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Ties route the adjoint to `a`.
    pub(crate) fn max(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a).max(self.val(b)), Op::Max(a.0, b.0))
    }

    /// `c * a`.
    pub(crate) fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(c * self.val(a), Op::Affine(a.0, c))
    }

    /// `ln Σ exp(x_i)`, shifted by the maximum.
    pub(crate) fn lse(&mut self, xs: &[Var]) -> Var {
        let vals: Vec<f64> = xs.iter().map(|&x| self.val(x)).collect();
        let v = crate::murray::log_sum_exp(&vals);
        self.push(v, Op::Lse(xs.iter().map(|x| x.0).collect()))
    }

    /// `Σ c_i x_i`.
    pub(crate) fn dot(&mut self, xs: &[Var], coeffs: &[f64]) -> Var {
        let v = xs.iter().zip(coeffs).map(|(&x, c)| c * self.val(x)).sum();
        self.push(v, Op::Dot(xs.iter().map(|x| x.0).collect(), coeffs.to_vec()))
    }

    /// Adjoints of every node with respect to `out`.
    pub(crate) fn grad(&self, out: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.values.len()];
        adj[out.0] = 1.0;
        for i in (0..=out.0).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    adj[*a] += g;
                    adj[*b] += g;
                }
                Op::Sub(a, b) => {
                    adj[*a] += g;
                    adj[*b] -= g;
                }
                Op::Mul(a, b) => {
                    adj[*a] += g * self.values[*b];
                    adj[*b] += g * self.values[*a];
                }
                Op::Div(a, b) => {
                    let bv = self.values[*b];
                    adj[*a] += g / bv;
                    adj[*b] -= g * self.values[*a] / (bv * bv);
                }
                Op::Ln(a) => adj[*a] += g / self.values[*a],
                Op::Exp(a) => adj[*a] += g * self.values[i],
                Op::Max(a, b) => {
                    if self.values[*a] >= self.values[*b] {
                        adj[*a] += g;
                    } else {
                        adj[*b] += g;
                    }
                }
                Op::Affine(a, c) => adj[*a] += g * c,
                Op::Lse(xs) => {
                    let out = self.values[i];
                    for &x in xs {
                        adj[x] += g * (self.values[x] - out).exp();
                    }
                }
                Op::Dot(xs, cs) => {
                    for (&x, c) in xs.iter().zip(cs) {
                        adj[x] += g * c;
                    }
                }
            }
        }
        adj
    }

    pub(crate) fn adjoint(adj: &[f64], v: Var) -> f64 {
        adj[v.0]
    }
}
