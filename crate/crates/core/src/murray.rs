//! Murray exponents: per-bifurcation root solving, the empirical
//! width-to-exponent table and the log-space relations used by the loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BifurcationRecord;
use crate::grid::VesselClass;

pub const BRACKET: (f64, f64) = (0.05, 12.0);
/// Geometric expansions of each bracket end before giving up.
const EXPANSIONS: usize = 3;
pub const TOLERANCE: f64 = 1e-10;
pub const MIN_BIN_COUNT: usize = 5;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_SEED: u64 = 42;

/// `m + ln Σ exp(x_i - m)` with `m = max x_i`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "alpha")]
pub enum Solution {
    Alpha(f64),
    Discard,
}

impl Solution {
    pub fn alpha(self) -> Option<f64> {
        match self {
            Solution::Alpha(a) => Some(a),
            Solution::Discard => None,
        }
    }
}

fn check_radii(values: &[f64]) -> Result<()> {
    match values.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        Some(&r) => Err(Error::NonPositiveRadius(r)),
        None => Ok(()),
    }
}

/// `g(α) = α ln r_p − ln Σ r_ci^α`.
pub fn murray_residual(r_p: f64, children: &[f64], alpha: f64) -> f64 {
    alpha * r_p.ln() - lse_capacity(children, alpha)
}

/// Positive root of `r_p^α = Σ r_ci^α`, found by bisection on the log-space
/// residual.
///
/// The residual is strictly increasing whenever the parent is larger than
/// every child and negative for every α otherwise, in which case the record
/// is discarded.
pub fn solve_alpha(r_p: f64, children: &[f64]) -> Result<Solution> {
    check_radii(&[r_p])?;
    check_radii(children)?;
    if children.len() < 2 {
        return Err(Error::invalid("children", "at least two child radii are required"));
    }
    let max_child = children.iter().cloned().fold(0.0, f64::max);
    if r_p <= max_child {
        return Ok(Solution::Discard);
    }
    let g = |a: f64| murray_residual(r_p, children, a);
    let (mut lo, mut hi) = BRACKET;
    let mut expansions = 0;
    while g(hi) < 0.0 && expansions < EXPANSIONS {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
    }
    expansions = 0;
    while g(lo) > 0.0 && expansions < EXPANSIONS {
        hi = lo;
        lo /= 2.0;
        expansions += 1;
    }
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 0.0 || ghi < 0.0 {
        return Ok(Solution::Discard);
    }
    if glo.abs() < TOLERANCE {
        return Ok(Solution::Alpha(lo));
    }
    if ghi.abs() < TOLERANCE {
        return Ok(Solution::Alpha(hi));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() < TOLERANCE {
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    Ok(Solution::Alpha(mid))
}

/// `ln Σ_i r_ci^α`, evaluated without overflow.
pub fn lse_capacity(children: &[f64], alpha: f64) -> f64 {
    let xs: Vec<f64> = children.iter().map(|r| alpha * r.ln()).collect();
    log_sum_exp(&xs)
}

/// Softmax of `r_i / (τ max_j r_j)`.
pub fn child_weights(children: &[f64], tau: f64) -> Vec<f64> {
    let max = children.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: Vec<f64> = children.iter().map(|r| r / (tau * max)).collect();
    let lse = log_sum_exp(&z);
    z.iter().map(|z| (z - lse).exp()).collect()
}

/// `0.5, 0.6, …, 6.0`.
pub fn default_candidates() -> Vec<f64> {
    (0..=55).map(|i| 0.5 + 0.1 * i as f64).collect()
}

/// Squared log-space Murray error per candidate exponent.
pub fn candidate_errors(r_p: f64, children: &[f64], candidates: &[f64]) -> Vec<f64> {
    candidates
        .iter()
        .map(|&a| murray_residual(r_p, children, a).powi(2))
        .collect()
}

/// Soft-argmin of the candidate errors at temperature `t`.
pub fn alpha_predicted(r_p: f64, children: &[f64], candidates: &[f64], t: f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "must not be empty"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("t_argmin", "must be > 0"));
    }
    check_radii(&[r_p])?;
    check_radii(children)?;
    let z: Vec<f64> = candidate_errors(r_p, children, candidates)
        .iter()
        .map(|e| -e / t)
        .collect();
    let lse = log_sum_exp(&z);
    Ok(candidates.iter().zip(&z).map(|(a, z)| a * (z - lse).exp()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// Bin center in µm.
    pub width_um: f64,
    pub alpha: f64,
    pub count: usize,
}

/// Empirical mapping from parent width (µm) to Murray exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub class: VesselClass,
    pub bin_width_um: f64,
    pub bins: Vec<Bin>,
    pub sigma_log: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_records: usize,
}

/// Degenerate table returning `alpha` for every width.
pub fn fixed_table(alpha: f64) -> Result<ExponentTable> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", "must be finite and > 0"));
    }
    Ok(ExponentTable {
        class: VesselClass::Single,
        bin_width_um: 1.0,
        bins: vec![Bin {
            width_um: 0.5,
            alpha,
            count: 0,
        }],
        sigma_log: 1.0,
        ci_low: alpha,
        ci_high: alpha,
        n_records: 0,
    })
}

/// Solves every record and builds the 1 µm table from the accepted ones.
pub fn build_table(records: &[BifurcationRecord], um_per_px: f64) -> Result<ExponentTable> {
    if records.is_empty() {
        return Err(Error::Empty("no bifurcation records".into()));
    }
    if !(um_per_px > 0.0 && um_per_px.is_finite()) {
        return Err(Error::invalid("um_per_px", "must be finite and > 0"));
    }
    let solved: Vec<Option<f64>> = records
        .par_iter()
        .map(|r| Ok(solve_alpha(r.parent_radius_px, &r.children_px)?.alpha()))
        .collect::<Result<_>>()?;
    let samples: Vec<(f64, f64)> = records
        .iter()
        .zip(&solved)
        .filter_map(|(r, a)| a.map(|a| (r.parent_radius_px * um_per_px, a)))
        .collect();
    let class = records[0].class;
    table_from_samples(&samples, class)
}

/// Builds a table from `(parent width µm, α)` pairs.
pub fn table_from_samples(samples: &[(f64, f64)], class: VesselClass) -> Result<ExponentTable> {
    if samples.is_empty() {
        return Err(Error::NoAcceptedRecords);
    }
    let lo = samples.iter().map(|s| s.0.floor()).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0.floor()).fold(f64::NEG_INFINITY, f64::max);
    let nbins = (hi - lo) as usize + 1;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    for &(w, a) in samples {
        let b = (w.floor() - lo) as usize;
        sums[b] += a;
        counts[b] += 1;
    }
    let centers: Vec<f64> = (0..nbins).map(|b| lo + b as f64 + 0.5).collect();
    let min_anchor = if counts.iter().any(|&c| c >= MIN_BIN_COUNT) {
        MIN_BIN_COUNT
    } else {
        1
    };
    let anchors: Vec<(f64, f64)> = (0..nbins)
        .filter(|&b| counts[b] >= min_anchor)
        .map(|b| (centers[b], sums[b] / counts[b] as f64))
        .collect();
    let bins = (0..nbins)
        .map(|b| Bin {
            width_um: centers[b],
            alpha: if counts[b] >= min_anchor {
                sums[b] / counts[b] as f64
            } else {
                interpolate(&anchors, centers[b])
            },
            count: counts[b],
        })
        .collect();

    let logs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    let var = logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / logs.len() as f64;
    let sigma_log = var.sqrt().max(1e-6);

    let alphas: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (ci_low, ci_high) = bootstrap_ci(&alphas, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
    Ok(ExponentTable {
        class,
        bin_width_um: 1.0,
        bins,
        sigma_log,
        ci_low,
        ci_high,
        n_records: samples.len(),
    })
}

/// Percentile 95% interval of the mean under resampling with replacement.
pub fn bootstrap_ci(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (percentile(&means, 0.025), percentile(&means, 0.975))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Piecewise-linear through `(x, y)` anchors sorted by `x`, constant beyond.
fn interpolate(anchors: &[(f64, f64)], x: f64) -> f64 {
    let first = anchors[0];
    let last = anchors[anchors.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = anchors.partition_point(|a| a.0 <= x);
    let (x0, y0) = anchors[k - 1];
    let (x1, y1) = anchors[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl ExponentTable {
    /// Linear interpolation of bin exponents at `width_um`.
    pub fn lookup(&self, width_um: f64) -> f64 {
        let anchors: Vec<(f64, f64)> = self.bins.iter().map(|b| (b.width_um, b.alpha)).collect();
        interpolate(&anchors, width_um)
    }

    /// Log-Gaussian weights of every bin for a parent radius in µm.
    pub fn target_weights(&self, r_p_um: f64) -> Vec<f64> {
        let z = self.log_weights(r_p_um.ln());
        let lse = log_sum_exp(&z);
        z.iter().map(|z| (z - lse).exp()).collect()
    }

    pub(crate) fn log_weights(&self, ln_r: f64) -> Vec<f64> {
        let s2 = 2.0 * self.sigma_log * self.sigma_log;
        self.bins
            .iter()
            .map(|b| -(b.width_um.ln() - ln_r).powi(2) / s2)
            .collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.alpha).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::invalid("bins", "table has no bins"));
        }
        if !(self.sigma_log > 0.0) {
            return Err(Error::invalid("sigma_log", "must be > 0"));
        }
        if self.bins.windows(2).any(|w| w[0].width_um >= w[1].width_um) {
            return Err(Error::invalid("bins", "widths must be strictly increasing"));
        }
        if self
            .bins
            .iter()
            .any(|b| !(b.alpha > 0.0 && b.alpha.is_finite()) || !(b.width_um > 0.0))
        {
            return Err(Error::invalid("bins", "alpha and width must be finite and positive"));
        }
        Ok(())
    }
}

/// Gaussian-in-log-width interpolation of the table at a parent radius (µm).
pub fn alpha_target(r_p_um: f64, table: &ExponentTable) -> Result<f64> {
    check_radii(&[r_p_um])?;
    Ok(table
        .target_weights(r_p_um)
        .iter()
        .zip(&table.bins)
        .map(|(w, b)| w * b.alpha)
        .sum())
}
