//! Python bindings. Masks cross the boundary as flat row-major lists with a
//! dims tuple; graphs and reports as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use vasctree::graph::{extract_graph, MoatPolicy};
use vasctree::hemo::{delta_p_av, morph_stats, partition_flow as partition, propagate, root_and_orient, SimConfig};
use vasctree::metrics::evaluate;
use vasctree::murray::fixed_table;
use vasctree::synth::{gen_tree, TreeParams};
use vasctree::{MaskGrid, Shape, VesselClass, VesselGraph};

fn err(e: vasctree::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mask(cells: Vec<bool>, dims: Vec<usize>, spacing: Vec<f64>) -> PyResult<MaskGrid> {
    let shape = Shape::from_dims(&dims).map_err(err)?;
    MaskGrid::from_bools(shape, &cells)
        .and_then(|m| m.with_spacing(&spacing))
        .map_err(err)
}

fn class(name: &str) -> PyResult<VesselClass> {
    name.parse().map_err(err)
}

/// Murray exponent of one bifurcation, or `None` when rejected.
#[pyfunction]
fn solve_alpha(r_p: f64, children: Vec<f64>) -> PyResult<Option<f64>> {
    Ok(vasctree::murray::solve_alpha(r_p, &children).map_err(err)?.alpha())
}

/// Exact Euclidean distance transform as a flat list.
#[pyfunction]
#[pyo3(signature = (cells, dims, spacing))]
fn edt(cells: Vec<bool>, dims: Vec<usize>, spacing: Vec<f64>) -> PyResult<Vec<f64>> {
    let m = mask(cells, dims, spacing)?;
    Ok(vasctree::raster::edt(&m, VesselClass::Single)
        .map_err(err)?
        .into_values())
}

/// Skeleton graph as JSON.
#[pyfunction]
#[pyo3(signature = (cells, dims, um_per_px, vessel_class = "single"))]
fn graph_json(cells: Vec<bool>, dims: Vec<usize>, um_per_px: f64, vessel_class: &str) -> PyResult<String> {
    let n = dims.len();
    let m = mask(cells, dims, vec![um_per_px; n])?;
    let g = extract_graph(&m, class(vessel_class)?, MoatPolicy::default()).map_err(err)?;
    g.to_json().map_err(err)
}

/// Metric row as CSV (`id,accuracy,...`), without the header.
#[pyfunction]
fn metrics_csv(pred: Vec<bool>, gt: Vec<bool>, dims: Vec<usize>, spacing: Vec<f64>) -> PyResult<String> {
    let p = mask(pred, dims.clone(), spacing.clone())?;
    let g = mask(gt, dims, spacing)?;
    Ok(evaluate("py", &p, &g).map_err(err)?.to_csv())
}

/// Synthetic tree: `(flat mask, dims, graph JSON)`.
#[pyfunction]
#[pyo3(signature = (alpha, depth, root_radius, seed = 42))]
fn synth_tree(alpha: f64, depth: usize, root_radius: f64, seed: u64) -> PyResult<(Vec<bool>, Vec<usize>, String)> {
    let t = gen_tree(&TreeParams {
        alpha,
        depth,
        root_radius,
        seed,
        ..TreeParams::default()
    })
    .map_err(err)?;
    Ok((
        t.mask.to_bools(),
        t.mask.shape().dims(),
        t.graph.to_json().map_err(err)?,
    ))
}

#[pyfunction]
fn partition_flow(q0: f64, radii: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    partition(q0, &radii, alpha).map_err(err)
}

/// Arteriovenous pressure difference as JSON; `disc` and `macula_center`
/// are `(y, x)`.
#[pyfunction]
#[pyo3(signature = (artery_json, vein_json, disc, macula_center, macula_radius, alpha = 3.0, eta = 1.0))]
fn simulate(
    artery_json: &str,
    vein_json: &str,
    disc: Vec<f64>,
    macula_center: Vec<f64>,
    macula_radius: f64,
    alpha: f64,
    eta: f64,
) -> PyResult<String> {
    let cfg = SimConfig {
        disc,
        macula_center,
        macula_radius,
        eta,
        ..SimConfig::default()
    };
    let table = fixed_table(alpha).map_err(err)?;
    let run = |json: &str| {
        let g = VesselGraph::from_json(json)?;
        propagate(&root_and_orient(&g, &cfg.disc)?, &cfg, Some(&table))
    };
    let a = run(artery_json).map_err(err)?;
    let v = run(vein_json).map_err(err)?;
    delta_p_av(&a, &v, &cfg).and_then(|r| r.to_json()).map_err(err)
}

/// `(mean branch angle, radius continuity, asymmetry, bifurcations)`.
#[pyfunction]
fn morphology(graph_json: &str) -> PyResult<(f64, f64, f64, usize)> {
    let s = morph_stats(&VesselGraph::from_json(graph_json).map_err(err)?);
    Ok((s.mean_branch_angle, s.radius_continuity, s.asymmetry, s.n_bifurcations))
}

#[pymodule]
fn vasctree_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(edt, m)?)?;
    m.add_function(wrap_pyfunction!(graph_json, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_csv, m)?)?;
    m.add_function(wrap_pyfunction!(synth_tree, m)?)?;
    m.add_function(wrap_pyfunction!(partition_flow, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(morphology, m)?)?;
    Ok(())
}
