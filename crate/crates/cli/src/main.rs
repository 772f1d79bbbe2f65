use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vasctree::graph::{bifurcations, extract_graph, MoatPolicy};
use vasctree::hemo::{delta_p_av, morph_stats, propagate, root_and_orient, MorphStats, SimConfig, VenousSign};
use vasctree::io;
use vasctree::loss::{gradcheck, total_loss, Channel, LossConfig};
use vasctree::metrics::{evaluate, MetricRow};
use vasctree::murray::{fixed_table, solve_alpha, table_from_samples};
use vasctree::raster::edt;
use vasctree::skeleton::{default_iterations, soft_skeleton, thin};
use vasctree::synth::{gen_av_pair, gen_tree, TreeParams};
use vasctree::{Error, ExponentTable, MaskGrid, ScalarField, VesselClass, VesselGraph};

const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const THREADS_ENV: &str = "VASCTREE_THREADS";
const GRADCHECK_PASS: f64 = 0.95;

#[derive(Parser)]
#[command(name = "vasctree", version, about = "Vessel-tree analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Euclidean distance transform of a mask.
    Edt {
        mask: PathBuf,
        /// Pixel size per axis (one value for isotropic); required for PGM.
        #[arg(long, value_delimiter = ',')]
        spacing: Option<Vec<f64>>,
        #[arg(long, default_value = "single")]
        class: VesselClass,
        #[arg(short)]
        o: PathBuf,
    },
    /// Hard thinning, or the soft skeleton with `--soft`.
    Skeletonize {
        mask: PathBuf,
        #[arg(long, value_delimiter = ',')]
        spacing: Option<Vec<f64>>,
        #[arg(long)]
        soft: bool,
        /// Soft-skeleton iterations; defaults to the largest mask radius.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value = "single")]
        class: VesselClass,
        #[arg(short)]
        o: PathBuf,
    },
    /// Skeleton graph with calibrated radii.
    Graph {
        mask: PathBuf,
        /// Physical pixel size; required for PGM, overrides the NRRD header.
        #[arg(long)]
        um_per_px: Option<f64>,
        #[arg(long, default_value = "single")]
        class: VesselClass,
        /// Fixed moat radius in pixels instead of the adaptive one.
        #[arg(long)]
        moat: Option<usize>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Width-binned exponent table from graph files.
    Calibrate {
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
        #[arg(short)]
        o: PathBuf,
    },
    /// Composite loss report with gradients.
    MurrayLoss(LossArgs),
    /// Segmentation and topology metrics as one CSV row.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_delimiter = ',')]
        spacing: Vec<f64>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Poiseuille simulation and the arteriovenous pressure difference.
    Simulate(SimArgs),
    /// Branch angle, radius continuity and asymmetry per graph.
    MorphStats {
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
    },
    /// Synthetic fixtures.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    prob: PathBuf,
    #[arg(long)]
    radius: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    gt_radius: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value = "single")]
    class: VesselClass,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Physical size of a radius-map unit, for the table lookup.
    #[arg(long)]
    um_per_px: f64,
    #[arg(long)]
    iters: Option<usize>,
    /// Number of cells per input to verify by central differences.
    #[arg(long)]
    gradcheck: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `grad_p.grid` and `grad_rm.grid`.
    #[arg(long)]
    grad_out: Option<PathBuf>,
    #[arg(short)]
    o: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    artery: PathBuf,
    #[arg(long)]
    vein: PathBuf,
    /// Optic disc as `x,y` pixels.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    disc: Vec<f64>,
    /// Macula as `cx,cy,r` pixels.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    macula: Vec<f64>,
    #[arg(long, conflicts_with = "alpha")]
    table: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value = "paper")]
    venous_sign: VenousSign,
    #[arg(long, default_value_t = vasctree::hemo::P_IN_MMHG)]
    p_in: f64,
    #[arg(long, default_value_t = vasctree::hemo::P_OUT_MMHG)]
    p_out: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(short)]
    o: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    root_radius: f64,
    #[arg(long, default_value_t = 80.0)]
    branch_angle: f64,
    #[arg(long, default_value_t = 0.8)]
    length_ratio: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl TreeArgs {
    fn params(&self) -> TreeParams {
        TreeParams {
            alpha: self.alpha,
            depth: self.depth,
            root_radius: self.root_radius,
            branch_angle: self.branch_angle,
            length_ratio: self.length_ratio,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum SynthKind {
    /// One tree: `mask.pgm`, `rm_gt.grid`, `graph.json`, `params.json`.
    Tree {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(short)]
        o: PathBuf,
    },
    /// Mirrored artery/vein pair: `labels.pgm`, `artery.json`, `vein.json`, `pair.json`.
    Pair {
        #[command(flatten)]
        tree: TreeArgs,
        /// Angle of each tree away from the horizontal, degrees.
        #[arg(long, default_value_t = 45.0)]
        tilt: f64,
        #[arg(long, default_value_t = 1.0)]
        artery_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        vein_scale: f64,
        #[arg(short)]
        o: PathBuf,
    },
}

enum Failure {
    Data(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoAcceptedRecords => Failure::Numerical(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<VesselGraph, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    VesselGraph::from_json(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_mask(path: &Path, spacing: Option<&[f64]>) -> Result<MaskGrid, Failure> {
    io::read_mask(path, spacing).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn run_edt(mask: &Path, spacing: Option<&[f64]>, class: VesselClass, out: &Path) -> Outcome {
    let m = read_mask(mask, spacing)?;
    io::write_field(out, &edt(&m, class)?)?;
    Ok(())
}

fn run_skeletonize(
    mask: &Path,
    spacing: Option<&[f64]>,
    soft: bool,
    iters: Option<usize>,
    class: VesselClass,
    out: &Path,
) -> Outcome {
    let m = read_mask(mask, spacing)?.class_mask(class);
    if soft {
        let p = ScalarField::from_mask(&m);
        let k = iters.unwrap_or_else(|| default_iterations(&p));
        io::write_field(out, &soft_skeleton(&p, k)?)?;
    } else {
        if iters.is_some() {
            return Err(Failure::Data("--iters applies to --soft only".into()));
        }
        io::write_mask(out, &thin(&m))?;
    }
    Ok(())
}

fn run_graph(
    mask: &Path,
    um_per_px: Option<f64>,
    class: VesselClass,
    moat: Option<usize>,
    out: Option<&Path>,
) -> Outcome {
    let is_nrrd = mask.extension().is_some_and(|e| e == "nhdr");
    let m = match (um_per_px, is_nrrd) {
        (Some(s), _) => {
            let iso = [s];
            let m = read_mask(mask, if is_nrrd { None } else { Some(&iso) })?;
            m.clone().with_spacing(&vec![s; m.ndim()])?
        }
        (None, true) => read_mask(mask, None)?,
        (None, false) => return Err(Failure::Data("missing field `um-per-px` for a PGM mask".into())),
    };
    let policy = moat.map_or(MoatPolicy::default(), MoatPolicy::Fixed);
    let g = extract_graph(&m, class, policy)?;
    emit(out, &(g.to_json()? + "\n"))
}

fn run_calibrate(graphs: &[PathBuf], out: &Path) -> Outcome {
    let mut samples = Vec::new();
    let mut class = None;
    for path in graphs {
        let g = read_graph(path)?;
        class.get_or_insert(g.class);
        for r in bifurcations(&g) {
            if let Some(a) = solve_alpha(r.parent_radius_px, &r.children_px)?.alpha() {
                samples.push((r.parent_radius_um, a));
            }
        }
    }
    let table = table_from_samples(&samples, class.unwrap_or(VesselClass::Single))?;
    io::write_table(out, &table)?;
    println!(
        "pooled 95% CI ({}, {}) from {} records in {} bins",
        table.ci_low,
        table.ci_high,
        table.n_records,
        table.bins.len()
    );
    Ok(())
}

fn run_murray_loss(a: &LossArgs) -> Outcome {
    let p = io::read_field(&a.prob)?;
    let rm = io::read_field(&a.radius)?;
    let rm_gt = io::read_field(&a.gt_radius)?;
    let gt = read_mask(&a.gt, Some(&p.spacing()))?;
    let table = io::read_table(&a.table)?;
    let cfg = LossConfig {
        lambda: a.lambda,
        beta: a.beta,
        um_per_px: a.um_per_px,
        iterations: a.iters,
        ..LossConfig::default()
    };
    let ch = [Channel {
        class: a.class,
        p: &p,
        rm_pred: &rm,
        gt: &gt,
        rm_gt: &rm_gt,
        table: &table,
    }];
    let report = total_loss(&ch, &cfg)?;
    if let Some(dir) = &a.grad_out {
        fs::create_dir_all(dir)?;
        io::write_field(&dir.join("grad_p.grid"), &report.grad_p[0])?;
        io::write_field(&dir.join("grad_rm.grid"), &report.grad_rm[0])?;
    }
    let mut json = serde_json::to_value(&report)?;
    let mut check_failed = None;
    if let Some(n) = a.gradcheck {
        let check = gradcheck(&ch, &cfg, n, a.seed)?;
        let frac = check.pass_fraction();
        if frac < GRADCHECK_PASS {
            check_failed = Some(frac);
        }
        json["gradcheck"] = serde_json::json!({
            "pass_fraction": frac,
            "step": check.step,
            "tolerance": check.tolerance,
            "cells": check.cells,
        });
    }
    emit(a.o.as_deref(), &(serde_json::to_string_pretty(&json)? + "\n"))?;
    match check_failed {
        Some(frac) => Err(Failure::Numerical(format!(
            "gradient check pass fraction {frac} below {GRADCHECK_PASS}"
        ))),
        None => Ok(()),
    }
}

fn run_metrics(pred: &Path, gt: &Path, spacing: &[f64], id: Option<&str>) -> Outcome {
    if spacing.is_empty() {
        return Err(Failure::Data("missing field `spacing`".into()));
    }
    let p = read_mask(pred, Some(spacing))?;
    let g = read_mask(gt, Some(spacing))?;
    let id = id.map(str::to_string).unwrap_or_else(|| {
        pred.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let row = evaluate(&id, &p, &g)?;
    println!("{}\n{}", MetricRow::HEADER, row.to_csv());
    Ok(())
}

fn load_table(table: Option<&Path>, alpha: Option<f64>) -> Result<ExponentTable, Failure> {
    match (table, alpha) {
        (Some(t), _) => Ok(io::read_table(t)?),
        (None, Some(a)) => Ok(fixed_table(a)?),
        (None, None) => Err(Failure::Data("missing field `table` or `alpha`".into())),
    }
}

fn run_simulate(a: &SimArgs) -> Outcome {
    if a.disc.len() != 2 {
        return Err(Failure::Data("field `disc` needs x,y".into()));
    }
    if a.macula.len() != 3 {
        return Err(Failure::Data("field `macula` needs cx,cy,r".into()));
    }
    let table = load_table(a.table.as_deref(), a.alpha)?;
    let art = read_graph(&a.artery)?;
    let ven = read_graph(&a.vein)?;
    // flags are x,y; lattice positions are y,x
    let cfg = SimConfig {
        p_in: a.p_in,
        p_out: a.p_out,
        eta: a.eta,
        k: a.k,
        disc: vec![a.disc[1], a.disc[0]],
        macula_center: vec![a.macula[1], a.macula[0]],
        macula_radius: a.macula[2],
        venous_sign: a.venous_sign,
    };
    let fa = propagate(&root_and_orient(&art, &cfg.disc)?, &cfg, Some(&table))?;
    let fv = propagate(&root_and_orient(&ven, &cfg.disc)?, &cfg, Some(&table))?;
    let r = delta_p_av(&fa, &fv, &cfg)?;
    emit(a.o.as_deref(), &(r.to_json()? + "\n"))
}

fn run_morph_stats(graphs: &[PathBuf]) -> Outcome {
    println!("graph,{}", MorphStats::HEADER);
    for path in graphs {
        let s = morph_stats(&read_graph(path)?);
        println!("{},{}", path.display(), s.to_csv());
    }
    Ok(())
}

fn run_synth(kind: &SynthKind) -> Outcome {
    match kind {
        SynthKind::Tree { tree, o } => {
            let t = gen_tree(&tree.params())?;
            fs::create_dir_all(o)?;
            io::write_pgm(&o.join("mask.pgm"), &t.mask)?;
            io::write_field(&o.join("rm_gt.grid"), &t.rm_gt)?;
            fs::write(o.join("graph.json"), t.graph.to_json()? + "\n")?;
            fs::write(o.join("params.json"), serde_json::to_string_pretty(&t.params)? + "\n")?;
        }
        SynthKind::Pair {
            tree,
            tilt,
            artery_scale,
            vein_scale,
            o,
        } => {
            let p = gen_av_pair(&tree.params(), *tilt, *artery_scale, *vein_scale)?;
            fs::create_dir_all(o)?;
            io::write_pgm(&o.join("labels.pgm"), &p.labels)?;
            fs::write(o.join("artery.json"), p.artery.graph.to_json()? + "\n")?;
            fs::write(o.join("vein.json"), p.vein.graph.to_json()? + "\n")?;
            let meta = serde_json::json!({
                "params": tree.params(),
                "disc_xy": [p.disc[1], p.disc[0]],
                "macula_xyr": [p.macula_center[1], p.macula_center[0], p.macula_radius],
            });
            fs::write(o.join("pair.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        }
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::Edt {
            mask,
            spacing,
            class,
            o,
        } => run_edt(mask, spacing.as_deref(), *class, o),
        Command::Skeletonize {
            mask,
            spacing,
            soft,
            iters,
            class,
            o,
        } => run_skeletonize(mask, spacing.as_deref(), *soft, *iters, *class, o),
        Command::Graph {
            mask,
            um_per_px,
            class,
            moat,
            o,
        } => run_graph(mask, *um_per_px, *class, *moat, o.as_deref()),
        Command::Calibrate { graphs, o } => run_calibrate(graphs, o),
        Command::MurrayLoss(a) => run_murray_loss(a),
        Command::Metrics { pred, gt, spacing, id } => run_metrics(pred, gt, spacing, id.as_deref()),
        Command::Simulate(a) => run_simulate(a),
        Command::MorphStats { graphs } => run_morph_stats(graphs),
        Command::Synth { kind } => run_synth(kind),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Data(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Data(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| dispatch(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
