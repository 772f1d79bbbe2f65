use proptest::prelude::*;
use vasctree::graph::{Edge, Node, NodeKind};
use vasctree::hemo::{delta_p_av, partition_flow, propagate, root_and_orient, SimConfig, VenousSign};
use vasctree::murray::fixed_table;
use vasctree::synth::{gen_av_pair, TreeParams};
use vasctree::{VesselClass, VesselGraph};

fn pair_config(p: &vasctree::synth::SynthPair) -> SimConfig {
    SimConfig {
        disc: p.disc.to_vec(),
        macula_center: p.macula_center.to_vec(),
        macula_radius: p.macula_radius,
        ..SimConfig::default()
    }
}

fn simulate(p: &vasctree::synth::SynthPair, cfg: &SimConfig) -> vasctree::hemo::AvDifference {
    let table = fixed_table(p.artery.params.alpha).unwrap();
    let a = propagate(&root_and_orient(&p.artery.graph, &cfg.disc).unwrap(), cfg, Some(&table)).unwrap();
    let v = propagate(&root_and_orient(&p.vein.graph, &cfg.disc).unwrap(), cfg, Some(&table)).unwrap();
    delta_p_av(&a, &v, cfg).unwrap()
}

#[test]
fn symmetric_pair_gives_the_pressure_span() {
    let pair = gen_av_pair(&params(), TILT, 1.0, 1.0).unwrap();
    let r = simulate(&pair, &pair_config(&pair));
    assert!(r.delta_p_a > 0.0);
    assert_eq!(r.delta_p_a, r.delta_p_v);
    assert_eq!(r.delta_p_av, 76.9 - 21.0);
}

#[test]
fn narrower_arteries_raise_the_arterial_drop() {
    let params = params();
    let sym = gen_av_pair(&params, TILT, 1.0, 1.0).unwrap();
    let thin = gen_av_pair(&params, TILT, 0.8, 1.0).unwrap();
    let a = simulate(&sym, &pair_config(&sym));
    let b = simulate(&thin, &pair_config(&thin));
    assert!(b.delta_p_a > a.delta_p_a);
    let ratio = b.delta_p_a / a.delta_p_a;
    assert!((ratio - 0.8f64.powi(-4)).abs() < 1e-9, "{ratio}");
}

#[test]
fn physical_sign_subtracts_both_drops() {
    let pair = gen_av_pair(&params(), TILT, 1.0, 1.0).unwrap();
    let cfg = SimConfig {
        venous_sign: VenousSign::Physical,
        ..pair_config(&pair)
    };
    let r = simulate(&pair, &cfg);
    assert!((r.delta_p_av - (55.9 - 2.0 * r.delta_p_a)).abs() < 1e-9);
}

#[test]
fn drops_scale_with_calibration_constant() {
    let pair = gen_av_pair(&params(), TILT, 1.0, 1.0).unwrap();
    let base = simulate(&pair, &pair_config(&pair));
    let cfg = SimConfig {
        k: 2.5,
        ..pair_config(&pair)
    };
    let scaled = simulate(&pair, &cfg);
    assert!((scaled.delta_p_a / base.delta_p_a - 2.5).abs() < 1e-12);
}

/// Hand-built two-edge chain: drops add along the path.
#[test]
fn chain_accumulates_drops() {
    let node = |id, y| Node {
        id,
        pos: vec![y, 0],
        kind: NodeKind::End,
    };
    let edge = |u, v, r: f64, len: f64| Edge {
        u,
        v,
        polyline: vec![],
        length_px: len,
        radius_px: r,
        radius_um: r,
        samples: vec![r],
        low_confidence: false,
    };
    let g = VesselGraph {
        spacing: vec![1.0, 1.0],
        class: VesselClass::Vein,
        nodes: vec![node(0, 0), node(1, 10), node(2, 20)],
        edges: vec![edge(0, 1, 2.0, 10.0), edge(1, 2, 1.0, 10.0)],
    };
    let cfg = SimConfig {
        eta: 2.0,
        ..SimConfig::default()
    };
    let fg = propagate(&root_and_orient(&g, &[0.0, 0.0]).unwrap(), &cfg, None).unwrap();
    let pi = std::f64::consts::PI;
    let d1 = 8.0 * 2.0 * 10.0 / (pi * 16.0);
    let d2 = 8.0 * 2.0 * 10.0 / pi;
    assert!((fg.pressure[1] - (21.0 + d1)).abs() < 1e-12);
    assert!((fg.pressure[2] - (21.0 + d1 + d2)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn partition_conserves_flow(
        q0 in 0.0f64..10.0,
        radii in prop::collection::vec(0.1f64..20.0, 1..6),
        alpha in 0.5f64..6.0,
    ) {
        let q = partition_flow(q0, &radii, alpha).unwrap();
        let total: f64 = q.iter().sum();
        prop_assert!((total - q0).abs() <= 1e-12 * q0.max(1.0));
        prop_assert!(q.iter().all(|&x| x >= -1e-12));
        // wider children carry at least as much flow
        for i in 0..radii.len() {
            for j in 0..radii.len() {
                if radii[i] > radii[j] {
                    prop_assert!(q[i] + 1e-12 >= q[j]);
                }
            }
        }
    }
}

const TILT: f64 = 45.0;

fn params() -> TreeParams {
    TreeParams {
        depth: 3,
        root_radius: 6.0,
        branch_angle: 60.0,
        ..TreeParams::default()
    }
}
