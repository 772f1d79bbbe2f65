use vasctree::graph::{bifurcations, extract_graph, MoatPolicy};
use vasctree::murray::{build_table, solve_alpha};
use vasctree::synth::{gen_tree, TreeParams};
use vasctree::VesselClass;

/// Radius of the extracted edge passing closest to each segment midpoint.
#[test]
fn recovered_radii_track_ground_truth() {
    for seed in [1u64, 2, 3] {
        let t = gen_tree(&TreeParams {
            depth: 2,
            root_radius: 6.0,
            seed,
            ..TreeParams::default()
        })
        .unwrap();
        let g = extract_graph(&t.mask, VesselClass::Single, MoatPolicy::default()).unwrap();
        assert_eq!(bifurcations(&g).len(), 3, "seed {seed}");
        for s in &t.segments {
            let mid = [(s.start[0] + s.end[0]) / 2.0, (s.start[1] + s.end[1]) / 2.0];
            let (_, r) = g
                .edges
                .iter()
                .flat_map(|e| e.polyline.iter().map(move |p| (p, e.radius_px)))
                .map(|(p, r)| ((p[0] as f64 - mid[0]).powi(2) + (p[1] as f64 - mid[1]).powi(2), r))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            assert!((r - s.radius).abs() <= 0.5, "seed {seed}: {r} vs {}", s.radius);
        }
    }
}

#[test]
fn calibration_recovers_the_exponent() {
    let mut records = Vec::new();
    for seed in 0..10 {
        let t = gen_tree(&TreeParams {
            alpha: 3.0,
            depth: 3,
            root_radius: 16.0,
            seed,
            ..TreeParams::default()
        })
        .unwrap();
        let g = extract_graph(&t.mask, VesselClass::Single, MoatPolicy::default()).unwrap();
        records.extend(bifurcations(&g));
    }
    let mut alphas: Vec<f64> = records
        .iter()
        .filter_map(|r| solve_alpha(r.parent_radius_px, &r.children_px).unwrap().alpha())
        .collect();
    alphas.sort_by(f64::total_cmp);
    let median = alphas[alphas.len() / 2];
    assert!((median - 3.0).abs() <= 0.15, "median {median}");
    let table = build_table(&records, 5.0).unwrap();
    assert!(table.n_records > 0 && table.ci_low <= table.ci_high);
}
