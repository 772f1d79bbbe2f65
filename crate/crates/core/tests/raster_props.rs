use proptest::prelude::*;
use vasctree::murray::{child_weights, lse_capacity, murray_residual, solve_alpha};
use vasctree::raster::{edt, morph, remove_small_regions, MorphOp};
use vasctree::{Connectivity, MaskGrid, Shape, VesselClass};

fn mask_3d(dims: [usize; 3], bits: &[bool], spacing: [f64; 3]) -> MaskGrid {
    let shape = Shape::new_3d(dims[0], dims[1], dims[2]);
    let cells: Vec<bool> = (0..shape.len()).map(|i| bits[i % bits.len()]).collect();
    MaskGrid::from_bools(shape, &cells)
        .unwrap()
        .with_spacing(&spacing)
        .unwrap()
}

fn brute_edt(m: &MaskGrid) -> Vec<f64> {
    let shape = m.shape();
    let s = m.spacing();
    let cells = m.to_bools();
    (0..cells.len())
        .map(|i| {
            if !cells[i] {
                return 0.0;
            }
            let a = shape.coords(i);
            (0..cells.len())
                .filter(|&j| !cells[j])
                .map(|j| {
                    let b = shape.coords(j);
                    (0..3)
                        .map(|k| ((a[k] as f64 - b[k] as f64) * s[k]).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edt_matches_brute_force(
        d in 1usize..6, h in 1usize..9, w in 1usize..9,
        bits in prop::collection::vec(prop::bool::weighted(0.7), 1..64),
        sz in 0.5f64..2.0, sy in 0.5f64..2.0, sx in 0.5f64..2.0,
    ) {
        let m = mask_3d([d, h, w], &bits, [sz, sy, sx]);
        prop_assume!(m.count() < m.len());
        let f = edt(&m, VesselClass::Single).unwrap();
        for (a, b) in f.values().iter().zip(brute_edt(&m)) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn edt_is_lipschitz(bits in prop::collection::vec(prop::bool::weighted(0.8), 256)) {
        let m = MaskGrid::from_bools(Shape::new_2d(16, 16), &bits).unwrap();
        prop_assume!(m.count() < m.len());
        let f = edt(&m, VesselClass::Single).unwrap();
        let shape = m.shape();
        for i in 0..shape.len() {
            for j in shape.neighbors(i, Connectivity::Full) {
                let (a, b) = (shape.coords(i), shape.coords(j));
                let dist = (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt();
                prop_assert!((f.get(i) - f.get(j)).abs() <= dist + 1e-12);
            }
        }
    }

    #[test]
    fn opening_and_closing_are_idempotent(
        bits in prop::collection::vec(any::<bool>(), 4096),
        r in 1.0f64..3.0,
    ) {
        let m = MaskGrid::from_bools(Shape::new_2d(64, 64), &bits).unwrap();
        let open = morph(&m, MorphOp::Open, r).unwrap();
        prop_assert_eq!(&morph(&open, MorphOp::Open, r).unwrap(), &open);
        let close = morph(&m, MorphOp::Close, r).unwrap();
        prop_assert_eq!(&morph(&close, MorphOp::Close, r).unwrap(), &close);
        let (mc, cc) = (m.to_bools(), close.to_bools());
        prop_assert!(mc.iter().zip(&cc).all(|(a, c)| !*a || *c));
    }

    #[test]
    fn small_regions_are_gone(bits in prop::collection::vec(any::<bool>(), 400), t in 1usize..12) {
        let m = MaskGrid::from_bools(Shape::new_2d(20, 20), &bits).unwrap();
        let out = remove_small_regions(&m, t, Connectivity::Full);
        let c = vasctree::raster::label_components(&out, Connectivity::Full);
        prop_assert!(c.sizes().iter().all(|&s| s >= t));
    }

    #[test]
    fn exponent_is_scale_invariant(
        rp in 1.0f64..50.0,
        frac in prop::collection::vec(0.3f64..0.95, 2..4),
        scale in 0.1f64..10.0,
    ) {
        let children: Vec<f64> = frac.iter().map(|f| f * rp).collect();
        let a = solve_alpha(rp, &children).unwrap().alpha();
        let scaled: Vec<f64> = children.iter().map(|c| c * scale).collect();
        let b = solve_alpha(rp * scale, &scaled).unwrap().alpha();
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert!((a - b).abs() < 1e-8 * a.max(1.0));
                prop_assert!(murray_residual(rp, &children, a).abs() < 1e-10);
                prop_assert!((lse_capacity(&children, a) - a * rp.ln()).abs() < 1e-8 * a * rp.ln().abs().max(1.0));
            }
            (None, None) => {}
            _ => prop_assert!(false, "acceptance differs under scaling"),
        }
    }

    #[test]
    fn child_weights_are_a_distribution(
        children in prop::collection::vec(0.1f64..30.0, 1..6),
        tau in 0.01f64..2.0,
    ) {
        let w = child_weights(&children, tau);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
