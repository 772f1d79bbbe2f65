use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vasctree::loss::{gradcheck, total_loss, Channel, LossConfig};
use vasctree::murray::{fixed_table, table_from_samples};
use vasctree::{MaskGrid, ScalarField, Shape, VesselClass};

struct Fixture {
    p: ScalarField,
    rm: ScalarField,
    rm_gt: ScalarField,
    gt: MaskGrid,
}

fn fixture(seed: u64) -> Fixture {
    let shape = Shape::new_2d(16, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.len();
    let p = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
    let rm = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
    let rm_gt = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
    let gt: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    Fixture {
        p: ScalarField::from_values(shape, p).unwrap(),
        rm: ScalarField::from_values(shape, rm).unwrap(),
        rm_gt: ScalarField::from_values(shape, rm_gt).unwrap(),
        gt: MaskGrid::from_bools(shape, &gt).unwrap(),
    }
}

fn width_table() -> vasctree::ExponentTable {
    let samples: Vec<(f64, f64)> = (0..60)
        .map(|i| {
            let w = 1.0 + (i % 6) as f64;
            (w + 0.25, 2.2 + 0.2 * w)
        })
        .collect();
    table_from_samples(&samples, VesselClass::Single).unwrap()
}

#[test]
fn finite_differences_agree() {
    let table = width_table();
    for seed in [1u64, 2, 3] {
        let f = fixture(seed);
        let ch = [Channel {
            class: VesselClass::Single,
            p: &f.p,
            rm_pred: &f.rm,
            gt: &f.gt,
            rm_gt: &f.rm_gt,
            table: &table,
        }];
        // a heavier Murray weight so its gradient is not swamped
        let cfg = LossConfig {
            lambda: 1.0,
            ..LossConfig::default()
        };
        let report = total_loss(&ch, &cfg).unwrap();
        assert!(report.murray[0].elements > 0, "fixture has no junctions");
        let check = gradcheck(&ch, &cfg, 64, seed).unwrap();
        let frac = check.pass_fraction();
        for c in check.cells.iter().filter(|c| c.rel_error >= check.tolerance) {
            eprintln!("{c:?}");
        }
        eprintln!(
            "seed {seed}: elements {} murray {} pass {frac}",
            report.murray[0].elements, report.murray[0].value
        );
        assert!(frac >= 0.95, "seed {seed}: pass fraction {frac}");
    }
}

#[test]
fn zero_weights_leave_dice_and_mse() {
    let f = fixture(7);
    let table = fixed_table(3.0).unwrap();
    let ch = [Channel {
        class: VesselClass::Single,
        p: &f.p,
        rm_pred: &f.rm,
        gt: &f.gt,
        rm_gt: &f.rm_gt,
        table: &table,
    }];
    let cfg = LossConfig {
        lambda: 0.0,
        beta: 0.0,
        ..LossConfig::default()
    };
    let r = total_loss(&ch, &cfg).unwrap();
    assert_eq!(r.total, r.dice + r.mse);
    assert!(r.grad_rm[0].values().iter().all(|&g| g == 0.0));
}

#[test]
fn report_total_is_sum_of_parts() {
    let f = fixture(9);
    let table = width_table();
    let ch = [Channel {
        class: VesselClass::Single,
        p: &f.p,
        rm_pred: &f.rm,
        gt: &f.gt,
        rm_gt: &f.rm_gt,
        table: &table,
    }];
    let cfg = LossConfig::default();
    let r = total_loss(&ch, &cfg).unwrap();
    let sum = r.dice + r.mse + cfg.lambda * r.murray_sum() + cfg.beta * r.radius;
    assert!((r.total - sum).abs() <= 1e-12);
    assert!(r.dice >= 0.0 && r.mse >= 0.0 && r.radius >= 0.0 && r.murray_sum() >= 0.0);
    assert_eq!(r.grad_p[0].shape(), f.p.shape());
}
