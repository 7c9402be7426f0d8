//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p etforge-core --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use etforge::coulomb::{coulomb_energy_direct, coulomb_energy_treecode, TreecodeParams};
use etforge::electro::feature_count;
use etforge::featurize::{featurize, manifest_for, FeatureParams};
use etforge::gb::{born_sphere_energy, f_gb, gb_solvation_energy, perfect_born_radius, GbContext};
use etforge::octree::ClusterTree;
use etforge::pipeline::{
    export_dataset, import_dataset, iqr_filter, metrics, DatasetMatrix, Labels, ScalerParams, FEATURES_FILE,
    LABELS_FILE, MANIFEST_FILE,
};
use etforge::coulomb::EnergyUnits;
use etforge::rips::{barcode_for_selection, build_rips_filtration, reduce, reduce_and_extract, RipsParams};
use etforge::structure::{Atom, AtomSelector, ProteinStructure};
use etforge::topo::{channel_order, topo_features, ChannelKind, TopoParams};
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const FEATURE_TABLE: [[usize; 5]; 5] = [
    [1, 9, 73, 585, 4681],
    [4, 36, 292, 2340, 18724],
    [10, 90, 730, 5850, 46810],
    [20, 180, 1460, 11700, 93620],
    [35, 315, 2555, 20475, 163835],
];

fn feature_table() -> Outcome {
    for (p, row) in FEATURE_TABLE.iter().enumerate() {
        for (l, &expected) in row.iter().enumerate() {
            let got = feature_count(p, l).map_err(|e| e.to_string())?;
            ensure(got == expected, || format!("(p={p}, L={l}) gave {got}, expected {expected}"))?;
        }
    }
    Ok("25/25 entries".into())
}

fn moment_oracle() -> Outcome {
    let mut rng = rng(2024);
    let (mut worst_direct, mut worst_m2m) = (0.0f64, 0.0f64);
    for s in 0..20 {
        let n = rng.gen_range(50..=500);
        let atoms = random_atoms(n, rng.gen_range(10.0..60.0), &mut rng);
        let (order, levels) = (2 + s % 3, 1 + s % 3);
        let tree = ClusterTree::build(&atoms, levels, order).map_err(|e| e.to_string())?;
        let m2m = tree.with_m2m_moments();
        for (cluster, shifted) in tree.clusters().zip(m2m.clusters()) {
            let charge: f64 = cluster.members.iter().map(|&j| tree.charges()[j].abs()).sum();
            for (slot, k) in tree.terms().indices().iter().enumerate() {
                // Shifts cancel terms of size |q| h^|k|, so that bound is the M2M error scale.
                let bound = charge * cluster.half_width.powi(k.order() as i32);
                let (expected, scale) = direct_moment(&atoms, cluster.center, cluster.half_width, k.0);
                worst_direct = worst_direct.max(relative_to_scale(cluster.moments[slot], expected, scale));
                worst_m2m = worst_m2m.max(relative_to_scale(shifted.moments[slot], cluster.moments[slot], bound));
            }
        }
    }
    ensure(worst_direct <= 1e-12, || format!("direct moment error {worst_direct:.3e} > 1e-12"))?;
    ensure(worst_m2m <= 1e-10, || format!("M2M error {worst_m2m:.3e} > 1e-10"))?;
    Ok(format!("max rel err direct {worst_direct:.1e}, M2M {worst_m2m:.1e}"))
}

fn treecode_accuracy() -> Outcome {
    let mut rng = rng(1000);
    let atoms: Vec<Atom> = (0..1000)
        .map(|i| {
            let p = [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)];
            Atom::new(i + 1, "C", p, 1.0, 1.7)
        })
        .collect();
    let direct = coulomb_energy_direct(&atoms, 1.0, 1.0).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for order in [0, 2, 4, 6, 8] {
        let params = TreecodeParams { order, levels: 4, theta: 0.5, ..Default::default() };
        let e = coulomb_energy_treecode(&atoms, &params).map_err(|e| e.to_string())?;
        errors.push(((e - direct) / direct).abs());
    }
    ensure(errors[2] < 1e-3, || format!("p=4 relative error {:.3e} >= 1e-3", errors[2]))?;
    // Past the float floor further orders cannot improve; allow round-off there.
    for w in errors.windows(2) {
        ensure(w[1] <= w[0].max(1e-13), || format!("error not monotone over p: {errors:?}"))?;
    }
    let limit = TreecodeParams { order: 4, levels: 4, theta: 1e-9, ..Default::default() };
    let e = coulomb_energy_treecode(&atoms, &limit).map_err(|e| e.to_string())?;
    let limit_err = ((e - direct) / direct).abs();
    ensure(limit_err <= 1e-12, || format!("theta->0 error {limit_err:.3e} > 1e-12"))?;
    Ok(format!(
        "errors p=0..8: {}; theta->0 {limit_err:.1e}",
        errors.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", ")
    ))
}

fn barcode_bars(points: &[[f64; 3]], scale: f64) -> std::result::Result<Vec<Vec<(f64, f64)>>, String> {
    let params = RipsParams { max_scale: scale, max_dim: 3, ..Default::default() };
    let f = build_rips_filtration(points, &params).map_err(|e| e.to_string())?;
    Ok(reduce_and_extract(&f).into_iter().map(|b| b.bars).collect())
}

fn euler_identity(points: &[[f64; 3]], scale: f64) -> std::result::Result<(), String> {
    let params = RipsParams { max_scale: scale, max_dim: 3, ..Default::default() };
    let f = build_rips_filtration(points, &params).map_err(|e| e.to_string())?;
    let sign = |d: usize| if d % 2 == 0 { 1i64 } else { -1 };
    let chi: i64 = f.simplices.iter().map(|s| sign(s.dim())).sum();
    let reduction = reduce(&f, true);
    let betti: i64 = reduction.essential.iter().map(|&i| sign(f.simplices[i].dim())).sum();
    ensure(chi == betti, || format!("Euler characteristic {chi} != alternating essential count {betti}"))
}

fn persistence_oracle() -> Outcome {
    let s2 = 2f64.sqrt();
    let h = 3f64.sqrt() / 2.0;
    let canonical: Vec<(&str, Vec<[f64; 3]>, usize, Vec<(f64, f64)>)> = vec![
        ("pair", vec![[0.0; 3], [1.0, 0.0, 0.0]], 0, vec![(0.0, 1.0), (0.0, f64::INFINITY)]),
        ("triangle", vec![[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]], 1, vec![]),
        (
            "square",
            vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            1,
            vec![(1.0, s2)],
        ),
        (
            "octahedron",
            vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            2,
            vec![(s2, 2.0)],
        ),
    ];
    for (name, points, dim, expected) in &canonical {
        let got = barcode_bars(points, 10.0)?;
        ensure(got == rank_oracle_barcodes(points, 10.0, 3), || format!("{name}: differs from rank oracle"))?;
        let bars = &got[*dim];
        let matches = bars.len() == expected.len()
            && bars.iter().zip(expected).all(|(a, b)| (a.0 - b.0).abs() < 1e-12 && (a.1 == b.1 || (a.1 - b.1).abs() < 1e-12));
        ensure(matches, || format!("{name}: H{dim} = {bars:?}, expected {expected:?}"))?;
        euler_identity(points, 10.0)?;
    }
    let mut rng = rng(4);
    for trial in 0..50 {
        let (points, scale) = random_cloud(&mut rng, 12);
        let got = barcode_bars(&points, scale)?;
        let oracle = rank_oracle_barcodes(&points, scale, 3);
        ensure(got == oracle, || format!("random cloud {trial} ({} points): {got:?} vs {oracle:?}", points.len()))?;
        euler_identity(&points, scale)?;
    }
    Ok("4 canonical + 50 random clouds exact, Euler identity holds".into())
}

fn synthetic_structure(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> ProteinStructure {
    let names = ["C", "CA", "N", "O", "S", "H"];
    let atoms = (0..n)
        .map(|i| {
            let p = [rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0)];
            Atom::new(i as i64 + 1, names[i % names.len()], p, rng.gen_range(-0.8..0.8), 1.5)
        })
        .collect();
    ProteinStructure::new(format!("syn{n}"), atoms).unwrap()
}

fn topo_vector() -> Outcome {
    let mut rng = rng(5);
    let params = TopoParams::default();
    let rips = RipsParams { max_scale: params.filtration_scale, max_dim: 3, ..Default::default() };
    for n in [12, 18, 24] {
        let s = synthetic_structure(&mut rng, n);
        let v = topo_features(&s, &params).map_err(|e| e.to_string())?;
        ensure(v.len() == 1200 && v.channels.len() == 12, || format!("vector length {}", v.len()))?;
        ensure(v.channels.iter().map(|c| c.0).eq(channel_order()), || "channel order".into())?;
        for selector in [AtomSelector::AllCarbon, AtomSelector::AllHeavy] {
            let bars = barcode_for_selection(&s, selector, &rips).map_err(|e| e.to_string())?;
            for dim in [1usize, 2] {
                let finite = bars[dim].finite_count() as u32;
                for kind in [ChannelKind::Birth, ChannelKind::Death] {
                    let total: u32 = v
                        .channels
                        .iter()
                        .find(|(k, _)| k.selector == selector && k.dim == dim && k.kind == kind)
                        .map(|(_, c)| c.counts.iter().sum())
                        .unwrap();
                    ensure(total == finite, || format!("{selector:?} H{dim} {kind:?} total {total} != {finite}"))?;
                }
            }
        }
        let base = v.flat();
        for _ in 0..5 {
            let rot = rotation(&mut rng);
            let shift = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            let moved = s
                .atoms()
                .iter()
                .map(|a| Atom { position: apply(rot, shift, a.position), ..a.clone() })
                .collect();
            let moved = ProteinStructure::new("moved", moved).unwrap();
            let w = topo_features(&moved, &params).map_err(|e| e.to_string())?.flat();
            ensure(w == base, || format!("{n}-atom structure changed under rigid motion"))?;
        }
    }
    Ok("1200 entries, totals match, invariant under 5 rotations x 3 structures".into())
}

fn gb_round_trips() -> Outcome {
    let mut rng = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let q: f64 = rng.gen_range(-2.0..2.0);
        if q.abs() < 1e-3 {
            continue;
        }
        let a = rng.gen_range(0.5..10.0);
        let (eps1, eps2) = (rng.gen_range(1.0..4.0), rng.gen_range(10.0..80.0));
        let e = born_sphere_energy(q, a, eps1, eps2, 1.0).map_err(|e| e.to_string())?;
        let back = perfect_born_radius(q, e, eps1, eps2, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max(((back - a) / a).abs());
    }
    ensure(worst <= 1e-12, || format!("round trip error {worst:.3e}"))?;
    let f = |r, ri, rj| f_gb(r, ri, rj).map_err(|e| e.to_string());
    ensure(f(0.0, 2.0, 2.0)? == 2.0, || "f_gb(0, R, R) != R".into())?;
    ensure(f(0.0, 1.0, 4.0)? == 2.0, || "f_gb(0, Ri, Rj) != sqrt(Ri Rj)".into())?;
    ensure(f(1000.0, 1.0, 1.0)? == 1000.0, || "f_gb(r >> R) != r".into())?;
    let atom = Atom::new(1, "C", [0.3, -1.0, 2.0], 1.0, 2.0);
    let ctx = GbContext::new(1.0, 80.0, vec![2.0], 1.0).map_err(|e| e.to_string())?;
    let single = gb_solvation_energy(&[atom], &ctx).map_err(|e| e.to_string())?;
    ensure((single + 0.246875).abs() <= 1e-15, || format!("single atom {single}, expected -0.246875"))?;
    Ok(format!("round trip {worst:.1e}, limits exact, single atom {single}"))
}

fn pipeline() -> Outcome {
    let mut rng = rng(7);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..6).map(|j| rng.gen_range(-1e3..1e3) * 10f64.powi(j - 3)).collect())
        .collect();
    let scaler = ScalerParams::fit(&rows).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for row in &rows {
        let back = scaler.invert(&scaler.apply(row));
        for (x, y) in row.iter().zip(&back) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-12, || format!("scaler round trip {worst:.3e}"))?;

    let keep = iqr_filter(&[1.0, 2.0, 3.0, 4.0, 100.0]).map_err(|e| e.to_string())?;
    ensure(keep == [true, true, true, true, false], || format!("IQR kept {keep:?}"))?;

    let m = metrics(&[1.0, 3.0], &[2.0, 2.0]).map_err(|e| e.to_string())?;
    let mape = m.mape.ok_or("MAPE undefined")?;
    ensure(m.mse == 1.0 && m.r2 == 0.0 && (mape - 200.0 / 3.0).abs() <= 1e-9, || format!("metrics {m:?}"))?;

    let params = FeatureParams::default();
    let mut records = Vec::new();
    for n in [6, 9, 14] {
        let s = synthetic_structure(&mut rng, n);
        let mut r = featurize(&s, &params).map_err(|e| e.to_string())?.into_record(&s.id);
        r.labels = Labels { e_coul: Some(rng.gen_range(-500.0..-10.0)), e_solv: (n != 9).then_some(-1.0 / 3.0) };
        records.push(r);
    }
    let manifest = manifest_for(&params, 0.5, 1.0, EnergyUnits::KcalPerMol, 42).map_err(|e| e.to_string())?;
    let dataset = DatasetMatrix { records, manifest };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export_dataset(&dataset, a.path()).map_err(|e| e.to_string())?;
    let imported = import_dataset(a.path()).map_err(|e| e.to_string())?;
    ensure(imported == dataset, || "imported dataset differs".into())?;
    export_dataset(&imported, b.path()).map_err(|e| e.to_string())?;
    for file in [FEATURES_FILE, LABELS_FILE, MANIFEST_FILE] {
        let same = std::fs::read(a.path().join(file)).ok() == std::fs::read(b.path().join(file)).ok();
        ensure(same, || format!("{file} not byte-identical after re-export"))?;
    }
    Ok(format!("scaler {worst:.1e}, IQR drops 100, MSE 1 R2 0 MAPE {mape:.6}%, export byte-stable"))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 7] = [
        ("feature-count table", 1, feature_table),
        ("moment oracle", 30, moment_oracle),
        ("treecode accuracy", 60, treecode_accuracy),
        ("persistence oracle", 120, persistence_oracle),
        ("topological feature vector", 60, topo_vector),
        ("GB round trips", 1, gb_round_trips),
        ("pipeline", 5, pipeline),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(budget) => {
                Err(format!("{detail}; exceeded {budget} s budget"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({:.2} s / {budget} s): {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name} ({:.2} s / {budget} s): {detail}", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
