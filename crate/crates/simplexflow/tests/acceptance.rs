//! End-to-end acceptance gate: each test reproduces one benchmark scenario
//! (or property bundle) and prints a single PASS/FAIL line. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines for
//! passing criteria too.

mod common;

use common::{FieldSpec, RunOutput};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use simplexflow::containment::{self, Location};
use simplexflow::domain::Dimension;
use simplexflow::flow;
use simplexflow::geom::{vec3, Vec3};
use simplexflow::postopt::tet_quality;
use simplexflow::spatial::UniformGrid;
use simplexflow::triangulate;
use simplexflow::MeshDomain;
use std::sync::OnceLock;
use std::time::Instant;

const SEED: u64 = 0;

fn verdict(name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {name}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name}: {detail}");
}

/// Outer-boundary samples (spacing ≈ 2.5·h) for the nonuniform rectangle:
/// "edge length 10 at the boundary, 20 at the centroid".
fn rect_nonuniform_spec() -> FieldSpec {
    let mut rows = vec![[50.0, 25.0, 0.0, 20.0]];
    for x in [25.0, 50.0, 75.0] {
        rows.push([x, 0.0, 0.0, 10.0]);
        rows.push([x, 50.0, 0.0, 10.0]);
    }
    rows.push([0.0, 25.0, 0.0, 10.0]);
    rows.push([100.0, 25.0, 0.0, 10.0]);
    FieldSpec::Anchors(rows, Some(10.0))
}

/// Outer-edge midpoints at 10 plus the refined fixed node at 2.
fn lshape_nonuniform_spec() -> FieldSpec {
    FieldSpec::Anchors(
        vec![
            [30.0, 0.0, 0.0, 10.0],
            [50.0, -25.0, 0.0, 10.0],
            [25.0, -50.0, 0.0, 10.0],
            [0.0, -30.0, 0.0, 10.0],
            [10.0, -10.0, 0.0, 2.0],
        ],
        Some(10.0),
    )
}

fn cuboid_run() -> &'static (RunOutput, f64) {
    static RUN: OnceLock<(RunOutput, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let out = common::run_pipeline(
            &common::cuboid_obj(100.0, 100.0, 80.0),
            "cuboid",
            &FieldSpec::Uniform(20.0),
            &[],
            SEED,
        )
        .expect("cuboid pipeline");
        (out, t0.elapsed().as_secs_f64())
    })
}

fn cylinder_run() -> &'static (RunOutput, f64) {
    static RUN: OnceLock<(RunOutput, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let out = common::run_pipeline(
            &common::cylinder_obj(50.0, 40.0, 64),
            "cylinder",
            &FieldSpec::Radial(17.5, 35.0, 0.4),
            &[vec3(0.0, 0.0, 0.0), vec3(0.0, 0.0, 20.0), vec3(0.0, 0.0, 40.0)],
            SEED,
        )
        .expect("cylinder pipeline");
        (out, t0.elapsed().as_secs_f64())
    })
}

/// Dihedral-angle gate shared by the 3D scenarios: ≥ 97% in [30°, 150°],
/// none below 12° or above 165°, and at most 0.5% in [150°, 165°].
fn dihedral_gate(angles: &[f64]) -> (bool, String) {
    let total = angles.len() as f64;
    let good = angles.iter().filter(|&&a| (30.0..=150.0).contains(&a)).count() as f64;
    let very_low = angles.iter().filter(|&&a| a < 12.0).count();
    let very_high = angles.iter().filter(|&&a| a > 165.0).count();
    let high = angles.iter().filter(|&&a| (150.0..=165.0).contains(&a)).count() as f64;
    let ok = good / total >= 0.97 && very_low == 0 && very_high == 0 && high / total <= 0.005;
    (
        ok,
        format!(
            "{:.2}% of dihedrals in [30°,150°], {very_low} below 12°, {very_high} above 165°, {:.2}% in [150°,165°]",
            100.0 * good / total,
            100.0 * high / total
        ),
    )
}

#[test]
fn criterion_1_rectangle_uniform() {
    let t0 = Instant::now();
    let out = common::run_pipeline(
        &common::rectangle_obj(100.0, 50.0),
        "rectangle",
        &FieldSpec::Uniform(10.0),
        &[],
        SEED,
    )
    .expect("rectangle pipeline");
    let secs = t0.elapsed().as_secs_f64();
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let in_range = out
        .report
        .angles
        .iter()
        .all(|&a| (25.0..=110.0).contains(&a));
    let tight = out
        .report
        .angles
        .iter()
        .filter(|&&a| (30.0..=100.0).contains(&a))
        .count() as f64
        / out.report.angles.len() as f64;
    let ok = (63..=85).contains(&n)
        && e.abs() <= 0.02
        && in_range
        && tight >= 0.95
        && out.converged
        && secs <= 60.0;
    verdict(
        "1 (rectangle 100×50, h = 10)",
        ok,
        &format!(
            "{n} nodes, e_avg {:+.3}%, angles [{:.1}°, {:.1}°], {:.1}% in [30°,100°], {secs:.1} s",
            100.0 * e,
            out.report.min_angle,
            out.report.max_angle,
            100.0 * tight
        ),
    );
}

#[test]
fn criterion_2_rectangle_nonuniform() {
    let out = common::run_pipeline(
        &common::rectangle_obj(100.0, 50.0),
        "rectangle",
        &rect_nonuniform_spec(),
        &[],
        SEED,
    )
    .expect("rectangle nonuniform pipeline");
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let ok = (54..=75).contains(&n) && e.abs() <= 0.02 && out.converged;
    verdict(
        "2 (rectangle, boundary 10 / centroid 20)",
        ok,
        &format!("{n} nodes, e_avg {:+.3}%", 100.0 * e),
    );
}

#[test]
fn criterion_3_lshape_fixed_node() {
    let fixed = vec3(10.0, -10.0, 0.0);
    let out = common::run_pipeline(
        &common::lshape_obj(),
        "lshape",
        &FieldSpec::Uniform(10.0),
        &[fixed],
        SEED,
    )
    .expect("lshape pipeline");
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let world = out.world_nodes();
    let exact = out
        .mesh
        .fixed_flags
        .iter()
        .zip(&world)
        .any(|(&f, &p)| f && p.x == fixed.x && p.y == fixed.y && p.z == fixed.z);
    let ok = exact && (30..=43).contains(&n) && e.abs() <= 0.03 && out.converged;
    verdict(
        "3 (L-shape, fixed node (10, −10))",
        ok,
        &format!(
            "{n} nodes, e_avg {:+.3}%, fixed node exact = {exact}",
            100.0 * e
        ),
    );
}

#[test]
fn criterion_4_lshape_nonuniform() {
    let fixed = vec3(10.0, -10.0, 0.0);
    let out = common::run_pipeline(
        &common::lshape_obj(),
        "lshape",
        &lshape_nonuniform_spec(),
        &[fixed],
        SEED,
    )
    .expect("lshape nonuniform pipeline");
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let ok = (55..=80).contains(&n) && e.abs() <= 0.04 && out.converged;
    verdict(
        "4 (L-shape, outer edges 10 / fixed node 2)",
        ok,
        &format!("{n} nodes, e_avg {:+.3}%", 100.0 * e),
    );
}

#[test]
fn criterion_5_cuboid_uniform() {
    let (out, secs) = cuboid_run();
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let min_q = out.report.min_quality.expect("tet mesh has quality");
    let (dihedral_ok, dihedral_detail) = dihedral_gate(&out.report.angles);
    let ok = (215..=300).contains(&n)
        && e.abs() <= 0.02
        && dihedral_ok
        && min_q >= 0.3
        && out.converged
        && *secs <= 600.0;
    verdict(
        "5 (cuboid 100×100×80, h = 20)",
        ok,
        &format!(
            "{n} nodes, e_avg {:+.3}%, min q {min_q:.3}, {dihedral_detail}, {secs:.1} s",
            100.0 * e
        ),
    );
}

#[test]
fn criterion_6_cylinder_radial() {
    let (out, secs) = cylinder_run();
    let n = out.mesh.nodes.len();
    let e = out.report.e_avg;
    let min_q = out.report.min_quality.expect("tet mesh has quality");
    let (dihedral_ok, dihedral_detail) = dihedral_gate(&out.report.angles);
    let ok = (460..=630).contains(&n)
        && e.abs() <= 0.03
        && dihedral_ok
        && min_q >= 0.3
        && out.converged;
    verdict(
        "6 (cylinder r = 50 × 40, radial field)",
        ok,
        &format!(
            "{n} nodes, e_avg {:+.3}%, min q {min_q:.3}, {dihedral_detail}, {secs:.1} s",
            100.0 * e
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: property bundle.

#[test]
fn criterion_7a_kernel_shape() {
    let alpha = 1.0 / 6.0;
    let mut ok = true;
    // Continuity at the piece seams and non-negativity over the support.
    for q0 in [1.0, 2.0] {
        let eps = 1e-9;
        let below = flow::kernel(q0 - eps, alpha);
        let above = flow::kernel(q0 + eps, alpha);
        ok &= (below - above).abs() < 1e-6;
    }
    for k in 0..=2000 {
        let q = 2.0 * k as f64 / 2000.0;
        ok &= flow::kernel(q, alpha) >= 0.0;
    }
    verdict(
        "7a (kernel continuity and sign)",
        ok,
        "W continuous at q ∈ {1, 2}, W ≥ 0 on [0, 2]",
    );
}

#[test]
fn criterion_7b_viscous_decay_and_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (m, dt, k_v) = (1.0, 1.0, 0.08);
    let mut ok = true;
    for _ in 0..200 {
        let v = vec3(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        // Semi-implicit Euler with only the viscous force.
        let v1 = v + flow::viscous_force(v, m, dt, k_v) * (dt / m);
        ok &= (v1 - v * (1.0 - k_v)).norm() <= 1e-15 * v.norm().max(1.0);

        let n = vec3(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let Some(n) = n.normalized() else { continue };
        let r = containment::reflect_velocity(v, n);
        ok &= (r.norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0);
        ok &= (containment::reflect_velocity(r, n) - v).norm() <= 1e-12 * v.norm().max(1.0);
    }
    verdict(
        "7b (viscous decay and reflection)",
        ok,
        "one free step scales speed by 1−k_v; reflection preserves norm and is an involution",
    );
}

#[test]
fn criterion_7c_containment_oracle() {
    let cases: [(&str, String, f64); 4] = [
        ("rectangle", common::rectangle_obj(100.0, 50.0), 10.0),
        ("lshape", common::lshape_obj(), 10.0),
        ("cuboid", common::cuboid_obj(100.0, 100.0, 80.0), 20.0),
        ("cylinder", common::cylinder_obj(50.0, 40.0, 64), 15.0),
    ];
    let mut worst = 1.0f64;
    let mut detail = String::new();
    for (name, obj, h_min) in &cases {
        let mut domain = MeshDomain::from_obj_str(obj, name).expect("domain");
        domain.augment_boundary(*h_min);
        let grid = UniformGrid::build(domain.boundary_points(), 2.0 * h_min);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lo = domain.bbox_min;
        let hi = domain.bbox_max;
        let pad = (hi - lo).norm() * 0.05;
        let eps = 1e-7 * (hi - lo).norm();
        let (mut agree, mut total) = (0usize, 0usize);
        for _ in 0..10_000 {
            let p = vec3(
                rng.gen_range(lo.x - pad..hi.x + pad),
                rng.gen_range(lo.y - pad..hi.y + pad),
                if domain.dimension == Dimension::Planar2D {
                    0.0
                } else {
                    rng.gen_range(lo.z - pad..hi.z + pad)
                },
            );
            let expected = match domain.dimension {
                Dimension::Planar2D => common::oracle_inside_2d(&domain, p, eps),
                Dimension::Solid3D => common::oracle_inside_3d(&domain, p, eps),
            };
            let Some(expected) = expected else { continue };
            total += 1;
            match containment::locate_unbounded(p, &grid, &domain, *h_min) {
                Location::Inside => agree += expected as usize,
                Location::Outside => agree += !expected as usize,
                Location::OnBoundary => agree += 1, // within snap tolerance of the wall
            }
        }
        let rate = agree as f64 / total as f64;
        worst = worst.min(rate);
        if !detail.is_empty() {
            detail.push_str(", ");
        }
        detail.push_str(&format!("{name} {:.3}%", 100.0 * rate));
    }
    verdict(
        "7c (containment vs ray-cast oracle)",
        worst >= 0.9999,
        &detail,
    );
}

#[test]
fn criterion_7d_delaunay_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ok = true;
    for case in 0..50 {
        let three_d = case % 2 == 1;
        let n = if three_d {
            rng.gen_range(8..=120)
        } else {
            rng.gen_range(4..=200)
        };
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                vec3(
                    rng.gen_range(0.0..100.0),
                    rng.gen_range(0.0..100.0),
                    if three_d { rng.gen_range(0.0..100.0) } else { 0.0 },
                )
            })
            .collect();
        let dim = if three_d {
            Dimension::Solid3D
        } else {
            Dimension::Planar2D
        };
        let Ok(dt) = triangulate::delaunay(&pts, dim) else {
            continue; // degenerate random instance (e.g. cocircular); not a correctness case
        };
        if three_d {
            for t in &dt.tets {
                let [a, b, c, d] = t.map(|i| pts[i]);
                for (k, &p) in pts.iter().enumerate() {
                    if t.contains(&k) {
                        continue;
                    }
                    ok &= simplexflow::geom::insphere(a, b, c, d, p) <= 0;
                }
            }
        } else {
            for t in &dt.tris {
                let [a, b, c] = t.map(|i| pts[i]);
                for (k, &p) in pts.iter().enumerate() {
                    if t.contains(&k) {
                        continue;
                    }
                    ok &= simplexflow::geom::incircle(a, b, c, p) <= 0;
                }
            }
        }
    }
    verdict(
        "7d (Delaunay empty circumsphere, 50 instances)",
        ok,
        "no point strictly inside any circumcircle/circumsphere",
    );
}

#[test]
fn criterion_7e_grid_neighbor_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cell = 7.0;
    let pts: Vec<Vec3> = (0..400)
        .map(|_| {
            vec3(
                rng.gen_range(0.0..60.0),
                rng.gen_range(0.0..60.0),
                rng.gen_range(0.0..60.0),
            )
        })
        .collect();
    let grid = UniformGrid::build(pts.iter().copied().enumerate(), cell);
    let mut ok = true;
    for _ in 0..200 {
        let q = vec3(
            rng.gen_range(-5.0..65.0),
            rng.gen_range(-5.0..65.0),
            rng.gen_range(-5.0..65.0),
        );
        let found = grid.neighbors(q);
        // Superset of the within-cell-radius ball, subset of the 3×3×3 block.
        for (i, p) in pts.iter().enumerate() {
            if p.dist(q) <= cell {
                ok &= found.contains(&i);
            }
        }
        let max_reach = 2.0 * cell * 3f64.sqrt();
        for &i in &found {
            ok &= pts[i].dist(q) <= max_reach;
        }
    }
    verdict(
        "7e (spatial grid neighbor bounds)",
        ok,
        "one-ring query ⊇ radius-cell ball and ⊆ 3×3×3 block",
    );
}

#[test]
fn criterion_7f_tet_quality_invariants() {
    // Regular tetrahedron with unit edge.
    let a = vec3(0.0, 0.0, 0.0);
    let b = vec3(1.0, 0.0, 0.0);
    let c = vec3(0.5, 3f64.sqrt() / 2.0, 0.0);
    let d = vec3(0.5, 3f64.sqrt() / 6.0, (2f64 / 3.0).sqrt());
    let mut ok = (tet_quality(a, b, c, d) - 1.0).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..100 {
        let p: Vec<Vec3> = (0..4)
            .map(|_| {
                vec3(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let q0 = tet_quality(p[0], p[1], p[2], p[3]);
        for lambda in [1e-3, 1.0, 1e3] {
            let q = tet_quality(
                p[0] * lambda,
                p[1] * lambda,
                p[2] * lambda,
                p[3] * lambda,
            );
            ok &= (q - q0).abs() <= 1e-12 + 1e-9 * q0;
        }
        let mut idx = [0, 1, 2, 3];
        for _ in 0..24 {
            idx.shuffle(&mut rng);
            let q = tet_quality(p[idx[0]], p[idx[1]], p[idx[2]], p[idx[3]]);
            ok &= (q - q0).abs() <= 1e-12 + 1e-9 * q0;
        }
    }
    verdict(
        "7f (tet quality invariants)",
        ok,
        "q(regular) = 1 within 1e-12; scale- and permutation-invariant",
    );
}

#[test]
fn criterion_7g_postopt_quality_floor() {
    let (cuboid, _) = cuboid_run();
    let (cylinder, _) = cylinder_run();
    let qc = cuboid.report.min_quality.unwrap();
    let qy = cylinder.report.min_quality.unwrap();
    let ok = cuboid.converged && cylinder.converged && qc >= 0.3 && qy >= 0.3;
    verdict(
        "7g (post-opt convergence, min q ≥ 0.3)",
        ok,
        &format!("cuboid min q {qc:.3}, cylinder min q {qy:.3}"),
    );
}

#[test]
fn criterion_7h_determinism() {
    let run = || {
        common::run_pipeline(
            &common::rectangle_obj(100.0, 50.0),
            "rectangle",
            &FieldSpec::Uniform(10.0),
            &[],
            42,
        )
        .expect("pipeline")
    };
    let (a, b) = (run(), run());
    let ok = a.mesh.nodes.len() == b.mesh.nodes.len()
        && a.mesh
            .nodes
            .iter()
            .zip(&b.mesh.nodes)
            .all(|(&p, &q)| p.x == q.x && p.y == q.y && p.z == q.z)
        && a.mesh.tris == b.mesh.tris;
    verdict(
        "7h (determinism under fixed seed)",
        ok,
        "two identical runs produce bit-identical meshes",
    );
}

#[test]
fn criterion_8_controller_unit_values() {
    let (gain, cap, deadband) = (0.5, 0.25, 0.02);
    let a = flow::update_target_count(100, 0.10, gain, cap, deadband);
    let b = flow::update_target_count(100, 0.90, gain, cap, deadband);
    let hold_lo = flow::update_target_count(100, 0.02, gain, cap, deadband);
    let hold_hi = flow::update_target_count(100, -0.02, gain, cap, deadband);
    let move_out = flow::update_target_count(100, 0.021, gain, cap, deadband);
    let ok = a == 105 && b == 125 && hold_lo == 100 && hold_hi == 100 && move_out > 100;
    verdict(
        "8 (count controller unit behavior)",
        ok,
        &format!("(100, +0.10) → {a}, (100, +0.90) → {b}, deadband holds at |e| = 0.02"),
    );
}
