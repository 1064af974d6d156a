//! Shared fixtures for the integration tests: boundary OBJ builders, an
//! end-to-end pipeline driver, and independent ray-cast containment oracles.

#![allow(dead_code)]

use simplexflow::domain::Dimension;
use simplexflow::geom::{vec3, Vec3};
use simplexflow::postopt::{self, PostOptConfig};
use simplexflow::spatial::UniformGrid;
use simplexflow::triangulate::{self, QualityReport, SimplexMesh};
use simplexflow::{flow, MeshDomain, Result, SizeField};
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// Boundary geometry builders (OBJ source text, world coordinates).

/// Axis-aligned rectangle [0,w]×[0,h] as two triangles.
pub fn rectangle_obj(w: f64, h: f64) -> String {
    format!(
        "v 0 0 0\nv {w} 0 0\nv {w} {h} 0\nv 0 {h} 0\nf 1 2 3\nf 1 3 4\n"
    )
}

/// L-shaped plate: a 50×50 square over [0,50]×[−50,0] with the corner block
/// [0,10]×[−10,0] removed; fanned from the concave corner (10,−10).
pub fn lshape_obj() -> String {
    concat!(
        "v 10 -10 0\n",
        "v 50 0 0\n",
        "v 10 0 0\n",
        "v 50 -50 0\n",
        "v 0 -50 0\n",
        "v 0 -10 0\n",
        "f 1 2 3\n",
        "f 1 4 2\n",
        "f 1 5 4\n",
        "f 1 6 5\n",
    )
    .to_string()
}

/// Axis-aligned cuboid [0,w]×[0,d]×[0,h] with outward-facing triangles.
pub fn cuboid_obj(w: f64, d: f64, h: f64) -> String {
    let mut s = String::new();
    for &(x, y, z) in &[
        (0.0, 0.0, 0.0),
        (w, 0.0, 0.0),
        (w, d, 0.0),
        (0.0, d, 0.0),
        (0.0, 0.0, h),
        (w, 0.0, h),
        (w, d, h),
        (0.0, d, h),
    ] {
        writeln!(s, "v {x} {y} {z}").unwrap();
    }
    for f in [
        [1, 4, 3],
        [1, 3, 2],
        [5, 6, 7],
        [5, 7, 8],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 4, 8],
        [3, 8, 7],
        [4, 1, 5],
        [4, 5, 8],
    ] {
        writeln!(s, "f {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

/// Closed n-gonal prism approximating a cylinder of radius `r` spanning
/// z ∈ [0, height], with fan-triangulated caps.
pub fn cylinder_obj(r: f64, height: f64, n: usize) -> String {
    let mut s = String::new();
    for ring in 0..2 {
        let z = height * ring as f64;
        for k in 0..n {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            writeln!(s, "v {:.12} {:.12} {:.12}", r * a.cos(), r * a.sin(), z).unwrap();
        }
    }
    writeln!(s, "v 0 0 0").unwrap();
    writeln!(s, "v 0 0 {height}").unwrap();
    let bot_c = 2 * n + 1;
    let top_c = 2 * n + 2;
    for k in 0..n {
        let k1 = (k + 1) % n;
        // Side wall quad, outward.
        writeln!(s, "f {} {} {}", k + 1, k1 + 1, n + k1 + 1).unwrap();
        writeln!(s, "f {} {} {}", k + 1, n + k1 + 1, n + k + 1).unwrap();
        // Caps: bottom faces −z, top faces +z.
        writeln!(s, "f {} {} {}", bot_c, k1 + 1, k + 1).unwrap();
        writeln!(s, "f {} {} {}", top_c, n + k + 1, n + k1 + 1).unwrap();
    }
    s
}

// ---------------------------------------------------------------------------
// Pipeline driver mirroring the CLI orchestration.

/// How the size field is built for a run (world coordinates).
pub enum FieldSpec {
    Uniform(f64),
    /// `(base, cutoff, falloff)` of the radial preset.
    Radial(f64, f64, f64),
    /// Discrete field from `(x, y, z, h)` anchors; `vertex_h` additionally
    /// anchors every original boundary vertex, like the CLI's `--h` flag
    /// alongside an anchor file.
    Anchors(Vec<[f64; 4]>, Option<f64>),
}

pub struct RunOutput {
    pub domain: MeshDomain,
    pub mesh: SimplexMesh,
    pub report: QualityReport,
    pub converged: bool,
}

impl RunOutput {
    /// Mesh node positions mapped back to world coordinates.
    pub fn world_nodes(&self) -> Vec<Vec3> {
        self.mesh.nodes.iter().map(|&p| self.domain.to_world(p)).collect()
    }
}

/// Load the OBJ, build the field, run the flow and (3D) the post-optimizer,
/// and return the final mesh with its quality report.
pub fn run_pipeline(
    obj: &str,
    label: &str,
    spec: &FieldSpec,
    fixed_world: &[Vec3],
    seed: u64,
) -> Result<RunOutput> {
    let mut domain = MeshDomain::from_obj_str(obj, label)?;
    let field = match spec {
        FieldSpec::Uniform(h) => SizeField::uniform(*h),
        FieldSpec::Radial(base, cutoff, falloff) => {
            SizeField::radial_linear(*base, *cutoff, *falloff)
        }
        FieldSpec::Anchors(rows, vertex_h) => {
            let mut anchors: Vec<(Vec3, f64)> = rows
                .iter()
                .map(|&[x, y, z, h]| (domain.to_sim(vec3(x, y, z)), h))
                .collect();
            if let Some(h) = vertex_h {
                let tol = 1e-9 * (domain.bbox_max - domain.bbox_min).norm();
                for (vi, &p) in domain.vertices.iter().enumerate() {
                    if domain.is_boundary_vertex[vi]
                        && !anchors.iter().any(|&(q, _)| q.dist(p) <= tol)
                    {
                        anchors.push((p, *h));
                    }
                }
            }
            SizeField::build_discrete(&domain, &anchors)?
        }
    };
    let h_min = field.h_min();
    domain.augment_boundary(h_min);
    let fixed_sim: Vec<Vec3> = fixed_world.iter().map(|&p| domain.to_sim(p)).collect();

    let flow_cfg = flow::FlowConfig {
        seed,
        ..flow::FlowConfig::default()
    };
    let result = flow::run(&domain, &field, &fixed_sim, &flow_cfg)?;
    let mut converged = result.converged;

    let boundary_grid = UniformGrid::build(domain.boundary_points(), 2.0 * h_min);
    let mesh = if domain.dimension == Dimension::Solid3D {
        let outcome = postopt::hybrid_optimize(
            &result.positions,
            &result.boundary_flags,
            &result.fixed_flags,
            &domain,
            &field,
            &PostOptConfig::default(),
        )?;
        converged = converged && outcome.converged;
        outcome.mesh
    } else {
        triangulate::triangulate_in_domain(
            &result.positions,
            &result.boundary_flags,
            &result.fixed_flags,
            &domain,
            &boundary_grid,
            h_min,
        )?
    };
    let report = triangulate::quality_report(&mesh, &field)?;
    Ok(RunOutput {
        domain,
        mesh,
        report,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Independent containment oracles (brute-force ray casting over the raw
// boundary data; no spatial index, no normal-side tests).

/// 2D even-odd test: cast a ray in a fixed skew direction and count boundary
/// edge crossings. Returns `None` when the point is within `eps` of an edge.
pub fn oracle_inside_2d(domain: &MeshDomain, p: Vec3, eps: f64) -> Option<bool> {
    let dir = vec3(0.923879532511_f64, 0.382683432365_f64, 0.0); // cos/sin 22.5°
    let mut crossings = 0usize;
    for e in &domain.boundary_edges {
        let (a, b) = (domain.vertices[e[0]], domain.vertices[e[1]]);
        if point_segment_distance_2d(p, a, b) <= eps {
            return None;
        }
        // Solve p + t·dir = a + s·(b−a).
        let d = b - a;
        let denom = dir.x * (-d.y) - dir.y * (-d.x);
        if denom.abs() < 1e-14 {
            continue;
        }
        let rx = a.x - p.x;
        let ry = a.y - p.y;
        let t = (rx * (-d.y) - ry * (-d.x)) / denom;
        let s = (dir.x * ry - dir.y * rx) / denom;
        if t > 0.0 && (0.0..=1.0).contains(&s) {
            crossings += 1;
        }
    }
    Some(crossings % 2 == 1)
}

fn point_segment_distance_2d(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    };
    p.dist(a + d * t)
}

/// 3D even-odd test: cast a ray in a fixed skew direction and count triangle
/// intersections. Returns `None` for points within `eps` of the surface or
/// when the ray grazes a triangle edge.
pub fn oracle_inside_3d(domain: &MeshDomain, p: Vec3, eps: f64) -> Option<bool> {
    let dir = vec3(0.577350269190, 0.211324865405, 0.788675134595);
    let mut crossings = 0usize;
    for t in &domain.triangles {
        let (a, b, c) = (
            domain.vertices[t[0]],
            domain.vertices[t[1]],
            domain.vertices[t[2]],
        );
        match ray_triangle(p, dir, a, b, c, eps) {
            RayHit::Miss => {}
            RayHit::Hit => crossings += 1,
            RayHit::Degenerate => return None,
        }
    }
    Some(crossings % 2 == 1)
}

enum RayHit {
    Miss,
    Hit,
    Degenerate,
}

fn ray_triangle(orig: Vec3, dir: Vec3, a: Vec3, b: Vec3, c: Vec3, eps: f64) -> RayHit {
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-12 {
        return RayHit::Miss;
    }
    let inv = 1.0 / det;
    let tv = orig - a;
    let u = tv.dot(pv) * inv;
    let qv = tv.cross(e1);
    let v = dir.dot(qv) * inv;
    let t = e2.dot(qv) * inv;
    let edge_tol = 1e-9;
    if u < -edge_tol || v < -edge_tol || u + v > 1.0 + edge_tol {
        return RayHit::Miss;
    }
    if t.abs() <= eps {
        return RayHit::Degenerate; // point effectively on the surface
    }
    if t < 0.0 {
        return RayHit::Miss;
    }
    if u < edge_tol || v < edge_tol || u + v > 1.0 - edge_tol {
        return RayHit::Degenerate; // grazing an edge: crossing parity unsafe
    }
    RayHit::Hit
}
