//! Incremental Delaunay triangulation (2D and 3D) with exact predicates, the
//! simplex mesh container, domain filtering, and quality reporting.
//!
//! Construction is Bowyer-Watson over a far-away super-simplex: each point is
//! located by walking the current triangulation, the conflict region is grown
//! by breadth-first search over face adjacency, and the cavity is refilled
//! with simplices fanning out from the new point. Points exactly on a
//! circumcircle/-sphere count as conflicting, which keeps the cavity boundary
//! strictly visible from the inserted point and never produces degenerate
//! elements, even for grid-aligned input.

use crate::containment::{self, Location};
use crate::domain::{Dimension, MeshDomain};
use crate::geom::{incircle, insphere, orient2d, orient3d, Vec3};
use crate::sizefield::SizeField;
use crate::spatial::UniformGrid;
use crate::{Error, Result};
use std::collections::HashMap;

const NONE: usize = usize::MAX;

/// Facet k is opposite vertex k; orders chosen so the facet "sees" the
/// remaining vertex on its positive side for a CCW triangle / positively
/// oriented tetrahedron.
const FACET_2D: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];
const FACET_3D: [[usize; 3]; 4] = [[1, 3, 2], [0, 2, 3], [0, 3, 1], [0, 1, 2]];

#[derive(Debug, Clone)]
struct Element {
    verts: [usize; 4],
    neigh: [usize; 4],
    alive: bool,
}

#[derive(Debug, Clone)]
pub struct DelaunayResult {
    pub tris: Vec<[usize; 3]>,
    pub tets: Vec<[usize; 4]>,
}

/// Delaunay triangulation of `points` (indices into the input slice).
/// 2D input must lie in the z = 0 plane. Triangles come out CCW, tetrahedra
/// positively oriented. Fully collinear / coplanar input is rejected.
pub fn delaunay(points: &[Vec3], dimension: Dimension) -> Result<DelaunayResult> {
    let dim = match dimension {
        Dimension::Planar2D => 2,
        Dimension::Solid3D => 3,
    };
    if points.len() < dim + 1 {
        return Err(Error::DegenerateInput(format!(
            "{} point(s), need at least {}",
            points.len(),
            dim + 1
        )));
    }
    let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::DegenerateInput(format!("point {i} is not finite")));
        }
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        if let Some(&j) = seen.get(&key) {
            return Err(Error::DegenerateInput(format!(
                "points {j} and {i} coincide exactly"
            )));
        }
        seen.insert(key, i);
    }

    let mut builder = Builder::new(points, dim);
    for i in 0..points.len() {
        builder.insert(i)?;
    }
    builder.extract(points.len())
}

struct Builder {
    all: Vec<Vec3>, // input points followed by the super-simplex vertices
    dim: usize,
    elems: Vec<Element>,
    hint: usize,
}

impl Builder {
    fn new(points: &[Vec3], dim: usize) -> Builder {
        let mut lo = points[0];
        let mut hi = points[0];
        for &p in points {
            lo = lo.min_by_component(p);
            hi = hi.max_by_component(p);
        }
        let center = (lo + hi) / 2.0;
        let r = 1e5 * ((hi - lo).norm()).max(1.0);
        let mut all = points.to_vec();
        let n = points.len();
        let (verts, check_positive): ([usize; 4], bool) = if dim == 2 {
            for k in 0..3 {
                let ang = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::FRAC_PI_3;
                all.push(center + Vec3 { x: ang.cos(), y: ang.sin(), z: 0.0 } * r);
            }
            ([n, n + 1, n + 2, NONE], false)
        } else {
            all.push(center + Vec3 { x: 1.0, y: 1.0, z: 1.0 } * r);
            all.push(center + Vec3 { x: 1.0, y: -1.0, z: -1.0 } * r);
            all.push(center + Vec3 { x: -1.0, y: 1.0, z: -1.0 } * r);
            all.push(center + Vec3 { x: -1.0, y: -1.0, z: 1.0 } * r);
            ([n, n + 1, n + 2, n + 3], true)
        };
        let mut verts = verts;
        if dim == 2 {
            debug_assert!(orient2d(all[verts[0]], all[verts[1]], all[verts[2]]) > 0);
        } else if check_positive && orient3d(all[verts[0]], all[verts[1]], all[verts[2]], all[verts[3]]) < 0 {
            verts.swap(0, 1);
        }
        let root = Element {
            verts,
            neigh: [NONE; 4],
            alive: true,
        };
        Builder {
            all,
            dim,
            elems: vec![root],
            hint: 0,
        }
    }

    fn n_facets(&self) -> usize {
        self.dim + 1
    }

    fn facet(&self, e: usize, k: usize) -> [usize; 3] {
        let v = &self.elems[e].verts;
        if self.dim == 2 {
            let f = FACET_2D[k];
            [v[f[0]], v[f[1]], NONE]
        } else {
            let f = FACET_3D[k];
            [v[f[0]], v[f[1]], v[f[2]]]
        }
    }

    /// Sign of `p` against facet `k` of element `e`; positive means the
    /// element-interior side.
    fn facet_side(&self, e: usize, k: usize, p: Vec3) -> i32 {
        let f = self.facet(e, k);
        if self.dim == 2 {
            orient2d(self.all[f[0]], self.all[f[1]], p)
        } else {
            orient3d(self.all[f[0]], self.all[f[1]], self.all[f[2]], p)
        }
    }

    /// Conflict test: `p` inside or exactly on the circumscribed circle/sphere.
    fn conflicts(&self, e: usize, p: Vec3) -> bool {
        let v = &self.elems[e].verts;
        if self.dim == 2 {
            incircle(self.all[v[0]], self.all[v[1]], self.all[v[2]], p) >= 0
        } else {
            insphere(
                self.all[v[0]],
                self.all[v[1]],
                self.all[v[2]],
                self.all[v[3]],
                p,
            ) >= 0
        }
    }

    /// Find a conflicting element by walking toward `p` from the last insertion
    /// site; falls back to a full scan if the walk stalls.
    fn locate(&self, p: Vec3) -> Result<usize> {
        let mut cur = self.hint;
        if !self.elems[cur].alive {
            cur = match self.elems.iter().position(|e| e.alive) {
                Some(i) => i,
                None => return Err(Error::DegenerateInput("triangulation exhausted".into())),
            };
        }
        let cap = 4 * self.elems.len() + 16;
        'walk: for step in 0..cap {
            let nf = self.n_facets();
            for j in 0..nf {
                // Rotate the facet scan order each step to avoid walk cycles.
                let k = (j + step) % nf;
                if self.facet_side(cur, k, p) < 0 {
                    let nb = self.elems[cur].neigh[k];
                    if nb == NONE {
                        break 'walk;
                    }
                    cur = nb;
                    continue 'walk;
                }
            }
            return Ok(cur); // inside (or on the boundary of) `cur`
        }
        for (i, e) in self.elems.iter().enumerate() {
            if e.alive && self.conflicts(i, p) {
                return Ok(i);
            }
        }
        Err(Error::DegenerateInput(
            "point location failed; no conflicting element".into(),
        ))
    }

    fn insert(&mut self, pi: usize) -> Result<()> {
        let p = self.all[pi];
        let seed = self.locate(p)?;
        debug_assert!(self.conflicts(seed, p));

        // Grow the conflict region; record cavity facets as
        // (facet verts, outer element, dead element owning the facet).
        let mut stack = vec![seed];
        let mut region = vec![seed];
        self.elems[seed].alive = false; // reuse `alive` as the visited flag
        let mut cavity: Vec<([usize; 3], usize, usize)> = Vec::new();
        while let Some(e) = stack.pop() {
            for k in 0..self.n_facets() {
                let nb = self.elems[e].neigh[k];
                if nb == NONE {
                    cavity.push((self.facet(e, k), NONE, e));
                } else if self.elems[nb].alive {
                    if self.conflicts(nb, p) {
                        self.elems[nb].alive = false;
                        region.push(nb);
                        stack.push(nb);
                    } else {
                        cavity.push((self.facet(e, k), nb, e));
                    }
                } else if !region.contains(&nb) {
                    // Already-dead neighbor from an earlier insertion can't
                    // happen; dead flags are only set within this call.
                    unreachable!("stale dead element in adjacency");
                }
            }
        }

        // Refill: one new element per cavity facet, apex at the new point.
        let base = self.elems.len();
        let mut ridge_map: HashMap<[usize; 2], (usize, usize)> = HashMap::new();
        for (ci, &(f, outer, dead)) in cavity.iter().enumerate() {
            let ei = base + ci;
            let verts = if self.dim == 2 {
                [f[0], f[1], pi, NONE]
            } else {
                [f[0], f[1], f[2], pi]
            };
            let mut neigh = [NONE; 4];
            neigh[self.dim] = outer;
            if outer != NONE {
                let pos = self.elems[outer]
                    .neigh
                    .iter()
                    .position(|&x| x == dead)
                    .expect("outer element must reference the dead element");
                self.elems[outer].neigh[pos] = ei;
            }
            self.elems.push(Element {
                verts,
                neigh,
                alive: true,
            });
            // Wire the facets incident to the new point via shared ridges.
            for k in 0..self.dim {
                let key = self.ridge_key(ei, k);
                if let Some(&(oe, ok)) = ridge_map.get(&key) {
                    self.elems[ei].neigh[k] = oe;
                    self.elems[oe].neigh[ok] = ei;
                } else {
                    ridge_map.insert(key, (ei, k));
                }
            }
        }
        self.hint = base;
        Ok(())
    }

    /// Sorted vertex set of facet `k` of element `e`, minus the apex point.
    fn ridge_key(&self, e: usize, k: usize) -> [usize; 2] {
        let f = self.facet(e, k);
        let apex = self.elems[e].verts[self.dim];
        let mut key = [NONE; 2];
        let mut n = 0;
        for &v in f.iter().take(self.dim) {
            if v != apex {
                key[n] = v;
                n += 1;
            }
        }
        if n == 2 && key[0] > key[1] {
            key.swap(0, 1);
        }
        key
    }

    fn extract(self, n: usize) -> Result<DelaunayResult> {
        let mut tris = Vec::new();
        let mut tets = Vec::new();
        for e in &self.elems {
            if !e.alive || e.verts.iter().take(self.dim + 1).any(|&v| v >= n) {
                continue;
            }
            // Exactly degenerate (zero-measure) elements can be produced for
            // cocircular/cospherical coplanar inputs; they carry no area or
            // volume and are never emitted.
            if self.dim == 2 {
                let t = [e.verts[0], e.verts[1], e.verts[2]];
                if orient2d(self.all[t[0]], self.all[t[1]], self.all[t[2]]) != 0 {
                    tris.push(t);
                }
            } else {
                let t = e.verts;
                if orient3d(self.all[t[0]], self.all[t[1]], self.all[t[2]], self.all[t[3]]) != 0 {
                    tets.push(t);
                }
            }
        }
        if tris.is_empty() && tets.is_empty() {
            return Err(Error::DegenerateInput(
                "all points collinear or coplanar".into(),
            ));
        }
        Ok(DelaunayResult { tris, tets })
    }
}

/// A simplex mesh over a shared node set; exactly one of `tris` / `tets` is
/// populated according to `dimension`.
#[derive(Debug, Clone)]
pub struct SimplexMesh {
    pub dimension: Dimension,
    pub nodes: Vec<Vec3>,
    pub boundary_flags: Vec<bool>,
    pub fixed_flags: Vec<bool>,
    pub tris: Vec<[usize; 3]>,
    pub tets: Vec<[usize; 4]>,
}

impl SimplexMesh {
    pub fn n_elements(&self) -> usize {
        match self.dimension {
            Dimension::Planar2D => self.tris.len(),
            Dimension::Solid3D => self.tets.len(),
        }
    }

    /// Unique undirected edges, each as an ascending index pair, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut set: Vec<[usize; 2]> = Vec::new();
        let mut push = |a: usize, b: usize| {
            set.push(if a < b { [a, b] } else { [b, a] });
        };
        match self.dimension {
            Dimension::Planar2D => {
                for t in &self.tris {
                    push(t[0], t[1]);
                    push(t[1], t[2]);
                    push(t[2], t[0]);
                }
            }
            Dimension::Solid3D => {
                for t in &self.tets {
                    for i in 0..4 {
                        for j in i + 1..4 {
                            push(t[i], t[j]);
                        }
                    }
                }
            }
        }
        set.sort_unstable();
        set.dedup();
        set
    }
}

/// Triangulate `positions` and keep only elements whose centroid lies strictly
/// inside the domain, then compact the node list to the referenced nodes.
/// Centroids *on* the boundary belong to degenerate slivers spanned by nodes
/// pressed onto a flat boundary facet; those carry no volume worth keeping.
pub fn triangulate_in_domain(
    positions: &[Vec3],
    boundary_flags: &[bool],
    fixed_flags: &[bool],
    domain: &MeshDomain,
    boundary_grid: &UniformGrid,
    h_min: f64,
) -> Result<SimplexMesh> {
    let dt = delaunay(positions, domain.dimension)?;
    let keep_tri: Vec<[usize; 3]> = dt
        .tris
        .into_iter()
        .filter(|t| {
            let c = (positions[t[0]] + positions[t[1]] + positions[t[2]]) / 3.0;
            containment::locate_unbounded(c, boundary_grid, domain, h_min) == Location::Inside
        })
        .collect();
    // Skin slivers: on curved (or creased) boundaries the Delaunay of wall
    // nodes produces near-flat tets whose circumsphere bulges outside the
    // domain. With every vertex pinned to the boundary no optimization can
    // repair them, and their volume is bounded by the chordal gap, so they
    // are peeled from the mesh instead.
    let pinned = |v: usize| {
        boundary_flags.get(v).copied().unwrap_or(false)
            || fixed_flags.get(v).copied().unwrap_or(false)
    };
    let keep_tet: Vec<[usize; 4]> = dt
        .tets
        .into_iter()
        .filter(|t| {
            let c = (positions[t[0]] + positions[t[1]] + positions[t[2]] + positions[t[3]]) / 4.0;
            if containment::locate_unbounded(c, boundary_grid, domain, h_min) != Location::Inside {
                return false;
            }
            if t.iter().all(|&v| pinned(v)) {
                let q = crate::postopt::tet_quality(
                    positions[t[0]],
                    positions[t[1]],
                    positions[t[2]],
                    positions[t[3]],
                );
                if q < 0.3 {
                    return false;
                }
            }
            true
        })
        .collect();
    if keep_tri.is_empty() && keep_tet.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    // Compact node indices to those still referenced.
    let mut remap = vec![NONE; positions.len()];
    let mut nodes = Vec::new();
    let mut bflags = Vec::new();
    let mut fflags = Vec::new();
    let map = |i: usize, remap: &mut Vec<usize>, nodes: &mut Vec<Vec3>, bf: &mut Vec<bool>, ff: &mut Vec<bool>| {
        if remap[i] == NONE {
            remap[i] = nodes.len();
            nodes.push(positions[i]);
            bf.push(boundary_flags.get(i).copied().unwrap_or(false));
            ff.push(fixed_flags.get(i).copied().unwrap_or(false));
        }
        remap[i]
    };
    let tris: Vec<[usize; 3]> = keep_tri
        .iter()
        .map(|t| {
            [
                map(t[0], &mut remap, &mut nodes, &mut bflags, &mut fflags),
                map(t[1], &mut remap, &mut nodes, &mut bflags, &mut fflags),
                map(t[2], &mut remap, &mut nodes, &mut bflags, &mut fflags),
            ]
        })
        .collect();
    let tets: Vec<[usize; 4]> = keep_tet
        .iter()
        .map(|t| {
            [
                map(t[0], &mut remap, &mut nodes, &mut bflags, &mut fflags),
                map(t[1], &mut remap, &mut nodes, &mut bflags, &mut fflags),
                map(t[2], &mut remap, &mut nodes, &mut bflags, &mut fflags),
                map(t[3], &mut remap, &mut nodes, &mut bflags, &mut fflags),
            ]
        })
        .collect();
    Ok(SimplexMesh {
        dimension: domain.dimension,
        nodes,
        boundary_flags: bflags,
        fixed_flags: fflags,
        tris,
        tets,
    })
}

#[derive(Debug, Clone)]
pub struct QualityReport {
    /// Mean relative edge-length error against the size field.
    pub e_avg: f64,
    /// Interior angles (2D) or dihedral angles (3D), degrees.
    pub angles: Vec<f64>,
    /// Counts over 5-degree bins spanning [0, 180).
    pub angle_histogram: [usize; 36],
    pub min_angle: f64,
    pub max_angle: f64,
    /// Tetrahedron regularity q in [0, 1]; `None` for 2D meshes.
    pub min_quality: Option<f64>,
    pub mean_quality: Option<f64>,
    pub n_nodes: usize,
    pub n_elements: usize,
}

pub fn quality_report(mesh: &SimplexMesh, field: &SizeField) -> Result<QualityReport> {
    let e_avg = crate::flow::edge_length_error(mesh, field)?;
    let mut angles = Vec::new();
    match mesh.dimension {
        Dimension::Planar2D => {
            for t in &mesh.tris {
                for k in 0..3 {
                    let a = mesh.nodes[t[k]];
                    let b = mesh.nodes[t[(k + 1) % 3]];
                    let c = mesh.nodes[t[(k + 2) % 3]];
                    angles.push(angle_at(a, b, c));
                }
            }
        }
        Dimension::Solid3D => {
            for t in &mesh.tets {
                for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                    let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
                    angles.push(dihedral_angle(
                        mesh.nodes[t[i]],
                        mesh.nodes[t[j]],
                        mesh.nodes[t[others[0]]],
                        mesh.nodes[t[others[1]]],
                    ));
                }
            }
        }
    }
    let mut hist = [0usize; 36];
    for &a in &angles {
        let bin = ((a / 5.0).floor() as usize).min(35);
        hist[bin] += 1;
    }
    let min_angle = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let max_angle = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min_q, mean_q) = match mesh.dimension {
        Dimension::Planar2D => (None, None),
        Dimension::Solid3D => {
            let qs: Vec<f64> = mesh
                .tets
                .iter()
                .map(|t| {
                    crate::postopt::tet_quality(
                        mesh.nodes[t[0]],
                        mesh.nodes[t[1]],
                        mesh.nodes[t[2]],
                        mesh.nodes[t[3]],
                    )
                })
                .collect();
            let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = qs.iter().sum::<f64>() / qs.len().max(1) as f64;
            (Some(min), Some(mean))
        }
    };
    Ok(QualityReport {
        e_avg,
        angle_histogram: hist,
        min_angle,
        max_angle,
        min_quality: min_q,
        mean_quality: mean_q,
        n_nodes: mesh.nodes.len(),
        n_elements: mesh.n_elements(),
        angles,
    })
}

/// Interior angle at `a` of triangle `(a, b, c)`, degrees.
pub fn angle_at(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let u = b - a;
    let v = c - a;
    let cross = u.cross(v).norm();
    cross.atan2(u.dot(v)).to_degrees()
}

/// Interior dihedral angle along edge `(a, b)` between faces through `c` and
/// `d`, degrees.
pub fn dihedral_angle(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let e = match (b - a).normalized() {
        Some(e) => e,
        None => return 0.0,
    };
    let f1 = (c - a) - e * (c - a).dot(e);
    let f2 = (d - a) - e * (d - a).dot(e);
    f1.cross(f2).norm().atan2(f1.dot(f2)).to_degrees()
}
