//! Mesh domain ingestion: OBJ parsing, dimensionality classification,
//! topology validation, boundary normals, and boundary augmentation with
//! extra vertices so that any particle near the boundary always has a
//! boundary vertex in its spatial-grid neighbor cells.

use crate::geom::{vec3, Vec3};
use crate::{Error, Result};
use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Planar2D,
    Solid3D,
}

/// A reference to the boundary element that carries a point or a normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryElement {
    Vertex(usize),
    Edge(usize),
    Face(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentedVertex {
    pub position: Vec3,
    pub owner: BoundaryElement,
}

#[derive(Debug, Clone, Copy)]
pub enum Measures {
    Planar { area: f64, perimeter: f64 },
    Solid { volume: f64, surface_area: f64 },
}

/// Rigid frame carrying a planar domain into the z = 0 simulation plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
    /// True when the input was already in a z = const plane and the frame is a
    /// pure z-translation, which keeps x/y coordinates bit-identical.
    pub axis_aligned: bool,
}

impl PlaneFrame {
    pub fn to_sim(&self, p: Vec3) -> Vec3 {
        if self.axis_aligned {
            return vec3(p.x, p.y, p.z - self.origin.z);
        }
        let d = p - self.origin;
        vec3(d.dot(self.u), d.dot(self.v), d.dot(self.w))
    }

    pub fn to_world(&self, p: Vec3) -> Vec3 {
        if self.axis_aligned {
            return vec3(p.x, p.y, p.z + self.origin.z);
        }
        self.origin + self.u * p.x + self.v * p.y + self.w * p.z
    }
}

#[derive(Debug, Clone)]
pub struct MeshDomain {
    /// Vertex coordinates in the simulation frame (z = 0 for planar domains).
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub dimension: Dimension,
    /// 2D: edges referenced by exactly one triangle. 3D: all surface edges.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Outward unit normal per boundary edge (in-plane in 2D, face-averaged in 3D).
    pub edge_normals: Vec<Vec3>,
    /// Outward unit normal per triangle (3D only; empty in 2D).
    pub face_normals: Vec<Vec3>,
    /// Outward unit normal per boundary vertex.
    pub vertex_normals: HashMap<usize, Vec3>,
    pub augmented: Vec<AugmentedVertex>,
    pub measures: Measures,
    /// Incident boundary edges per boundary vertex.
    pub vertex_edges: HashMap<usize, Vec<usize>>,
    /// Incident triangles per vertex (3D).
    pub vertex_faces: HashMap<usize, Vec<usize>>,
    /// Incident triangles per boundary edge (one in 2D, two in 3D).
    pub edge_faces: Vec<Vec<usize>>,
    /// Sorted vertex pair -> boundary edge index.
    pub edge_index: HashMap<(usize, usize), usize>,
    pub is_boundary_vertex: Vec<bool>,
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
    pub plane_frame: Option<PlaneFrame>,
}

impl MeshDomain {
    pub fn load_obj(path: &Path) -> Result<MeshDomain> {
        let label = path.display().to_string();
        let src = fs::read_to_string(path).map_err(|source| Error::Io {
            path: label.clone(),
            source,
        })?;
        Self::from_obj_str(&src, &label)
    }

    /// Parse OBJ text. Only `v` and `f` records are honored; faces must be
    /// triangles (`f i/…/… j/…/… k/…/…` prefixes accepted).
    pub fn from_obj_str(src: &str, label: &str) -> Result<MeshDomain> {
        let mut vertices: Vec<Vec3> = Vec::new();
        let mut faces: Vec<[usize; 3]> = Vec::new();
        let mut warned: BTreeSet<String> = BTreeSet::new();
        for (lineno, raw) in src.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap();
            match key {
                "v" => {
                    let mut coords = [0.0f64; 3];
                    for coord in coords.iter_mut() {
                        let tok = it.next().ok_or_else(|| Error::Parse {
                            path: label.to_string(),
                            line: lineno,
                            msg: "vertex needs three coordinates".into(),
                        })?;
                        *coord = tok.parse::<f64>().map_err(|_| Error::Parse {
                            path: label.to_string(),
                            line: lineno,
                            msg: format!("bad coordinate {tok:?}"),
                        })?;
                    }
                    vertices.push(vec3(coords[0], coords[1], coords[2]));
                }
                "f" => {
                    let idx: Vec<usize> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or(tok);
                            first
                                .parse::<i64>()
                                .ok()
                                .filter(|&i| i > 0)
                                .map(|i| i as usize - 1)
                                .ok_or_else(|| Error::Parse {
                                    path: label.to_string(),
                                    line: lineno,
                                    msg: format!("bad face index {tok:?}"),
                                })
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::UnsupportedFace {
                            path: label.to_string(),
                            line: lineno,
                        });
                    }
                    faces.push([idx[0], idx[1], idx[2]]);
                }
                other => {
                    if warned.insert(other.to_string()) {
                        eprintln!("warning: {label}: ignoring `{other}` records");
                    }
                }
            }
        }
        Self::build(vertices, faces, label)
    }

    fn build(raw_vertices: Vec<Vec3>, raw_faces: Vec<[usize; 3]>, label: &str) -> Result<MeshDomain> {
        if raw_vertices.is_empty() || raw_faces.is_empty() {
            return Err(Error::Topology(format!("{label}: no vertices or faces")));
        }
        for (fi, f) in raw_faces.iter().enumerate() {
            for &i in f {
                if i >= raw_vertices.len() {
                    return Err(Error::Topology(format!(
                        "{label}: face {fi} references vertex {} of {}",
                        i + 1,
                        raw_vertices.len()
                    )));
                }
            }
        }

        let (bbox_min, bbox_max) = bounds(&raw_vertices);
        let diag = (bbox_max - bbox_min).norm();
        if diag == 0.0 {
            return Err(Error::Topology(format!("{label}: degenerate bounding box")));
        }
        let weld_tol = 1e-9 * diag;

        // Weld coincident vertices so watertightness checks see real topology.
        let (vertices, remap) = weld(&raw_vertices, weld_tol);
        let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(raw_faces.len());
        for (fi, f) in raw_faces.iter().enumerate() {
            let t = [remap[f[0]], remap[f[1]], remap[f[2]]];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Topology(format!(
                    "{label}: face {fi} has repeated vertices after welding"
                )));
            }
            triangles.push(t);
        }

        // Planar iff every vertex lies on one plane within tolerance.
        let plane = fit_plane(&vertices, &triangles);
        let planar = plane
            .map(|(origin, n)| {
                vertices
                    .iter()
                    .all(|&v| (v - origin).dot(n).abs() <= 1e-9 * diag)
            })
            .unwrap_or(false);

        let mut domain = if planar {
            let (origin, n) = plane.unwrap();
            Self::build_planar(vertices, triangles, origin, n, label)?
        } else {
            Self::build_solid(vertices, triangles, label)?
        };
        domain.compute_normals()?;
        Ok(domain)
    }

    fn build_planar(
        vertices: Vec<Vec3>,
        mut triangles: Vec<[usize; 3]>,
        origin: Vec3,
        normal: Vec3,
        label: &str,
    ) -> Result<MeshDomain> {
        let axis_aligned = normal.cross(vec3(0.0, 0.0, 1.0)).norm() < 1e-12;
        let frame = if axis_aligned {
            PlaneFrame {
                origin: vec3(0.0, 0.0, origin.z),
                u: vec3(1.0, 0.0, 0.0),
                v: vec3(0.0, 1.0, 0.0),
                w: vec3(0.0, 0.0, 1.0),
                axis_aligned: true,
            }
        } else {
            let w = normal;
            let seed = if w.x.abs() < 0.9 {
                vec3(1.0, 0.0, 0.0)
            } else {
                vec3(0.0, 1.0, 0.0)
            };
            let u = (seed - w * seed.dot(w)).normalized().unwrap();
            let v = w.cross(u);
            PlaneFrame {
                origin,
                u,
                v,
                w,
                axis_aligned: false,
            }
        };
        let vertices: Vec<Vec3> = vertices
            .iter()
            .map(|&p| {
                let q = frame.to_sim(p);
                vec3(q.x, q.y, 0.0)
            })
            .collect();

        // Counterclockwise orientation per triangle.
        let mut area = 0.0;
        for t in triangles.iter_mut() {
            let a = signed_area2d(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == 0.0 {
                return Err(Error::Topology(format!(
                    "{label}: zero-area triangle {t:?}"
                )));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
            area += a.abs();
        }

        // Edge incidence; boundary edges are referenced exactly once.
        let mut incidence: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = sorted_pair(t[k], t[(k + 1) % 3]);
                incidence.entry(e).or_default().push(fi);
            }
        }
        let mut boundary_edges = Vec::new();
        let mut edge_faces = Vec::new();
        let mut keys: Vec<_> = incidence.keys().copied().collect();
        keys.sort();
        for key in keys {
            let faces = &incidence[&key];
            match faces.len() {
                1 => {
                    boundary_edges.push([key.0, key.1]);
                    edge_faces.push(faces.clone());
                }
                2 => {}
                n => {
                    return Err(Error::Topology(format!(
                        "{label}: edge ({},{}) referenced by {n} triangles",
                        key.0, key.1
                    )))
                }
            }
        }
        let perimeter: f64 = boundary_edges
            .iter()
            .map(|e| vertices[e[0]].dist(vertices[e[1]]))
            .sum();
        if area <= 0.0 || perimeter <= 0.0 {
            return Err(Error::Topology(format!("{label}: empty planar domain")));
        }

        let mut edge_index = HashMap::new();
        let mut vertex_edges: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut is_boundary_vertex = vec![false; vertices.len()];
        for (ei, e) in boundary_edges.iter().enumerate() {
            edge_index.insert(sorted_pair(e[0], e[1]), ei);
            for &v in e {
                vertex_edges.entry(v).or_default().push(ei);
                is_boundary_vertex[v] = true;
            }
        }

        let (bbox_min, bbox_max) = bounds(&vertices);
        Ok(MeshDomain {
            vertices,
            triangles,
            dimension: Dimension::Planar2D,
            boundary_edges,
            edge_normals: Vec::new(),
            face_normals: Vec::new(),
            vertex_normals: HashMap::new(),
            augmented: Vec::new(),
            measures: Measures::Planar { area, perimeter },
            vertex_edges,
            vertex_faces: HashMap::new(),
            edge_faces,
            edge_index,
            is_boundary_vertex,
            bbox_min,
            bbox_max,
            plane_frame: Some(frame),
        })
    }

    fn build_solid(
        vertices: Vec<Vec3>,
        mut triangles: Vec<[usize; 3]>,
        label: &str,
    ) -> Result<MeshDomain> {
        // Watertight 2-manifold: every edge shared by exactly two triangles.
        let mut incidence: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = sorted_pair(t[k], t[(k + 1) % 3]);
                incidence.entry(e).or_default().push(fi);
            }
        }
        let mut offenders: Vec<(usize, usize)> = incidence
            .iter()
            .filter(|(_, faces)| faces.len() != 2)
            .map(|(&e, _)| e)
            .collect();
        if !offenders.is_empty() {
            offenders.sort();
            let count = offenders.len();
            offenders.truncate(8);
            return Err(Error::NotWatertight {
                count,
                examples: offenders,
            });
        }

        orient_consistently(&mut triangles, &incidence, label)?;

        // Global outward orientation: positive signed volume.
        let volume_signed: f64 = triangles
            .iter()
            .map(|t| vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0)
            .sum();
        if volume_signed == 0.0 {
            return Err(Error::Topology(format!("{label}: zero enclosed volume")));
        }
        if volume_signed < 0.0 {
            for t in triangles.iter_mut() {
                t.swap(1, 2);
            }
        }
        let volume = volume_signed.abs();
        let surface_area: f64 = triangles
            .iter()
            .map(|t| {
                (vertices[t[1]] - vertices[t[0]])
                    .cross(vertices[t[2]] - vertices[t[0]])
                    .norm()
                    / 2.0
            })
            .sum();

        let mut boundary_edges = Vec::new();
        let mut edge_faces = Vec::new();
        let mut keys: Vec<_> = incidence.keys().copied().collect();
        keys.sort();
        for key in keys {
            boundary_edges.push([key.0, key.1]);
            edge_faces.push(incidence[&key].clone());
        }
        let mut edge_index = HashMap::new();
        let mut vertex_edges: HashMap<usize, Vec<usize>> = HashMap::new();
        for (ei, e) in boundary_edges.iter().enumerate() {
            edge_index.insert(sorted_pair(e[0], e[1]), ei);
            for &v in e {
                vertex_edges.entry(v).or_default().push(ei);
            }
        }
        let mut vertex_faces: HashMap<usize, Vec<usize>> = HashMap::new();
        for (fi, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_faces.entry(v).or_default().push(fi);
            }
        }
        let is_boundary_vertex = vec![true; vertices.len()];

        let (bbox_min, bbox_max) = bounds(&vertices);
        Ok(MeshDomain {
            vertices,
            triangles,
            dimension: Dimension::Solid3D,
            boundary_edges,
            edge_normals: Vec::new(),
            face_normals: Vec::new(),
            vertex_normals: HashMap::new(),
            augmented: Vec::new(),
            measures: Measures::Solid {
                volume,
                surface_area,
            },
            vertex_edges,
            vertex_faces,
            edge_faces,
            edge_index,
            is_boundary_vertex,
            bbox_min,
            bbox_max,
            plane_frame: None,
        })
    }

    /// Outward unit normals for boundary edges, faces (3D), and vertices.
    pub fn compute_normals(&mut self) -> Result<()> {
        match self.dimension {
            Dimension::Planar2D => {
                self.edge_normals.clear();
                for (ei, e) in self.boundary_edges.iter().enumerate() {
                    let a = self.vertices[e[0]];
                    let b = self.vertices[e[1]];
                    let d = (b - a)
                        .normalized()
                        .ok_or_else(|| Error::DegenerateNormal {
                            element: format!("edge {ei}"),
                        })?;
                    // In-plane perpendicular, pointed away from the owning
                    // triangle's third vertex.
                    let mut n = vec3(d.y, -d.x, 0.0);
                    let face = self.edge_faces[ei][0];
                    let t = self.triangles[face];
                    let opp = *t
                        .iter()
                        .find(|&&v| v != e[0] && v != e[1])
                        .expect("triangle has a third vertex");
                    if n.dot(self.vertices[opp] - a) > 0.0 {
                        n = -n;
                    }
                    self.edge_normals.push(n);
                }
                self.vertex_normals.clear();
                for (&v, edges) in &self.vertex_edges {
                    let sum = edges
                        .iter()
                        .fold(Vec3::ZERO, |acc, &ei| acc + self.edge_normals[ei]);
                    let n = sum.normalized().ok_or_else(|| Error::DegenerateNormal {
                        element: format!("vertex {v}"),
                    })?;
                    self.vertex_normals.insert(v, n);
                }
            }
            Dimension::Solid3D => {
                self.face_normals.clear();
                for (fi, t) in self.triangles.iter().enumerate() {
                    let n = (self.vertices[t[1]] - self.vertices[t[0]])
                        .cross(self.vertices[t[2]] - self.vertices[t[0]])
                        .normalized()
                        .ok_or_else(|| Error::DegenerateNormal {
                            element: format!("face {fi}"),
                        })?;
                    self.face_normals.push(n);
                }
                self.edge_normals.clear();
                for (ei, faces) in self.edge_faces.iter().enumerate() {
                    let sum = faces
                        .iter()
                        .fold(Vec3::ZERO, |acc, &fi| acc + self.face_normals[fi]);
                    let n = sum.normalized().ok_or_else(|| Error::DegenerateNormal {
                        element: format!("edge {ei}"),
                    })?;
                    self.edge_normals.push(n);
                }
                // Angle-weighted vertex normals: independent of how finely the
                // surface happens to be triangulated.
                self.vertex_normals.clear();
                for (&v, faces) in &self.vertex_faces {
                    let mut sum = Vec3::ZERO;
                    for &fi in faces {
                        let t = self.triangles[fi];
                        let k = t.iter().position(|&x| x == v).unwrap();
                        let p = self.vertices[v];
                        let e1 = (self.vertices[t[(k + 1) % 3]] - p).normalized();
                        let e2 = (self.vertices[t[(k + 2) % 3]] - p).normalized();
                        let angle = match (e1, e2) {
                            (Some(e1), Some(e2)) => e1.dot(e2).clamp(-1.0, 1.0).acos(),
                            _ => 0.0,
                        };
                        sum += self.face_normals[fi] * angle;
                    }
                    let n = sum.normalized().ok_or_else(|| Error::DegenerateNormal {
                        element: format!("vertex {v}"),
                    })?;
                    self.vertex_normals.insert(v, n);
                }
            }
        }
        Ok(())
    }

    /// Add extra boundary vertices so consecutive boundary points are at most
    /// `4 * h_min` apart along every boundary edge, and triangle interiors
    /// (3D) carry a lattice of points with the same spacing.
    pub fn augment_boundary(&mut self, h_min: f64) {
        assert!(h_min > 0.0, "h_min must be positive");
        self.augmented.clear();
        let weld_tol = 1e-9 * (self.bbox_max - self.bbox_min).norm();
        let mut added: Vec<Vec3> = Vec::new();
        let mut push = |augmented: &mut Vec<AugmentedVertex>, p: Vec3, owner: BoundaryElement| {
            if added.iter().any(|&q| q.dist(p) <= weld_tol) {
                return;
            }
            added.push(p);
            augmented.push(AugmentedVertex { position: p, owner });
        };

        // Edge subdivision (both 2D and 3D).
        for (ei, e) in self.boundary_edges.iter().enumerate() {
            let a = self.vertices[e[0]];
            let b = self.vertices[e[1]];
            let n = extra_vertex_count(a.dist(b), h_min);
            for i in 1..=n {
                let p = a + (b - a) * (i as f64 / (n + 1) as f64);
                push(&mut self.augmented, p, BoundaryElement::Edge(ei));
            }
        }

        if self.dimension == Dimension::Solid3D {
            for (fi, t) in self.triangles.iter().enumerate() {
                // Label so that E_ab is the longest edge and E_bc the shortest.
                let (a, b, c) = label_triangle(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
                let n_ab = extra_vertex_count(a.dist(b), h_min);
                let n_bc = extra_vertex_count(b.dist(c), h_min);
                let sweep = (a - b) * (1.0 / (n_ab + 1) as f64);
                for i in 1..=n_bc {
                    let base = b + (c - b) * (i as f64 / (n_bc + 1) as f64);
                    for j in 1..=(n_ab + 1) {
                        let p = base + sweep * j as f64;
                        match locate_in_triangle(p, a, b, c) {
                            TriLocation::Outside => {}
                            TriLocation::Inside => {
                                push(&mut self.augmented, p, BoundaryElement::Face(fi))
                            }
                            TriLocation::OnEdge(u, v) => {
                                if let Some(&ei) = self.edge_index.get(&sorted_pair(
                                    nearest_vertex(t, &self.vertices, u),
                                    nearest_vertex(t, &self.vertices, v),
                                )) {
                                    push(&mut self.augmented, p, BoundaryElement::Edge(ei));
                                }
                            }
                        }
                    }
                    // Intersection point with edge E_ca.
                    let p = c + (a - c) * (i as f64 / (n_bc + 1) as f64);
                    if let Some(&ei) = self.edge_index.get(&sorted_pair(
                        nearest_vertex(t, &self.vertices, c),
                        nearest_vertex(t, &self.vertices, a),
                    )) {
                        push(&mut self.augmented, p, BoundaryElement::Edge(ei));
                    }
                }
            }
        }
    }

    /// All boundary points (original boundary vertices followed by augmented
    /// vertices) with stable ids for the spatial grid. Ids below
    /// `vertices.len()` are original vertices.
    pub fn boundary_points(&self) -> Vec<(usize, Vec3)> {
        let mut out = Vec::new();
        for (vi, &p) in self.vertices.iter().enumerate() {
            if self.is_boundary_vertex[vi] {
                out.push((vi, p));
            }
        }
        for (ai, aug) in self.augmented.iter().enumerate() {
            out.push((self.vertices.len() + ai, aug.position));
        }
        out
    }

    pub fn is_planar(&self) -> bool {
        self.dimension == Dimension::Planar2D
    }

    /// Map a simulation-frame point back to the input frame.
    pub fn to_world(&self, p: Vec3) -> Vec3 {
        match &self.plane_frame {
            Some(frame) => frame.to_world(p),
            None => p,
        }
    }

    /// Map an input-frame point into the simulation frame.
    pub fn to_sim(&self, p: Vec3) -> Vec3 {
        match &self.plane_frame {
            Some(frame) => frame.to_sim(p),
            None => p,
        }
    }

    pub fn area_2d(&self) -> f64 {
        match self.measures {
            Measures::Planar { area, .. } => area,
            _ => panic!("not a planar domain"),
        }
    }

    pub fn perimeter_2d(&self) -> f64 {
        match self.measures {
            Measures::Planar { perimeter, .. } => perimeter,
            _ => panic!("not a planar domain"),
        }
    }

    pub fn volume_3d(&self) -> f64 {
        match self.measures {
            Measures::Solid { volume, .. } => volume,
            _ => panic!("not a solid domain"),
        }
    }

    pub fn surface_area_3d(&self) -> f64 {
        match self.measures {
            Measures::Solid { surface_area, .. } => surface_area,
            _ => panic!("not a solid domain"),
        }
    }

    pub fn triangle_area(&self, fi: usize) -> f64 {
        let t = self.triangles[fi];
        (self.vertices[t[1]] - self.vertices[t[0]])
            .cross(self.vertices[t[2]] - self.vertices[t[0]])
            .norm()
            / 2.0
    }

    pub fn triangle_centroid(&self, fi: usize) -> Vec3 {
        let t = self.triangles[fi];
        (self.vertices[t[0]] + self.vertices[t[1]] + self.vertices[t[2]]) / 3.0
    }
}

/// Number of extra vertices for an edge of length `len`: zero when the edge is
/// already no longer than `4 * h`, otherwise enough to bring the spacing down
/// to at most `4 * h`.
pub fn extra_vertex_count(len: f64, h: f64) -> usize {
    let n = (len / (4.0 * h) - 1.0).ceil();
    if n > 0.0 {
        n as usize
    } else {
        0
    }
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn bounds(vs: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = vs[0];
    let mut hi = vs[0];
    for &v in vs {
        lo = lo.min_by_component(v);
        hi = hi.max_by_component(v);
    }
    (lo, hi)
}

fn signed_area2d(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    ((b - a).cross(c - a)).z / 2.0
}

fn weld(vertices: &[Vec3], tol: f64) -> (Vec<Vec3>, Vec<usize>) {
    let cell = tol.max(f64::MIN_POSITIVE);
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut out: Vec<Vec3> = Vec::new();
    let mut remap = Vec::with_capacity(vertices.len());
    for &p in vertices {
        let key = (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        );
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let k = (key.0 + dx, key.1 + dy, key.2 + dz);
                    if let Some(ids) = grid.get(&k) {
                        for &id in ids {
                            if out[id].dist(p) <= tol {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                let id = out.len();
                out.push(p);
                grid.entry(key).or_default().push(id);
                id
            }
        };
        remap.push(id);
    }
    (out, remap)
}

/// Area-weighted plane fit over all triangles; `None` when the surface has no
/// consistent normal direction at all.
fn fit_plane(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Option<(Vec3, Vec3)> {
    let mut n = Vec3::ZERO;
    for t in triangles {
        n += (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    }
    Some((vertices[0], n.normalized()?))
}

fn orient_consistently(
    triangles: &mut [[usize; 3]],
    incidence: &HashMap<(usize, usize), Vec<usize>>,
    label: &str,
) -> Result<()> {
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for faces in incidence.values() {
        if faces.len() == 2 {
            adjacency.entry(faces[0]).or_default().push(faces[1]);
            adjacency.entry(faces[1]).or_default().push(faces[0]);
        }
    }
    let n = triangles.len();
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![start];
        while let Some(f) = stack.pop() {
            let Some(neighbors) = adjacency.get(&f) else {
                continue;
            };
            for &g in neighbors {
                let same = shared_edge_same_direction(&triangles[f], &triangles[g]);
                if !visited[g] {
                    visited[g] = true;
                    if same {
                        triangles[g].swap(1, 2);
                    }
                    stack.push(g);
                } else if same {
                    return Err(Error::Topology(format!(
                        "{label}: non-orientable surface (faces {f} and {g})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Whether two triangles traverse their shared edge in the same direction
/// (which means inconsistent winding).
fn shared_edge_same_direction(a: &[usize; 3], b: &[usize; 3]) -> bool {
    for i in 0..3 {
        let ea = (a[i], a[(i + 1) % 3]);
        for j in 0..3 {
            let eb = (b[j], b[(j + 1) % 3]);
            if ea == eb {
                return true;
            }
            if ea == (eb.1, eb.0) {
                return false;
            }
        }
    }
    false
}

fn label_triangle(p0: Vec3, p1: Vec3, p2: Vec3) -> (Vec3, Vec3, Vec3) {
    let pts = [p0, p1, p2];
    // Longest edge first.
    let mut longest = 0;
    let mut best = -1.0;
    for k in 0..3 {
        let len = pts[k].dist(pts[(k + 1) % 3]);
        if len > best {
            best = len;
            longest = k;
        }
    }
    let u = pts[longest];
    let v = pts[(longest + 1) % 3];
    let w = pts[(longest + 2) % 3];
    // b is the endpoint of the longest edge closer to the third vertex, which
    // makes E_bc the shortest edge.
    if v.dist(w) <= u.dist(w) {
        (u, v, w)
    } else {
        (v, u, w)
    }
}

enum TriLocation {
    Inside,
    OnEdge(Vec3, Vec3),
    Outside,
}

fn locate_in_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> TriLocation {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let denom = d00 * d11 - d01 * d01;
    if denom == 0.0 {
        return TriLocation::Outside;
    }
    let beta = (d11 * d20 - d01 * d21) / denom;
    let gamma = (d00 * d21 - d01 * d20) / denom;
    let alpha = 1.0 - beta - gamma;
    let tol = 1e-9;
    if alpha < -tol || beta < -tol || gamma < -tol {
        return TriLocation::Outside;
    }
    if alpha <= tol {
        TriLocation::OnEdge(b, c)
    } else if beta <= tol {
        TriLocation::OnEdge(c, a)
    } else if gamma <= tol {
        TriLocation::OnEdge(a, b)
    } else {
        TriLocation::Inside
    }
}

fn nearest_vertex(t: &[usize; 3], vertices: &[Vec3], p: Vec3) -> usize {
    *t.iter()
        .min_by(|&&a, &&b| {
            vertices[a]
                .dist(p)
                .partial_cmp(&vertices[b].dist(p))
                .unwrap()
        })
        .unwrap()
}
