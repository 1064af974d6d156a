//! Point containment against the domain boundary: project a point onto the
//! nearest boundary element found through the spatial grid, classify it by the
//! sign of the offset along that element's outward normal, and reflect escaped
//! particles back into the domain.

use crate::domain::{BoundaryElement, Dimension, MeshDomain};
use crate::geom::{closest_point_on_segment, closest_point_on_triangle, Vec3};
use crate::spatial::UniformGrid;
use crate::{Error, Result};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub point: Vec3,
    pub normal: Vec3,
    pub element: BoundaryElement,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Outside,
    OnBoundary,
}

/// Closest boundary point among elements adjacent to the boundary vertices in
/// `x`'s neighbor cells. Errors when no boundary vertex is in range, which for
/// a speed-capped particle signals an augmentation or integration bug.
pub fn project(x: Vec3, boundary_grid: &UniformGrid, domain: &MeshDomain) -> Result<Projection> {
    let ids = boundary_grid.neighbors(x);
    if ids.is_empty() {
        return Err(Error::SearchRadiusViolation {
            x: x.x,
            y: x.y,
            z: x.z,
        });
    }
    let facets = candidate_facets(&ids, domain);
    Ok(closest_on_facets(x, facets.iter().copied(), domain))
}

/// Like [`project`] but valid for any point: falls back to scanning every
/// boundary facet when the neighbor cells hold no boundary vertex (deep
/// interior points during domain filtering).
pub fn project_unbounded(x: Vec3, boundary_grid: &UniformGrid, domain: &MeshDomain) -> Projection {
    let ids = boundary_grid.neighbors(x);
    if ids.is_empty() {
        let n_facets = match domain.dimension {
            Dimension::Planar2D => domain.boundary_edges.len(),
            Dimension::Solid3D => domain.triangles.len(),
        };
        return closest_on_facets(x, 0..n_facets, domain);
    }
    let facets = candidate_facets(&ids, domain);
    closest_on_facets(x, facets.iter().copied(), domain)
}

/// Boundary facet indices (edges in 2D, triangles in 3D) adjacent to the given
/// boundary-point ids. Ids at or above `vertices.len()` are augmented points.
fn candidate_facets(ids: &[usize], domain: &MeshDomain) -> BTreeSet<usize> {
    let nv = domain.vertices.len();
    let mut facets = BTreeSet::new();
    for &id in ids {
        match domain.dimension {
            Dimension::Planar2D => {
                if id < nv {
                    if let Some(edges) = domain.vertex_edges.get(&id) {
                        facets.extend(edges.iter().copied());
                    }
                } else if let BoundaryElement::Edge(e) = domain.augmented[id - nv].owner {
                    facets.insert(e);
                }
            }
            Dimension::Solid3D => {
                if id < nv {
                    if let Some(faces) = domain.vertex_faces.get(&id) {
                        facets.extend(faces.iter().copied());
                    }
                } else {
                    match domain.augmented[id - nv].owner {
                        BoundaryElement::Edge(e) => facets.extend(domain.edge_faces[e].iter().copied()),
                        BoundaryElement::Face(f) => {
                            facets.insert(f);
                        }
                        BoundaryElement::Vertex(v) => {
                            if let Some(faces) = domain.vertex_faces.get(&v) {
                                facets.extend(faces.iter().copied());
                            }
                        }
                    }
                }
            }
        }
    }
    facets
}

fn closest_on_facets(
    x: Vec3,
    facets: impl Iterator<Item = usize>,
    domain: &MeshDomain,
) -> Projection {
    let mut best: Option<(f64, usize, Vec3)> = None;
    for fi in facets {
        let cp = match domain.dimension {
            Dimension::Planar2D => {
                let e = domain.boundary_edges[fi];
                closest_point_on_segment(x, domain.vertices[e[0]], domain.vertices[e[1]])
            }
            Dimension::Solid3D => {
                let t = domain.triangles[fi];
                closest_point_on_triangle(
                    x,
                    domain.vertices[t[0]],
                    domain.vertices[t[1]],
                    domain.vertices[t[2]],
                )
            }
        };
        let d = x.dist(cp);
        // Strict comparison with ascending index order keeps the lowest
        // facet index on an exact tie.
        if best.map(|(bd, _, _)| d < bd).unwrap_or(true) {
            best = Some((d, fi, cp));
        }
    }
    let (distance, facet, point) = best.expect("at least one candidate facet");
    let (element, normal) = resolve_feature(point, facet, domain);
    Projection {
        point,
        normal,
        element,
        distance,
    }
}

/// Identify which feature of the facet the projection actually landed on and
/// return its stored normal: face normal in a triangle's interior, averaged
/// edge normal on an edge, vertex normal at a vertex.
fn resolve_feature(p: Vec3, facet: usize, domain: &MeshDomain) -> (BoundaryElement, Vec3) {
    let scale = (domain.bbox_max - domain.bbox_min).norm();
    let tol = 1e-9 * scale;
    match domain.dimension {
        Dimension::Planar2D => {
            let e = domain.boundary_edges[facet];
            for &v in &e {
                if p.dist(domain.vertices[v]) <= tol {
                    return (BoundaryElement::Vertex(v), domain.vertex_normals[&v]);
                }
            }
            (BoundaryElement::Edge(facet), domain.edge_normals[facet])
        }
        Dimension::Solid3D => {
            let t = domain.triangles[facet];
            for &v in &t {
                if p.dist(domain.vertices[v]) <= tol {
                    return (BoundaryElement::Vertex(v), domain.vertex_normals[&v]);
                }
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let cp = closest_point_on_segment(p, domain.vertices[a], domain.vertices[b]);
                if p.dist(cp) <= tol {
                    let key = if a <= b { (a, b) } else { (b, a) };
                    let ei = domain.edge_index[&key];
                    return (BoundaryElement::Edge(ei), domain.edge_normals[ei]);
                }
            }
            (BoundaryElement::Face(facet), domain.face_normals[facet])
        }
    }
}

/// Inside/outside/on-boundary by the sign of `(x - p') . n`. Projections that
/// land essentially at a vertex are resolved by a majority vote over the
/// vertex's incident elements, which disambiguates reentrant corners.
pub fn classify(x: Vec3, proj: &Projection, domain: &MeshDomain, h_min: f64) -> Location {
    if let BoundaryElement::Vertex(v) = proj.element {
        if proj.point.dist(domain.vertices[v]) <= 1e-6 * h_min {
            return classify_at_vertex(x, v, proj, domain, h_min);
        }
    }
    classify_by_normal(x, proj.point, proj.normal, h_min)
}

fn classify_by_normal(x: Vec3, p: Vec3, n: Vec3, h_min: f64) -> Location {
    let s = (x - p).dot(n);
    if s.abs() <= 1e-12 * h_min {
        Location::OnBoundary
    } else if s < 0.0 {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn classify_at_vertex(
    x: Vec3,
    v: usize,
    proj: &Projection,
    domain: &MeshDomain,
    h_min: f64,
) -> Location {
    let mut inside = 0usize;
    let mut outside = 0usize;
    let mut vote = |loc: Location| match loc {
        Location::Outside => outside += 1,
        _ => inside += 1,
    };
    match domain.dimension {
        Dimension::Planar2D => {
            if let Some(edges) = domain.vertex_edges.get(&v) {
                for &ei in edges {
                    let e = domain.boundary_edges[ei];
                    let cp = closest_point_on_segment(x, domain.vertices[e[0]], domain.vertices[e[1]]);
                    vote(classify_by_normal(x, cp, domain.edge_normals[ei], h_min));
                }
            }
        }
        Dimension::Solid3D => {
            if let Some(faces) = domain.vertex_faces.get(&v) {
                for &fi in faces {
                    let t = domain.triangles[fi];
                    let cp = closest_point_on_triangle(
                        x,
                        domain.vertices[t[0]],
                        domain.vertices[t[1]],
                        domain.vertices[t[2]],
                    );
                    vote(classify_by_normal(x, cp, domain.face_normals[fi], h_min));
                }
            }
        }
    }
    if inside > outside {
        Location::Inside
    } else if outside > inside {
        Location::Outside
    } else {
        classify_by_normal(x, proj.point, proj.normal, h_min)
    }
}

/// Mirror a velocity about a unit boundary normal; speed is preserved.
pub fn reflect_velocity(v: Vec3, n: Vec3) -> Vec3 {
    v - n * (2.0 * v.dot(n))
}

/// Project-and-reflect step applied after integration: escaped particles land
/// on the boundary with a bounced velocity, everything else is untouched.
pub fn enforce(
    position: Vec3,
    velocity: Vec3,
    boundary_grid: &UniformGrid,
    domain: &MeshDomain,
    h_min: f64,
) -> Result<(Vec3, Vec3)> {
    let proj = project(position, boundary_grid, domain)?;
    if classify(position, &proj, domain, h_min) == Location::Outside {
        Ok((proj.point, reflect_velocity(velocity, proj.normal)))
    } else {
        Ok((position, velocity))
    }
}

/// [`enforce`] built on the unbounded projection; additionally returns the
/// distance to the boundary so callers can skip re-projection until the point
/// could plausibly have reached the wall again.
pub fn enforce_unbounded(
    position: Vec3,
    velocity: Vec3,
    boundary_grid: &UniformGrid,
    domain: &MeshDomain,
    h_min: f64,
) -> (Vec3, Vec3, f64) {
    let proj = project_unbounded(position, boundary_grid, domain);
    if classify(position, &proj, domain, h_min) == Location::Outside {
        (proj.point, reflect_velocity(velocity, proj.normal), 0.0)
    } else {
        (position, velocity, proj.distance)
    }
}

/// Containment of an arbitrary point, valid anywhere in space.
pub fn locate_unbounded(
    x: Vec3,
    boundary_grid: &UniformGrid,
    domain: &MeshDomain,
    h_min: f64,
) -> Location {
    let proj = project_unbounded(x, boundary_grid, domain);
    classify(x, &proj, domain, h_min)
}
