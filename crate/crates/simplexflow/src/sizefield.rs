//! Target edge length h(x): uniform, an analytic radial preset, or a discrete
//! background-grid field interpolated from anchor points over a coarse
//! Delaunay mesh of the bounding box corners and the anchors.

use crate::domain::{Dimension, MeshDomain};
use crate::geom::{vec3, Vec3};
use crate::triangulate;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum SizeField {
    Uniform {
        h: f64,
    },
    /// h(x) = (1 - falloff * rho / cutoff) * base for rho < cutoff, else
    /// (1 - falloff) * base, with rho the distance from the z-axis.
    RadialLinear {
        base: f64,
        cutoff: f64,
        falloff: f64,
    },
    Discrete(DiscreteGrid),
}

#[derive(Debug, Clone)]
pub struct DiscreteGrid {
    bbox_min: Vec3,
    cell: f64,
    nx: usize,
    ny: usize,
    nz: usize,
    values: Vec<f64>,
    h_min: f64,
}

impl SizeField {
    pub fn uniform(h: f64) -> SizeField {
        assert!(h > 0.0);
        SizeField::Uniform { h }
    }

    pub fn radial_linear(base: f64, cutoff: f64, falloff: f64) -> SizeField {
        assert!(base > 0.0 && cutoff > 0.0 && (0.0..1.0).contains(&falloff));
        SizeField::RadialLinear {
            base,
            cutoff,
            falloff,
        }
    }

    /// Discrete field over a uniform grid with cell edge `h_min / 4`: the
    /// bounding-box corners carry their nearest anchor's size, a background Delaunay
    /// mesh over corners + anchors supplies barycentric interpolation at each
    /// cell centroid, and cells containing an anchor take the anchor's size.
    pub fn build_discrete(domain: &MeshDomain, anchors: &[(Vec3, f64)]) -> Result<SizeField> {
        if anchors.is_empty() {
            return Err(Error::SizeFieldInput("at least one anchor required".into()));
        }
        for &(p, h) in anchors {
            if h <= 0.0 {
                return Err(Error::SizeFieldInput(format!(
                    "anchor at ({}, {}, {}) has non-positive size {h}",
                    p.x, p.y, p.z
                )));
            }
        }
        let lo = domain.bbox_min;
        let hi = domain.bbox_max;
        let diag = (hi - lo).norm();
        let tol = 1e-9 * diag;
        for &(p, _) in anchors {
            let clamped = p.max_by_component(lo).min_by_component(hi);
            if p.dist(clamped) > tol {
                return Err(Error::SizeFieldInput(format!(
                    "anchor at ({}, {}, {}) lies outside the domain bounding box",
                    p.x, p.y, p.z
                )));
            }
        }
        for i in 0..anchors.len() {
            for j in i + 1..anchors.len() {
                if anchors[i].0.dist(anchors[j].0) <= tol && anchors[i].1 != anchors[j].1 {
                    return Err(Error::SizeFieldInput(format!(
                        "duplicate anchors at ({}, {}, {}) with different sizes",
                        anchors[i].0.x, anchors[i].0.y, anchors[i].0.z
                    )));
                }
            }
        }

        let h_min = anchors.iter().map(|&(_, h)| h).fold(f64::INFINITY, f64::min);
        let h_max = anchors.iter().map(|&(_, h)| h).fold(0.0f64, f64::max);

        // Background point set: bbox corners at h_min unless a user anchor
        // sits on the corner, then the anchors themselves.
        let mut points: Vec<Vec3> = Vec::new();
        let mut sizes: Vec<f64> = Vec::new();
        let corners: Vec<Vec3> = match domain.dimension {
            Dimension::Planar2D => vec![
                vec3(lo.x, lo.y, 0.0),
                vec3(hi.x, lo.y, 0.0),
                vec3(hi.x, hi.y, 0.0),
                vec3(lo.x, hi.y, 0.0),
            ],
            Dimension::Solid3D => {
                let mut cs = Vec::with_capacity(8);
                for &x in &[lo.x, hi.x] {
                    for &y in &[lo.y, hi.y] {
                        for &z in &[lo.z, hi.z] {
                            cs.push(vec3(x, y, z));
                        }
                    }
                }
                cs
            }
        };
        // A corner the user did not anchor takes the nearest anchor's size;
        // defaulting to h_min would let a corner outside a concave domain
        // (e.g. in a notch) shrink the field over real domain territory.
        for c in corners {
            if !anchors.iter().any(|&(p, _)| p.dist(c) <= tol) {
                let nearest = anchors
                    .iter()
                    .min_by(|a, b| a.0.dist(c).total_cmp(&b.0.dist(c)))
                    .unwrap()
                    .1;
                points.push(c);
                sizes.push(nearest);
            }
        }
        let mut dedup_anchors: Vec<(Vec3, f64)> = Vec::new();
        for &(p, h) in anchors {
            if !dedup_anchors.iter().any(|&(q, _)| q.dist(p) <= tol) {
                dedup_anchors.push((p, h));
            }
        }
        for &(p, h) in &dedup_anchors {
            points.push(p);
            sizes.push(h);
        }

        let background = triangulate::delaunay(&points, domain.dimension)?;
        let simplices: Vec<Vec<usize>> = match domain.dimension {
            Dimension::Planar2D => background.tris.iter().map(|t| t.to_vec()).collect(),
            Dimension::Solid3D => background.tets.iter().map(|t| t.to_vec()).collect(),
        };

        let cell = h_min / 4.0;
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let nz = match domain.dimension {
            Dimension::Planar2D => 1,
            Dimension::Solid3D => (((hi.z - lo.z) / cell).ceil() as usize).max(1),
        };

        let mut values = vec![h_min; nx * ny * nz];
        let idx = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let centroid = vec3(
                        lo.x + (i as f64 + 0.5) * cell,
                        lo.y + (j as f64 + 0.5) * cell,
                        if nz == 1 { 0.0 } else { lo.z + (k as f64 + 0.5) * cell },
                    );
                    values[idx(i, j, k)] =
                        interpolate(centroid, &points, &sizes, &simplices).clamp(h_min, h_max);
                }
            }
        }
        // Cells containing an anchor take the anchor value directly.
        for &(p, h) in &dedup_anchors {
            let i = (((p.x - lo.x) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
            let j = (((p.y - lo.y) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
            let k = if nz == 1 {
                0
            } else {
                (((p.z - lo.z) / cell).floor() as isize).clamp(0, nz as isize - 1) as usize
            };
            values[idx(i, j, k)] = h;
        }

        Ok(SizeField::Discrete(DiscreteGrid {
            bbox_min: lo,
            cell,
            nx,
            ny,
            nz,
            values,
            h_min,
        }))
    }

    /// Target edge length at a point (clamped into the grid for discrete
    /// fields).
    pub fn size_at(&self, x: Vec3) -> f64 {
        match self {
            SizeField::Uniform { h } => *h,
            SizeField::RadialLinear {
                base,
                cutoff,
                falloff,
            } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                if rho < *cutoff {
                    (1.0 - falloff * rho / cutoff) * base
                } else {
                    (1.0 - falloff) * base
                }
            }
            SizeField::Discrete(g) => {
                let i = (((x.x - g.bbox_min.x) / g.cell).floor() as isize)
                    .clamp(0, g.nx as isize - 1) as usize;
                let j = (((x.y - g.bbox_min.y) / g.cell).floor() as isize)
                    .clamp(0, g.ny as isize - 1) as usize;
                let k = if g.nz == 1 {
                    0
                } else {
                    (((x.z - g.bbox_min.z) / g.cell).floor() as isize)
                        .clamp(0, g.nz as isize - 1) as usize
                };
                g.values[(k * g.ny + j) * g.nx + i]
            }
        }
    }

    /// Pairwise target size: the arithmetic mean of the endpoint sizes.
    pub fn pair_size(&self, a: Vec3, b: Vec3) -> f64 {
        (self.size_at(a) + self.size_at(b)) / 2.0
    }

    /// Global minimum of the field; drives cell sizing, boundary augmentation,
    /// and post-optimization thresholds.
    pub fn h_min(&self) -> f64 {
        match self {
            SizeField::Uniform { h } => *h,
            SizeField::RadialLinear { base, falloff, .. } => (1.0 - falloff) * base,
            SizeField::Discrete(g) => g.h_min,
        }
    }

    /// Global maximum of the field; bounds the kernel support `2 h(x)` and
    /// therefore the neighbor-search cell size.
    pub fn h_max(&self) -> f64 {
        match self {
            SizeField::Uniform { h } => *h,
            SizeField::RadialLinear { base, .. } => *base,
            SizeField::Discrete(g) => g.values.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, SizeField::Uniform { .. })
    }
}

/// Barycentric interpolation of anchor sizes at `x` within its containing
/// background simplex; points caught by no simplex (numerical corner cases)
/// use the least-negative simplex, clamped by the caller to the anchor range.
fn interpolate(x: Vec3, points: &[Vec3], sizes: &[f64], simplices: &[Vec<usize>]) -> f64 {
    let mut best: Option<(f64, f64)> = None; // (min barycentric coordinate, value)
    for s in simplices {
        let coords = barycentric(x, s, points);
        let Some(coords) = coords else { continue };
        let min_c = coords.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let value: f64 = coords
            .iter()
            .zip(s.iter())
            .map(|(&c, &vi)| c * sizes[vi])
            .sum();
        if best.map(|(m, _)| min_c > m).unwrap_or(true) {
            best = Some((min_c, value));
        }
        if min_c >= -1e-12 {
            return value;
        }
    }
    best.map(|(_, v)| v).unwrap_or(sizes[0])
}

fn barycentric(x: Vec3, simplex: &[usize], points: &[Vec3]) -> Option<Vec<f64>> {
    match simplex.len() {
        3 => {
            let [a, b, c] = [points[simplex[0]], points[simplex[1]], points[simplex[2]]];
            let denom = (b - a).cross(c - a).z;
            if denom == 0.0 {
                return None;
            }
            let beta = (x - a).cross(c - a).z / denom;
            let gamma = (b - a).cross(x - a).z / denom;
            Some(vec![1.0 - beta - gamma, beta, gamma])
        }
        4 => {
            let [a, b, c, d] = [
                points[simplex[0]],
                points[simplex[1]],
                points[simplex[2]],
                points[simplex[3]],
            ];
            let denom = (b - a).cross(c - a).dot(d - a);
            if denom == 0.0 {
                return None;
            }
            let beta = (x - a).cross(c - a).dot(d - a) / denom;
            let gamma = (b - a).cross(x - a).dot(d - a) / denom;
            let delta = (b - a).cross(c - a).dot(x - a) / denom;
            Some(vec![1.0 - beta - gamma - delta, beta, gamma, delta])
        }
        _ => None,
    }
}
