//! 3D post-processing: tetrahedron quality measurement, mass-spring
//! relaxation of mid-quality tets, and plane-projection removal of poor tets,
//! alternated until the mesh settles.

use crate::containment;
use crate::domain::{Dimension, MeshDomain};
use crate::geom::{closest_points_between_segments, Vec3};
use crate::sizefield::SizeField;
use crate::spatial::UniformGrid;
use crate::triangulate::{self, dihedral_angle, SimplexMesh};
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct PostOptConfig {
    pub mass: f64,
    /// Spring stiffness; `None` resolves to a stable default (see below).
    pub stiffness: Option<f64>,
    pub damping: f64,
    pub dt: f64,
    /// Simulated time per relaxation pass; steps = t_total / dt.
    pub t_total: f64,
    /// Relaxation/outer-loop displacement tolerance as a fraction of h_min.
    pub disp_tol_factor: f64,
    /// Quality below which a tet is removed by projection.
    pub q_poor: f64,
    /// Upper quality bound for the corrective opposite-edge force.
    pub q_mid: f64,
    pub max_outer: usize,
    pub max_removal_passes: usize,
    pub verbose: bool,
}

impl Default for PostOptConfig {
    fn default() -> PostOptConfig {
        PostOptConfig {
            mass: 1.0,
            stiffness: None,
            damping: 0.08,
            dt: 0.5,
            t_total: 100.0,
            disp_tol_factor: 0.05,
            q_poor: 0.3,
            q_mid: 0.5,
            max_outer: 100,
            max_removal_passes: 10,
            verbose: false,
        }
    }
}

impl PostOptConfig {
    /// Explicit Euler with dt = 0.5 is only stable when
    /// stiffness * dt^2 * degree / mass stays below ~1; with interior node
    /// degrees around 14 that bounds the spring constant near 0.25
    /// independently of the edge-length scale, so the default is a fixed
    /// dimensionless 0.2 rather than a length-proportional value.
    fn resolved_stiffness(&self) -> f64 {
        self.stiffness.unwrap_or(0.2)
    }
}

#[derive(Debug, Clone)]
pub struct PostOptOutcome {
    pub mesh: SimplexMesh,
    pub converged: bool,
    pub iterations: usize,
    pub n_poor: usize,
    pub final_displacement: f64,
}

/// Tetrahedron regularity q = 6√6·V / (L_max·S): 1 for the regular
/// tetrahedron, 0 for coplanar input.
pub fn tet_quality(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let v = (b - a).cross(c - a).dot(d - a).abs() / 6.0;
    if v == 0.0 {
        return 0.0;
    }
    let edges = [b - a, c - a, d - a, c - b, d - b, d - c];
    let l_max = edges.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let s = (b - a).cross(c - a).norm() / 2.0
        + (b - a).cross(d - a).norm() / 2.0
        + (c - a).cross(d - a).norm() / 2.0
        + (c - b).cross(d - b).norm() / 2.0;
    if l_max == 0.0 || s == 0.0 {
        return 0.0;
    }
    6.0 * 6f64.sqrt() * v / (l_max * s)
}

const EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
/// Index of the opposite edge in `EDGES` for each edge.
const OPPOSITE: [usize; 6] = [5, 4, 3, 2, 1, 0];

/// The opposite-edge pair selected by the largest dihedral angle (ties broken
/// by the lexicographic edge order of `EDGES`).
pub fn opposite_edge_pair(p: [Vec3; 4]) -> ([usize; 2], [usize; 2]) {
    let mut best = 0usize;
    let mut best_angle = f64::NEG_INFINITY;
    for (ei, e) in EDGES.iter().enumerate() {
        let others: Vec<usize> = (0..4).filter(|k| !e.contains(k)).collect();
        let ang = dihedral_angle(p[e[0]], p[e[1]], p[others[0]], p[others[1]]);
        if ang > best_angle {
            best_angle = ang;
            best = ei;
        }
    }
    (EDGES[best], EDGES[OPPOSITE[best]])
}

/// Delaunay tets of `pos` keeping only strictly-interior centroids (boundary
/// centroids mark degenerate facet slivers); node indices are preserved (no
/// compaction) so they stay aligned with `pos`.
fn domain_tets(
    pos: &[Vec3],
    alive: &[bool],
    movable: &[bool],
    domain: &MeshDomain,
    boundary_grid: &UniformGrid,
    h_min: f64,
) -> Result<Vec<[usize; 4]>> {
    let back: Vec<usize> = (0..pos.len()).filter(|&i| alive[i]).collect();
    let compact: Vec<Vec3> = back.iter().map(|&i| pos[i]).collect();
    let dt = triangulate::delaunay(&compact, Dimension::Solid3D)?;
    let tets: Vec<[usize; 4]> = dt
        .tets
        .into_iter()
        .map(|t| [back[t[0]], back[t[1]], back[t[2]], back[t[3]]])
        .filter(|t| {
            let c = (pos[t[0]] + pos[t[1]] + pos[t[2]] + pos[t[3]]) / 4.0;
            if containment::locate_unbounded(c, boundary_grid, domain, h_min)
                != containment::Location::Inside
            {
                return false;
            }
            // Skin slivers on curved or creased walls: every vertex pinned,
            // quality unfixable by any allowed motion. Peel them rather than
            // let them churn the loop (their volume is bounded by the chordal
            // gap to the wall).
            if t.iter().all(|&v| !movable[v]) {
                let q = tet_quality(pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]);
                if q < 0.3 {
                    return false;
                }
            }
            true
        })
        .collect();
    if tets.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(tets)
}

fn unique_edges(tets: &[[usize; 4]]) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(tets.len() * 6);
    for t in tets {
        for e in &EDGES {
            let (a, b) = (t[e[0]], t[e[1]]);
            edges.push(if a < b { [a, b] } else { [b, a] });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// One relaxation pass over a fixed topology. Returns the mean displacement of
/// the movable nodes in the final step.
#[allow(clippy::too_many_arguments)]
fn mass_spring_pass(
    pos: &mut [Vec3],
    movable: &[bool],
    tets: &[[usize; 4]],
    edges: &[[usize; 2]],
    field: &SizeField,
    domain: &MeshDomain,
    boundary_grid: &UniformGrid,
    h_min: f64,
    cfg: &PostOptConfig,
) -> f64 {
    let n = pos.len();
    let k_s = cfg.resolved_stiffness();
    let steps = (cfg.t_total / cfg.dt).round() as usize;
    let v_max = 0.4 * (2.0 * h_min) / cfg.dt;
    let tol = cfg.disp_tol_factor * h_min;
    let n_movable = movable.iter().filter(|&&m| m).count().max(1);
    let mut vel = vec![Vec3::ZERO; n];
    let mut wall_budget = vec![0.0f64; n];
    let mut last_disp = f64::INFINITY;

    for _ in 0..steps {
        let mut forces = vec![Vec3::ZERO; n];
        // Spring force on every unique Delaunay edge.
        for e in edges {
            let (i, j) = (e[0], e[1]);
            let d = pos[j] - pos[i];
            let l = d.norm();
            if l == 0.0 {
                continue;
            }
            let h = field.pair_size(pos[i], pos[j]);
            let f = d * (k_s * (l - h) / l);
            forces[i] += f;
            forces[j] -= f;
        }
        // Corrective force pushing the opposite-edge pair of mid-quality tets
        // toward the aimed separation.
        for t in tets {
            let p = [pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]];
            let q = tet_quality(p[0], p[1], p[2], p[3]);
            if !(cfg.q_poor..=cfg.q_mid).contains(&q) {
                continue;
            }
            let (e1, e2) = opposite_edge_pair(p);
            let (c1, c2) = closest_points_between_segments(
                p[e1[0]],
                p[e1[1]],
                p[e2[0]],
                p[e2[1]],
            );
            let l_pq = c1.dist(c2);
            let Some(dir) = (c1 - c2).normalized() else { continue };
            // Aimed opposite-edge separation: sqrt(2/3) of the mean local
            // size. For a regular tet with edge h the true separation is
            // h/sqrt(2), so this target slightly over-opens mid-quality tets.
            let h_aim = (2f64 / 3.0).sqrt()
                * 0.5
                * (field.pair_size(p[e1[0]], p[e1[1]]) + field.pair_size(p[e2[0]], p[e2[1]]));
            let f = dir * (k_s * (h_aim - l_pq));
            for &k in &e1 {
                if movable[t[k]] {
                    forces[t[k]] += f;
                }
            }
            for &k in &e2 {
                if movable[t[k]] {
                    forces[t[k]] -= f;
                }
            }
        }

        let mut moved = 0.0;
        for i in 0..n {
            if !movable[i] {
                continue;
            }
            let f = forces[i] - vel[i] * (cfg.damping * cfg.mass / cfg.dt);
            let mut v = vel[i] + f * (cfg.dt / cfg.mass);
            let speed = v.norm();
            if speed > v_max {
                v = v * (v_max / speed);
            }
            let x = pos[i] + v * cfg.dt;
            let travel = pos[i].dist(x);
            let (x, v) = if wall_budget[i] > travel {
                wall_budget[i] -= travel;
                (x, v)
            } else {
                let (x, v, dist) =
                    containment::enforce_unbounded(x, v, boundary_grid, domain, h_min);
                wall_budget[i] = dist;
                (x, v)
            };
            moved += pos[i].dist(x);
            pos[i] = x;
            vel[i] = v;
        }
        last_disp = moved / n_movable as f64;
        if last_disp <= tol {
            break;
        }
    }
    last_disp
}

fn project_onto_plane(p: Vec3, origin: Vec3, normal: Vec3) -> Vec3 {
    p - normal * (p - origin).dot(normal)
}

/// Flatten one poor tet by the free-vertex-count case split. Returns the total
/// displacement applied, or `None` when every vertex is pinned: such a tet
/// cannot be acted on directly and is left for the surrounding relaxation and
/// retriangulation to dissolve.
fn flatten_tet(pos: &mut [Vec3], tet: [usize; 4], movable: &[bool]) -> Option<f64> {
    let free: Vec<usize> = (0..4).filter(|&k| movable[tet[k]]).collect();
    let fixed: Vec<usize> = (0..4).filter(|&k| !movable[tet[k]]).collect();
    let p = [pos[tet[0]], pos[tet[1]], pos[tet[2]], pos[tet[3]]];
    let plane: Option<(Vec3, Vec3)> = match free.len() {
        0 => return None,
        1 => {
            let [a, b, c] = [p[fixed[0]], p[fixed[1]], p[fixed[2]]];
            (b - a).cross(c - a).normalized().map(|n| (a, n))
        }
        2 => {
            let (a, b) = (p[fixed[0]], p[fixed[1]]);
            let mid = (p[free[0]] + p[free[1]]) / 2.0;
            (b - a).cross(mid - a).normalized().map(|n| (a, n))
        }
        3 => {
            // Plane through the fixed vertex and the midpoints of the two
            // shorter free-free edges.
            let pairs = [
                (free[0], free[1]),
                (free[0], free[2]),
                (free[1], free[2]),
            ];
            let longest = pairs
                .iter()
                .enumerate()
                .max_by(|(_, &(i, j)), (_, &(k, l))| {
                    p[i].dist(p[j]).partial_cmp(&p[k].dist(p[l])).unwrap()
                })
                .map(|(idx, _)| idx)
                .unwrap();
            let mids: Vec<Vec3> = pairs
                .iter()
                .enumerate()
                .filter(|&(idx, _)| idx != longest)
                .map(|(_, &(i, j))| (p[i] + p[j]) / 2.0)
                .collect();
            let a = p[fixed[0]];
            (mids[0] - a).cross(mids[1] - a).normalized().map(|n| (a, n))
        }
        _ => {
            let (e1, e2) = opposite_edge_pair(p);
            let centroid = (p[0] + p[1] + p[2] + p[3]) / 4.0;
            let d1 = p[e1[1]] - p[e1[0]];
            let d2 = p[e2[1]] - p[e2[0]];
            d1.cross(d2).normalized().map(|n| (centroid, n))
        }
    };
    // A degenerate defining plane (collinear support points) leaves the tet
    // for a later pass under a different configuration.
    let Some((origin, normal)) = plane else {
        return Some(0.0);
    };
    let mut flat = p;
    for &k in &free {
        flat[k] = project_onto_plane(p[k], origin, normal);
    }
    // Skip a projection that would collapse two vertices onto (almost) the
    // same point: the flattened sliver would be replaced by a near-duplicate
    // node pair whose surrounding tets are all degenerate.
    let l_max = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| p[i].dist(p[j]))
        .fold(0.0f64, f64::max);
    for i in 0..4 {
        for j in i + 1..4 {
            if flat[i].dist(flat[j]) < 0.05 * l_max {
                return Some(0.0);
            }
        }
    }
    let mut moved = 0.0;
    for &k in &free {
        moved += p[k].dist(flat[k]);
        pos[tet[k]] = flat[k];
    }
    Some(moved)
}

/// Projection-based removal of q < `q_poor` tets, retriangulating between
/// passes. Returns the remaining poor count, how many of those have no free
/// vertex at all, and the last pass displacement.
fn remove_poor_tets(
    pos: &mut [Vec3],
    movable: &[bool],
    alive: &[bool],
    domain: &MeshDomain,
    boundary_grid: &UniformGrid,
    h_min: f64,
    cfg: &PostOptConfig,
) -> Result<(Vec<[usize; 4]>, f64)> {
    let mut dd2 = 0.0;
    for _pass in 0..cfg.max_removal_passes {
        let tets = domain_tets(pos, alive, movable, domain, boundary_grid, h_min)?;
        let poor: Vec<[usize; 4]> = tets
            .iter()
            .copied()
            .filter(|t| {
                tet_quality(pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]) < cfg.q_poor
            })
            .collect();
        if poor.is_empty() {
            return Ok((Vec::new(), dd2));
        }
        let before: Vec<Vec3> = pos.to_vec();
        let mut moved = 0.0;
        for t in &poor {
            moved += flatten_tet(pos, *t, movable).unwrap_or(0.0);
        }
        // Two projections can land distinct nodes on the same point; back a
        // movable duplicate off toward where it was so the triangulation
        // keeps seeing distinct nodes.
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for i in 0..pos.len() {
            let key = [pos[i].x.to_bits(), pos[i].y.to_bits(), pos[i].z.to_bits()];
            if let Some(&j) = seen.get(&key) {
                let m = if movable[i] { i } else { j };
                if movable[m] {
                    if let Some(dir) = (before[m] - pos[m]).normalized() {
                        pos[m] += dir * (1e-3 * h_min);
                        moved += 1e-3 * h_min;
                    }
                }
            } else {
                seen.insert(key, i);
            }
        }
        // Projections can push a node slightly out of curved domains.
        for i in 0..pos.len() {
            if movable[i] {
                let (x, _, _) = containment::enforce_unbounded(
                    pos[i],
                    Vec3::ZERO,
                    boundary_grid,
                    domain,
                    h_min,
                );
                moved += pos[i].dist(x);
                pos[i] = x;
            }
        }
        dd2 = moved / pos.len() as f64;
        if dd2 <= 1e-12 * h_min {
            break;
        }
    }
    let tets = domain_tets(pos, alive, movable, domain, boundary_grid, h_min)?;
    let mut poor = Vec::new();
    for t in &tets {
        let q = tet_quality(pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]);
        if q < cfg.q_poor {
            poor.push(*t);
        }
    }
    Ok((poor, dd2))
}

/// The hybrid loop: alternate relaxation and poor-tet removal until the mesh
/// stops moving and no poor tet remains, or the iteration cap is hit.
pub fn hybrid_optimize(
    positions: &[Vec3],
    boundary_flags: &[bool],
    fixed_flags: &[bool],
    domain: &MeshDomain,
    field: &SizeField,
    cfg: &PostOptConfig,
) -> Result<PostOptOutcome> {
    assert_eq!(domain.dimension, Dimension::Solid3D);
    let h_min = field.h_min();
    let boundary_grid = UniformGrid::build(domain.boundary_points(), 2.0 * h_min);
    let mut pos = positions.to_vec();
    let mut movable: Vec<bool> = (0..pos.len())
        .map(|i| !boundary_flags[i] && !fixed_flags[i])
        .collect();
    let mut alive = vec![true; pos.len()];

    let tol = cfg.disp_tol_factor * h_min;
    let mut converged = false;
    let mut iterations = 0;
    let mut n_poor = usize::MAX;
    let mut poor_streak: HashMap<[usize; 4], usize> = HashMap::new();
    let mut disp = f64::INFINITY;
    while iterations < cfg.max_outer {
        iterations += 1;
        // Projection passes occasionally drive two nodes far closer than the
        // local size allows; every tet on such a pair is an unfixable sliver.
        // Extend the flow's overlap rule and drop one of the two.
        for i in 0..pos.len() {
            if !alive[i] {
                continue;
            }
            for j in i + 1..pos.len() {
                if !alive[j] || (!movable[i] && !movable[j]) {
                    continue;
                }
                if pos[i].dist(pos[j]) < 0.25 * field.pair_size(pos[i], pos[j]) {
                    let dead = if movable[j] { j } else { i };
                    alive[dead] = false;
                    movable[dead] = false;
                    if cfg.verbose {
                        eprintln!("post-opt: dropping near-duplicate node {dead}");
                    }
                }
            }
        }
        let tets = domain_tets(&pos, &alive, &movable, domain, &boundary_grid, h_min)?;
        let edges = unique_edges(&tets);
        disp = mass_spring_pass(
            &mut pos,
            &movable,
            &tets,
            &edges,
            field,
            domain,
            &boundary_grid,
            h_min,
            cfg,
        );
        let (poor_list, _) =
            remove_poor_tets(&mut pos, &movable, &alive, domain, &boundary_grid, h_min, cfg)?;
        n_poor = poor_list.len();
        if cfg.verbose {
            eprintln!(
                "post-opt iteration {iterations}: displacement {disp:.6}, poor tets {n_poor}"
            );
        }
        if disp <= tol && n_poor == 0 {
            converged = true;
            break;
        }
        let mut next_streak = HashMap::new();
        for t in &poor_list {
            let mut key = *t;
            key.sort_unstable();
            next_streak.insert(key, poor_streak.get(&key).copied().unwrap_or(0) + 1);
        }
        poor_streak = next_streak;
        // A sliver that projection flattens and retriangulation rebuilds over
        // and over is wedged between near-coplanar neighbours; there is no
        // room for all of its nodes. Delete the movable vertex implicated in
        // the most of these stubborn slivers (one per iteration) and let the
        // hole retriangulate.
        let mut kill_votes: HashMap<usize, usize> = HashMap::new();
        for t in &poor_list {
            let mut key = *t;
            key.sort_unstable();
            if poor_streak[&key] < 8 {
                continue;
            }
            for &v in t {
                if movable[v] {
                    *kill_votes.entry(v).or_insert(0) += 1;
                }
            }
        }
        if let Some((&node, _)) = kill_votes.iter().max_by_key(|&(&v, &n)| (n, v)) {
            alive[node] = false;
            movable[node] = false;
            if cfg.verbose {
                eprintln!("post-opt: deleting wedged node {node}");
            }
        }
    }

    let keep: Vec<usize> = (0..pos.len()).filter(|&i| alive[i]).collect();
    let kept_pos: Vec<Vec3> = keep.iter().map(|&i| pos[i]).collect();
    let kept_bf: Vec<bool> = keep.iter().map(|&i| boundary_flags[i]).collect();
    let kept_ff: Vec<bool> = keep.iter().map(|&i| fixed_flags[i]).collect();
    let mesh = triangulate::triangulate_in_domain(
        &kept_pos,
        &kept_bf,
        &kept_ff,
        domain,
        &boundary_grid,
        h_min,
    )?;
    Ok(PostOptOutcome {
        mesh,
        converged,
        iterations,
        n_poor,
        final_displacement: disp,
    })
}
