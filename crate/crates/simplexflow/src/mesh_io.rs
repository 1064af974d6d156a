//! Mesh and report serialization: OBJ output for planar meshes, node/ele
//! plain-text files for tetrahedral meshes, histogram CSV, and a metrics
//! summary.

use crate::domain::MeshDomain;
use crate::geom::{vec3, Vec3};
use crate::triangulate::{QualityReport, SimplexMesh};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Planar mesh as OBJ, with node coordinates mapped back into the input's
/// world plane.
pub fn write_obj_2d(mesh: &SimplexMesh, domain: &MeshDomain, path: &Path) -> Result<()> {
    let mut out = String::new();
    for &p in &mesh.nodes {
        let w = domain.to_world(p);
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", w.x, w.y, w.z).unwrap();
    }
    for t in &mesh.tris {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    write_file(path, &out)
}

/// Tetrahedral mesh as `.node` / `.ele` pair: 1-based indices, a boundary
/// marker column in the node file, 17 significant digits.
pub fn write_node_ele(mesh: &SimplexMesh, node_path: &Path, ele_path: &Path) -> Result<()> {
    let mut nodes = String::new();
    writeln!(nodes, "{} 3 0 1", mesh.nodes.len()).unwrap();
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(
            nodes,
            "{} {:.16e} {:.16e} {:.16e} {}",
            i + 1,
            p.x,
            p.y,
            p.z,
            if mesh.boundary_flags[i] { 1 } else { 0 }
        )
        .unwrap();
    }
    write_file(node_path, &nodes)?;

    let mut eles = String::new();
    writeln!(eles, "{} 4 0", mesh.tets.len()).unwrap();
    for (i, t) in mesh.tets.iter().enumerate() {
        writeln!(
            eles,
            "{} {} {} {} {}",
            i + 1,
            t[0] + 1,
            t[1] + 1,
            t[2] + 1,
            t[3] + 1
        )
        .unwrap();
    }
    write_file(ele_path, &eles)
}

/// Angle histogram as CSV rows `bin_start,bin_end,count`.
pub fn write_report_csv(report: &QualityReport, path: &Path) -> Result<()> {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, &count) in report.angle_histogram.iter().enumerate() {
        writeln!(out, "{},{},{}", 5 * i, 5 * (i + 1), count).unwrap();
    }
    write_file(path, &out)
}

pub fn write_metrics(
    report: &QualityReport,
    converged: bool,
    wall_time_s: f64,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "nodes = {}", report.n_nodes).unwrap();
    writeln!(out, "elements = {}", report.n_elements).unwrap();
    writeln!(out, "e_avg = {:.6}", report.e_avg).unwrap();
    writeln!(out, "min_angle = {:.4}", report.min_angle).unwrap();
    writeln!(out, "max_angle = {:.4}", report.max_angle).unwrap();
    match report.min_quality {
        Some(q) => writeln!(out, "min_q = {q:.6}").unwrap(),
        None => writeln!(out, "min_q = n/a").unwrap(),
    }
    writeln!(out, "converged = {converged}").unwrap();
    writeln!(out, "wall_time_s = {wall_time_s:.3}").unwrap();
    write_file(path, &out)
}

/// Reparse a `.node` file (round-trip checks and downstream tooling tests).
pub fn read_node(path: &Path) -> Result<(Vec<Vec3>, Vec<bool>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let label = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: label.clone(),
        line: 1,
        msg: "empty node file".into(),
    })?;
    let n: usize = header
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            path: label.clone(),
            line: 1,
            msg: "bad node header".into(),
        })?;
    let mut pts = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: label.clone(),
                line: ln + 1,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: label.clone(),
                line: ln + 1,
                msg: format!("bad number {s:?}"),
            })
        };
        pts.push(vec3(parse(fields[1])?, parse(fields[2])?, parse(fields[3])?));
        flags.push(fields[4] == "1");
    }
    Ok((pts, flags))
}

/// Reparse an `.ele` file; indices returned 0-based.
pub fn read_ele(path: &Path) -> Result<Vec<[usize; 4]>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let label = path.display().to_string();
    let mut tets = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: label.clone(),
                line: ln + 1,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let mut t = [0usize; 4];
        for (k, s) in fields[1..].iter().enumerate() {
            let idx: usize = s.parse().map_err(|_| Error::Parse {
                path: label.clone(),
                line: ln + 1,
                msg: format!("bad index {s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    path: label.clone(),
                    line: ln + 1,
                    msg: "indices are 1-based".into(),
                });
            }
            t[k] = idx - 1;
        }
        tets.push(t);
    }
    Ok(tets)
}
