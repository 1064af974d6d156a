//! Command-line front end: load a boundary OBJ, run the particle flow,
//! triangulate, optionally post-optimize (3D), and write mesh + reports.

use clap::Parser;
use simplexflow::config::{self, FileConfig, SizeSpec};
use simplexflow::domain::Dimension;
use simplexflow::geom::{vec3, Vec3};
use simplexflow::mesh_io;
use simplexflow::postopt::{self, PostOptConfig};
use simplexflow::triangulate::{self, QualityReport};
use simplexflow::{flow, Error, MeshDomain, SizeField};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "simplexflow",
    about = "Unstructured simplex mesh generation for watertight OBJ domains"
)]
struct Args {
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Boundary OBJ (triangulated planar region or closed surface).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Uniform target edge length; with anchors present, also anchors every
    /// original boundary vertex at this size.
    #[arg(long)]
    h: Option<f64>,
    /// Radial size preset as `base,cutoff,falloff`.
    #[arg(long, value_name = "BASE,CUTOFF,FALLOFF")]
    radial: Option<String>,
    /// Anchor file with `x y z h` rows (switches to the discrete field).
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Fixed node `x,y,z` or `x,y,z,h` (the fourth value adds a size anchor).
    /// Repeatable.
    #[arg(long = "fixed", value_name = "X,Y,Z[,H]")]
    fixed: Vec<String>,
    /// RNG seed for the particle flow.
    #[arg(long)]
    seed: Option<u64>,
    /// Step cap for the particle flow.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Skip 3D post-optimization.
    #[arg(long)]
    no_postopt: bool,
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: run finished without convergence; outputs written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &Args) -> simplexflow::Result<bool> {
    let start = Instant::now();
    let file_cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => FileConfig::default(),
    };

    let input = args
        .input
        .clone()
        .or(file_cfg.input.clone())
        .ok_or_else(|| Error::Config("no input OBJ given (--input or config)".into()))?;
    let out_dir = args
        .out
        .clone()
        .or(file_cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut domain = MeshDomain::load_obj(&input)?;

    // Fixed nodes: `x,y,z` with an optional fourth component that doubles as
    // a size anchor at that position.
    let mut fixed_world: Vec<Vec3> = file_cfg
        .fixed
        .iter()
        .map(|&[x, y, z]| vec3(x, y, z))
        .collect();
    let mut anchor_rows: Vec<[f64; 4]> = Vec::new();
    for spec in &args.fixed {
        let nums: Vec<f64> = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad --fixed value {spec:?}")))
            })
            .collect::<simplexflow::Result<_>>()?;
        match nums.len() {
            3 => fixed_world.push(vec3(nums[0], nums[1], nums[2])),
            4 => {
                fixed_world.push(vec3(nums[0], nums[1], nums[2]));
                anchor_rows.push([nums[0], nums[1], nums[2], nums[3]]);
            }
            n => {
                return Err(Error::Config(format!(
                    "--fixed takes 3 or 4 numbers, got {n}"
                )))
            }
        }
    }

    let field = build_field(args, &file_cfg, &domain, anchor_rows)?;
    let h_min = field.h_min();
    domain.augment_boundary(h_min);

    let fixed_sim: Vec<Vec3> = fixed_world.iter().map(|&p| domain.to_sim(p)).collect();

    let mut flow_cfg = flow::FlowConfig {
        verbose: args.verbose,
        ..flow::FlowConfig::default()
    };
    let o = &file_cfg.flow;
    if let Some(v) = args.seed.or(o.seed) {
        flow_cfg.seed = v;
    }
    if let Some(v) = o.damping {
        flow_cfg.damping = v;
    }
    if let Some(v) = o.gain {
        flow_cfg.gain = v;
    }
    if let Some(v) = o.stiffness {
        flow_cfg.stiffness = Some(v);
    }
    if let Some(v) = args.max_steps.or(o.max_steps) {
        flow_cfg.max_steps = v;
    }
    if let Some(v) = o.injection_speed_factor {
        flow_cfg.injection_speed_factor = v;
    }

    let result = flow::run(&domain, &field, &fixed_sim, &flow_cfg)?;
    let mut converged = result.converged;

    let boundary_grid =
        simplexflow::spatial::UniformGrid::build(domain.boundary_points(), 2.0 * h_min);
    let mut mesh = triangulate::triangulate_in_domain(
        &result.positions,
        &result.boundary_flags,
        &result.fixed_flags,
        &domain,
        &boundary_grid,
        h_min,
    )?;

    let run_postopt =
        domain.dimension == Dimension::Solid3D && !args.no_postopt && file_cfg.postopt.enabled;
    if run_postopt {
        let outcome = postopt::hybrid_optimize(
            &result.positions,
            &result.boundary_flags,
            &result.fixed_flags,
            &domain,
            &field,
            &PostOptConfig {
                verbose: args.verbose,
                ..PostOptConfig::default()
            },
        )?;
        converged = converged && outcome.converged;
        mesh = outcome.mesh;
    }

    let report = triangulate::quality_report(&mesh, &field)?;
    write_outputs(&out_dir, &mesh, &domain, &report, converged, start)?;
    if args.verbose {
        eprintln!(
            "{} nodes, {} elements, e_avg {:+.4}, converged = {converged}",
            report.n_nodes,
            report.n_elements,
            report.e_avg
        );
    }
    Ok(converged)
}

fn build_field(
    args: &Args,
    file_cfg: &FileConfig,
    domain: &MeshDomain,
    mut anchor_rows: Vec<[f64; 4]>,
) -> simplexflow::Result<SizeField> {
    if let Some(spec) = &args.radial {
        let nums: Vec<f64> = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad --radial value {spec:?}")))
            })
            .collect::<simplexflow::Result<_>>()?;
        if nums.len() != 3 {
            return Err(Error::Config("--radial takes base,cutoff,falloff".into()));
        }
        return Ok(SizeField::radial_linear(nums[0], nums[1], nums[2]));
    }

    match &file_cfg.size {
        Some(SizeSpec::Radial {
            base,
            cutoff,
            falloff,
        }) if args.h.is_none() => {
            return Ok(SizeField::radial_linear(*base, *cutoff, *falloff));
        }
        Some(SizeSpec::Anchors {
            anchors,
            anchors_file,
        }) => {
            anchor_rows.extend(anchors.iter().copied());
            if let Some(path) = anchors_file {
                anchor_rows.extend(config::parse_anchor_file(path)?);
            }
        }
        _ => {}
    }
    if let Some(path) = &args.anchors {
        anchor_rows.extend(config::parse_anchor_file(path)?);
    }

    let h_flag = args.h.or(match file_cfg.size {
        Some(SizeSpec::Uniform { h }) => Some(h),
        _ => None,
    });

    if !anchor_rows.is_empty() {
        let mut anchors: Vec<(Vec3, f64)> = anchor_rows
            .iter()
            .map(|&[x, y, z, h]| (domain.to_sim(vec3(x, y, z)), h))
            .collect();
        // A uniform h alongside anchors pins every original boundary vertex
        // at h, except where a user anchor already sits.
        if let Some(h) = h_flag {
            let tol = 1e-9 * (domain.bbox_max - domain.bbox_min).norm();
            for (vi, &p) in domain.vertices.iter().enumerate() {
                if domain.is_boundary_vertex[vi]
                    && !anchors.iter().any(|&(q, _)| q.dist(p) <= tol)
                {
                    anchors.push((p, h));
                }
            }
        }
        return SizeField::build_discrete(domain, &anchors);
    }

    match h_flag {
        Some(h) if h > 0.0 => Ok(SizeField::uniform(h)),
        Some(h) => Err(Error::Config(format!("h must be positive, got {h}"))),
        None => Err(Error::Config(
            "no size field given (--h, --radial, --anchors, or [size] in config)".into(),
        )),
    }
}

fn write_outputs(
    out_dir: &PathBuf,
    mesh: &triangulate::SimplexMesh,
    domain: &MeshDomain,
    report: &QualityReport,
    converged: bool,
    start: Instant,
) -> simplexflow::Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    match domain.dimension {
        Dimension::Planar2D => {
            mesh_io::write_obj_2d(mesh, domain, &out_dir.join("mesh.obj"))?;
        }
        Dimension::Solid3D => {
            mesh_io::write_node_ele(
                mesh,
                &out_dir.join("mesh.node"),
                &out_dir.join("mesh.ele"),
            )?;
        }
    }
    mesh_io::write_report_csv(report, &out_dir.join("report.csv"))?;
    mesh_io::write_metrics(
        report,
        converged,
        start.elapsed().as_secs_f64(),
        &out_dir.join("metrics.txt"),
    )
}
