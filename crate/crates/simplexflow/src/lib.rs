//! Unstructured simplex mesh generation for watertight domains.
//!
//! The generator fills a triangulated 2D region or closed 3D surface with
//! mutually repelling particles injected at interior sources, lets the flow
//! settle under viscous damping, triangulates the particle positions, and in
//! 3D improves the tetrahedra with a hybrid mass-spring / projection pass.

pub mod config;
pub mod containment;
pub mod domain;
pub mod flow;
pub mod geom;
pub mod mesh_io;
pub mod postopt;
pub mod sizefield;
pub mod spatial;
pub mod triangulate;

pub use domain::MeshDomain;
pub use flow::{FlowConfig, FlowResult};
pub use sizefield::SizeField;
pub use triangulate::SimplexMesh;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("unsupported face at {path}:{line}: faces must be triangles")]
    UnsupportedFace { path: String, line: usize },
    #[error("surface is not watertight: {count} edge(s) not shared by exactly two triangles, e.g. {examples:?}")]
    NotWatertight {
        count: usize,
        examples: Vec<(usize, usize)>,
    },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("degenerate normal at {element}: incident normals cancel")]
    DegenerateNormal { element: String },
    #[error("no boundary vertex in neighbor cells at ({x}, {y}, {z}); speed cap or augmentation violated")]
    SearchRadiusViolation { x: f64, y: f64, z: f64 },
    #[error("coincident particle pair ({a}, {b}) reached force evaluation")]
    Overlap { a: usize, b: usize },
    #[error("spatial index inconsistency: {0}")]
    GridConsistency(String),
    #[error("size field input: {0}")]
    SizeFieldInput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain filtering removed every element; particle set too sparse")]
    EmptyAfterFilter,
    #[error("mesh is empty; edge-length error undefined")]
    EmptyMesh,
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
