//! Run configuration: a TOML file with optional command-line overrides.

use crate::{Error, Result};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub size: Option<SizeSpec>,
    /// Fixed node positions in input coordinates.
    #[serde(default)]
    pub fixed: Vec<[f64; 3]>,
    #[serde(default)]
    pub flow: FlowOverrides,
    #[serde(default)]
    pub postopt: PostOptSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SizeSpec {
    Uniform {
        h: f64,
    },
    Radial {
        base: f64,
        cutoff: f64,
        falloff: f64,
    },
    Anchors {
        /// Inline anchors as `[x, y, z, h]` rows.
        #[serde(default)]
        anchors: Vec<[f64; 4]>,
        anchors_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FlowOverrides {
    pub seed: Option<u64>,
    pub damping: Option<f64>,
    pub gain: Option<f64>,
    pub stiffness: Option<f64>,
    pub max_steps: Option<usize>,
    pub injection_speed_factor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostOptSpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_true() -> bool {
    true
}

impl Default for PostOptSpec {
    fn default() -> PostOptSpec {
        PostOptSpec { enabled: true }
    }
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Anchor file: whitespace-separated `x y z h` rows, `#` comments.
pub fn parse_anchor_file(path: &Path) -> Result<Vec<[f64; 4]>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: ln + 1,
                msg: format!("expected `x y z h`, got {} field(s)", fields.len()),
            });
        }
        let mut row = [0.0f64; 4];
        for (k, s) in fields.iter().enumerate() {
            row[k] = s.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: ln + 1,
                msg: format!("bad number {s:?}"),
            })?;
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(Error::SizeFieldInput(format!(
            "{}: no anchors",
            path.display()
        )));
    }
    Ok(out)
}
