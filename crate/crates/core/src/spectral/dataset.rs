//! On-disk dataset layout:
//!
//! ```text
//! <root>/response.csv         camera response (optional; default otherwise)
//! <root>/cube/<name>.hsc      ground-truth cubes
//! <root>/clean/<name>.png     noise-free renders
//! <root>/real/<name>.png      degraded renders
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{default_response, io, ResponseFunction, RgbImage, SpectralCube};
use crate::error::{Error, Result};

pub const RESPONSE_FILE: &str = "response.csv";
pub const CUBE_DIR: &str = "cube";

/// Which RGB rendering a model sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    #[default]
    Clean,
    Real,
}

impl Track {
    pub fn dir_name(self) -> &'static str {
        match self {
            Track::Clean => "clean",
            Track::Real => "real",
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Track::Clean),
            "real" => Ok(Track::Real),
            _ => Err(Error::config(format!("track must be clean or real, got {s:?}"))),
        }
    }
}

/// RGB inputs paired with ground-truth cubes.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub names: Vec<String>,
    pub rgb: Vec<RgbImage>,
    pub cubes: Vec<SpectralCube>,
    pub response: ResponseFunction,
}

impl Dataset {
    pub fn new(names: Vec<String>, rgb: Vec<RgbImage>, cubes: Vec<SpectralCube>, response: ResponseFunction) -> Result<Self> {
        if names.len() != rgb.len() || rgb.len() != cubes.len() {
            return Err(Error::shape("dataset names, images and cubes differ in count"));
        }
        for ((name, r), c) in names.iter().zip(&rgb).zip(&cubes) {
            if r.height() != c.height() || r.width() != c.width() {
                return Err(Error::shape(format!("{name}: RGB and cube sizes differ")));
            }
        }
        Ok(Self {
            names,
            rgb,
            cubes,
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn load(root: &Path, track: Track) -> Result<Self> {
        let response = load_response_or_default(root)?;
        let names = list_cubes(&root.join(CUBE_DIR))?;
        let mut rgb = Vec::with_capacity(names.len());
        let mut cubes = Vec::with_capacity(names.len());
        for name in &names {
            cubes.push(io::load_hsc(&cube_path(root, name))?);
            rgb.push(io::load_rgb(&rgb_path(root, track, name))?);
        }
        Self::new(names, rgb, cubes, response)
    }
}

pub fn cube_path(root: &Path, name: &str) -> PathBuf {
    root.join(CUBE_DIR).join(format!("{name}.hsc"))
}

pub fn rgb_path(root: &Path, track: Track, name: &str) -> PathBuf {
    root.join(track.dir_name()).join(format!("{name}.png"))
}

pub fn load_response_or_default(root: &Path) -> Result<ResponseFunction> {
    let p = root.join(RESPONSE_FILE);
    if p.exists() {
        io::load_response(&p)
    } else {
        Ok(default_response())
    }
}

/// Stems of every `.hsc` file in `dir`, sorted.
pub fn list_cubes(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "hsc") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_owned());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::config(format!("no .hsc cubes in {}", dir.display())));
    }
    Ok(names)
}
