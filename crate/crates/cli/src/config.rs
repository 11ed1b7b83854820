//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use mbo_core::geometry::MIN_SIDE_COUNT;
use mbo_core::kernel::{DEFAULT_TOLERANCE, SPECTRAL_VERTEX_CAP};
use mbo_core::{Backend, DensitySpec, DiscreteGeometry, SchemeConfig, ShapeSpec};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub scheme: SchemeConfig,
    pub seed: SeedConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seeds every random draw (verification trials); `--seed` overrides it.
    #[serde(default)]
    pub random_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    TorusGrid,
    CircleGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Vertices per axis.
    pub size: usize,
    /// Torus dimension; ignored for the circle.
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "uniform")]
    pub density: DensitySpec,
}

fn two() -> usize {
    2
}

fn uniform() -> DensitySpec {
    DensitySpec::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub backend: Backend,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { backend: Backend::Fourier, tolerance: DEFAULT_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub phases: usize,
    pub shapes: Vec<ShapeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Label image, one byte per vertex.
    Pgm,
    /// Raw fractional field with an `MBOF1` header.
    Mbof,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Write a snapshot every k steps; the initial and final fields are always written.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Pgm]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_directory(), snapshot_every: None, formats: default_formats() }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.geometry.size as f64
    }

    /// Checks everything that can be checked without building the geometry.
    pub fn validate(&self) -> Result<(), Failure> {
        let invalid = |msg: String| Err(Failure::Validation(msg));
        let g = &self.geometry;
        if g.size < MIN_SIDE_COUNT {
            return invalid(format!("geometry.size = {} is below {MIN_SIDE_COUNT}", g.size));
        }
        if g.kind == GeometryKind::TorusGrid && !(1..=2).contains(&g.dim) {
            return invalid(format!("geometry.dim = {} must be 1 or 2", g.dim));
        }
        let n = self.n_vertices();
        if let DensitySpec::Table { values } = &g.density {
            if values.len() != n {
                return invalid(format!("density table has {} values for {n} vertices", values.len()));
            }
        }
        if !(self.kernel.tolerance > 0.0 && self.kernel.tolerance < 1.0) {
            return invalid(format!("kernel.tolerance = {} must lie in (0, 1)", self.kernel.tolerance));
        }
        if self.kernel.backend == Backend::Fourier && g.density != DensitySpec::Uniform {
            return invalid("kernel.backend fourier requires uniform density".into());
        }
        if self.kernel.backend == Backend::Spectral && n > SPECTRAL_VERTEX_CAP {
            return invalid(format!("spectral backend is capped at {SPECTRAL_VERTEX_CAP} vertices, geometry has {n}"));
        }
        self.scheme.validate().map_err(|e| Failure::Validation(format!("scheme: {e}")))?;
        if self.scheme.snapshot_every.is_some() {
            return invalid("scheme.snapshot_every is not used here; set output.snapshot_every".into());
        }
        if self.seed.phases == 0 {
            return invalid("seed.phases must be at least 1".into());
        }
        for shape in &self.seed.shapes {
            let phase = match shape {
                ShapeSpec::Disk { phase, .. }
                | ShapeSpec::Stripe { phase, .. }
                | ShapeSpec::HalfSpace { phase, .. } => Some(*phase),
                _ => None,
            };
            if let Some(p) = phase.filter(|p| *p >= self.seed.phases) {
                return invalid(format!("shape assigns phase {p} but seed.phases = {}", self.seed.phases));
            }
        }
        if self.output.snapshot_every == Some(0) {
            return invalid("output.snapshot_every must be positive".into());
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        match self.geometry.kind {
            GeometryKind::TorusGrid => self.geometry.size.pow(self.geometry.dim as u32),
            GeometryKind::CircleGrid => self.geometry.size,
        }
    }

    /// `(width, height)` of label images.
    pub fn image_shape(&self) -> (usize, usize) {
        match (self.geometry.kind, self.geometry.dim) {
            (GeometryKind::TorusGrid, 2) => (self.geometry.size, self.geometry.size),
            _ => (self.geometry.size, 1),
        }
    }

    pub fn build_geometry(&self) -> Result<DiscreteGeometry, Failure> {
        let g = &self.geometry;
        let geom = match g.kind {
            GeometryKind::TorusGrid => DiscreteGeometry::torus_grid(g.size, g.dim, &g.density),
            GeometryKind::CircleGrid => DiscreteGeometry::circle_grid(g.size, &g.density),
        };
        geom.map_err(Failure::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "geometry": {"kind": "torus_grid", "size": 16},
            "scheme": {"h": 0.0625, "n_steps": 2},
            "seed": {"phases": 2, "shapes": [{"type": "disk", "center": [0.5, 0.5], "radius": 0.25, "phase": 1}]}
        })
    }

    #[test]
    fn defaults_fill_in() {
        let c: ExperimentConfig = serde_json::from_value(base()).unwrap();
        assert_eq!(c.kernel.backend, Backend::Fourier);
        assert_eq!(c.output.formats, vec![Format::Pgm]);
        assert_eq!(c.geometry.dim, 2);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = base();
        v["geometry"]["sides"] = 3.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = base();
        v["extra"] = true.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn validation_errors() {
        let cases = [
            ("/geometry/size", serde_json::json!(2)),
            ("/kernel", serde_json::json!({"backend": "spectral"})),
            ("/scheme/h", serde_json::json!(-1.0)),
            ("/seed/phases", serde_json::json!(1)),
        ];
        for (ptr, value) in cases {
            let mut v = base();
            if ptr == "/kernel" {
                v["kernel"] = value;
                v["geometry"]["size"] = 128.into();
            } else {
                *v.pointer_mut(ptr).unwrap() = value;
            }
            let c: ExperimentConfig = serde_json::from_value(v).unwrap();
            assert!(matches!(c.validate(), Err(Failure::Validation(_))), "{ptr}");
        }
    }
}
