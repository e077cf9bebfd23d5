//! Experiment configuration: a strict JSON schema and its validation.

use std::path::{Path, PathBuf};

use reduced_schwarz::decomp::{build_layout, DirichletData, Layout};
use reduced_schwarz::grid::{load_raster, GridSpec, MediaField};
use reduced_schwarz::schwarz::SchwarzContext;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub media: MediaConfig,
    pub layout: LayoutConfig,
    pub boundary: BoundaryConfig,
    pub rsvd: RsvdSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediaConfig {
    Oscillatory { epsilon: f64 },
    Raster { raster_path: PathBuf },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_patches: usize,
    pub patch_width: f64,
    #[serde(default)]
    pub stride: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// `sin(π/3·(x − 1/3)) · sin(3π(y − 1/4))`
    Sine,
    /// `c + cx·x + cy·y`
    Affine {
        #[serde(default)]
        c: f64,
        #[serde(default)]
        cx: f64,
        #[serde(default)]
        cy: f64,
    },
    File { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsvdSection {
    pub k: usize,
    pub p: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMethod {
    Vanilla,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub method: RunMethod,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub track_history: bool,
}

/// A validated configuration with every geometric object built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub media: MediaField,
    pub layout: Layout,
    pub boundary: DirichletData,
}

fn field_err(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {e}"))
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// Builds grid, media, layout and boundary data; relative file paths are
    /// taken relative to `base`.
    pub fn validate(&self, base: Option<&Path>) -> Result<Setup, CliError> {
        let g = self.grid;
        let grid = GridSpec::new(g.lx, g.ly, g.h).map_err(|e| field_err("grid", e))?;
        let media = match &self.media {
            MediaConfig::Oscillatory { epsilon } => MediaField::oscillatory(*epsilon, &grid).map_err(|e| field_err("media.epsilon", e))?,
            MediaConfig::Raster { raster_path } => {
                load_raster(resolve(base, raster_path)).map_err(|e| field_err("media.raster_path", e))?
            }
            MediaConfig::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(field_err("media.value", format!("must be positive, got {value}")));
                }
                MediaField::constant(*value, &grid).map_err(|e| field_err("media.value", e))?
            }
        };
        media.check_against(&grid).map_err(|e| field_err("media", e))?;
        let l = self.layout;
        let layout = build_layout(&grid, l.n_patches, l.patch_width, l.stride).map_err(|e| field_err("layout", e))?;
        let boundary = match &self.boundary {
            BoundaryConfig::Sine => DirichletData::builtin_sine(&grid),
            BoundaryConfig::Affine { c, cx, cy } => {
                let (c, cx, cy) = (*c, *cx, *cy);
                DirichletData::from_fn(&grid, move |x, y| c + cx * x + cy * y)
            }
            BoundaryConfig::File { file } => {
                DirichletData::load(&grid, resolve(base, file)).map_err(|e| field_err("boundary.file", e))?
            }
        };
        let setup = Setup {
            config: self.clone(),
            grid,
            media,
            layout,
            boundary,
        };
        setup.check_rank(self.rsvd.k, self.rsvd.p, "rsvd")?;
        Ok(setup)
    }
}

impl Setup {
    /// Rank limit `min(boundary, confinement)` over all patches.
    pub fn rank_limit(&self) -> usize {
        (0..self.layout.n_patches)
            .map(|p| {
                self.layout
                    .patch_rect(p)
                    .boundary_nodes()
                    .len()
                    .min(self.layout.confine_rect(p).n_nodes())
            })
            .min()
            .unwrap_or(0)
    }

    pub fn check_rank(&self, k: usize, p: usize, path: &str) -> Result<(), CliError> {
        let limit = self.rank_limit();
        if k == 0 || k + p > limit {
            return Err(field_err(path, format!("k = {k}, p = {p}: need 1 ≤ k and k + p ≤ {limit}")));
        }
        Ok(())
    }

    pub fn context(&self) -> Result<SchwarzContext, CliError> {
        Ok(SchwarzContext::new(self.grid, self.media.clone(), self.layout.clone(), self.boundary.clone())?)
    }
}

/// The configuration of the strip experiment: `[0,10]×[0,1]`, `h = 1/40`,
/// `ε = 1/16`, 13 unit strips with stride 3/4, rank 70.
pub fn strip_experiment() -> ExperimentConfig {
    ExperimentConfig {
        grid: GridConfig {
            lx: 10.0,
            ly: 1.0,
            h: 0.025,
        },
        media: MediaConfig::Oscillatory { epsilon: 0.0625 },
        layout: LayoutConfig {
            n_patches: 13,
            patch_width: 1.0,
            stride: Some(0.75),
        },
        boundary: BoundaryConfig::Sine,
        rsvd: RsvdSection { k: 70, p: 10, seed: 2024 },
        run: RunSection {
            method: RunMethod::Reduced,
            t: 50,
            track_history: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_experiment_round_trips_and_validates() {
        let c = strip_experiment();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let s = c.validate(None).unwrap();
        assert_eq!(s.grid.n_nodes(), 16441);
        assert_eq!(s.rank_limit(), 160);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(strip_experiment()).unwrap();
        v["grid"]["hh"] = serde_json::json!(1.0);
        let e = ExperimentConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(e.contains("grid"), "{e}");
        let mut v = serde_json::to_value(strip_experiment()).unwrap();
        v["media"]["raster_path"] = serde_json::json!("x");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(strip_experiment()).unwrap();
        v["extra"] = serde_json::json!({});
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn geometry_errors_name_their_field() {
        let mut c = strip_experiment();
        c.grid.h = 0.03;
        let e = c.validate(None).unwrap_err().to_string();
        assert!(e.contains("grid"), "{e}");
        let mut c = strip_experiment();
        c.layout.stride = Some(0.7);
        assert!(c.validate(None).unwrap_err().to_string().contains("layout"));
        let mut c = strip_experiment();
        c.rsvd.k = 155;
        assert!(c.validate(None).unwrap_err().to_string().contains("rsvd"));
    }
}
