//! Scene configuration: a medium, a set of rays, a model and the
//! integrator settings, read from JSON.

use std::path::{Path, PathBuf};

use finsler_core::dynamics::{Fermat, Geodesic, IntegratorConfig, RayRhs, Spin};
use finsler_core::media::{build_metric, Expr, Field, Metric, MediumSpec};
use finsler_core::spinoptics::SpinConstants;
use finsler_core::tensor::{norm, Vec3};
use finsler_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Geodesic,
    Fermat,
    Spin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    pub x0: Vec3,
    pub u0: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory receiving one file per ray; relative paths are resolved
    /// against the directory of the configuration file.
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub medium: MediumSpec,
    pub rays: Vec<RaySpec>,
    pub model: Model,
    /// Spin model only; defaults to `p = 1`, `s = 0.01`.
    #[serde(default)]
    pub constants: Option<SpinConstants>,
    /// Fermat model only: the refractive index. When absent the medium must
    /// be conformal, and its index is used over a Euclidean base.
    #[serde(default)]
    pub index: Option<Field>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub output: OutputSpec,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Read and validate a configuration; relative output paths are
    /// resolved against the configuration's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if cfg.output.path.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.output.path = base.join(&cfg.output.path);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.integrator.validate()?;
        if self.rays.is_empty() {
            return Err(Error::Config("scene has no rays".into()).into());
        }
        for (i, r) in self.rays.iter().enumerate() {
            if norm(&r.u0) == 0.0 || !r.u0.iter().chain(&r.x0).all(|v| v.is_finite()) {
                return Err(Error::Config(format!("ray {i}: u0 must be finite and nonzero")).into());
            }
        }
        if let Some(k) = &self.constants {
            k.validate()?;
            if self.model != Model::Spin {
                return Err(Error::Config("constants are only used by the spin model".into()).into());
            }
        }
        if self.index.is_some() && self.model != Model::Fermat {
            return Err(Error::Config("index is only used by the fermat model".into()).into());
        }
        Ok(())
    }

    pub fn spin_constants(&self) -> SpinConstants {
        self.constants.unwrap_or_default()
    }

    pub fn rays(&self) -> Vec<(Vec3, Vec3)> {
        self.rays.iter().map(|r| (r.x0, r.u0)).collect()
    }
}

/// Built media for a scene, holding whatever the selected model borrows.
pub struct SceneMedia {
    metric: Metric,
    index: Option<Expr>,
}

impl SceneMedia {
    pub fn build(cfg: &SceneConfig) -> CliResult<Self> {
        if cfg.model != Model::Fermat {
            return Ok(SceneMedia {
                metric: build_metric(&cfg.medium)?,
                index: None,
            });
        }
        match (&cfg.index, &cfg.medium) {
            (Some(index), medium) => Ok(SceneMedia {
                metric: build_metric(medium)?,
                index: Some(index.0.clone()),
            }),
            (None, MediumSpec::Conformal { index }) => Ok(SceneMedia {
                metric: build_metric(&MediumSpec::Euclidean {})?,
                index: Some(index.0.clone()),
            }),
            (None, _) => Err(Error::Config("the fermat model needs an index or a conformal medium".into()).into()),
        }
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Right-hand side for the model; `constants` applies to the spin model.
    pub fn rhs(&self, model: Model, constants: SpinConstants) -> Box<dyn RayRhs + '_> {
        match model {
            Model::Geodesic => Box::new(Geodesic(&self.metric)),
            Model::Fermat => Box::new(Fermat {
                base: &self.metric,
                index: self.index.as_ref().expect("fermat media carry an index"),
            }),
            Model::Spin => Box::new(Spin {
                metric: &self.metric,
                constants,
            }),
        }
    }
}
