//! The `trace` and `compare` commands.

use std::path::{Path, PathBuf};

use finsler_core::dynamics::{integrate_batch, transverse_shift, IntegratorConfig, Termination, Trajectory};
use finsler_core::tensor::{norm, Vec3};
use finsler_core::Error;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{read_trajectory, write_trajectory};
use crate::scene::{Model, SceneConfig, SceneMedia};

/// Exit code when every ray ended on the singular locus.
pub const EXIT_ALL_SINGULAR: i32 = 3;

#[derive(Debug, Serialize)]
pub struct RaySummary {
    pub ray: usize,
    pub file: Option<PathBuf>,
    pub samples: usize,
    pub termination: Termination,
}

/// A ray that could not start because its initial state is singular is
/// reported as terminating on the locus at `t = 0`; any other start-up
/// failure is an error of the scene.
fn settle(r: finsler_core::Result<Trajectory>) -> CliResult<Option<Trajectory>> {
    match r {
        Ok(t) => Ok(Some(t)),
        Err(Error::SingularLocus { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn singular(t: &Option<Trajectory>) -> bool {
    match t {
        None => true,
        Some(t) => matches!(t.termination, Termination::SingularLocus { .. }),
    }
}

/// Integrate every ray of the scene and write one file per ray.
pub fn trace(cfg: &SceneConfig) -> CliResult<(Vec<RaySummary>, i32)> {
    let media = SceneMedia::build(cfg)?;
    let rhs = media.rhs(cfg.model, cfg.spin_constants());
    let results = integrate_batch(&*rhs, &cfg.rays(), &cfg.integrator);
    let trajectories = results.into_iter().map(settle).collect::<CliResult<Vec<_>>>()?;

    let dir = &cfg.output.path;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut summary = Vec::new();
    for (ray, t) in trajectories.iter().enumerate() {
        summary.push(match t {
            Some(t) => RaySummary {
                ray,
                file: Some(write_trajectory(dir, ray, t, cfg.output.format)?),
                samples: t.samples.len(),
                termination: t.termination.clone(),
            },
            None => RaySummary {
                ray,
                file: None,
                samples: 0,
                termination: Termination::SingularLocus { t: 0.0 },
            },
        });
    }
    let code = if trajectories.iter().all(singular) { EXIT_ALL_SINGULAR } else { 0 };
    Ok((summary, code))
}

#[derive(Debug, Serialize)]
pub struct ShiftRecord {
    pub ray: usize,
    /// Transverse part of `x₊ − x₋` at the end of the run.
    pub shift: Option<Vec3>,
    pub shift_magnitude: Option<f64>,
    /// Present when a helicity ended on the singular locus and no shift exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<[Termination; 2]>,
}

fn record(ray: usize, plus: &Trajectory, minus: &Trajectory) -> CliResult<ShiftRecord> {
    let s = transverse_shift(plus, minus, None)?;
    Ok(ShiftRecord {
        ray,
        shift: Some(s.transverse),
        shift_magnitude: Some(norm(&s.transverse)),
        termination: None,
    })
}

/// Run a spin scene with `+|s|` and `−|s|` on a common output grid and
/// report the transverse separation per ray.
pub fn compare(cfg: &SceneConfig) -> CliResult<(Vec<ShiftRecord>, i32)> {
    if cfg.model != Model::Spin {
        return Err(Error::Config("compare needs a spin scene".into()).into());
    }
    let media = SceneMedia::build(cfg)?;
    let k = cfg.spin_constants();
    let plus_k = finsler_core::spinoptics::SpinConstants { s: k.s.abs(), ..k };
    let integrator = IntegratorConfig {
        output_interval: Some(cfg.integrator.output_interval.unwrap_or(cfg.integrator.t_end)),
        ..cfg.integrator
    };
    let rays = cfg.rays();
    let run = |k| -> CliResult<Vec<Option<Trajectory>>> {
        let rhs = media.rhs(Model::Spin, k);
        integrate_batch(&*rhs, &rays, &integrator).into_iter().map(settle).collect()
    };
    let plus = run(plus_k)?;
    let minus = run(plus_k.flipped())?;
    let mut out = Vec::new();
    let mut all_singular = true;
    for (ray, (p, m)) in plus.iter().zip(&minus).enumerate() {
        if singular(p) || singular(m) {
            let term = |t: &Option<Trajectory>| t.as_ref().map_or(Termination::SingularLocus { t: 0.0 }, |t| t.termination.clone());
            out.push(ShiftRecord {
                ray,
                shift: None,
                shift_magnitude: None,
                termination: Some([term(p), term(m)]),
            });
            continue;
        }
        all_singular = false;
        out.push(record(ray, p.as_ref().unwrap(), m.as_ref().unwrap())?);
    }
    Ok((out, if all_singular { EXIT_ALL_SINGULAR } else { 0 }))
}

/// Compare two trajectory files written by `trace`.
pub fn compare_files(plus: &Path, minus: &Path) -> CliResult<Vec<ShiftRecord>> {
    let (p, m) = (read_trajectory(plus)?, read_trajectory(minus)?);
    Ok(vec![record(0, &p, &m)?])
}
