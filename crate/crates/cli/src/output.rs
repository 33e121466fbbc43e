//! Trajectory files. Numbers are written in shortest round-trip decimal so
//! identical runs produce byte-identical files.

use std::path::Path;

use finsler_core::dynamics::{RayState, Sample, Termination, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scene::Format;

/// The frozen CSV header.
pub const CSV_HEADER: [&str; 10] = ["t", "x1", "x2", "x3", "u1", "u2", "u3", "F", "Delta", "Sigma"];

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trajectory_csv(tr: &Trajectory) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |source| CliError::Csv {
        path: "<memory>".into(),
        source,
    };
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for s in &tr.samples {
        let st = &s.state;
        let mut row: Vec<String> = vec![fmt_f64(st.t)];
        row.extend(st.x.iter().chain(&st.u).map(|v| fmt_f64(*v)));
        row.push(fmt_f64(1.0 + s.f_drift));
        row.push(opt(s.delta));
        row.push(opt(s.sigma));
        w.write_record(&row).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonSample {
    t: f64,
    x: [f64; 3],
    u: [f64; 3],
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "Delta")]
    delta: Option<f64>,
    #[serde(rename = "Sigma")]
    sigma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTrajectory {
    ray: usize,
    termination: serde_json::Value,
    samples: Vec<JsonSample>,
}

pub fn trajectory_json(ray: usize, tr: &Trajectory) -> String {
    let doc = JsonTrajectory {
        ray,
        termination: serde_json::to_value(&tr.termination).expect("termination serializes"),
        samples: tr
            .samples
            .iter()
            .map(|s| JsonSample {
                t: s.state.t,
                x: s.state.x,
                u: s.state.u,
                f: 1.0 + s.f_drift,
                delta: s.delta,
                sigma: s.sigma,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("trajectory serializes");
    text.push('\n');
    text
}

pub fn file_name(ray: usize, format: Format) -> String {
    format!("ray_{ray:03}.{}", format.extension())
}

pub fn write_trajectory(dir: &Path, ray: usize, tr: &Trajectory, format: Format) -> CliResult<std::path::PathBuf> {
    let path = dir.join(file_name(ray, format));
    let text = match format {
        Format::Csv => trajectory_csv(tr)?,
        Format::Json => trajectory_json(ray, tr),
    };
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn sample(t: f64, x: [f64; 3], u: [f64; 3], f: f64, delta: Option<f64>, sigma: Option<f64>) -> Sample {
    Sample {
        state: RayState { t, x, u },
        f_drift: f - 1.0,
        delta,
        sigma,
    }
}

/// Read a trajectory file written by `trace` (format chosen by extension).
/// The termination reason is not stored in CSV and reads back as reached.
pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let doc: JsonTrajectory = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        return Ok(Trajectory {
            samples: doc.samples.into_iter().map(|s| sample(s.t, s.x, s.u, s.f, s.delta, s.sigma)).collect(),
            termination: Termination::ReachedEnd,
        });
    }
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(wrap)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::Usage(format!("{}: unexpected CSV header", path.display())));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(wrap)?;
        let bad = || CliError::Usage(format!("{}: malformed row {}", path.display(), line + 2));
        let num = |i: usize| rec.get(i).and_then(|f| f.parse::<f64>().ok()).ok_or_else(bad);
        let maybe = |i: usize| -> CliResult<Option<f64>> {
            match rec.get(i) {
                Some("") => Ok(None),
                Some(f) => f.parse().map(Some).map_err(|_| bad()),
                None => Err(bad()),
            }
        };
        samples.push(sample(
            num(0)?,
            [num(1)?, num(2)?, num(3)?],
            [num(4)?, num(5)?, num(6)?],
            num(7)?,
            maybe(8)?,
            maybe(9)?,
        ));
    }
    Ok(Trajectory {
        samples,
        termination: Termination::ReachedEnd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr() -> Trajectory {
        Trajectory {
            samples: vec![
                sample(0.0, [0.0; 3], [0.0, 0.0, 1.0], 1.0, None, None),
                sample(0.5, [1e-20, -0.1, 0.5], [0.0, 0.0, 1.0], 1.0 + 2e-16, Some(0.01), Some(100.0)),
            ],
            termination: Termination::ReachedEnd,
        }
    }

    #[test]
    fn csv_layout() {
        let text = trajectory_csv(&tr()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,x3,u1,u2,u3,F,Delta,Sigma"));
        assert_eq!(lines.next(), Some("0.0,0.0,0.0,0.0,0.0,0.0,1.0,1.0,,"));
        assert_eq!(lines.next(), Some("0.5,1e-20,-0.1,0.5,0.0,0.0,1.0,1.0000000000000002,0.01,100.0"));
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("finsler-output-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for format in [Format::Csv, Format::Json] {
            let path = write_trajectory(&dir, 3, &tr(), format).unwrap();
            assert!(path.ends_with(format!("ray_003.{}", format.extension())));
            assert_eq!(read_trajectory(&path).unwrap(), tr());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
