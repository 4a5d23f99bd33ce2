//! Scenario files and CSV/JSON exports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use irs_uav_core::channel::McEstimate;
use irs_uav_core::power::EnergyBreakdown;
use irs_uav_core::sca::IterationRecord;
use irs_uav_core::scenario::ScenarioError;
use irs_uav_core::trajectory::Trajectory;
use irs_uav_core::{ScenarioConfig, Vec2};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: ScenarioError,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn csv(path: &Path, source: csv::Error) -> Self {
        IoError::Csv {
            path: path.to_owned(),
            source,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::Parse { .. } => "parse",
            IoError::Invalid { .. } => "validation",
            IoError::Csv { .. } => "csv",
        }
    }

    /// Offending scenario field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            IoError::Invalid { source, .. } => Some(source.field()),
            _ => None,
        }
    }
}

/// Parses and validates a scenario document. Unknown keys are rejected.
pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioConfig, IoError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|source| IoError::Parse {
        path: path.to_owned(),
        source,
    })?;
    cfg.validate().map_err(|source| IoError::Invalid {
        path: path.to_owned(),
        source,
    })?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn scenario_to_json(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("scenario serialises")
}

pub fn save_scenario(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, scenario_to_json(cfg) + "\n").map_err(|e| IoError::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("plain data serialises");
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(|e| IoError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, IoError> {
    let f = File::create(path).map_err(|e| IoError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), IoError> {
    w.flush().map_err(|e| IoError::io(path, e))
}

/// Column names of the trajectory export.
pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let k_count = traj.tx_times.first().map_or(0, Vec::len);
    let mut h: Vec<String> = [
        "n", "x_m", "y_m", "x_end_m", "y_end_m", "delta_m", "T_s", "V_mps",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..k_count).map(|k| format!("tau_{k}_s")));
    if let Some(eta) = traj.match_times.as_ref().and_then(|m| m.first()) {
        for w in 0..eta.len() {
            h.extend((0..k_count).map(|k| format!("eta_{w}_{k}_s")));
        }
    }
    h
}

/// One row per segment. `x_m, y_m` is the segment start, where the rate of
/// that segment is evaluated.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    w.write_record(trajectory_header(traj))
        .map_err(|e| IoError::csv(path, e))?;
    for n in 0..traj.n_segments() {
        let (a, b): (Vec2, Vec2) = (traj.waypoints[n], traj.waypoints[n + 1]);
        let mut row = vec![
            n.to_string(),
            a.x.to_string(),
            a.y.to_string(),
            b.x.to_string(),
            b.y.to_string(),
            traj.segment_length(n).to_string(),
            traj.flight_times[n].to_string(),
            traj.speed(n).to_string(),
        ];
        row.extend(traj.tx_times[n].iter().map(f64::to_string));
        if let Some(m) = &traj.match_times {
            for per_irs in &m[n] {
                row.extend(per_irs.iter().map(f64::to_string));
            }
        }
        w.write_record(&row).map_err(|e| IoError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_convergence_csv(trace: &[IterationRecord], path: &Path) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    for rec in trace {
        w.serialize(rec).map_err(|e| IoError::csv(path, e))?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub position_index: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub rate_closed_form_bps: f64,
    pub rate_mc_bps: f64,
    pub mc_stderr_bps: f64,
}

impl RateRow {
    pub fn new(position_index: usize, at: Vec2, closed_form: f64, mc: McEstimate) -> Self {
        RateRow {
            position_index,
            x_m: at.x,
            y_m: at.y,
            rate_closed_form_bps: closed_form,
            rate_mc_bps: mc.mean_bps,
            mc_stderr_bps: mc.stderr_bps,
        }
    }
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| IoError::csv(path, e))?;
    }
    finish(w, path)
}

/// Energy summary written next to every optimised plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub variant: String,
    pub energy: EnergyBreakdown,
    pub delivered_bits: Vec<f64>,
    pub demand_bits: Vec<f64>,
    pub n_segments: usize,
    pub mission_time_s: f64,
    pub path_length_m: f64,
    pub iterations: usize,
    pub termination: Option<String>,
}

pub fn write_text(text: &str, path: &Path) -> Result<(), IoError> {
    let mut f = File::create(path).map_err(|e| IoError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| IoError::io(path, e))
}
