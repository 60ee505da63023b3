//! Config loading, trace CSV reading and writing, and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::AgentMode;
use crate::engine::{ConfigError, StepTrace, WorldConfig};
use crate::metrics::{BoidSample, MetricsAccumulator, MetricsError, RunMetrics, SpeedTracking};
use crate::{Point2, Vec2};

pub const TRACE_HEADER: [&str; 11] = ["t", "id", "px", "py", "vx", "vy", "ux", "uy", "mode", "degree", "gmax"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(String),
    #[error(transparent)]
    Validation(#[from] ConfigError),
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Parses a JSON object into a validated config; absent fields keep their
/// defaults.
pub fn config_from_str(text: &str) -> Result<WorldConfig, IoError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| IoError::Parse("expected a JSON object".into()))?;
    let known = serde_json::to_value(WorldConfig::default()).expect("config serializes");
    let known = known.as_object().expect("config is an object");
    if let Some(key) = obj.keys().find(|k| !known.contains_key(*k)) {
        return Err(IoError::UnknownField(key.clone()));
    }
    let cfg: WorldConfig = serde_json::from_value(value).map_err(|e| IoError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<WorldConfig, IoError> {
    config_from_str(&fs::read_to_string(path)?)
}

/// Writes trace rows as they are produced. Floats use the shortest decimal
/// that parses back to the same value.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    rows: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(writer: W) -> Result<Self, IoError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(TRACE_HEADER)?;
        Ok(Self { inner, rows: 0 })
    }

    pub fn write_step(&mut self, step: &StepTrace) -> Result<(), IoError> {
        for b in &step.boids {
            self.inner.write_record([
                step.t.to_string(),
                b.id.to_string(),
                b.position.x.to_string(),
                b.position.y.to_string(),
                b.velocity.x.to_string(),
                b.velocity.y.to_string(),
                b.control.x.to_string(),
                b.control.y.to_string(),
                b.mode.code().to_string(),
                b.degree.to_string(),
                b.g_max.to_string(),
            ])?;
            self.rows += 1;
        }
        Ok(())
    }

    pub fn rows_written(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<W, IoError> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| IoError::Io(e.into_error()))
    }
}

/// Writes a whole trace to `path`, returning the number of data rows.
pub fn write_trace<'a>(steps: impl IntoIterator<Item = &'a StepTrace>, path: &Path) -> Result<usize, IoError> {
    let mut writer = TraceWriter::new(std::io::BufWriter::new(fs::File::create(path)?))?;
    for step in steps {
        writer.write_step(step)?;
    }
    let rows = writer.rows_written();
    writer.finish()?.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub id: usize,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub ux: f64,
    pub uy: f64,
    pub mode: String,
    pub degree: usize,
    pub gmax: f64,
}

/// All rows of one step, in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: f64,
    pub ids: Vec<usize>,
    pub controls: Vec<Vec2>,
    pub samples: Vec<BoidSample>,
}

/// Reads a trace file, checking the header, time order and per-step id order.
pub fn read_trace(path: &Path) -> Result<Vec<TraceStep>, IoError> {
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(TRACE_HEADER) {
        return Err(IoError::Trace("unexpected header".into()));
    }
    let mut steps: Vec<TraceStep> = Vec::new();
    for (line, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row?;
        let mode = AgentMode::from_code(&row.mode)
            .ok_or_else(|| IoError::Trace(format!("row {}: unknown mode `{}`", line + 1, row.mode)))?;
        let sample = BoidSample {
            position: Point2::new(row.px, row.py),
            velocity: Vec2::new(row.vx, row.vy),
            mode,
            degree: row.degree,
            g_max: row.gmax,
        };
        match steps.last_mut() {
            Some(step) if step.t == row.t => {
                if step.ids.last().is_some_and(|&last| row.id <= last) {
                    return Err(IoError::Trace(format!("row {}: ids not ascending", line + 1)));
                }
                step.ids.push(row.id);
                step.controls.push(Vec2::new(row.ux, row.uy));
                step.samples.push(sample);
            }
            last => {
                if last.is_some_and(|s| !(row.t > s.t)) {
                    return Err(IoError::Trace(format!("row {}: time not increasing", line + 1)));
                }
                steps.push(TraceStep {
                    t: row.t,
                    ids: vec![row.id],
                    controls: vec![Vec2::new(row.ux, row.uy)],
                    samples: vec![sample],
                });
            }
        }
    }
    Ok(steps)
}

/// Metrics recomputed from a trace file. The file does not carry the
/// predator, so `min_predator_distance` is always absent.
pub fn metrics_from_trace(path: &Path, cfg: &WorldConfig, transient_cutoff: f64) -> Result<RunMetrics, IoError> {
    let mut acc = MetricsAccumulator::new(cfg, transient_cutoff);
    for step in read_trace(path)? {
        acc.push_step(step.t, &step.samples, None)?;
    }
    Ok(acc.finish()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPaths {
    pub trace: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: WorldConfig,
    pub version: String,
    pub seed: u64,
    pub outputs: ManifestPaths,
    pub wall_clock_seconds: f64,
    pub speed_tracking: SpeedTracking,
    /// Whether the run met the speed-tracking thresholds; absent when the
    /// run ended before the statistics window.
    pub speed_tracking_ok: Option<bool>,
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_manifest(manifest: &RunManifest) -> Result<(), IoError> {
    write_atomic(&manifest.outputs.manifest, to_json_pretty(manifest).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(config_from_str("{}").unwrap(), WorldConfig::default());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            config_from_str(r#"{"alpha": 0.5}"#),
            Err(IoError::Validation(_))
        ));
        assert!(matches!(config_from_str(r#"{"alhpa": 1}"#), Err(IoError::UnknownField(k)) if k == "alhpa"));
        assert!(matches!(config_from_str("{"), Err(IoError::Parse(_))));
        assert!(matches!(config_from_str("[1]"), Err(IoError::Parse(_))));
        assert!(matches!(config_from_str(r#"{"dt": "fast"}"#), Err(IoError::Parse(_))));
    }

    #[test]
    fn predator_config() {
        let cfg = config_from_str(r#"{"n_boids": 15, "predator_enabled": true, "R": 0.03, "Gamma": 0.3}"#).unwrap();
        assert!(cfg.predator_enabled);
        assert_eq!((cfg.flock_radius, cfg.predator_radius), (0.03, 0.3));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = WorldConfig {
            seed: u64::MAX,
            dt: 0.1 + 0.2,
            ..WorldConfig::default()
        };
        assert_eq!(config_from_str(&to_json_pretty(&cfg)).unwrap(), cfg);
    }
}
