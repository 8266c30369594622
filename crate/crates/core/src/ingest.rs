//! Multi-rate sensor channel parsing, synchronization to the GNSS clock,
//! feature normalization, and resampling.
//!
//! # File formats
//!
//! * Channel file: CSV with header `timestamp,value`, timestamps in UNIX
//!   seconds, UTF-8, LF line endings. Lines starting with `#` are metadata
//!   comments and are skipped.
//! * Aligned trace file: CSV with header
//!   `t,lat_deg,lon_deg,speed_mps,accel_pct,steering_deg`.
//! * Trace manifest: JSON mapping channel names to file paths and source
//!   units (paths are resolved relative to the manifest's directory).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FT_PER_S_TO_M_PER_S: f64 = 0.3048;

/// The five channels the detector consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    GnssLat,
    GnssLon,
    Speed,
    AccelPct,
    SteeringDeg,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::GnssLat,
        ChannelKind::GnssLon,
        ChannelKind::Speed,
        ChannelKind::AccelPct,
        ChannelKind::SteeringDeg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::GnssLat => "gnss_lat",
            ChannelKind::GnssLon => "gnss_lon",
            ChannelKind::Speed => "speed",
            ChannelKind::AccelPct => "accel_pct",
            ChannelKind::SteeringDeg => "steering_deg",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit declared by a manifest for a channel's values on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceUnit {
    /// Degrees (GNSS coordinates, steering angle).
    Deg,
    /// Meters per second.
    Mps,
    /// Feet per second (driving-dataset speed convention); converted to m/s
    /// at ingestion.
    Ftps,
    /// Percent (accelerator pedal position).
    Pct,
}

/// One raw sensor stream: strictly increasing timestamps, finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChannel {
    pub kind: ChannelKind,
    /// `(timestamp_s, value)` pairs in canonical units (SI speed, degrees,
    /// percent).
    pub samples: Vec<(f64, f64)>,
}

impl RawChannel {
    pub fn new(kind: ChannelKind, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData(format!("empty channel {kind}")));
        }
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite sample in {kind} at index {i}: ({t}, {v})"
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::Ordering {
                    context: format!("channel {kind}"),
                    index: i,
                    value: t,
                    prev: samples[i - 1].0,
                });
            }
        }
        Ok(RawChannel { kind, samples })
    }

    /// Linear interpolation at `t`, clamped to the endpoint values outside
    /// the channel's span.
    pub fn value_at(&self, t: f64) -> f64 {
        let samples = &self.samples;
        if t <= samples[0].0 {
            return samples[0].1;
        }
        if t >= samples[samples.len() - 1].0 {
            return samples[samples.len() - 1].1;
        }
        // first index with timestamp > t; the bracketing pair is [idx-1, idx]
        let idx = samples.partition_point(|&(ts, _)| ts <= t);
        let (t0, v0) = samples[idx - 1];
        let (t1, v1) = samples[idx];
        let alpha = (t - t0) / (t1 - t0);
        v0 + alpha * (v1 - v0)
    }
}

/// One fused observation row on the GNSS clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedFrame {
    pub t: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub speed_mps: f64,
    pub accel_pct: f64,
    pub steering_deg: f64,
}

/// Trace manifest entry: file path plus declared unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub path: String,
    pub unit: SourceUnit,
}

/// Maps channel names to data files. Serialized as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceManifest {
    pub channels: BTreeMap<ChannelKind, ChannelEntry>,
    /// Seed recorded by whichever tool emitted the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fingerprint of the generating configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl TraceManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Parse a single channel CSV file, converting values to canonical units.
pub fn parse_channel_file(path: &Path, kind: ChannelKind, unit: SourceUnit) -> Result<RawChannel> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "timestamp,value" {
                return Err(Error::Parse {
                    path: display,
                    line: lineno,
                    message: format!("expected header 'timestamp,value', got '{line}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(vs), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                message: "expected two comma-separated fields".into(),
            });
        };
        let t: f64 = ts.trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno,
            message: format!("bad timestamp '{ts}'"),
        })?;
        let v: f64 = vs.trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno,
            message: format!("bad value '{vs}'"),
        })?;
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                message: "non-finite timestamp or value".into(),
            });
        }
        let v = match (kind, unit) {
            (ChannelKind::Speed, SourceUnit::Ftps) => v * FT_PER_S_TO_M_PER_S,
            _ => v,
        };
        samples.push((t, v));
    }
    RawChannel::new(kind, samples)
}

/// Load every channel named by a trace manifest.
pub fn parse_trace(manifest_path: &Path) -> Result<Vec<RawChannel>> {
    let manifest = TraceManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut channels = Vec::new();
    for (&kind, entry) in &manifest.channels {
        let path = base.join(&entry.path);
        channels.push(parse_channel_file(&path, kind, entry.unit)?);
    }
    Ok(channels)
}

pub fn find_channel(channels: &[RawChannel], kind: ChannelKind) -> Result<&RawChannel> {
    channels
        .iter()
        .find(|c| c.kind == kind)
        .ok_or_else(|| Error::config(format!("missing mandatory channel {kind}")))
}

/// Synchronize all channels onto the GNSS clock.
///
/// Output timestamps are exactly the GNSS timestamps; every other value is
/// linearly interpolated between its two bracketing samples, clamped to the
/// nearest endpoint outside a channel's span.
pub fn synchronize(channels: &[RawChannel]) -> Result<Vec<AlignedFrame>> {
    let lat = find_channel(channels, ChannelKind::GnssLat)?;
    let lon = find_channel(channels, ChannelKind::GnssLon)?;
    let speed = find_channel(channels, ChannelKind::Speed)?;
    let accel = find_channel(channels, ChannelKind::AccelPct)?;
    let steering = find_channel(channels, ChannelKind::SteeringDeg)?;

    let frames = lat
        .samples
        .iter()
        .map(|&(t, lat_deg)| AlignedFrame {
            t,
            lat_deg,
            lon_deg: lon.value_at(t),
            speed_mps: speed.value_at(t),
            accel_pct: accel.value_at(t),
            steering_deg: steering.value_at(t),
        })
        .collect();
    Ok(frames)
}

/// Min/max feature scaler mapping the training range onto [0, 1].
///
/// Zero-range features scale to 0; their indices are recorded in
/// `degenerate` so callers can warn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub ranges: Vec<(f64, f64)>,
    pub degenerate: Vec<usize>,
}

impl FeatureScaler {
    /// Learn per-feature (min, max) from one slice per feature.
    pub fn fit_columns(columns: &[&[f64]]) -> Result<Self> {
        if columns.is_empty() || columns.iter().any(|c| c.is_empty()) {
            return Err(Error::InsufficientData(
                "scaler needs at least one value per feature".into(),
            ));
        }
        let mut ranges = Vec::with_capacity(columns.len());
        let mut degenerate = Vec::new();
        for (i, col) in columns.iter().enumerate() {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &v in *col {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite value in feature {i}")));
                }
                min = min.min(v);
                max = max.max(v);
            }
            if max <= min {
                degenerate.push(i);
            }
            ranges.push((min, max));
        }
        Ok(FeatureScaler { ranges, degenerate })
    }

    pub fn feature_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn apply(&self, feature: usize, x: f64) -> f64 {
        let (min, max) = self.ranges[feature];
        if max > min {
            (x - min) / (max - min)
        } else {
            0.0
        }
    }

    pub fn invert(&self, feature: usize, y: f64) -> f64 {
        let (min, max) = self.ranges[feature];
        if max > min {
            min + y * (max - min)
        } else {
            min
        }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        assert_eq!(row.len(), self.ranges.len(), "scaler row width");
        for (i, v) in row.iter_mut().enumerate() {
            *v = self.apply(i, *v);
        }
    }
}

/// Fit a scaler over selected aligned-frame fields (speed, accel, steering).
pub fn fit_scaler(frames: &[AlignedFrame]) -> Result<FeatureScaler> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("scaler needs >= 1 frame".into()));
    }
    let speed: Vec<f64> = frames.iter().map(|f| f.speed_mps).collect();
    let accel: Vec<f64> = frames.iter().map(|f| f.accel_pct).collect();
    let steering: Vec<f64> = frames.iter().map(|f| f.steering_deg).collect();
    FeatureScaler::fit_columns(&[&speed, &accel, &steering])
}

/// Decimate a timestamped series to a lower rate, interpolating linearly at
/// the target timestamps.
pub fn resample(samples: &[(f64, f64)], source_hz: f64, target_hz: f64) -> Result<Vec<(f64, f64)>> {
    if !(source_hz > 0.0 && target_hz > 0.0) {
        return Err(Error::invalid(format!(
            "resample rates must be positive: {source_hz} -> {target_hz}"
        )));
    }
    if target_hz > source_hz {
        return Err(Error::Upsampling {
            source_hz,
            target_hz,
        });
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("resample of empty series".into()));
    }
    let t0 = samples[0].0;
    let t_end = samples[samples.len() - 1].0;
    let channel = RawChannel::new(ChannelKind::SteeringDeg, samples.to_vec())?;
    let mut out = Vec::new();
    let mut k: u64 = 0;
    loop {
        let t = t0 + k as f64 / target_hz;
        if t > t_end + 1e-9 {
            break;
        }
        out.push((t, channel.value_at(t)));
        k += 1;
    }
    Ok(out)
}

/// Write a channel CSV; `meta` becomes a leading `#` comment line.
pub fn write_channel_file(path: &Path, samples: &[(f64, f64)], meta: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(meta) = meta {
        text.push_str("# ");
        text.push_str(meta);
        text.push('\n');
    }
    text.push_str("timestamp,value\n");
    for &(t, v) in samples {
        text.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Write an aligned trace CSV.
pub fn write_aligned_csv(path: &Path, frames: &[AlignedFrame], meta: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(meta) = meta {
        text.push_str("# ");
        text.push_str(meta);
        text.push('\n');
    }
    text.push_str("t,lat_deg,lon_deg,speed_mps,accel_pct,steering_deg\n");
    for f in frames {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.t, f.lat_deg, f.lon_deg, f.speed_mps, f.accel_pct, f.steering_deg
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Read an aligned trace CSV back.
pub fn read_aligned_csv(path: &Path) -> Result<Vec<AlignedFrame>> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut frames = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "t,lat_deg,lon_deg,speed_mps,accel_pct,steering_deg" {
                return Err(Error::Parse {
                    path: display,
                    line: lineno,
                    message: format!("unexpected aligned-trace header '{line}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                message: format!("expected 6 fields, got {}", cells.len()),
            });
        }
        let mut values = [0.0f64; 6];
        for (slot, cell) in values.iter_mut().zip(&cells) {
            *slot = cell.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: lineno,
                message: format!("bad number '{cell}'"),
            })?;
        }
        frames.push(AlignedFrame {
            t: values[0],
            lat_deg: values[1],
            lon_deg: values[2],
            speed_mps: values[3],
            accel_pct: values[4],
            steering_deg: values[5],
        });
    }
    if frames.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no aligned frames in {display}"
        )));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chan(kind: ChannelKind, samples: &[(f64, f64)]) -> RawChannel {
        RawChannel::new(kind, samples.to_vec()).unwrap()
    }

    #[test]
    fn parse_two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n0.0,1.5\n0.0083,1.6\n").unwrap();
        let c = parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Mps).unwrap();
        assert_eq!(c.samples.len(), 2);
        assert_eq!(c.samples[1], (0.0083, 1.6));
    }

    #[test]
    fn parse_empty_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n").unwrap();
        assert!(matches!(
            parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Mps),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn parse_nan_literal_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n0.0,NaN\n").unwrap();
        let err = parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Mps).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n0.0,1.0\noops\n").unwrap();
        match parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Mps).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_non_monotone_is_ordering_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n1.0,1.0\n0.5,2.0\n").unwrap();
        assert!(matches!(
            parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Mps),
            Err(Error::Ordering { .. })
        ));
    }

    #[test]
    fn ftps_speed_converted_at_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speed.csv");
        std::fs::write(&path, "timestamp,value\n0.0,10.0\n").unwrap();
        let c = parse_channel_file(&path, ChannelKind::Speed, SourceUnit::Ftps).unwrap();
        assert!((c.samples[0].1 - 3.048).abs() < 1e-12);
    }

    #[test]
    fn interpolation_midpoint() {
        let c = chan(ChannelKind::Speed, &[(0.0, 0.0), (0.01, 1.0)]);
        assert!((c.value_at(0.005) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sync_counts_match_gnss_rate() {
        // GNSS at 120 Hz and CAN at 100 Hz over 10 s
        let gnss: Vec<(f64, f64)> = (0..1200).map(|i| (i as f64 / 120.0, 37.0)).collect();
        let can: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64 / 100.0, 5.0)).collect();
        let channels = vec![
            chan(ChannelKind::GnssLat, &gnss),
            chan(ChannelKind::GnssLon, &gnss),
            chan(ChannelKind::Speed, &can),
            chan(ChannelKind::AccelPct, &can),
            chan(ChannelKind::SteeringDeg, &can),
        ];
        let frames = synchronize(&channels).unwrap();
        assert_eq!(frames.len(), 1200);
        assert!(frames.iter().all(|f| f.speed_mps == 5.0));
    }

    #[test]
    fn sync_clamps_before_first_can_sample() {
        let gnss: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 / 120.0, 37.0)).collect();
        // CAN starts late, at t = 0.05
        let can = vec![(0.05, 3.0), (0.06, 4.0)];
        let channels = vec![
            chan(ChannelKind::GnssLat, &gnss),
            chan(ChannelKind::GnssLon, &gnss),
            chan(ChannelKind::Speed, &can),
            chan(ChannelKind::AccelPct, &can),
            chan(ChannelKind::SteeringDeg, &can),
        ];
        let frames = synchronize(&channels).unwrap();
        assert_eq!(frames[0].speed_mps, 3.0);
        assert_eq!(frames[frames.len() - 1].speed_mps, 4.0);
    }

    #[test]
    fn sync_missing_channel_is_config_error() {
        let gnss = vec![(0.0, 37.0), (1.0, 37.0)];
        let channels = vec![
            chan(ChannelKind::GnssLat, &gnss),
            chan(ChannelKind::GnssLon, &gnss),
        ];
        assert!(matches!(synchronize(&channels), Err(Error::Config(_))));
    }

    #[test]
    fn scaler_maps_training_range() {
        let s = FeatureScaler::fit_columns(&[&[2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(s.apply(0, 2.0), 0.0);
        assert_eq!(s.apply(0, 4.0), 0.5);
        assert_eq!(s.apply(0, 6.0), 1.0);
        assert!(s.degenerate.is_empty());
    }

    #[test]
    fn scaler_degenerate_feature_maps_to_zero() {
        let s = FeatureScaler::fit_columns(&[&[5.0, 5.0]]).unwrap();
        assert_eq!(s.apply(0, 5.0), 0.0);
        assert_eq!(s.degenerate, vec![0]);
        assert_eq!(s.invert(0, 0.0), 5.0);
    }

    #[test]
    fn resample_120_to_5_over_24s() {
        let samples: Vec<(f64, f64)> = (0..2880).map(|i| (i as f64 / 120.0, 1.0)).collect();
        let out = resample(&samples, 120.0, 5.0).unwrap();
        assert_eq!(out.len(), 120);
        assert!(out.iter().all(|&(_, v)| v == 1.0));
    }

    #[test]
    fn resample_linear_ramp_is_exact() {
        // closed-form oracle: value = 2 t + 1, reproduced exactly by linear
        // interpolation
        let samples: Vec<(f64, f64)> = (0..1200)
            .map(|i| (i as f64 / 120.0, 2.0 * i as f64 / 120.0 + 1.0))
            .collect();
        let out = resample(&samples, 120.0, 5.0).unwrap();
        assert_eq!(out[0], (0.0, 1.0));
        for &(t, v) in &out {
            assert!((v - (2.0 * t + 1.0)).abs() < 1e-9, "t={t} v={v}");
        }
    }

    #[test]
    fn resample_rejects_upsampling() {
        let samples = vec![(0.0, 1.0), (1.0, 2.0)];
        assert!(matches!(
            resample(&samples, 5.0, 120.0),
            Err(Error::Upsampling { .. })
        ));
    }

    #[test]
    fn aligned_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aligned.csv");
        let frames = vec![
            AlignedFrame {
                t: 0.0,
                lat_deg: 37.4,
                lon_deg: -122.1,
                speed_mps: 8.0,
                accel_pct: 20.0,
                steering_deg: 0.0,
            },
            AlignedFrame {
                t: 1.0 / 120.0,
                lat_deg: 37.400001,
                lon_deg: -122.099999,
                speed_mps: 8.1,
                accel_pct: 21.0,
                steering_deg: -3.5,
            },
        ];
        write_aligned_csv(&path, &frames, Some("seed=2")).unwrap();
        assert_eq!(read_aligned_csv(&path).unwrap(), frames);
    }

    #[test]
    fn manifest_round_trip_and_parse_trace() {
        let dir = tempfile::tempdir().unwrap();
        for kind in ChannelKind::ALL {
            let path = dir.path().join(format!("{kind}.csv"));
            write_channel_file(&path, &[(0.0, 1.0), (0.01, 2.0)], Some("seed=1")).unwrap();
        }
        let manifest = TraceManifest {
            channels: ChannelKind::ALL
                .into_iter()
                .map(|k| {
                    (
                        k,
                        ChannelEntry {
                            path: format!("{k}.csv"),
                            unit: match k {
                                ChannelKind::Speed => SourceUnit::Mps,
                                ChannelKind::AccelPct => SourceUnit::Pct,
                                _ => SourceUnit::Deg,
                            },
                        },
                    )
                })
                .collect(),
            seed: Some(1),
            config_hash: None,
        };
        let mpath = dir.path().join("trace.json");
        manifest.save(&mpath).unwrap();
        let channels = parse_trace(&mpath).unwrap();
        assert_eq!(channels.len(), 5);
        assert!(channels.iter().all(|c| c.samples.len() == 2));
    }

    proptest! {
        #[test]
        fn interpolation_stays_within_bracketing_samples(
            v0 in -100.0f64..100.0, v1 in -100.0f64..100.0, alpha in 0.0f64..1.0,
        ) {
            let c = chan(ChannelKind::Speed, &[(0.0, v0), (1.0, v1)]);
            let v = c.value_at(alpha);
            let (lo, hi) = (v0.min(v1), v0.max(v1));
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn scaler_round_trip_identity(
            vals in proptest::collection::vec(-1e6f64..1e6, 2..50), x in -1e6f64..1e6,
        ) {
            let s = FeatureScaler::fit_columns(&[&vals]).unwrap();
            let (min, max) = s.ranges[0];
            prop_assume!(max > min);
            let y = s.invert(0, s.apply(0, x));
            prop_assert!((y - x).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn scaler_training_data_in_unit_interval(
            vals in proptest::collection::vec(-1e3f64..1e3, 1..40),
        ) {
            let s = FeatureScaler::fit_columns(&[&vals]).unwrap();
            for &v in &vals {
                let y = s.apply(0, v);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&y));
            }
        }
    }
}
