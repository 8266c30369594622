//! Strategy-2 maneuver logic: segment candidate turns from the steering
//! stream, classify them with the DTW/k-NN model (gated by speed), and
//! independently infer turn events from the GNSS track for cross-checking.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dtw::{knn_classify, KnnDistance, LabeledTemplate, TurnDirection};
use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint};

/// Classification of a maneuver window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnLabel {
    Left,
    Right,
    /// Steering resembled a turn but the vehicle was not actually moving
    /// (e.g. wheel adjustment while parking).
    NoTurn,
}

impl From<TurnDirection> for TurnLabel {
    fn from(d: TurnDirection) -> Self {
        match d {
            TurnDirection::Left => TurnLabel::Left,
            TurnDirection::Right => TurnLabel::Right,
        }
    }
}

impl fmt::Display for TurnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TurnLabel::Left => "left",
            TurnLabel::Right => "right",
            TurnLabel::NoTurn => "no_turn",
        })
    }
}

/// Which stream produced a turn event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnSource {
    Steering,
    Gnss,
}

impl fmt::Display for TurnSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TurnSource::Steering => "steering",
            TurnSource::Gnss => "gnss",
        })
    }
}

/// Supporting evidence for a turn event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TurnEvidence {
    /// k-NN neighbor distances, closest first.
    NeighborDistances(Vec<f64>),
    /// Cumulative signed heading change over the event, radians.
    HeadingChange(f64),
    /// Mean speed that forced a NoTurn label, m/s.
    SpeedGated(f64),
}

impl TurnEvidence {
    /// Compact single-cell rendering for the CSV report.
    pub fn render(&self) -> String {
        match self {
            TurnEvidence::NeighborDistances(d) => {
                let joined = d
                    .iter()
                    .map(|x| format!("{x:.3}"))
                    .collect::<Vec<_>>()
                    .join(";");
                format!("knn_dist={joined}")
            }
            TurnEvidence::HeadingChange(r) => format!("dheading_deg={:.2}", r.to_degrees()),
            TurnEvidence::SpeedGated(v) => format!("mean_speed_mps={v:.3}"),
        }
    }
}

/// A detected maneuver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub label: TurnLabel,
    pub source: TurnSource,
    pub evidence: TurnEvidence,
}

/// Hysteresis segmentation thresholds over the steering stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// |steering| must cross this to open a candidate, degrees.
    pub enter_deg: f64,
    /// candidate closes when |steering| falls below this, degrees.
    pub exit_deg: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            enter_deg: 30.0,
            exit_deg: 15.0,
            min_duration_s: 1.0,
            max_duration_s: 15.0,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.enter_deg > self.exit_deg && self.exit_deg > 0.0) {
            return Err(Error::invalid("segmenter needs enter > exit > 0"));
        }
        if !(self.max_duration_s > self.min_duration_s && self.min_duration_s > 0.0) {
            return Err(Error::invalid("segmenter needs max > min duration > 0"));
        }
        Ok(())
    }
}

/// A candidate maneuver window cut from the steering stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateWindow {
    pub start_s: f64,
    pub end_s: f64,
    /// `(timestamp_s, steering_deg)` samples covering the lobe.
    pub samples: Vec<(f64, f64)>,
}

/// Cut maximal candidate windows where |steering| crosses `enter_deg` and
/// persists until falling below `exit_deg`, filtered to the configured
/// duration band. Windows are extended backwards to the last below-exit
/// sample so the full lobe (rise, hold, fall) is captured.
pub fn segment_turns(
    steering: &[(f64, f64)],
    config: &SegmenterConfig,
) -> Result<Vec<CandidateWindow>> {
    config.validate()?;
    let mut out = Vec::new();
    let n = steering.len();
    let mut i = 0;
    while i < n {
        if steering[i].1.abs() < config.enter_deg {
            i += 1;
            continue;
        }
        // entered: walk back to the last calm sample, forward to the exit
        let mut start = i;
        while start > 0 && steering[start - 1].1.abs() > config.exit_deg {
            start -= 1;
        }
        // include one calm anchor sample
        start = start.saturating_sub(1);
        let mut end = i;
        while end + 1 < n && steering[end + 1].1.abs() > config.exit_deg {
            end += 1;
        }
        if end + 1 < n {
            end += 1; // include the first calm sample after the lobe
        }
        let duration = steering[end].0 - steering[start].0;
        if duration >= config.min_duration_s && duration <= config.max_duration_s {
            out.push(CandidateWindow {
                start_s: steering[start].0,
                end_s: steering[end].0,
                samples: steering[start..=end].to_vec(),
            });
        }
        i = end + 1;
    }
    Ok(out)
}

/// Classify one candidate window with k-NN over the template corpus,
/// forcing NoTurn when the vehicle is effectively stationary (mean speed
/// at or below the speedometer's maximum error).
pub fn classify_turn(
    window: &CandidateWindow,
    templates: &[LabeledTemplate],
    speed: &[(f64, f64)],
    speed_error_mps: f64,
    k: usize,
    distance: KnnDistance,
) -> Result<TurnEvent> {
    let in_window: Vec<f64> = speed
        .iter()
        .filter(|(t, _)| *t >= window.start_s && *t <= window.end_s)
        .map(|&(_, v)| v)
        .collect();
    let mean_speed = if in_window.is_empty() {
        0.0
    } else {
        in_window.iter().sum::<f64>() / in_window.len() as f64
    };
    if mean_speed <= speed_error_mps {
        return Ok(TurnEvent {
            start_s: window.start_s,
            end_s: window.end_s,
            label: TurnLabel::NoTurn,
            source: TurnSource::Steering,
            evidence: TurnEvidence::SpeedGated(mean_speed),
        });
    }
    let values: Vec<f64> = window.samples.iter().map(|&(_, v)| v).collect();
    let outcome = knn_classify(&values, templates, k, distance)?;
    Ok(TurnEvent {
        start_s: window.start_s,
        end_s: window.end_s,
        label: outcome.label.into(),
        source: TurnSource::Steering,
        evidence: TurnEvidence::NeighborDistances(
            outcome.neighbors.iter().map(|&(_, d)| d).collect(),
        ),
    })
}

/// Sliding-window thresholds for GNSS heading-change turn inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingConfig {
    pub window_s: f64,
    pub min_heading_change_deg: f64,
    /// Steps closer than this are skipped when estimating headings
    /// (bearing is undefined for coincident fixes and hypersensitive to
    /// position noise over short baselines), meters.
    pub min_step_m: f64,
    /// The track is decimated to roughly this rate before headings are
    /// taken, lengthening the per-step baseline, Hz.
    pub sample_hz: f64,
    /// Events shorter than this are dropped: a real maneuver accrues its
    /// heading change over time, while a position jump flips the bearing
    /// for a single step, seconds.
    pub min_duration_s: f64,
}

impl Default for HeadingConfig {
    fn default() -> Self {
        HeadingConfig {
            window_s: 15.0,
            min_heading_change_deg: 60.0,
            min_step_m: 0.2,
            sample_hz: 5.0,
            min_duration_s: 1.0,
        }
    }
}

/// Infer turn events from the GNSS track alone: events are emitted where
/// the cumulative signed heading change within the sliding window exceeds
/// the threshold; clockwise change reads as Right, counterclockwise Left.
pub fn infer_gnss_turns(
    points: &[(f64, GeoPoint)],
    config: &HeadingConfig,
) -> Result<Vec<TurnEvent>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "GNSS turn inference needs >= 2 points".into(),
        ));
    }
    // decimate to the configured rate
    let native_dt = (points[points.len() - 1].0 - points[0].0) / (points.len() - 1) as f64;
    let stride = ((1.0 / (config.sample_hz * native_dt)).round() as usize).max(1);
    let points: Vec<(f64, GeoPoint)> = points.iter().copied().step_by(stride).collect();
    if points.len() < 2 {
        return Ok(Vec::new());
    }

    // unwrapped heading samples at moving steps only
    let mut headings: Vec<(f64, f64)> = Vec::new();
    let mut prev_idx = 0;
    for i in 1..points.len() {
        let (t, p) = points[i];
        let (_, q) = points[prev_idx];
        let step = geo::haversine_distance(q, p, Default::default())?;
        if step < config.min_step_m {
            continue;
        }
        let h = geo::heading(q, p)?;
        let unwrapped = match headings.last() {
            Some(&(_, last)) => last + geo::wrap_angle(h - last),
            None => h,
        };
        headings.push((t, unwrapped));
        prev_idx = i;
    }
    if headings.len() < 2 {
        return Ok(Vec::new());
    }

    let threshold = config.min_heading_change_deg.to_radians();
    let mut events = Vec::new();
    let mut i = 0;
    while i < headings.len() {
        let (t0, h0) = headings[i];
        let mut j = i + 1;
        let mut fired: Option<usize> = None;
        while j < headings.len() && headings[j].0 - t0 <= config.window_s {
            if (headings[j].1 - h0).abs() >= threshold {
                fired = Some(j);
                break;
            }
            j += 1;
        }
        if let Some(mut jf) = fired {
            let sign = (headings[jf].1 - h0).signum();
            // extend while the heading keeps moving the same way
            while jf + 1 < headings.len() && (headings[jf + 1].1 - headings[jf].1) * sign > 1e-6 {
                jf += 1;
            }
            // tighten the start: drop leading samples that are not needed
            // to clear the threshold, so the event hugs the maneuver
            let mut start_i = i;
            while start_i + 1 < jf
                && (headings[jf].1 - headings[start_i + 1].1).abs() >= threshold
            {
                start_i += 1;
            }
            let delta = headings[jf].1 - headings[start_i].1;
            if headings[jf].0 - headings[start_i].0 >= config.min_duration_s {
                events.push(TurnEvent {
                    start_s: headings[start_i].0,
                    end_s: headings[jf].0,
                    label: if sign > 0.0 {
                        TurnLabel::Right
                    } else {
                        TurnLabel::Left
                    },
                    source: TurnSource::Gnss,
                    evidence: TurnEvidence::HeadingChange(delta),
                });
            }
            i = jf + 1;
        } else {
            i += 1;
        }
    }
    Ok(events)
}

/// Write the turn-event report CSV (`start_s,end_s,label,source,evidence`).
pub fn write_turn_report(path: &Path, events: &[TurnEvent], meta: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(meta) = meta {
        text.push_str("# ");
        text.push_str(meta);
        text.push('\n');
    }
    text.push_str("start_s,end_s,label,source,evidence\n");
    for e in events {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            e.start_s,
            e.end_s,
            e.label,
            e.source,
            e.evidence.render()
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}
