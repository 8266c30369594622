//! The fusion detector: Strategy 1 (predicted vs perceived location shift
//! plus motion-state consistency) and Strategy 2 (steering-derived vs
//! GNSS-derived turns), running concurrently over a trace, with
//! per-observation latency accounting.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dtw::{KnnDistance, LabeledTemplate};
use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint};
use crate::ingest;
use crate::lstm::{LstmNetwork, FEATURE_COUNT};
use crate::simgen::SensorTrace;
use crate::turns::{
    classify_turn, infer_gnss_turns, segment_turns, HeadingConfig, SegmenterConfig, TurnEvent,
    TurnLabel,
};

/// Standstill/in-motion decision from a speed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionState {
    Standstill,
    InMotion,
}

/// A speed at or below the speedometer's maximum error reads as standstill.
pub fn motion_state(speed_mps: f64, speed_error_mps: f64) -> MotionState {
    if speed_mps <= speed_error_mps {
        MotionState::Standstill
    } else {
        MotionState::InMotion
    }
}

/// Detection threshold: prediction-model maximum absolute error plus the
/// GNSS positioning error.
pub fn compute_threshold(model_max_abs_error_m: f64, gnss_positioning_error_m: f64) -> Result<f64> {
    if !(model_max_abs_error_m >= 0.0 && gnss_positioning_error_m >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold components must be non-negative: {model_max_abs_error_m}, {gnss_positioning_error_m}"
        )));
    }
    Ok(model_max_abs_error_m + gnss_positioning_error_m)
}

/// Which check raised a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    S1Shift,
    S1Motion,
    S2Turn,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::S1Shift => "s1_shift",
            Strategy::S1Motion => "s1_motion",
            Strategy::S2Turn => "s2_turn",
        })
    }
}

/// Evidence attached to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Evidence {
    Shift {
        perceived_m: f64,
        predicted_m: f64,
        diff_m: f64,
    },
    Motion {
        gnss: MotionState,
        speedometer: MotionState,
        held_s: f64,
    },
    Turn {
        steering: Option<TurnLabel>,
        gnss: Option<TurnLabel>,
    },
}

/// One detection decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub t: f64,
    pub alarm: bool,
    pub strategy: Strategy,
    pub evidence: Evidence,
    pub latency_s: f64,
}

/// Detector configuration; the Strategy-1 threshold itself comes from the
/// model metadata via [`compute_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub gnss_positioning_error_m: f64,
    pub speed_error_mps: f64,
    /// How long a motion-state contradiction must persist before S1Motion
    /// alarms, seconds.
    pub motion_persistence_s: f64,
    pub segmenter: SegmenterConfig,
    pub heading: HeadingConfig,
    /// Interval tolerance when pairing steering and GNSS turn events,
    /// seconds.
    pub match_tolerance_s: f64,
    /// Strategy-2 steering stream rate after resampling, Hz.
    pub steering_rate_hz: f64,
    pub knn_k: usize,
    pub knn_distance: KnnDistance,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            gnss_positioning_error_m: 0.1,
            speed_error_mps: 0.5,
            motion_persistence_s: 1.0,
            segmenter: SegmenterConfig::default(),
            heading: HeadingConfig::default(),
            match_tolerance_s: 2.0,
            steering_rate_hz: 5.0,
            knn_k: 3,
            knn_distance: KnnDistance::default(),
        }
    }
}

/// Strategy-1 evaluator: per-frame shift comparison plus the persistent
/// motion-state cross-check.
pub struct Strategy1<'a> {
    model: &'a LstmNetwork,
    pub threshold_m: f64,
    speed_error_mps: f64,
    persistence_s: f64,
    contradiction_held_s: f64,
    reported_this_run: bool,
}

impl<'a> Strategy1<'a> {
    pub fn new(model: &'a LstmNetwork, config: &DetectionConfig) -> Result<Self> {
        let threshold_m = compute_threshold(
            model.metadata.validation_max_abs_error_m,
            config.gnss_positioning_error_m,
        )?;
        Ok(Strategy1 {
            model,
            threshold_m,
            speed_error_mps: config.speed_error_mps,
            persistence_s: config.motion_persistence_s,
            contradiction_held_s: 0.0,
            reported_this_run: false,
        })
    }

    /// Evaluate one observation: a raw feature window ending just before
    /// the newest fix, the GNSS-perceived shift it produced, the
    /// speedometer reading, and the frame period. Returns the S1Shift
    /// verdict and, when a motion contradiction has persisted long enough,
    /// one S1Motion alarm.
    pub fn step(
        &mut self,
        window: &[[f64; FEATURE_COUNT]],
        perceived_shift_m: f64,
        speedometer_mps: f64,
        dt_s: f64,
        t: f64,
    ) -> Result<Vec<DetectionVerdict>> {
        let started = Instant::now();
        let predicted_m = self.model.predict_raw(window)?;
        let diff_m = (perceived_shift_m - predicted_m).abs();
        let latency_s = started.elapsed().as_secs_f64();
        let mut out = vec![DetectionVerdict {
            t,
            alarm: diff_m > self.threshold_m,
            strategy: Strategy::S1Shift,
            evidence: Evidence::Shift {
                perceived_m: perceived_shift_m,
                predicted_m,
                diff_m,
            },
            latency_s,
        }];

        let gnss_state = motion_state(perceived_shift_m / dt_s, self.speed_error_mps);
        let speedo_state = motion_state(speedometer_mps, self.speed_error_mps);
        if gnss_state != speedo_state {
            self.contradiction_held_s += dt_s;
            if self.contradiction_held_s >= self.persistence_s && !self.reported_this_run {
                self.reported_this_run = true;
                out.push(DetectionVerdict {
                    t,
                    alarm: true,
                    strategy: Strategy::S1Motion,
                    evidence: Evidence::Motion {
                        gnss: gnss_state,
                        speedometer: speedo_state,
                        held_s: self.contradiction_held_s,
                    },
                    latency_s: 0.0,
                });
            }
        } else {
            self.contradiction_held_s = 0.0;
            self.reported_this_run = false;
        }
        Ok(out)
    }
}

fn intervals_overlap(a: &TurnEvent, b: &TurnEvent, tol_s: f64) -> bool {
    a.start_s <= b.end_s + tol_s && b.start_s <= a.end_s + tol_s
}

/// Cross-check steering-derived turns against GNSS-derived turns.
///
/// Alarms on: a steering turn with no overlapping GNSS turn, overlapping
/// events that disagree in label, and a GNSS turn with no overlapping
/// steering turn. Speed-gated `NoTurn` windows never count as maneuvers.
pub fn strategy2_step(
    steering_events: &[TurnEvent],
    gnss_events: &[TurnEvent],
    config: &DetectionConfig,
    classify_latencies_s: &[f64],
) -> Vec<DetectionVerdict> {
    let tol = config.match_tolerance_s;
    let mut gnss_used = vec![false; gnss_events.len()];
    let mut out = Vec::new();

    for (si, s) in steering_events.iter().enumerate() {
        if s.label == TurnLabel::NoTurn {
            continue;
        }
        let latency_s = classify_latencies_s.get(si).copied().unwrap_or(0.0);
        // best overlapping unused GNSS event
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gnss_events.iter().enumerate() {
            if gnss_used[gi] || !intervals_overlap(s, g, tol) {
                continue;
            }
            let overlap = s.end_s.min(g.end_s) - s.start_s.max(g.start_s);
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, _)) => {
                gnss_used[gi] = true;
                let g = &gnss_events[gi];
                out.push(DetectionVerdict {
                    t: s.end_s.max(g.end_s),
                    alarm: g.label != s.label,
                    strategy: Strategy::S2Turn,
                    evidence: Evidence::Turn {
                        steering: Some(s.label),
                        gnss: Some(g.label),
                    },
                    latency_s,
                });
            }
            None => out.push(DetectionVerdict {
                t: s.end_s + tol,
                alarm: true,
                strategy: Strategy::S2Turn,
                evidence: Evidence::Turn {
                    steering: Some(s.label),
                    gnss: None,
                },
                latency_s,
            }),
        }
    }
    for (gi, g) in gnss_events.iter().enumerate() {
        if !gnss_used[gi] {
            out.push(DetectionVerdict {
                t: g.end_s + tol,
                alarm: true,
                strategy: Strategy::S2Turn,
                evidence: Evidence::Turn {
                    steering: None,
                    gnss: Some(g.label),
                },
                latency_s: 0.0,
            });
        }
    }
    out
}

/// Latency statistics of one strategy over a run, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
}

impl LatencyStats {
    fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let count = samples.len();
        let mean_s = samples.iter().sum::<f64>() / count as f64;
        let pick = |q: f64| samples[((count as f64 - 1.0) * q).round() as usize];
        LatencyStats {
            count,
            mean_s,
            p50_s: pick(0.50),
            p95_s: pick(0.95),
            max_s: samples[count - 1],
        }
    }
}

/// Per-run outcome summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    /// Provenance recorded by the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub onset_s: Option<f64>,
    pub threshold_m: f64,
    pub first_alarm_t: Option<f64>,
    pub first_alarm_strategy: Option<Strategy>,
    /// First alarm time minus onset, when both exist.
    pub detection_latency_s: Option<f64>,
    pub alarm_count: usize,
    /// Alarms raised before the onset; on a clean trace every alarm is
    /// false.
    pub false_alarm_count: usize,
    pub strategies_fired: Vec<Strategy>,
    pub s1: LatencyStats,
    pub s2: LatencyStats,
}

impl DetectionSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("summary", e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Verdict stream plus summary of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    pub verdicts: Vec<DetectionVerdict>,
    pub summary: DetectionSummary,
}

/// Run both strategies over a trace in timestamp order.
///
/// Strategy 1 evaluates every GNSS-rate observation once a full feature
/// window of history exists; Strategy 2 works on the steering stream
/// resampled to `steering_rate_hz` and on turns inferred from the GNSS
/// track. `onset_s` is the ground-truth attack onset when known.
pub fn run_detection(
    trace: &SensorTrace,
    onset_s: Option<f64>,
    model: &LstmNetwork,
    templates: &[LabeledTemplate],
    config: &DetectionConfig,
) -> Result<DetectionRun> {
    let frames = trace.aligned()?;
    let window_len = model.metadata.window_len;
    if frames.len() < window_len + 2 {
        return Err(Error::InsufficientData(format!(
            "trace too short for window {window_len}"
        )));
    }
    let points: Vec<(f64, GeoPoint)> = frames
        .iter()
        .map(|f| Ok((f.t, GeoPoint::from_degrees(f.lat_deg, f.lon_deg)?)))
        .collect::<Result<_>>()?;
    let shifts = geo::location_shift_series(&points)?.shifts;

    let mut verdicts = Vec::new();

    // Strategy 1 at full GNSS rate
    let mut s1 = Strategy1::new(model, config)?;
    let threshold_m = s1.threshold_m;
    let mut window = Vec::with_capacity(window_len);
    for end in window_len..frames.len() - 1 {
        window.clear();
        for s in end + 1 - window_len..=end {
            let f = &frames[s];
            window.push([shifts[s - 1], f.accel_pct, f.steering_deg, f.speed_mps]);
        }
        let t = frames[end + 1].t;
        let dt = t - frames[end].t;
        verdicts.extend(s1.step(
            &window,
            shifts[end],
            frames[end + 1].speed_mps,
            dt,
            t,
        )?);
    }

    // Strategy 2 on the resampled steering stream
    let steering_120: Vec<(f64, f64)> = frames.iter().map(|f| (f.t, f.steering_deg)).collect();
    let native_rate = 1.0 / (frames[1].t - frames[0].t);
    let steering_5 = ingest::resample(&steering_120, native_rate, config.steering_rate_hz)?;
    let speed_series: Vec<(f64, f64)> = frames.iter().map(|f| (f.t, f.speed_mps)).collect();
    let windows = segment_turns(&steering_5, &config.segmenter)?;
    let mut steering_events = Vec::with_capacity(windows.len());
    let mut classify_latencies = Vec::with_capacity(windows.len());
    for w in &windows {
        let started = Instant::now();
        let event = classify_turn(
            w,
            templates,
            &speed_series,
            config.speed_error_mps,
            config.knn_k,
            config.knn_distance,
        )?;
        classify_latencies.push(started.elapsed().as_secs_f64());
        steering_events.push(event);
    }
    let gnss_events = infer_gnss_turns(&points, &config.heading)?;
    verdicts.extend(strategy2_step(
        &steering_events,
        &gnss_events,
        config,
        &classify_latencies,
    ));

    verdicts.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    // summary
    let first = verdicts.iter().find(|v| v.alarm);
    let alarm_count = verdicts.iter().filter(|v| v.alarm).count();
    let false_alarm_count = verdicts
        .iter()
        .filter(|v| v.alarm && onset_s.is_none_or(|o| v.t < o))
        .count();
    let mut strategies_fired = Vec::new();
    for v in verdicts.iter().filter(|v| v.alarm) {
        if !strategies_fired.contains(&v.strategy) {
            strategies_fired.push(v.strategy);
        }
    }
    let s1_lat: Vec<f64> = verdicts
        .iter()
        .filter(|v| v.strategy == Strategy::S1Shift)
        .map(|v| v.latency_s)
        .collect();
    let s2_lat: Vec<f64> = verdicts
        .iter()
        .filter(|v| v.strategy == Strategy::S2Turn && v.latency_s > 0.0)
        .map(|v| v.latency_s)
        .collect();

    let summary = DetectionSummary {
        seed: None,
        config_hash: None,
        onset_s,
        threshold_m,
        first_alarm_t: first.map(|v| v.t),
        first_alarm_strategy: first.map(|v| v.strategy),
        detection_latency_s: match (first, onset_s) {
            (Some(v), Some(onset)) => Some(v.t - onset),
            _ => None,
        },
        alarm_count,
        false_alarm_count,
        strategies_fired,
        s1: LatencyStats::from_samples(s1_lat),
        s2: LatencyStats::from_samples(s2_lat),
    };
    Ok(DetectionRun { verdicts, summary })
}

/// Write the verdict stream CSV
/// (`t,alarm,strategy,perceived_shift_m,predicted_shift_m,diff_m,latency_s`);
/// non-shift verdicts leave the shift columns empty.
pub fn write_verdicts_csv(path: &Path, verdicts: &[DetectionVerdict], meta: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(meta) = meta {
        text.push_str("# ");
        text.push_str(meta);
        text.push('\n');
    }
    text.push_str("t,alarm,strategy,perceived_shift_m,predicted_shift_m,diff_m,latency_s\n");
    for v in verdicts {
        let (p, q, d) = match &v.evidence {
            Evidence::Shift {
                perceived_m,
                predicted_m,
                diff_m,
            } => (
                perceived_m.to_string(),
                predicted_m.to_string(),
                diff_m.to_string(),
            ),
            _ => (String::new(), String::new(), String::new()),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            v.t, v.alarm, v.strategy, p, q, d, v.latency_s
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}
