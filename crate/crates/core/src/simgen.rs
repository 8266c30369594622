//! Kinematically consistent synthetic traces (GNSS + speed + accelerator +
//! steering) generated from route scripts, with ground-truth turn events and
//! motion-state intervals.
//!
//! The vehicle model is deliberately simple: constant-speed great-circle
//! arcs for turns, trapezoidal speed profiles between target speeds, and a
//! smooth rise-hold-fall steering lobe during each turn whose shape also
//! drives the heading rate. The integrator advances position with exact
//! spherical steps, so on a constant-speed straight the GNSS shift per step
//! equals speed times the sample period to well below a micrometer.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtw::{LabeledTemplate, TurnDirection};
use crate::error::{Error, Result};
use crate::geo::{self, EarthModel, GeoPoint};
use crate::ingest::{
    self, AlignedFrame, ChannelEntry, ChannelKind, RawChannel, SourceUnit, TraceManifest,
};

/// Longitudinal acceleration used for speed transitions, m/s^2.
pub const ACCEL_LIMIT_MPS2: f64 = 2.5;
/// Steering-wheel-to-road-wheel ratio for the synthetic steering channel.
const STEERING_RATIO: f64 = 16.0;
/// Wheelbase of the synthetic vehicle, meters.
const WHEELBASE_M: f64 = 2.7;
/// Fraction of a turn spent ramping the steering lobe up (and down).
const LOBE_RAMP_FRAC: f64 = 0.25;
/// Accelerator pedal model: pct = BASE + SLOPE * accel, clipped to 0..100.
const ACCEL_PCT_BASE: f64 = 20.0;
const ACCEL_PCT_PER_MPS2: f64 = 8.0;

/// One scripted maneuver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Straight {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_s: Option<f64>,
        speed_mps: f64,
    },
    LeftTurn {
        radius_m: f64,
        angle_deg: f64,
        speed_mps: f64,
    },
    RightTurn {
        radius_m: f64,
        angle_deg: f64,
        speed_mps: f64,
    },
    Stop {
        duration_s: f64,
    },
}

/// Zero-mean uniform noise amplitudes per channel; all default to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseConfig {
    /// GNSS position noise as a +-amplitude in meters (east and north).
    #[serde(default)]
    pub gnss_m: f64,
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default)]
    pub accel_pct: f64,
    #[serde(default)]
    pub steering_deg: f64,
}

/// Initial pose of the simulated vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// Initial bearing, degrees clockwise from north.
    pub heading_deg: f64,
}

/// A full drive description; serialized as JSON for the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteScript {
    pub start: StartPose,
    pub segments: Vec<Segment>,
    #[serde(default = "default_gnss_rate")]
    pub gnss_rate_hz: u32,
    #[serde(default = "default_can_rate")]
    pub can_rate_hz: u32,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_gnss_rate() -> u32 {
    120
}

fn default_can_rate() -> u32 {
    100
}

impl RouteScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("route script", e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::EmptyRoute);
        }
        if self.gnss_rate_hz == 0 || self.can_rate_hz == 0 {
            return Err(Error::invalid("sensor rates must be positive"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let bad = |what: &str| Error::invalid(format!("segment {i}: {what}"));
            match *seg {
                Segment::Straight {
                    length_m,
                    duration_s,
                    speed_mps,
                } => {
                    if speed_mps <= 0.0 {
                        return Err(bad("straight needs positive speed"));
                    }
                    match (length_m, duration_s) {
                        (Some(l), None) if l > 0.0 => {}
                        (None, Some(d)) if d > 0.0 => {}
                        _ => {
                            return Err(bad(
                                "straight needs exactly one of positive length_m or duration_s",
                            ))
                        }
                    }
                }
                Segment::LeftTurn {
                    radius_m,
                    angle_deg,
                    speed_mps,
                }
                | Segment::RightTurn {
                    radius_m,
                    angle_deg,
                    speed_mps,
                } => {
                    if radius_m <= 0.0 || angle_deg <= 0.0 || speed_mps <= 0.0 {
                        return Err(bad("turn needs positive radius, angle, speed"));
                    }
                }
                Segment::Stop { duration_s } => {
                    if duration_s <= 0.0 {
                        return Err(bad("stop needs positive duration"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth turn event of a generated trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthTurn {
    pub start_s: f64,
    pub end_s: f64,
    pub direction: TurnDirection,
    pub angle_deg: f64,
}

/// Closed time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

/// What actually happened in a generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    pub turns: Vec<TruthTurn>,
    /// Intervals where the vehicle truly stands still.
    pub stationary: Vec<Interval>,
    pub duration_s: f64,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("ground truth", e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// One simulated drive: the five raw channels plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub channels: Vec<RawChannel>,
    pub truth: GroundTruth,
}

impl SensorTrace {
    pub fn channel(&self, kind: ChannelKind) -> &RawChannel {
        self.channels
            .iter()
            .find(|c| c.kind == kind)
            .expect("generated traces carry all five channels")
    }

    pub fn aligned(&self) -> Result<Vec<AlignedFrame>> {
        ingest::synchronize(&self.channels)
    }

    /// GNSS fixes as timestamped points.
    pub fn gnss_points(&self) -> Result<Vec<(f64, GeoPoint)>> {
        let lat = self.channel(ChannelKind::GnssLat);
        let lon = self.channel(ChannelKind::GnssLon);
        lat.samples
            .iter()
            .zip(&lon.samples)
            .map(|(&(t, la), &(_, lo))| Ok((t, GeoPoint::from_degrees(la, lo)?)))
            .collect()
    }
}

/// Smooth rise-hold-fall lobe on [0, 1]; the ramps are smoothstep shaped.
pub(crate) fn lobe(u: f64, ramp_frac: f64) -> f64 {
    let smooth = |x: f64| {
        let x = x.clamp(0.0, 1.0);
        x * x * (3.0 - 2.0 * x)
    };
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else if u < ramp_frac {
        smooth(u / ramp_frac)
    } else if u > 1.0 - ramp_frac {
        smooth((1.0 - u) / ramp_frac)
    } else {
        1.0
    }
}

/// Mean of the lobe over [0, 1]; each smoothstep ramp integrates to 1/2.
fn lobe_mean(ramp_frac: f64) -> f64 {
    1.0 - ramp_frac
}

#[derive(Debug, Clone, Copy)]
enum PhaseKind {
    Cruise {
        speed: f64,
    },
    Ramp {
        v0: f64,
        accel: f64,
    },
    Turn {
        speed: f64,
        angle_rad: f64,
        peak_steer_deg: f64,
    },
    Hold,
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    kind: PhaseKind,
    duration_s: f64,
}

impl Phase {
    fn speed_at(&self, tau: f64) -> f64 {
        match self.kind {
            PhaseKind::Cruise { speed } | PhaseKind::Turn { speed, .. } => speed,
            PhaseKind::Ramp { v0, accel } => v0 + accel * tau,
            PhaseKind::Hold => 0.0,
        }
    }

    fn accel(&self) -> f64 {
        match self.kind {
            PhaseKind::Ramp { accel, .. } => accel,
            _ => 0.0,
        }
    }

    fn steering_at(&self, tau: f64) -> f64 {
        match self.kind {
            PhaseKind::Turn {
                angle_rad,
                peak_steer_deg,
                ..
            } => {
                let sign = angle_rad.signum();
                sign * peak_steer_deg * lobe(tau / self.duration_s, LOBE_RAMP_FRAC)
            }
            _ => 0.0,
        }
    }

    fn heading_rate_at(&self, tau: f64) -> f64 {
        match self.kind {
            PhaseKind::Turn { angle_rad, .. } => {
                angle_rad / self.duration_s * lobe(tau / self.duration_s, LOBE_RAMP_FRAC)
                    / lobe_mean(LOBE_RAMP_FRAC)
            }
            _ => 0.0,
        }
    }
}

/// Steering-wheel peak for a turn of the given radius.
fn peak_steering_deg(radius_m: f64) -> f64 {
    (STEERING_RATIO * (WHEELBASE_M / radius_m).atan()).to_degrees()
}

fn compile_phases(script: &RouteScript) -> (Vec<Phase>, GroundTruth) {
    let mut phases: Vec<Phase> = Vec::new();
    let mut truth = GroundTruth::default();
    let mut v = match script.segments[0] {
        Segment::Straight { speed_mps, .. }
        | Segment::LeftTurn { speed_mps, .. }
        | Segment::RightTurn { speed_mps, .. } => speed_mps,
        Segment::Stop { .. } => 0.0,
    };
    let mut t = 0.0;
    let push = |phases: &mut Vec<Phase>, t: &mut f64, phase: Phase| {
        *t += phase.duration_s;
        phases.push(phase);
    };
    for seg in &script.segments {
        let target = match *seg {
            Segment::Straight { speed_mps, .. }
            | Segment::LeftTurn { speed_mps, .. }
            | Segment::RightTurn { speed_mps, .. } => speed_mps,
            Segment::Stop { .. } => 0.0,
        };
        if (target - v).abs() > 1e-9 {
            let accel = ACCEL_LIMIT_MPS2.copysign(target - v);
            push(
                &mut phases,
                &mut t,
                Phase {
                    kind: PhaseKind::Ramp { v0: v, accel },
                    duration_s: (target - v).abs() / ACCEL_LIMIT_MPS2,
                },
            );
            v = target;
        }
        match *seg {
            Segment::Straight {
                length_m,
                duration_s,
                speed_mps,
            } => {
                let duration = duration_s.unwrap_or_else(|| length_m.unwrap() / speed_mps);
                push(
                    &mut phases,
                    &mut t,
                    Phase {
                        kind: PhaseKind::Cruise { speed: speed_mps },
                        duration_s: duration,
                    },
                );
            }
            Segment::LeftTurn {
                radius_m,
                angle_deg,
                speed_mps,
            }
            | Segment::RightTurn {
                radius_m,
                angle_deg,
                speed_mps,
            } => {
                let direction = match seg {
                    Segment::RightTurn { .. } => TurnDirection::Right,
                    _ => TurnDirection::Left,
                };
                let sign = match direction {
                    TurnDirection::Right => 1.0,
                    TurnDirection::Left => -1.0,
                };
                let duration = radius_m * angle_deg.to_radians() / speed_mps;
                truth.turns.push(TruthTurn {
                    start_s: t,
                    end_s: t + duration,
                    direction,
                    angle_deg,
                });
                push(
                    &mut phases,
                    &mut t,
                    Phase {
                        kind: PhaseKind::Turn {
                            speed: speed_mps,
                            angle_rad: sign * angle_deg.to_radians(),
                            peak_steer_deg: peak_steering_deg(radius_m),
                        },
                        duration_s: duration,
                    },
                );
            }
            Segment::Stop { duration_s } => {
                truth.stationary.push(Interval {
                    start_s: t,
                    end_s: t + duration_s,
                });
                push(
                    &mut phases,
                    &mut t,
                    Phase {
                        kind: PhaseKind::Hold,
                        duration_s,
                    },
                );
            }
        }
    }
    truth.duration_s = t;
    (phases, truth)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct VehicleState {
    pos: GeoPoint,
    heading: f64,
    phase_idx: usize,
    tau: f64,
}

/// Generate one deterministic trace from a route script.
pub fn generate_trace(script: &RouteScript) -> Result<SensorTrace> {
    script.validate()?;
    let (phases, truth) = compile_phases(script);
    let earth = EarthModel::default();

    let gnss = script.gnss_rate_hz as u64;
    let can = script.can_rate_hz as u64;
    let sim_rate = gnss / gcd(gnss, can) * can;
    let dt = 1.0 / sim_rate as f64;
    let gnss_stride = (sim_rate / gnss) as usize;
    let can_stride = (sim_rate / can) as usize;
    let total_steps = (truth.duration_s * sim_rate as f64).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = script.noise;
    let noise_uniform = |rng: &mut ChaCha8Rng, amp: f64| -> f64 {
        if amp > 0.0 {
            rng.gen_range(-amp..=amp)
        } else {
            0.0
        }
    };

    let mut state = VehicleState {
        pos: GeoPoint::from_degrees(script.start.lat_deg, script.start.lon_deg)?,
        heading: script.start.heading_deg.to_radians(),
        phase_idx: 0,
        tau: 0.0,
    };

    let mut gnss_lat = Vec::with_capacity(total_steps / gnss_stride + 2);
    let mut gnss_lon = Vec::with_capacity(total_steps / gnss_stride + 2);
    let mut speed_ch = Vec::with_capacity(total_steps / can_stride + 2);
    let mut accel_ch = Vec::with_capacity(total_steps / can_stride + 2);
    let mut steer_ch = Vec::with_capacity(total_steps / can_stride + 2);

    for step in 0..=total_steps {
        let t = step as f64 * dt;
        let phase = &phases[state.phase_idx.min(phases.len() - 1)];
        let tau = state.tau;

        if step % gnss_stride == 0 {
            let mut p = state.pos;
            if noise.gnss_m > 0.0 {
                let east = noise_uniform(&mut rng, noise.gnss_m);
                let north = noise_uniform(&mut rng, noise.gnss_m);
                let lat = p.lat + north / earth.radius_m;
                let lon = p.lon + east / (earth.radius_m * p.lat.cos());
                p = GeoPoint::new(lat, geo::wrap_lon(lon))?;
            }
            gnss_lat.push((t, p.lat_deg()));
            gnss_lon.push((t, p.lon_deg()));
        }
        if step % can_stride == 0 {
            let v = (phase.speed_at(tau) + noise_uniform(&mut rng, noise.speed_mps)).max(0.0);
            let pct = (ACCEL_PCT_BASE
                + ACCEL_PCT_PER_MPS2 * phase.accel()
                + noise_uniform(&mut rng, noise.accel_pct))
            .clamp(0.0, 100.0);
            let steer = phase.steering_at(tau) + noise_uniform(&mut rng, noise.steering_deg);
            speed_ch.push((t, v));
            accel_ch.push((t, pct));
            steer_ch.push((t, steer));
        }
        if step == total_steps {
            break;
        }

        // advance dt, sub-stepping across phase boundaries
        let mut remaining = dt;
        while remaining > 0.0 && state.phase_idx < phases.len() {
            let phase = &phases[state.phase_idx];
            let left_in_phase = phase.duration_s - state.tau;
            let h = remaining.min(left_in_phase);
            if h > 0.0 {
                let tau_mid = state.tau + h / 2.0;
                let ds = phase.speed_at(tau_mid) * h;
                let omega = phase.heading_rate_at(tau_mid);
                let heading_mid = state.heading + omega * h / 2.0;
                if ds > 0.0 {
                    state.pos = geo::destination(state.pos, heading_mid, ds, earth)?;
                }
                state.heading = geo::wrap_angle(state.heading + omega * h);
                state.tau += h;
                remaining -= h;
            }
            if state.tau >= phase.duration_s - 1e-12 {
                state.phase_idx += 1;
                state.tau = 0.0;
            }
        }
    }

    let channels = vec![
        RawChannel::new(ChannelKind::GnssLat, gnss_lat)?,
        RawChannel::new(ChannelKind::GnssLon, gnss_lon)?,
        RawChannel::new(ChannelKind::Speed, speed_ch)?,
        RawChannel::new(ChannelKind::AccelPct, accel_ch)?,
        RawChannel::new(ChannelKind::SteeringDeg, steer_ch)?,
    ];
    Ok(SensorTrace { channels, truth })
}

/// Write a trace's channel CSVs, manifest, and ground-truth sidecar into
/// `dir`; returns the manifest path.
pub fn write_trace(
    dir: &Path,
    trace: &SensorTrace,
    seed: u64,
    config_hash: Option<String>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let meta = match &config_hash {
        Some(h) => format!("seed={seed} config={h}"),
        None => format!("seed={seed}"),
    };
    let mut channels = std::collections::BTreeMap::new();
    for ch in &trace.channels {
        let name = format!("{}.csv", ch.kind);
        ingest::write_channel_file(&dir.join(&name), &ch.samples, Some(&meta))?;
        channels.insert(
            ch.kind,
            ChannelEntry {
                path: name,
                unit: match ch.kind {
                    ChannelKind::Speed => SourceUnit::Mps,
                    ChannelKind::AccelPct => SourceUnit::Pct,
                    _ => SourceUnit::Deg,
                },
            },
        );
    }
    let manifest = TraceManifest {
        channels,
        seed: Some(seed),
        config_hash,
    };
    let manifest_path = dir.join("trace.json");
    manifest.save(&manifest_path)?;
    trace.truth.save(&dir.join("truth.json"))?;
    Ok(manifest_path)
}

/// Load a trace plus its ground-truth sidecar (if present).
pub fn load_trace(manifest_path: &Path) -> Result<SensorTrace> {
    let channels = ingest::parse_trace(manifest_path)?;
    let truth_path = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join("truth.json");
    let truth = if truth_path.exists() {
        GroundTruth::load(&truth_path)?
    } else {
        GroundTruth::default()
    };
    Ok(SensorTrace { channels, truth })
}

/// Shape parameters for a synthetic turn-template corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateCorpusSpec {
    pub right_count: usize,
    pub left_count: usize,
    pub rate_hz: f64,
    pub peak_deg_min: f64,
    pub peak_deg_max: f64,
    pub duration_s_min: f64,
    pub duration_s_max: f64,
    pub noise_deg: f64,
    pub seed: u64,
}

impl Default for TemplateCorpusSpec {
    fn default() -> Self {
        TemplateCorpusSpec {
            right_count: 19,
            left_count: 13,
            rate_hz: 5.0,
            peak_deg_min: 60.0,
            peak_deg_max: 110.0,
            duration_s_min: 2.5,
            duration_s_max: 6.0,
            noise_deg: 0.0,
            seed: 0,
        }
    }
}

/// One synthetic steering lobe sampled at `rate_hz`; right turns are
/// positive excursions, left turns their mirror.
pub fn steering_lobe(
    direction: TurnDirection,
    peak_deg: f64,
    duration_s: f64,
    rate_hz: f64,
    noise_deg: f64,
    rng: &mut impl Rng,
) -> Vec<(f64, f64)> {
    let sign = match direction {
        TurnDirection::Right => 1.0,
        TurnDirection::Left => -1.0,
    };
    let n = (duration_s * rate_hz).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 / rate_hz;
            let mut v = sign * peak_deg * lobe(t / duration_s, LOBE_RAMP_FRAC);
            if noise_deg > 0.0 {
                v += rng.gen_range(-noise_deg..=noise_deg);
            }
            (t, v)
        })
        .collect()
}

/// Generate a labeled corpus of varied left/right steering lobes.
pub fn generate_turn_templates(spec: &TemplateCorpusSpec) -> Result<Vec<LabeledTemplate>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.right_count + spec.left_count);
    let plan = std::iter::repeat_n(TurnDirection::Right, spec.right_count)
        .chain(std::iter::repeat_n(TurnDirection::Left, spec.left_count));
    for direction in plan {
        let peak = rng.gen_range(spec.peak_deg_min..=spec.peak_deg_max);
        let duration = rng.gen_range(spec.duration_s_min..=spec.duration_s_max);
        let samples =
            steering_lobe(direction, peak, duration, spec.rate_hz, spec.noise_deg, &mut rng);
        out.push(LabeledTemplate::new(direction, samples)?);
    }
    Ok(out)
}
