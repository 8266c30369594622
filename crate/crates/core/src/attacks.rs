//! Spoofing attack injection: rewrite the GNSS channels of a clean trace
//! after a chosen onset while leaving every in-vehicle channel untouched,
//! and record the ground-truth onset for latency measurement.
//!
//! Four attack families are modeled: turn-by-turn (jump onto an alternate
//! route), overshoot (frozen position while the vehicle moves), wrong turn
//! (the track mirrored about the approach heading, so only the turn
//! direction lies), and stop (synthetic motion while the vehicle stands
//! still).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, EarthModel, GeoPoint};
use crate::ingest::{ChannelKind, RawChannel};
use crate::simgen::{self, Interval, RouteScript, SensorTrace};

/// Synthetic motion shown by the spoofer during a stop attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopMotionProfile {
    pub speed_mps: f64,
    /// Total signed heading change over the interval, degrees clockwise;
    /// non-zero values drive the fake track around a corner.
    #[serde(default)]
    pub heading_change_deg: f64,
}

impl Default for StopMotionProfile {
    fn default() -> Self {
        StopMotionProfile {
            speed_mps: 8.0,
            heading_change_deg: 0.0,
        }
    }
}

/// The four modeled attack families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    TurnByTurn,
    Overshoot,
    WrongTurn,
    Stop,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::TurnByTurn,
        AttackKind::Overshoot,
        AttackKind::WrongTurn,
        AttackKind::Stop,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::TurnByTurn => "turn_by_turn",
            AttackKind::Overshoot => "overshoot",
            AttackKind::WrongTurn => "wrong_turn",
            AttackKind::Stop => "stop",
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parametrized description of one spoofing attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackScenario {
    TurnByTurn {
        onset_s: f64,
        /// Magnitude of the position jump at onset, meters.
        jump_m: f64,
        /// Absolute bearing of the jump, degrees clockwise from north.
        jump_bearing_deg: f64,
        /// Wrong-destination route the spoofed track follows after the
        /// jump. Its start coordinates are replaced by the jump landing
        /// point; its heading and segments are used as written.
        alternate: RouteScript,
    },
    Overshoot {
        onset_s: f64,
    },
    WrongTurn {
        /// Index into the clean trace's ground-truth turn list.
        turn_index: usize,
        /// How long before the turn the spoofer takes over, seconds.
        lead_s: f64,
    },
    Stop {
        interval: Interval,
        profile: StopMotionProfile,
    },
}

impl AttackScenario {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackScenario::TurnByTurn { .. } => AttackKind::TurnByTurn,
            AttackScenario::Overshoot { .. } => AttackKind::Overshoot,
            AttackScenario::WrongTurn { .. } => AttackKind::WrongTurn,
            AttackScenario::Stop { .. } => AttackKind::Stop,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("attack scenario", e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// A clean trace with its GNSS channels replaced from the onset onward.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoofedTrace {
    pub trace: SensorTrace,
    pub scenario: AttackScenario,
    pub onset_s: f64,
    /// GNSS sample index of the first spoofed fix.
    pub onset_index: usize,
}

/// Sidecar describing the attack baked into a spoofed trace directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub scenario: AttackScenario,
    pub onset_s: f64,
    pub onset_index: usize,
}

impl AttackRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("attack record", e))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Dispatch a scenario to its injector.
pub fn inject(trace: &SensorTrace, scenario: &AttackScenario) -> Result<SpoofedTrace> {
    match scenario {
        AttackScenario::TurnByTurn {
            onset_s,
            jump_m,
            jump_bearing_deg,
            alternate,
        } => inject_turn_by_turn(trace, *onset_s, *jump_m, *jump_bearing_deg, alternate),
        AttackScenario::Overshoot { onset_s } => inject_overshoot(trace, *onset_s),
        AttackScenario::WrongTurn { turn_index, lead_s } => {
            inject_wrong_turn(trace, *turn_index, *lead_s)
        }
        AttackScenario::Stop { interval, profile } => inject_stop(trace, *interval, *profile),
    }
}

fn gnss_samples(trace: &SensorTrace) -> (&RawChannel, &RawChannel) {
    (
        trace.channel(ChannelKind::GnssLat),
        trace.channel(ChannelKind::GnssLon),
    )
}

fn onset_gnss_index(trace: &SensorTrace, onset_s: f64) -> Result<usize> {
    let (lat, _) = gnss_samples(trace);
    let n = lat.samples.len();
    let idx = lat.samples.partition_point(|&(t, _)| t < onset_s);
    if onset_s < 0.0 || idx >= n {
        return Err(Error::scenario(format!(
            "onset {onset_s} s outside trace span"
        )));
    }
    Ok(idx)
}

fn clean_points(trace: &SensorTrace) -> Result<Vec<(f64, GeoPoint)>> {
    trace.gnss_points()
}

/// Rebuild a trace with replacement GNSS position samples.
fn with_gnss(trace: &SensorTrace, points: &[(f64, GeoPoint)]) -> Result<SensorTrace> {
    let lat: Vec<(f64, f64)> = points.iter().map(|&(t, p)| (t, p.lat_deg())).collect();
    let lon: Vec<(f64, f64)> = points.iter().map(|&(t, p)| (t, p.lon_deg())).collect();
    let channels = trace
        .channels
        .iter()
        .map(|c| match c.kind {
            ChannelKind::GnssLat => RawChannel::new(ChannelKind::GnssLat, lat.clone()),
            ChannelKind::GnssLon => RawChannel::new(ChannelKind::GnssLon, lon.clone()),
            _ => Ok(c.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensorTrace {
        channels,
        truth: trace.truth.clone(),
    })
}

/// Exact copy of the clean GNSS degrees for indices `< onset`, so pre-onset
/// samples stay byte-identical through any round trip.
fn splice_clean_prefix(trace: &SensorTrace, spoofed: &mut SensorTrace, onset_index: usize) {
    for kind in [ChannelKind::GnssLat, ChannelKind::GnssLon] {
        let clean = trace.channel(kind).samples.clone();
        let ch = spoofed
            .channels
            .iter_mut()
            .find(|c| c.kind == kind)
            .expect("gnss channel present");
        ch.samples[..onset_index].copy_from_slice(&clean[..onset_index]);
    }
}

/// Jump onto an alternate (wrong-destination) route at onset.
///
/// The spoofed track leaves the clean position by `jump_m` along
/// `jump_bearing_deg`, then follows the alternate route's GNSS track
/// resampled on the victim's GNSS clock.
pub fn inject_turn_by_turn(
    trace: &SensorTrace,
    onset_s: f64,
    jump_m: f64,
    jump_bearing_deg: f64,
    alternate: &RouteScript,
) -> Result<SpoofedTrace> {
    let onset_index = onset_gnss_index(trace, onset_s)?;
    let points = clean_points(trace)?;
    let earth = EarthModel::default();

    // generate the alternate route from the jump landing point
    let landing = geo::destination(
        points[onset_index].1,
        jump_bearing_deg.to_radians(),
        jump_m,
        earth,
    )?;
    let mut alt_script = alternate.clone();
    alt_script.start.lat_deg = landing.lat_deg();
    alt_script.start.lon_deg = landing.lon_deg();
    alt_script.gnss_rate_hz = infer_gnss_rate(trace)?;
    let alt = simgen::generate_trace(&alt_script)?;
    let alt_points = alt.gnss_points()?;

    let remaining = points.len() - onset_index;
    if alt_points.len() < remaining {
        return Err(Error::scenario(format!(
            "alternate route covers {} fixes but {} remain after onset",
            alt_points.len(),
            remaining
        )));
    }

    let mut spoofed_points = points.clone();
    for (k, sp) in spoofed_points[onset_index..].iter_mut().enumerate() {
        sp.1 = alt_points[k].1;
    }
    let mut spoofed = with_gnss(trace, &spoofed_points)?;
    splice_clean_prefix(trace, &mut spoofed, onset_index);
    Ok(SpoofedTrace {
        trace: spoofed,
        scenario: AttackScenario::TurnByTurn {
            onset_s,
            jump_m,
            jump_bearing_deg,
            alternate: alternate.clone(),
        },
        onset_s,
        onset_index,
    })
}

fn infer_gnss_rate(trace: &SensorTrace) -> Result<u32> {
    let (lat, _) = gnss_samples(trace);
    if lat.samples.len() < 2 {
        return Err(Error::InsufficientData("trace too short".into()));
    }
    let dt = lat.samples[1].0 - lat.samples[0].0;
    Ok((1.0 / dt).round() as u32)
}

/// Freeze the reported position from onset onward.
pub fn inject_overshoot(trace: &SensorTrace, onset_s: f64) -> Result<SpoofedTrace> {
    let onset_index = onset_gnss_index(trace, onset_s)?;
    let speed = trace.channel(ChannelKind::Speed).value_at(onset_s);
    if speed <= 0.5 {
        return Err(Error::scenario(format!(
            "overshoot undefined: vehicle effectively stationary at onset (speed {speed} m/s)"
        )));
    }
    let points = clean_points(trace)?;
    let frozen = points[onset_index].1;
    let mut spoofed_points = points;
    for sp in spoofed_points[onset_index..].iter_mut() {
        sp.1 = frozen;
    }
    let mut spoofed = with_gnss(trace, &spoofed_points)?;
    splice_clean_prefix(trace, &mut spoofed, onset_index);
    Ok(SpoofedTrace {
        trace: spoofed,
        scenario: AttackScenario::Overshoot { onset_s },
        onset_s,
        onset_index,
    })
}

/// Mirror the track's heading changes about the approach heading from just
/// before the referenced ground-truth turn, flipping its direction while
/// preserving every per-step shift magnitude.
pub fn inject_wrong_turn(
    trace: &SensorTrace,
    turn_index: usize,
    lead_s: f64,
) -> Result<SpoofedTrace> {
    let turn = *trace.truth.turns.get(turn_index).ok_or_else(|| {
        Error::scenario(format!(
            "no ground-truth turn at index {turn_index} ({} recorded)",
            trace.truth.turns.len()
        ))
    })?;
    let onset_s = turn.start_s - lead_s.max(0.0);
    let onset_index = onset_gnss_index(trace, onset_s.max(0.0))?;
    let points = clean_points(trace)?;
    let earth = EarthModel::default();

    // approach heading from ~0.25 s of track before onset
    let rate = infer_gnss_rate(trace)? as usize;
    let back = (rate / 4).max(1);
    if onset_index < back {
        return Err(Error::scenario(
            "turn begins too early for an approach heading".to_string(),
        ));
    }
    let a = points[onset_index - back].1;
    let b = points[onset_index].1;
    if geo::haversine_distance(a, b, earth)? < 0.05 {
        return Err(Error::scenario(
            "vehicle not moving on approach; wrong-turn mirror undefined".to_string(),
        ));
    }
    let approach = geo::heading(a, b)?;

    let mut spoofed_points = points.clone();
    for i in onset_index..points.len() - 1 {
        let d = geo::haversine_distance(points[i].1, points[i + 1].1, earth)?;
        if d == 0.0 {
            spoofed_points[i + 1].1 = spoofed_points[i].1;
            continue;
        }
        let bearing = geo::heading(points[i].1, points[i + 1].1)?;
        let mirrored = geo::wrap_angle(2.0 * approach - bearing);
        spoofed_points[i + 1].1 = geo::destination(spoofed_points[i].1, mirrored, d, earth)?;
    }
    let mut spoofed = with_gnss(trace, &spoofed_points)?;
    splice_clean_prefix(trace, &mut spoofed, onset_index);
    Ok(SpoofedTrace {
        trace: spoofed,
        scenario: AttackScenario::WrongTurn { turn_index, lead_s },
        onset_s: points[onset_index].0,
        onset_index,
    })
}

/// Show motion along the road while the vehicle is truly stopped.
pub fn inject_stop(
    trace: &SensorTrace,
    interval: Interval,
    profile: StopMotionProfile,
) -> Result<SpoofedTrace> {
    if interval.end_s <= interval.start_s {
        return Err(Error::scenario("empty stop interval".to_string()));
    }
    // verify against the data: the clean vehicle must actually stand still
    let speed = trace.channel(ChannelKind::Speed);
    let max_speed = speed
        .samples
        .iter()
        .filter(|(t, _)| *t >= interval.start_s && *t <= interval.end_s)
        .map(|&(_, v)| v)
        .fold(0.0f64, f64::max);
    if max_speed > 0.5 {
        return Err(Error::scenario(format!(
            "vehicle not stationary over stop interval (max speed {max_speed} m/s)"
        )));
    }

    let onset_s = interval.start_s;
    let onset_index = onset_gnss_index(trace, onset_s)?;
    let points = clean_points(trace)?;
    let earth = EarthModel::default();

    // pre-stop heading: last pair of fixes that actually moved
    let mut heading = None;
    for i in (1..=onset_index).rev() {
        let d = geo::haversine_distance(points[i - 1].1, points[i].1, earth)?;
        if d > 0.05 {
            heading = Some(geo::heading(points[i - 1].1, points[i].1)?);
            break;
        }
    }
    let heading0 =
        heading.ok_or_else(|| Error::scenario("no pre-stop motion to take a heading from"))?;

    let duration = interval.end_s - interval.start_s;
    let omega = profile.heading_change_deg.to_radians() / duration;
    let mut spoofed_points = points.clone();
    let mut pos = points[onset_index].1;
    let mut heading = heading0;
    let mut t_prev = points[onset_index].0;
    let mut end_in_interval = onset_index;
    for i in onset_index + 1..points.len() {
        let t = points[i].0;
        if t > interval.end_s {
            break;
        }
        let dt = t - t_prev;
        let heading_mid = heading + omega * dt / 2.0;
        pos = geo::destination(pos, heading_mid, profile.speed_mps * dt, earth)?;
        heading = geo::wrap_angle(heading + omega * dt);
        spoofed_points[i].1 = pos;
        t_prev = t;
        end_in_interval = i;
    }
    // after the interval: carry the accumulated divergence forward so the
    // spoofed track stays continuous
    let dlat = spoofed_points[end_in_interval].1.lat - points[end_in_interval].1.lat;
    let dlon = spoofed_points[end_in_interval].1.lon - points[end_in_interval].1.lon;
    for i in end_in_interval + 1..points.len() {
        spoofed_points[i].1 = GeoPoint::new(
            points[i].1.lat + dlat,
            geo::wrap_lon(points[i].1.lon + dlon),
        )?;
    }
    let mut spoofed = with_gnss(trace, &spoofed_points)?;
    splice_clean_prefix(trace, &mut spoofed, onset_index);
    Ok(SpoofedTrace {
        trace: spoofed,
        scenario: AttackScenario::Stop { interval, profile },
        onset_s,
        onset_index,
    })
}

/// Write a spoofed trace directory: channel CSVs, manifest, clean ground
/// truth, and the attack sidecar. Returns the manifest path.
pub fn write_spoofed_trace(
    dir: &Path,
    spoofed: &SpoofedTrace,
    seed: u64,
    config_hash: Option<String>,
) -> Result<PathBuf> {
    let manifest = simgen::write_trace(dir, &spoofed.trace, seed, config_hash)?;
    AttackRecord {
        scenario: spoofed.scenario.clone(),
        onset_s: spoofed.onset_s,
        onset_index: spoofed.onset_index,
    }
    .save(&dir.join("attack.json"))?;
    Ok(manifest)
}
