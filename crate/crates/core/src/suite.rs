//! Reproducible evaluation suite: standard route scripts, a compact
//! training setup, and seeded attack-scenario batches, shared by the CLI
//! `pipeline` command and the end-to-end tests.

use crate::attacks::{AttackKind, AttackScenario, StopMotionProfile};
use crate::error::{Error, Result};
use crate::lstm::{self, NetworkDims, SupervisedWindow, TrainingConfig};
use crate::simgen::{self, NoiseConfig, RouteScript, Segment, SensorTrace, StartPose};

/// Default onset for attacks that take over mid-cruise, seconds.
pub const CRUISE_ONSET_S: f64 = 5.0;
/// Lead time before the targeted turn for wrong-turn takeovers, seconds.
pub const WRONG_TURN_LEAD_S: f64 = 0.5;
/// Jump landed at the turn-by-turn onset, meters.
pub const TURN_BY_TURN_JUMP_M: f64 = 5.0;

fn straight(duration_s: f64, speed: f64) -> Segment {
    Segment::Straight {
        length_m: None,
        duration_s: Some(duration_s),
        speed_mps: speed,
    }
}

/// Attack-free routes covering the speed band, both turn directions, two
/// turn radii, speed ramps, and a stop, for model training.
pub fn training_routes(seed: u64) -> Vec<RouteScript> {
    let mk = |heading: f64, segments: Vec<Segment>, salt: u64| RouteScript {
        start: StartPose {
            lat_deg: 37.40,
            lon_deg: -122.10,
            heading_deg: heading,
        },
        segments,
        gnss_rate_hz: 120,
        can_rate_hz: 100,
        noise: NoiseConfig::default(),
        seed: seed.wrapping_add(salt),
    };
    vec![
        mk(
            80.0,
            vec![
                straight(6.0, 6.0),
                Segment::RightTurn {
                    radius_m: 24.0,
                    angle_deg: 90.0,
                    speed_mps: 6.0,
                },
                straight(5.0, 10.0),
                Segment::Stop { duration_s: 4.0 },
                straight(6.0, 14.0),
            ],
            1,
        ),
        mk(
            200.0,
            vec![
                straight(5.0, 8.0),
                Segment::LeftTurn {
                    radius_m: 32.0,
                    angle_deg: 90.0,
                    speed_mps: 8.0,
                },
                straight(4.0, 12.0),
                Segment::RightTurn {
                    radius_m: 28.0,
                    angle_deg: 75.0,
                    speed_mps: 12.0,
                },
                Segment::Stop { duration_s: 3.0 },
                straight(5.0, 15.0),
            ],
            2,
        ),
    ]
}

/// Supervised windows from a set of routes, concatenated in route order.
pub fn build_training_windows(routes: &[RouteScript], window_len: usize) -> Result<Vec<SupervisedWindow>> {
    let mut windows = Vec::new();
    for route in routes {
        let trace = simgen::generate_trace(route)?;
        let frames = trace.aligned()?;
        windows.extend(lstm::build_windows(&frames, window_len)?);
    }
    Ok(windows)
}

/// Compact model profile: small enough to train in seconds while keeping
/// the reference batch size and learning rate.
pub fn compact_profile(seed: u64) -> (NetworkDims, TrainingConfig) {
    (
        NetworkDims {
            hidden1: 16,
            hidden2: 8,
        },
        TrainingConfig {
            epochs: 60,
            seed,
            ..Default::default()
        },
    )
}

/// The i-th base route of the detection suite: cruise, one 90-degree turn
/// (alternating direction), more cruise, a stop, and a final leg.
pub fn detection_route(seed: u64, index: usize) -> RouteScript {
    let speed = 8.0 + (index % 5) as f64;
    let radius = 24.0 + (index % 7) as f64;
    let turn = if index.is_multiple_of(2) {
        Segment::RightTurn {
            radius_m: radius,
            angle_deg: 90.0,
            speed_mps: speed,
        }
    } else {
        Segment::LeftTurn {
            radius_m: radius,
            angle_deg: 90.0,
            speed_mps: speed,
        }
    };
    RouteScript {
        start: StartPose {
            lat_deg: 37.40 + 0.01 * index as f64,
            lon_deg: -122.10 - 0.01 * index as f64,
            heading_deg: (index as f64 * 36.0) % 360.0,
        },
        segments: vec![
            straight(10.0, speed),
            turn,
            straight(8.0, speed),
            Segment::Stop { duration_s: 6.0 },
            straight(8.0, speed),
        ],
        gnss_rate_hz: 120,
        can_rate_hz: 100,
        noise: NoiseConfig::default(),
        seed: seed.wrapping_add(1000 + index as u64),
    }
}

/// Alternate (wrong-destination) route for a turn-by-turn attack on `route`:
/// the same turn sequence and timing, entered at the onset point, with a
/// slack tail so it always covers the remaining trace.
fn turn_by_turn_alternate(route: &RouteScript, onset_s: f64) -> Result<RouteScript> {
    let mut alt = route.clone();
    match alt.segments.first_mut() {
        Some(Segment::Straight { duration_s: Some(d), .. }) if *d > onset_s => {
            *d -= onset_s;
        }
        _ => {
            return Err(Error::scenario(
                "turn-by-turn suite routes must open with a straight longer than the onset",
            ))
        }
    }
    let tail_speed = match *alt.segments.last().unwrap() {
        Segment::Straight { speed_mps, .. }
        | Segment::LeftTurn { speed_mps, .. }
        | Segment::RightTurn { speed_mps, .. } => speed_mps,
        Segment::Stop { .. } => 8.0,
    };
    alt.segments.push(straight(10.0, tail_speed));
    alt.seed = route.seed.wrapping_add(7777);
    Ok(alt)
}

/// Build the scenario of the given kind against a base route and its
/// generated trace.
pub fn scenario_for(
    kind: AttackKind,
    route: &RouteScript,
    trace: &SensorTrace,
    index: usize,
) -> Result<AttackScenario> {
    match kind {
        AttackKind::TurnByTurn => Ok(AttackScenario::TurnByTurn {
            onset_s: CRUISE_ONSET_S,
            jump_m: TURN_BY_TURN_JUMP_M,
            jump_bearing_deg: (route.start.heading_deg + 90.0 + index as f64 * 17.0) % 360.0,
            alternate: turn_by_turn_alternate(route, CRUISE_ONSET_S)?,
        }),
        AttackKind::Overshoot => Ok(AttackScenario::Overshoot {
            onset_s: CRUISE_ONSET_S,
        }),
        AttackKind::WrongTurn => {
            if trace.truth.turns.is_empty() {
                return Err(Error::scenario("suite route lacks a ground-truth turn"));
            }
            Ok(AttackScenario::WrongTurn {
                turn_index: 0,
                lead_s: WRONG_TURN_LEAD_S,
            })
        }
        AttackKind::Stop => {
            let interval = trace
                .truth
                .stationary
                .first()
                .copied()
                .ok_or_else(|| Error::scenario("suite route lacks a stationary interval"))?;
            Ok(AttackScenario::Stop {
                interval,
                // heading change makes the fake track turn a corner the
                // steering stream never sees
                profile: StopMotionProfile {
                    speed_mps: 8.0,
                    heading_change_deg: 90.0,
                },
            })
        }
    }
}
