//! Great-circle geometry: distances, per-timestep location shifts, and
//! headings from latitude/longitude series.
//!
//! Coordinates are stored in radians internally; file interfaces use degrees
//! and convert exactly once at ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spherical Earth radius used throughout, in meters.
pub const EARTH_RADIUS_M: f64 = 6_378_000.0;

/// A point on the sphere, latitude/longitude in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Latitude in radians, in [-pi/2, pi/2].
    pub lat: f64,
    /// Longitude in radians, in [-pi, pi].
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        let pi = std::f64::consts::PI;
        if !(-half_pi..=half_pi).contains(&lat) {
            return Err(Error::invalid(format!("latitude {lat} rad out of range")));
        }
        if !(-pi..=pi).contains(&lon) {
            return Err(Error::invalid(format!("longitude {lon} rad out of range")));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        GeoPoint::new(lat_deg.to_radians(), lon_deg.to_radians())
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

/// Spherical Earth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    /// Radius in meters.
    pub radius_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_m: EARTH_RADIUS_M,
        }
    }
}

impl EarthModel {
    pub fn new(radius_m: f64) -> Result<Self> {
        if !(radius_m.is_finite() && radius_m > 0.0) {
            return Err(Error::invalid(format!("earth radius {radius_m} m")));
        }
        Ok(EarthModel { radius_m })
    }
}

/// Per-timestep location shifts of a position series.
///
/// `shifts[i]` is the great-circle distance in meters between the points at
/// `timestamps[i]` and `timestamps[i + 1]`, so `shifts.len() ==
/// timestamps.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSeries {
    pub timestamps: Vec<f64>,
    pub shifts: Vec<f64>,
}

impl ShiftSeries {
    /// Timestamp/shift pairs, shift `i` stamped at the *end* of its interval.
    pub fn stamped(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps[1..].iter().copied().zip(self.shifts.iter().copied())
    }
}

/// Great-circle distance in meters via the haversine formula.
///
/// Symmetric in its arguments and exactly zero for identical points.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> Result<f64> {
    for p in [a, b] {
        if !p.lat.is_finite() || !p.lon.is_finite() {
            return Err(Error::invalid("non-finite coordinate"));
        }
    }
    let half_dlat = (b.lat - a.lat) / 2.0;
    let half_dlon = (b.lon - a.lon) / 2.0;
    let s = half_dlat.sin().powi(2) + a.lat.cos() * b.lat.cos() * half_dlon.sin().powi(2);
    // s can exceed 1 by a rounding ulp for near-antipodal points
    Ok(2.0 * earth.radius_m * s.sqrt().min(1.0).asin())
}

/// Shifts between consecutive points of a timestamped position series.
pub fn location_shift_series(points: &[(f64, GeoPoint)]) -> Result<ShiftSeries> {
    location_shift_series_with(points, EarthModel::default())
}

pub fn location_shift_series_with(
    points: &[(f64, GeoPoint)],
    earth: EarthModel,
) -> Result<ShiftSeries> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "location shift series needs >= 2 points, got {}",
            points.len()
        )));
    }
    let mut timestamps = Vec::with_capacity(points.len());
    timestamps.push(points[0].0);
    let mut shifts = Vec::with_capacity(points.len() - 1);
    for (i, pair) in points.windows(2).enumerate() {
        let (t0, p0) = pair[0];
        let (t1, p1) = pair[1];
        if t1 <= t0 {
            return Err(Error::Ordering {
                context: "location shift series".into(),
                index: i + 1,
                value: t1,
                prev: t0,
            });
        }
        timestamps.push(t1);
        shifts.push(haversine_distance(p0, p1, earth)?);
    }
    Ok(ShiftSeries { timestamps, shifts })
}

/// Initial bearing from `a` to `b` in radians; north = 0, clockwise
/// positive, result in [-pi, pi).
pub fn heading(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    if a == b {
        return Err(Error::invalid(
            "heading undefined for coincident points".to_string(),
        ));
    }
    let dlon = b.lon - a.lon;
    let y = dlon.sin() * b.lat.cos();
    let x = a.lat.cos() * b.lat.sin() - a.lat.sin() * b.lat.cos() * dlon.cos();
    let theta = y.atan2(x);
    // atan2 lands in (-pi, pi]; fold the single boundary value
    Ok(if theta >= std::f64::consts::PI {
        -std::f64::consts::PI
    } else {
        theta
    })
}

/// Destination point after traveling `distance_m` from `from` along the
/// great circle with initial bearing `bearing` (north = 0, clockwise).
pub fn destination(
    from: GeoPoint,
    bearing: f64,
    distance_m: f64,
    earth: EarthModel,
) -> Result<GeoPoint> {
    if !bearing.is_finite() || !distance_m.is_finite() || distance_m < 0.0 {
        return Err(Error::invalid(format!(
            "destination step: bearing {bearing}, distance {distance_m}"
        )));
    }
    let delta = distance_m / earth.radius_m;
    let lat2 = (from.lat.sin() * delta.cos() + from.lat.cos() * delta.sin() * bearing.cos()).asin();
    let lon2 = from.lon
        + (bearing.sin() * delta.sin() * from.lat.cos())
            .atan2(delta.cos() - from.lat.sin() * lat2.sin());
    GeoPoint::new(lat2, wrap_lon(lon2))
}

/// Wrap a longitude into [-pi, pi].
pub fn wrap_lon(lon: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut l = (lon + std::f64::consts::PI).rem_euclid(two_pi);
    if l < 0.0 {
        l += two_pi;
    }
    l - std::f64::consts::PI
}

/// Wrap an angle difference into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a.rem_euclid(two_pi);
    if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}
