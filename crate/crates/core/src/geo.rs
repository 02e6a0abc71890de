//! Geometric and kinematic primitives over GPS location sequences.
//!
//! Distances are great-circle (haversine) on a sphere of mean radius
//! [`EARTH_RADIUS_M`]. Bounding boxes are axis-aligned in lat/lon degrees,
//! which is valid away from the antimeridian and the poles; sequences
//! crossing either are out of scope.

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters used by all great-circle math.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Scalar type the geometric kernels are generic over (f32 or f64).
pub trait GeoScalar: Float + FromPrimitive + core::fmt::Debug {}
impl<T: Float + FromPrimitive + core::fmt::Debug> GeoScalar for T {}

/// Errors from sequence-level geometric operations.
#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("empty location sequence")]
    EmptySequence,
    #[error("timestamps not strictly increasing at index {index}: {t} after {prev}")]
    NonMonotonic { index: usize, t: i64, prev: i64 },
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("speed undefined for samples with equal timestamps ({t} ms)")]
    ZeroDuration { t: i64 },
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<F> {
    pub lat: F,
    pub lon: F,
}

impl<F: GeoScalar> Point<F> {
    pub fn new(lat: F, lon: F) -> Self {
        Self { lat, lon }
    }
}

/// Great-circle distance in meters between two points.
///
/// Symmetric and non-negative. Total on valid lat/lon inputs.
pub fn haversine<F: GeoScalar>(a: Point<F>, b: Point<F>) -> F {
    let radius = F::from_f64(EARTH_RADIUS_M).unwrap();
    let two = F::one() + F::one();
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let half_dlat = (b.lat - a.lat).to_radians() / two;
    let half_dlon = (b.lon - a.lon).to_radians() / two;
    let h = half_dlat.sin() * half_dlat.sin()
        + lat_a.cos() * lat_b.cos() * half_dlon.sin() * half_dlon.sin();
    // atan2 form stays accurate for near-antipodal h ~ 1.
    let central = two * h.sqrt().atan2((F::one() - h).sqrt());
    radius * central
}

/// Axis-aligned bounding box given by bottom-left and top-right corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<F> {
    pub bl: Point<F>,
    pub tr: Point<F>,
}

impl<F: GeoScalar> Bounds<F> {
    /// Great-circle distance between the two corners; the journey-length
    /// measure used by the distance thresholds.
    pub fn diagonal(&self) -> F {
        haversine(self.bl, self.tr)
    }

    pub fn contains(&self, p: Point<F>) -> bool {
        p.lat >= self.bl.lat && p.lat <= self.tr.lat && p.lon >= self.bl.lon && p.lon <= self.tr.lon
    }

    /// Smallest box covering both inputs.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            bl: Point::new(self.bl.lat.min(other.bl.lat), self.bl.lon.min(other.bl.lon)),
            tr: Point::new(self.tr.lat.max(other.tr.lat), self.tr.lon.max(other.tr.lon)),
        }
    }
}

/// One GPS fix: timestamp in milliseconds since epoch, position in degrees
/// and the satellite count when the platform reported one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationSample {
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub sats: Option<u32>,
}

impl LocationSample {
    pub fn new(t: i64, lat: f64, lon: f64) -> Self {
        Self { t, lat, lon, sats: None }
    }

    pub fn with_sats(t: i64, lat: f64, lon: f64, sats: u32) -> Self {
        Self { t, lat, lon, sats: Some(sats) }
    }

    pub fn pos(&self) -> Point<f64> {
        Point::new(self.lat, self.lon)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(-90.0..=90.0).contains(&self.lat) || !self.lat.is_finite() {
            return Err(GeoError::OutOfRange { field: "lat", value: self.lat });
        }
        if !(-180.0..=180.0).contains(&self.lon) || !self.lon.is_finite() {
            return Err(GeoError::OutOfRange { field: "lon", value: self.lon });
        }
        Ok(())
    }
}

/// An ordered run of location samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocationSeq(Vec<LocationSample>);

impl LocationSeq {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Builds a sequence, validating coordinates and timestamp ordering.
    pub fn from_samples(samples: Vec<LocationSample>) -> Result<Self, GeoError> {
        for (i, s) in samples.iter().enumerate() {
            s.validate()?;
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(GeoError::NonMonotonic { index: i, t: s.t, prev: samples[i - 1].t });
            }
        }
        Ok(Self(samples))
    }

    pub fn push(&mut self, s: LocationSample) -> Result<(), GeoError> {
        s.validate()?;
        if let Some(last) = self.0.last() {
            if s.t <= last.t {
                return Err(GeoError::NonMonotonic { index: self.0.len(), t: s.t, prev: last.t });
            }
        }
        self.0.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<&LocationSample> {
        self.0.first()
    }

    pub fn last(&self) -> Option<&LocationSample> {
        self.0.last()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LocationSample> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[LocationSample] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<LocationSample> {
        self.0
    }
}

impl std::ops::Index<usize> for LocationSeq {
    type Output = LocationSample;
    fn index(&self, i: usize) -> &LocationSample {
        &self.0[i]
    }
}

/// Sum of haversine distances over consecutive pairs; 0 for a single sample.
pub fn path_distance(seq: &LocationSeq) -> Result<f64, GeoError> {
    if seq.is_empty() {
        return Err(GeoError::EmptySequence);
    }
    Ok(seq
        .as_slice()
        .windows(2)
        .map(|w| haversine(w[0].pos(), w[1].pos()))
        .sum())
}

/// Instantaneous speed between two fixes in m/s (first-order estimate).
pub fn speed(a: &LocationSample, b: &LocationSample) -> Result<f64, GeoError> {
    if a.t == b.t {
        return Err(GeoError::ZeroDuration { t: a.t });
    }
    let dt_s = (b.t - a.t).abs() as f64 / 1000.0;
    Ok(haversine(a.pos(), b.pos()) / dt_s)
}

/// Componentwise min/max box over a non-empty sequence.
pub fn bounds_of(seq: &LocationSeq) -> Result<Bounds<f64>, GeoError> {
    let first = seq.first().ok_or(GeoError::EmptySequence)?;
    let mut b = Bounds { bl: first.pos(), tr: first.pos() };
    for s in seq.iter().skip(1) {
        b.bl.lat = b.bl.lat.min(s.lat);
        b.bl.lon = b.bl.lon.min(s.lon);
        b.tr.lat = b.tr.lat.max(s.lat);
        b.tr.lon = b.tr.lon.max(s.lon);
    }
    Ok(b)
}

/// A detected journey: the raw fixes together with derived extent figures.
#[derive(Debug, Clone, PartialEq)]
pub struct Journey {
    pub points: LocationSeq,
    pub start_t: i64,
    pub end_t: i64,
    pub bounds: Bounds<f64>,
    pub path_length: f64,
}

impl Journey {
    /// Builds a journey from raw points, recomputing all derived fields.
    pub fn from_points(points: Vec<LocationSample>) -> Result<Self, GeoError> {
        Self::from_seq(LocationSeq::from_samples(points)?)
    }

    pub fn from_seq(points: LocationSeq) -> Result<Self, GeoError> {
        let first = points.first().ok_or(GeoError::EmptySequence)?;
        let last = points.last().unwrap();
        let (start_t, end_t) = (first.t, last.t);
        let bounds = bounds_of(&points)?;
        let path_length = path_distance(&points)?;
        Ok(Self { points, start_t, end_t, bounds, path_length })
    }

    /// Journey length as the bounds diagonal (robust against jitter).
    pub fn diagonal(&self) -> f64 {
        self.bounds.diagonal()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
