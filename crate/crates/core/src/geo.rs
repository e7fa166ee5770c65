//! Geodesic distances between latitude/longitude pairs on a spherical Earth.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point on the sphere, latitude and longitude in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validated constructor. Latitude must lie in [-π/2, π/2] and longitude in [-π, π].
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&lat) {
            return Err(Error::invalid(format!(
                "latitude {} deg out of range",
                lat.to_degrees()
            )));
        }
        if !(-PI..=PI).contains(&lon) {
            return Err(Error::invalid(format!(
                "longitude {} deg out of range",
                lon.to_degrees()
            )));
        }
        Ok(Self { lat, lon })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::invalid(format!("latitude {lat_deg} deg out of range")));
        }
        if !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::invalid(format!(
                "longitude {lon_deg} deg out of range"
            )));
        }
        // Clamp away the rounding of the degree->radian product at the range ends.
        let lat = lat_deg.to_radians().clamp(-FRAC_PI_2, FRAC_PI_2);
        let lon = lon_deg.to_radians().clamp(-PI, PI);
        Self::new(lat, lon)
    }
}

/// Distance metric on geographic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoMetric {
    #[default]
    Haversine,
    EuclideanAngle,
}

impl GeoMetric {
    pub fn distance_km(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            GeoMetric::Haversine => haversine(a, b),
            GeoMetric::EuclideanAngle => euclidean_angle(a, b),
        }
    }
}

impl std::str::FromStr for GeoMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haversine" => Ok(GeoMetric::Haversine),
            "euclidean-angle" | "euclidean_angle" => Ok(GeoMetric::EuclideanAngle),
            other => Err(Error::invalid(format!("unknown geo metric '{other}'"))),
        }
    }
}

/// Longitude difference wrapped into [-π, π].
fn wrapped_dlon(a: GeoPoint, b: GeoPoint) -> f64 {
    let d = b.lon - a.lon;
    if d > PI {
        d - 2.0 * PI
    } else if d < -PI {
        d + 2.0 * PI
    } else {
        d
    }
}

/// Great-circle distance in kilometres.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_with_radius(a, b, EARTH_RADIUS_KM)
}

pub fn haversine_with_radius(a: GeoPoint, b: GeoPoint, radius: f64) -> f64 {
    let a1 = ((b.lat - a.lat) / 2.0).sin().powi(2);
    let a2 = (wrapped_dlon(a, b) / 2.0).sin().powi(2);
    let h = (a1 + a.lat.cos() * b.lat.cos() * a2).clamp(0.0, 1.0);
    2.0 * radius * h.sqrt().asin()
}

/// Central angle approximated as the Euclidean norm of the coordinate
/// differences, scaled by the Earth radius. Overestimates east-west distances
/// away from the equator by roughly `1 / cos(lat)`.
pub fn euclidean_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    euclidean_angle_with_radius(a, b, EARTH_RADIUS_KM)
}

pub fn euclidean_angle_with_radius(a: GeoPoint, b: GeoPoint, radius: f64) -> f64 {
    let dlat = b.lat - a.lat;
    let dlon = wrapped_dlon(a, b);
    radius * (dlat * dlat + dlon * dlon).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn deg(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::from_degrees(lat, lon).unwrap()
    }

    #[test]
    fn identical_points_are_zero() {
        let p = deg(40.1, -88.2);
        assert_eq!(haversine(p, p), 0.0);
        assert_eq!(euclidean_angle(p, p), 0.0);
    }

    #[test]
    fn antipodal_is_half_circumference() {
        // pi * 6371 = 20015.086796...
        let d = haversine(deg(0.0, 0.0), deg(0.0, 180.0));
        assert_relative_eq!(d, 20015.086796020572, max_relative = 1e-12);
        let d = haversine(deg(90.0, 0.0), deg(-90.0, 0.0));
        assert_relative_eq!(d, 20015.086796020572, max_relative = 1e-12);
    }

    #[test]
    fn one_degree_along_equator() {
        // 6371 * pi / 180 = 111.19492664455873
        let a = deg(0.0, 10.0);
        let b = deg(0.0, 11.0);
        assert_relative_eq!(haversine(a, b), 111.19492664455873, max_relative = 1e-9);
        assert_relative_eq!(euclidean_angle(a, b), 111.19492664455873, max_relative = 1e-9);
    }

    #[test]
    fn sixty_degrees_north_overestimates_by_two() {
        let a = deg(60.0, 10.0);
        let b = deg(60.0, 11.0);
        let h = haversine(a, b);
        let e = euclidean_angle(a, b);
        assert_relative_eq!(h, 55.5974, max_relative = 1e-4);
        assert_relative_eq!(e / h, 2.0, max_relative = 1e-3);
    }

    #[test]
    fn antimeridian_wraps() {
        let a = deg(0.0, 179.5);
        let b = deg(0.0, -179.5);
        assert_relative_eq!(haversine(a, b), 111.19492664455873, max_relative = 1e-9);
        assert_relative_eq!(euclidean_angle(a, b), 111.19492664455873, max_relative = 1e-9);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(GeoPoint::from_degrees(91.0, 0.0).is_err());
        assert!(GeoPoint::from_degrees(0.0, -180.5).is_err());
        assert!(GeoPoint::new(2.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn haversine_below_euclidean_angle_on_many_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let a = GeoPoint::new(rng.random_range(-FRAC_PI_2..=FRAC_PI_2), rng.random_range(-PI..=PI)).unwrap();
            let b = GeoPoint::new(rng.random_range(-FRAC_PI_2..=FRAC_PI_2), rng.random_range(-PI..=PI)).unwrap();
            assert!(haversine(a, b) <= euclidean_angle(a, b) + 1e-9, "{a:?} {b:?}");
        }
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-FRAC_PI_2..=FRAC_PI_2, -PI..=PI).prop_map(|(lat, lon)| GeoPoint { lat, lon })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn symmetric_and_bounded(a in point(), b in point()) {
            let h = haversine(a, b);
            prop_assert!((h - haversine(b, a)).abs() <= 1e-9);
            prop_assert!(h >= 0.0 && h <= PI * EARTH_RADIUS_KM + 1e-9);
            prop_assert!((euclidean_angle(a, b) - euclidean_angle(b, a)).abs() <= 1e-9);
        }

        #[test]
        fn haversine_never_exceeds_euclidean_angle(a in point(), b in point()) {
            prop_assert!(haversine(a, b) <= euclidean_angle(a, b) + 1e-9);
        }

        #[test]
        fn equator_metrics_agree(lon in -179.0f64..179.0, dlon in 0.0f64..=1.0) {
            let a = deg(0.0, lon);
            let b = deg(0.0, lon + dlon);
            let h = haversine(a, b);
            let e = euclidean_angle(a, b);
            prop_assert!((h - e).abs() <= 1e-6 * e.max(1e-12));
        }
    }
}
