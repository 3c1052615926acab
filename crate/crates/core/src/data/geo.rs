/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance between two `(lat, lon)` points in degrees.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_degree_on_equator() {
        assert_eq!(haversine_m((0.0, 0.0), (0.0, 0.0)), 0.0);
        let expected = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M / 360.0;
        assert!((expected - 111_195.0).abs() < 5.0);
        assert!((haversine_m((0.0, 0.0), (0.0, 1.0)) - expected).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(
            a in (-90.0f64..90.0, -180.0f64..180.0),
            b in (-90.0f64..90.0, -180.0f64..180.0),
        ) {
            let d1 = haversine_m(a, b);
            let d2 = haversine_m(b, a);
            prop_assert!(d1 >= 0.0);
            prop_assert!((d1 - d2).abs() <= 1e-9 * d1.max(1.0));
            prop_assert_eq!(haversine_m(a, a), 0.0);
        }
    }
}
