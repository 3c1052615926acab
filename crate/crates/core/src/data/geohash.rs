use std::fmt;
use std::str::FromStr;

use super::DataError;

const ALPHABET: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";
pub const MAX_PRECISION: usize = 12;
/// Precision of the IoT aggregation cells (~153 m x 153 m).
pub const CELL_PRECISION: usize = 7;

fn char_value(c: u8) -> Option<u8> {
    ALPHABET.iter().position(|&a| a == c).map(|p| p as u8)
}

/// Standard base-32 geohash of `(lat, lon)` with `precision` characters.
pub fn encode(lat: f64, lon: f64, precision: usize) -> Result<String, DataError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(DataError::Domain(format!(
            "coordinates ({lat}, {lon}) out of range"
        )));
    }
    if !(1..=MAX_PRECISION).contains(&precision) {
        return Err(DataError::Domain(format!(
            "geohash precision {precision} not in 1..={MAX_PRECISION}"
        )));
    }
    let mut lat_range = (-90.0_f64, 90.0_f64);
    let mut lon_range = (-180.0_f64, 180.0_f64);
    let mut out = String::with_capacity(precision);
    let mut even = true;
    let mut bits = 0u8;
    let mut value = 0u8;
    while out.len() < precision {
        let (range, x) = if even {
            (&mut lon_range, lon)
        } else {
            (&mut lat_range, lat)
        };
        let mid = (range.0 + range.1) / 2.0;
        value <<= 1;
        if x >= mid {
            value |= 1;
            range.0 = mid;
        } else {
            range.1 = mid;
        }
        even = !even;
        bits += 1;
        if bits == 5 {
            out.push(ALPHABET[value as usize] as char);
            bits = 0;
            value = 0;
        }
    }
    Ok(out)
}

/// Bounding box of a geohash cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

pub fn decode_box(hash: &str) -> Result<GeoBox, DataError> {
    if hash.is_empty() || hash.len() > MAX_PRECISION {
        return Err(DataError::Geohash(format!(
            "geohash {hash:?} must have 1..={MAX_PRECISION} characters"
        )));
    }
    let mut lat = (-90.0_f64, 90.0_f64);
    let mut lon = (-180.0_f64, 180.0_f64);
    let mut even = true;
    for c in hash.bytes() {
        let v = char_value(c).ok_or_else(|| {
            DataError::Geohash(format!("invalid character {:?} in {hash:?}", c as char))
        })?;
        for shift in (0..5).rev() {
            let range = if even { &mut lon } else { &mut lat };
            let mid = (range.0 + range.1) / 2.0;
            if (v >> shift) & 1 == 1 {
                range.0 = mid;
            } else {
                range.1 = mid;
            }
            even = !even;
        }
    }
    Ok(GeoBox {
        lat_min: lat.0,
        lat_max: lat.1,
        lon_min: lon.0,
        lon_max: lon.1,
    })
}

/// Returns `(center_lat, center_lon, lat_error, lon_error)`; errors are half-extents.
pub fn decode(hash: &str) -> Result<(f64, f64, f64, f64), DataError> {
    let b = decode_box(hash)?;
    Ok((
        (b.lat_min + b.lat_max) / 2.0,
        (b.lon_min + b.lon_max) / 2.0,
        (b.lat_max - b.lat_min) / 2.0,
        (b.lon_max - b.lon_min) / 2.0,
    ))
}

/// A 7-character geohash cell, the spatial unit of the IoT data.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    geohash: String,
    center_lat: f64,
    center_lon: f64,
}

impl GridCell {
    pub fn new(geohash: &str) -> Result<Self, DataError> {
        if geohash.len() != CELL_PRECISION {
            return Err(DataError::Geohash(format!(
                "grid cell geohash {geohash:?} must have {CELL_PRECISION} characters"
            )));
        }
        let (center_lat, center_lon, _, _) = decode(geohash)?;
        Ok(Self {
            geohash: geohash.to_string(),
            center_lat,
            center_lon,
        })
    }

    pub fn containing(lat: f64, lon: f64) -> Result<Self, DataError> {
        Self::new(&encode(lat, lon, CELL_PRECISION)?)
    }

    pub fn geohash(&self) -> &str {
        &self.geohash
    }

    pub fn center(&self) -> (f64, f64) {
        (self.center_lat, self.center_lon)
    }

    pub fn center_lat(&self) -> f64 {
        self.center_lat
    }

    pub fn center_lon(&self) -> f64 {
        self.center_lon
    }
}

impl FromStr for GridCell {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.geohash)
    }
}
