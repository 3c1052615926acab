//! Deterministic synthetic city: a jittered lattice of geohash cells with a
//! seasonal + diurnal temperature field, optional cold fronts, a long-history
//! station network and a short-history IoT network thinned by vehicle sampling.
//!
//! Truth values are kept next to the sampled data so imputation error can be
//! measured directly.

use std::f64::consts::PI;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Timelike, Utc};
use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{files, DataError, Dataset, GridCell, GridIndex, TimeSeries};
use crate::kv::{KvError, KvMap};
use crate::rng::SeedTree;

pub const HOURS_PER_YEAR: f64 = 8760.0;
const KM_PER_DEG_LAT: f64 = 110.574;
const KM_PER_DEG_LON_EQUATOR: f64 = 111.320;
/// Lattice jitter as a fraction of the cell spacing.
const JITTER: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A cold (negative) or warm (positive) front: a linear ramp to `magnitude`,
/// a hold, then a linear recovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEvent {
    /// Day index from the scenario start.
    pub day: u32,
    pub magnitude: f64,
    pub ramp_hours: u32,
}

impl fmt::Display for FrontEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.day, self.magnitude, self.ramp_hours)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherScenario {
    pub seed: u64,
    /// First hour of the station record, midnight UTC.
    pub start: NaiveDate,
    pub days: u32,
    /// IoT data covers the final `iot_days` of the record.
    pub iot_days: u32,
    pub mean_temp: f64,
    pub seasonal_amp: f64,
    pub diurnal_amp: f64,
    /// Local hour of the diurnal maximum.
    pub diurnal_peak_hour: f64,
    pub noise_std: f64,
    pub fronts: Vec<FrontEvent>,
    /// Local hour at which a front starts ramping.
    pub front_onset_hour: u32,
    pub front_hold_hours: u32,
    pub front_recovery_hours: u32,
    /// West-to-east gradient, °C per km.
    pub spatial_gradient: f64,
    pub extent_km: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub utc_offset: i32,
    pub n_iot_cells: usize,
    pub n_station_sites: usize,
    /// Target missing ratio per IoT cell; one value is broadcast to all cells.
    pub missingness: Vec<f64>,
    /// Relative amplitude of the diurnal drop-probability modulation.
    pub missing_amplitude: f64,
    /// Local hour of maximum missingness.
    pub missing_peak_hour: f64,
    pub station_missingness: f64,
}

impl Default for WeatherScenario {
    fn default() -> Self {
        Self {
            seed: 0,
            start: NaiveDate::from_ymd_opt(2015, 5, 1).expect("valid date"),
            days: 1827,
            iot_days: 366,
            mean_temp: 13.0,
            seasonal_amp: 10.0,
            diurnal_amp: 6.0,
            diurnal_peak_hour: 15.0,
            noise_std: 0.5,
            fronts: Vec::new(),
            front_onset_hour: 0,
            front_hold_hours: 24,
            front_recovery_hours: 48,
            spatial_gradient: 0.1,
            extent_km: 10.0,
            center_lat: 40.7128,
            center_lon: -74.0060,
            utc_offset: -5,
            n_iot_cells: 60,
            n_station_sites: 6,
            missingness: vec![0.02],
            missing_amplitude: 0.5,
            missing_peak_hour: 4.0,
            station_missingness: 0.0005,
        }
    }
}

pub const SCENARIO_KEYS: &[&str] = &[
    "seed",
    "start",
    "days",
    "iot_days",
    "mean_temp",
    "seasonal_amp",
    "diurnal_amp",
    "diurnal_peak_hour",
    "noise_std",
    "fronts",
    "front_onset_hour",
    "front_hold_hours",
    "front_recovery_hours",
    "spatial_gradient",
    "extent_km",
    "center_lat",
    "center_lon",
    "utc_offset",
    "n_iot_cells",
    "n_station_sites",
    "missingness",
    "missing_amplitude",
    "missing_peak_hour",
    "station_missingness",
];

fn value_error(key: &str, value: &str, reason: impl ToString) -> KvError {
    KvError::Value {
        key: key.into(),
        value: value.into(),
        reason: reason.to_string(),
    }
}

/// Parses `r`, `r*n` or `a..b*n` items (comma separated); the range form
/// spaces `n` ratios evenly from `a` to `b` inclusive.
pub fn parse_missingness(value: &str) -> Result<Vec<f64>, KvError> {
    let bad = |item: &str, why: &str| value_error("missingness", item, why);
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (body, count) = match item.split_once('*') {
            Some((b, n)) => (b.trim(), n.trim().parse::<usize>().map_err(|_| bad(item, "bad repeat count"))?),
            None => (item, 1),
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(item, "bad ratio"));
        match body.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if count < 2 {
                    return Err(bad(item, "a range needs a count of at least 2"));
                }
                out.extend((0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64));
            }
            None => {
                let r = num(body)?;
                out.extend(std::iter::repeat_n(r, count));
            }
        }
    }
    Ok(out)
}

fn parse_fronts(value: &str, start: NaiveDate) -> Result<Vec<FrontEvent>, KvError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = |why: &str| value_error("fronts", item, why);
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let [day, magnitude, ramp] = parts[..] else {
                return Err(bad("expected day:magnitude:ramp_hours"));
            };
            let day = match day.parse::<NaiveDate>() {
                Ok(date) => u32::try_from((date - start).num_days()).map_err(|_| bad("front before scenario start"))?,
                Err(_) => day.parse().map_err(|_| bad("day must be an index or YYYY-MM-DD"))?,
            };
            Ok(FrontEvent {
                day,
                magnitude: magnitude.parse().map_err(|_| bad("bad magnitude"))?,
                ramp_hours: ramp.parse().map_err(|_| bad("bad ramp hours"))?,
            })
        })
        .collect()
}

impl WeatherScenario {
    pub fn from_kv(kv: &KvMap) -> Result<Self, SynthError> {
        kv.check_keys(SCENARIO_KEYS)?;
        let d = Self::default();
        let start = kv.get_or("start", d.start)?;
        let s = Self {
            seed: kv.get_or("seed", d.seed)?,
            start,
            days: kv.get_or("days", d.days)?,
            iot_days: kv.get_or("iot_days", d.iot_days)?,
            mean_temp: kv.get_or("mean_temp", d.mean_temp)?,
            seasonal_amp: kv.get_or("seasonal_amp", d.seasonal_amp)?,
            diurnal_amp: kv.get_or("diurnal_amp", d.diurnal_amp)?,
            diurnal_peak_hour: kv.get_or("diurnal_peak_hour", d.diurnal_peak_hour)?,
            noise_std: kv.get_or("noise_std", d.noise_std)?,
            fronts: kv.get_str("fronts").map(|v| parse_fronts(v, start)).transpose()?.unwrap_or_default(),
            front_onset_hour: kv.get_or("front_onset_hour", d.front_onset_hour)?,
            front_hold_hours: kv.get_or("front_hold_hours", d.front_hold_hours)?,
            front_recovery_hours: kv.get_or("front_recovery_hours", d.front_recovery_hours)?,
            spatial_gradient: kv.get_or("spatial_gradient", d.spatial_gradient)?,
            extent_km: kv.get_or("extent_km", d.extent_km)?,
            center_lat: kv.get_or("center_lat", d.center_lat)?,
            center_lon: kv.get_or("center_lon", d.center_lon)?,
            utc_offset: kv.get_or("utc_offset", d.utc_offset)?,
            n_iot_cells: kv.get_or("n_iot_cells", d.n_iot_cells)?,
            n_station_sites: kv.get_or("n_station_sites", d.n_station_sites)?,
            missingness: kv.get_str("missingness").map(parse_missingness).transpose()?.unwrap_or(d.missingness),
            missing_amplitude: kv.get_or("missing_amplitude", d.missing_amplitude)?,
            missing_peak_hour: kv.get_or("missing_peak_hour", d.missing_peak_hour)?,
            station_missingness: kv.get_or("station_missingness", d.station_missingness)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, SynthError> {
        Self::from_kv(&KvMap::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("seed", self.seed);
        kv.insert("start", self.start);
        kv.insert("days", self.days);
        kv.insert("iot_days", self.iot_days);
        kv.insert("mean_temp", self.mean_temp);
        kv.insert("seasonal_amp", self.seasonal_amp);
        kv.insert("diurnal_amp", self.diurnal_amp);
        kv.insert("diurnal_peak_hour", self.diurnal_peak_hour);
        kv.insert("noise_std", self.noise_std);
        kv.insert("fronts", self.fronts.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","));
        kv.insert("front_onset_hour", self.front_onset_hour);
        kv.insert("front_hold_hours", self.front_hold_hours);
        kv.insert("front_recovery_hours", self.front_recovery_hours);
        kv.insert("spatial_gradient", self.spatial_gradient);
        kv.insert("extent_km", self.extent_km);
        kv.insert("center_lat", self.center_lat);
        kv.insert("center_lon", self.center_lon);
        kv.insert("utc_offset", self.utc_offset);
        kv.insert("n_iot_cells", self.n_iot_cells);
        kv.insert("n_station_sites", self.n_station_sites);
        kv.insert("missingness", self.missingness.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        kv.insert("missing_amplitude", self.missing_amplitude);
        kv.insert("missing_peak_hour", self.missing_peak_hour);
        kv.insert("station_missingness", self.station_missingness);
        kv
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Scenario(m));
        for (name, v) in [
            ("seasonal_amp", self.seasonal_amp),
            ("diurnal_amp", self.diurnal_amp),
            ("noise_std", self.noise_std),
            ("extent_km", self.extent_km),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.days == 0 || self.iot_days > self.days {
            return bad(format!("need 0 < iot_days <= days, got iot_days {} and days {}", self.iot_days, self.days));
        }
        if self.n_iot_cells == 0 {
            return bad("n_iot_cells must be >= 1".into());
        }
        if self.missingness.len() != 1 && self.missingness.len() != self.n_iot_cells {
            return bad(format!(
                "missingness lists {} ratios for {} cells",
                self.missingness.len(),
                self.n_iot_cells
            ));
        }
        if let Some(r) = self
            .missingness
            .iter()
            .chain([&self.station_missingness])
            .find(|r| !(0.0..1.0).contains(*r))
        {
            return bad(format!("missing ratios must lie in [0, 1), got {r}"));
        }
        if !(0.0..=1.0).contains(&self.missing_amplitude) {
            return bad("missing_amplitude must lie in [0, 1]".into());
        }
        if let Some(f) = self.fronts.iter().find(|f| f.day >= self.days) {
            return bad(format!("front on day {} is past the end of the record", f.day));
        }
        Ok(())
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc()
    }

    pub fn total_hours(&self) -> usize {
        self.days as usize * 24
    }

    pub fn iot_start_hour(&self) -> usize {
        (self.days - self.iot_days) as usize * 24
    }

    pub fn front_date(&self, front: &FrontEvent) -> NaiveDate {
        self.start + Duration::days(i64::from(front.day))
    }

    /// Per-cell ratios, with a single value broadcast.
    pub fn cell_missingness(&self) -> Vec<f64> {
        match self.missingness.as_slice() {
            [r] => vec![*r; self.n_iot_cells],
            rs => rs.to_vec(),
        }
    }

    fn local_hour(&self, hour: usize) -> f64 {
        (hour as f64 + f64::from(self.utc_offset)).rem_euclid(24.0)
    }

    /// Noise-free regional signal at `hour` since the start, without the spatial term.
    pub fn climate(&self, hour: usize) -> f64 {
        // Seasonal phase referenced to the Unix epoch so the calendar lines up
        // across scenarios: warmest near late July.
        let abs_hour = (self.start_time().timestamp() / 3600) as f64 + hour as f64;
        let spring = 114.0 * 24.0; // ~Apr 25
        let seasonal = self.seasonal_amp * (2.0 * PI * (abs_hour - spring) / HOURS_PER_YEAR).sin();
        let diurnal = self.diurnal_amp * (2.0 * PI * (self.local_hour(hour) - self.diurnal_peak_hour + 6.0) / 24.0).sin();
        self.mean_temp + seasonal + diurnal + self.front_offset(hour)
    }

    pub fn front_offset(&self, hour: usize) -> f64 {
        let t = hour as f64;
        self.fronts
            .iter()
            .map(|f| {
                let onset = f64::from(f.day) * 24.0 + f64::from(self.front_onset_hour) - f64::from(self.utc_offset);
                let ramp = f64::from(f.ramp_hours.max(1));
                let hold_end = onset + ramp + f64::from(self.front_hold_hours);
                let rec = f64::from(self.front_recovery_hours);
                let frac = if t < onset {
                    0.0
                } else if t < onset + ramp {
                    (t - onset) / ramp
                } else if t < hold_end {
                    1.0
                } else if rec > 0.0 && t < hold_end + rec {
                    1.0 - (t - hold_end) / rec
                } else {
                    0.0
                };
                f.magnitude * frac
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Iot,
    Station,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub kind: SiteKind,
    /// Offsets from the city centre, km east and north.
    pub x_km: f64,
    pub y_km: f64,
    pub cell: GridCell,
}

/// Ground truth for every site.
#[derive(Debug, Clone)]
pub struct Field {
    pub sites: Vec<Site>,
    pub iot: Dataset,
    pub stations: Dataset,
}

impl WeatherScenario {
    fn site_at(&self, id: Option<String>, kind: SiteKind, x_km: f64, y_km: f64) -> Result<Site, SynthError> {
        let lat = self.center_lat + y_km / KM_PER_DEG_LAT;
        let lon = self.center_lon + x_km / (KM_PER_DEG_LON_EQUATOR * self.center_lat.to_radians().cos());
        let cell = GridCell::containing(lat, lon)?;
        Ok(Site {
            id: id.unwrap_or_else(|| cell.geohash().to_string()),
            kind,
            x_km,
            y_km,
            cell,
        })
    }

    /// IoT cells on a jittered square lattice, station sites uniform over the city.
    pub fn layout(&self) -> Result<Vec<Site>, SynthError> {
        let tree = SeedTree::new(self.seed);
        let side = (self.n_iot_cells as f64).sqrt().ceil() as usize;
        let spacing = self.extent_km / side as f64;
        let half = self.extent_km / 2.0;
        let mut rng = tree.rng("layout-iot", 0);
        let mut sites = Vec::with_capacity(self.n_iot_cells + self.n_station_sites);
        for i in 0..self.n_iot_cells {
            let (row, col) = (i / side, i % side);
            let x = (col as f64 + 0.5) * spacing - half + JITTER * spacing * rng.random_range(-1.0..1.0);
            let y = (row as f64 + 0.5) * spacing - half + JITTER * spacing * rng.random_range(-1.0..1.0);
            sites.push(self.site_at(None, SiteKind::Iot, x, y)?);
        }
        let mut rng = tree.rng("layout-stations", 0);
        for i in 0..self.n_station_sites {
            let x = rng.random_range(-half..=half);
            let y = rng.random_range(-half..=half);
            sites.push(self.site_at(Some(format!("WU{:02}", i + 1)), SiteKind::Station, x, y)?);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &sites {
            if !seen.insert(s.cell.geohash().to_string()) {
                return Err(SynthError::Scenario(format!(
                    "two sites share geohash cell {}; increase extent_km",
                    s.cell.geohash()
                )));
            }
        }
        Ok(sites)
    }
}

fn site_series(scenario: &WeatherScenario, site: &Site, index: u64, from: usize, to: usize) -> TimeSeries {
    let mut rng = SeedTree::new(scenario.seed).rng("noise", index);
    let noise = Normal::new(0.0, scenario.noise_std).expect("validated std");
    let offset = scenario.spatial_gradient * site.x_km;
    let values: Vec<f64> = (from..to)
        .map(|h| {
            let eps = if scenario.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            scenario.climate(h) + offset + eps
        })
        .collect();
    TimeSeries::from_values(site.id.clone(), scenario.start_time() + Duration::hours(from as i64), &values)
}

/// Hourly ground truth: IoT cells over the final `iot_days`, stations over the whole record.
pub fn generate_field(scenario: &WeatherScenario) -> Result<Field, SynthError> {
    scenario.validate()?;
    let sites = scenario.layout()?;
    let total = scenario.total_hours();
    let iot_from = scenario.iot_start_hour();
    let series: Vec<(SiteKind, TimeSeries)> = sites
        .par_iter()
        .enumerate()
        .map(|(i, site)| {
            let from = if site.kind == SiteKind::Iot { iot_from } else { 0 };
            (site.kind, site_series(scenario, site, i as u64, from, total))
        })
        .collect();
    let mut iot = Dataset::new();
    let mut stations = Dataset::new();
    for (kind, s) in series {
        match kind {
            SiteKind::Iot => iot.insert(s),
            SiteKind::Station => stations.insert(s),
        }
    }
    Ok(Field { sites, iot, stations })
}

/// Marks exactly `round(ratio * n)` hours missing, drawn without replacement
/// with weights `1 + amplitude * cos(2π (local_hour - peak) / 24)`.
pub fn missing_mask<R: Rng>(
    series: &TimeSeries,
    ratio: f64,
    amplitude: f64,
    peak_hour: f64,
    utc_offset: i32,
    rng: &mut R,
) -> Vec<bool> {
    let n = series.len();
    let k = (ratio * n as f64).round() as usize;
    let mut mask = vec![false; n];
    if k == 0 {
        return mask;
    }
    let first_hour = f64::from(series.start.hour());
    // Efraimidis–Spirakis: keep the k largest ln(u) / w.
    let mut keys: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let local = (first_hour + i as f64 + f64::from(utc_offset)).rem_euclid(24.0);
            let w = 1.0 + amplitude * (2.0 * PI * (local - peak_hour) / 24.0).cos();
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w.max(1e-12), i)
        })
        .collect();
    keys.select_nth_unstable_by(k - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &keys[..k] {
        mask[i] = true;
    }
    mask
}

fn thin(series: &TimeSeries, mask: &[bool]) -> TimeSeries {
    let values = series
        .values
        .iter()
        .zip(mask)
        .map(|(v, &drop)| if drop { None } else { *v })
        .collect();
    TimeSeries::new(series.station_id.clone(), series.start, values)
}

/// IoT observations: each cell loses its target share of hours, more at night.
pub fn apply_vehicle_sampling(field: &Field, scenario: &WeatherScenario) -> Dataset {
    let tree = SeedTree::new(scenario.seed);
    let mut ratios = scenario.cell_missingness();
    // Spread the ratios over the city rather than along lattice rows.
    ratios.shuffle(&mut tree.rng("missingness-assignment", 0));
    let ids: Vec<&str> = field.sites.iter().filter(|s| s.kind == SiteKind::Iot).map(|s| s.id.as_str()).collect();
    ids.par_iter()
        .zip(ratios)
        .enumerate()
        .map(|(i, (id, ratio))| {
            let series = field.iot.get(id).expect("field covers every IoT site");
            let mut rng = tree.rng("vehicle-sampling", i as u64);
            let mask = missing_mask(
                series,
                ratio,
                scenario.missing_amplitude,
                scenario.missing_peak_hour,
                scenario.utc_offset,
                &mut rng,
            );
            thin(series, &mask)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Station observations: a small uniform dropout.
pub fn apply_station_dropout(field: &Field, scenario: &WeatherScenario) -> Dataset {
    let tree = SeedTree::new(scenario.seed);
    field
        .stations
        .iter()
        .enumerate()
        .map(|(i, series)| {
            let mask = missing_mask(series, scenario.station_missingness, 0.0, 0.0, 0, &mut tree.rng("station-dropout", i as u64));
            thin(series, &mask)
        })
        .collect()
}

pub fn grid_index(field: &Field) -> GridIndex {
    let mut grid = GridIndex::new();
    for s in &field.sites {
        grid.insert(s.id.clone(), s.cell.clone());
    }
    grid
}

/// Everything the generator produces for one scenario.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub field: Field,
    pub iot: Dataset,
    pub stations: Dataset,
    pub grid: GridIndex,
}

pub fn generate(scenario: &WeatherScenario) -> Result<SynthOutput, SynthError> {
    let field = generate_field(scenario)?;
    let iot = apply_vehicle_sampling(&field, scenario);
    let stations = apply_station_dropout(&field, scenario);
    let grid = grid_index(&field);
    Ok(SynthOutput {
        field,
        iot,
        stations,
        grid,
    })
}

impl SynthOutput {
    pub fn write(&self, scenario: &WeatherScenario, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, ds: &Dataset| -> Result<(), SynthError> {
            let path = dir.join(name);
            ds.write_csv(BufWriter::new(File::create(&path)?))?;
            written.push(path);
            Ok(())
        };
        put(files::IOT_CSV, &self.iot)?;
        put(files::IOT_TRUTH_CSV, &self.field.iot)?;
        put(files::STATIONS_CSV, &self.stations)?;
        put(files::STATIONS_TRUTH_CSV, &self.field.stations)?;
        let grid_path = dir.join(files::GRID_CSV);
        self.grid.write_csv(BufWriter::new(File::create(&grid_path)?))?;
        written.push(grid_path);
        let cfg_path = dir.join(files::SCENARIO_FILE);
        fs::write(&cfg_path, scenario.to_kv().to_string())?;
        written.push(cfg_path);
        Ok(written)
    }
}

/// Generates a scenario and writes its CSVs and resolved scenario file to `dir`.
pub fn emit_datasets(scenario: &WeatherScenario, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    generate(scenario)?.write(scenario, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::missing_ratio;

    fn small() -> WeatherScenario {
        WeatherScenario {
            days: 30,
            iot_days: 10,
            n_iot_cells: 9,
            n_station_sites: 2,
            ..Default::default()
        }
    }

    #[test]
    fn missingness_syntax() {
        assert_eq!(parse_missingness("0.1").unwrap(), vec![0.1]);
        assert_eq!(parse_missingness("0.1*2, 0.3").unwrap(), vec![0.1, 0.1, 0.3]);
        assert_eq!(parse_missingness("0..0.5*3").unwrap(), vec![0.0, 0.25, 0.5]);
        assert!(parse_missingness("0..0.5").is_err());
        assert!(parse_missingness("x").is_err());
    }

    #[test]
    fn fronts_accept_dates_and_indices() {
        let s = WeatherScenario::parse("days = 100\niot_days = 10\nstart = 2020-01-01\nfronts = 2020-01-11:-10:6, 20:3:2").unwrap();
        assert_eq!(s.fronts[0], FrontEvent { day: 10, magnitude: -10.0, ramp_hours: 6 });
        assert_eq!(s.fronts[1].day, 20);
        assert!(WeatherScenario::parse("fronts = 1:2").is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut s = small();
        s.fronts = vec![FrontEvent { day: 3, magnitude: -10.0, ramp_hours: 6 }];
        s.missingness = vec![0.1; 9];
        assert_eq!(WeatherScenario::from_kv(&s.to_kv()).unwrap(), s);
    }

    #[test]
    fn invalid_scenarios() {
        assert!(WeatherScenario::parse("iot_days = 10\ndays = 5").is_err());
        assert!(WeatherScenario::parse("diurnal_amp = -1").is_err());
        assert!(WeatherScenario::parse("missingness = 1.0").is_err());
        assert!(WeatherScenario::parse("n_iot_cells = 4\nmissingness = 0.1*3").is_err());
        assert!(WeatherScenario::parse("colour = red").is_err());
    }

    #[test]
    fn spans_and_sites() {
        let s = small();
        let out = generate(&s).unwrap();
        assert_eq!(out.iot.len(), 9);
        assert_eq!(out.stations.len(), 2);
        assert_eq!(out.grid.len(), 11);
        for series in out.iot.iter() {
            assert_eq!(series.len(), 240);
            assert_eq!(series.end(), s.start_time() + Duration::days(30));
        }
        for series in out.stations.iter() {
            assert_eq!(series.start, s.start_time());
            assert_eq!(series.len(), 720);
        }
    }

    #[test]
    fn exact_missing_counts() {
        let s = WeatherScenario {
            missingness: vec![0.25],
            ..small()
        };
        let out = generate(&s).unwrap();
        for series in out.iot.iter() {
            assert_eq!(missing_ratio(series), 60.0 / 240.0);
        }
    }

    #[test]
    fn front_profile() {
        let s = WeatherScenario {
            fronts: vec![FrontEvent { day: 2, magnitude: -10.0, ramp_hours: 6 }],
            front_onset_hour: 0,
            utc_offset: 0,
            ..small()
        };
        assert_eq!(s.front_offset(47), 0.0);
        assert_eq!(s.front_offset(48), 0.0);
        assert_eq!(s.front_offset(51), -5.0);
        assert_eq!(s.front_offset(54), -10.0);
        assert_eq!(s.front_offset(54 + 23), -10.0);
        assert_eq!(s.front_offset(54 + 24 + 24), -5.0);
        assert_eq!(s.front_offset(54 + 24 + 48), 0.0);
    }
}
