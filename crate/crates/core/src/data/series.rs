use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, NaiveDateTime, Timelike, Utc};

use super::{DataError, GridCell};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
/// Default plausibility range for observed temperatures, in degrees Celsius.
pub const PLAUSIBLE_RANGE: (f64, f64) = (-60.0, 60.0);

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT)
        .map(|t| t.and_utc())
        .map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

/// Hourly temperature series; `None` marks a missing hour.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub station_id: String,
    pub start: DateTime<Utc>,
    pub values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(station_id: impl Into<String>, start: DateTime<Utc>, values: Vec<Option<f64>>) -> Self {
        Self {
            station_id: station_id.into(),
            start,
            values,
        }
    }

    /// Gap-free series from plain values.
    pub fn from_values(station_id: impl Into<String>, start: DateTime<Utc>, values: &[f64]) -> Self {
        Self::new(station_id, start, values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First hour after the series.
    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::hours(self.values.len() as i64)
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::hours(index as i64)
    }

    /// Index of `ts` if it falls on an hour inside the series.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let offset = ts - self.start;
        if offset.num_seconds() % 3600 != 0 {
            return None;
        }
        let idx = offset.num_hours();
        (0..self.values.len() as i64).contains(&idx).then_some(idx as usize)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_gap_free(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// The values, if none are missing.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    /// Dense values for `len` hours from `start`, if fully covered and observed.
    pub fn dense_range(&self, start: DateTime<Utc>, len: usize) -> Option<Vec<f64>> {
        let first = self.index_of(start)?;
        if first + len > self.values.len() {
            return None;
        }
        self.values[first..first + len].iter().copied().collect()
    }
}

/// Series keyed by station id, in id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    series: BTreeMap<String, TimeSeries>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, series: TimeSeries) {
        self.series.insert(series.station_id.clone(), series);
    }

    pub fn get(&self, station_id: &str) -> Option<&TimeSeries> {
        self.series.get(station_id)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimeSeries> {
        self.series.values()
    }

    pub fn station_ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// Earliest start and latest end over all series.
    pub fn span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let start = self.iter().map(|s| s.start).min()?;
        let end = self.iter().map(TimeSeries::end).max()?;
        Some((start, end))
    }

    /// Parses `station_id,timestamp,temp_c` rows.
    ///
    /// Rows must be in increasing time order per station. Hours absent from the
    /// file, empty temperature fields, and values outside `[-60, 60]` become missing.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        Self::from_csv_with_range(reader, PLAUSIBLE_RANGE)
    }

    pub fn from_csv_with_range<R: Read>(reader: R, range: (f64, f64)) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        check_header(&mut rdr, &["station_id", "timestamp", "temp_c"])?;
        // Observations per station, in file order.
        let mut rows: BTreeMap<String, Vec<(DateTime<Utc>, Option<f64>)>> = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(DataError::Csv {
                    line,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let station = record[0].trim();
            if station.is_empty() {
                return Err(DataError::Csv {
                    line,
                    message: "empty station_id".into(),
                });
            }
            let ts = parse_timestamp(&record[1]).map_err(|message| DataError::Csv { line, message })?;
            if ts.minute() != 0 || ts.second() != 0 {
                return Err(DataError::Csv {
                    line,
                    message: format!("timestamp {} is not on the hour", &record[1]),
                });
            }
            let raw = record[2].trim();
            let value = if raw.is_empty() {
                None
            } else {
                let v: f64 = raw.parse().map_err(|_| DataError::Csv {
                    line,
                    message: format!("invalid temperature {raw:?}"),
                })?;
                (v.is_finite() && v >= range.0 && v <= range.1).then_some(v)
            };
            let entry = rows.entry(station.to_string()).or_default();
            if let Some(&(prev, _)) = entry.last() {
                if ts <= prev {
                    return Err(DataError::NonMonotone {
                        station: station.to_string(),
                        line,
                    });
                }
            }
            entry.push((ts, value));
        }

        let mut dataset = Dataset::new();
        for (station, obs) in rows {
            let start = obs[0].0;
            let end = obs[obs.len() - 1].0;
            let len = (end - start).num_hours() as usize + 1;
            let mut values = vec![None; len];
            for (ts, v) in obs {
                values[(ts - start).num_hours() as usize] = v;
            }
            dataset.insert(TimeSeries::new(station, start, values));
        }
        Ok(dataset)
    }

    /// Writes every hour of every series; missing hours get an empty `temp_c`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["station_id", "timestamp", "temp_c"])
            .map_err(csv_error)?;
        for series in self.iter() {
            for (i, v) in series.values.iter().enumerate() {
                let value = v.map(|x| x.to_string()).unwrap_or_default();
                wtr.write_record([
                    series.station_id.as_str(),
                    &format_timestamp(series.timestamp(i)),
                    &value,
                ])
                .map_err(csv_error)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

impl FromIterator<TimeSeries> for Dataset {
    fn from_iter<I: IntoIterator<Item = TimeSeries>>(iter: I) -> Self {
        let mut ds = Dataset::new();
        for s in iter {
            ds.insert(s);
        }
        ds
    }
}

/// Station id to grid cell metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridIndex {
    cells: BTreeMap<String, GridCell>,
}

impl GridIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, station_id: impl Into<String>, cell: GridCell) {
        self.cells.insert(station_id.into(), cell);
    }

    pub fn get(&self, station_id: &str) -> Option<&GridCell> {
        self.cells.get(station_id)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GridCell)> {
        self.cells.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Parses `station_id,geohash` rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        check_header(&mut rdr, &["station_id", "geohash"])?;
        let mut index = GridIndex::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 2 {
                return Err(DataError::Csv {
                    line,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let cell = GridCell::new(record[1].trim()).map_err(|e| DataError::Csv {
                line,
                message: e.to_string(),
            })?;
            let id = record[0].trim().to_string();
            if index.cells.contains_key(&id) {
                return Err(DataError::Csv {
                    line,
                    message: format!("duplicate station_id {id:?}"),
                });
            }
            index.insert(id, cell);
        }
        Ok(index)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["station_id", "geohash"]).map_err(csv_error)?;
        for (id, cell) in self.iter() {
            wtr.write_record([id, cell.geohash()]).map_err(csv_error)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let headers = rdr.headers().map_err(csv_error)?.clone();
    // An empty file has no header row at all.
    if headers.is_empty() {
        return Ok(());
    }
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(DataError::Csv {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DataError::Io(io),
        other => DataError::Csv {
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t(h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 5, 1, h, 0, 0).unwrap()
    }

    #[test]
    fn absent_hours_become_missing() {
        let csv = "station_id,timestamp,temp_c\n\
                   a,2019-05-01T00:00:00Z,1.5\n\
                   a,2019-05-01T01:00:00Z,2\n\
                   a,2019-05-01T03:00:00Z,4\n";
        let ds = Dataset::from_csv(csv.as_bytes()).unwrap();
        let s = ds.get("a").unwrap();
        assert_eq!(s.start, t(0));
        assert_eq!(s.values, vec![Some(1.5), Some(2.0), None, Some(4.0)]);
    }

    #[test]
    fn empty_file_and_header_only() {
        assert!(Dataset::from_csv("".as_bytes()).unwrap().is_empty());
        assert!(Dataset::from_csv("station_id,timestamp,temp_c\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bad_value_names_line() {
        let csv = "station_id,timestamp,temp_c\na,2019-05-01T00:00:00Z,1\na,2019-05-01T01:00:00Z,abc\n";
        match Dataset::from_csv(csv.as_bytes()).unwrap_err() {
            DataError::Csv { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let csv = "station_id,timestamp,temp_c\na,2019-05-01T01:00:00Z,1\na,2019-05-01T01:00:00Z,2\n";
        assert!(matches!(
            Dataset::from_csv(csv.as_bytes()).unwrap_err(),
            DataError::NonMonotone { line: 3, .. }
        ));
    }

    #[test]
    fn empty_field_and_implausible_values_are_missing() {
        let csv = "station_id,timestamp,temp_c\na,2019-05-01T00:00:00Z,\na,2019-05-01T01:00:00Z,75\na,2019-05-01T02:00:00Z,-3\n";
        let ds = Dataset::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(ds.get("a").unwrap().values, vec![None, None, Some(-3.0)]);
    }

    #[test]
    fn wrong_header() {
        assert!(Dataset::from_csv("id,time,t\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut ds = Dataset::new();
        ds.insert(TimeSeries::new("b", t(2), vec![Some(0.1 + 0.2), None, Some(-12.345678901234567)]));
        ds.insert(TimeSeries::from_values("a", t(0), &[1.0 / 3.0, 2.0]));
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::from_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn grid_csv_round_trip() {
        let mut grid = GridIndex::new();
        grid.insert("a", GridCell::new("dr5regw").unwrap());
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        assert_eq!(GridIndex::from_csv(buf.as_slice()).unwrap(), grid);
        assert!(GridIndex::from_csv("station_id,geohash\na,dr5re\n".as_bytes()).is_err());
    }

    #[test]
    fn index_lookup() {
        let s = TimeSeries::from_values("a", t(0), &[1.0, 2.0, 3.0]);
        assert_eq!(s.index_of(t(2)), Some(2));
        assert_eq!(s.index_of(t(3)), None);
        assert_eq!(s.end(), t(3));
        assert_eq!(s.dense_range(t(1), 2), Some(vec![2.0, 3.0]));
        assert_eq!(s.dense_range(t(2), 2), None);
    }
}
