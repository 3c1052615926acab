//! Fixed-length training samples, normalization, and the held-out test protocol.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand::seq::SliceRandom;

use std::io::{Read, Write};

use super::series::csv_error;
use super::{format_timestamp, parse_timestamp, DataError, Dataset, TimeSeries};
use crate::rng::SeedTree;

/// One input window and the target hours that immediately follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub station_id: String,
    /// First input hour.
    pub t0: DateTime<Utc>,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn span_hours(&self) -> usize {
        self.input.len() + self.target.len()
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.t0 + Duration::hours(self.span_hours() as i64)
    }
}

/// Slides an `in_len + out_len` window with the given stride.
///
/// Windows touching a missing hour are skipped, so on a gap-free series the
/// count is `(len - in_len - out_len) / stride + 1`.
pub fn make_windows(series: &TimeSeries, in_len: usize, out_len: usize, stride: usize) -> Vec<Sample> {
    assert!(stride >= 1, "stride must be at least 1");
    let span = in_len + out_len;
    if series.len() < span {
        return Vec::new();
    }
    (0..=series.len() - span)
        .step_by(stride)
        .filter_map(|i| {
            let window: Option<Vec<f64>> = series.values[i..i + span].iter().copied().collect();
            let window = window?;
            Some(Sample {
                station_id: series.station_id.clone(),
                t0: series.timestamp(i),
                input: window[..in_len].to_vec(),
                target: window[in_len..].to_vec(),
            })
        })
        .collect()
}

/// Global z-score statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn new(mean: f64, std: f64) -> Result<Self, DataError> {
        if !(std > 0.0) || !mean.is_finite() || !std.is_finite() {
            return Err(DataError::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Mean and population standard deviation over every input and target value.
pub fn fit_norm_stats(samples: &[Sample]) -> Result<NormStats, DataError> {
    let values = || samples.iter().flat_map(|s| s.input.iter().chain(&s.target));
    let n = values().count();
    if n == 0 {
        return Err(DataError::NoSamples);
    }
    let mean = values().sum::<f64>() / n as f64;
    let var = values().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    NormStats::new(mean, var.sqrt())
}

/// Shuffles under `seed` and splits off the first `round(fraction * n)` samples for training.
pub fn split_train_val(samples: &[Sample], train_fraction: f64, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must be in (0, 1)"
    );
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut SeedTree::new(seed).rng("split", 0));
    let n_train = (train_fraction * samples.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    (pick(&order[..n_train]), pick(&order[n_train..]))
}

/// A held-out 72-hour window whose target hours cover calendar day `day` (UTC).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TestWindow {
    pub station_id: String,
    pub t0: DateTime<Utc>,
    pub day: NaiveDate,
}

fn day_start(day: NaiveDate) -> DateTime<Utc> {
    day.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc()
}

/// Chooses `n_days` distinct target days in `[start, end)` stratified by month.
///
/// Every month with a usable day gets `n_days / months` days; the remainder goes
/// round-robin over a seeded month order. A day is usable when its 48 input hours
/// and 24 target hours lie inside the span. `required` days are taken first and
/// count toward their month's quota.
pub fn select_test_days(
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    in_len: usize,
    out_len: usize,
    n_days: usize,
    required: &[NaiveDate],
    seed: u64,
) -> Result<Vec<NaiveDate>, DataError> {
    if n_days == 0 {
        return Ok(Vec::new());
    }
    let mut by_month: BTreeMap<(i32, u32), Vec<NaiveDate>> = BTreeMap::new();
    let mut day = (start + Duration::hours(in_len as i64)).date_naive();
    loop {
        let t0 = day_start(day) - Duration::hours(in_len as i64);
        let t_end = day_start(day) + Duration::hours(out_len as i64);
        if t_end > end {
            break;
        }
        if t0 >= start {
            by_month.entry((day.year(), day.month())).or_default().push(day);
        }
        day = day.succ_opt().expect("date in range");
    }
    let available: usize = by_month.values().map(Vec::len).sum();
    if available < n_days {
        return Err(DataError::InsufficientCoverage {
            needed: n_days,
            available,
        });
    }
    for d in required {
        if !by_month.get(&(d.year(), d.month())).is_some_and(|days| days.contains(d)) {
            return Err(DataError::Domain(format!("required test day {d} is not usable")));
        }
    }

    let tree = SeedTree::new(seed);
    let months: Vec<(i32, u32)> = by_month.keys().copied().collect();
    let mut quota: BTreeMap<(i32, u32), usize> = months.iter().map(|&m| (m, n_days / months.len())).collect();
    let mut rr_order = months.clone();
    rr_order.shuffle(&mut tree.rng("test-months", 0));
    let mut remainder = n_days % months.len();
    // Quota a month cannot fill moves on round-robin too.
    loop {
        let mut overflow = 0;
        for m in &months {
            let cap = by_month[m].len();
            let q = quota.get_mut(m).expect("month present");
            if *q > cap {
                overflow += *q - cap;
                *q = cap;
            }
        }
        remainder += overflow;
        if remainder == 0 {
            break;
        }
        let mut progressed = false;
        for m in &rr_order {
            if remainder == 0 {
                break;
            }
            if quota[m] < by_month[m].len() {
                *quota.get_mut(m).expect("month present") += 1;
                remainder -= 1;
                progressed = true;
            }
        }
        debug_assert!(progressed);
    }

    let mut chosen = Vec::with_capacity(n_days);
    for (idx, m) in months.iter().enumerate() {
        let mut pool = by_month[m].clone();
        let forced: Vec<NaiveDate> = required
            .iter()
            .filter(|d| (d.year(), d.month()) == *m)
            .copied()
            .collect();
        pool.retain(|d| !forced.contains(d));
        pool.shuffle(&mut tree.rng("test-days", idx as u64));
        let take = quota[m].saturating_sub(forced.len());
        chosen.extend(forced);
        chosen.extend(pool.into_iter().take(take));
    }
    chosen.sort();
    chosen.dedup();
    Ok(chosen)
}

/// One test window per (station, day) for the given stations, over their common span.
pub fn select_test_windows(
    dataset: &Dataset,
    in_len: usize,
    out_len: usize,
    n_days: usize,
    required: &[NaiveDate],
    seed: u64,
) -> Result<Vec<TestWindow>, DataError> {
    if n_days == 0 {
        return Ok(Vec::new());
    }
    let start = dataset.iter().map(|s| s.start).max().ok_or_else(|| DataError::Empty("no test stations".into()))?;
    let end = dataset.iter().map(TimeSeries::end).min().expect("non-empty");
    if end <= start {
        return Err(DataError::InsufficientCoverage {
            needed: n_days,
            available: 0,
        });
    }
    let days = select_test_days(start, end, in_len, out_len, n_days, required, seed)?;
    Ok(test_windows_for_days(dataset, &days, in_len))
}

pub fn test_windows_for_days(dataset: &Dataset, days: &[NaiveDate], in_len: usize) -> Vec<TestWindow> {
    let mut windows = Vec::with_capacity(days.len() * dataset.len());
    for station in dataset.station_ids() {
        for &day in days {
            windows.push(TestWindow {
                station_id: station.to_string(),
                t0: day_start(day) - Duration::hours(in_len as i64),
                day,
            });
        }
    }
    windows
}

/// Drops every sample whose span overlaps any test window's span, for all stations.
pub fn exclude_overlapping(samples: Vec<Sample>, tests: &[TestWindow], span_hours: usize) -> Vec<Sample> {
    let mut starts: Vec<DateTime<Utc>> = tests.iter().map(|t| t.t0).collect();
    starts.sort();
    starts.dedup();
    let span = Duration::hours(span_hours as i64);
    samples
        .into_iter()
        .filter(|s| {
            let (a0, a1) = (s.t0, s.end());
            // First test window starting at or after a0 - span + 1h could overlap.
            let from = starts.partition_point(|&t| t + span <= a0);
            !starts[from..].iter().take_while(|&&t| t < a1).any(|&t| t + span > a0)
        })
        .collect()
}

/// Writes samples as `station_id,t0,x1..x{in},y1..y{out}` rows.
pub fn write_samples_csv<W: Write>(samples: &[Sample], writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let (n_in, n_out) = samples.first().map_or((0, 0), |s| (s.input.len(), s.target.len()));
    let mut header = vec!["station_id".to_string(), "t0".to_string()];
    header.extend((1..=n_in).map(|i| format!("x{i}")));
    header.extend((1..=n_out).map(|i| format!("y{i}")));
    wtr.write_record(&header).map_err(csv_error)?;
    for s in samples {
        if s.input.len() != n_in || s.target.len() != n_out {
            return Err(DataError::Domain("samples have differing window lengths".into()));
        }
        let mut row = vec![s.station_id.clone(), format_timestamp(s.t0)];
        row.extend(s.input.iter().chain(&s.target).map(f64::to_string));
        wtr.write_record(&row).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a store written by [`write_samples_csv`].
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<Sample>, DataError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let n_in = headers.iter().filter(|h| h.starts_with('x')).count();
    let n_out = headers.iter().filter(|h| h.starts_with('y')).count();
    if headers.len() != 2 + n_in + n_out || headers.get(0) != Some("station_id") || headers.get(1) != Some("t0") {
        return Err(DataError::Csv {
            line: 1,
            message: "expected header station_id,t0,x1..,y1..".into(),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| DataError::Csv { line, message };
        if record.len() != headers.len() {
            return Err(bad(format!("expected {} fields, found {}", headers.len(), record.len())));
        }
        let values: Vec<f64> = record
            .iter()
            .skip(2)
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("bad value {v:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        out.push(Sample {
            station_id: record[0].to_string(),
            t0: parse_timestamp(&record[1]).map_err(bad)?,
            input: values[..n_in].to_vec(),
            target: values[n_in..].to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap()
    }

    fn ramp(len: usize) -> TimeSeries {
        let v: Vec<f64> = (0..len).map(|i| i as f64).collect();
        TimeSeries::from_values("s", t0(), &v)
    }

    #[test]
    fn sample_store_round_trip() {
        let samples = make_windows(&ramp(100), 48, 24, 7);
        let mut buf = Vec::new();
        write_samples_csv(&samples, &mut buf).unwrap();
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), samples);
        assert!(read_samples_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&ramp(72), 48, 24, 1).len(), 1);
        assert_eq!(make_windows(&ramp(71), 48, 24, 1).len(), 0);
        let w = make_windows(&ramp(100), 48, 24, 1);
        assert_eq!(w.len(), 29);
        assert_eq!(w[3].input[0], 3.0);
        assert_eq!(w[3].target[0], 51.0);
        assert_eq!(w[3].t0, t0() + Duration::hours(3));
        assert!(w.windows(2).all(|p| p[0].t0 < p[1].t0));
    }

    #[test]
    fn windows_skip_gaps() {
        let mut s = ramp(80);
        s.values[60] = None;
        // Windows starting 0..=8; those covering index 60 are all of them.
        assert!(make_windows(&s, 48, 24, 1).is_empty());
        s.values[60] = Some(60.0);
        s.values[0] = None;
        assert_eq!(make_windows(&s, 48, 24, 1).len(), 8);
    }

    #[test]
    fn norm_stats() {
        let same = Sample {
            station_id: "a".into(),
            t0: t0(),
            input: vec![3.0; 4],
            target: vec![3.0; 2],
        };
        assert!(matches!(fit_norm_stats(&[same]), Err(DataError::ZeroVariance)));
        assert!(matches!(fit_norm_stats(&[]), Err(DataError::NoSamples)));
        let stats = NormStats::new(10.0, 2.0).unwrap();
        assert_eq!(stats.normalize(12.0), 1.0);
        assert_eq!(stats.denormalize(1.0), 12.0);
        assert!(NormStats::new(0.0, 0.0).is_err());
    }

    #[test]
    fn norm_round_trip() {
        let stats = NormStats::new(13.7, 8.2).unwrap();
        let mut rng = SeedTree::new(5).rng("t", 0);
        for _ in 0..1000 {
            let x: f64 = rand::Rng::random_range(&mut rng, -60.0..60.0);
            let back = stats.denormalize(stats.normalize(x));
            assert!((back - x).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn split_partition() {
        let samples = make_windows(&ramp(171), 48, 24, 1);
        assert_eq!(samples.len(), 100);
        let (train, val) = split_train_val(&samples, 0.9, 3);
        assert_eq!((train.len(), val.len()), (90, 10));
        let (train2, val2) = split_train_val(&samples, 0.9, 3);
        assert_eq!((&train, &val), (&train2, &val2));
        let mut all: Vec<_> = train.iter().chain(&val).map(|s| s.t0).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
        let (train3, _) = split_train_val(&samples, 0.9, 4);
        assert_ne!(train, train3);
    }

    fn year_span() -> (DateTime<Utc>, DateTime<Utc>) {
        let start = Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap();
        let end = Utc.with_ymd_and_hms(2020, 5, 1, 0, 0, 0).unwrap();
        (start, end)
    }

    #[test]
    fn test_days_stratified_by_month() {
        let (start, end) = year_span();
        for seed in 0..5 {
            let days = select_test_days(start, end, 48, 24, 27, &[], seed).unwrap();
            assert_eq!(days.len(), 27);
            let mut per_month: BTreeMap<(i32, u32), usize> = BTreeMap::new();
            for d in &days {
                *per_month.entry((d.year(), d.month())).or_default() += 1;
            }
            assert_eq!(per_month.len(), 12);
            assert!(per_month.values().all(|&c| c == 2 || c == 3));
        }
        assert!(select_test_days(start, end, 48, 24, 0, &[], 1).unwrap().is_empty());
        assert!(matches!(
            select_test_days(start, start + Duration::days(5), 48, 24, 27, &[], 1),
            Err(DataError::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn required_day_is_selected() {
        let (start, end) = year_span();
        let d = NaiveDate::from_ymd_opt(2019, 11, 1).unwrap();
        let days = select_test_days(start, end, 48, 24, 27, &[d], 9).unwrap();
        assert!(days.contains(&d));
        assert_eq!(days.len(), 27);
    }

    #[test]
    fn test_windows_excluded_from_training() {
        let (start, _) = year_span();
        let s = TimeSeries::from_values("a", start, &vec![1.0; 24 * 90]);
        let ds: Dataset = [s.clone()].into_iter().collect();
        let tests = select_test_windows(&ds, 48, 24, 6, &[], 2).unwrap();
        assert_eq!(tests.len(), 6);
        let kept = exclude_overlapping(make_windows(&s, 48, 24, 1), &tests, 72);
        assert!(!kept.is_empty());
        for sample in &kept {
            for t in &tests {
                let t_end = t.t0 + Duration::hours(72);
                assert!(sample.end() <= t.t0 || sample.t0 >= t_end);
            }
        }
    }

    proptest! {
        #[test]
        fn window_count_formula(len in 0usize..10_000, stride in 1usize..100) {
            let n = make_windows(&ramp(len), 48, 24, stride).len();
            let expected = if len < 72 { 0 } else { (len - 72) / stride + 1 };
            prop_assert_eq!(n, expected);
        }

        #[test]
        fn exclusion_is_exhaustive(offsets in prop::collection::vec(0i64..400, 0..6), len in 72usize..500) {
            let s = ramp(len);
            let tests: Vec<TestWindow> = offsets.iter().map(|&o| TestWindow {
                station_id: "x".into(),
                t0: t0() + Duration::hours(o),
                day: t0().date_naive(),
            }).collect();
            let all = make_windows(&s, 48, 24, 1);
            let kept = exclude_overlapping(all.clone(), &tests, 72);
            for sample in &all {
                let overlaps = tests.iter().any(|t| sample.t0 < t.t0 + Duration::hours(72) && t.t0 < sample.end());
                prop_assert_eq!(kept.contains(sample), !overlaps);
            }
        }
    }
}
