//! Missing-data handling for the gridded IoT series: filter by missing
//! ratio, interpolate each series in time, then replace each series by the
//! mean of its nearest neighbours.

use chrono::{DateTime, Utc};

use super::{haversine_m, DataError, Dataset, GridCell, GridIndex, TimeSeries};

/// Fraction of missing hours; an empty series counts as fully missing.
pub fn missing_ratio(series: &TimeSeries) -> f64 {
    if series.is_empty() {
        return 1.0;
    }
    series.missing_count() as f64 / series.len() as f64
}

/// Stations whose missing ratio is at most `threshold`.
pub fn filter_by_missing_ratio(dataset: &Dataset, threshold: f64) -> Dataset {
    dataset
        .iter()
        .filter(|s| missing_ratio(s) <= threshold)
        .cloned()
        .collect()
}

/// Fills interior gaps linearly in time and edge gaps with the nearest observation.
pub fn interpolate_linear(series: &TimeSeries) -> Result<TimeSeries, DataError> {
    let observed: Vec<(usize, f64)> = series
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    let (&(first_idx, first), &(last_idx, last)) = match (observed.first(), observed.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(DataError::AllMissing(series.station_id.clone())),
    };

    let mut values = vec![0.0; series.len()];
    values[..first_idx].fill(first);
    values[last_idx..].fill(last);
    for pair in observed.windows(2) {
        let (i0, a) = pair[0];
        let (i1, b) = pair[1];
        values[i0] = a;
        let span = (i1 - i0) as f64;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for (k, slot) in values[i0 + 1..i1].iter_mut().enumerate() {
            let frac = (k + 1) as f64 / span;
            *slot = (a + (b - a) * frac).clamp(lo, hi);
        }
    }
    values[last_idx] = last;
    Ok(TimeSeries::from_values(series.station_id.clone(), series.start, &values))
}

pub fn interpolate_dataset(dataset: &Dataset) -> Result<Dataset, DataError> {
    dataset.iter().map(interpolate_linear).collect()
}

struct Neighbor<'a> {
    distance: f64,
    geohash: &'a str,
    station: &'a str,
    values: &'a [Option<f64>],
}

fn neighbor_order(a: &Neighbor<'_>, b: &Neighbor<'_>) -> std::cmp::Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.geohash.cmp(b.geohash))
        .then_with(|| a.station.cmp(b.station))
}

/// Per-hour mean of the `k` stations nearest to `cell` over `len` hours from `start`.
///
/// Candidates need grid metadata and an observed value at every hour of the
/// span. Distances are haversine between cell centers; ties go to the smaller
/// geohash. Values are summed in order of increasing distance.
pub fn nearest_k_average(
    dataset: &Dataset,
    grid: &GridIndex,
    cell: &GridCell,
    start: DateTime<Utc>,
    len: usize,
    k: usize,
) -> Result<TimeSeries, DataError> {
    let mut candidates: Vec<Neighbor<'_>> = dataset
        .iter()
        .filter_map(|series| {
            let other = grid.get(&series.station_id)?;
            let first = series.index_of(start)?;
            let values = series.values.get(first..first + len)?;
            values.iter().all(Option::is_some).then(|| Neighbor {
                distance: haversine_m(cell.center(), other.center()),
                geohash: other.geohash(),
                station: &series.station_id,
                values,
            })
        })
        .collect();
    if k == 0 || candidates.len() < k {
        return Err(DataError::NotEnoughNeighbors {
            target: cell.geohash().to_string(),
            needed: k,
            available: candidates.len(),
        });
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, neighbor_order);
        candidates.truncate(k);
    }
    candidates.sort_by(neighbor_order);

    let mut sums = vec![0.0; len];
    for n in &candidates {
        for (acc, v) in sums.iter_mut().zip(n.values) {
            *acc += v.expect("checked above");
        }
    }
    let values: Vec<f64> = sums.into_iter().map(|s| s / k as f64).collect();
    Ok(TimeSeries::from_values(cell.geohash(), start, &values))
}

/// Replaces every series of `dataset` by its nearest-`k` average over its own span,
/// keeping the station id.
pub fn spatial_average(dataset: &Dataset, grid: &GridIndex, k: usize) -> Result<Dataset, DataError> {
    dataset
        .iter()
        .map(|series| {
            let cell = grid
                .get(&series.station_id)
                .ok_or_else(|| DataError::UnknownStation(series.station_id.clone()))?;
            let mut avg = nearest_k_average(dataset, grid, cell, series.start, series.len(), k)?;
            avg.station_id = series.station_id.clone();
            Ok(avg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    pub threshold: f64,
    pub neighbors: usize,
    /// Replace each series by its neighbourhood mean; when false only interpolation runs.
    pub spatial_average: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            threshold: 0.055,
            neighbors: 20,
            spatial_average: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub dataset: Dataset,
    pub stations_before: usize,
    pub stations_after: usize,
}

/// Filter, interpolate, then average over nearest neighbours.
pub fn preprocess(raw: &Dataset, grid: &GridIndex, opts: &PreprocessOptions) -> Result<Preprocessed, DataError> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(DataError::Domain(format!(
            "missing-ratio threshold {} not in [0, 1]",
            opts.threshold
        )));
    }
    let filtered = filter_by_missing_ratio(raw, opts.threshold);
    if filtered.is_empty() {
        return Err(DataError::Empty(format!(
            "no station has missing ratio <= {}",
            opts.threshold
        )));
    }
    let interpolated = interpolate_dataset(&filtered)?;
    let dataset = if opts.spatial_average {
        spatial_average(&interpolated, grid, opts.neighbors)?
    } else {
        interpolated
    };
    log::info!(
        "preprocess: {} stations, {} pass threshold {}",
        raw.len(),
        dataset.len(),
        opts.threshold
    );
    Ok(Preprocessed {
        stations_before: raw.len(),
        stations_after: dataset.len(),
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 5, 1, 0, 0, 0).unwrap()
    }

    fn series(values: &[Option<f64>]) -> TimeSeries {
        TimeSeries::new("s", t0(), values.to_vec())
    }

    #[test]
    fn ratio() {
        let mut v = vec![Some(1.0); 100];
        assert_eq!(missing_ratio(&series(&v)), 0.0);
        v[..10].fill(None);
        assert_eq!(missing_ratio(&series(&v)), 0.10);
        assert_eq!(missing_ratio(&series(&[None, None])), 1.0);
    }

    #[test]
    fn interpolation_examples() {
        let fill = |v: &[Option<f64>]| interpolate_linear(&series(v)).unwrap().dense().unwrap();
        assert_eq!(fill(&[Some(1.0), None, Some(3.0)]), vec![1.0, 2.0, 3.0]);
        assert_eq!(fill(&[Some(5.0), None, None, Some(5.0)]), vec![5.0; 4]);
        assert_eq!(fill(&[None, Some(4.0), Some(8.0), None]), vec![4.0, 4.0, 8.0, 8.0]);
        assert!(matches!(
            interpolate_linear(&series(&[None, None])),
            Err(DataError::AllMissing(_))
        ));
    }

    #[test]
    fn filter_thresholds() {
        let ds: Dataset = [
            TimeSeries::new("a", t0(), vec![Some(1.0), Some(1.0)]),
            TimeSeries::new("b", t0(), vec![None, Some(1.0)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(filter_by_missing_ratio(&ds, 1.0), ds);
        let complete = filter_by_missing_ratio(&ds, 0.0);
        assert_eq!(complete.station_ids().collect::<Vec<_>>(), vec!["a"]);
        assert_eq!(ds.len(), 2);
    }

    fn line_layout(values: &[f64], step_deg: f64) -> (Dataset, GridIndex) {
        let mut ds = Dataset::new();
        let mut grid = GridIndex::new();
        for (i, &v) in values.iter().enumerate() {
            let id = format!("s{i:03}");
            let cell = GridCell::containing(40.0, -74.0 + step_deg * i as f64).unwrap();
            grid.insert(id.clone(), cell);
            ds.insert(TimeSeries::from_values(id, t0(), &[v; 5]));
        }
        (ds, grid)
    }

    #[test]
    fn nearest_one_is_self() {
        let (ds, grid) = line_layout(&[1.0, 2.0, 3.0], 0.01);
        let cell = grid.get("s001").unwrap();
        let avg = nearest_k_average(&ds, &grid, cell, t0(), 5, 1).unwrap();
        assert_eq!(avg.dense().unwrap(), vec![2.0; 5]);
    }

    #[test]
    fn colocated_mean() {
        let (ds, grid) = line_layout(&[1.0, 2.0, 3.0], 0.0);
        let cell = grid.get("s000").unwrap();
        let avg = nearest_k_average(&ds, &grid, cell, t0(), 5, 3).unwrap();
        assert_eq!(avg.dense().unwrap(), vec![2.0; 5]);
    }

    #[test]
    fn line_of_25_stations() {
        let values: Vec<f64> = (0..25).map(f64::from).collect();
        let (ds, grid) = line_layout(&values, 0.005);
        // From station 0 the nearest 20 are 0..20, mean 9.5.
        let avg = nearest_k_average(&ds, &grid, grid.get("s000").unwrap(), t0(), 5, 20).unwrap();
        assert_eq!(avg.dense().unwrap(), vec![9.5; 5]);
        // From station 12 the nearest 20 are 2..22 (ties at distance 10 broken by geohash), mean 11.5 or 12.5.
        let avg = nearest_k_average(&ds, &grid, grid.get("s012").unwrap(), t0(), 5, 20).unwrap();
        let m = avg.values[0].unwrap();
        assert!(m == 11.5 || m == 12.5, "{m}");
    }

    #[test]
    fn too_few_neighbors() {
        let (ds, grid) = line_layout(&[1.0, 2.0], 0.01);
        let err = nearest_k_average(&ds, &grid, grid.get("s000").unwrap(), t0(), 5, 20).unwrap_err();
        assert!(matches!(
            err,
            DataError::NotEnoughNeighbors { needed: 20, available: 2, .. }
        ));
        // Span not covered by any candidate.
        let err = nearest_k_average(&ds, &grid, grid.get("s000").unwrap(), t0(), 6, 1).unwrap_err();
        assert!(matches!(err, DataError::NotEnoughNeighbors { available: 0, .. }));
    }

    #[test]
    fn preprocess_rejects_bad_threshold_and_empty_result() {
        let (ds, grid) = line_layout(&[1.0], 0.01);
        let opts = PreprocessOptions {
            threshold: 1.5,
            ..Default::default()
        };
        assert!(matches!(preprocess(&ds, &grid, &opts), Err(DataError::Domain(_))));
        let mut gappy = Dataset::new();
        gappy.insert(TimeSeries::new("s000", t0(), vec![None, Some(1.0)]));
        let opts = PreprocessOptions {
            threshold: 0.0,
            neighbors: 1,
            ..Default::default()
        };
        assert!(matches!(preprocess(&gappy, &grid, &opts), Err(DataError::Empty(_))));
        let done = preprocess(&ds, &grid, &opts).unwrap();
        assert_eq!(done.dataset, ds);
    }

    fn gappy_values() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.6, -30.0f64..40.0), 1..200)
            .prop_filter("needs an observation", |v| v.iter().any(Option::is_some))
    }

    proptest! {
        #[test]
        fn interpolation_preserves_observations(v in gappy_values()) {
            let s = series(&v);
            let out = interpolate_linear(&s).unwrap();
            prop_assert_eq!(missing_ratio(&out), 0.0);
            let filled = out.dense().unwrap();
            let obs: Vec<(usize, f64)> = v.iter().enumerate().filter_map(|(i, x)| x.map(|x| (i, x))).collect();
            for &(i, x) in &obs {
                prop_assert_eq!(filled[i], x);
            }
            for pair in obs.windows(2) {
                let (i0, a) = pair[0];
                let (i1, b) = pair[1];
                for &f in &filled[i0..=i1] {
                    prop_assert!(f >= a.min(b) && f <= a.max(b));
                }
            }
        }

        #[test]
        fn filter_is_monotone(ratios in prop::collection::vec(0.0f64..1.0, 1..20), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let ds: Dataset = ratios.iter().enumerate().map(|(i, r)| {
                let missing = (r * 50.0) as usize;
                let mut v = vec![Some(0.0); 50];
                v[..missing].fill(None);
                TimeSeries::new(format!("{i}"), t0(), v)
            }).collect();
            let small = filter_by_missing_ratio(&ds, lo);
            let large = filter_by_missing_ratio(&ds, hi);
            for id in small.station_ids() {
                prop_assert!(large.get(id).is_some());
            }
        }

        #[test]
        fn nearest_k_matches_sort_oracle(
            pts in prop::collection::vec((40.6f64..40.8, -74.1f64..-73.9, -10.0f64..30.0), 1..60),
            k_frac in 0.0f64..1.0,
            target in 0usize..60,
        ) {
            let mut ds = Dataset::new();
            let mut grid = GridIndex::new();
            for (i, &(lat, lon, v)) in pts.iter().enumerate() {
                let id = format!("s{i:03}");
                grid.insert(id.clone(), GridCell::containing(lat, lon).unwrap());
                ds.insert(TimeSeries::from_values(id, t0(), &[v, v + 1.0, v * 0.5]));
            }
            let k = 1 + ((pts.len() - 1) as f64 * k_frac) as usize;
            let cell = grid.get(&format!("s{:03}", target % pts.len())).unwrap().clone();
            let got = nearest_k_average(&ds, &grid, &cell, t0(), 3, k).unwrap();

            let mut all: Vec<(f64, String, String)> = grid.iter()
                .map(|(id, c)| (haversine_m(cell.center(), c.center()), c.geohash().to_string(), id.to_string()))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for h in 0..3 {
                let mut sum = 0.0;
                for (_, _, id) in &all[..k] {
                    sum += ds.get(id).unwrap().values[h].unwrap();
                }
                prop_assert_eq!(got.values[h].unwrap(), sum / k as f64);
            }
        }
    }
}
