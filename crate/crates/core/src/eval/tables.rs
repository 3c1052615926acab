//! Plot-ready aggregates and their CSV encodings.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;

use super::{EvalError, ForecastReport, HorizonProfile};
use crate::data::GridIndex;

/// Mean rmse and mean bias per station.
pub fn station_means(reports: &[ForecastReport]) -> BTreeMap<String, (f64, f64)> {
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for r in reports {
        let e = acc.entry(r.station_id.clone()).or_insert((0.0, 0.0, 0));
        e.0 += r.rmse;
        e.1 += r.bias;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(k, (s_rmse, s_bias, n))| (k, (s_rmse / n as f64, s_bias / n as f64)))
        .collect()
}

fn min_mean_max(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    (lo, sum / n as f64, hi)
}

/// One line of the model comparison: statistics over per-station means.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub rmse: (f64, f64, f64),
    pub bias: (f64, f64, f64),
}

pub fn comparison_row(model: &str, reports: &[ForecastReport]) -> Result<ComparisonRow, EvalError> {
    let means = station_means(reports);
    if means.is_empty() {
        return Err(EvalError::Empty(format!("no reports for {model}")));
    }
    Ok(ComparisonRow {
        model: model.to_string(),
        rmse: min_mean_max(means.values().map(|m| m.0)),
        bias: min_mean_max(means.values().map(|m| m.1)),
    })
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "model,rmse_min,rmse_mean,rmse_max,bias_min,bias_mean,bias_max")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.model, r.rmse.0, r.rmse.1, r.rmse.2, r.bias.0, r.bias.1, r.bias.2
        )?;
    }
    Ok(())
}

pub fn write_horizon_csv<W: Write>(profiles: &[(String, HorizonProfile)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "model,hour,rmse,bias")?;
    for (model, p) in profiles {
        for h in 0..p.len() {
            writeln!(w, "{model},{},{},{}", h + 1, p.rmse[h], p.bias[h])?;
        }
    }
    Ok(())
}

/// Sensitivity-sweep line; means are taken over stations first.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub threshold: f64,
    pub recipe: String,
    pub rmse_mean: f64,
    pub bias_mean: f64,
}

pub fn sensitivity_row(threshold: f64, recipe: &str, reports: &[ForecastReport]) -> Result<SensitivityRow, EvalError> {
    let row = comparison_row(recipe, reports)?;
    Ok(SensitivityRow {
        threshold,
        recipe: recipe.to_string(),
        rmse_mean: row.rmse.1,
        bias_mean: row.bias.1,
    })
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "threshold,recipe,rmse_mean,bias_mean")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.threshold, r.recipe, r.rmse_mean, r.bias_mean)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRow {
    pub station_id: String,
    pub geohash: String,
    pub lat: f64,
    pub lon: f64,
    pub mean_rmse: f64,
}

/// Mean rmse per station, located by its grid cell center.
pub fn spatial_error_table(reports: &[ForecastReport], grid: &GridIndex) -> Result<Vec<SpatialRow>, EvalError> {
    station_means(reports)
        .into_iter()
        .map(|(station, (mean_rmse, _))| {
            let cell = grid.get(&station).ok_or_else(|| EvalError::UnknownStation(station.clone()))?;
            Ok(SpatialRow {
                geohash: cell.geohash().to_string(),
                lat: cell.center_lat(),
                lon: cell.center_lon(),
                station_id: station,
                mean_rmse,
            })
        })
        .collect()
}

pub fn write_spatial_csv<W: Write>(rows: &[SpatialRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "station_id,geohash,lat,lon,mean_rmse")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.station_id, r.geohash, r.lat, r.lon, r.mean_rmse)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayScore {
    pub day: NaiveDate,
    pub mean_rmse: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeDayReport {
    /// Worst day first; ties keep calendar order.
    pub days: Vec<DayScore>,
    pub histogram: Vec<HistogramBin>,
    pub bin_width: f64,
    pub flag_threshold: f64,
}

impl ExtremeDayReport {
    pub fn flagged(&self) -> impl Iterator<Item = &DayScore> {
        self.days.iter().filter(|d| d.flagged)
    }

    pub fn worst(&self) -> Option<&DayScore> {
        self.days.first()
    }
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.5;
pub const DEFAULT_FLAG_RMSE: f64 = 4.0;

/// Mean rmse per test day (over stations), its histogram from zero in
/// `bin_width` steps, and the days whose mean exceeds `flag_threshold`.
pub fn extreme_day_report(reports: &[ForecastReport], bin_width: f64, flag_threshold: f64) -> ExtremeDayReport {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut per_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for r in reports {
        let e = per_day.entry(r.day).or_insert((0.0, 0));
        e.0 += r.rmse;
        e.1 += 1;
    }
    let mut days: Vec<DayScore> = per_day
        .into_iter()
        .map(|(day, (sum, n))| {
            let mean_rmse = sum / n as f64;
            DayScore {
                day,
                mean_rmse,
                flagged: mean_rmse > flag_threshold,
            }
        })
        .collect();
    let n_bins = days
        .iter()
        .map(|d| (d.mean_rmse / bin_width).floor() as usize + 1)
        .max()
        .unwrap_or(0);
    let mut histogram: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lo: i as f64 * bin_width,
            hi: (i + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for d in &days {
        histogram[(d.mean_rmse / bin_width).floor() as usize].count += 1;
    }
    days.sort_by(|a, b| b.mean_rmse.total_cmp(&a.mean_rmse).then(a.day.cmp(&b.day)));
    ExtremeDayReport {
        days,
        histogram,
        bin_width,
        flag_threshold,
    }
}

pub fn write_extreme_days_csv<W: Write>(report: &ExtremeDayReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "rank,day,mean_rmse,flagged")?;
    for (i, d) in report.days.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i + 1, d.day, d.mean_rmse, d.flagged)?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(report: &ExtremeDayReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    for b in &report.histogram {
        writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
    }
    Ok(())
}

/// Every forecast, one row per (model, station, window, hour).
pub fn write_reports_csv<W: Write>(reports: &[ForecastReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "model,station_id,t0,day,hour,prediction,truth")?;
    for r in reports {
        let t0 = crate::data::format_timestamp(r.t0);
        for (h, (p, t)) in r.prediction.iter().zip(&r.truth).enumerate() {
            writeln!(w, "{},{},{},{},{},{},{}", r.model, r.station_id, t0, r.day, h + 1, p, t)?;
        }
    }
    Ok(())
}
