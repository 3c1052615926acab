use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::Rng;
use urbantemp::data::TestWindow;
use urbantemp::eval::*;
use urbantemp::rng::SeedTree;

fn window(station: &str, day: u32) -> TestWindow {
    let day = NaiveDate::from_ymd_opt(2019, 7, day).unwrap();
    TestWindow {
        station_id: station.to_string(),
        t0: day.and_hms_opt(0, 0, 0).unwrap().and_utc() - Duration::hours(48),
        day,
    }
}

fn random_reports(seed: u64, n: usize) -> Vec<ForecastReport> {
    let mut rng = SeedTree::new(seed).rng("reports", 0);
    (0..n)
        .map(|i| {
            let truth: Vec<f64> = (0..24).map(|_| rng.random_range(-10.0..35.0)).collect();
            let shift = rng.random_range(-3.0..3.0);
            let pred: Vec<f64> = truth.iter().map(|t| t + shift + rng.random_range(-2.0..2.0)).collect();
            let w = window(&format!("s{}", i % 7), 1 + (i % 28) as u32);
            ForecastReport::new("m", &w, pred, truth)
        })
        .collect()
}

#[test]
fn unit_examples() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    assert_eq!(rmse(&[2.0; 24], &[1.0; 24]), 1.0);
    assert_eq!(rmse(&[2.0, 4.0], &[0.0, 0.0]), 10f64.sqrt());
    assert_eq!(bias(&[2.0; 24], &[1.0; 24]), 1.0);
    assert_eq!(bias(&[3.0, -1.0], &[0.0, 0.0]), 1.0);
}

#[test]
fn rmse_bounds_bias_on_1000_pairs() {
    for r in random_reports(1, 1000) {
        assert!(r.rmse >= r.bias.abs(), "{} < |{}|", r.rmse, r.bias);
    }
}

#[test]
fn pooled_profile_agrees_with_concatenated_errors() {
    for seed in 0..10 {
        let reports = random_reports(seed, 200);
        let profile = HorizonProfile::from_reports(&reports).unwrap();
        let from_hours = (profile.rmse.iter().map(|r| r * r).sum::<f64>() / 24.0).sqrt();
        let from_reports = (reports.iter().map(|r| r.rmse * r.rmse).sum::<f64>() / reports.len() as f64).sqrt();
        let (pred, truth): (Vec<f64>, Vec<f64>) =
            reports.iter().flat_map(|r| r.prediction.iter().copied().zip(r.truth.iter().copied())).unzip();
        let flat = rmse(&pred, &truth);
        assert!((from_hours - flat).abs() < 1e-12);
        assert!((from_reports - flat).abs() < 1e-12);
        let mean_bias = profile.bias.iter().sum::<f64>() / 24.0;
        assert!((mean_bias - bias(&pred, &truth)).abs() < 1e-12);
    }
}

#[test]
fn comparison_row_summarises_station_means() {
    let perfect = ForecastReport::new("m", &window("a", 1), vec![1.0; 24], vec![1.0; 24]);
    let off = ForecastReport::new("m", &window("b", 1), vec![3.0; 24], vec![1.0; 24]);
    let off2 = ForecastReport::new("m", &window("b", 2), vec![1.0; 24], vec![1.0; 24]);
    let row = comparison_row("m", &[perfect, off, off2]).unwrap();
    assert_eq!(row.rmse, (0.0, 0.5, 1.0));
    assert_eq!(row.bias, (0.0, 0.5, 1.0));
    assert!(comparison_row("m", &[]).is_err());
}

#[test]
fn extreme_days_rank_and_flag() {
    let mut reports = Vec::new();
    for (day, err) in [(3, 1.0), (4, 6.0), (5, 2.0)] {
        for s in ["a", "b"] {
            reports.push(ForecastReport::new("m", &window(s, day), vec![err; 24], vec![0.0; 24]));
        }
    }
    let rep = extreme_day_report(&reports, 0.5, 4.0);
    assert_eq!(rep.worst().unwrap().day, NaiveDate::from_ymd_opt(2019, 7, 4).unwrap());
    assert_eq!(rep.flagged().count(), 1);
    assert_eq!(rep.histogram.len(), 13);
    assert_eq!(rep.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
    assert_eq!(rep.histogram[2].count, 1);
}

#[test]
fn horizon_profile_rejects_ragged_reports() {
    let t = Utc.with_ymd_and_hms(2019, 7, 1, 0, 0, 0).unwrap();
    let w = TestWindow {
        station_id: "a".into(),
        t0: t,
        day: t.date_naive(),
    };
    let a = ForecastReport::new("m", &w, vec![0.0; 24], vec![0.0; 24]);
    let b = ForecastReport::new("m", &w, vec![0.0; 12], vec![0.0; 12]);
    assert!(HorizonProfile::from_reports(&[a, b]).is_err());
    assert!(HorizonProfile::from_reports(&[]).is_err());
}
