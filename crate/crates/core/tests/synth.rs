use std::f64::consts::PI;
use std::fs;

use chrono::Timelike;
use nalgebra::{DMatrix, DVector};
use urbantemp::data::{missing_ratio, Dataset, GridIndex};
use urbantemp::synth::*;

fn quiet() -> WeatherScenario {
    WeatherScenario {
        days: 20,
        iot_days: 10,
        n_iot_cells: 9,
        n_station_sites: 2,
        seasonal_amp: 0.0,
        diurnal_amp: 0.0,
        noise_std: 0.0,
        spatial_gradient: 0.0,
        missingness: vec![0.0],
        station_missingness: 0.0,
        ..Default::default()
    }
}

fn truth(s: &WeatherScenario) -> Field {
    generate_field(s).unwrap()
}

#[test]
fn constant_field_is_constant() {
    let field = truth(&WeatherScenario { mean_temp: 17.5, ..quiet() });
    for series in field.iot.iter().chain(field.stations.iter()) {
        assert!(series.values.iter().all(|v| *v == Some(17.5)), "{}", series.station_id);
    }
}

#[test]
fn diurnal_swing_is_twice_the_amplitude() {
    let s = WeatherScenario { diurnal_amp: 6.0, ..quiet() };
    let field = truth(&s);
    let series = field.stations.iter().next().unwrap();
    let day: Vec<f64> = series.values[..24].iter().map(|v| v.unwrap()).collect();
    let hi = day.iter().cloned().fold(f64::MIN, f64::max);
    let lo = day.iter().cloned().fold(f64::MAX, f64::min);
    assert!((hi - lo - 12.0).abs() < 1e-9, "{hi} {lo}");
    // The warmest hour is the configured local peak.
    let peak = day.iter().position(|&v| v == hi).unwrap();
    let local = (series.timestamp(peak).hour() as i32 + s.utc_offset).rem_euclid(24);
    assert_eq!(local as f64, s.diurnal_peak_hour);
}

#[test]
fn front_depresses_temperature_by_its_magnitude() {
    let calm = quiet();
    let cold = WeatherScenario {
        fronts: vec![FrontEvent { day: 12, magnitude: -10.0, ramp_hours: 6 }],
        ..quiet()
    };
    let (a, b) = (truth(&calm), truth(&cold));
    let sa = a.iot.iter().next().unwrap();
    let sb = b.iot.get(&sa.station_id).unwrap();
    let depth = sa
        .values
        .iter()
        .zip(&sb.values)
        .map(|(x, y)| x.unwrap() - y.unwrap())
        .fold(0.0, f64::max);
    assert!(depth >= 8.0, "front depth {depth}");
    // Nothing changes before the front day.
    let onset = (12 - (calm.days - calm.iot_days)) as usize * 24;
    assert_eq!(sa.values[..onset], sb.values[..onset]);
}

#[test]
fn missing_ratio_hits_target() {
    let s = WeatherScenario { missingness: vec![0.3], days: 60, iot_days: 60, ..quiet() };
    let out = generate(&s).unwrap();
    for series in out.iot.iter() {
        assert!((missing_ratio(series) - 0.3).abs() <= 0.02);
    }
}

#[test]
fn night_hours_are_missing_more_often() {
    for seed in 0..3 {
        let s = WeatherScenario {
            seed,
            days: 60,
            iot_days: 60,
            missingness: vec![0.3],
            ..quiet()
        };
        let out = generate(&s).unwrap();
        let (mut night, mut morning) = (0usize, 0usize);
        for series in out.iot.iter() {
            for (i, v) in series.values.iter().enumerate() {
                let local = (series.timestamp(i).hour() as i32 + s.utc_offset).rem_euclid(24);
                if v.is_none() {
                    match local {
                        1..=6 => night += 1,
                        9..=14 => morning += 1,
                        _ => {}
                    }
                }
            }
        }
        assert!(night > morning, "seed {seed}: night {night}, morning {morning}");
    }
}

#[test]
fn station_dropout_is_rare() {
    let s = WeatherScenario { days: 366, iot_days: 10, ..WeatherScenario::default() };
    let out = generate(&WeatherScenario { n_iot_cells: 4, ..s }).unwrap();
    for series in out.stations.iter() {
        assert!(missing_ratio(series) < 0.001);
    }
}

#[test]
fn least_squares_recovers_the_sinusoids() {
    let s = WeatherScenario {
        days: 730,
        iot_days: 10,
        n_iot_cells: 4,
        seasonal_amp: 10.0,
        diurnal_amp: 6.0,
        ..quiet()
    };
    let field = truth(&s);
    let series = field.stations.iter().next().unwrap();
    let y: Vec<f64> = series.values.iter().map(|v| v.unwrap()).collect();
    let base = (s.start_time().timestamp() / 3600) as f64;
    let n = y.len();
    let x = DMatrix::from_fn(n, 5, |t, j| {
        let h = t as f64;
        let day = 2.0 * PI * h / 24.0;
        let year = 2.0 * PI * (base + h) / HOURS_PER_YEAR;
        match j {
            0 => 1.0,
            1 => day.sin(),
            2 => day.cos(),
            3 => year.sin(),
            _ => year.cos(),
        }
    });
    let beta = x.clone().svd(true, true).solve(&DVector::from_vec(y), 1e-12).unwrap();
    assert!((beta[0] - s.mean_temp).abs() < 1e-6, "{beta}");
    assert!((beta[1].hypot(beta[2]) - 6.0).abs() < 1e-6, "{beta}");
    assert!((beta[3].hypot(beta[4]) - 10.0).abs() < 1e-6, "{beta}");
}

#[test]
fn output_is_byte_deterministic_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let s = WeatherScenario {
        seed: 5,
        days: 15,
        iot_days: 8,
        n_iot_cells: 9,
        n_station_sites: 2,
        missingness: vec![0.1],
        ..Default::default()
    };
    let a = emit_datasets(&s, &tmp.path().join("a")).unwrap();
    let b = emit_datasets(&s, &tmp.path().join("b")).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let c = emit_datasets(&WeatherScenario { seed: 6, ..s.clone() }, &tmp.path().join("c")).unwrap();
    assert_ne!(fs::read(&a[0]).unwrap(), fs::read(&c[0]).unwrap());

    let out = generate(&s).unwrap();
    let dir = tmp.path().join("a");
    let iot = Dataset::from_csv(fs::File::open(dir.join("iot.csv")).unwrap()).unwrap();
    assert_eq!(iot.len(), out.iot.len());
    for series in out.iot.iter() {
        assert_eq!(iot.get(&series.station_id).unwrap(), series);
    }
    let grid = GridIndex::from_csv(fs::File::open(dir.join("grid.csv")).unwrap()).unwrap();
    assert_eq!(grid.len(), 11);
    let back = WeatherScenario::load(&dir.join("scenario.cfg")).unwrap();
    assert_eq!(back, s);
}
