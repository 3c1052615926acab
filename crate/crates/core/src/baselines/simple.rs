use super::Forecaster;
use crate::lstm::ModelError;
use crate::OUT_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PersistenceVariant {
    /// Repeat the last observed value.
    #[default]
    Hold,
    /// Repeat the last 24 hours.
    Cycle,
}

/// Persistence forecast of `horizon` hours.
///
/// `Cycle` needs a window of at least 24 hours and a horizon of at most 24.
pub fn persistence_forecast(window: &[f64], horizon: usize, variant: PersistenceVariant) -> Vec<f64> {
    let last = *window.last().expect("non-empty window");
    match variant {
        PersistenceVariant::Hold => vec![last; horizon],
        PersistenceVariant::Cycle => {
            let day = &window[window.len() - 24..];
            (0..horizon).map(|h| day[h % 24]).collect()
        }
    }
}

/// Hour-aligned mean of the two days in a 48-hour window.
pub fn historical_average_forecast(window: &[f64]) -> Vec<f64> {
    assert_eq!(window.len(), 48, "historical average needs a 48-hour window");
    (0..24).map(|h| (window[h] + window[h + 24]) / 2.0).collect()
}

fn check_len(window: &[f64], expected: usize) -> Result<(), ModelError> {
    if window.len() != expected {
        return Err(ModelError::InputLength {
            expected,
            got: window.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Persistence {
    pub variant: PersistenceVariant,
}

impl Forecaster for Persistence {
    fn label(&self) -> String {
        match self.variant {
            PersistenceVariant::Hold => "persistence".into(),
            PersistenceVariant::Cycle => "persistence_cycle".into(),
        }
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_len(window, crate::IN_LEN)?;
        Ok(persistence_forecast(window, OUT_LEN, self.variant))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HistoricalAverage;

impl Forecaster for HistoricalAverage {
    fn label(&self) -> String {
        "havg".into()
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_len(window, crate::IN_LEN)?;
        Ok(historical_average_forecast(window))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_repeats_last_value() {
        let mut w = vec![3.0; 48];
        w[47] = 17.0;
        assert_eq!(persistence_forecast(&w, 24, PersistenceVariant::Hold), vec![17.0; 24]);
    }

    #[test]
    fn variants_agree_on_constant_window() {
        let w = vec![4.5; 48];
        assert_eq!(
            persistence_forecast(&w, 24, PersistenceVariant::Hold),
            persistence_forecast(&w, 24, PersistenceVariant::Cycle)
        );
    }

    #[test]
    fn cycle_continues_a_daily_sine_exactly() {
        let f = |t: usize| 5.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin();
        let w: Vec<f64> = (0..48).map(f).collect();
        let fc = persistence_forecast(&w, 24, PersistenceVariant::Cycle);
        for (h, v) in fc.iter().enumerate() {
            assert!((v - f(48 + h)).abs() < 1e-12);
        }
    }

    #[test]
    fn historical_average_of_two_days() {
        let mut w = vec![0.0; 24];
        w.extend(vec![10.0; 24]);
        assert_eq!(historical_average_forecast(&w), vec![5.0; 24]);
        let day: Vec<f64> = (0..24).map(|h| h as f64 * 0.3).collect();
        let same = [day.clone(), day.clone()].concat();
        assert_eq!(historical_average_forecast(&same), day);
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        assert!(matches!(
            HistoricalAverage.forecast(&[1.0; 47]),
            Err(ModelError::InputLength { expected: 48, got: 47 })
        ));
    }
}
