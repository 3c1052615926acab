//! Experiment drivers. Each fixes the paired test set first, then trains and
//! scores every arm on exactly that set.
//!
//! Test stations are the IoT cells passing the base missing-ratio threshold;
//! their preprocessed series supply both the test inputs and the truth, for
//! every arm and every sweep threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::tables::{
    self, comparison_row, extreme_day_report, sensitivity_row, spatial_error_table, ComparisonRow,
    ExtremeDayReport, SensitivityRow, SpatialRow,
};
use super::{evaluate_model, evaluate_per_station, EvalError, ForecastReport, HorizonProfile};
use crate::baselines::arima::{arima_auto, ArimaForecaster};
use crate::baselines::{train_fnn, FnnModel, Forecaster, HistoricalAverage, Persistence};
use crate::data::{
    exclude_overlapping, files, format_timestamp, make_windows, parse_timestamp, preprocess, select_test_windows,
    split_train_val, Dataset, GridIndex, PreprocessOptions, Preprocessed, Sample, TestWindow,
};
use crate::kv::{KvError, KvMap};
use crate::lstm::config::CONFIG_KEYS;
use crate::lstm::{save_checkpoint, train_lstm, LstmModel, ModelConfig, TrainHistory};
use crate::rng::SeedTree;

/// Missing-ratio thresholds of the sensitivity sweep.
pub const SWEEP_THRESHOLDS: [f64; 10] = [0.055, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];

/// Which datasets feed a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Recipe {
    Iot,
    IotHistory,
}

impl Recipe {
    /// File-name friendly form.
    pub fn slug(self) -> &'static str {
        match self {
            Recipe::Iot => "iot",
            Recipe::IotHistory => "iot_history",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recipe::Iot => "iot",
            Recipe::IotHistory => "iot+history",
        })
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iot" => Ok(Recipe::Iot),
            "iot+history" | "iot_history" => Ok(Recipe::IotHistory),
            other => Err(format!("unknown recipe {other:?} (expected iot or iot+history)")),
        }
    }
}

/// What the ARIMA baseline is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArimaFit {
    /// A fresh order search on each 48-hour input.
    Window,
    /// One model per station from the hours before its first test window.
    History,
}

impl fmt::Display for ArimaFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArimaFit::Window => "window",
            ArimaFit::History => "history",
        })
    }
}

impl FromStr for ArimaFit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "window" => Ok(ArimaFit::Window),
            "history" => Ok(ArimaFit::History),
            other => Err(format!("unknown arima_fit {other:?} (expected window or history)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Base missing-ratio threshold; fixes the test stations.
    pub threshold: f64,
    pub thresholds: Vec<f64>,
    pub neighbors: usize,
    pub spatial_average: bool,
    /// Hours between consecutive IoT training windows.
    pub stride: usize,
    /// Hours between consecutive station-history training windows.
    pub history_stride: usize,
    pub test_days: usize,
    /// Days forced into the test set.
    pub required_days: Vec<NaiveDate>,
    pub flag_rmse: f64,
    pub arima_fit: ArimaFit,
    pub arima_history_hours: usize,
    /// One model per test station instead of one pooled model.
    pub per_station: bool,
    /// Recipes trained by the sensitivity sweep.
    pub recipes: Vec<Recipe>,
    pub fnn_recipe: Recipe,
    pub extreme_recipe: Recipe,
    pub lstm: ModelConfig,
    pub fnn: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threshold: 0.055,
            thresholds: SWEEP_THRESHOLDS.to_vec(),
            neighbors: 20,
            spatial_average: true,
            stride: 1,
            history_stride: 1,
            test_days: 27,
            required_days: Vec::new(),
            flag_rmse: tables::DEFAULT_FLAG_RMSE,
            arima_fit: ArimaFit::Window,
            arima_history_hours: 720,
            per_station: false,
            recipes: vec![Recipe::Iot, Recipe::IotHistory],
            fnn_recipe: Recipe::Iot,
            extreme_recipe: Recipe::IotHistory,
            lstm: ModelConfig::default(),
            fnn: ModelConfig::default(),
        }
    }
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "seed",
    "threshold",
    "thresholds",
    "neighbors",
    "spatial_average",
    "stride",
    "history_stride",
    "test_days",
    "required_days",
    "flag_rmse",
    "arima_fit",
    "arima_history_hours",
    "per_station",
    "recipes",
    "fnn_recipe",
    "extreme_recipe",
];

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, KvError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|e: T::Err| KvError::Value {
                key: key.into(),
                value: s.into(),
                reason: e.to_string(),
            })
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies top-level keys plus `lstm.*` and `fnn.*` model sections.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<(), KvError> {
        let top = kv.top_level();
        top.check_keys(EXPERIMENT_KEYS)?;
        if let Some(k) = kv
            .keys()
            .find(|k| k.contains('.') && !k.starts_with("lstm.") && !k.starts_with("fnn."))
        {
            return Err(KvError::UnknownKey(k.to_string()));
        }
        self.seed = top.get_or("seed", self.seed)?;
        self.threshold = top.get_or("threshold", self.threshold)?;
        if let Some(v) = top.get_str("thresholds") {
            self.thresholds = parse_list("thresholds", v)?;
        }
        self.neighbors = top.get_or("neighbors", self.neighbors)?;
        self.spatial_average = top.get_or("spatial_average", self.spatial_average)?;
        self.stride = top.get_or("stride", self.stride)?;
        self.history_stride = top.get_or("history_stride", self.history_stride)?;
        self.test_days = top.get_or("test_days", self.test_days)?;
        if let Some(v) = top.get_str("required_days") {
            self.required_days = parse_list("required_days", v)?;
        }
        self.flag_rmse = top.get_or("flag_rmse", self.flag_rmse)?;
        self.arima_fit = top.get_or("arima_fit", self.arima_fit)?;
        self.arima_history_hours = top.get_or("arima_history_hours", self.arima_history_hours)?;
        self.per_station = top.get_or("per_station", self.per_station)?;
        if let Some(v) = top.get_str("recipes") {
            self.recipes = parse_list("recipes", v)?;
        }
        self.fnn_recipe = top.get_or("fnn_recipe", self.fnn_recipe)?;
        self.extreme_recipe = top.get_or("extreme_recipe", self.extreme_recipe)?;
        for (name, model) in [("lstm", &mut self.lstm), ("fnn", &mut self.fnn)] {
            let section = kv.section(name);
            section.check_keys(CONFIG_KEYS)?;
            model.apply_kv(&section)?;
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self, KvError> {
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("seed", self.seed);
        kv.insert("threshold", self.threshold);
        kv.insert("thresholds", join(&self.thresholds));
        kv.insert("neighbors", self.neighbors);
        kv.insert("spatial_average", self.spatial_average);
        kv.insert("stride", self.stride);
        kv.insert("history_stride", self.history_stride);
        kv.insert("test_days", self.test_days);
        kv.insert("required_days", join(&self.required_days));
        kv.insert("flag_rmse", self.flag_rmse);
        kv.insert("arima_fit", self.arima_fit);
        kv.insert("arima_history_hours", self.arima_history_hours);
        kv.insert("per_station", self.per_station);
        kv.insert("recipes", join(&self.recipes));
        kv.insert("fnn_recipe", self.fnn_recipe);
        kv.insert("extreme_recipe", self.extreme_recipe);
        for (name, model) in [("lstm", &self.lstm), ("fnn", &self.fnn)] {
            let m = model.to_kv();
            for k in m.keys() {
                kv.insert(format!("{name}.{k}"), m.get_str(k).expect("key present"));
            }
        }
        kv
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.threshold) || self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("thresholds must lie in [0, 1]");
        }
        if self.stride == 0 || self.history_stride == 0 {
            return bad("strides must be >= 1");
        }
        if self.recipes.is_empty() {
            return bad("at least one recipe is needed");
        }
        if self.lstm.in_len != crate::IN_LEN || self.lstm.out_len != crate::OUT_LEN {
            return bad("experiments use 48-hour inputs and 24-hour targets");
        }
        if self.fnn.in_len != crate::IN_LEN || self.fnn.out_len != crate::OUT_LEN {
            return bad("experiments use 48-hour inputs and 24-hour targets");
        }
        self.lstm.validate().map_err(EvalError::Config)?;
        self.fnn.validate().map_err(EvalError::Config)
    }

    fn preprocess_options(&self, threshold: f64) -> PreprocessOptions {
        PreprocessOptions {
            threshold,
            neighbors: self.neighbors,
            spatial_average: self.spatial_average,
        }
    }
}

/// Raw inputs as emitted by the generator.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub iot: Dataset,
    pub history: Dataset,
    pub grid: GridIndex,
}

fn open(path: &Path) -> Result<BufReader<File>, EvalError> {
    File::open(path).map(BufReader::new).map_err(|e| {
        EvalError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

impl ExperimentData {
    pub fn load(dir: &Path) -> Result<Self, EvalError> {
        Ok(Self {
            iot: Dataset::from_csv(open(&dir.join(files::IOT_CSV))?)?,
            history: Dataset::from_csv(open(&dir.join(files::STATIONS_CSV))?)?,
            grid: GridIndex::from_csv(open(&dir.join(files::GRID_CSV))?)?,
        })
    }
}

/// The paired test protocol shared by every arm of an experiment.
#[derive(Debug, Clone)]
pub struct TestSet {
    /// Base-threshold preprocessed series of the test stations.
    pub base: Dataset,
    pub days: Vec<NaiveDate>,
    pub windows: Vec<TestWindow>,
}

pub fn fix_test_set(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<TestSet, EvalError> {
    let pre = preprocess(&data.iot, &data.grid, &cfg.preprocess_options(cfg.threshold))?;
    let windows = select_test_windows(
        &pre.dataset,
        crate::IN_LEN,
        crate::OUT_LEN,
        cfg.test_days,
        &cfg.required_days,
        SeedTree::new(cfg.seed).child("test-days", 0),
    )?;
    let days: BTreeSet<NaiveDate> = windows.iter().map(|w| w.day).collect();
    log::info!(
        "test set: {} stations x {} days at threshold {}",
        pre.dataset.len(),
        days.len(),
        cfg.threshold
    );
    Ok(TestSet {
        base: pre.dataset,
        days: days.into_iter().collect(),
        windows,
    })
}

pub fn write_test_windows<W: Write>(windows: &[TestWindow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "station_id,t0,day")?;
    for t in windows {
        writeln!(w, "{},{},{}", t.station_id, format_timestamp(t.t0), t.day)?;
    }
    Ok(())
}

pub fn read_test_windows<R: Read>(reader: R) -> Result<Vec<TestWindow>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |m: String| EvalError::Config(format!("test windows line {line}: {m}"));
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", rec.len())));
        }
        out.push(TestWindow {
            station_id: rec[0].to_string(),
            t0: parse_timestamp(&rec[1]).map_err(bad)?,
            day: rec[2].parse().map_err(|e: chrono::ParseError| bad(e.to_string()))?,
        });
    }
    Ok(out)
}

/// Training windows of every series, minus those overlapping a test window.
pub fn training_samples(dataset: &Dataset, stride: usize, tests: &[TestWindow]) -> Vec<Sample> {
    let all: Vec<Sample> = dataset
        .iter()
        .flat_map(|s| make_windows(s, crate::IN_LEN, crate::OUT_LEN, stride))
        .collect();
    exclude_overlapping(all, tests, crate::IN_LEN + crate::OUT_LEN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmKind {
    Lstm,
    Fnn,
}

impl ArmKind {
    fn tag(self) -> &'static str {
        match self {
            ArmKind::Lstm => "lstm",
            ArmKind::Fnn => "fnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub kind: ArmKind,
    pub recipe: Recipe,
}

impl ArmSpec {
    pub fn label(&self) -> String {
        match self.kind {
            ArmKind::Lstm => format!("lstm_{}", self.recipe.slug()),
            ArmKind::Fnn => "fnn".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Lstm(LstmModel),
    Fnn(FnnModel),
}

impl TrainedModel {
    pub fn forecaster(&self) -> &dyn Forecaster {
        match self {
            TrainedModel::Lstm(m) => m,
            TrainedModel::Fnn(m) => m,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        match self {
            TrainedModel::Lstm(m) => save_checkpoint(m, path)?,
            TrainedModel::Fnn(m) => save_checkpoint(m, path)?,
        }
        Ok(())
    }
}

/// A trained arm: one pooled model, or one model per test station.
#[derive(Debug, Clone)]
pub struct TrainedArm {
    pub spec: ArmSpec,
    pub models: Vec<(Option<String>, TrainedModel, TrainHistory)>,
}

impl TrainedArm {
    pub fn evaluate(&self, tests: &TestSet) -> Result<Vec<ForecastReport>, EvalError> {
        let label = self.spec.label();
        match self.models.as_slice() {
            [(None, model, _)] => {
                let mut reports = evaluate_model(model.forecaster(), &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN)?;
                reports.iter_mut().for_each(|r| r.model = label.clone());
                Ok(reports)
            }
            models => {
                let map: BTreeMap<String, &dyn Forecaster> = models
                    .iter()
                    .map(|(s, m, _)| (s.clone().unwrap_or_default(), m.forecaster()))
                    .collect();
                evaluate_per_station(&label, &map, &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN)
            }
        }
    }

    /// Writes `<label>.ckpt` and `<label>_history.csv` (suffixed by station in per-station mode).
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
        let mut written = Vec::new();
        for (station, model, history) in &self.models {
            let stem = match station {
                None => self.spec.label(),
                Some(s) => format!("{}-{s}", self.spec.label()),
            };
            let ckpt = dir.join(format!("{stem}.ckpt"));
            model.save(&ckpt)?;
            let hist = dir.join(format!("{stem}_history.csv"));
            history.write_csv(BufWriter::new(File::create(&hist)?))?;
            written.extend([ckpt, hist]);
        }
        Ok(written)
    }
}

fn station_count(samples: &[&Sample]) -> usize {
    samples.iter().map(|s| s.station_id.as_str()).collect::<BTreeSet<_>>().len()
}

fn fit_one(
    spec: &ArmSpec,
    samples: &[&Sample],
    cfg: &ExperimentConfig,
    group: u64,
) -> Result<(TrainedModel, TrainHistory), EvalError> {
    let tree = SeedTree::new(cfg.seed);
    let label = format!("{}-{}", spec.kind.tag(), spec.recipe);
    let owned: Vec<Sample> = samples.iter().map(|&s| s.clone()).collect();
    let mut model_cfg = match spec.kind {
        ArmKind::Lstm => cfg.lstm.clone(),
        ArmKind::Fnn => cfg.fnn.clone(),
    };
    model_cfg.seed = tree.child(&format!("{label}-init"), group);
    let (train, val) = split_train_val(&owned, model_cfg.train_fraction, tree.child(&format!("{label}-split"), group));
    let n_stations = station_count(samples);
    log::info!(
        "training {label}: {} samples from {n_stations} series",
        owned.len()
    );
    Ok(match spec.kind {
        ArmKind::Lstm => {
            let (m, h) = train_lstm(&train, &val, &model_cfg, n_stations)?;
            (TrainedModel::Lstm(m), h)
        }
        ArmKind::Fnn => {
            let (m, h) = train_fnn(&train, &val, &model_cfg, n_stations)?;
            (TrainedModel::Fnn(m), h)
        }
    })
}

/// Trains one arm on IoT samples, plus station history for [`Recipe::IotHistory`].
pub fn train_arm(
    spec: ArmSpec,
    iot: &[Sample],
    history: &[Sample],
    test_stations: &[String],
    cfg: &ExperimentConfig,
) -> Result<TrainedArm, EvalError> {
    let extra: Vec<&Sample> = match spec.recipe {
        Recipe::Iot => Vec::new(),
        Recipe::IotHistory => history.iter().collect(),
    };
    let models = if cfg.per_station {
        test_stations
            .par_iter()
            .enumerate()
            .map(|(i, station)| {
                let mut samples: Vec<&Sample> = iot.iter().filter(|s| &s.station_id == station).collect();
                samples.extend(&extra);
                let (m, h) = fit_one(&spec, &samples, cfg, i as u64)?;
                Ok((Some(station.clone()), m, h))
            })
            .collect::<Result<Vec<_>, EvalError>>()?
    } else {
        let mut samples: Vec<&Sample> = iot.iter().collect();
        samples.extend(&extra);
        let (m, h) = fit_one(&spec, &samples, cfg, 0)?;
        vec![(None, m, h)]
    };
    Ok(TrainedArm { spec, models })
}

fn arima_history_forecasters(
    tests: &TestSet,
    cfg: &ExperimentConfig,
) -> Result<BTreeMap<String, ArimaForecaster>, EvalError> {
    let mut out = BTreeMap::new();
    for series in tests.base.iter() {
        let first_test = tests
            .windows
            .iter()
            .filter(|w| w.station_id == series.station_id)
            .map(|w| w.t0)
            .min();
        let end = first_test
            .and_then(|t| series.index_of(t))
            .unwrap_or(series.len());
        let start = end.saturating_sub(cfg.arima_history_hours);
        let fixed = series
            .dense_range(series.timestamp(start), end - start)
            .filter(|v| v.len() >= 11)
            .map(|v| arima_auto(&v))
            .transpose()
            .map_err(crate::lstm::ModelError::from)?;
        if fixed.is_none() {
            log::warn!("{}: no history before the first test window; ARIMA fits per window", series.station_id);
        }
        out.insert(series.station_id.clone(), ArimaForecaster { fixed });
    }
    Ok(out)
}

fn evaluate_arima(tests: &TestSet, cfg: &ExperimentConfig) -> Result<Vec<ForecastReport>, EvalError> {
    match cfg.arima_fit {
        ArimaFit::Window => evaluate_model(&ArimaForecaster::default(), &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN),
        ArimaFit::History => {
            let models = arima_history_forecasters(tests, cfg)?;
            let map: BTreeMap<String, &dyn Forecaster> =
                models.iter().map(|(k, v)| (k.clone(), v as &dyn Forecaster)).collect();
            evaluate_per_station("arima", &map, &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN)
        }
    }
}

fn metadata(cfg: &ExperimentConfig, experiment: &str, tests: &TestSet) -> KvMap {
    let mut kv = cfg.to_kv();
    kv.insert("experiment", experiment);
    kv.insert("training_mode", if cfg.per_station { "per_station" } else { "pooled" });
    kv.insert("station_aggregation", "station_first");
    kv.insert("horizon_rmse", "pooled");
    kv.insert("test_stations", tests.base.len());
    kv.insert("test_days_selected", join(&tests.days));
    kv
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf, EvalError> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn common_outputs(dir: &Path, cfg: &ExperimentConfig, name: &str, tests: &TestSet) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir)?;
    Ok(vec![
        write_file(dir, "experiment.cfg", |w| write!(w, "{}", metadata(cfg, name, tests)))?,
        write_file(dir, files::TEST_WINDOWS_CSV, |w| write_test_windows(&tests.windows, w))?,
    ])
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub tests: TestSet,
    pub rows: Vec<ComparisonRow>,
    pub profiles: Vec<(String, HorizonProfile)>,
    pub reports: Vec<ForecastReport>,
    /// Per-station errors of the iot+history LSTM.
    pub spatial: Vec<SpatialRow>,
    pub arms: Vec<TrainedArm>,
}

impl ComparisonOutcome {
    pub fn reports_for(&self, model: &str) -> Vec<ForecastReport> {
        self.reports.iter().filter(|r| r.model == model).cloned().collect()
    }

    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn profile(&self, model: &str) -> Option<&HorizonProfile> {
        self.profiles.iter().find(|(m, _)| m == model).map(|(_, p)| p)
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, EvalError> {
        let mut out = common_outputs(dir, cfg, "comparison", &self.tests)?;
        out.push(write_file(dir, "comparison.csv", |w| tables::write_comparison_csv(&self.rows, w))?);
        out.push(write_file(dir, "horizon.csv", |w| tables::write_horizon_csv(&self.profiles, w))?);
        out.push(write_file(dir, "spatial.csv", |w| tables::write_spatial_csv(&self.spatial, w))?);
        out.push(write_file(dir, "reports.csv", |w| tables::write_reports_csv(&self.reports, w))?);
        for arm in &self.arms {
            out.extend(arm.write(dir)?);
        }
        Ok(out)
    }
}

/// All six predictors on one paired test set.
pub fn run_comparison(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<ComparisonOutcome, EvalError> {
    cfg.validate()?;
    let tests = fix_test_set(data, cfg)?;
    let stations: Vec<String> = tests.base.station_ids().map(str::to_string).collect();
    let iot = training_samples(&tests.base, cfg.stride, &tests.windows);
    let history = training_samples(&data.history, cfg.history_stride, &tests.windows);

    let specs = vec![
        ArmSpec { kind: ArmKind::Fnn, recipe: cfg.fnn_recipe },
        ArmSpec { kind: ArmKind::Lstm, recipe: Recipe::Iot },
        ArmSpec { kind: ArmKind::Lstm, recipe: Recipe::IotHistory },
    ];
    let arms: Vec<TrainedArm> = specs
        .into_par_iter()
        .map(|spec| train_arm(spec, &iot, &history, &stations, cfg))
        .collect::<Result<_, _>>()?;

    let mut per_model: Vec<(String, Vec<ForecastReport>)> = vec![
        ("persistence".into(), evaluate_model(&Persistence::default(), &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN)?),
        ("havg".into(), evaluate_model(&HistoricalAverage, &tests.windows, &tests.base, crate::IN_LEN, crate::OUT_LEN)?),
        ("arima".into(), evaluate_arima(&tests, cfg)?),
    ];
    for arm in &arms {
        per_model.push((arm.spec.label(), arm.evaluate(&tests)?));
    }

    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    for (model, reports) in &per_model {
        rows.push(comparison_row(model, reports)?);
        profiles.push((model.clone(), HorizonProfile::from_reports(reports)?));
    }
    let headline = &per_model.last().expect("six models").1;
    let spatial = spatial_error_table(headline, &data.grid)?;
    Ok(ComparisonOutcome {
        tests,
        rows,
        profiles,
        reports: per_model.into_iter().flat_map(|(_, r)| r).collect(),
        spatial,
        arms,
    })
}

#[derive(Debug, Clone)]
pub struct SensitivityOutcome {
    pub tests: TestSet,
    pub rows: Vec<SensitivityRow>,
    /// Stations retained at each threshold.
    pub stations: Vec<(f64, usize)>,
}

impl SensitivityOutcome {
    pub fn rmse(&self, threshold: f64, recipe: Recipe) -> Option<f64> {
        let name = recipe.to_string();
        self.rows
            .iter()
            .find(|r| r.threshold == threshold && r.recipe == name)
            .map(|r| r.rmse_mean)
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, EvalError> {
        let mut out = common_outputs(dir, cfg, "sensitivity", &self.tests)?;
        out.push(write_file(dir, "sensitivity.csv", |w| tables::write_sensitivity_csv(&self.rows, w))?);
        out.push(write_file(dir, "sensitivity_stations.csv", |w| {
            writeln!(w, "threshold,stations")?;
            for (t, n) in &self.stations {
                writeln!(w, "{t},{n}")?;
            }
            Ok(())
        })?);
        Ok(out)
    }
}

/// LSTM arms retrained at each missing-ratio threshold, scored on the fixed
/// base-threshold test set. Thresholds retaining the same stations as an
/// earlier one reuse its results, which are identical by construction.
pub fn run_sensitivity(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<SensitivityOutcome, EvalError> {
    cfg.validate()?;
    let tests = fix_test_set(data, cfg)?;
    let history = training_samples(&data.history, cfg.history_stride, &tests.windows);
    let mut cache: BTreeMap<BTreeSet<String>, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut stations = Vec::new();
    for &threshold in &cfg.thresholds {
        let Preprocessed { dataset, .. } = preprocess(&data.iot, &data.grid, &cfg.preprocess_options(threshold))?;
        let retained: BTreeSet<String> = dataset.station_ids().map(str::to_string).collect();
        stations.push((threshold, retained.len()));
        let scores = match cache.get(&retained) {
            Some(s) => s.clone(),
            None => {
                let iot = training_samples(&dataset, cfg.stride, &tests.windows);
                let scores: Vec<(f64, f64)> = cfg
                    .recipes
                    .par_iter()
                    .map(|&recipe| {
                        let arm = train_arm(ArmSpec { kind: ArmKind::Lstm, recipe }, &iot, &history, &[], &ExperimentConfig { per_station: false, ..cfg.clone() })?;
                        let row = sensitivity_row(threshold, &recipe.to_string(), &arm.evaluate(&tests)?)?;
                        Ok((row.rmse_mean, row.bias_mean))
                    })
                    .collect::<Result<_, EvalError>>()?;
                cache.insert(retained, scores.clone());
                scores
            }
        };
        for (recipe, (rmse_mean, bias_mean)) in cfg.recipes.iter().zip(scores) {
            rows.push(SensitivityRow {
                threshold,
                recipe: recipe.to_string(),
                rmse_mean,
                bias_mean,
            });
        }
    }
    Ok(SensitivityOutcome { tests, rows, stations })
}

#[derive(Debug, Clone)]
pub struct ExtremeOutcome {
    pub tests: TestSet,
    pub report: ExtremeDayReport,
    pub reports: Vec<ForecastReport>,
    pub arm: TrainedArm,
}

impl ExtremeOutcome {
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, EvalError> {
        let mut out = common_outputs(dir, cfg, "extreme", &self.tests)?;
        out.push(write_file(dir, "extreme_days.csv", |w| tables::write_extreme_days_csv(&self.report, w))?);
        out.push(write_file(dir, "extreme_histogram.csv", |w| tables::write_histogram_csv(&self.report, w))?);
        out.push(write_file(dir, "reports.csv", |w| tables::write_reports_csv(&self.reports, w))?);
        out.extend(self.arm.write(dir)?);
        Ok(out)
    }
}

/// Per-day error distribution of one LSTM arm, with badly forecast days flagged.
pub fn run_extreme(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<ExtremeOutcome, EvalError> {
    cfg.validate()?;
    let tests = fix_test_set(data, cfg)?;
    let stations: Vec<String> = tests.base.station_ids().map(str::to_string).collect();
    let iot = training_samples(&tests.base, cfg.stride, &tests.windows);
    let history = training_samples(&data.history, cfg.history_stride, &tests.windows);
    let arm = train_arm(
        ArmSpec { kind: ArmKind::Lstm, recipe: cfg.extreme_recipe },
        &iot,
        &history,
        &stations,
        cfg,
    )?;
    let reports = arm.evaluate(&tests)?;
    let report = extreme_day_report(&reports, tables::DEFAULT_BIN_WIDTH, cfg.flag_rmse);
    Ok(ExtremeOutcome {
        tests,
        report,
        reports,
        arm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_kv() {
        let mut cfg = ExperimentConfig::default();
        cfg.lstm.hidden = 17;
        cfg.fnn.max_epochs = 9;
        cfg.required_days = vec![NaiveDate::from_ymd_opt(2019, 7, 4).unwrap()];
        cfg.recipes = vec![Recipe::Iot];
        let kv = cfg.to_kv();
        assert_eq!(ExperimentConfig::from_kv(&kv).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let kv = KvMap::parse("lstm.hiden = 3").unwrap();
        assert!(ExperimentConfig::from_kv(&kv).is_err());
        let kv = KvMap::parse("strides = 3").unwrap();
        assert!(ExperimentConfig::from_kv(&kv).is_err());
        let kv = KvMap::parse("model.hidden = 3").unwrap();
        assert!(ExperimentConfig::from_kv(&kv).is_err());
    }

    #[test]
    fn sweep_has_ten_thresholds() {
        assert_eq!(SWEEP_THRESHOLDS.len(), 10);
        assert_eq!(SWEEP_THRESHOLDS[0], 0.055);
        assert_eq!(SWEEP_THRESHOLDS[9], 0.50);
    }

    #[test]
    fn recipe_names() {
        assert_eq!("iot+history".parse::<Recipe>().unwrap(), Recipe::IotHistory);
        assert_eq!(Recipe::IotHistory.to_string(), "iot+history");
        assert!("both".parse::<Recipe>().is_err());
    }
}
