use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Duration;
use clap::{Parser, Subcommand, ValueEnum};
use urbantemp::baselines::{ArimaForecaster, Forecaster, HistoricalAverage, Persistence, PersistenceVariant};
use urbantemp::data::{
    files, format_timestamp, make_windows, preprocess, read_samples_csv, select_test_windows, split_train_val,
    write_samples_csv, Dataset, GridIndex, PreprocessOptions, Sample,
};
use urbantemp::eval::experiment::{read_test_windows, run_comparison, run_extreme, run_sensitivity, write_test_windows};
use urbantemp::eval::{comparison_row, evaluate_model, tables, ExperimentConfig, ExperimentData, HorizonProfile, Recipe};
use urbantemp::kv::KvMap;
use urbantemp::lstm::config::CONFIG_KEYS;
use urbantemp::lstm::{load_checkpoint, save_checkpoint, train_lstm, ModelConfig, ModelError, SavedModel, TrainHistory};
use urbantemp::rng::SeedTree;
use urbantemp::synth::{emit_datasets, WeatherScenario};
use urbantemp::{baselines, IN_LEN, OUT_LEN};

mod manifest;

use manifest::Manifest;

const SERIES_CSV: &str = "series.csv";
const SAMPLES_CSV: &str = "samples.csv";

#[derive(Parser, Debug)]
#[command(name = "urbantemp", version, about = "Day-ahead urban air-temperature forecasting")]
struct Cli {
    /// Root seed; every random stream of the run derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic city from a scenario file.
    Synth {
        /// Scenario file; the built-in defaults when omitted.
        scenario: Option<PathBuf>,
    },
    /// Filter, interpolate and spatially average raw series, then window them.
    Preprocess {
        /// Directory holding the generator's CSVs.
        #[arg(long)]
        data: PathBuf,
        /// Maximum missing ratio kept.
        #[arg(long, default_value_t = 0.055)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Source::Iot)]
        source: Source,
        /// Hours between consecutive windows.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 20)]
        neighbors: usize,
    },
    /// Train an LSTM or FNN on one or two sample stores.
    Train {
        /// Preprocessed IoT store.
        #[arg(long)]
        iot: PathBuf,
        /// Preprocessed station store, required by the iot+history recipe.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Kind::Lstm)]
        model: Kind,
        #[arg(long, default_value = "iot")]
        recipe: Recipe,
    },
    /// Forecast 24 hours from a 48-hour window CSV.
    Predict {
        /// Checkpoint path, or one of persistence, persistence_cycle, havg, arima.
        #[arg(long)]
        model: String,
        /// `station_id,timestamp,temp_c` rows covering 48 consecutive hours.
        #[arg(long)]
        input: PathBuf,
    },
    /// Score a model on held-out days of a preprocessed store.
    Evaluate {
        /// Checkpoint path, or one of persistence, persistence_cycle, havg, arima.
        #[arg(long)]
        model: String,
        #[arg(long)]
        store: PathBuf,
        /// Test windows CSV; drawn from the store when omitted.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(long, default_value_t = 27)]
        test_days: usize,
    },
    /// Run one of the evaluation experiments on a generated data directory.
    Experiment {
        name: ExperimentName,
        #[arg(long)]
        data: PathBuf,
        /// Base missing-ratio threshold (fixes the test stations).
        #[arg(long)]
        threshold: Option<f64>,
        /// Recipe for the sensitivity sweep or the extreme-day model.
        #[arg(long)]
        recipe: Option<Recipe>,
        /// Train one model per test station instead of one pooled model.
        #[arg(long)]
        per_station: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Iot,
    Stations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Lstm,
    Fnn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentName {
    Comparison,
    Sensitivity,
    Extreme,
}

/// Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn existing(path: &Path, what: &str) -> Outcome<()> {
    if path.exists() {
        Ok(())
    } else {
        usage(format!("{what} not found: {}", path.display()))
    }
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    existing(path, "file")?;
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_config(path: Option<&Path>) -> Outcome<KvMap> {
    let Some(path) = path else {
        return Ok(KvMap::new());
    };
    existing(path, "config file")?;
    KvMap::parse(&fs::read_to_string(path)?).or_else(|e| usage(format!("{}: {e}", path.display())))
}

impl Cli {
    fn out_dir(&self) -> Outcome<PathBuf> {
        let Some(dir) = &self.out else {
            return usage("--out <dir> is required");
        };
        fs::create_dir_all(dir)?;
        Ok(dir.clone())
    }
}

fn cmd_synth(cli: &Cli, scenario: Option<&Path>) -> Outcome {
    let mut m = Manifest::new("synth");
    let mut scen = match scenario {
        Some(path) => {
            existing(path, "scenario file")?;
            m.input(path);
            WeatherScenario::load(path).or_else(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => WeatherScenario::default(),
    };
    if let Some(seed) = cli.seed {
        scen.seed = seed;
    }
    let out = cli.out_dir()?;
    m.seed(scen.seed);
    m.config(scen.to_kv());
    let written = emit_datasets(&scen, &out)?;
    m.lap("generate");
    m.outputs(written);
    m.write(&out)?;
    Ok(())
}

fn cmd_preprocess(cli: &Cli, data: &Path, threshold: f64, source: Source, stride: usize, neighbors: usize) -> Outcome {
    if !(0.0..=1.0).contains(&threshold) {
        return usage(format!("--threshold must lie in [0, 1], got {threshold}"));
    }
    if stride == 0 {
        return usage("--stride must be >= 1");
    }
    existing(data, "data directory")?;
    let out = cli.out_dir()?;
    let mut m = Manifest::new("preprocess");
    let raw_name = match source {
        Source::Iot => files::IOT_CSV,
        Source::Stations => files::STATIONS_CSV,
    };
    let raw_path = data.join(raw_name);
    let grid_path = data.join(files::GRID_CSV);
    let raw = Dataset::from_csv(open(&raw_path)?)?;
    let grid = GridIndex::from_csv(open(&grid_path)?)?;
    m.input(&raw_path);
    m.input(&grid_path);
    m.lap("read");
    let opts = PreprocessOptions {
        threshold,
        neighbors,
        spatial_average: matches!(source, Source::Iot),
    };
    let pre = preprocess(&raw, &grid, &opts)?;
    log::info!(
        "{raw_name}: {} series before filtering, {} after",
        pre.stations_before,
        pre.stations_after
    );
    m.stat("stations_before", pre.stations_before);
    m.stat("stations_after", pre.stations_after);
    let samples: Vec<Sample> = pre
        .dataset
        .iter()
        .flat_map(|s| make_windows(s, IN_LEN, OUT_LEN, stride))
        .collect();
    m.stat("samples", samples.len());
    m.lap("preprocess");

    let mut kv = KvMap::new();
    kv.insert("threshold", threshold);
    kv.insert("neighbors", neighbors);
    kv.insert("spatial_average", opts.spatial_average);
    kv.insert("stride", stride);
    kv.insert("source", format!("{source:?}").to_lowercase());
    m.config(kv);

    let series_path = out.join(SERIES_CSV);
    pre.dataset.write_csv(create(&series_path)?)?;
    let samples_path = out.join(SAMPLES_CSV);
    write_samples_csv(&samples, create(&samples_path)?)?;
    let grid_out = out.join(files::GRID_CSV);
    grid.write_csv(create(&grid_out)?)?;
    m.outputs([series_path, samples_path, grid_out]);
    m.lap("write");
    m.write(&out)?;
    Ok(())
}

fn read_store(dir: &Path) -> Outcome<Vec<Sample>> {
    existing(dir, "sample store")?;
    Ok(read_samples_csv(open(&dir.join(SAMPLES_CSV))?)?)
}

fn write_history(history: &TrainHistory, path: &Path) -> Outcome {
    let mut w = create(path)?;
    history.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_train(cli: &Cli, iot: &Path, history: Option<&Path>, kind: Kind, recipe: Recipe) -> Outcome {
    let kv = load_config(cli.config.as_deref())?;
    kv.check_keys(CONFIG_KEYS).or_else(|e| usage(e.to_string()))?;
    let mut config = ModelConfig::from_kv(&kv).or_else(|e| usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate().or_else(usage)?;
    let out = cli.out_dir()?;
    let mut m = Manifest::new("train");
    m.seed(config.seed);

    let mut samples = read_store(iot)?;
    m.input(iot.join(SAMPLES_CSV));
    match (recipe, history) {
        (Recipe::Iot, Some(_)) => log::warn!("--history is ignored by the iot recipe"),
        (Recipe::IotHistory, None) => return usage("recipe iot+history needs --history <store>"),
        (Recipe::IotHistory, Some(dir)) => {
            samples.extend(read_store(dir)?);
            m.input(dir.join(SAMPLES_CSV));
        }
        (Recipe::Iot, None) => {}
    }
    if samples.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no training samples")));
    }
    if samples.iter().any(|s| s.input.len() != config.in_len || s.target.len() != config.out_len) {
        return usage(format!(
            "store windows do not match in_len {} / out_len {}",
            config.in_len, config.out_len
        ));
    }
    let n_stations = samples.iter().map(|s| s.station_id.as_str()).collect::<BTreeSet<_>>().len();
    m.lap("read");

    let mut cfg_kv = config.to_kv();
    cfg_kv.insert("model", format!("{kind:?}").to_lowercase());
    cfg_kv.insert("recipe", recipe);
    cfg_kv.insert("batch_size_resolved", config.resolve_batch_size(samples.len(), n_stations));
    m.config(cfg_kv);
    m.stat("samples", samples.len());
    m.stat("stations", n_stations);

    let split_seed = SeedTree::new(config.seed).child("split", 0);
    let (train, val) = split_train_val(&samples, config.train_fraction, split_seed);
    let ckpt = out.join("model.ckpt");
    let hist_path = out.join("history.csv");
    let result = match kind {
        Kind::Lstm => train_lstm(&train, &val, &config, n_stations).map(|(model, h)| {
            (save_checkpoint(&model, &ckpt), h)
        }),
        Kind::Fnn => baselines::train_fnn(&train, &val, &config, n_stations).map(|(model, h)| {
            (save_checkpoint(&model, &ckpt), h)
        }),
    };
    m.lap("train");
    match result {
        Ok((saved, history)) => {
            saved?;
            write_history(&history, &hist_path)?;
            m.stat("epochs", history.epochs.len());
            m.stat("best_val_loss", history.best_val_loss);
            m.outputs([ckpt, hist_path]);
            m.write(&out)?;
            Ok(())
        }
        Err(ModelError::Diverged { epoch, history }) => {
            write_history(&history, &hist_path)?;
            m.outputs([hist_path]);
            m.stat("diverged_at_epoch", epoch);
            m.write(&out)?;
            Err(Failure::Runtime(anyhow::anyhow!("training diverged at epoch {epoch}")))
        }
        Err(e) => Err(e.into()),
    }
}

/// A baseline by name, or a checkpointed network.
enum Predictor {
    Baseline(Box<dyn Forecaster>),
    Saved(SavedModel),
}

impl Predictor {
    fn resolve(spec: &str) -> Outcome<(Self, Option<PathBuf>)> {
        let baseline: Option<Box<dyn Forecaster>> = match spec {
            "persistence" => Some(Box::new(Persistence::default())),
            "persistence_cycle" => Some(Box::new(Persistence {
                variant: PersistenceVariant::Cycle,
            })),
            "havg" => Some(Box::new(HistoricalAverage)),
            "arima" => Some(Box::new(ArimaForecaster::default())),
            _ => None,
        };
        if let Some(b) = baseline {
            return Ok((Predictor::Baseline(b), None));
        }
        let path = PathBuf::from(spec);
        if !path.is_file() {
            return usage(format!(
                "--model must be persistence, persistence_cycle, havg, arima or a checkpoint path; not found: {spec}"
            ));
        }
        Ok((Predictor::Saved(load_checkpoint(&path)?), Some(path)))
    }

    fn forecaster(&self) -> &dyn Forecaster {
        match self {
            Predictor::Baseline(b) => b.as_ref(),
            Predictor::Saved(SavedModel::Lstm(m)) => m,
            Predictor::Saved(SavedModel::Fnn(m)) => m,
        }
    }

    fn in_len(&self) -> usize {
        match self {
            Predictor::Baseline(_) => IN_LEN,
            Predictor::Saved(SavedModel::Lstm(m)) => m.config.in_len,
            Predictor::Saved(SavedModel::Fnn(m)) => m.config.in_len,
        }
    }
}

fn cmd_predict(cli: &Cli, model: &str, input: &Path) -> Outcome {
    let mut m = Manifest::new("predict");
    let (predictor, ckpt) = Predictor::resolve(model)?;
    if let Some(p) = ckpt {
        m.input(p);
    }
    let window = Dataset::from_csv(open(input)?).or_else(|e| usage(format!("{}: {e}", input.display())))?;
    m.input(input);
    let series = match window.iter().collect::<Vec<_>>().as_slice() {
        [one] => (*one).clone(),
        many => return usage(format!("window CSV must hold one station, found {}", many.len())),
    };
    let need = predictor.in_len();
    if series.len() != need {
        return usage(format!("window must cover {need} hours, got {}", series.len()));
    }
    let Some(values) = series.dense() else {
        return usage("window has missing hours");
    };
    let forecast = predictor.forecaster().forecast(&values)?;
    let mut text = String::from("station_id,timestamp,temp_c\n");
    for (h, v) in forecast.iter().enumerate() {
        let ts = series.end() + Duration::hours(h as i64);
        text.push_str(&format!("{},{},{v}\n", series.station_id, format_timestamp(ts)));
    }
    match &cli.out {
        None => print!("{text}"),
        Some(_) => {
            let out = cli.out_dir()?;
            let path = out.join("forecast.csv");
            fs::write(&path, text)?;
            let mut kv = KvMap::new();
            kv.insert("model", predictor.forecaster().label());
            m.config(kv);
            m.outputs([path]);
            m.write(&out)?;
        }
    }
    Ok(())
}

fn cmd_evaluate(cli: &Cli, model: &str, store: &Path, windows: Option<&Path>, test_days: usize) -> Outcome {
    let out = cli.out_dir()?;
    let mut m = Manifest::new("evaluate");
    let seed = cli.seed.unwrap_or(0);
    m.seed(seed);
    let (predictor, ckpt) = Predictor::resolve(model)?;
    if let Some(p) = ckpt {
        m.input(p);
    }
    existing(store, "store")?;
    let series_path = store.join(SERIES_CSV);
    let dataset = Dataset::from_csv(open(&series_path)?)?;
    m.input(&series_path);
    let tests = match windows {
        Some(path) => {
            m.input(path);
            read_test_windows(open(path)?)?
        }
        None => select_test_windows(
            &dataset,
            IN_LEN,
            OUT_LEN,
            test_days,
            &[],
            SeedTree::new(seed).child("test-days", 0),
        )?,
    };
    if tests.is_empty() {
        return usage("no test windows");
    }
    let label = predictor.forecaster().label();
    let reports = evaluate_model(predictor.forecaster(), &tests, &dataset, IN_LEN, OUT_LEN)?;
    m.lap("evaluate");
    let row = comparison_row(&label, &reports)?;
    let profile = HorizonProfile::from_reports(&reports)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Outcome {
        let path = out.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush()?;
        written.push(path);
        Ok(())
    };
    put("comparison.csv", &|w| tables::write_comparison_csv(std::slice::from_ref(&row), w))?;
    put("horizon.csv", &|w| tables::write_horizon_csv(&[(label.clone(), profile.clone())], w))?;
    put("reports.csv", &|w| tables::write_reports_csv(&reports, w))?;
    put(files::TEST_WINDOWS_CSV, &|w| write_test_windows(&tests, w))?;
    let mut kv = KvMap::new();
    kv.insert("model", &label);
    kv.insert("test_windows", tests.len());
    m.config(kv);
    m.stat("rmse_mean", row.rmse.1);
    m.stat("bias_mean", row.bias.1);
    m.outputs(written);
    m.write(&out)?;
    Ok(())
}

fn cmd_experiment(
    cli: &Cli,
    name: ExperimentName,
    data: &Path,
    threshold: Option<f64>,
    recipe: Option<Recipe>,
    per_station: bool,
) -> Outcome {
    let kv = load_config(cli.config.as_deref())?;
    let mut cfg = ExperimentConfig::from_kv(&kv).or_else(|e| usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = threshold {
        cfg.threshold = t;
    }
    cfg.per_station |= per_station;
    match (name, recipe) {
        (ExperimentName::Sensitivity, Some(r)) => cfg.recipes = vec![r],
        (ExperimentName::Extreme, Some(r)) => cfg.extreme_recipe = r,
        (ExperimentName::Comparison, Some(_)) => log::warn!("--recipe is ignored by the comparison experiment"),
        (_, None) => {}
    }
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    existing(data, "data directory")?;
    let out = cli.out_dir()?;
    let mut m = Manifest::new(&format!("experiment {}", format!("{name:?}").to_lowercase()));
    m.seed(cfg.seed);
    m.config(cfg.to_kv());
    for f in [files::IOT_CSV, files::STATIONS_CSV, files::GRID_CSV] {
        m.input(data.join(f));
    }
    let input = ExperimentData::load(data)?;
    m.lap("read");
    let written = match name {
        ExperimentName::Comparison => run_comparison(&input, &cfg)?.write(&out, &cfg)?,
        ExperimentName::Sensitivity => run_sensitivity(&input, &cfg)?.write(&out, &cfg)?,
        ExperimentName::Extreme => run_extreme(&input, &cfg)?.write(&out, &cfg)?,
    };
    m.lap("run");
    m.outputs(written);
    m.write(&out)?;
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return usage("--jobs must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Synth { scenario } => cmd_synth(cli, scenario.as_deref()),
        Command::Preprocess {
            data,
            threshold,
            source,
            stride,
            neighbors,
        } => cmd_preprocess(cli, data, *threshold, *source, *stride, *neighbors),
        Command::Train {
            iot,
            history,
            model,
            recipe,
        } => cmd_train(cli, iot, history.as_deref(), *model, *recipe),
        Command::Predict { model, input } => cmd_predict(cli, model, input),
        Command::Evaluate {
            model,
            store,
            windows,
            test_days,
        } => cmd_evaluate(cli, model, store, windows.as_deref(), *test_days),
        Command::Experiment {
            name,
            data,
            threshold,
            recipe,
            per_station,
        } => cmd_experiment(cli, *name, data, *threshold, *recipe, *per_station),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("URBANTEMP_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
