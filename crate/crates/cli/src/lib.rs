//! Command implementations behind the `fpsim` binary.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use fusion_pollination::control::{regions_csv, synthetic_regions, train_softmax, Classifier};
use fusion_pollination::foraging::{run_season, SeasonRecord, SeasonSetup};
use fusion_pollination::landscape::{derive_patches, foodflow_csv, parse_map, CellGrid, LandscapeError, DESK_MAP};
use fusion_pollination::metrics::ComparisonReport;
use fusion_pollination::monitor::{self, MonitorSample};
use fusion_pollination::rng::{derive_seed, TAG_WEATHER};
use fusion_pollination::supervisor::{run_fi_loop, FiInputs, SupervisorError};
use fusion_pollination::weather::{load_weather, synth_weather, WeatherError, WeatherSeries};

use config::{ClassifierChoice, MapSource, Scenario, WeatherSource};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("map file not found: {0}")]
    MapNotFound(String),
    #[error("weather file not found: {0}")]
    WeatherNotFound(String),
    #[error("config file not found: {0}")]
    ConfigNotFound(String),
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("invalid value: {0}")]
    BadValue(String),
    #[error("no output directory: pass --out or set `out` in the config")]
    NoOutputDir,
    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error(transparent)]
    Supervisor(#[from] SupervisorError),
    #[error("{0}")]
    Monitor(#[from] monitor::MonitorError),
    #[error("{0}")]
    Metrics(#[from] fusion_pollination::metrics::MetricsError),
    #[error("{0}")]
    Classifier(#[from] fusion_pollination::control::ControlError),
    #[error("{0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Machine-readable name printed on the diagnostic stream.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::MapNotFound(_) => "MapNotFound",
            CliError::WeatherNotFound(_) => "WeatherNotFound",
            CliError::ConfigNotFound(_) => "ConfigNotFound",
            CliError::ConfigParse(_) => "ConfigParse",
            CliError::BadValue(_) => "BadValue",
            CliError::NoOutputDir => "NoOutputDir",
            CliError::MissingArtifacts(_) => "MissingArtifacts",
            CliError::Landscape(e) => match e {
                LandscapeError::EmptyMap => "EmptyMap",
                LandscapeError::NoHive => "NoHive",
                LandscapeError::MultipleHives { .. } => "MultipleHives",
                LandscapeError::RaggedRows { .. } => "RaggedRows",
                LandscapeError::UnknownSymbol { .. } => "UnknownSymbol",
                LandscapeError::InvalidCellSize { .. } => "InvalidCellSize",
                LandscapeError::ZeroRegions => "ZeroRegions",
                LandscapeError::TooManyRegions { .. } => "TooManyRegions",
            },
            CliError::Weather(e) => weather_code(e),
            CliError::Supervisor(e) => match e {
                SupervisorError::RegionSetMismatch { .. } => "RegionSetMismatch",
                SupervisorError::InvalidConfig(_) => "BadValue",
                SupervisorError::Control(_) => "ControlError",
                SupervisorError::Monitor(m) => monitor_code(m),
                SupervisorError::Landscape(_) => "LandscapeError",
                SupervisorError::Weather(w) => weather_code(w),
            },
            CliError::Monitor(m) => monitor_code(m),
            CliError::Metrics(m) => match m {
                fusion_pollination::metrics::MetricsError::PatchUniverseMismatch { .. } => "PatchUniverseMismatch",
                fusion_pollination::metrics::MetricsError::ZeroBaselineVisits => "ZeroBaselineVisits",
                fusion_pollination::metrics::MetricsError::BadWeights { .. } => "BadWeights",
            },
            CliError::Classifier(c) => match c {
                fusion_pollination::control::ControlError::ClassImbalance { .. } => "ClassImbalance",
                fusion_pollination::control::ControlError::TilingMismatch { .. } => "TilingMismatch",
                fusion_pollination::control::ControlError::InvalidClassifier(_) => "BadValue",
            },
            CliError::Csv(_) => "MalformedCsv",
            CliError::Io { .. } => "Io",
        }
    }
}

fn weather_code(e: &WeatherError) -> &'static str {
    match e {
        WeatherError::MissingDay(_) => "MissingDay",
        WeatherError::DuplicateDay(_) => "DuplicateDay",
        WeatherError::OutOfRangeValue { .. } => "OutOfRangeValue",
        WeatherError::Malformed { .. } => "MalformedWeather",
        WeatherError::BadHeader(_) => "BadHeader",
        WeatherError::InvalidControl(_) => "InvalidControl",
    }
}

fn monitor_code(e: &monitor::MonitorError) -> &'static str {
    use monitor::MonitorError as M;
    match e {
        M::InsufficientSamples { .. } => "InsufficientSamples",
        M::DegenerateDesign => "DegenerateDesign",
        M::ArityMismatch { .. } => "ArityMismatch",
        M::ZeroVariance => "ZeroVariance",
        M::NonFinite(..) => "NonFinite",
        M::Parse { .. } => "MonitorParse",
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fpsim",
    version,
    about = "Bee scouting and foraging simulator with a closed-loop supervisor"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write scout trajectories.
    #[arg(long, global = true)]
    pub dump_paths: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Season without supervisor intervention.
    Baseline,
    /// Baseline, then the full supervisor loop, plus a comparison.
    Fi,
    /// Long-format metric table from a finished `fi` run directory.
    Report {
        /// Directory written by `fi`.
        dir: PathBuf,
    },
    /// Fit the visits monitor to an exported season.
    TrainMonitor {
        /// A `season.csv` export.
        season: PathBuf,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Report { dir } => cmd_report(dir, cli.global.out.as_deref()).map(|_| ()),
        Command::Baseline => {
            let sc = scenario(&cli.global)?;
            let out = out_dir(&cli.global, &sc)?;
            cmd_baseline(&sc, &out)
        }
        Command::Fi => {
            let sc = scenario(&cli.global)?;
            let out = out_dir(&cli.global, &sc)?;
            cmd_fi(&sc, &out)
        }
        Command::TrainMonitor { season } => {
            let sc = scenario(&cli.global)?;
            let text = cmd_train_monitor(&sc, season)?;
            print!("{text}");
            if let Some(out) = cli.global.out.as_ref().or(sc.out.as_ref()) {
                write(&out.join("monitor.txt"), &text)?;
            }
            Ok(())
        }
    }
}

pub fn scenario(g: &GlobalArgs) -> Result<Scenario, CliError> {
    let mut sc = match &g.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = g.seed {
        sc.seed = seed;
    }
    sc.scout.record_trajectories = g.dump_paths;
    Ok(sc)
}

fn out_dir(g: &GlobalArgs, sc: &Scenario) -> Result<PathBuf, CliError> {
    g.out.clone().or_else(|| sc.out.clone()).ok_or(CliError::NoOutputDir)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_grid(sc: &Scenario) -> Result<CellGrid, CliError> {
    let text = match &sc.map {
        MapSource::Desk => DESK_MAP.to_string(),
        MapSource::File(p) => {
            fs::read_to_string(p).map_err(|e| CliError::MapNotFound(format!("{}: {e}", p.display())))?
        }
    };
    Ok(parse_map(&text)?)
}

pub fn load_weather_source(sc: &Scenario) -> Result<WeatherSeries, CliError> {
    match &sc.weather {
        WeatherSource::Synth { profile, seed } => Ok(synth_weather(
            seed.unwrap_or_else(|| derive_seed(sc.seed, TAG_WEATHER)),
            profile,
        )),
        WeatherSource::File(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::WeatherNotFound(format!("{}: {e}", p.display())))?;
            Ok(load_weather(&text)?)
        }
    }
}

fn classifier(sc: &Scenario) -> Result<Classifier, CliError> {
    let rule = sc.classifier.rule()?;
    match sc.classifier {
        ClassifierChoice::Threshold { .. } => Ok(rule),
        ClassifierChoice::Softmax { samples, .. } => {
            let data = synthetic_regions(samples, &rule, sc.scout.max_range * 2.0, derive_seed(sc.seed, 0xC1A5));
            Ok(train_softmax(&data, sc.seed)?.0)
        }
    }
}

/// season.csv, totals.txt, foodflow.csv and coverage.csv, plus
/// trajectories.csv when paths were recorded.
fn write_season(dir: &Path, season: &SeasonRecord, foodflow: &str) -> Result<(), CliError> {
    write(&dir.join("season.csv"), &season.to_csv())?;
    write(&dir.join("totals.txt"), &season.totals.to_text())?;
    write(&dir.join("foodflow.csv"), foodflow)?;
    write(&dir.join("coverage.csv"), &season.coverage.coverage_csv())?;
    if let Some(paths) = season.coverage.trajectories_csv() {
        write(&dir.join("trajectories.csv"), &paths)?;
    }
    Ok(())
}

pub fn cmd_baseline(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let grid = load_grid(sc)?;
    let weather = load_weather_source(sc)?;
    let patches = derive_patches(&grid, &sc.patch_params);
    let setup = SeasonSetup {
        grid: &grid,
        patches: &patches,
        weather: &weather,
        colony: &sc.colony,
        scout: &sc.scout,
        cadence: sc.cadence,
    };
    let season = run_season(&setup, None, sc.seed);
    write_season(out, &season, &foodflow_csv(&patches))
}

pub fn cmd_fi(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let grid = load_grid(sc)?;
    let weather = load_weather_source(sc)?;
    let classifier = classifier(sc)?;
    let inputs = FiInputs {
        grid: &grid,
        patch_params: &sc.patch_params,
        weather: &weather,
        colony: &sc.colony,
        scout: &sc.scout,
        cadence: sc.cadence,
    };
    let o = run_fi_loop(&inputs, &classifier, &sc.supervisor, sc.seed)?;
    let report = ComparisonReport::new(&o.baseline.totals, &o.fi.totals, sc.supervisor.w1, sc.supervisor.w2)?;

    write_season(
        &out.join("baseline"),
        &o.baseline,
        &foodflow_csv(&derive_patches(&grid, &sc.patch_params)),
    )?;
    write_season(
        &out.join("fi"),
        &o.fi,
        &foodflow_csv(&derive_patches(&o.final_grid, &sc.patch_params)),
    )?;
    write(&out.join("fi").join("field.map"), &o.final_grid.to_map_string())?;
    write(&out.join("fi_plan.csv"), &o.plan.to_csv(&grid))?;
    write(&out.join("loop_trace.csv"), &o.trace.to_csv())?;
    write(&out.join("comparison.csv"), &report.to_csv())?;
    write(
        &out.join("regions.csv"),
        &regions_csv(&o.final_features, &o.final_labels),
    )?;
    write(&out.join("monitor.txt"), &o.monitor.to_text())?;
    Ok(())
}

/// Columns of season.csv shown by `report`, with their metric names.
const REPORT_METRICS: [(&str, &str); 6] = [
    ("covered_area_frac", "covered_area_frac"),
    ("detected_patches", "detected_patches"),
    ("total_visits", "daily_visits"),
    ("foraging_h", "foraging_period_h"),
    ("trips_per_sun_h", "trips_per_sun_h"),
    ("trips", "completed_trips"),
];

pub const REPORT_HEADER: &str = "metric,scenario,day,value";

fn read_season_columns(path: &Path) -> Result<Vec<BTreeMap<String, String>>, CliError> {
    let text = read(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?
        .clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
        rows.push(
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

/// Writes `report.csv` (under `out`, or the run directory) and returns it.
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let seasons = [
        ("baseline", dir.join("baseline/season.csv")),
        ("fi", dir.join("fi/season.csv")),
    ];
    let missing: Vec<String> = seasons
        .iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts(missing.join(", ")));
    }
    let tables = seasons
        .iter()
        .map(|(name, p)| Ok((*name, read_season_columns(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut text = String::from(REPORT_HEADER);
    text.push('\n');
    for (column, metric) in REPORT_METRICS {
        for (scenario, rows) in &tables {
            for row in rows {
                let (Some(day), Some(v)) = (row.get("day"), row.get(column)) else {
                    return Err(CliError::Csv(format!("{scenario} season lacks column `{column}`")));
                };
                text.push_str(&format!("{metric},{scenario},{day},{v}\n"));
            }
        }
    }
    write(&out.unwrap_or(dir).join("report.csv"), &text)?;
    Ok(text)
}

/// Fits the monitor on a season export with the scenario's weather
/// (daily maximum temperature and sunshine as the light input) and returns
/// the model text followed by a held-out R² line.
pub fn cmd_train_monitor(sc: &Scenario, season: &Path) -> Result<String, CliError> {
    let weather = load_weather_source(sc)?;
    let rows = read_season_columns(season)?;
    let mut samples = Vec::new();
    for row in rows {
        let parse = |k: &str| -> Result<f64, CliError> {
            row.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Csv(format!("{}: bad or missing `{k}`", season.display())))
        };
        let day = parse("day")? as u16;
        let dw = weather.day(day).ok_or(WeatherError::MissingDay(day))?;
        samples.push(MonitorSample::daily(
            day,
            dw.max_temp,
            dw.sunshine_hours,
            parse("total_visits")?,
        ));
    }
    let model = monitor::fit(&samples)?;
    let (train, test) = monitor::train_test_split(&samples, 0.2, sc.seed);
    let held_out = monitor::fit(&train).and_then(|m| monitor::r_squared(&m, &test));
    let mut text = model.to_text();
    match held_out {
        Ok(r2) => text.push_str(&format!("held_out_r_squared = {r2}\n")),
        Err(e) => text.push_str(&format!("held_out_r_squared = undefined ({e})\n")),
    }
    Ok(text)
}
