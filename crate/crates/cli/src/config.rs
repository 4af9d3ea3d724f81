//! Scenario files in TOML: top-level `seed` and `out`, then one table per
//! module. Every key is optional and unknown keys are rejected. Relative
//! paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use fusion_pollination::control::{Classifier, CoverageLabel};
use fusion_pollination::foraging::ColonyParams;
use fusion_pollination::landscape::PatchParams;
use fusion_pollination::scouting::ScoutParams;
use fusion_pollination::supervisor::UserConfig;
use fusion_pollination::weather::ClimateProfile;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    seed: Option<u64>,
    out: Option<String>,
    #[serde(default)]
    landscape: LandscapeTable,
    #[serde(default)]
    weather: WeatherTable,
    #[serde(default)]
    colony: ColonyTable,
    #[serde(default)]
    scouting: ScoutingTable,
    #[serde(default)]
    classifier: ClassifierTable,
    #[serde(default)]
    supervisor: SupervisorTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandscapeTable {
    map: Option<String>,
    kappa: Option<f64>,
    nectar_per_m2: Option<f64>,
    pollen_per_m2: Option<f64>,
    artificial_detection_probability: Option<f64>,
    artificial_nectar_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeatherTable {
    source: Option<String>,
    temp_mean_c: Option<f64>,
    temp_amplitude_c: Option<f64>,
    temp_noise_c: Option<f64>,
    sun_mean_h: Option<f64>,
    sun_amplitude_h: Option<f64>,
    sun_noise_h: Option<f64>,
    peak_day: Option<u16>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColonyTable {
    initial_workers: Option<u64>,
    trips_per_forager_hour: Option<f64>,
    patches_per_trip: Option<u64>,
    forager_fraction: Option<f64>,
    season_start: Option<u16>,
    season_end: Option<u16>,
    distance_scale_m: Option<f64>,
    hours_cap_base: Option<f64>,
    hours_cap_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoutingTable {
    n_scouts: Option<usize>,
    steps_per_hour: Option<usize>,
    step_length: Option<f64>,
    turn_sigma: Option<f64>,
    max_range_m: Option<f64>,
    detection_radius: Option<f64>,
    attraction_gain: Option<f64>,
    dwell_steps: Option<usize>,
    max_retries: Option<usize>,
    cadence_days: Option<u16>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierTable {
    kind: Option<String>,
    low_cut: Option<f64>,
    high_cut: Option<f64>,
    training_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupervisorTable {
    required_label: Option<String>,
    max_artificial_patches: Option<usize>,
    max_iterations: Option<usize>,
    loss_tolerance: Option<f64>,
    w1: Option<f64>,
    w2: Option<f64>,
    patches_per_iteration: Option<usize>,
    retrain_monitor: Option<bool>,
    tiling_rows: Option<usize>,
    tiling_cols: Option<usize>,
    max_uplift_c: Option<f64>,
    max_extra_light_h: Option<f64>,
    grid_steps: Option<usize>,
    waypoint_t: Option<f64>,
    search_radius: Option<f64>,
}

/// Overwrites `slot` when the key was given.
fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSource {
    /// The bundled desk landscape.
    Desk,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeatherSource {
    /// Generated from the profile with `seed` (defaults to one derived from
    /// the run seed).
    Synth {
        profile: ClimateProfile,
        seed: Option<u64>,
    },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassifierChoice {
    Threshold {
        low_cut: f64,
        high_cut: f64,
    },
    /// Softmax trained on `samples` synthetic regions labeled by the
    /// threshold rule.
    Softmax {
        low_cut: f64,
        high_cut: f64,
        samples: usize,
    },
}

impl ClassifierChoice {
    pub fn rule(&self) -> Result<Classifier, CliError> {
        let (lo, hi) = match *self {
            ClassifierChoice::Threshold { low_cut, high_cut } | ClassifierChoice::Softmax { low_cut, high_cut, .. } => {
                (low_cut, high_cut)
            }
        };
        Classifier::threshold(lo, hi).map_err(|e| CliError::BadValue(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub map: MapSource,
    pub patch_params: PatchParams,
    pub weather: WeatherSource,
    pub colony: ColonyParams,
    pub scout: ScoutParams,
    pub cadence: u16,
    pub classifier: ClassifierChoice,
    pub supervisor: UserConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            out: None,
            map: MapSource::Desk,
            patch_params: PatchParams::default(),
            weather: WeatherSource::Synth {
                profile: ClimateProfile::default(),
                seed: None,
            },
            colony: ColonyParams::default(),
            scout: ScoutParams::default(),
            cadence: 7,
            classifier: ClassifierChoice::Threshold {
                low_cut: 0.2,
                high_cut: 0.8,
            },
            supervisor: UserConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::ConfigNotFound(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let f: File = toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        let mut sc = Scenario::default();
        set(&mut sc.seed, f.seed);
        sc.out = f.out.map(|p| resolve(base, &p));

        let l = f.landscape;
        if let Some(m) = l.map {
            sc.map = if m == "desk" {
                MapSource::Desk
            } else {
                MapSource::File(resolve(base, &m))
            };
        }
        let p = &mut sc.patch_params;
        set(&mut p.kappa, l.kappa);
        set(&mut p.nectar_per_m2, l.nectar_per_m2);
        set(&mut p.pollen_per_m2, l.pollen_per_m2);
        set(
            &mut p.artificial_detection_probability,
            l.artificial_detection_probability,
        );
        set(&mut p.artificial_nectar_fraction, l.artificial_nectar_fraction);

        let w = f.weather;
        match w.source.as_deref().unwrap_or("synth") {
            "synth" => {
                let mut profile = ClimateProfile::default();
                set(&mut profile.temp_mean, w.temp_mean_c);
                set(&mut profile.temp_amplitude, w.temp_amplitude_c);
                set(&mut profile.temp_noise, w.temp_noise_c);
                set(&mut profile.sun_mean, w.sun_mean_h);
                set(&mut profile.sun_amplitude, w.sun_amplitude_h);
                set(&mut profile.sun_noise, w.sun_noise_h);
                set(&mut profile.peak_day, w.peak_day);
                sc.weather = WeatherSource::Synth { profile, seed: w.seed };
            }
            path => sc.weather = WeatherSource::File(resolve(base, path)),
        }

        let c = f.colony;
        let colony = &mut sc.colony;
        set(&mut colony.initial_workers, c.initial_workers);
        set(&mut colony.trips_per_forager_hour, c.trips_per_forager_hour);
        set(&mut colony.patches_per_trip, c.patches_per_trip);
        set(&mut colony.forager_fraction, c.forager_fraction);
        set(&mut colony.season.0, c.season_start);
        set(&mut colony.season.1, c.season_end);
        set(&mut colony.distance_scale_m, c.distance_scale_m);
        set(&mut colony.hours_cap.base, c.hours_cap_base);
        set(&mut colony.hours_cap.max, c.hours_cap_max);

        let s = f.scouting;
        let scout = &mut sc.scout;
        set(&mut scout.n_scouts, s.n_scouts);
        set(&mut scout.steps_per_hour, s.steps_per_hour);
        set(&mut scout.step_length, s.step_length);
        set(&mut scout.turn_sigma, s.turn_sigma);
        set(&mut scout.max_range, s.max_range_m);
        set(&mut scout.detection_radius, s.detection_radius);
        set(&mut scout.attraction_gain, s.attraction_gain);
        set(&mut scout.dwell_steps, s.dwell_steps);
        set(&mut scout.max_retries, s.max_retries);
        set(&mut sc.cadence, s.cadence_days);

        let k = f.classifier;
        let (low_cut, high_cut) = (k.low_cut.unwrap_or(0.2), k.high_cut.unwrap_or(0.8));
        sc.classifier = match k.kind.as_deref().unwrap_or("threshold") {
            "threshold" => ClassifierChoice::Threshold { low_cut, high_cut },
            "softmax" => ClassifierChoice::Softmax {
                low_cut,
                high_cut,
                samples: k.training_samples.unwrap_or(600),
            },
            other => return Err(CliError::ConfigParse(format!("unknown classifier kind `{other}`"))),
        };

        let u = f.supervisor;
        let cfg = &mut sc.supervisor;
        if let Some(l) = u.required_label {
            cfg.required_label = l.parse::<CoverageLabel>().map_err(CliError::ConfigParse)?;
        }
        set(&mut cfg.max_artificial_patches, u.max_artificial_patches);
        set(&mut cfg.max_iterations, u.max_iterations);
        set(&mut cfg.loss_tolerance, u.loss_tolerance);
        set(&mut cfg.w1, u.w1);
        set(&mut cfg.w2, u.w2);
        set(&mut cfg.patches_per_iteration, u.patches_per_iteration);
        set(&mut cfg.retrain_monitor, u.retrain_monitor);
        set(&mut cfg.tiling.0, u.tiling_rows);
        set(&mut cfg.tiling.1, u.tiling_cols);
        set(&mut cfg.control_limits.max_uplift, u.max_uplift_c);
        set(&mut cfg.control_limits.max_extra_light, u.max_extra_light_h);
        set(&mut cfg.grid_steps, u.grid_steps);
        set(&mut cfg.placement.waypoint_t, u.waypoint_t);
        set(&mut cfg.placement.search_radius, u.search_radius);

        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::BadValue(m));
        self.scout.validate().map_err(|e| CliError::BadValue(e.to_string()))?;
        self.supervisor
            .validate()
            .map_err(|e| CliError::BadValue(e.to_string()))?;
        self.classifier.rule()?;
        let c = &self.colony;
        if !(0.0..=1.0).contains(&c.forager_fraction) {
            return bad(format!("forager_fraction {} outside [0, 1]", c.forager_fraction));
        }
        if !(c.trips_per_forager_hour >= 0.0 && c.distance_scale_m > 0.0) {
            return bad("trip rate must be non-negative and distance scale positive".into());
        }
        if c.season.0 > c.season.1 {
            return bad(format!(
                "season starts on day {} after it ends on day {}",
                c.season.0, c.season.1
            ));
        }
        if !(c.hours_cap.base >= 0.0 && c.hours_cap.max >= c.hours_cap.base) {
            return bad("hours cap must satisfy 0 <= base <= max".into());
        }
        let p = &self.patch_params;
        if !(p.kappa > 0.0 && p.nectar_per_m2 >= 0.0 && p.pollen_per_m2 >= 0.0) {
            return bad("patch densities must be non-negative and kappa positive".into());
        }
        if !(0.0..=1.0).contains(&p.artificial_detection_probability) {
            return bad("artificial_detection_probability outside [0, 1]".into());
        }
        if self.cadence == 0 {
            return bad("cadence_days must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let sc = Scenario::parse("", Path::new(".")).unwrap();
        assert_eq!(sc, Scenario::default());
    }

    #[test]
    fn values_and_paths() {
        let text = "seed = 9 # run seed\nout = \"runs/a\"\n[landscape]\nmap = \"maps/x.map\"\n[weather]\nsource = \"w.csv\"\n[supervisor]\nloss_tolerance = inf\n";
        let sc = Scenario::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(sc.seed, 9);
        assert_eq!(sc.out, Some(PathBuf::from("/cfg/runs/a")));
        assert_eq!(sc.map, MapSource::File(PathBuf::from("/cfg/maps/x.map")));
        assert_eq!(sc.weather, WeatherSource::File(PathBuf::from("/cfg/w.csv")));
        assert!(sc.supervisor.loss_tolerance.is_infinite());
    }

    #[test]
    fn unknown_key_and_section_are_rejected() {
        assert!(matches!(
            Scenario::parse("[colony]\nworkers = 3\n", Path::new(".")),
            Err(CliError::ConfigParse(m)) if m.contains("workers")
        ));
        assert!(Scenario::parse("[bogus]\na = 1\n", Path::new(".")).is_err());
        assert!(Scenario::parse("seed = x\n", Path::new(".")).is_err());
        assert!(Scenario::parse("seed = 1\nseed = 2\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[colony\n", Path::new(".")).is_err());
        assert!(Scenario::parse("[classifier]\nkind = \"forest\"\n", Path::new(".")).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            Scenario::parse("[supervisor]\nw1 = 0.9\n", Path::new(".")),
            Err(CliError::BadValue(_))
        ));
        assert!(matches!(
            Scenario::parse("[classifier]\nlow_cut = 0.9\n", Path::new(".")),
            Err(CliError::BadValue(_))
        ));
    }
}
