//! Seasonal daily foraging of the colony over detected patches.
//!
//! Colony demography is frozen: the forager count is constant over the
//! season (no brood, no mortality).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand_distr::{Binomial, Distribution};

use crate::landscape::{CellGrid, Patch};
use crate::rng::{derive_seed, SimRng, TAG_FORAGING_DAY, TAG_SCOUT_REFRESH};
use crate::scouting::{merge_reports, run_scouting, ScoutParams, ScoutReport};
use crate::weather::{foraging_hours, DayWeather, EnvControl, HoursCap, WeatherSeries};

/// Guard for the trips-per-sunshine-hour denominator, in hours.
pub const SUNSHINE_EPSILON_H: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ColonyParams {
    pub initial_workers: u64,
    pub trips_per_forager_hour: f64,
    pub patches_per_trip: u64,
    pub forager_fraction: f64,
    /// Inclusive day-of-year window; `start > end` is an empty season.
    pub season: (u16, u16),
    /// Distance scale d₀ of the visit weight `nectar / (1 + d / d₀)`, meters.
    pub distance_scale_m: f64,
    pub hours_cap: HoursCap,
}

impl Default for ColonyParams {
    fn default() -> Self {
        Self {
            initial_workers: 10_000,
            trips_per_forager_hour: 1.0,
            patches_per_trip: 1,
            forager_fraction: 1.0,
            // April through August.
            season: (91, 243),
            distance_scale_m: 1000.0,
            hours_cap: HoursCap::default(),
        }
    }
}

impl ColonyParams {
    pub fn active_foragers(&self) -> u64 {
        (self.forager_fraction.clamp(0.0, 1.0) * self.initial_workers as f64).round() as u64
    }

    pub fn season_days(&self) -> impl Iterator<Item = u16> {
        self.season.0..=self.season.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayRecord {
    pub day: u16,
    /// Hours.
    pub foraging_period: f64,
    /// Visits per patch id, for every patch known that day.
    pub visits_per_patch: BTreeMap<usize, u64>,
    pub completed_trips: u64,
    pub trips_per_sunshine_hour: f64,
    pub active_foragers: u64,
}

impl DayRecord {
    pub fn zero(day: u16) -> Self {
        Self {
            day,
            foraging_period: 0.0,
            visits_per_patch: BTreeMap::new(),
            completed_trips: 0,
            trips_per_sunshine_hour: 0.0,
            active_foragers: 0,
        }
    }

    pub fn total_visits(&self) -> u64 {
        self.visits_per_patch.values().sum()
    }
}

/// Visit weight of a patch: nectar discounted by distance.
pub fn visit_weight(p: &Patch, distance_scale_m: f64) -> f64 {
    p.nectar_quantity / (1.0 + p.distance_from_hive / distance_scale_m)
}

/// Multinomial draw of `n` items over `weights` by sequential binomials.
/// All-zero weights fall back to a uniform split.
fn multinomial(n: u64, weights: &[f64], rng: &mut SimRng) -> Vec<u64> {
    let mut out = vec![0; weights.len()];
    if weights.is_empty() {
        return out;
    }
    let total: f64 = weights.iter().sum();
    let uniform = !(total > 0.0);
    let weight = |i: usize| if uniform { 1.0 } else { weights[i] };
    let mut rest_weight: f64 = if uniform { weights.len() as f64 } else { total };
    let mut rest = n;
    let last = weights.len() - 1;
    for i in 0..last {
        if rest == 0 {
            break;
        }
        let w = weight(i);
        let p = if rest_weight > 0.0 {
            (w / rest_weight).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if p >= 1.0 {
            rest
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(rest, p).expect("p in (0, 1)").sample(rng)
        };
        out[i] = k;
        rest -= k;
        rest_weight -= w;
    }
    out[last] += rest;
    out
}

/// One day of foraging over the detected patches.
///
/// With no detected patches, or below the temperature gate, the day is
/// all zero.
pub fn simulate_day(
    patches: &[Patch],
    dw: &DayWeather,
    ctrl: Option<&EnvControl>,
    colony: &ColonyParams,
    seed: u64,
    day: u16,
) -> DayRecord {
    let cap = colony.hours_cap.for_day(day, ctrl);
    let period = foraging_hours(dw, ctrl, cap);
    let foragers = colony.active_foragers();
    if patches.is_empty() || period <= 0.0 || foragers == 0 {
        return DayRecord::zero(day);
    }
    let trips = (foragers as f64 * colony.trips_per_forager_hour * period).round() as u64;
    let weights: Vec<f64> = patches
        .iter()
        .map(|p| visit_weight(p, colony.distance_scale_m))
        .collect();
    let mut rng = SimRng::new(seed);
    let visits = multinomial(trips * colony.patches_per_trip, &weights, &mut rng);
    DayRecord {
        day,
        foraging_period: period,
        visits_per_patch: patches.iter().map(|p| p.id).zip(visits).collect(),
        completed_trips: trips,
        trips_per_sunshine_hour: trips as f64 / dw.sunshine_hours.max(SUNSHINE_EPSILON_H),
        active_foragers: foragers,
    }
}

/// What the colony knows at the end of a day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnowledgeSnapshot {
    /// Detected patches, artificial ones included.
    pub detected_patches: usize,
    pub covered_area_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeasonTotals {
    pub total_visits: u64,
    pub mean_foraging_period: f64,
    pub mean_trips_per_sun_hour: f64,
    pub total_completed_trips: u64,
    /// All detected patches, artificial ones included.
    pub detected_patches: usize,
    pub detected_crop_patches: usize,
    pub crop_patches: usize,
    pub covered_area_fraction: f64,
}

impl SeasonTotals {
    /// Detected share of the crop (non-artificial) patches.
    pub fn detected_fraction(&self) -> f64 {
        if self.crop_patches == 0 {
            0.0
        } else {
            self.detected_crop_patches as f64 / self.crop_patches as f64
        }
    }

    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total_visits = {}", self.total_visits);
        let _ = writeln!(out, "mean_foraging_period_h = {}", self.mean_foraging_period);
        let _ = writeln!(out, "mean_trips_per_sun_h = {}", self.mean_trips_per_sun_hour);
        let _ = writeln!(out, "total_completed_trips = {}", self.total_completed_trips);
        let _ = writeln!(out, "detected_patches = {}", self.detected_patches);
        let _ = writeln!(out, "detected_crop_patches = {}", self.detected_crop_patches);
        let _ = writeln!(out, "crop_patches = {}", self.crop_patches);
        let _ = writeln!(out, "detected_fraction = {}", self.detected_fraction());
        let _ = writeln!(out, "covered_area_frac = {}", self.covered_area_fraction);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeasonRecord {
    pub days: Vec<DayRecord>,
    /// Parallel to `days`.
    pub knowledge: Vec<KnowledgeSnapshot>,
    /// Merged coverage of every scouting refresh in the season.
    pub coverage: ScoutReport,
    pub totals: SeasonTotals,
}

pub const SEASON_CSV_HEADER: &str =
    "day,foraging_h,trips,trips_per_sun_h,total_visits,detected_patches,covered_area_frac";

impl SeasonRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SEASON_CSV_HEADER);
        out.push('\n');
        for (d, k) in self.days.iter().zip(&self.knowledge) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                d.day,
                d.foraging_period,
                d.completed_trips,
                d.trips_per_sunshine_hour,
                d.total_visits(),
                k.detected_patches,
                k.covered_area_fraction
            );
        }
        out
    }

    pub fn detected_fraction(&self) -> f64 {
        self.totals.detected_fraction()
    }
}

/// Folds day records into season totals.
pub fn aggregate(days: &[DayRecord], coverage: &ScoutReport, patches: &[Patch]) -> SeasonTotals {
    let n = days.len();
    let mean = |f: fn(&DayRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            days.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let artificial: BTreeSet<usize> = patches.iter().filter(|p| p.artificial).map(|p| p.id).collect();
    let detected_crop_patches = coverage
        .detected_patch_ids
        .iter()
        .filter(|id| !artificial.contains(id))
        .count();
    SeasonTotals {
        total_visits: days.iter().map(DayRecord::total_visits).sum(),
        mean_foraging_period: mean(|d| d.foraging_period),
        mean_trips_per_sun_hour: mean(|d| d.trips_per_sunshine_hour),
        total_completed_trips: days.iter().map(|d| d.completed_trips).sum(),
        detected_patches: coverage.detected_patch_ids.len(),
        detected_crop_patches,
        crop_patches: patches.len() - artificial.len(),
        covered_area_fraction: coverage.covered_area_fraction,
    }
}

/// Everything a season run needs besides the seed.
#[derive(Clone, Debug)]
pub struct SeasonSetup<'a> {
    pub grid: &'a CellGrid,
    pub patches: &'a [Patch],
    pub weather: &'a WeatherSeries,
    pub colony: &'a ColonyParams,
    pub scout: &'a ScoutParams,
    /// Days between scouting refreshes.
    pub cadence: u16,
}

/// Simulates the season window day by day.
///
/// A scouting refresh falls due every `cadence` days; it runs on the first
/// day at or after its due date with a positive foraging period, for that
/// day's foraging hours. The colony's patch knowledge is the union of all
/// refreshes so far.
pub fn run_season(setup: &SeasonSetup<'_>, ctrl: Option<&EnvControl>, seed: u64) -> SeasonRecord {
    let SeasonSetup {
        grid,
        patches,
        weather,
        colony,
        scout,
        cadence,
    } = *setup;
    let mut coverage = ScoutReport::empty(grid, patches.len());
    let mut days = Vec::new();
    let mut knowledge = Vec::new();
    let mut due = colony.season.0;
    let by_id: BTreeMap<usize, &Patch> = patches.iter().map(|p| (p.id, p)).collect();

    for day in colony.season_days() {
        let Some(dw) = weather.day(day) else { continue };
        if day >= due {
            let hours = foraging_hours(dw, ctrl, colony.hours_cap.for_day(day, ctrl));
            if hours > 0.0 {
                let report = run_scouting(
                    grid,
                    patches,
                    scout,
                    hours,
                    derive_seed(seed, TAG_SCOUT_REFRESH ^ day as u64),
                );
                coverage = merge_reports(&coverage, &report).expect("same grid and patch list");
                due = day.saturating_add(cadence.max(1));
            }
        }
        let known: Vec<Patch> = coverage
            .detected_patch_ids
            .iter()
            .filter_map(|id| by_id.get(id).map(|p| (*p).clone()))
            .collect();
        let rec = simulate_day(
            &known,
            dw,
            ctrl,
            colony,
            derive_seed(seed, TAG_FORAGING_DAY ^ day as u64),
            day,
        );
        days.push(rec);
        knowledge.push(KnowledgeSnapshot {
            detected_patches: coverage.detected_patch_ids.len(),
            covered_area_fraction: coverage.covered_area_fraction,
        });
    }

    let totals = aggregate(&days, &coverage, patches);
    SeasonRecord {
        days,
        knowledge,
        coverage,
        totals,
    }
}
