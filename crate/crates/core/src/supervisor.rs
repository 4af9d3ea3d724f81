//! The closed feedback loop: classify coverage, place stepping-stone
//! feeders, pick environmental controls from the monitor, re-run, and keep
//! the change only if the coverage loss drops.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::control::{
    apply_proposals, classify_all, extract_features, proposals_csv, Classifier, ControlError, CoverageLabel,
    PatchProposal, PlacementPolicy, RegionFeatures,
};
use crate::foraging::{run_season, ColonyParams, SeasonRecord, SeasonSetup};
use crate::landscape::{derive_patches, tile_regions, CellGrid, CellKind, LandscapeError, PatchParams, RegionTiling};
use crate::monitor::{self, season_phase, LinearModel, MonitorError, MonitorSample};
use crate::scouting::ScoutParams;
use crate::weather::{light_hours, ControlLimits, EnvControl, WeatherError, WeatherSeries};

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("region sets differ: {missing} required regions unlabeled, {extra} labeled regions without a requirement")]
    RegionSetMismatch { missing: usize, extra: usize },
    #[error("invalid supervisor config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserConfig {
    /// Minimum label asked of every region holding crop.
    pub required_label: CoverageLabel,
    pub max_artificial_patches: usize,
    pub max_iterations: usize,
    pub loss_tolerance: f64,
    /// PII weights (W1 on detection, W2 on visits).
    pub w1: f64,
    pub w2: f64,
    pub patches_per_iteration: usize,
    /// Refit the monitor on each accepted season instead of only the baseline.
    pub retrain_monitor: bool,
    /// Region tiling, rows x cols.
    pub tiling: (usize, usize),
    pub control_limits: ControlLimits,
    /// Grid points per control axis.
    pub grid_steps: usize,
    pub placement: PlacementPolicy,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            required_label: CoverageLabel::Normal,
            max_artificial_patches: 60,
            max_iterations: 40,
            loss_tolerance: 0.0,
            w1: 0.5,
            w2: 0.5,
            patches_per_iteration: 3,
            retrain_monitor: false,
            tiling: (8, 8),
            control_limits: ControlLimits::default(),
            grid_steps: 9,
            placement: PlacementPolicy::default(),
        }
    }
}

impl UserConfig {
    pub fn validate(&self) -> Result<(), SupervisorError> {
        let bad = |m: String| Err(SupervisorError::InvalidConfig(m));
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && (self.w1 + self.w2 - 1.0).abs() <= 1e-9) {
            return bad(format!(
                "weights {} and {} must be non-negative and sum to 1",
                self.w1, self.w2
            ));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if !(self.loss_tolerance >= 0.0) {
            return bad(format!("loss tolerance {} must be non-negative", self.loss_tolerance));
        }
        if self.grid_steps == 0 {
            return bad("grid_steps must be at least 1".into());
        }
        if !(self.control_limits.max_uplift >= 0.0 && self.control_limits.max_extra_light >= 0.0) {
            return bad("control limits must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.placement.waypoint_t) || !(self.placement.search_radius >= 0.0) {
            return bad("placement waypoint must lie in [0, 1] with a non-negative search radius".into());
        }
        Ok(())
    }
}

/// Under-coverage summed over regions: `max(0, rank(required) - rank(observed))`.
pub fn coverage_loss(
    labels: &BTreeMap<usize, CoverageLabel>,
    required: &BTreeMap<usize, CoverageLabel>,
) -> Result<f64, SupervisorError> {
    let missing = required.keys().filter(|r| !labels.contains_key(r)).count();
    let extra = labels.keys().filter(|r| !required.contains_key(r)).count();
    if missing + extra > 0 {
        return Err(SupervisorError::RegionSetMismatch { missing, extra });
    }
    Ok(required
        .iter()
        .map(|(r, req)| req.rank().saturating_sub(labels[r].rank()) as f64)
        .sum())
}

/// Requirement per classified region: `label` where the region holds crop,
/// Low (never violated) elsewhere.
pub fn required_labels(
    features: &[RegionFeatures],
    tiling: &RegionTiling,
    grid: &CellGrid,
    label: CoverageLabel,
) -> BTreeMap<usize, CoverageLabel> {
    let mut has_crop = vec![false; tiling.region_count()];
    for (cell, kind) in grid.cells().iter().enumerate() {
        if *kind == CellKind::Crop {
            has_crop[tiling.region_of(cell)] = true;
        }
    }
    features
        .iter()
        .map(|f| {
            let req = if has_crop[f.region] { label } else { CoverageLabel::Low };
            (f.region, req)
        })
        .collect()
}

fn axis(max: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![0.0];
    }
    (0..steps)
        .map(|i| (i as f64 * max / (steps - 1) as f64).min(max))
        .collect()
}

/// Grid search over `(temp_uplift, extra_light_hours)` in `[0, max]` on each
/// axis for the control whose predicted visits, summed over the window days
/// present in `weather`, are largest. Ties keep the smaller uplift, then the
/// smaller extra light.
pub fn optimize_env_control(
    model: &LinearModel,
    weather: &WeatherSeries,
    window: (u16, u16),
    limits: &ControlLimits,
    grid_steps: usize,
) -> Result<EnvControl, SupervisorError> {
    let days: Vec<_> = weather
        .days()
        .iter()
        .filter(|d| (window.0..=window.1).contains(&d.day))
        .collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for &u in &axis(limits.max_uplift, grid_steps) {
        for &l in &axis(limits.max_extra_light, grid_steps) {
            let mut total = 0.0;
            for d in &days {
                let (s, c) = season_phase(d.day);
                total += monitor::predict(model, &[d.max_temp + u, d.sunshine_hours + l, s, c])?;
            }
            if best.is_none_or(|(b, _, _)| total > b) {
                best = Some((total, u, l));
            }
        }
    }
    let (_, u, l) = best.expect("axes are never empty");
    Ok(EnvControl::new(u, l, window, limits)?)
}

/// Daily monitor samples from a season run under `ctrl`.
pub fn monitor_samples(
    season: &SeasonRecord,
    weather: &WeatherSeries,
    ctrl: Option<&EnvControl>,
) -> Vec<MonitorSample> {
    season
        .days
        .iter()
        .filter_map(|d| {
            let dw = weather.day(d.day)?;
            let uplift = ctrl.filter(|c| c.is_active(d.day)).map_or(0.0, |c| c.temp_uplift);
            Some(MonitorSample::daily(
                d.day,
                dw.max_temp + uplift,
                light_hours(dw, ctrl),
                d.total_visits() as f64,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiPlan {
    pub placed_patches: Vec<PatchProposal>,
    pub env_control: EnvControl,
    /// Loop evaluations, the baseline classification included.
    pub iterations_used: usize,
    pub final_loss: f64,
}

pub const FI_PLAN_HEADER: &str =
    "kind,cell_x,cell_y,region_id,detect_prob,nectar_l,temp_uplift_c,extra_light_h,window_start,window_end";

impl FiPlan {
    /// One `patch` row per placed feeder and one `control` row.
    pub fn to_csv(&self, grid: &CellGrid) -> String {
        let mut out = String::from(FI_PLAN_HEADER);
        out.push('\n');
        for p in &self.placed_patches {
            let (x, y) = grid.coords(p.cell);
            let _ = writeln!(
                out,
                "patch,{x},{y},{},{},{},,,,",
                p.region, p.detection_probability, p.nectar_l
            );
        }
        let c = &self.env_control;
        let _ = writeln!(
            out,
            "control,,,,,,{},{},{},{}",
            c.temp_uplift, c.extra_light_hours, c.active_window.0, c.active_window.1
        );
        out
    }

    pub fn proposals_csv(&self, grid: &CellGrid) -> String {
        proposals_csv(grid, &self.placed_patches)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub covered_area_fraction: f64,
    pub detected_fraction: f64,
    pub total_visits: u64,
    /// Feeders on the field after this iteration, if accepted.
    pub placed_patches: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoopTrace {
    pub rows: Vec<TraceRow>,
}

pub const LOOP_TRACE_HEADER: &str =
    "iteration,loss,covered_area_frac,detected_frac,total_visits,placed_patches,accepted";

impl LoopTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn accepted(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.accepted)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOOP_TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration,
                r.loss,
                r.covered_area_fraction,
                r.detected_fraction,
                r.total_visits,
                r.placed_patches,
                r.accepted
            );
        }
        out
    }
}

/// Everything fixed across loop iterations.
#[derive(Clone, Debug)]
pub struct FiInputs<'a> {
    pub grid: &'a CellGrid,
    pub patch_params: &'a PatchParams,
    pub weather: &'a WeatherSeries,
    pub colony: &'a ColonyParams,
    pub scout: &'a ScoutParams,
    pub cadence: u16,
}

#[derive(Clone, Debug)]
pub struct FiOutcome {
    pub plan: FiPlan,
    pub trace: LoopTrace,
    pub baseline: SeasonRecord,
    pub fi: SeasonRecord,
    /// Grid with the accepted feeders placed.
    pub final_grid: CellGrid,
    pub monitor: LinearModel,
    /// Region features and labels of the final season.
    pub final_features: Vec<RegionFeatures>,
    pub final_labels: BTreeMap<usize, CoverageLabel>,
}

struct Evaluation {
    features: Vec<RegionFeatures>,
    labels: BTreeMap<usize, CoverageLabel>,
    loss: f64,
}

fn evaluate(
    season: &SeasonRecord,
    tiling: &RegionTiling,
    grid: &CellGrid,
    classifier: &Classifier,
    required: CoverageLabel,
) -> Result<Evaluation, SupervisorError> {
    let features = extract_features(&season.coverage, tiling, grid)?;
    let labels = classify_all(classifier, &features);
    let req = required_labels(&features, tiling, grid, required);
    let loss = coverage_loss(&labels, &req)?;
    Ok(Evaluation { features, labels, loss })
}

fn run_on(inputs: &FiInputs<'_>, grid: &CellGrid, ctrl: Option<&EnvControl>, seed: u64) -> SeasonRecord {
    let patches = derive_patches(grid, inputs.patch_params);
    let setup = SeasonSetup {
        grid,
        patches: &patches,
        weather: inputs.weather,
        colony: inputs.colony,
        scout: inputs.scout,
        cadence: inputs.cadence,
    };
    run_season(&setup, ctrl, seed)
}

fn trace_row(iteration: usize, loss: f64, s: &SeasonRecord, placed: usize, accepted: bool) -> TraceRow {
    TraceRow {
        iteration,
        loss,
        covered_area_fraction: s.totals.covered_area_fraction,
        detected_fraction: s.detected_fraction(),
        total_visits: s.totals.total_visits,
        placed_patches: placed,
        accepted,
    }
}

/// Runs the feedback loop from a control-free baseline.
///
/// Each iteration proposes up to `patches_per_iteration` feeders for Low
/// regions and applies the monitor-optimal environmental control, then
/// re-runs the season with the same seed. The step is kept only if the loss
/// strictly drops and total visits stay at or above the baseline; otherwise
/// it is rolled back and the loop stops. The loop also stops once the loss
/// is within tolerance, the iteration budget is spent, or there is nothing
/// left to change.
pub fn run_fi_loop(
    inputs: &FiInputs<'_>,
    classifier: &Classifier,
    cfg: &UserConfig,
    seed: u64,
) -> Result<FiOutcome, SupervisorError> {
    cfg.validate()?;
    let tiling = tile_regions(inputs.grid, cfg.tiling.0, cfg.tiling.1)?;
    let window = inputs.colony.season;

    let baseline = run_on(inputs, inputs.grid, None, seed);
    let mut monitor_model = monitor::fit(&monitor_samples(&baseline, inputs.weather, None))?;
    let mut control = optimize_env_control(
        &monitor_model,
        inputs.weather,
        window,
        &cfg.control_limits,
        cfg.grid_steps,
    )?;

    let mut eval = evaluate(&baseline, &tiling, inputs.grid, classifier, cfg.required_label)?;
    let mut trace = LoopTrace {
        rows: vec![trace_row(0, eval.loss, &baseline, 0, true)],
    };
    let mut grid = inputs.grid.clone();
    let mut current = baseline.clone();
    let mut applied: Option<EnvControl> = None;
    let mut placed: Vec<PatchProposal> = Vec::new();

    let base_patches = derive_patches(inputs.grid, inputs.patch_params);
    let crop: Vec<_> = base_patches.iter().filter(|p| !p.artificial).collect();
    let mean_nectar = if crop.is_empty() {
        0.0
    } else {
        crop.iter().map(|p| p.nectar_quantity).sum::<f64>() / crop.len() as f64
    };
    let policy = PlacementPolicy {
        detection_probability: inputs.patch_params.artificial_detection_probability,
        nectar_l: inputs.patch_params.artificial_nectar_fraction * mean_nectar,
        ..cfg.placement.clone()
    };

    for iteration in 1..=cfg.max_iterations {
        if eval.loss <= cfg.loss_tolerance {
            break;
        }
        let remaining = cfg.max_artificial_patches - placed.len();
        let k = cfg.patches_per_iteration.min(remaining);
        let proposals = crate::control::propose_patches(&eval.labels, &eval.features, &tiling, &grid, k, &policy);
        let next_ctrl = (!control.is_noop()).then(|| control.clone());
        if proposals.is_empty() && next_ctrl == applied {
            break;
        }

        let mut trial_grid = grid.clone();
        apply_proposals(&mut trial_grid, &proposals);
        let season = run_on(inputs, &trial_grid, next_ctrl.as_ref(), seed);
        let trial = evaluate(&season, &tiling, &trial_grid, classifier, cfg.required_label)?;
        let accepted = trial.loss < eval.loss && season.totals.total_visits >= baseline.totals.total_visits;
        let count = placed.len() + if accepted { proposals.len() } else { 0 };
        trace
            .rows
            .push(trace_row(iteration, trial.loss, &season, count, accepted));
        if !accepted {
            break;
        }

        grid = trial_grid;
        placed.extend(proposals);
        applied = next_ctrl;
        if cfg.retrain_monitor {
            monitor_model = monitor::fit(&monitor_samples(&season, inputs.weather, applied.as_ref()))?;
            control = optimize_env_control(
                &monitor_model,
                inputs.weather,
                window,
                &cfg.control_limits,
                cfg.grid_steps,
            )?;
        }
        current = season;
        eval = trial;
    }

    let env_control = applied.unwrap_or(EnvControl {
        temp_uplift: 0.0,
        extra_light_hours: 0.0,
        active_window: window,
    });
    Ok(FiOutcome {
        plan: FiPlan {
            placed_patches: placed,
            env_control,
            iterations_used: trace.len(),
            final_loss: eval.loss,
        },
        trace,
        baseline,
        fi: current,
        final_grid: grid,
        monitor: monitor_model,
        final_features: eval.features,
        final_labels: eval.labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[(usize, CoverageLabel)]) -> BTreeMap<usize, CoverageLabel> {
        v.iter().copied().collect()
    }

    #[test]
    fn loss_examples() {
        use CoverageLabel::*;
        let same = labels(&[(0, Low), (1, Normal), (2, High)]);
        assert_eq!(coverage_loss(&same, &same).unwrap(), 0.0);
        assert_eq!(coverage_loss(&labels(&[(0, Low)]), &labels(&[(0, High)])).unwrap(), 2.0);
        assert_eq!(coverage_loss(&labels(&[(0, High)]), &labels(&[(0, Low)])).unwrap(), 0.0);
        assert!(matches!(
            coverage_loss(&labels(&[(0, Low)]), &labels(&[(1, Low)])),
            Err(SupervisorError::RegionSetMismatch { missing: 1, extra: 1 })
        ));
    }

    fn weather() -> WeatherSeries {
        let days = (1..=365)
            .map(|day| crate::weather::DayWeather {
                day,
                max_temp: 18.0,
                sunshine_hours: 5.0,
            })
            .collect();
        WeatherSeries::new(days).unwrap()
    }

    fn model(coefficients: [f64; 4]) -> LinearModel {
        LinearModel {
            feature_names: crate::monitor::DAILY_FEATURES.iter().map(|s| s.to_string()).collect(),
            coefficients: coefficients.to_vec(),
            intercept: 3.0,
            r_squared_train: 0.0,
        }
    }

    #[test]
    fn zero_model_picks_no_control() {
        let c = optimize_env_control(&model([0.0; 4]), &weather(), (91, 243), &ControlLimits::default(), 5).unwrap();
        assert_eq!((c.temp_uplift, c.extra_light_hours), (0.0, 0.0));
    }

    #[test]
    fn light_only_model_maxes_light() {
        let limits = ControlLimits::default();
        let c = optimize_env_control(&model([0.0, 2.0, 0.0, 0.0]), &weather(), (91, 243), &limits, 5).unwrap();
        assert_eq!((c.temp_uplift, c.extra_light_hours), (0.0, limits.max_extra_light));
    }

    #[test]
    fn collapsed_bounds_give_the_point() {
        let limits = ControlLimits {
            max_uplift: 0.0,
            max_extra_light: 0.0,
        };
        let c = optimize_env_control(&model([1.0, 1.0, 0.0, 0.0]), &weather(), (91, 243), &limits, 7).unwrap();
        assert!(c.is_noop());
    }

    #[test]
    fn config_validation() {
        assert!(UserConfig::default().validate().is_ok());
        let c = UserConfig {
            w1: 0.7,
            ..UserConfig::default()
        };
        assert!(c.validate().is_err());
        let c = UserConfig {
            max_iterations: 0,
            ..UserConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
