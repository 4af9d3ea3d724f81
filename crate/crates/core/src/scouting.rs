//! Scout bees exploring the landscape from the hive.
//!
//! Each scout performs a correlated random walk: every step perturbs the
//! heading by a Gaussian turn of spread `turn_sigma` and advances
//! `step_length` cells. Moves that would enter an obstacle or leave the
//! field are re-drawn with a fresh uniform heading up to `max_retries`
//! times; after that the scout reverses and stays put for the step.
//!
//! When a scout comes within `detection_radius` cells of a patch it has not
//! yet found, it draws once for that encounter against the patch's
//! detection probability. A successful draw records the patch and, if the
//! scout is not already heading somewhere, biases its heading toward the
//! patch (gain `attraction_gain` per step) until it arrives. It then dwells
//! for `dwell_steps` steps and leaves on its arrival heading.
//!
//! Scouts stay within `max_range` meters of their anchor, turning back
//! toward it when they overshoot. The anchor is the hive at the start of the
//! run and moves to each artificial feeder the scout refuels at, which is
//! how feeders extend exploration past the hive's reach.
//!
//! Scout `i` of a run with seed `s` draws from the substream
//! `derive_seed(s, i)`, so results do not depend on scout scheduling.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::landscape::{CellGrid, Patch};
use crate::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoutingError {
    #[error("coverage grids differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("reports cover different patch sets: {a} vs {b} patches")]
    PatchCountMismatch { a: usize, b: usize },
    #[error("invalid scout parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoutParams {
    /// Scouts launched per run; the desk default stands in for a
    /// 10,000-bee colony.
    pub n_scouts: usize,
    pub steps_per_hour: usize,
    /// Cells advanced per step.
    pub step_length: f64,
    /// Standard deviation of the per-step heading change, radians.
    pub turn_sigma: f64,
    /// Leash length in meters.
    pub max_range: f64,
    /// Sensing radius in cells.
    pub detection_radius: f64,
    /// Fraction of the heading error to a target corrected per step.
    pub attraction_gain: f64,
    pub dwell_steps: usize,
    pub max_retries: usize,
    pub record_trajectories: bool,
}

impl Default for ScoutParams {
    fn default() -> Self {
        Self {
            n_scouts: 200,
            steps_per_hour: 40,
            step_length: 1.0,
            turn_sigma: 0.7,
            max_range: 6000.0,
            detection_radius: 2.0,
            attraction_gain: 0.5,
            dwell_steps: 5,
            max_retries: 8,
            record_trajectories: false,
        }
    }
}

/// Colony bees represented by one scout at the default scale (10,000 / 200).
pub const COLONY_SCALE: f64 = 10_000.0 / 200.0;

impl ScoutParams {
    pub fn validate(&self) -> Result<(), ScoutingError> {
        let bad = |m: &str| Err(ScoutingError::InvalidParams(m.to_string()));
        if self.n_scouts == 0 || self.steps_per_hour == 0 {
            return bad("n_scouts and steps_per_hour must be positive");
        }
        if !(self.step_length > 0.0 && self.step_length <= 4.0) {
            return bad("step_length must be in (0, 4] cells");
        }
        if !(self.turn_sigma > 0.0 && self.turn_sigma <= PI) {
            return bad("turn_sigma must be in (0, pi]");
        }
        if !(self.max_range > 0.0 && self.detection_radius > 0.0) {
            return bad("max_range and detection_radius must be positive");
        }
        if !(0.0..=1.0).contains(&self.attraction_gain) {
            return bad("attraction_gain must be in [0, 1]");
        }
        Ok(())
    }
}

/// Aggregated outcome of one or more scouting runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoutReport {
    width: usize,
    height: usize,
    traversable_cells: usize,
    total_patches: usize,
    /// Per-cell visit counts, row-major.
    pub coverage: Vec<u32>,
    pub detected_patch_ids: BTreeSet<usize>,
    pub covered_area_fraction: f64,
    pub detected_patch_fraction: f64,
    /// Per-scout polylines in meters, when recorded.
    pub trajectories: Option<Vec<Vec<(f64, f64)>>>,
}

impl ScoutReport {
    pub fn empty(grid: &CellGrid, total_patches: usize) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            traversable_cells: grid.traversable_count(),
            total_patches,
            coverage: vec![0; grid.len()],
            detected_patch_ids: BTreeSet::new(),
            covered_area_fraction: 0.0,
            detected_patch_fraction: 0.0,
            trajectories: None,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn total_patches(&self) -> usize {
        self.total_patches
    }

    pub fn traversable_cells(&self) -> usize {
        self.traversable_cells
    }

    pub fn visited_cells(&self) -> usize {
        self.coverage.iter().filter(|&&c| c > 0).count()
    }

    fn recompute_fractions(&mut self) {
        self.covered_area_fraction = if self.traversable_cells == 0 {
            0.0
        } else {
            self.visited_cells() as f64 / self.traversable_cells as f64
        };
        self.detected_patch_fraction = if self.total_patches == 0 {
            0.0
        } else {
            self.detected_patch_ids.len() as f64 / self.total_patches as f64
        };
    }

    /// Coverage as a CSV matrix, one grid row per line.
    pub fn coverage_csv(&self) -> String {
        let mut out = String::with_capacity(self.coverage.len() * 3);
        for row in self.coverage.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Trajectories as `scout_id,step,x,y` rows, positions in meters.
    pub fn trajectories_csv(&self) -> Option<String> {
        let paths = self.trajectories.as_ref()?;
        let mut out = String::from("scout_id,step,x,y\n");
        for (id, path) in paths.iter().enumerate() {
            for (step, (x, y)) in path.iter().enumerate() {
                out.push_str(&format!("{id},{step},{x},{y}\n"));
            }
        }
        Some(out)
    }
}

/// Cell-wise sum of visit counts and union of detections.
pub fn merge_reports(a: &ScoutReport, b: &ScoutReport) -> Result<ScoutReport, ScoutingError> {
    if a.dims() != b.dims() {
        return Err(ScoutingError::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    if a.total_patches != b.total_patches {
        return Err(ScoutingError::PatchCountMismatch {
            a: a.total_patches,
            b: b.total_patches,
        });
    }
    let mut out = a.clone();
    for (x, y) in out.coverage.iter_mut().zip(&b.coverage) {
        *x = x.saturating_add(*y);
    }
    out.detected_patch_ids.extend(b.detected_patch_ids.iter().copied());
    out.trajectories = match (&a.trajectories, &b.trajectories) {
        (Some(x), Some(y)) => Some(x.iter().chain(y).cloned().collect()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    };
    out.recompute_fractions();
    Ok(out)
}

/// For every cell, the patches with a member cell within `radius` cells
/// (center to center).
fn patches_near_cells(grid: &CellGrid, patches: &[Patch], radius: f64) -> Vec<Vec<usize>> {
    let mut near: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    let reach = radius.floor() as i64;
    let r2 = radius * radius;
    for (k, p) in patches.iter().enumerate() {
        for &m in &p.cell_members {
            let (mc, mr) = grid.coords(m);
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    if (dr * dr + dc * dc) as f64 > r2 {
                        continue;
                    }
                    let (c, r) = (mc as i64 + dc, mr as i64 + dr);
                    if grid.kind_at(c, r).is_some() {
                        let cell = r as usize * grid.width() + c as usize;
                        if near[cell].last() != Some(&k) {
                            near[cell].push(k);
                        }
                    }
                }
            }
        }
    }
    for list in &mut near {
        list.sort_unstable();
        list.dedup();
    }
    near
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

struct Walker<'a> {
    grid: &'a CellGrid,
    patches: &'a [Patch],
    near: &'a [Vec<usize>],
    params: &'a ScoutParams,
    turn: Normal<f64>,
    leash_cells: f64,
}

struct ScoutState {
    x: f64,
    y: f64,
    heading: f64,
    anchor: (f64, f64),
    /// Index into `patches` and target point in cell units.
    target: Option<(usize, (f64, f64))>,
    dwell: usize,
    known: Vec<bool>,
    in_range: Vec<usize>,
}

impl Walker<'_> {
    fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let (c, r) = (x.floor() as i64, y.floor() as i64);
        self.grid
            .kind_at(c, r)
            .filter(|k| k.is_traversable())
            .map(|_| r as usize * self.grid.width() + c as usize)
    }

    /// Destination of a straight move, if every quarter-cell sample along it
    /// is on a traversable cell.
    fn try_move(&self, s: &ScoutState, heading: f64) -> Option<(f64, f64)> {
        let len = self.params.step_length;
        let samples = (len * 4.0).ceil().max(1.0) as usize;
        let (dx, dy) = (heading.cos() * len, heading.sin() * len);
        for k in 1..=samples {
            let t = k as f64 / samples as f64;
            self.cell_of(s.x + dx * t, s.y + dy * t)?;
        }
        Some((s.x + dx, s.y + dy))
    }

    fn step(&self, s: &mut ScoutState, rng: &mut SimRng, coverage: &mut [u32], detected: &mut BTreeSet<usize>) {
        let here = self.cell_of(s.x, s.y).expect("scouts only stand on traversable cells");
        if s.dwell > 0 {
            s.dwell -= 1;
            coverage[here] += 1;
            return;
        }

        let noise = self.turn.sample(rng);
        let (ax, ay) = s.anchor;
        let leash = ((s.x - ax).powi(2) + (s.y - ay).powi(2)).sqrt();
        if let Some((_, (tx, ty))) = s.target {
            let want = (ty - s.y).atan2(tx - s.x);
            s.heading += self.params.attraction_gain * wrap_angle(want - s.heading) + noise;
        } else if leash > self.leash_cells {
            s.heading = (ay - s.y).atan2(ax - s.x) + noise;
        } else {
            s.heading += noise;
        }
        s.heading = wrap_angle(s.heading);

        let mut dest = self.try_move(s, s.heading);
        let mut retries = 0;
        while dest.is_none() && retries < self.params.max_retries {
            let h = rng.uniform_in(-PI, PI);
            dest = self.try_move(s, h);
            if dest.is_some() {
                s.heading = h;
            }
            retries += 1;
        }
        match dest {
            Some((x, y)) => {
                s.x = x;
                s.y = y;
            }
            None => s.heading = wrap_angle(s.heading + PI),
        }
        let cell = self.cell_of(s.x, s.y).expect("moves end on traversable cells");
        coverage[cell] += 1;

        if let Some((k, (tx, ty))) = s.target {
            if (tx - s.x).powi(2) + (ty - s.y).powi(2) <= 1.0 {
                s.target = None;
                s.dwell = self.params.dwell_steps;
                if self.patches[k].artificial {
                    s.anchor = (tx, ty);
                }
            }
        }

        let now = &self.near[cell];
        for &k in now {
            if s.in_range.binary_search(&k).is_ok() || s.known[k] {
                continue;
            }
            // New encounter episode with an unknown patch: one draw.
            if rng.uniform() < self.patches[k].detection_probability {
                s.known[k] = true;
                detected.insert(k);
                if s.target.is_none() {
                    s.target = Some((k, self.target_point(k, s)));
                }
            }
        }
        s.in_range.clear();
        s.in_range.extend_from_slice(now);
    }

    /// Member cell of patch `k` nearest the scout, in cell units.
    fn target_point(&self, k: usize, s: &ScoutState) -> (f64, f64) {
        self.patches[k]
            .cell_members
            .iter()
            .map(|&m| {
                let (c, r) = self.grid.coords(m);
                (c as f64 + 0.5, r as f64 + 0.5)
            })
            .min_by(|a, b| {
                let da = (a.0 - s.x).powi(2) + (a.1 - s.y).powi(2);
                let db = (b.0 - s.x).powi(2) + (b.1 - s.y).powi(2);
                da.total_cmp(&db)
            })
            .expect("patches have at least one member")
    }
}

/// Runs `params.n_scouts` scouts from the hive for `hours` of flight.
///
/// `patches` are indexed by position; `detected_patch_ids` holds the
/// corresponding `Patch::id` values.
pub fn run_scouting(grid: &CellGrid, patches: &[Patch], params: &ScoutParams, hours: f64, seed: u64) -> ScoutReport {
    let mut report = ScoutReport::empty(grid, patches.len());
    let steps = if hours > 0.0 {
        (hours * params.steps_per_hour as f64).round() as usize
    } else {
        0
    };
    let near = patches_near_cells(grid, patches, params.detection_radius);
    let walker = Walker {
        grid,
        patches,
        near: &near,
        params,
        turn: Normal::new(0.0, params.turn_sigma).expect("turn_sigma is finite and positive"),
        leash_cells: params.max_range / grid.cell_size(),
    };
    let (hc, hr) = grid.coords(grid.hive_index());
    let hive = (hc as f64 + 0.5, hr as f64 + 0.5);
    let mut found = BTreeSet::new();
    let mut paths = params.record_trajectories.then(Vec::new);

    for scout in 0..params.n_scouts {
        let mut rng = SimRng::substream(seed, scout as u64);
        let mut s = ScoutState {
            x: hive.0,
            y: hive.1,
            heading: rng.uniform_in(-PI, PI),
            anchor: hive,
            target: None,
            dwell: 0,
            known: vec![false; patches.len()],
            in_range: Vec::new(),
        };
        let mut path = paths.as_ref().map(|_| Vec::with_capacity(steps + 1));
        let to_m = |x: f64| x * grid.cell_size();
        if let Some(p) = path.as_mut() {
            p.push((to_m(s.x), to_m(s.y)));
        }
        for _ in 0..steps {
            walker.step(&mut s, &mut rng, &mut report.coverage, &mut found);
            if let Some(p) = path.as_mut() {
                p.push((to_m(s.x), to_m(s.y)));
            }
        }
        if let (Some(all), Some(p)) = (paths.as_mut(), path) {
            all.push(p);
        }
    }

    report.detected_patch_ids = found.into_iter().map(|k| patches[k].id).collect();
    report.trajectories = paths;
    report.recompute_fractions();
    report
}
