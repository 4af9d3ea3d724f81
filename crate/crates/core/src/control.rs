//! Region coverage classification and artificial patch proposals.
//!
//! The classifier works on per-region coverage features rather than
//! rendered coverage images. Two kinds are provided: a fixed threshold rule
//! and a multinomial logistic (softmax) model trained on labeled regions.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::landscape::{CellGrid, CellKind, RegionTiling};
use crate::rng::SimRng;
use crate::scouting::ScoutReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("tiling is {tiling:?} but grid is {grid:?}")]
    TilingMismatch {
        tiling: (usize, usize),
        grid: (usize, usize),
    },
    #[error("class {label} has {count} samples, need at least {min}")]
    ClassImbalance {
        label: CoverageLabel,
        count: usize,
        min: usize,
    },
    #[error("invalid classifier: {0}")]
    InvalidClassifier(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionFeatures {
    pub region: usize,
    /// Visits per traversable cell.
    pub visit_density: f64,
    /// Visited share of the traversable cells.
    pub coverage_fraction: f64,
    /// Region centroid to hive, meters.
    pub distance_to_hive: f64,
}

impl RegionFeatures {
    pub fn vector(&self) -> [f64; 3] {
        [self.visit_density, self.coverage_fraction, self.distance_to_hive]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoverageLabel {
    Low,
    Normal,
    High,
}

impl CoverageLabel {
    pub const ALL: [CoverageLabel; 3] = [CoverageLabel::Low, CoverageLabel::Normal, CoverageLabel::High];

    pub fn rank(self) -> u32 {
        self as u32
    }

    pub fn from_rank(rank: usize) -> Option<Self> {
        Self::ALL.get(rank).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CoverageLabel::Low => "low",
            CoverageLabel::Normal => "normal",
            CoverageLabel::High => "high",
        }
    }
}

impl fmt::Display for CoverageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CoverageLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(CoverageLabel::Low),
            "normal" => Ok(CoverageLabel::Normal),
            "high" => Ok(CoverageLabel::High),
            other => Err(format!("unknown coverage label {other:?}")),
        }
    }
}

/// Per-region aggregation of a coverage grid. Regions without traversable
/// cells are left out.
pub fn extract_features(
    report: &ScoutReport,
    tiling: &RegionTiling,
    grid: &CellGrid,
) -> Result<Vec<RegionFeatures>, ControlError> {
    let dims = (grid.width(), grid.height());
    if tiling.dims() != dims || report.dims() != dims {
        return Err(ControlError::TilingMismatch {
            tiling: tiling.dims(),
            grid: dims,
        });
    }
    let hive = grid.hive_center_m();
    let mut out = Vec::new();
    for (region, cells) in tiling.cells_by_region().into_iter().enumerate() {
        let mut traversable = 0usize;
        let mut visited = 0usize;
        let mut visits = 0u64;
        for &c in &cells {
            if grid.kind(c).is_traversable() {
                traversable += 1;
                let v = report.coverage[c];
                visits += v as u64;
                if v > 0 {
                    visited += 1;
                }
            }
        }
        if traversable == 0 {
            continue;
        }
        let (cx, cy) = region_centroid_m(grid, &cells);
        out.push(RegionFeatures {
            region,
            visit_density: visits as f64 / traversable as f64,
            coverage_fraction: visited as f64 / traversable as f64,
            distance_to_hive: ((cx - hive.0).powi(2) + (cy - hive.1).powi(2)).sqrt(),
        });
    }
    Ok(out)
}

fn region_centroid_m(grid: &CellGrid, cells: &[usize]) -> (f64, f64) {
    let n = cells.len() as f64;
    let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &c| {
        let (x, y) = grid.cell_center_m(c);
        (sx + x, sy + y)
    });
    (sx / n, sy / n)
}

/// Linear scores over standardized features; the label is the argmax.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxModel {
    /// One weight row per label, Low to High.
    pub weights: [[f64; 3]; 3],
    pub bias: [f64; 3],
    /// Feature standardization `(x - mean) / scale`.
    pub mean: [f64; 3],
    pub scale: [f64; 3],
}

impl SoftmaxModel {
    pub fn scores(&self, x: &[f64; 3]) -> [f64; 3] {
        let z: [f64; 3] = std::array::from_fn(|j| (x[j] - self.mean[j]) / self.scale[j]);
        std::array::from_fn(|k| self.bias[k] + (0..3).map(|j| self.weights[k][j] * z[j]).sum::<f64>())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Threshold { low_cut: f64, high_cut: f64 },
    Softmax(SoftmaxModel),
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::Threshold {
            low_cut: 0.2,
            high_cut: 0.8,
        }
    }
}

impl Classifier {
    pub fn threshold(low_cut: f64, high_cut: f64) -> Result<Self, ControlError> {
        if !(low_cut < high_cut) {
            return Err(ControlError::InvalidClassifier(format!(
                "low cut {low_cut} must be below high cut {high_cut}"
            )));
        }
        Ok(Classifier::Threshold { low_cut, high_cut })
    }
}

/// First index of the maximum; ties go to the lower label.
fn argmax(scores: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    best
}

pub fn classify(c: &Classifier, f: &RegionFeatures) -> CoverageLabel {
    match c {
        Classifier::Threshold { low_cut, high_cut } => {
            if f.coverage_fraction < *low_cut {
                CoverageLabel::Low
            } else if f.coverage_fraction > *high_cut {
                CoverageLabel::High
            } else {
                CoverageLabel::Normal
            }
        }
        Classifier::Softmax(m) => CoverageLabel::ALL[argmax(&m.scores(&f.vector()))],
    }
}

pub fn classify_all(c: &Classifier, features: &[RegionFeatures]) -> BTreeMap<usize, CoverageLabel> {
    features.iter().map(|f| (f.region, classify(c, f))).collect()
}

pub const MIN_SAMPLES_PER_CLASS: usize = 10;
pub const SOFTMAX_LEARNING_RATE: f64 = 0.1;
pub const SOFTMAX_EPOCHS: usize = 500;

/// Fits a softmax classifier by full-batch gradient descent on the mean
/// cross-entropy (learning rate 0.1, 500 epochs). Weights start uniform in
/// `[-0.01, 0.01]` from `seed`. Returns the classifier and its training
/// accuracy.
pub fn train_softmax(
    labeled: &[(RegionFeatures, CoverageLabel)],
    seed: u64,
) -> Result<(Classifier, f64), ControlError> {
    for label in CoverageLabel::ALL {
        let count = labeled.iter().filter(|(_, l)| *l == label).count();
        if count < MIN_SAMPLES_PER_CLASS {
            return Err(ControlError::ClassImbalance {
                label,
                count,
                min: MIN_SAMPLES_PER_CLASS,
            });
        }
    }
    let n = labeled.len() as f64;
    let xs: Vec<[f64; 3]> = labeled.iter().map(|(f, _)| f.vector()).collect();
    let mean: [f64; 3] = std::array::from_fn(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n);
    let scale: [f64; 3] = std::array::from_fn(|j| {
        let v = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    });
    let zs: Vec<[f64; 3]> = xs
        .iter()
        .map(|x| std::array::from_fn(|j| (x[j] - mean[j]) / scale[j]))
        .collect();
    let ys: Vec<usize> = labeled.iter().map(|(_, l)| l.rank() as usize).collect();

    let mut rng = SimRng::new(seed);
    let mut w = [[0.0; 3]; 3];
    for row in &mut w {
        for v in row.iter_mut() {
            *v = rng.uniform_in(-0.01, 0.01);
        }
    }
    let mut b = [0.0; 3];

    for _ in 0..SOFTMAX_EPOCHS {
        let mut gw = [[0.0; 3]; 3];
        let mut gb = [0.0; 3];
        for (z, &y) in zs.iter().zip(&ys) {
            let s: [f64; 3] = std::array::from_fn(|k| b[k] + (0..3).map(|j| w[k][j] * z[j]).sum::<f64>());
            let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: [f64; 3] = std::array::from_fn(|k| (s[k] - m).exp());
            let total: f64 = e.iter().sum();
            for k in 0..3 {
                let d = e[k] / total - if k == y { 1.0 } else { 0.0 };
                gb[k] += d;
                for j in 0..3 {
                    gw[k][j] += d * z[j];
                }
            }
        }
        for k in 0..3 {
            b[k] -= SOFTMAX_LEARNING_RATE * gb[k] / n;
            for j in 0..3 {
                w[k][j] -= SOFTMAX_LEARNING_RATE * gw[k][j] / n;
            }
        }
    }

    let model = Classifier::Softmax(SoftmaxModel {
        weights: w,
        bias: b,
        mean,
        scale,
    });
    let acc = accuracy(&model, labeled);
    Ok((model, acc))
}

pub fn accuracy(c: &Classifier, labeled: &[(RegionFeatures, CoverageLabel)]) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    let hits = labeled.iter().filter(|(f, l)| classify(c, f) == *l).count();
    hits as f64 / labeled.len() as f64
}

/// Random region features labeled by `rule`: coverage uniform in [0, 1],
/// visit density growing with coverage, distance up to `max_distance_m`.
pub fn synthetic_regions(
    n: usize,
    rule: &Classifier,
    max_distance_m: f64,
    seed: u64,
) -> Vec<(RegionFeatures, CoverageLabel)> {
    let mut rng = SimRng::new(seed);
    (0..n)
        .map(|region| {
            let coverage_fraction = rng.uniform();
            let f = RegionFeatures {
                region,
                visit_density: coverage_fraction * rng.uniform_in(1.0, 20.0),
                coverage_fraction,
                distance_to_hive: rng.uniform_in(0.0, max_distance_m),
            };
            let label = classify(rule, &f);
            (f, label)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementPolicy {
    /// Fraction of the hive-to-region segment where the stepping stone goes.
    pub waypoint_t: f64,
    /// Cells searched around the waypoint for an empty cell.
    pub search_radius: f64,
    pub detection_probability: f64,
    /// Liters per proposed feeder.
    pub nectar_l: f64,
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        Self {
            waypoint_t: 0.7,
            search_radius: 6.0,
            detection_probability: 0.95,
            nectar_l: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchProposal {
    pub cell: usize,
    /// Region the proposal serves.
    pub region: usize,
    pub detection_probability: f64,
    pub nectar_l: f64,
}

pub const PROPOSALS_HEADER: &str = "cell_x,cell_y,region_id,detect_prob,nectar_l";

pub fn proposals_csv(grid: &CellGrid, proposals: &[PatchProposal]) -> String {
    let mut out = String::from(PROPOSALS_HEADER);
    out.push('\n');
    for p in proposals {
        let (x, y) = grid.coords(p.cell);
        out.push_str(&format!(
            "{x},{y},{},{},{}\n",
            p.region, p.detection_probability, p.nectar_l
        ));
    }
    out
}

/// Greedy stepping-stone placement for Low regions.
///
/// Low regions are served in order of ascending coverage fraction, then
/// ascending distance to the hive, then region id. Each gets one feeder on
/// the empty cell nearest the point `waypoint_t` of the way from the hive to
/// the region centroid, within `search_radius` cells; cells next to another
/// feeder are skipped so each feeder stays a separate patch. A region with
/// no eligible cell is skipped.
pub fn propose_patches(
    labels: &BTreeMap<usize, CoverageLabel>,
    features: &[RegionFeatures],
    tiling: &RegionTiling,
    grid: &CellGrid,
    k: usize,
    policy: &PlacementPolicy,
) -> Vec<PatchProposal> {
    if k == 0 {
        return Vec::new();
    }
    let mut low: Vec<&RegionFeatures> = features
        .iter()
        .filter(|f| labels.get(&f.region) == Some(&CoverageLabel::Low))
        .collect();
    low.sort_by(|a, b| {
        a.coverage_fraction
            .total_cmp(&b.coverage_fraction)
            .then(a.distance_to_hive.total_cmp(&b.distance_to_hive))
            .then(a.region.cmp(&b.region))
    });

    let regions = tiling.cells_by_region();
    let (hc, hr) = grid.coords(grid.hive_index());
    let hive = (hc as f64 + 0.5, hr as f64 + 0.5);
    let mut taken: Vec<usize> = Vec::new();
    let mut out = Vec::new();

    let blocked_by_feeder = |cell: usize, taken: &[usize]| {
        let (c, r) = grid.coords(cell);
        let (c, r) = (c as i64, r as i64);
        [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dc, dr)| {
            let (nc, nr) = (c + dc, r + dr);
            match grid.kind_at(nc, nr) {
                Some(CellKind::ArtificialFood) => true,
                Some(_) => taken.contains(&(nr as usize * grid.width() + nc as usize)),
                None => false,
            }
        })
    };

    for f in low {
        if out.len() >= k {
            break;
        }
        let cells = &regions[f.region];
        let n = cells.len() as f64;
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &c| {
            let (x, y) = grid.coords(c);
            (sx + x as f64 + 0.5, sy + y as f64 + 0.5)
        });
        let centroid = (sx / n, sy / n);
        let t = policy.waypoint_t;
        let target = (hive.0 + t * (centroid.0 - hive.0), hive.1 + t * (centroid.1 - hive.1));

        let reach = policy.search_radius.ceil() as i64;
        let (tc, tr) = (target.0.floor() as i64, target.1.floor() as i64);
        let mut best: Option<(f64, usize)> = None;
        for r in tr - reach..=tr + reach {
            for c in tc - reach..=tc + reach {
                if grid.kind_at(c, r) != Some(CellKind::Empty) {
                    continue;
                }
                let d = ((c as f64 + 0.5 - target.0).powi(2) + (r as f64 + 0.5 - target.1).powi(2)).sqrt();
                if d > policy.search_radius {
                    continue;
                }
                let cell = r as usize * grid.width() + c as usize;
                if blocked_by_feeder(cell, &taken) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bc)) => d < bd || (d == bd && cell < bc),
                };
                if better {
                    best = Some((d, cell));
                }
            }
        }
        if let Some((_, cell)) = best {
            taken.push(cell);
            out.push(PatchProposal {
                cell,
                region: f.region,
                detection_probability: policy.detection_probability.clamp(0.0, 1.0),
                nectar_l: policy.nectar_l,
            });
        }
    }
    out
}

/// Marks accepted proposals on the grid as artificial food.
pub fn apply_proposals(grid: &mut CellGrid, proposals: &[PatchProposal]) {
    for p in proposals {
        let placed = grid.kind(p.cell) == CellKind::Empty && grid.set_kind(p.cell, CellKind::ArtificialFood);
        debug_assert!(placed, "proposal on non-empty cell {}", p.cell);
    }
}

pub const REGIONS_HEADER: &str = "region_id,visit_density,coverage_fraction,distance_to_hive_m,label";

/// Labeled-region audit table.
pub fn regions_csv(features: &[RegionFeatures], labels: &BTreeMap<usize, CoverageLabel>) -> String {
    let mut out = String::from(REGIONS_HEADER);
    out.push('\n');
    for f in features {
        let label = labels.get(&f.region).map_or("", |l| l.as_str());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f.region, f.visit_density, f.coverage_fraction, f.distance_to_hive, label
        ));
    }
    out
}
