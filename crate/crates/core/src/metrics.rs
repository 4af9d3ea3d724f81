//! Baseline versus FI comparison and the pollination improvement index.

use std::fmt::Write as _;

use thiserror::Error;

use crate::foraging::SeasonTotals;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("baseline has {baseline} crop patches, FI run has {fi}")]
    PatchUniverseMismatch { baseline: usize, fi: usize },
    #[error("baseline total visits are zero, relative change is undefined")]
    ZeroBaselineVisits,
    #[error("weights {w1} and {w2} must be non-negative and sum to 1")]
    BadWeights { w1: f64, w2: f64 },
}

/// Change in detected crop patches, percentage points.
pub fn delta_pd(baseline: &SeasonTotals, fi: &SeasonTotals) -> Result<f64, MetricsError> {
    if baseline.crop_patches != fi.crop_patches {
        return Err(MetricsError::PatchUniverseMismatch {
            baseline: baseline.crop_patches,
            fi: fi.crop_patches,
        });
    }
    Ok(100.0 * (fi.detected_fraction() - baseline.detected_fraction()))
}

/// Relative change in total visits, percent.
pub fn delta_dv(baseline: &SeasonTotals, fi: &SeasonTotals) -> Result<f64, MetricsError> {
    relative_pct(baseline.total_visits as f64, fi.total_visits as f64).ok_or(MetricsError::ZeroBaselineVisits)
}

pub fn pii(delta_pd: f64, delta_dv: f64, w1: f64, w2: f64) -> Result<f64, MetricsError> {
    if !(w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-9) {
        return Err(MetricsError::BadWeights { w1, w2 });
    }
    Ok(w1 * delta_pd + w2 * delta_dv)
}

fn relative_pct(baseline: f64, fi: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (fi - baseline) / baseline)
}

/// Two decimals, truncated toward zero (49.855 shows as 49.85). A 1e-9
/// allowance keeps values like 0.29 from dropping to 0.28 after scaling.
pub fn display_2dp(x: f64) -> String {
    let y = x * 100.0;
    let t = if y >= 0.0 {
        (y + 1e-9).floor()
    } else {
        (y - 1e-9).ceil()
    };
    let t = if t == 0.0 { 0.0 } else { t };
    format!("{:.2}", t / 100.0)
}

/// How a delta is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// Difference of fractions, in percentage points.
    PercentagePoints,
    /// `100 * (fi - baseline) / baseline`.
    RelativePercent,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::PercentagePoints => "pp",
            Convention::RelativePercent => "rel_pct",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub name: &'static str,
    pub baseline: f64,
    pub fi: f64,
    /// `None` when a relative change has a zero baseline.
    pub delta: Option<f64>,
    pub convention: Convention,
}

impl MetricRow {
    fn new(name: &'static str, baseline: f64, fi: f64, convention: Convention) -> Self {
        let delta = match convention {
            Convention::PercentagePoints => Some(100.0 * (fi - baseline)),
            Convention::RelativePercent => relative_pct(baseline, fi),
        };
        Self {
            name,
            baseline,
            fi,
            delta,
            convention,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub delta_pd: f64,
    /// `None` when the baseline had no visits.
    pub delta_dv: Option<f64>,
    pub pii: Option<f64>,
    pub w1: f64,
    pub w2: f64,
    /// Covered area, detected fraction, foraging period, trips per sunshine
    /// hour, completed trips, total visits.
    pub rows: Vec<MetricRow>,
}

pub const COMPARISON_HEADER: &str = "name,baseline,fi,delta,convention";

impl ComparisonReport {
    pub fn new(baseline: &SeasonTotals, fi: &SeasonTotals, w1: f64, w2: f64) -> Result<Self, MetricsError> {
        let dpd = delta_pd(baseline, fi)?;
        let ddv = match delta_dv(baseline, fi) {
            Ok(v) => Some(v),
            Err(MetricsError::ZeroBaselineVisits) => None,
            Err(e) => return Err(e),
        };
        // Weights are checked even when the index itself is undefined.
        let index = pii(dpd, ddv.unwrap_or(0.0), w1, w2)?;
        use Convention::*;
        let rows = vec![
            MetricRow::new(
                "covered_area_frac",
                baseline.covered_area_fraction,
                fi.covered_area_fraction,
                PercentagePoints,
            ),
            MetricRow::new(
                "detected_frac",
                baseline.detected_fraction(),
                fi.detected_fraction(),
                PercentagePoints,
            ),
            MetricRow::new(
                "foraging_period_h",
                baseline.mean_foraging_period,
                fi.mean_foraging_period,
                RelativePercent,
            ),
            MetricRow::new(
                "trips_per_sun_h",
                baseline.mean_trips_per_sun_hour,
                fi.mean_trips_per_sun_hour,
                RelativePercent,
            ),
            MetricRow::new(
                "completed_trips",
                baseline.total_completed_trips as f64,
                fi.total_completed_trips as f64,
                RelativePercent,
            ),
            MetricRow::new(
                "total_visits",
                baseline.total_visits as f64,
                fi.total_visits as f64,
                RelativePercent,
            ),
        ];
        Ok(Self {
            delta_pd: dpd,
            delta_dv: ddv,
            pii: ddv.map(|_| index),
            w1,
            w2,
            rows,
        })
    }

    /// Metric rows, then `delta_pd`, `delta_dv` and `pii`. The pii row
    /// carries the weights in place of baseline/fi values and shows the
    /// index to two decimals.
    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name,
                r.baseline,
                r.fi,
                fmt_opt(r.delta),
                r.convention.as_str()
            );
        }
        let _ = writeln!(out, "delta_pd,,,{},pp", self.delta_pd);
        let _ = writeln!(out, "delta_dv,,,{},rel_pct", fmt_opt(self.delta_dv));
        let shown = self.pii.map_or_else(|| "undefined".to_string(), display_2dp);
        let _ = writeln!(out, "pii,{},{},{},weighted", self.w1, self.w2, shown);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn totals(detected: usize, crop: usize, visits: u64) -> SeasonTotals {
        SeasonTotals {
            total_visits: visits,
            detected_crop_patches: detected,
            detected_patches: detected,
            crop_patches: crop,
            ..SeasonTotals::default()
        }
    }

    #[test]
    fn delta_pd_examples() {
        let a = totals(67, 200, 10);
        assert_eq!(delta_pd(&a, &a).unwrap(), 0.0);
        let full = totals(200, 200, 10);
        assert_eq!(delta_pd(&full, &full).unwrap(), 0.0);
        let d = delta_pd(&totals(67, 200, 1), &totals(190, 200, 1)).unwrap();
        assert!((d - 61.5).abs() < 1e-9);
        assert_eq!(
            delta_pd(&a, &totals(67, 201, 10)),
            Err(MetricsError::PatchUniverseMismatch { baseline: 200, fi: 201 })
        );
    }

    #[test]
    fn delta_dv_examples() {
        assert_eq!(delta_dv(&totals(0, 1, 1000), &totals(0, 1, 1380)).unwrap(), 38.0);
        assert_eq!(delta_dv(&totals(0, 1, 5), &totals(0, 1, 5)).unwrap(), 0.0);
        assert_eq!(
            delta_dv(&totals(0, 1, 0), &totals(0, 1, 5)),
            Err(MetricsError::ZeroBaselineVisits)
        );
    }

    #[test]
    fn pii_examples() {
        assert_eq!(pii(0.0, 0.0, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(pii(7.25, 7.25, 0.25, 0.75).unwrap(), 7.25);
        assert!(matches!(pii(1.0, 1.0, 0.6, 0.6), Err(MetricsError::BadWeights { .. })));
        assert!(matches!(pii(1.0, 1.0, -0.5, 1.5), Err(MetricsError::BadWeights { .. })));
    }

    #[test]
    fn display_truncates() {
        assert_eq!(display_2dp(49.855), "49.85");
        assert_eq!(display_2dp(0.5 * 61.71 + 0.5 * 38.0), "49.85");
        assert_eq!(display_2dp(0.29), "0.29");
        assert_eq!(display_2dp(0.0), "0.00");
        assert_eq!(display_2dp(-1.239), "-1.23");
        assert_eq!(display_2dp(-0.001), "0.00");
    }

    #[test]
    fn zero_baseline_report_is_undefined() {
        let r = ComparisonReport::new(&totals(0, 3, 0), &totals(1, 3, 4), 0.5, 0.5).unwrap();
        assert_eq!(r.pii, None);
        let csv = r.to_csv();
        assert!(csv.contains("pii,0.5,0.5,undefined,weighted"));
        assert!(csv.contains("total_visits,0,4,undefined,rel_pct"));
    }

    #[test]
    fn report_rows() {
        let r = ComparisonReport::new(&totals(1, 4, 100), &totals(3, 4, 150), 0.5, 0.5).unwrap();
        assert_eq!(r.delta_pd, 50.0);
        assert_eq!(r.delta_dv, Some(50.0));
        assert_eq!(r.pii, Some(50.0));
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + 6 + 3);
        assert!(csv.ends_with("pii,0.5,0.5,50.00,weighted\n"));
    }
}
