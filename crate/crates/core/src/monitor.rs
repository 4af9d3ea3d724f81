//! Linear monitoring model of daily visits.
//!
//! Ordinary least squares through the normal equations. Feature columns are
//! centered and scaled before forming `ZᵀZ`, and the solution is mapped back
//! to the original units, so the stored coefficients are the plain OLS
//! coefficients of the raw features. A singular system is retried once with
//! a ridge of `1e-8` (relative to the scaled diagonal).

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::rng::SimRng;
use crate::weather::DAYS_PER_YEAR;

pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Default feature names of the daily monitor.
pub const DAILY_FEATURES: [&str; 4] = ["max_temp_c", "light_h", "season_sin", "season_cos"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("design matrix is degenerate even with ridge")]
    DegenerateDesign,
    #[error("expected {expected} features, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("targets have zero variance")]
    ZeroVariance,
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("model text line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSample {
    pub features: Vec<f64>,
    pub target: f64,
}

/// Seasonal encoding `(sin, cos)` of a day of year.
pub fn season_phase(day: u16) -> (f64, f64) {
    let a = 2.0 * PI * day as f64 / DAYS_PER_YEAR as f64;
    (a.sin(), a.cos())
}

impl MonitorSample {
    /// Daily sample over `(max_temp, light_hours, sin, cos)`.
    pub fn daily(day: u16, max_temp: f64, light_hours: f64, visits: f64) -> Self {
        let (s, c) = season_phase(day);
        Self {
            features: vec![max_temp, light_hours, s, c],
            target: visits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// R² on the training samples; NaN when the targets were constant.
    pub r_squared_train: f64,
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` if a pivot falls below `tol`.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > tol) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fits OLS with generic feature names `x0, x1, ...`.
pub fn fit(samples: &[MonitorSample]) -> Result<LinearModel, MonitorError> {
    let p = samples.first().map_or(0, |s| s.features.len());
    let names = (0..p).map(|i| format!("x{i}")).collect();
    fit_named(samples, names)
}

pub fn fit_named(samples: &[MonitorSample], feature_names: Vec<String>) -> Result<LinearModel, MonitorError> {
    let p = feature_names.len();
    let n = samples.len();
    if n < p + 1 {
        return Err(MonitorError::InsufficientSamples { needed: p + 1, got: n });
    }
    for (i, s) in samples.iter().enumerate() {
        if s.features.len() != p {
            return Err(MonitorError::ArityMismatch {
                expected: p,
                got: s.features.len(),
            });
        }
        if !s.target.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
            return Err(MonitorError::NonFinite(i));
        }
    }

    let nf = n as f64;
    let mean: Vec<f64> = (0..p)
        .map(|j| samples.iter().map(|s| s.features[j]).sum::<f64>() / nf)
        .collect();
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let v = samples.iter().map(|s| (s.features[j] - mean[j]).powi(2)).sum::<f64>() / nf;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    if p > 0 && (0..p).all(|j| samples.iter().all(|s| s.features[j] == mean[j])) {
        return Err(MonitorError::DegenerateDesign);
    }
    let y_mean = samples.iter().map(|s| s.target).sum::<f64>() / nf;

    let z = |s: &MonitorSample, j: usize| (s.features[j] - mean[j]) / scale[j];
    let mut ztz = vec![vec![0.0; p]; p];
    let mut zty = vec![0.0; p];
    for s in samples {
        let yc = s.target - y_mean;
        for i in 0..p {
            let zi = z(s, i);
            zty[i] += zi * yc;
            for j in i..p {
                ztz[i][j] += zi * z(s, j);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ztz[i][j] = ztz[j][i];
        }
    }

    let tol = 1e-12 * nf;
    let beta = match solve_linear(ztz.clone(), zty.clone(), tol) {
        Some(b) => b,
        None => {
            let mut ridged = ztz;
            for (i, row) in ridged.iter_mut().enumerate() {
                row[i] += RIDGE_LAMBDA * nf;
            }
            solve_linear(ridged, zty, tol).ok_or(MonitorError::DegenerateDesign)?
        }
    };

    let coefficients: Vec<f64> = beta.iter().zip(&scale).map(|(b, s)| b / s).collect();
    let intercept = y_mean - coefficients.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    let mut model = LinearModel {
        feature_names,
        coefficients,
        intercept,
        r_squared_train: f64::NAN,
    };
    model.r_squared_train = r_squared(&model, samples).unwrap_or(f64::NAN);
    Ok(model)
}

impl LinearModel {
    pub fn arity(&self) -> usize {
        self.coefficients.len()
    }

    /// Flat text form; `parse` reads it back and re-serializes identically.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let _ = writeln!(out, "features = {}", self.feature_names.join(","));
        let _ = writeln!(out, "coefficients = {}", join(&self.coefficients));
        let _ = writeln!(out, "intercept = {}", self.intercept);
        let _ = writeln!(out, "r_squared = {}", self.r_squared_train);
        out
    }

    pub fn parse(text: &str) -> Result<Self, MonitorError> {
        let mut names = None;
        let mut coefs = None;
        let mut intercept = None;
        let mut r2 = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |m: String| MonitorError::Parse {
                line: line_no,
                message: m,
            };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let value = value.trim();
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
            match key.trim() {
                "features" => {
                    names = Some(if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|s| s.trim().to_string()).collect()
                    })
                }
                "coefficients" => {
                    coefs = Some(if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(num).collect::<Result<Vec<_>, _>>()?
                    })
                }
                "intercept" => intercept = Some(num(value)?),
                "r_squared" => r2 = Some(num(value)?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| MonitorError::Parse {
            line: 0,
            message: format!("missing {k}"),
        };
        let feature_names: Vec<String> = names.ok_or_else(|| missing("features"))?;
        let coefficients: Vec<f64> = coefs.ok_or_else(|| missing("coefficients"))?;
        if feature_names.len() != coefficients.len() {
            return Err(MonitorError::ArityMismatch {
                expected: feature_names.len(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            feature_names,
            coefficients,
            intercept: intercept.ok_or_else(|| missing("intercept"))?,
            r_squared_train: r2.ok_or_else(|| missing("r_squared"))?,
        })
    }
}

/// Affine evaluation, unclamped.
pub fn predict(model: &LinearModel, features: &[f64]) -> Result<f64, MonitorError> {
    if features.len() != model.arity() {
        return Err(MonitorError::ArityMismatch {
            expected: model.arity(),
            got: features.len(),
        });
    }
    Ok(model.intercept + model.coefficients.iter().zip(features).map(|(c, x)| c * x).sum::<f64>())
}

pub fn predict_batch(model: &LinearModel, rows: &[Vec<f64>]) -> Result<Vec<f64>, MonitorError> {
    rows.iter().map(|r| predict(model, r)).collect()
}

/// `1 - SS_res / SS_tot` on `samples`.
pub fn r_squared(model: &LinearModel, samples: &[MonitorSample]) -> Result<f64, MonitorError> {
    if samples.len() < 2 {
        return Err(MonitorError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mean = samples.iter().map(|s| s.target).sum::<f64>() / samples.len() as f64;
    let ss_tot: f64 = samples.iter().map(|s| (s.target - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MonitorError::ZeroVariance);
    }
    let mut ss_res = 0.0;
    for s in samples {
        ss_res += (s.target - predict(model, &s.features)?).powi(2);
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Shuffles with `seed` and holds out `round(test_fraction * n)` samples.
/// Returns `(train, test)`.
pub fn train_test_split(
    samples: &[MonitorSample],
    test_fraction: f64,
    seed: u64,
) -> (Vec<MonitorSample>, Vec<MonitorSample>) {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    let mut rng = SimRng::new(seed);
    for i in (1..idx.len()).rev() {
        let j = (rng.uniform() * (i + 1) as f64) as usize;
        idx.swap(i, j.min(i));
    }
    let n_test = (test_fraction.clamp(0.0, 1.0) * samples.len() as f64).round() as usize;
    let test = idx[..n_test].iter().map(|&i| samples[i].clone()).collect();
    let train = idx[n_test..].iter().map(|&i| samples[i].clone()).collect();
    (train, test)
}
