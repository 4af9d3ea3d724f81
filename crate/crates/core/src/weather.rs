//! Daily weather, environmental controls and the foraging-hours gate.

use std::f64::consts::PI;

use thiserror::Error;

use crate::rng::{SimRng, TAG_WEATHER};

/// Bees do not leave the hive below this daily maximum temperature.
pub const MIN_FORAGING_TEMP_C: f64 = 15.0;

pub const DAYS_PER_YEAR: u16 = 365;

pub const WEATHER_HEADER: &str = "day,max_temp_c,sunshine_h";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeatherError {
    #[error("weather file has no day {0}")]
    MissingDay(u16),
    #[error("day {0} appears more than once")]
    DuplicateDay(u16),
    #[error("line {line}: {field} value {value} out of range")]
    OutOfRangeValue {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("expected header `{WEATHER_HEADER}`, found `{0}`")]
    BadHeader(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DayWeather {
    /// 1-based day of year.
    pub day: u16,
    pub max_temp: f64,
    pub sunshine_hours: f64,
}

/// A complete year of daily weather, days 1..=365 in order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeries {
    days: Vec<DayWeather>,
}

impl WeatherSeries {
    /// Validates completeness, uniqueness and value ranges, then orders the
    /// days.
    pub fn new(mut days: Vec<DayWeather>) -> Result<Self, WeatherError> {
        let mut seen = [false; DAYS_PER_YEAR as usize];
        for (i, d) in days.iter().enumerate() {
            if d.day == 0 || d.day > DAYS_PER_YEAR {
                return Err(WeatherError::OutOfRangeValue {
                    line: i + 1,
                    field: "day",
                    value: d.day.to_string(),
                });
            }
            if !d.max_temp.is_finite() {
                return Err(WeatherError::OutOfRangeValue {
                    line: i + 1,
                    field: "max_temp_c",
                    value: d.max_temp.to_string(),
                });
            }
            if !(0.0..=24.0).contains(&d.sunshine_hours) {
                return Err(WeatherError::OutOfRangeValue {
                    line: i + 1,
                    field: "sunshine_h",
                    value: d.sunshine_hours.to_string(),
                });
            }
            let slot = &mut seen[d.day as usize - 1];
            if *slot {
                return Err(WeatherError::DuplicateDay(d.day));
            }
            *slot = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(WeatherError::MissingDay(missing as u16 + 1));
        }
        days.sort_by_key(|d| d.day);
        Ok(Self { days })
    }

    pub fn days(&self) -> &[DayWeather] {
        &self.days
    }

    /// Weather of a 1-based day of year.
    pub fn day(&self, day: u16) -> Option<&DayWeather> {
        day.checked_sub(1).and_then(|i| self.days.get(i as usize))
    }

    /// A copy with each day replaced by `f(day)`.
    pub fn map(&self, f: impl Fn(&DayWeather) -> DayWeather) -> Result<Self, WeatherError> {
        Self::new(self.days.iter().map(f).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(WEATHER_HEADER);
        out.push('\n');
        for d in &self.days {
            out.push_str(&format!("{},{},{}\n", d.day, d.max_temp, d.sunshine_hours));
        }
        out
    }
}

/// Parses a weather CSV with header `day,max_temp_c,sunshine_h`.
pub fn load_weather(text: &str) -> Result<WeatherSeries, WeatherError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| WeatherError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != WEATHER_HEADER {
        return Err(WeatherError::BadHeader(header));
    }
    let mut days = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| WeatherError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let field = |k: usize, name: &'static str| -> Result<&str, WeatherError> {
            record.get(k).ok_or(WeatherError::Malformed {
                line,
                message: format!("missing {name}"),
            })
        };
        let day_s = field(0, "day")?;
        let day: u16 = day_s.parse().map_err(|_| WeatherError::OutOfRangeValue {
            line,
            field: "day",
            value: day_s.to_string(),
        })?;
        let parse = |s: &str, name: &'static str| -> Result<f64, WeatherError> {
            s.parse::<f64>().map_err(|_| WeatherError::Malformed {
                line,
                message: format!("{name} is not a number: {s}"),
            })
        };
        let max_temp = parse(field(1, "max_temp_c")?, "max_temp_c")?;
        let sunshine_hours = parse(field(2, "sunshine_h")?, "sunshine_h")?;
        if !(0.0..=24.0).contains(&sunshine_hours) {
            return Err(WeatherError::OutOfRangeValue {
                line,
                field: "sunshine_h",
                value: sunshine_hours.to_string(),
            });
        }
        days.push(DayWeather {
            day,
            max_temp,
            sunshine_hours,
        });
    }
    WeatherSeries::new(days)
}

/// Seasonal climate used by the weather generator.
///
/// Temperature and sunshine follow `mean + amplitude * cos(2π (d - peak_day) / 365)`
/// plus uniform noise in `[-noise, noise]`; sunshine is clamped to `[0, 24]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClimateProfile {
    pub temp_mean: f64,
    pub temp_amplitude: f64,
    pub temp_noise: f64,
    pub sun_mean: f64,
    pub sun_amplitude: f64,
    pub sun_noise: f64,
    pub peak_day: u16,
}

impl Default for ClimateProfile {
    /// A cool, cloudy temperate year.
    fn default() -> Self {
        Self {
            temp_mean: 14.0,
            temp_amplitude: 8.0,
            temp_noise: 3.0,
            sun_mean: 4.5,
            sun_amplitude: 2.5,
            sun_noise: 2.0,
            peak_day: 196,
        }
    }
}

pub fn synth_weather(seed: u64, profile: &ClimateProfile) -> WeatherSeries {
    let mut rng = SimRng::substream(seed, TAG_WEATHER);
    let days = (1..=DAYS_PER_YEAR)
        .map(|day| {
            let phase = (2.0 * PI * (day as f64 - profile.peak_day as f64) / DAYS_PER_YEAR as f64).cos();
            let t_noise = rng.uniform_in(-1.0, 1.0) * profile.temp_noise;
            let s_noise = rng.uniform_in(-1.0, 1.0) * profile.sun_noise;
            DayWeather {
                day,
                max_temp: profile.temp_mean + profile.temp_amplitude * phase + t_noise,
                sunshine_hours: (profile.sun_mean + profile.sun_amplitude * phase + s_noise).clamp(0.0, 24.0),
            }
        })
        .collect();
    WeatherSeries::new(days).expect("generator covers every day with clamped values")
}

/// Largest control the actuators may apply.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlLimits {
    pub max_uplift: f64,
    pub max_extra_light: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            max_uplift: 4.0,
            max_extra_light: 4.0,
        }
    }
}

/// Temperature uplift and supplementary light applied on days inside
/// `active_window` (inclusive).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvControl {
    pub temp_uplift: f64,
    pub extra_light_hours: f64,
    pub active_window: (u16, u16),
}

impl EnvControl {
    pub fn new(
        temp_uplift: f64,
        extra_light_hours: f64,
        active_window: (u16, u16),
        limits: &ControlLimits,
    ) -> Result<Self, WeatherError> {
        if !(0.0..=limits.max_uplift).contains(&temp_uplift) {
            return Err(WeatherError::InvalidControl(format!(
                "temperature uplift {temp_uplift} outside [0, {}]",
                limits.max_uplift
            )));
        }
        if !(0.0..=limits.max_extra_light).contains(&extra_light_hours) {
            return Err(WeatherError::InvalidControl(format!(
                "extra light {extra_light_hours} h outside [0, {}]",
                limits.max_extra_light
            )));
        }
        if active_window.0 > active_window.1 {
            return Err(WeatherError::InvalidControl(format!(
                "window starts on day {} after it ends on day {}",
                active_window.0, active_window.1
            )));
        }
        Ok(Self {
            temp_uplift,
            extra_light_hours,
            active_window,
        })
    }

    pub fn is_active(&self, day: u16) -> bool {
        (self.active_window.0..=self.active_window.1).contains(&day)
    }

    /// True when the control changes nothing.
    pub fn is_noop(&self) -> bool {
        self.temp_uplift == 0.0 && self.extra_light_hours == 0.0
    }
}

/// Hours of foraging on a day.
///
/// The effective temperature is the daily maximum plus any active uplift.
/// Below 15 °C nobody forages; at or above it the colony forages for the
/// sunshine hours plus any active extra light, capped at `cap`.
pub fn foraging_hours(dw: &DayWeather, ctrl: Option<&EnvControl>, cap: f64) -> f64 {
    let active = ctrl.filter(|c| c.is_active(dw.day));
    let (uplift, extra) = active.map_or((0.0, 0.0), |c| (c.temp_uplift, c.extra_light_hours));
    if dw.max_temp + uplift < MIN_FORAGING_TEMP_C {
        return 0.0;
    }
    (dw.sunshine_hours + extra).min(cap).max(0.0)
}

/// Light hours available to the colony (sunshine plus active extra light),
/// ungated by temperature.
pub fn light_hours(dw: &DayWeather, ctrl: Option<&EnvControl>) -> f64 {
    dw.sunshine_hours
        + ctrl
            .filter(|c| c.is_active(dw.day))
            .map_or(0.0, |c| c.extra_light_hours)
}

/// Daily foraging cap: the baseline cap, raised by active extra light up to
/// an absolute maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoursCap {
    pub base: f64,
    pub max: f64,
}

impl Default for HoursCap {
    fn default() -> Self {
        Self { base: 9.0, max: 16.0 }
    }
}

impl HoursCap {
    pub fn for_day(&self, day: u16, ctrl: Option<&EnvControl>) -> f64 {
        match ctrl.filter(|c| c.is_active(day)) {
            Some(c) => (self.base + c.extra_light_hours).min(self.max),
            None => self.base,
        }
    }
}
