//! Smoothed, sensor-averaged, and high-passed coefficient series.
//!
//! Per-sensor daily coefficient series are smoothed with an iterated
//! centered moving mean of fixed calendar width (one week by default),
//! averaged across sensors, and differenced to remove slow seasonal trends.

use std::collections::BTreeMap;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Modality;
use crate::series::DailySeries;

/// Default smoothing passes for the one-week low-pass filter.
pub const DEFAULT_SMOOTH_ITERATIONS: usize = 3;

/// Default centered window width in days.
pub const DEFAULT_SMOOTH_WINDOW_DAYS: i64 = 7;

/// Whether the smooth mean is built by smoothing each sensor before
/// averaging (as stated) or by smoothing the averaged series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothOrder {
    #[default]
    SmoothThenAverage,
    AverageThenSmooth,
}

impl std::str::FromStr for SmoothOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth-then-average" => Ok(SmoothOrder::SmoothThenAverage),
            "average-then-smooth" => Ok(SmoothOrder::AverageThenSmooth),
            other => Err(Error::InvalidConfig(format!(
                "unknown smoothing order `{other}`"
            ))),
        }
    }
}

/// Iterated centered moving mean over a calendar window.
///
/// Each pass replaces every value with the mean of the available values in
/// the centered window; dates absent from the series (gaps, boundaries)
/// simply do not contribute. The output is defined on the same dates as the
/// input.
pub fn lowpass(series: &DailySeries, window_days: i64, iterations: usize) -> Result<DailySeries> {
    if window_days < 1 || window_days % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "smoothing window must be odd and positive, got {window_days}"
        )));
    }
    if iterations < 1 {
        return Err(Error::InvalidConfig(
            "smoothing iterations must be >= 1".into(),
        ));
    }
    let half = window_days / 2;
    let mut current = series.clone();
    for _ in 0..iterations {
        let mut next = DailySeries::new();
        for (day, _) in current.iter() {
            let mut sum = 0.0;
            let mut count = 0usize;
            for offset in -half..=half {
                if let Some(v) = current.get(day + Duration::days(offset)) {
                    sum += v;
                    count += 1;
                }
            }
            next.insert(day, sum / count as f64);
        }
        current = next;
    }
    Ok(current)
}

/// One-week low-pass with the default window.
pub fn lowpass_week(series: &DailySeries, iterations: usize) -> Result<DailySeries> {
    lowpass(series, DEFAULT_SMOOTH_WINDOW_DAYS, iterations)
}

/// Per-date arithmetic mean over the sensors reporting that date.
///
/// A date with no reporting sensor is absent from the output.
pub fn average_over_sensors(per_sensor: &BTreeMap<String, DailySeries>) -> DailySeries {
    let mut sums: BTreeMap<chrono::NaiveDate, (f64, usize)> = BTreeMap::new();
    for series in per_sensor.values() {
        for (day, value) in series.iter() {
            let entry = sums.entry(day).or_insert((0.0, 0));
            entry.0 += value;
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(day, (sum, count))| (day, sum / count as f64))
        .collect()
}

/// Pointwise difference `E - S` on common dates.
pub fn highpass(e: &DailySeries, s: &DailySeries) -> DailySeries {
    e.iter()
        .filter_map(|(day, ev)| s.get(day).map(|sv| (day, ev - sv)))
        .collect()
}

/// Derived series for one coefficient index of one modality.
#[derive(Debug, Clone)]
pub struct CoefficientSeries {
    pub modality: Modality,
    /// Component index k (1-based; 0 is the daily mean).
    pub component: usize,
    /// Raw per-sensor daily series e_ik.
    pub per_sensor: BTreeMap<String, DailySeries>,
    /// Smoothed per-sensor series s_ik.
    pub per_sensor_smoothed: BTreeMap<String, DailySeries>,
    /// Sensor-averaged series E_k.
    pub averaged: DailySeries,
    /// Sensor-averaged smooth series S_k.
    pub averaged_smoothed: DailySeries,
    /// High-passed series D_k = E_k - S_k.
    pub highpassed: DailySeries,
}

/// Builds the full set of derived series from per-sensor coefficients.
pub fn build_coefficient_series(
    modality: Modality,
    component: usize,
    per_sensor: BTreeMap<String, DailySeries>,
    window_days: i64,
    iterations: usize,
    order: SmoothOrder,
) -> Result<CoefficientSeries> {
    if per_sensor.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let per_sensor_smoothed: BTreeMap<String, DailySeries> = per_sensor
        .iter()
        .map(|(sensor, series)| {
            lowpass(series, window_days, iterations).map(|s| (sensor.clone(), s))
        })
        .collect::<Result<_>>()?;
    let averaged = average_over_sensors(&per_sensor);
    let averaged_smoothed = match order {
        SmoothOrder::SmoothThenAverage => average_over_sensors(&per_sensor_smoothed),
        SmoothOrder::AverageThenSmooth => lowpass(&averaged, window_days, iterations)?,
    };
    let highpassed = highpass(&averaged, &averaged_smoothed);
    Ok(CoefficientSeries {
        modality,
        component,
        per_sensor,
        per_sensor_smoothed,
        averaged,
        averaged_smoothed,
        highpassed,
    })
}
