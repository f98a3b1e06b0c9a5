//! Labeled synthetic sensor corpora at desk scale.
//!
//! The generator reproduces the signal structure the detectors exploit:
//!
//! * a raised-cosine diurnal bell whose amplitude, width and center drift
//!   slowly across the corpus (seasonal shape drift),
//! * a slow ramp in the daily mean plus day-to-day weather wobble,
//! * day-scale disturbances (cloudy days) that suppress the bell in both
//!   channels at once — the non-rain confounders that cap precision,
//! * a soil channel following the air channel through a causal boxcar
//!   filter, so its diurnal cycle is lagged and attenuated and sharp rain
//!   transients smear into the following hours and day,
//! * injected rain transients: a smoothed negative rectangle in air,
//!   inherited in smeared form by soil,
//! * occasional high-jitter "bad" days to exercise censoring.
//!
//! Everything is a pure function of the configuration: a corpus-level RNG
//! stream plans shared weather and events, and each sensor draws from its
//! own stream, so output is byte-stable for a fixed seed.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GroundTruthEvent, Measurement, Modality};

/// Minutes per day.
const MINUTES_PER_DAY: usize = 1440;

/// Precipitation assigned to non-event days stays at or below this value,
/// the conventional event threshold.
pub const DEFAULT_PRECIP_THRESHOLD_MM: f64 = 3.0;

/// Generator configuration. `Default` is the tuned acceptance corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_sensors: usize,
    pub n_days: usize,
    pub start_day: NaiveDate,
    /// Number of event days drawn at random when `event_days` is not given.
    pub n_events: usize,
    /// Explicit event days; must fall inside the corpus date range.
    pub event_days: Option<BTreeSet<NaiveDate>>,
    pub seed: u64,
    /// Fixed UTC offset of the deployment, in hours east.
    pub utc_offset_hours: i32,
    /// Mean temperature at the start of the corpus.
    pub base_temp_c: f64,
    /// Peak-of-day amplitude of the diurnal bell at mid-season.
    pub diurnal_amp_c: f64,
    /// Linear seasonal modulation of the bell amplitude (fractional span;
    /// 0.5 means 1.25x at the start down to 0.75x at the end).
    pub diurnal_amp_seasonal: f64,
    /// Linear seasonal modulation of the bell width (fractional span).
    pub diurnal_width_seasonal: f64,
    /// Total seasonal slide of the bell center, in minutes.
    pub diurnal_center_drift_min: f64,
    /// Slow ramp of the daily mean.
    pub seasonal_drift_c_per_day: f64,
    /// Std of the day-to-day wobble of the daily mean.
    pub mean_wobble_std_c: f64,
    /// Lognormal sigma of the per-day amplitude weather factor.
    pub weather_amp_sigma: f64,
    /// Probability that a non-descript day is a disturbed (cloudy) day.
    pub disturbance_rate: f64,
    /// Depth of disturbances: the bell amplitude is multiplied by
    /// `1 - depth * U(0.5, 1)` on a disturbed day.
    pub disturbance_depth: f64,
    /// Phase lag of the soil diurnal cycle behind air, in hours. The soil
    /// boxcar window is twice this lag.
    pub soil_lag_hours: f64,
    /// Broadband attenuation of the soil response, in (0, 1].
    pub soil_attenuation: f64,
    /// Depth of the injected rain drop.
    pub rain_drop_c: f64,
    /// Duration of the injected rain drop in 10-minute slots.
    pub rain_duration_slots: usize,
    /// Std of per-minute sensor noise on the air channel. Soil noise is
    /// scaled by the attenuation so both channels keep comparable
    /// signal-to-noise, which is what lets the Delta method cancel
    /// common-mode disturbances.
    pub noise_std_c: f64,
    /// Probability that a sensor-day is a high-jitter bad day.
    pub bad_day_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sensors: 10,
            n_days: 200,
            start_day: NaiveDate::from_ymd_opt(2005, 9, 17).unwrap(),
            n_events: 40,
            event_days: None,
            seed: 42,
            utc_offset_hours: -5,
            base_temp_c: 15.0,
            diurnal_amp_c: 8.0,
            diurnal_amp_seasonal: 0.5,
            diurnal_width_seasonal: 0.45,
            diurnal_center_drift_min: 150.0,
            seasonal_drift_c_per_day: 0.04,
            mean_wobble_std_c: 0.25,
            weather_amp_sigma: 0.02,
            disturbance_rate: 0.4,
            disturbance_depth: 0.55,
            soil_lag_hours: 4.0,
            soil_attenuation: 0.3,
            rain_drop_c: 3.5,
            rain_duration_slots: 18,
            noise_std_c: 0.4,
            bad_day_rate: 0.02,
        }
    }
}

/// Where a rain transient was injected on an event day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub start_slot: usize,
    pub duration_slots: usize,
    pub depth_c: f64,
}

#[derive(Debug, Clone)]
struct DayParams {
    mean_c: f64,
    ramp_c: f64,
    amp_c: f64,
    width: f64,
    center_min: f64,
    event: Option<EventWindow>,
}

/// Shared (cross-sensor) plan for a corpus: weather, events, ground truth.
#[derive(Debug, Clone)]
pub struct SynthPlan {
    days: Vec<DayParams>,
    pub event_windows: BTreeMap<NaiveDate, EventWindow>,
    pub truth: Vec<GroundTruthEvent>,
}

/// Full in-memory corpus.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub measurements: Vec<Measurement>,
    pub truth: Vec<GroundTruthEvent>,
    pub event_windows: BTreeMap<NaiveDate, EventWindow>,
}

fn validate(config: &SynthConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidConfig(msg));
    if config.n_sensors == 0 || config.n_days == 0 {
        return bad("n_sensors and n_days must be positive".into());
    }
    if !(config.diurnal_amp_c > 0.0) {
        return bad("diurnal_amp_c must be positive".into());
    }
    if !(config.soil_attenuation > 0.0 && config.soil_attenuation <= 1.0) {
        return bad(format!(
            "soil_attenuation must be in (0, 1], got {}",
            config.soil_attenuation
        ));
    }
    if !(config.soil_lag_hours > 0.0 && config.soil_lag_hours <= 12.0) {
        return bad(format!(
            "soil_lag_hours must be in (0, 12], got {}",
            config.soil_lag_hours
        ));
    }
    if config.rain_duration_slots == 0 || config.rain_duration_slots > 120 {
        return bad("rain_duration_slots must be in 1..=120".into());
    }
    if !(config.rain_drop_c >= 0.0 && config.noise_std_c >= 0.0) {
        return bad("rain_drop_c and noise_std_c must be non-negative".into());
    }
    for (name, rate) in [
        ("bad_day_rate", config.bad_day_rate),
        ("disturbance_rate", config.disturbance_rate),
    ] {
        if !(0.0..=1.0).contains(&rate) {
            return bad(format!("{name} must be in [0, 1], got {rate}"));
        }
    }
    if config.utc_offset_hours.abs() > 14 {
        return bad("utc_offset_hours must be within +-14".into());
    }
    match &config.event_days {
        Some(days) => {
            let last = config.start_day + Duration::days(config.n_days as i64 - 1);
            for d in days {
                if *d < config.start_day || *d > last {
                    return bad(format!(
                        "event day {d} outside the corpus range {}..={last}",
                        config.start_day
                    ));
                }
            }
        }
        None => {
            if config.n_events > config.n_days {
                return bad(format!(
                    "n_events {} exceeds n_days {}",
                    config.n_events, config.n_days
                ));
            }
        }
    }
    Ok(())
}

fn sample_normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).unwrap().sample(rng)
    } else {
        0.0
    }
}

/// Raised-cosine bump of unit height centered at `center` minutes with a
/// half-support of `720 * width` minutes. Zero (and C1-smooth) outside.
fn bell(minute: f64, center: f64, width: f64) -> f64 {
    let half = 720.0 * width;
    let x = minute - center;
    if x.abs() >= half {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * x / half).cos())
    }
}

/// Smoothed negative rectangle; edges ramp over two slots (20 minutes).
fn event_dip(minute: f64, window: &EventWindow) -> f64 {
    let m0 = window.start_slot as f64 * 10.0;
    let m1 = (window.start_slot + window.duration_slots) as f64 * 10.0;
    let rise = (minute - (m0 - 10.0)) / 20.0;
    let fall = ((m1 + 10.0) - minute) / 20.0;
    let env = rise.min(fall).min(1.0).max(0.0);
    -window.depth_c * env
}

/// Lays out shared weather, event days and ground truth from the corpus
/// stream of the seed.
pub fn plan(config: &SynthConfig) -> Result<SynthPlan> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);

    let n = config.n_days;
    let event_indices: BTreeSet<usize> = match &config.event_days {
        Some(days) => days
            .iter()
            .map(|d| (*d - config.start_day).num_days() as usize)
            .collect(),
        None => {
            // keep the first days event-free: both the week-scale smoother
            // and the soil filter lack context at the corpus boundary
            let lead = 3.min(n.saturating_sub(config.n_events));
            let mut indices: Vec<usize> = (lead..n).collect();
            // Fisher-Yates from the corpus stream
            for i in (1..indices.len()).rev() {
                let j = rng.gen_range(0..=i);
                indices.swap(i, j);
            }
            indices.into_iter().take(config.n_events).collect()
        }
    };

    let mut days = Vec::with_capacity(n);
    let mut wobble = 0.0f64;
    let mut spell: Option<f64> = None;
    let mut event_windows = BTreeMap::new();
    let mut truth = Vec::with_capacity(n);
    for d in 0..n {
        let date = config.start_day + Duration::days(d as i64);
        let frac = if n > 1 { d as f64 / (n - 1) as f64 } else { 0.5 };
        let season = 0.5 - frac;

        wobble = 0.7 * wobble + sample_normal(&mut rng, config.mean_wobble_std_c);
        let weather_amp = (sample_normal(&mut rng, config.weather_amp_sigma)).exp();

        // overcast spells last ~4 days and cluster toward the
        // low-amplitude end of the corpus (winter storm systems); the
        // configured rate is the corpus-wide mean occupancy. Spell edges
        // ramp over a day, as fronts roll in rather than switch.
        const SPELL_END_PROB: f64 = 0.25;
        let prev_factor = spell.unwrap_or(1.0);
        if spell.is_some() && rng.gen::<f64>() < SPELL_END_PROB {
            spell = None;
        }
        if spell.is_none() {
            let occupancy = (config.disturbance_rate * (0.3 + 1.4 * frac)).min(0.95);
            let start_prob = SPELL_END_PROB * occupancy / (1.0 - occupancy);
            if rng.gen::<f64>() < start_prob.min(1.0) {
                spell = Some(1.0 - config.disturbance_depth * rng.gen_range(0.5..1.0));
            }
        }
        let disturbance_factor = (spell.unwrap_or(1.0) + prev_factor) / 2.0;

        // rainfall intensity varies: the configured drop is the heaviest
        // case, and precipitation volume scales with it
        let event = if event_indices.contains(&d) {
            let start_slot = rng.gen_range(60..=96);
            let depth_frac = rng.gen_range(0.5..1.0);
            Some(EventWindow {
                start_slot,
                duration_slots: config.rain_duration_slots,
                depth_c: config.rain_drop_c * depth_frac,
            })
        } else {
            None
        };
        let precip_mm = match &event {
            Some(w) => {
                DEFAULT_PRECIP_THRESHOLD_MM
                    + w.depth_c / config.rain_drop_c.max(1e-12) * rng.gen_range(10.0..25.0)
            }
            None => rng.gen_range(0.0..DEFAULT_PRECIP_THRESHOLD_MM),
        };

        if let Some(w) = event {
            event_windows.insert(date, w);
        }
        truth.push(GroundTruthEvent {
            day: date,
            precipitation_mm: precip_mm,
        });

        days.push(DayParams {
            mean_c: config.base_temp_c + config.seasonal_drift_c_per_day * d as f64 + wobble,
            ramp_c: 0.0, // filled below from neighbor means
            amp_c: config.diurnal_amp_c
                * (1.0 + config.diurnal_amp_seasonal * season)
                * weather_amp
                * disturbance_factor,
            width: 0.85 * (1.0 + config.diurnal_width_seasonal * season),
            center_min: 780.0 + config.diurnal_center_drift_min * (frac - 0.5),
            event,
        });
    }
    for d in 0..n {
        let prev = days[d.saturating_sub(1)].mean_c;
        let next = days[(d + 1).min(n - 1)].mean_c;
        let span = ((d + 1).min(n - 1) - d.saturating_sub(1)).max(1) as f64;
        days[d].ramp_c = (next - prev) / span;
    }

    Ok(SynthPlan {
        days,
        event_windows,
        truth,
    })
}

/// Sensor identifiers used by the generator: `s01`, `s02`, ...
pub fn sensor_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i:02}")).collect()
}

/// Generates both channels of one sensor, air rows first, then soil,
/// each in chronological order.
pub fn sensor_measurements(
    config: &SynthConfig,
    plan: &SynthPlan,
    sensor_index: usize,
) -> Vec<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 + sensor_index as u64);

    let sensor_id = format!("s{:02}", sensor_index + 1);
    let mean_offset = sample_normal(&mut rng, 0.5);
    let amp_factor = 1.0 + sample_normal(&mut rng, 0.04);
    let soil_offset = sample_normal(&mut rng, 0.3);
    let bad_days: Vec<Option<f64>> = (0..config.n_days)
        .map(|_| {
            if rng.gen::<f64>() < config.bad_day_rate {
                Some(if rng.gen::<bool>() { 1.0 } else { -1.0 })
            } else {
                None
            }
        })
        .collect();
    let jitter_amp = 6.0 * config.noise_std_c;
    let soil_noise_std = config.noise_std_c * config.soil_attenuation;

    let offset = FixedOffset::east_opt(config.utc_offset_hours * 3600).unwrap();
    let base_dt: DateTime<FixedOffset> = config
        .start_day
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_local_timezone(offset)
        .unwrap();

    // causal boxcar over the air channel: group delay ~ soil_lag_hours
    let window = ((config.soil_lag_hours * 120.0).round() as usize).max(1);
    let mut ring: Vec<f64> = Vec::with_capacity(window);
    let mut ring_pos = 0usize;
    let mut ring_sum = 0.0f64;

    let total = config.n_days * MINUTES_PER_DAY;
    let mut air_rows = Vec::with_capacity(total);
    let mut soil_rows = Vec::with_capacity(total);

    for (d, day) in plan.days.iter().enumerate() {
        for m in 0..MINUTES_PER_DAY {
            let minute = m as f64;
            let mut det_air = day.mean_c
                + mean_offset
                + day.amp_c * amp_factor * bell(minute, day.center_min, day.width)
                + day.ramp_c * (minute / MINUTES_PER_DAY as f64 - 0.5);
            if let Some(w) = &day.event {
                det_air += event_dip(minute, w);
            }

            if ring.len() < window {
                ring.push(det_air);
                ring_sum += det_air;
            } else {
                ring_sum += det_air - ring[ring_pos];
                ring[ring_pos] = det_air;
                ring_pos = (ring_pos + 1) % window;
            }
            let boxcar = ring_sum / ring.len() as f64;
            let det_soil = config.base_temp_c
                + soil_offset
                + config.soil_attenuation * (boxcar - config.base_temp_c);

            let jitter = bad_days[d]
                .map(|phase| jitter_amp * phase * if (m / 10) % 2 == 0 { 1.0 } else { -1.0 })
                .unwrap_or(0.0);
            let air_value = det_air + sample_normal(&mut rng, config.noise_std_c) + jitter;
            let soil_value = det_soil
                + sample_normal(&mut rng, soil_noise_std)
                + jitter * config.soil_attenuation;

            let timestamp = base_dt + Duration::minutes((d * MINUTES_PER_DAY + m) as i64);
            air_rows.push(Measurement {
                sensor_id: sensor_id.clone(),
                modality: Modality::AirTemperature,
                timestamp,
                value: air_value,
            });
            soil_rows.push(Measurement {
                sensor_id: sensor_id.clone(),
                modality: Modality::SoilTemperature,
                timestamp,
                value: soil_value,
            });
        }
    }

    air_rows.extend(soil_rows);
    air_rows
}

/// Generates the full corpus in memory.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    let plan = plan(config)?;
    let mut measurements =
        Vec::with_capacity(config.n_sensors * config.n_days * MINUTES_PER_DAY * 2);
    for i in 0..config.n_sensors {
        measurements.extend(sensor_measurements(config, &plan, i));
    }
    Ok(SynthData {
        measurements,
        truth: plan.truth,
        event_windows: plan.event_windows,
    })
}
