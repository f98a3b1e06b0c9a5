//! Day scoring and thresholded event detection.
//!
//! Three methods, all producing per-day scores in which more negative means
//! more event-like: Basic thresholds the sensor-averaged first coefficient
//! E1 of air temperature directly; Highpass thresholds D1 = E1 - S1 with the
//! seasonal trend removed; Delta thresholds the difference between the
//! high-passed air and soil series, exploiting the thermal inertia of soil.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventDaySet;
use crate::series::DailySeries;

/// Detection method.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Basic,
    Highpass,
    Delta,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Basic, Method::Highpass, Method::Delta];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Highpass => "highpass",
            Method::Delta => "delta",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Method::Basic),
            "highpass" => Ok(Method::Highpass),
            "delta" => Ok(Method::Delta),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Score of one day under one method. More negative is more event-like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayScore {
    pub day: NaiveDate,
    pub method: Method,
    pub score: f64,
}

/// Days flagged by thresholding a score series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub method: Method,
    pub threshold: f64,
    pub flagged_days: BTreeSet<NaiveDate>,
    pub scores: Vec<DayScore>,
}

fn series_scores(series: &DailySeries, method: Method) -> Vec<DayScore> {
    series
        .iter()
        .map(|(day, score)| DayScore { day, method, score })
        .collect()
}

/// Basic method: the raw E1 series of air temperature.
pub fn score_basic(e1_air: &DailySeries) -> Vec<DayScore> {
    series_scores(e1_air, Method::Basic)
}

/// Highpass method: the seasonally corrected D1 series of air temperature.
pub fn score_highpass(d1_air: &DailySeries) -> Vec<DayScore> {
    series_scores(d1_air, Method::Highpass)
}

/// Delta scores plus the dates that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaScores {
    pub scores: Vec<DayScore>,
    /// Dates present in only one of the two input series.
    pub excluded: Vec<NaiveDate>,
}

/// Delta method: D1(air) - D1(soil) on common dates.
pub fn score_delta(d1_air: &DailySeries, d1_soil: &DailySeries) -> DeltaScores {
    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for (day, air) in d1_air.iter() {
        match d1_soil.get(day) {
            Some(soil) => scores.push(DayScore {
                day,
                method: Method::Delta,
                score: air - soil,
            }),
            None => excluded.push(day),
        }
    }
    for (day, _) in d1_soil.iter() {
        if !d1_air.contains(day) {
            excluded.push(day);
        }
    }
    excluded.sort_unstable();
    DeltaScores { scores, excluded }
}

/// Flags exactly the days with score strictly below the threshold.
pub fn detect(method: Method, scores: &[DayScore], threshold: f64) -> Result<DetectionResult> {
    let mut seen = BTreeSet::new();
    for s in scores {
        if s.method != method {
            return Err(Error::InvalidConfig(format!(
                "score for {} passed to a {} detection",
                s.method, method
            )));
        }
        if !seen.insert(s.day) {
            return Err(Error::InvalidConfig(format!(
                "duplicate score for {} ({})",
                s.day, method
            )));
        }
    }
    let flagged_days = scores
        .iter()
        .filter(|s| s.score < threshold)
        .map(|s| s.day)
        .collect();
    Ok(DetectionResult {
        method,
        threshold,
        flagged_days,
        scores: scores.to_vec(),
    })
}

/// A calibrated operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Picks the threshold that maximizes recall subject to a precision floor.
///
/// Candidate thresholds are the distinct score values plus a sentinel above
/// the maximum (flag everything). Ties on recall prefer higher precision,
/// then the lower (more conservative) threshold. Scores outside
/// `evaluated_days` are ignored.
pub fn calibrate_threshold(
    scores: &[DayScore],
    truth: &EventDaySet,
    evaluated_days: &BTreeSet<NaiveDate>,
    min_precision: f64,
) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&min_precision) {
        return Err(Error::InvalidConfig(format!(
            "min_precision must be in [0,1], got {min_precision}"
        )));
    }
    let mut in_scope: Vec<(f64, bool)> = scores
        .iter()
        .filter(|s| evaluated_days.contains(&s.day))
        .map(|s| (s.score, truth.days.contains(&s.day)))
        .collect();
    let total_truth = in_scope.iter().filter(|(_, t)| *t).count();
    if in_scope.is_empty() || total_truth == 0 {
        return Err(Error::DataCoverage(
            "calibration needs scored event days".into(),
        ));
    }
    in_scope.sort_by(|a, b| a.0.total_cmp(&b.0));

    // walking the sorted scores, flagging everything strictly below each
    // candidate threshold
    let mut best: Option<Calibration> = None;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    let mut candidates: Vec<f64> = in_scope.iter().map(|(s, _)| *s).collect();
    candidates.dedup_by(|a, b| a == b);
    let max_score = *candidates.last().unwrap();
    candidates.push(max_score + 1.0);
    for t in candidates {
        while i < in_scope.len() && in_scope[i].0 < t {
            if in_scope[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        if tp + fp == 0 {
            continue;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / total_truth as f64;
        if precision >= min_precision {
            let better = match &best {
                None => true,
                Some(b) => {
                    recall > b.recall
                        || (recall == b.recall && precision > b.precision)
                        || (recall == b.recall && precision == b.precision && t < b.threshold)
                }
            };
            if better {
                best = Some(Calibration {
                    threshold: t,
                    precision,
                    recall,
                });
            }
        }
    }
    best.ok_or(Error::CalibrationFailed { min_precision })
}

/// Per-method resolved thresholds, serialized into score-file metadata.
pub type Thresholds = BTreeMap<Method, f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn series_from(start: &str, values: &[f64]) -> DailySeries {
        let d0 = date(start);
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (d0 + chrono::Days::new(i as u64), v))
            .collect()
    }

    #[test]
    fn threshold_semantics() {
        let e1 = series_from("2005-09-17", &[0.9, 0.2, 0.8]);
        let scores = score_basic(&e1);
        let result = detect(Method::Basic, &scores, 0.5).unwrap();
        assert_eq!(
            result.flagged_days.iter().copied().collect::<Vec<_>>(),
            vec![date("2005-09-18")]
        );

        let none = detect(Method::Basic, &scores, 0.1).unwrap();
        assert!(none.flagged_days.is_empty());

        let below_all = detect(Method::Basic, &scores, f64::NEG_INFINITY).unwrap();
        assert!(below_all.flagged_days.is_empty());

        let above_all = detect(Method::Basic, &scores, f64::INFINITY).unwrap();
        assert_eq!(above_all.flagged_days.len(), 3);
    }

    #[test]
    fn strict_inequality_at_threshold() {
        let scores = vec![
            DayScore { day: date("2005-09-17"), method: Method::Basic, score: -1.0 },
            DayScore { day: date("2005-09-18"), method: Method::Basic, score: 0.0 },
            DayScore { day: date("2005-09-19"), method: Method::Basic, score: -2.0 },
        ];
        let result = detect(Method::Basic, &scores, -0.5).unwrap();
        let days: Vec<NaiveDate> = result.flagged_days.iter().copied().collect();
        assert_eq!(days, vec![date("2005-09-17"), date("2005-09-19")]);
        // a score exactly at the threshold is not flagged
        let at = detect(Method::Basic, &scores, -1.0).unwrap();
        assert_eq!(at.flagged_days.len(), 1);
    }

    #[test]
    fn duplicate_day_rejected() {
        let scores = vec![
            DayScore { day: date("2005-09-17"), method: Method::Basic, score: -1.0 },
            DayScore { day: date("2005-09-17"), method: Method::Basic, score: 0.5 },
        ];
        assert!(detect(Method::Basic, &scores, 0.0).is_err());
    }

    #[test]
    fn highpass_matches_basic_minus_mean_on_stationary_series() {
        // zero-drift series: smoothing converges toward the mean, so the
        // high-passed score is close to the basic score minus the mean
        let values: Vec<f64> = (0..60)
            .map(|i| 0.9 + 0.01 * ((i % 7) as f64 - 3.0))
            .collect();
        let e1 = series_from("2005-09-17", &values);
        let s1 = crate::trend::lowpass_week(&e1, 3).unwrap();
        let d1 = crate::trend::highpass(&e1, &s1);
        let mean = e1.mean().unwrap();
        let basic = score_basic(&e1);
        let hp = score_highpass(&d1);
        for (b, h) in basic.iter().zip(&hp).skip(10).take(40) {
            assert!((b.score - mean - h.score).abs() < 0.01);
        }
    }

    #[test]
    fn constant_series_has_zero_highpass_scores() {
        let e1 = series_from("2005-09-17", &[0.7; 30]);
        let s1 = crate::trend::lowpass_week(&e1, 3).unwrap();
        let d1 = crate::trend::highpass(&e1, &s1);
        let scores = score_highpass(&d1);
        assert!(scores.iter().all(|s| s.score.abs() < 1e-12));
        let result = detect(Method::Highpass, &scores, -0.1).unwrap();
        assert!(result.flagged_days.is_empty());
    }

    #[test]
    fn highpass_beats_basic_under_seasonal_drift() {
        // linear seasonal drift in E1 with one event dip per 20 days;
        // separation = non-event minimum minus event maximum
        let n = 100usize;
        let mut values: Vec<f64> = (0..n).map(|i| 0.95 - 0.004 * i as f64).collect();
        let event_idx = [15usize, 35, 55, 75, 95];
        for &i in &event_idx {
            values[i] -= 0.08;
        }
        let e1 = series_from("2005-09-17", &values);
        let s1 = crate::trend::lowpass_week(&e1, 3).unwrap();
        let d1 = crate::trend::highpass(&e1, &s1);
        let d0 = date("2005-09-17");
        let is_event =
            |day: NaiveDate| event_idx.iter().any(|&i| d0 + chrono::Days::new(i as u64) == day);

        let sep = |scores: &[DayScore]| {
            let ev_max = scores
                .iter()
                .filter(|s| is_event(s.day))
                .map(|s| s.score)
                .fold(f64::NEG_INFINITY, f64::max);
            let non_min = scores
                .iter()
                .filter(|s| !is_event(s.day))
                .map(|s| s.score)
                .fold(f64::INFINITY, f64::min);
            non_min - ev_max
        };
        let sep_basic = sep(&score_basic(&e1));
        let sep_hp = sep(&score_highpass(&d1));
        // under drift the basic separation collapses below zero while the
        // high-passed separation stays positive
        assert!(sep_basic < 0.0, "basic separation {sep_basic}");
        assert!(sep_hp > 0.0, "highpass separation {sep_hp}");
    }

    #[test]
    fn delta_arithmetic() {
        let air = series_from("2005-09-17", &[0.0, -0.5, 0.1]);
        let soil = series_from("2005-09-17", &[0.0, 0.0, 0.1]);
        let delta = score_delta(&air, &soil);
        assert!(delta.excluded.is_empty());
        assert_eq!(delta.scores[0].score, 0.0);
        assert_eq!(delta.scores[1].score, -0.5);
        assert_eq!(delta.scores[2].score, 0.0);
    }

    #[test]
    fn delta_excludes_uncovered_dates() {
        let air = series_from("2005-09-17", &[0.1, 0.2]);
        let mut soil = DailySeries::new();
        soil.insert(date("2005-09-18"), 0.05);
        soil.insert(date("2005-09-19"), 0.05);
        let delta = score_delta(&air, &soil);
        assert_eq!(delta.scores.len(), 1);
        assert_eq!(delta.scores[0].day, date("2005-09-18"));
        assert_eq!(
            delta.excluded,
            vec![date("2005-09-17"), date("2005-09-19")]
        );
    }

    #[test]
    fn delta_degenerates_to_highpass_when_soil_is_zero() {
        let air = series_from("2005-09-17", &[0.2, -0.3, 0.05, -0.6]);
        let soil = series_from("2005-09-17", &[0.0, 0.0, 0.0, 0.0]);
        let delta = score_delta(&air, &soil);
        let hp = score_highpass(&air);
        for (d, h) in delta.scores.iter().zip(&hp) {
            assert_eq!(d.day, h.day);
            assert_eq!(d.score, h.score);
        }
    }

    #[test]
    fn calibration_maximizes_recall_at_precision_floor() {
        let d0 = date("2005-09-17");
        // events at indices 1, 3; scores make one clean operating point
        let scores: Vec<DayScore> = [0.9, -0.8, 0.7, -0.6, 0.5, -0.4]
            .iter()
            .enumerate()
            .map(|(i, &score)| DayScore {
                day: d0 + chrono::Days::new(i as u64),
                method: Method::Basic,
                score,
            })
            .collect();
        let truth = EventDaySet {
            days: [1u64, 3].iter().map(|&i| d0 + chrono::Days::new(i)).collect(),
            min_precip_mm: 3.0,
        };
        let evaluated: BTreeSet<NaiveDate> =
            (0..6u64).map(|i| d0 + chrono::Days::new(i)).collect();
        let cal = calibrate_threshold(&scores, &truth, &evaluated, 0.5).unwrap();
        // flagging scores below -0.4 catches both events at precision 1
        assert_eq!(cal.recall, 1.0);
        assert_eq!(cal.precision, 1.0);
        assert!(cal.threshold > -0.6 && cal.threshold <= -0.4);

        // with a floor of 0.9 the -0.4 day (non-event) must stay unflagged
        let strict = calibrate_threshold(&scores, &truth, &evaluated, 0.9).unwrap();
        assert_eq!(strict.precision, 1.0);
        assert_eq!(strict.recall, 1.0);
    }

    #[test]
    fn calibration_fails_when_floor_unreachable() {
        let d0 = date("2005-09-17");
        // the only event scores highest: every threshold catching it also
        // catches every non-event
        let scores: Vec<DayScore> = [0.9, 0.1, 0.2, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &score)| DayScore {
                day: d0 + chrono::Days::new(i as u64),
                method: Method::Basic,
                score,
            })
            .collect();
        let truth = EventDaySet {
            days: std::iter::once(d0).collect(),
            min_precip_mm: 3.0,
        };
        let evaluated: BTreeSet<NaiveDate> =
            (0..4u64).map(|i| d0 + chrono::Days::new(i)).collect();
        assert!(matches!(
            calibrate_threshold(&scores, &truth, &evaluated, 0.5),
            Err(Error::CalibrationFailed { .. })
        ));
    }

    proptest! {
        #[test]
        fn raising_threshold_never_unflags(
            scores in proptest::collection::vec(-3.0f64..3.0, 1..50),
            t in -3.0f64..3.0,
            dt in 0.0f64..2.0,
        ) {
            let d0 = date("2005-09-17");
            let scores: Vec<DayScore> = scores
                .iter()
                .enumerate()
                .map(|(i, &score)| DayScore {
                    day: d0 + chrono::Days::new(i as u64),
                    method: Method::Basic,
                    score,
                })
                .collect();
            let low = detect(Method::Basic, &scores, t).unwrap();
            let high = detect(Method::Basic, &scores, t + dt).unwrap();
            prop_assert!(low.flagged_days.is_subset(&high.flagged_days));
        }

        #[test]
        fn flag_set_matches_brute_force(
            scores in proptest::collection::vec(-3.0f64..3.0, 0..50),
            t in -3.0f64..3.0,
        ) {
            let d0 = date("2005-09-17");
            let scores: Vec<DayScore> = scores
                .iter()
                .enumerate()
                .map(|(i, &score)| DayScore {
                    day: d0 + chrono::Days::new(i as u64),
                    method: Method::Delta,
                    score,
                })
                .collect();
            let result = detect(Method::Delta, &scores, t).unwrap();
            for s in &scores {
                prop_assert_eq!(result.flagged_days.contains(&s.day), s.score < t);
            }
            prop_assert!(result
                .flagged_days
                .iter()
                .all(|d| scores.iter().any(|s| s.day == *d)));
        }
    }
}
