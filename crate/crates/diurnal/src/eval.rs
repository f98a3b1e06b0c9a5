//! Precision/recall evaluation of detections against ground-truth event days.
//!
//! Matching is day-granular: a flagged day is a true positive exactly when
//! it is a truth day, and an unflagged truth day is a false negative. Truth
//! days outside the evaluated universe are excluded and counted. Precision
//! with zero flags is undefined and reported as such, never as 0 or 1.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::detect::{DayScore, DetectionResult, Method};
use crate::error::{Error, Result};
use crate::ingest::EventDaySet;

/// Serializes possibly infinite thresholds as the strings "inf"/"-inf".
pub mod float_maybe_inf {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct MaybeInf;

    impl<'de> Visitor<'de> for MaybeInf {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a float or \"inf\"/\"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(E::custom),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        d.deserialize_any(MaybeInf)
    }
}

/// One point of a precision-recall sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    #[serde(with = "float_maybe_inf")]
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Counts and metrics for one detection against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    #[serde(with = "float_maybe_inf")]
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// TP/(TP+FP); undefined (None) when nothing was flagged.
    pub precision: Option<f64>,
    /// TP/(TP+FN); undefined when no truth day is in scope.
    pub recall: Option<f64>,
    pub evaluated_days: usize,
    /// Truth days outside the evaluated universe (coverage mismatch).
    pub truth_days_outside: usize,
    pub slack_days: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pr_curve: Vec<PrPoint>,
}

/// Day-granularity confusion counts (no slack).
pub fn confusion(
    result: &DetectionResult,
    truth: &EventDaySet,
    evaluated_days: &BTreeSet<NaiveDate>,
) -> Result<EvalReport> {
    confusion_with_slack(result, truth, evaluated_days, 0)
}

/// Confusion counts with optional +-`slack_days` matching.
///
/// With slack, a flagged day counts as a true positive when any truth day
/// lies within the window, and recall is the fraction of truth days with at
/// least one flagged day within the window.
pub fn confusion_with_slack(
    result: &DetectionResult,
    truth: &EventDaySet,
    evaluated_days: &BTreeSet<NaiveDate>,
    slack_days: u32,
) -> Result<EvalReport> {
    if let Some(outside) = result
        .flagged_days
        .iter()
        .find(|d| !evaluated_days.contains(d))
    {
        return Err(Error::DataCoverage(format!(
            "flagged day {outside} is outside the evaluated universe"
        )));
    }
    let truth_in: BTreeSet<NaiveDate> = truth
        .days
        .intersection(evaluated_days)
        .copied()
        .collect();
    let truth_days_outside = truth.days.len() - truth_in.len();

    let near = |a: NaiveDate, b: NaiveDate| {
        (a - b).num_days().unsigned_abs() <= slack_days as u64
    };

    let (tp, fp, fn_count, detected_truth) = if slack_days == 0 {
        let tp = result.flagged_days.intersection(&truth_in).count();
        let fp = result.flagged_days.len() - tp;
        let fn_count = truth_in.len() - tp;
        (tp, fp, fn_count, tp)
    } else {
        let tp = result
            .flagged_days
            .iter()
            .filter(|f| truth_in.iter().any(|t| near(**f, *t)))
            .count();
        let fp = result.flagged_days.len() - tp;
        let detected = truth_in
            .iter()
            .filter(|t| result.flagged_days.iter().any(|f| near(*f, **t)))
            .count();
        (tp, fp, truth_in.len() - detected, detected)
    };

    let precision = if tp + fp > 0 {
        Some(tp as f64 / (tp + fp) as f64)
    } else {
        None
    };
    let recall = if truth_in.is_empty() {
        None
    } else {
        Some(detected_truth as f64 / truth_in.len() as f64)
    };

    Ok(EvalReport {
        method: result.method,
        threshold: result.threshold,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        precision,
        recall,
        evaluated_days: evaluated_days.len(),
        truth_days_outside,
        slack_days,
        pr_curve: Vec::new(),
    })
}

/// Precision-recall sweep over all distinct score values plus +-inf
/// sentinels. Scores outside `evaluated_days` are ignored.
pub fn pr_curve(
    scores: &[DayScore],
    truth: &EventDaySet,
    evaluated_days: &BTreeSet<NaiveDate>,
) -> Vec<PrPoint> {
    let mut in_scope: Vec<(f64, bool)> = scores
        .iter()
        .filter(|s| evaluated_days.contains(&s.day))
        .map(|s| (s.score, truth.days.contains(&s.day)))
        .collect();
    in_scope.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_truth = in_scope.iter().filter(|(_, t)| *t).count();

    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(in_scope.iter().map(|(s, _)| *s));
    thresholds.dedup_by(|a, b| a == b);
    thresholds.push(f64::INFINITY);

    let mut points = Vec::with_capacity(thresholds.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    for t in thresholds {
        while i < in_scope.len() && in_scope[i].0 < t {
            if in_scope[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = if tp + fp > 0 {
            Some(tp as f64 / (tp + fp) as f64)
        } else {
            None
        };
        let recall = if total_truth > 0 {
            Some(tp as f64 / total_truth as f64)
        } else {
            None
        };
        points.push(PrPoint {
            threshold: t,
            precision,
            recall,
        });
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn days(n: u64) -> Vec<NaiveDate> {
        let d0 = date("2005-09-17");
        (0..n).map(|i| d0 + chrono::Days::new(i)).collect()
    }

    fn result_from(flagged: &[NaiveDate]) -> DetectionResult {
        DetectionResult {
            method: Method::Delta,
            threshold: -0.5,
            flagged_days: flagged.iter().copied().collect(),
            scores: Vec::new(),
        }
    }

    fn truth_from(days: &[NaiveDate]) -> EventDaySet {
        EventDaySet {
            days: days.iter().copied().collect(),
            min_precip_mm: 3.0,
        }
    }

    #[test]
    fn perfect_detector() {
        let universe = days(10);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let flagged = [universe[1], universe[2]];
        let report = confusion(&result_from(&flagged), &truth_from(&flagged), &evaluated).unwrap();
        assert_eq!(report.true_positives, 2);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.precision, Some(1.0));
        assert_eq!(report.recall, Some(1.0));
        assert_eq!(report.evaluated_days, 10);
    }

    #[test]
    fn no_flags_means_undefined_precision() {
        let universe = days(10);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let report = confusion(
            &result_from(&[]),
            &truth_from(&[universe[0]]),
            &evaluated,
        )
        .unwrap();
        assert_eq!(report.precision, None);
        assert_eq!(report.recall, Some(0.0));
        assert_eq!(report.false_negatives, 1);
        // explicit null in the JSON output, never 0 or 1
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["precision"], serde_json::Value::Null);
    }

    #[test]
    fn truth_outside_universe_is_excluded_and_counted() {
        let universe = days(5);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let outside = date("2006-06-01");
        let report = confusion(
            &result_from(&[universe[1]]),
            &truth_from(&[universe[1], outside]),
            &evaluated,
        )
        .unwrap();
        assert_eq!(report.truth_days_outside, 1);
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.recall, Some(1.0));
    }

    #[test]
    fn flagged_outside_universe_is_an_error() {
        let universe = days(5);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let outside = date("2006-06-01");
        assert!(matches!(
            confusion(&result_from(&[outside]), &truth_from(&[]), &evaluated),
            Err(Error::DataCoverage(_))
        ));
    }

    #[test]
    fn counts_partition_consistently() {
        let universe = days(20);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let truth = truth_from(&universe[2..8].to_vec());
        let flagged: Vec<NaiveDate> = universe[5..12].to_vec();
        let report = confusion(&result_from(&flagged), &truth, &evaluated).unwrap();
        assert_eq!(
            report.true_positives + report.false_negatives,
            truth.days.len()
        );
        assert_eq!(
            report.true_positives + report.false_positives,
            flagged.len()
        );
        // precision * (TP+FP) and recall * (TP+FN) recover integer counts
        let p = report.precision.unwrap() * (report.true_positives + report.false_positives) as f64;
        let r = report.recall.unwrap() * (report.true_positives + report.false_negatives) as f64;
        assert!((p - p.round()).abs() < 1e-9);
        assert!((r - r.round()).abs() < 1e-9);
    }

    #[test]
    fn slack_matches_adjacent_days() {
        let universe = days(10);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        // evidence lands the day after the event
        let truth = truth_from(&[universe[3]]);
        let flagged = [universe[4]];
        let strict = confusion(&result_from(&flagged), &truth, &evaluated).unwrap();
        assert_eq!(strict.true_positives, 0);
        assert_eq!(strict.false_negatives, 1);
        let slack =
            confusion_with_slack(&result_from(&flagged), &truth, &evaluated, 1).unwrap();
        assert_eq!(slack.true_positives, 1);
        assert_eq!(slack.false_negatives, 0);
        assert_eq!(slack.recall, Some(1.0));
    }

    #[test]
    fn paper_table_fractions_are_consistent_with_counts() {
        // reference operating points: the reported percentages must agree
        // with integer confusion counts
        let cases = [
            // (tp, fp, fn, precision %, recall %)
            (32usize, 29usize, 18usize, 52.459, 64.0),
            (40, 38, 10, 51.28, 80.0),
            (40, 33, 7, 54.795, 85.106),
        ];
        for (tp, fp, fn_count, precision_pct, recall_pct) in cases {
            let p = tp as f64 / (tp + fp) as f64 * 100.0;
            let r = tp as f64 / (tp + fn_count) as f64 * 100.0;
            assert!((p - precision_pct).abs() < 5e-3, "{p} vs {precision_pct}");
            assert!((r - recall_pct).abs() < 5e-3, "{r} vs {recall_pct}");
        }
    }

    #[test]
    fn pr_endpoints() {
        let universe = days(6);
        let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
        let scores: Vec<DayScore> = [0.5, -0.5, 0.2, -0.2, 0.9, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &score)| DayScore {
                day: universe[i],
                method: Method::Basic,
                score,
            })
            .collect();
        let truth = truth_from(&[universe[1], universe[3]]);
        let curve = pr_curve(&scores, &truth, &evaluated);

        let first = curve.first().unwrap();
        assert_eq!(first.threshold, f64::NEG_INFINITY);
        assert_eq!(first.recall, Some(0.0));
        assert_eq!(first.precision, None);

        let last = curve.last().unwrap();
        assert_eq!(last.threshold, f64::INFINITY);
        assert_eq!(last.recall, Some(1.0));
        // everything flagged: precision equals the base rate
        assert_eq!(last.precision, Some(2.0 / 6.0));

        // at the minimum score nothing is strictly below
        let at_min = &curve[1];
        assert_eq!(at_min.recall, Some(0.0));
    }

    #[test]
    fn report_json_round_trips_inf_threshold() {
        let report = EvalReport {
            method: Method::Basic,
            threshold: f64::INFINITY,
            true_positives: 1,
            false_positives: 0,
            false_negatives: 0,
            precision: Some(1.0),
            recall: Some(1.0),
            evaluated_days: 3,
            truth_days_outside: 0,
            slack_days: 0,
            pr_curve: vec![PrPoint {
                threshold: f64::NEG_INFINITY,
                precision: None,
                recall: Some(0.0),
            }],
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.threshold, f64::INFINITY);
        assert_eq!(back.pr_curve[0].threshold, f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn confusion_matches_brute_force(
            flags in proptest::collection::vec(any::<bool>(), 1..60),
            truths in proptest::collection::vec(any::<bool>(), 1..60),
        ) {
            let n = flags.len().min(truths.len());
            let universe = days(n as u64);
            let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
            let flagged: Vec<NaiveDate> = (0..n).filter(|&i| flags[i]).map(|i| universe[i]).collect();
            let truth_days: Vec<NaiveDate> = (0..n).filter(|&i| truths[i]).map(|i| universe[i]).collect();
            let report = confusion(&result_from(&flagged), &truth_from(&truth_days), &evaluated).unwrap();

            let mut tp = 0;
            let mut fp = 0;
            let mut fn_count = 0;
            for i in 0..n {
                match (flags[i], truths[i]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_count += 1,
                    (false, false) => {}
                }
            }
            prop_assert_eq!(report.true_positives, tp);
            prop_assert_eq!(report.false_positives, fp);
            prop_assert_eq!(report.false_negatives, fn_count);
        }

        #[test]
        fn pr_recall_monotone_and_matches_brute_force(
            raw in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 1..60),
        ) {
            let universe = days(raw.len() as u64);
            let evaluated: BTreeSet<NaiveDate> = universe.iter().copied().collect();
            let scores: Vec<DayScore> = raw
                .iter()
                .enumerate()
                .map(|(i, &(score, _))| DayScore {
                    day: universe[i],
                    method: Method::Basic,
                    score,
                })
                .collect();
            let truth_days: Vec<NaiveDate> = raw
                .iter()
                .enumerate()
                .filter(|(_, (_, t))| *t)
                .map(|(i, _)| universe[i])
                .collect();
            let truth = truth_from(&truth_days);
            let curve = pr_curve(&scores, &truth, &evaluated);

            let mut prev_recall = -1.0;
            for point in &curve {
                if let Some(r) = point.recall {
                    prop_assert!(r >= prev_recall);
                    prev_recall = r;
                }
                // brute force at this threshold
                let flagged: Vec<NaiveDate> = scores
                    .iter()
                    .filter(|s| s.score < point.threshold)
                    .map(|s| s.day)
                    .collect();
                let tp = flagged.iter().filter(|d| truth.days.contains(d)).count();
                let expected_precision = if flagged.is_empty() {
                    None
                } else {
                    Some(tp as f64 / flagged.len() as f64)
                };
                let expected_recall = if truth_days.is_empty() {
                    None
                } else {
                    Some(tp as f64 / truth_days.len() as f64)
                };
                prop_assert_eq!(point.precision, expected_precision);
                prop_assert_eq!(point.recall, expected_recall);
            }
        }
    }
}
