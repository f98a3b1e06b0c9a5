//! Shared run options and their serialized echo.
//!
//! Every output file embeds the configuration that produced it, so a run can
//! be reproduced from any of its artifacts.

use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trend::SmoothOrder;

/// Serde adapter for `FixedOffset` as the familiar `-05:00` string.
pub mod fixed_offset_serde {
    use chrono::FixedOffset;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        v: &FixedOffset,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<FixedOffset, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(de::Error::custom)
    }
}

/// Default deployment offset (local civil time of the site).
pub fn default_utc_offset() -> FixedOffset {
    FixedOffset::west_opt(5 * 3600).unwrap()
}

/// An inclusive, possibly half-open calendar range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DayRange {
    pub fn new(start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self> {
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                return Err(Error::InvalidConfig(format!(
                    "range start {s} is after end {e}"
                )));
            }
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start.map_or(true, |s| day >= s) && self.end.map_or(true, |e| day <= e)
    }
}

/// Options shared by the preprocessing and trend stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepOptions {
    /// Fixed local offset defining the midnight-to-midnight day.
    #[serde(with = "fixed_offset_serde")]
    pub utc_offset: FixedOffset,
    /// Censoring cut in MAD units.
    pub k_mad: f64,
    /// Retained expansion components after the daily mean.
    pub components: usize,
    /// Centered smoothing window in days (odd).
    pub smooth_window_days: i64,
    /// Smoothing passes.
    pub smooth_iterations: usize,
    pub smooth_order: SmoothOrder,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            utc_offset: default_utc_offset(),
            k_mad: crate::preprocess::DEFAULT_K_MAD,
            components: crate::pca::DEFAULT_COMPONENTS,
            smooth_window_days: crate::trend::DEFAULT_SMOOTH_WINDOW_DAYS,
            smooth_iterations: crate::trend::DEFAULT_SMOOTH_ITERATIONS,
            smooth_order: SmoothOrder::default(),
        }
    }
}

impl PrepOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_mad > 0.0) {
            return Err(Error::InvalidConfig("k_mad must be positive".into()));
        }
        if self.components == 0 || self.components > crate::preprocess::SLOTS_PER_DAY {
            return Err(Error::InvalidConfig(format!(
                "components must be in 1..=144, got {}",
                self.components
            )));
        }
        if self.smooth_window_days < 1 || self.smooth_window_days % 2 == 0 {
            return Err(Error::InvalidConfig(
                "smooth_window_days must be odd and positive".into(),
            ));
        }
        if self.smooth_iterations == 0 {
            return Err(Error::InvalidConfig(
                "smooth_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_contains() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let r = DayRange::new(Some(d("2005-09-17")), Some(d("2005-09-20"))).unwrap();
        assert!(r.contains(d("2005-09-17")));
        assert!(r.contains(d("2005-09-20")));
        assert!(!r.contains(d("2005-09-21")));
        let open = DayRange::default();
        assert!(open.contains(d("1999-01-01")));
        assert!(DayRange::new(Some(d("2005-09-20")), Some(d("2005-09-17"))).is_err());
    }

    #[test]
    fn offset_round_trips_through_serde() {
        let prep = PrepOptions::default();
        let json = serde_json::to_string(&prep).unwrap();
        assert!(json.contains("-05:00"));
        let back: PrepOptions = serde_json::from_str(&json).unwrap();
        assert_eq!(back, prep);
    }
}
