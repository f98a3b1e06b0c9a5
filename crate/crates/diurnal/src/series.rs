//! Date-indexed daily series, possibly with gaps.

use std::collections::BTreeMap;

use chrono::NaiveDate;

/// A real-valued series indexed by calendar date. Gaps are simply absent keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DailySeries(BTreeMap<NaiveDate, f64>);

impl DailySeries {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn insert(&mut self, day: NaiveDate, value: f64) {
        self.0.insert(day, value);
    }

    pub fn get(&self, day: NaiveDate) -> Option<f64> {
        self.0.get(&day).copied()
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.0.contains_key(&day)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.0.iter().map(|(d, v)| (*d, *v))
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.0.keys().copied()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.values().copied()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.0.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.0.keys().next_back().copied()
    }

    /// Mean of the stored values (None for an empty series).
    pub fn mean(&self) -> Option<f64> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.values().sum::<f64>() / self.0.len() as f64)
        }
    }

    /// Population standard deviation of the stored values.
    pub fn std(&self) -> Option<f64> {
        let mean = self.mean()?;
        let var =
            self.0.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.0.len() as f64;
        Some(var.sqrt())
    }
}

impl FromIterator<(NaiveDate, f64)> for DailySeries {
    fn from_iter<T: IntoIterator<Item = (NaiveDate, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl IntoIterator for DailySeries {
    type Item = (NaiveDate, f64);
    type IntoIter = std::collections::btree_map::IntoIter<NaiveDate, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}
