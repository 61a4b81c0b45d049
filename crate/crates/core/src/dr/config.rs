use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Closed sampling interval `[low, high]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.low >= self.low && other.high <= self.high
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let low = self.low.max(other.low);
        let high = self.high.min(other.high);
        (low <= high).then_some(Interval { low, high })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

impl From<[f64; 2]> for Interval {
    fn from([low, high]: [f64; 2]) -> Self {
        Self { low, high }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.low, i.high]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.low, self.high)
    }
}

/// Where a randomization config came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    PromptDr,
    HumanDesigned,
    RandomSampling,
    NoDr,
    Uninformative,
    NoPrior,
    Cem,
    Bayrn,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Llm => "llm",
            Provenance::PromptDr => "prompt_dr",
            Provenance::HumanDesigned => "human_designed",
            Provenance::RandomSampling => "random_sampling",
            Provenance::NoDr => "no_dr",
            Provenance::Uninformative => "uninformative",
            Provenance::NoPrior => "no_prior",
            Provenance::Cem => "cem",
            Provenance::Bayrn => "bayrn",
        }
    }

    /// Configs of this provenance must sit inside the physics-prior bounds.
    pub fn requires_prior_bounds(self) -> bool {
        matches!(self, Provenance::Llm | Provenance::RandomSampling)
    }
}

/// Per-parameter uniform sampling intervals. Parameters absent from the map
/// stay at their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRandomizationConfig {
    pub provenance: Provenance,
    pub intervals: BTreeMap<String, Interval>,
}

impl DomainRandomizationConfig {
    pub fn empty(provenance: Provenance) -> Self {
        Self { provenance, intervals: BTreeMap::new() }
    }

    pub fn no_dr() -> Self {
        Self::empty(Provenance::NoDr)
    }

    pub fn with(mut self, name: &str, low: f64, high: f64) -> Self {
        self.intervals.insert(name.to_string(), Interval::new(low, high));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
