use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

/// One of the four general-purpose sweep ranges a parameter is searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    ZeroToInf,
    ZeroToOne,
    CenteredZero,
    CenteredOne,
}

impl GridKind {
    pub fn values(self) -> Vec<f64> {
        match self {
            GridKind::ZeroToInf => vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
            GridKind::ZeroToOne => (0..=10).map(|i| i as f64 / 10.0).collect(),
            GridKind::CenteredZero => vec![-10.0, -3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0, 10.0],
            GridKind::CenteredOne => (0..=8).map(|i| i as f64 * 0.25).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::ZeroToInf => "zero_to_inf",
            GridKind::ZeroToOne => "zero_to_one",
            GridKind::CenteredZero => "centered_zero",
            GridKind::CenteredOne => "centered_one",
        }
    }
}

/// Closed interval with possibly infinite ends. Infinite ends are open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidRange {
    pub min: f64,
    pub max: f64,
}

impl ValidRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn unbounded() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub const fn non_negative() -> Self {
        Self::new(0.0, f64::INFINITY)
    }

    pub const fn unit() -> Self {
        Self::new(0.0, 1.0)
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.min && v <= self.max
    }

    /// Clip into the range; infinite ends leave the value untouched.
    pub fn clip(&self, v: f64) -> f64 {
        v.max(self.min).min(self.max)
    }
}

impl fmt::Display for ValidRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.min.is_finite() { format!("[{:?}", self.min) } else { "(-inf".to_string() };
        let hi = if self.max.is_finite() { format!("{:?}]", self.max) } else { "inf)".to_string() };
        write!(f, "{lo}, {hi}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParameterSpec {
    pub name: String,
    pub default: f64,
    pub valid_range: ValidRange,
    pub grid_kind: GridKind,
    pub unit: String,
}

impl PhysicsParameterSpec {
    pub fn new(name: &str, default: f64, valid_range: ValidRange, grid_kind: GridKind, unit: &str) -> Self {
        Self { name: name.to_string(), default, valid_range, grid_kind, unit: unit.to_string() }
    }

    /// The sweep grid for this parameter, restricted to the valid range.
    pub fn grid(&self) -> Vec<f64> {
        self.grid_kind.values().into_iter().filter(|v| self.valid_range.contains(*v)).collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.valid_range.contains(self.default) {
            return Err(SimError::OutOfValidRange { name: self.name.clone(), value: self.default });
        }
        if self.grid().is_empty() {
            return Err(SimError::InvalidSpec(format!("parameter {} has an empty search grid", self.name)));
        }
        Ok(())
    }
}

/// Concrete physics values, one per parameter of an environment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhysicsAssignment {
    pub values: BTreeMap<String, f64>,
}

impl PhysicsAssignment {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    /// Check the assignment covers exactly `specs`, with every value valid.
    pub fn validate(&self, specs: &[PhysicsParameterSpec]) -> Result<(), SimError> {
        for name in self.values.keys() {
            if !specs.iter().any(|s| &s.name == name) {
                return Err(SimError::UnknownParameter(name.clone()));
            }
        }
        for spec in specs {
            let v = self.get(&spec.name).ok_or_else(|| SimError::MissingParameter(spec.name.clone()))?;
            if !spec.valid_range.contains(v) {
                return Err(SimError::OutOfValidRange { name: spec.name.clone(), value: v });
            }
        }
        Ok(())
    }

    pub fn defaults(specs: &[PhysicsParameterSpec]) -> Self {
        Self { values: specs.iter().map(|s| (s.name.clone(), s.default)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_documented_values() {
        assert_eq!(GridKind::ZeroToInf.values(), vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0]);
        assert_eq!(GridKind::ZeroToOne.values().len(), 11);
        assert_eq!(GridKind::ZeroToOne.values()[3], 0.3);
        assert_eq!(GridKind::CenteredOne.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]);
        let cz = GridKind::CenteredZero.values();
        assert!(cz.iter().zip(cz.iter().rev()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn grid_is_intersected_with_valid_range() {
        let p = PhysicsParameterSpec::new("m", 1.0, ValidRange::new(0.5, 5.0), GridKind::ZeroToInf, "kg");
        assert_eq!(p.grid(), vec![1.0, 3.0]);
    }

    #[test]
    fn assignment_rejects_extras_and_out_of_range() {
        let specs = vec![PhysicsParameterSpec::new("friction", 1.0, ValidRange::non_negative(), GridKind::ZeroToInf, "")];
        let ok = PhysicsAssignment::defaults(&specs);
        assert!(ok.validate(&specs).is_ok());
        assert!(matches!(ok.clone().with("x", 1.0).validate(&specs), Err(SimError::UnknownParameter(_))));
        assert!(matches!(ok.clone().with("friction", -1.0).validate(&specs), Err(SimError::OutOfValidRange { .. })));
        assert!(matches!(ok.with("friction", f64::NAN).validate(&specs), Err(SimError::OutOfValidRange { .. })));
    }
}
