use crate::dr::{DomainRandomizationConfig, Interval, Provenance};
use crate::rapp::RappBounds;
use crate::sim::EnvironmentSpec;

/// Encoding of a DR config as `(low, high)` pairs, one per parameter, in
/// environment parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    pub params: Vec<String>,
    pub boxes: Vec<Interval>,
    pub defaults: Vec<f64>,
}

impl ConfigSpace {
    /// Parameters with a feasible RAPP interval; the rest stay at defaults.
    pub fn from_bounds(spec: &EnvironmentSpec, bounds: &RappBounds) -> Self {
        let mut s = Self { params: Vec::new(), boxes: Vec::new(), defaults: Vec::new() };
        for p in &spec.param_specs {
            if let Some(iv) = bounds.interval(&p.name) {
                s.params.push(p.name.clone());
                s.boxes.push(iv);
                s.defaults.push(p.default);
            }
        }
        s
    }

    /// Every parameter, boxed by its valid range.
    pub fn valid_ranges(spec: &EnvironmentSpec) -> Self {
        Self {
            params: spec.param_specs.iter().map(|p| p.name.clone()).collect(),
            boxes: spec.param_specs.iter().map(|p| Interval::new(p.valid_range.min, p.valid_range.max)).collect(),
            defaults: spec.param_specs.iter().map(|p| p.default).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.params.len()
    }

    /// Box for each coordinate; both ends of a pair share the parameter box.
    pub fn coord_bounds(&self) -> Vec<Interval> {
        self.boxes.iter().flat_map(|b| [*b, *b]).collect()
    }

    pub fn coord_names(&self) -> Vec<String> {
        self.params.iter().flat_map(|p| [format!("{p}.low"), format!("{p}.high")]).collect()
    }

    /// Both ends at the simulator default.
    pub fn default_vector(&self) -> Vec<f64> {
        self.defaults.iter().flat_map(|d| [*d, *d]).collect()
    }

    /// Parameters the config leaves out encode as their default.
    pub fn encode(&self, config: &DomainRandomizationConfig) -> Vec<f64> {
        self.params
            .iter()
            .zip(&self.defaults)
            .flat_map(|(p, d)| match config.intervals.get(p) {
                Some(iv) => [iv.low, iv.high],
                None => [*d, *d],
            })
            .collect()
    }

    /// Sort each pair, then clip it into the parameter box.
    pub fn decode(&self, v: &[f64], provenance: Provenance) -> DomainRandomizationConfig {
        assert_eq!(v.len(), self.dim(), "vector length must match the space");
        let mut c = DomainRandomizationConfig::empty(provenance);
        for (i, (p, b)) in self.params.iter().zip(&self.boxes).enumerate() {
            let (a, z) = (v[2 * i], v[2 * i + 1]);
            let (lo, hi) = if a <= z { (a, z) } else { (z, a) };
            c.intervals.insert(p.clone(), Interval::new(lo.clamp(b.low, b.high), hi.clamp(b.low, b.high)));
        }
        c
    }
}
