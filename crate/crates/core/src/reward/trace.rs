use serde::{Deserialize, Serialize};

use super::{RewardError, RewardProgram};
use crate::sim::RolloutTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub components: Vec<ComponentStats>,
    pub total_mean: f64,
    pub steps: usize,
}

/// Streaming mean/variance/min/max per component plus the total.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    names: Vec<String>,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    total_sum: f64,
}

impl StatsAccumulator {
    pub fn new(program: &RewardProgram) -> Self {
        let k = program.components.len();
        Self {
            names: program.components.iter().map(|c| c.name.clone()).collect(),
            n: 0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
            min: vec![f64::INFINITY; k],
            max: vec![f64::NEG_INFINITY; k],
            total_sum: 0.0,
        }
    }

    pub fn push(&mut self, per_component: &[f64], total: f64) {
        self.n += 1;
        let n = self.n as f64;
        for (i, &v) in per_component.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
            self.min[i] = self.min[i].min(v);
            self.max[i] = self.max[i].max(v);
        }
        self.total_sum += total;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<ComponentTrace, RewardError> {
        if self.n == 0 {
            return Err(RewardError::EmptyTrace);
        }
        let n = self.n as f64;
        let components = self
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| ComponentStats {
                name: name.clone(),
                mean: self.mean[i],
                std: (self.m2[i] / n).max(0.0).sqrt(),
                min: self.min[i],
                max: self.max[i],
            })
            .collect();
        Ok(ComponentTrace { components, total_mean: self.total_sum / n, steps: self.n })
    }
}

/// Per-component statistics of `program` over every step of `trace`.
pub fn trace_components(program: &RewardProgram, trace: &RolloutTrace) -> Result<ComponentTrace, RewardError> {
    let bound;
    let program = if program.catalog() == trace.feature_catalog.as_slice() {
        program
    } else {
        for id in program.identifiers() {
            if !trace.feature_catalog.contains(&id) {
                return Err(RewardError::MissingFeature(id));
            }
        }
        bound = program.rebind(&trace.feature_catalog)?;
        &bound
    };
    let mut acc = StatsAccumulator::new(program);
    for s in trace.steps.iter().take(trace.episode_length) {
        let e = program.evaluate(&s.features)?;
        acc.push(&e.per_component, e.total);
    }
    acc.finish()
}
