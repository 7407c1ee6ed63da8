use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ParticleConfiguration;
use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};

/// Which finite-horizon survival flag to estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Population positive at the horizon.
    Weak,
    /// Marked vertex occupied at some time in `[T/2, T]`.
    Local,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Weak => "weak",
            Mode::Local => "local",
        })
    }
}

pub const DEFAULT_CEILING: u64 = 1_000_000;

/// Geometric checkpoint grid `{T/16, T/8, T/4, T/2, T}`.
pub fn default_checkpoints(horizon: f64) -> Vec<f64> {
    [16.0, 8.0, 4.0, 2.0, 1.0].iter().map(|d| horizon / d).collect()
}

/// Full description of a BRW experiment. `None` caps mean `∞`.
#[derive(Clone, Debug)]
pub struct SimulationPlan {
    pub graph: Arc<WeightedGraph>,
    pub lambda: f64,
    /// Site cap `m`.
    pub cap: Option<u32>,
    /// Generation cap `n₀`.
    pub generation_cap: Option<u32>,
    /// Total-birth cap `n̄`.
    pub birth_cap: Option<u64>,
    pub horizon: f64,
    pub initial: ParticleConfiguration,
    /// Vertex watched for local survival.
    pub marked: Vertex,
    pub seed: u64,
    pub replicas: u64,
    pub checkpoints: Vec<f64>,
    pub population_ceiling: u64,
}

impl SimulationPlan {
    /// Plain BRW started from one particle at `start`, which is also the
    /// marked vertex.
    pub fn new(graph: Arc<WeightedGraph>, lambda: f64, horizon: f64, start: Vertex) -> Self {
        SimulationPlan {
            graph,
            lambda,
            cap: None,
            generation_cap: None,
            birth_cap: None,
            horizon,
            initial: ParticleConfiguration::single(start.clone()),
            marked: start,
            seed: 0,
            replicas: 1000,
            checkpoints: default_checkpoints(horizon),
            population_ceiling: DEFAULT_CEILING,
        }
    }

    pub fn cap(mut self, m: Option<u32>) -> Self {
        self.cap = m;
        self
    }

    pub fn generation_cap(mut self, n0: Option<u32>) -> Self {
        self.generation_cap = n0;
        self
    }

    pub fn birth_cap(mut self, n_bar: Option<u64>) -> Self {
        self.birth_cap = n_bar;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn replicas(mut self, n: u64) -> Self {
        self.replicas = n;
        self
    }

    pub fn initial(mut self, initial: ParticleConfiguration) -> Self {
        self.initial = initial;
        self
    }

    pub fn marked(mut self, x0: Vertex) -> Self {
        self.marked = x0;
        self
    }

    pub fn ceiling(mut self, ceiling: u64) -> Self {
        self.population_ceiling = ceiling;
        self
    }

    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self.checkpoints = default_checkpoints(horizon);
        self
    }

    pub fn checkpoints(mut self, times: Vec<f64>) -> Self {
        self.checkpoints = times;
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", "must be nonnegative and finite"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        if self.cap == Some(0) {
            return Err(Error::param("m", "cap must be at least 1"));
        }
        if self.population_ceiling == 0 {
            return Err(Error::param("population_ceiling", "must be positive"));
        }
        if self.initial.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        for (v, n) in self.initial.iter() {
            if !self.graph.contains(v) {
                return Err(Error::UnknownVertex(v.to_string()));
            }
            if let Some(m) = self.cap {
                if n > m as u64 {
                    return Err(Error::param("initial", format!("{n} particles at {v} exceed cap {m}")));
                }
            }
        }
        if !self.graph.contains(&self.marked) {
            return Err(Error::UnknownVertex(self.marked.to_string()));
        }
        if self
            .checkpoints
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= self.horizon))
            || self.checkpoints.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::param("checkpoints", "must be sorted and lie in [0, T]"));
        }
        Ok(())
    }
}
