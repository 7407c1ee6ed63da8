use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};

/// A finite particle configuration `η ∈ N^X`, stored sparsely.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParticleConfiguration {
    counts: BTreeMap<Vertex, u64>,
    population: u64,
}

impl ParticleConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    /// `δ_x`.
    pub fn single(x: Vertex) -> Self {
        Self::with_count(x, 1)
    }

    /// `n·δ_x`.
    pub fn with_count(x: Vertex, n: u64) -> Self {
        let mut c = Self::new();
        c.add(x, n);
        c
    }

    pub fn from_counts<I: IntoIterator<Item = (Vertex, u64)>>(counts: I) -> Self {
        let mut c = Self::new();
        for (v, n) in counts {
            c.add(v, n);
        }
        c
    }

    pub fn add(&mut self, x: Vertex, n: u64) {
        if n > 0 {
            *self.counts.entry(x).or_default() += n;
            self.population += n;
        }
    }

    pub fn remove_one(&mut self, x: &Vertex) -> Result<()> {
        match self.counts.get_mut(x) {
            Some(c) => {
                *c -= 1;
                if *c == 0 {
                    self.counts.remove(x);
                }
                self.population -= 1;
                Ok(())
            }
            None => Err(Error::Precondition(format!("no particle at {x}"))),
        }
    }

    pub fn count(&self, x: &Vertex) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn is_empty(&self) -> bool {
        self.population == 0
    }

    /// Occupied sites with their counts, in canonical vertex order.
    pub fn iter(&self) -> impl Iterator<Item = (&Vertex, u64)> {
        self.counts.iter().map(|(v, &n)| (v, n))
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// `Σ_x η(x)·k(x)`.
    pub fn rate_sum(&self, graph: &WeightedGraph) -> Result<f64> {
        let mut s = 0.0;
        for (v, n) in self.iter() {
            s += n as f64 * graph.out_weight(v)?;
        }
        Ok(s)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// `η ≤ ζ` sitewise.
    pub fn dominated_by(&self, other: &ParticleConfiguration) -> bool {
        self.iter().all(|(v, n)| n <= other.count(v))
    }
}
