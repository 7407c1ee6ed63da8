use std::collections::HashMap;

use super::{Vertex, WeightedGraph};
use crate::error::Result;

/// Scale for the fixed-point copy of `k(x)`; sums of these are exact.
pub const K_SCALE: f64 = (1u64 << 40) as f64;

struct SiteData {
    /// Targets with cumulative weights, for inverse-CDF sampling.
    targets: Box<[(u32, f64)]>,
    k: f64,
    k_fixed: i64,
}

/// Per-replica interning of vertices with lazily materialised neighbour tables.
///
/// Simulation code works with compact `u32` site ids; a cache is owned by a
/// single replica, so no synchronisation is needed.
pub struct SiteCache<'g> {
    graph: &'g WeightedGraph,
    index: HashMap<Vertex, u32>,
    vertices: Vec<Vertex>,
    data: Vec<Option<SiteData>>,
}

impl<'g> SiteCache<'g> {
    pub fn new(graph: &'g WeightedGraph) -> Self {
        SiteCache {
            graph,
            index: HashMap::new(),
            vertices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn intern(&mut self, v: &Vertex) -> u32 {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.vertices.push(v.clone());
        self.index.insert(v.clone(), i);
        self.data.push(None);
        i
    }

    pub fn lookup(&self, v: &Vertex) -> Option<u32> {
        self.index.get(v).copied()
    }

    pub fn vertex(&self, site: u32) -> &Vertex {
        &self.vertices[site as usize]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn ensure(&mut self, site: u32) -> Result<()> {
        if self.data[site as usize].is_some() {
            return Ok(());
        }
        let v = self.vertices[site as usize].clone();
        let nbrs = self.graph.neighbors(&v)?;
        let mut acc = 0.0;
        let mut targets = Vec::with_capacity(nbrs.len());
        for (y, w) in nbrs {
            acc += w;
            targets.push((self.intern(&y), acc));
        }
        let k = acc;
        self.data[site as usize] = Some(SiteData {
            targets: targets.into_boxed_slice(),
            k,
            k_fixed: (k * K_SCALE).round() as i64,
        });
        Ok(())
    }

    /// `k(x)` of a site.
    pub fn k(&mut self, site: u32) -> Result<f64> {
        self.ensure(site)?;
        Ok(self.data[site as usize].as_ref().expect("ensured").k)
    }

    pub fn k_fixed(&mut self, site: u32) -> Result<i64> {
        self.ensure(site)?;
        Ok(self.data[site as usize].as_ref().expect("ensured").k_fixed)
    }

    /// Picks a target `y` with probability `μ(x,y)/k(x)` given `u ∈ [0,1)`.
    pub fn sample_target(&mut self, site: u32, u: f64) -> Result<Option<u32>> {
        self.ensure(site)?;
        let d = self.data[site as usize].as_ref().expect("ensured");
        if d.targets.is_empty() {
            return Ok(None);
        }
        let x = u * d.k;
        let pos = d.targets.partition_point(|&(_, c)| c <= x);
        Ok(Some(d.targets[pos.min(d.targets.len() - 1)].0))
    }

    /// Out-neighbour site ids with their (non-cumulative) weights.
    pub fn neighbors(&mut self, site: u32) -> Result<Vec<(u32, f64)>> {
        self.ensure(site)?;
        let d = self.data[site as usize].as_ref().expect("ensured");
        let mut prev = 0.0;
        Ok(d.targets
            .iter()
            .map(|&(t, c)| {
                let w = c - prev;
                prev = c;
                (t, w)
            })
            .collect())
    }
}
