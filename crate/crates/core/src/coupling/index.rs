use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::sim::ParticleConfiguration;

/// Index graph `I ⊆ Z` whose edges are translations: `i → i + o` for every
/// offset `o`, restricted to `[lo, hi]`.
///
/// Time is added by the percolation field, so `(i,n) → (i+o, n+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexGraph {
    pub offsets: Vec<i64>,
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl IndexGraph {
    /// `Z` with nearest-neighbour edges.
    pub fn z_line() -> Self {
        IndexGraph {
            offsets: vec![-1, 1],
            lo: None,
            hi: None,
        }
    }

    /// `N` with nearest-neighbour edges.
    pub fn n_line() -> Self {
        IndexGraph {
            offsets: vec![-1, 1],
            lo: Some(0),
            hi: None,
        }
    }

    /// A single index with a loop, for one-vertex graphs.
    pub fn point() -> Self {
        IndexGraph {
            offsets: vec![0],
            lo: Some(0),
            hi: Some(0),
        }
    }

    /// Drift scheme: every index moves forward by `d1` or `d2`.
    pub fn drift(d1: i64, d2: i64) -> Result<Self> {
        if d1 == d2 {
            return Err(Error::param("d1,d2", "offsets must differ"));
        }
        Ok(IndexGraph {
            offsets: vec![d1.min(d2), d1.max(d2)],
            lo: None,
            hi: None,
        })
    }

    /// The graph itself, for a one-dimensional lattice kernel: offsets are the
    /// non-zero steps together with their reverses.
    pub fn of_line_graph(graph: &WeightedGraph) -> Result<Self> {
        let steps = match (graph.lattice_dim(), graph.lattice_steps()) {
            (Some(1), Some(s)) => s,
            _ => {
                return Err(Error::Unsupported(format!(
                    "index graph from {} needs a one-dimensional lattice",
                    graph.name()
                )))
            }
        };
        let set: BTreeSet<i64> = steps
            .iter()
            .filter(|(s, w)| s[0] != 0 && *w > 0.0)
            .flat_map(|(s, _)| [s[0], -s[0]])
            .collect();
        if set.is_empty() {
            return Err(Error::param("graph", "no non-zero steps"));
        }
        Ok(IndexGraph {
            offsets: set.into_iter().collect(),
            lo: None,
            hi: None,
        })
    }

    pub fn contains(&self, i: i64) -> bool {
        self.lo.is_none_or(|lo| i >= lo) && self.hi.is_none_or(|hi| i <= hi)
    }

    pub fn out_neighbors(&self, i: i64) -> Vec<i64> {
        self.offsets
            .iter()
            .map(|o| i + o)
            .filter(|&j| self.contains(j))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.is_empty() {
            return Err(Error::param("offsets", "empty"));
        }
        let distinct: HashSet<_> = self.offsets.iter().collect();
        if distinct.len() != self.offsets.len() {
            return Err(Error::param("offsets", "repeated offset"));
        }
        if let (Some(lo), Some(hi)) = (self.lo, self.hi) {
            if lo > hi {
                return Err(Error::param("lo,hi", "empty index range"));
            }
        }
        Ok(())
    }
}

/// The family `{A_i}` of disjoint vertex sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Blocks {
    /// `A_i = {i·width, …, i·width + width − 1}` on a one-dimensional lattice.
    Intervals { width: u32 },
    /// Finite explicit family.
    Explicit(BTreeMap<i64, Vec<Vertex>>),
}

impl Blocks {
    pub fn singletons() -> Self {
        Blocks::Intervals { width: 1 }
    }

    /// `A_i` in canonical vertex order.
    pub fn block(&self, i: i64) -> Result<Vec<Vertex>> {
        let mut b = match self {
            Blocks::Intervals { width } => {
                let w = *width as i64;
                (0..w).map(|j| Vertex::z(i * w + j)).collect()
            }
            Blocks::Explicit(map) => map
                .get(&i)
                .cloned()
                .ok_or_else(|| Error::param("blocks", format!("no block for index {i}")))?,
        };
        b.sort();
        Ok(b)
    }
}

/// Site caps used by the block processes. `None` means no cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Particles per site.
    pub m: Option<u32>,
    /// Largest generation kept.
    pub n0: Option<u32>,
    /// Births allowed per block.
    pub n_bar: Option<u64>,
}

/// Index graph, blocks, block time `t̄` and particle threshold `k`.
#[derive(Clone, Debug)]
pub struct BlockScheme {
    pub graph: Arc<WeightedGraph>,
    pub index: IndexGraph,
    pub blocks: Blocks,
    pub t_bar: f64,
    pub k: u32,
    pub caps: Caps,
}

impl BlockScheme {
    pub fn new(graph: Arc<WeightedGraph>, index: IndexGraph, blocks: Blocks, t_bar: f64, k: u32) -> Self {
        BlockScheme {
            graph,
            index,
            blocks,
            t_bar,
            k,
            caps: Caps::default(),
        }
    }

    /// Singleton blocks on `Z` (or `N`) with nearest-neighbour index edges.
    pub fn z_singletons(graph: Arc<WeightedGraph>, t_bar: f64, k: u32) -> Self {
        Self::new(graph, IndexGraph::z_line(), Blocks::singletons(), t_bar, k)
    }

    /// The single vertex of `WeightedGraph::single_loop`.
    pub fn single_loop(t_bar: f64, k: u32) -> Self {
        let g = Arc::new(WeightedGraph::single_loop());
        let v = g.finite_vertices().expect("finite")[0].clone();
        Self::new(
            g,
            IndexGraph::point(),
            Blocks::Explicit(BTreeMap::from([(0, vec![v])])),
            t_bar,
            k,
        )
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.index.validate()?;
        if !(self.t_bar.is_finite() && self.t_bar > 0.0) {
            return Err(Error::param("t_bar", format!("must be positive, got {}", self.t_bar)));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        match &self.blocks {
            Blocks::Intervals { width } => {
                if *width == 0 {
                    return Err(Error::param("width", "must be at least 1"));
                }
                if self.graph.lattice_dim() != Some(1) {
                    return Err(Error::Unsupported(format!(
                        "interval blocks need a one-dimensional lattice, got {}",
                        self.graph.name()
                    )));
                }
            }
            Blocks::Explicit(map) => {
                let mut seen = HashSet::new();
                for (i, b) in map {
                    if b.is_empty() {
                        return Err(Error::param("blocks", format!("block {i} is empty")));
                    }
                    for v in b {
                        if !self.graph.contains(v) {
                            return Err(Error::UnknownVertex(v.to_string()));
                        }
                        if !seen.insert(v.clone()) {
                            return Err(Error::param("blocks", format!("{v} lies in two blocks")));
                        }
                    }
                }
                if let (Some(lo), Some(hi)) = (self.index.lo, self.index.hi) {
                    if (lo..=hi).any(|i| !map.contains_key(&i)) {
                        return Err(Error::param("blocks", "index range not covered"));
                    }
                } else {
                    return Err(Error::param("blocks", "explicit blocks need a finite index range"));
                }
            }
        }
        Ok(())
    }

    /// `k` particles spread round-robin over the vertices of `A_i`.
    pub fn initial_configuration(&self, i: i64) -> Result<ParticleConfiguration> {
        let block = self.blocks.block(i)?;
        Ok(round_robin(&block, self.k as u64))
    }

    /// Out-neighbours of `i` with their blocks.
    pub fn targets(&self, i: i64) -> Result<Vec<(i64, Vec<Vertex>)>> {
        self.index
            .out_neighbors(i)
            .into_iter()
            .map(|j| Ok((j, self.blocks.block(j)?)))
            .collect()
    }
}

pub(crate) fn round_robin(block: &[Vertex], k: u64) -> ParticleConfiguration {
    let mut c = ParticleConfiguration::new();
    let len = block.len() as u64;
    for (j, v) in block.iter().enumerate() {
        let j = j as u64;
        let n = k / len + u64::from(j < k % len);
        if n > 0 {
            c.add(v.clone(), n);
        }
    }
    c
}

/// Graph distance from the set `from` to the set `to`, searched up to `limit`.
pub fn set_distance(graph: &WeightedGraph, from: &[Vertex], to: &[Vertex], limit: usize) -> Result<Option<usize>> {
    let goal: HashSet<&Vertex> = to.iter().collect();
    let mut seen: HashSet<Vertex> = from.iter().cloned().collect();
    let mut queue: VecDeque<(Vertex, usize)> = from.iter().map(|v| (v.clone(), 0)).collect();
    while let Some((v, d)) = queue.pop_front() {
        if goal.contains(&v) {
            return Ok(Some(d));
        }
        if d == limit {
            continue;
        }
        for (u, _) in graph.neighbors(&v)? {
            if seen.insert(u.clone()) {
                queue.push_back((u, d + 1));
            }
        }
    }
    Ok(None)
}
