//! Weighted graphs with bounded geometry.
//!
//! A [`WeightedGraph`] is immutable. Infinite families (lattices, trees and
//! their products) are generator-backed: vertices are produced on demand by
//! neighbour enumeration, so only the finitely many vertices a computation
//! touches are ever materialised.

mod cache;
mod kernel;
mod local_iso;
mod vertex;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{SiteCache, K_SCALE};
pub use kernel::{
    ball_truncation, ball_vertices, radial_quotient, KernelMatrix, RadialQuotient,
};
pub use local_iso::{
    coordinate_projection, exact_power_rows, horocycle_height, horocycle_map,
    LocalIsomorphism, Projection,
};
pub use vertex::Vertex;

/// Exact rational weight, used for path-enumeration identities.
pub type Exact = Ratio<i128>;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A translation-invariant step of a lattice kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// Serializable description of a graph family, as read from experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    /// Edge list `[from, to, weight]` over integer labels.
    Explicit { edges: Vec<(u64, u64, f64)> },
    /// One vertex with a self-loop of weight 1.
    Loop,
    /// Translation-invariant kernel on `Z^d` with finitely many steps.
    Zd { steps: Vec<Step> },
    /// Simple random walk on `Z^d`.
    ZdSrw { dim: usize },
    /// Walk on `Z` with `p(i,i+1)=p`, `p(i,i-1)=q`, holding `1-p-q`.
    Drift { p: f64, q: f64 },
    /// Simple random walk on the homogeneous tree of the given degree.
    TreeSrw { degree: u32 },
    /// Box `{0..side-1}^dim` with simple-random-walk weights of `Z^dim`.
    ZdBox { dim: usize, side: usize },
    CrossProduct {
        left: Box<FamilyDescriptor>,
        right: Box<FamilyDescriptor>,
    },
    BoxProduct {
        left: Box<FamilyDescriptor>,
        right: Box<FamilyDescriptor>,
    },
}

impl FamilyDescriptor {
    pub fn build(&self) -> Result<WeightedGraph> {
        make_family(self)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LatticeKernel {
    pub(crate) dim: usize,
    pub(crate) steps: Vec<(Vec<i64>, f64)>,
    pub(crate) exact: Option<Vec<Exact>>,
}

#[derive(Clone, Debug)]
pub(crate) struct ExplicitGraph {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
    exact: Option<Vec<Vec<Exact>>>,
}

#[derive(Clone, Debug)]
pub(crate) enum GraphKind {
    Explicit(ExplicitGraph),
    Lattice(LatticeKernel),
    Tree { degree: u32 },
    Cross(Arc<WeightedGraph>, Arc<WeightedGraph>),
    Sum(Arc<WeightedGraph>, Arc<WeightedGraph>),
    Restricted {
        parent: Arc<WeightedGraph>,
        open: Arc<HashSet<(Vertex, Vertex)>>,
    },
}

/// A weighted (possibly oriented) graph `(X, μ)` with bounded geometry.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    kind: GraphKind,
    degree_bound: usize,
    weight_bound: f64,
    stochastic: bool,
    oriented: bool,
    name: String,
}

pub fn make_family(desc: &FamilyDescriptor) -> Result<WeightedGraph> {
    match desc {
        FamilyDescriptor::Explicit { edges } => WeightedGraph::explicit(
            edges
                .iter()
                .map(|&(a, b, w)| (Vertex::Label(a), Vertex::Label(b), w)),
        ),
        FamilyDescriptor::Loop => Ok(WeightedGraph::single_loop()),
        FamilyDescriptor::Zd { steps } => WeightedGraph::lattice(
            steps
                .iter()
                .map(|s| (s.offset.clone(), s.weight))
                .collect(),
        ),
        FamilyDescriptor::ZdSrw { dim } => WeightedGraph::zd_srw(*dim),
        FamilyDescriptor::Drift { p, q } => WeightedGraph::drift_walk(*p, *q),
        FamilyDescriptor::TreeSrw { degree } => WeightedGraph::tree_srw(*degree),
        FamilyDescriptor::ZdBox { dim, side } => WeightedGraph::zd_box(*dim, *side),
        FamilyDescriptor::CrossProduct { left, right } => Ok(cross_product(
            Arc::new(left.build()?),
            Arc::new(right.build()?),
        )),
        FamilyDescriptor::BoxProduct { left, right } => Ok(box_product(
            Arc::new(left.build()?),
            Arc::new(right.build()?),
        )),
    }
}

fn check_weight(from: &Vertex, to: &Vertex, w: f64) -> Result<()> {
    if !w.is_finite() {
        return Err(Error::param("weight", format!("non-finite weight {w}")));
    }
    if w < 0.0 {
        return Err(Error::NegativeWeight {
            from: from.to_string(),
            to: to.to_string(),
            weight: w,
        });
    }
    Ok(())
}

impl WeightedGraph {
    /// Builds a finite graph from an edge list. Zero-weight edges are dropped;
    /// repeated edges are rejected.
    pub fn explicit<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vertex, Vertex, f64)>,
    {
        let edges: Vec<_> = edges.into_iter().collect();
        Self::explicit_impl(edges, None)
    }

    /// Like [`WeightedGraph::explicit`] with exact rational weights.
    pub fn explicit_exact<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vertex, Vertex, Exact)>,
    {
        let edges: Vec<_> = edges.into_iter().collect();
        let floats = edges
            .iter()
            .map(|(a, b, w)| (a.clone(), b.clone(), exact_to_f64(w)))
            .collect();
        let exact = edges.into_iter().map(|(_, _, w)| w).collect();
        Self::explicit_impl(floats, Some(exact))
    }

    fn explicit_impl(edges: Vec<(Vertex, Vertex, f64)>, exact: Option<Vec<Exact>>) -> Result<Self> {
        let mut vertices: Vec<Vertex> = Vec::new();
        let mut index: HashMap<Vertex, usize> = HashMap::new();
        let mut intern = |v: &Vertex, vertices: &mut Vec<Vertex>| -> usize {
            *index.entry(v.clone()).or_insert_with(|| {
                vertices.push(v.clone());
                vertices.len() - 1
            })
        };
        let mut raw = Vec::with_capacity(edges.len());
        for (i, (a, b, w)) in edges.iter().enumerate() {
            check_weight(a, b, *w)?;
            let ia = intern(a, &mut vertices);
            let ib = intern(b, &mut vertices);
            raw.push((ia, ib, *w, i));
        }
        // Canonical vertex order makes matrices and dumps reproducible.
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&a, &b| vertices[a].cmp(&vertices[b]));
        let mut remap = vec![0; vertices.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let vertices: Vec<Vertex> = order.iter().map(|&o| vertices[o].clone()).collect();
        let index: HashMap<Vertex, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let n = vertices.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        let mut ex_out: Vec<Vec<Exact>> = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (a, b, w, i) in raw {
            let (a, b) = (remap[a], remap[b]);
            if !seen.insert((a, b)) {
                return Err(Error::param(
                    "edges",
                    format!("duplicate edge {} -> {}", vertices[a], vertices[b]),
                ));
            }
            if w == 0.0 {
                continue;
            }
            out[a].push((b, w));
            inc[b].push((a, w));
            if let Some(ex) = &exact {
                ex_out[a].push(ex[i]);
            }
        }
        // Keep per-row order sorted by target while carrying exact weights along.
        let mut exact_rows = exact.as_ref().map(|_| Vec::with_capacity(n));
        for (a, row) in out.iter_mut().enumerate() {
            let mut zipped: Vec<_> = row
                .iter()
                .cloned()
                .zip(ex_out[a].iter().cloned().chain(std::iter::repeat(Exact::zero())))
                .collect();
            zipped.sort_by_key(|((b, _), _)| *b);
            *row = zipped.iter().map(|(e, _)| *e).collect();
            if let Some(rows) = exact_rows.as_mut() {
                rows.push(zipped.into_iter().map(|(_, x)| x).collect());
            }
        }
        for row in inc.iter_mut() {
            row.sort_by_key(|(b, _)| *b);
        }
        let degree_bound = out.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let sums: Vec<f64> = out.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
        let weight_bound = sums.iter().cloned().fold(0.0, f64::max);
        let stochastic = n > 0 && sums.iter().all(|s| (s - 1.0).abs() <= STOCHASTIC_TOL);
        let mut edge_set = HashSet::new();
        for (a, row) in out.iter().enumerate() {
            for &(b, _) in row {
                edge_set.insert((a, b));
            }
        }
        let oriented = edge_set.iter().any(|&(a, b)| !edge_set.contains(&(b, a)));
        Ok(WeightedGraph {
            kind: GraphKind::Explicit(ExplicitGraph {
                vertices,
                index,
                out,
                inc,
                exact: exact_rows,
            }),
            degree_bound,
            weight_bound,
            stochastic,
            oriented,
            name: "explicit".into(),
        })
    }

    /// The smallest stochastic graph: one vertex with `μ(x,x) = 1`.
    pub fn single_loop() -> Self {
        Self::explicit_exact([(Vertex::Label(0), Vertex::Label(0), Exact::from_integer(1))])
            .expect("valid loop")
            .named("loop")
    }

    /// Translation-invariant kernel on `Z^d`: `μ(x, x+s) = w_s`.
    pub fn lattice(steps: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        Self::lattice_impl(steps, None)
    }

    pub fn lattice_exact(steps: Vec<(Vec<i64>, Exact)>) -> Result<Self> {
        let floats = steps
            .iter()
            .map(|(s, w)| (s.clone(), exact_to_f64(w)))
            .collect();
        let exact = steps.into_iter().map(|(_, w)| w).collect();
        Self::lattice_impl(floats, Some(exact))
    }

    fn lattice_impl(steps: Vec<(Vec<i64>, f64)>, exact: Option<Vec<Exact>>) -> Result<Self> {
        let Some(dim) = steps.first().map(|s| s.0.len()) else {
            return Err(Error::param("steps", "empty step distribution"));
        };
        if dim == 0 {
            return Err(Error::param("steps", "zero-dimensional offsets"));
        }
        let origin = Vertex::Lattice(vec![0; dim]);
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut kept_exact = Vec::new();
        for (i, (s, w)) in steps.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::param("steps", "offsets of mixed dimension"));
            }
            check_weight(&origin, &Vertex::Lattice(s.clone()), *w)?;
            if !seen.insert(s.clone()) {
                return Err(Error::param("steps", format!("duplicate offset {s:?}")));
            }
            if *w > 0.0 {
                kept.push((s.clone(), *w));
                if let Some(ex) = &exact {
                    kept_exact.push(ex[i]);
                }
            }
        }
        let total: f64 = kept.iter().map(|s| s.1).sum();
        let support: HashSet<&Vec<i64>> = kept.iter().map(|s| &s.0).collect();
        let oriented = kept
            .iter()
            .any(|(s, _)| !support.contains(&s.iter().map(|c| -c).collect::<Vec<_>>()));
        Ok(WeightedGraph {
            degree_bound: kept.len().max(1),
            weight_bound: total,
            stochastic: (total - 1.0).abs() <= STOCHASTIC_TOL,
            oriented,
            kind: GraphKind::Lattice(LatticeKernel {
                dim,
                steps: kept,
                exact: exact.map(|_| kept_exact),
            }),
            name: format!("Z^{dim}"),
        })
    }

    pub fn zd_srw(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let w = Exact::new(1, 2 * dim as i128);
        let mut steps = Vec::new();
        for axis in 0..dim {
            for sign in [1, -1] {
                let mut s = vec![0; dim];
                s[axis] = sign;
                steps.push((s, w));
            }
        }
        Ok(Self::lattice_exact(steps)?.named(&format!("Z^{dim} SRW")))
    }

    /// Nearest-neighbour walk on `Z` with drift: `p` to the right, `q` to the
    /// left, holding probability `1-p-q` as a self-loop.
    pub fn drift_walk(p: f64, q: f64) -> Result<Self> {
        validate_pq(p, q)?;
        let steps = vec![(vec![1], p), (vec![-1], q), (vec![0], (1.0 - p - q).max(0.0))];
        let mut g = Self::lattice(steps)?.named(&format!("drift(p={p},q={q})"));
        // 1-p-q is computed, so the flag is set from the parameters themselves.
        g.stochastic = true;
        g.weight_bound = 1.0;
        Ok(g)
    }

    pub fn drift_walk_exact(p: Exact, q: Exact) -> Result<Self> {
        validate_pq(exact_to_f64(&p), exact_to_f64(&q))?;
        let one = Exact::from_integer(1);
        if p + q > one {
            return Err(Error::param("p+q", "must not exceed 1"));
        }
        let steps = vec![(vec![1], p), (vec![-1], q), (vec![0], one - p - q)];
        Ok(Self::lattice_exact(steps)?.named("drift"))
    }

    /// Simple random walk on the homogeneous tree `T_r`.
    pub fn tree_srw(degree: u32) -> Result<Self> {
        if degree < 3 {
            return Err(Error::param("degree", format!("tree degree {degree} < 3")));
        }
        Ok(WeightedGraph {
            kind: GraphKind::Tree { degree },
            degree_bound: degree as usize,
            weight_bound: 1.0,
            stochastic: true,
            oriented: false,
            name: format!("T_{degree} SRW"),
        })
    }

    /// Finite box `{0..side-1}^dim` with the `Z^dim` simple-random-walk weights
    /// restricted to it (boundary vertices have `k(x) < 1`).
    pub fn zd_box(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::param("box", "dim and side must be positive"));
        }
        let w = Exact::new(1, 2 * dim as i128);
        let total = side.pow(dim as u32);
        let mut edges = Vec::new();
        for idx in 0..total {
            let mut x = vec![0i64; dim];
            let mut r = idx;
            for c in x.iter_mut() {
                *c = (r % side) as i64;
                r /= side;
            }
            for axis in 0..dim {
                for sign in [1i64, -1] {
                    let mut y = x.clone();
                    y[axis] += sign;
                    if y[axis] >= 0 && y[axis] < side as i64 {
                        edges.push((Vertex::Lattice(x.clone()), Vertex::Lattice(y), w));
                    }
                }
            }
        }
        if edges.is_empty() {
            // A 1-vertex box has no edges; keep the vertex through a zero-weight edge.
            let v = Vertex::Lattice(vec![0; dim]);
            edges.push((v.clone(), v, Exact::zero()));
        }
        Ok(Self::explicit_exact(edges)?.named(&format!("box {side}^{dim}")))
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Maximal out-degree.
    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    /// `K` with `k(x) ≤ K` for every vertex.
    pub fn weight_bound(&self) -> f64 {
        self.weight_bound
    }

    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    pub fn is_oriented(&self) -> bool {
        self.oriented
    }

    pub fn is_tree(&self) -> bool {
        matches!(self.kind, GraphKind::Tree { .. })
    }

    pub fn tree_degree(&self) -> Option<u32> {
        match self.kind {
            GraphKind::Tree { degree } => Some(degree),
            _ => None,
        }
    }

    pub(crate) fn kind(&self) -> &GraphKind {
        &self.kind
    }

    pub fn lattice_dim(&self) -> Option<usize> {
        match &self.kind {
            GraphKind::Lattice(l) => Some(l.dim),
            _ => None,
        }
    }

    /// Steps of a lattice kernel as `(offset, weight)` pairs.
    pub fn lattice_steps(&self) -> Option<&[(Vec<i64>, f64)]> {
        match &self.kind {
            GraphKind::Lattice(l) => Some(&l.steps),
            _ => None,
        }
    }

    pub fn contains(&self, x: &Vertex) -> bool {
        match (&self.kind, x) {
            (GraphKind::Explicit(g), _) => g.index.contains_key(x),
            (GraphKind::Lattice(l), Vertex::Lattice(c)) => c.len() == l.dim,
            (GraphKind::Tree { degree }, Vertex::Tree(w)) => valid_word(w, *degree),
            (GraphKind::Cross(a, b) | GraphKind::Sum(a, b), Vertex::Pair(x, y)) => {
                a.contains(x) && b.contains(y)
            }
            (GraphKind::Restricted { parent, .. }, _) => parent.contains(x),
            _ => false,
        }
    }

    fn require(&self, x: &Vertex) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(x.to_string()))
        }
    }

    /// Out-neighbours `y` with `μ(x,y) > 0`, in canonical order.
    pub fn neighbors(&self, x: &Vertex) -> Result<Vec<(Vertex, f64)>> {
        self.require(x)?;
        let mut out = match &self.kind {
            GraphKind::Explicit(g) => {
                let i = g.index[x];
                g.out[i]
                    .iter()
                    .map(|&(j, w)| (g.vertices[j].clone(), w))
                    .collect()
            }
            GraphKind::Lattice(l) => {
                let c = x.as_lattice().expect("checked");
                l.steps
                    .iter()
                    .map(|(s, w)| (Vertex::Lattice(add(c, s, 1)), *w))
                    .collect()
            }
            GraphKind::Tree { degree } => {
                let w = 1.0 / *degree as f64;
                tree_neighbors(x.as_tree().expect("checked"), *degree)
                    .into_iter()
                    .map(|v| (Vertex::Tree(v), w))
                    .collect()
            }
            GraphKind::Cross(a, b) => {
                let (x, y) = split_pair(x);
                let nb = b.neighbors(y)?;
                let mut out = Vec::new();
                for (x1, wx) in a.neighbors(x)? {
                    for (y1, wy) in &nb {
                        out.push((Vertex::pair(x1.clone(), y1.clone()), wx * wy));
                    }
                }
                out
            }
            GraphKind::Sum(a, b) => {
                let (x, y) = split_pair(x);
                let mut acc: HashMap<Vertex, f64> = HashMap::new();
                for (x1, w) in a.neighbors(x)? {
                    *acc.entry(Vertex::pair(x1, y.clone())).or_default() += w;
                }
                for (y1, w) in b.neighbors(y)? {
                    *acc.entry(Vertex::pair(x.clone(), y1)).or_default() += w;
                }
                acc.into_iter().collect()
            }
            GraphKind::Restricted { parent, open } => parent
                .neighbors(x)?
                .into_iter()
                .filter(|(y, _)| open.contains(&(x.clone(), y.clone())))
                .collect(),
        };
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// In-neighbours `y` with `μ(y,x) > 0`.
    pub fn in_neighbors(&self, x: &Vertex) -> Result<Vec<(Vertex, f64)>> {
        self.require(x)?;
        let mut out = match &self.kind {
            GraphKind::Explicit(g) => {
                let i = g.index[x];
                g.inc[i]
                    .iter()
                    .map(|&(j, w)| (g.vertices[j].clone(), w))
                    .collect()
            }
            GraphKind::Lattice(l) => {
                let c = x.as_lattice().expect("checked");
                l.steps
                    .iter()
                    .map(|(s, w)| (Vertex::Lattice(add(c, s, -1)), *w))
                    .collect()
            }
            GraphKind::Tree { .. } => self.neighbors(x)?,
            GraphKind::Cross(a, b) => {
                let (x, y) = split_pair(x);
                let nb = b.in_neighbors(y)?;
                let mut out = Vec::new();
                for (x1, wx) in a.in_neighbors(x)? {
                    for (y1, wy) in &nb {
                        out.push((Vertex::pair(x1.clone(), y1.clone()), wx * wy));
                    }
                }
                out
            }
            GraphKind::Sum(a, b) => {
                let (x, y) = split_pair(x);
                let mut acc: HashMap<Vertex, f64> = HashMap::new();
                for (x1, w) in a.in_neighbors(x)? {
                    *acc.entry(Vertex::pair(x1, y.clone())).or_default() += w;
                }
                for (y1, w) in b.in_neighbors(y)? {
                    *acc.entry(Vertex::pair(x.clone(), y1)).or_default() += w;
                }
                acc.into_iter().collect()
            }
            GraphKind::Restricted { parent, open } => parent
                .in_neighbors(x)?
                .into_iter()
                .filter(|(y, _)| open.contains(&(y.clone(), x.clone())))
                .collect(),
        };
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Out-neighbours with exact weights, when the family carries them.
    pub fn exact_neighbors(&self, x: &Vertex) -> Result<Option<Vec<(Vertex, Exact)>>> {
        self.require(x)?;
        let out = match &self.kind {
            GraphKind::Explicit(g) => g.exact.as_ref().map(|rows| {
                let i = g.index[x];
                g.out[i]
                    .iter()
                    .zip(&rows[i])
                    .map(|(&(j, _), w)| (g.vertices[j].clone(), *w))
                    .collect()
            }),
            GraphKind::Lattice(l) => l.exact.as_ref().map(|ex| {
                let c = x.as_lattice().expect("checked");
                l.steps
                    .iter()
                    .zip(ex)
                    .map(|((s, _), w)| (Vertex::Lattice(add(c, s, 1)), *w))
                    .collect()
            }),
            GraphKind::Tree { degree } => {
                let w = Exact::new(1, *degree as i128);
                Some(
                    tree_neighbors(x.as_tree().expect("checked"), *degree)
                        .into_iter()
                        .map(|v| (Vertex::Tree(v), w))
                        .collect(),
                )
            }
            GraphKind::Cross(a, b) => {
                let (x, y) = split_pair(x);
                match (a.exact_neighbors(x)?, b.exact_neighbors(y)?) {
                    (Some(na), Some(nb)) => {
                        let mut out = Vec::new();
                        for (x1, wx) in &na {
                            for (y1, wy) in &nb {
                                out.push((Vertex::pair(x1.clone(), y1.clone()), wx * wy));
                            }
                        }
                        Some(out)
                    }
                    _ => None,
                }
            }
            GraphKind::Sum(a, b) => {
                let (x, y) = split_pair(x);
                match (a.exact_neighbors(x)?, b.exact_neighbors(y)?) {
                    (Some(na), Some(nb)) => {
                        let mut acc: HashMap<Vertex, Exact> = HashMap::new();
                        for (x1, w) in na {
                            *acc.entry(Vertex::pair(x1, y.clone())).or_insert_with(Exact::zero) += w;
                        }
                        for (y1, w) in nb {
                            *acc.entry(Vertex::pair(x.clone(), y1)).or_insert_with(Exact::zero) += w;
                        }
                        Some(acc.into_iter().collect())
                    }
                    _ => None,
                }
            }
            GraphKind::Restricted { parent, open } => parent.exact_neighbors(x)?.map(|n| {
                n.into_iter()
                    .filter(|(y, _)| open.contains(&(x.clone(), y.clone())))
                    .collect()
            }),
        };
        Ok(out.map(|mut v: Vec<(Vertex, Exact)>| {
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        }))
    }

    /// `μ(x,y)`, zero when `(x,y)` is not an edge.
    pub fn weight(&self, x: &Vertex, y: &Vertex) -> Result<f64> {
        self.require(y)?;
        Ok(self
            .neighbors(x)?
            .into_iter()
            .find(|(z, _)| z == y)
            .map_or(0.0, |(_, w)| w))
    }

    /// `k(x) = Σ_y μ(x,y)`.
    pub fn out_weight(&self, x: &Vertex) -> Result<f64> {
        Ok(self.neighbors(x)?.iter().map(|e| e.1).sum())
    }

    /// All vertices, when the graph is finite (canonical order).
    pub fn finite_vertices(&self) -> Option<Vec<Vertex>> {
        match &self.kind {
            GraphKind::Explicit(g) => Some(g.vertices.clone()),
            GraphKind::Lattice(_) | GraphKind::Tree { .. } => None,
            GraphKind::Cross(a, b) | GraphKind::Sum(a, b) => {
                let va = a.finite_vertices()?;
                let vb = b.finite_vertices()?;
                let mut out = Vec::with_capacity(va.len() * vb.len());
                for x in &va {
                    for y in &vb {
                        out.push(Vertex::pair(x.clone(), y.clone()));
                    }
                }
                out.sort();
                Some(out)
            }
            GraphKind::Restricted { parent, .. } => parent.finite_vertices(),
        }
    }

    /// Canonical base vertex: the lattice origin, the tree root, the first
    /// vertex of an explicit graph, and pairs of these for products.
    pub fn origin(&self) -> Vertex {
        match &self.kind {
            GraphKind::Explicit(g) => g.vertices[0].clone(),
            GraphKind::Lattice(l) => Vertex::Lattice(vec![0; l.dim]),
            GraphKind::Tree { .. } => Vertex::root(),
            GraphKind::Cross(a, b) | GraphKind::Sum(a, b) => Vertex::pair(a.origin(), b.origin()),
            GraphKind::Restricted { parent, .. } => parent.origin(),
        }
    }

    /// Closed-form graph distance, for families where one is known.
    pub fn closed_form_distance(&self, a: &Vertex, b: &Vertex) -> Option<usize> {
        match (&self.kind, a, b) {
            (GraphKind::Tree { .. }, Vertex::Tree(x), Vertex::Tree(y)) => {
                let common = x.iter().zip(y).take_while(|(u, v)| u == v).count();
                Some(x.len() + y.len() - 2 * common)
            }
            (GraphKind::Lattice(l), Vertex::Lattice(x), Vertex::Lattice(y))
                if l.dim == 1 && l.steps.iter().all(|(s, _)| s[0].abs() <= 1) =>
            {
                Some((x[0] - y[0]).unsigned_abs() as usize)
            }
            _ => None,
        }
    }
}

fn validate_pq(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite()) || p < 0.0 || q < 0.0 {
        return Err(Error::param("p,q", format!("need p, q >= 0 (got {p}, {q})")));
    }
    if p + q > 1.0 + 1e-15 {
        return Err(Error::param("p+q", format!("{} exceeds 1", p + q)));
    }
    Ok(())
}

pub(crate) fn exact_to_f64(x: &Exact) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

fn add(c: &[i64], s: &[i64], sign: i64) -> Vec<i64> {
    c.iter().zip(s).map(|(a, b)| a + sign * b).collect()
}

fn split_pair(x: &Vertex) -> (&Vertex, &Vertex) {
    match x {
        Vertex::Pair(a, b) => (a, b),
        _ => unreachable!("contains() checked the pair shape"),
    }
}

fn valid_word(w: &[u32], degree: u32) -> bool {
    w.iter().enumerate().all(|(i, &c)| {
        let children = if i == 0 { degree } else { degree - 1 };
        (1..=children).contains(&c)
    })
}

/// Neighbours of a tree word: the parent (if any) and all children.
fn tree_neighbors(w: &[u32], degree: u32) -> Vec<Vec<u32>> {
    let children = if w.is_empty() { degree } else { degree - 1 };
    let mut out = Vec::with_capacity(degree as usize);
    if !w.is_empty() {
        out.push(w[..w.len() - 1].to_vec());
    }
    for c in 1..=children {
        let mut v = w.to_vec();
        v.push(c);
        out.push(v);
    }
    out
}

/// Tensor product `X × Y`: `μ((x,y),(x₁,y₁)) = μ_X(x,x₁)·μ_Y(y,y₁)`.
pub fn cross_product(x: Arc<WeightedGraph>, y: Arc<WeightedGraph>) -> WeightedGraph {
    WeightedGraph {
        degree_bound: x.degree_bound * y.degree_bound,
        weight_bound: x.weight_bound * y.weight_bound,
        stochastic: x.stochastic && y.stochastic,
        oriented: x.oriented || y.oriented,
        name: format!("({}) x ({})", x.name, y.name),
        kind: GraphKind::Cross(x, y),
    }
}

/// Cartesian product `X □ Y`:
/// `μ((x,y),(x₁,y₁)) = μ_X(x,x₁)·1{y=y₁} + 1{x=x₁}·μ_Y(y,y₁)`.
pub fn box_product(x: Arc<WeightedGraph>, y: Arc<WeightedGraph>) -> WeightedGraph {
    WeightedGraph {
        degree_bound: x.degree_bound + y.degree_bound,
        weight_bound: x.weight_bound + y.weight_bound,
        stochastic: false,
        oriented: x.oriented || y.oriented,
        name: format!("({}) [] ({})", x.name, y.name),
        kind: GraphKind::Sum(x, y),
    }
}

/// Weighted subgraph with weights `μ(x,y)·1{(x,y) open}`.
pub fn restrict_to_edges(
    graph: Arc<WeightedGraph>,
    open: HashSet<(Vertex, Vertex)>,
) -> Result<WeightedGraph> {
    for (a, b) in &open {
        if graph.weight(a, b)? <= 0.0 {
            return Err(Error::UnknownEdge(a.to_string(), b.to_string()));
        }
    }
    let symmetric = open.iter().all(|(a, b)| open.contains(&(b.clone(), a.clone())));
    Ok(WeightedGraph {
        degree_bound: graph.degree_bound,
        weight_bound: graph.weight_bound,
        stochastic: false,
        oriented: graph.oriented || !symmetric,
        name: format!("{} (restricted)", graph.name),
        kind: GraphKind::Restricted {
            parent: graph,
            open: Arc::new(open),
        },
    })
}

/// Number of distinct directed paths with `len` steps that visit `x`
/// (the constant `H` bounding overlapping progenies). Exhaustive enumeration;
/// intended for `len ≤ 6`.
pub fn paths_through(graph: &WeightedGraph, x: &Vertex, len: usize) -> Result<u64> {
    // Any such path starts within `len` backward steps of x.
    let mut starts: HashSet<Vertex> = HashSet::from([x.clone()]);
    let mut frontier = vec![x.clone()];
    for _ in 0..len {
        let mut next = Vec::new();
        for v in &frontier {
            for (u, _) in graph.in_neighbors(v)? {
                if starts.insert(u.clone()) {
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    fn walk(
        g: &WeightedGraph,
        v: &Vertex,
        left: usize,
        hit: bool,
        x: &Vertex,
        count: &mut u64,
    ) -> Result<()> {
        let hit = hit || v == x;
        if left == 0 {
            *count += hit as u64;
            return Ok(());
        }
        for (u, _) in g.neighbors(v)? {
            walk(g, &u, left - 1, hit, x, count)?;
        }
        Ok(())
    }
    let mut count = 0;
    let mut starts: Vec<_> = starts.into_iter().collect();
    starts.sort();
    for s in &starts {
        walk(graph, s, len, false, x, &mut count)?;
    }
    Ok(count)
}
