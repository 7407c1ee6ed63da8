use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;

use super::{Exact, GraphKind, Vertex, WeightedGraph};
use crate::error::{Error, Result};

/// How vertices of the source graph are mapped onto `Z`.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Height relative to the end given by the ray `/c/c/c/…` from the root.
    Horocycle { ray_child: u32 },
    /// `x ↦ x(axis)` on `Z^d` (axis is 0-based).
    Axis(usize),
}

/// A vertex map `f: X → I` with `Σ_{z ∈ f⁻¹(i)} μ(x,z) = ν(f(x), i)`.
#[derive(Clone, Debug)]
pub struct LocalIsomorphism {
    source: WeightedGraph,
    target: WeightedGraph,
    projection: Projection,
}

/// Height of a tree word relative to the end `/c/c/c/…`: the Busemann
/// function `lim_j d(x, ω_j) - j`, equal to `|w| - 2·(common prefix with the ray)`.
pub fn horocycle_height(word: &[u32], ray_child: u32) -> i64 {
    let on_ray = word.iter().take_while(|&&c| c == ray_child).count();
    word.len() as i64 - 2 * on_ray as i64
}

/// Projection of the homogeneous-tree SRW onto horocycle heights. The target
/// is the walk on `Z` with `p̃(a,a+1) = 1-1/r`, `p̃(a,a-1) = 1/r`.
pub fn horocycle_map(tree: &WeightedGraph, ray_child: u32) -> Result<LocalIsomorphism> {
    let Some(r) = tree.tree_degree() else {
        return Err(Error::Unsupported(format!(
            "horocycle map needs a tree, got {}",
            tree.name()
        )));
    };
    if !(1..r).contains(&ray_child) {
        return Err(Error::param("ray_child", format!("must lie in 1..={}", r - 1)));
    }
    let r = r as i128;
    let target = WeightedGraph::drift_walk_exact(Exact::new(r - 1, r), Exact::new(1, r))?;
    Ok(LocalIsomorphism {
        source: tree.clone(),
        target,
        projection: Projection::Horocycle { ray_child },
    })
}

/// Projection of a `Z^d` walk on coordinate `axis` (1-based). The target is
/// the walk on `Z` with `p = P(step·e_axis = +1)`, `q = P(step·e_axis = -1)`.
pub fn coordinate_projection(zd: &WeightedGraph, axis: usize) -> Result<LocalIsomorphism> {
    let GraphKind::Lattice(l) = zd.kind() else {
        return Err(Error::Unsupported(format!(
            "coordinate projection needs a Z^d kernel, got {}",
            zd.name()
        )));
    };
    if axis == 0 || axis > l.dim {
        return Err(Error::param("axis", format!("must lie in 1..={}", l.dim)));
    }
    let a = axis - 1;
    if let Some((s, _)) = l.steps.iter().find(|(s, _)| s[a].abs() > 1) {
        return Err(Error::Unsupported(format!(
            "axis marginal has support outside {{-1,0,1}} (step {s:?})"
        )));
    }
    let target = match &l.exact {
        Some(ex) => {
            let mut m: BTreeMap<i64, Exact> = BTreeMap::new();
            for ((s, _), w) in l.steps.iter().zip(ex) {
                *m.entry(s[a]).or_insert_with(Exact::zero) += w;
            }
            WeightedGraph::lattice_exact(m.into_iter().map(|(o, w)| (vec![o], w)).collect())?
        }
        None => {
            let mut m: BTreeMap<i64, f64> = BTreeMap::new();
            for (s, w) in &l.steps {
                *m.entry(s[a]).or_default() += w;
            }
            WeightedGraph::lattice(m.into_iter().map(|(o, w)| (vec![o], w)).collect())?
        }
    };
    Ok(LocalIsomorphism {
        source: zd.clone(),
        target,
        projection: Projection::Axis(a),
    })
}

impl LocalIsomorphism {
    pub fn source(&self) -> &WeightedGraph {
        &self.source
    }

    pub fn target(&self) -> &WeightedGraph {
        &self.target
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    /// Weight `ν(i, i+1)` and `ν(i, i-1)` of the target walk.
    pub fn target_drift(&self) -> (f64, f64) {
        let o = Vertex::z(0);
        let p = self.target.weight(&o, &Vertex::z(1)).unwrap_or(0.0);
        let q = self.target.weight(&o, &Vertex::z(-1)).unwrap_or(0.0);
        (p, q)
    }

    pub fn level(&self, x: &Vertex) -> Result<i64> {
        if !self.source.contains(x) {
            return Err(Error::UnknownVertex(x.to_string()));
        }
        Ok(match (&self.projection, x) {
            (Projection::Horocycle { ray_child }, Vertex::Tree(w)) => horocycle_height(w, *ray_child),
            (Projection::Axis(a), Vertex::Lattice(c)) => c[*a],
            _ => unreachable!("source contains x"),
        })
    }

    pub fn apply(&self, x: &Vertex) -> Result<Vertex> {
        Ok(Vertex::z(self.level(x)?))
    }

    /// One-step identity in floating point, within `tol`.
    pub fn check_one_step(&self, x: &Vertex, tol: f64) -> Result<bool> {
        let mut lumped: HashMap<i64, f64> = HashMap::new();
        for (z, w) in self.source.neighbors(x)? {
            *lumped.entry(self.level(&z)?).or_default() += w;
        }
        let fx = self.apply(x)?;
        let mut ok = true;
        for (i, nu) in self.target.neighbors(&fx)? {
            let i = i.as_lattice().expect("Z target")[0];
            ok &= (lumped.remove(&i).unwrap_or(0.0) - nu).abs() <= tol;
        }
        Ok(ok && lumped.values().all(|w| w.abs() <= tol))
    }

    /// Checks `Σ_{z∈f⁻¹(i)} μ⁽ⁿ⁾(x,z) = ν⁽ⁿ⁾(f(x),i)` exactly for `n = 0..=n_max`
    /// and every reachable `i`. Returns the first failing `(n, i)`.
    pub fn check_powers_exact(&self, x: &Vertex, n_max: usize) -> Result<Option<(usize, i64)>> {
        let src = exact_power_rows(&self.source, x, n_max)?;
        let tgt = exact_power_rows(&self.target, &self.apply(x)?, n_max)?;
        for n in 0..=n_max {
            let mut lumped: BTreeMap<i64, Exact> = BTreeMap::new();
            for (z, w) in &src[n] {
                *lumped.entry(self.level(z)?).or_insert_with(Exact::zero) += w;
            }
            let mut expected: BTreeMap<i64, Exact> = BTreeMap::new();
            for (i, w) in &tgt[n] {
                expected.insert(i.as_lattice().expect("Z target")[0], *w);
            }
            lumped.retain(|_, w| !w.is_zero());
            expected.retain(|_, w| !w.is_zero());
            if lumped != expected {
                let bad = lumped
                    .iter()
                    .find(|(i, w)| expected.get(i) != Some(w))
                    .or_else(|| expected.iter().find(|(i, w)| lumped.get(i) != Some(w)))
                    .map(|(i, _)| *i)
                    .unwrap_or(0);
                return Ok(Some((n, bad)));
            }
        }
        Ok(None)
    }

    /// Float version of the lumped identity for `n ≤ n_max`, used when the
    /// source has no exact weights.
    pub fn max_power_defect(&self, x: &Vertex, n_max: usize) -> Result<f64> {
        let src = float_power_rows(&self.source, x, n_max)?;
        let tgt = float_power_rows(&self.target, &self.apply(x)?, n_max)?;
        let mut worst: f64 = 0.0;
        for n in 0..=n_max {
            let mut lumped: HashMap<i64, f64> = HashMap::new();
            for (z, w) in &src[n] {
                *lumped.entry(self.level(z)?).or_default() += w;
            }
            for (i, w) in &tgt[n] {
                let i = i.as_lattice().expect("Z target")[0];
                worst = worst.max((lumped.remove(&i).unwrap_or(0.0) - w).abs());
            }
            worst = worst.max(lumped.values().fold(0.0, |m, w| m.max(w.abs())));
        }
        Ok(worst)
    }
}

/// Rows `μ⁽ⁿ⁾(x, ·)` for `n = 0..=n_max` in exact arithmetic, by propagating the
/// distribution one step at a time (equivalent to summing over all paths).
pub fn exact_power_rows(
    graph: &WeightedGraph,
    x: &Vertex,
    n_max: usize,
) -> Result<Vec<BTreeMap<Vertex, Exact>>> {
    let mut rows = vec![BTreeMap::from([(x.clone(), Exact::from_integer(1))])];
    let mut cache: HashMap<Vertex, Vec<(Vertex, Exact)>> = HashMap::new();
    for _ in 0..n_max {
        let mut next: BTreeMap<Vertex, Exact> = BTreeMap::new();
        for (v, mass) in rows.last().expect("nonempty") {
            if !cache.contains_key(v) {
                let nb = graph.exact_neighbors(v)?.ok_or_else(|| {
                    Error::Unsupported(format!("{} has no exact weights", graph.name()))
                })?;
                cache.insert(v.clone(), nb);
            }
            for (u, w) in &cache[v] {
                *next.entry(u.clone()).or_insert_with(Exact::zero) += *mass * *w;
            }
        }
        rows.push(next);
    }
    Ok(rows)
}

fn float_power_rows(graph: &WeightedGraph, x: &Vertex, n_max: usize) -> Result<Vec<HashMap<Vertex, f64>>> {
    let mut rows = vec![HashMap::from([(x.clone(), 1.0)])];
    for _ in 0..n_max {
        let mut next: HashMap<Vertex, f64> = HashMap::new();
        for (v, mass) in rows.last().expect("nonempty") {
            for (u, w) in graph.neighbors(v)? {
                *next.entry(u).or_default() += mass * w;
            }
        }
        rows.push(next);
    }
    Ok(rows)
}
