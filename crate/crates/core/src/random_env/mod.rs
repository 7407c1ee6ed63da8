//! Bernoulli bond percolation on finite graphs and the strong critical
//! parameter of the resulting clusters.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{restrict_to_edges, KernelMatrix, Vertex, WeightedGraph};
use crate::rng;
use crate::sim::parallel_map;
use crate::spectral::{pf_eigenpair, pf_eigenvalue, PowerOptions, SpectralEstimate};

/// Uniform in `[0,1)` attached to edge `id` under `seed`; the same edge gets
/// the same variable at every `p`.
pub fn edge_uniform(seed: u64, id: u64) -> f64 {
    (rng::mix(seed, &[id]) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One realisation of bond percolation on a finite non-oriented graph.
#[derive(Clone, Debug)]
pub struct PercolationSample {
    pub graph: Arc<WeightedGraph>,
    pub vertices: Vec<Vertex>,
    /// Undirected edges `(a, b)` with `a ≤ b` (vertex indices), canonical order.
    pub edges: Vec<(usize, usize)>,
    pub open: Vec<bool>,
    pub p: f64,
    pub seed: u64,
}

impl PercolationSample {
    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn open_fraction(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.open_count() as f64 / self.edges.len() as f64
    }

    /// Open edges in both orientations.
    pub fn open_set(&self) -> HashSet<(Vertex, Vertex)> {
        let mut s = HashSet::new();
        for (&(a, b), _) in self.edges.iter().zip(&self.open).filter(|(_, &o)| o) {
            let (x, y) = (&self.vertices[a], &self.vertices[b]);
            s.insert((x.clone(), y.clone()));
            s.insert((y.clone(), x.clone()));
        }
        s
    }

    /// The graph with weights `μ(x,y)·1{(x,y) open}`.
    pub fn restricted(&self) -> Result<WeightedGraph> {
        restrict_to_edges(self.graph.clone(), self.open_set())
    }
}

/// Keeps each undirected edge of `graph` independently with probability `p`.
pub fn percolate(graph: Arc<WeightedGraph>, p: f64, seed: u64) -> Result<PercolationSample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0,1], got {p}")));
    }
    if graph.is_oriented() {
        return Err(Error::Unsupported(format!("{} is oriented; percolation needs a non-oriented graph", graph.name())));
    }
    let vertices = graph
        .finite_vertices()
        .ok_or_else(|| Error::Unsupported(format!("{} is infinite", graph.name())))?;
    let index: std::collections::HashMap<&Vertex, usize> = vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut edges = Vec::new();
    for (a, v) in vertices.iter().enumerate() {
        for (u, w) in graph.neighbors(v)? {
            let b = index[&u];
            if w > 0.0 && a <= b {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let open = (0..edges.len() as u64).map(|e| edge_uniform(seed, e) < p).collect();
    Ok(PercolationSample {
        graph,
        vertices,
        edges,
        open,
        p,
        seed,
    })
}

/// Connected components of the open subgraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterSet {
    /// Component of each vertex (index into `components`).
    pub labels: Vec<usize>,
    /// Vertex indices of each component, ascending; components sorted by
    /// decreasing size, ties by smallest vertex.
    pub components: Vec<Vec<usize>>,
}

impl ClusterSet {
    /// Index of the largest component (always 0).
    pub fn largest(&self) -> usize {
        0
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }

    /// Fraction of vertices in the largest component.
    pub fn theta(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.components[0].len() as f64 / self.labels.len() as f64
    }
}

pub fn clusters(sample: &PercolationSample) -> ClusterSet {
    let n = sample.vertices.len();
    let mut uf = UnionFind::<usize>::new(n);
    for (&(a, b), _) in sample.edges.iter().zip(&sample.open).filter(|(_, &o)| o) {
        uf.union(a, b);
    }
    let roots = uf.into_labeling();
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for (v, r) in roots.iter().enumerate() {
        by_root.entry(*r).or_default().push(v);
    }
    let mut components: Vec<Vec<usize>> = by_root.into_values().collect();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut labels = vec![0; n];
    for (c, comp) in components.iter().enumerate() {
        for &v in comp {
            labels[v] = c;
        }
    }
    ClusterSet { labels, components }
}

/// Kernel `1_{open}·μ` on the vertices of one cluster, in canonical order.
pub fn cluster_kernel(sample: &PercolationSample, set: &ClusterSet, cluster: usize) -> Result<KernelMatrix> {
    let comp = set
        .components
        .get(cluster)
        .ok_or_else(|| Error::param("cluster", format!("no cluster {cluster}")))?;
    let restricted = sample.restricted()?;
    KernelMatrix::from_vertices(&restricted, comp.iter().map(|&v| sample.vertices[v].clone()).collect())
}

/// `λ_s` of a finite cluster: `1/ρ` of its restricted kernel.
pub fn lambda_s_on_cluster(sample: &PercolationSample, set: &ClusterSet, cluster: usize) -> Result<SpectralEstimate> {
    pf_eigenvalue(&cluster_kernel(sample, set, cluster)?, &PowerOptions::default())?.require_converged()
}

/// One row of the convergence experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub p_n: f64,
    pub box_side: usize,
    pub largest_cluster_size: usize,
    pub lambda_s_largest: f64,
    pub lambda_s_min_over_clusters: f64,
    pub lambda_s_full_box: f64,
    pub seed: u64,
}

impl ConvergenceRow {
    /// `λ_s(largest cluster) − λ_s(full box)`, non-negative.
    pub fn gap(&self) -> f64 {
        self.lambda_s_largest - self.lambda_s_full_box
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `Σ_n (1 − p_n)` over the given sequence.
    pub tail_sum: f64,
}

/// `p_n = 1 − 2^{-n}` for `n = 1..=count`.
pub fn dyadic_sequence(count: u32) -> Vec<f64> {
    (1..=count).map(|n| 1.0 - 0.5f64.powi(n as i32)).collect()
}

/// Near-critical clusters are long and thin, with a small spectral gap.
const CLUSTER_MAX_ITER: usize = 5_000_000;

struct FullBox {
    estimate: SpectralEstimate,
    vector: Vec<f64>,
}

fn full_box(graph: &WeightedGraph) -> Result<FullBox> {
    let vertices = graph
        .finite_vertices()
        .ok_or_else(|| Error::Unsupported(format!("{} is infinite", graph.name())))?;
    let k = KernelMatrix::from_vertices(graph, vertices)?;
    let (estimate, vector) = pf_eigenpair(&k, &PowerOptions::default())?;
    Ok(FullBox {
        estimate: estimate.require_converged()?,
        vector,
    })
}

fn sample_row(graph: &Arc<WeightedGraph>, full: &FullBox, box_side: usize, n: u32, p: f64, seed: u64) -> Result<ConvergenceRow> {
    let sample = percolate(graph.clone(), p, seed)?;
    let set = clusters(&sample);
    let restricted = sample.restricted()?;
    let all_open = sample.open.iter().all(|&o| o);
    let mut largest = f64::INFINITY;
    let mut best_rho: f64 = 0.0;
    for (c, comp) in set.components.iter().enumerate() {
        if comp.len() < 2 && c != 0 {
            continue;
        }
        let est = if all_open && comp.len() == sample.vertices.len() {
            full.estimate.clone()
        } else {
            let k = KernelMatrix::from_vertices(&restricted, comp.iter().map(|&v| sample.vertices[v].clone()).collect())?;
            let start: Vec<f64> = comp.iter().map(|&v| full.vector[v].max(1e-12)).collect();
            let opts = PowerOptions {
                start: Some(start),
                max_iter: CLUSTER_MAX_ITER,
                ..PowerOptions::default()
            };
            pf_eigenvalue(&k, &opts)?.require_converged()?
        };
        if c == 0 {
            largest = est.n_r;
        }
        best_rho = best_rho.max(est.rho);
    }
    Ok(ConvergenceRow {
        n,
        p_n: p,
        box_side,
        largest_cluster_size: set.components[0].len(),
        lambda_s_largest: largest,
        lambda_s_min_over_clusters: if best_rho > 0.0 { 1.0 / best_rho } else { f64::INFINITY },
        lambda_s_full_box: full.estimate.n_r,
        seed,
    })
}

/// For each seed and each `n`, percolates `graph` at `p_n` with seed
/// `mix(seed, n)` and records `λ_s` of the largest cluster, the minimum over
/// clusters and the full box. Rows are ordered by seed, then `n`.
pub fn convergence_experiment(graph: Arc<WeightedGraph>, box_side: usize, ps: &[f64], seeds: &[u64]) -> Result<ConvergenceReport> {
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::param("p_n", format!("must lie in (0,1], got {p}")));
    }
    let full = full_box(&graph)?;
    let jobs: Vec<(u64, u32, f64)> = seeds
        .iter()
        .flat_map(|&s| ps.iter().enumerate().map(move |(i, &p)| (s, i as u32 + 1, p)))
        .collect();
    let rows = parallel_map(jobs.len() as u64, |j| {
        let (s, n, p) = jobs[j as usize];
        sample_row(&graph, &full, box_side, n, p, rng::mix(s, &[n as u64]))
    })?;
    Ok(ConvergenceReport {
        rows,
        tail_sum: ps.iter().map(|p| 1.0 - p).sum(),
    })
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from(
        "n,p_n,box_side,largest_cluster_size,lambda_s_largest,lambda_s_min_over_clusters,lambda_s_full_box,seed\n",
    );
    for r in &report.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.p_n,
            r.box_side,
            r.largest_cluster_size,
            r.lambda_s_largest,
            r.lambda_s_min_over_clusters,
            r.lambda_s_full_box,
            r.seed
        )
        .expect("string write");
    }
    s
}

#[cfg(test)]
mod tests;
