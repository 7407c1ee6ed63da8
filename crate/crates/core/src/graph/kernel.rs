use std::collections::{HashMap, VecDeque};

use super::{Vertex, WeightedGraph};
use crate::error::{Error, Result};

/// A finite nonnegative matrix indexed by graph vertices (CSR storage).
///
/// Built by restricting a graph's kernel to a vertex set: entry `(x,y)` is
/// exactly `μ(x,y)`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    connected: bool,
    symmetric: bool,
}

impl KernelMatrix {
    /// Restriction of `graph` to `vertices` (order preserved).
    pub fn from_vertices(graph: &WeightedGraph, vertices: Vec<Vertex>) -> Result<Self> {
        let index: HashMap<Vertex, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        if index.len() != vertices.len() {
            return Err(Error::param("vertices", "duplicate vertex"));
        }
        let mut rows = Vec::with_capacity(vertices.len());
        for v in &vertices {
            let mut row: Vec<(usize, f64)> = graph
                .neighbors(v)?
                .into_iter()
                .filter_map(|(y, w)| index.get(&y).map(|&j| (j, w)))
                .collect();
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(Self::from_rows(vertices, index, rows))
    }

    /// Matrix from dense rows, with vertices labelled `0..n`.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let vertices: Vec<Vertex> = (0..n as u64).map(Vertex::Label).collect();
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let mut sparse = Vec::with_capacity(n);
        for row in rows {
            if row.len() != n {
                return Err(Error::param("rows", "matrix must be square"));
            }
            let mut r = Vec::new();
            for (j, &w) in row.iter().enumerate() {
                if w < 0.0 || !w.is_finite() {
                    return Err(Error::param("rows", format!("invalid entry {w}")));
                }
                if w > 0.0 {
                    r.push((j, w));
                }
            }
            sparse.push(r);
        }
        Ok(Self::from_rows(vertices, index, sparse))
    }

    fn from_rows(
        vertices: Vec<Vertex>,
        index: HashMap<Vertex, usize>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in &rows {
            for &(j, w) in row {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        let mut m = KernelMatrix {
            vertices,
            index,
            row_ptr,
            cols,
            vals,
            connected: false,
            symmetric: false,
        };
        m.connected = m.strongly_connected();
        m.symmetric = m.check_symmetric();
        m
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Strongly connected as a directed graph.
    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn get(&self, x: &Vertex, y: &Vertex) -> f64 {
        match (self.index_of(x), self.index_of(y)) {
            (Some(i), Some(j)) => self.entry(i, j),
            _ => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).map(|e| e.1).sum()).collect()
    }

    /// `out = M v`.
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *o = self.cols[r.clone()]
                .iter()
                .zip(&self.vals[r])
                .map(|(&j, &w)| w * v[j])
                .sum();
        }
    }

    /// `out = Mᵀ v`, i.e. `out(x) = Σ_z μ(z,x) v(z)`.
    pub fn mul_vec_transposed(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            for (j, w) in self.row(i) {
                out[j] += w * vi;
            }
        }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, w) in self.row(i) {
                row[j] = w;
            }
        }
        d
    }

    /// Principal submatrix on the given row/column indices (order preserved).
    pub fn submatrix(&self, idx: &[usize]) -> KernelMatrix {
        let vertices: Vec<Vertex> = idx.iter().map(|&i| self.vertices[i].clone()).collect();
        let index: HashMap<Vertex, usize> =
            vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let mut local = vec![usize::MAX; self.len()];
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let rows = idx
            .iter()
            .map(|&i| {
                let mut r: Vec<(usize, f64)> = self
                    .row(i)
                    .filter(|&(j, _)| local[j] != usize::MAX)
                    .map(|(j, w)| (local[j], w))
                    .collect();
                r.sort_by_key(|e| e.0);
                r
            })
            .collect();
        Self::from_rows(vertices, index, rows)
    }

    /// Strongly connected components (Tarjan), each sorted ascending.
    pub fn strong_components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut next = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            // (vertex, position within its row)
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                let start = self.row_ptr[v];
                let end = self.row_ptr[v + 1];
                if start + *pos < end {
                    let w = self.cols[start + *pos];
                    *pos += 1;
                    if index[w] == usize::MAX {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        out.push(comp);
                    }
                }
            }
        }
        out
    }

    /// The matrix as a finite explicit graph on the same vertices.
    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let mut edges = Vec::with_capacity(self.nnz() + self.len());
        for i in 0..self.len() {
            for (j, w) in self.row(i) {
                edges.push((self.vertices[i].clone(), self.vertices[j].clone(), w));
            }
        }
        // Isolated vertices survive as zero-weight loops.
        let mut touched = vec![false; self.len()];
        for i in 0..self.len() {
            for (j, _) in self.row(i) {
                touched[i] = true;
                touched[j] = true;
            }
        }
        for (i, t) in touched.iter().enumerate() {
            if !t {
                let v = self.vertices[i].clone();
                edges.push((v.clone(), v, 0.0));
            }
        }
        WeightedGraph::explicit(edges)
    }

    fn strongly_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let reach = |forward: bool| -> usize {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for i in 0..n {
                for (j, _) in self.row(i) {
                    if forward {
                        adj[i].push(j);
                    } else {
                        adj[j].push(i);
                    }
                }
            }
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0];
            let mut count = 1;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
            count
        };
        if n == 1 {
            // A single vertex counts as connected only with a loop.
            return self.entry(0, 0) > 0.0;
        }
        reach(true) == n && reach(false) == n
    }

    fn check_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.row(i).all(|(j, w)| self.entry(j, i) == w))
    }
}

fn bfs_distances(
    graph: &WeightedGraph,
    center: &Vertex,
    radius: usize,
    forward: bool,
) -> Result<HashMap<Vertex, usize>> {
    let mut dist = HashMap::from([(center.clone(), 0usize)]);
    let mut queue = VecDeque::from([center.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        let nbrs = if forward {
            graph.neighbors(&v)?
        } else {
            graph.in_neighbors(&v)?
        };
        for (u, _) in nbrs {
            if !dist.contains_key(&u) {
                dist.insert(u.clone(), d + 1);
                queue.push_back(u);
            }
        }
    }
    Ok(dist)
}

/// Vertices of the radius-`radius` ball around `center`, ordered by distance
/// and then canonically.
///
/// For oriented graphs a vertex belongs to the ball when it is reachable from
/// the center in at most `radius` directed steps and can reach the center in
/// at most `radius` directed steps.
pub fn ball_vertices(graph: &WeightedGraph, center: &Vertex, radius: usize) -> Result<Vec<Vertex>> {
    if !graph.contains(center) {
        return Err(Error::UnknownVertex(center.to_string()));
    }
    let fwd = bfs_distances(graph, center, radius, true)?;
    let mut members: Vec<(usize, Vertex)> = if graph.is_oriented() {
        let back = bfs_distances(graph, center, radius, false)?;
        fwd.into_iter()
            .filter_map(|(v, d)| back.get(&v).map(|&b| (d.max(b), v)))
            .collect()
    } else {
        fwd.into_iter().map(|(v, d)| (d, v)).collect()
    };
    members.sort();
    Ok(members.into_iter().map(|(_, v)| v).collect())
}

/// `_nμ`: the kernel restricted to the ball of radius `radius`.
pub fn ball_truncation(graph: &WeightedGraph, center: &Vertex, radius: usize) -> Result<KernelMatrix> {
    KernelMatrix::from_vertices(graph, ball_vertices(graph, center, radius)?)
}

/// Quotient of a ball truncation by the partition into spheres.
///
/// When every vertex of sphere `a` sends the same total weight into sphere
/// `b` (an equitable partition), the quotient matrix has the same
/// Perron–Frobenius eigenvalue as the ball truncation and the PF vector of the
/// ball is constant on spheres. This holds for the homogeneous tree around any
/// vertex and for symmetric nearest-neighbour walks on `Z`; it is how balls far
/// too large to enumerate are handled.
#[derive(Clone, Debug)]
pub struct RadialQuotient {
    pub matrix: KernelMatrix,
    /// Number of vertices in each sphere, `sphere_sizes[j] = |S_j|`
    /// (saturating at `u128::MAX`).
    pub sphere_sizes: Vec<u128>,
}

impl RadialQuotient {
    pub fn ball_size(&self) -> u128 {
        self.sphere_sizes.iter().fold(0u128, |a, b| a.saturating_add(*b))
    }
}

pub fn radial_quotient(graph: &WeightedGraph, center: &Vertex, radius: usize) -> Result<RadialQuotient> {
    if !graph.contains(center) {
        return Err(Error::UnknownVertex(center.to_string()));
    }
    let supported = graph.is_tree()
        || (graph.lattice_dim() == Some(1) && {
            let steps = graph.lattice_steps().expect("lattice");
            let w = |s: i64| {
                steps
                    .iter()
                    .find(|(o, _)| o[0] == s)
                    .map_or(0.0, |e| e.1)
            };
            steps.iter().all(|(o, _)| o[0].abs() <= 1) && w(1) == w(-1)
        });
    if !supported {
        return Err(Error::Unsupported(format!(
            "radial quotient needs a spherically symmetric family, got {}",
            graph.name()
        )));
    }
    let dist = |v: &Vertex| graph.closed_form_distance(center, v).expect("supported family");

    // Representative chain x_0 = center, x_{j+1} a neighbour of x_j one step further out.
    let mut reps = vec![center.clone()];
    let mut sizes: Vec<u128> = vec![1];
    for j in 0..radius {
        let nbrs = graph.neighbors(&reps[j])?;
        let outward: Vec<&Vertex> = nbrs.iter().filter(|(v, _)| dist(v) == j + 1).map(|e| &e.0).collect();
        let Some(&next) = outward.first() else {
            break;
        };
        // |S_{j+1}| = |S_j| · (#outward neighbours) / (#inward neighbours of a vertex in S_{j+1}).
        let inward = graph
            .neighbors(next)?
            .iter()
            .filter(|(v, _)| dist(v) == j)
            .count() as u128;
        sizes.push(sizes[j].saturating_mul(outward.len() as u128) / inward.max(1));
        reps.push(next.clone());
    }
    let levels = reps.len();
    let mut rows = vec![vec![0.0; levels]; levels];
    for (a, rep) in reps.iter().enumerate() {
        for (v, w) in graph.neighbors(rep)? {
            let b = dist(&v);
            if b < levels {
                rows[a][b] += w;
            }
        }
    }
    let mut matrix = KernelMatrix::from_dense(&rows)?;
    matrix.vertices = reps;
    matrix.index = matrix
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();
    Ok(RadialQuotient {
        matrix,
        sphere_sizes: sizes,
    })
}
