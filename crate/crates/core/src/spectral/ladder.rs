use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::power::{pf_eigenpair, PowerOptions, SpectralEstimate};
use crate::error::{Error, Result};
use crate::graph::{ball_truncation, radial_quotient, KernelMatrix, Vertex, WeightedGraph};

/// How each truncation is represented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderMethod {
    /// Radial quotient for trees, full ball otherwise.
    #[default]
    Auto,
    /// Full ball kernel `_nμ`.
    Ball,
    /// Quotient by distance spheres; same PF eigenvalue as the full ball on
    /// graphs where it is available.
    Radial,
}

#[derive(Clone, Debug, Default)]
pub struct LadderOptions {
    pub method: LadderMethod,
    pub power: PowerOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderEntry {
    pub radius: usize,
    /// Number of vertices of the ball (not of the quotient).
    pub vertices: u128,
    pub estimate: SpectralEstimate,
}

/// `_nR_μ` for a sequence of radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationLadder {
    pub entries: Vec<LadderEntry>,
    /// Radii left out because the ball kernel is not strongly connected.
    pub skipped: Vec<usize>,
    /// Raw last-radius value.
    pub limit: Option<f64>,
    /// Heuristic `L + C/n²` fit through the last two entries.
    pub extrapolated: Option<f64>,
    /// First radius after which the relative change stayed below `1e-4` for
    /// three consecutive radii.
    pub stabilized_at: Option<usize>,
}

impl TruncationLadder {
    /// Largest increase `nR(i+1) − nR(i)` between consecutive entries (≤ 0 for
    /// a monotone ladder).
    pub fn max_increase(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| w[1].estimate.n_r - w[0].estimate.n_r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.estimate.converged)
    }
}

/// Computes `_nR_μ` on balls of the given radii around `center`.
pub fn truncation_ladder(
    graph: &WeightedGraph,
    center: &Vertex,
    radii: &[usize],
    opts: &LadderOptions,
) -> Result<TruncationLadder> {
    if radii.is_empty() {
        return Err(Error::param("radii", "empty radius list"));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("radii", "must be strictly increasing"));
    }
    if !graph.contains(center) {
        return Err(Error::UnknownVertex(center.to_string()));
    }
    let radial = match opts.method {
        LadderMethod::Auto => graph.is_tree(),
        LadderMethod::Ball => false,
        LadderMethod::Radial => true,
    };
    let mut entries = Vec::with_capacity(radii.len());
    let mut skipped = Vec::new();
    let mut warm: HashMap<Vertex, f64> = HashMap::new();
    for &radius in radii {
        let (matrix, vertices) = if radial {
            let q = radial_quotient(graph, center, radius)?;
            let size = q.ball_size();
            (q.matrix, size)
        } else {
            let m = ball_truncation(graph, center, radius)?;
            let size = m.len() as u128;
            (m, size)
        };
        if !matrix.is_connected() {
            skipped.push(radius);
            continue;
        }
        let mut power = opts.power.clone();
        power.start = warm_start(&matrix, &warm);
        let (estimate, vector) = pf_eigenpair(&matrix, &power)?;
        warm = matrix.vertices().iter().cloned().zip(vector).collect();
        entries.push(LadderEntry {
            radius,
            vertices,
            estimate,
        });
    }
    let limit = entries.last().map(|e| e.estimate.n_r);
    let extrapolated = match entries.as_slice() {
        [.., a, b] if a.radius > 0 => {
            let (n1, n2) = ((a.radius as f64).powi(2), (b.radius as f64).powi(2));
            Some((n2 * b.estimate.n_r - n1 * a.estimate.n_r) / (n2 - n1))
        }
        _ => None,
    };
    let stabilized_at = entries.windows(4).find_map(|w| {
        w.windows(2)
            .all(|p| ((p[1].estimate.n_r - p[0].estimate.n_r) / p[0].estimate.n_r).abs() < 1e-4)
            .then_some(w[3].radius)
    });
    Ok(TruncationLadder {
        entries,
        skipped,
        limit,
        extrapolated,
        stabilized_at,
    })
}

/// Previous eigenvector on the common vertices; new vertices get the smallest
/// previous entry so the start stays strictly positive.
fn warm_start(matrix: &KernelMatrix, warm: &HashMap<Vertex, f64>) -> Option<Vec<f64>> {
    let floor = warm.values().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return None;
    }
    Some(
        matrix
            .vertices()
            .iter()
            .map(|v| warm.get(v).copied().filter(|x| *x > 0.0).unwrap_or(floor))
            .collect(),
    )
}

/// Diagnostic sequence `(Σ_y μ⁽ⁿ⁾(x,y))^{-1/n}` for `n = 1..=n_max`.
///
/// Its limit inferior is the weak critical parameter on many graphs; the
/// values are reported as a diagnostic only.
pub fn row_sum_ladder(graph: &WeightedGraph, x: &Vertex, n_max: usize) -> Result<Vec<f64>> {
    let mut dist: HashMap<Vertex, f64> = HashMap::from([(x.clone(), 1.0)]);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut next: HashMap<Vertex, f64> = HashMap::new();
        for (v, m) in &dist {
            for (u, w) in graph.neighbors(v)? {
                *next.entry(u).or_default() += m * w;
            }
        }
        dist = next;
        let total: f64 = dist.values().sum();
        out.push(if total > 0.0 {
            total.powf(-1.0 / n as f64)
        } else {
            f64::INFINITY
        });
    }
    Ok(out)
}

/// CSV with columns `radius,vertices,rho,nR,residual,iterations`.
pub fn ladder_csv(ladder: &TruncationLadder) -> String {
    let mut s = String::from("radius,vertices,rho,nR,residual,iterations\n");
    for e in &ladder.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.radius, e.vertices, e.estimate.rho, e.estimate.n_r, e.estimate.residual, e.estimate.iterations
        );
    }
    s
}
