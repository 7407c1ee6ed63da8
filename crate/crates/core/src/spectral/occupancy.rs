use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{radial_quotient, KernelMatrix, Vertex, WeightedGraph};

/// `E^{δ_{x₀}}(η_t(x)) = e^{-t} Σ_n μ⁽ⁿ⁾(x₀,x) (λt)ⁿ/n!`, truncated at `order`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupancySeries {
    pub source: Vertex,
    pub target: Vertex,
    pub lambda: f64,
    pub t: f64,
    pub order: usize,
    pub partial_sum: f64,
    /// `e^{-t} Σ_{n>order} (λKt)ⁿ/n!`, an upper bound on the omitted terms.
    pub tail_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OccupancyPoint {
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Decaying,
    Growing,
    Inconclusive,
}

fn check_rate_time(lambda: f64, t: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be nonnegative and finite"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", "must be nonnegative and finite"));
    }
    Ok(())
}

/// Default series order `max(50, ⌈3λKt⌉)`.
pub fn default_order(lambda: f64, k: f64, t: f64) -> usize {
    50usize.max((3.0 * lambda * k * t).ceil() as usize)
}

/// `μ⁽ⁿ⁾(x₀,x)` for `n = 0..=n_max`.
///
/// Trees use the radial quotient around `x₀` (the walk from `x₀` spreads
/// uniformly over each sphere); other graphs propagate the distribution.
pub fn kernel_powers(graph: &WeightedGraph, x0: &Vertex, x: &Vertex, n_max: usize) -> Result<Vec<f64>> {
    for v in [x0, x] {
        if !graph.contains(v) {
            return Err(Error::UnknownVertex(v.to_string()));
        }
    }
    if graph.is_tree() {
        let d = graph.closed_form_distance(x0, x).expect("tree distance");
        if d > n_max {
            return Ok(vec![0.0; n_max + 1]);
        }
        let q = radial_quotient(graph, x0, n_max)?;
        let mut dist = vec![0.0; n_max + 1];
        dist[0] = 1.0;
        let mut next = vec![0.0; n_max + 1];
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            out.push(dist[d] / q.sphere_sizes[d] as f64);
            if n < n_max {
                q.matrix.mul_vec_transposed(&dist, &mut next);
                std::mem::swap(&mut dist, &mut next);
            }
        }
        return Ok(out);
    }
    let mut dist: HashMap<Vertex, f64> = HashMap::from([(x0.clone(), 1.0)]);
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        out.push(dist.get(x).copied().unwrap_or(0.0));
        if n == n_max {
            break;
        }
        let mut next: HashMap<Vertex, f64> = HashMap::with_capacity(dist.len() * 2);
        for (v, m) in &dist {
            for (u, w) in graph.neighbors(v)? {
                *next.entry(u).or_default() += m * w;
            }
        }
        dist = next;
    }
    Ok(out)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

fn series_sum(powers: &[f64], lambda: f64, t: f64, lnf: &[f64]) -> f64 {
    let a = lambda * t;
    powers
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| {
            if n == 0 {
                p * (-t).exp()
            } else if a == 0.0 {
                0.0
            } else {
                (p.ln() - t + n as f64 * a.ln() - lnf[n]).exp()
            }
        })
        .sum()
}

/// `e^{-t} Σ_{n>order} aⁿ/n!` for `a = λKt`.
pub fn poisson_tail(a: f64, t: f64, order: usize) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let mut n = order + 1;
    let mut ln_term = -t + n as f64 * a.ln() - ln_factorials(n)[n];
    let mut sum = 0.0;
    loop {
        let term = ln_term.exp();
        sum += term;
        let ratio = a / (n + 1) as f64;
        if ratio < 0.5 && (term <= sum * 1e-18 || term == 0.0) {
            // remaining terms are bounded by a geometric series
            return sum + term * ratio / (1.0 - ratio);
        }
        n += 1;
        ln_term += ratio.ln();
    }
}

/// Expected number of particles at `x` at time `t` for the BRW started from
/// one particle at `x₀`. `order` defaults to `max(50, ⌈3λKt⌉)`.
pub fn expected_count(
    graph: &WeightedGraph,
    x0: &Vertex,
    x: &Vertex,
    lambda: f64,
    t: f64,
    order: Option<usize>,
) -> Result<OccupancySeries> {
    check_rate_time(lambda, t)?;
    let k = graph.weight_bound();
    let order = order.unwrap_or_else(|| default_order(lambda, k, t));
    let powers = kernel_powers(graph, x0, x, order)?;
    Ok(OccupancySeries {
        source: x0.clone(),
        target: x.clone(),
        lambda,
        t,
        order,
        partial_sum: series_sum(&powers, lambda, t, &ln_factorials(order)),
        tail_bound: poisson_tail(lambda * k * t, t, order),
    })
}

/// [`expected_count`] at several times, sharing the kernel powers.
pub fn occupancy_curve(
    graph: &WeightedGraph,
    x0: &Vertex,
    x: &Vertex,
    lambda: f64,
    times: &[f64],
    order: Option<usize>,
) -> Result<Vec<OccupancyPoint>> {
    for &t in times {
        check_rate_time(lambda, t)?;
    }
    let k = graph.weight_bound();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let order = order.unwrap_or_else(|| default_order(lambda, k, t_max));
    let powers = kernel_powers(graph, x0, x, order)?;
    let lnf = ln_factorials(order);
    Ok(times
        .iter()
        .map(|&t| OccupancyPoint {
            t,
            value: series_sum(&powers, lambda, t, &lnf),
            tail_bound: poisson_tail(lambda * k * t, t, order),
        })
        .collect())
}

/// RK4 solution at time `t` of `dE/dt = −E + λ Mᵀ E`, `E(0) = δ_{x₀}`.
pub fn occupancy_ode_solve(matrix: &KernelMatrix, x0: usize, lambda: f64, t: f64, step: f64) -> Result<Vec<f64>> {
    check_rate_time(lambda, t)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", "must be positive"));
    }
    let n = matrix.len();
    if x0 >= n {
        return Err(Error::param("x0", format!("index {x0} out of range")));
    }
    let mut e = vec![0.0; n];
    e[x0] = 1.0;
    let deriv = |y: &[f64], out: &mut [f64]| {
        matrix.mul_vec_transposed(y, out);
        for (o, v) in out.iter_mut().zip(y) {
            *o = lambda * *o - v;
        }
    };
    let steps = (t / step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        deriv(&e, &mut k1);
        for i in 0..n {
            tmp[i] = e[i] + 0.5 * h * k1[i];
        }
        deriv(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = e[i] + 0.5 * h * k2[i];
        }
        deriv(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = e[i] + h * k3[i];
        }
        deriv(&tmp, &mut k4);
        for i in 0..n {
            e[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(e)
}

/// Classifies the expected occupancy along `t_grid` by successive ratios:
/// all below 0.9 is decaying, all above 1.1 is growing.
pub fn growth_classifier(
    graph: &WeightedGraph,
    x0: &Vertex,
    x: &Vertex,
    lambda: f64,
    t_grid: &[f64],
) -> Result<Growth> {
    if t_grid.len() < 2 {
        return Err(Error::param("t_grid", "needs at least two times"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("t_grid", "must be increasing"));
    }
    let values: Vec<f64> = occupancy_curve(graph, x0, x, lambda, t_grid, None)?
        .into_iter()
        .map(|p| p.value)
        .collect();
    let ratios: Vec<f64> = values
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN })
        .collect();
    Ok(if ratios.iter().all(|r| *r < 0.9) {
        Growth::Decaying
    } else if ratios.iter().all(|r| *r > 1.1) {
        Growth::Growing
    } else {
        Growth::Inconclusive
    })
}

/// CSV with columns `t,value,tail_bound`.
pub fn occupancy_csv(points: &[OccupancyPoint]) -> String {
    let mut s = String::from("t,value,tail_bound\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.t, p.value, p.tail_bound);
    }
    s
}
