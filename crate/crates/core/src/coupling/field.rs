use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::block::{block_plan, run_block};
use super::index::{round_robin, BlockScheme, IndexGraph};
use crate::error::{Error, Result};
use crate::rng;
use crate::sim::{parallel_map, ParticleConfiguration};
use crate::stats::{ks_one_sided, ks_one_sided_critical, SurvivalEstimate};

/// Finite rectangle `[lo, hi] × {0, …, depth}` of `I × N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldWindow {
    pub lo: i64,
    pub hi: i64,
    pub depth: u32,
}

impl FieldWindow {
    pub fn new(lo: i64, hi: i64, depth: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::param("window", format!("lo = {lo} exceeds hi = {hi}")));
        }
        Ok(FieldWindow { lo, hi, depth })
    }

    /// `[-depth, depth] × {0, …, depth}`, enough for unit offsets from 0.
    pub fn cone(depth: u32) -> Self {
        FieldWindow {
            lo: -(depth as i64),
            hi: depth as i64,
            depth,
        }
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn contains(&self, i: i64) -> bool {
        (self.lo..=self.hi).contains(&i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum FieldRule {
    IidBernoulli { p: f64 },
    BlockDriven,
}

/// Open/closed bits for the edges `(i,n) → (i+o, n+1)` in a window.
/// Edges leaving the window or the index set are closed.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedPercolationField {
    pub index: IndexGraph,
    pub window: FieldWindow,
    pub rule: FieldRule,
    open: Vec<bool>,
}

impl OrientedPercolationField {
    fn closed(index: IndexGraph, window: FieldWindow, rule: FieldRule) -> Self {
        let n = window.width() * window.depth as usize * index.offsets.len();
        OrientedPercolationField {
            index,
            window,
            rule,
            open: vec![false; n],
        }
    }

    fn slot(&self, i: i64, n: u32, e: usize) -> usize {
        ((n as usize * self.window.width()) + (i - self.window.lo) as usize) * self.index.offsets.len() + e
    }

    fn edge_valid(&self, i: i64, n: u32, e: usize) -> bool {
        let j = i + self.index.offsets[e];
        n < self.window.depth
            && self.window.contains(i)
            && self.window.contains(j)
            && self.index.contains(i)
            && self.index.contains(j)
    }

    fn set(&mut self, i: i64, n: u32, e: usize, open: bool) {
        if self.edge_valid(i, n, e) {
            let s = self.slot(i, n, e);
            self.open[s] = open;
        }
    }

    /// Whether `(i,n) → (i + offsets[e], n+1)` is open.
    pub fn is_open(&self, i: i64, n: u32, e: usize) -> bool {
        e < self.index.offsets.len() && self.edge_valid(i, n, e) && self.open[self.slot(i, n, e)]
    }

    /// Open edges as `(i, n, j)`, ordered by level, then source, then offset.
    pub fn open_edges(&self) -> Vec<(i64, u32, i64)> {
        let mut out = Vec::new();
        for n in 0..self.window.depth {
            for i in self.window.lo..=self.window.hi {
                for (e, o) in self.index.offsets.iter().enumerate() {
                    if self.is_open(i, n, e) {
                        out.push((i, n, i + o));
                    }
                }
            }
        }
        out
    }

    /// Header `index_lo index_hi depth`, then `i n j` per open edge.
    pub fn dump(&self) -> String {
        let mut s = format!("{} {} {}\n", self.window.lo, self.window.hi, self.window.depth);
        for (i, n, j) in self.open_edges() {
            writeln!(s, "{i} {n} {j}").expect("string write");
        }
        s
    }
}

/// Independent Bernoulli(`p`) edges. Level `n` draws one uniform per edge from
/// stream `(seed, n)`, so fields at different `p` share their uniforms.
pub fn iid_oriented_percolation(index: &IndexGraph, p: f64, window: FieldWindow, seed: u64) -> Result<OrientedPercolationField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0,1], got {p}")));
    }
    index.validate()?;
    let mut f = OrientedPercolationField::closed(index.clone(), window, FieldRule::IidBernoulli { p });
    for n in 0..window.depth {
        let mut r = rng::keyed(seed, &[n as u64]);
        for i in window.lo..=window.hi {
            for e in 0..index.offsets.len() {
                let u: f64 = r.gen();
                f.set(i, n, e, u < p);
            }
        }
    }
    Ok(f)
}

/// Which sites of a block-driven field are simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldMode {
    /// Only sites reached from the origin; restarts use the `k` earliest-born
    /// particles in the target block of the smallest-index parent.
    #[default]
    Reachable,
    /// Every site of the window, each from the round-robin placement.
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldOptions {
    pub mode: FieldMode,
    /// Process the sites of a level in decreasing index order.
    pub descending: bool,
    /// Origin index at level 0 (reachable mode).
    pub origin: i64,
}

/// Block-driven field: the block at `(i,n)` runs from `k` particles in `A_i`
/// for time `t̄` on stream `(seed, n, i)` with the scheme's caps, and opens
/// `(i,n) → (j,n+1)` when `A_j` then holds `k` particles.
pub fn sample_block_driven_field(
    scheme: &BlockScheme,
    lambda: f64,
    window: FieldWindow,
    seed: u64,
    opts: FieldOptions,
) -> Result<OrientedPercolationField> {
    scheme.validate()?;
    let mut f = OrientedPercolationField::closed(scheme.index.clone(), window, FieldRule::BlockDriven);
    let mut level: BTreeMap<i64, ParticleConfiguration> = BTreeMap::new();
    match opts.mode {
        FieldMode::Reachable => {
            if window.contains(opts.origin) && scheme.index.contains(opts.origin) {
                level.insert(opts.origin, scheme.initial_configuration(opts.origin)?);
            }
        }
        FieldMode::Full => {
            for i in window.lo..=window.hi {
                if scheme.index.contains(i) {
                    level.insert(i, scheme.initial_configuration(i)?);
                }
            }
        }
    }
    for n in 0..window.depth {
        let mut sites: Vec<(i64, ParticleConfiguration)> = std::mem::take(&mut level).into_iter().collect();
        if opts.descending {
            sites.reverse();
        }
        let results = parallel_map(sites.len() as u64, |s| {
            let (i, init) = &sites[s as usize];
            let targets: Vec<_> = scheme
                .targets(*i)?
                .into_iter()
                .filter(|(j, _)| window.contains(*j))
                .collect();
            let plan = block_plan(scheme, init.clone(), lambda, scheme.caps)?;
            let stream = rng::keyed(seed, &[n as u64, rng::zkey(*i)]);
            let run = run_block(&plan, &targets, scheme.k, stream)?;
            let mut opened = Vec::new();
            for ((j, block), hit) in targets.iter().zip(&run.hits) {
                if *hit {
                    let chosen = run.sim.earliest_born(block, scheme.k as usize);
                    let mut c = ParticleConfiguration::new();
                    for v in chosen {
                        c.add(v, 1);
                    }
                    opened.push((*j, c));
                }
            }
            Ok((*i, opened))
        })?;
        let mut next: BTreeMap<i64, (i64, ParticleConfiguration)> = BTreeMap::new();
        for (i, opened) in results {
            for (j, c) in opened {
                let e = scheme.index.offsets.iter().position(|o| i + o == j).expect("target offset");
                f.set(i, n, e, true);
                let keep = next.get(&j).is_none_or(|(parent, _)| i < *parent);
                if keep {
                    next.insert(j, (i, c));
                }
            }
        }
        level = match opts.mode {
            FieldMode::Reachable => next.into_iter().map(|(j, (_, c))| (j, c)).collect(),
            FieldMode::Full => (window.lo..=window.hi)
                .filter(|&i| scheme.index.contains(i))
                .map(|i| Ok((i, round_robin(&scheme.blocks.block(i)?, scheme.k as u64))))
                .collect::<Result<_>>()?,
        };
    }
    Ok(f)
}

/// Directed cluster of an origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterReport {
    /// Deepest level reached.
    pub max_depth: u32,
    /// Levels `l ≥ 1` at which `(origin, l)` is reached.
    pub column_hits: u32,
    /// Number of reached sites, origin included.
    pub size: u64,
    /// The cluster crosses the whole window.
    pub crossed: bool,
}

/// Breadth-first search from `(origin, 0)` along open edges.
pub fn cluster_survival(field: &OrientedPercolationField, origin: i64) -> ClusterReport {
    let w = field.window;
    if !w.contains(origin) || !field.index.contains(origin) {
        return ClusterReport {
            max_depth: 0,
            column_hits: 0,
            size: 0,
            crossed: false,
        };
    }
    let mut current = vec![false; w.width()];
    current[(origin - w.lo) as usize] = true;
    let mut report = ClusterReport {
        max_depth: 0,
        column_hits: 0,
        size: 1,
        crossed: w.depth == 0,
    };
    for n in 0..w.depth {
        let mut next = vec![false; w.width()];
        let mut any = false;
        for (s, &on) in current.iter().enumerate() {
            if !on {
                continue;
            }
            let i = w.lo + s as i64;
            for (e, o) in field.index.offsets.iter().enumerate() {
                if field.is_open(i, n, e) {
                    let t = (i + o - w.lo) as usize;
                    if !next[t] {
                        next[t] = true;
                        any = true;
                        report.size += 1;
                    }
                }
            }
        }
        if !any {
            break;
        }
        report.max_depth = n + 1;
        if next[(origin - w.lo) as usize] {
            report.column_hits += 1;
        }
        current = next;
    }
    report.crossed = report.max_depth == w.depth;
    report
}

/// Crossing frequency and mean column hits of iid fields at one `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub p: f64,
    pub survival: SurvivalEstimate,
    pub mean_column_hits: f64,
    pub mean_depth: f64,
}

/// iid fields over a grid of `p`. Sample `s` uses the same uniforms for every `p`.
pub fn percolation_phase(index: &IndexGraph, ps: &[f64], window: FieldWindow, samples: u64, seed: u64) -> Result<Vec<PhasePoint>> {
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    let reports = parallel_map(samples, |s| {
        let sub = rng::mix(seed, &[s]);
        ps.iter()
            .map(|&p| Ok(cluster_survival(&iid_oriented_percolation(index, p, window, sub)?, 0)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ps
        .iter()
        .enumerate()
        .map(|(q, &p)| {
            let col: Vec<&ClusterReport> = reports.iter().map(|r| &r[q]).collect();
            let n = col.len() as f64;
            PhasePoint {
                p,
                survival: SurvivalEstimate::from_counts(col.iter().filter(|r| r.crossed).count() as u64, samples),
                mean_column_hits: col.iter().map(|r| r.column_hits as f64).sum::<f64>() / n,
                mean_depth: col.iter().map(|r| r.max_depth as f64).sum::<f64>() / n,
            }
        })
        .collect())
}

/// Cluster reports of `samples` block-driven fields from index 0.
pub fn block_field_clusters(
    scheme: &BlockScheme,
    lambda: f64,
    window: FieldWindow,
    samples: u64,
    seed: u64,
) -> Result<Vec<ClusterReport>> {
    parallel_map(samples, |s| {
        let f = sample_block_driven_field(scheme, lambda, window, rng::mix(seed, &[s]), FieldOptions::default())?;
        Ok(cluster_survival(&f, 0))
    })
}

/// Cluster reports of `samples` iid fields from index 0.
pub fn iid_field_clusters(index: &IndexGraph, p: f64, window: FieldWindow, samples: u64, seed: u64) -> Result<Vec<ClusterReport>> {
    parallel_map(samples, |s| {
        Ok(cluster_survival(&iid_oriented_percolation(index, p, window, rng::mix(seed, &[s]))?, 0))
    })
}

/// One-sided KS check that the depths in `upper` dominate those in `lower`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominanceCheck {
    /// `sup_x (F_upper(x) − F_lower(x))`.
    pub statistic: f64,
    pub critical: f64,
    pub dominates: bool,
}

pub fn depth_dominance(upper: &[ClusterReport], lower: &[ClusterReport], alpha: f64) -> DominanceCheck {
    let a: Vec<f64> = upper.iter().map(|r| r.max_depth as f64).collect();
    let b: Vec<f64> = lower.iter().map(|r| r.max_depth as f64).collect();
    let statistic = ks_one_sided(&a, &b);
    let critical = ks_one_sided_critical(a.len(), b.len(), alpha);
    DominanceCheck {
        statistic,
        critical,
        dominates: statistic <= critical,
    }
}

/// Edge indicators `(0,0) → (offsets[0], 1)` and `(1,0) → (1 + offsets[0], 1)`
/// over `samples` full-mode fields on `[0, 1]` (plus targets).
pub fn same_level_indicators(scheme: &BlockScheme, lambda: f64, samples: u64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let o = scheme.index.offsets[0];
    let window = FieldWindow::new(o.min(0), 1 + o.max(0), 1)?;
    let opts = FieldOptions {
        mode: FieldMode::Full,
        ..FieldOptions::default()
    };
    let pairs = parallel_map(samples, |s| {
        let f = sample_block_driven_field(scheme, lambda, window, rng::mix(seed, &[s]), opts)?;
        Ok((f.is_open(0, 0, 0) as u8 as f64, f.is_open(1, 0, 0) as u8 as f64))
    })?;
    Ok(pairs.into_iter().unzip())
}

/// CSV of cluster reports, one row per sample.
pub fn cluster_csv(reports: &[ClusterReport]) -> String {
    let mut s = String::from("sample,max_depth,column_hits,size,crossed\n");
    for (i, r) in reports.iter().enumerate() {
        writeln!(s, "{i},{},{},{},{}", r.max_depth, r.column_hits, r.size, r.crossed).expect("string write");
    }
    s
}
