use serde::{Deserialize, Serialize};

use super::index::{set_distance, BlockScheme, Caps};
use crate::error::{Error, Result};
use crate::graph::{paths_through, Vertex};
use crate::rng::{self, StreamRng};
use crate::sim::{parallel_map, ParticleConfiguration, SimulationPlan, Simulator};
use crate::spectral::{expected_count, truncation_ladder, LadderOptions};
use crate::stats::{quantile_u64, SurvivalEstimate};

/// Which process a block is run with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockProcess {
    /// Plain BRW `η`.
    Full,
    /// Generations above `n0` removed (`η̄`).
    Truncated,
    /// Site cap `m` (`η^m`).
    Capped,
    /// Both (`η̄^m`).
    TruncatedCapped,
    /// `η̄` with births after the `n̄`-th suppressed (`η̂`).
    Hat,
}

impl BlockProcess {
    pub const ALL: [BlockProcess; 5] = [
        BlockProcess::Full,
        BlockProcess::Truncated,
        BlockProcess::Capped,
        BlockProcess::TruncatedCapped,
        BlockProcess::Hat,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BlockProcess::Full => "eta",
            BlockProcess::Truncated => "eta_bar",
            BlockProcess::Capped => "eta_m",
            BlockProcess::TruncatedCapped => "eta_bar_m",
            BlockProcess::Hat => "eta_hat",
        }
    }

    /// Caps actually applied, taken from `caps`.
    pub fn applied(&self, caps: &Caps) -> Result<Caps> {
        let need_m = || caps.m.ok_or_else(|| Error::param("m", format!("{} needs a site cap", self.name())));
        let need_n0 = || caps.n0.ok_or_else(|| Error::param("n0", format!("{} needs a generation cap", self.name())));
        Ok(match self {
            BlockProcess::Full => Caps::default(),
            BlockProcess::Truncated => Caps { n0: Some(need_n0()?), ..Caps::default() },
            BlockProcess::Capped => Caps { m: Some(need_m()?), ..Caps::default() },
            BlockProcess::TruncatedCapped => Caps {
                m: Some(need_m()?),
                n0: Some(need_n0()?),
                n_bar: None,
            },
            BlockProcess::Hat => Caps {
                m: None,
                n0: Some(need_n0()?),
                n_bar: Some(caps.n_bar.ok_or_else(|| Error::param("n_bar", "eta_hat needs a birth cap"))?),
            },
        })
    }
}

/// Monte-Carlo probability that each out-neighbour block receives `k`
/// particles by time `t̄`, starting from `k` particles in `A_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSuccess {
    pub process: BlockProcess,
    pub source: i64,
    pub targets: Vec<i64>,
    pub per_target: Vec<SurvivalEstimate>,
    pub joint: SurvivalEstimate,
    /// `k > m·|A_j|` for some target: success is impossible and nothing was simulated.
    pub impossible: bool,
}

pub(crate) struct BlockRun<'a> {
    pub(crate) sim: Simulator<'a>,
    pub(crate) hits: Vec<bool>,
}

pub(crate) fn block_plan(scheme: &BlockScheme, initial: ParticleConfiguration, lambda: f64, caps: Caps) -> Result<SimulationPlan> {
    let marked = initial.iter().next().map(|(v, _)| v.clone()).ok_or(Error::EmptyConfiguration)?;
    let plan = SimulationPlan::new(scheme.graph.clone(), lambda, scheme.t_bar, marked)
        .initial(initial)
        .cap(caps.m)
        .generation_cap(caps.n0)
        .birth_cap(caps.n_bar);
    plan.validate()?;
    Ok(plan)
}

/// Runs one block for time `t̄` and records which targets hold `k` particles.
pub(crate) fn run_block<'a>(
    plan: &'a SimulationPlan,
    targets: &[(i64, Vec<Vertex>)],
    k: u32,
    stream: StreamRng,
) -> Result<BlockRun<'a>> {
    let mut sim = Simulator::new(plan, stream)?;
    sim.advance_to(plan.horizon, plan.population_ceiling)?;
    let hits = targets
        .iter()
        .map(|(_, b)| b.iter().map(|v| sim.count_at(v)).sum::<u64>() >= k as u64)
        .collect();
    Ok(BlockRun { sim, hits })
}

struct Trials {
    hits: Vec<Vec<bool>>,
    births: Vec<u64>,
}

fn trials(scheme: &BlockScheme, source: i64, lambda: f64, caps: Caps, replicas: u64, seed: u64) -> Result<Trials> {
    let targets = scheme.targets(source)?;
    let plan = block_plan(scheme, scheme.initial_configuration(source)?, lambda, caps)?;
    let runs = parallel_map(replicas, |r| {
        let run = run_block(&plan, &targets, scheme.k, rng::replica(seed, r))?;
        Ok((run.hits, run.sim.births()))
    })?;
    let (hits, births) = runs.into_iter().unzip();
    Ok(Trials { hits, births })
}

fn summarize(process: BlockProcess, source: i64, targets: Vec<i64>, hits: &[Vec<bool>]) -> BlockSuccess {
    let n = hits.len() as u64;
    let per_target = (0..targets.len())
        .map(|j| SurvivalEstimate::from_counts(hits.iter().filter(|h| h[j]).count() as u64, n))
        .collect();
    let joint = SurvivalEstimate::from_counts(hits.iter().filter(|h| h.iter().all(|&b| b)).count() as u64, n);
    BlockSuccess {
        process,
        source,
        targets,
        per_target,
        joint,
        impossible: false,
    }
}

/// Estimates the block event from `A_source` for each requested process.
/// Replica `r` uses the same stream for every process.
pub fn estimate_block_success(
    scheme: &BlockScheme,
    source: i64,
    lambda: f64,
    processes: &[BlockProcess],
    replicas: u64,
    seed: u64,
) -> Result<Vec<BlockSuccess>> {
    scheme.validate()?;
    if replicas == 0 {
        return Err(Error::param("replicas", "must be positive"));
    }
    let targets = scheme.targets(source)?;
    if targets.is_empty() {
        return Err(Error::param("source", format!("index {source} has no out-neighbours")));
    }
    let ids: Vec<i64> = targets.iter().map(|t| t.0).collect();
    let source_len = scheme.blocks.block(source)?.len() as u64;
    let mut out = Vec::with_capacity(processes.len());
    for &p in processes {
        let caps = p.applied(&scheme.caps)?;
        if let Some(m) = caps.m {
            let m = m as u64;
            let impossible = targets.iter().any(|(_, b)| scheme.k as u64 > m * b.len() as u64)
                || (scheme.k as u64).div_ceil(source_len) > m;
            if impossible {
                let zero = SurvivalEstimate::from_counts(0, replicas);
                out.push(BlockSuccess {
                    process: p,
                    source,
                    targets: ids.clone(),
                    per_target: vec![zero; ids.len()],
                    joint: zero,
                    impossible: true,
                });
                continue;
            }
        }
        let t = trials(scheme, source, lambda, caps, replicas, seed)?;
        out.push(summarize(p, source, ids.clone(), &t.hits));
    }
    Ok(out)
}

/// Search budget for [`tune_block`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneOptions {
    /// Largest block time tried.
    pub t_max: f64,
    /// Number of block times `t_max·j/t_points`.
    pub t_points: u32,
    /// `k` runs over `1, 2, 4, …` with this many values.
    pub k_doublings: u32,
    /// Smallest acceptable expected count per particle from `A_i` into each `A_j`.
    pub target_mean: f64,
    pub replicas: u64,
    pub seed: u64,
    /// Radius of the truncation used for the supercriticality check.
    pub ladder_radius: usize,
    /// Number of `n₀` values tried.
    pub n0_steps: u32,
    /// `k` values whose expected population exceeds this are skipped.
    pub population_limit: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            t_max: 10.0,
            t_points: 40,
            k_doublings: 12,
            target_mean: 2.0,
            replicas: 400,
            seed: 0,
            ladder_radius: 10,
            n0_steps: 12,
            population_limit: 2e5,
        }
    }
}

/// Result of [`tune_block`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunedBlock {
    pub t_bar: f64,
    pub k: u32,
    pub n0: u32,
    pub n_bar: u64,
    /// Joint success of `η` at `(t̄, k)`.
    pub joint: SurvivalEstimate,
    /// Joint success of `η̄` at `(t̄, k, n₀)`.
    pub joint_truncated: SurvivalEstimate,
    /// Smallest expected count into a target block at `t̄`.
    pub expected_min: f64,
    /// `1/ρ` of the ball truncation used as the supercriticality check.
    pub ladder_value: f64,
    /// Paths of length `n₀` through a source vertex (only for `n₀ ≤ 6`).
    pub paths_h: Option<u64>,
    /// `2·n̄·H`, a site cap under which `η̂ ≤ η̄^m`.
    pub m_required: Option<u64>,
}

impl TunedBlock {
    /// `template` with the tuned `t̄`, `k`, `n₀` and `n̄`.
    pub fn apply(&self, template: &BlockScheme) -> BlockScheme {
        let mut s = template.clone();
        s.t_bar = self.t_bar;
        s.k = self.k;
        s.caps.n0 = Some(self.n0);
        s.caps.n_bar = Some(self.n_bar);
        s
    }
}

fn expected_into(scheme: &BlockScheme, source: &[Vertex], targets: &[(i64, Vec<Vertex>)], lambda: f64, t: f64) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for x in source {
        for (_, b) in targets {
            let mut s = 0.0;
            for y in b {
                s += expected_count(&scheme.graph, x, y, lambda, t, None)?.partial_sum;
            }
            worst = worst.min(s);
        }
    }
    Ok(worst)
}

/// Chooses `t̄` from the expected counts, then `k` by doubling until the
/// joint block success of `η` reaches `1 − ε`; `n̄` is the `(1 − ε)`-quantile
/// of the births and `n₀` the smallest tried generation cap for which `η̄`
/// also succeeds with probability `1 − ε`.
pub fn tune_block(template: &BlockScheme, source: i64, lambda: f64, epsilon: f64, opts: &TuneOptions) -> Result<TunedBlock> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("must lie in (0,1), got {epsilon}")));
    }
    if opts.t_points == 0 || opts.k_doublings == 0 || opts.replicas == 0 || !(opts.t_max > 0.0) {
        return Err(Error::param("tune", "empty search budget"));
    }
    let mut scheme = template.clone();
    scheme.caps = Caps::default();
    scheme.validate()?;
    let src = scheme.blocks.block(source)?;
    let targets = scheme.targets(source)?;
    if targets.is_empty() {
        return Err(Error::param("source", format!("index {source} has no out-neighbours")));
    }

    let ladder = truncation_ladder(&scheme.graph, &src[0], &[opts.ladder_radius], &LadderOptions::default())?;
    let ladder_value = ladder.entries.last().map_or(f64::INFINITY, |e| e.estimate.n_r);
    if lambda <= ladder_value {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} is not above the truncated value {ladder_value:.6}"
        )));
    }

    let mut best: Option<(f64, f64)> = None;
    let mut chosen = None;
    for j in 1..=opts.t_points {
        let t = opts.t_max * j as f64 / opts.t_points as f64;
        let e = expected_into(&scheme, &src, &targets, lambda, t)?;
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((t, e));
        }
        if e >= opts.target_mean {
            chosen = Some((t, e));
            break;
        }
    }
    let (t_bar, expected_min) = match (chosen, best) {
        (Some(c), _) => c,
        (None, Some(b)) if b.1 > 1.0 => b,
        _ => {
            return Err(Error::TuningFailed(format!(
                "expected count into target blocks stays at or below 1 for t <= {}",
                opts.t_max
            )))
        }
    };
    scheme.t_bar = t_bar;

    let growth = ((lambda * scheme.graph.weight_bound() - 1.0) * t_bar).exp().max(1.0);
    let mut found = None;
    let mut last = None;
    for d in 0..opts.k_doublings {
        let k = 1u32 << d;
        if k as f64 * growth > opts.population_limit {
            break;
        }
        scheme.k = k;
        let seed = rng::mix(opts.seed, &[k as u64]);
        let t = trials(&scheme, source, lambda, Caps::default(), opts.replicas, seed)?;
        let s = summarize(BlockProcess::Full, source, vec![], &t.hits);
        last = Some((k, s.joint.p_hat));
        if s.joint.p_hat >= 1.0 - epsilon {
            found = Some((k, s.joint, t.births));
            break;
        }
    }
    let Some((k, joint, births)) = found else {
        return Err(Error::TuningFailed(format!(
            "joint success below {} at t_bar = {t_bar}; last tried (k, p_hat) = {last:?}",
            1.0 - epsilon
        )));
    };
    let n_bar = quantile_u64(&births, 1.0 - epsilon);

    let reach = targets
        .iter()
        .map(|(_, b)| set_distance(&scheme.graph, &src, b, 64))
        .collect::<Result<Vec<_>>>()?;
    let mut n0 = reach.iter().map(|d| d.unwrap_or(0)).max().unwrap_or(0) as u32;
    let mut step = 1;
    let mut truncated = None;
    for _ in 0..opts.n0_steps {
        let caps = Caps { n0: Some(n0), ..Caps::default() };
        let seed = rng::mix(opts.seed, &[k as u64, 1 << 32 | n0 as u64]);
        let t = trials(&scheme, source, lambda, caps, opts.replicas, seed)?;
        let s = summarize(BlockProcess::Truncated, source, vec![], &t.hits);
        if s.joint.p_hat >= 1.0 - epsilon {
            truncated = Some(s.joint);
            break;
        }
        n0 += step;
        step *= 2;
    }
    let Some(joint_truncated) = truncated else {
        return Err(Error::TuningFailed(format!(
            "no generation cap up to {n0} keeps the truncated block success above {}",
            1.0 - epsilon
        )));
    };

    let paths_h = if n0 <= 6 {
        let mut h = 0;
        for x in &src {
            h = h.max(paths_through(&scheme.graph, x, n0 as usize)?);
        }
        Some(h)
    } else {
        None
    };
    Ok(TunedBlock {
        t_bar,
        k,
        n0,
        n_bar,
        joint,
        joint_truncated,
        expected_min,
        ladder_value,
        paths_h,
        m_required: paths_h.map(|h| 2 * n_bar * h),
    })
}

/// CSV with one row per (process, target) plus a `joint` row per process.
pub fn block_success_csv(rows: &[BlockSuccess]) -> String {
    let mut out = String::from("process,source,target,replicas,successes,p_hat,ci_lo,ci_hi\n");
    for r in rows {
        let line = |target: String, e: &SurvivalEstimate| {
            format!(
                "{},{},{},{},{},{},{},{}\n",
                r.process.name(),
                r.source,
                target,
                e.replicas,
                e.successes,
                e.p_hat,
                e.ci_lo,
                e.ci_hi
            )
        };
        for (j, e) in r.targets.iter().zip(&r.per_target) {
            out.push_str(&line(j.to_string(), e));
        }
        out.push_str(&line("joint".into(), &r.joint));
    }
    out
}
