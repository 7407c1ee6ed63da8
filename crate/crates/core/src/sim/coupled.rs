use rand::Rng;
use serde::Serialize;

use super::engine::{ReplicaOutcome, Tracker};
use super::plan::SimulationPlan;
use crate::error::Result;
use crate::graph::{SiteCache, K_SCALE};
use crate::rng;

/// Index of each process in the coupled family.
pub const ETA: usize = 0;
pub const ETA_M: usize = 1;
pub const ETA_BAR: usize = 2;
pub const ETA_BAR_M: usize = 3;
pub const ETA_HAT: usize = 4;
const P: usize = 5;

/// Five processes driven by one event stream: the BRW `η`, the capped `η^m`,
/// the generation-truncated `η̄` and `η̄^m`, and the birth-capped `η̂`.
#[derive(Clone, Debug, Serialize)]
pub struct CoupledOutcome {
    pub eta: ReplicaOutcome,
    pub eta_m: ReplicaOutcome,
    pub eta_bar: ReplicaOutcome,
    pub eta_bar_m: ReplicaOutcome,
    pub eta_hat: ReplicaOutcome,
    /// `η̄^m ≤ η^m ≤ η` and `η̄^m ≤ η̄ ≤ η` held sitewise at every event.
    pub dominated: bool,
    /// `η̂ ≤ η̄^m` held sitewise at every event.
    pub hat_below_bar_m: bool,
    /// `η̂ = η̄^m` at every event.
    pub hat_equals_bar_m: bool,
    /// `η = η^m = η̄ = η̄^m` at every event.
    pub four_identical: bool,
    /// Sitewise comparisons performed.
    pub checks: u64,
}

impl CoupledOutcome {
    pub fn process(&self, i: usize) -> &ReplicaOutcome {
        [&self.eta, &self.eta_m, &self.eta_bar, &self.eta_bar_m, &self.eta_hat][i]
    }
}

#[derive(Clone, Copy, Debug)]
struct Particle {
    site: u32,
    generation: u32,
    in_m: bool,
    in_hat: bool,
}

struct Coupled<'a, 'g> {
    plan: &'a SimulationPlan,
    cache: SiteCache<'g>,
    counts: Vec<[u32; P]>,
    particles: Vec<Particle>,
    rate_fixed: i64,
    pops: [u64; P],
    births: [u64; P],
    active: [bool; P],
    ceiling_hit: [bool; P],
    extinction: [Option<f64>; P],
    /// `(population, marked count)` when a process was retired.
    retired_state: [(u64, u64); P],
    marked: u32,
    n0: u32,
    cap: u32,
    n_bar: u64,
}

impl Coupled<'_, '_> {
    fn membership(&self, p: &Particle) -> [bool; P] {
        let bar = p.generation <= self.n0;
        [true, p.in_m, bar, p.in_m && bar, p.in_hat]
    }

    fn in_driver(&self, p: &Particle) -> bool {
        let m = self.membership(p);
        (0..P).any(|i| m[i] && self.active[i])
    }

    fn counts_at(&self, site: u32) -> [u32; P] {
        self.counts.get(site as usize).copied().unwrap_or([0; P])
    }

    fn add(&mut self, p: Particle, sign: i64) -> Result<()> {
        let i = p.site as usize;
        if i >= self.counts.len() {
            self.counts.resize(self.cache.len().max(i + 1), [0; P]);
        }
        let m = self.membership(&p);
        for (q, &member) in m.iter().enumerate() {
            if member {
                if sign > 0 {
                    self.counts[i][q] += 1;
                    self.pops[q] += 1;
                } else {
                    self.counts[i][q] -= 1;
                    self.pops[q] -= 1;
                }
            }
        }
        self.rate_fixed += sign * self.cache.k_fixed(p.site)?;
        Ok(())
    }

    fn chain_ok(&self, c: &[u32; P]) -> bool {
        let le = |a: usize, b: usize| !(self.active[a] && self.active[b]) || c[a] <= c[b];
        le(ETA_BAR_M, ETA_M) && le(ETA_M, ETA) && le(ETA_BAR_M, ETA_BAR) && le(ETA_BAR, ETA)
    }

    fn total_rate(&self) -> f64 {
        self.particles.len() as f64 + self.plan.lambda * (self.rate_fixed as f64 / K_SCALE)
    }

    /// Retires processes above the ceiling and drops particles that belong
    /// to no remaining process.
    fn enforce_ceiling(&mut self) -> Result<()> {
        let mut changed = false;
        for q in 0..P {
            if self.active[q] && self.pops[q] > self.plan.population_ceiling {
                self.active[q] = false;
                self.ceiling_hit[q] = true;
                self.retired_state[q] = (self.pops[q], self.counts_at(self.marked)[q] as u64);
                changed = true;
            }
        }
        if changed {
            let old = std::mem::take(&mut self.particles);
            let mut kept = Vec::with_capacity(old.len());
            for p in old {
                if self.in_driver(&p) {
                    kept.push(p);
                } else {
                    self.rate_fixed -= self.cache.k_fixed(p.site)?;
                }
            }
            self.particles = kept;
        }
        Ok(())
    }
}

/// Runs the five coupled processes of replica `index` with caps `m`, `n₀`,
/// `n̄` taken from `plan` (absent caps are infinite).
pub fn coupled_run(plan: &SimulationPlan, index: u64) -> Result<CoupledOutcome> {
    plan.validate()?;
    let mut rng = rng::replica(plan.seed, index);
    let mut cache = SiteCache::new(&plan.graph);
    let marked = cache.intern(&plan.marked);
    let mut st = Coupled {
        plan,
        cache,
        counts: Vec::new(),
        particles: Vec::new(),
        rate_fixed: 0,
        pops: [0; P],
        births: [0; P],
        active: [true; P],
        ceiling_hit: [false; P],
        extinction: [None; P],
        retired_state: [(0, 0); P],
        marked,
        n0: plan.generation_cap.unwrap_or(u32::MAX),
        cap: plan.cap.unwrap_or(u32::MAX),
        n_bar: plan.birth_cap.unwrap_or(u64::MAX),
    };
    for (v, n) in plan.initial.iter() {
        let site = st.cache.intern(v);
        for _ in 0..n {
            let p = Particle {
                site,
                generation: 0,
                in_m: true,
                in_hat: true,
            };
            st.add(p, 1)?;
            st.particles.push(p);
        }
    }
    let mut trackers: Vec<Tracker> = (0..P)
        .map(|_| Tracker::new(&plan.checkpoints, plan.horizon))
        .collect();
    let mut dominated = true;
    let mut hat_below = true;
    let mut hat_equal = true;
    let mut identical = true;
    let mut checks = 0u64;
    let mut events = 0u64;
    let k_max = plan.graph.weight_bound();
    let mut time = 0.0;

    let mut check_site = |st: &Coupled, site: u32| {
        let c = st.counts_at(site);
        checks += 1;
        dominated &= st.chain_ok(&c);
        if st.active[ETA_HAT] && st.active[ETA_BAR_M] {
            hat_below &= c[ETA_HAT] <= c[ETA_BAR_M];
            hat_equal &= c[ETA_HAT] == c[ETA_BAR_M];
        }
        identical &= c[ETA] == c[ETA_M] && c[ETA] == c[ETA_BAR] && c[ETA] == c[ETA_BAR_M];
    };
    for i in 0..st.counts.len() {
        check_site(&st, i as u32);
    }

    loop {
        for q in 0..P {
            if st.pops[q] == 0 && st.extinction[q].is_none() && !st.ceiling_hit[q] {
                st.extinction[q] = Some(time);
            }
        }
        if st.particles.is_empty() {
            break;
        }
        let dt = rng::exponential(&mut rng, st.total_rate());
        let next = time + dt;
        let until = next.min(plan.horizon);
        for (q, tr) in trackers.iter_mut().enumerate() {
            if st.active[q] {
                tr.hold(time, until, st.pops[q], st.counts_at(marked)[q] as u64);
            }
        }
        if next > plan.horizon {
            break;
        }
        time = next;
        events += 1;

        let n = st.particles.len();
        let u = rng.gen::<f64>() * st.total_rate();
        if u < n as f64 || st.rate_fixed == 0 {
            let p = st.particles.swap_remove(rng.gen_range(0..n));
            st.add(p, -1)?;
            check_site(&st, p.site);
            continue;
        }
        let parent = loop {
            let p = st.particles[rng.gen_range(0..n)];
            if rng.gen::<f64>() * k_max < st.cache.k(p.site)? {
                break p;
            }
        };
        let to = st
            .cache
            .sample_target(parent.site, rng.gen::<f64>())?
            .expect("parent has positive k");
        let generation = parent.generation + 1;
        let c_to = st.counts_at(to);
        let in_m = parent.in_m && c_to[ETA_M] < st.cap;
        let in_hat = parent.in_hat && generation <= st.n0 && st.births[ETA_HAT] < st.n_bar;
        let child = Particle {
            site: to,
            generation,
            in_m,
            in_hat,
        };
        let member = st.membership(&child);
        if st.in_driver(&child) {
            for q in 0..P {
                if member[q] {
                    st.births[q] += 1;
                }
            }
            st.add(child, 1)?;
            st.particles.push(child);
            check_site(&st, to);
        }
        st.enforce_ceiling()?;
    }

    let mut outs = Vec::with_capacity(P);
    for (q, mut tr) in trackers.into_iter().enumerate() {
        let (pop, mk) = if st.ceiling_hit[q] {
            st.retired_state[q]
        } else {
            (st.pops[q], st.counts_at(marked)[q] as u64)
        };
        tr.finish(pop, mk);
        outs.push(tr.outcome(
            index,
            st.extinction[q],
            st.births[q],
            events,
            pop,
            mk,
            st.ceiling_hit[q],
        ));
    }
    let mut it = outs.into_iter();
    Ok(CoupledOutcome {
        eta: it.next().expect("5"),
        eta_m: it.next().expect("5"),
        eta_bar: it.next().expect("5"),
        eta_bar_m: it.next().expect("5"),
        eta_hat: it.next().expect("5"),
        dominated,
        hat_below_bar_m: hat_below,
        hat_equals_bar_m: hat_equal,
        four_identical: identical,
        checks,
    })
}
