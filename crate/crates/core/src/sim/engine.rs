use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::config::ParticleConfiguration;
use super::plan::{Mode, SimulationPlan};
use crate::error::{Error, Result};
use crate::graph::{SiteCache, Vertex, K_SCALE};
use crate::rng::{self, StreamRng};

/// Why a birth proposal was discarded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suppression {
    /// Target already holds `m` particles.
    SiteCap,
    /// Child would exceed the generation cap.
    Generation,
    /// The total-birth cap has been reached.
    BirthCap,
}

/// One Gillespie event. Generations are those of the particle that died or
/// of the (proposed) child.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Death { at: Vertex, generation: u32 },
    Birth { from: Vertex, to: Vertex, generation: u32 },
    Suppressed { from: Vertex, to: Vertex, generation: u32, reason: Suppression },
}

impl Event {
    /// `time kind vertex generation` log line (without newline).
    pub fn log_line(&self, time: f64) -> String {
        match self {
            Event::Death { at, generation } => format!("{time} death {at} {generation}"),
            Event::Birth { to, generation, .. } => format!("{time} birth {to} {generation}"),
            Event::Suppressed { to, generation, reason, .. } => {
                let kind = match reason {
                    Suppression::SiteCap => "suppressed-cap",
                    Suppression::Generation => "suppressed-generation",
                    Suppression::BirthCap => "suppressed-births",
                };
                format!("{time} {kind} {to} {generation}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: f64,
    pub population: u64,
    /// `η_t(x₀)`.
    pub marked: u64,
}

/// Result of one replica up to the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaOutcome {
    pub replica: u64,
    /// `None` when the population is alive at the horizon (or hit the ceiling).
    pub extinction_time: Option<f64>,
    /// Accepted births `N_T`.
    pub births: u64,
    pub events: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_population: u64,
    pub final_marked: u64,
    pub weak_alive: bool,
    pub local_alive: bool,
    /// The run was stopped at the population ceiling; both flags are set.
    pub hit_ceiling: bool,
}

impl ReplicaOutcome {
    pub fn alive(&self, mode: Mode) -> bool {
        match mode {
            Mode::Weak => self.weak_alive,
            Mode::Local => self.local_alive,
        }
    }
}

/// Records checkpoints and the local-survival window for one process.
#[derive(Clone, Debug)]
pub(crate) struct Tracker {
    times: Vec<f64>,
    next: usize,
    horizon: f64,
    records: Vec<Checkpoint>,
    local: bool,
}

impl Tracker {
    pub(crate) fn new(times: &[f64], horizon: f64) -> Self {
        Tracker {
            times: times.to_vec(),
            next: 0,
            horizon,
            records: Vec::with_capacity(times.len()),
            local: false,
        }
    }

    /// The state was `(population, marked)` on `[from, to)`.
    pub(crate) fn hold(&mut self, from: f64, to: f64, population: u64, marked: u64) {
        while self.next < self.times.len() && self.times[self.next] < to {
            self.records.push(Checkpoint {
                t: self.times[self.next],
                population,
                marked,
            });
            self.next += 1;
        }
        if marked > 0 && to > self.horizon / 2.0 && from <= self.horizon {
            self.local = true;
        }
    }

    /// Closes the run at the horizon with the final state.
    pub(crate) fn finish(&mut self, population: u64, marked: u64) {
        while self.next < self.times.len() {
            self.records.push(Checkpoint {
                t: self.times[self.next],
                population,
                marked,
            });
            self.next += 1;
        }
        if marked > 0 {
            self.local = true;
        }
    }

    pub(crate) fn outcome(
        self,
        replica: u64,
        extinction_time: Option<f64>,
        births: u64,
        events: u64,
        final_population: u64,
        final_marked: u64,
        hit_ceiling: bool,
    ) -> ReplicaOutcome {
        ReplicaOutcome {
            replica,
            extinction_time,
            births,
            events,
            checkpoints: self.records,
            final_population,
            final_marked,
            weak_alive: hit_ceiling || final_population > 0,
            local_alive: hit_ceiling || self.local,
            hit_ceiling,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Particle {
    site: u32,
    generation: u32,
    /// Insertion order; initial particles come first.
    serial: u64,
}

#[derive(Clone, Copy, Debug)]
enum RawEvent {
    Death { site: u32, generation: u32 },
    Birth { from: u32, to: u32, generation: u32 },
    Suppressed { from: u32, to: u32, generation: u32, reason: Suppression },
}

/// Exact continuous-time simulation of one process (BRW, BRW_m, `η̄`, `η̂`
/// or any combination of their suppression rules).
pub struct Simulator<'g> {
    cache: SiteCache<'g>,
    counts: Vec<u32>,
    particles: Vec<Particle>,
    /// `Σ_x η(x)·k(x)` in units of `2^-40`.
    rate_fixed: i64,
    births: u64,
    events: u64,
    serials: u64,
    time: f64,
    lambda: f64,
    k_max: f64,
    cap: u32,
    generation_cap: u32,
    birth_cap: u64,
    marked: u32,
    rng: StreamRng,
}

impl<'g> Simulator<'g> {
    /// Simulator for `plan` driven by `rng`.
    pub fn new(plan: &'g SimulationPlan, rng: StreamRng) -> Result<Self> {
        plan.validate()?;
        let mut cache = SiteCache::new(&plan.graph);
        let marked = cache.intern(&plan.marked);
        let mut sim = Simulator {
            cache,
            counts: Vec::new(),
            particles: Vec::with_capacity(plan.initial.population() as usize),
            rate_fixed: 0,
            births: 0,
            events: 0,
            serials: 0,
            time: 0.0,
            lambda: plan.lambda,
            k_max: plan.graph.weight_bound(),
            cap: plan.cap.unwrap_or(u32::MAX),
            generation_cap: plan.generation_cap.unwrap_or(u32::MAX),
            birth_cap: plan.birth_cap.unwrap_or(u64::MAX),
            marked,
            rng,
        };
        for (v, n) in plan.initial.iter() {
            let site = sim.cache.intern(v);
            for _ in 0..n {
                sim.insert(site, 0)?;
            }
        }
        Ok(sim)
    }

    /// Simulator using the stream of replica `index`.
    pub fn for_replica(plan: &'g SimulationPlan, index: u64) -> Result<Self> {
        Self::new(plan, rng::replica(plan.seed, index))
    }

    fn count_mut(&mut self, site: u32) -> &mut u32 {
        let i = site as usize;
        if i >= self.counts.len() {
            self.counts.resize(self.cache.len().max(i + 1), 0);
        }
        &mut self.counts[i]
    }

    fn count(&self, site: u32) -> u32 {
        self.counts.get(site as usize).copied().unwrap_or(0)
    }

    fn insert(&mut self, site: u32, generation: u32) -> Result<()> {
        *self.count_mut(site) += 1;
        self.rate_fixed += self.cache.k_fixed(site)?;
        self.particles.push(Particle {
            site,
            generation,
            serial: self.serials,
        });
        self.serials += 1;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn population(&self) -> u64 {
        self.particles.len() as u64
    }

    /// Accepted births so far.
    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn marked_count(&self) -> u64 {
        self.count(self.marked) as u64
    }

    /// Total event rate `Λ = N + λ·Σ_x η(x)k(x)`.
    pub fn total_rate(&self) -> f64 {
        self.particles.len() as f64 + self.lambda * (self.rate_fixed as f64 / K_SCALE)
    }

    /// Number of particles currently at `x`.
    pub fn count_at(&self, x: &Vertex) -> u64 {
        self.cache.lookup(x).map_or(0, |s| self.count(s) as u64)
    }

    /// Sites of the `k` earliest-born particles located in `sites`.
    pub fn earliest_born(&self, sites: &[Vertex], k: usize) -> Vec<Vertex> {
        let ids: Vec<u32> = sites.iter().filter_map(|v| self.cache.lookup(v)).collect();
        let mut found: Vec<&Particle> = self.particles.iter().filter(|p| ids.contains(&p.site)).collect();
        found.sort_by_key(|p| p.serial);
        found
            .into_iter()
            .take(k)
            .map(|p| self.cache.vertex(p.site).clone())
            .collect()
    }

    /// Runs events up to time `t` (or extinction, or more than `ceiling`
    /// particles). Returns `false` if the ceiling stopped the run.
    pub fn advance_to(&mut self, t: f64, ceiling: u64) -> Result<bool> {
        while !self.particles.is_empty() {
            let next = self.time + self.waiting_time();
            if next > t {
                break;
            }
            self.time = next;
            self.apply()?;
            if self.population() > ceiling {
                return Ok(false);
            }
        }
        self.time = self.time.max(t);
        Ok(true)
    }

    pub fn configuration(&self) -> ParticleConfiguration {
        ParticleConfiguration::from_counts(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (self.cache.vertex(i as u32).clone(), c as u64)),
        )
    }

    /// Recomputes the cached totals from the particle list.
    pub fn totals_consistent(&mut self) -> Result<bool> {
        let mut counts = vec![0u32; self.counts.len()];
        let mut rate = 0i64;
        for p in self.particles.clone() {
            counts[p.site as usize] += 1;
            rate += self.cache.k_fixed(p.site)?;
        }
        Ok(counts == self.counts && rate == self.rate_fixed)
    }

    fn waiting_time(&mut self) -> f64 {
        let rate = self.total_rate();
        rng::exponential(&mut self.rng, rate)
    }

    fn apply(&mut self) -> Result<RawEvent> {
        self.events += 1;
        let n = self.particles.len();
        let u = self.rng.gen::<f64>() * self.total_rate();
        if u < n as f64 || self.rate_fixed == 0 {
            let idx = self.rng.gen_range(0..n);
            let p = self.particles.swap_remove(idx);
            self.counts[p.site as usize] -= 1;
            self.rate_fixed -= self.cache.k_fixed(p.site)?;
            return Ok(RawEvent::Death {
                site: p.site,
                generation: p.generation,
            });
        }
        // parent chosen proportionally to k(x) by rejection
        let parent = loop {
            let p = self.particles[self.rng.gen_range(0..n)];
            let k = self.cache.k(p.site)?;
            if self.rng.gen::<f64>() * self.k_max < k {
                break p;
            }
        };
        let u = self.rng.gen::<f64>();
        let to = self
            .cache
            .sample_target(parent.site, u)?
            .expect("parent has positive k");
        let generation = parent.generation + 1;
        let reason = if self.count(to) >= self.cap {
            Some(Suppression::SiteCap)
        } else if parent.generation >= self.generation_cap {
            Some(Suppression::Generation)
        } else if self.births >= self.birth_cap {
            Some(Suppression::BirthCap)
        } else {
            None
        };
        Ok(match reason {
            Some(reason) => RawEvent::Suppressed {
                from: parent.site,
                to,
                generation,
                reason,
            },
            None => {
                self.insert(to, generation)?;
                self.births += 1;
                RawEvent::Birth {
                    from: parent.site,
                    to,
                    generation,
                }
            }
        })
    }

    fn public_event(&self, e: RawEvent) -> Event {
        let v = |s: u32| self.cache.vertex(s).clone();
        match e {
            RawEvent::Death { site, generation } => Event::Death { at: v(site), generation },
            RawEvent::Birth { from, to, generation } => Event::Birth {
                from: v(from),
                to: v(to),
                generation,
            },
            RawEvent::Suppressed {
                from,
                to,
                generation,
                reason,
            } => Event::Suppressed {
                from: v(from),
                to: v(to),
                generation,
                reason,
            },
        }
    }

    /// One Gillespie step: returns the event and the elapsed time.
    pub fn step(&mut self) -> Result<(Event, f64)> {
        if self.particles.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        let dt = self.waiting_time();
        self.time += dt;
        let e = self.apply()?;
        Ok((self.public_event(e), dt))
    }

    /// Runs until extinction, the horizon or the ceiling.
    pub(crate) fn run(
        mut self,
        plan: &SimulationPlan,
        replica: u64,
        mut log: Option<&mut dyn Write>,
    ) -> Result<ReplicaOutcome> {
        let mut tracker = Tracker::new(&plan.checkpoints, plan.horizon);
        let horizon = plan.horizon;
        let mut extinction = None;
        let mut hit_ceiling = false;
        loop {
            if self.particles.is_empty() {
                extinction = Some(self.time);
                tracker.hold(self.time, horizon, 0, 0);
                break;
            }
            let dt = self.waiting_time();
            let next = self.time + dt;
            if next > horizon {
                tracker.hold(self.time, horizon, self.population(), self.marked_count());
                self.time = horizon;
                break;
            }
            tracker.hold(self.time, next, self.population(), self.marked_count());
            self.time = next;
            let e = self.apply()?;
            if let Some(w) = log.as_deref_mut() {
                writeln!(w, "{}", self.public_event(e).log_line(self.time))?;
            }
            if self.population() > plan.population_ceiling {
                hit_ceiling = true;
                break;
            }
        }
        let (pop, marked) = (self.population(), self.marked_count());
        tracker.finish(pop, marked);
        Ok(tracker.outcome(replica, extinction, self.births, self.events, pop, marked, hit_ceiling))
    }
}

/// Runs replica `index` of `plan` (deterministic in `(plan.seed, index)`).
pub fn run_replica(plan: &SimulationPlan, index: u64) -> Result<ReplicaOutcome> {
    Simulator::for_replica(plan, index)?.run(plan, index, None)
}

/// As [`run_replica`], writing one `time kind vertex generation` line per event.
pub fn run_replica_logged(plan: &SimulationPlan, index: u64, log: &mut dyn Write) -> Result<ReplicaOutcome> {
    Simulator::for_replica(plan, index)?.run(plan, index, Some(log))
}
