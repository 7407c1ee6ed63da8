use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::config::ParticleConfiguration;
use super::engine::{ReplicaOutcome, Tracker};
use super::plan::SimulationPlan;
use crate::error::{Error, Result};
use crate::graph::{SiteCache, Vertex, WeightedGraph};
use crate::rng;

/// One member of a [`MonotoneFamily`]: breeding rate and site cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Variant {
    pub lambda: f64,
    pub cap: Option<u32>,
}

impl Variant {
    pub fn new(lambda: f64, cap: Option<u32>) -> Self {
        Variant { lambda, cap }
    }

    /// `self` is dominated by `other` in both `λ` and `m`.
    pub fn below(&self, other: &Variant) -> bool {
        self.lambda <= other.lambda && self.cap.unwrap_or(u32::MAX) <= other.cap.unwrap_or(u32::MAX)
    }
}

/// Several BRW_m variants (different `λ` and `m`) driven by one graphical
/// construction, so that configurations are ordered sitewise whenever the
/// parameters are.
///
/// Each site `x` carries slots `1..=D(x)` where `D(x)` is the largest count
/// among the variants. Every slot rings at rate `1 + λ_max·K`; a ring is a
/// death (for every variant holding at least that many particles) or a
/// birth proposal `x → y` with a shared mark `v`, accepted by variant `P`
/// when `v·λ_max < λ_P` and `η_P(y) < m_P`.
#[derive(Clone, Debug)]
pub struct MonotoneFamily {
    pub graph: Arc<WeightedGraph>,
    pub variants: Vec<Variant>,
    pub horizon: f64,
    pub initial: ParticleConfiguration,
    pub marked: Vertex,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub population_ceiling: u64,
}

impl MonotoneFamily {
    /// Family sharing graph, horizon, initial state, seed and ceiling with `plan`.
    pub fn from_plan(plan: &SimulationPlan, variants: Vec<Variant>) -> Result<Self> {
        if plan.generation_cap.is_some() || plan.birth_cap.is_some() {
            return Err(Error::Unsupported(
                "monotone families support site caps only".into(),
            ));
        }
        let fam = MonotoneFamily {
            graph: plan.graph.clone(),
            variants,
            horizon: plan.horizon,
            initial: plan.initial.clone(),
            marked: plan.marked.clone(),
            seed: plan.seed,
            checkpoints: plan.checkpoints.clone(),
            population_ceiling: plan.population_ceiling,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::param("variants", "empty family"));
        }
        for v in &self.variants {
            let plan = SimulationPlan {
                graph: self.graph.clone(),
                lambda: v.lambda,
                cap: v.cap,
                generation_cap: None,
                birth_cap: None,
                horizon: self.horizon,
                initial: self.initial.clone(),
                marked: self.marked.clone(),
                seed: self.seed,
                replicas: 1,
                checkpoints: self.checkpoints.clone(),
                population_ceiling: self.population_ceiling,
            };
            plan.validate()?;
        }
        Ok(())
    }

    /// Runs replica `index`; outcomes are in variant order.
    pub fn run_replica(&self, index: u64) -> Result<Vec<ReplicaOutcome>> {
        self.validate()?;
        Slots::new(self)?.run(self, index)
    }
}

struct Slots<'g> {
    cache: SiteCache<'g>,
    nv: usize,
    /// `counts[site * nv + variant]`.
    counts: Vec<u32>,
    driver: Vec<u32>,
    slots: Vec<(u32, u32)>,
    slot_pos: HashMap<(u32, u32), usize>,
    pops: Vec<u64>,
    births: Vec<u64>,
    active: Vec<bool>,
    ceiling_hit: Vec<bool>,
    retired_state: Vec<(u64, u64)>,
    extinction: Vec<Option<f64>>,
    lambdas: Vec<f64>,
    caps: Vec<u32>,
    lambda_max: f64,
    marked: u32,
}

impl<'g> Slots<'g> {
    fn new(fam: &'g MonotoneFamily) -> Result<Self> {
        let nv = fam.variants.len();
        let mut cache = SiteCache::new(&fam.graph);
        let marked = cache.intern(&fam.marked);
        let lambdas: Vec<f64> = fam.variants.iter().map(|v| v.lambda).collect();
        let mut s = Slots {
            cache,
            nv,
            counts: Vec::new(),
            driver: Vec::new(),
            slots: Vec::new(),
            slot_pos: HashMap::new(),
            pops: vec![0; nv],
            births: vec![0; nv],
            active: vec![true; nv],
            ceiling_hit: vec![false; nv],
            retired_state: vec![(0, 0); nv],
            extinction: vec![None; nv],
            lambda_max: lambdas.iter().copied().fold(0.0, f64::max),
            lambdas,
            caps: fam.variants.iter().map(|v| v.cap.unwrap_or(u32::MAX)).collect(),
            marked,
        };
        for (v, n) in fam.initial.iter() {
            let site = s.cache.intern(v);
            s.grow();
            for q in 0..nv {
                s.counts[site as usize * nv + q] = n as u32;
                s.pops[q] += n;
            }
            s.refresh_driver(site);
        }
        s.grow();
        Ok(s)
    }

    fn grow(&mut self) {
        let sites = self.cache.len();
        if self.driver.len() < sites {
            self.driver.resize(sites, 0);
            self.counts.resize(sites * self.nv, 0);
        }
    }

    fn c(&self, site: u32, q: usize) -> u32 {
        self.counts[site as usize * self.nv + q]
    }

    fn refresh_driver(&mut self, site: u32) {
        let want = (0..self.nv)
            .filter(|&q| self.active[q])
            .map(|q| self.c(site, q))
            .max()
            .unwrap_or(0);
        let d = &mut self.driver[site as usize];
        while *d < want {
            *d += 1;
            self.slot_pos.insert((site, *d), self.slots.len());
            self.slots.push((site, *d));
        }
        while *d > want {
            let pos = self.slot_pos.remove(&(site, *d)).expect("slot present");
            self.slots.swap_remove(pos);
            if pos < self.slots.len() {
                self.slot_pos.insert(self.slots[pos], pos);
            }
            *d -= 1;
        }
    }

    fn run(mut self, fam: &MonotoneFamily, index: u64) -> Result<Vec<ReplicaOutcome>> {
        let mut rng = rng::replica(fam.seed, index);
        let nv = self.nv;
        let k_max = fam.graph.weight_bound();
        let ring = 1.0 + self.lambda_max * k_max;
        let mut trackers: Vec<Tracker> = (0..nv)
            .map(|_| Tracker::new(&fam.checkpoints, fam.horizon))
            .collect();
        let mut time = 0.0;
        let mut events = 0u64;
        loop {
            for q in 0..nv {
                if self.pops[q] == 0 && self.extinction[q].is_none() && !self.ceiling_hit[q] {
                    self.extinction[q] = Some(time);
                }
            }
            if self.slots.is_empty() {
                break;
            }
            let dt = rng::exponential(&mut rng, self.slots.len() as f64 * ring);
            let next = time + dt;
            let until = next.min(fam.horizon);
            for (q, tr) in trackers.iter_mut().enumerate() {
                if self.active[q] {
                    tr.hold(time, until, self.pops[q], self.c(self.marked, q) as u64);
                }
            }
            if next > fam.horizon {
                break;
            }
            time = next;
            events += 1;
            let (x, level) = self.slots[rng.gen_range(0..self.slots.len())];
            if rng.gen::<f64>() * ring < 1.0 {
                for q in 0..nv {
                    if self.active[q] && self.c(x, q) >= level {
                        self.counts[x as usize * nv + q] -= 1;
                        self.pops[q] -= 1;
                    }
                }
                self.refresh_driver(x);
                continue;
            }
            let k = self.cache.k(x)?;
            if rng.gen::<f64>() * k_max >= k {
                continue;
            }
            let y = self
                .cache
                .sample_target(x, rng.gen::<f64>())?
                .expect("positive k");
            self.grow();
            let mark = rng.gen::<f64>() * self.lambda_max;
            for q in 0..nv {
                if self.active[q] && self.c(x, q) >= level && mark < self.lambdas[q] && self.c(y, q) < self.caps[q] {
                    self.counts[y as usize * nv + q] += 1;
                    self.pops[q] += 1;
                    self.births[q] += 1;
                }
            }
            self.refresh_driver(y);
            let mut retired = false;
            for q in 0..nv {
                if self.active[q] && self.pops[q] > fam.population_ceiling {
                    self.active[q] = false;
                    self.ceiling_hit[q] = true;
                    self.retired_state[q] = (self.pops[q], self.c(self.marked, q) as u64);
                    retired = true;
                }
            }
            if retired {
                self.slots.clear();
                self.slot_pos.clear();
                self.driver.iter_mut().for_each(|d| *d = 0);
                for site in 0..self.driver.len() as u32 {
                    self.refresh_driver(site);
                }
            }
        }
        let mut out = Vec::with_capacity(nv);
        for (q, mut tr) in trackers.into_iter().enumerate() {
            let (pop, mk) = if self.ceiling_hit[q] {
                self.retired_state[q]
            } else {
                (self.pops[q], self.c(self.marked, q) as u64)
            };
            tr.finish(pop, mk);
            out.push(tr.outcome(index, self.extinction[q], self.births[q], events, pop, mk, self.ceiling_hit[q]));
        }
        Ok(out)
    }
}
