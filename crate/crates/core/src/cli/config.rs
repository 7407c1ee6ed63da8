use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coupling::TuneOptions;
use crate::error::{Error, Result};
use crate::graph::{FamilyDescriptor, Vertex, WeightedGraph};
use crate::sim::{Mode, DEFAULT_CEILING};
use crate::spectral::LadderMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Spectral,
    Simulate,
    Scan,
    Coupling,
    Drift,
    Percolation,
}

/// Site cap: a positive integer or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cap(pub Option<u32>);

impl Serialize for Cap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(m) => s.serialize_u32(m),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(m) => Ok(Cap(Some(m))),
            Raw::Text(t) if t == "inf" => Ok(Cap(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("cap must be an integer or \"inf\", got {t:?}"))),
        }
    }
}

/// A number or a list of numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::One(x) => Grid(vec![x]),
            Raw::Many(v) => Grid(v),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub center: Option<Vertex>,
    pub radii: Vec<usize>,
    pub method: LadderMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection {
            center: None,
            radii: (1..=10).collect(),
            method: LadderMethod::Auto,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub lambda: Grid,
    pub caps: Vec<Cap>,
    pub mode: Mode,
    pub horizon: f64,
    pub replicas: u64,
    pub start: Option<Vertex>,
    /// Site watched for local survival (defaults to `start`).
    pub marked: Option<Vertex>,
    pub generation_cap: Option<u32>,
    pub birth_cap: Option<u64>,
    pub ceiling: u64,
    /// Run the whole `(λ, m)` grid as one monotone family.
    pub coupled: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            lambda: Grid(vec![1.0]),
            caps: vec![Cap(None)],
            mode: Mode::Weak,
            horizon: 30.0,
            replicas: 1000,
            start: None,
            marked: None,
            generation_cap: None,
            birth_cap: None,
            ceiling: DEFAULT_CEILING,
            coupled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub mode: Mode,
    pub lo: f64,
    pub hi: f64,
    pub steps: u32,
    pub threshold: f64,
    pub horizon: f64,
    pub replicas: u64,
    pub caps: Vec<Cap>,
    pub start: Option<Vertex>,
    pub ceiling: u64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            mode: Mode::Weak,
            lo: 0.5,
            hi: 4.0,
            steps: 8,
            threshold: 0.05,
            horizon: 30.0,
            replicas: 1000,
            caps: vec![Cap(None)],
            start: None,
            ceiling: DEFAULT_CEILING,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// iid oriented percolation over a grid of `p`.
    Iid,
    /// Tune a block scheme and estimate its block events.
    Block,
    /// Tune a block scheme and sample block-driven fields.
    Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IndexKind {
    ZLine,
    NLine,
    Drift { d1: i64, d2: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub mode: CouplingMode,
    /// Retention probabilities for `iid`.
    pub p: Grid,
    pub depth: u32,
    pub samples: u64,
    pub index: IndexKind,
    pub block_width: u32,
    pub lambda: f64,
    pub epsilon: f64,
    /// Site cap for the capped block processes.
    pub m: Option<u32>,
    pub replicas: u64,
    /// Write the dump of the first field instead of the table.
    pub dump: bool,
    pub tune: TuneOptions,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            mode: CouplingMode::Iid,
            p: Grid(vec![0.8]),
            depth: 100,
            samples: 1000,
            index: IndexKind::ZLine,
            block_width: 1,
            lambda: 3.0,
            epsilon: 0.05,
            m: None,
            replicas: 1000,
            dump: false,
            tune: TuneOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSection {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub step: f64,
    pub margin: f64,
    pub n_max: u32,
}

impl Default for DriftSection {
    fn default() -> Self {
        let g = crate::coupling::DriftGrid::default();
        DriftSection {
            p: 0.7,
            q: 0.1,
            lambda: 1.2,
            step: g.step,
            margin: g.margin,
            n_max: g.n_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationSection {
    /// Explicit `p_1, p_2, …`; when absent, `p_n = 1 − 2^{-n}`.
    pub p_values: Option<Vec<f64>>,
    pub dyadic_count: u32,
    /// Number of independent seeds.
    pub seeds: u64,
}

impl Default for PercolationSection {
    fn default() -> Self {
        PercolationSection {
            p_values: None,
            dyadic_count: 10,
            seeds: 100,
        }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<FamilyDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percolation: Option<PercolationSection>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {x}")))
    }
}

fn probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(bad(format!("{name} must lie in [0,1], got {x}")))
    }
}

fn caps_ok(caps: &[Cap]) -> Result<()> {
    if caps.is_empty() {
        return Err(bad("caps must not be empty"));
    }
    if caps.iter().any(|c| c.0 == Some(0)) {
        return Err(bad("caps must be at least 1"));
    }
    Ok(())
}

fn vertex_in(graph: &WeightedGraph, v: &Option<Vertex>, name: &str) -> Result<()> {
    match v {
        Some(x) if !graph.contains(x) => Err(bad(format!("{name} {x} is not a vertex of {}", graph.name()))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    /// Parses TOML, or the `config` object of a JSON run manifest.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
            let c = v.get("config").cloned().ok_or_else(|| bad("manifest has no `config` object"))?;
            serde_json::from_value(c).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| bad(e.to_string()))
        }
    }

    /// Parses, fills in the section of the chosen command and validates.
    pub fn load(text: &str) -> Result<Self> {
        let mut c = Self::parse(text)?;
        c.resolve();
        c.validate()?;
        Ok(c)
    }

    /// Inserts the default section for the command when it is missing.
    pub fn resolve(&mut self) {
        match self.command {
            CommandName::Spectral => drop(self.spectral.get_or_insert_with(Default::default)),
            CommandName::Simulate => drop(self.simulate.get_or_insert_with(Default::default)),
            CommandName::Scan => drop(self.scan.get_or_insert_with(Default::default)),
            CommandName::Coupling => drop(self.coupling.get_or_insert_with(Default::default)),
            CommandName::Drift => drop(self.drift.get_or_insert_with(Default::default)),
            CommandName::Percolation => drop(self.percolation.get_or_insert_with(Default::default)),
        }
    }

    pub fn build_graph(&self) -> Result<Arc<WeightedGraph>> {
        let d = self.graph.as_ref().ok_or_else(|| bad("a [graph] section is required"))?;
        Ok(Arc::new(d.build().map_err(|e| bad(e.to_string()))?))
    }

    /// Checks every value the command will use.
    pub fn validate(&self) -> Result<()> {
        let section = || bad(format!("missing [{:?}] section", self.command).to_lowercase());
        match self.command {
            CommandName::Spectral => {
                let s = self.spectral.as_ref().ok_or_else(section)?;
                let g = self.build_graph()?;
                if s.radii.is_empty() {
                    return Err(bad("radii must not be empty"));
                }
                positive("tol", s.tol)?;
                if s.max_iter == 0 {
                    return Err(bad("max_iter must be positive"));
                }
                vertex_in(&g, &s.center, "center")?;
            }
            CommandName::Simulate => {
                let s = self.simulate.as_ref().ok_or_else(section)?;
                let g = self.build_graph()?;
                if s.lambda.0.is_empty() || s.lambda.0.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(bad("lambda must be a non-empty list of non-negative numbers"));
                }
                caps_ok(&s.caps)?;
                positive("horizon", s.horizon)?;
                if s.replicas < 100 {
                    return Err(bad("replicas must be at least 100"));
                }
                if s.ceiling == 0 {
                    return Err(bad("ceiling must be positive"));
                }
                if s.coupled && (s.generation_cap.is_some() || s.birth_cap.is_some()) {
                    return Err(bad("coupled runs support site caps only"));
                }
                vertex_in(&g, &s.start, "start")?;
                vertex_in(&g, &s.marked, "marked")?;
            }
            CommandName::Scan => {
                let s = self.scan.as_ref().ok_or_else(section)?;
                let g = self.build_graph()?;
                if !(s.lo.is_finite() && s.hi.is_finite() && 0.0 <= s.lo && s.lo < s.hi) {
                    return Err(bad(format!("need 0 <= lo < hi, got [{}, {}]", s.lo, s.hi)));
                }
                if !(s.threshold > 0.0 && s.threshold < 1.0) {
                    return Err(bad("threshold must lie in (0,1)"));
                }
                caps_ok(&s.caps)?;
                positive("horizon", s.horizon)?;
                if s.replicas < 100 {
                    return Err(bad("replicas must be at least 100"));
                }
                if s.ceiling == 0 {
                    return Err(bad("ceiling must be positive"));
                }
                vertex_in(&g, &s.start, "start")?;
            }
            CommandName::Coupling => {
                let s = self.coupling.as_ref().ok_or_else(section)?;
                if s.samples == 0 || s.depth == 0 {
                    return Err(bad("samples and depth must be positive"));
                }
                match s.mode {
                    CouplingMode::Iid => {
                        if s.p.0.is_empty() {
                            return Err(bad("p must not be empty"));
                        }
                        for &p in &s.p.0 {
                            probability("p", p)?;
                        }
                    }
                    CouplingMode::Block | CouplingMode::Field => {
                        let g = self.build_graph()?;
                        let is_loop = matches!(self.graph, Some(FamilyDescriptor::Loop));
                        if !is_loop && g.lattice_dim() != Some(1) {
                            return Err(bad("block schemes need a one-dimensional lattice or the loop"));
                        }
                        positive("lambda", s.lambda)?;
                        if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
                            return Err(bad("epsilon must lie in (0,1)"));
                        }
                        if s.block_width == 0 || s.replicas == 0 {
                            return Err(bad("block_width and replicas must be positive"));
                        }
                        if s.m == Some(0) {
                            return Err(bad("m must be at least 1"));
                        }
                        if let IndexKind::Drift { d1, d2 } = s.index {
                            if d1 == d2 {
                                return Err(bad("drift offsets must differ"));
                            }
                        }
                        let t = &s.tune;
                        positive("tune.t_max", t.t_max)?;
                        positive("tune.target_mean", t.target_mean)?;
                        positive("tune.population_limit", t.population_limit)?;
                        if t.t_points == 0 || t.k_doublings == 0 || t.k_doublings > 31 || t.replicas == 0 || t.n0_steps == 0 {
                            return Err(bad("tune budget values must be positive (k_doublings <= 31)"));
                        }
                    }
                }
            }
            CommandName::Drift => {
                let s = self.drift.as_ref().ok_or_else(section)?;
                if !(s.p > 0.0 && s.q > 0.0 && s.p + s.q <= 1.0) {
                    return Err(bad(format!("need p, q > 0 and p + q <= 1, got ({}, {})", s.p, s.q)));
                }
                positive("lambda", s.lambda)?;
                if !(s.step > 0.0 && s.step <= 0.25) || !(s.margin >= 0.0) || s.n_max == 0 {
                    return Err(bad("need 0 < step <= 0.25, margin >= 0, n_max >= 1"));
                }
            }
            CommandName::Percolation => {
                let s = self.percolation.as_ref().ok_or_else(section)?;
                let g = self.build_graph()?;
                if g.finite_vertices().is_none() || g.is_oriented() {
                    return Err(bad("percolation needs a finite non-oriented graph"));
                }
                match &s.p_values {
                    Some(ps) if ps.is_empty() => return Err(bad("p_values must not be empty")),
                    Some(ps) => {
                        if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                            return Err(bad(format!("p_values must lie in (0,1], got {p}")));
                        }
                    }
                    None if s.dyadic_count == 0 || s.dyadic_count > 52 => {
                        return Err(bad("dyadic_count must lie in 1..=52"));
                    }
                    None => {}
                }
                if s.seeds == 0 {
                    return Err(bad("seeds must be positive"));
                }
            }
        }
        Ok(())
    }
}
