use std::fmt::Write as _;

use serde::Serialize;

use super::coupled::{coupled_run, CoupledOutcome};
use super::engine::{run_replica, ReplicaOutcome};
use super::family::{MonotoneFamily, Variant};
use super::parallel_map;
use super::plan::{Mode, SimulationPlan};
use crate::error::{Error, Result};
use crate::stats::SurvivalEstimate;

/// All replicas of `plan`, in replica order.
pub fn run_replicas(plan: &SimulationPlan) -> Result<Vec<ReplicaOutcome>> {
    plan.validate()?;
    parallel_map(plan.replicas, |i| run_replica(plan, i))
}

/// All coupled replicas of `plan`, in replica order.
pub fn coupled_replicas(plan: &SimulationPlan) -> Result<Vec<CoupledOutcome>> {
    plan.validate()?;
    parallel_map(plan.replicas, |i| coupled_run(plan, i))
}

/// Monte-Carlo frequency of the mode's survival flag with a Wilson interval.
pub fn estimate_survival(plan: &SimulationPlan, mode: Mode) -> Result<SurvivalEstimate> {
    if plan.replicas < 100 {
        return Err(Error::param("replicas", "at least 100 replicas are required"));
    }
    let outs = run_replicas(plan)?;
    let successes = outs.iter().filter(|o| o.alive(mode)).count() as u64;
    Ok(SurvivalEstimate::from_counts(successes, plan.replicas))
}

/// Survival estimates for every variant of a monotone family.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyEstimate {
    pub variants: Vec<Variant>,
    pub estimates: Vec<SurvivalEstimate>,
    /// Replica/pair combinations where a dominated variant survived and the
    /// dominating one did not.
    pub order_violations: u64,
}

/// Runs `replicas` replicas of the family and estimates survival per variant.
pub fn estimate_family(family: &MonotoneFamily, replicas: u64, mode: Mode) -> Result<FamilyEstimate> {
    if replicas < 100 {
        return Err(Error::param("replicas", "at least 100 replicas are required"));
    }
    family.validate()?;
    let flags: Vec<Vec<bool>> = parallel_map(replicas, |i| {
        Ok(family
            .run_replica(i)?
            .iter()
            .map(|o| o.alive(mode))
            .collect())
    })?;
    let nv = family.variants.len();
    let mut successes = vec![0u64; nv];
    let mut violations = 0;
    for row in &flags {
        for q in 0..nv {
            successes[q] += row[q] as u64;
            for r in 0..nv {
                if family.variants[q].below(&family.variants[r]) && row[q] && !row[r] {
                    violations += 1;
                }
            }
        }
    }
    Ok(FamilyEstimate {
        variants: family.variants.clone(),
        estimates: successes
            .into_iter()
            .map(|s| SurvivalEstimate::from_counts(s, replicas))
            .collect(),
        order_violations: violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub lambda: f64,
    pub estimate: SurvivalEstimate,
}

/// Bisection bracket for the finite-horizon survival threshold.
///
/// The threshold `λ` where the survival frequency at horizon `T` crosses
/// `threshold` is a proxy for the critical parameter and is biased upward.
#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub mode: Mode,
    pub threshold: f64,
    /// Whether the initial endpoints were separated; no bisection otherwise.
    pub separated: bool,
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<Probe>,
}

impl ScanResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection on `λ` between `lo` and `hi` using [`estimate_survival`] with
/// `template`'s other parameters.
///
/// The endpoints must be separated: `p̂(lo) < 0.05`, `p̂(hi) > 0.2` and
/// disjoint confidence intervals.
pub fn scan_critical(
    template: &SimulationPlan,
    mode: Mode,
    lo: f64,
    hi: f64,
    steps: usize,
    threshold: f64,
) -> Result<ScanResult> {
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::param("bracket", "need 0 ≤ lo < hi < ∞"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param("threshold", "must lie in (0, 1)"));
    }
    let probe = |lambda: f64| -> Result<Probe> {
        let plan = template.clone().lambda(lambda);
        Ok(Probe {
            lambda,
            estimate: estimate_survival(&plan, mode)?,
        })
    };
    let (a, b) = (probe(lo)?, probe(hi)?);
    let separated = a.estimate.p_hat < 0.05 && b.estimate.p_hat > 0.2 && a.estimate.ci_hi < b.estimate.ci_lo;
    let mut res = ScanResult {
        mode,
        threshold,
        separated,
        lo,
        hi,
        probes: vec![a, b],
    };
    if !separated {
        return Ok(res);
    }
    for _ in 0..steps {
        let mid = res.midpoint();
        let p = probe(mid)?;
        if p.estimate.p_hat > threshold {
            res.hi = mid;
        } else {
            res.lo = mid;
        }
        res.probes.push(p);
    }
    Ok(res)
}

/// Threshold crossing per site cap on a common `λ` grid.
#[derive(Clone, Debug, Serialize)]
pub struct CapScan {
    pub caps: Vec<Option<u32>>,
    pub lambdas: Vec<f64>,
    /// `estimates[c][l]` for cap `c` and grid point `l`.
    pub estimates: Vec<Vec<SurvivalEstimate>>,
    /// Per cap, grid bracket `(last λ at or below threshold, first λ above)`.
    pub brackets: Vec<Option<(f64, f64)>>,
    pub order_violations: u64,
}

impl CapScan {
    pub fn midpoints(&self) -> Vec<Option<f64>> {
        self.brackets
            .iter()
            .map(|b| b.map(|(lo, hi)| 0.5 * (lo + hi)))
            .collect()
    }
}

/// Runs all `(λ, m)` pairs of the grid as one monotone family, so the
/// survival frequencies are ordered in both parameters replica by replica,
/// and reports where each cap crosses `threshold`.
pub fn scan_caps(
    template: &SimulationPlan,
    mode: Mode,
    caps: &[Option<u32>],
    lambdas: &[f64],
    threshold: f64,
) -> Result<CapScan> {
    if caps.is_empty() || lambdas.is_empty() {
        return Err(Error::param("grid", "caps and lambdas must be nonempty"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("lambdas", "must be increasing"));
    }
    let variants: Vec<Variant> = caps
        .iter()
        .flat_map(|&m| lambdas.iter().map(move |&l| Variant::new(l, m)))
        .collect();
    let fam = MonotoneFamily::from_plan(template, variants)?;
    let est = estimate_family(&fam, template.replicas, mode)?;
    let nl = lambdas.len();
    let estimates: Vec<Vec<SurvivalEstimate>> = est.estimates.chunks(nl).map(|c| c.to_vec()).collect();
    let brackets = estimates
        .iter()
        .map(|row| {
            row.iter().position(|e| e.p_hat > threshold).map(|i| {
                let lo = if i == 0 { 0.0 } else { lambdas[i - 1] };
                (lo, lambdas[i])
            })
        })
        .collect();
    Ok(CapScan {
        caps: caps.to_vec(),
        lambdas: lambdas.to_vec(),
        estimates,
        brackets,
        order_violations: est.order_violations,
    })
}

/// One row of the survival CSV.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalRow {
    pub lambda: f64,
    pub cap: Option<u32>,
    pub mode: Mode,
    pub estimate: SurvivalEstimate,
    pub horizon: f64,
}

pub fn format_cap(cap: Option<u32>) -> String {
    cap.map_or_else(|| "inf".to_string(), |m| m.to_string())
}

/// CSV with columns `lambda,m,mode,replicas,successes,p_hat,ci_lo,ci_hi,horizon`.
pub fn survival_csv(rows: &[SurvivalRow]) -> String {
    let mut s = String::from("lambda,m,mode,replicas,successes,p_hat,ci_lo,ci_hi,horizon\n");
    for r in rows {
        let e = &r.estimate;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.lambda,
            format_cap(r.cap),
            r.mode,
            e.replicas,
            e.successes,
            e.p_hat,
            e.ci_lo,
            e.ci_hi,
            r.horizon
        );
    }
    s
}
