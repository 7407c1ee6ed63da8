use std::sync::Arc;

use serde_json::{json, Value};

use super::config::{CommandName, CouplingMode, ExperimentConfig, IndexKind};
use crate::coupling::{
    block_field_clusters, block_success_csv, cluster_csv, drift_csv, drift_summary, estimate_block_success,
    find_drift_region, iid_oriented_percolation, percolation_phase, sample_block_driven_field, tune_block,
    BlockProcess, BlockScheme, Blocks, Caps, DriftGrid, FieldOptions, FieldWindow, IndexGraph,
};
use crate::error::{Error, Result};
use crate::graph::{FamilyDescriptor, WeightedGraph};
use crate::random_env::{convergence_csv, convergence_experiment, dyadic_sequence};
use crate::rng;
use crate::sim::{
    estimate_family, estimate_survival, format_cap, scan_caps, scan_critical, survival_csv, MonotoneFamily,
    SimulationPlan, SurvivalRow, Variant,
};
use crate::spectral::{ladder_csv, truncation_ladder, LadderOptions, PowerOptions};
use crate::stats::SurvivalEstimate;

/// Main output of a command and the summary recorded in the manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub table: String,
    pub summary: Value,
}

/// Runs a validated configuration.
pub fn execute(config: &ExperimentConfig) -> Result<CommandOutput> {
    match config.command {
        CommandName::Spectral => spectral(config),
        CommandName::Simulate => simulate(config),
        CommandName::Scan => scan(config),
        CommandName::Coupling => coupling(config),
        CommandName::Drift => drift(config),
        CommandName::Percolation => percolation(config),
    }
}

fn section<T>(s: &Option<T>) -> Result<&T> {
    s.as_ref().ok_or_else(|| Error::Config("missing command section".into()))
}

fn spectral(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.spectral)?;
    let g = c.build_graph()?;
    let center = s.center.clone().unwrap_or_else(|| g.origin());
    let opts = LadderOptions {
        method: s.method,
        power: PowerOptions {
            tol: s.tol,
            max_iter: s.max_iter,
            ..PowerOptions::default()
        },
    };
    let ladder = truncation_ladder(&g, &center, &s.radii, &opts)?;
    if let Some(e) = ladder.entries.iter().find(|e| !e.estimate.converged) {
        return Err(Error::NotConverged {
            iterations: e.estimate.iterations,
            residual: e.estimate.residual,
        });
    }
    Ok(CommandOutput {
        table: ladder_csv(&ladder),
        summary: json!({
            "graph": g.name(),
            "center": center.to_string(),
            "limit": ladder.limit,
            "extrapolated": ladder.extrapolated,
            "stabilized_at": ladder.stabilized_at,
            "skipped": ladder.skipped,
            "max_increase": ladder.max_increase(),
        }),
    })
}

fn simulate(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.simulate)?;
    let g = c.build_graph()?;
    let start = s.start.clone().unwrap_or_else(|| g.origin());
    let mut template = SimulationPlan::new(g, s.lambda.0[0], s.horizon, start.clone())
        .generation_cap(s.generation_cap)
        .birth_cap(s.birth_cap)
        .seed(c.seed)
        .replicas(s.replicas)
        .ceiling(s.ceiling)
        .marked(s.marked.clone().unwrap_or(start));
    template.validate()?;
    let caps: Vec<Option<u32>> = s.caps.iter().map(|c| c.0).collect();
    let mut rows = Vec::new();
    let mut violations = 0;
    if s.coupled {
        let variants: Vec<Variant> = caps
            .iter()
            .flat_map(|&m| s.lambda.0.iter().map(move |&l| Variant::new(l, m)))
            .collect();
        let fam = MonotoneFamily::from_plan(&template, variants)?;
        let est = estimate_family(&fam, s.replicas, s.mode)?;
        violations = est.order_violations;
        for (v, e) in est.variants.iter().zip(est.estimates) {
            rows.push(row(v.lambda, v.cap, s.mode, e, s.horizon));
        }
    } else {
        for &m in &caps {
            for &l in &s.lambda.0 {
                template = template.lambda(l).cap(m);
                rows.push(row(l, m, s.mode, estimate_survival(&template, s.mode)?, s.horizon));
            }
        }
    }
    Ok(CommandOutput {
        table: survival_csv(&rows),
        summary: json!({
            "rows": rows.len(),
            "coupled": s.coupled,
            "order_violations": violations,
            "max_p_hat": rows.iter().map(|r| r.estimate.p_hat).fold(0.0, f64::max),
        }),
    })
}

fn row(lambda: f64, cap: Option<u32>, mode: crate::sim::Mode, estimate: SurvivalEstimate, horizon: f64) -> SurvivalRow {
    SurvivalRow {
        lambda,
        cap,
        mode,
        estimate,
        horizon,
    }
}

fn scan(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.scan)?;
    let g = c.build_graph()?;
    let start = s.start.clone().unwrap_or_else(|| g.origin());
    let template = SimulationPlan::new(g, s.lo, s.horizon, start)
        .seed(c.seed)
        .replicas(s.replicas)
        .ceiling(s.ceiling);
    template.validate()?;
    if let [cap] = s.caps.as_slice() {
        let res = scan_critical(&template.cap(cap.0), s.mode, s.lo, s.hi, s.steps as usize, s.threshold)?;
        let rows: Vec<SurvivalRow> = res
            .probes
            .iter()
            .map(|p| row(p.lambda, cap.0, s.mode, p.estimate, s.horizon))
            .collect();
        return Ok(CommandOutput {
            table: survival_csv(&rows),
            summary: json!({
                "m": format_cap(cap.0),
                "separated": res.separated,
                "bracket": [res.lo, res.hi],
                "midpoint": res.midpoint(),
                "threshold": res.threshold,
            }),
        });
    }
    let n = s.steps.max(1) as usize;
    let lambdas: Vec<f64> = (0..=n).map(|i| s.lo + (s.hi - s.lo) * i as f64 / n as f64).collect();
    let caps: Vec<Option<u32>> = s.caps.iter().map(|c| c.0).collect();
    let res = scan_caps(&template, s.mode, &caps, &lambdas, s.threshold)?;
    let mut rows = Vec::new();
    for (m, ests) in res.caps.iter().zip(&res.estimates) {
        for (l, e) in res.lambdas.iter().zip(ests) {
            rows.push(row(*l, *m, s.mode, *e, s.horizon));
        }
    }
    let per_cap: Vec<Value> = res
        .caps
        .iter()
        .zip(res.brackets.iter().zip(res.midpoints()))
        .map(|(m, (b, mid))| json!({"m": format_cap(*m), "bracket": b.map(|(a, b)| [a, b]), "midpoint": mid}))
        .collect();
    Ok(CommandOutput {
        table: survival_csv(&rows),
        summary: json!({
            "threshold": s.threshold,
            "caps": per_cap,
            "order_violations": res.order_violations,
        }),
    })
}

fn block_template(c: &ExperimentConfig, graph: Arc<WeightedGraph>) -> Result<BlockScheme> {
    let s = section(&c.coupling)?;
    if matches!(c.graph, Some(FamilyDescriptor::Loop)) {
        return Ok(BlockScheme::single_loop(1.0, 1));
    }
    let index = match s.index {
        IndexKind::ZLine => IndexGraph::z_line(),
        IndexKind::NLine => IndexGraph::n_line(),
        IndexKind::Drift { d1, d2 } => IndexGraph::drift(d1, d2)?,
    };
    let scheme = BlockScheme::new(graph, index, Blocks::Intervals { width: s.block_width }, 1.0, 1);
    scheme.validate()?;
    Ok(scheme)
}

fn coupling(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.coupling)?;
    if s.mode == CouplingMode::Iid {
        let index = match s.index {
            IndexKind::ZLine => IndexGraph::z_line(),
            IndexKind::NLine => IndexGraph::n_line(),
            IndexKind::Drift { d1, d2 } => IndexGraph::drift(d1, d2)?,
        };
        let window = FieldWindow::cone(s.depth);
        if s.dump {
            let field = iid_oriented_percolation(&index, s.p.0[0], window, c.seed)?;
            return Ok(CommandOutput {
                table: field.dump(),
                summary: json!({"p": s.p.0[0], "open_edges": field.open_edges().len()}),
            });
        }
        let phase = percolation_phase(&index, &s.p.0, window, s.samples, c.seed)?;
        let mut table = String::from("p,samples,crossed,p_hat,ci_lo,ci_hi,mean_depth,mean_column_hits\n");
        for pt in &phase {
            let e = &pt.survival;
            table += &format!(
                "{},{},{},{},{},{},{},{}\n",
                pt.p, e.replicas, e.successes, e.p_hat, e.ci_lo, e.ci_hi, pt.mean_depth, pt.mean_column_hits
            );
        }
        return Ok(CommandOutput {
            table,
            summary: json!({"depth": s.depth, "points": phase.len()}),
        });
    }

    let g = c.build_graph()?;
    let template = block_template(c, g)?;
    let tuned = tune_block(&template, 0, s.lambda, s.epsilon, &s.tune)?;
    let scheme = tuned.apply(&template).with_caps(Caps {
        m: s.m,
        n0: Some(tuned.n0),
        n_bar: Some(tuned.n_bar),
    });
    let tuned_json = serde_json::to_value(&tuned).map_err(|e| Error::Config(e.to_string()))?;
    match s.mode {
        CouplingMode::Block => {
            let mut processes = vec![BlockProcess::Full, BlockProcess::Truncated, BlockProcess::Hat];
            if s.m.is_some() {
                processes.extend([BlockProcess::Capped, BlockProcess::TruncatedCapped]);
            }
            let rows = estimate_block_success(&scheme, 0, s.lambda, &processes, s.replicas, c.seed)?;
            let joints: Vec<Value> = rows
                .iter()
                .map(|r| json!({"process": r.process.name(), "joint": r.joint.p_hat, "impossible": r.impossible}))
                .collect();
            Ok(CommandOutput {
                table: block_success_csv(&rows),
                summary: json!({"tuned": tuned_json, "processes": joints}),
            })
        }
        CouplingMode::Field => {
            let window = FieldWindow::cone(s.depth);
            if s.dump {
                let field = sample_block_driven_field(&scheme, s.lambda, window, c.seed, FieldOptions::default())?;
                return Ok(CommandOutput {
                    table: field.dump(),
                    summary: json!({"tuned": tuned_json, "open_edges": field.open_edges().len()}),
                });
            }
            let reports = block_field_clusters(&scheme, s.lambda, window, s.samples, c.seed)?;
            let crossed = reports.iter().filter(|r| r.crossed).count() as u64;
            Ok(CommandOutput {
                table: cluster_csv(&reports),
                summary: json!({
                    "tuned": tuned_json,
                    "depth": s.depth,
                    "crossing": SurvivalEstimate::from_counts(crossed, s.samples),
                }),
            })
        }
        CouplingMode::Iid => unreachable!("handled above"),
    }
}

fn drift(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.drift)?;
    let grid = DriftGrid {
        step: s.step,
        margin: s.margin,
        n_max: s.n_max,
    };
    let a = find_drift_region(s.p, s.q, s.lambda, &grid)?;
    Ok(CommandOutput {
        table: drift_csv(&a),
        summary: drift_summary(&a),
    })
}

fn percolation(c: &ExperimentConfig) -> Result<CommandOutput> {
    let s = section(&c.percolation)?;
    let g = c.build_graph()?;
    let box_side = match &c.graph {
        Some(FamilyDescriptor::ZdBox { side, .. }) => *side,
        _ => g.finite_vertices().map_or(0, |v| v.len()),
    };
    let ps = s.p_values.clone().unwrap_or_else(|| dyadic_sequence(s.dyadic_count));
    let seeds: Vec<u64> = (0..s.seeds).map(|i| rng::mix(c.seed, &[i])).collect();
    let report = convergence_experiment(g, box_side, &ps, &seeds)?;
    let last = ps.len() as u32;
    let final_gaps: Vec<f64> = report.rows.iter().filter(|r| r.n == last).map(|r| r.gap()).collect();
    Ok(CommandOutput {
        table: convergence_csv(&report),
        summary: json!({
            "tail_sum": report.tail_sum,
            "rows": report.rows.len(),
            "median_final_gap": crate::stats::median(&final_gaps),
        }),
    })
}
