use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x·ln x` with the continuous extension `0·ln 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `c·ln r`, with `0·ln 0 = 0` and `c·ln 0 = −∞` for `c > 0`.
fn clogr(c: f64, r: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * r.ln()
    }
}

fn check_walk(p: f64, q: f64, lambda: f64) -> Result<()> {
    if !(p > 0.0 && q > 0.0 && p + q <= 1.0 + 1e-15) {
        return Err(Error::param("p,q", format!("need p, q > 0 and p + q <= 1 (got {p}, {q})")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    Ok(())
}

/// `(α, β)` with `β ≥ 0`, `β ≥ α` and `β ≤ (1 + α)/2`: `β` right steps,
/// `β − α` left steps and `1 − 2β + α` holds per step are all non-negative.
pub fn admissible(alpha: f64, beta: f64) -> bool {
    let tol = 1e-12;
    beta >= -tol && beta - alpha >= -tol && 1.0 - 2.0 * beta + alpha >= -tol
}

/// `ln g_λ(α, β)`.
pub fn log_g_lambda(alpha: f64, beta: f64, p: f64, q: f64, lambda: f64) -> Result<f64> {
    check_walk(p, q, lambda)?;
    if !admissible(alpha, beta) {
        return Err(Error::param(
            "alpha,beta",
            format!("({alpha}, {beta}) violates max(0, alpha) <= beta <= (1 + alpha)/2"),
        ));
    }
    let right = beta.max(0.0);
    let left = (beta - alpha).max(0.0);
    let hold = (1.0 - 2.0 * beta + alpha).max(0.0);
    let stay = (1.0 - p - q).max(0.0);
    Ok(lambda.ln() + clogr(right, p) + clogr(left, q) + clogr(hold, stay) - xlogx(right) - xlogx(left) - xlogx(hold))
}

/// Exponential growth rate of the expected number of particles at `α n`
/// reached through paths with `β n` right steps, per generation.
pub fn g_lambda(alpha: f64, beta: f64, p: f64, q: f64, lambda: f64) -> Result<f64> {
    Ok(log_g_lambda(alpha, beta, p, q, lambda)?.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftGrid {
    /// Grid spacing in both `α` and `β`.
    pub step: f64,
    /// Required excess `g_λ > 1 + margin` on the certified rectangle.
    pub margin: f64,
    /// Largest `n` tried for the integer points.
    pub n_max: u32,
}

impl Default for DriftGrid {
    fn default() -> Self {
        DriftGrid {
            step: 0.01,
            margin: 1e-3,
            n_max: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftCell {
    pub alpha: f64,
    pub beta: f64,
    pub g: f64,
}

/// Rectangle `[α₁, α₂] × [β₁, β₂]` on which `g_λ > 1`, and integers
/// `d₁ < d₂` in `[α₁n, α₂n]`, `d₃` in `[β₁n, β₂n]` with `g_λ(d_l/n, d₃/n) > 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftAnalysis {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    /// Every admissible grid point with its value.
    pub cells: Vec<DriftCell>,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub n: u32,
    pub d1: i64,
    pub d2: i64,
    pub d3: i64,
    /// `|g_λ(p − q, p) − λ|`.
    pub anchor_error: f64,
}

impl DriftAnalysis {
    pub fn anchor_ok(&self) -> bool {
        self.anchor_error <= 1e-12
    }
}

fn rectangle_ok(a: (f64, f64), b: (f64, f64), p: f64, q: f64, lambda: f64, grid: &DriftGrid) -> bool {
    // the corner (α₁, β₂) is the binding admissibility constraint
    if !(admissible(a.0, b.1) && admissible(a.1, b.0) && a.1 <= b.0) {
        return false;
    }
    let na = ((a.1 - a.0) / grid.step).round().max(1.0) as usize;
    let nb = ((b.1 - b.0) / grid.step).round().max(1.0) as usize;
    for i in 0..=na {
        for j in 0..=nb {
            let x = a.0 + (a.1 - a.0) * i as f64 / na as f64;
            let y = b.0 + (b.1 - b.0) * j as f64 / nb as f64;
            match g_lambda(x, y, p, q, lambda) {
                Ok(g) if g > 1.0 + grid.margin => {}
                _ => return false,
            }
        }
    }
    true
}

/// Scans the grid, certifies the largest square around `(p − q, p)` on which
/// `g_λ > 1 + margin`, then finds the smallest `n` admitting `d₁, d₂, d₃`.
pub fn find_drift_region(p: f64, q: f64, lambda: f64, grid: &DriftGrid) -> Result<DriftAnalysis> {
    check_walk(p, q, lambda)?;
    if !(grid.step > 0.0 && grid.step <= 0.25) || grid.margin < 0.0 || grid.n_max == 0 {
        return Err(Error::param("grid", "need 0 < step <= 0.25, margin >= 0, n_max >= 1"));
    }
    let steps = (1.0 / grid.step).round() as i64;
    let mut cells = Vec::new();
    for ia in -steps..=steps {
        for ib in 0..=steps {
            let (alpha, beta) = (ia as f64 / steps as f64, ib as f64 / steps as f64);
            if admissible(alpha, beta) {
                cells.push(DriftCell {
                    alpha,
                    beta,
                    g: g_lambda(alpha, beta, p, q, lambda)?,
                });
            }
        }
    }
    let (a0, b0) = (p - q, p);
    let anchor_error = (g_lambda(a0, b0, p, q, lambda)? - lambda).abs();

    let mut rect = None;
    let mut r = grid.step;
    while r <= 1.0 {
        let a = (a0 - r, a0 + r);
        let b = (b0 - r, b0 + r);
        if rectangle_ok(a, b, p, q, lambda, grid) {
            rect = Some((a, b));
            r += grid.step;
        } else {
            break;
        }
    }
    let Some((alpha, beta)) = rect else {
        return Err(Error::TuningFailed(format!(
            "no rectangle with g > 1 + {} around ({a0}, {b0}) at lambda = {lambda}",
            grid.margin
        )));
    };

    for n in 1..=grid.n_max {
        let nf = n as f64;
        let d1 = (alpha.0 * nf).ceil() as i64;
        let d2 = d1 + 1;
        if (d2 as f64) > alpha.1 * nf {
            continue;
        }
        let d3 = ((b0 * nf).round() as i64).clamp((beta.0 * nf).ceil() as i64, (beta.1 * nf).floor() as i64);
        if (d3 as f64) < beta.0 * nf || d3 == d1 || d3 == d2 {
            continue;
        }
        let ok = [d1, d2].iter().all(|&d| {
            g_lambda(d as f64 / nf, d3 as f64 / nf, p, q, lambda).is_ok_and(|g| g > 1.0)
        });
        if ok {
            return Ok(DriftAnalysis {
                p,
                q,
                lambda,
                cells,
                alpha,
                beta,
                n,
                d1,
                d2,
                d3,
                anchor_error,
            });
        }
    }
    Err(Error::TuningFailed(format!("no admissible integers d1, d2, d3 for n <= {}", grid.n_max)))
}

/// `alpha,beta,g_value` rows.
pub fn drift_csv(analysis: &DriftAnalysis) -> String {
    let mut s = String::from("alpha,beta,g_value\n");
    for c in &analysis.cells {
        writeln!(s, "{},{},{}", c.alpha, c.beta, c.g).expect("string write");
    }
    s
}

/// Summary record with the selected integers and the anchor check.
pub fn drift_summary(analysis: &DriftAnalysis) -> serde_json::Value {
    serde_json::json!({
        "p": analysis.p,
        "q": analysis.q,
        "lambda": analysis.lambda,
        "alpha": [analysis.alpha.0, analysis.alpha.1],
        "beta": [analysis.beta.0, analysis.beta.1],
        "n": analysis.n,
        "d1": analysis.d1,
        "d2": analysis.d2,
        "d3": analysis.d3,
        "anchor_error": analysis.anchor_error,
        "anchor_ok": analysis.anchor_ok(),
    })
}
