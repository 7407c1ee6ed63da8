use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::KernelMatrix;

/// Settings for shifted power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates `M + shift·I`; a positive shift breaks periodicity.
    pub shift: f64,
    /// Optional positive start vector (defaults to all ones).
    pub start: Option<Vec<f64>>,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iter: 100_000,
            shift: 1.0,
            start: None,
        }
    }
}

impl PowerOptions {
    pub fn with_tol(tol: f64) -> Self {
        PowerOptions {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param("tol", "must be positive and finite"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::param("shift", "must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Perron–Frobenius eigenvalue estimate of a finite nonnegative matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub rho: f64,
    /// `1/ρ`, infinite when `ρ = 0`.
    pub n_r: f64,
    pub iterations: usize,
    /// `‖Mv − ρv‖∞ / ‖v‖∞`.
    pub residual: f64,
    pub converged: bool,
}

impl SpectralEstimate {
    fn new(rho: f64, iterations: usize, residual: f64, converged: bool) -> Self {
        let rho = rho.max(0.0);
        SpectralEstimate {
            rho,
            n_r: if rho == 0.0 { f64::INFINITY } else { 1.0 / rho },
            iterations,
            residual,
            converged,
        }
    }

    /// Turns a non-converged estimate into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Spectral radius of `matrix` by shifted power iteration.
///
/// A matrix that is not strongly connected is split into its strong
/// components and the largest component radius is returned. A non-converged
/// run is returned with `converged = false`.
pub fn pf_eigenvalue(matrix: &KernelMatrix, opts: &PowerOptions) -> Result<SpectralEstimate> {
    pf_eigenpair(matrix, opts).map(|(e, _)| e)
}

/// As [`pf_eigenvalue`], also returning the eigenvector (∞-normalised,
/// zero outside the dominant component).
pub fn pf_eigenpair(matrix: &KernelMatrix, opts: &PowerOptions) -> Result<(SpectralEstimate, Vec<f64>)> {
    opts.validate()?;
    let n = matrix.len();
    if n == 0 {
        return Err(Error::param("matrix", "empty matrix"));
    }
    if let Some(s) = &opts.start {
        if s.len() != n {
            return Err(Error::param("start", format!("length {} != {}", s.len(), n)));
        }
        if s.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || s.iter().all(|x| *x == 0.0) {
            return Err(Error::param("start", "must be nonnegative, finite and nonzero"));
        }
    }
    if matrix.nnz() == 0 {
        return Ok((SpectralEstimate::new(0.0, 0, 0.0, true), vec![0.0; n]));
    }
    if matrix.is_connected() {
        let start = opts.start.clone().unwrap_or_else(|| vec![1.0; n]);
        return Ok(iterate(matrix, start, opts));
    }

    let mut best: Option<(SpectralEstimate, Vec<usize>, Vec<f64>)> = None;
    let mut iterations = 0;
    for comp in matrix.strong_components() {
        let sub = matrix.submatrix(&comp);
        let (est, vec) = if comp.len() == 1 {
            let w = sub.entry(0, 0);
            (SpectralEstimate::new(w, 0, 0.0, true), vec![1.0])
        } else {
            let start = match &opts.start {
                Some(s) => {
                    let v: Vec<f64> = comp.iter().map(|&i| s[i]).collect();
                    if v.iter().all(|x| *x == 0.0) {
                        vec![1.0; comp.len()]
                    } else {
                        v
                    }
                }
                None => vec![1.0; comp.len()],
            };
            iterate(&sub, start, opts)
        };
        iterations += est.iterations;
        if best.as_ref().is_none_or(|b| est.rho > b.0.rho) {
            best = Some((est, comp, vec));
        }
    }
    let (mut est, comp, v) = best.expect("at least one component");
    est.iterations = iterations;
    let mut full = vec![0.0; n];
    for (k, &i) in comp.iter().enumerate() {
        full[i] = v[k];
    }
    Ok((est, full))
}

fn iterate(m: &KernelMatrix, mut v: Vec<f64>, opts: &PowerOptions) -> (SpectralEstimate, Vec<f64>) {
    let n = m.len();
    let norm = inf_norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    let mut mv = vec![0.0; n];
    let symmetric = m.is_symmetric();
    let mut last = SpectralEstimate::new(0.0, 0, f64::INFINITY, false);
    for it in 1..=opts.max_iter {
        m.mul_vec(&v, &mut mv);
        let rho = if symmetric {
            dot(&v, &mv) / dot(&v, &v)
        } else {
            inf_norm(&mv)
        };
        let residual = v
            .iter()
            .zip(&mv)
            .fold(0.0f64, |r, (x, y)| r.max((y - rho * x).abs()));
        last = SpectralEstimate::new(rho, it, residual, residual <= opts.tol);
        if last.converged {
            break;
        }
        for (x, y) in v.iter_mut().zip(&mv) {
            *x = y + opts.shift * *x;
        }
        let norm = inf_norm(&v);
        if norm == 0.0 {
            // Nilpotent without shift.
            return (SpectralEstimate::new(0.0, it, 0.0, true), vec![0.0; n]);
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    (last, v)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
