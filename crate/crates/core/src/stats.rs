//! Small statistics helpers shared by the Monte-Carlo estimators.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Monte-Carlo frequency with a Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub replicas: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl SurvivalEstimate {
    pub fn from_counts(successes: u64, replicas: u64) -> Self {
        let p_hat = if replicas == 0 {
            0.0
        } else {
            successes as f64 / replicas as f64
        };
        let (ci_lo, ci_hi) = wilson_interval(successes, replicas, Z95);
        SurvivalEstimate {
            replicas,
            successes,
            p_hat,
            ci_lo,
            ci_hi,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / 2.0
    }

    /// True when the two intervals do not overlap.
    pub fn separated_from(&self, other: &SurvivalEstimate) -> bool {
        self.ci_hi < other.ci_lo || other.ci_hi < self.ci_lo
    }
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = (centre - half).clamp(0.0, 1.0);
    let hi = (centre + half).clamp(0.0, 1.0);
    // Guard against rounding putting p outside the interval at the extremes.
    (lo.min(p), hi.max(p))
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// One-sided two-sample Kolmogorov–Smirnov statistic `sup_x (F_a(x) - F_b(x))`.
///
/// Large values mean sample `a` puts more mass on small values than `b`, i.e.
/// evidence against "`a` stochastically dominates `b`".
pub fn ks_one_sided(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max(i as f64 / na - j as f64 / nb);
    }
    best
}

/// Critical value of the one-sided two-sample KS statistic at level `alpha`
/// (asymptotic: `sqrt(-ln(alpha)/2 * (n+m)/(n m))`).
pub fn ks_one_sided_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ((-alpha.ln() / 2.0) * (n + m) / (n * m)).sqrt()
}

/// Empirical quantile (lower, nearest-rank).
pub fn quantile_u64(values: &[u64], q: f64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        for (s, n) in [(0, 100), (100, 100), (37, 100), (1, 3)] {
            let e = SurvivalEstimate::from_counts(s, n);
            assert!(e.ci_lo <= e.p_hat && e.p_hat <= e.ci_hi);
            assert!(e.ci_lo >= 0.0 && e.ci_hi <= 1.0);
        }
    }

    #[test]
    fn wilson_known_value() {
        // 50/100: centre 0.5, half-width z*sqrt(0.25/100 + z^2/40000)/(1+z^2/100)
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_831).abs() < 1e-5, "{lo}");
        assert!((hi - 0.596_169).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_one_sided(&a, &a), 0.0);
        assert!((ks_one_sided(&[0.0, 0.0], &[1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ks_one_sided(&[1.0, 1.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn quantile_nearest_rank() {
        assert_eq!(quantile_u64(&[5, 1, 3, 2, 4], 0.8), 4);
        assert_eq!(quantile_u64(&[5, 1, 3, 2, 4], 1.0), 5);
    }
}
