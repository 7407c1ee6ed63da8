use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::graph::{ball_truncation, radial_quotient, KernelMatrix, Vertex, WeightedGraph};

fn dense_spectral_radius(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn symmetric_top(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::MIN, f64::max)
}

#[test]
fn two_by_two_and_one_by_one() {
    let m = KernelMatrix::from_dense(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
    let e = pf_eigenvalue(&m, &PowerOptions::default()).unwrap();
    assert!(e.converged);
    assert!((e.rho - 0.5).abs() < 1e-12);
    assert!((e.n_r - 2.0).abs() < 1e-11);
    let one = KernelMatrix::from_dense(&[vec![1.0]]).unwrap();
    let e = pf_eigenvalue(&one, &PowerOptions::default()).unwrap();
    assert_eq!(e.rho, 1.0);
    assert_eq!(e.n_r, 1.0);
}

#[test]
fn three_vertex_path() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let m = ball_truncation(&g, &Vertex::z(0), 1).unwrap();
    let e = pf_eigenvalue(&m, &PowerOptions::default()).unwrap();
    let toeplitz = (PI / 4.0).cos();
    assert!((e.rho - toeplitz).abs() < 1e-12);
    assert!((symmetric_top(&m.dense()) - toeplitz).abs() < 1e-12);
    assert!(e.residual <= 1e-10);
}

#[test]
fn zero_and_reducible_matrices() {
    let z = KernelMatrix::from_dense(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
    let e = pf_eigenvalue(&z, &PowerOptions::default()).unwrap();
    assert_eq!(e.rho, 0.0);
    assert!(e.n_r.is_infinite());

    let nil = KernelMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    assert_eq!(pf_eigenvalue(&nil, &PowerOptions::default()).unwrap().rho, 0.0);

    let rows = vec![
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.5],
        vec![0.0, 0.0, 3.0],
    ];
    let m = KernelMatrix::from_dense(&rows).unwrap();
    assert!(!m.is_connected());
    let (e, v) = pf_eigenpair(&m, &PowerOptions::default()).unwrap();
    assert!((e.rho - 3.0).abs() < 1e-12);
    assert_eq!(v, vec![0.0, 0.0, 1.0]);
}

#[test]
fn strong_components_of_small_digraph() {
    let rows = vec![
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ];
    let m = KernelMatrix::from_dense(&rows).unwrap();
    let mut c = m.strong_components();
    c.sort();
    assert_eq!(c, vec![vec![0, 1], vec![2, 3]]);
}

#[test]
fn non_convergence_is_flagged() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let m = ball_truncation(&g, &Vertex::z(0), 20).unwrap();
    let opts = PowerOptions {
        max_iter: 3,
        ..PowerOptions::default()
    };
    let e = pf_eigenvalue(&m, &opts).unwrap();
    assert!(!e.converged);
    assert_eq!(e.iterations, 3);
    assert!(matches!(e.require_converged(), Err(crate::Error::NotConverged { .. })));
    assert!(pf_eigenvalue(&m, &PowerOptions::with_tol(0.0)).is_err());
}

#[test]
fn unshifted_iteration_stalls_on_bipartite_ball() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let m = ball_truncation(&g, &Vertex::z(0), 3).unwrap();
    let opts = PowerOptions {
        shift: 0.0,
        max_iter: 2000,
        start: Some(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ..PowerOptions::default()
    };
    assert!(!pf_eigenvalue(&m, &opts).unwrap().converged);
    assert!(pf_eigenvalue(&m, &PowerOptions::default()).unwrap().converged);
}

#[test]
fn z_ladder_matches_toeplitz() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let radii: Vec<usize> = (1..=30).collect();
    let ladder = truncation_ladder(&g, &Vertex::z(0), &radii, &LadderOptions::default()).unwrap();
    assert_eq!(ladder.entries.len(), 30);
    for e in &ladder.entries {
        let oracle = 1.0 / (PI / (2.0 * e.radius as f64 + 2.0)).cos();
        assert!((e.estimate.n_r - oracle).abs() < 1e-8, "radius {}", e.radius);
        assert_eq!(e.vertices, 2 * e.radius as u128 + 1);
    }
    for w in ladder.entries.windows(2) {
        assert!(w[0].estimate.n_r - w[1].estimate.n_r > 10.0 * 1e-10);
    }
    let last = ladder.limit.unwrap();
    assert!(last - 1.0 < 1.3e-3 && last > 1.0);
    let ex = ladder.extrapolated.unwrap();
    assert!((ex - 1.0).abs() < last - 1.0);
}

#[test]
fn radial_quotient_matches_full_ball() {
    for (r, max_radius) in [(3u32, 8usize), (4, 6)] {
        let g = WeightedGraph::tree_srw(r).unwrap();
        for radius in 1..=max_radius {
            let full = pf_eigenvalue(
                &ball_truncation(&g, &Vertex::root(), radius).unwrap(),
                &PowerOptions::default(),
            )
            .unwrap();
            let q = radial_quotient(&g, &Vertex::root(), radius).unwrap();
            let quot = pf_eigenvalue(&q.matrix, &PowerOptions::default()).unwrap();
            assert!((full.rho - quot.rho).abs() < 1e-9, "r={r} radius={radius}");
        }
    }
    // dense oracle on a small full ball
    let g = WeightedGraph::tree_srw(3).unwrap();
    let m = ball_truncation(&g, &Vertex::root(), 5).unwrap();
    let e = pf_eigenvalue(&m, &PowerOptions::default()).unwrap();
    assert!((symmetric_top(&m.dense()) - e.rho).abs() < 1e-9);
}

#[test]
fn tree_ladder_dense_oracle_and_limit() {
    for r in [3u32, 4] {
        let g = WeightedGraph::tree_srw(r).unwrap();
        let radii: Vec<usize> = (1..=25).collect();
        let ladder = truncation_ladder(&g, &Vertex::root(), &radii, &LadderOptions::default()).unwrap();
        let rf = r as f64;
        let classical = rf / (2.0 * (rf - 1.0).sqrt());

        // symmetrised quotient at radius 12, dense eigensolve
        let q = radial_quotient(&g, &Vertex::root(), 12).unwrap().matrix.dense();
        let n = q.len();
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (q[i][j] * q[j][i]).sqrt()).collect())
            .collect();
        let dense_r12 = 1.0 / symmetric_top(&sym);
        let at12 = &ladder.entries[11];
        assert_eq!(at12.radius, 12);
        assert!((at12.estimate.n_r - dense_r12).abs() < 1e-9);

        for w in ladder.entries.windows(2) {
            assert!(w[1].estimate.n_r < w[0].estimate.n_r);
        }
        for e in &ladder.entries {
            assert!(e.estimate.n_r >= classical);
        }
        let last = ladder.limit.unwrap();
        assert!((last - classical).abs() / classical < 0.02, "r={r}: {last}");
        assert_eq!(ladder.entries[1].vertices, 1 + r as u128 + (r * (r - 1)) as u128);
    }
}

#[test]
fn single_loop_ladder_is_constant() {
    let g = WeightedGraph::single_loop();
    let ladder =
        truncation_ladder(&g, &Vertex::Label(0), &[0, 1, 5, 10], &LadderOptions::default()).unwrap();
    assert!(ladder.entries.iter().all(|e| e.estimate.n_r == 1.0 && e.vertices == 1));
}

#[test]
fn ladder_rejects_bad_radii_and_skips_disconnected() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let o = Vertex::z(0);
    assert!(truncation_ladder(&g, &o, &[], &LadderOptions::default()).is_err());
    assert!(truncation_ladder(&g, &o, &[2, 2], &LadderOptions::default()).is_err());
    let ladder = truncation_ladder(&g, &o, &[0, 1], &LadderOptions::default()).unwrap();
    assert_eq!(ladder.skipped, vec![0]);
    assert_eq!(ladder.entries.len(), 1);
}

#[test]
fn ball_and_radial_agree_on_symmetric_line() {
    let g = WeightedGraph::drift_walk(0.3, 0.3).unwrap();
    let radii: Vec<usize> = (1..=10).collect();
    let ball = LadderOptions {
        method: LadderMethod::Ball,
        ..Default::default()
    };
    let radial = LadderOptions {
        method: LadderMethod::Radial,
        ..Default::default()
    };
    let a = truncation_ladder(&g, &Vertex::z(0), &radii, &ball).unwrap();
    let b = truncation_ladder(&g, &Vertex::z(0), &radii, &radial).unwrap();
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert!((x.estimate.n_r - y.estimate.n_r).abs() < 1e-9);
        assert_eq!(x.vertices, y.vertices);
    }
}

#[test]
fn row_sum_diagnostic() {
    let g = WeightedGraph::tree_srw(3).unwrap();
    let d = row_sum_ladder(&g, &Vertex::root(), 6).unwrap();
    assert!(d.iter().all(|x| (x - 1.0).abs() < 1e-12));
    let l = WeightedGraph::explicit([(Vertex::Label(0), Vertex::Label(0), 0.5)]).unwrap();
    let d = row_sum_ladder(&l, &Vertex::Label(0), 4).unwrap();
    assert!(d.iter().all(|x| (x - 2.0).abs() < 1e-12));
}

#[test]
fn csv_headers() {
    let g = WeightedGraph::zd_srw(1).unwrap();
    let ladder = truncation_ladder(&g, &Vertex::z(0), &[1, 2], &LadderOptions::default()).unwrap();
    let csv = ladder_csv(&ladder);
    assert!(csv.starts_with("radius,vertices,rho,nR,residual,iterations\n1,3,"));
    assert_eq!(csv.lines().count(), 3);
    let pts = [OccupancyPoint { t: 1.0, value: 0.5, tail_bound: 0.0 }];
    assert_eq!(occupancy_csv(&pts), "t,value,tail_bound\n1,0.5,0\n");
}

proptest! {
    #[test]
    fn pf_within_row_sum_bounds_and_matches_dense(
        n in 2usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // a cycle keeps the matrix irreducible
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j == (i + 1) % n {
                            rng.gen_range(0.1..1.0)
                        } else if rng.gen_bool(0.4) {
                            rng.gen_range(0.0..1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let m = KernelMatrix::from_dense(&rows).unwrap();
        prop_assert!(m.is_connected());
        let e = pf_eigenvalue(&m, &PowerOptions::default()).unwrap();
        prop_assert!(e.converged);
        let sums = m.row_sums();
        let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().copied().fold(0.0, f64::max);
        prop_assert!(e.rho >= lo - 1e-9 && e.rho <= hi + 1e-9);
        prop_assert!((e.rho - dense_spectral_radius(&rows)).abs() < 1e-7);
    }
}

fn bessel_oracle(lambda: f64, t: f64) -> f64 {
    // e^{-t} I_0(λt) = e^{-t} Σ (λt/2)^{2n}/(n!)²
    let x = lambda * t / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..200 {
        term *= x * x / (n as f64 * n as f64);
        sum += term;
    }
    (-t).exp() * sum
}

#[test]
fn expected_count_examples() {
    let l = WeightedGraph::single_loop();
    let o = Vertex::Label(0);
    let s = expected_count(&l, &o, &o, 2.0, 1.0, None).unwrap();
    assert!((s.partial_sum - std::f64::consts::E).abs() < 1e-12);
    assert!(s.tail_bound < 1e-12);
    assert_eq!(s.order, 50);

    let z = WeightedGraph::zd_srw(1).unwrap();
    let s = expected_count(&z, &Vertex::z(0), &Vertex::z(0), 1.5, 2.0, None).unwrap();
    let oracle = bessel_oracle(1.5, 2.0);
    assert!((s.partial_sum - oracle).abs() < 1e-12);
    assert!((s.partial_sum - 0.6605).abs() < 5e-5);

    // independent truncated sum using μ^(2n)(0,0) = C(2n,n)/4ⁿ
    let mut direct = 0.0;
    let mut c = (-2.0f64).exp();
    let mut ret = 1.0;
    for n in 0..=50usize {
        if n > 0 {
            c *= 3.0 / n as f64;
        }
        if n % 2 == 0 {
            if n > 0 {
                let k = (n / 2) as f64;
                ret *= (2.0 * k) * (2.0 * k - 1.0) / (k * k) / 4.0;
            }
            direct += ret * c;
        }
    }
    assert!((s.partial_sum - direct).abs() < 1e-12);

    let s0 = expected_count(&z, &Vertex::z(0), &Vertex::z(0), 1.5, 0.0, None).unwrap();
    assert_eq!(s0.partial_sum, 1.0);
    let s1 = expected_count(&z, &Vertex::z(0), &Vertex::z(1), 1.5, 0.0, None).unwrap();
    assert_eq!(s1.partial_sum, 0.0);
    assert!(expected_count(&z, &Vertex::z(0), &Vertex::z(0), -1.0, 1.0, None).is_err());
    assert!(expected_count(&z, &Vertex::z(0), &Vertex::z(0), 1.0, -1.0, None).is_err());
}

#[test]
fn tail_bound_matches_direct_sum() {
    // λK t = 2, t = 1, order 5: e^{-1}(e² − Σ_{n≤5} 2ⁿ/n!)
    let mut head = 0.0;
    let mut term = 1.0;
    for n in 0..=5 {
        if n > 0 {
            term *= 2.0 / n as f64;
        }
        head += term;
    }
    let oracle = (-1.0f64).exp() * (2.0f64.exp() - head);
    let l = WeightedGraph::single_loop();
    let s = expected_count(&l, &Vertex::Label(0), &Vertex::Label(0), 2.0, 1.0, Some(5)).unwrap();
    assert!((s.tail_bound - oracle).abs() < 1e-12);
    assert!((s.partial_sum + s.tail_bound - std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn tree_powers_match_brute_propagation() {
    let g = WeightedGraph::tree_srw(3).unwrap();
    let x0 = Vertex::Tree(vec![2, 1]);
    let targets = [Vertex::root(), Vertex::Tree(vec![2]), Vertex::Tree(vec![2, 1, 2]), Vertex::Tree(vec![3, 2])];
    let mut dist: Vec<HashMap<Vertex, f64>> = vec![HashMap::from([(x0.clone(), 1.0)])];
    for n in 0..8 {
        let mut next = HashMap::new();
        for (v, m) in &dist[n] {
            for (u, w) in g.neighbors(v).unwrap() {
                *next.entry(u).or_insert(0.0) += m * w;
            }
        }
        dist.push(next);
    }
    for x in &targets {
        let p = kernel_powers(&g, &x0, x, 8).unwrap();
        for n in 0..=8 {
            let brute = dist[n].get(x).copied().unwrap_or(0.0);
            assert!((p[n] - brute).abs() < 1e-15, "{x} n={n}");
        }
    }
}

#[test]
fn ode_scalar_cases() {
    let m = KernelMatrix::from_dense(&[vec![1.0]]).unwrap();
    let e = occupancy_ode_solve(&m, 0, 1.0, 3.0, 1e-2).unwrap();
    assert!((e[0] - 1.0).abs() < 1e-14);
    let e = occupancy_ode_solve(&m, 0, 2.0, 1.0, 1e-3).unwrap();
    assert!((e[0] - std::f64::consts::E).abs() < 1e-8);
    assert!(occupancy_ode_solve(&m, 0, 2.0, 1.0, 0.0).is_err());
    assert!(occupancy_ode_solve(&m, 1, 2.0, 1.0, 0.1).is_err());
}

#[test]
fn ode_two_vertex_path_matches_matrix_exponential() {
    // exp(t[[−1,λ/2],[λ/2,−1]]) e₀ = e^{-t}(cosh(λt/2), sinh(λt/2))
    let lambda = 1.0;
    let t = 1.0;
    let g = WeightedGraph::explicit([
        (Vertex::Label(0), Vertex::Label(1), 0.5),
        (Vertex::Label(1), Vertex::Label(0), 0.5),
    ])
    .unwrap();
    let m = KernelMatrix::from_vertices(&g, vec![Vertex::Label(0), Vertex::Label(1)]).unwrap();
    let e = occupancy_ode_solve(&m, 0, lambda, t, 1e-3).unwrap();
    let a = (-t).exp() * (lambda * t / 2.0).cosh();
    let b = (-t).exp() * (lambda * t / 2.0).sinh();
    assert!((e[0] - a).abs() < 1e-10 && (e[1] - b).abs() < 1e-10);
    let s = expected_count(&g, &Vertex::Label(0), &Vertex::Label(0), lambda, t, None).unwrap();
    assert!((s.partial_sum - e[0]).abs() <= s.tail_bound + 1e-9);
}

#[test]
fn series_and_ode_agree_on_random_graphs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let n = rng.gen_range(2..=20u64);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.25) {
                    edges.push((Vertex::Label(i), Vertex::Label(j), rng.gen_range(0.05..0.6)));
                }
            }
            // keep every vertex present
            edges.push((Vertex::Label(i), Vertex::Label((i + 1) % n), 0.1));
        }
        edges.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let g = WeightedGraph::explicit(edges).unwrap();
        let verts = g.finite_vertices().unwrap();
        let m = KernelMatrix::from_vertices(&g, verts.clone()).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            for t in [0.5, 1.0, 2.0] {
                let ode = occupancy_ode_solve(&m, 0, lambda, t, 1e-3).unwrap();
                for (i, x) in verts.iter().enumerate() {
                    let s = expected_count(&g, &verts[0], x, lambda, t, None).unwrap();
                    assert!((s.partial_sum - ode[i]).abs() <= s.tail_bound + 1e-6);
                }
            }
        }
    }
}

#[test]
fn single_term_lower_bound_on_z() {
    let z = WeightedGraph::zd_srw(1).unwrap();
    let o = Vertex::z(0);
    for x in [Vertex::z(0), Vertex::z(1), Vertex::z(2)] {
        let p = kernel_powers(&z, &o, &x, 10).unwrap();
        for lambda in [0.5f64, 1.0, 2.0] {
            for n in 1..=10usize {
                let nf = n as f64;
                let ln_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
                let bound = p[n] * (nf * lambda.ln() + nf * nf.ln() - nf - ln_fact).exp();
                let e = expected_count(&z, &o, &x, lambda, nf, None).unwrap();
                assert!(e.partial_sum >= bound * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn growth_classes() {
    let z = WeightedGraph::zd_srw(1).unwrap();
    let o = Vertex::z(0);
    let grid = [4.0, 8.0, 16.0, 32.0];
    assert_eq!(growth_classifier(&z, &o, &o, 0.5, &grid).unwrap(), Growth::Decaying);
    assert_eq!(growth_classifier(&z, &o, &o, 1.5, &grid).unwrap(), Growth::Growing);
    let l = WeightedGraph::single_loop();
    let v = Vertex::Label(0);
    assert_eq!(growth_classifier(&l, &v, &v, 1.0, &grid).unwrap(), Growth::Inconclusive);
    assert!(growth_classifier(&l, &v, &v, 1.0, &[1.0]).is_err());
}

#[test]
fn curve_matches_pointwise_series() {
    let z = WeightedGraph::zd_srw(2).unwrap();
    let o = Vertex::lattice(&[0, 0]);
    let x = Vertex::lattice(&[1, 1]);
    let times = [0.5, 1.0, 2.0];
    let curve = occupancy_curve(&z, &o, &x, 1.2, &times, Some(60)).unwrap();
    for p in &curve {
        let s = expected_count(&z, &o, &x, 1.2, p.t, Some(60)).unwrap();
        assert_eq!(p.value, s.partial_sum);
    }
}
