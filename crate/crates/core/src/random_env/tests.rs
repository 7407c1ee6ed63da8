use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::graph::WeightedGraph;
use crate::stats::median;

fn square(side: usize) -> Arc<WeightedGraph> {
    Arc::new(WeightedGraph::zd_box(2, side).unwrap())
}

/// Connected components by depth-first search over open edges.
fn dfs_components(s: &PercolationSample) -> Vec<Vec<usize>> {
    let n = s.vertices.len();
    let mut adj = vec![Vec::new(); n];
    for (&(a, b), _) in s.edges.iter().zip(&s.open).filter(|(_, &o)| o) {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for v in 0..n {
        if seen[v] {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(x) = stack.pop() {
            comp.push(x);
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out.sort();
    out
}

#[test]
fn extreme_retention() {
    let g = square(6);
    let all = percolate(g.clone(), 1.0, 3).unwrap();
    // 2·L·(L−1) edges in an L×L box
    assert_eq!(all.edges.len(), 60);
    assert_eq!(all.open_count(), 60);
    assert_eq!(clusters(&all).components.len(), 1);
    let none = percolate(g, 0.0, 3).unwrap();
    assert_eq!(none.open_count(), 0);
    let c = clusters(&none);
    assert_eq!(c.components.len(), 36);
    assert!(c.sizes().iter().all(|&s| s == 1));
}

#[test]
fn open_fraction_is_binomial() {
    let g = square(10);
    let fr: Vec<f64> = (0..1000).map(|s| percolate(g.clone(), 0.5, s).unwrap().open_fraction()).collect();
    let mean = fr.iter().sum::<f64>() / fr.len() as f64;
    assert!((mean - 0.5).abs() < 0.02);
    // per-sample fluctuation within 4 binomial standard deviations
    let e: f64 = 180.0;
    assert!(fr.iter().all(|f| (f - 0.5).abs() <= 4.0 * (0.25 / e).sqrt()));
}

#[test]
fn percolation_errors() {
    assert!(percolate(square(3), 1.2, 0).is_err());
    assert!(percolate(Arc::new(WeightedGraph::zd_srw(2).unwrap()), 0.5, 0).is_err());
    let oriented = WeightedGraph::explicit([(Vertex::Label(0), Vertex::Label(1), 1.0)]).unwrap();
    assert!(percolate(Arc::new(oriented), 0.5, 0).is_err());
}

#[test]
fn percolation_is_deterministic_and_coupled() {
    let g = square(12);
    let a = percolate(g.clone(), 0.6, 9).unwrap();
    let b = percolate(g.clone(), 0.6, 9).unwrap();
    assert_eq!(a.open, b.open);
    let hi = percolate(g, 0.7, 9).unwrap();
    assert!(a.open.iter().zip(&hi.open).all(|(x, y)| !x || *y));
}

#[test]
fn open_set_is_symmetric() {
    let s = percolate(square(5), 0.5, 2).unwrap();
    let set = s.open_set();
    assert_eq!(set.len(), 2 * s.open_count());
    assert!(set.iter().all(|(x, y)| set.contains(&(y.clone(), x.clone()))));
}

#[test]
fn largest_cluster_fraction_across_sizes() {
    let mut thetas = Vec::new();
    for side in [20, 40, 80] {
        let g = square(side);
        let t: Vec<f64> = (0..10).map(|s| clusters(&percolate(g.clone(), 0.7, s).unwrap()).theta()).collect();
        thetas.push(t.iter().sum::<f64>() / t.len() as f64);
    }
    assert!(thetas.iter().all(|&t| t > 0.5), "{thetas:?}");
    assert!((thetas[1] - thetas[2]).abs() < 0.1);
}

#[test]
fn theta_nondecreasing_in_p() {
    let g = square(20);
    for s in 0..20 {
        let t: Vec<f64> = [0.3, 0.45, 0.5, 0.55, 0.7, 0.9]
            .iter()
            .map(|&p| clusters(&percolate(g.clone(), p, s).unwrap()).theta())
            .collect();
        assert!(t.windows(2).all(|w| w[0] <= w[1]), "{t:?}");
    }
}

#[test]
fn isolated_vertex_has_infinite_lambda_s() {
    let s = percolate(square(4), 0.0, 1).unwrap();
    let c = clusters(&s);
    let e = lambda_s_on_cluster(&s, &c, 0).unwrap();
    assert_eq!(e.rho, 0.0);
    assert!(e.n_r.is_infinite());
}

#[test]
fn two_vertex_cluster() {
    let g = Arc::new(
        WeightedGraph::explicit([
            (Vertex::Label(0), Vertex::Label(1), 0.5),
            (Vertex::Label(1), Vertex::Label(0), 0.5),
            (Vertex::Label(1), Vertex::Label(2), 0.5),
            (Vertex::Label(2), Vertex::Label(1), 0.5),
        ])
        .unwrap(),
    );
    let s = PercolationSample {
        open: vec![true, false],
        ..percolate(g, 1.0, 0).unwrap()
    };
    let c = clusters(&s);
    assert_eq!(c.sizes(), vec![2, 1]);
    let e = lambda_s_on_cluster(&s, &c, 0).unwrap();
    // [[0, 1/2], [1/2, 0]] has eigenvalue 1/2
    assert!((e.n_r - 2.0).abs() < 1e-9);
}

#[test]
fn full_box_restriction_is_identity() {
    let g = square(8);
    let s = percolate(g.clone(), 1.0, 0).unwrap();
    let c = clusters(&s);
    let via_cluster = lambda_s_on_cluster(&s, &c, 0).unwrap();
    let k = KernelMatrix::from_vertices(&g, g.finite_vertices().unwrap()).unwrap();
    let direct = pf_eigenvalue(&k, &PowerOptions::default()).unwrap();
    assert_eq!(via_cluster, direct);
    // SRW on an L×L box: ρ = cos(π/(L+1))
    assert!((direct.rho - (std::f64::consts::PI / 9.0).cos()).abs() < 1e-8);
}

#[test]
fn constant_one_sequence_has_zero_gap() {
    let r = convergence_experiment(square(10), 10, &[1.0, 1.0, 1.0], &[1, 2]).unwrap();
    assert_eq!(r.rows.len(), 6);
    assert_eq!(r.tail_sum, 0.0);
    assert!(r.rows.iter().all(|row| row.gap() == 0.0 && row.largest_cluster_size == 100));
}

#[test]
fn convergence_trend_and_invariants() {
    let g = square(30);
    let seeds: Vec<u64> = (0..12).collect();
    let r = convergence_experiment(g, 30, &dyadic_sequence(10), &seeds).unwrap();
    let box_value = 1.0 / (std::f64::consts::PI / 31.0).cos();
    for row in &r.rows {
        assert!(row.lambda_s_largest >= row.lambda_s_full_box);
        assert!(row.lambda_s_min_over_clusters <= row.lambda_s_largest);
        assert!((row.lambda_s_full_box - box_value).abs() < 1e-8);
        // Z² has λ_s = 1
        assert!(row.lambda_s_full_box >= 1.0);
    }
    let gaps = |n: u32| -> Vec<f64> { r.rows.iter().filter(|x| x.n == n).map(|x| x.gap()).collect() };
    assert!(median(&gaps(10)) < median(&gaps(2)));
    assert!(r.tail_sum < 1.0);
    let csv = convergence_csv(&r);
    assert!(csv.starts_with(
        "n,p_n,box_side,largest_cluster_size,lambda_s_largest,lambda_s_min_over_clusters,lambda_s_full_box,seed\n"
    ));
    assert_eq!(csv.lines().count(), r.rows.len() + 1);
}

#[test]
fn largest_cluster_lambda_nonincreasing_in_p() {
    let g = square(16);
    for s in 0..10 {
        let mut prev: Option<(HashSet<usize>, f64)> = None;
        for p in [0.55, 0.65, 0.8, 0.95] {
            let sample = percolate(g.clone(), p, s).unwrap();
            let c = clusters(&sample);
            let v = lambda_s_on_cluster(&sample, &c, 0).unwrap().n_r;
            let members: HashSet<usize> = c.components[0].iter().copied().collect();
            if let Some((pm, pv)) = &prev {
                if pm.is_subset(&members) {
                    assert!(v <= pv + 1e-8, "p = {p}: {v} > {pv}");
                }
            }
            prev = Some((members, v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn clusters_partition_the_open_graph(p in 0.0f64..1.0, seed in any::<u64>(), side in 2usize..9) {
        let s = percolate(square(side), p, seed).unwrap();
        let c = clusters(&s);
        let mut ours = c.components.clone();
        ours.sort();
        prop_assert_eq!(ours, dfs_components(&s));
        for (v, &l) in c.labels.iter().enumerate() {
            prop_assert!(c.components[l].contains(&v));
        }
        prop_assert!(c.sizes().windows(2).all(|w| w[0] >= w[1]));
        let e = s.edges.len() as f64;
        let sd = (p * (1.0 - p) / e).sqrt();
        prop_assert!((s.open_fraction() - p).abs() <= 4.0 * sd + 1.0 / e);
    }
}
