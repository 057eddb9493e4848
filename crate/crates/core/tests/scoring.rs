mod common;

use common::{dense_solve, dense_system, random_graph};
use gsde_core::diffcore::Matrix;
use gsde_core::rng::seeded;
use gsde_core::scoring::{
    expansion_size, label_propagation, neighborhood_scores, propagate, select_top_fraction, AffinityGraph,
    ScoreTable, TargetAnchor,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn propagation_matches_dense_solve() {
    let mut rng = seeded(7);
    for _ in 0..50 {
        let w = random_graph(&mut rng);
        let n = w.len();
        let k = rng.random_range(1..=4);
        let lambda = rng.random_range(0.1..5.0);
        let anchors = Matrix::from_vec(n, k, (0..n * k).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let g = AffinityGraph::from_dense(&Matrix::from_rows(&w).unwrap()).unwrap();
        let p = propagate(&g, lambda, &anchors).unwrap();
        let sys = dense_system(&w, lambda);
        for c in 0..k {
            let b: Vec<f64> = (0..n).map(|r| anchors[(r, c)]).collect();
            let x = dense_solve(sys.clone(), b);
            for r in 0..n {
                assert!((p[(r, c)] - x[r]).abs() < 1e-8, "row {r} col {c}: {} vs {}", p[(r, c)], x[r]);
            }
        }
        let residual = g.system_product(lambda, &p).unwrap();
        let mut diff = residual.clone();
        diff.axpy(-1.0, &anchors).unwrap();
        assert!(diff.frobenius_norm() <= 1e-8 * anchors.frobenius_norm());
        assert_eq!(propagate(&g, 0.0, &anchors).unwrap(), anchors);
    }
}

#[test]
fn two_node_zero_anchor_target_is_pulled_to_source_label() {
    // source node 0 labeled class 1, target node 1 with zero anchor, one edge.
    // (I + λL) with unit degrees: [[1+λ, -λ], [-λ, 1+λ]] x = (0, 0) and (1, 0).
    let f = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.2]]).unwrap();
    let probs = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
    let lp = label_propagation(&f, &[1], &probs, 1.0, 1, TargetAnchor::Zero).unwrap();
    assert_eq!(lp.row(0), &[0.0, 1.0]);

    let w = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let g = AffinityGraph::from_dense(&w).unwrap();
    let lambda = 2.0;
    let x = propagate(&g, lambda, &Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap()).unwrap();
    let det = (1.0 + lambda) * (1.0 + lambda) - lambda * lambda;
    assert!((x[(1, 1)] - lambda / det).abs() < 1e-14);
    assert!((x[(0, 1)] - (1.0 + lambda) / det).abs() < 1e-14);
    assert_eq!(x[(1, 0)], 0.0);
}

fn brute_force_na(f: &Matrix, p: &Matrix, m: usize) -> Matrix {
    let n = f.rows();
    let mut out = Matrix::zeros(n, p.cols());
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if j == i {
                continue;
            }
            let (a, b) = (f.row(i), f.row(j));
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            all.push((1.0 - dot / (na * nb), j));
        }
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        for &(_, j) in &all[..m] {
            for c in 0..p.cols() {
                out.row_mut(i)[c] += p[(j, c)] / m as f64;
            }
        }
    }
    out
}

#[test]
fn neighborhood_matches_brute_force() {
    let mut rng = seeded(11);
    for _ in 0..10 {
        let f = Matrix::from_vec(20, 4, (0..80).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let raw: Vec<f64> = (0..60).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut p = Matrix::from_vec(20, 3, raw).unwrap();
        gsde_core::scoring::renormalize_rows(&mut p);
        let m = rng.random_range(1..=19);
        let got = neighborhood_scores(&f, &p, m).unwrap();
        let want = brute_force_na(&f, &p, m);
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn propagated_scores_stay_on_simplex() {
    let mut rng = seeded(3);
    let f = Matrix::from_vec(60, 3, (0..180).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
    let mut probs = Matrix::from_vec(30, 3, (0..90).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    gsde_core::scoring::renormalize_rows(&mut probs);
    for anchor in [TargetAnchor::Probs, TargetAnchor::Zero] {
        let lp = label_propagation(&f, &labels, &probs, 1.0, 10, anchor).unwrap();
        for row in lp.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}

fn simplex_rows(n: usize, k: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(0.001f64..1.0, n * k).prop_map(move |v| {
        let mut m = Matrix::from_vec(n, k, v).unwrap();
        gsde_core::scoring::renormalize_rows(&mut m);
        m
    })
}

proptest! {
    #[test]
    fn selection_size_and_nesting(probs in (1usize..60, 2usize..5).prop_flat_map(|(n, k)| simplex_rows(n, k)),
                                  f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0) {
        let t = ScoreTable::from_probs(probs).unwrap();
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let small = select_top_fraction(&t, lo).unwrap();
        let large = select_top_fraction(&t, hi).unwrap();
        prop_assert_eq!(small.len(), (lo * t.len() as f64).floor() as usize);
        prop_assert_eq!(large.len(), (hi * t.len() as f64).floor() as usize);
        prop_assert_eq!(&large[..small.len()], &small[..]);
    }

    #[test]
    fn combined_rows_are_distributions(p in simplex_rows(8, 3), na in simplex_rows(8, 3), lp in simplex_rows(8, 3)) {
        let t = gsde_core::scoring::combined_scores(&p, &na, &lp).unwrap();
        prop_assert!(t.check_simplex(1e-9).is_ok());
        for (i, row) in t.combined.row_iter().enumerate() {
            let best = row.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(t.confidence[i], best);
            prop_assert_eq!(row.iter().position(|&v| v == best).unwrap(), t.pseudo_labels[i]);
        }
    }

    #[test]
    fn expansion_size_law(max_runs in 1usize..=8, n_t in 0usize..2000, run_frac in 0.0f64..1.0) {
        let n = 1 + (run_frac * max_runs as f64) as usize;
        let size = expansion_size(n, max_runs, n_t).unwrap();
        prop_assert_eq!(size as u128, ((n as u128 - 1) * n_t as u128) / max_runs as u128);
        prop_assert!(size <= n_t);
    }
}
