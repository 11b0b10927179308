//! Implementations checked against independent brute-force routes.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use sensel_core::baselines::{greedy_select, greedy_sequence, random_select};
use sensel_core::model::{gen_gaussian_problem, pod_basis, SelectionVector, SnapshotMatrix};
use sensel_core::objective::{d_optimality, fisher, gradient, relaxed_objective, sketched_hessian};
use sensel_core::solvers::{
    backtracking_line_search, constrained_newton_step, decrement, round_top_p, LineSearchParams,
};
use sensel_core::rng::stream;

#[test]
fn fisher_matches_naive_summation() {
    let mut g = rng(1);
    for seed in 0..10 {
        let u = basis(50, 3, seed);
        let w = interior_weights(50, &mut g);
        let fast = fisher(&u, &w).unwrap();
        assert!((fast.matrix() - naive_fisher(&u, &w)).amax() < 1e-12);
    }
}

#[test]
fn d_optimality_matches_explicit_determinant() {
    for seed in 0..20 {
        let u = basis(10, 3, seed);
        let mut g = rng(seed);
        let mut idx: Vec<usize> = (0..10).collect();
        for a in 0..4 {
            let b = g.random_range(a..10);
            idx.swap(a, b);
        }
        let sel = SelectionVector::new(idx[..4].to_vec(), 10).unwrap();
        let sub = u.rows_at(sel.indices());
        let expected = det_laplace(&(sub.transpose() * &sub)).ln();
        let got = d_optimality(&u, &sel);
        assert!(!got.singular);
        assert!((got.value - expected).abs() < 1e-10, "{} vs {expected}", got.value);
    }
}

#[test]
fn relaxed_objective_matches_explicit_determinant() {
    let mut g = rng(2);
    for seed in 0..10 {
        let u = basis(40, 5, seed);
        let w = interior_weights(40, &mut g);
        for kappa in [0.0, 1e-3, 0.5] {
            let got = relaxed_objective(&u, &w, kappa).unwrap();
            let expected = objective_oracle(&u, &w, kappa);
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }
}

fn fd_gradient(u: &sensel_core::CandidateBasis, w: &[f64], kappa: f64, h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (relaxed_objective(u, &plus, kappa).unwrap() - relaxed_objective(u, &minus, kappa).unwrap()) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let mut g = rng(3);
    for seed in 0..5 {
        let u = basis(30, 5, seed);
        let w = interior_weights(30, &mut g);
        let kappa = 1e-3;
        let analytic = gradient(&u, &w, kappa, None).unwrap();
        let fd = fd_gradient(&u, &w, kappa, 1e-6);
        for i in 0..30 {
            let rel = (analytic[i] - fd[i]).abs() / analytic[i].abs().max(1e-8);
            assert!(rel <= 1e-4, "component {i}: {} vs {}", analytic[i], fd[i]);
        }
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let mut g = rng(4);
    for seed in 0..5 {
        let u = basis(30, 5, seed);
        let w = interior_weights(30, &mut g);
        let kappa = 1e-3;
        let all: Vec<usize> = (0..30).collect();
        let hess = sketched_hessian(&u, &w, kappa, &all).unwrap();
        let h = 1e-5;
        let mut fd = DMatrix::zeros(30, 30);
        for b in 0..30 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[b] += h;
            minus[b] -= h;
            let col = -(gradient(&u, &plus, kappa, None).unwrap() - gradient(&u, &minus, kappa, None).unwrap()) / (2.0 * h);
            fd.set_column(b, &col);
        }
        let rel = (&hess - &fd).norm() / hess.norm();
        assert!(rel <= 1e-3, "relative error {rel}");
    }
}

#[test]
fn kkt_residual_of_constrained_step() {
    let mut g = rng(5);
    for _ in 0..100 {
        let h = random_spd(8, &mut g);
        let grad = random_vec(8, &mut g);
        let delta = constrained_newton_step(&grad, &h).unwrap();
        let resid = &h * &delta + &grad;
        let nu = -resid.sum() / 8.0;
        let kkt = resid.add_scalar(nu).amax();
        assert!(kkt <= 1e-9, "kkt residual {kkt}");
        assert!(delta.sum().abs() <= 1e-9 * delta.abs().sum());
    }
}

#[test]
fn decrement_matches_projected_gradient_identity() {
    let mut g = rng(6);
    for _ in 0..50 {
        let h = random_spd(7, &mut g);
        let grad = random_vec(7, &mut g);
        let delta = constrained_newton_step(&grad, &h).unwrap();
        let hinv = h.clone().try_inverse().unwrap();
        let ones = DVector::from_element(7, 1.0);
        let coef = (ones.transpose() * &hinv * &grad)[(0, 0)] / (ones.transpose() * &hinv * &ones)[(0, 0)];
        let projected = &grad - &ones * coef;
        let expected = (projected.transpose() * &hinv * &projected)[(0, 0)].sqrt();
        assert!((decrement(&grad, &delta) - expected).abs() < 1e-9);
    }
}

#[test]
fn accepted_step_satisfies_armijo_on_reevaluation() {
    let params = LineSearchParams::default();
    for seed in 0..10 {
        let u = basis(20, 3, seed);
        let w = vec![0.25; 20];
        let kappa = 1e-3;
        let all: Vec<usize> = (0..20).collect();
        let gmin = -gradient(&u, &w, kappa, None).unwrap();
        let h = sketched_hessian(&u, &w, kappa, &all).unwrap();
        let delta = constrained_newton_step(&gmin, &h).unwrap();
        let slope = gmin.dot(&delta);
        let f0 = relaxed_objective(&u, &w, kappa).unwrap();
        let t = backtracking_line_search(&u, &w, delta.as_slice(), kappa, f0, slope, &params).unwrap();
        let moved: Vec<f64> = w.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
        let f1 = relaxed_objective(&u, &moved, kappa).unwrap();
        assert!(t > 0.0 && t <= 1.0);
        assert!(f1 >= f0 + params.armijo_c * t * (-slope), "seed {seed}");
    }
}

/// Recomputes every candidate determinant from scratch at every step.
fn naive_greedy(u: &sensel_core::CandidateBasis, p: usize) -> Vec<usize> {
    let (n, r) = (u.n(), u.r());
    let mut chosen: Vec<usize> = Vec::new();
    for k in 1..=p {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(i);
            let sub = u.rows_at(&trial);
            let det = if k <= r {
                (&sub * sub.transpose()).determinant()
            } else {
                (sub.transpose() * &sub).determinant()
            };
            if best.is_none_or(|(_, b)| det > b) {
                best = Some((i, det));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

#[test]
fn greedy_matches_naive_reimplementation() {
    for seed in 0..50 {
        let u = basis(12, 3, seed);
        for p in 2..=5 {
            assert_eq!(greedy_sequence(&u, p).unwrap(), naive_greedy(&u, p), "seed {seed}, p {p}");
        }
    }
}

fn subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    if n < p {
        return vec![];
    }
    let mut out = subsets(n - 1, p);
    for mut s in subsets(n - 1, p - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

#[test]
fn greedy_beats_median_exhaustive_subset() {
    for seed in 0..10 {
        let u = basis(12, 3, 100 + seed);
        for p in 3..=5 {
            let mut all: Vec<f64> = subsets(12, p)
                .into_iter()
                .map(|s| d_optimality(&u, &SelectionVector::new(s, 12).unwrap()).value)
                .collect();
            all.sort_by(|a, b| a.total_cmp(b));
            let median = all[all.len() / 2];
            let greedy = d_optimality(&u, &greedy_select(&u, p).unwrap()).value;
            assert!(greedy >= median);
        }
    }
}

#[test]
fn greedy_beats_random_on_average() {
    let (mut g_sum, mut r_sum) = (0.0, 0.0);
    for seed in 0..100 {
        let u = basis(100, 5, seed);
        g_sum += d_optimality(&u, &greedy_select(&u, 10).unwrap()).value;
        let sel = random_select(100, 10, &mut stream(seed, "random", &[])).unwrap();
        r_sum += d_optimality(&u, &sel).value;
    }
    assert!(g_sum > r_sum);
}

#[test]
fn pod_residual_matches_discarded_spectrum() {
    for seed in 0..5 {
        let x = gen_gaussian_problem(20, 8, seed).unwrap().into_matrix();
        let basis = pod_basis(&SnapshotMatrix::new(x.clone()).unwrap(), 4).unwrap();
        let q = basis.matrix();
        let resid = (&x - q * (q.transpose() * &x)).norm_squared();
        let mut eig: Vec<f64> = SymmetricEigen::new(x.transpose() * &x).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let discarded: f64 = eig[4..].iter().sum();
        assert!((resid - discarded).abs() < 1e-8, "{resid} vs {discarded}");
    }
}

proptest! {
    #[test]
    fn round_top_p_matches_full_sort(w in prop::collection::vec(0.0f64..1.0, 1..40), frac in 0.0f64..1.0) {
        let p = ((w.len() as f64) * frac) as usize;
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));
        let mut expected = order[..p].to_vec();
        expected.sort();
        let got = round_top_p(&w, p).unwrap();
        prop_assert_eq!(got.indices(), &expected[..]);
    }

    #[test]
    fn pod_basis_is_orthonormal(n in 2usize..12, m in 2usize..12, seed in any::<u64>()) {
        let x = gen_gaussian_problem(n.max(m), n.min(m), seed).unwrap().into_matrix();
        let x = if n >= m { x } else { x.transpose() };
        let r = n.min(m);
        let q = pod_basis(&SnapshotMatrix::new(x).unwrap(), r).unwrap();
        let gram = q.matrix().transpose() * q.matrix();
        prop_assert!((gram - DMatrix::identity(r, r)).amax() <= 1e-10);
    }

    #[test]
    fn restricted_gradient_equals_full_entries(seed in any::<u64>(), take in 1usize..15) {
        let u = basis(15, 3, seed);
        let mut g = rng(seed);
        let w = interior_weights(15, &mut g);
        let full = gradient(&u, &w, 1e-3, None).unwrap();
        let mut idx: Vec<usize> = (0..15).collect();
        for a in 0..take {
            let b = g.random_range(a..15);
            idx.swap(a, b);
        }
        idx.truncate(take);
        let part = gradient(&u, &w, 1e-3, Some(&idx)).unwrap();
        for (a, &i) in idx.iter().enumerate() {
            prop_assert_eq!(part[a].to_bits(), full[i].to_bits());
        }
    }

    #[test]
    fn information_gradient_is_positive(seed in any::<u64>()) {
        let u = basis(20, 4, seed);
        let w = interior_weights(20, &mut rng(seed));
        let g = gradient(&u, &w, 0.0, None).unwrap();
        prop_assert!(g.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sketched_hessian_is_psd(seed in any::<u64>(), kappa in prop::sample::select(vec![0.0, 1e-3, 1e-1])) {
        let u = basis(25, 4, seed);
        let w = interior_weights(25, &mut rng(seed));
        let idx: Vec<usize> = (0..25).step_by(2).collect();
        let h = sketched_hessian(&u, &w, kappa, &idx).unwrap();
        let min = SymmetricEigen::new(h.clone()).eigenvalues.min();
        prop_assert!(min >= -1e-10 * h.trace());
    }

    #[test]
    fn relaxed_objective_is_midpoint_concave(seed in any::<u64>()) {
        let u = basis(15, 3, seed);
        let mut g = rng(seed);
        // two interior points with equal sums
        let a: Vec<f64> = interior_weights(15, &mut g);
        let mut b: Vec<f64> = interior_weights(15, &mut g);
        let shift = (a.iter().sum::<f64>() - b.iter().sum::<f64>()) / 15.0;
        for x in &mut b {
            *x = (*x + shift).clamp(0.01, 0.99);
        }
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let f = |w: &[f64]| relaxed_objective(&u, w, 1e-2).unwrap();
        prop_assert!(f(&mid) >= 0.5 * (f(&a) + f(&b)) - 1e-9);
    }
}
