//! Independent oracles for geometric identities, objectives and estimators.

use std::f64::consts::PI;

use iddm::experiment::{build_instance, run_algorithm, AlgorithmKind, ExperimentConfig};
use iddm::manifold::{random_point, StiefelPoint};
use iddm::problem::{FnProblem, Problem};
use iddm::problems::{
    biquad_make, complete_all, cryoem_generate, eigs_init, handedness_mse, hp1_problem,
    procrustes_mse, stability_problem, BiquadCase, Graph,
};
use iddm::rng::Lane;
use iddm::verify::{lb_apply, strong_order_check, TestFunction};
use iddm::{Matrix, ProductPoint, RngStream};
use nalgebra::{Matrix3, Rotation3, Vector3};

/// `[X, X⊥]` from a QR factorization of `[X, random]`.
fn extend_to_orthogonal(x: &Matrix, rng: &RngStream) -> Matrix {
    let (n, p) = x.shape();
    let mut m = rng.standard_normal_matrix(n, n);
    m.columns_mut(0, p).copy_from(x);
    let mut q = m.qr().q();
    // QR may flip the sign of the first p columns; restore X exactly.
    q.columns_mut(0, p).copy_from(x);
    q
}

fn euclidean_hessian(f: &TestFunction, x: &Matrix, a: &Matrix, b: &Matrix) -> f64 {
    let (n, p) = x.shape();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..p {
            for u in 0..n {
                for v in 0..p {
                    s += (f.hess)(x, (i, j), (u, v)) * a[(i, j)] * b[(u, v)];
                }
            }
        }
    }
    s
}

/// Trace of the canonical-metric Hessian over the orthonormal basis
/// `Q(E_ij − E_ji)` (`i < j ≤ p`) and `QE_ij` (`i > p`).
fn lb_by_basis_trace(f: &TestFunction, x: &Matrix, rng: &RngStream) -> f64 {
    let (n, p) = x.shape();
    let q = extend_to_orthogonal(x, rng);
    let g = (f.grad)(x);
    let xtg = x.transpose() * &g;
    let sym = &xtg + xtg.transpose();
    let proj = Matrix::identity(n, n) - x * x.transpose();
    let hess = |z: &Matrix| {
        euclidean_hessian(f, x, z, z)
            + 0.5 * ((g.transpose() * z * x.transpose() * z).trace()
                + (x.transpose() * z * g.transpose() * z).trace())
            - 0.5 * (&sym * z.transpose() * &proj * z).trace()
    };
    let mut basis = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let mut e = Matrix::zeros(n, p);
            e[(i, j)] = 1.0;
            e[(j, i)] = -1.0;
            basis.push(&q * e);
        }
    }
    for i in p..n {
        for j in 0..p {
            let mut e = Matrix::zeros(n, p);
            e[(i, j)] = 1.0;
            basis.push(&q * e);
        }
    }
    assert_eq!(basis.len(), n * p - p * (p + 1) / 2);
    basis.iter().map(hess).sum()
}

#[test]
fn laplace_beltrami_matches_basis_trace() {
    let rng = RngStream::new(11);
    let cases: Vec<(usize, usize, TestFunction)> = vec![
        (3, 2, TestFunction::entry_product((0, 0), (0, 0))),
        (5, 3, TestFunction::entry_product((1, 2), (3, 0))),
        (4, 1, TestFunction::entry_product((2, 0), (2, 0))),
        (6, 2, TestFunction::linear(rng.cycle(9).standard_normal_matrix(6, 2))),
        (4, 4, TestFunction::entry_product((0, 1), (2, 3))),
    ];
    for (k, (n, p, f)) in cases.iter().enumerate() {
        let x = random_point(*n, *p, &rng.cycle(k as u64)).unwrap();
        let extrinsic = lb_apply(f, &x);
        let trace = lb_by_basis_trace(f, x.matrix(), &rng.lane(Lane::Auxiliary).cycle(k as u64));
        assert!(
            (extrinsic - trace).abs() <= 1e-10 * (1.0 + trace.abs()),
            "M({n},{p}): extrinsic {extrinsic} vs basis trace {trace}"
        );
    }
}

/// Size of a maximum independent set by branch and bound over bitmasks.
fn max_independent_set(g: &Graph) -> u32 {
    let m = g.num_vertices();
    assert!(m <= 64);
    let mut nbr = vec![0u64; m];
    for (u, v) in g.edges() {
        nbr[u - 1] |= 1 << (v - 1);
        nbr[v - 1] |= 1 << (u - 1);
    }
    fn go(cand: u64, size: u32, best: &mut u32, nbr: &[u64]) {
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        go(cand & !(1 << v) & !nbr[v], size + 1, best, nbr);
        go(cand & !(1 << v), size, best, nbr);
    }
    let all = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut best = 0;
    go(all, 0, &mut best, &nbr);
    best
}

#[test]
fn exact_independence_numbers() {
    assert_eq!(max_independent_set(&Graph::cycle(5).unwrap()), 2);
    assert_eq!(max_independent_set(&Graph::petersen()), 4);
    assert_eq!(max_independent_set(&Graph::hamming(6, 4).unwrap()), 4);
    assert_eq!(max_independent_set(&Graph::complete(7)), 1);
    assert_eq!(max_independent_set(&Graph::empty(6)), 6);
}

/// A maximum independent set, greedily completed from the exact size.
fn independent_set_of_size(g: &Graph, s: usize) -> Vec<usize> {
    let m = g.num_vertices();
    let mut chosen: Vec<usize> = Vec::new();
    fn extend(g: &Graph, m: usize, s: usize, from: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == s {
            return true;
        }
        for v in from..=m {
            if chosen.iter().all(|&u| !g.has_edge(u, v)) {
                chosen.push(v);
                if extend(g, m, s, v + 1, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    assert!(extend(g, m, s, 1, &mut chosen));
    chosen
}

#[test]
fn motzkin_straus_value_on_maximum_independent_sets() {
    for g in [
        Graph::cycle(5).unwrap(),
        Graph::petersen(),
        Graph::complete(6),
        Graph::empty(7),
    ] {
        let s = max_independent_set(&g) as usize;
        let set = independent_set_of_size(&g, s);
        let mut x = Matrix::zeros(g.num_vertices(), 1);
        for v in set {
            x[v - 1] = 1.0 / (s as f64).sqrt();
        }
        let f = stability_problem(&g).value(&[x]);
        assert!((f - 1.0 / s as f64).abs() <= 1e-15, "{f} vs 1/{s}");
    }
}

#[test]
fn hp1_on_circle_matches_dense_grid() {
    let problem = hp1_problem(2).unwrap();
    let m = 1_000_000;
    let grid_min = (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            problem.value(&[Matrix::from_column_slice(2, 1, &[t.cos(), t.sin()])])
        })
        .fold(f64::INFINITY, f64::min);
    let mut cfg = ExperimentConfig::default();
    cfg.apply("problem.n=2").unwrap();
    let row = &cfg.prepare().unwrap()[0];
    let inst = build_instance(&cfg, row, &RngStream::new(0)).unwrap();
    for seed in 0..5 {
        let out = run_algorithm(&cfg, &inst, AlgorithmKind::Iddm, seed).unwrap();
        assert!(
            (out.objective - grid_min).abs() <= 1e-6,
            "seed {seed}: IDDM {} vs grid {grid_min}",
            out.objective
        );
    }
}

#[test]
fn procrustes_matches_grid_search() {
    let rng = RngStream::new(21);
    let truth: Vec<Matrix3<f64>> = (0..2)
        .map(|k| {
            let v = rng.cycle(k).standard_normal_matrix(3, 1);
            Rotation3::from_scaled_axis(Vector3::new(v[0], v[1], v[2])).into_inner()
        })
        .collect();
    let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
    let perturbed = Rotation3::from_scaled_axis(axis * 0.01).into_inner() * truth[0];
    let estimated = vec![perturbed, truth[1]];
    let closed = procrustes_mse(&estimated, &truth).unwrap();

    // The optimal gauge is within 0.01 rad of the identity; grid its
    // rotation vector with 100 points per axis.
    let k = 100;
    let half = 0.01;
    let step = 2.0 * half / (k - 1) as f64;
    let mut best = f64::INFINITY;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let w = Vector3::new(a as f64, b as f64, c as f64) * step - Vector3::repeat(half);
                let o = Rotation3::from_scaled_axis(w).into_inner();
                let v: f64 = estimated
                    .iter()
                    .zip(&truth)
                    .map(|(e, t)| (e - o * t).norm_squared())
                    .sum();
                best = best.min(v);
            }
        }
    }
    assert!(closed <= best + 1e-12, "closed form {closed} above grid {best}");
    assert!((closed - best).abs() <= 1e-6, "closed form {closed} vs grid {best}");
}

#[test]
fn biquad_symmetry_on_random_tuples() {
    let t = biquad_make(7, BiquadCase::Alternating, &RngStream::new(3)).unwrap();
    let mut g = RngStream::new(4).generator();
    use rand::Rng;
    for _ in 0..1000 {
        let (i, j, k, l) = (g.random_range(0..7), g.random_range(0..7), g.random_range(0..7), g.random_range(0..7));
        let b = t.get(i, j, k, l);
        assert_eq!(b.to_bits(), t.get(k, j, i, l).to_bits());
        assert_eq!(b.to_bits(), t.get(i, l, k, j).to_bits());
    }
}

#[test]
fn sparse_biquad_nonzero_orbits_follow_bernoulli_count() {
    // Entries are kept with probability 1 − η before orbit averaging, so an
    // orbit with s distinct members is nonzero with probability 1 − η^s.
    let (n, eta) = (10, 0.999);
    let t = biquad_make(n, BiquadCase::Sparse { eta }, &RngStream::new(8)).unwrap();
    let (mut count, mut expected, mut variance) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut orbit = vec![(i, j, k, l), (k, j, i, l), (i, l, k, j), (k, l, i, j)];
                    if orbit.iter().any(|&o| o < (i, j, k, l)) {
                        continue;
                    }
                    orbit.sort();
                    orbit.dedup();
                    let p = 1.0 - eta.powi(orbit.len() as i32);
                    expected += p;
                    variance += p * (1.0 - p);
                    if t.get(i, j, k, l) != 0.0 {
                        count += 1.0;
                    }
                }
            }
        }
    }
    assert!(
        (count - expected).abs() <= 3.0 * variance.sqrt(),
        "{count} nonzero orbits, expected {expected:.2} ± {:.2}",
        3.0 * variance.sqrt()
    );
}

#[test]
fn noiseless_scheme_has_first_order() {
    // Errors against the finest grid scale like 2^l − 1 at level l, so fit
    // only the coarse levels where that factor is close to 2^l.
    let rng = RngStream::new(5);
    let x = random_point(3, 2, &rng.lane(Lane::InitialPoint)).unwrap();
    let c = rng.lane(Lane::Auxiliary).standard_normal_matrix(3, 2);
    let problem = FnProblem::linear(c);
    let r = strong_order_check(&problem, &x, 0.5, 0.0, 1 << 12, 7, 1, &rng).unwrap();
    let coarse = &r.pairs[4..];
    let m = coarse.len() as f64;
    let (mx, my) = (
        coarse.iter().map(|p| p.0.ln()).sum::<f64>() / m,
        coarse.iter().map(|p| p.1.ln()).sum::<f64>() / m,
    );
    let sxy: f64 = coarse.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = coarse.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((0.9..=1.1).contains(&slope), "slope {slope} pairs {:?}", r.pairs);
}

#[test]
fn eigs_output_is_feasible_clean_and_corrupted() {
    for (k, p) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let inst = cryoem_generate(20, p, &RngStream::new(30 + k as u64)).unwrap();
        let x = eigs_init(&inst).unwrap();
        assert!(x.max_residual() <= 1e-10, "p = {p}: residual {}", x.max_residual());
        let mse = handedness_mse(&complete_all(&x).unwrap(), &inst.true_rotations).unwrap();
        assert!(mse.is_finite() && mse <= 4.0 * 20.0 * 3.0);
    }
}

#[test]
fn clean_eigs_is_far_better_than_random() {
    for s in 0..5 {
        let inst = cryoem_generate(20, 0.0, &RngStream::new(40 + s)).unwrap();
        let eigs = handedness_mse(&complete_all(&eigs_init(&inst).unwrap()).unwrap(), &inst.true_rotations).unwrap();
        let random = ProductPoint::random(&vec![(3, 2); 20], &RngStream::new(50 + s)).unwrap();
        let rand_mse = handedness_mse(&complete_all(&random).unwrap(), &inst.true_rotations).unwrap();
        assert!(eigs <= 0.1 * rand_mse, "eigs {eigs} vs random {rand_mse}");
    }
}

#[test]
fn cryoem_objective_invariant_under_global_rotation() {
    let o = Rotation3::from_scaled_axis(Vector3::new(0.4, -1.1, 0.7)).into_inner();
    let om = Matrix::from_fn(3, 3, |a, b| o[(a, b)]);
    let rotate = |x: &ProductPoint| -> Vec<Matrix> { x.blocks().iter().map(|b| &om * b).collect() };

    // At clean truth every residual vanishes, so any gauge keeps the floor.
    let clean = cryoem_generate(7, 0.0, &RngStream::new(6)).unwrap();
    let p = iddm::problems::cryoem_problem(&clean);
    let truth = clean.truth_point();
    let (f0, f1) = (p.value(truth.blocks()), p.value(&rotate(&truth)));
    assert!((f0 - f1).abs() <= 1e-10, "{f0} vs {f1}");

    // With q = 2 the distance is Euclidean and invariant everywhere.
    let mut noisy = cryoem_generate(7, 0.3, &RngStream::new(6)).unwrap();
    noisy.q = 2.0;
    let p = iddm::problems::cryoem_problem(&noisy);
    let x = ProductPoint::random(&vec![(3, 2); 7], &RngStream::new(7)).unwrap();
    let (f0, f1) = (p.value(x.blocks()), p.value(&rotate(&x)));
    assert!((f0 - f1).abs() <= 1e-10 * f0.abs().max(1.0), "{f0} vs {f1}");
}

#[test]
fn cryoem_coordinatewise_distance_is_not_rotation_invariant_off_truth() {
    let inst = cryoem_generate(7, 0.3, &RngStream::new(6)).unwrap();
    let p = iddm::problems::cryoem_problem(&inst);
    let x = ProductPoint::random(&vec![(3, 2); 7], &RngStream::new(7)).unwrap();
    let o = Rotation3::from_scaled_axis(Vector3::new(0.4, -1.1, 0.7)).into_inner();
    let om = Matrix::from_fn(3, 3, |a, b| o[(a, b)]);
    let moved: Vec<Matrix> = x.blocks().iter().map(|b| &om * b).collect();
    assert!((p.value(x.blocks()) - p.value(&moved)).abs() > 1e-3);
}

#[test]
fn stiefel_point_accepts_eigs_blocks() {
    let inst = cryoem_generate(5, 0.0, &RngStream::new(2)).unwrap();
    let x = eigs_init(&inst).unwrap();
    for b in x.blocks() {
        StiefelPoint::with_tolerance(b.clone(), 1e-10).unwrap();
    }
}
