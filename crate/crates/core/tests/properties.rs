use proptest::prelude::*;
use relu_align::data::{center, compute_stats, generate_separable, Dataset, Point};
use relu_align::geometry::{classify, estimate_margins, x_a, x_a_norm_lower_bound, ConeLabel};
use relu_align::linalg::norm;
use relu_align::model::{forward, gaussian_shape, init_balanced, init_gaussian, loss_and_grads, LossKind};
use relu_align::oracle::{brute_travel_time, enumerate_paths, fd_gradient, FdOutcome};
use relu_align::theory::{bounds_from, maximal_path, path_travel_time};

fn dataset(dim: usize, np: usize, nm: usize, mu: f64, seed: u64) -> Dataset<f64> {
    generate_separable(dim, np, nm, mu, seed).unwrap()
}

prop_compose! {
    fn separable()(dim in 2usize..5, np in 1usize..5, nm in 0usize..5, mu in 0.05f64..0.9, seed in any::<u64>())
        -> Dataset<f64> {
        dataset(dim, np, nm, mu, seed)
    }
}

fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mu_is_permutation_invariant(ds in separable(), rot in 0usize..16) {
        let mut pts: Vec<Point<f64>> = ds.points().to_vec();
        let r = rot % pts.len();
        pts.rotate_left(r);
        pts.reverse();
        let perm = Dataset::new(pts).unwrap();
        let (a, b) = (compute_stats(&ds).unwrap().mu, compute_stats(&perm).unwrap().mu);
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn mu_ignores_point_scale(ds in separable(), scales in prop::collection::vec(0.01f64..100.0, 10)) {
        let pts = ds
            .points()
            .iter()
            .zip(scales.iter().cycle())
            .map(|(p, &s)| Point { x: p.x.iter().map(|v| v * s).collect(), y: p.y })
            .collect();
        let scaled = Dataset::new(pts).unwrap();
        let (a, b) = (compute_stats(&ds).unwrap().mu, compute_stats(&scaled).unwrap().mu);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn generator_reaches_target(dim in 2usize..6, np in 1usize..6, nm in 0usize..6, mu in 0.01f64..0.99, seed in any::<u64>()) {
        let ds = dataset(dim, np, nm, mu, seed);
        prop_assert!(compute_stats(&ds).unwrap().mu >= mu);
        for &r in ds.norms() {
            prop_assert!((0.9 - 1e-12..=1.1 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn centering_is_idempotent(ds in separable()) {
        prop_assume!(ds.n() > 1);
        let Ok(once) = center(&ds) else { return Ok(()) };
        let Ok(twice) = center(&once) else { return Ok(()) };
        for i in 0..ds.n() {
            for (a, b) in once.x(i).iter().zip(twice.x(i)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cone_label_is_scale_invariant(ds in separable(), w in prop::collection::vec(-1.0f64..1.0, 4), c in 1e-6f64..1e6) {
        let w = &w[..ds.dim()];
        prop_assume!(norm(w) > 1e-6);
        let cw: Vec<f64> = w.iter().map(|v| v * c).collect();
        // Scaling can move a dot product that is exactly zero by rounding only.
        prop_assume!((0..ds.n()).all(|i| relu_align::linalg::dot(ds.x(i), w).abs() > 1e-9));
        prop_assert_eq!(classify(w, &ds).unwrap().label, classify(&cw, &ds).unwrap().label);
    }

    #[test]
    fn same_sign_cones_are_convex(ds in separable(), a in prop::collection::vec(-1.0f64..1.0, 4), b in prop::collection::vec(-1.0f64..1.0, 4)) {
        let d = ds.dim();
        let (a, b) = (&a[..d], &b[..d]);
        prop_assume!(norm(a) > 1e-6 && norm(b) > 1e-6);
        let la = classify(a, &ds).unwrap().label;
        let lb = classify(b, &ds).unwrap().label;
        prop_assume!(la == lb && matches!(la, ConeLabel::SPlus | ConeLabel::SMinus));
        let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        prop_assert_eq!(classify(&sum, &ds).unwrap().label, la);
    }

    #[test]
    fn active_sum_respects_coherence_bound(ds in separable(), w in prop::collection::vec(-1.0f64..1.0, 4)) {
        let w = &w[..ds.dim()];
        prop_assume!(norm(w) > 1e-6);
        let stats = compute_stats(&ds).unwrap();
        let m = classify(w, &ds).unwrap();
        let n_a = m.activated_pos + m.activated_neg;
        let lb = x_a_norm_lower_bound(&stats, n_a).unwrap();
        prop_assert!(norm(&x_a(w, &ds, 0.0).unwrap()) >= lb * (1.0 - 1e-12));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(
        ds in separable(),
        h in 1usize..4,
        seed in any::<u64>(),
        scale in 0.1f64..1.5,
        loss in prop_oneof![Just(LossKind::Exponential), Just(LossKind::Logistic), Just(LossKind::LogisticUnscaled)],
        alpha in prop_oneof![Just(0.0f64), 0.01f64..0.5],
    ) {
        let mut s = init_gaussian(ds.dim(), h, scale, seed).unwrap();
        s.leaky_alpha = alpha;
        let (_, gw, gv) = loss_and_grads(&s, &ds, loss);
        match fd_gradient(&s, &ds, loss, 1e-6).unwrap() {
            FdOutcome::Skipped { .. } => {}
            FdOutcome::Gradient { gw: fw, gv: fv } => {
                let analytic = gw.iter().flatten().chain(&gv);
                let numeric = fw.iter().flatten().chain(&fv);
                for (a, b) in analytic.zip(numeric) {
                    prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "analytic {} vs fd {}", a, b);
                }
            }
        }
    }

    #[test]
    fn output_is_two_homogeneous(ds in separable(), h in 1usize..5, seed in any::<u64>(), c in 0.01f64..10.0) {
        let s = init_gaussian(ds.dim(), h, 1.0, seed).unwrap();
        let mut sc = s.clone();
        sc.w.iter_mut().flatten().for_each(|v| *v *= c);
        sc.v.iter_mut().for_each(|v| *v *= c);
        for i in 0..ds.n() {
            let (a, b) = (forward(&s, ds.x(i)).unwrap(), forward(&sc, ds.x(i)).unwrap());
            prop_assert!((b - c * c * a).abs() <= 1e-10 * (1.0 + (c * c * a).abs()));
        }
    }

    #[test]
    fn balanced_init_has_zero_residual(dim in 1usize..6, h in 1usize..8, seed in any::<u64>(), eps in 1e-8f64..1.0) {
        let (w0, signs) = gaussian_shape::<f64>(dim, h, seed);
        let s = init_balanced(w0, eps, signs).unwrap();
        prop_assert!(s.balancedness_residual() <= 1e-12 * eps * eps);
    }

    #[test]
    fn travel_time_matches_edge_sum(np in 1usize..6, nm in 0usize..5, c in 1e-3f64..10.0) {
        for p in enumerate_paths(np, nm).unwrap().iter().take(200) {
            let t = path_travel_time(p, c).unwrap();
            let b = brute_travel_time(&p.nodes, c);
            prop_assert!((t - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn maximal_path_time_is_harmonic(np in 1usize..40, nm in 0usize..40, c in 1e-3f64..10.0) {
        let t = path_travel_time(&maximal_path(np, nm).unwrap(), c).unwrap();
        let expect = if nm == 0 {
            4.0 / c * harmonic(np - 1)
        } else {
            4.0 / c * (harmonic(nm) + 0.5 + harmonic(np - 1))
        };
        prop_assert!((t - expect).abs() <= 1e-12 * expect.max(1.0));
        prop_assert!(t <= 16.0 * ((np + nm) as f64).ln() / c + 1e-12 || np + nm == 1);
    }

    #[test]
    fn threshold_ignores_eps_and_shrinks_with_shape(ds in separable(), h in 1usize..6, seed in any::<u64>(), k in 1.0f64..10.0) {
        let (w0, signs) = gaussian_shape::<f64>(ds.dim(), h, seed);
        let bounds = |w0: Vec<Vec<f64>>, eps: f64| {
            let s = init_balanced(w0, eps, signs.clone()).unwrap();
            let m = estimate_margins(&ds, &s, 2000, 3).unwrap();
            bounds_from(&ds, &s, &m)
        };
        let Ok(b1) = bounds(w0.clone(), 1e-3) else { return Ok(()) };
        let b2 = bounds(w0.clone(), 1e-9).unwrap();
        let big: Vec<Vec<f64>> = w0.iter().map(|w| w.iter().map(|v| v * k).collect()).collect();
        let b3 = bounds(big, 1e-3).unwrap();
        prop_assert!((b1.ln_eps_threshold - b2.ln_eps_threshold).abs() <= 1e-9 * b1.ln_eps_threshold.abs());
        prop_assert!(b3.ln_eps_threshold <= b1.ln_eps_threshold + 1e-9 * b1.ln_eps_threshold.abs());
    }
}

#[test]
fn every_enumerated_path_is_dominated() {
    let c = 0.37;
    for np in 1..=5 {
        for nm in 0..=(8 - np) {
            let tmax = path_travel_time(&maximal_path(np, nm).unwrap(), c).unwrap();
            let paths = enumerate_paths(np, nm).unwrap();
            assert!(!paths.is_empty());
            for p in &paths {
                p.validate().unwrap();
                assert!(path_travel_time(p, c).unwrap() <= tmax * (1.0 + 1e-12), "{:?}", p.nodes);
            }
        }
    }
}
