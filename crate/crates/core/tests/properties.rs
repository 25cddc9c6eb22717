use advreg::adversarial::{standard_loss, AttackLattice};
use advreg::estimators::{fit_aniso_kernel, fit_local_poly_degree, FittedPredictor};
use advreg::functions::{generate, Dataset, RegressionFunction, SmoothnessSpec};
use advreg::grid::GridDomain;
use advreg::perturbation::{neighborhood, perturbed_domain, PerturbationSample, PerturbationSet};
use advreg::selftest::{random_lattice, random_perturbation, random_piecewise_linear, random_table};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT: f64 = 1e-12;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Offsets drawn as multiples of `spacing`, so lattice snapping is a no-op.
fn lattice_points(r: &mut ChaCha8Rng, dim: usize, spacing: f64, count: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]];
    for _ in 0..count {
        pts.push((0..dim).map(|_| r.random_range(-3i32..=3) as f64 * spacing).collect());
    }
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_contains_zero_and_diameter_dominates_ranges(seed in any::<u64>(), dim in 1usize..=3) {
        let mut r = rng(seed);
        let (set, samp) = random_perturbation(&mut r, dim);
        if set.contains_zero() {
            prop_assert!(samp.contains_zero());
        }
        let dia = set.diameter(&samp);
        prop_assert!(dia >= 0.0);
        for range in set.coord_ranges(&samp) {
            prop_assert!(dia + EXACT >= range);
        }
        let single = PerturbationSet::<f64>::singleton(dim).unwrap();
        prop_assert_eq!(single.diameter(&single.sample(3).unwrap()), 0.0);
    }

    #[test]
    fn nested_samples_have_nested_spreads(seed in any::<u64>(), dim in 1usize..=3, k in 1usize..6) {
        let mut r = rng(seed);
        let pts = lattice_points(&mut r, dim, 0.05, k + 3);
        let set = PerturbationSet::finite(pts.clone()).unwrap();
        let small = PerturbationSample::from_points(pts[..k].to_vec(), 2).unwrap();
        let big = PerturbationSample::from_points(pts, 2).unwrap();
        prop_assert!(set.diameter(&small) <= set.diameter(&big));
        for (a, b) in small.coordinate_spreads().iter().zip(big.coordinate_spreads()) {
            prop_assert!(*a <= b);
        }
    }

    #[test]
    fn ball_diameter_matches_brute_force(
        dim in 1usize..=3,
        p in prop::sample::select(vec![1.0, 2.0, f64::INFINITY]),
        radius in 0.01f64..0.5,
    ) {
        let set = PerturbationSet::lp_ball(dim, p, radius).unwrap();
        let res = if dim == 3 { 9 } else { 21 };
        let samp = set.sample(res).unwrap();
        let slack = 2.0 * radius / (res - 1) as f64 * (dim as f64).sqrt();
        let brute = samp.max_pairwise_distance();
        let closed = set.diameter(&samp);
        prop_assert!(brute <= closed + EXACT);
        prop_assert!(closed - brute <= slack, "closed {closed} brute {brute}");
    }

    #[test]
    fn singleton_neighbourhood_is_the_point(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let g = random_lattice(&mut r, dim);
        let set = PerturbationSet::singleton(dim).unwrap();
        let samp = set.sample(2).unwrap();
        prop_assert_eq!(perturbed_domain(&g, &set, &samp).unwrap(), g.clone());
        let i = r.random_range(0..g.len());
        let x = g.point(i);
        prop_assert_eq!(neighborhood(&x, &set, &g, &samp).unwrap(), vec![x]);
    }

    #[test]
    fn swapped_order_is_exact(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let (set, samp) = random_perturbation(&mut r, dim);
        let lat = AttackLattice::new(&random_lattice(&mut r, dim), &set, &samp).unwrap();
        let p = random_table(&mut r, lat.perturbed());
        let a = lat.adversarial_loss(&f, &p).unwrap();
        let b = lat.adversarial_loss_swapped(&f, &p).unwrap();
        prop_assert!((a.value - b.value).abs() <= EXACT);
    }

    #[test]
    fn ideal_predictor_is_optimal_and_dominated(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let (set, samp) = random_perturbation(&mut r, dim);
        let g = random_lattice(&mut r, dim);
        let lat = AttackLattice::new(&g, &set, &samp).unwrap();
        let ideal = lat.ideal_loss(&f).unwrap().value;
        let fstar = lat.ideal_predictor(&f).unwrap();
        prop_assert!((lat.adversarial_loss(&f, &fstar).unwrap().value - ideal).abs() <= EXACT);
        for _ in 0..8 {
            let p = random_table(&mut r, lat.perturbed());
            let loss = lat.adversarial_loss(&f, &p).unwrap().value;
            prop_assert!(loss + EXACT >= ideal);
            if set.contains_zero() {
                prop_assert!(loss + EXACT >= standard_loss(&f, &p, &g).unwrap().value);
            }
        }
    }

    #[test]
    fn plug_in_upper_bound_holds_for_any_base(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let (set, samp) = random_perturbation(&mut r, dim);
        let g = random_lattice(&mut r, dim);
        let lat = AttackLattice::new(&g, &set, &samp).unwrap();
        let base = random_table(&mut r, lat.perturbed());
        let pi = lat.plug_in(&base).unwrap();
        let loss = lat.adversarial_loss(&f, &pi).unwrap().value;
        let s = standard_loss(&f, &base, &g).unwrap().value;
        let ideal = lat.ideal_loss(&f).unwrap().value;
        prop_assert!(loss <= s + 3.0 * ideal + EXACT, "{loss} > {s} + 3*{ideal}");
        prop_assert!(loss + EXACT >= ideal);
        if set.contains_zero() {
            prop_assert!(loss + EXACT >= standard_loss(&f, &pi, &g).unwrap().value);
        }
    }

    #[test]
    fn losses_grow_with_nested_samples(seed in any::<u64>(), dim in 1usize..=2, k in 1usize..5) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let g = random_lattice(&mut r, dim);
        let pts = lattice_points(&mut r, dim, g.max_spacing(), k + 3);
        let set = PerturbationSet::finite(pts.clone()).unwrap();
        let small = AttackLattice::new(&g, &set, &PerturbationSample::from_points(pts[..k].to_vec(), 2).unwrap()).unwrap();
        let big = AttackLattice::new(&g, &set, &PerturbationSample::from_points(pts, 2).unwrap()).unwrap();
        prop_assert!(small.ideal_loss(&f).unwrap().value <= big.ideal_loss(&f).unwrap().value + EXACT);
        let p = FittedPredictor::exact(&random_piecewise_linear(&mut r, dim));
        prop_assert!(small.adversarial_loss(&f, &p).unwrap().value <= big.adversarial_loss(&f, &p).unwrap().value + EXACT);
    }

    #[test]
    fn ideal_loss_obeys_lipschitz_bound(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let lip = match f.spec() {
            SmoothnessSpec::Isotropic { lipschitz, .. } => *lipschitz,
            SmoothnessSpec::Anisotropic { .. } => unreachable!(),
        };
        let (set, samp) = random_perturbation(&mut r, dim);
        let g = random_lattice(&mut r, dim);
        let ideal = AttackLattice::new(&g, &set, &samp).unwrap().ideal_loss(&f).unwrap().value;
        let slack = lip * g.spacing().iter().map(|h| h * h).sum::<f64>().sqrt();
        prop_assert!(ideal <= lip * set.diameter(&samp) / 2.0 + slack + EXACT);
    }

    #[test]
    fn shifting_the_target_shifts_the_ideal_predictor(seed in any::<u64>(), dim in 1usize..=2, c in -3.0f64..3.0) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let fc = f.shifted(c);
        let (set, samp) = random_perturbation(&mut r, dim);
        let lat = AttackLattice::new(&random_lattice(&mut r, dim), &set, &samp).unwrap();
        let a = lat.ideal_predictor(&f).unwrap().values_on(lat.perturbed());
        let b = lat.ideal_predictor(&fc).unwrap().values_on(lat.perturbed());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u + c - v).abs() <= 1e-9);
        }
        let l0 = lat.ideal_loss(&f).unwrap().value;
        let l1 = lat.ideal_loss(&fc).unwrap().value;
        prop_assert!((l0 - l1).abs() <= 1e-9);
    }

    #[test]
    fn refining_the_lattice_never_lowers_losses(seed in any::<u64>(), dim in 1usize..=2, m in 5usize..12) {
        let mut r = rng(seed);
        let f = random_piecewise_linear(&mut r, dim);
        let coarse = GridDomain::unit_cube(dim, m).unwrap();
        let fine = GridDomain::unit_cube(dim, 2 * m - 1).unwrap();
        let pts = lattice_points(&mut r, dim, coarse.max_spacing(), 4);
        let set = PerturbationSet::finite(pts.clone()).unwrap();
        let samp = PerturbationSample::from_points(pts, 2).unwrap();
        let lc = AttackLattice::new(&coarse, &set, &samp).unwrap();
        let lf = AttackLattice::new(&fine, &set, &samp).unwrap();
        prop_assert!(lc.ideal_loss(&f).unwrap().value <= lf.ideal_loss(&f).unwrap().value + EXACT);
        let p = FittedPredictor::exact(&random_piecewise_linear(&mut r, dim));
        prop_assert!(lc.adversarial_loss(&f, &p).unwrap().value <= lf.adversarial_loss(&f, &p).unwrap().value + EXACT);
        prop_assert!(standard_loss(&f, &p, &coarse).unwrap().value <= standard_loss(&f, &p, &fine).unwrap().value + EXACT);
    }

    #[test]
    fn local_polynomials_reproduce_polynomials(seed in any::<u64>(), degree in 0usize..=2) {
        let mut r = rng(seed);
        let coef: Vec<f64> = (0..=degree).map(|_| r.random_range(-2.0..2.0)).collect();
        let poly = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let xs: Vec<Vec<f64>> = (0..300).map(|_| vec![r.random::<f64>()]).collect();
        let ys = xs.iter().map(|x| poly(x[0])).collect();
        let data = Dataset::from_rows(xs, ys).unwrap();
        let g = GridDomain::unit_cube(1, 33).unwrap();
        let fit = fit_local_poly_degree(&data, degree, 0.15, &g).unwrap();
        let want: Vec<f64> = g.points().map(|x| poly(x[0])).collect();
        prop_assert!(sup_diff(&fit.values_on(&g), &want) <= 1e-8);
    }

    #[test]
    fn local_linear_reproduces_planes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-1.0..1.0)];
        let xs: Vec<Vec<f64>> = (0..600).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let ys = xs.iter().map(|x| w[0] * x[0] + w[1] * x[1] + w[2]).collect();
        let data = Dataset::from_rows(xs, ys).unwrap();
        let g = GridDomain::unit_cube(2, 9).unwrap();
        let fit = fit_local_poly_degree(&data, 1, 0.2, &g).unwrap();
        let want: Vec<f64> = g.points().map(|x| w[0] * x[0] + w[1] * x[1] + w[2]).collect();
        prop_assert!(sup_diff(&fit.values_on(&g), &want) <= 1e-8);
    }

    #[test]
    fn kernel_fit_is_a_convex_combination(seed in any::<u64>(), n in 20usize..200) {
        let spec = SmoothnessSpec::anisotropic(vec![1.0, 0.5], vec![1.0, 1.0]).unwrap();
        let f = RegressionFunction::new("bumpy", spec.clone(), |x: &[f64]| (7.0 * x[0]).sin() + x[1].sqrt());
        let data = generate(&f, n, 0.3, seed).unwrap();
        let g = GridDomain::unit_cube(2, 9).unwrap();
        let fit = fit_aniso_kernel(&data, &spec, &[0.1, 0.2], &g).unwrap();
        let lo = data.ys().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.ys().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in fit.values_on(&g) {
            prop_assert!(lo - EXACT <= v && v <= hi + EXACT);
        }
    }

    #[test]
    fn data_generation_is_deterministic(seed in any::<u64>(), n in 1usize..100) {
        let f = random_piecewise_linear(&mut rng(seed), 2);
        let a = generate(&f, n, 0.2, seed).unwrap();
        let b = generate(&f, n, 0.2, seed).unwrap();
        prop_assert_eq!(a.ys(), b.ys());
        for i in 0..n {
            prop_assert_eq!(a.x(i), b.x(i));
        }
    }
}
