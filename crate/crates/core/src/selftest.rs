//! Invariant suites on fixed seeds, bundled for `advreg selftest`.
//!
//! The random instance generators are public so property tests can share them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversarial::AttackLattice;
use crate::error::Result;
use crate::estimators::{bandwidth_iso, fit_local_poly, FittedPredictor};
use crate::functions::{generate, witness_iso_rough, witness_iso_smooth, RegressionFunction, SmoothnessSpec};
use crate::grid::GridDomain;
use crate::perturbation::{PerturbationSample, PerturbationSet};

/// Exact-equality tolerance of the lattice identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Random continuous piecewise-linear function `c + Σ a_j |w_j·x − b_j|`.
pub fn random_piecewise_linear<R: Rng>(rng: &mut R, dim: usize) -> RegressionFunction<f64> {
    let terms = rng.random_range(1..=4);
    let c: f64 = rng.random_range(-1.0..1.0);
    let mut parts = Vec::with_capacity(terms);
    let mut lip = 0.0;
    for _ in 0..terms {
        let a: f64 = rng.random_range(-1.0..1.0);
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: f64 = rng.random_range(0.0..1.0);
        lip += a.abs() * w.iter().map(|v| v * v).sum::<f64>().sqrt();
        parts.push((a, w, b));
    }
    let spec = SmoothnessSpec::isotropic(1.0, lip.max(1e-9), dim).expect("valid class");
    RegressionFunction::new("piecewise_linear", spec, move |x: &[f64]| {
        c + parts
            .iter()
            .map(|(a, w, b)| a * (w.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - b).abs())
            .sum::<f64>()
    })
}

/// Random perturbation set of any kind, with a matching sample.
pub fn random_perturbation<R: Rng>(rng: &mut R, dim: usize) -> (PerturbationSet<f64>, PerturbationSample<f64>) {
    let q: f64 = rng.random_range(0.0..0.3);
    let coord = |rng: &mut R| rng.random_range(-0.3..0.3);
    let set = match rng.random_range(0..6) {
        0 => {
            let p = [0.5, 1.0, 2.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
            PerturbationSet::lp_ball(dim, p, q)
        }
        1 => {
            let p = [1.0, 2.0, f64::INFINITY][rng.random_range(0..3)];
            PerturbationSet::sparse_lp_ball(dim, p, q, rng.random_range(0..=dim))
        }
        2 => PerturbationSet::boxed((0..dim).map(|_| rng.random_range(0.0..0.3)).collect()),
        3 => {
            let start = (0..dim).map(|_| coord(rng)).collect();
            let end = (0..dim).map(|_| coord(rng)).collect();
            PerturbationSet::segment(start, end)
        }
        4 => {
            let mut pts = vec![vec![0.0; dim]];
            for _ in 0..rng.random_range(0..5) {
                pts.push((0..dim).map(|_| coord(rng)).collect());
            }
            PerturbationSet::finite(pts)
        }
        _ => PerturbationSet::singleton(dim),
    }
    .expect("generated parameters are valid");
    let samp = set.sample(rng.random_range(2..8)).expect("resolution >= 2");
    (set, samp)
}

/// Small random unit-cube lattice for dimension 1 or 2.
pub fn random_lattice<R: Rng>(rng: &mut R, dim: usize) -> GridDomain<f64> {
    let m = if dim == 1 {
        rng.random_range(9..=33)
    } else {
        rng.random_range(5..=13)
    };
    GridDomain::unit_cube(dim, m).expect("valid lattice")
}

/// Uniform random values in `[-1, 1]` tabulated on `domain`.
pub fn random_table<R: Rng>(rng: &mut R, domain: &GridDomain<f64>) -> FittedPredictor<f64> {
    let values = (0..domain.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    FittedPredictor::tabulated(domain.clone(), values).expect("lengths match")
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Outer-first and swapped losses agree on random instances.
pub fn swap_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("swap");
    for i in 0..instances {
        let dim = 1 + i % 2;
        let f = random_piecewise_linear(&mut rng, dim);
        let (set, samp) = random_perturbation(&mut rng, dim);
        let g = random_lattice(&mut rng, dim);
        let lat = AttackLattice::new(&g, &set, &samp)?;
        let p = random_table(&mut rng, lat.perturbed());
        let a = lat.adversarial_loss(&f, &p)?.value;
        let b = lat.adversarial_loss_swapped(&f, &p)?.value;
        rep.check((a - b).abs() <= IDENTITY_TOLERANCE, || {
            format!("instance {i}: outer-first {a} vs swapped {b} ({set:?})")
        });
    }
    Ok(rep)
}

/// The ideal predictor attains the ideal loss and beats perturbed candidates.
pub fn optimality_suite(instances: usize, candidates: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("optimality");
    for i in 0..instances {
        let dim = 1 + i % 2;
        let f = random_piecewise_linear(&mut rng, dim);
        let (set, samp) = random_perturbation(&mut rng, dim);
        let g = random_lattice(&mut rng, dim);
        let lat = AttackLattice::new(&g, &set, &samp)?;
        let ideal = lat.ideal_loss(&f)?.value;
        let fstar = lat.ideal_predictor(&f)?;
        let attained = lat.adversarial_loss(&f, &fstar)?.value;
        rep.check((attained - ideal).abs() <= IDENTITY_TOLERANCE, || {
            format!("instance {i}: loss of ideal predictor {attained} vs ideal loss {ideal}")
        });
        let base = fstar.values_on(lat.perturbed());
        for c in 0..candidates {
            let eps: f64 = rng.random_range(0.0..0.2);
            let vals = base.iter().map(|v| v + eps * rng.random_range(-1.0..1.0)).collect();
            let cand = FittedPredictor::tabulated(lat.perturbed().clone(), vals)?;
            let other = lat.adversarial_loss(&f, &cand)?.value;
            rep.check(attained <= other + IDENTITY_TOLERANCE, || {
                format!("instance {i}, candidate {c}: {other} < ideal {attained}")
            });
        }
    }
    Ok(rep)
}

/// Pathwise plug-in sandwich on Monte Carlo fits of the witnesses.
pub fn sandwich_suite(fits: usize, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("sandwich");
    let g = GridDomain::unit_cube(1, 257)?;
    let witnesses = [witness_iso_smooth(1.0, 1.0, 1)?, witness_iso_rough(0.5, 1)?];
    let qs = [0.0, 0.02, 0.1];
    let lats = qs
        .iter()
        .map(|&q| {
            let set = if q == 0.0 {
                PerturbationSet::singleton(1)?
            } else {
                PerturbationSet::lp_ball(1, f64::INFINITY, q)?
            };
            let samp = set.sample((2 * (q * 256.0).ceil() as usize + 1).max(2))?;
            AttackLattice::new(&g, &set, &samp)
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 0..fits {
        let f = &witnesses[i % 2];
        let n = if i % 4 < 2 { 256 } else { 1024 };
        let data = generate(f, n, 0.2, seed.wrapping_add(i as u64))?;
        let h = bandwidth_iso(n as f64, f.spec().beta_bar(), 1, 1.0)?;
        let base = fit_local_poly(&data, f.spec(), h, &g)?;
        let fx = lats[0].function_values(f);
        let bx = base.values_on(&g);
        let s_base = sup(&fx, &bx);
        for (lat, q) in lats.iter().zip(qs) {
            let ideal = lat.ideal_loss_from_values(&fx)?.value;
            let pi = lat.plug_in(&base)?;
            let loss = lat.loss_from_values(&fx, &pi.values_on(lat.perturbed())).value;
            let s_pi = sup(&fx, &pi.values_on(&g));
            rep.check(s_pi.max(ideal) <= loss && loss <= s_base + 3.0 * ideal, || {
                format!("fit {i}, q={q}: max({s_pi}, {ideal}) <= {loss} <= {s_base} + 3*{ideal} fails")
            });
        }
    }
    Ok(rep)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// All suites at their default sizes and seeds.
pub fn run_all() -> Result<Vec<SuiteReport>> {
    Ok(vec![
        swap_suite(200, 0x51)?,
        optimality_suite(40, 10, 0x52)?,
        sandwich_suite(20, 0x53)?,
    ])
}
