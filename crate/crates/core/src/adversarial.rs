//! Adversarial sup-norm losses, the ideal adversarial loss and predictor,
//! and the plug-in (midpoint) robustification of a base predictor.
//!
//! All suprema are maxima over a base lattice `X` and the inflated lattice
//! `X′ = {k + o}` built from lattice-resolved perturbation offsets `o`, so
//! both loss orders range over exactly the same `(x, x′)` pairs.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::estimators::{FittedPredictor, Method};
use crate::functions::RegressionFunction;
pub use crate::grid::GridDomain;
use crate::perturbation::{LatticeOffsets, PerturbationSample, PerturbationSet};
use crate::scalar::Scalar;

/// A maximised loss together with its maximiser.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport<T: Scalar> {
    pub value: T,
    pub argmax_x: Vec<T>,
    pub argmax_delta: Vec<T>,
    /// Largest lattice step of the base lattice.
    pub grid_spacing: T,
}

/// Base lattice, resolved perturbation offsets and the inflated lattice.
///
/// Building one is the expensive part of every evaluation; experiments reuse
/// it across replicates.
#[derive(Debug, Clone)]
pub struct AttackLattice<T: Scalar> {
    domain: GridDomain<T>,
    offsets: LatticeOffsets<T>,
    inflated: GridDomain<T>,
    /// For each point of `X′`, positions in `X` of `x′ − o` per offset
    /// (`usize::MAX` when outside), flattened `|X′| × |O|`.
    preimages: Vec<usize>,
}

const OUTSIDE: usize = usize::MAX;

/// Running maximum with first-index tie breaking.
#[derive(Clone, Copy)]
struct Best<T> {
    value: T,
    outer: usize,
    inner: usize,
}

impl<T: Scalar> Best<T> {
    fn none() -> Self {
        Self {
            value: T::neg_infinity(),
            outer: usize::MAX,
            inner: usize::MAX,
        }
    }

    fn pick(a: Self, b: Self) -> Self {
        if b.value > a.value || (b.value == a.value && (b.outer, b.inner) < (a.outer, a.inner)) {
            b
        } else {
            a
        }
    }
}

impl<T: Scalar> AttackLattice<T> {
    pub fn new(
        domain: &GridDomain<T>,
        set: &PerturbationSet<T>,
        samp: &PerturbationSample<T>,
    ) -> Result<Self> {
        let offsets = LatticeOffsets::resolve(set, samp, domain)?;
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("perturbation sample is empty".into()));
        }
        let inflated = offsets.inflate(domain);
        let dim = domain.dim();
        let m = offsets.len();
        let preimages: Vec<usize> = (0..inflated.len())
            .into_par_iter()
            .flat_map_iter(|j| {
                let xp = inflated.index_at(j).to_vec();
                let mut idx = vec![0i64; dim];
                (0..m)
                    .map(|o| {
                        for (a, (&c, &s)) in xp.iter().zip(offsets.offset(o)).enumerate() {
                            idx[a] = c - s;
                        }
                        domain.position(&idx).unwrap_or(OUTSIDE)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            domain: domain.clone(),
            offsets,
            inflated,
            preimages,
        })
    }

    /// The base lattice `X`.
    pub fn domain(&self) -> &GridDomain<T> {
        &self.domain
    }

    /// The inflated lattice `X′`.
    pub fn perturbed(&self) -> &GridDomain<T> {
        &self.inflated
    }

    pub fn offsets(&self) -> &LatticeOffsets<T> {
        &self.offsets
    }

    fn grid_spacing(&self) -> T {
        self.domain.max_spacing()
    }

    fn preimage(&self, j: usize, o: usize) -> Option<usize> {
        match self.preimages[j * self.offsets.len() + o] {
            OUTSIDE => None,
            p => Some(p),
        }
    }

    fn empty_at(&self, j: usize) -> Error {
        Error::EmptyNeighborhood {
            point: self.inflated.point(j).iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// `f` on `X`, in lattice order.
    pub fn function_values(&self, f: &RegressionFunction<T>) -> Vec<T> {
        (0..self.domain.len())
            .into_par_iter()
            .map(|i| f.eval(&self.domain.point(i)))
            .collect()
    }

    /// `max_x max_δ |f(x) − f̂(x + δ)|`, outer loop over `X`.
    pub fn adversarial_loss(&self, f: &RegressionFunction<T>, p: &FittedPredictor<T>) -> Result<LossReport<T>> {
        self.check(f.dim(), p.dim())?;
        let fx = self.function_values(f);
        let px = p.values_on(&self.inflated);
        Ok(self.loss_from_values(&fx, &px))
    }

    /// Outer-first loss from `f` on `X` and `f̂` on `X′`.
    pub fn loss_from_values(&self, fx: &[T], px: &[T]) -> LossReport<T> {
        let dim = self.domain.dim();
        let m = self.offsets.len();
        let best = (0..self.domain.len())
            .into_par_iter()
            .map(|k| {
                let base = self.domain.index_at(k);
                let mut idx = vec![0i64; dim];
                let mut best = Best::none();
                for o in 0..m {
                    for (a, (&c, &s)) in base.iter().zip(self.offsets.offset(o)).enumerate() {
                        idx[a] = c + s;
                    }
                    let j = self
                        .inflated
                        .position(&idx)
                        .expect("inflated lattice holds every shifted point");
                    let v = (fx[k] - px[j]).abs();
                    if v > best.value {
                        best = Best {
                            value: v,
                            outer: k,
                            inner: o,
                        };
                    }
                }
                best
            })
            .reduce(Best::none, Best::pick);
        LossReport {
            value: best.value,
            argmax_x: self.domain.point(best.outer),
            argmax_delta: self.offsets.delta(best.inner).to_vec(),
            grid_spacing: self.grid_spacing(),
        }
    }

    /// `max_{x′} max_{x ∈ (x′ − Δ) ∩ X} |f(x) − f̂(x′)|`, outer loop over `X′`.
    pub fn adversarial_loss_swapped(
        &self,
        f: &RegressionFunction<T>,
        p: &FittedPredictor<T>,
    ) -> Result<LossReport<T>> {
        self.check(f.dim(), p.dim())?;
        let fx = self.function_values(f);
        let px = p.values_on(&self.inflated);
        let m = self.offsets.len();
        let per_point: Vec<Option<(Best<T>, usize)>> = (0..self.inflated.len())
            .into_par_iter()
            .map(|j| {
                let mut best = Best::none();
                let mut x_at = usize::MAX;
                let mut any = false;
                for o in 0..m {
                    if let Some(k) = self.preimage(j, o) {
                        any = true;
                        let v = (fx[k] - px[j]).abs();
                        if v > best.value {
                            best = Best {
                                value: v,
                                outer: j,
                                inner: o,
                            };
                            x_at = k;
                        }
                    }
                }
                any.then_some((best, x_at))
            })
            .collect();
        let mut best = (Best::none(), usize::MAX);
        for (j, entry) in per_point.into_iter().enumerate() {
            let Some(e) = entry else {
                return Err(self.empty_at(j));
            };
            if e.0.value > best.0.value {
                best = e;
            }
        }
        Ok(LossReport {
            value: best.0.value,
            argmax_x: self.domain.point(best.1),
            argmax_delta: self.offsets.delta(best.0.inner).to_vec(),
            grid_spacing: self.grid_spacing(),
        })
    }

    /// Midpoint of the max and min of `values` (given on `X`) over every
    /// neighbourhood, tabulated on `X′`, plus the half-range report.
    fn midpoints(&self, values: &[T]) -> Result<(Vec<T>, Best<T>, Vec<usize>)> {
        let m = self.offsets.len();
        let two = T::lit(2.0);
        let rows: Vec<Option<(T, T, usize)>> = (0..self.inflated.len())
            .into_par_iter()
            .map(|j| {
                let mut hi = (T::neg_infinity(), usize::MAX, usize::MAX);
                let mut lo = (T::infinity(), usize::MAX, usize::MAX);
                for o in 0..m {
                    if let Some(k) = self.preimage(j, o) {
                        if values[k] > hi.0 {
                            hi = (values[k], k, o);
                        }
                        if values[k] < lo.0 {
                            lo = (values[k], k, o);
                        }
                    }
                }
                if hi.1 == usize::MAX {
                    return None;
                }
                let mid = (hi.0 + lo.0) / two;
                let up = hi.0 - mid;
                let down = mid - lo.0;
                Some(if up >= down { (mid, up, hi.2) } else { (mid, down, lo.2) })
            })
            .collect();
        let mut mids = Vec::with_capacity(rows.len());
        let mut best = Best::none();
        let mut preimage = Vec::with_capacity(rows.len());
        for (j, row) in rows.into_iter().enumerate() {
            let Some((mid, half, o)) = row else {
                return Err(self.empty_at(j));
            };
            mids.push(mid);
            preimage.push(o);
            if half > best.value {
                best = Best {
                    value: half,
                    outer: j,
                    inner: o,
                };
            }
        }
        Ok((mids, best, preimage))
    }

    /// `½ max_{x′} (max − min of f over (x′ − Δ) ∩ X)`.
    ///
    /// The maximiser is reported as the neighbourhood point at which the ideal
    /// predictor's error is attained, with `δ = x′ − x`.
    pub fn ideal_loss(&self, f: &RegressionFunction<T>) -> Result<LossReport<T>> {
        check_dim(self.domain.dim(), f.dim())?;
        let fx = self.function_values(f);
        self.ideal_loss_from_values(&fx)
    }

    pub fn ideal_loss_from_values(&self, fx: &[T]) -> Result<LossReport<T>> {
        let (_, best, _) = self.midpoints(fx)?;
        let k = self
            .preimage(best.outer, best.inner)
            .expect("maximising offset has a preimage");
        Ok(LossReport {
            value: best.value,
            argmax_x: self.domain.point(k),
            argmax_delta: self.offsets.delta(best.inner).to_vec(),
            grid_spacing: self.grid_spacing(),
        })
    }

    /// Ideal adversarial predictor, tabulated on `X′`.
    pub fn ideal_predictor(&self, f: &RegressionFunction<T>) -> Result<FittedPredictor<T>> {
        check_dim(self.domain.dim(), f.dim())?;
        let (mids, _, _) = self.midpoints(&self.function_values(f))?;
        FittedPredictor::from_table(
            self.inflated.clone(),
            mids,
            Method::Ideal {
                label: f.label().to_string(),
            },
            0,
        )
    }

    /// Plug-in robustification of `base`, tabulated on `X′`.
    pub fn plug_in(&self, base: &FittedPredictor<T>) -> Result<FittedPredictor<T>> {
        check_dim(self.domain.dim(), base.dim())?;
        let (mids, _, _) = self.midpoints(&base.values_on(&self.domain))?;
        FittedPredictor::from_table(
            self.inflated.clone(),
            mids,
            Method::PlugIn {
                base: Box::new(base.method().clone()),
            },
            base.training_n(),
        )
    }

    fn check(&self, f_dim: usize, p_dim: usize) -> Result<()> {
        check_dim(self.domain.dim(), f_dim)?;
        check_dim(self.domain.dim(), p_dim)
    }
}

/// Outer-first adversarial sup-norm loss.
pub fn adversarial_loss<T: Scalar>(
    f: &RegressionFunction<T>,
    p: &FittedPredictor<T>,
    domain: &GridDomain<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
) -> Result<LossReport<T>> {
    AttackLattice::new(domain, set, samp)?.adversarial_loss(f, p)
}

/// Swapped-order adversarial loss; equal to [`adversarial_loss`].
pub fn adversarial_loss_swapped<T: Scalar>(
    f: &RegressionFunction<T>,
    p: &FittedPredictor<T>,
    domain: &GridDomain<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
) -> Result<LossReport<T>> {
    AttackLattice::new(domain, set, samp)?.adversarial_loss_swapped(f, p)
}

/// Unperturbed sup-norm loss `max_x |f(x) − f̂(x)|`.
pub fn standard_loss<T: Scalar>(
    f: &RegressionFunction<T>,
    p: &FittedPredictor<T>,
    domain: &GridDomain<T>,
) -> Result<LossReport<T>> {
    let set = PerturbationSet::singleton(domain.dim())?;
    let samp = set.sample(2)?;
    adversarial_loss(f, p, domain, &set, &samp)
}

pub fn ideal_loss<T: Scalar>(
    f: &RegressionFunction<T>,
    domain: &GridDomain<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
) -> Result<LossReport<T>> {
    AttackLattice::new(domain, set, samp)?.ideal_loss(f)
}

pub fn ideal_predictor<T: Scalar>(
    f: &RegressionFunction<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
    domain: &GridDomain<T>,
) -> Result<FittedPredictor<T>> {
    AttackLattice::new(domain, set, samp)?.ideal_predictor(f)
}

pub fn plug_in<T: Scalar>(
    base: &FittedPredictor<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
    domain: &GridDomain<T>,
) -> Result<FittedPredictor<T>> {
    AttackLattice::new(domain, set, samp)?.plug_in(base)
}
