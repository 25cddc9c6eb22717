//! Base (non-adversarial) estimators: local polynomials for the isotropic
//! class and a per-coordinate-bandwidth boxcar kernel for the anisotropic one.
//!
//! Every fitted predictor is tabulated on an evaluation lattice at fit time,
//! so data sparsity surfaces as an error once, and `predict` is total.

mod design;
mod kernel;
mod local_poly;
pub(crate) mod solve;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::functions::{Dataset, RegressionFunction, SmoothnessSpec};
use crate::grid::GridDomain;
use crate::scalar::Scalar;
use design::SortedDesign;
use kernel::KernelModel;
use local_poly::LocalPolyModel;

pub(crate) const WIDENING_FACTOR: f64 = 1.5;
pub(crate) const MAX_WIDENINGS: usize = 5;

/// How a predictor was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Method<T: Scalar> {
    LocalPoly { degree: usize, bandwidth: T },
    AnisoKernel { bandwidths: Vec<T> },
    Constant(T),
    Exact { label: String },
    /// Midpoint predictor built from the true function.
    Ideal { label: String },
    /// Midpoint transform of a base predictor.
    PlugIn { base: Box<Method<T>> },
    Tabulated,
}

#[derive(Debug)]
pub(crate) struct Table<T: Scalar> {
    pub(crate) domain: GridDomain<T>,
    pub(crate) values: Vec<T>,
}

impl<T: Scalar> Table<T> {
    fn lookup(&self, x: &[T]) -> T {
        self.values[self.domain.nearest(x)]
    }
}

#[derive(Clone)]
enum Engine<T: Scalar> {
    Constant(T),
    Exact(RegressionFunction<T>),
    Local(Arc<LocalPolyModel<T>>, Arc<Table<T>>),
    Kernel(Arc<KernelModel<T>>, Arc<Table<T>>),
    Table(Arc<Table<T>>),
}

/// Immutable, shareable predictor `x ↦ f̂(x)`.
#[derive(Clone)]
pub struct FittedPredictor<T: Scalar> {
    method: Method<T>,
    training_n: usize,
    dim: usize,
    engine: Engine<T>,
}

impl<T: Scalar> std::fmt::Debug for FittedPredictor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedPredictor")
            .field("method", &self.method)
            .field("training_n", &self.training_n)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> FittedPredictor<T> {
    pub fn constant(dim: usize, c: T) -> Self {
        Self {
            method: Method::Constant(c),
            training_n: 0,
            dim,
            engine: Engine::Constant(c),
        }
    }

    /// The true function used as its own predictor.
    pub fn exact(f: &RegressionFunction<T>) -> Self {
        Self {
            method: Method::Exact {
                label: f.label().to_string(),
            },
            training_n: 0,
            dim: f.dim(),
            engine: Engine::Exact(f.clone()),
        }
    }

    /// Predictor given by values on a lattice, with nearest-point lookup.
    pub fn tabulated(domain: GridDomain<T>, values: Vec<T>) -> Result<Self> {
        Self::from_table(domain, values, Method::Tabulated, 0)
    }

    pub(crate) fn from_table(
        domain: GridDomain<T>,
        values: Vec<T>,
        method: Method<T>,
        training_n: usize,
    ) -> Result<Self> {
        check_dim(domain.len(), values.len())?;
        Ok(Self {
            method,
            training_n,
            dim: domain.dim(),
            engine: Engine::Table(Arc::new(Table { domain, values })),
        })
    }

    pub fn method(&self) -> &Method<T> {
        &self.method
    }

    pub fn training_n(&self) -> usize {
        self.training_n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `x`. Non-tabulated predictors clamp `x` to `[0,1]^d`;
    /// tabulated ones use the nearest point of their lattice.
    pub fn predict(&self, x: &[T]) -> T {
        match &self.engine {
            Engine::Constant(c) => *c,
            Engine::Exact(f) => f.eval(&clamp_unit(x)),
            Engine::Local(m, t) => {
                let x = clamp_unit(x);
                m.eval(&x).unwrap_or_else(|_| t.lookup(&x))
            }
            Engine::Kernel(m, t) => {
                let x = clamp_unit(x);
                m.eval(&x).unwrap_or_else(|_| t.lookup(&x))
            }
            Engine::Table(t) => t.lookup(x),
        }
    }

    /// Values at every point of `domain`, in lattice order.
    pub fn values_on(&self, domain: &GridDomain<T>) -> Vec<T> {
        match &self.engine {
            Engine::Constant(c) => vec![*c; domain.len()],
            Engine::Local(_, t) | Engine::Kernel(_, t) | Engine::Table(t) if t.domain == *domain => {
                t.values.clone()
            }
            Engine::Table(t) if t.domain.shares_index_system(domain) => (0..domain.len())
                .map(|i| match t.domain.position(domain.index_at(i)) {
                    Some(p) => t.values[p],
                    None => t.lookup(&domain.point(i)),
                })
                .collect(),
            _ => (0..domain.len())
                .into_par_iter()
                .map(|i| self.predict(&domain.point(i)))
                .collect(),
        }
    }

    /// Lattice the predictor is tabulated on, if any.
    pub fn table_domain(&self) -> Option<&GridDomain<T>> {
        match &self.engine {
            Engine::Local(_, t) | Engine::Kernel(_, t) | Engine::Table(t) => Some(&t.domain),
            _ => None,
        }
    }
}

fn clamp_unit<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| v.max(T::zero()).min(T::one())).collect()
}

/// `c_h (log n / n)^{1/(2β + d)}`. `n` is real so that non-integer sizes can
/// be probed; it must be at least 2.
pub fn bandwidth_iso<T: Scalar>(n: T, beta: T, dim: usize, c_h: T) -> Result<T> {
    check_bandwidth_args(n, c_h)?;
    if !(beta > T::zero()) || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth needs beta > 0 and d >= 1, got beta={beta}, d={dim}"
        )));
    }
    let two = T::lit(2.0);
    Ok(c_h * (n.ln() / n).powf((two * beta + T::from_count(dim)).recip()))
}

/// `h_i = c_h (log n / n)^{β̄ / (β_i (2β̄ + d))}`, so every `h_i^{β_i}` is the same.
pub fn bandwidth_aniso<T: Scalar>(n: T, spec: &SmoothnessSpec<T>, c_h: T) -> Result<Vec<T>> {
    check_bandwidth_args(n, c_h)?;
    let SmoothnessSpec::Anisotropic { beta, .. } = spec else {
        return Err(Error::InvalidParameter(
            "per-coordinate bandwidths need an anisotropic class".into(),
        ));
    };
    let bb = spec.beta_bar();
    let d = T::from_count(beta.len());
    let base = n.ln() / n;
    Ok(beta
        .iter()
        .map(|&b| c_h * base.powf(bb / (b * (T::lit(2.0) * bb + d))))
        .collect())
}

fn check_bandwidth_args<T: Scalar>(n: T, c_h: T) -> Result<()> {
    if !(n >= T::lit(2.0)) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth needs n >= 2, got {n}")));
    }
    if !(c_h > T::zero()) || !c_h.is_finite() {
        return Err(Error::InvalidParameter(format!("c_h must be > 0, got {c_h}")));
    }
    Ok(())
}

/// Local polynomial fit of degree `⌊β⌋` with bandwidth `h`, tabulated on `lattice`.
pub fn fit_local_poly<T: Scalar>(
    data: &Dataset<T>,
    spec: &SmoothnessSpec<T>,
    h: T,
    lattice: &GridDomain<T>,
) -> Result<FittedPredictor<T>> {
    if !spec.is_isotropic() {
        return Err(Error::InvalidParameter(
            "local polynomial fit needs an isotropic class".into(),
        ));
    }
    check_dim(spec.dim(), data.dim())?;
    fit_local_poly_degree(data, spec.poly_degree(), h, lattice)
}

/// Local polynomial fit with an explicit degree.
pub fn fit_local_poly_degree<T: Scalar>(
    data: &Dataset<T>,
    degree: usize,
    h: T,
    lattice: &GridDomain<T>,
) -> Result<FittedPredictor<T>> {
    check_dim(data.dim(), lattice.dim())?;
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {h}")));
    }
    let model = LocalPolyModel::new(SortedDesign::new(data), degree, h);
    let values = tabulate(lattice, |x| model.eval(x))?;
    let table = Arc::new(Table {
        domain: lattice.clone(),
        values,
    });
    Ok(FittedPredictor {
        method: Method::LocalPoly {
            degree: model.degree(),
            bandwidth: h,
        },
        training_n: data.n(),
        dim: data.dim(),
        engine: Engine::Local(Arc::new(model), table),
    })
}

/// Nadaraya–Watson fit with product boxcar kernel, tabulated on `lattice`.
pub fn fit_aniso_kernel<T: Scalar>(
    data: &Dataset<T>,
    spec: &SmoothnessSpec<T>,
    h: &[T],
    lattice: &GridDomain<T>,
) -> Result<FittedPredictor<T>> {
    if spec.is_isotropic() {
        return Err(Error::InvalidParameter(
            "per-coordinate kernel fit needs an anisotropic class".into(),
        ));
    }
    check_dim(spec.dim(), data.dim())?;
    check_dim(data.dim(), h.len())?;
    check_dim(data.dim(), lattice.dim())?;
    if let Some(bad) = h.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {bad}")));
    }
    let model = KernelModel::new(SortedDesign::new(data), h.to_vec());
    let values = tabulate(lattice, |x| model.eval(x))?;
    let table = Arc::new(Table {
        domain: lattice.clone(),
        values,
    });
    Ok(FittedPredictor {
        method: Method::AnisoKernel {
            bandwidths: h.to_vec(),
        },
        training_n: data.n(),
        dim: data.dim(),
        engine: Engine::Kernel(Arc::new(model), table),
    })
}

fn tabulate<T: Scalar, F>(lattice: &GridDomain<T>, eval: F) -> Result<Vec<T>>
where
    F: Fn(&[T]) -> Result<T> + Sync,
{
    (0..lattice.len())
        .into_par_iter()
        .map(|i| eval(&lattice.point(i)))
        .collect()
}
