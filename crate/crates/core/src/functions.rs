//! Regression functions with Hölder-class metadata, the lower-bound witness
//! functions, and the random-design data generator `Y = f(X) + ξ`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::scalar::{euclidean, Scalar};

/// Tolerance on the Hölder inequality before a pair counts as a violation.
pub const HOLDER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothnessSpec<T: Scalar> {
    /// `(β, L)`-smooth in every direction.
    Isotropic { beta: T, lipschitz: T, dim: usize },
    /// `|f(x) − f(z)| ≤ Σ L_i |x_i − z_i|^{β_i}` with every `β_i ∈ (0, 1]`.
    Anisotropic { beta: Vec<T>, lipschitz: Vec<T> },
}

impl<T: Scalar> SmoothnessSpec<T> {
    pub fn isotropic(beta: T, lipschitz: T, dim: usize) -> Result<Self> {
        if !(beta > T::zero() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(lipschitz > T::zero() && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must be > 0, got {lipschitz}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self::Isotropic {
            beta,
            lipschitz,
            dim,
        })
    }

    pub fn anisotropic(beta: Vec<T>, lipschitz: Vec<T>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        check_dim(beta.len(), lipschitz.len())?;
        for (i, &b) in beta.iter().enumerate() {
            if !(b > T::zero() && b <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "anisotropic exponent beta[{i}] = {b} outside (0, 1]"
                )));
            }
        }
        for (i, &l) in lipschitz.iter().enumerate() {
            if !(l > T::zero() && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("L[{i}] = {l} must be > 0")));
            }
        }
        Ok(Self::Anisotropic { beta, lipschitz })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Isotropic { dim, .. } => *dim,
            Self::Anisotropic { beta, .. } => beta.len(),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, Self::Isotropic { .. })
    }

    /// Effective smoothness: `β` itself, or the harmonic mean `d / Σ 1/β_i`.
    pub fn beta_bar(&self) -> T {
        match self {
            Self::Isotropic { beta, .. } => *beta,
            Self::Anisotropic { beta, .. } => {
                T::from_count(beta.len()) / beta.iter().map(|b| b.recip()).sum::<T>()
            }
        }
    }

    /// Derivative order `k` in `β = k + α`, `α ∈ (0, 1]`.
    pub fn taylor_order(&self) -> usize {
        match self {
            Self::Isotropic { beta, .. } => (beta.ceil().to_usize().unwrap_or(1)).saturating_sub(1),
            Self::Anisotropic { .. } => 0,
        }
    }

    /// Hölder exponent `α = β − k` of the top derivative.
    pub fn holder_exponent(&self) -> T {
        match self {
            Self::Isotropic { beta, .. } => *beta - T::from_count(self.taylor_order()),
            Self::Anisotropic { .. } => T::one(),
        }
    }

    /// Local polynomial degree used by the base estimator: `⌊β⌋`.
    pub fn poly_degree(&self) -> usize {
        match self {
            Self::Isotropic { beta, .. } => beta.floor().to_usize().unwrap_or(0),
            Self::Anisotropic { .. } => 0,
        }
    }

    /// Right-hand side of the class inequality for the pair `(x, z)`.
    ///
    /// For isotropic `β > 1` only the zeroth-order consequence
    /// `|f(x) − f(z)| ≤ L ‖x − z‖` is available.
    pub fn increment_bound(&self, x: &[T], z: &[T]) -> T {
        match self {
            Self::Isotropic {
                beta, lipschitz, ..
            } => {
                let dist = euclidean(x, z);
                if *beta > T::one() {
                    *lipschitz * dist
                } else {
                    *lipschitz * dist.powf(*beta)
                }
            }
            Self::Anisotropic { beta, lipschitz } => x
                .iter()
                .zip(z)
                .zip(beta.iter().zip(lipschitz))
                .map(|((&a, &b), (&e, &l))| l * (a - b).abs().powf(e))
                .sum(),
        }
    }
}

type Evaluator<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Evaluable regression function on `[0,1]^d` with its smoothness class.
#[derive(Clone)]
pub struct RegressionFunction<T: Scalar> {
    evaluator: Evaluator<T>,
    spec: SmoothnessSpec<T>,
    label: String,
}

impl<T: Scalar> fmt::Debug for RegressionFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressionFunction")
            .field("label", &self.label)
            .field("spec", &self.spec)
            .finish()
    }
}

impl<T: Scalar> RegressionFunction<T> {
    pub fn new<F>(label: impl Into<String>, spec: SmoothnessSpec<T>, evaluator: F) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        Self {
            evaluator: Arc::new(evaluator),
            spec,
            label: label.into(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.evaluator)(x)
    }

    pub fn spec(&self) -> &SmoothnessSpec<T> {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Same function shifted by a constant.
    pub fn shifted(&self, c: T) -> Self {
        let inner = self.evaluator.clone();
        Self {
            evaluator: Arc::new(move |x| inner(x) + c),
            spec: self.spec.clone(),
            label: format!("{}+{}", self.label, c),
        }
    }
}

/// `f₁(x) = L exp(x₁ − 1)`: smooth witness for `β ≥ 1`.
pub fn witness_iso_smooth<T: Scalar>(lipschitz: T, beta: T, dim: usize) -> Result<RegressionFunction<T>> {
    if beta < T::one() {
        return Err(Error::InvalidParameter(format!(
            "smooth witness needs beta >= 1, got {beta}"
        )));
    }
    let spec = SmoothnessSpec::isotropic(beta, lipschitz, dim)?;
    Ok(RegressionFunction::new("f1", spec, move |x: &[T]| {
        lipschitz * (x[0] - T::one()).exp()
    }))
}

/// `f₂(x) = x₁^β`: rough witness for `0 < β < 1`.
pub fn witness_iso_rough<T: Scalar>(beta: T, dim: usize) -> Result<RegressionFunction<T>> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "rough witness needs 0 < beta < 1, got {beta}"
        )));
    }
    let spec = SmoothnessSpec::isotropic(beta, T::one(), dim)?;
    Ok(RegressionFunction::new("f2", spec, move |x: &[T]| {
        x[0].max(T::zero()).powf(beta)
    }))
}

/// `f₃(x) = L_j x_j^{β_j}` for the anisotropic class; `axis` is zero-based.
pub fn witness_aniso<T: Scalar>(spec: &SmoothnessSpec<T>, axis: usize) -> Result<RegressionFunction<T>> {
    let (beta, lipschitz) = match spec {
        SmoothnessSpec::Anisotropic { beta, lipschitz } => (beta[..].to_vec(), lipschitz.clone()),
        SmoothnessSpec::Isotropic { .. } => {
            return Err(Error::InvalidParameter(
                "anisotropic witness needs an anisotropic spec".into(),
            ))
        }
    };
    if axis >= beta.len() {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} out of range for dimension {}",
            beta.len()
        )));
    }
    let (b, l) = (beta[axis], lipschitz[axis]);
    Ok(RegressionFunction::new("f3", spec.clone(), move |x: &[T]| {
        l * x[axis].max(T::zero()).powf(b)
    }))
}

/// Axis whose attack term `r_i^{β_i}` is largest (first on ties).
pub fn dominant_axis<T: Scalar>(spec: &SmoothnessSpec<T>, ranges: &[T]) -> usize {
    let beta: Vec<T> = match spec {
        SmoothnessSpec::Anisotropic { beta, .. } => beta.clone(),
        SmoothnessSpec::Isotropic { beta, dim, .. } => vec![*beta; *dim],
    };
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, (&r, &b)) in ranges.iter().zip(&beta).enumerate() {
        let v = r.powf(b);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// `c + Σ a_i x_i`.
pub fn custom_linear<T: Scalar>(
    coefficients: Vec<T>,
    intercept: T,
    spec: SmoothnessSpec<T>,
) -> Result<RegressionFunction<T>> {
    check_dim(spec.dim(), coefficients.len())?;
    Ok(RegressionFunction::new("custom_linear", spec, move |x: &[T]| {
        intercept + coefficients.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>()
    }))
}

pub fn custom_constant<T: Scalar>(value: T, spec: SmoothnessSpec<T>) -> RegressionFunction<T> {
    RegressionFunction::new("custom_constant", spec, move |_: &[T]| value)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HolderCheck<T: Scalar> {
    Ok,
    /// First sampled pair breaking the class inequality; `gap` is the excess.
    Violation { x: Vec<T>, z: Vec<T>, gap: T },
}

impl<T: Scalar> HolderCheck<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok)
    }
}

/// Sampling check of the class inequality on `pairs` uniform random pairs.
pub fn holder_check<T: Scalar>(f: &RegressionFunction<T>, pairs: usize, seed: u64) -> HolderCheck<T> {
    let d = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = T::lit(HOLDER_TOLERANCE);
    let mut x = vec![T::zero(); d];
    let mut z = vec![T::zero(); d];
    for _ in 0..pairs {
        for v in x.iter_mut().chain(z.iter_mut()) {
            *v = T::lit(rng.random::<f64>());
        }
        let gap = (f.eval(&x) - f.eval(&z)).abs() - f.spec().increment_bound(&x, &z);
        if gap > tol {
            return HolderCheck::Violation {
                x: x.clone(),
                z: z.clone(),
                gap,
            };
        }
    }
    HolderCheck::Ok
}

/// Observations `(X_i, Y_i)` from the regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    dim: usize,
    xs: Vec<T>,
    ys: Vec<T>,
    noise_sd: T,
    seed: u64,
}

impl<T: Scalar> Dataset<T> {
    /// Dataset from explicit observations; `xs` holds one row per observation.
    pub fn from_rows(xs: Vec<Vec<T>>, ys: Vec<T>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidParameter("dataset needs at least one observation".into()));
        }
        check_dim(xs.len(), ys.len())?;
        let dim = xs[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let mut flat = Vec::with_capacity(xs.len() * dim);
        for row in &xs {
            check_dim(dim, row.len())?;
            flat.extend_from_slice(row);
        }
        Ok(Self {
            dim,
            xs: flat,
            ys,
            noise_sd: T::zero(),
            seed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> T {
        self.ys[i]
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn noise_sd(&self) -> T {
        self.noise_sd
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draw `n` observations with `X ~ U[0,1]^d` and `ξ ~ N(0, σ²)`.
pub fn generate<T: Scalar>(f: &RegressionFunction<T>, n: usize, sigma: T, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(f, n, sigma, seed, &mut rng)
}

/// Like [`generate`], drawing from a caller-provided stream; `seed` is recorded only.
pub fn generate_with<T: Scalar, R: Rng>(
    f: &RegressionFunction<T>,
    n: usize,
    sigma: T,
    seed: u64,
    rng: &mut R,
) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    if !(sigma >= T::zero() && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sd must be >= 0, got {sigma}")));
    }
    let d = f.dim();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    let mut x = vec![T::zero(); d];
    for _ in 0..n {
        for v in x.iter_mut() {
            *v = T::lit(rng.random::<f64>());
        }
        let xi: f64 = rng.sample(StandardNormal);
        ys.push(f.eval(&x) + sigma * T::lit(xi));
        xs.extend_from_slice(&x);
    }
    Ok(Dataset {
        dim: d,
        xs,
        ys,
        noise_sd: sigma,
        seed,
    })
}
