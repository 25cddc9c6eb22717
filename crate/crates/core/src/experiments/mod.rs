//! Monte Carlo experiments: replicate risks, log-log rate fits, perturbation
//! radius sweeps and the isotropic/anisotropic comparison.

pub mod config;

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adversarial::{AttackLattice, LossReport};
use crate::error::{Error, Result};
use crate::estimators::{
    bandwidth_aniso, bandwidth_iso, fit_aniso_kernel, fit_local_poly_degree, FittedPredictor,
};
use crate::functions::{
    custom_constant, custom_linear, generate_with, witness_aniso, witness_iso_rough,
    witness_iso_smooth, Dataset, RegressionFunction, SmoothnessSpec,
};
use crate::grid::GridDomain;
use crate::perturbation::PerturbationSet;
use config::{ConfigFile, OneOrMany};

/// Column header of replicate-level CSV output.
pub const RECORD_HEADER: [&str; 7] = ["n", "replicate", "seed", "loss", "standard_loss", "ideal_loss", "q"];

const RESOLUTION_CAP: [usize; 3] = [4097, 257, 65];

/// Shape of the attack; every geometry is scaled by `q_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackShape {
    Singleton,
    LpBall { p: f64 },
    SparseLpBall { p: f64, s: usize },
    Box { half_widths: Vec<f64> },
    Segment { start: Vec<f64>, end: Vec<f64> },
    Finite { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub enum BaseMethod {
    LocalPoly { c_h: f64, degree: Option<usize> },
    AnisoKernel { c_h: f64 },
    Exact,
    Constant(f64),
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub function: RegressionFunction<f64>,
    /// Coordinate carried by the anisotropic witness and attacked in the comparison.
    pub axis: usize,
    pub shape: AttackShape,
    /// Scale at `n = 1`; `q_n = q · n^{−decay}`.
    pub q: f64,
    pub decay: f64,
    pub resolution: Option<usize>,
    pub method: BaseMethod,
    pub plug_in: bool,
    pub ns: Vec<usize>,
    pub replicates: usize,
    pub sigma: f64,
    pub points_per_axis: usize,
    pub sweep_q: Vec<f64>,
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn scalar(v: &Option<OneOrMany>, key: &str, default: f64) -> Result<f64> {
    match v {
        None => Ok(default),
        Some(OneOrMany::One(x)) => Ok(*x),
        Some(OneOrMany::Many(_)) => Err(Error::Config(format!("function.{key}: expected a number"))),
    }
}

fn vector(v: &Option<OneOrMany>, dim: usize, default: f64) -> Vec<f64> {
    match v {
        None => vec![default; dim],
        Some(OneOrMany::One(x)) => vec![*x; dim],
        Some(OneOrMany::Many(xs)) => xs.clone(),
    }
}

fn build_function(f: &config::FunctionSection) -> Result<RegressionFunction<f64>> {
    let many = matches!(f.beta, Some(OneOrMany::Many(_)));
    let dim = match (&f.beta, f.dim) {
        (Some(OneOrMany::Many(b)), Some(d)) if b.len() != d => {
            return Err(Error::Config(format!(
                "function.beta has {} entries but function.dim = {d}",
                b.len()
            )))
        }
        (Some(OneOrMany::Many(b)), _) => b.len(),
        (_, Some(d)) => d,
        _ => f.coefficients.as_ref().map(Vec::len).unwrap_or(1),
    };
    let aniso_spec = || {
        let beta = vector(&f.beta, dim, 1.0);
        let lip = vector(&f.lipschitz, dim, 1.0);
        SmoothnessSpec::anisotropic(beta, lip)
    };
    let iso_spec = |beta_default: f64| -> Result<SmoothnessSpec<f64>> {
        SmoothnessSpec::isotropic(
            scalar(&f.beta, "beta", beta_default)?,
            scalar(&f.lipschitz, "lipschitz", 1.0)?,
            dim,
        )
    };
    let func = match f.label.as_str() {
        "f1" => {
            let spec = iso_spec(1.0)?;
            let SmoothnessSpec::Isotropic { beta, lipschitz, .. } = spec else {
                unreachable!()
            };
            witness_iso_smooth(lipschitz, beta, dim)
        }
        "f2" => witness_iso_rough(scalar(&f.beta, "beta", 0.5)?, dim),
        "f3" => witness_aniso(&aniso_spec()?, f.axis.unwrap_or(0)),
        "linear" => {
            let spec = if many { aniso_spec()? } else { iso_spec(1.0)? };
            let coef = f
                .coefficients
                .clone()
                .ok_or_else(|| Error::Config("function.coefficients is required for label \"linear\"".into()))?;
            custom_linear(coef, f.intercept.unwrap_or(0.0), spec)
        }
        "constant" => {
            let spec = if many { aniso_spec()? } else { iso_spec(1.0)? };
            Ok(custom_constant(f.value.unwrap_or(0.0), spec))
        }
        other => {
            return Err(Error::Config(format!(
                "function.label: unknown function {other:?} (expected f1, f2, f3, linear or constant)"
            )))
        }
    };
    func.map_err(cfg_err)
}

fn build_shape(p: &config::PerturbationSection, dim: usize) -> Result<(AttackShape, f64)> {
    let exponent = || -> Result<f64> {
        match &p.p {
            Some(e) => e.value(),
            None => Ok(f64::INFINITY),
        }
    };
    let need = |key: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>> {
        let v = v
            .clone()
            .ok_or_else(|| Error::Config(format!("perturbation.{key} is required for kind {:?}", p.kind)))?;
        if v.len() != dim {
            return Err(Error::Config(format!(
                "perturbation.{key} has {} entries, expected {dim}",
                v.len()
            )));
        }
        Ok(v)
    };
    let radius = || {
        p.q.ok_or_else(|| Error::Config(format!("perturbation.q is required for kind {:?}", p.kind)))
    };
    let (shape, q) = match p.kind.as_str() {
        "singleton" => (AttackShape::Singleton, p.q.unwrap_or(0.0)),
        "lp_ball" => (AttackShape::LpBall { p: exponent()? }, radius()?),
        "sparse_lp_ball" => (
            AttackShape::SparseLpBall {
                p: exponent()?,
                s: p.s.ok_or_else(|| Error::Config("perturbation.s is required for kind \"sparse_lp_ball\"".into()))?,
            },
            radius()?,
        ),
        "box" => (
            AttackShape::Box {
                half_widths: need("half_widths", &p.half_widths)?,
            },
            p.q.unwrap_or(1.0),
        ),
        "segment" => (
            AttackShape::Segment {
                start: need("start", &p.start)?,
                end: need("end", &p.end)?,
            },
            p.q.unwrap_or(1.0),
        ),
        "finite" => {
            let points = p
                .points
                .clone()
                .ok_or_else(|| Error::Config("perturbation.points is required for kind \"finite\"".into()))?;
            if points.iter().any(|x| x.len() != dim) {
                return Err(Error::Config(format!("perturbation.points entries must have {dim} coordinates")));
            }
            (AttackShape::Finite { points }, p.q.unwrap_or(1.0))
        }
        other => {
            return Err(Error::Config(format!(
                "perturbation.kind: unknown kind {other:?} (expected lp_ball, sparse_lp_ball, box, segment, finite or singleton)"
            )))
        }
    };
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Config(format!("perturbation.q must be finite and >= 0, got {q}")));
    }
    if !p.decay.is_finite() {
        return Err(Error::Config("perturbation.decay must be finite".into()));
    }
    Ok((shape, q))
}

/// Default lattice size per axis for dimension `d`.
pub fn default_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 1025,
        2 => 65,
        _ => 17,
    }
}

impl ExperimentConfig {
    /// Validate a parsed file; every failure is a configuration error.
    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let function = build_function(&file.function)?;
        let dim = function.dim();
        let (shape, q) = build_shape(&file.perturbation, dim)?;
        let e = &file.estimator;
        if !(e.c_h > 0.0 && e.c_h.is_finite()) {
            return Err(Error::Config(format!("estimator.c_h must be > 0, got {}", e.c_h)));
        }
        let method = match e.method.as_str() {
            "local_poly" => {
                if !function.spec().is_isotropic() {
                    return Err(Error::Config(
                        "estimator.method \"local_poly\" needs an isotropic function class".into(),
                    ));
                }
                BaseMethod::LocalPoly {
                    c_h: e.c_h,
                    degree: e.degree,
                }
            }
            "aniso_kernel" => {
                if function.spec().is_isotropic() {
                    return Err(Error::Config(
                        "estimator.method \"aniso_kernel\" needs an anisotropic function class".into(),
                    ));
                }
                BaseMethod::AnisoKernel { c_h: e.c_h }
            }
            "exact" => BaseMethod::Exact,
            "constant" => BaseMethod::Constant(e.value),
            other => {
                return Err(Error::Config(format!(
                    "estimator.method: unknown method {other:?} (expected local_poly, aniso_kernel, exact or constant)"
                )))
            }
        };
        let x = &file.experiment;
        if x.n.is_empty() {
            return Err(Error::Config("experiment.n must not be empty".into()));
        }
        if x.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("experiment.n must be strictly increasing".into()));
        }
        if x.n[0] < 2 {
            return Err(Error::Config("experiment.n entries must be >= 2".into()));
        }
        if x.replicates == 0 {
            return Err(Error::Config("experiment.replicates must be >= 1".into()));
        }
        if !(x.sigma >= 0.0 && x.sigma.is_finite()) {
            return Err(Error::Config(format!("experiment.sigma must be >= 0, got {}", x.sigma)));
        }
        let points_per_axis = file
            .lattice
            .points_per_axis
            .unwrap_or_else(|| default_points_per_axis(dim));
        if points_per_axis < 2 {
            return Err(Error::Config("lattice.points_per_axis must be >= 2".into()));
        }
        let sweep_q = file.sweep.q.clone();
        if sweep_q.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
            return Err(Error::Config("sweep.q entries must be finite and >= 0".into()));
        }
        if sweep_q.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep.q must be strictly increasing".into()));
        }
        if matches!(file.perturbation.resolution, Some(r) if r < 2) {
            return Err(Error::Config("perturbation.resolution must be >= 2".into()));
        }
        Ok(Self {
            seed: file.seed,
            function,
            axis: file.function.axis.unwrap_or(0),
            shape,
            q,
            decay: file.perturbation.decay,
            resolution: file.perturbation.resolution,
            method,
            plug_in: e.plug_in,
            ns: x.n.clone(),
            replicates: x.replicates,
            sigma: x.sigma,
            points_per_axis,
            sweep_q,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&ConfigFile::load(path)?)
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn lattice(&self) -> Result<GridDomain<f64>> {
        GridDomain::unit_cube(self.dim(), self.points_per_axis)
    }

    /// Attack scale at sample size `n`.
    pub fn q_at(&self, n: usize) -> f64 {
        if self.decay == 0.0 {
            self.q
        } else {
            self.q * (n as f64).powf(-self.decay)
        }
    }

    /// Perturbation set with geometry scaled by `q`.
    pub fn perturbation(&self, q: f64) -> Result<PerturbationSet<f64>> {
        let d = self.dim();
        let scale = |v: &[f64]| v.iter().map(|x| x * q).collect::<Vec<_>>();
        match &self.shape {
            _ if q == 0.0 => PerturbationSet::singleton(d),
            AttackShape::Singleton => PerturbationSet::singleton(d),
            AttackShape::LpBall { p } => PerturbationSet::lp_ball(d, *p, q),
            AttackShape::SparseLpBall { p, s } => PerturbationSet::sparse_lp_ball(d, *p, q, *s),
            AttackShape::Box { half_widths } => PerturbationSet::boxed(scale(half_widths)),
            AttackShape::Segment { start, end } => PerturbationSet::segment(scale(start), scale(end)),
            AttackShape::Finite { points } => PerturbationSet::finite(points.iter().map(|x| scale(x)).collect()),
        }
    }

    /// Explicit resolution, or enough sample points per axis to hit every
    /// lattice multiple inside the set's coordinate extent.
    pub fn resolution_for(&self, set: &PerturbationSet<f64>, lattice: &GridDomain<f64>) -> usize {
        if let Some(r) = self.resolution {
            return r;
        }
        let d = self.dim();
        let cap = RESOLUTION_CAP[d.min(3) - 1];
        let h = lattice.spacing().into_iter().fold(f64::INFINITY, f64::min);
        let extent = match &self.shape {
            AttackShape::Finite { .. } | AttackShape::Singleton => return 2,
            AttackShape::Segment { .. } => {
                // Consecutive segment samples at most one lattice step apart.
                let probe = set.sample(2).map(|s| s.max_pairwise_distance()).unwrap_or(0.0);
                let steps = (probe / h).ceil() as usize + 1;
                return steps.clamp(2, cap);
            }
            _ => set
                .coord_ranges(&set.sample(2).expect("resolution 2 is valid"))
                .into_iter()
                .fold(0.0, f64::max)
                / 2.0,
        };
        let r = 2 * ((extent / h) - 1e-9).ceil().max(0.0) as usize + 1;
        r.clamp(2, cap)
    }

    /// Attack lattice for scale `q` on `lattice`.
    pub fn attack(&self, q: f64, lattice: &GridDomain<f64>) -> Result<AttackLattice<f64>> {
        let set = self.perturbation(q)?;
        let samp = set.sample(self.resolution_for(&set, lattice))?;
        AttackLattice::new(lattice, &set, &samp)
    }

    /// Seed of replicate `r`; the sample size selects the RNG stream.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn dataset(&self, n: usize, r: usize) -> Result<Dataset<f64>> {
        let seed = self.replicate_seed(r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        generate_with(&self.function, n, self.sigma, seed, &mut rng)
    }

    /// Step 1: the base fit for replicate `r` at sample size `n`.
    pub fn fit_base(&self, n: usize, r: usize, lattice: &GridDomain<f64>) -> Result<FittedPredictor<f64>> {
        let f = &self.function;
        let spec = f.spec();
        let fitted = match &self.method {
            BaseMethod::Exact => return Ok(FittedPredictor::exact(f)),
            BaseMethod::Constant(c) => return Ok(FittedPredictor::constant(f.dim(), *c)),
            BaseMethod::LocalPoly { c_h, degree } => {
                let data = self.dataset(n, r)?;
                let h = bandwidth_iso(n as f64, spec.beta_bar(), f.dim(), *c_h)?;
                fit_local_poly_degree(&data, degree.unwrap_or(spec.poly_degree()), h, lattice)
            }
            BaseMethod::AnisoKernel { c_h } => {
                let data = self.dataset(n, r)?;
                let h = bandwidth_aniso(n as f64, spec, *c_h)?;
                fit_aniso_kernel(&data, spec, &h, lattice)
            }
        };
        fitted.map_err(|e| e.with_seed(self.replicate_seed(r)))
    }
}

/// One replicate at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// Adversarial loss of the plug-in predictor.
    pub loss: f64,
    /// Standard loss of the base fit.
    pub standard_loss: f64,
    /// Standard loss of the plug-in predictor.
    pub plug_in_standard_loss: f64,
    pub ideal_loss: f64,
    pub q: f64,
}

/// Risk estimate at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub n: usize,
    pub q: f64,
    pub mean: f64,
    pub stderr: f64,
    pub mean_standard: f64,
    pub ideal_loss: f64,
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub risks: Vec<RiskEstimate>,
    pub fit: Option<RateFit>,
}

impl ExperimentResult {
    pub fn records(&self) -> impl Iterator<Item = &ReplicateRecord> {
        self.risks.iter().flat_map(|r| r.records.iter())
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

fn evaluate(
    attack: &AttackLattice<f64>,
    fx: &[f64],
    base: &FittedPredictor<f64>,
) -> Result<(LossReport<f64>, f64, f64)> {
    let lattice = attack.domain();
    let pi = attack.plug_in(base)?;
    let loss = attack.loss_from_values(fx, &pi.values_on(attack.perturbed()));
    let std_base = sup_diff(fx, &base.values_on(lattice));
    let std_pi = sup_diff(fx, &pi.values_on(lattice));
    Ok((loss, std_base, std_pi))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `R` replicates of generate → fit → plug-in → adversarial loss at size `n`.
pub fn estimate_risk(cfg: &ExperimentConfig, n: usize) -> Result<RiskEstimate> {
    let lattice = cfg.lattice()?;
    let q = cfg.q_at(n);
    let attack = cfg.attack(q, &lattice)?;
    let fx = attack.function_values(&cfg.function);
    let ideal = attack.ideal_loss_from_values(&fx)?.value;
    let records: Vec<ReplicateRecord> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let base = cfg.fit_base(n, r, &lattice)?;
            let (loss, std_base, std_pi) = evaluate(&attack, &fx, &base)?;
            Ok(ReplicateRecord {
                n,
                replicate: r,
                seed: cfg.replicate_seed(r),
                loss: loss.value,
                standard_loss: std_base,
                plug_in_standard_loss: std_pi,
                ideal_loss: ideal,
                q,
            })
        })
        .collect::<Result<_>>()?;
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let (mean, stderr) = mean_and_stderr(&losses);
    let std: Vec<f64> = records.iter().map(|r| r.standard_loss).collect();
    Ok(RiskEstimate {
        n,
        q,
        mean,
        stderr,
        mean_standard: mean_and_stderr(&std).0,
        ideal_loss: ideal,
        records,
    })
}

/// Risk at every sample size of the grid; the rate fit is attached when the
/// grid has at least three sizes and all risks are positive.
pub fn run_risk(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let risks = cfg
        .ns
        .iter()
        .map(|&n| estimate_risk(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<usize> = risks.iter().map(|r| r.n).collect();
    let means: Vec<f64> = risks.iter().map(|r| r.mean).collect();
    let fit = rate_fit(&ns, &means).ok();
    Ok(ExperimentResult { risks, fit })
}

/// Least-squares line of `log risk` on `log(log n / n)`.
pub fn rate_fit(ns: &[usize], risks: &[f64]) -> Result<RateFit> {
    let xs: Vec<f64> = ns.iter().map(|&n| ((n as f64).ln() / n as f64).ln()).collect();
    loglog_fit(&xs, risks)
}

/// Least-squares line of `log y` on `x`; all `y` must be positive.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: xs.len(),
        });
    }
    if let Some((index, &value)) = ys.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveRisk { index, value });
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("rate fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub mean_risk: f64,
    pub stderr: f64,
    pub ideal_loss: f64,
    pub standard_risk: f64,
    /// Log-log slope from the previous row; absent for the first row and
    /// whenever either end has `q = 0`.
    pub local_slope: Option<f64>,
}

pub const SWEEP_HEADER: [&str; 6] = ["q", "mean_risk", "stderr", "ideal_loss", "standard_risk", "local_slope"];

/// Risk decomposition over a grid of attack scales at the single sample
/// size of the configuration. Each replicate is fitted once.
pub fn phase_sweep(cfg: &ExperimentConfig, qs: &[f64]) -> Result<Vec<SweepRow>> {
    let [n] = cfg.ns[..] else {
        return Err(Error::InvalidParameter(format!(
            "phase sweep needs exactly one sample size, got {}",
            cfg.ns.len()
        )));
    };
    if qs.is_empty() {
        return Err(Error::InvalidParameter("phase sweep needs a nonempty q grid".into()));
    }
    if qs.windows(2).any(|w| w[0] >= w[1]) || qs.iter().any(|q| !(*q >= 0.0)) {
        return Err(Error::InvalidParameter("q grid must be increasing and nonnegative".into()));
    }
    let lattice = cfg.lattice()?;
    let fits = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| cfg.fit_base(n, r, &lattice))
        .collect::<Result<Vec<_>>>()?;
    let fx: Vec<f64> = lattice.points().map(|x| cfg.function.eval(&x)).collect();
    let standard: Vec<f64> = fits.iter().map(|p| sup_diff(&fx, &p.values_on(&lattice))).collect();
    let standard_risk = mean_and_stderr(&standard).0;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(qs.len());
    for &q in qs {
        let attack = cfg.attack(q, &lattice)?;
        let ideal = attack.ideal_loss_from_values(&fx)?.value;
        let losses = fits
            .par_iter()
            .map(|p| evaluate(&attack, &fx, p).map(|(l, _, _)| l.value))
            .collect::<Result<Vec<_>>>()?;
        let (mean, stderr) = mean_and_stderr(&losses);
        let local_slope = rows
            .last()
            .filter(|prev| prev.q > 0.0 && q > 0.0 && prev.mean_risk > 0.0 && mean > 0.0)
            .map(|prev| (mean / prev.mean_risk).ln() / (q / prev.q).ln());
        rows.push(SweepRow {
            q,
            mean_risk: mean,
            stderr,
            ideal_loss: ideal,
            standard_risk,
            local_slope,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnisoRow {
    pub q: f64,
    pub aniso_ideal: f64,
    pub iso_ideal: f64,
    /// `aniso_ideal / iso_ideal`; NaN when both vanish.
    pub ratio: f64,
}

pub const ANISO_HEADER: [&str; 4] = ["q", "aniso_ideal", "iso_ideal", "ratio"];

/// Ideal losses under an attack confined to one coordinate: the anisotropic
/// witness versus the isotropic rough witness with exponent `β̄`.
pub fn aniso_comparison(cfg: &ExperimentConfig, qs: &[f64]) -> Result<Vec<AnisoRow>> {
    let spec = cfg.function.spec();
    let SmoothnessSpec::Anisotropic { beta, .. } = spec else {
        return Err(Error::InvalidParameter(
            "anisotropic comparison needs an anisotropic function class".into(),
        ));
    };
    let d = beta.len();
    let axis = cfg.axis;
    if axis >= d {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for dimension {d}")));
    }
    let bar = spec.beta_bar();
    let iso: RegressionFunction<f64> = if bar < 1.0 {
        witness_iso_rough(bar, d)?
    } else {
        witness_iso_smooth(1.0, bar, d)?
    };
    let lattice = cfg.lattice()?;
    qs.iter()
        .map(|&q| {
            let mut a = vec![0.0; d];
            a[axis] = q;
            let set = if q == 0.0 {
                PerturbationSet::singleton(d)?
            } else {
                PerturbationSet::boxed(a)?
            };
            let res = match cfg.resolution {
                Some(r) => r,
                None => {
                    let h = lattice.spacing()[axis];
                    (2 * ((q / h) - 1e-9).ceil().max(0.0) as usize + 1).clamp(2, RESOLUTION_CAP[d.min(3) - 1])
                }
            };
            let samp = set.sample(res)?;
            let attack = AttackLattice::new(&lattice, &set, &samp)?;
            let aniso_ideal = attack.ideal_loss(&cfg.function)?.value;
            let iso_ideal = attack.ideal_loss(&iso)?.value;
            let ratio = if iso_ideal > 0.0 {
                aniso_ideal / iso_ideal
            } else {
                f64::NAN
            };
            Ok(AnisoRow {
                q,
                aniso_ideal,
                iso_ideal,
                ratio,
            })
        })
        .collect()
}

/// Write a CSV file atomically: rows go to a temporary file in the target
/// directory which is renamed over `path` only after a successful flush.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(tmp.as_file()));
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
        inner.flush().map_err(io)?;
    }
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Shortest round-tripping decimal form.
pub fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Replicate-level CSV, `n`-major and replicate-minor.
pub fn write_csv<'a, I>(records: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = &'a ReplicateRecord>,
{
    write_table(
        path,
        &RECORD_HEADER,
        records.into_iter().map(|r| {
            vec![
                r.n.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                fmt_num(r.loss),
                fmt_num(r.standard_loss),
                fmt_num(r.ideal_loss),
                fmt_num(r.q),
            ]
        }),
    )
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_table(
        path,
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt_num(r.q),
                fmt_num(r.mean_risk),
                fmt_num(r.stderr),
                fmt_num(r.ideal_loss),
                fmt_num(r.standard_risk),
                r.local_slope.map(fmt_num).unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_aniso(rows: &[AnisoRow], path: &Path) -> Result<()> {
    write_table(
        path,
        &ANISO_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt_num(r.q),
                fmt_num(r.aniso_ideal),
                fmt_num(r.iso_ideal),
                fmt_num(r.ratio),
            ]
        }),
    )
}
