//! Perturbation sets, their finite samples, and their geometry.
//!
//! A [`PerturbationSet`] describes the displacements an adversary may add to
//! an input. Suprema over the set are taken over a [`PerturbationSample`]
//! (a deterministic lattice of members with the extreme points forced in),
//! which is then resolved onto an evaluation lattice as integer
//! [`LatticeOffsets`].

use std::collections::HashSet;

use crate::error::{check_dim, Error, Result};
use crate::grid::GridDomain;
use crate::scalar::{euclidean, Scalar};

/// Relative slack used when re-checking membership of computed points.
const MEMBERSHIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind<T: Scalar> {
    /// `{δ : ‖δ‖_p ≤ radius}`; `p` may be infinite, `p < 1` uses the quasi-norm.
    LpBall { p: T, radius: T },
    /// `LpBall` intersected with `{δ : ‖δ‖₀ ≤ max_nonzero}`.
    SparseLpBall { p: T, radius: T, max_nonzero: usize },
    /// `{δ : |δ_i| ≤ half_widths[i]}`.
    Box { half_widths: Vec<T> },
    /// Closed segment between two points. Does not add the origin.
    Segment { start: Vec<T>, end: Vec<T> },
    /// Explicit finite set; must contain the origin.
    FinitePoints { points: Vec<Vec<T>> },
    /// `{0}`: no attack.
    Singleton0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet<T: Scalar> {
    kind: PerturbationKind<T>,
    dim: usize,
}

fn check_exponent<T: Scalar>(p: T) -> Result<()> {
    if p > T::zero() && !p.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent p must be positive, got {p}")))
    }
}

fn check_radius<T: Scalar>(q: T) -> Result<()> {
    if q >= T::zero() && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("radius must be finite and >= 0, got {q}")))
    }
}

fn check_dim_positive(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter("dimension must be >= 1".into()))
    } else {
        Ok(())
    }
}

impl<T: Scalar> PerturbationSet<T> {
    pub fn lp_ball(dim: usize, p: T, radius: T) -> Result<Self> {
        check_dim_positive(dim)?;
        check_exponent(p)?;
        check_radius(radius)?;
        Ok(Self {
            kind: PerturbationKind::LpBall { p, radius },
            dim,
        })
    }

    pub fn sparse_lp_ball(dim: usize, p: T, radius: T, max_nonzero: usize) -> Result<Self> {
        check_dim_positive(dim)?;
        check_exponent(p)?;
        check_radius(radius)?;
        Ok(Self {
            kind: PerturbationKind::SparseLpBall {
                p,
                radius,
                max_nonzero,
            },
            dim,
        })
    }

    pub fn boxed(half_widths: Vec<T>) -> Result<Self> {
        check_dim_positive(half_widths.len())?;
        for &a in &half_widths {
            check_radius(a)?;
        }
        Ok(Self {
            dim: half_widths.len(),
            kind: PerturbationKind::Box { half_widths },
        })
    }

    pub fn segment(start: Vec<T>, end: Vec<T>) -> Result<Self> {
        check_dim_positive(start.len())?;
        check_dim(start.len(), end.len())?;
        if start.iter().chain(&end).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("segment endpoints must be finite".into()));
        }
        Ok(Self {
            dim: start.len(),
            kind: PerturbationKind::Segment { start, end },
        })
    }

    /// Finite set of displacements; rejects lists without the origin.
    pub fn finite(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        check_dim_positive(dim)?;
        for p in &points {
            check_dim(dim, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("perturbation points must be finite".into()));
            }
        }
        if !points.iter().any(|p| p.iter().all(|v| v.is_zero())) {
            return Err(Error::InvalidParameter(
                "finite perturbation set must contain the origin".into(),
            ));
        }
        Ok(Self {
            kind: PerturbationKind::FinitePoints { points },
            dim,
        })
    }

    pub fn singleton(dim: usize) -> Result<Self> {
        check_dim_positive(dim)?;
        Ok(Self {
            kind: PerturbationKind::Singleton0,
            dim,
        })
    }

    pub fn kind(&self) -> &PerturbationKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the origin is a member. False only for segments missing it.
    pub fn contains_zero(&self) -> bool {
        match &self.kind {
            PerturbationKind::Segment { .. } => self.contains_within(&vec![T::zero(); self.dim], 0.0),
            _ => true,
        }
    }

    /// Sets closed under shrinking any coordinate towards zero.
    pub fn is_coordinate_monotone(&self) -> bool {
        matches!(
            self.kind,
            PerturbationKind::LpBall { .. }
                | PerturbationKind::SparseLpBall { .. }
                | PerturbationKind::Box { .. }
                | PerturbationKind::Singleton0
        )
    }

    /// Exact membership test.
    pub fn contains(&self, delta: &[T]) -> Result<bool> {
        check_dim(self.dim, delta.len())?;
        Ok(self.contains_within(delta, 0.0))
    }

    /// Membership with a relative slack on the defining inequality.
    pub(crate) fn contains_within(&self, delta: &[T], slack: f64) -> bool {
        let grow = T::one() + T::lit(slack);
        match &self.kind {
            PerturbationKind::LpBall { p, radius } => lp_within(delta, *p, *radius, grow),
            PerturbationKind::SparseLpBall {
                p,
                radius,
                max_nonzero,
            } => {
                delta.iter().filter(|v| !v.is_zero()).count() <= *max_nonzero
                    && lp_within(delta, *p, *radius, grow)
            }
            PerturbationKind::Box { half_widths } => delta
                .iter()
                .zip(half_widths)
                .all(|(&d, &a)| d.abs() <= a * grow),
            PerturbationKind::Segment { start, end } => {
                let scale = start
                    .iter()
                    .chain(end)
                    .fold(T::one(), |m, v| m.max(v.abs()));
                let tol = scale * T::lit(slack.max(1e-12));
                distance_to_segment(delta, start, end) <= tol
            }
            PerturbationKind::FinitePoints { points } => {
                let tol = T::lit(slack);
                points.iter().any(|p| {
                    p.iter()
                        .zip(delta)
                        .all(|(&u, &v)| (u - v).abs() <= tol * T::one().max(u.abs()))
                })
            }
            PerturbationKind::Singleton0 => delta.iter().all(|v| v.is_zero()),
        }
    }

    /// Deterministic lattice sample of members.
    ///
    /// Axis-uniform lattices with `resolution` points per axis are filtered by
    /// membership; the origin, the axis extremes and (for `p > 2` balls) the
    /// diagonal extremes are always included so closed-form diameters are
    /// attained on the sample. Segments use `resolution` equally spaced
    /// points including both endpoints.
    pub fn sample(&self, resolution: usize) -> Result<PerturbationSample<T>> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!(
                "sample resolution must be >= 2, got {resolution}"
            )));
        }
        let d = self.dim;
        let zero = vec![T::zero(); d];
        let mut points: Vec<Vec<T>> = Vec::new();
        match &self.kind {
            PerturbationKind::LpBall { p, radius } => {
                let axes = vec![axis_values(*radius, resolution); d];
                points.extend(cartesian(&axes).into_iter().filter(|x| self.contains_within(x, 0.0)));
                points.extend(ball_extremes(d, d, *p, *radius));
            }
            PerturbationKind::SparseLpBall {
                p,
                radius,
                max_nonzero,
            } => {
                let axes = vec![axis_values(*radius, resolution); d];
                points.extend(cartesian(&axes).into_iter().filter(|x| self.contains_within(x, 0.0)));
                let active = (*max_nonzero).min(d);
                if active > 0 {
                    points.extend(ball_extremes(d, active, *p, *radius));
                }
            }
            PerturbationKind::Box { half_widths } => {
                let axes: Vec<Vec<T>> = half_widths
                    .iter()
                    .map(|&a| axis_values(a, resolution))
                    .collect();
                points.extend(cartesian(&axes));
            }
            PerturbationKind::Segment { start, end } => {
                let last = T::from_count(resolution - 1);
                for j in 0..resolution {
                    let t = T::from_count(j) / last;
                    points.push(
                        start
                            .iter()
                            .zip(end)
                            .map(|(&s, &e)| (T::one() - t) * s + t * e)
                            .collect(),
                    );
                }
            }
            PerturbationKind::FinitePoints { points: pts } => points.extend(pts.iter().cloned()),
            PerturbationKind::Singleton0 => {}
        }
        if self.contains_zero() {
            points.push(zero);
        }
        // -0.0 and 0.0 are the same displacement.
        for p in &mut points {
            for v in p.iter_mut() {
                if v.is_zero() {
                    *v = T::zero();
                }
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        points.dedup();
        Ok(PerturbationSample {
            dim: d,
            points,
            resolution,
        })
    }

    /// Euclidean diameter `max ‖δ₁ − δ₂‖`.
    ///
    /// Closed forms are used for balls, boxes and segments; finite sets fall
    /// back to the brute-force maximum over `samp`.
    pub fn diameter(&self, samp: &PerturbationSample<T>) -> T {
        let two = T::lit(2.0);
        match &self.kind {
            PerturbationKind::LpBall { p, radius } => two * *radius * ball_diameter_factor(self.dim, *p),
            PerturbationKind::SparseLpBall {
                p,
                radius,
                max_nonzero,
            } => {
                let active = (*max_nonzero).min(self.dim);
                if active == 0 {
                    T::zero()
                } else {
                    two * *radius * ball_diameter_factor(active, *p)
                }
            }
            PerturbationKind::Box { half_widths } => {
                two * half_widths.iter().map(|&a| a * a).sum::<T>().sqrt()
            }
            PerturbationKind::Segment { start, end } => euclidean(start, end),
            PerturbationKind::FinitePoints { .. } => samp.max_pairwise_distance(),
            PerturbationKind::Singleton0 => T::zero(),
        }
    }

    /// Per-coordinate ranges `r_i = sup |δ_i − δ'_i|`.
    pub fn coord_ranges(&self, samp: &PerturbationSample<T>) -> Vec<T> {
        let two = T::lit(2.0);
        match &self.kind {
            PerturbationKind::LpBall { radius, .. } => vec![two * *radius; self.dim],
            PerturbationKind::SparseLpBall {
                radius,
                max_nonzero,
                ..
            } => {
                let r = if *max_nonzero == 0 { T::zero() } else { two * *radius };
                vec![r; self.dim]
            }
            PerturbationKind::Box { half_widths } => half_widths.iter().map(|&a| two * a).collect(),
            PerturbationKind::Segment { start, end } => {
                start.iter().zip(end).map(|(&s, &e)| (s - e).abs()).collect()
            }
            PerturbationKind::FinitePoints { .. } => samp.coordinate_spreads(),
            PerturbationKind::Singleton0 => vec![T::zero(); self.dim],
        }
    }
}

/// `d^{1/2 - 1/p}` for `p ≥ 2`, else 1: half the diameter of the unit ℓp ball
/// measured in the Euclidean norm.
fn ball_diameter_factor<T: Scalar>(d: usize, p: T) -> T {
    let two = T::lit(2.0);
    if p <= two {
        T::one()
    } else {
        let e = T::lit(0.5) - if p.is_infinite() { T::zero() } else { p.recip() };
        T::from_count(d).powf(e)
    }
}

fn lp_within<T: Scalar>(delta: &[T], p: T, radius: T, grow: T) -> bool {
    if p.is_infinite() {
        delta.iter().all(|v| v.abs() <= radius * grow)
    } else {
        let s: T = delta.iter().map(|v| v.abs().powf(p)).sum();
        s <= radius.powf(p) * grow
    }
}

/// `resolution` equally spaced values on `[-a, a]` with exact endpoints.
fn axis_values<T: Scalar>(a: T, resolution: usize) -> Vec<T> {
    if a.is_zero() {
        return vec![T::zero()];
    }
    let last = T::from_count(resolution - 1);
    let two = T::lit(2.0);
    (0..resolution)
        .map(|j| {
            if j == resolution - 1 {
                a
            } else {
                -a + two * a * (T::from_count(j) / last)
            }
        })
        .collect()
}

/// Axis extremes `±q e_i`, plus for `p > 2` the sign patterns of the
/// diagonal `q k^{-1/p} (1,…,1,0,…,0)` on the first `active` coordinates.
fn ball_extremes<T: Scalar>(d: usize, active: usize, p: T, q: T) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    if q.is_zero() {
        return out;
    }
    for i in 0..d {
        for s in [q, -q] {
            let mut v = vec![T::zero(); d];
            v[i] = s;
            out.push(v);
        }
    }
    if p > T::lit(2.0) && active > 1 {
        let c = if p.is_infinite() {
            q
        } else {
            q * T::from_count(active).powf(-p.recip())
        };
        for s in [c, -c] {
            let mut v = vec![T::zero(); d];
            for x in v.iter_mut().take(active) {
                *x = s;
            }
            out.push(v);
        }
    }
    out
}

fn cartesian<T: Scalar>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for values in axes {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for prefix in &out {
            for &v in values {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn distance_to_segment<T: Scalar>(x: &[T], a: &[T], b: &[T]) -> T {
    let ab: Vec<T> = a.iter().zip(b).map(|(&u, &v)| v - u).collect();
    let len2: T = ab.iter().map(|&v| v * v).sum();
    let t = if len2.is_zero() {
        T::zero()
    } else {
        let dot: T = x.iter().zip(a).zip(&ab).map(|((&xi, &ai), &di)| (xi - ai) * di).sum();
        (dot / len2).max(T::zero()).min(T::one())
    };
    let proj: Vec<T> = a.iter().zip(&ab).map(|(&ai, &di)| ai + t * di).collect();
    euclidean(x, &proj)
}

/// Finite member sample of a perturbation set.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSample<T: Scalar> {
    dim: usize,
    points: Vec<Vec<T>>,
    resolution: usize,
}

impl<T: Scalar> PerturbationSample<T> {
    /// Sample from an explicit point list (used for nested-sample checks).
    pub fn from_points(points: Vec<Vec<T>>, resolution: usize) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        check_dim_positive(dim)?;
        for p in &points {
            check_dim(dim, p.len())?;
        }
        Ok(Self {
            dim,
            points,
            resolution,
        })
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_zero(&self) -> bool {
        self.points.iter().any(|p| p.iter().all(|v| v.is_zero()))
    }

    /// Brute-force maximum pairwise Euclidean distance.
    pub fn max_pairwise_distance(&self) -> T {
        let mut best = T::zero();
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(euclidean(a, b));
            }
        }
        best
    }

    /// Per-coordinate `max − min` over the sample.
    pub fn coordinate_spreads(&self) -> Vec<T> {
        (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.points.iter().fold(
                    (T::infinity(), T::neg_infinity()),
                    |(lo, hi), p| (lo.min(p[a]), hi.max(p[a])),
                );
                if lo.is_finite() {
                    hi - lo
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// A perturbation sample resolved onto a lattice's index system.
///
/// Each sample point is rounded to the nearest lattice multiple; for sets
/// closed under shrinking coordinates a rounded point that leaves the set
/// is truncated towards zero instead, so resolved offsets stay members.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeOffsets<T: Scalar> {
    dim: usize,
    offsets: Vec<i64>,
    deltas: Vec<Vec<T>>,
}

impl<T: Scalar> LatticeOffsets<T> {
    pub fn resolve(
        set: &PerturbationSet<T>,
        samp: &PerturbationSample<T>,
        domain: &GridDomain<T>,
    ) -> Result<Self> {
        let dim = domain.dim();
        check_dim(dim, set.dim())?;
        check_dim(dim, samp.dim())?;
        let spacing = domain.spacing();
        let origin_coords = domain.coords_of(&vec![0; dim]);
        let to_delta = |idx: &[i64]| -> Vec<T> {
            domain
                .coords_of(idx)
                .iter()
                .zip(&origin_coords)
                .map(|(&c, &o)| c - o)
                .collect()
        };
        let mut seen = HashSet::new();
        let mut offsets = Vec::new();
        let mut deltas = Vec::new();
        for delta in samp.points() {
            let scaled: Vec<T> = delta.iter().zip(&spacing).map(|(&v, &h)| v / h).collect();
            let mut idx: Vec<i64> = scaled.iter().map(|s| to_i64(s.round())).collect();
            if set.is_coordinate_monotone() && !set.contains_within(&to_delta(&idx), MEMBERSHIP_SLACK) {
                let eps = T::lit(MEMBERSHIP_SLACK);
                idx = scaled
                    .iter()
                    .map(|&s| {
                        let m = to_i64((s.abs() + eps).floor());
                        if s < T::zero() {
                            -m
                        } else {
                            m
                        }
                    })
                    .collect();
            }
            if seen.insert(idx.clone()) {
                deltas.push(to_delta(&idx));
                offsets.extend_from_slice(&idx);
            }
        }
        Ok(Self {
            dim,
            offsets,
            deltas,
        })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn offset(&self, i: usize) -> &[i64] {
        &self.offsets[i * self.dim..(i + 1) * self.dim]
    }

    /// Real displacement represented by the `i`-th offset.
    pub fn delta(&self, i: usize) -> &[T] {
        &self.deltas[i]
    }

    pub fn deltas(&self) -> &[Vec<T>] {
        &self.deltas
    }

    /// Inflated lattice `{k + o}` over member indices `k` of `domain`.
    pub fn inflate(&self, domain: &GridDomain<T>) -> GridDomain<T> {
        let dim = domain.dim();
        let (lo, hi) = domain.index_box();
        let mut omin = vec![0i64; dim];
        let mut omax = vec![0i64; dim];
        for i in 0..self.len() {
            for (a, &o) in self.offset(i).iter().enumerate() {
                omin[a] = omin[a].min(o);
                omax[a] = omax[a].max(o);
            }
        }
        if self.is_empty() {
            omin.clone_from(&vec![0; dim]);
        }
        let new_lo: Vec<i64> = lo.iter().zip(&omin).map(|(&l, &o)| l + o).collect();
        let new_hi: Vec<i64> = hi.iter().zip(&omax).map(|(&h, &o)| h + o).collect();
        let extents: Vec<usize> = new_lo
            .iter()
            .zip(&new_hi)
            .map(|(&l, &h)| (h - l + 1) as usize)
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * extents[a + 1];
        }
        let total: usize = extents.iter().product();
        let mut mask = vec![false; total];
        let base = |idx: &[i64]| -> usize {
            idx.iter()
                .enumerate()
                .map(|(a, &k)| (k - new_lo[a]) as usize * strides[a])
                .sum()
        };
        let shift: Vec<isize> = (0..self.len())
            .map(|i| {
                self.offset(i)
                    .iter()
                    .enumerate()
                    .map(|(a, &o)| o as isize * strides[a] as isize)
                    .sum()
            })
            .collect();
        for k in 0..domain.len() {
            let b = base(domain.index_at(k)) as isize;
            for &s in &shift {
                mask[(b + s) as usize] = true;
            }
        }
        domain.restrict_to_mask(new_lo, new_hi, &mask)
    }
}

fn to_i64<T: Scalar>(v: T) -> i64 {
    v.to_i64().expect("perturbation offset fits in i64")
}

/// Points `{x′ − δ}` of the base lattice reachable from `x_prime`.
///
/// `x_prime` is rounded to the nearest index of `domain`'s index system and
/// the sample is resolved onto the lattice first.
pub fn neighborhood<T: Scalar>(
    x_prime: &[T],
    set: &PerturbationSet<T>,
    domain: &GridDomain<T>,
    samp: &PerturbationSample<T>,
) -> Result<Vec<Vec<T>>> {
    check_dim(domain.dim(), x_prime.len())?;
    let offsets = LatticeOffsets::resolve(set, samp, domain)?;
    let centre = domain.round_index(x_prime);
    let mut out = Vec::new();
    let mut idx = vec![0i64; domain.dim()];
    for i in 0..offsets.len() {
        for (a, (&c, &o)) in centre.iter().zip(offsets.offset(i)).enumerate() {
            idx[a] = c - o;
        }
        if domain.position(&idx).is_some() {
            out.push(domain.coords_of(&idx));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyNeighborhood {
            point: x_prime.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(out)
}

/// The inflated lattice `X′ = ∪ (x + Δ)` over the lattice points of `domain`.
pub fn perturbed_domain<T: Scalar>(
    domain: &GridDomain<T>,
    set: &PerturbationSet<T>,
    samp: &PerturbationSample<T>,
) -> Result<GridDomain<T>> {
    Ok(LatticeOffsets::resolve(set, samp, domain)?.inflate(domain))
}
