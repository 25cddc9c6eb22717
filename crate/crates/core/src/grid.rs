//! Finite evaluation lattices.
//!
//! Every lattice carries an integer index system: the point with index
//! vector `k` sits at `origin + span * k / steps` on each axis. The base
//! domain `X` is the full box `0..=steps`; inflated domains built from it
//! share the same index system, so `x + δ` for lattice-resolved `δ` is an
//! exact integer sum and all suprema become maxima over index pairs.

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain<T: Scalar> {
    dim: usize,
    origin: Vec<T>,
    span: Vec<T>,
    steps: Vec<i64>,
    lo_idx: Vec<i64>,
    hi_idx: Vec<i64>,
    strides: Vec<usize>,
    /// Row-major sorted index vectors, flattened.
    indices: Vec<i64>,
    /// Dense map from bounding-box position to lattice position.
    lookup: Vec<u32>,
}

impl<T: Scalar> GridDomain<T> {
    /// Uniform lattice over `[0,1]^dim` with `points_per_axis` points on each axis.
    pub fn unit_cube(dim: usize, points_per_axis: usize) -> Result<Self> {
        Self::new(
            vec![T::zero(); dim],
            vec![T::one(); dim],
            vec![points_per_axis; dim],
        )
    }

    /// Uniform lattice over the box `[lo, hi]` with the given point counts per axis.
    pub fn new(lo: Vec<T>, hi: Vec<T>, points: Vec<usize>) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("lattice dimension must be >= 1".into()));
        }
        check_dim(dim, hi.len())?;
        check_dim(dim, points.len())?;
        for a in 0..dim {
            if points[a] < 2 {
                return Err(Error::InvalidParameter(format!(
                    "axis {a}: need at least 2 lattice points, got {}",
                    points[a]
                )));
            }
            if !(hi[a] > lo[a]) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "axis {a}: invalid bounds [{}, {}]",
                    lo[a], hi[a]
                )));
            }
        }
        let span: Vec<T> = lo.iter().zip(&hi).map(|(&l, &h)| h - l).collect();
        let steps: Vec<i64> = points.iter().map(|&m| m as i64 - 1).collect();
        let lo_idx = vec![0; dim];
        let hi_idx = steps.clone();
        let extents: Vec<usize> = points.clone();
        let total: usize = extents.iter().product();
        let mut indices = Vec::with_capacity(total * dim);
        let mut cur = vec![0i64; dim];
        for _ in 0..total {
            indices.extend_from_slice(&cur);
            increment(&mut cur, &lo_idx, &hi_idx);
        }
        let strides = strides_for(&extents);
        let lookup = (0..total as u32).collect();
        Ok(Self {
            dim,
            origin: lo,
            span,
            steps,
            lo_idx,
            hi_idx,
            strides,
            indices,
            lookup,
        })
    }

    /// Lattice sharing `self`'s index system and holding exactly the marked
    /// positions of the bounding box `[lo_idx, hi_idx]`.
    pub(crate) fn restrict_to_mask(&self, lo_idx: Vec<i64>, hi_idx: Vec<i64>, mask: &[bool]) -> Self {
        let dim = self.dim;
        let extents: Vec<usize> = lo_idx
            .iter()
            .zip(&hi_idx)
            .map(|(&l, &h)| (h - l + 1) as usize)
            .collect();
        let strides = strides_for(&extents);
        let mut lookup = vec![ABSENT; mask.len()];
        let mut indices = Vec::new();
        let mut cur = lo_idx.clone();
        let mut count = 0u32;
        for (pos, &marked) in mask.iter().enumerate() {
            if marked {
                lookup[pos] = count;
                indices.extend_from_slice(&cur);
                count += 1;
            }
            increment(&mut cur, &lo_idx, &hi_idx);
        }
        Self {
            dim,
            origin: self.origin.clone(),
            span: self.span.clone(),
            steps: self.steps.clone(),
            lo_idx,
            hi_idx,
            strides,
            indices,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Step between neighbouring lattice points on each axis.
    pub fn spacing(&self) -> Vec<T> {
        (0..self.dim)
            .map(|a| self.span[a] / T::from_index(self.steps[a]))
            .collect()
    }

    pub fn max_spacing(&self) -> T {
        self.spacing().into_iter().fold(T::zero(), T::max)
    }

    /// Per-axis `[lo, hi]` of the lattice points.
    pub fn bounds(&self) -> Vec<(T, T)> {
        (0..self.dim)
            .map(|a| (self.coord(a, self.lo_idx[a]), self.coord(a, self.hi_idx[a])))
            .collect()
    }

    /// Index vector of the `i`-th lattice point.
    pub fn index_at(&self, i: usize) -> &[i64] {
        &self.indices[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn coord(&self, axis: usize, idx: i64) -> T {
        self.origin[axis]
            + self.span[axis] * (T::from_index(idx) / T::from_index(self.steps[axis]))
    }

    /// Coordinates of an arbitrary index vector in this lattice's index system.
    pub fn coords_of(&self, idx: &[i64]) -> Vec<T> {
        idx.iter()
            .enumerate()
            .map(|(a, &k)| self.coord(a, k))
            .collect()
    }

    /// Coordinates of the `i`-th lattice point.
    pub fn point(&self, i: usize) -> Vec<T> {
        self.coords_of(self.index_at(i))
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Position in the lattice of an index vector, if it is a member.
    pub fn position(&self, idx: &[i64]) -> Option<usize> {
        let mut pos = 0usize;
        for (a, &k) in idx.iter().enumerate().take(self.dim) {
            if k < self.lo_idx[a] || k > self.hi_idx[a] {
                return None;
            }
            pos += (k - self.lo_idx[a]) as usize * self.strides[a];
        }
        match self.lookup[pos] {
            ABSENT => None,
            p => Some(p as usize),
        }
    }

    /// Index vector nearest to `x` (not necessarily a member).
    pub fn round_index(&self, x: &[T]) -> Vec<i64> {
        (0..self.dim)
            .map(|a| {
                let r = ((x[a] - self.origin[a]) / self.span[a] * T::from_index(self.steps[a]))
                    .round();
                r.to_i64().unwrap_or(if r > T::zero() { i64::MAX / 4 } else { i64::MIN / 4 })
            })
            .collect()
    }

    /// Position of the member lattice point nearest to `x`.
    ///
    /// Coordinates outside the bounding box are clamped onto it first; if the
    /// rounded index is not a member (non-box lattices) the nearest member in
    /// index space is returned, ties going to the first in row-major order.
    pub fn nearest(&self, x: &[T]) -> usize {
        let mut idx = self.round_index(x);
        for (a, k) in idx.iter_mut().enumerate() {
            *k = (*k).clamp(self.lo_idx[a], self.hi_idx[a]);
        }
        if let Some(p) = self.position(&idx) {
            return p;
        }
        let mut best = 0;
        let mut best_d = i64::MAX;
        for i in 0..self.len() {
            let d: i64 = self
                .index_at(i)
                .iter()
                .zip(&idx)
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub(crate) fn index_box(&self) -> (&[i64], &[i64]) {
        (&self.lo_idx, &self.hi_idx)
    }

    /// Same origin, span and step counts: index vectors mean the same points.
    pub fn shares_index_system(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.origin == other.origin
            && self.span == other.span
            && self.steps == other.steps
    }

    /// Whether every bounding-box position is a member.
    pub fn is_full_box(&self) -> bool {
        self.len() == self.lookup.len()
    }
}

fn strides_for(extents: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; extents.len()];
    for a in (0..extents.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * extents[a + 1];
    }
    strides
}

/// Row-major odometer increment (last axis fastest).
pub(crate) fn increment(cur: &mut [i64], lo: &[i64], hi: &[i64]) {
    for a in (0..cur.len()).rev() {
        if cur[a] < hi[a] {
            cur[a] += 1;
            return;
        }
        cur[a] = lo[a];
    }
}
