//! Local polynomial regression with a boxcar (sup-norm) window.

use super::design::SortedDesign;
use super::solve::solve_in_place;
use super::{MAX_WIDENINGS, WIDENING_FACTOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct LocalPolyModel<T: Scalar> {
    design: SortedDesign<T>,
    degree: usize,
    bandwidth: T,
    /// Monomial exponent vectors, constant term first.
    exponents: Vec<Vec<u32>>,
}

/// All exponent vectors in `dim` variables with total degree `≤ degree`,
/// ordered by total degree.
pub(crate) fn monomials(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        let mut cur = vec![0u32; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, axis: usize, remaining: u32) {
    if axis + 1 == cur.len() {
        cur[axis] = remaining;
        out.push(cur.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        cur[axis] = k;
        fill(out, cur, axis + 1, remaining - k);
    }
}

impl<T: Scalar> LocalPolyModel<T> {
    pub(crate) fn new(design: SortedDesign<T>, degree: usize, bandwidth: T) -> Self {
        let exponents = monomials(design.dim, degree);
        Self {
            design,
            degree,
            bandwidth,
            exponents,
        }
    }

    pub(crate) fn degree(&self) -> usize {
        self.degree
    }

    /// Intercept of the local fit at `x`, widening the window on degenerate
    /// systems and falling back to the window mean.
    pub(crate) fn eval(&self, x: &[T]) -> Result<T> {
        let dim = self.design.dim;
        let m = self.exponents.len();
        let mut width = self.bandwidth;
        let widen = T::lit(WIDENING_FACTOR);
        let mut phi = vec![T::zero(); m];
        let mut t = vec![T::zero(); dim];
        for attempt in 0..=MAX_WIDENINGS {
            let half = vec![width; dim];
            let mut count = 0usize;
            let mut gram = vec![T::zero(); m * m];
            let mut rhs = vec![T::zero(); m];
            self.design.for_each_in_window(x, &half, |i| {
                count += 1;
                let xi = self.design.x(i);
                for a in 0..dim {
                    t[a] = (xi[a] - x[a]) / width;
                }
                for (slot, e) in phi.iter_mut().zip(&self.exponents) {
                    *slot = e
                        .iter()
                        .zip(&t)
                        .fold(T::one(), |acc, (&k, &v)| acc * v.powi(k as i32));
                }
                let y = self.design.ys[i];
                for r in 0..m {
                    rhs[r] = rhs[r] + phi[r] * y;
                    for c in r..m {
                        gram[r * m + c] = gram[r * m + c] + phi[r] * phi[c];
                    }
                }
            });
            if count >= m {
                for r in 0..m {
                    for c in 0..r {
                        gram[r * m + c] = gram[c * m + r];
                    }
                }
                if let Some(coef) = solve_in_place(&mut gram, &mut rhs, m) {
                    return Ok(coef[0]);
                }
            }
            if attempt < MAX_WIDENINGS {
                width = width * widen;
            }
        }
        // Local constant over the widest window.
        let half = vec![width; dim];
        let mut count = 0usize;
        let mut sum = T::zero();
        self.design.for_each_in_window(x, &half, |i| {
            count += 1;
            sum = sum + self.design.ys[i];
        });
        if count == 0 {
            return Err(Error::InsufficientData {
                point: x.iter().map(|v| v.as_f64()).collect(),
                found: 0,
                needed: 1,
                seed: None,
            });
        }
        Ok(sum / T::from_count(count))
    }
}
