//! Training design sorted along the first axis for window queries.

use crate::functions::Dataset;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct SortedDesign<T: Scalar> {
    pub(crate) dim: usize,
    xs: Vec<T>,
    pub(crate) ys: Vec<T>,
}

impl<T: Scalar> SortedDesign<T> {
    pub(crate) fn new(data: &Dataset<T>) -> Self {
        let dim = data.dim();
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.sort_by(|&i, &j| data.x(i)[0].partial_cmp(&data.x(j)[0]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
        let mut xs = Vec::with_capacity(data.n() * dim);
        let mut ys = Vec::with_capacity(data.n());
        for i in order {
            xs.extend_from_slice(data.x(i));
            ys.push(data.y(i));
        }
        Self { dim, xs, ys }
    }

    #[inline]
    pub(crate) fn x(&self, i: usize) -> &[T] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn len(&self) -> usize {
        self.ys.len()
    }

    /// Visit every observation with `|X_ij − x_j| ≤ half_widths[j]` for all `j`,
    /// in sorted order.
    pub(crate) fn for_each_in_window<F: FnMut(usize)>(&self, x: &[T], half_widths: &[T], mut visit: F) {
        let lo = x[0] - half_widths[0];
        let hi = x[0] + half_widths[0];
        let n = self.len();
        let start = partition(n, |i| self.x(i)[0] < lo);
        for i in start..n {
            let xi = self.x(i);
            if xi[0] > hi {
                break;
            }
            if (1..self.dim).all(|a| (xi[a] - x[a]).abs() <= half_widths[a]) {
                visit(i);
            }
        }
    }
}

/// First index in `0..n` for which `pred` is false (pred monotone true→false).
fn partition<F: Fn(usize) -> bool>(n: usize, pred: F) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}
