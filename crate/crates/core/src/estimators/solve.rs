//! Dense linear solves for the small normal-equation systems of local fits.

use crate::scalar::Scalar;

/// Relative pivot threshold below which a system counts as singular.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `m × m` and is destroyed. Returns `None` when a pivot
/// falls below `PIVOT_TOLERANCE` times the largest entry.
pub(crate) fn solve_in_place<T: Scalar>(a: &mut [T], b: &mut [T], m: usize) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    if !(scale > T::zero()) {
        return None;
    }
    let tol = scale * T::lit(PIVOT_TOLERANCE);
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if !(a[piv * m + col].abs() > tol) {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        let p = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / p;
            if factor.is_zero() {
                continue;
            }
            for c in col..m {
                let v = a[col * m + c];
                a[r * m + c] = a[r * m + c] - factor * v;
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); m];
    for r in (0..m).rev() {
        let mut s = b[r];
        for c in r + 1..m {
            s = s - a[r * m + c] * x[c];
        }
        x[r] = s / a[r * m + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut a: Vec<f64> = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        let x = solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn needs_pivoting() {
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 7.0];
        assert_eq!(solve_in_place(&mut a, &mut b, 2).unwrap(), vec![7.0, 2.0]);
    }

    #[test]
    fn detects_singular() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_in_place(&mut a, &mut b, 2).is_none());
    }
}
