//! Nadaraya–Watson regression with a product boxcar kernel and one
//! bandwidth per coordinate.

use super::design::SortedDesign;
use super::{MAX_WIDENINGS, WIDENING_FACTOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct KernelModel<T: Scalar> {
    design: SortedDesign<T>,
    bandwidths: Vec<T>,
}

impl<T: Scalar> KernelModel<T> {
    pub(crate) fn new(design: SortedDesign<T>, bandwidths: Vec<T>) -> Self {
        Self { design, bandwidths }
    }

    pub(crate) fn eval(&self, x: &[T]) -> Result<T> {
        let widen = T::lit(WIDENING_FACTOR);
        let mut half = self.bandwidths.clone();
        for attempt in 0..=MAX_WIDENINGS {
            let mut count = 0usize;
            let mut sum = T::zero();
            self.design.for_each_in_window(x, &half, |i| {
                count += 1;
                sum = sum + self.design.ys[i];
            });
            if count > 0 {
                return Ok(sum / T::from_count(count));
            }
            if attempt < MAX_WIDENINGS {
                for h in half.iter_mut() {
                    *h = *h * widen;
                }
            }
        }
        Err(Error::InsufficientData {
            point: x.iter().map(|v| v.as_f64()).collect(),
            found: 0,
            needed: 1,
            seed: None,
        })
    }
}
