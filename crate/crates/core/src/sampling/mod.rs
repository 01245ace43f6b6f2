//! Random streams and the sampling primitives shared by every sampler.

mod alias;
mod gamma;
mod rng;

pub use alias::{alias_draw, build_alias, AliasTable};
pub use gamma::{sample_dirichlet, sample_gamma, GammaSampler};
pub(crate) use gamma::normalize_ln_in_place;
pub use rng::{Purpose, RngStream};

use crate::error::{Error, Result};

/// Smallest index `i` with `cumulative[i] > u`.
///
/// Zero-mass cells (equal to their predecessor) are skipped by the strict
/// inequality.
pub fn binary_search_categorical(cumulative: &[f64], u: f64) -> Result<usize> {
    match cumulative.last() {
        Some(&last) if u >= 0.0 && u < last => Ok(cumulative.partition_point(|&c| c <= u)),
        Some(&last) => Err(Error::domain(format!(
            "u = {u} outside [0, {last}) for categorical search"
        ))),
        None => Err(Error::domain("empty cumulative vector")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn search_examples() {
        assert_eq!(binary_search_categorical(&[0.2, 0.5, 1.0], 0.3).unwrap(), 1);
        assert_eq!(binary_search_categorical(&[0.2, 0.5, 1.0], 0.0).unwrap(), 0);
        assert_eq!(binary_search_categorical(&[0.0, 0.0, 1.0], 0.0).unwrap(), 2);
        assert!(binary_search_categorical(&[0.2, 0.5, 1.0], 1.0).is_err());
        assert!(binary_search_categorical(&[], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn search_agrees_with_linear_scan(
            ws in prop::collection::vec(0.0f64..3.0, 1..40),
            frac in 0.0f64..1.0,
        ) {
            let cum: Vec<f64> = ws.iter().scan(0.0, |acc, w| { *acc += w; Some(*acc) }).collect();
            let last = *cum.last().unwrap();
            prop_assume!(last > 0.0);
            let u = frac * last;
            prop_assume!(u < last);
            let linear = cum.iter().position(|&c| c > u).unwrap();
            prop_assert_eq!(binary_search_categorical(&cum, u).unwrap(), linear);
        }
    }
}
