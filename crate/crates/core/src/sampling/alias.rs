use super::RngStream;
use crate::error::{Error, Result};

/// Walker/Vose alias table for O(1) categorical draws.
///
/// `sigma` keeps the sum of the construction weights so callers that built
/// the table from unnormalized weights can reuse the normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
    sigma: f64,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::domain("alias table needs at least one outcome"));
        }
        let mut sigma = 0.0;
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::domain(format!(
                    "alias weights must be finite and nonnegative, got {w}"
                )));
            }
            sigma += w;
        }
        if sigma <= 0.0 {
            return Err(Error::domain("alias weights are all zero"));
        }

        let scale = k as f64 / sigma;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias: Vec<u32> = (0..k as u32).collect();
        let mut small = Vec::with_capacity(k);
        let mut large = Vec::with_capacity(k);
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u32;
            // residual mass of l after topping up s
            prob[l] = (prob[l] + prob[s]) - 1.0;
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // whatever remains is 1 up to rounding
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }

        Ok(AliasTable { prob, alias, sigma })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Sum of the construction weights.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> usize {
        let i = rng.below(self.prob.len());
        if rng.uniform() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }

    /// Exact probability the table assigns to each outcome
    /// (direct mass plus mass aliased from other cells).
    pub fn outcome_probabilities(&self) -> Vec<f64> {
        let k = self.prob.len();
        let mut out = vec![0.0; k];
        for i in 0..k {
            out[i] += self.prob[i];
            out[self.alias[i] as usize] += 1.0 - self.prob[i];
        }
        out.iter_mut().for_each(|p| *p /= k as f64);
        out
    }
}

/// Builds an alias table; see [`AliasTable::new`].
pub fn build_alias(weights: &[f64]) -> Result<AliasTable> {
    AliasTable::new(weights)
}

pub fn alias_draw(table: &AliasTable, rng: &mut RngStream) -> usize {
    table.draw(rng)
}
