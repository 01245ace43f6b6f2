//! Gamma and Dirichlet variates via the Marsaglia–Tsang squeeze method.

use rand_distr::{Distribution, StandardNormal};

use super::RngStream;
use crate::error::{Error, Result};

/// A Gamma(shape, 1) sampler with the per-shape constants precomputed.
///
/// Φ rows are drawn from Gamma(n + β) variates where most cells have
/// `n = 0`, so one sampler for shape β is built per sweep and reused for
/// every zero-count cell.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    shape: f64,
    d: f64,
    c: f64,
    // 1/shape when shape < 1 (boosting), otherwise None
    inv_shape: Option<f64>,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::domain(format!(
                "gamma shape must be positive and finite, got {shape}"
            )));
        }
        let (base, inv_shape) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let d = base - 1.0 / 3.0;
        Ok(GammaSampler {
            shape,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            inv_shape,
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    // log of a Gamma(base) draw, base >= 1
    fn ln_base(&self, rng: &mut RngStream) -> f64 {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            let t = 1.0 + self.c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = rng.uniform_open0();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d.ln() + v.ln();
            }
        }
    }

    /// Log of a Gamma(shape, 1) draw. Stays finite for tiny shapes whose
    /// draws underflow in linear space.
    pub fn sample_ln(&self, rng: &mut RngStream) -> f64 {
        let ln_g = self.ln_base(rng);
        match self.inv_shape {
            // Gamma(a) = Gamma(a + 1) * U^(1/a)
            Some(inv) => ln_g + rng.uniform_open0().ln() * inv,
            None => ln_g,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.sample_ln(rng).exp()
    }
}

/// One Gamma(shape, 1) draw.
pub fn sample_gamma(shape: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(GammaSampler::new(shape)?.sample(rng))
}

/// Normalizes log-weights in place into a probability vector.
pub(crate) fn normalize_ln_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// One draw from Dirichlet(`params`).
pub fn sample_dirichlet(params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(Error::domain("dirichlet needs at least one parameter"));
    }
    let mut out = Vec::with_capacity(params.len());
    for &a in params {
        out.push(GammaSampler::new(a)?.sample_ln(rng));
    }
    normalize_ln_in_place(&mut out);
    Ok(out)
}
