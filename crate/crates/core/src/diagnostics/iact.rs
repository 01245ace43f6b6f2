//! Inefficiency factors: spectral density at frequency zero over variance.
//!
//! The primary estimator fits an autoregression by Yule–Walker with the
//! order chosen by AIC, then evaluates the AR spectrum at zero. Batch means
//! are available as an independent cross-check.

use crate::error::{Error, Result};

pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IactEstimate {
    pub factor: f64,
    pub ar_order: usize,
    /// Spectral density at frequency zero.
    pub spectrum0: f64,
    pub variance: f64,
}

/// Inefficiency factor of `series` via an AIC-selected AR fit.
pub fn iact(series: &[f64]) -> Result<f64> {
    iact_ar(series).map(|e| e.factor)
}

pub fn iact_ar(series: &[f64]) -> Result<IactEstimate> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_SERIES_LEN,
            got: n,
        });
    }
    if series.iter().all(|&x| x == series[0]) {
        return Ok(IactEstimate {
            factor: 1.0,
            ar_order: 0,
            spectrum0: 0.0,
            variance: 0.0,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let ss: f64 = centered.iter().map(|x| x * x).sum();
    let variance = ss / (n - 1) as f64;
    if !(variance > 1e-300) {
        return Ok(IactEstimate {
            factor: 1.0,
            ar_order: 0,
            spectrum0: 0.0,
            variance: 0.0,
        });
    }

    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n - 1);
    let acov: Vec<f64> = (0..=max_order)
        .map(|lag| {
            centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect();

    // Levinson–Durbin, keeping the coefficients of every order
    let mut coefs: Vec<Vec<f64>> = vec![Vec::new()];
    let mut pred_var = vec![acov[0]];
    let mut phi: Vec<f64> = Vec::new();
    for p in 1..=max_order {
        let num = acov[p] - phi.iter().enumerate().map(|(j, a)| a * acov[p - 1 - j]).sum::<f64>();
        let reflection = num / pred_var[p - 1];
        let mut next = vec![0.0; p];
        for j in 0..p - 1 {
            next[j] = phi[j] - reflection * phi[p - 2 - j];
        }
        next[p - 1] = reflection;
        phi = next;
        pred_var.push(pred_var[p - 1] * (1.0 - reflection * reflection));
        coefs.push(phi.clone());
        if !(pred_var[p] > 0.0) {
            break;
        }
    }

    let nf = n as f64;
    let order = pred_var
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(p, v)| (p, nf * v.ln() + 2.0 * p as f64))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .unwrap_or(0);
    let var_pred = pred_var[order] * nf / (nf - (order + 1) as f64);
    let denom = 1.0 - coefs[order].iter().sum::<f64>();
    let spectrum0 = var_pred / (denom * denom);
    Ok(IactEstimate {
        factor: spectrum0 / variance,
        ar_order: order,
        spectrum0,
        variance,
    })
}

/// Batch-means inefficiency factor with `batches` equal batches (the tail
/// that does not fill a batch is dropped).
pub fn iact_batch_means(series: &[f64], batches: usize) -> Result<f64> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_SERIES_LEN,
            got: n,
        });
    }
    if batches < 2 || batches > n / 2 {
        return Err(Error::domain(format!(
            "batch count must lie in [2, {}], got {batches}",
            n / 2
        )));
    }
    if series.iter().all(|&x| x == series[0]) {
        return Ok(1.0);
    }
    let b = n / batches;
    let used = &series[..b * batches];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let variance = used.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (used.len() - 1) as f64;
    if !(variance > 1e-300) {
        return Ok(1.0);
    }
    let batch_var = used
        .chunks(b)
        .map(|c| (c.iter().sum::<f64>() / b as f64 - mean).powi(2))
        .sum::<f64>()
        / (batches - 1) as f64;
    Ok(b as f64 * batch_var / variance)
}
