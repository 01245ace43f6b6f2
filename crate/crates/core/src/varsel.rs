//! Spike-and-slab prior on Φ: binary inclusion indicators per topic and word
//! type, with each Φ row drawn from a Dirichlet restricted to its included
//! types. Excluded entries are exactly zero.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::par;
use crate::pclda::sample_phi_row;
use crate::sampling::{GammaSampler, Purpose, RngStream};
use crate::scheduler::WorkScheduler;
use crate::state::{HyperParams, PhiMatrix, TopicState};

/// `K × V` inclusion indicators plus the per-topic inclusion prior.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    k: usize,
    v: usize,
    data: Vec<bool>,
    pi: Vec<f64>,
}

impl IndicatorMatrix {
    /// Every type included in every topic.
    pub fn all_included(k: usize, v: usize, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != k {
            return Err(Error::domain(format!("{} priors for {k} topics", pi.len())));
        }
        if let Some(p) = pi.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::domain(format!("inclusion prior must lie in (0, 1], got {p}")));
        }
        Ok(IndicatorMatrix {
            k,
            v,
            data: vec![true; k * v],
            pi,
        })
    }

    pub fn uniform_prior(k: usize, v: usize, pi: f64) -> Result<Self> {
        Self::all_included(k, v, vec![pi; k])
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.v
    }

    pub fn get(&self, k: usize, w: usize) -> bool {
        self.data[k * self.v + w]
    }

    pub fn row(&self, k: usize) -> &[bool] {
        &self.data[k * self.v..(k + 1) * self.v]
    }

    pub fn pi(&self, k: usize) -> f64 {
        self.pi[k]
    }

    pub fn count_included(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Checks that every cell with tokens is included and that every row
    /// keeps at least one type.
    pub fn check(&self, s: &TopicState) -> Result<()> {
        for k in 0..self.k {
            let row = self.row(k);
            if !row.iter().any(|&b| b) {
                return Err(Error::State(format!("topic {k} has no included word type")));
            }
            if let Some(w) = (0..self.v).find(|&w| !row[w] && s.n_w(k, w) > 0) {
                return Err(Error::State(format!(
                    "topic {k} excludes word type {w} which holds {} tokens",
                    s.n_w(k, w)
                )));
            }
        }
        Ok(())
    }
}

/// Log masses `(log p0, log p1)` of the two-point conditional of an
/// indicator whose cell holds no tokens, given the other types' indicators.
fn indicator_log_masses(s_beta: f64, s_n: f64, beta_v: f64, pi: f64) -> (f64, f64) {
    let log_p1 = ln_gamma(s_beta + beta_v) - ln_gamma(s_n + s_beta + beta_v) + pi.ln();
    let log_p0 = ln_gamma(s_beta) - ln_gamma(s_n + s_beta) + (1.0 - pi).ln();
    (log_p0, log_p1)
}

fn inclusion_prob_from_sums(s_beta: f64, s_n: f64, beta_v: f64, pi: f64) -> f64 {
    if s_beta <= 0.0 {
        // no other type is included: dropping this one would empty the row
        return 1.0;
    }
    let (log_p0, log_p1) = indicator_log_masses(s_beta, s_n, beta_v, pi);
    1.0 / (1.0 + (log_p0 - log_p1).exp())
}

fn check_row_args(n_w_row: &[u32], beta_row: &[f64], ind_row: &[bool], v: usize, pi: f64) -> Result<()> {
    if n_w_row.len() != beta_row.len() || n_w_row.len() != ind_row.len() {
        return Err(Error::domain("count, β and indicator rows differ in length"));
    }
    if v >= n_w_row.len() {
        return Err(Error::domain(format!("word type {v} out of range")));
    }
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::domain(format!("inclusion prior must lie in (0, 1], got {pi}")));
    }
    if beta_row.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::domain("β must be positive"));
    }
    Ok(())
}

/// `P(I_{k,v} = 1 | I_{k,-v}, n_w[k, ·])`.
pub fn indicator_inclusion_prob(
    n_w_row: &[u32],
    beta_row: &[f64],
    ind_row: &[bool],
    v: usize,
    pi_k: f64,
) -> Result<f64> {
    check_row_args(n_w_row, beta_row, ind_row, v, pi_k)?;
    if n_w_row[v] > 0 {
        return Ok(1.0);
    }
    let mut s_beta = 0.0;
    let mut s_n = 0.0;
    for j in (0..n_w_row.len()).filter(|&j| j != v && ind_row[j]) {
        s_beta += beta_row[j];
        s_n += n_w_row[j] as f64;
    }
    Ok(inclusion_prob_from_sums(s_beta, s_n, beta_row[v], pi_k))
}

/// Draws `I_{k,v}` from its full conditional.
pub fn sample_indicator(
    n_w_row: &[u32],
    beta_row: &[f64],
    ind_row: &[bool],
    v: usize,
    pi_k: f64,
    rng: &mut RngStream,
) -> Result<bool> {
    let p = indicator_inclusion_prob(n_w_row, beta_row, ind_row, v, pi_k)?;
    if n_w_row[v] > 0 {
        return Ok(true);
    }
    Ok(rng.uniform() < p)
}

/// Draws a Φ row from the Dirichlet over the included types; excluded
/// entries are exactly zero.
pub fn sample_phi_vs(n_w_row: &[u32], ind_row: &[bool], beta_row: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    if n_w_row.len() != ind_row.len() || n_w_row.len() != beta_row.len() {
        return Err(Error::domain("count, β and indicator rows differ in length"));
    }
    if !ind_row.iter().any(|&b| b) {
        return Err(Error::State("no included word type".into()));
    }
    if let Some(w) = (0..n_w_row.len()).find(|&w| !ind_row[w] && n_w_row[w] > 0) {
        return Err(Error::State(format!(
            "word type {w} is excluded but holds {} tokens",
            n_w_row[w]
        )));
    }
    let mut out: Vec<f64> = Vec::with_capacity(n_w_row.len());
    for ((&n, &inc), &b) in n_w_row.iter().zip(ind_row).zip(beta_row) {
        out.push(if inc {
            GammaSampler::new(n as f64 + b)?.sample_ln(rng)
        } else {
            f64::NEG_INFINITY
        });
    }
    crate::sampling::normalize_ln_in_place(&mut out);
    crate::pclda::clamp_included(&mut out, Some(ind_row));
    Ok(out)
}

/// Counters from one variable-selection Φ-phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VsStats {
    /// Indicators forced to 1 because the row would otherwise be empty.
    pub forced: u64,
    pub included: u64,
}

/// Variable-selection Φ-phase. For each topic (rows in parallel) the
/// indicators of zero-count types are resampled in ascending type order,
/// then the row is drawn from the restricted Dirichlet.
///
/// Indicators use `Indicators` streams; the row draws use the same `Phi`
/// streams as plain partially collapsed sampling, so with every `π_k = 1`
/// the Φ draws coincide with those of [`crate::pclda::sample_phi`].
pub fn vs_sweep(
    s: &TopicState,
    ind: &mut IndicatorMatrix,
    h: &HyperParams,
    sched: &WorkScheduler,
    seed: u64,
    sweep: u64,
) -> Result<(PhiMatrix, VsStats)> {
    let (k, v) = (h.k, s.vocab_size());
    if ind.k != k || ind.v != v {
        return Err(Error::State("indicator matrix does not match the model".into()));
    }
    let beta_gamma = GammaSampler::new(h.beta)?;
    let mut phi = vec![0.0; k * v];

    struct Row<'a> {
        phi: &'a mut [f64],
        ind: &'a mut [bool],
        pi: f64,
        forced: u64,
    }
    let mut rows: Vec<Row<'_>> = phi
        .chunks_mut(v.max(1))
        .zip(ind.data.chunks_mut(v.max(1)))
        .zip(&ind.pi)
        .map(|((phi, ind), &pi)| Row { phi, ind, pi, forced: 0 })
        .collect();

    sched.install(|| {
        par::for_each_mut(&mut rows, |t, row| {
            let counts = s.word_topic_row(t);
            let s_n = s.topic_totals()[t] as f64;
            let mut rng = RngStream::for_task(seed, Purpose::Indicators, sweep, t as u64);
            let mut included = row.ind.iter().filter(|&&b| b).count();
            for w in 0..v {
                if counts[w] > 0 {
                    if !row.ind[w] {
                        row.ind[w] = true;
                        included += 1;
                    }
                    continue;
                }
                let others = included - usize::from(row.ind[w]);
                let s_beta = h.beta * others as f64;
                if others == 0 {
                    row.forced += u64::from(!row.ind[w]);
                }
                let p = inclusion_prob_from_sums(s_beta, s_n, h.beta, row.pi);
                let next = rng.uniform() < p;
                if next != row.ind[w] {
                    if next {
                        included += 1;
                    } else {
                        included -= 1;
                    }
                    row.ind[w] = next;
                }
            }
            let mut phi_rng = RngStream::for_task(seed, Purpose::Phi, sweep, t as u64);
            sample_phi_row(counts, Some(row.ind), h.beta, &beta_gamma, &mut phi_rng, row.phi);
        });
    });
    let forced = rows.iter().map(|r| r.forced).sum();
    drop(rows);
    let stats = VsStats {
        forced,
        included: ind.count_included() as u64,
    };
    Ok((PhiMatrix::from_rows_unchecked(k, v, phi), stats))
}

/// Fraction of exactly-zero entries of Φ.
pub fn prop_zeros(phi: &PhiMatrix) -> f64 {
    let data = phi.as_slice();
    if data.is_empty() {
        return 0.0;
    }
    data.iter().filter(|&&x| x == 0.0).count() as f64 / data.len() as f64
}
