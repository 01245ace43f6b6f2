//! Inefficiency factors of Θ and Φ draws for the collapsed and the partially
//! collapsed sampler, both started from one shared state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::iact;
use crate::chain::{Chain, ChainOptions, SamplerKind};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pclda::{sample_phi, sample_theta};
use crate::sampling::{Purpose, RngStream};
use crate::state::{HyperParams, TopicState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyConfig {
    /// Collapsed sweeps from the seeded initialization to the shared state.
    pub burn_in: usize,
    pub n_draws: usize,
    pub n_top_words: usize,
    pub n_random_docs: usize,
    /// Sweeps between retained draws; 0 freezes both chains.
    pub sweeps_between_draws: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for InefficiencyConfig {
    fn default() -> Self {
        InefficiencyConfig {
            burn_in: 1000,
            n_draws: 1000,
            n_top_words: 1000,
            n_random_docs: 1000,
            sweeps_between_draws: 1,
            seed: 1,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParameterKind {
    Theta,
    Phi,
}

impl ParameterKind {
    pub fn name(self) -> &'static str {
        match self {
            ParameterKind::Theta => "theta",
            ParameterKind::Phi => "phi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyRow {
    pub sampler: SamplerKind,
    pub parameter: ParameterKind,
    pub k: usize,
    pub mean: f64,
    pub sd: f64,
    /// Mean over parameters whose draws have variance above 1e-12.
    pub filtered_mean: f64,
    pub n_params: usize,
    pub n_filtered: usize,
    /// Mean relative to the collapsed sampler's mean for the same parameter.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyReport {
    pub rows: Vec<InefficiencyRow>,
}

impl InefficiencyReport {
    pub fn row(&self, sampler: SamplerKind, parameter: ParameterKind) -> Option<&InefficiencyRow> {
        self.rows
            .iter()
            .find(|r| r.sampler == sampler && r.parameter == parameter)
    }

    /// Partially collapsed over collapsed mean inefficiency.
    pub fn ratio(&self, parameter: ParameterKind) -> Option<f64> {
        self.row(SamplerKind::Pclda, parameter).map(|r| r.ratio)
    }
}

/// Top `n` word types of every topic by posterior-mean Φ.
fn top_words(s: &TopicState, h: &HyperParams, n: usize) -> Vec<Vec<usize>> {
    let v = s.vocab_size();
    (0..h.k)
        .map(|k| {
            let row = s.word_topic_row(k);
            let mut ids: Vec<usize> = (0..v).collect();
            // the denominator is shared within a row, so ranking by count suffices
            ids.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
            ids.truncate(n.min(v));
            ids
        })
        .collect()
}

fn random_docs(d: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = RngStream::for_task(seed, Purpose::Diagnostics, u32::MAX as u64, 0);
    let mut ids: Vec<usize> = (0..d).collect();
    let n = n.min(d);
    for i in 0..n {
        let j = i + rng.below(d - i);
        ids.swap(i, j);
    }
    ids.truncate(n);
    ids.sort_unstable();
    ids
}

struct Draws {
    theta: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

fn run_chain(
    corpus: &Corpus,
    h: &HyperParams,
    kind: SamplerKind,
    start: &TopicState,
    docs: &[usize],
    words: &[Vec<usize>],
    cfg: &InefficiencyConfig,
) -> Result<Draws> {
    let opts = ChainOptions {
        workers: cfg.workers,
        ..ChainOptions::default()
    };
    let mut chain = Chain::new(corpus, *h, kind, start.clone(), cfg.seed, opts)?;
    let n_phi: usize = words.iter().map(Vec::len).sum();
    let mut draws = Draws {
        theta: vec![Vec::with_capacity(cfg.n_draws); docs.len() * h.k],
        phi: vec![Vec::with_capacity(cfg.n_draws); n_phi],
    };
    for t in 0..cfg.n_draws {
        for _ in 0..cfg.sweeps_between_draws {
            chain.step()?;
        }
        let s = chain.state();
        for (i, &d) in docs.iter().enumerate() {
            let mut rng = RngStream::for_task(cfg.seed, Purpose::Theta, t as u64, d as u64);
            let theta = sample_theta(s, h, d, &mut rng);
            for (k, x) in theta.into_iter().enumerate() {
                draws.theta[i * h.k + k].push(x);
            }
        }
        let streams = (0..h.k)
            .map(|k| RngStream::for_task(cfg.seed, Purpose::Diagnostics, t as u64, k as u64))
            .collect();
        let phi = sample_phi(s, h, streams);
        let mut j = 0;
        for (k, ws) in words.iter().enumerate() {
            for &w in ws {
                draws.phi[j].push(phi.get(k, w));
                j += 1;
            }
        }
    }
    Ok(draws)
}

struct Summary {
    mean: f64,
    sd: f64,
    filtered_mean: f64,
    n: usize,
    n_filtered: usize,
}

fn summarize(series: &[Vec<f64>]) -> Result<Summary> {
    let mut all = Vec::with_capacity(series.len());
    let mut filtered = Vec::new();
    for x in series {
        let f = iact(x)?;
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        if var > 1e-12 {
            filtered.push(f);
        }
        all.push(f);
    }
    let n = all.len();
    let mean = all.iter().sum::<f64>() / n.max(1) as f64;
    let sd = if n > 1 {
        (all.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let filtered_mean = if filtered.is_empty() {
        f64::NAN
    } else {
        filtered.iter().sum::<f64>() / filtered.len() as f64
    };
    Ok(Summary {
        mean,
        sd,
        filtered_mean,
        n,
        n_filtered: filtered.len(),
    })
}

/// Runs a collapsed and a partially collapsed chain from the same state
/// (reached by `burn_in` collapsed sweeps from the seeded initialization),
/// draws Θ and Φ given z at every retained iteration, and tabulates the
/// inefficiency factors of the selected parameters.
pub fn inefficiency_experiment(
    corpus: &Corpus,
    h: &HyperParams,
    cfg: &InefficiencyConfig,
) -> Result<InefficiencyReport> {
    if cfg.n_draws < super::iact::MIN_SERIES_LEN {
        return Err(Error::InsufficientData {
            needed: super::iact::MIN_SERIES_LEN,
            got: cfg.n_draws,
        });
    }
    let init = TopicState::init(corpus, h.k, cfg.seed)?;
    let mut warm = Chain::new(corpus, *h, SamplerKind::Collapsed, init, cfg.seed ^ 0x5eed, ChainOptions::default())?;
    for _ in 0..cfg.burn_in {
        warm.step()?;
    }
    let start = warm.into_state();
    let words = top_words(&start, h, cfg.n_top_words);
    let docs = random_docs(corpus.num_docs(), cfg.n_random_docs, cfg.seed);

    let mut rows = Vec::new();
    let mut base = [0.0; 2];
    for kind in [SamplerKind::Collapsed, SamplerKind::Pclda] {
        let draws = run_chain(corpus, h, kind, &start, &docs, &words, cfg)?;
        for (pi, (param, series)) in [(ParameterKind::Theta, &draws.theta), (ParameterKind::Phi, &draws.phi)]
            .into_iter()
            .enumerate()
        {
            let sm = summarize(series)?;
            if kind == SamplerKind::Collapsed {
                base[pi] = sm.mean;
            }
            rows.push(InefficiencyRow {
                sampler: kind,
                parameter: param,
                k: h.k,
                mean: sm.mean,
                sd: sm.sd,
                filtered_mean: sm.filtered_mean,
                n_params: sm.n,
                n_filtered: sm.n_filtered,
                ratio: sm.mean / base[pi],
            });
        }
    }
    Ok(InefficiencyReport { rows })
}

/// Writes the table as CSV: sampler, parameter, K, mean, SD, filtered mean,
/// ratio.
pub fn write_inefficiency_csv<W: Write>(report: &InefficiencyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sampler", "parameter", "K", "mean", "sd", "filtered_mean", "ratio"])?;
    for r in &report.rows {
        w.write_record([
            r.sampler.name().to_string(),
            r.parameter.name().to_string(),
            r.k.to_string(),
            format!("{:.4}", r.mean),
            format!("{:.4}", r.sd),
            format!("{:.4}", r.filtered_mean),
            format!("{:.4}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
