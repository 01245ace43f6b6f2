//! Experiment orchestration: load and prune the corpus, initialize, run the
//! configured sampler, emit the trace and snapshots.

use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, ChainOptions, SamplerKind};
use crate::corpus::{prune_rare_words, read_uci_files, select_vocab_tfidf, Corpus};
use crate::diagnostics::{marginal_loglik, RunTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::pclda::DocProposal;
use crate::state::{HyperParams, PhiMatrix, TopicState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub docword: PathBuf,
    pub vocab: PathBuf,
    pub sampler: SamplerKind,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub workers: usize,
    /// Drop word types occurring fewer than this many times.
    pub min_count: Option<u64>,
    /// Keep only the `v_max` types with the highest TF-IDF.
    pub tfidf_v_max: Option<usize>,
    pub vs_pi: Option<f64>,
    #[serde(default)]
    pub doc_proposal: DocProposal,
    pub trace: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            docword: PathBuf::new(),
            vocab: PathBuf::new(),
            sampler: SamplerKind::Pclda,
            k: 100,
            alpha: 0.1,
            beta: 0.01,
            iterations: 1000,
            burn_in: 0,
            seed: 1,
            workers: 1,
            min_count: Some(1),
            tfidf_v_max: None,
            vs_pi: None,
            doc_proposal: DocProposal::default(),
            trace: None,
            snapshot_dir: None,
            snapshot_every: 500,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, msg: &str| Err(Error::Config { field, msg: msg.into() });
        if self.k == 0 {
            return bad("k", "must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", "must be positive");
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every", "must be at least 1");
        }
        match (self.min_count, self.tfidf_v_max) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("min_count", "exactly one of min-count and tfidf-v-max must be given");
            }
            (Some(0), None) => return bad("min_count", "must be at least 1"),
            (None, Some(0)) => return bad("tfidf_v_max", "must be at least 1"),
            _ => {}
        }
        if let Some(pi) = self.vs_pi {
            if !(pi > 0.0 && pi <= 1.0) {
                return bad("vs_pi", "must lie in (0, 1]");
            }
            if self.sampler != SamplerKind::PcldaVs {
                return bad("vs_pi", "only applies to the pclda-vs sampler");
            }
        }
        Ok(())
    }

    pub fn hyper(&self) -> Result<HyperParams> {
        HyperParams::new(self.alpha, self.beta, self.k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Applies the configured vocabulary pruning.
pub fn prune(cfg: &ExperimentConfig, c: &Corpus) -> Result<Corpus> {
    match (cfg.min_count, cfg.tfidf_v_max) {
        (Some(m), None) => prune_rare_words(c, m),
        (None, Some(v)) => select_vocab_tfidf(c, v),
        _ => Err(Error::Config {
            field: "min_count",
            msg: "exactly one of min-count and tfidf-v-max must be given".into(),
        }),
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub corpus: Corpus,
    pub trace: RunTrace,
    pub state: TopicState,
    pub phi: Option<PhiMatrix>,
}

/// Reads the corpus named in `cfg` and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let raw = read_uci_files(&cfg.docword, &cfg.vocab)?;
    run_on_corpus(cfg, &raw)
}

/// Runs the experiment on an already loaded (unpruned) corpus.
pub fn run_on_corpus(cfg: &ExperimentConfig, raw: &Corpus) -> Result<RunOutcome> {
    cfg.validate()?;
    let corpus = prune(cfg, raw)?;
    let h = cfg.hyper()?;
    let state = TopicState::init(&corpus, h.k, cfg.seed)?;
    let opts = ChainOptions {
        workers: cfg.workers,
        doc_proposal: cfg.doc_proposal,
        vs_pi: cfg.vs_pi.unwrap_or(1.0),
    };

    let mut trace = RunTrace::new();
    trace.set_header("config", cfg.to_json());
    trace.set_header("corpus_hash", format!("{:016x}", corpus.fingerprint()));
    trace.set_header("version", concat!("pclda ", env!("CARGO_PKG_VERSION")));

    let start = Instant::now();
    trace.push(TraceRecord {
        iteration: 0,
        wall_time: 0.0,
        log_likelihood: marginal_loglik(&state, &h),
        sparsity_nw: state.sparsity_nw(),
        sparsity_nd: state.sparsity_nd(),
        ..TraceRecord::default()
    })?;

    let mut chain = Chain::new(&corpus, h, cfg.sampler, state, cfg.seed, opts)?;
    let n = corpus.num_tokens() as f64;
    for it in 1..=cfg.iterations {
        let t0 = Instant::now();
        let report = chain.step()?;
        let dt = t0.elapsed().as_secs_f64();
        let s = chain.state();
        let stats = &report.stats;
        let rate = |acc: u64, prop: u64| (prop > 0).then(|| acc as f64 / prop as f64);
        trace.push(TraceRecord {
            iteration: it,
            wall_time: start.elapsed().as_secs_f64(),
            log_likelihood: marginal_loglik(s, &h),
            sparsity_nw: s.sparsity_nw(),
            sparsity_nd: s.sparsity_nd(),
            tokens_per_sec: if dt > 0.0 { n / dt } else { 0.0 },
            inner_loop_count: stats.inner_loop_count,
            word_accept_rate: rate(stats.word_accepts, stats.word_proposals),
            doc_accept_rate: rate(stats.doc_accepts, stats.doc_proposals),
            prop_zeros: report.prop_zeros,
        })?;
        if let Some(dir) = &cfg.snapshot_dir {
            if it % cfg.snapshot_every == 0 {
                write_state(&dir.join(format!("state-{it:08}.bin")), s)?;
            }
        }
    }
    if let Some(dir) = &cfg.snapshot_dir {
        write_state(&dir.join("state-final.bin"), chain.state())?;
    }
    if let Some(path) = &cfg.trace {
        trace.save(path)?;
    }
    let phi = chain.phi().cloned();
    let state = chain.into_state();
    Ok(RunOutcome {
        corpus,
        trace,
        state,
        phi,
    })
}

fn write_state(path: &Path, s: &TopicState) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    s.write_snapshot(BufWriter::new(f))
}
