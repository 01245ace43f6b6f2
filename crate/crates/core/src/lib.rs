//! Parallel partially collapsed Gibbs sampling for latent Dirichlet
//! allocation.
//!
//! The crate provides corpus ingestion and pruning, the sampling primitives
//! (alias tables, gamma/Dirichlet draws, reproducible random streams), the
//! topic-assignment state, the collapsed and AD-LDA baselines, the partially
//! collapsed sampler with its sparse and Metropolis-Hastings variants, a
//! spike-and-slab prior on Φ, and the diagnostics used to compare them.
//!
//! With the default `parallel` feature, documents are processed by a
//! work-stealing scheduler and Φ rows on a rayon pool. Without it every
//! phase runs sequentially; results are identical either way.

pub mod chain;
pub mod collapsed;
pub mod corpus;
pub mod diagnostics;
mod error;
pub mod experiment;
mod par;
pub mod pclda;
pub mod sampling;
pub mod scheduler;
pub mod state;
pub mod synthetic;
pub mod varsel;

pub use chain::{Chain, ChainOptions, SamplerKind, StepReport};
pub use corpus::Corpus;
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_on_corpus, ExperimentConfig, RunOutcome};
pub use scheduler::WorkScheduler;
pub use state::{HyperParams, PhiMatrix, TopicState};

/// Work and Metropolis-Hastings counters of one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    /// Document-bucket iterations of sparse samplers; `K` per token for
    /// dense ones.
    pub inner_loop_count: u64,
    pub word_proposals: u64,
    pub word_accepts: u64,
    pub doc_proposals: u64,
    pub doc_accepts: u64,
    pub steals: u64,
}

impl SweepStats {
    pub fn merge(&mut self, other: &SweepStats) {
        self.inner_loop_count += other.inner_loop_count;
        self.word_proposals += other.word_proposals;
        self.word_accepts += other.word_accepts;
        self.doc_proposals += other.doc_proposals;
        self.doc_accepts += other.doc_accepts;
        self.steals += other.steals;
    }
}
