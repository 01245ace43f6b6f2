//! One Markov chain of any supported sampler, advanced a sweep at a time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collapsed::{adlda_sweep, collapsed_sweep, AdldaPlan};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pclda::{
    build_word_alias_tables, light_pclda_sweep, pclda_sweep, phi_streams, sample_phi, DocProposal,
    WordAliasSet,
};
use crate::sampling::{Purpose, RngStream};
use crate::scheduler::WorkScheduler;
use crate::state::{HyperParams, PhiMatrix, TopicState};
use crate::varsel::{prop_zeros, vs_sweep, IndicatorMatrix, VsStats};
use crate::SweepStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Collapsed,
    Adlda,
    Pclda,
    LightPclda,
    PcldaVs,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::Collapsed,
        SamplerKind::Adlda,
        SamplerKind::Pclda,
        SamplerKind::LightPclda,
        SamplerKind::PcldaVs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Collapsed => "collapsed",
            SamplerKind::Adlda => "adlda",
            SamplerKind::Pclda => "pclda",
            SamplerKind::LightPclda => "light-pclda",
            SamplerKind::PcldaVs => "pclda-vs",
        }
    }

    /// Whether the sampler keeps an explicit Φ.
    pub fn samples_phi(self) -> bool {
        matches!(self, SamplerKind::Pclda | SamplerKind::LightPclda | SamplerKind::PcldaVs)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                field: "sampler",
                msg: format!(
                    "unknown sampler {s:?}; expected one of collapsed, adlda, pclda, light-pclda, pclda-vs"
                ),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub workers: usize,
    pub doc_proposal: DocProposal,
    /// Inclusion prior for `pclda-vs`.
    pub vs_pi: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            workers: 1,
            doc_proposal: DocProposal::default(),
            vs_pi: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub stats: SweepStats,
    pub prop_zeros: Option<f64>,
    pub vs: Option<VsStats>,
}

pub struct Chain<'c> {
    corpus: &'c Corpus,
    h: HyperParams,
    kind: SamplerKind,
    seed: u64,
    sweep: u64,
    state: TopicState,
    sched: WorkScheduler,
    plan: Option<AdldaPlan>,
    phi: Option<PhiMatrix>,
    indicators: Option<IndicatorMatrix>,
    doc_proposal: DocProposal,
}

impl<'c> Chain<'c> {
    /// Starts a chain from `state` (which must belong to `corpus`).
    pub fn new(
        corpus: &'c Corpus,
        h: HyperParams,
        kind: SamplerKind,
        state: TopicState,
        seed: u64,
        opts: ChainOptions,
    ) -> Result<Self> {
        if state.corpus_fingerprint() != corpus.fingerprint() || state.num_topics() != h.k {
            return Err(Error::State("initial state does not match corpus and K".into()));
        }
        let sched = WorkScheduler::new(opts.workers)?;
        let plan = match kind {
            SamplerKind::Adlda => Some(AdldaPlan::new(corpus, opts.workers)?),
            _ => None,
        };
        let indicators = match kind {
            SamplerKind::PcldaVs => Some(IndicatorMatrix::uniform_prior(h.k, corpus.vocab_size(), opts.vs_pi)?),
            _ => None,
        };
        Ok(Chain {
            corpus,
            h,
            kind,
            seed,
            sweep: 0,
            state,
            sched,
            plan,
            phi: None,
            indicators,
            doc_proposal: opts.doc_proposal,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn state(&self) -> &TopicState {
        &self.state
    }

    pub fn into_state(self) -> TopicState {
        self.state
    }

    /// Φ drawn during the last sweep (Φ-sampling samplers only).
    pub fn phi(&self) -> Option<&PhiMatrix> {
        self.phi.as_ref()
    }

    pub fn indicators(&self) -> Option<&IndicatorMatrix> {
        self.indicators.as_ref()
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.h
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let (corpus, h, seed, sweep) = (self.corpus, &self.h, self.seed, self.sweep);
        let mut report = StepReport::default();
        report.stats = match self.kind {
            SamplerKind::Collapsed => {
                let mut rng = RngStream::for_task(seed, Purpose::Collapsed, sweep, 0);
                collapsed_sweep(corpus, &mut self.state, h, &mut rng)
            }
            SamplerKind::Adlda => {
                let plan = self.plan.as_ref().expect("AD-LDA chain has a plan");
                let rngs = (0..plan.partitions())
                    .map(|p| RngStream::for_task(seed, Purpose::Collapsed, sweep, p as u64))
                    .collect();
                self.sched.install(|| adlda_sweep(corpus, &mut self.state, h, plan, rngs))?
            }
            SamplerKind::Pclda | SamplerKind::LightPclda => {
                let state = &self.state;
                let phi = self
                    .sched
                    .install(|| sample_phi(state, h, phi_streams(seed, sweep, h.k)));
                let stats = if self.kind == SamplerKind::Pclda {
                    let aliases = build_word_alias_tables(&phi, h, &self.sched);
                    pclda_sweep(corpus, &mut self.state, &phi, &aliases, &self.sched, seed, sweep)?
                } else {
                    let aliases = self.sched.install(|| WordAliasSet::build(&phi, 1.0));
                    light_pclda_sweep(
                        corpus,
                        &mut self.state,
                        &phi,
                        &aliases,
                        h,
                        self.doc_proposal,
                        &self.sched,
                        seed,
                        sweep,
                    )?
                };
                self.phi = Some(phi);
                stats
            }
            SamplerKind::PcldaVs => {
                let ind = self.indicators.as_mut().expect("variable-selection chain has indicators");
                let (phi, vs) = vs_sweep(&self.state, ind, h, &self.sched, seed, sweep)?;
                let aliases = build_word_alias_tables(&phi, h, &self.sched);
                let stats = pclda_sweep(corpus, &mut self.state, &phi, &aliases, &self.sched, seed, sweep)?;
                report.prop_zeros = Some(prop_zeros(&phi));
                report.vs = Some(vs);
                self.phi = Some(phi);
                stats
            }
        };
        if cfg!(debug_assertions) {
            self.state.check_consistency(corpus)?;
        }
        self.sweep += 1;
        Ok(report)
    }
}
