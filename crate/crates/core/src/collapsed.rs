//! Sequential collapsed Gibbs sampling and its AD-LDA parallel approximation.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par;
use crate::sampling::RngStream;
use crate::scheduler::WorkScheduler;
use crate::state::{DocTopics, HyperParams, TopicState};
use crate::SweepStats;

/// Normalized collapsed conditional of a token of word `w` in document `d`.
///
/// `s` must already be in the "-i" state (the token removed from all counts).
pub fn collapsed_conditional(s: &TopicState, h: &HyperParams, d: usize, w: u32) -> Vec<f64> {
    let v_beta = s.vocab_size() as f64 * h.beta;
    let dt = s.doc_topics(d);
    let mut p: Vec<f64> = (0..h.k)
        .map(|k| {
            (s.n_w(k, w as usize) as f64 + h.beta) / (s.topic_totals()[k] as f64 + v_beta)
                * (dt.get(k as u32) as f64 + h.alpha)
        })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Scratch buffers reused across documents.
#[derive(Debug, Clone)]
pub(crate) struct DenseScratch {
    doc_row: Vec<u32>,
    cumulative: Vec<f64>,
}

impl DenseScratch {
    pub(crate) fn new(k: usize) -> Self {
        DenseScratch {
            doc_row: vec![0; k],
            cumulative: vec![0.0; k],
        }
    }
}

/// Resamples every token of one document against the given topic-word
/// counts. Returns the number of conditional terms evaluated (K per token).
#[allow(clippy::too_many_arguments)]
pub(crate) fn collapsed_doc_pass(
    words: &[u32],
    z: &mut [u32],
    topics: &mut DocTopics,
    word_topic: &mut [u32],
    totals: &mut [u64],
    v: usize,
    h: &HyperParams,
    rng: &mut RngStream,
    scratch: &mut DenseScratch,
) -> u64 {
    let k = h.k;
    let v_beta = v as f64 * h.beta;
    topics.fill_dense(&mut scratch.doc_row);
    for (zi, &w) in z.iter_mut().zip(words) {
        let w = w as usize;
        let old = *zi as usize;
        scratch.doc_row[old] -= 1;
        word_topic[old * v + w] -= 1;
        totals[old] -= 1;

        let mut acc = 0.0;
        for t in 0..k {
            acc += (word_topic[t * v + w] as f64 + h.beta) / (totals[t] as f64 + v_beta)
                * (scratch.doc_row[t] as f64 + h.alpha);
            scratch.cumulative[t] = acc;
        }
        let u = rng.uniform() * acc;
        let new = scratch.cumulative[..k]
            .iter()
            .position(|&c| c > u)
            .unwrap_or(k - 1);

        scratch.doc_row[new] += 1;
        word_topic[new * v + w] += 1;
        totals[new] += 1;
        if new != old {
            topics.decrement(old as u32);
            topics.increment(new as u32);
            *zi = new as u32;
        }
    }
    (words.len() * k) as u64
}

/// One sequential collapsed Gibbs sweep in document order, position order.
pub fn collapsed_sweep(
    corpus: &Corpus,
    s: &mut TopicState,
    h: &HyperParams,
    rng: &mut RngStream,
) -> SweepStats {
    let v = s.vocab_size();
    let mut scratch = DenseScratch::new(h.k);
    let (slots, word_topic, totals) = s.split_mut();
    let mut work = 0;
    for slot in slots {
        work += collapsed_doc_pass(
            corpus.doc(slot.doc),
            slot.z,
            slot.topics,
            word_topic,
            totals,
            v,
            h,
            rng,
            &mut scratch,
        );
    }
    SweepStats {
        inner_loop_count: work,
        ..SweepStats::default()
    }
}

/// Assignment of documents to AD-LDA partitions: contiguous blocks balanced
/// by token count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdldaPlan {
    partitions: usize,
    doc_partition: Vec<usize>,
}

impl AdldaPlan {
    pub fn new(corpus: &Corpus, partitions: usize) -> Result<Self> {
        if partitions == 0 {
            return Err(Error::Config {
                field: "workers",
                msg: "AD-LDA needs at least one partition".into(),
            });
        }
        let costs: Vec<usize> = corpus.docs().map(<[u32]>::len).collect();
        Ok(AdldaPlan {
            partitions,
            doc_partition: WorkScheduler::deal(&costs, partitions),
        })
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn partition_of(&self, d: usize) -> usize {
        self.doc_partition[d]
    }
}

/// Private topic-word counts of every partition at the end of an AD-LDA
/// sweep, before reconciliation.
#[derive(Debug, Clone)]
pub struct AdldaInspection {
    pub start_word_topic: Vec<u32>,
    pub partition_word_topic: Vec<Vec<u32>>,
}

/// One AD-LDA sweep: each partition runs collapsed Gibbs over its documents
/// against a private copy of the topic-word counts taken at sweep start, then
/// the copies are reconciled as `start + sum_p (end_p - start)`.
pub fn adlda_sweep(
    corpus: &Corpus,
    s: &mut TopicState,
    h: &HyperParams,
    plan: &AdldaPlan,
    rngs: Vec<RngStream>,
) -> Result<SweepStats> {
    adlda_sweep_inspect(corpus, s, h, plan, rngs).map(|(stats, _)| stats)
}

/// [`adlda_sweep`] that also returns the pre-reconciliation private counts.
pub fn adlda_sweep_inspect(
    corpus: &Corpus,
    s: &mut TopicState,
    h: &HyperParams,
    plan: &AdldaPlan,
    rngs: Vec<RngStream>,
) -> Result<(SweepStats, AdldaInspection)> {
    if rngs.len() != plan.partitions {
        return Err(Error::Config {
            field: "workers",
            msg: format!(
                "{} random streams for {} partitions",
                rngs.len(),
                plan.partitions
            ),
        });
    }
    if plan.doc_partition.len() != s.num_docs() {
        return Err(Error::State("AD-LDA plan was built for another corpus".into()));
    }
    let v = s.vocab_size();
    let start_word_topic = s.word_topic().to_vec();
    let start_totals = s.topic_totals().to_vec();

    struct Partition<'a> {
        slots: Vec<crate::state::DocSlot<'a>>,
        word_topic: Vec<u32>,
        totals: Vec<u64>,
        rng: RngStream,
        work: u64,
    }

    let (slots, _, _) = s.split_mut();
    let mut parts: Vec<Partition<'_>> = rngs
        .into_iter()
        .map(|rng| Partition {
            slots: Vec::new(),
            word_topic: start_word_topic.clone(),
            totals: start_totals.clone(),
            rng,
            work: 0,
        })
        .collect();
    for slot in slots {
        parts[plan.doc_partition[slot.doc]].slots.push(slot);
    }

    par::for_each_mut(&mut parts, |_, p| {
        let mut scratch = DenseScratch::new(h.k);
        for slot in p.slots.iter_mut() {
            p.work += collapsed_doc_pass(
                corpus.doc(slot.doc),
                slot.z,
                slot.topics,
                &mut p.word_topic,
                &mut p.totals,
                v,
                h,
                &mut p.rng,
                &mut scratch,
            );
        }
    });

    let mut word_topic: Vec<i64> = start_word_topic.iter().map(|&c| c as i64).collect();
    let mut totals: Vec<i64> = start_totals.iter().map(|&c| c as i64).collect();
    let mut work = 0;
    let mut partition_word_topic = Vec::with_capacity(parts.len());
    for p in parts {
        for ((g, &end), &st) in word_topic.iter_mut().zip(&p.word_topic).zip(&start_word_topic) {
            *g += end as i64 - st as i64;
        }
        for ((g, &end), &st) in totals.iter_mut().zip(&p.totals).zip(&start_totals) {
            *g += end as i64 - st as i64;
        }
        work += p.work;
        partition_word_topic.push(p.word_topic);
    }
    if word_topic.iter().chain(&totals).any(|&c| c < 0) {
        return Err(Error::State("AD-LDA reconciliation produced a negative count".into()));
    }
    s.set_word_counts(
        word_topic.into_iter().map(|c| c as u32).collect(),
        totals.into_iter().map(|c| c as u64).collect(),
    );
    Ok((
        SweepStats {
            inner_loop_count: work,
            ..SweepStats::default()
        },
        AdldaInspection {
            start_word_topic,
            partition_word_topic,
        },
    ))
}
