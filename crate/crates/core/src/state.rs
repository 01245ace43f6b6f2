//! Topic indicators and the count statistics derived from them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{read_exact, Corpus};
use crate::error::{Error, Result};
use crate::sampling::{Purpose, RngStream};

/// Symmetric Dirichlet priors and the topic count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

impl HyperParams {
    pub fn new(alpha: f64, beta: f64, k: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        if k == 0 {
            return Err(Error::domain("K must be at least 1"));
        }
        Ok(HyperParams { alpha, beta, k })
    }
}

/// Nonzero topic counts of one document as `(topic, count)` pairs sorted by
/// topic. Zero entries are removed eagerly, so `len()` is K_d.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocTopics {
    entries: Vec<(u32, u32)>,
}

impl DocTopics {
    pub fn from_topics(z: &[u32]) -> Self {
        let mut d = DocTopics::default();
        for &k in z {
            d.increment(k);
        }
        d
    }

    #[inline]
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    /// Number of topics with a positive count.
    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, k: u32) -> u32 {
        match self.entries.binary_search_by_key(&k, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    #[inline]
    pub fn increment(&mut self, k: u32) {
        match self.entries.binary_search_by_key(&k, |e| e.0) {
            Ok(i) => self.entries[i].1 += 1,
            Err(i) => self.entries.insert(i, (k, 1)),
        }
    }

    #[inline]
    pub fn decrement(&mut self, k: u32) {
        match self.entries.binary_search_by_key(&k, |e| e.0) {
            Ok(i) => {
                let e = &mut self.entries[i];
                e.1 -= 1;
                if e.1 == 0 {
                    self.entries.remove(i);
                }
            }
            Err(_) => panic!("decrement of topic {k} with zero count"),
        }
    }

    /// Writes the counts into a dense row of length K.
    pub fn fill_dense(&self, row: &mut [u32]) {
        row.fill(0);
        for &(k, c) in &self.entries {
            row[k as usize] = c;
        }
    }

    pub fn total(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

/// A topic change of one token, recorded by a worker and applied to the
/// topic-word counts at the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub word: u32,
    pub from: u32,
    pub to: u32,
}

/// Topic indicators `z` with document-topic, topic-word and topic-total counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicState {
    k: usize,
    v: usize,
    corpus_fingerprint: u64,
    doc_offsets: Vec<usize>,
    z: Vec<u32>,
    doc_topics: Vec<DocTopics>,
    // K x V row-major
    word_topic: Vec<u32>,
    topic_totals: Vec<u64>,
}

/// Mutable view of one document's indicators and counts, handed to exactly
/// one worker during a z-phase.
#[derive(Debug)]
pub struct DocSlot<'a> {
    pub doc: usize,
    pub z: &'a mut [u32],
    pub topics: &'a mut DocTopics,
}

impl TopicState {
    /// Draws every indicator uniformly from `[0, K)` using a single stream
    /// derived from `seed`, so all samplers and worker counts start from the
    /// same state.
    pub fn init(corpus: &Corpus, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("K must be at least 1"));
        }
        let mut rng = RngStream::for_task(seed, Purpose::Init, 0, 0);
        let z = (0..corpus.num_tokens())
            .map(|_| rng.below(k) as u32)
            .collect();
        TopicState::from_assignments(corpus, k, z)
    }

    pub fn from_assignments(corpus: &Corpus, k: usize, z: Vec<u32>) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("K must be at least 1"));
        }
        if z.len() != corpus.num_tokens() {
            return Err(Error::State(format!(
                "{} indicators for {} tokens",
                z.len(),
                corpus.num_tokens()
            )));
        }
        if let Some(&bad) = z.iter().find(|&&t| t as usize >= k) {
            return Err(Error::State(format!("indicator {bad} outside [0, {k})")));
        }
        let v = corpus.vocab_size();
        let mut s = TopicState {
            k,
            v,
            corpus_fingerprint: corpus.fingerprint(),
            doc_offsets: corpus.doc_offsets().to_vec(),
            z,
            doc_topics: Vec::new(),
            word_topic: vec![0; k * v],
            topic_totals: vec![0; k],
        };
        s.rebuild_counts(corpus);
        Ok(s)
    }

    fn rebuild_counts(&mut self, corpus: &Corpus) {
        self.word_topic.fill(0);
        self.topic_totals.fill(0);
        self.doc_topics = (0..corpus.num_docs())
            .map(|d| DocTopics::from_topics(self.doc_z(d)))
            .collect();
        for (&w, &t) in corpus.tokens().iter().zip(&self.z) {
            self.word_topic[t as usize * self.v + w as usize] += 1;
            self.topic_totals[t as usize] += 1;
        }
    }

    /// Counts rebuilt from `z` alone.
    pub fn recount(&self, corpus: &Corpus) -> TopicState {
        let mut s = self.clone();
        s.rebuild_counts(corpus);
        s
    }

    /// Verifies every count invariant against a from-scratch recount.
    pub fn check_consistency(&self, corpus: &Corpus) -> Result<()> {
        for (d, dt) in self.doc_topics.iter().enumerate() {
            if dt.total() as usize != self.doc_len(d) {
                return Err(Error::State(format!("document {d} counts do not sum to N_d")));
            }
        }
        for k in 0..self.k {
            let row: u64 = self.word_topic_row(k).iter().map(|&c| c as u64).sum();
            if row != self.topic_totals[k] {
                return Err(Error::State(format!("topic {k} row sum differs from n_k")));
            }
        }
        if self.topic_totals.iter().sum::<u64>() != self.z.len() as u64 {
            return Err(Error::State("topic totals do not sum to N".into()));
        }
        if *self != self.recount(corpus) {
            return Err(Error::State("incremental counts differ from recount".into()));
        }
        Ok(())
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.v
    }

    pub fn num_docs(&self) -> usize {
        self.doc_offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.z.len()
    }

    pub fn corpus_fingerprint(&self) -> u64 {
        self.corpus_fingerprint
    }

    pub fn z(&self) -> &[u32] {
        &self.z
    }

    pub fn doc_range(&self, d: usize) -> std::ops::Range<usize> {
        self.doc_offsets[d]..self.doc_offsets[d + 1]
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.doc_offsets[d + 1] - self.doc_offsets[d]
    }

    pub fn doc_z(&self, d: usize) -> &[u32] {
        &self.z[self.doc_range(d)]
    }

    pub fn doc_topics(&self, d: usize) -> &DocTopics {
        &self.doc_topics[d]
    }

    #[inline]
    pub fn n_w(&self, k: usize, w: usize) -> u32 {
        self.word_topic[k * self.v + w]
    }

    pub fn word_topic(&self) -> &[u32] {
        &self.word_topic
    }

    pub fn word_topic_row(&self, k: usize) -> &[u32] {
        &self.word_topic[k * self.v..(k + 1) * self.v]
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    /// Dense D x K document-topic matrix, row-major.
    pub fn doc_topic_dense(&self) -> Vec<u32> {
        let mut out = vec![0; self.num_docs() * self.k];
        for (d, dt) in self.doc_topics.iter().enumerate() {
            dt.fill_dense(&mut out[d * self.k..(d + 1) * self.k]);
        }
        out
    }

    /// Fraction of positive entries in the topic-word matrix.
    pub fn sparsity_nw(&self) -> f64 {
        sparsity(&self.word_topic)
    }

    /// Fraction of positive entries in the document-topic matrix.
    pub fn sparsity_nd(&self) -> f64 {
        let total = self.num_docs() * self.k;
        if total == 0 {
            return 0.0;
        }
        self.doc_topics.iter().map(DocTopics::len).sum::<usize>() as f64 / total as f64
    }

    /// Removes token `i` (of document `d`, word `w`) from all counts.
    #[inline]
    pub fn remove_token(&mut self, d: usize, i: usize, w: u32) -> u32 {
        let t = self.z[i];
        self.doc_topics[d].decrement(t);
        self.word_topic[t as usize * self.v + w as usize] -= 1;
        self.topic_totals[t as usize] -= 1;
        t
    }

    /// Assigns token `i` to topic `t` and adds it back to all counts.
    #[inline]
    pub fn add_token(&mut self, d: usize, i: usize, w: u32, t: u32) {
        self.z[i] = t;
        self.doc_topics[d].increment(t);
        self.word_topic[t as usize * self.v + w as usize] += 1;
        self.topic_totals[t as usize] += 1;
    }

    /// Splits the state into per-document slots plus the global topic-word
    /// and topic-total counts.
    pub fn split_mut(&mut self) -> (Vec<DocSlot<'_>>, &mut [u32], &mut [u64]) {
        let mut slots = Vec::with_capacity(self.doc_topics.len());
        let mut rest: &mut [u32] = &mut self.z;
        for (d, topics) in self.doc_topics.iter_mut().enumerate() {
            let len = self.doc_offsets[d + 1] - self.doc_offsets[d];
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            slots.push(DocSlot { doc: d, z: head, topics });
        }
        (slots, &mut self.word_topic, &mut self.topic_totals)
    }

    /// Applies recorded moves to the topic-word and topic-total counts.
    pub fn apply_moves(&mut self, moves: &[Move]) {
        for m in moves {
            self.word_topic[m.from as usize * self.v + m.word as usize] -= 1;
            self.word_topic[m.to as usize * self.v + m.word as usize] += 1;
            self.topic_totals[m.from as usize] -= 1;
            self.topic_totals[m.to as usize] += 1;
        }
    }

    /// Replaces the topic-word and topic-total counts wholesale.
    pub(crate) fn set_word_counts(&mut self, word_topic: Vec<u32>, topic_totals: Vec<u64>) {
        debug_assert_eq!(word_topic.len(), self.k * self.v);
        debug_assert_eq!(topic_totals.len(), self.k);
        self.word_topic = word_topic;
        self.topic_totals = topic_totals;
    }

    /// Writes the versioned binary snapshot: magic, version, then
    /// little-endian K, corpus fingerprint, N (u64) and the indicators (u32).
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(STATE_MAGIC)?;
        out.write_all(&STATE_VERSION.to_le_bytes())?;
        out.write_all(&(self.k as u64).to_le_bytes())?;
        out.write_all(&self.corpus_fingerprint.to_le_bytes())?;
        out.write_all(&(self.z.len() as u64).to_le_bytes())?;
        for &t in &self.z {
            out.write_all(&t.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Restores a snapshot written for `corpus`, rebuilding all counts.
    pub fn read_snapshot<R: Read>(corpus: &Corpus, mut r: R) -> Result<Self> {
        let magic: [u8; 8] = read_exact(&mut r)?;
        if &magic != STATE_MAGIC {
            return Err(Error::Format("not a state snapshot (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_exact(&mut r)?);
        if version != STATE_VERSION {
            return Err(Error::Format(format!(
                "unsupported state snapshot version {version}"
            )));
        }
        let k = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        let fingerprint = u64::from_le_bytes(read_exact(&mut r)?);
        if fingerprint != corpus.fingerprint() {
            return Err(Error::Format(format!(
                "snapshot was taken for corpus {fingerprint:016x}, not {:016x}",
                corpus.fingerprint()
            )));
        }
        let n = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            z.push(u32::from_le_bytes(read_exact(&mut r)?));
        }
        TopicState::from_assignments(corpus, k, z)
    }
}

const STATE_MAGIC: &[u8; 8] = b"PCLDAZST";
const STATE_VERSION: u32 = 1;

/// Fraction of strictly positive entries.
pub fn sparsity(matrix: &[u32]) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    matrix.iter().filter(|&&c| c > 0).count() as f64 / matrix.len() as f64
}

/// K x V topic-word probabilities; each row is a point on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    k: usize,
    v: usize,
    data: Vec<f64>,
}

impl PhiMatrix {
    pub fn from_rows(k: usize, v: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * v {
            return Err(Error::State(format!(
                "phi needs {} entries, got {}",
                k * v,
                data.len()
            )));
        }
        let phi = PhiMatrix { k, v, data };
        phi.check()?;
        Ok(phi)
    }

    pub(crate) fn from_rows_unchecked(k: usize, v: usize, data: Vec<f64>) -> Self {
        PhiMatrix { k, v, data }
    }

    /// Rows sum to one and hold at least one positive entry.
    pub fn check(&self) -> Result<()> {
        for k in 0..self.k {
            let row = self.row(k);
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::State(format!("phi row {k} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if self.v > 0 && (s - 1.0).abs() > 1e-12 {
                return Err(Error::State(format!("phi row {k} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.v
    }

    #[inline]
    pub fn get(&self, k: usize, w: usize) -> f64 {
        self.data[k * self.v + w]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.v..(k + 1) * self.v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column `w` as a length-K vector.
    pub fn column(&self, w: usize) -> Vec<f64> {
        (0..self.k).map(|k| self.get(k, w)).collect()
    }
}
