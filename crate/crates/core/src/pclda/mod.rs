//! Partially collapsed Gibbs sampling: θ is integrated out, Φ is sampled.
//!
//! Each outer iteration draws Φ | z row by row, rebuilds one alias table per
//! word type, then resamples every indicator from
//! `p(z_i = k) ∝ φ[k, w] (α + n_d[k])` with documents processed in parallel.
//! The conditional splits into a prior bucket `α φ[k, w]`, served by the
//! word's alias table, and a document bucket `φ[k, w] n_d[k]`, which only
//! touches the document's nonzero topics.

mod light;

pub use light::{
    light_doc_accept, light_doc_accept_printed, light_doc_accept_simplified, light_doc_proposal,
    light_doc_proposal_excluding, light_pclda_sweep, light_word_accept, light_word_proposal,
    DocProposal,
};

use crate::corpus::Corpus;
use crate::error::Result;
use crate::par;
use crate::sampling::{normalize_ln_in_place, AliasTable, GammaSampler, Purpose, RngStream};
use crate::scheduler::{Task, WorkScheduler};
use crate::state::{DocTopics, HyperParams, Move, PhiMatrix, TopicState};
use crate::SweepStats;

/// Draws one Φ row from `Dir(counts + β)` restricted to `included` cells
/// (all cells when `None`); excluded cells are exactly zero.
pub(crate) fn sample_phi_row(
    counts: &[u32],
    included: Option<&[bool]>,
    beta: f64,
    beta_gamma: &GammaSampler,
    rng: &mut RngStream,
    out: &mut [f64],
) {
    for (w, (o, &n)) in out.iter_mut().zip(counts).enumerate() {
        if included.is_some_and(|inc| !inc[w]) {
            *o = f64::NEG_INFINITY;
            continue;
        }
        *o = if n == 0 {
            beta_gamma.sample_ln(rng)
        } else {
            GammaSampler::new(n as f64 + beta)
                .expect("shape is positive")
                .sample_ln(rng)
        };
    }
    normalize_ln_in_place(out);
    clamp_included(out, included);
}

/// Gamma(β) draws with small β can fall below the smallest normal double;
/// included cells are kept strictly positive so that a zero in Φ always
/// means "excluded".
pub(crate) fn clamp_included(out: &mut [f64], included: Option<&[bool]>) {
    for (w, o) in out.iter_mut().enumerate() {
        if *o < f64::MIN_POSITIVE && included.is_none_or(|inc| inc[w]) {
            *o = f64::MIN_POSITIVE;
        }
    }
}

/// Draws Φ | z: row `k` from `Dir(n_w[k, ·] + β)` using `rngs[k]`.
pub fn sample_phi(s: &TopicState, h: &HyperParams, rngs: Vec<RngStream>) -> PhiMatrix {
    assert_eq!(rngs.len(), h.k, "one random stream per topic");
    let v = s.vocab_size();
    let beta_gamma = GammaSampler::new(h.beta).expect("beta is positive");
    let mut rngs = rngs;
    let mut data = vec![0.0; h.k * v];
    let mut rows: Vec<(&mut [f64], RngStream)> = data
        .chunks_mut(v.max(1))
        .zip(rngs.drain(..))
        .collect();
    par::for_each_mut(&mut rows, |k, (row, rng)| {
        sample_phi_row(s.word_topic_row(k), None, h.beta, &beta_gamma, rng, row);
    });
    drop(rows);
    PhiMatrix::from_rows_unchecked(h.k, v, data)
}

/// Per-topic streams for the Φ draw of outer iteration `sweep`.
pub fn phi_streams(seed: u64, sweep: u64, k: usize) -> Vec<RngStream> {
    (0..k)
        .map(|t| RngStream::for_task(seed, Purpose::Phi, sweep, t as u64))
        .collect()
}

/// Draws θ_d | z from `Dir(n_d[d, ·] + α)`.
pub fn sample_theta(s: &TopicState, h: &HyperParams, d: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut row = vec![0u32; h.k];
    s.doc_topics(d).fill_dense(&mut row);
    let mut out: Vec<f64> = row
        .iter()
        .map(|&n| {
            GammaSampler::new(n as f64 + h.alpha)
                .expect("shape is positive")
                .sample_ln(rng)
        })
        .collect();
    normalize_ln_in_place(&mut out);
    clamp_included(&mut out, None);
    out
}

/// One alias table per word type over the (scaled) Φ column, plus the
/// cached column normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAliasSet {
    tables: Vec<Option<AliasTable>>,
    sigma: Vec<f64>,
}

impl WordAliasSet {
    /// Tables with weights `scale · φ[k, w]`. Columns without positive mass
    /// (word types no token uses) get no table.
    pub fn build(phi: &PhiMatrix, scale: f64) -> Self {
        let k = phi.num_topics();
        let tables: Vec<Option<AliasTable>> = par::map_range(phi.vocab_size(), |w| {
            let weights: Vec<f64> = (0..k).map(|t| scale * phi.get(t, w)).collect();
            AliasTable::new(&weights).ok()
        });
        let sigma = tables
            .iter()
            .map(|t| t.as_ref().map_or(0.0, AliasTable::sigma))
            .collect();
        WordAliasSet { tables, sigma }
    }

    #[inline]
    pub fn table(&self, w: usize) -> Option<&AliasTable> {
        self.tables[w].as_ref()
    }

    /// Cached `Σ_k scale · φ[k, w]`.
    #[inline]
    pub fn sigma(&self, w: usize) -> f64 {
        self.sigma[w]
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Prior-bucket tables (weights `α φ[·, w]`) built on the scheduler's pool.
pub fn build_word_alias_tables(phi: &PhiMatrix, h: &HyperParams, sched: &WorkScheduler) -> WordAliasSet {
    sched.install(|| WordAliasSet::build(phi, h.alpha))
}

/// The two-bucket decomposition of one token's conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBuckets {
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Running sum of `φ[k, w] n_d[k]` over the document's nonzero topics,
    /// aligned with its sorted `(topic, count)` entries.
    pub cumulative_b: Vec<f64>,
}

impl TokenBuckets {
    /// Exact probability of each topic under a bucketed draw with `alias`
    /// serving the prior bucket.
    pub fn exact_marginal(&self, alias: &AliasTable, doc_counts: &[(u32, u32)], k: usize) -> Vec<f64> {
        let total = self.sigma_a + self.sigma_b;
        let mut p: Vec<f64> = alias
            .outcome_probabilities()
            .into_iter()
            .map(|q| q * self.sigma_a / total)
            .collect();
        p.resize(k, 0.0);
        let mut prev = 0.0;
        for (&(t, _), &c) in doc_counts.iter().zip(&self.cumulative_b) {
            p[t as usize] += (c - prev) / total;
            prev = c;
        }
        p
    }
}

/// Fills `cumulative` with the document-bucket running sums; returns σ_b.
/// Iterates exactly `doc_counts.len()` (= K_d) entries.
#[inline]
fn fill_doc_bucket(phi: &PhiMatrix, doc_counts: &[(u32, u32)], w: usize, cumulative: &mut Vec<f64>) -> f64 {
    cumulative.clear();
    let mut acc = 0.0;
    for &(t, c) in doc_counts {
        acc += phi.get(t as usize, w) * c as f64;
        cumulative.push(acc);
    }
    acc
}

/// Bucket decomposition of `p(z_i = k) ∝ φ[k, w] (α + n_d[k])` for a token of
/// word `w`, given the document's counts without that token.
pub fn pclda_token_conditional(
    phi: &PhiMatrix,
    doc_counts: &DocTopics,
    w: usize,
    aliases: &WordAliasSet,
) -> TokenBuckets {
    let mut cumulative_b = Vec::with_capacity(doc_counts.len());
    let sigma_b = fill_doc_bucket(phi, doc_counts.entries(), w, &mut cumulative_b);
    TokenBuckets {
        sigma_a: aliases.sigma(w),
        sigma_b,
        cumulative_b,
    }
}

#[inline]
fn draw_from_buckets(
    sigma_a: f64,
    cumulative_b: &[f64],
    alias: Option<&AliasTable>,
    doc_counts: &[(u32, u32)],
    rng: &mut RngStream,
) -> u32 {
    let sigma_b = cumulative_b.last().copied().unwrap_or(0.0);
    let u = rng.uniform() * (sigma_a + sigma_b);
    match alias {
        Some(table) if u < sigma_a || sigma_b <= 0.0 => table.draw(rng) as u32,
        _ => {
            let target = u - sigma_a;
            let i = cumulative_b
                .partition_point(|&c| c <= target)
                .min(cumulative_b.len() - 1);
            doc_counts[i].0
        }
    }
}

/// Draws a topic: prior bucket through the alias table (O(1)), document
/// bucket by binary search over the cumulative weights (O(log K_d)).
pub fn pclda_draw_token(
    b: &TokenBuckets,
    alias: &AliasTable,
    doc_counts: &DocTopics,
    rng: &mut RngStream,
) -> u32 {
    draw_from_buckets(b.sigma_a, &b.cumulative_b, Some(alias), doc_counts.entries(), rng)
}

struct PcldaWorker {
    moves: Vec<Move>,
    cumulative: Vec<f64>,
    inner: u64,
}

/// Resamples every indicator from its partially collapsed conditional.
/// Documents are stolen between workers; each draws from its own stream
/// `(seed, sweep, doc)`, so the result does not depend on the schedule.
#[allow(clippy::too_many_arguments)]
pub fn pclda_sweep(
    corpus: &Corpus,
    s: &mut TopicState,
    phi: &PhiMatrix,
    aliases: &WordAliasSet,
    sched: &WorkScheduler,
    seed: u64,
    sweep: u64,
) -> Result<SweepStats> {
    let k = s.num_topics();
    let (slots, _, _) = s.split_mut();
    let tasks = slots
        .into_iter()
        .map(|slot| Task {
            id: slot.doc,
            cost: slot.z.len(),
            payload: slot,
        })
        .collect();
    let (workers, sched_stats) = sched.run(
        tasks,
        |_| PcldaWorker {
            moves: Vec::new(),
            cumulative: Vec::with_capacity(k),
            inner: 0,
        },
        |wk, slot| {
            let words = corpus.doc(slot.doc);
            let mut rng = RngStream::for_task(seed, Purpose::TopicIndicators, sweep, slot.doc as u64);
            for (zi, &w) in slot.z.iter_mut().zip(words) {
                let w = w as usize;
                let old = *zi;
                slot.topics.decrement(old);
                let entries = slot.topics.entries();
                fill_doc_bucket(phi, entries, w, &mut wk.cumulative);
                wk.inner += entries.len() as u64;
                let new = draw_from_buckets(aliases.sigma(w), &wk.cumulative, aliases.table(w), entries, &mut rng);
                slot.topics.increment(new);
                if new != old {
                    *zi = new;
                    wk.moves.push(Move {
                        word: w as u32,
                        from: old,
                        to: new,
                    });
                }
            }
            Ok(())
        },
    )?;
    let mut stats = SweepStats {
        steals: sched_stats.steals as u64,
        ..SweepStats::default()
    };
    for wk in workers {
        s.apply_moves(&wk.moves);
        stats.inner_loop_count += wk.inner;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_conditional(phi_col: &[f64], counts: &DocTopics, alpha: f64) -> Vec<f64> {
        let mut p: Vec<f64> = phi_col
            .iter()
            .enumerate()
            .map(|(k, f)| f * (alpha + counts.get(k as u32) as f64))
            .collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }

    fn phi_with_column(col: &[f64]) -> PhiMatrix {
        // V = 2: column 0 is `col`, column 1 takes the rest of each row
        let data: Vec<f64> = col.iter().flat_map(|&c| [c, 1.0 - c]).collect();
        PhiMatrix::from_rows(col.len(), 2, data).unwrap()
    }

    #[test]
    fn empty_document_uses_prior_bucket_only() {
        let phi = phi_with_column(&[0.6, 0.4]);
        let h = HyperParams::new(0.1, 0.01, 2).unwrap();
        let aliases = WordAliasSet::build(&phi, h.alpha);
        let counts = DocTopics::default();
        let b = pclda_token_conditional(&phi, &counts, 0, &aliases);
        assert_eq!(b.sigma_b, 0.0);
        let p = b.exact_marginal(aliases.table(0).unwrap(), counts.entries(), 2);
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12);
        let mut rng = RngStream::new(1, 1);
        // every draw goes through the alias path; both outcomes appear
        let ones = (0..10_000)
            .filter(|_| pclda_draw_token(&b, aliases.table(0).unwrap(), &counts, &mut rng) == 1)
            .count();
        assert!(ones > 3_000 && ones < 5_000);
    }

    #[test]
    fn four_topic_buckets_match_dense() {
        let phi = phi_with_column(&[0.1, 0.2, 0.3, 0.4]);
        let h = HyperParams::new(0.5, 0.01, 4).unwrap();
        let aliases = WordAliasSet::build(&phi, h.alpha);
        let counts = DocTopics::from_topics(&[1, 1, 3]);
        let b = pclda_token_conditional(&phi, &counts, 0, &aliases);
        // σ_a = 0.5 (0.1 + 0.2 + 0.3 + 0.4) = 0.5, σ_b = 0.2·2 + 0.4·1 = 0.8
        assert!((b.sigma_a - 0.5).abs() < 1e-12);
        assert!((b.sigma_b - 0.8).abs() < 1e-12);
        let dense = dense_conditional(&phi.column(0), &counts, h.alpha);
        let exact = b.exact_marginal(aliases.table(0).unwrap(), counts.entries(), 4);
        for (a, e) in dense.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_alpha_concentrates_on_document_topic() {
        let phi = phi_with_column(&[0.5, 0.5]);
        let aliases = WordAliasSet::build(&phi, 1e-12);
        let counts = DocTopics::from_topics(&[1, 1]);
        let b = pclda_token_conditional(&phi, &counts, 0, &aliases);
        let mut rng = RngStream::new(3, 3);
        let hits = (0..100_000)
            .filter(|_| pclda_draw_token(&b, aliases.table(0).unwrap(), &counts, &mut rng) == 1)
            .count();
        assert!(hits >= 99_990);
    }

    #[test]
    fn alias_sigma_caches_column_mass() {
        let s = TopicState::init(
            &Corpus::from_docs_with_vocab_size(vec![vec![0, 1, 2, 3, 3]], 4).unwrap(),
            3,
            1,
        )
        .unwrap();
        let h = HyperParams::new(0.7, 0.1, 3).unwrap();
        let phi = sample_phi(&s, &h, phi_streams(1, 0, 3));
        let aliases = WordAliasSet::build(&phi, h.alpha);
        for w in 0..4 {
            let col: f64 = phi.column(w).iter().sum();
            assert!((aliases.sigma(w) - h.alpha * col).abs() < 1e-12);
        }
    }

    #[test]
    fn single_topic_tables_are_degenerate() {
        let phi = PhiMatrix::from_rows(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        let aliases = WordAliasSet::build(&phi, 0.1);
        let mut rng = RngStream::new(0, 0);
        for w in 0..3 {
            assert!((aliases.sigma(w) - 0.1 * phi.get(0, w)).abs() < 1e-15);
            assert_eq!(aliases.table(w).unwrap().draw(&mut rng), 0);
        }
    }

    #[test]
    fn phi_rows_are_simplex_points() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 0, 1], vec![2, 3, 3, 3]], 4).unwrap();
        let s = TopicState::init(&c, 3, 2).unwrap();
        let h = HyperParams::new(0.1, 0.01, 3).unwrap();
        let phi = sample_phi(&s, &h, phi_streams(2, 0, 3));
        phi.check().unwrap();
    }

    #[test]
    fn phi_single_word_type() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 0]], 1).unwrap();
        let s = TopicState::init(&c, 2, 2).unwrap();
        let h = HyperParams::new(0.1, 0.01, 2).unwrap();
        let phi = sample_phi(&s, &h, phi_streams(2, 0, 2));
        assert_eq!(phi.as_slice(), &[1.0, 1.0]);
    }

    fn phi_row_mean(counts: Vec<u32>, beta: f64, draws: usize) -> Vec<f64> {
        // a single topic whose counts are given directly
        let docs = vec![counts
            .iter()
            .enumerate()
            .flat_map(|(w, &n)| std::iter::repeat_n(w as u32, n as usize))
            .collect::<Vec<u32>>()];
        let v = counts.len();
        let c = Corpus::from_docs_with_vocab_size(docs, v).unwrap();
        let s = TopicState::init(&c, 1, 0).unwrap();
        let h = HyperParams::new(0.1, beta, 1).unwrap();
        let mut mean = vec![0.0; v];
        for i in 0..draws {
            let phi = sample_phi(&s, &h, phi_streams(5, i as u64, 1));
            for (m, p) in mean.iter_mut().zip(phi.row(0)) {
                *m += p / draws as f64;
            }
        }
        mean
    }

    #[test]
    fn phi_mean_identity() {
        // Dir(99, 1) and Dir(99, 1, 1)
        let m = phi_row_mean(vec![98, 0], 1.0, 10_000);
        assert!((m[0] - 99.0 / 100.0).abs() < 0.005, "{m:?}");
        let m = phi_row_mean(vec![98, 0, 0], 1.0, 10_000);
        assert!((m[0] - 99.0 / 101.0).abs() < 0.005, "{m:?}");
    }

    #[test]
    fn theta_examples() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0; 10]], 1).unwrap();
        let z = [vec![0; 9], vec![1]].concat();
        let s = TopicState::from_assignments(&c, 2, z).unwrap();
        let h = HyperParams::new(0.5, 0.01, 2).unwrap();
        let mut rng = RngStream::new(1, 1);
        let n = 10_000;
        let m: f64 = (0..n).map(|_| sample_theta(&s, &h, 0, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((m - 9.5 / 11.0).abs() < 0.01);

        let s1 = TopicState::init(&c, 1, 0).unwrap();
        let h1 = HyperParams::new(0.5, 0.01, 1).unwrap();
        assert_eq!(sample_theta(&s1, &h1, 0, &mut rng), vec![1.0]);
    }

    #[test]
    fn sweep_preserves_invariants_and_counts_inner_loop() {
        let c = Corpus::from_docs_with_vocab_size(
            vec![vec![0, 1, 2, 0, 1], vec![3, 4, 3], vec![2, 2, 0, 4]],
            5,
        )
        .unwrap();
        let h = HyperParams::new(0.1, 0.01, 4).unwrap();
        let sched = WorkScheduler::new(2).unwrap();
        let mut s = TopicState::init(&c, 4, 3).unwrap();
        for sweep in 0..30 {
            let phi = sample_phi(&s, &h, phi_streams(3, sweep, 4));
            let aliases = build_word_alias_tables(&phi, &h, &sched);
            let before = s.clone();
            let stats = pclda_sweep(&c, &mut s, &phi, &aliases, &sched, 3, sweep).unwrap();
            s.check_consistency(&c).unwrap();
            assert_eq!(
                stats.inner_loop_count,
                crate::diagnostics::expected_inner_loop_count(&before, &s)
            );
        }
    }

    #[test]
    fn single_topic_sweep_keeps_z() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 1], vec![1, 1, 0]], 2).unwrap();
        let h = HyperParams::new(0.1, 0.01, 1).unwrap();
        let mut s = TopicState::init(&c, 1, 0).unwrap();
        let before = s.clone();
        let phi = sample_phi(&s, &h, phi_streams(0, 0, 1));
        let sched = WorkScheduler::sequential();
        let aliases = build_word_alias_tables(&phi, &h, &sched);
        let stats = pclda_sweep(&c, &mut s, &phi, &aliases, &sched, 0, 0).unwrap();
        assert_eq!(s, before);
        // every document has two or more tokens, so K_d = 1 in the -i state
        assert_eq!(stats.inner_loop_count, c.num_tokens() as u64);
    }
}
