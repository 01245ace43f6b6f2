//! Light partially collapsed sampler: cyclic word and document
//! Metropolis-Hastings proposals, O(1) per token.

use serde::{Deserialize, Serialize};

use super::WordAliasSet;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::sampling::{AliasTable, Purpose, RngStream};
use crate::scheduler::{Task, WorkScheduler};
use crate::state::{HyperParams, Move, PhiMatrix, TopicState};
use crate::SweepStats;

/// Which document proposal (and matching acceptance rule) to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocProposal {
    /// `p_d ∝ n_d + α` with the current token counted; accepted with
    /// [`light_doc_accept`].
    #[default]
    Full,
    /// `p_d2 ∝ n_d^{-i} + α`; accepted with [`light_doc_accept_simplified`].
    ExcludeCurrent,
    /// `p_d` accepted with [`light_doc_accept_printed`]. Not reversible; kept
    /// for comparison only.
    FullPrintedRatio,
}

/// Word proposal: a topic drawn proportionally to the Φ column of the word.
#[inline]
pub fn light_word_proposal(alias_phi_w: &AliasTable, rng: &mut RngStream) -> u32 {
    alias_phi_w.draw(rng) as u32
}

/// Acceptance probability of a word proposal, from -i document counts of the
/// proposed and current topics.
#[inline]
pub fn light_word_accept(n_star_minus_i: u32, n_cur_minus_i: u32, h: &HyperParams) -> f64 {
    ((h.alpha + n_star_minus_i as f64) / (h.alpha + n_cur_minus_i as f64)).min(1.0)
}

/// Document proposal from the full document (current token included):
/// with probability `Kα / (Kα + N_d)` a uniform topic, otherwise the topic
/// of a uniformly chosen position.
#[inline]
pub fn light_doc_proposal(doc_z: &[u32], h: &HyperParams, rng: &mut RngStream) -> u32 {
    let prior_mass = h.k as f64 * h.alpha;
    let u = rng.uniform() * (prior_mass + doc_z.len() as f64);
    if u < prior_mass {
        ((u / h.alpha) as usize).min(h.k - 1) as u32
    } else {
        let j = ((u - prior_mass) as usize).min(doc_z.len() - 1);
        doc_z[j]
    }
}

/// Document proposal that skips position `i` (the token being resampled).
#[inline]
pub fn light_doc_proposal_excluding(doc_z: &[u32], i: usize, h: &HyperParams, rng: &mut RngStream) -> u32 {
    let prior_mass = h.k as f64 * h.alpha;
    let others = doc_z.len() - 1;
    let u = rng.uniform() * (prior_mass + others as f64);
    if u < prior_mass || others == 0 {
        ((u / h.alpha) as usize).min(h.k - 1) as u32
    } else {
        let j = ((u - prior_mass) as usize).min(others - 1);
        doc_z[if j >= i { j + 1 } else { j }]
    }
}

/// Metropolis-Hastings acceptance of a full-document proposal `z*` for a
/// token currently at `z_i`.
///
/// Target ratio `φ* (α + n*^{-i}) / (φ (α + n_cur^{-i}))` times proposal ratio
/// `q(z_i | state after the move) / q(z* | current state)`. After the move the
/// current topic holds `n_cur^{-i}` tokens, so the reverse proposal weight is
/// `α + n_cur^{-i}`; the forward weight uses the full count `n_star`.
///
/// `n_star = n_star_minus_i + 1` only when `z* = z_i` (the token itself is
/// counted), in which case nothing moves and the result is 1.
pub fn light_doc_accept(
    phi_star: f64,
    phi_cur: f64,
    n_star_minus_i: u32,
    n_cur_minus_i: u32,
    n_star: u32,
    _n_cur: u32,
    h: &HyperParams,
) -> Result<f64> {
    if n_star == n_star_minus_i + 1 {
        return Ok(1.0);
    }
    if !(phi_cur > 0.0) {
        return Err(Error::domain("current topic has zero probability for this word"));
    }
    let a = h.alpha;
    let num = phi_star * (a + n_star_minus_i as f64) * (a + n_cur_minus_i as f64);
    let den = phi_cur * (a + n_cur_minus_i as f64) * (a + n_star as f64);
    Ok((num / den).min(1.0))
}

/// The document acceptance ratio with the current topic's full count in the
/// proposal ratio, i.e. both proposal weights read from the current state.
pub fn light_doc_accept_printed(
    phi_star: f64,
    phi_cur: f64,
    n_star_minus_i: u32,
    n_cur_minus_i: u32,
    n_star: u32,
    n_cur: u32,
    h: &HyperParams,
) -> Result<f64> {
    if !(phi_cur > 0.0) {
        return Err(Error::domain("current topic has zero probability for this word"));
    }
    let a = h.alpha;
    let num = phi_star * (a + n_star_minus_i as f64) * (a + n_cur as f64);
    let den = phi_cur * (a + n_cur_minus_i as f64) * (a + n_star as f64);
    Ok((num / den).min(1.0))
}

/// Acceptance for the proposal that excludes the current token: `min(1, φ*/φ)`.
pub fn light_doc_accept_simplified(phi_star: f64, phi_cur: f64) -> Result<f64> {
    if !(phi_cur > 0.0) {
        return Err(Error::domain("current topic has zero probability for this word"));
    }
    Ok((phi_star / phi_cur).min(1.0))
}

#[derive(Default)]
struct LightWorker {
    moves: Vec<Move>,
    stats: SweepStats,
}

/// One light sweep: for every token a word-proposal MH step followed by a
/// document-proposal MH step, each committing before the next.
/// `word_aliases` must be built from the unscaled Φ columns.
#[allow(clippy::too_many_arguments)]
pub fn light_pclda_sweep(
    corpus: &Corpus,
    s: &mut TopicState,
    phi: &PhiMatrix,
    word_aliases: &WordAliasSet,
    h: &HyperParams,
    proposal: DocProposal,
    sched: &WorkScheduler,
    seed: u64,
    sweep: u64,
) -> Result<SweepStats> {
    let (slots, _, _) = s.split_mut();
    let tasks = slots
        .into_iter()
        .map(|slot| Task {
            id: slot.doc,
            cost: slot.z.len(),
            payload: slot,
        })
        .collect();
    let (workers, sched_stats) = sched.run(tasks, |_| LightWorker::default(), |wk, slot| {
        let words = corpus.doc(slot.doc);
        let mut rng = RngStream::for_task(seed, Purpose::TopicIndicators, sweep, slot.doc as u64);
        for (i, &w) in words.iter().enumerate() {
            let w = w as usize;
            let table = word_aliases.table(w).ok_or_else(|| {
                Error::State(format!("word {w} has no probability mass in any topic"))
            })?;

            // word proposal
            let cur = slot.z[i];
            let star = light_word_proposal(table, &mut rng);
            wk.stats.word_proposals += 1;
            let accept = if star == cur {
                1.0
            } else {
                let n_star = slot.topics.get(star);
                let n_cur = slot.topics.get(cur) - 1;
                light_word_accept(n_star, n_cur, h)
            };
            if star == cur || rng.uniform() < accept {
                wk.stats.word_accepts += 1;
                if star != cur {
                    slot.topics.decrement(cur);
                    slot.topics.increment(star);
                    slot.z[i] = star;
                    wk.moves.push(Move { word: w as u32, from: cur, to: star });
                }
            }

            // document proposal
            let cur = slot.z[i];
            let star = match proposal {
                DocProposal::ExcludeCurrent => light_doc_proposal_excluding(slot.z, i, h, &mut rng),
                _ => light_doc_proposal(slot.z, h, &mut rng),
            };
            wk.stats.doc_proposals += 1;
            if star == cur {
                wk.stats.doc_accepts += 1;
                continue;
            }
            let phi_star = phi.get(star as usize, w);
            let phi_cur = phi.get(cur as usize, w);
            let accept = if phi_cur <= 0.0 {
                // leaving a zero-probability assignment
                if phi_star > 0.0 { 1.0 } else { 0.0 }
            } else {
                let n_star = slot.topics.get(star);
                let n_cur = slot.topics.get(cur);
                match proposal {
                    DocProposal::Full => {
                        light_doc_accept(phi_star, phi_cur, n_star, n_cur - 1, n_star, n_cur, h)?
                    }
                    DocProposal::ExcludeCurrent => light_doc_accept_simplified(phi_star, phi_cur)?,
                    DocProposal::FullPrintedRatio => {
                        light_doc_accept_printed(phi_star, phi_cur, n_star, n_cur - 1, n_star, n_cur, h)?
                    }
                }
            };
            if rng.uniform() < accept {
                wk.stats.doc_accepts += 1;
                slot.topics.decrement(cur);
                slot.topics.increment(star);
                slot.z[i] = star;
                wk.moves.push(Move { word: w as u32, from: cur, to: star });
            }
        }
        Ok(())
    })?;
    let mut stats = SweepStats {
        steals: sched_stats.steals as u64,
        ..SweepStats::default()
    };
    for wk in workers {
        s.apply_moves(&wk.moves);
        stats.merge(&wk.stats);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(alpha: f64, k: usize) -> HyperParams {
        HyperParams::new(alpha, 0.01, k).unwrap()
    }

    #[test]
    fn word_accept_examples() {
        let h = h(0.1, 2);
        assert_eq!(light_word_accept(4, 1, &h), 1.0);
        assert!((light_word_accept(1, 4, &h) - 1.1 / 4.1).abs() < 1e-15);
        assert_eq!(light_word_accept(3, 3, &h), 1.0);
    }

    #[test]
    fn word_proposal_examples() {
        let mut rng = RngStream::new(1, 2);
        let single = AliasTable::new(&[0.3]).unwrap();
        assert_eq!(light_word_proposal(&single, &mut rng), 0);
        let forced = AliasTable::new(&[0.0, 1.0]).unwrap();
        assert!((0..1000).all(|_| light_word_proposal(&forced, &mut rng) == 1));
        let t = AliasTable::new(&[0.25, 0.75]).unwrap();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| light_word_proposal(&t, &mut rng) == 1).count();
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 3.0 * se);
    }

    #[test]
    fn doc_accept_examples() {
        let hp = h(0.1, 2);
        // z* = z_i: the full count exceeds the -i count by the token itself
        assert_eq!(light_doc_accept(0.3, 0.3, 1, 1, 2, 2, &hp).unwrap(), 1.0);
        assert_eq!(light_doc_accept_simplified(0.02, 0.04).unwrap(), 0.5);
        assert!(light_doc_accept(0.3, 0.0, 2, 1, 2, 2, &hp).is_err());
        assert!(light_doc_accept_simplified(0.3, 0.0).is_err());
    }

    #[test]
    fn doc_proposal_prior_phase_dominates_for_huge_alpha() {
        let hp = h(1e6, 2);
        let mut rng = RngStream::new(4, 4);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| light_doc_proposal(&[0, 0, 0], &hp, &mut rng) == 1)
            .count();
        let se = (0.25 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn doc_proposal_likelihood_phase() {
        let hp = h(1e-12, 2);
        let mut rng = RngStream::new(5, 5);
        let n = 1_000_000;
        let zeros = (0..n)
            .filter(|_| light_doc_proposal(&[0, 0, 0, 1], &hp, &mut rng) == 0)
            .count();
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.75).abs() < 3.0 * se);
    }

    #[test]
    fn excluding_proposal_never_returns_own_position() {
        let hp = h(1e-12, 3);
        let mut rng = RngStream::new(6, 6);
        // position 1 holds the only topic-2 token
        assert!((0..10_000).all(|_| light_doc_proposal_excluding(&[0, 2, 1], 1, &hp, &mut rng) != 2));
    }
}
