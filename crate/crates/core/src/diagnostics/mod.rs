//! Chain diagnostics: marginal log-likelihood, inefficiency factors, the
//! exact posterior by enumeration, the complexity cost model and the
//! inner-loop audit.

mod iact;
mod inefficiency;
mod trace;

pub use iact::{iact, iact_ar, iact_batch_means, IactEstimate};
pub use inefficiency::{
    inefficiency_experiment, write_inefficiency_csv, InefficiencyConfig, InefficiencyReport,
    InefficiencyRow, ParameterKind,
};
pub use trace::{timing_path, RunTrace, TraceRecord};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par;
use crate::state::{HyperParams, TopicState};

/// `log p(w, z | α, β)` with θ and Φ integrated out.
pub fn marginal_loglik(s: &TopicState, h: &HyperParams) -> f64 {
    let (ln_ga, ln_gb) = (ln_gamma(h.alpha), ln_gamma(h.beta));
    let k_alpha = h.k as f64 * h.alpha;
    let v_beta = s.vocab_size() as f64 * h.beta;
    let mut ll = 0.0;
    for d in 0..s.num_docs() {
        for &(_, c) in s.doc_topics(d).entries() {
            ll += ln_gamma(c as f64 + h.alpha) - ln_ga;
        }
        ll += ln_gamma(k_alpha) - ln_gamma(s.doc_len(d) as f64 + k_alpha);
    }
    for k in 0..h.k {
        for &c in s.word_topic_row(k).iter().filter(|&&c| c > 0) {
            ll += ln_gamma(c as f64 + h.beta) - ln_gb;
        }
        ll += ln_gamma(v_beta) - ln_gamma(s.topic_totals()[k] as f64 + v_beta);
    }
    ll
}

/// Exact posterior `p(z | w)` over every indicator configuration.
///
/// Configuration index `Σ_i z_i K^i` (token 0 is the least significant
/// digit, tokens in corpus order).
#[derive(Debug, Clone)]
pub struct Posterior {
    k: usize,
    n: usize,
    probs: Vec<f64>,
}

impl Posterior {
    pub const MAX_STATES: usize = 2_000_000;

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn index_of(&self, z: &[u32]) -> usize {
        debug_assert_eq!(z.len(), self.n);
        z.iter().rev().fold(0, |acc, &t| acc * self.k + t as usize)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<u32> {
        (0..self.n)
            .map(|_| {
                let t = idx % self.k;
                idx /= self.k;
                t as u32
            })
            .collect()
    }

    pub fn prob(&self, z: &[u32]) -> f64 {
        self.probs[self.index_of(z)]
    }

    /// Total-variation distance to an empirical histogram over configurations.
    pub fn tv_distance(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        0.5 * self
            .probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / total as f64).abs())
            .sum::<f64>()
    }
}

/// Enumerates `p(z | w) ∝ exp(marginal_loglik)` over all `K^N` configurations.
pub fn enumerate_posterior(c: &Corpus, h: &HyperParams) -> Result<Posterior> {
    let n = c.num_tokens();
    let states = (h.k as f64).powi(n as i32);
    if states > Posterior::MAX_STATES as f64 {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: Posterior::MAX_STATES,
        });
    }
    let states = states as usize;
    const BLOCK: usize = 4096;
    let blocks = states.div_ceil(BLOCK);
    let lls: Vec<Vec<f64>> = par::map_range(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(states);
        (lo..hi)
            .map(|idx| {
                let mut rest = idx;
                let z: Vec<u32> = (0..n)
                    .map(|_| {
                        let t = rest % h.k;
                        rest /= h.k;
                        t as u32
                    })
                    .collect();
                let s = TopicState::from_assignments(c, h.k, z).expect("valid configuration");
                marginal_loglik(&s, h)
            })
            .collect()
    });
    let mut probs: Vec<f64> = lls.into_iter().flatten().collect();
    crate::sampling::normalize_ln_in_place(&mut probs);
    Ok(Posterior { k: h.k, n, probs })
}

/// Predicted per-sweep costs of the z-phase and the Φ-phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub z_cost: f64,
    pub phi_cost: f64,
    pub ratio: f64,
}

/// Cost model with vocabulary growth `V = ξ N^b` and topic growth
/// `K = γ log(1 + N/γ)`: the Φ-phase costs `K V`, the z-phase `Σ_i K_d(i)`.
pub fn cost_model(n: f64, xi: f64, heaps_exp: f64, gamma_dp: f64, sum_kd: f64) -> Result<CostModel> {
    if !(n > 0.0) {
        return Err(Error::domain(format!("N must be positive, got {n}")));
    }
    if !(xi > 0.0) {
        return Err(Error::domain(format!("Heaps coefficient must be positive, got {xi}")));
    }
    if !(heaps_exp > 0.0 && heaps_exp < 1.0) {
        return Err(Error::domain(format!(
            "Heaps exponent must lie in (0, 1), got {heaps_exp}"
        )));
    }
    if !(gamma_dp > 0.0) {
        return Err(Error::domain(format!("DP precision must be positive, got {gamma_dp}")));
    }
    if !(sum_kd > 0.0) {
        return Err(Error::domain(format!("sum of K_d must be positive, got {sum_kd}")));
    }
    let k = gamma_dp * (1.0 + n / gamma_dp).ln();
    let v = xi * n.powf(heaps_exp);
    let phi_cost = k * v;
    Ok(CostModel {
        z_cost: sum_kd,
        phi_cost,
        ratio: phi_cost / sum_kd,
    })
}

/// Independent count of the document-bucket iterations a sparse sweep should
/// perform going from `before` to `after`: for each token, the number of
/// nonzero topics in its document with the token removed, where earlier
/// positions already hold their new topics.
pub fn expected_inner_loop_count(before: &TopicState, after: &TopicState) -> u64 {
    let k = before.num_topics();
    let mut counts = vec![0u32; k];
    let mut total = 0u64;
    for d in 0..before.num_docs() {
        counts.fill(0);
        for &t in before.doc_z(d) {
            counts[t as usize] += 1;
        }
        let mut nonzero = counts.iter().filter(|&&c| c > 0).count() as u64;
        for (&old, &new) in before.doc_z(d).iter().zip(after.doc_z(d)) {
            counts[old as usize] -= 1;
            if counts[old as usize] == 0 {
                nonzero -= 1;
            }
            total += nonzero;
            if counts[new as usize] == 0 {
                nonzero += 1;
            }
            counts[new as usize] += 1;
        }
    }
    total
}

/// True iff a recorded inner-loop count equals the independent recount.
pub fn loop_count_audit(recorded: u64, before: &TopicState, after: &TopicState) -> bool {
    recorded == expected_inner_loop_count(before, after)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_loglik_is_zero() {
        let c = Corpus::from_docs_with_vocab_size(vec![], 3).unwrap();
        let s = TopicState::init(&c, 2, 0).unwrap();
        let h = HyperParams::new(0.1, 0.01, 2).unwrap();
        assert_eq!(marginal_loglik(&s, &h), 0.0);
    }

    #[test]
    fn forced_single_token_has_zero_loglik() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0]], 1).unwrap();
        let s = TopicState::init(&c, 1, 0).unwrap();
        let h = HyperParams::new(0.3, 0.7, 1).unwrap();
        assert!(marginal_loglik(&s, &h).abs() < 1e-14);
    }

    #[test]
    fn loglik_hand_example() {
        // one document, words (0, 1) in topics (0, 1), α = β = 1:
        // p(z) = B(2, 2)/B(1, 1) = 1/6, p(w | z) = (1/2)(1/2)  ->  log(1/24)
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 1]], 2).unwrap();
        let s = TopicState::from_assignments(&c, 2, vec![0, 1]).unwrap();
        let h = HyperParams::new(1.0, 1.0, 2).unwrap();
        assert!((marginal_loglik(&s, &h) - (1.0f64 / 24.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn loglik_invariant_under_relabeling_and_reordering() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 1, 2], vec![2, 1]], 3).unwrap();
        let h = HyperParams::new(0.2, 0.1, 3).unwrap();
        let s = TopicState::from_assignments(&c, 3, vec![0, 2, 1, 1, 0]).unwrap();
        let relabeled = TopicState::from_assignments(&c, 3, vec![1, 0, 2, 2, 1]).unwrap();
        assert!((marginal_loglik(&s, &h) - marginal_loglik(&relabeled, &h)).abs() < 1e-12);
        let c2 = Corpus::from_docs_with_vocab_size(vec![vec![2, 0, 1], vec![1, 2]], 3).unwrap();
        let s2 = TopicState::from_assignments(&c2, 3, vec![1, 0, 2, 0, 1]).unwrap();
        assert!((marginal_loglik(&s, &h) - marginal_loglik(&s2, &h)).abs() < 1e-12);
    }

    #[test]
    fn one_token_posterior_closed_form() {
        // p(z = k) ∝ (α / Kα) (β / Vβ): uniform over topics
        let c = Corpus::from_docs_with_vocab_size(vec![vec![1]], 3).unwrap();
        let h = HyperParams::new(0.1, 0.01, 4).unwrap();
        let post = enumerate_posterior(&c, &h).unwrap();
        assert_eq!(post.num_states(), 4);
        assert!(post.probs().iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn single_topic_posterior() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 1], vec![1]], 2).unwrap();
        let h = HyperParams::new(0.1, 0.01, 1).unwrap();
        let post = enumerate_posterior(&c, &h).unwrap();
        assert_eq!(post.probs(), &[1.0]);
    }

    #[test]
    fn posterior_label_symmetry_and_normalization() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0], vec![0]], 1).unwrap();
        let h = HyperParams::new(0.5, 0.5, 2).unwrap();
        let post = enumerate_posterior(&c, &h).unwrap();
        assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for idx in 0..post.num_states() {
            let z = post.decode(idx);
            let flipped: Vec<u32> = z.iter().map(|&t| 1 - t).collect();
            assert!((post.prob(&z) - post.prob(&flipped)).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_invariant_under_document_permutation() {
        let h = HyperParams::new(0.1, 0.05, 2).unwrap();
        let a = Corpus::from_docs_with_vocab_size(vec![vec![0, 1], vec![2]], 3).unwrap();
        let b = Corpus::from_docs_with_vocab_size(vec![vec![2], vec![0, 1]], 3).unwrap();
        let (pa, pb) = (enumerate_posterior(&a, &h).unwrap(), enumerate_posterior(&b, &h).unwrap());
        for idx in 0..pa.num_states() {
            let z = pa.decode(idx);
            let permuted = vec![z[2], z[0], z[1]];
            assert!((pa.prob(&z) - pb.prob(&permuted)).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_huge_state_space() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0; 30]], 1).unwrap();
        let h = HyperParams::new(0.1, 0.01, 2).unwrap();
        assert!(matches!(
            enumerate_posterior(&c, &h).unwrap_err(),
            Error::StateSpaceTooLarge { .. }
        ));
    }

    #[test]
    fn cost_model_examples() {
        let big = cost_model(1e6, 5.0, 0.4, 1.0, 1e6).unwrap();
        let small = cost_model(1e4, 5.0, 0.4, 1.0, 1e4).unwrap();
        assert!(big.ratio < small.ratio);
        assert_eq!(big.z_cost, 1e6);
        let unit = cost_model(1.0, 5.0, 0.5, 1.0, 1.0).unwrap();
        assert!((unit.phi_cost - 5.0 * 2f64.ln()).abs() < 1e-12);
        assert!(cost_model(1.0, 5.0, 1.0, 1.0, 1.0).is_err());
        assert!(cost_model(1.0, 0.0, 0.5, 1.0, 1.0).is_err());
        assert!(cost_model(1.0, 5.0, 0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn cost_ratio_decreases_past_crossover() {
        // d/dN [log(1 + N) N^(b - 1)] < 0 once log(1 + N) > 1/(1 - b) roughly
        for &(xi, b) in &[(5.0, 0.4), (50.0, 0.6), (20.0, 0.5)] {
            let grid: Vec<f64> = (4..=12).map(|e| 10f64.powi(e)).collect();
            let ratios: Vec<f64> = grid
                .iter()
                .map(|&n| cost_model(n, xi, b, 1.0, n).unwrap().ratio)
                .collect();
            assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
        }
    }

    #[test]
    fn inner_loop_oracle_single_topic() {
        let c = Corpus::from_docs_with_vocab_size(vec![vec![0, 1, 1], vec![2, 2]], 3).unwrap();
        let s = TopicState::init(&c, 1, 0).unwrap();
        assert_eq!(expected_inner_loop_count(&s, &s), c.num_tokens() as u64);
        assert!(loop_count_audit(5, &s, &s));
        assert!(!loop_count_audit(4, &s, &s));
    }
}
