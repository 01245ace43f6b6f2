//! Corpora drawn from the LDA generative process, for tests and benchmarks.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::sampling::{sample_dirichlet, AliasTable, Purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    /// Tokens per document.
    pub doc_len: usize,
    pub alpha: f64,
    pub beta: f64,
    /// When set, each document mixes only this many topics (chosen uniformly
    /// without replacement).
    pub topics_per_doc: Option<usize>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            docs: 100,
            vocab: 500,
            topics: 10,
            doc_len: 100,
            alpha: 0.1,
            beta: 0.05,
            topics_per_doc: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Generating topic of every token, in corpus order.
    pub true_z: Vec<u32>,
    /// Generating topic-word distributions, `topics × vocab` row-major.
    pub true_phi: Vec<f64>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.docs == 0 || spec.vocab == 0 || spec.topics == 0 || spec.doc_len == 0 {
        return Err(Error::domain("synthetic corpus dimensions must be positive"));
    }
    let per_doc = spec.topics_per_doc.unwrap_or(spec.topics);
    if per_doc == 0 || per_doc > spec.topics {
        return Err(Error::domain(format!(
            "topics per document must lie in [1, {}], got {per_doc}",
            spec.topics
        )));
    }
    let mut phi = Vec::with_capacity(spec.topics * spec.vocab);
    let mut word_tables = Vec::with_capacity(spec.topics);
    for k in 0..spec.topics {
        let mut rng = RngStream::for_task(spec.seed, Purpose::Phi, 0, k as u64);
        let row = sample_dirichlet(&vec![spec.beta; spec.vocab], &mut rng)?;
        word_tables.push(AliasTable::new(&row)?);
        phi.extend(row);
    }
    let mut docs = Vec::with_capacity(spec.docs);
    let mut true_z = Vec::with_capacity(spec.docs * spec.doc_len);
    for d in 0..spec.docs {
        let mut rng = RngStream::for_task(spec.seed, Purpose::Theta, 0, d as u64);
        let mut topics: Vec<usize> = (0..spec.topics).collect();
        for i in 0..per_doc {
            let j = i + rng.below(spec.topics - i);
            topics.swap(i, j);
        }
        topics.truncate(per_doc);
        let theta = AliasTable::new(&sample_dirichlet(&vec![spec.alpha; per_doc], &mut rng)?)?;
        let doc: Vec<u32> = (0..spec.doc_len)
            .map(|_| {
                let k = topics[theta.draw(&mut rng)];
                true_z.push(k as u32);
                word_tables[k].draw(&mut rng) as u32
            })
            .collect();
        docs.push(doc);
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::from_docs_with_vocab_size(docs, spec.vocab)?,
        true_z,
        true_phi: phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec {
            docs: 20,
            vocab: 50,
            topics: 4,
            doc_len: 30,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.corpus.num_docs(), 20);
        assert_eq!(a.corpus.num_tokens(), 600);
        assert_eq!(a.corpus.tokens(), b.corpus.tokens());
        assert_eq!(a.true_z.len(), 600);
    }

    #[test]
    fn topics_per_doc_bounds_kd() {
        let spec = SyntheticSpec {
            docs: 30,
            topics: 50,
            topics_per_doc: Some(2),
            ..SyntheticSpec::default()
        };
        let g = generate(&spec).unwrap();
        for d in 0..30 {
            let mut ks: Vec<u32> = g.true_z[d * 100..(d + 1) * 100].to_vec();
            ks.sort_unstable();
            ks.dedup();
            assert!(ks.len() <= 2);
        }
        assert!(generate(&SyntheticSpec {
            topics_per_doc: Some(0),
            ..spec
        })
        .is_err());
    }
}
