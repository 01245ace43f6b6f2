//! Bag-of-words corpora: UCI ingestion, vocabulary pruning and a binary
//! snapshot format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An immutable tokenized corpus.
///
/// Tokens of all documents are stored contiguously; `doc_offsets[d]..doc_offsets[d + 1]`
/// is document `d`. No document is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    doc_offsets: Vec<usize>,
    tokens: Vec<u32>,
    vocab: Vec<String>,
    report: PruneReport,
}

/// What construction or pruning removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub dropped_types: usize,
    pub dropped_docs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n: usize,
    pub d: usize,
    pub v: usize,
    pub mean_doc_length: f64,
}

impl Corpus {
    /// Builds a corpus from per-document token lists. Empty documents are
    /// dropped and counted in the report.
    pub fn from_docs(docs: Vec<Vec<u32>>, vocab: Vec<String>) -> Result<Self> {
        let v = vocab.len();
        let mut doc_offsets = Vec::with_capacity(docs.len() + 1);
        doc_offsets.push(0);
        let mut tokens = Vec::with_capacity(docs.iter().map(Vec::len).sum());
        let mut dropped_docs = 0;
        for (d, doc) in docs.into_iter().enumerate() {
            if doc.is_empty() {
                dropped_docs += 1;
                continue;
            }
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= v) {
                return Err(Error::Bounds {
                    line: 0,
                    msg: format!("document {d} has word id {w} but V = {v}"),
                });
            }
            tokens.extend_from_slice(&doc);
            doc_offsets.push(tokens.len());
        }
        Ok(Corpus {
            doc_offsets,
            tokens,
            vocab,
            report: PruneReport {
                dropped_types: 0,
                dropped_docs,
            },
        })
    }

    /// Corpus with synthetic vocabulary names `w0, w1, ...`.
    pub fn from_docs_with_vocab_size(docs: Vec<Vec<u32>>, v: usize) -> Result<Self> {
        Corpus::from_docs(docs, (0..v).map(|i| format!("w{i}")).collect())
    }

    pub fn num_docs(&self) -> usize {
        self.doc_offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn doc(&self, d: usize) -> &[u32] {
        &self.tokens[self.doc_offsets[d]..self.doc_offsets[d + 1]]
    }

    pub fn docs(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        (0..self.num_docs()).map(move |d| self.doc(d))
    }

    pub fn doc_offsets(&self) -> &[usize] {
        &self.doc_offsets
    }

    /// All tokens, document after document.
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn report(&self) -> PruneReport {
        self.report
    }

    pub fn stats(&self) -> CorpusStats {
        corpus_stats(self)
    }

    /// Total frequency of every word type.
    pub fn type_frequencies(&self) -> Vec<u64> {
        let mut tf = vec![0u64; self.vocab_size()];
        for &w in &self.tokens {
            tf[w as usize] += 1;
        }
        tf
    }

    /// Number of documents containing each word type.
    pub fn document_frequencies(&self) -> Vec<u64> {
        let mut df = vec![0u64; self.vocab_size()];
        let mut last_seen = vec![usize::MAX; self.vocab_size()];
        for (d, doc) in self.docs().enumerate() {
            for &w in doc {
                if last_seen[w as usize] != d {
                    last_seen[w as usize] = d;
                    df[w as usize] += 1;
                }
            }
        }
        df
    }

    /// Stable 64-bit content hash of vocabulary size, document boundaries and tokens.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.vocab_size() as u64).to_le_bytes());
        for &o in &self.doc_offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &t in &self.tokens {
            h.update(t.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
    }

    /// Keeps the word types flagged in `keep`, re-indexing densely in
    /// original id order and dropping documents that become empty.
    fn retain_types(&self, keep: &[bool]) -> Corpus {
        let mut remap = vec![u32::MAX; self.vocab_size()];
        let mut vocab = Vec::new();
        for (w, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            remap[w] = vocab.len() as u32;
            vocab.push(self.vocab[w].clone());
        }
        let docs: Vec<Vec<u32>> = self
            .docs()
            .map(|doc| {
                doc.iter()
                    .filter_map(|&w| match remap[w as usize] {
                        u32::MAX => None,
                        id => Some(id),
                    })
                    .collect()
            })
            .collect();
        let mut out = Corpus::from_docs(docs, vocab).expect("remapped ids are in range");
        out.report = PruneReport {
            dropped_types: self.report.dropped_types + (self.vocab_size() - out.vocab_size()),
            dropped_docs: self.report.dropped_docs + out.report.dropped_docs,
        };
        out
    }

    /// Rebuilds the UCI `(doc, word, count)` triples, 1-indexed, sorted by
    /// document then word.
    pub fn to_uci_triples(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for (d, doc) in self.docs().enumerate() {
            let mut counts: HashMap<u32, u64> = HashMap::new();
            for &w in doc {
                *counts.entry(w).or_default() += 1;
            }
            let mut row: Vec<_> = counts.into_iter().collect();
            row.sort_unstable();
            out.extend(row.into_iter().map(|(w, c)| (d + 1, w as usize + 1, c)));
        }
        out
    }

    /// Writes the corpus back out in UCI bag-of-words form.
    pub fn write_uci<W1: Write, W2: Write>(&self, mut docword: W1, mut vocab: W2) -> Result<()> {
        let triples = self.to_uci_triples();
        writeln!(docword, "{}", self.num_docs())?;
        writeln!(docword, "{}", self.vocab_size())?;
        writeln!(docword, "{}", triples.len())?;
        for (d, w, c) in triples {
            writeln!(docword, "{d} {w} {c}")?;
        }
        for word in &self.vocab {
            writeln!(vocab, "{word}")?;
        }
        Ok(())
    }
}

fn parse_header_line(line: Option<(usize, String)>, what: &str) -> Result<usize> {
    let (no, text) = line.ok_or_else(|| Error::Parse {
        line: 0,
        msg: format!("missing header line for {what}"),
    })?;
    text.trim().parse::<usize>().map_err(|_| Error::Parse {
        line: no,
        msg: format!("expected {what} as a nonnegative integer, got {:?}", text.trim()),
    })
}

/// Parses a UCI bag-of-words corpus (`docword` and `vocab` streams).
///
/// Each `docId wordId count` triple expands to `count` tokens of word
/// `wordId - 1` appended to document `docId - 1` in the order read.
pub fn parse_uci_bagofwords<R1: BufRead, R2: BufRead>(docword: R1, vocab: R2) -> Result<Corpus> {
    let mut lines = docword
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)));
    let mut next_line = || -> Result<Option<(usize, String)>> {
        for l in lines.by_ref() {
            let (no, s) = l?;
            if !s.trim().is_empty() {
                return Ok(Some((no, s)));
            }
        }
        Ok(None)
    };

    let d = parse_header_line(next_line()?, "D")?;
    let v = parse_header_line(next_line()?, "V")?;
    let nnz = parse_header_line(next_line()?, "NNZ")?;

    let mut docs: Vec<Vec<u32>> = vec![Vec::new(); d];
    let mut seen = 0usize;
    while let Some((no, text)) = next_line()? {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: no,
                msg: format!("expected `docId wordId count`, got {:?}", text.trim()),
            });
        }
        let int = |s: &str| {
            s.parse::<i64>().map_err(|_| Error::Parse {
                line: no,
                msg: format!("not an integer: {s:?}"),
            })
        };
        let (doc_id, word_id, count) = (int(fields[0])?, int(fields[1])?, int(fields[2])?);
        if doc_id < 1 || doc_id as usize > d {
            return Err(Error::Bounds {
                line: no,
                msg: format!("docId {doc_id} outside 1..={d}"),
            });
        }
        if word_id < 1 || word_id as usize > v {
            return Err(Error::Bounds {
                line: no,
                msg: format!("wordId {word_id} outside 1..={v}"),
            });
        }
        if count < 1 {
            return Err(Error::Value {
                line: no,
                msg: format!("count must be positive, got {count}"),
            });
        }
        let doc = &mut docs[doc_id as usize - 1];
        doc.extend(std::iter::repeat_n(word_id as u32 - 1, count as usize));
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse {
            line: 3,
            msg: format!("header announces {nnz} triples but {seen} were read"),
        });
    }

    let mut words = Vec::with_capacity(v);
    for (i, l) in vocab.lines().enumerate() {
        let l = l?;
        let w = l.trim();
        if w.is_empty() {
            continue;
        }
        if words.len() == v {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("vocabulary has more than V = {v} entries"),
            });
        }
        words.push(w.to_string());
    }
    if words.len() != v {
        return Err(Error::Parse {
            line: words.len(),
            msg: format!("vocabulary has {} entries but V = {v}", words.len()),
        });
    }

    Corpus::from_docs(docs, words)
}

/// Opens a text file, transparently decompressing gzip content.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Reads a UCI corpus from `docword.txt[.gz]` and `vocab.txt[.gz]`.
pub fn read_uci_files(docword: &Path, vocab: &Path) -> Result<Corpus> {
    let dw = open_text(docword)?;
    let vb = open_text(vocab)?;
    parse_uci_bagofwords(dw, vb).map_err(|e| match e {
        Error::RawIo(source) => Error::io(docword, source),
        other => other,
    })
}

/// Removes word types whose total frequency is below `min_count`.
pub fn prune_rare_words(c: &Corpus, min_count: u64) -> Result<Corpus> {
    if min_count == 0 {
        return Err(Error::domain("min_count must be at least 1"));
    }
    let tf = c.type_frequencies();
    let keep: Vec<bool> = tf.iter().map(|&f| f >= min_count).collect();
    Ok(c.retain_types(&keep))
}

/// TF-IDF score `tf(w) * ln(D / df(w))` of every word type; types that never
/// occur score 0.
pub fn tfidf_scores(c: &Corpus) -> Vec<f64> {
    let d = c.num_docs() as f64;
    c.type_frequencies()
        .iter()
        .zip(c.document_frequencies())
        .map(|(&tf, df)| {
            if tf == 0 {
                0.0
            } else {
                tf as f64 * (d / df as f64).ln()
            }
        })
        .collect()
}

/// Keeps the `v_max` word types with the highest TF-IDF score, ties going to
/// the lower word id.
pub fn select_vocab_tfidf(c: &Corpus, v_max: usize) -> Result<Corpus> {
    if v_max == 0 {
        return Err(Error::domain("v_max must be at least 1"));
    }
    if v_max >= c.vocab_size() {
        return Ok(c.clone());
    }
    let scores = tfidf_scores(c);
    let mut order: Vec<usize> = (0..c.vocab_size()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = vec![false; c.vocab_size()];
    for &w in &order[..v_max] {
        keep[w] = true;
    }
    Ok(c.retain_types(&keep))
}

pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    let (n, d) = (c.num_tokens(), c.num_docs());
    CorpusStats {
        n,
        d,
        v: c.vocab_size(),
        mean_doc_length: if d == 0 { 0.0 } else { n as f64 / d as f64 },
    }
}

const CORPUS_MAGIC: &[u8; 8] = b"PCLDACOR";
const CORPUS_VERSION: u32 = 1;

/// Writes the compact binary snapshot: magic, version, then little-endian
/// `D, V, N` (u64), length-prefixed vocabulary, document lengths (u64) and
/// tokens (u32).
pub fn write_corpus_snapshot<W: Write>(c: &Corpus, mut out: W) -> Result<()> {
    out.write_all(CORPUS_MAGIC)?;
    out.write_all(&CORPUS_VERSION.to_le_bytes())?;
    for x in [c.num_docs(), c.vocab_size(), c.num_tokens()] {
        out.write_all(&(x as u64).to_le_bytes())?;
    }
    for w in &c.vocab {
        out.write_all(&(w.len() as u32).to_le_bytes())?;
        out.write_all(w.as_bytes())?;
    }
    for doc in c.docs() {
        out.write_all(&(doc.len() as u64).to_le_bytes())?;
    }
    for &t in &c.tokens {
        out.write_all(&t.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

pub fn read_corpus_snapshot<R: Read>(mut r: R) -> Result<Corpus> {
    let magic: [u8; 8] = read_exact(&mut r)?;
    if &magic != CORPUS_MAGIC {
        return Err(Error::Format("not a corpus snapshot (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != CORPUS_VERSION {
        return Err(Error::Format(format!(
            "unsupported corpus snapshot version {version}"
        )));
    }
    let d = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let v = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let n = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut vocab = Vec::with_capacity(v);
    for _ in 0..v {
        let len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated vocabulary: {e}")))?;
        vocab.push(
            String::from_utf8(bytes).map_err(|e| Error::Format(format!("vocabulary entry: {e}")))?,
        );
    }
    let mut doc_offsets = Vec::with_capacity(d + 1);
    doc_offsets.push(0usize);
    for _ in 0..d {
        let len = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        if len == 0 {
            return Err(Error::Format("snapshot contains an empty document".into()));
        }
        doc_offsets.push(doc_offsets.last().unwrap() + len);
    }
    if *doc_offsets.last().unwrap() != n {
        return Err(Error::Format("document lengths do not sum to N".into()));
    }
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let t = u32::from_le_bytes(read_exact(&mut r)?);
        if t as usize >= v {
            return Err(Error::Format(format!("token id {t} out of range V = {v}")));
        }
        tokens.push(t);
    }
    Ok(Corpus {
        doc_offsets,
        tokens,
        vocab,
        report: PruneReport::default(),
    })
}
