//! Okapi BM25 over normalized tokens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::normalize::normalize_text;
use super::{rank_and_truncate, RetrievalResult};

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub unit_id: String,
    pub tokens: Vec<String>,
}

/// Inverted index with BM25 parameters baked in.
///
/// Serialization keeps only documents and parameters; postings are rebuilt
/// on load via [`TextIndex::from_documents`].
#[derive(Debug, Clone)]
pub struct TextIndex {
    pub documents: Vec<IndexedDoc>,
    pub k1: f64,
    pub b: f64,
    avgdl: f64,
    postings: BTreeMap<String, Vec<(usize, u32)>>,
}

impl TextIndex {
    /// Rebuild the index from tokenized documents.
    pub fn from_documents(documents: Vec<IndexedDoc>, k1: f64, b: f64) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus("no documents to index"));
        }
        if k1 <= 0.0 || k1.is_nan() {
            return Err(Error::InvalidInput(format!("k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidInput(format!("b must be in [0,1], got {b}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.unit_id.clone()) {
                return Err(Error::DuplicateId(d.unit_id.clone()));
            }
        }
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        for (doc_idx, doc) in documents.iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for tok in &doc.tokens {
                *tf.entry(tok).or_insert(0) += 1;
            }
            for (tok, count) in tf {
                postings
                    .entry(tok.to_string())
                    .or_default()
                    .push((doc_idx, count));
            }
        }
        let total_len: usize = documents.iter().map(|d| d.tokens.len()).sum();
        let avgdl = total_len as f64 / documents.len() as f64;
        Ok(TextIndex {
            documents,
            k1,
            b,
            avgdl,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }
}

/// Build a BM25 index over `(unit_id, text)` units.
pub fn bm25_build(units: &[(String, String)], k1: f64, b: f64) -> Result<TextIndex> {
    let documents = units
        .iter()
        .map(|(unit_id, text)| IndexedDoc {
            unit_id: unit_id.clone(),
            tokens: normalize_text(text),
        })
        .collect();
    TextIndex::from_documents(documents, k1, b)
}

/// Score the query against the index and return the top `k` units.
///
/// score(q,d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1−b+b·dl/avgdl)) with
/// idf(t) = ln((N−df+0.5)/(df+0.5)+1), summed over distinct query terms.
/// Zero-score units are omitted.
pub fn bm25_query(index: &TextIndex, query_id: &str, query: &str, k: usize) -> RetrievalResult {
    let mut terms = normalize_text(query);
    terms.sort_unstable();
    terms.dedup();

    let n = index.documents.len() as f64;
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for term in &terms {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        for &(doc_idx, tf) in postings {
            let tf = f64::from(tf);
            let dl = index.documents[doc_idx].tokens.len() as f64;
            let norm = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl);
            *scores.entry(doc_idx).or_insert(0.0) += idf * tf * (index.k1 + 1.0) / norm;
        }
    }

    let scored: Vec<(String, f64)> = scores
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(doc_idx, s)| (index.documents[doc_idx].unit_id.clone(), s))
        .collect();
    rank_and_truncate(query_id.to_string(), scored, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn build_basics() {
        let idx = bm25_build(&units(&[("d1", "a b")]), DEFAULT_K1, DEFAULT_B).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.avgdl(), 2.0);

        let idx2 = bm25_build(
            &units(&[("d1", "a b"), ("d2", "a c")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        assert_eq!(idx2.df("a"), 2);
        assert_eq!(idx2.df("b"), 1);
    }

    #[test]
    fn duplicate_unit_id_is_rejected() {
        let err = bm25_build(
            &units(&[("d1", "a"), ("d1", "b")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            bm25_build(&[], DEFAULT_K1, DEFAULT_B).unwrap_err(),
            Error::EmptyCorpus(_)
        ));
    }

    #[test]
    fn hand_derived_score() {
        // score(d1) = ln((2-1+0.5)/(1+0.5)+1) * (1*2.5)/(1+1.5*1) = ln(2)
        let idx = bm25_build(
            &units(&[("d1", "cat sat"), ("d2", "dog ran")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        let res = bm25_query(&idx, "q", "cat", 5);
        assert_eq!(res.ranked.len(), 1);
        assert_eq!(res.ranked[0].unit_id, "d1");
        assert!((res.ranked[0].score - 2.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn term_in_one_doc_ranks_it_first() {
        let idx = bm25_build(
            &units(&[("d1", "alpha beta"), ("d2", "gamma delta")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        let res = bm25_query(&idx, "q", "gamma", 5);
        assert_eq!(res.ranked[0].unit_id, "d2");
    }

    #[test]
    fn unknown_terms_yield_empty_ranking() {
        let idx = bm25_build(&units(&[("d1", "cat")]), DEFAULT_K1, DEFAULT_B).unwrap();
        let res = bm25_query(&idx, "q", "zebra quokka", 5);
        assert!(res.ranked.is_empty());
    }
}
