//! Late-interaction scoring over multi-vector embeddings.
//!
//! Embeddings come from files or an external embedding service; this module
//! only scores them. A single-vector embedding is just the one-vector case,
//! so cosine ranking of dense embeddings falls out for free (assuming the
//! producer normalized its vectors).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

use super::{rank_and_truncate, RetrievalResult};

/// A unit's multi-vector embedding. All vectors share one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiVec {
    pub unit_id: String,
    pub vectors: Vec<Vec<f32>>,
}

impl MultiVec {
    pub fn new(unit_id: impl Into<String>, vectors: Vec<Vec<f32>>) -> Result<Self> {
        let unit_id = unit_id.into();
        let Some(first) = vectors.first() else {
            return Err(Error::InvalidInput(format!(
                "embedding for `{unit_id}` has no vectors"
            )));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput(format!(
                "embedding for `{unit_id}` has zero-dimensional vectors"
            )));
        }
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Ok(MultiVec { unit_id, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// MaxSim: for each query vector take the best dot product against the
/// document's vectors, then sum over query vectors.
pub fn maxsim_score(query: &MultiVec, doc: &MultiVec) -> Result<f64> {
    if query.dim() != doc.dim() {
        return Err(Error::DimensionMismatch {
            left: query.dim(),
            right: doc.dim(),
        });
    }
    let mut total = 0.0;
    for q in &query.vectors {
        let best = doc
            .vectors
            .iter()
            .map(|d| dot(q, d))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total)
}

/// Rank documents by MaxSim against the query; ties break by unit id.
pub fn rank_images(query: &MultiVec, docs: &[MultiVec], k: usize) -> Result<RetrievalResult> {
    let scores = par::map(docs, |d| maxsim_score(query, d));
    let mut scored = Vec::with_capacity(docs.len());
    for (doc, score) in docs.iter().zip(scores) {
        scored.push((doc.unit_id.clone(), score?));
    }
    Ok(rank_and_truncate(query.unit_id.clone(), scored, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(id: &str, vectors: Vec<Vec<f32>>) -> MultiVec {
        MultiVec::new(id, vectors).unwrap()
    }

    #[test]
    fn exact_and_orthogonal() {
        let q = mv("q", vec![vec![1.0, 0.0]]);
        let d1 = mv("d1", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d2 = mv("d2", vec![vec![0.0, 1.0]]);
        assert_eq!(maxsim_score(&q, &d1).unwrap(), 1.0);
        assert_eq!(maxsim_score(&q, &d2).unwrap(), 0.0);
    }

    #[test]
    fn sums_per_query_vector_maxima() {
        let q = mv("q", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = mv("d", vec![vec![0.5, 0.0], vec![0.0, 0.25]]);
        assert_eq!(maxsim_score(&q, &d).unwrap(), 0.75);
    }

    #[test]
    fn self_score_is_squared_norm_sum() {
        // holds for unit-norm vectors; compare in the same f32->f64 precision
        let q = mv("q", vec![vec![0.6, 0.8], vec![1.0, 0.0]]);
        let expected: f64 = q
            .vectors
            .iter()
            .map(|v| v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>())
            .sum();
        assert!((maxsim_score(&q, &q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn doc_vector_permutation_invariance() {
        let q = mv("q", vec![vec![0.3, 0.7], vec![0.9, 0.1]]);
        let d1 = mv("d", vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]);
        let d2 = mv("d", vec![vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(
            maxsim_score(&q, &d1).unwrap(),
            maxsim_score(&q, &d2).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let q = mv("q", vec![vec![1.0, 0.0]]);
        let d = mv("d", vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            maxsim_score(&q, &d).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
        assert!(MultiVec::new("bad", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(MultiVec::new("empty", vec![]).is_err());
    }

    #[test]
    fn ranking_orders_and_breaks_ties_by_id() {
        let q = mv("query-1", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let docs = vec![
            mv("b", vec![vec![0.0, 1.0]]),
            mv("a", vec![vec![0.0, 1.0]]),
            mv("c", vec![vec![0.5, 0.0], vec![0.0, 0.25]]),
        ];
        let res = rank_images(&q, &docs, 5).unwrap();
        assert_eq!(res.query_id, "query-1");
        let ids: Vec<&str> = res.ranked.iter().map(|r| r.unit_id.as_str()).collect();
        // c scores 0.75; a and b tie at 1.0 (each: max dot over one vector
        // per query vector: 0.0 + 1.0) and sort by id
        assert_eq!(ids, vec!["a", "b", "c"]);

        let top1 = rank_images(&q, &docs, 1).unwrap();
        assert_eq!(top1.ranked.len(), 1);
    }
}
