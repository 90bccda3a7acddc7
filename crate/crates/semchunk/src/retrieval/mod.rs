//! Retrieval over chunk texts (BM25), chunk images (late-interaction MaxSim
//! over externally produced multi-vector embeddings), and the
//! evidence-inclusion retrieval metric (longest common subsequence).

pub mod bm25;
pub mod lcs;
pub mod maxsim;
pub mod normalize;

use serde::{Deserialize, Serialize};

pub use bm25::{bm25_build, bm25_query, TextIndex, DEFAULT_B, DEFAULT_K1};
pub use lcs::{lcs_len, lcs_score, LcsGranularity};
pub use maxsim::{maxsim_score, rank_images, MultiVec};
pub use normalize::{normalize_text, normalized_chars};

/// Default retrieval depth.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUnit {
    pub unit_id: String,
    pub score: f64,
}

/// Top-k retrieval output for one query: scores non-increasing, ties broken
/// by ascending unit id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub ranked: Vec<RankedUnit>,
    pub k: usize,
}

/// Sort scored units into canonical rank order and truncate to `k`.
pub(crate) fn rank_and_truncate(
    query_id: String,
    mut scored: Vec<(String, f64)>,
    k: usize,
) -> RetrievalResult {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    RetrievalResult {
        query_id,
        ranked: scored
            .into_iter()
            .map(|(unit_id, score)| RankedUnit { unit_id, score })
            .collect(),
        k,
    }
}
