//! Pairwise similarity primitives.
//!
//! [`token`] holds the purely token-level measures and deliberately has no
//! dependency on the score-producing engines next to it, so rule-based
//! labelling can use it without touching edit distances or embeddings.

pub mod embedding;
pub mod levenshtein;
pub mod tfidf;
pub mod token;

pub use embedding::{
    cosine, embed_batch, CommandProvider, EmbeddingProvider, EmbeddingVector, HashedNgramProvider,
};
pub use levenshtein::{
    bounded_distance, edit_distance, levenshtein_ratio, levenshtein_ratio_with, levenshtein_within,
    levenshtein_within_with, max_distance, RatioVariant,
};
pub use tfidf::{fit_tfidf, tfidf_cosine, TfidfModel};
pub use token::{subsequence_containment, token_jaccard};
