//! Sentence-level translation quality scoring with BERTScore over
//! cross-lingually aligned contextual word embeddings.
//!
//! The pipeline merges WordPiece pieces into words, pairs translation words
//! with source words through a bilingual lexicon, fits an orthogonal map
//! between the two embedding spaces on those anchor pairs, scores each
//! translation by greedy cosine matching, and measures how well the scores
//! rank translations against human judgments.

pub mod align;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod merge;
pub mod pipeline;
pub mod score;
pub mod synth;

pub use align::{extract_anchors, fit_procrustes, Alignment, AnchorPair, Lexicon, OrthogonalMap};
pub use corpus::{load_corpus, Corpus, EmbeddedToken, TokenSequence};
pub use error::{Error, Result};
pub use eval::{evaluate, kendall, scores_to_ranks, spearman, CorrelationReport, RankedSample};
pub use merge::{merge_wordpieces, Merger, WordSequence, WordUnit};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use score::{greedy_match_score, score_pair, IdfTable, PairOutcome, ScoreMode, ScoreTriple};
pub use synth::{generate_synthetic, SyntheticSpec};
