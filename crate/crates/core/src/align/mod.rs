//! Anchor extraction and orthogonal alignment of translation embeddings.

mod anchors;
mod lexicon;
mod procrustes;

pub use anchors::{extract_anchors, AnchorPair};
pub use lexicon::{casefold, Lexicon};
pub use procrustes::{
    apply_map, fit_orthogonal, fit_procrustes, Alignment, OrthogonalMap, DEFAULT_MIN_ANCHORS,
    ORTHOGONALITY_TOLERANCE,
};
