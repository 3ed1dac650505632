use serde::{Deserialize, Serialize};

use super::lexicon::{casefold, Lexicon};
use crate::merge::{WordSequence, WordUnit};

/// A source word and a translation word judged to mean the same thing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub sentence_id: String,
    pub system_id: String,
    /// Index into the source sentence's words.
    pub source_index: usize,
    /// Index into the translation's words.
    pub target_index: usize,
    pub source: WordUnit,
    pub target: WordUnit,
}

/// Pairs translation words with source words through the lexicon.
///
/// Translation words are visited in order; each one takes the earliest
/// still-unpaired source word equal (after casefolding) to one of its lexicon
/// renderings. Repeated words therefore pair by occurrence order, and every
/// word takes part in at most one pair.
pub fn extract_anchors(
    source: &WordSequence,
    translation: &WordSequence,
    lexicon: &Lexicon,
) -> Vec<AnchorPair> {
    let folded_source: Vec<String> = source.texts().map(casefold).collect();
    let mut taken = vec![false; folded_source.len()];
    let mut pairs = Vec::new();

    for (target_index, word) in translation.words.iter().enumerate() {
        let renderings = lexicon.lookup(&word.text);
        if renderings.is_empty() {
            continue;
        }
        let hit = folded_source
            .iter()
            .enumerate()
            .find(|(i, s)| !taken[*i] && renderings.iter().any(|r| r == *s))
            .map(|(i, _)| i);
        if let Some(source_index) = hit {
            taken[source_index] = true;
            pairs.push(AnchorPair {
                sentence_id: source.sentence_id.clone(),
                system_id: translation.system_id.clone(),
                source_index,
                target_index,
                source: source.words[source_index].clone(),
                target: word.clone(),
            });
        }
    }
    pairs
}
