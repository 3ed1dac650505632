//! Merging of WordPiece continuation pieces into whole words.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddedToken, TokenSequence};

pub const DEFAULT_CONTINUATION_MARKER: &str = "##";

/// A whole word: the mean of the piece vectors it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordUnit {
    pub text: String,
    pub vector: Vec<f64>,
    /// Half-open range of piece indices in the originating [`TokenSequence`].
    pub piece_span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSequence {
    pub sentence_id: String,
    pub lang: String,
    pub system_id: String,
    pub text: String,
    pub words: Vec<WordUnit>,
}

impl WordSequence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.text.as_str())
    }

    /// Re-encodes the words as marker-free tokens.
    pub fn to_tokens(&self) -> TokenSequence {
        TokenSequence {
            sentence_id: self.sentence_id.clone(),
            lang: self.lang.clone(),
            system_id: self.system_id.clone(),
            text: self.text.clone(),
            tokens: self
                .words
                .iter()
                .map(|w| EmbeddedToken::new(w.text.clone(), w.vector.clone()))
                .collect(),
        }
    }
}

/// Groups each head piece with the continuation pieces that follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merger {
    marker: String,
}

impl Default for Merger {
    fn default() -> Self {
        Self::new(DEFAULT_CONTINUATION_MARKER)
    }
}

impl Merger {
    pub fn new(marker: impl Into<String>) -> Self {
        let marker = marker.into();
        assert!(!marker.is_empty(), "continuation marker must be non-empty");
        Self { marker }
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn is_continuation(&self, token_text: &str) -> bool {
        token_text.starts_with(&self.marker)
    }

    fn strip<'a>(&self, token_text: &'a str) -> &'a str {
        token_text
            .strip_prefix(self.marker.as_str())
            .unwrap_or(token_text)
    }

    pub fn merge(&self, seq: &TokenSequence) -> WordSequence {
        let tokens = &seq.tokens;
        let mut words = Vec::new();
        let mut start = 0;
        while start < tokens.len() {
            let mut end = start + 1;
            while end < tokens.len() && self.is_continuation(&tokens[end].text) {
                end += 1;
            }
            if start == 0 && self.is_continuation(&tokens[0].text) {
                warn!(
                    "sentence '{}' ({}): sequence starts with continuation piece '{}'",
                    seq.sentence_id, seq.system_id, tokens[0].text
                );
            }
            words.push(self.word(&tokens[start..end], start..end));
            start = end;
        }
        WordSequence {
            sentence_id: seq.sentence_id.clone(),
            lang: seq.lang.clone(),
            system_id: seq.system_id.clone(),
            text: seq.text.clone(),
            words,
        }
    }

    fn word(&self, pieces: &[EmbeddedToken], span: Range<usize>) -> WordUnit {
        let text: String = pieces.iter().map(|p| self.strip(&p.text)).collect();
        let dim = pieces[0].vector.len();
        let mut vector = vec![0.0; dim];
        for piece in pieces {
            for (acc, x) in vector.iter_mut().zip(&piece.vector) {
                *acc += x;
            }
        }
        let count = pieces.len() as f64;
        vector.iter_mut().for_each(|x| *x /= count);
        WordUnit {
            text,
            vector,
            piece_span: span,
        }
    }
}

/// A sample after merging: the source words and each translation's words.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedSample {
    pub source: WordSequence,
    pub translations: Vec<WordSequence>,
}

impl MergedSample {
    pub fn sentence_id(&self) -> &str {
        &self.source.sentence_id
    }
}

/// Merges every sequence of a corpus, keeping sample order.
pub fn merge_corpus(corpus: &Corpus, merger: &Merger) -> Vec<MergedSample> {
    corpus
        .samples()
        .map(|s| MergedSample {
            source: merger.merge(&s.source),
            translations: s.translations.iter().map(|t| merger.merge(t)).collect(),
        })
        .collect()
}

/// True iff `token_text` starts with the default `##` marker.
pub fn is_continuation(token_text: &str) -> bool {
    token_text.starts_with(DEFAULT_CONTINUATION_MARKER)
}

/// Merges with the default `##` marker.
pub fn merge_wordpieces(seq: &TokenSequence) -> WordSequence {
    Merger::default().merge(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_of(pieces: &[(&str, Vec<f64>)]) -> TokenSequence {
        TokenSequence {
            sentence_id: "s".into(),
            lang: "ru".into(),
            system_id: "sys".into(),
            text: String::new(),
            tokens: pieces
                .iter()
                .map(|(t, v)| EmbeddedToken::new(*t, v.clone()))
                .collect(),
        }
    }

    #[test]
    fn continuation_detection() {
        assert!(is_continuation("##дру"));
        assert!(!is_continuation("Вдруг"));
        assert!(is_continuation("##"));
        assert!(!is_continuation("#"));
    }

    #[test]
    fn three_pieces_make_one_word() {
        let s = seq_of(&[("В", vec![1.0]), ("##дру", vec![2.0]), ("##г", vec![6.0])]);
        let merged = merge_wordpieces(&s);
        assert_eq!(merged.words.len(), 1);
        assert_eq!(merged.words[0].text, "Вдруг");
        assert_eq!(merged.words[0].vector, vec![3.0]);
        assert_eq!(merged.words[0].piece_span, 0..3);
    }

    #[test]
    fn two_vector_mean() {
        let s = seq_of(&[("неров", vec![1.0, 0.0]), ("##но", vec![0.0, 1.0])]);
        let merged = merge_wordpieces(&s);
        assert_eq!(merged.words[0].text, "неровно");
        assert_eq!(merged.words[0].vector, vec![0.5, 0.5]);
    }

    #[test]
    fn punctuation_stays_standalone() {
        let s = seq_of(&[
            ("кусок", vec![1.0]),
            (",", vec![2.0]),
            ("бу", vec![3.0]),
            ("##ма", vec![4.0]),
            (".", vec![5.0]),
        ]);
        let texts: Vec<_> = merge_wordpieces(&s).texts().map(str::to_owned).collect();
        assert_eq!(texts, ["кусок", ",", "бума", "."]);
    }

    #[test]
    fn leading_orphan_forms_its_own_word() {
        let s = seq_of(&[("##ка", vec![1.0]), ("##ша", vec![3.0]), ("дом", vec![5.0])]);
        let merged = merge_wordpieces(&s);
        assert_eq!(merged.words.len(), 2);
        assert_eq!(merged.words[0].text, "каша");
        assert_eq!(merged.words[0].vector, vec![2.0]);
        assert_eq!(merged.words[0].piece_span, 0..2);
        assert_eq!(merged.words[1].piece_span, 2..3);
    }

    #[test]
    fn custom_marker() {
        let merger = Merger::new("@@");
        let s = seq_of(&[("low", vec![0.0]), ("@@er", vec![2.0]), ("##x", vec![4.0])]);
        let texts: Vec<_> = merger.merge(&s).texts().map(str::to_owned).collect();
        assert_eq!(texts, ["lower", "##x"]);
    }
}
