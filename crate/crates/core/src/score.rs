//! Greedy-matching BERTScore over word vectors.
//!
//! Every candidate word is matched to its most similar reference word (and
//! vice versa) by cosine similarity:
//!
//! ```text
//! R = Σ_r w(r) · max_c cos(r, c) / Σ_r w(r)
//! P = Σ_c w(c) · max_r cos(r, c) / Σ_c w(c)
//! F1 = 2PR / (P + R)
//! ```
//!
//! In the cross-lingual setting the source sentence is the reference and the
//! aligned translation is the candidate, unless the orientation is swapped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::align::{apply_map, casefold, AnchorPair, OrthogonalMap};
use crate::error::{Error, Result};
use crate::merge::{MergedSample, WordSequence, WordUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    AllTokens,
    AnchorsOnly,
}

impl ScoreMode {
    /// Row-label suffix, e.g. "anchors only".
    pub fn label(self) -> &'static str {
        match self {
            ScoreMode::AllTokens => "all tokens",
            ScoreMode::AnchorsOnly => "anchors only",
        }
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all_tokens" => Ok(ScoreMode::AllTokens),
            "anchors" | "anchors_only" => Ok(ScoreMode::AnchorsOnly),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected 'all' or 'anchors')"
            ))),
        }
    }
}

/// Which side of a sample plays the candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Translation is the candidate, source is the reference.
    #[default]
    TranslationAsCandidate,
    SourceAsCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub sentence_id: String,
    /// The translation system the score belongs to.
    pub system_id: String,
    pub candidate_id: String,
    pub reference_id: String,
    pub mode: ScoreMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Result of scoring one (source, translation) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairOutcome {
    Scored(ScoreTriple),
    /// Anchors-only scoring was requested but the pair has no anchors.
    NoAnchors {
        sentence_id: String,
        system_id: String,
        mode: ScoreMode,
    },
}

impl PairOutcome {
    pub fn sentence_id(&self) -> &str {
        match self {
            PairOutcome::Scored(t) => &t.sentence_id,
            PairOutcome::NoAnchors { sentence_id, .. } => sentence_id,
        }
    }

    pub fn system_id(&self) -> &str {
        match self {
            PairOutcome::Scored(t) => &t.system_id,
            PairOutcome::NoAnchors { system_id, .. } => system_id,
        }
    }

    pub fn score(&self) -> Option<&ScoreTriple> {
        match self {
            PairOutcome::Scored(t) => Some(t),
            PairOutcome::NoAnchors { .. } => None,
        }
    }
}

/// Inverse document frequency weights keyed by casefolded word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    weights: BTreeMap<String, f64>,
    default_weight: f64,
}

impl IdfTable {
    /// `ln((N + 1) / (df + 1))` per word over `N` sentences; unseen words get `ln(N + 1)`.
    pub fn from_sentences<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a WordSequence>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n = 0usize;
        for seq in sentences {
            n += 1;
            let distinct: HashSet<String> = seq.texts().map(casefold).collect();
            for word in distinct {
                *df.entry(word).or_default() += 1;
            }
        }
        let total = (n + 1) as f64;
        let weights = df
            .into_iter()
            .map(|(w, count)| (w, (total / (count + 1) as f64).ln()))
            .collect();
        Self {
            weights,
            default_weight: total.ln(),
        }
    }

    pub fn weight(&self, word: &str) -> f64 {
        self.weights
            .get(&casefold(word))
            .copied()
            .unwrap_or(self.default_weight)
    }

    pub fn default_weight(&self) -> f64 {
        self.default_weight
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Translation,
}

/// idf over the source sentences or over all translation sentences.
pub fn idf_weights(samples: &[MergedSample], side: Side) -> IdfTable {
    match side {
        Side::Source => IdfTable::from_sentences(samples.iter().map(|s| &s.source)),
        Side::Translation => IdfTable::from_sentences(samples.iter().flat_map(|s| &s.translations)),
    }
}

/// Candidate-side weights drive precision, reference-side weights drive recall.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfWeights {
    pub candidate: IdfTable,
    pub reference: IdfTable,
}

impl IdfWeights {
    pub fn for_orientation(samples: &[MergedSample], orientation: Orientation) -> Self {
        let source = idf_weights(samples, Side::Source);
        let translation = idf_weights(samples, Side::Translation);
        match orientation {
            Orientation::TranslationAsCandidate => Self {
                candidate: translation,
                reference: source,
            },
            Orientation::SourceAsCandidate => Self {
                candidate: source,
                reference: translation,
            },
        }
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    // sqrt(aa * bb) rather than sqrt(aa) * sqrt(bb): equals aa exactly when a == b.
    (dot / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

fn weighted_mean(best: &[f64], words: &[WordUnit], table: Option<&IdfTable>, side: &str) -> f64 {
    if let Some(table) = table {
        let weights: Vec<f64> = words.iter().map(|w| table.weight(&w.text)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            return best.iter().zip(&weights).map(|(b, w)| b * w).sum::<f64>() / total;
        }
        warn!("all {side} idf weights are zero; falling back to uniform weights");
    }
    best.iter().sum::<f64>() / best.len() as f64
}

/// Greedy-matching precision, recall and F1 of `candidate` against `reference`.
pub fn greedy_match_score(
    candidate: &WordSequence,
    reference: &WordSequence,
    weights: Option<&IdfWeights>,
) -> Result<ScoreTriple> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput(format!(
            "sentence '{}': cannot score an empty word sequence",
            reference.sentence_id
        )));
    }
    let dim = reference.words[0].vector.len();
    if let Some(w) = candidate
        .words
        .iter()
        .chain(&reference.words)
        .find(|w| w.vector.len() != dim)
    {
        return Err(Error::DimensionMismatch {
            sentence_id: candidate.sentence_id.clone(),
            reference: reference.sentence_id.clone(),
            expected: dim,
            found: w.vector.len(),
        });
    }
    for w in candidate.words.iter().chain(&reference.words) {
        if w.vector.iter().all(|x| *x == 0.0) {
            warn!(
                "sentence '{}': word '{}' has a zero vector; its cosines count as 0",
                reference.sentence_id, w.text
            );
        }
    }

    let mut best_for_candidate = vec![f64::NEG_INFINITY; candidate.len()];
    let mut best_for_reference = vec![f64::NEG_INFINITY; reference.len()];
    for (i, c) in candidate.words.iter().enumerate() {
        for (j, r) in reference.words.iter().enumerate() {
            let sim = cosine(&c.vector, &r.vector);
            best_for_candidate[i] = best_for_candidate[i].max(sim);
            best_for_reference[j] = best_for_reference[j].max(sim);
        }
    }

    let precision = weighted_mean(
        &best_for_candidate,
        &candidate.words,
        weights.map(|w| &w.candidate),
        "candidate",
    );
    let recall = weighted_mean(
        &best_for_reference,
        &reference.words,
        weights.map(|w| &w.reference),
        "reference",
    );
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ScoreTriple {
        sentence_id: reference.sentence_id.clone(),
        system_id: candidate.system_id.clone(),
        candidate_id: candidate.system_id.clone(),
        reference_id: reference.system_id.clone(),
        mode: ScoreMode::AllTokens,
        precision,
        recall,
        f1,
    })
}

/// Scores one translation against its source sentence.
#[derive(Debug, Clone, Copy)]
pub struct PairScorer<'a> {
    pub mode: ScoreMode,
    pub orientation: Orientation,
    pub weights: Option<&'a IdfWeights>,
}

impl<'a> PairScorer<'a> {
    pub fn new(mode: ScoreMode) -> Self {
        Self {
            mode,
            orientation: Orientation::default(),
            weights: None,
        }
    }

    /// Maps the translation into the source space, optionally restricts both
    /// sides to anchor words, then runs [`greedy_match_score`].
    ///
    /// `anchors` must have been extracted from this same (source, translation)
    /// pair; they are only consulted in anchors-only mode.
    pub fn score(
        &self,
        source: &WordSequence,
        translation: &WordSequence,
        map: &OrthogonalMap,
        anchors: &[AnchorPair],
    ) -> Result<PairOutcome> {
        let mapped = apply_map(map, translation)?;
        let (source, mapped) = match self.mode {
            ScoreMode::AllTokens => (source.clone(), mapped),
            ScoreMode::AnchorsOnly => {
                if anchors.is_empty() {
                    return Ok(PairOutcome::NoAnchors {
                        sentence_id: source.sentence_id.clone(),
                        system_id: translation.system_id.clone(),
                        mode: self.mode,
                    });
                }
                let mut source_idx: Vec<usize> = anchors.iter().map(|a| a.source_index).collect();
                let mut target_idx: Vec<usize> = anchors.iter().map(|a| a.target_index).collect();
                source_idx.sort_unstable();
                target_idx.sort_unstable();
                (
                    restrict(source, &source_idx)?,
                    restrict(&mapped, &target_idx)?,
                )
            }
        };
        let (candidate, reference) = match self.orientation {
            Orientation::TranslationAsCandidate => (&mapped, &source),
            Orientation::SourceAsCandidate => (&source, &mapped),
        };
        let mut triple = greedy_match_score(candidate, reference, self.weights)?;
        triple.sentence_id = source.sentence_id.clone();
        triple.system_id = translation.system_id.clone();
        triple.mode = self.mode;
        Ok(PairOutcome::Scored(triple))
    }
}

fn restrict(seq: &WordSequence, indices: &[usize]) -> Result<WordSequence> {
    let words = indices
        .iter()
        .map(|&i| {
            seq.words.get(i).cloned().ok_or_else(|| {
                Error::Validation(format!(
                    "sentence '{}' ({}): anchor index {i} out of range",
                    seq.sentence_id, seq.system_id
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WordSequence {
        words,
        ..seq.clone()
    })
}

/// [`PairScorer::score`] with the default orientation.
pub fn score_pair(
    source: &WordSequence,
    translation: &WordSequence,
    map: &OrthogonalMap,
    mode: ScoreMode,
    anchors: &[AnchorPair],
    weights: Option<&IdfWeights>,
) -> Result<PairOutcome> {
    PairScorer {
        mode,
        orientation: Orientation::default(),
        weights,
    }
    .score(source, translation, map, anchors)
}
