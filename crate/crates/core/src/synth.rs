//! Synthetic bilingual corpora with a known answer.
//!
//! Source words get random vectors. Each system's translation carries the same
//! words through a hidden orthogonal rotation (the language gap) plus Gaussian
//! noise of that system's magnitude, with a few untranslatable filler words
//! mixed in and some source words dropped. Human ranks follow the noise order,
//! so a metric that sees through the rotation should recover them.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::align::Lexicon;
use crate::corpus::{save_corpus, Corpus, EmbeddedToken, TokenSequence, SOURCE_SYSTEM};
use crate::error::{Error, Result};
use crate::eval::{write_rankings, HumanRankings};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const RANKINGS_FILE: &str = "rankings.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub sentence_count: usize,
    /// Inclusive range of source words per sentence.
    pub words_per_sentence: (usize, usize),
    pub dimension: usize,
    pub systems_count: usize,
    /// One per system, strictly increasing.
    pub noise_levels: Vec<f64>,
    pub rotation_seed: u64,
    pub rng_seed: u64,
    #[serde(default = "defaults::vocabulary_size")]
    pub vocabulary_size: usize,
    /// Inclusive range of filler words added to each translation.
    #[serde(default = "defaults::filler_words")]
    pub filler_words: (usize, usize),
    /// Probability that a system leaves a source word untranslated.
    #[serde(default = "defaults::drop_rate")]
    pub drop_rate: f64,
    /// Per-occurrence perturbation of a word's base vector.
    #[serde(default = "defaults::context_noise")]
    pub context_noise: f64,
    /// Probability that a translation word is emitted as two WordPiece pieces.
    #[serde(default = "defaults::split_rate")]
    pub split_rate: f64,
}

mod defaults {
    pub fn vocabulary_size() -> usize {
        400
    }
    pub fn filler_words() -> (usize, usize) {
        (0, 4)
    }
    pub fn drop_rate() -> f64 {
        0.2
    }
    pub fn context_noise() -> f64 {
        0.3
    }
    pub fn split_rate() -> f64 {
        0.3
    }
}

impl SyntheticSpec {
    /// A spec with the given shape and default texture parameters.
    pub fn new(sentence_count: usize, dimension: usize, noise_levels: Vec<f64>) -> Self {
        Self {
            sentence_count,
            words_per_sentence: (6, 12),
            dimension,
            systems_count: noise_levels.len(),
            noise_levels,
            rotation_seed: 1,
            rng_seed: 2,
            vocabulary_size: defaults::vocabulary_size(),
            filler_words: defaults::filler_words(),
            drop_rate: defaults::drop_rate(),
            context_noise: defaults::context_noise(),
            split_rate: defaults::split_rate(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sentence_count == 0 || self.dimension == 0 || self.systems_count == 0 {
            return bad("sentence_count, dimension and systems_count must be positive".into());
        }
        let (lo, hi) = self.words_per_sentence;
        if lo == 0 || lo > hi {
            return bad(format!("invalid words_per_sentence range {lo}..={hi}"));
        }
        if self.vocabulary_size < hi {
            return bad(format!(
                "vocabulary_size {} is smaller than the longest sentence ({hi})",
                self.vocabulary_size
            ));
        }
        if self.filler_words.0 > self.filler_words.1 {
            return bad("invalid filler_words range".into());
        }
        if self.noise_levels.len() != self.systems_count {
            return bad(format!(
                "{} noise levels for {} systems",
                self.noise_levels.len(),
                self.systems_count
            ));
        }
        if self.noise_levels.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("noise levels must be finite and non-negative".into());
        }
        if self.noise_levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("noise levels must be strictly increasing".into());
        }
        for (name, p) in [
            ("drop_rate", self.drop_rate),
            ("split_rate", self.split_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !self.context_noise.is_finite() || self.context_noise < 0.0 {
            return bad("context_noise must be finite and non-negative".into());
        }
        Ok(())
    }

    /// System ids in increasing noise order: `sys1` is the cleanest.
    pub fn system_ids(&self) -> Vec<String> {
        (1..=self.systems_count)
            .map(|i| format!("sys{i}"))
            .collect()
    }
}

/// A ground-truth anchor, as word indices after merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedAnchor {
    pub sentence_id: String,
    pub system_id: String,
    pub source_index: usize,
    pub target_index: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub lexicon: Lexicon,
    pub rankings: HumanRankings,
    pub planted: Vec<PlantedAnchor>,
    /// Hidden rotation Q: translation vectors are `Q·(source + noise)`.
    pub rotation: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    pub rankings: PathBuf,
}

impl SyntheticData {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<SyntheticFiles> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SyntheticFiles {
            corpus: dir.join(CORPUS_FILE),
            lexicon: dir.join(LEXICON_FILE),
            rankings: dir.join(RANKINGS_FILE),
        };
        save_corpus(&self.corpus, &files.corpus)?;
        let lex = File::create(&files.lexicon).map_err(|e| Error::io(&files.lexicon, e))?;
        self.lexicon
            .write(BufWriter::new(lex))
            .map_err(|e| Error::io(&files.lexicon, e))?;
        let ranks = File::create(&files.rankings).map_err(|e| Error::io(&files.rankings, e))?;
        write_rankings(&self.rankings, BufWriter::new(ranks))?;
        Ok(files)
    }
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the signs of R's diagonal folded into Q).
pub fn random_orthogonal<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dimension, dimension, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dimension {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn gaussian<R: Rng + ?Sized>(dimension: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let sd = scale / (dimension as f64).sqrt();
    (0..dimension)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

fn rotate(q: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    q.row_iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + scale * y).collect()
}

fn source_word(id: usize) -> String {
    format!("en{id:04}")
}

fn target_word(id: usize) -> String {
    format!("ru{id:04}")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let d = spec.dimension;
    let rotation = random_orthogonal(d, &mut ChaCha8Rng::seed_from_u64(spec.rotation_seed));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let base: Vec<Vec<f64>> = (0..spec.vocabulary_size)
        .map(|_| gaussian(d, 1.0, &mut rng))
        .collect();
    let mut lexicon = Lexicon::new();
    for id in 0..spec.vocabulary_size {
        lexicon.insert(&target_word(id), &source_word(id));
    }

    let systems = spec.system_ids();
    let k = systems.len() as u32;
    let mut sequences = Vec::new();
    let mut rankings = HumanRankings::new();
    let mut planted = Vec::new();
    let mut filler_id = 0usize;

    for s in 0..spec.sentence_count {
        let sentence_id = format!("s{:04}", s + 1);
        let (lo, hi) = spec.words_per_sentence;
        let n_words = rng.random_range(lo..=hi);
        let word_ids = sample(&mut rng, spec.vocabulary_size, n_words).into_vec();
        let source_vectors: Vec<Vec<f64>> = word_ids
            .iter()
            .map(|&id| add(&base[id], &gaussian(d, 1.0, &mut rng), spec.context_noise))
            .collect();
        let source_words: Vec<String> = word_ids.iter().map(|&id| source_word(id)).collect();
        sequences.push(TokenSequence {
            sentence_id: sentence_id.clone(),
            lang: "en".into(),
            system_id: SOURCE_SYSTEM.into(),
            text: source_words.join(" "),
            tokens: source_words
                .iter()
                .zip(&source_vectors)
                .map(|(w, v)| EmbeddedToken::new(w.clone(), v.clone()))
                .collect(),
        });

        let mut ranks = std::collections::BTreeMap::new();
        for (i, (system_id, &noise)) in systems.iter().zip(&spec.noise_levels).enumerate() {
            ranks.insert(system_id.clone(), k - i as u32);

            let mut kept: Vec<usize> = (0..n_words)
                .filter(|_| !rng.random_bool(spec.drop_rate))
                .collect();
            if kept.is_empty() {
                kept.push(rng.random_range(0..n_words));
            }
            // Each entry is Some(source position) or None for a filler word.
            let mut layout: Vec<Option<usize>> = kept.into_iter().map(Some).collect();
            let fillers = rng.random_range(spec.filler_words.0..=spec.filler_words.1);
            for _ in 0..fillers {
                let at = rng.random_range(0..=layout.len());
                layout.insert(at, None);
            }

            let mut tokens = Vec::new();
            let mut words = Vec::new();
            for (word_index, slot) in layout.iter().enumerate() {
                let (text, vector) = match *slot {
                    Some(pos) => {
                        planted.push(PlantedAnchor {
                            sentence_id: sentence_id.clone(),
                            system_id: system_id.clone(),
                            source_index: pos,
                            target_index: word_index,
                        });
                        let noisy = add(&source_vectors[pos], &gaussian(d, 1.0, &mut rng), noise);
                        (target_word(word_ids[pos]), rotate(&rotation, &noisy))
                    }
                    None => {
                        filler_id += 1;
                        (format!("zz{filler_id:05}"), gaussian(d, 1.0, &mut rng))
                    }
                };
                if rng.random_bool(spec.split_rate) && text.chars().count() > 2 {
                    let cut = text.len() - 2;
                    let delta = gaussian(d, 0.2, &mut rng);
                    tokens.push(EmbeddedToken::new(&text[..cut], add(&vector, &delta, 1.0)));
                    tokens.push(EmbeddedToken::new(
                        format!("##{}", &text[cut..]),
                        add(&vector, &delta, -1.0),
                    ));
                } else {
                    tokens.push(EmbeddedToken::new(text.clone(), vector));
                }
                words.push(text);
            }
            sequences.push(TokenSequence {
                sentence_id: sentence_id.clone(),
                lang: "ru".into(),
                system_id: system_id.clone(),
                text: words.join(" "),
                tokens,
            });
        }
        rankings.insert(sentence_id, ranks);
    }

    let mut corpus = Corpus::from_sequences(d, sequences)?;
    corpus.set_metadata("generator", serde_json::Value::from("synthetic"));
    Ok(SyntheticData {
        corpus,
        lexicon,
        rankings,
        planted,
        rotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_orthogonal(12, &mut rng);
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(12, 12)).norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let ok = SyntheticSpec::new(3, 4, vec![0.0, 0.1, 0.5]);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.noise_levels = vec![0.1, 0.1, 0.5];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.systems_count = 2;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.words_per_sentence = (5, 2);
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.sentence_count = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn same_seeds_same_data() {
        let spec = SyntheticSpec::new(5, 6, vec![0.0, 0.2]);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.planted, b.planted);
        assert_eq!(a.rankings, b.rankings);
    }

    #[test]
    fn ranks_follow_noise_order() {
        let data = generate_synthetic(&SyntheticSpec::new(2, 4, vec![0.0, 0.1, 0.5])).unwrap();
        let ranks = &data.rankings["s0001"];
        assert_eq!(ranks["sys1"], 3);
        assert_eq!(ranks["sys2"], 2);
        assert_eq!(ranks["sys3"], 1);
    }
}
