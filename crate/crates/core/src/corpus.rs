//! Line-delimited JSON corpora of token-level contextual embeddings.
//!
//! A corpus file starts with a header line `{"dimension": d, "format_version": 1}`
//! followed by one record per sentence and system:
//!
//! ```text
//! {"sentence_id": "s1", "lang": "en", "system_id": "source", "text": "...",
//!  "tokens": [{"text": "paper", "vector": [0.1, ...]}]}
//! ```
//!
//! The record whose `system_id` is [`SOURCE_SYSTEM`] is the original sentence;
//! every other record with the same `sentence_id` is one of its translations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::align::Alignment;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// `system_id` reserved for the original (reference-language) sentence.
pub const SOURCE_SYSTEM: &str = "source";

pub const UNKNOWN_TOKEN: &str = "[UNK]";

/// Encoder markers that must be stripped before a corpus is written.
pub const FORBIDDEN_MARKERS: &[&str] = &["[CLS]", "[SEP]", "[PAD]", "[MASK]"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedToken {
    pub text: String,
    pub vector: Vec<f64>,
}

impl EmbeddedToken {
    pub fn new(text: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            text: text.into(),
            vector,
        }
    }
}

/// One embedded sentence: the source or a single translation variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub sentence_id: String,
    pub lang: String,
    pub system_id: String,
    pub text: String,
    pub tokens: Vec<EmbeddedToken>,
}

impl TokenSequence {
    pub fn is_source(&self) -> bool {
        self.system_id == SOURCE_SYSTEM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub source: TokenSequence,
    pub translations: Vec<TokenSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dimension: usize,
    format_version: u32,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

/// A validated embedding corpus. Samples keep the order in which their
/// sentence ids first appear.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dimension: usize,
    samples: IndexMap<String, Sample>,
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl Corpus {
    /// Builds a corpus, enforcing every record invariant.
    ///
    /// `[UNK]` tokens are dropped with a warning; other encoder markers are rejected.
    pub fn from_sequences<I>(dimension: usize, sequences: I) -> Result<Self>
    where
        I: IntoIterator<Item = TokenSequence>,
    {
        if dimension == 0 {
            return Err(Error::Validation(
                "corpus dimension must be positive".into(),
            ));
        }
        let mut pending: IndexMap<String, (Option<TokenSequence>, Vec<TokenSequence>)> =
            IndexMap::new();
        let mut reference: Option<String> = None;

        for mut seq in sequences {
            check_sequence(&mut seq, dimension, reference.as_deref())?;
            reference.get_or_insert_with(|| seq.sentence_id.clone());

            let entry = pending.entry(seq.sentence_id.clone()).or_default();
            let duplicate = if seq.is_source() {
                entry.0.is_some()
            } else {
                entry.1.iter().any(|t| t.system_id == seq.system_id)
            };
            if duplicate {
                return Err(Error::DuplicateRecord {
                    sentence_id: seq.sentence_id,
                    system_id: seq.system_id,
                });
            }
            if seq.is_source() {
                entry.0 = Some(seq);
            } else {
                entry.1.push(seq);
            }
        }

        let mut samples = IndexMap::with_capacity(pending.len());
        for (id, (source, translations)) in pending {
            let source = source.ok_or_else(|| {
                Error::Validation(format!(
                    "sentence '{id}' has translations but no '{SOURCE_SYSTEM}' record"
                ))
            })?;
            samples.insert(
                id,
                Sample {
                    source,
                    translations,
                },
            );
        }
        Ok(Self {
            dimension,
            samples,
            metadata: serde_json::Map::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &Sample> {
        self.samples.values()
    }

    pub fn sample(&self, sentence_id: &str) -> Option<&Sample> {
        self.samples.get(sentence_id)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Extra header fields (e.g. the extractor's resolved model identifiers).
    pub fn metadata(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: serde_json::Value) {
        self.metadata.insert(key.into(), value);
    }

    /// All sequences in file order: each source followed by its translations.
    pub fn sequences(&self) -> impl Iterator<Item = &TokenSequence> {
        self.samples
            .values()
            .flat_map(|s| std::iter::once(&s.source).chain(s.translations.iter()))
    }
}

fn check_sequence(
    seq: &mut TokenSequence,
    dimension: usize,
    reference: Option<&str>,
) -> Result<()> {
    let id = &seq.sentence_id;
    if id.is_empty() {
        return Err(Error::Validation("empty sentence_id".into()));
    }
    if seq.system_id.is_empty() {
        return Err(Error::Validation(format!(
            "sentence '{id}': empty system_id"
        )));
    }
    if seq.lang.is_empty() {
        return Err(Error::Validation(format!("sentence '{id}': empty lang")));
    }

    let before = seq.tokens.len();
    seq.tokens.retain(|t| t.text != UNKNOWN_TOKEN);
    if seq.tokens.len() != before {
        warn!(
            "sentence '{id}' ({}): dropped {} {UNKNOWN_TOKEN} token(s)",
            seq.system_id,
            before - seq.tokens.len()
        );
    }
    if seq.tokens.is_empty() {
        return Err(Error::Validation(format!(
            "sentence '{id}' ({}): no tokens",
            seq.system_id
        )));
    }

    for token in &seq.tokens {
        if token.text.is_empty() {
            return Err(Error::Validation(format!(
                "sentence '{id}' ({}): empty token text",
                seq.system_id
            )));
        }
        if FORBIDDEN_MARKERS.contains(&token.text.as_str()) {
            return Err(Error::Validation(format!(
                "sentence '{id}' ({}): special marker {} must be stripped",
                seq.system_id, token.text
            )));
        }
        if token.vector.len() != dimension {
            return Err(Error::DimensionMismatch {
                sentence_id: id.clone(),
                reference: reference.unwrap_or("header").to_owned(),
                expected: dimension,
                found: token.vector.len(),
            });
        }
        if token.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sentence '{id}' ({}), token '{}'",
                seq.system_id, token.text
            )));
        }
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses a corpus from any line-oriented reader. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut header: Option<Header> = None;
    let mut sequences = Vec::new();

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header.is_none() {
            let h: Header = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("invalid header: {e}"),
            })?;
            if h.format_version != FORMAT_VERSION {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unsupported format_version {}", h.format_version),
                });
            }
            header = Some(h);
            continue;
        }
        let seq: TokenSequence = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        sequences.push(seq);
    }

    let header = header.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let mut corpus = Corpus::from_sequences(header.dimension, sequences)?;
    corpus.metadata = header.extra;
    Ok(corpus)
}

/// Serializes a corpus in the same schema `read_corpus` accepts.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    let header = Header {
        dimension: corpus.dimension,
        format_version: FORMAT_VERSION,
        extra: corpus.metadata.clone(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;
    for seq in corpus.sequences() {
        serde_json::to_writer(&mut writer, seq)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Returns a copy of `corpus` with every translation vector mapped into the
/// source space. Source vectors are left untouched.
pub fn align_corpus(corpus: &Corpus, alignment: &Alignment) -> Result<Corpus> {
    if alignment.dimension() != corpus.dimension {
        return Err(Error::DimensionMismatch {
            sentence_id: "<alignment>".into(),
            reference: "corpus".into(),
            expected: corpus.dimension,
            found: alignment.dimension(),
        });
    }
    let mut out = corpus.clone();
    for (id, sample) in out.samples.iter_mut() {
        let map = alignment.map_for(id);
        for seq in &mut sample.translations {
            for token in &mut seq.tokens {
                token.vector = map.apply(&token.vector);
            }
        }
    }
    Ok(out)
}

/// Writes the aligned corpus (see [`align_corpus`]) for external plotting.
pub fn export_aligned(
    corpus: &Corpus,
    alignment: &Alignment,
    path: impl AsRef<Path>,
) -> Result<()> {
    save_corpus(&align_corpus(corpus, alignment)?, path)
}
