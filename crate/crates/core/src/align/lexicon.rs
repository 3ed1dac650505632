//! Bilingual word lists used to find anchor pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-normalizes and lowercases `text`; all word comparisons go through this.
pub fn casefold(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

/// Maps a word of the translation language to its renderings in the
/// reference language. Keys and renderings are stored casefolded; alternatives
/// keep file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: IndexMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, translation: &str) {
        let alternatives = self.entries.entry(casefold(word)).or_default();
        let folded = casefold(translation);
        if !alternatives.contains(&folded) {
            alternatives.push(folded);
        }
    }

    pub fn lookup(&self, word: &str) -> &[String] {
        self.entries
            .get(&casefold(word))
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses `word<TAB>translation` lines. Blank lines are skipped; repeated
    /// words add alternatives.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lexicon = Self::new();
        for (index, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<lexicon>", e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                line: index + 1,
                message: message.to_owned(),
            };
            let (word, translation) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected word<TAB>translation"))?;
            if translation.contains('\t') {
                return Err(parse_err("more than two tab-separated columns"));
            }
            let (word, translation) = (word.trim(), translation.trim());
            if word.is_empty() || translation.is_empty() {
                return Err(parse_err("empty word or translation"));
            }
            lexicon.insert(word, translation);
        }
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn write<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (word, alternatives) in &self.entries {
            for translation in alternatives {
                writeln!(writer, "{word}\t{translation}")?;
            }
        }
        writer.flush()
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        let mut lexicon = Lexicon::new();
        for (word, translation) in iter {
            lexicon.insert(word, translation);
        }
        lexicon
    }
}
