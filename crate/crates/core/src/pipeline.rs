//! End-to-end run: load → merge → anchors → fit → score → evaluate.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::align::{extract_anchors, Alignment, AnchorPair, Lexicon, DEFAULT_MIN_ANCHORS};
use crate::corpus::{export_aligned, load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::eval::{
    build_samples, evaluate, load_rankings, render_table, CorrelationReport, HumanRankings,
};
use crate::merge::{merge_corpus, MergedSample, Merger, DEFAULT_CONTINUATION_MARKER};
use crate::score::{IdfWeights, Orientation, PairOutcome, PairScorer, ScoreMode};

pub const SCORES_FILE: &str = "scores.jsonl";
pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const ALIGNED_CORPUS_FILE: &str = "aligned.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_min_anchors")]
    pub min_anchors: usize,
    #[serde(default)]
    pub per_sentence: bool,
}

fn default_min_anchors() -> usize {
    DEFAULT_MIN_ANCHORS
}

fn default_marker() -> String {
    DEFAULT_CONTINUATION_MARKER.to_owned()
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            min_anchors: DEFAULT_MIN_ANCHORS,
            per_sentence: false,
        }
    }
}

/// Declarative description of one run; one config per results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    pub rankings_path: PathBuf,
    #[serde(with = "mode_name")]
    pub mode: ScoreMode,
    pub embedding_kind_label: String,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    #[serde(default)]
    pub idf: bool,
    #[serde(default)]
    pub swap_roles: bool,
    pub output_dir: PathBuf,
    #[serde(default = "default_marker")]
    pub continuation_marker: String,
}

mod mode_name {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::score::ScoreMode;

    pub fn serialize<S: Serializer>(mode: &ScoreMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match mode {
            ScoreMode::AllTokens => "all",
            ScoreMode::AnchorsOnly => "anchors",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ScoreMode, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

impl PipelineConfig {
    /// Parses a TOML config; relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.corpus_path);
        resolve(&mut config.rankings_path);
        resolve(&mut config.output_dir);
        if let Some(lex) = config.lexicon_path.as_mut() {
            resolve(lex);
        }
        Ok(config)
    }

    /// Row label such as "2-monolingual+alignment (anchors only)".
    pub fn config_label(&self) -> String {
        format!("{} ({})", self.embedding_kind_label, self.mode.label())
    }

    pub fn orientation(&self) -> Orientation {
        if self.swap_roles {
            Orientation::SourceAsCandidate
        } else {
            Orientation::TranslationAsCandidate
        }
    }

    pub fn needs_lexicon(&self) -> bool {
        self.alignment.enabled || self.mode == ScoreMode::AnchorsOnly
    }

    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} '{}' does not exist",
                    p.display()
                )))
            }
        };
        must_exist("corpus_path", &self.corpus_path)?;
        must_exist("rankings_path", &self.rankings_path)?;
        match &self.lexicon_path {
            Some(p) => must_exist("lexicon_path", p)?,
            None if self.needs_lexicon() => {
                return Err(Error::Config(
                    "lexicon_path is required for alignment or anchors-only scoring".into(),
                ))
            }
            None => {}
        }
        if self.alignment.min_anchors == 0 {
            return Err(Error::Config(
                "alignment.min_anchors must be at least 1".into(),
            ));
        }
        if self.continuation_marker.is_empty() {
            return Err(Error::Config(
                "continuation_marker must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Anchors per sentence, one list per translation (in corpus order).
pub type CorpusAnchors = IndexMap<String, Vec<Vec<AnchorPair>>>;

pub fn collect_anchors(samples: &[MergedSample], lexicon: &Lexicon) -> CorpusAnchors {
    samples
        .iter()
        .map(|s| {
            let per_translation = s
                .translations
                .iter()
                .map(|t| extract_anchors(&s.source, t, lexicon))
                .collect();
            (s.sentence_id().to_owned(), per_translation)
        })
        .collect()
}

/// Fits the alignment on anchors pooled over every translation of every sentence.
pub fn fit_alignment(
    anchors: &CorpusAnchors,
    dimension: usize,
    min_anchors: usize,
    per_sentence: bool,
) -> Result<Alignment> {
    let pooled: IndexMap<String, Vec<AnchorPair>> = anchors
        .iter()
        .map(|(id, lists)| (id.clone(), lists.iter().flatten().cloned().collect()))
        .collect();
    Alignment::fit(&pooled, dimension, min_anchors, per_sentence)
}

/// Scores every translation; `anchors` is only required in anchors-only mode.
pub fn score_samples(
    samples: &[MergedSample],
    alignment: &Alignment,
    anchors: Option<&CorpusAnchors>,
    scorer: &PairScorer<'_>,
) -> Result<Vec<PairOutcome>> {
    let mut outcomes = Vec::new();
    for sample in samples {
        let id = sample.sentence_id();
        let map = alignment.map_for(id);
        let sample_anchors = anchors.and_then(|a| a.get(id));
        if scorer.mode == ScoreMode::AnchorsOnly && sample_anchors.is_none() {
            return Err(Error::Config(format!(
                "anchors-only scoring needs anchors for sentence '{id}'"
            )));
        }
        for (i, translation) in sample.translations.iter().enumerate() {
            let pairs = sample_anchors.map(|a| a[i].as_slice()).unwrap_or_default();
            let outcome = scorer
                .score(&sample.source, translation, map, pairs)
                .map_err(|e| e.in_stage("score", Some(id)))?;
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

pub fn write_outcomes<W: Write>(outcomes: &[PairOutcome], mut writer: W) -> std::io::Result<()> {
    for outcome in outcomes {
        serde_json::to_writer(&mut writer, outcome)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_outcomes(outcomes: &[PairOutcome], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_outcomes(outcomes, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_outcomes(path: impl AsRef<Path>) -> Result<Vec<PairOutcome>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn save_alignment(alignment: &Alignment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, alignment)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_alignment(path: impl AsRef<Path>) -> Result<Alignment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Joins outcomes with human rankings and evaluates them.
pub fn evaluate_outcomes(
    outcomes: &[PairOutcome],
    rankings: &HumanRankings,
    config_label: &str,
) -> Result<CorrelationReport> {
    let (samples, no_anchor) = build_samples(outcomes, rankings)?;
    if samples.is_empty() {
        return Err(Error::EmptyEvaluation {
            excluded: no_anchor,
        });
    }
    let mut report = evaluate(&samples).map_err(|e| match e {
        Error::EmptyEvaluation { excluded } => Error::EmptyEvaluation {
            excluded: excluded + no_anchor,
        },
        other => other,
    })?;
    report.excluded_count += no_anchor;
    report.config_label = config_label.to_owned();
    Ok(report)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a CorrelationReport,
    table: String,
}

pub fn report_json(report: &CorrelationReport) -> String {
    let file = ReportFile {
        report,
        table: render_table("Configuration", std::slice::from_ref(report)),
    };
    serde_json::to_string_pretty(&file).expect("report serializes")
}

/// Everything a run produced, also written under `output_dir`.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: CorrelationReport,
    pub alignment: Option<Alignment>,
    pub outcomes: Vec<PairOutcome>,
}

/// Runs every stage on in-memory inputs without touching the filesystem.
pub fn run_in_memory(
    config: &PipelineConfig,
    corpus: &Corpus,
    lexicon: Option<&Lexicon>,
    rankings: &HumanRankings,
) -> Result<PipelineRun> {
    let merger = Merger::new(config.continuation_marker.clone());
    let merged = merge_corpus(corpus, &merger);

    let anchors = match lexicon {
        Some(lex) => Some(collect_anchors(&merged, lex)),
        None if config.needs_lexicon() => {
            return Err(Error::Config(
                "a lexicon is required for this configuration".into(),
            ))
        }
        None => None,
    };

    let alignment = match (&anchors, config.alignment.enabled) {
        (Some(a), true) => Some(
            fit_alignment(
                a,
                corpus.dimension(),
                config.alignment.min_anchors,
                config.alignment.per_sentence,
            )
            .map_err(|e| e.in_stage("align", None))?,
        ),
        _ => None,
    };
    let identity = Alignment::identity(corpus.dimension());
    let active = alignment.as_ref().unwrap_or(&identity);

    let idf = config
        .idf
        .then(|| IdfWeights::for_orientation(&merged, config.orientation()));
    let scorer = PairScorer {
        mode: config.mode,
        orientation: config.orientation(),
        weights: idf.as_ref(),
    };
    let outcomes = score_samples(&merged, active, anchors.as_ref(), &scorer)?;
    let report = evaluate_outcomes(&outcomes, rankings, &config.config_label())
        .map_err(|e| e.in_stage("evaluate", None))?;
    Ok(PipelineRun {
        report,
        alignment,
        outcomes,
    })
}

/// Loads the configured inputs, runs every stage and writes the artifacts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let corpus = load_corpus(&config.corpus_path).map_err(|e| e.in_stage("load", None))?;
    let lexicon = config
        .lexicon_path
        .as_ref()
        .map(Lexicon::load)
        .transpose()
        .map_err(|e| e.in_stage("load", None))?;
    let rankings = load_rankings(&config.rankings_path).map_err(|e| e.in_stage("load", None))?;

    let run = run_in_memory(config, &corpus, lexicon.as_ref(), &rankings)?;

    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_outcomes(&run.outcomes, out.join(SCORES_FILE))?;
    if let Some(alignment) = &run.alignment {
        save_alignment(alignment, out.join(ALIGNMENT_FILE))?;
        export_aligned(&corpus, alignment, out.join(ALIGNED_CORPUS_FILE))?;
    }
    let json_path = out.join(REPORT_JSON_FILE);
    std::fs::write(&json_path, report_json(&run.report) + "\n")
        .map_err(|e| Error::io(&json_path, e))?;
    let text_path = out.join(REPORT_TEXT_FILE);
    std::fs::write(
        &text_path,
        render_table("Configuration", std::slice::from_ref(&run.report)),
    )
    .map_err(|e| Error::io(&text_path, e))?;
    Ok(run)
}
