//! Rank correlation of metric scores against human judgments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::PairOutcome;

/// Ranks ascending by score (highest score gets rank k); ties share the mean
/// of the positions they occupy.
pub fn scores_to_ranks(scores: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let ids: Vec<&String> = scores.keys().collect();
    let values: Vec<f64> = scores.values().copied().collect();
    ids.into_iter()
        .cloned()
        .zip(average_ranks(&values))
        .collect()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput(
            "correlation needs at least two items".into(),
        ));
    }
    Ok(())
}

/// Spearman ρ as the Pearson correlation of two rank vectors. `None` when
/// either vector is constant.
pub fn spearman(r1: &[f64], r2: &[f64]) -> Result<Option<f64>> {
    check_lengths(r1, r2)?;
    let n = r1.len() as f64;
    let m1 = r1.iter().sum::<f64>() / n;
    let m2 = r2.iter().sum::<f64>() / n;
    let (mut cov, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for (a, b) in r1.iter().zip(r2) {
        let (da, db) = (a - m1, b - m2);
        cov += da * db;
        v1 += da * da;
        v2 += db * db;
    }
    if v1 == 0.0 || v2 == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (v1 * v2).sqrt()).clamp(-1.0, 1.0)))
}

/// Kendall τ-b. `None` when all pairs are tied on either side.
pub fn kendall(r1: &[f64], r2: &[f64]) -> Result<Option<f64>> {
    check_lengths(r1, r2)?;
    let n = r1.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties1, mut ties2) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let d1 = r1[i].total_cmp(&r1[j]) as i64;
            let d2 = r2[i].total_cmp(&r2[j]) as i64;
            if r1[i] == r1[j] {
                ties1 += 1;
            }
            if r2[i] == r2[j] {
                ties2 += 1;
            }
            if r1[i] != r1[j] && r2[i] != r2[j] {
                if d1 == d2 {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let denom = ((pairs - ties1) as f64) * ((pairs - ties2) as f64);
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        ((concordant - discordant) as f64 / denom.sqrt()).clamp(-1.0, 1.0),
    ))
}

/// Human ranks and metric scores for one source sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    pub sentence_id: String,
    /// 1 = worst … k = best.
    pub human_ranks: BTreeMap<String, u32>,
    pub metric_scores: BTreeMap<String, f64>,
}

impl RankedSample {
    pub fn new(
        sentence_id: impl Into<String>,
        human_ranks: BTreeMap<String, u32>,
        metric_scores: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let sample = Self {
            sentence_id: sentence_id.into(),
            human_ranks,
            metric_scores,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.sentence_id;
        let k = self.human_ranks.len();
        if k < 2 {
            return Err(Error::Validation(format!(
                "sentence '{id}': need at least two ranked systems, got {k}"
            )));
        }
        let mut seen: Vec<u32> = self.human_ranks.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().copied().ne(1..=k as u32) {
            return Err(Error::Validation(format!(
                "sentence '{id}': human ranks {seen:?} are not a permutation of 1..{k}"
            )));
        }
        if !self.human_ranks.keys().eq(self.metric_scores.keys()) {
            return Err(Error::Validation(format!(
                "sentence '{id}': ranked systems {:?} differ from scored systems {:?}",
                self.human_ranks.keys().collect::<Vec<_>>(),
                self.metric_scores.keys().collect::<Vec<_>>()
            )));
        }
        if self.metric_scores.values().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!(
                "metric scores of sentence '{id}'"
            )));
        }
        Ok(())
    }

    /// (ρ, τ) between metric-derived ranks and human ranks.
    pub fn correlations(&self) -> Result<Option<(f64, f64)>> {
        let metric = scores_to_ranks(&self.metric_scores);
        let metric: Vec<f64> = metric.values().copied().collect();
        let human: Vec<f64> = self.human_ranks.values().map(|&r| f64::from(r)).collect();
        match (spearman(&metric, &human)?, kendall(&metric, &human)?) {
            (Some(rho), Some(tau)) => Ok(Some((rho, tau))),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCorrelation {
    pub sentence_id: String,
    pub rho: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub config_label: String,
    pub per_sample: Vec<SampleCorrelation>,
    pub mean_rho: f64,
    pub mean_tau: f64,
    /// Samples left out: no anchors, or constant metric scores.
    pub excluded_count: usize,
}

/// Per-sample ρ and τ, averaged over the samples where both are defined.
pub fn evaluate(samples: &[RankedSample]) -> Result<CorrelationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate".into()));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut excluded = 0;
    for sample in samples {
        sample.validate()?;
        match sample.correlations()? {
            Some((rho, tau)) => per_sample.push(SampleCorrelation {
                sentence_id: sample.sentence_id.clone(),
                rho,
                tau,
            }),
            None => {
                info!(
                    "sentence '{}': constant metric scores, excluded",
                    sample.sentence_id
                );
                excluded += 1;
            }
        }
    }
    if per_sample.is_empty() {
        return Err(Error::EmptyEvaluation { excluded });
    }
    let n = per_sample.len() as f64;
    let mean_rho = per_sample.iter().map(|s| s.rho).sum::<f64>() / n;
    let mean_tau = per_sample.iter().map(|s| s.tau).sum::<f64>() / n;
    Ok(CorrelationReport {
        config_label: String::new(),
        per_sample,
        mean_rho,
        mean_tau,
        excluded_count: excluded,
    })
}

/// One row of the rankings CSV (`sentence_id,system_id,rank`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRow {
    pub sentence_id: String,
    pub system_id: String,
    pub rank: u32,
}

/// Human ranks grouped by sentence, in first-appearance order.
pub type HumanRankings = IndexMap<String, BTreeMap<String, u32>>;

pub fn read_rankings<R: Read>(reader: R) -> Result<HumanRankings> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(["sentence_id", "system_id", "rank"]) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header sentence_id,system_id,rank, got {headers:?}"),
        });
    }
    let mut out = HumanRankings::new();
    for row in csv.deserialize::<RankingRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let ranks = out.entry(row.sentence_id.clone()).or_default();
        if ranks.insert(row.system_id.clone(), row.rank).is_some() {
            return Err(Error::DuplicateRecord {
                sentence_id: row.sentence_id,
                system_id: row.system_id,
            });
        }
    }
    Ok(out)
}

pub fn load_rankings(path: impl AsRef<Path>) -> Result<HumanRankings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rankings(file)
}

pub fn write_rankings<W: std::io::Write>(rankings: &HumanRankings, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for (sentence_id, ranks) in rankings {
        for (system_id, &rank) in ranks {
            csv.serialize(RankingRow {
                sentence_id: sentence_id.clone(),
                system_id: system_id.clone(),
                rank,
            })
            .map_err(|e| Error::Validation(e.to_string()))?;
        }
    }
    csv.flush().map_err(|e| Error::io("<rankings>", e))
}

/// Joins pair outcomes with human rankings.
///
/// A sentence with any no-anchor outcome is dropped and counted. Scored
/// sentences without rankings are skipped; ranked sentences without scores
/// are an error.
pub fn build_samples(
    outcomes: &[PairOutcome],
    rankings: &HumanRankings,
) -> Result<(Vec<RankedSample>, usize)> {
    let mut by_sentence: IndexMap<&str, Vec<&PairOutcome>> = IndexMap::new();
    for outcome in outcomes {
        by_sentence
            .entry(outcome.sentence_id())
            .or_default()
            .push(outcome);
    }

    let mut samples = Vec::new();
    let mut no_anchor_samples = 0;
    for (sentence_id, ranks) in rankings {
        let group = by_sentence.get(sentence_id.as_str()).ok_or_else(|| {
            Error::Validation(format!("ranked sentence '{sentence_id}' has no scores"))
        })?;
        if group.iter().any(|o| o.score().is_none()) {
            info!("sentence '{sentence_id}': a translation has no anchors, excluded");
            no_anchor_samples += 1;
            continue;
        }
        let metric_scores = group
            .iter()
            .filter_map(|o| o.score())
            .map(|t| (t.system_id.clone(), t.f1))
            .collect();
        samples.push(RankedSample::new(
            sentence_id.clone(),
            ranks.clone(),
            metric_scores,
        )?);
    }
    let unranked = by_sentence
        .keys()
        .filter(|id| !rankings.contains_key(**id))
        .count();
    if unranked > 0 {
        info!("{unranked} scored sentence(s) have no human ranking and were skipped");
    }
    Ok((samples, no_anchor_samples))
}

/// Renders reports as a two-column table, one configuration per row.
pub fn render_table(title: &str, reports: &[CorrelationReport]) -> String {
    let label_width = reports
        .iter()
        .map(|r| r.config_label.chars().count())
        .chain([title.chars().count()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let rule = "-".repeat(label_width + 24);
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{title:<label_width$} | Spearman | Kendall");
    let _ = writeln!(out, "{rule}");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<label_width$} | {:>8.3} | {:>7.3}",
            r.config_label, r.mean_rho, r.mean_tau
        );
    }
    let _ = writeln!(out, "{rule}");
    out
}
