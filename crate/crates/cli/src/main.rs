use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchorscore::align::DEFAULT_MIN_ANCHORS;
use anchorscore::corpus::{export_aligned, load_corpus, save_corpus, Corpus};
use anchorscore::eval::{load_rankings, render_table, CorrelationReport};
use anchorscore::merge::{merge_corpus, DEFAULT_CONTINUATION_MARKER};
use anchorscore::pipeline::{
    collect_anchors, evaluate_outcomes, fit_alignment, load_alignment, load_outcomes, report_json,
    run_pipeline, save_alignment, score_samples, write_outcomes, REPORT_JSON_FILE,
    REPORT_TEXT_FILE,
};
use anchorscore::score::{IdfWeights, Orientation, PairScorer, ScoreMode};
use anchorscore::synth::SyntheticSpec;
use anchorscore::{generate_synthetic, Alignment, Error, Lexicon, Merger, PipelineConfig, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

/// Score translations with BERTScore over aligned cross-lingual embeddings.
#[derive(Debug, Parser)]
#[command(name = "anchorscore", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a corpus (and optionally a lexicon or rankings file) for schema errors.
    Validate(ValidateArgs),
    /// Merge WordPiece pieces into words.
    Merge(MergeArgs),
    /// Fit an orthogonal map on lexicon anchors.
    Align(AlignArgs),
    /// Score every translation against its source sentence.
    Score(ScoreArgs),
    /// Correlate scores with human rankings.
    Evaluate(EvaluateArgs),
    /// Run one or more configurations end to end.
    Pipeline(PipelineArgs),
    /// Write a synthetic corpus, lexicon and rankings.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct MarkerArg {
    /// Prefix marking a continuation piece.
    #[arg(long = "marker", default_value = DEFAULT_CONTINUATION_MARKER)]
    marker: String,
}

impl MarkerArg {
    fn merger(&self) -> Result<Merger> {
        if self.marker.is_empty() {
            return Err(Error::Config("--marker must be non-empty".into()));
        }
        Ok(Merger::new(self.marker.clone()))
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    rankings: Option<PathBuf>,
    /// A pipeline configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Print each sequence's words, one sequence per line.
    #[arg(long)]
    dump: bool,
    /// Write the word-level corpus here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    marker: MarkerArg,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_ANCHORS)]
    min_anchors: usize,
    /// Fit one map per sentence, falling back to the global map.
    #[arg(long)]
    per_sentence: bool,
    /// Where to write the fitted alignment.
    #[arg(long, default_value = "alignment.json")]
    out: PathBuf,
    /// Also write the corpus with translation vectors mapped.
    #[arg(long)]
    export: Option<PathBuf>,
    #[command(flatten)]
    marker: MarkerArg,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// all | anchors
    #[arg(long, default_value = "all")]
    mode: ScoreMode,
    /// identity, fitted (fit on the lexicon anchors now), or an alignment file.
    #[arg(long, default_value = "identity")]
    map: String,
    /// Required for anchors mode and for --map fitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_ANCHORS)]
    min_anchors: usize,
    #[arg(long)]
    per_sentence: bool,
    /// Weight words by inverse document frequency.
    #[arg(long)]
    idf: bool,
    /// Treat the source sentence as the candidate.
    #[arg(long)]
    swap_roles: bool,
    /// Write JSON lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    marker: MarkerArg,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    rankings: PathBuf,
    /// Row label in the rendered table.
    #[arg(long, default_value = "scores")]
    label: String,
    /// Write report.json and report.txt here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Configuration file; repeat to render several rows in one table.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Override the scoring mode of every config.
    #[arg(long)]
    mode: Option<ScoreMode>,
    /// Override the output directory (only with a single config).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    idf: bool,
    #[arg(long)]
    swap_roles: bool,
    /// Write the combined table here as well as to stdout.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML file with every generator field; other flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    sentences: usize,
    #[arg(long, default_value_t = 32)]
    dimension: usize,
    /// Per-system noise, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.15,0.3,0.6")]
    noise: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    rotation_seed: u64,
    #[arg(long, default_value_t = 2)]
    seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn stdout_error(source: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source,
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    if args.corpus.is_none()
        && args.lexicon.is_none()
        && args.rankings.is_none()
        && args.config.is_none()
    {
        return Err(Error::Config(
            "nothing to validate: pass --corpus, --lexicon, --rankings or --config".into(),
        ));
    }
    if let Some(path) = &args.config {
        let config = PipelineConfig::load(path)?;
        config.validate()?;
        println!("{}: ok ({})", path.display(), config.config_label());
    }
    if let Some(path) = &args.corpus {
        let corpus = load_corpus(path)?;
        let translations: usize = corpus.samples().map(|s| s.translations.len()).sum();
        println!(
            "{}: ok, {} sentences, {translations} translations, dimension {}",
            path.display(),
            corpus.len(),
            corpus.dimension()
        );
    }
    if let Some(path) = &args.lexicon {
        let lexicon = Lexicon::load(path)?;
        println!("{}: ok, {} entries", path.display(), lexicon.len());
    }
    if let Some(path) = &args.rankings {
        let rankings = load_rankings(path)?;
        println!(
            "{}: ok, {} ranked sentences",
            path.display(),
            rankings.len()
        );
    }
    Ok(())
}

fn merge(args: MergeArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let merged = merge_corpus(&corpus, &args.marker.merger()?);
    if args.dump {
        let mut out = std::io::stdout().lock();
        for sample in &merged {
            for seq in std::iter::once(&sample.source).chain(&sample.translations) {
                let words: Vec<&str> = seq.texts().collect();
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    seq.sentence_id,
                    seq.system_id,
                    words.join(" ")
                )
                .map_err(stdout_error)?;
            }
        }
    }
    if let Some(path) = &args.out {
        let sequences = merged
            .iter()
            .flat_map(|s| std::iter::once(&s.source).chain(&s.translations))
            .map(|w| w.to_tokens());
        let mut words = Corpus::from_sequences(corpus.dimension(), sequences)?;
        for (key, value) in corpus.metadata() {
            words.set_metadata(key.clone(), value.clone());
        }
        save_corpus(&words, path)?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn align(args: AlignArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let lexicon = Lexicon::load(&args.lexicon)?;
    let merged = merge_corpus(&corpus, &args.marker.merger()?);
    let anchors = collect_anchors(&merged, &lexicon);
    let alignment = fit_alignment(
        &anchors,
        corpus.dimension(),
        args.min_anchors,
        args.per_sentence,
    )?;
    save_alignment(&alignment, &args.out)?;
    let global = match &alignment {
        Alignment::Global { map } => map,
        Alignment::PerSentence { fallback, .. } => fallback,
    };
    println!(
        "fitted on {} anchors, residual {:.6}, written to {}",
        global.anchor_count(),
        global.residual(),
        args.out.display()
    );
    if let Some(path) = &args.export {
        export_aligned(&corpus, &alignment, path)?;
    }
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let merged = merge_corpus(&corpus, &args.marker.merger()?);
    let lexicon = args.lexicon.as_ref().map(Lexicon::load).transpose()?;
    let anchors = lexicon.as_ref().map(|lex| collect_anchors(&merged, lex));

    let alignment = match args.map.as_str() {
        "identity" => Alignment::identity(corpus.dimension()),
        "fitted" => {
            let anchors = anchors
                .as_ref()
                .ok_or_else(|| Error::Config("--map fitted needs --lexicon".into()))?;
            fit_alignment(
                anchors,
                corpus.dimension(),
                args.min_anchors,
                args.per_sentence,
            )?
        }
        path => load_alignment(path)?,
    };
    if args.mode == ScoreMode::AnchorsOnly && anchors.is_none() {
        return Err(Error::Config("--mode anchors needs --lexicon".into()));
    }

    let orientation = if args.swap_roles {
        Orientation::SourceAsCandidate
    } else {
        Orientation::TranslationAsCandidate
    };
    let idf = args
        .idf
        .then(|| IdfWeights::for_orientation(&merged, orientation));
    let scorer = PairScorer {
        mode: args.mode,
        orientation,
        weights: idf.as_ref(),
    };
    let outcomes = score_samples(&merged, &alignment, anchors.as_ref(), &scorer)?;
    match &args.out {
        Some(path) => {
            let w = create(path)?;
            write_outcomes(&outcomes, w).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
        }
        None => write_outcomes(&outcomes, std::io::stdout().lock()).map_err(stdout_error),
    }
}

fn write_report(dir: &Path, report: &CorrelationReport) -> Result<()> {
    write_text(&dir.join(REPORT_JSON_FILE), &(report_json(report) + "\n"))?;
    write_text(
        &dir.join(REPORT_TEXT_FILE),
        &render_table("Configuration", std::slice::from_ref(report)),
    )
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let outcomes = load_outcomes(&args.scores)?;
    let rankings = load_rankings(&args.rankings)?;
    let report = evaluate_outcomes(&outcomes, &rankings, &args.label)?;
    print!(
        "{}",
        render_table("Configuration", std::slice::from_ref(&report))
    );
    if report.excluded_count > 0 {
        println!("{} sample(s) excluded", report.excluded_count);
    }
    if let Some(dir) = &args.out_dir {
        write_report(dir, &report)?;
    }
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    if args.output_dir.is_some() && args.configs.len() > 1 {
        return Err(Error::Config(
            "--output-dir applies to a single --config only".into(),
        ));
    }
    let mut reports = Vec::with_capacity(args.configs.len());
    for path in &args.configs {
        let mut config = PipelineConfig::load(path)?;
        if let Some(mode) = args.mode {
            config.mode = mode;
        }
        if let Some(dir) = &args.output_dir {
            config.output_dir = dir.clone();
        }
        config.idf |= args.idf;
        config.swap_roles |= args.swap_roles;
        info!("running {}", config.config_label());
        let run = run_pipeline(&config)?;
        reports.push(run.report);
    }
    let table = render_table("Configuration", &reports);
    print!("{table}");
    if let Some(path) = &args.table {
        write_text(path, &table)?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut spec = SyntheticSpec::new(args.sentences, args.dimension, args.noise);
            spec.rotation_seed = args.rotation_seed;
            spec.rng_seed = args.seed;
            spec
        }
    };
    let data = generate_synthetic(&spec)?;
    let files = data.write(&args.out_dir)?;
    println!(
        "wrote {}, {}, {}",
        files.corpus.display(),
        files.lexicon.display(),
        files.rankings.display()
    );
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate(a) => validate(a),
        Command::Merge(a) => merge(a),
        Command::Align(a) => align(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Bad arguments count as invalid input.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
