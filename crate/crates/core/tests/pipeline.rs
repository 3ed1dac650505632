use std::path::Path;

use anchorscore::align::Alignment;
use anchorscore::corpus::load_corpus;
use anchorscore::eval::load_rankings;
use anchorscore::merge::{merge_corpus, Merger};
use anchorscore::pipeline::{
    collect_anchors, evaluate_outcomes, fit_alignment, load_alignment, load_outcomes,
    run_in_memory, run_pipeline, save_alignment, save_outcomes, score_samples, AlignmentConfig,
    PipelineConfig, ALIGNED_CORPUS_FILE, ALIGNMENT_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE,
    SCORES_FILE,
};
use anchorscore::score::{PairScorer, ScoreMode};
use anchorscore::synth::{generate_synthetic, SyntheticData, SyntheticFiles, SyntheticSpec};
use anchorscore::Lexicon;

const NOISE: [f64; 4] = [0.05, 0.15, 0.3, 0.6];

fn config(files: &SyntheticFiles, out: &Path, mode: ScoreMode, aligned: bool) -> PipelineConfig {
    PipelineConfig {
        corpus_path: files.corpus.clone(),
        lexicon_path: Some(files.lexicon.clone()),
        rankings_path: files.rankings.clone(),
        mode,
        embedding_kind_label: if aligned { "aligned" } else { "unaligned" }.into(),
        alignment: AlignmentConfig {
            enabled: aligned,
            ..AlignmentConfig::default()
        },
        idf: false,
        swap_roles: false,
        output_dir: out.to_path_buf(),
        continuation_marker: "##".into(),
    }
}

fn synthetic(n: usize, d: usize, dir: &Path) -> (SyntheticData, SyntheticFiles) {
    let data = generate_synthetic(&SyntheticSpec::new(n, d, NOISE.to_vec())).unwrap();
    let files = data.write(dir).unwrap();
    (data, files)
}

#[test]
fn aligned_anchors_only_recovers_the_noise_order() {
    let dir = tempfile::tempdir().unwrap();
    let (_, files) = synthetic(100, 32, dir.path());
    let run = run_pipeline(&config(
        &files,
        &dir.path().join("out"),
        ScoreMode::AnchorsOnly,
        true,
    ))
    .unwrap();
    assert_eq!(run.report.mean_rho, 1.0);
    assert_eq!(run.report.mean_tau, 1.0);
    assert_eq!(run.report.excluded_count, 0);
    for name in [
        SCORES_FILE,
        ALIGNMENT_FILE,
        ALIGNED_CORPUS_FILE,
        REPORT_JSON_FILE,
        REPORT_TEXT_FILE,
    ] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    let table = std::fs::read_to_string(dir.path().join("out").join(REPORT_TEXT_FILE)).unwrap();
    assert!(table.contains("aligned (anchors only)"));
}

#[test]
fn unaligned_scores_carry_no_signal() {
    let dir = tempfile::tempdir().unwrap();
    let (_, files) = synthetic(200, 32, dir.path());
    for mode in [ScoreMode::AllTokens, ScoreMode::AnchorsOnly] {
        let run = run_pipeline(&config(&files, &dir.path().join("out"), mode, false)).unwrap();
        assert!(
            run.report.mean_rho.abs() < 0.3,
            "{mode:?}: {}",
            run.report.mean_rho
        );
        assert!(run.alignment.is_none());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, files) = synthetic(30, 16, dir.path());
    let read = |out: &Path| {
        [
            SCORES_FILE,
            ALIGNMENT_FILE,
            REPORT_JSON_FILE,
            REPORT_TEXT_FILE,
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_pipeline(&config(&files, &a, ScoreMode::AllTokens, true)).unwrap();
    run_pipeline(&config(&files, &b, ScoreMode::AllTokens, true)).unwrap();
    assert_eq!(read(&a), read(&b));

    let regenerated = dir.path().join("regen");
    synthetic(30, 16, &regenerated);
    assert_eq!(
        std::fs::read(&files.corpus).unwrap(),
        std::fs::read(regenerated.join("corpus.jsonl")).unwrap()
    );
}

#[test]
fn stages_compose_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, files) = synthetic(40, 16, dir.path());
    let cfg = config(
        &files,
        &dir.path().join("out"),
        ScoreMode::AnchorsOnly,
        true,
    );
    let whole = run_pipeline(&cfg).unwrap();

    let corpus = load_corpus(&files.corpus).unwrap();
    let lexicon = Lexicon::load(&files.lexicon).unwrap();
    let rankings = load_rankings(&files.rankings).unwrap();
    let merged = merge_corpus(&corpus, &Merger::default());
    let anchors = collect_anchors(&merged, &lexicon);

    let map_path = dir.path().join("map.json");
    save_alignment(&fit_alignment(&anchors, 16, 3, false).unwrap(), &map_path).unwrap();
    let alignment = load_alignment(&map_path).unwrap();
    let outcomes = score_samples(
        &merged,
        &alignment,
        Some(&anchors),
        &PairScorer::new(ScoreMode::AnchorsOnly),
    )
    .unwrap();
    let scores_path = dir.path().join("scores.jsonl");
    save_outcomes(&outcomes, &scores_path).unwrap();
    let reloaded = load_outcomes(&scores_path).unwrap();
    assert_eq!(reloaded, whole.outcomes);
    let report = evaluate_outcomes(&reloaded, &rankings, &cfg.config_label()).unwrap();
    assert_eq!(report, whole.report);

    // The exported aligned corpus scored with the identity map gives the same scores.
    let aligned = load_corpus(dir.path().join("out").join(ALIGNED_CORPUS_FILE)).unwrap();
    let aligned_merged = merge_corpus(&aligned, &Merger::default());
    let aligned_anchors = collect_anchors(&aligned_merged, &lexicon);
    let via_export = score_samples(
        &aligned_merged,
        &Alignment::identity(16),
        Some(&aligned_anchors),
        &PairScorer::new(ScoreMode::AnchorsOnly),
    )
    .unwrap();
    for (a, b) in via_export.iter().zip(&whole.outcomes) {
        let (a, b) = (a.score().unwrap(), b.score().unwrap());
        assert!((a.f1 - b.f1).abs() <= 1e-12);
    }
}

#[test]
fn dimension_sweep_keeps_the_aligned_ordering() {
    for d in [8, 16, 32, 64] {
        let data = generate_synthetic(&SyntheticSpec::new(40, d, NOISE.to_vec())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = data.write(dir.path()).unwrap();
        let cfg = config(&files, dir.path(), ScoreMode::AnchorsOnly, true);
        let run = run_in_memory(&cfg, &data.corpus, Some(&data.lexicon), &data.rankings).unwrap();
        assert!(run.report.mean_rho >= 0.9, "d={d}: {}", run.report.mean_rho);
    }
}

#[test]
fn generated_files_load_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (data, files) = synthetic(25, 8, dir.path());
    assert_eq!(load_corpus(&files.corpus).unwrap(), data.corpus);
    assert_eq!(Lexicon::load(&files.lexicon).unwrap(), data.lexicon);
    assert_eq!(load_rankings(&files.rankings).unwrap(), data.rankings);
}

#[test]
fn optional_settings_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, files) = synthetic(40, 16, dir.path());
    let mut cfg = config(&files, dir.path(), ScoreMode::AnchorsOnly, true);
    for (per_sentence, idf, swap) in [
        (true, false, false),
        (false, true, false),
        (false, false, true),
        (true, true, true),
    ] {
        cfg.alignment.per_sentence = per_sentence;
        cfg.idf = idf;
        cfg.swap_roles = swap;
        let run = run_in_memory(&cfg, &data.corpus, Some(&data.lexicon), &data.rankings).unwrap();
        assert!(
            run.report.mean_rho > 0.5,
            "{per_sentence} {idf} {swap}: {}",
            run.report.mean_rho
        );
        if per_sentence {
            assert!(matches!(run.alignment, Some(Alignment::PerSentence { .. })));
        }
    }
}

#[test]
fn missing_lexicon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, files) = synthetic(5, 4, dir.path());
    let mut cfg = config(&files, dir.path(), ScoreMode::AnchorsOnly, false);
    cfg.lexicon_path = None;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);

    cfg.mode = ScoreMode::AllTokens;
    assert!(run_pipeline(&cfg).is_ok());
}
