//! Command-line entry point: wires configuration, corpus, prompting, gateway,
//! and evaluation into reproducible runs.
//!
//! Exit codes: 0 success, 2 usage/config/data error, 3 gateway failure,
//! 4 parse failure (`verify` only).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    ConfigError, ConfigFile, ConfigOverrides, EnvOverrides, RunConfig, RunManifest,
};
use crate::corpus::{
    load_corpus, read_pairs, sample_pairs, write_pairs, CorpusError, CorpusFormat, Label,
    PairSampleSpec, TextPair,
};
use crate::evaluator::{
    compare_reports, evaluate, ComparisonReport, EvaluateError, EvaluationReport, EvaluationRun,
};
use crate::gateway::{ChatRequest, Gateway, GatewayError, GatewayMode};
use crate::prompt::{
    load_demonstrations, save_demonstrations, Demonstration, PromptError, PromptStrategy,
    StoredDemonstration,
};
use crate::response::{parse_response, ExtractOptions, ResponseParseError, VerificationOutcome};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GATEWAY: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Usage, configuration, or data problem (exit 2).
    #[error("{0}")]
    Usage(String),
    /// The backend could not be reached or kept failing (exit 3).
    #[error("{0}")]
    Gateway(String),
    /// A response carried no extractable confidence score (exit 4).
    #[error("{0}")]
    ParseFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Gateway(_) => EXIT_GATEWAY,
            CliError::ParseFailure(_) => EXIT_PARSE,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        CliError::Gateway(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Gateway(inner) => CliError::Gateway(inner.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::AllRequestsFailed { .. } => CliError::Gateway(e.to_string()),
            EvaluateError::Prompt(PromptError::Gateway(inner)) => {
                CliError::Gateway(inner.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(
    name = "promptav",
    version,
    about = "Authorship verification by prompting chat models for confidence scores"
)]
pub struct Cli {
    /// TOML config file; flags and environment variables override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_strategy(s: &str) -> Result<PromptStrategy, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<GatewayMode, String> {
    s.parse()
}

/// Config overrides available to every networked command; each one trumps
/// the matching environment variable and config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct OverrideArgs {
    /// Chat model identifier.
    #[arg(long, value_name = "MODEL")]
    pub model: Option<String>,
    /// Chat-completions endpoint base URL.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Prompting strategy.
    #[arg(long, value_parser = parse_strategy, value_name = "promptav|cot|ps+")]
    pub strategy: Option<PromptStrategy>,
    /// Number of few-shot demonstrations.
    #[arg(long, value_name = "N")]
    pub shots: Option<usize>,
    /// Feature-set id or path to a JSON descriptor.
    #[arg(long = "feature-set", value_name = "PATH|ID")]
    pub feature_set: Option<String>,
    /// Prompt template version.
    #[arg(long = "template-version", value_name = "VERSION")]
    pub template_version: Option<String>,
    /// Directory holding `<strategy>.<version>.txt` template files.
    #[arg(long = "templates-dir", value_name = "DIR")]
    pub templates_dir: Option<PathBuf>,
    /// Response cache directory.
    #[arg(long = "cache-dir", value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Gateway mode.
    #[arg(long, value_parser = parse_mode, value_name = "live|replay|record")]
    pub mode: Option<GatewayMode>,
    /// Cassette file for replay/record modes.
    #[arg(long, value_name = "PATH")]
    pub cassette: Option<PathBuf>,
    /// Seed for sampling and run provenance.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Threshold grid as lo:hi:step.
    #[arg(long, value_name = "LO:HI:STEP")]
    pub grid: Option<String>,
    /// Price per 1,000 tokens, for cost estimates.
    #[arg(long = "rate-per-1k", value_name = "DOLLARS")]
    pub rate_per_1k: Option<String>,
    /// Maximum concurrent backend requests.
    #[arg(long = "max-in-flight", value_name = "N")]
    pub max_in_flight: Option<usize>,
}

impl OverrideArgs {
    fn into_overrides(self) -> ConfigOverrides {
        ConfigOverrides {
            model_id: self.model,
            endpoint: self.endpoint,
            strategy: self.strategy,
            shots: self.shots,
            feature_set: self.feature_set,
            template_version: self.template_version,
            templates_dir: self.templates_dir,
            cache_dir: self.cache_dir,
            mode: self.mode,
            cassette: self.cassette,
            seed: self.seed,
            grid: self.grid,
            rate_per_1k: self.rate_per_1k,
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample labeled text pairs from an author corpus into a JSONL file.
    SamplePairs {
        /// Corpus file: CSV (`doc_id,author_id,text`) or JSONL.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Same-author pairs to draw.
        #[arg(long = "n-pos", default_value_t = 503, value_name = "N")]
        n_pos: usize,
        /// Different-author pairs to draw.
        #[arg(long = "n-neg", default_value_t = 497, value_name = "N")]
        n_neg: usize,
        /// Skip documents shorter than this many characters.
        #[arg(long = "min-doc-chars", value_name = "N")]
        min_doc_chars: Option<usize>,
        /// Output pair file (JSONL).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Generate few-shot demonstrations with target confidence scores.
    GenDemos {
        /// Labeled pair file (JSONL) to draw demonstration pairs from.
        #[arg(long, value_name = "PATH")]
        pairs: PathBuf,
        /// Number of demonstrations to generate.
        #[arg(short, long, value_name = "N")]
        k: usize,
        /// Model used to write the demonstration reasoning (defaults to the
        /// run model).
        #[arg(long = "generator-model", value_name = "MODEL")]
        generator_model: Option<String>,
        /// Output demonstration store (JSON).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Verify one pair of text files and print the parsed outcome.
    Verify {
        /// File holding the first text.
        #[arg(long = "text-a", value_name = "PATH")]
        text_a: PathBuf,
        /// File holding the second text.
        #[arg(long = "text-b", value_name = "PATH")]
        text_b: PathBuf,
        /// Demonstration store for few-shot prompts.
        #[arg(long, value_name = "PATH")]
        demos: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Evaluate a strategy over a labeled pair file and write a report.
    Evaluate {
        /// Labeled pair file (JSONL).
        #[arg(long, value_name = "PATH")]
        pairs: PathBuf,
        /// Demonstration store for few-shot prompts.
        #[arg(long, value_name = "PATH")]
        demos: Option<PathBuf>,
        /// Output report (JSON).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Directory for raw model responses (defaults to `<out stem>.raw`
        /// next to the report).
        #[arg(long = "raw-dir", value_name = "DIR")]
        raw_dir: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print accuracy deltas between two evaluation reports (b relative
    /// to a).
    Compare {
        /// Baseline report.
        report_a: PathBuf,
        /// Report to compare against the baseline.
        report_b: PathBuf,
    },
}

/// Parse argv, execute, and translate errors into exit codes. Clap itself
/// exits 2 on malformed flags.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let file = cli
        .config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()?;
    let env = EnvOverrides::capture();
    let resolve = |overrides: OverrideArgs| {
        RunConfig::resolve(overrides.into_overrides(), env.clone(), file.clone())
            .map_err(CliError::from)
    };

    match cli.command {
        Command::SamplePairs {
            corpus,
            n_pos,
            n_neg,
            min_doc_chars,
            out,
            overrides,
        } => {
            let config = resolve(overrides)?;
            cmd_sample_pairs(&corpus, n_pos, n_neg, min_doc_chars, &out, &config)
        }
        Command::GenDemos {
            pairs,
            k,
            generator_model,
            out,
            overrides,
        } => {
            let config = resolve(overrides)?;
            cmd_gen_demos(&pairs, k, generator_model.as_deref(), &out, &config)
        }
        Command::Verify {
            text_a,
            text_b,
            demos,
            overrides,
        } => {
            let config = resolve(overrides)?;
            cmd_verify(&text_a, &text_b, demos.as_deref(), &config)
        }
        Command::Evaluate {
            pairs,
            demos,
            out,
            raw_dir,
            overrides,
        } => {
            let config = resolve(overrides)?;
            cmd_evaluate(&pairs, demos.as_deref(), &out, raw_dir, &config)
        }
        Command::Compare { report_a, report_b } => cmd_compare(&report_a, &report_b),
    }
}

/// Sample pairs from a corpus, write them as JSONL, and print the counts.
pub fn cmd_sample_pairs(
    corpus_path: &Path,
    n_pos: usize,
    n_neg: usize,
    min_doc_chars: Option<usize>,
    out: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus_path, CorpusFormat::from_path(corpus_path))?;
    let mut spec = PairSampleSpec::new(n_pos, n_neg, config.seed);
    if let Some(min) = min_doc_chars {
        spec = spec.with_min_doc_chars(min);
    }
    let pairs = sample_pairs(&corpus, &spec)?;
    write_pairs(out, &pairs)?;
    let manifest = write_manifest("sample-pairs", config, out)?;

    let n_same = pairs
        .iter()
        .filter(|p| p.label == Some(Label::Same))
        .count();
    println!(
        "sampled {} pairs ({} same, {} different) -> {}",
        pairs.len(),
        n_same,
        pairs.len() - n_same,
        out.display()
    );
    println!("manifest -> {}", manifest.display());
    Ok(())
}

/// Pick `k` demonstration pairs (classes interleaved, deterministic in the
/// seed, and prefix-stable: the first pairs chosen for k=2 are the first two
/// chosen for k=4), generate reasoning for each, and write the store.
pub fn cmd_gen_demos(
    pairs_path: &Path,
    k: usize,
    generator_model: Option<&str>,
    out: &Path,
    config: &RunConfig,
) -> Result<(), CliError> {
    let pairs = read_pairs(pairs_path)?;
    let selected = select_demo_pairs(&pairs, k, config.seed)?;

    let gateway = Gateway::new(config.gateway_config()?)?;
    let engine = config.engine()?;
    let feature_set = config.load_feature_set()?;
    let model = generator_model.unwrap_or(&config.model_id);

    let mut stored = Vec::with_capacity(k);
    for pair in selected {
        let demo =
            engine.generate_demonstration(&gateway, pair, config.strategy, &feature_set, model)?;
        let record = StoredDemonstration::from_demonstration(&demo, engine.version())
            .expect("selected pairs are labeled");
        stored.push(record);
    }
    save_demonstrations(out, &stored)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", out.display())))?;
    let manifest = write_manifest("gen-demos", config, out)?;

    let n_same = stored.iter().filter(|d| d.label == Label::Same).count();
    println!(
        "generated {} demonstrations ({} same, {} different) -> {}",
        stored.len(),
        n_same,
        stored.len() - n_same,
        out.display()
    );
    println!("manifest -> {}", manifest.display());
    Ok(())
}

/// Deterministic demonstration selection: shuffle each class with the seeded
/// RNG, then interleave same/different. Extending `k` only appends, so the
/// k=2 selection is always a prefix of the k=4 selection for the same seed.
pub fn select_demo_pairs(
    pairs: &[TextPair],
    k: usize,
    seed: u64,
) -> Result<Vec<&TextPair>, CliError> {
    let labeled: Vec<&TextPair> = pairs.iter().filter(|p| p.label.is_some()).collect();
    if k > labeled.len() {
        return Err(CliError::Usage(format!(
            "requested {k} demonstrations but only {} labeled pairs are available",
            labeled.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut same: Vec<&TextPair> = labeled
        .iter()
        .copied()
        .filter(|p| p.label == Some(Label::Same))
        .collect();
    let mut different: Vec<&TextPair> = labeled
        .iter()
        .copied()
        .filter(|p| p.label == Some(Label::Different))
        .collect();
    same.shuffle(&mut rng);
    different.shuffle(&mut rng);

    let mut selected = Vec::with_capacity(k);
    let (mut s, mut d) = (same.into_iter(), different.into_iter());
    while selected.len() < k {
        match (s.next(), d.next()) {
            (Some(a), Some(b)) => {
                selected.push(a);
                if selected.len() < k {
                    selected.push(b);
                }
            }
            (Some(a), None) => selected.push(a),
            (None, Some(b)) => selected.push(b),
            (None, None) => unreachable!("k was bounds-checked against labeled pairs"),
        }
    }
    Ok(selected)
}

/// Load a demonstration store and take the first `shots` entries.
fn load_demos_for_shots(
    path: Option<&Path>,
    shots: usize,
    engine_version: &str,
) -> Result<Vec<Demonstration>, CliError> {
    if shots == 0 {
        if path.is_some() {
            log::warn!("--demos ignored because shots is 0");
        }
        return Ok(Vec::new());
    }
    let path = path.ok_or_else(|| {
        CliError::Usage(format!("{shots}-shot runs need --demos <PATH>"))
    })?;
    let stored = load_demonstrations(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    if stored.len() < shots {
        return Err(CliError::Usage(format!(
            "demonstration store {} holds {} entries, need {shots}",
            path.display(),
            stored.len()
        )));
    }
    for record in &stored[..shots] {
        if record.template_version != engine_version {
            log::warn!(
                "demonstration {} was generated with template version {} but this run uses {}",
                record.pair_id,
                record.template_version,
                engine_version
            );
        }
    }
    Ok(stored[..shots].iter().map(|d| d.to_demonstration()).collect())
}

/// Verify a single pair of text files: render one prompt, make one gateway
/// call, and print the parsed outcome as text plus a JSON line.
pub fn cmd_verify(
    text_a_path: &Path,
    text_b_path: &Path,
    demos_path: Option<&Path>,
    config: &RunConfig,
) -> Result<(), CliError> {
    let text_a = read_file(text_a_path)?;
    let text_b = read_file(text_b_path)?;
    let engine = config.engine()?;
    let feature_set = config.load_feature_set()?;
    let demos = load_demos_for_shots(demos_path, config.shots, engine.version())?;

    let pair = TextPair {
        pair_id: "verify".into(),
        text_a,
        text_b,
        label: None,
        source_doc_ids: None,
    };
    let prompt = engine.render_prompt(config.strategy, &feature_set, &pair, &demos)?;
    let gateway = Gateway::new(config.gateway_config()?)?;
    let response = gateway.cached_complete(&ChatRequest::user(&config.model_id, &prompt))?;

    match parse_response(&response.text, &ExtractOptions::default()) {
        Ok(outcome) => {
            print_outcome(&outcome, config);
            Ok(())
        }
        Err(ResponseParseError::MissingScore) => {
            println!("no confidence score found; raw response follows:");
            println!("{}", response.text);
            Err(CliError::ParseFailure(
                "response contained no extractable confidence score".into(),
            ))
        }
    }
}

fn print_outcome(outcome: &VerificationOutcome, config: &RunConfig) {
    println!(
        "strategy: {} ({}-shot)",
        config.strategy.as_str(),
        config.shots
    );
    println!("overall confidence: {}", outcome.overall_score);
    if !outcome.feature_scores.is_empty() {
        println!("feature scores:");
        for (index, (label, score)) in outcome.feature_scores.iter().enumerate() {
            println!("  {}. {label}: {score}", index + 1);
        }
    }
    println!("explanation:");
    println!("{}", outcome.explanation_text);
    let json = serde_json::json!({
        "overall_score": outcome.overall_score,
        "feature_scores": outcome.feature_scores,
        "explanation_text": outcome.explanation_text,
        "raw_response": outcome.raw_response,
    });
    println!("{json}");
}

/// Evaluate a strategy over a labeled pair file, write the report and its
/// manifest, and print the best threshold/accuracy summary.
pub fn cmd_evaluate(
    pairs_path: &Path,
    demos_path: Option<&Path>,
    out: &Path,
    raw_dir: Option<PathBuf>,
    config: &RunConfig,
) -> Result<(), CliError> {
    let pairs = read_pairs(pairs_path)?;
    let engine = config.engine()?;
    let feature_set = config.load_feature_set()?;
    let demonstrations = load_demos_for_shots(demos_path, config.shots, engine.version())?;
    let gateway = Gateway::new(config.gateway_config()?)?;

    let raw_response_dir = raw_dir.unwrap_or_else(|| default_raw_dir(out));
    let raw_response_prefix = raw_response_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let run = EvaluationRun {
        strategy: config.strategy,
        shots: config.shots,
        feature_set: &feature_set,
        demonstrations: &demonstrations,
        engine: &engine,
        model_id: config.model_id.clone(),
        grid: config.grid()?,
        seed: config.seed,
        rate_per_1k: config.rate()?,
        extract_options: ExtractOptions::default(),
        raw_response_dir: Some(raw_response_dir),
        raw_response_prefix,
    };

    let report = evaluate(&pairs, &run, &gateway)?;
    report.save(out)?;
    let manifest = write_manifest("evaluate", config, out)?;

    println!(
        "best threshold {} accuracy {:.3} ({} pairs, {} parse failures) -> {}",
        report.best_threshold,
        report.best_accuracy,
        report.n_pairs,
        report.n_parse_failures,
        out.display()
    );
    println!("manifest -> {}", manifest.display());
    Ok(())
}

/// `report.json` → `report.raw` next to it.
fn default_raw_dir(out: &Path) -> PathBuf {
    out.with_extension("raw")
}

/// Load two reports and print the accuracy deltas of b relative to a.
pub fn cmd_compare(report_a: &Path, report_b: &Path) -> Result<(), CliError> {
    let a = EvaluationReport::load(report_a)?;
    let b = EvaluationReport::load(report_b)?;
    let comparison = compare_reports(&a, &b)?;
    print_comparison(&comparison);
    Ok(())
}

fn print_comparison(comparison: &ComparisonReport) {
    println!(
        "strategy {} ({}-shot)",
        comparison.strategy.as_str(),
        comparison.shots
    );
    println!(
        "best accuracy: {:.3} -> {:.3} (delta {:+.3})",
        comparison.best_accuracy_a, comparison.best_accuracy_b, comparison.best_accuracy_delta
    );
    if !comparison.per_threshold_deltas.is_empty() {
        println!("per-threshold deltas:");
        for (threshold, delta) in &comparison.per_threshold_deltas {
            println!("  {threshold}: {delta:+.3}");
        }
    }
}

fn write_manifest(command: &str, config: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let engine = config.engine()?;
    RunManifest::new(command, config, &engine)
        .write_next_to(out)
        .map_err(|e| CliError::Usage(format!("cannot write manifest for {}: {e}", out.display())))
}
