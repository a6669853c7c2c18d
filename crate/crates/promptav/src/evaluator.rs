//! Batch evaluation: run a prompting strategy over a labeled pair set,
//! aggregate confidence scores, sweep thresholds for the best accuracy, and
//! produce comparable JSON reports.
//!
//! Reports are byte-deterministic for a given set of responses: records are
//! aggregated in `pair_id` order regardless of request completion order, the
//! schema has a fixed field order, and no timestamps are embedded.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TextPair};
use crate::features::FeatureSet;
use crate::gateway::{estimate_cost, ChatRequest, ChatResponse, Gateway, Money, Rate};
use crate::prompt::{Demonstration, PromptEngine, PromptError, PromptStrategy};
use crate::response::{decide, extract_overall_score_with, ExtractOptions};

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error("nothing to evaluate: input is empty")]
    EmptyInput,
    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),
    #[error("shots is {shots} but {demos} demonstrations were supplied")]
    ShotsMismatch { shots: usize, demos: usize },
    #[error("pair {0:?} is unlabeled; evaluation needs ground truth")]
    UnlabeledPair(String),
    #[error("reports disagree on {field}: {a:?} vs {b:?}")]
    MismatchedReports {
        field: &'static str,
        a: String,
        b: String,
    },
    #[error("all {attempted} requests failed; last error: {last_error}")]
    AllRequestsFailed { attempted: usize, last_error: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report {path}: {reason}")]
    ReportFormat { path: PathBuf, reason: String },
}

/// One pair's scored outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub pair_id: String,
    pub label: Label,
    /// Present exactly when `parse_failed` is false.
    pub score: Option<f64>,
    pub parse_failed: bool,
}

impl PredictionRecord {
    pub fn scored(pair_id: &str, label: Label, score: f64) -> Self {
        Self {
            pair_id: pair_id.into(),
            label,
            score: Some(score),
            parse_failed: false,
        }
    }

    pub fn failed(pair_id: &str, label: Label) -> Self {
        Self {
            pair_id: pair_id.into(),
            label,
            score: None,
            parse_failed: true,
        }
    }

    /// Whether the record's verdict at `threshold` matches its label.
    /// Failed records never count as correct.
    fn correct_at(&self, threshold: f64) -> bool {
        match self.score {
            Some(score) => decide(score, threshold) == self.label,
            None => false,
        }
    }
}

/// Accuracy over `records` at one threshold; parse failures count as
/// incorrect rather than being dropped.
pub fn accuracy_at(records: &[PredictionRecord], threshold: f64) -> Result<f64, EvaluateError> {
    if records.is_empty() {
        return Err(EvaluateError::EmptyInput);
    }
    let correct = records.iter().filter(|r| r.correct_at(threshold)).count();
    Ok(correct as f64 / records.len() as f64)
}

/// The result of sweeping a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    pub grid: Vec<f64>,
    /// (threshold, accuracy) in grid order.
    pub accuracy_by_threshold: Vec<(f64, f64)>,
    pub best_threshold: f64,
    pub best_accuracy: f64,
}

/// Sweep every threshold in `grid`; the best is the highest accuracy, ties
/// broken by the smallest threshold.
pub fn sweep_thresholds(
    records: &[PredictionRecord],
    grid: &[f64],
) -> Result<ThresholdSweep, EvaluateError> {
    if grid.is_empty() {
        return Err(EvaluateError::InvalidGrid("grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(EvaluateError::InvalidGrid(format!(
            "threshold {bad} lies outside [0,1]"
        )));
    }
    let mut accuracy_by_threshold = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &threshold in grid {
        let accuracy = accuracy_at(records, threshold)?;
        accuracy_by_threshold.push((threshold, accuracy));
        let improves = match best {
            Some((_, best_accuracy)) => accuracy > best_accuracy,
            None => true,
        };
        if improves {
            best = Some((threshold, accuracy));
        }
    }
    let (best_threshold, best_accuracy) = best.expect("grid is non-empty");
    Ok(ThresholdSweep {
        grid: grid.to_vec(),
        accuracy_by_threshold,
        best_threshold,
        best_accuracy,
    })
}

/// The default sweep grid: 0.1 through 0.9 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    parse_grid_spec("0.1:0.9:0.1").expect("default grid spec is valid")
}

/// Every distinct observed score, sorted — the exhaustive candidate set for
/// runs that want the true optimum rather than a fixed grid.
pub fn exhaustive_grid(records: &[PredictionRecord]) -> Vec<f64> {
    let mut scores: Vec<f64> = records.iter().filter_map(|r| r.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    scores.dedup();
    scores
}

/// Parse a `lo:hi:step` grid spec ("0.1:0.9:0.1") into thresholds. The walk
/// runs on decimal-scaled integers so no float accumulation error creeps in:
/// "0.05:0.95:0.05" yields exactly 19 points.
pub fn parse_grid_spec(spec: &str) -> Result<Vec<f64>, EvaluateError> {
    let invalid = |reason: &str| EvaluateError::InvalidGrid(format!("{spec:?}: {reason}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step]: [&str; 3] = parts
        .try_into()
        .map_err(|_| invalid("expected lo:hi:step"))?;
    let (lo_m, lo_s) = parse_decimal(lo).ok_or_else(|| invalid("bad lower bound"))?;
    let (hi_m, hi_s) = parse_decimal(hi).ok_or_else(|| invalid("bad upper bound"))?;
    let (st_m, st_s) = parse_decimal(step).ok_or_else(|| invalid("bad step"))?;

    let scale = lo_s.max(hi_s).max(st_s);
    let rescale = |mantissa: u64, s: u32| mantissa * 10u64.pow(scale - s);
    let (lo, hi, step) = (
        rescale(lo_m, lo_s),
        rescale(hi_m, hi_s),
        rescale(st_m, st_s),
    );
    let unit = 10u64.pow(scale);
    if step == 0 {
        return Err(invalid("step must be positive"));
    }
    if lo > hi {
        return Err(invalid("lower bound exceeds upper bound"));
    }
    if hi > unit {
        return Err(invalid("thresholds must stay within [0,1]"));
    }
    let mut grid = Vec::new();
    let mut t = lo;
    while t <= hi {
        grid.push(t as f64 / unit as f64);
        t += step;
    }
    Ok(grid)
}

/// Parse a plain decimal like "0.05" into (mantissa, scale) with
/// value = mantissa / 10^scale.
fn parse_decimal(text: &str) -> Option<(u64, u32)> {
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if whole.len() + frac.len() > 12 {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let mantissa: u64 = if digits.is_empty() {
        return None;
    } else {
        digits.parse().ok()?
    };
    Some((mantissa, frac.len() as u32))
}

/// Confusion counts at the best threshold; Same is the positive class.
/// Parse failures appear in neither cell (they are tracked separately).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    #[serde(rename = "tp")]
    pub true_positive: usize,
    #[serde(rename = "fp")]
    pub false_positive: usize,
    #[serde(rename = "tn")]
    pub true_negative: usize,
    #[serde(rename = "fn")]
    pub false_negative: usize,
}

impl Confusion {
    pub fn at_threshold(records: &[PredictionRecord], threshold: f64) -> Self {
        let mut confusion = Confusion {
            true_positive: 0,
            false_positive: 0,
            true_negative: 0,
            false_negative: 0,
        };
        for record in records {
            let Some(score) = record.score else {
                continue;
            };
            match (record.label, decide(score, threshold)) {
                (Label::Same, Label::Same) => confusion.true_positive += 1,
                (Label::Different, Label::Same) => confusion.false_positive += 1,
                (Label::Different, Label::Different) => confusion.true_negative += 1,
                (Label::Same, Label::Different) => confusion.false_negative += 1,
            }
        }
        confusion
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// One pair's entry in the report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPairReport {
    pub pair_id: String,
    pub label: Label,
    pub score: Option<f64>,
    pub parse_failed: bool,
    pub raw_response_path: Option<String>,
}

/// The full evaluation report, serialized with a fixed field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub strategy: PromptStrategy,
    pub shots: usize,
    pub feature_set_id: String,
    pub model_id: String,
    pub template_version: String,
    pub n_pairs: usize,
    pub n_parse_failures: usize,
    pub grid: Vec<f64>,
    #[serde(with = "threshold_map")]
    pub accuracy_by_threshold: Vec<(f64, f64)>,
    pub best_threshold: f64,
    pub best_accuracy: f64,
    pub confusion: Confusion,
    pub total_tokens: u64,
    pub estimated_cost: Money,
    pub seed: u64,
    pub per_pair: Vec<PerPairReport>,
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> Result<(), EvaluateError> {
        let body = serde_json::to_string_pretty(self).map_err(|e| EvaluateError::ReportFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, body + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvaluateError> {
        let body = std::fs::read_to_string(path)?;
        serde_json::from_str(&body).map_err(|e| EvaluateError::ReportFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn sweep(&self) -> ThresholdSweep {
        ThresholdSweep {
            grid: self.grid.clone(),
            accuracy_by_threshold: self.accuracy_by_threshold.clone(),
            best_threshold: self.best_threshold,
            best_accuracy: self.best_accuracy,
        }
    }
}

/// Serialize `Vec<(f64, f64)>` as a JSON object in vector order
/// ({"0.1": 0.506, …}) and read it back preserving document order.
mod threshold_map {
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        entries: &[(f64, f64)],
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (threshold, accuracy) in entries {
            map.serialize_entry(&threshold.to_string(), accuracy)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<(f64, f64)>, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = Vec<(f64, f64)>;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a map of threshold → accuracy")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((key, value)) = access.next_entry::<String, f64>()? {
                    let threshold: f64 = key.parse().map_err(serde::de::Error::custom)?;
                    entries.push((threshold, value));
                }
                Ok(entries)
            }
        }

        deserializer.deserialize_map(MapVisitor)
    }
}

/// Everything an evaluation run needs besides the pairs and the gateway.
#[derive(Debug, Clone)]
pub struct EvaluationRun<'a> {
    pub strategy: PromptStrategy,
    pub shots: usize,
    pub feature_set: &'a FeatureSet,
    pub demonstrations: &'a [Demonstration],
    pub engine: &'a PromptEngine,
    pub model_id: String,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub rate_per_1k: Rate,
    pub extract_options: ExtractOptions,
    /// Directory for one raw-response file per pair; `None` skips persisting.
    pub raw_response_dir: Option<PathBuf>,
    /// Path prefix recorded in the report for raw responses (kept relative so
    /// reports stay portable).
    pub raw_response_prefix: String,
}

/// Run `strategy` over every pair and build the report. Individual failures
/// (gateway errors or unparseable responses) are recorded per pair and never
/// abort the run; only a run where *every* request fails is an error.
pub fn evaluate(
    pairs: &[TextPair],
    run: &EvaluationRun<'_>,
    gateway: &Gateway,
) -> Result<EvaluationReport, EvaluateError> {
    if pairs.is_empty() {
        return Err(EvaluateError::EmptyInput);
    }
    if run.shots != run.demonstrations.len() {
        return Err(EvaluateError::ShotsMismatch {
            shots: run.shots,
            demos: run.demonstrations.len(),
        });
    }
    if run.shots > 0 && !run.strategy.supports_demonstrations() {
        return Err(EvaluateError::Prompt(
            PromptError::DemonstrationsNotSupported(run.strategy),
        ));
    }
    if run.grid.is_empty() {
        return Err(EvaluateError::InvalidGrid("grid is empty".into()));
    }
    for pair in pairs {
        if pair.label.is_none() {
            return Err(EvaluateError::UnlabeledPair(pair.pair_id.clone()));
        }
    }

    // Prompt rendering is pure; do it up front so template problems surface
    // before any network traffic.
    let requests: Vec<ChatRequest> = pairs
        .iter()
        .map(|pair| {
            run.engine
                .render_prompt(run.strategy, run.feature_set, pair, run.demonstrations)
                .map(|prompt| ChatRequest::user(&run.model_id, &prompt))
        })
        .collect::<Result<_, _>>()?;

    let outcomes = fetch_all(gateway, &requests);

    // Aggregate in pair_id order so the report does not depend on input or
    // completion order.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].pair_id.cmp(&pairs[b].pair_id));

    if let Some(dir) = &run.raw_response_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut records = Vec::with_capacity(pairs.len());
    let mut total_tokens: u64 = 0;
    let mut gateway_failures = 0usize;
    let mut last_error = String::new();
    for index in order {
        let pair = &pairs[index];
        let label = pair.label.expect("labels checked above");
        let (record, raw_response_path) = match &outcomes[index] {
            Ok(response) => {
                total_tokens += response.total_tokens();
                let raw_path = match &run.raw_response_dir {
                    Some(dir) => {
                        let file = format!("{}.txt", pair.pair_id);
                        std::fs::write(dir.join(&file), &response.text)?;
                        Some(join_prefix(&run.raw_response_prefix, &file))
                    }
                    None => None,
                };
                let record = match extract_overall_score_with(&response.text, &run.extract_options)
                {
                    Ok(score) => PredictionRecord::scored(&pair.pair_id, label, score),
                    Err(_) => PredictionRecord::failed(&pair.pair_id, label),
                };
                (record, raw_path)
            }
            Err(error) => {
                gateway_failures += 1;
                last_error = error.clone();
                (PredictionRecord::failed(&pair.pair_id, label), None)
            }
        };
        per_pair.push(PerPairReport {
            pair_id: record.pair_id.clone(),
            label,
            score: record.score,
            parse_failed: record.parse_failed,
            raw_response_path,
        });
        records.push(record);
    }

    if gateway_failures == pairs.len() {
        return Err(EvaluateError::AllRequestsFailed {
            attempted: pairs.len(),
            last_error,
        });
    }

    let sweep = sweep_thresholds(&records, &run.grid)?;
    let confusion = Confusion::at_threshold(&records, sweep.best_threshold);
    let n_parse_failures = records.iter().filter(|r| r.parse_failed).count();
    debug_assert_eq!(confusion.total() + n_parse_failures, pairs.len());

    Ok(EvaluationReport {
        strategy: run.strategy,
        shots: run.shots,
        feature_set_id: run.feature_set.set_id.clone(),
        model_id: run.model_id.clone(),
        template_version: run.engine.version().to_string(),
        n_pairs: pairs.len(),
        n_parse_failures,
        grid: sweep.grid,
        accuracy_by_threshold: sweep.accuracy_by_threshold,
        best_threshold: sweep.best_threshold,
        best_accuracy: sweep.best_accuracy,
        confusion,
        total_tokens,
        estimated_cost: estimate_cost(total_tokens, run.rate_per_1k),
        seed: run.seed,
        per_pair,
    })
}

fn join_prefix(prefix: &str, file: &str) -> String {
    if prefix.is_empty() {
        file.to_string()
    } else {
        format!("{}/{file}", prefix.trim_end_matches('/'))
    }
}

/// Issue every request through `cached_complete`, at most the gateway's
/// `max_in_flight` at a time, collecting results by input position.
fn fetch_all(gateway: &Gateway, requests: &[ChatRequest]) -> Vec<Result<ChatResponse, String>> {
    let workers = gateway.config().max_in_flight.min(requests.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ChatResponse, String>>>> =
        (0..requests.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= requests.len() {
                    break;
                }
                let outcome = gateway
                    .cached_complete(&requests[index])
                    .map_err(|e| e.to_string());
                *slots[index].lock().expect("slot lock poisoned") = Some(outcome);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("slot lock poisoned")
                .expect("every slot filled")
        })
        .collect()
}

/// Accuracy deltas between two runs of the same strategy and shot count
/// (b relative to a).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub strategy: PromptStrategy,
    pub shots: usize,
    pub best_accuracy_a: f64,
    pub best_accuracy_b: f64,
    pub best_accuracy_delta: f64,
    /// (threshold, accuracy_b − accuracy_a) for thresholds present in both
    /// reports, in report-a grid order.
    pub per_threshold_deltas: Vec<(f64, f64)>,
}

/// Compare two reports; they must agree on strategy and shots.
pub fn compare_reports(
    a: &EvaluationReport,
    b: &EvaluationReport,
) -> Result<ComparisonReport, EvaluateError> {
    if a.strategy != b.strategy {
        return Err(EvaluateError::MismatchedReports {
            field: "strategy",
            a: a.strategy.to_string(),
            b: b.strategy.to_string(),
        });
    }
    if a.shots != b.shots {
        return Err(EvaluateError::MismatchedReports {
            field: "shots",
            a: a.shots.to_string(),
            b: b.shots.to_string(),
        });
    }
    let per_threshold_deltas = a
        .accuracy_by_threshold
        .iter()
        .filter_map(|&(threshold, accuracy_a)| {
            b.accuracy_by_threshold
                .iter()
                .find(|(t, _)| *t == threshold)
                .map(|&(_, accuracy_b)| (threshold, accuracy_b - accuracy_a))
        })
        .collect();
    Ok(ComparisonReport {
        strategy: a.strategy,
        shots: a.shots,
        best_accuracy_a: a.best_accuracy,
        best_accuracy_b: b.best_accuracy,
        best_accuracy_delta: b.best_accuracy - a.best_accuracy,
        per_threshold_deltas,
    })
}
