//! Prompt rendering for the three verification strategies, plus few-shot
//! demonstration generation.
//!
//! Templates are versioned text assets with `{text_a}`, `{text_b}`,
//! `{feature_list}` and `{demonstrations}` slots; the built-in `v1` set is
//! compiled in and can be overridden from a templates directory. Rendering is
//! pure: identical inputs produce byte-identical prompts, which is what the
//! golden-file tests pin down.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TextPair};
use crate::features::FeatureSet;
use crate::gateway::{ChatRequest, Gateway, GatewayError};

/// The calibration sentence every rendered prompt must carry, verbatim.
pub const STRICTNESS_DIRECTIVE: &str =
    "Your answer should reflect a moderate level of strictness in scoring";

/// The phrase identifying the confidence-score instruction.
pub const CONFIDENCE_DIRECTIVE: &str = "generate a confidence score ranging from 0 to 1";

/// Version of the built-in templates.
pub const BUILTIN_TEMPLATE_VERSION: &str = "v1";

const PROMPTAV_V1: &str = include_str!("../templates/promptav.v1.txt");
const COT_V1: &str = include_str!("../templates/cot.v1.txt");
const PSPLUS_V1: &str = include_str!("../templates/psplus.v1.txt");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("{0:?} prompts do not support demonstrations")]
    DemonstrationsNotSupported(PromptStrategy),
    #[error("pair {0:?} has an empty text")]
    EmptyText(String),
    #[error("pair {0:?} is not labeled")]
    UnlabeledPair(String),
    #[error("target score {target} does not match the {label} policy score {expected}")]
    TargetScoreMismatch {
        target: f64,
        label: Label,
        expected: f64,
    },
    #[error("demonstration for pair {0:?} has empty reasoning text")]
    EmptyReasoning(String),
    #[error("generator returned an empty response for pair {0:?}")]
    EmptyResponse(String),
    #[error("no template for strategy {strategy:?} version {version:?}: {reason}")]
    MissingTemplate {
        strategy: PromptStrategy,
        version: String,
        reason: String,
    },
    #[error("template for {strategy:?} is invalid: {reason}")]
    InvalidTemplate {
        strategy: PromptStrategy,
        reason: String,
    },
    #[error("target scores must lie in [0,1], got {0}")]
    ScoreOutOfRange(f64),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Prompting strategy under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptStrategy {
    #[serde(rename = "promptav")]
    PromptAv,
    #[serde(rename = "cot")]
    Cot,
    #[serde(rename = "ps+")]
    PsPlus,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 3] =
        [PromptStrategy::PromptAv, PromptStrategy::Cot, PromptStrategy::PsPlus];

    /// Flag value used on the command line and in reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptStrategy::PromptAv => "promptav",
            PromptStrategy::Cot => "cot",
            PromptStrategy::PsPlus => "ps+",
        }
    }

    /// Filename-safe slug used to resolve template assets.
    pub fn template_slug(&self) -> &'static str {
        match self {
            PromptStrategy::PromptAv => "promptav",
            PromptStrategy::Cot => "cot",
            PromptStrategy::PsPlus => "psplus",
        }
    }

    /// PS+ is benchmarked zero-shot only; the other strategies accept
    /// demonstrations.
    pub fn supports_demonstrations(&self) -> bool {
        !matches!(self, PromptStrategy::PsPlus)
    }

    fn uses_feature_list(&self) -> bool {
        matches!(self, PromptStrategy::PromptAv)
    }
}

impl std::fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "promptav" => Ok(PromptStrategy::PromptAv),
            "cot" => Ok(PromptStrategy::Cot),
            "ps+" | "psplus" => Ok(PromptStrategy::PsPlus),
            other => Err(format!(
                "unknown strategy {other:?} (expected promptav, cot or ps+)"
            )),
        }
    }
}

/// Maps pair labels to the confidence score a demonstration must arrive at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScorePolicy {
    pub same_score: f64,
    pub different_score: f64,
}

impl Default for TargetScorePolicy {
    fn default() -> Self {
        Self {
            same_score: 0.9,
            different_score: 0.1,
        }
    }
}

impl TargetScorePolicy {
    pub fn new(same_score: f64, different_score: f64) -> Result<Self, PromptError> {
        for score in [same_score, different_score] {
            if !(0.0..=1.0).contains(&score) || !score.is_finite() {
                return Err(PromptError::ScoreOutOfRange(score));
            }
        }
        Ok(Self {
            same_score,
            different_score,
        })
    }

    pub fn target_for(&self, label: Label) -> f64 {
        match label {
            Label::Same => self.same_score,
            Label::Different => self.different_score,
        }
    }
}

/// A labeled pair with generated step-by-step reasoning, used as a few-shot
/// exemplar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub pair: TextPair,
    pub target_score: f64,
    pub reasoning_text: String,
    pub generator_model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    TextA,
    TextB,
    FeatureList,
    Demonstrations,
}

impl Slot {
    const ALL: [(Slot, &'static str); 4] = [
        (Slot::TextA, "{text_a}"),
        (Slot::TextB, "{text_b}"),
        (Slot::FeatureList, "{feature_list}"),
        (Slot::Demonstrations, "{demonstrations}"),
    ];
}

#[derive(Debug, Clone)]
enum Segment {
    Literal(String),
    Slot(Slot),
}

/// A parsed template body for one strategy.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub strategy: PromptStrategy,
    pub version: String,
    pub body: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn parse(
        strategy: PromptStrategy,
        version: &str,
        body: &str,
    ) -> Result<Self, PromptError> {
        let segments = split_segments(body);
        let template = Self {
            strategy,
            version: version.into(),
            body: body.into(),
            segments,
        };
        template.validate()?;
        Ok(template)
    }

    fn slot_count(&self, slot: Slot) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Slot(k) if *k == slot))
            .count()
    }

    fn validate(&self) -> Result<(), PromptError> {
        let fail = |reason: String| PromptError::InvalidTemplate {
            strategy: self.strategy,
            reason,
        };
        if self.body.matches(STRICTNESS_DIRECTIVE).count() != 1 {
            return Err(fail(format!(
                "must contain the strictness directive {STRICTNESS_DIRECTIVE:?} exactly once"
            )));
        }
        if self.body.matches(CONFIDENCE_DIRECTIVE).count() != 1 {
            return Err(fail(format!(
                "must contain the confidence directive {CONFIDENCE_DIRECTIVE:?} exactly once"
            )));
        }
        if self.slot_count(Slot::TextA) != 1 || self.slot_count(Slot::TextB) != 1 {
            return Err(fail("must contain {text_a} and {text_b} exactly once".into()));
        }
        let wants_features = self.strategy.uses_feature_list();
        if wants_features && self.slot_count(Slot::FeatureList) != 1 {
            return Err(fail("must contain {feature_list} exactly once".into()));
        }
        if !wants_features && self.slot_count(Slot::FeatureList) != 0 {
            return Err(fail("must not contain {feature_list}".into()));
        }
        let wants_demos = self.strategy.supports_demonstrations();
        if wants_demos && self.slot_count(Slot::Demonstrations) != 1 {
            return Err(fail("must contain {demonstrations} exactly once".into()));
        }
        if !wants_demos && self.slot_count(Slot::Demonstrations) != 0 {
            return Err(fail("must not contain {demonstrations}".into()));
        }
        Ok(())
    }
}

/// Single-pass split of the template body on the known slot markers; the text
/// substituted later is never re-scanned, so document content cannot inject
/// further slots.
fn split_segments(body: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut rest = body;
    loop {
        let next = Slot::ALL
            .iter()
            .filter_map(|(slot, marker)| rest.find(marker).map(|pos| (pos, *slot, marker.len())))
            .min_by_key(|(pos, _, _)| *pos);
        match next {
            Some((pos, slot, marker_len)) => {
                if pos > 0 {
                    segments.push(Segment::Literal(rest[..pos].to_string()));
                }
                segments.push(Segment::Slot(slot));
                rest = &rest[pos + marker_len..];
            }
            None => {
                if !rest.is_empty() {
                    segments.push(Segment::Literal(rest.to_string()));
                }
                return segments;
            }
        }
    }
}

/// Renders prompts and generates demonstrations for a fixed template version
/// and target-score policy.
#[derive(Debug, Clone)]
pub struct PromptEngine {
    templates: HashMap<PromptStrategy, PromptTemplate>,
    version: String,
    policy: TargetScorePolicy,
}

impl PromptEngine {
    /// Engine over the compiled-in `v1` templates.
    pub fn builtin() -> Self {
        let mut templates = HashMap::new();
        for (strategy, body) in [
            (PromptStrategy::PromptAv, PROMPTAV_V1),
            (PromptStrategy::Cot, COT_V1),
            (PromptStrategy::PsPlus, PSPLUS_V1),
        ] {
            let template = PromptTemplate::parse(strategy, BUILTIN_TEMPLATE_VERSION, body)
                .expect("built-in template is valid");
            templates.insert(strategy, template);
        }
        Self {
            templates,
            version: BUILTIN_TEMPLATE_VERSION.into(),
            policy: TargetScorePolicy::default(),
        }
    }

    /// Engine loading `<slug>.<version>.txt` per strategy from `dir`;
    /// strategies without a file there fall back to the built-in template
    /// when the version matches the built-in version.
    pub fn from_templates_dir(dir: &Path, version: &str) -> Result<Self, PromptError> {
        let mut templates = HashMap::new();
        for strategy in PromptStrategy::ALL {
            let path = dir.join(format!("{}.{}.txt", strategy.template_slug(), version));
            let template = if path.is_file() {
                let body =
                    std::fs::read_to_string(&path).map_err(|e| PromptError::MissingTemplate {
                        strategy,
                        version: version.into(),
                        reason: e.to_string(),
                    })?;
                PromptTemplate::parse(strategy, version, &body)?
            } else if version == BUILTIN_TEMPLATE_VERSION {
                PromptEngine::builtin().templates[&strategy].clone()
            } else {
                return Err(PromptError::MissingTemplate {
                    strategy,
                    version: version.into(),
                    reason: format!("no file at {}", path.display()),
                });
            };
            templates.insert(strategy, template);
        }
        Ok(Self {
            templates,
            version: version.into(),
            policy: TargetScorePolicy::default(),
        })
    }

    pub fn with_policy(mut self, policy: TargetScorePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> TargetScorePolicy {
        self.policy
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn template(&self, strategy: PromptStrategy) -> &PromptTemplate {
        &self.templates[&strategy]
    }

    /// Render the verification prompt for `pair`, with `demonstrations` (in
    /// the given order) ahead of the query pair.
    pub fn render_prompt(
        &self,
        strategy: PromptStrategy,
        feature_set: &FeatureSet,
        pair: &TextPair,
        demonstrations: &[Demonstration],
    ) -> Result<String, PromptError> {
        if !demonstrations.is_empty() && !strategy.supports_demonstrations() {
            return Err(PromptError::DemonstrationsNotSupported(strategy));
        }
        check_pair_texts(pair)?;
        for demo in demonstrations {
            check_pair_texts(&demo.pair)?;
            if demo.reasoning_text.trim().is_empty() {
                return Err(PromptError::EmptyReasoning(demo.pair.pair_id.clone()));
            }
        }

        let template = self.template(strategy);
        let feature_list = render_feature_list(feature_set);
        let demos = render_demonstrations(demonstrations);

        let mut out = String::with_capacity(template.body.len() + demos.len());
        for segment in &template.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(Slot::TextA) => out.push_str(&pair.text_a),
                Segment::Slot(Slot::TextB) => out.push_str(&pair.text_b),
                Segment::Slot(Slot::FeatureList) => out.push_str(&feature_list),
                Segment::Slot(Slot::Demonstrations) => out.push_str(&demos),
            }
        }
        Ok(out)
    }

    /// Render the prompt that asks a generator model to produce step-by-step
    /// reasoning arriving at `target_score`: the zero-shot prompt followed by
    /// the target-score directive.
    pub fn render_demo_generation_prompt(
        &self,
        pair: &TextPair,
        target_score: f64,
        strategy: PromptStrategy,
        feature_set: &FeatureSet,
    ) -> Result<String, PromptError> {
        let label = pair
            .label
            .ok_or_else(|| PromptError::UnlabeledPair(pair.pair_id.clone()))?;
        let expected = self.policy.target_for(label);
        if target_score != expected {
            return Err(PromptError::TargetScoreMismatch {
                target: target_score,
                label,
                expected,
            });
        }
        let base = self.render_prompt(strategy, feature_set, pair, &[])?;
        Ok(format!(
            "{base}\n{}",
            demo_generation_directive(target_score)
        ))
    }

    /// Ask `generator_model` (through the gateway) for the reasoning of one
    /// demonstration. The response text is kept whole so that persisted
    /// demonstrations replay without another generator call.
    pub fn generate_demonstration(
        &self,
        gateway: &Gateway,
        pair: &TextPair,
        strategy: PromptStrategy,
        feature_set: &FeatureSet,
        generator_model: &str,
    ) -> Result<Demonstration, PromptError> {
        let label = pair
            .label
            .ok_or_else(|| PromptError::UnlabeledPair(pair.pair_id.clone()))?;
        let target_score = self.policy.target_for(label);
        let prompt =
            self.render_demo_generation_prompt(pair, target_score, strategy, feature_set)?;
        let request = ChatRequest::user(generator_model, &prompt);
        let response = gateway.cached_complete(&request)?;
        if response.text.trim().is_empty() {
            return Err(PromptError::EmptyResponse(pair.pair_id.clone()));
        }
        Ok(Demonstration {
            pair: pair.clone(),
            target_score,
            reasoning_text: response.text,
            generator_model: generator_model.into(),
        })
    }
}

fn check_pair_texts(pair: &TextPair) -> Result<(), PromptError> {
    if pair.text_a.trim().is_empty() || pair.text_b.trim().is_empty() {
        return Err(PromptError::EmptyText(pair.pair_id.clone()));
    }
    Ok(())
}

/// Numbered instruction list, one line per feature, in set order.
fn render_feature_list(feature_set: &FeatureSet) -> String {
    feature_set
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{}. {}: {}", i + 1, f.display_name, f.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Worked examples: each shows the pair, the generated reasoning, and the
/// score it arrives at. The trailing blank line separates it from whatever
/// follows (the next exemplar or the query pair).
fn render_demonstrations(demonstrations: &[Demonstration]) -> String {
    let mut out = String::new();
    for demo in demonstrations {
        out.push_str(&format!(
            "Text 1: {}\n\nText 2: {}\n\n{}\nConfidence score: {}\n\n",
            demo.pair.text_a,
            demo.pair.text_b,
            demo.reasoning_text.trim(),
            format_score(demo.target_score),
        ));
    }
    out
}

/// The sentence appended to a zero-shot prompt to elicit reasoning that
/// arrives at a given confidence score.
pub fn demo_generation_directive(target_score: f64) -> String {
    format!(
        "It is given that after following the instruction, the confidence score obtained is {}. \
         Show the step-by-step execution of the instruction so that this score is achieved.",
        format_score(target_score)
    )
}

fn format_score(score: f64) -> String {
    format!("{score}")
}

/// Demonstration store entry: the flattened, self-contained form persisted to
/// disk so few-shot runs never need the generator again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredDemonstration {
    pub pair_id: String,
    pub text_a: String,
    pub text_b: String,
    pub label: Label,
    pub target_score: f64,
    pub reasoning_text: String,
    pub generator_model: String,
    pub template_version: String,
}

impl StoredDemonstration {
    pub fn from_demonstration(demo: &Demonstration, template_version: &str) -> Option<Self> {
        Some(Self {
            pair_id: demo.pair.pair_id.clone(),
            text_a: demo.pair.text_a.clone(),
            text_b: demo.pair.text_b.clone(),
            label: demo.pair.label?,
            target_score: demo.target_score,
            reasoning_text: demo.reasoning_text.clone(),
            generator_model: demo.generator_model.clone(),
            template_version: template_version.into(),
        })
    }

    pub fn to_demonstration(&self) -> Demonstration {
        Demonstration {
            pair: TextPair {
                pair_id: self.pair_id.clone(),
                text_a: self.text_a.clone(),
                text_b: self.text_b.clone(),
                label: Some(self.label),
                source_doc_ids: None,
            },
            target_score: self.target_score,
            reasoning_text: self.reasoning_text.clone(),
            generator_model: self.generator_model.clone(),
        }
    }
}

/// Write a demonstration store: a JSON array of [`StoredDemonstration`]s.
pub fn save_demonstrations(
    path: &Path,
    demonstrations: &[StoredDemonstration],
) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(demonstrations)?;
    std::fs::write(path, body + "\n")
}

/// Read a demonstration store written by [`save_demonstrations`].
pub fn load_demonstrations(path: &Path) -> std::io::Result<Vec<StoredDemonstration>> {
    let body = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&body)?)
}
