//! Extraction of confidence scores and explanations from free-form model
//! responses.
//!
//! Responses end with an overall verdict, so the overall score is the *last*
//! number that qualifies as a confidence value. A number qualifies when a cue
//! word (`confidence`, `score`, `likelihood`) appears near it; bare integers
//! `0` and `1` are held to a much tighter adjacency rule so that incidental
//! text like "Text 1" or "on the scale of 0 to 1" is never mistaken for a
//! verdict.

use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::Label;

/// A decimal candidate qualifies if a cue word sits within this many bytes on
/// either side of it.
const DECIMAL_CUE_WINDOW: usize = 40;

/// A bare `0` or `1` qualifies only if a cue word ends at most this many
/// bytes before it ("score: 1", "likelihood of 0").
const INTEGER_CUE_GAP: usize = 6;

static NUMBER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<num>\d+\.\d+|\.\d+|\d+)(?P<pct>\s?%)?").expect("valid regex")
});
static CUE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:confidence|score|likelihood)\b").expect("valid regex")
});
static HEADING_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*\d+\.\s+").expect("valid regex"));
static FEATURE_CONF_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bconfidence\s*:\s*(?P<num>\d+\.\d+|\.\d+|\d+)").expect("valid regex")
});

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResponseParseError {
    #[error("no confidence score found in response")]
    MissingScore,
}

/// Knobs for score extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Accept percentage forms ("70%" → 0.70) near a cue word. Defensive
    /// handling of models that drift away from the 0–1 scale.
    pub accept_percentages: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            accept_percentages: true,
        }
    }
}

/// Everything recovered from one model response.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    /// The overall confidence that both texts share an author, in [0,1].
    pub overall_score: f64,
    /// Per-feature scores in document order (PromptAV responses only).
    pub feature_scores: Vec<(String, f64)>,
    /// The explanation as presented to a reader.
    pub explanation_text: String,
    /// The untouched response body.
    pub raw_response: String,
}

/// Parse a full response into a [`VerificationOutcome`].
pub fn parse_response(
    text: &str,
    options: &ExtractOptions,
) -> Result<VerificationOutcome, ResponseParseError> {
    let overall_score = extract_overall_score_with(text, options)?;
    Ok(VerificationOutcome {
        overall_score,
        feature_scores: extract_feature_scores(text),
        explanation_text: text.trim().to_string(),
        raw_response: text.to_string(),
    })
}

/// Extract the overall confidence score with default options.
pub fn extract_overall_score(text: &str) -> Result<f64, ResponseParseError> {
    extract_overall_score_with(text, &ExtractOptions::default())
}

/// Extract the overall confidence score: the last number in [0,1] that
/// qualifies under the cue-word rules described at module level.
pub fn extract_overall_score_with(
    text: &str,
    options: &ExtractOptions,
) -> Result<f64, ResponseParseError> {
    let cues: Vec<(usize, usize)> = CUE_RE
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect();

    let mut best: Option<f64> = None;
    for caps in NUMBER_RE.captures_iter(text) {
        let num = caps.name("num").expect("num group always present");
        let (start, end) = (num.start(), num.end());
        let lexeme = num.as_str();

        // Skip fragments of larger tokens: "-0.5", the ".3" tail of "1.2.3".
        let preceded_by = text[..start].chars().next_back();
        if matches!(preceded_by, Some('-')) {
            continue;
        }
        if lexeme.starts_with('.') && matches!(preceded_by, Some(c) if c.is_ascii_digit()) {
            continue;
        }

        let value: f64 = match lexeme.parse() {
            Ok(v) => v,
            Err(_) => continue,
        };

        let is_percent = caps.name("pct").is_some();
        let accepted = if is_percent {
            options.accept_percentages
                && (0.0..=100.0).contains(&value)
                && cue_in_window(&cues, start, end)
        } else if lexeme.contains('.') {
            (0.0..=1.0).contains(&value) && cue_in_window(&cues, start, end)
        } else {
            (value == 0.0 || value == 1.0) && cue_immediately_before(&cues, start)
        };
        if accepted {
            best = Some(if is_percent { value / 100.0 } else { value });
        }
    }
    best.ok_or(ResponseParseError::MissingScore)
}

fn cue_in_window(cues: &[(usize, usize)], start: usize, end: usize) -> bool {
    cues.iter().any(|&(cs, ce)| {
        ce <= start && start - ce <= DECIMAL_CUE_WINDOW
            || cs >= end && cs - end <= DECIMAL_CUE_WINDOW
    })
}

fn cue_immediately_before(cues: &[(usize, usize)], start: usize) -> bool {
    cues.iter()
        .any(|&(_, ce)| ce <= start && start - ce <= INTEGER_CUE_GAP)
}

/// Extract per-feature scores from numbered analysis items of the form
/// `<n>. <label>: … Confidence: <x>`, in document order. Responses without
/// the pattern yield an empty list.
pub fn extract_feature_scores(text: &str) -> Vec<(String, f64)> {
    let headings: Vec<(usize, usize)> = HEADING_RE
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect();

    let mut scores = Vec::new();
    for (i, &(_, body_start)) in headings.iter().enumerate() {
        let chunk_end = headings
            .get(i + 1)
            .map(|&(next_start, _)| next_start)
            .unwrap_or(text.len());
        let chunk = &text[body_start..chunk_end];

        let Some(colon) = chunk.find(':') else {
            continue;
        };
        let label = chunk[..colon].trim();
        if label.is_empty() || label.contains('\n') {
            continue;
        }
        let Some(caps) = FEATURE_CONF_RE.captures(chunk) else {
            continue;
        };
        let Ok(score) = caps["num"].parse::<f64>() else {
            continue;
        };
        if !(0.0..=1.0).contains(&score) {
            continue;
        }
        scores.push((label.to_string(), score));
    }
    scores
}

/// Decision rule shared by every threshold: same author iff the score clears
/// the threshold.
pub fn decide(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Same
    } else {
        Label::Different
    }
}
