//! Corpus ingestion and deterministic pair sampling.
//!
//! A corpus is an ordered list of author-labeled documents. From it we draw
//! labeled text pairs: `Same` pairs join two distinct documents by one author,
//! `Different` pairs join documents by two authors. Sampling is uniform over
//! the valid candidate pairs and fully determined by `(corpus, spec)`, so a
//! fixed seed reproduces the same pair file byte for byte.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Threshold below which candidate pairs are enumerated outright instead of
/// rejection-sampled. Enumeration keeps tiny corpora exact and fast even when
/// the request covers most of the candidate space.
const ENUMERATION_LIMIT: u128 = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus cannot supply the requested pairs: {0}")]
    InsufficientCorpus(String),
    #[error("not enough pairs: requested {requested}, only {available} available")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("pair at line {line} is missing a label")]
    UnlabeledPair { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Same-author / different-author ground truth for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Same,
    Different,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Same => f.write_str("same"),
            Label::Different => f.write_str("different"),
        }
    }
}

/// One author-labeled document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorDocument {
    pub doc_id: String,
    pub author_id: String,
    pub text: String,
}

/// Two texts to verify, with ground truth when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub pair_id: String,
    pub text_a: String,
    pub text_b: String,
    pub label: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_doc_ids: Option<(String, String)>,
}

impl TextPair {
    pub fn label(&self) -> Option<Label> {
        self.label
    }
}

/// How many pairs of each class to draw, and with what seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSampleSpec {
    pub n_positive: usize,
    pub n_negative: usize,
    pub seed: u64,
    /// Documents shorter than this many characters (after trimming) are
    /// excluded from sampling.
    #[serde(default = "default_min_doc_chars")]
    pub min_doc_chars: usize,
}

fn default_min_doc_chars() -> usize {
    64
}

impl PairSampleSpec {
    pub fn new(n_positive: usize, n_negative: usize, seed: u64) -> Self {
        Self {
            n_positive,
            n_negative,
            seed,
            min_doc_chars: default_min_doc_chars(),
        }
    }

    pub fn with_min_doc_chars(mut self, min_doc_chars: usize) -> Self {
        self.min_doc_chars = min_doc_chars;
        self
    }
}

/// Corpus file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess the format from a file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    doc_id: String,
    author_id: String,
    text: String,
}

/// Load an author-labeled corpus from a CSV (header `doc_id,author_id,text`)
/// or JSONL file with the same keys. Documents come back in file order;
/// duplicate `doc_id`s and empty texts are rejected with the offending line.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<AuthorDocument>, CorpusError> {
    let docs = match format {
        CorpusFormat::Csv => load_csv(path)?,
        CorpusFormat::Jsonl => load_jsonl(path)?,
    };
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(docs)
}

fn validate_document(doc: RawDocument, line: usize, seen: &mut HashSet<String>) -> Result<AuthorDocument, CorpusError> {
    if doc.text.trim().is_empty() {
        return Err(CorpusError::MalformedRecord {
            line,
            reason: "empty text field".into(),
        });
    }
    if doc.author_id.trim().is_empty() {
        return Err(CorpusError::MalformedRecord {
            line,
            reason: "empty author_id field".into(),
        });
    }
    if doc.doc_id.is_empty() {
        return Err(CorpusError::MalformedRecord {
            line,
            reason: "empty doc_id field".into(),
        });
    }
    if !seen.insert(doc.doc_id.clone()) {
        return Err(CorpusError::MalformedRecord {
            line,
            reason: format!("duplicate doc_id {:?}", doc.doc_id),
        });
    }
    Ok(AuthorDocument {
        doc_id: doc.doc_id,
        author_id: doc.author_id,
        text: doc.text,
    })
}

fn load_csv(path: &Path) -> Result<Vec<AuthorDocument>, CorpusError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::Io(io),
        other => CorpusError::MalformedRecord {
            line: 1,
            reason: format!("{other:?}"),
        },
    })?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in reader.deserialize::<RawDocument>().enumerate() {
        // line 1 is the header, data starts at line 2
        let line = idx + 2;
        let raw = record.map_err(|e| CorpusError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        docs.push(validate_document(raw, line, &mut seen)?);
    }
    Ok(docs)
}

fn load_jsonl(path: &Path) -> Result<Vec<AuthorDocument>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        docs.push(validate_document(raw, line_no, &mut seen)?);
    }
    Ok(docs)
}

/// Documents eligible for sampling, grouped by author. Groups follow first
/// appearance order in the corpus and docs keep file order within a group,
/// so the candidate enumeration is stable.
struct EligibleCorpus<'a> {
    docs: Vec<&'a AuthorDocument>,
    /// (start, end) index ranges into a by-author reordering of `docs`.
    author_ranges: Vec<Vec<usize>>,
}

impl<'a> EligibleCorpus<'a> {
    fn build(corpus: &'a [AuthorDocument], min_doc_chars: usize) -> Self {
        let docs: Vec<&AuthorDocument> = corpus
            .iter()
            .filter(|d| d.text.trim().chars().count() >= min_doc_chars)
            .collect();
        let mut author_order: Vec<&str> = Vec::new();
        let mut groups: std::collections::HashMap<&str, Vec<usize>> =
            std::collections::HashMap::new();
        for (i, doc) in docs.iter().enumerate() {
            let entry = groups.entry(doc.author_id.as_str()).or_insert_with(|| {
                author_order.push(doc.author_id.as_str());
                Vec::new()
            });
            entry.push(i);
        }
        let author_ranges = author_order
            .iter()
            .map(|a| groups.remove(a).unwrap())
            .collect();
        Self { docs, author_ranges }
    }

    fn total_positive_pairs(&self) -> u128 {
        self.author_ranges
            .iter()
            .map(|g| {
                let n = g.len() as u128;
                n * (n - 1) / 2
            })
            .sum()
    }

    fn total_negative_pairs(&self) -> u128 {
        let n = self.docs.len() as u128;
        n * (n - 1) / 2 - self.total_positive_pairs()
    }
}

/// Draw `spec.n_positive` Same pairs and `spec.n_negative` Different pairs
/// uniformly without replacement from the corpus. Output is a pure function
/// of `(corpus, spec)`.
pub fn sample_pairs(
    corpus: &[AuthorDocument],
    spec: &PairSampleSpec,
) -> Result<Vec<TextPair>, CorpusError> {
    let eligible = EligibleCorpus::build(corpus, spec.min_doc_chars);

    let total_pos = eligible.total_positive_pairs();
    let total_neg = eligible.total_negative_pairs();
    if (spec.n_positive as u128) > total_pos {
        return Err(CorpusError::InsufficientCorpus(format!(
            "{} same-author pairs requested but only {} exist",
            spec.n_positive, total_pos
        )));
    }
    if (spec.n_negative as u128) > total_neg {
        return Err(CorpusError::InsufficientCorpus(format!(
            "{} different-author pairs requested but only {} exist",
            spec.n_negative, total_neg
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positives = draw_positive(&eligible, spec.n_positive, total_pos, &mut rng);
    let negatives = draw_negative(&eligible, spec.n_negative, total_neg, &mut rng);

    let mut pairs = Vec::with_capacity(spec.n_positive + spec.n_negative);
    for (idx, (i, j, label)) in positives
        .into_iter()
        .map(|(i, j)| (i, j, Label::Same))
        .chain(negatives.into_iter().map(|(i, j)| (i, j, Label::Different)))
        .enumerate()
    {
        let a = eligible.docs[i];
        let b = eligible.docs[j];
        pairs.push(TextPair {
            pair_id: format!("pair-{:05}", idx + 1),
            text_a: a.text.clone(),
            text_b: b.text.clone(),
            label: Some(label),
            source_doc_ids: Some((a.doc_id.clone(), b.doc_id.clone())),
        });
    }
    Ok(pairs)
}

/// Uniform same-author pairs. Small candidate spaces are enumerated and
/// index-sampled; large ones draw an author weighted by its pair count,
/// then a document pair within that author, retrying on duplicates.
fn draw_positive(
    eligible: &EligibleCorpus<'_>,
    n: usize,
    total: u128,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    if n == 0 {
        return Vec::new();
    }
    if total <= ENUMERATION_LIMIT {
        let mut candidates = Vec::with_capacity(total as usize);
        for group in &eligible.author_ranges {
            for (gi, &i) in group.iter().enumerate() {
                for &j in &group[gi + 1..] {
                    candidates.push((i, j));
                }
            }
        }
        return pick_enumerated(candidates, n, rng);
    }

    // cumulative pair counts per author for weighted selection
    let weights: Vec<u128> = eligible
        .author_ranges
        .iter()
        .map(|g| {
            let k = g.len() as u128;
            k * (k - 1) / 2
        })
        .collect();
    let mut chosen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut target = rng.gen_range(0..total);
        let mut author = 0usize;
        for (ai, w) in weights.iter().enumerate() {
            if target < *w {
                author = ai;
                break;
            }
            target -= w;
        }
        let group = &eligible.author_ranges[author];
        let picked = index_sample(rng, group.len(), 2);
        let (mut i, mut j) = (group[picked.index(0)], group[picked.index(1)]);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        if chosen.insert((i, j)) {
            out.push((i, j));
        }
    }
    out
}

/// Uniform different-author pairs: uniform document pairs filtered to
/// cross-author, with enumeration for small spaces.
fn draw_negative(
    eligible: &EligibleCorpus<'_>,
    n: usize,
    total: u128,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    if n == 0 {
        return Vec::new();
    }
    let n_docs = eligible.docs.len();
    if total <= ENUMERATION_LIMIT {
        let mut candidates = Vec::with_capacity(total as usize);
        for i in 0..n_docs {
            for j in i + 1..n_docs {
                if eligible.docs[i].author_id != eligible.docs[j].author_id {
                    candidates.push((i, j));
                }
            }
        }
        return pick_enumerated(candidates, n, rng);
    }

    let mut chosen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let picked = index_sample(rng, n_docs, 2);
        let (mut i, mut j) = (picked.index(0), picked.index(1));
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        if eligible.docs[i].author_id == eligible.docs[j].author_id {
            continue;
        }
        if chosen.insert((i, j)) {
            out.push((i, j));
        }
    }
    out
}

fn pick_enumerated(
    candidates: Vec<(usize, usize)>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    index_sample(rng, candidates.len(), n)
        .into_iter()
        .map(|k| candidates[k])
        .collect()
}

/// Pick the `k` demonstration pairs for few-shot prompting.
///
/// The selection is a seed-determined permutation prefix, so the 2-shot
/// exemplars are always the first two of the 4-shot exemplars for the same
/// seed, and the persisted order is the prompting order.
pub fn select_demonstration_pairs(
    pairs: &[TextPair],
    k: usize,
    seed: u64,
) -> Result<Vec<TextPair>, CorpusError> {
    if k > pairs.len() {
        return Err(CorpusError::NotEnoughPairs {
            requested: k,
            available: pairs.len(),
        });
    }
    if let Some(unlabeled) = pairs.iter().position(|p| p.label.is_none()) {
        return Err(CorpusError::UnlabeledPair { line: unlabeled + 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    // Fisher-Yates; taking the first k of the full permutation gives the
    // prefix property for every k' < k.
    for i in 0..order.len() {
        let j = rng.gen_range(i..order.len());
        order.swap(i, j);
    }
    Ok(order[..k].iter().map(|&i| pairs[i].clone()).collect())
}

#[derive(Serialize, Deserialize)]
struct PairRecord<'a> {
    pair_id: &'a str,
    text_a: &'a str,
    text_b: &'a str,
    label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_doc_ids: Option<(&'a str, &'a str)>,
}

/// Write pairs as JSONL, one `{"pair_id","text_a","text_b","label"}` object
/// per line (plus `source_doc_ids` when known). Unlabeled pairs are rejected.
pub fn write_pairs(path: &Path, pairs: &[TextPair]) -> Result<(), CorpusError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (idx, pair) in pairs.iter().enumerate() {
        let label = pair.label.ok_or(CorpusError::UnlabeledPair { line: idx + 1 })?;
        let record = PairRecord {
            pair_id: &pair.pair_id,
            text_a: &pair.text_a,
            text_b: &pair.text_b,
            label,
            source_doc_ids: pair
                .source_doc_ids
                .as_ref()
                .map(|(a, b)| (a.as_str(), b.as_str())),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a JSONL pair file written by [`write_pairs`] (or produced upstream,
/// e.g. an obfuscated variant of an existing pair file).
pub fn read_pairs(path: &Path) -> Result<Vec<TextPair>, CorpusError> {
    #[derive(Deserialize)]
    struct OwnedPairRecord {
        pair_id: String,
        text_a: String,
        text_b: String,
        label: Label,
        #[serde(default)]
        source_doc_ids: Option<(String, String)>,
    }

    let file = std::fs::File::open(path)?;
    let mut pairs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OwnedPairRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        pairs.push(TextPair {
            pair_id: record.pair_id,
            text_a: record.text_a,
            text_b: record.text_b,
            label: Some(record.label),
            source_doc_ids: record.source_doc_ids,
        });
    }
    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(pairs)
}
