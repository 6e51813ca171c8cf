//! Data model and file ingestion for parallel corpora, n-best lists, and
//! named-entity test sets.
//!
//! All loaders are strict: UTF-8 is mandatory (invalid byte sequences are a
//! hard error, never lossy-decoded), formats are line-oriented, and every
//! format violation is reported with its line number. Loaded structures are
//! immutable and safe to share across threads.
//!
//! File formats:
//! - parallel corpus: `source\ttarget`, one pair per line, LF-terminated
//! - n-best list: `index ||| text ||| score`, zero-based contiguous indices
//! - NE test set: `source\treference\tentity`

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which training subset a sentence pair belongs to: originally parallel
/// (`auth`), backtranslated monolingual (`bt`), or forward-translated
/// monolingual (`ft`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetTag {
    Auth,
    Bt,
    Ft,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 3] = [DatasetTag::Auth, DatasetTag::Bt, DatasetTag::Ft];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Auth => "auth",
            DatasetTag::Bt => "bt",
            DatasetTag::Ft => "ft",
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auth" => Ok(DatasetTag::Auth),
            "bt" => Ok(DatasetTag::Bt),
            "ft" => Ok(DatasetTag::Ft),
            other => Err(Error::input(format!(
                "unknown dataset tag '{other}' (expected auth, bt or ft)"
            ))),
        }
    }
}

/// Identifier of a saved checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CheckpointId(String);

impl CheckpointId {
    pub fn new(id: impl Into<String>) -> Self {
        CheckpointId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CheckpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CheckpointId {
    fn from(s: &str) -> Self {
        CheckpointId(s.to_string())
    }
}

/// One source/target pair carrying its dataset tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    pub dataset: DatasetTag,
}

impl SentencePair {
    /// Both sides must be non-empty after trimming.
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        dataset: DatasetTag,
    ) -> Result<Self> {
        let source = source.into();
        let target = target.into();
        if source.trim().is_empty() {
            return Err(Error::input("source is empty"));
        }
        if target.trim().is_empty() {
            return Err(Error::input("target is empty"));
        }
        Ok(SentencePair {
            source,
            target,
            dataset,
        })
    }
}

/// An ordered collection of sentence pairs sharing one dataset tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub id: String,
    pub dataset: DatasetTag,
    pairs: Vec<SentencePair>,
}

impl Corpus {
    pub fn new(
        id: impl Into<String>,
        dataset: DatasetTag,
        pairs: Vec<SentencePair>,
    ) -> Result<Self> {
        if let Some(pos) = pairs.iter().position(|p| p.dataset != dataset) {
            return Err(Error::input(format!(
                "pair {pos} is tagged {} but the corpus is {dataset}",
                pairs[pos].dataset
            )));
        }
        Ok(Corpus {
            id: id.into(),
            dataset,
            pairs,
        })
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }
}

/// One candidate translation of one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub sentence_index: usize,
    pub text: String,
    pub model_score: f64,
    pub origin: Option<CheckpointId>,
}

/// Per-sentence candidate lists, grouped by sentence index.
///
/// Within one sentence the hypotheses are in non-increasing `model_score`
/// order, and sentence indices are contiguous from zero; both are enforced
/// when loading, which protects downstream pooling from silent sentence
/// misalignment.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    groups: Vec<Vec<Hypothesis>>,
    n: usize,
    origin: Option<CheckpointId>,
}

impl NBestList {
    /// Builds a list from per-sentence groups, validating the invariants.
    pub fn from_groups(groups: Vec<Vec<Hypothesis>>, origin: Option<CheckpointId>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::input("n-best list has no sentences"));
        }
        for (idx, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::input(format!("sentence {idx} has no hypotheses")));
            }
            for hyp in group {
                if hyp.sentence_index != idx {
                    return Err(Error::input(format!(
                        "hypothesis with sentence_index {} found in group {idx}",
                        hyp.sentence_index
                    )));
                }
            }
            for pair in group.windows(2) {
                if pair[1].model_score > pair[0].model_score {
                    return Err(Error::input(format!(
                        "sentence {idx}: model_score out of order ({} after {})",
                        pair[1].model_score, pair[0].model_score
                    )));
                }
            }
        }
        let n = groups.iter().map(Vec::len).max().unwrap_or(0);
        Ok(NBestList { groups, n, origin })
    }

    pub fn num_sentences(&self) -> usize {
        self.groups.len()
    }

    /// Maximum number of hypotheses any sentence has.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sentence(&self, index: usize) -> &[Hypothesis] {
        &self.groups[index]
    }

    pub fn groups(&self) -> &[Vec<Hypothesis>] {
        &self.groups
    }

    pub fn origin(&self) -> Option<&CheckpointId> {
        self.origin.as_ref()
    }

    /// Re-tags every hypothesis (and the list itself) with the given origin.
    pub fn with_origin(mut self, origin: CheckpointId) -> Self {
        for group in &mut self.groups {
            for hyp in group {
                hyp.origin = Some(origin.clone());
            }
        }
        self.origin = Some(origin);
        self
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &Hypothesis> {
        self.groups.iter().flatten()
    }
}

/// One named-entity test case: the entity surface form expected to appear in
/// the translation.
#[derive(Debug, Clone, PartialEq)]
pub struct NeTestCase {
    pub source: String,
    pub reference: String,
    pub entity: String,
}

impl NeTestCase {
    pub fn new(
        source: impl Into<String>,
        reference: impl Into<String>,
        entity: impl Into<String>,
    ) -> Result<Self> {
        let source = source.into();
        let reference = reference.into();
        let entity = entity.into();
        if source.trim().is_empty() {
            return Err(Error::input("source is empty"));
        }
        if reference.trim().is_empty() {
            return Err(Error::input("reference is empty"));
        }
        if entity.is_empty() {
            return Err(Error::input("entity is empty"));
        }
        if !reference.contains(&entity) {
            return Err(Error::input(format!(
                "entity '{entity}' is not a substring of the reference"
            )));
        }
        Ok(NeTestCase {
            source,
            reference,
            entity,
        })
    }
}

/// Reads a file as strict UTF-8. Invalid byte sequences are an error that
/// names the line where decoding failed.
pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match String::from_utf8(bytes) {
        Ok(text) => Ok(text),
        Err(e) => {
            let valid = e.utf8_error().valid_up_to();
            let line = e.as_bytes()[..valid]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Err(Error::parse(path, line, "invalid UTF-8"))
        }
    }
}

/// Splits file content into lines without consuming `\r`; a single trailing
/// newline is allowed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let text = text.strip_suffix('\n').unwrap_or(text);
    text.split('\n').enumerate().map(|(i, l)| (i + 1, l))
}

/// Loads a tab-separated parallel corpus (`source\ttarget` per line).
pub fn load_parallel(path: &Path, tag: DatasetTag) -> Result<Corpus> {
    let text = read_utf8(path)?;
    if text.is_empty() {
        return Err(Error::data(path, "empty file"));
    }
    let mut pairs = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 fields, got {}", fields.len()),
            ));
        }
        let pair = SentencePair::new(fields[0], fields[1], tag)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        pairs.push(pair);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    Corpus::new(id, tag, pairs)
}

/// Writes a corpus in the `source\ttarget` format read by [`load_parallel`].
pub fn save_parallel(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    for pair in corpus.pairs() {
        out.push_str(&pair.source);
        out.push('\t');
        out.push_str(&pair.target);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a Moses-style n-best list (`index ||| text ||| score` per line).
///
/// Sentence indices must be non-decreasing and contiguous from 0; per-index
/// order is preserved from the file.
pub fn load_nbest(path: &Path) -> Result<NBestList> {
    let text = read_utf8(path)?;
    if text.is_empty() {
        return Err(Error::data(path, "empty file"));
    }
    let mut groups: Vec<Vec<Hypothesis>> = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split(" ||| ").collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 ' ||| '-separated fields, got {}", fields.len()),
            ));
        }
        let index: usize = fields[0].trim().parse().map_err(|_| {
            Error::parse(
                path,
                line_no,
                format!("invalid sentence index '{}'", fields[0]),
            )
        })?;
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid score '{}'", fields[2])))?;
        if !score.is_finite() {
            return Err(Error::parse(
                path,
                line_no,
                format!("non-finite score '{}'", fields[2]),
            ));
        }
        if index == groups.len() {
            groups.push(Vec::new());
        } else if index + 1 != groups.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "sentence index gap: expected {} or {}, got {index}",
                    groups.len().saturating_sub(1),
                    groups.len()
                ),
            ));
        }
        let group = groups.last_mut().expect("group exists");
        if let Some(prev) = group.last() {
            if score > prev.model_score {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "model_score out of order ({score} after {})",
                        prev.model_score
                    ),
                ));
            }
        }
        group.push(Hypothesis {
            sentence_index: index,
            text: fields[1].to_string(),
            model_score: score,
            origin: None,
        });
    }
    let origin = path
        .file_stem()
        .map(|s| CheckpointId::new(s.to_string_lossy().into_owned()));
    let list = NBestList::from_groups(groups, origin.clone())?;
    Ok(match origin {
        Some(id) => list.with_origin(id),
        None => list,
    })
}

/// Writes an n-best list in the format read by [`load_nbest`].
pub fn save_nbest(list: &NBestList, path: &Path) -> Result<()> {
    let mut out = String::new();
    for hyp in list.iter_all() {
        out.push_str(&format!(
            "{} ||| {} ||| {}\n",
            hyp.sentence_index, hyp.text, hyp.model_score
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a named-entity test set (`source\treference\tentity` per line). The
/// entity-in-reference invariant is checked on load. Every line is evaluated
/// independently; sentences sharing an entity are not deduplicated.
pub fn load_ne_testset(path: &Path) -> Result<Vec<NeTestCase>> {
    let text = read_utf8(path)?;
    if text.is_empty() {
        return Err(Error::data(path, "empty file"));
    }
    let mut cases = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let case = NeTestCase::new(fields[0], fields[1], fields[2])
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        cases.push(case);
    }
    Ok(cases)
}
