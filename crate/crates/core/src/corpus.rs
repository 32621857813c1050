//! Parse, validate, and normalize CQA thread datasets.
//!
//! Two ingestion formats are supported: the SemEval CQA-QL XML distribution
//! and a canonical JSONL interchange format (one thread per line, UTF-8).
//! Raw source labels are kept alongside the mapped Good/Bad gold labels so a
//! serialized dataset can be re-parsed without information loss.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("missing attribute {attribute} on <{element}> at byte {offset}")]
    MissingAttribute {
        element: &'static str,
        attribute: &'static str,
        offset: u64,
    },
    #[error("malformed JSON at line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("missing field {field} at line {line}")]
    MissingField { field: String, line: usize },
    #[error("unmapped raw label {label:?} on comment {comment_id}")]
    UnmappedLabel { label: String, comment_id: String },
    #[error("duplicate question id {0}")]
    DuplicateQuestionId(String),
    #[error("duplicate comment id {comment_id} in question {question_id}")]
    DuplicateCommentId {
        question_id: String,
        comment_id: String,
    },
    #[error("thread {question_id} has no comments")]
    EmptyThread { question_id: String },
    #[error("empty id in {context}")]
    EmptyId { context: String },
    #[error("bad label mapping at line {line}: {message}")]
    MappingSyntax { line: usize, message: String },
    #[error("comment {comment_id} in question {question_id} has no gold label")]
    UnlabeledComment {
        question_id: String,
        comment_id: String,
    },
}

/// Gold label of a comment after mapping. `Unknown` appears only in
/// prediction-mode inputs that carry no source label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Good,
    Bad,
    Unknown,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Good => "Good",
            Label::Bad => "Bad",
            Label::Unknown => "Unknown",
        })
    }
}

/// What a raw source label maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappedLabel {
    Good,
    Bad,
    /// Remove the comment from the thread entirely.
    Drop,
}

/// Total mapping from raw source labels to Good/Bad/Drop. Every raw label
/// encountered during parsing must have an entry; unmapped labels are a hard
/// error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    map: BTreeMap<String, MappedLabel>,
}

impl LabelMapping {
    pub fn empty() -> Self {
        LabelMapping {
            map: BTreeMap::new(),
        }
    }

    /// Good stays Good; Bad, Potential, Dialogue, "Not English", and Other
    /// all merge into Bad.
    pub fn default_mapping() -> Self {
        let mut m = LabelMapping::empty();
        m.insert("Good", MappedLabel::Good);
        for raw in ["Bad", "Potential", "Dialogue", "Not English", "Other"] {
            m.insert(raw, MappedLabel::Bad);
        }
        m
    }

    pub fn insert(&mut self, raw: &str, mapped: MappedLabel) {
        self.map.insert(raw.to_string(), mapped);
    }

    pub fn lookup(&self, raw: &str) -> Option<MappedLabel> {
        self.map.get(raw).copied()
    }

    /// Parse a `raw=Good|Bad|Drop` config file; `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self, CorpusError> {
        let mut mapping = LabelMapping::empty();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (raw, target) = line.split_once('=').ok_or(CorpusError::MappingSyntax {
                line: idx + 1,
                message: "expected raw_label=Good|Bad|Drop".to_string(),
            })?;
            let mapped = match target.trim().to_ascii_lowercase().as_str() {
                "good" => MappedLabel::Good,
                "bad" => MappedLabel::Bad,
                "drop" => MappedLabel::Drop,
                other => {
                    return Err(CorpusError::MappingSyntax {
                        line: idx + 1,
                        message: format!("unknown target {other:?}"),
                    })
                }
            };
            mapping.insert(raw.trim(), mapped);
        }
        Ok(mapping)
    }
}

impl Default for LabelMapping {
    fn default() -> Self {
        Self::default_mapping()
    }
}

/// One comment in a thread, with both the mapped gold label and the raw
/// source label it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub comment_id: String,
    pub author_id: String,
    pub timestamp: Option<String>,
    pub subject: String,
    pub body: String,
    pub gold_label: Label,
    pub raw_label: String,
}

/// A question plus its ordered list of comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub question_id: String,
    pub category: String,
    pub asker_id: String,
    pub subject: String,
    pub body: String,
    pub comments: Vec<Comment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub split: Split,
    pub threads: Vec<Thread>,
}

impl Dataset {
    pub fn comment_count(&self) -> usize {
        self.threads.iter().map(|t| t.comments.len()).sum()
    }

    /// Training and evaluation inputs must not contain Unknown labels.
    pub fn require_labeled(&self) -> Result<(), CorpusError> {
        for thread in &self.threads {
            for comment in &thread.comments {
                if comment.gold_label == Label::Unknown {
                    return Err(CorpusError::UnlabeledComment {
                        question_id: thread.question_id.clone(),
                        comment_id: comment.comment_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub question_count: usize,
    pub comment_count: usize,
    pub good: usize,
    pub bad: usize,
    pub unknown: usize,
}

/// Count questions, comments, and per-label totals.
pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let mut stats = DatasetStats {
        question_count: ds.threads.len(),
        comment_count: 0,
        good: 0,
        bad: 0,
        unknown: 0,
    };
    for thread in &ds.threads {
        for comment in &thread.comments {
            stats.comment_count += 1;
            match comment.gold_label {
                Label::Good => stats.good += 1,
                Label::Bad => stats.bad += 1,
                Label::Unknown => stats.unknown += 1,
            }
        }
    }
    stats
}

fn map_raw_label(
    raw: &str,
    comment_id: &str,
    mapping: &LabelMapping,
) -> Result<Option<Label>, CorpusError> {
    match mapping.lookup(raw) {
        Some(MappedLabel::Good) => Ok(Some(Label::Good)),
        Some(MappedLabel::Bad) => Ok(Some(Label::Bad)),
        Some(MappedLabel::Drop) => Ok(None),
        None => Err(CorpusError::UnmappedLabel {
            label: raw.to_string(),
            comment_id: comment_id.to_string(),
        }),
    }
}

// ---------------------------------------------------------------------------
// SemEval CQA-QL XML
// ---------------------------------------------------------------------------

#[derive(Default)]
struct PendingComment {
    comment_id: String,
    author_id: String,
    timestamp: Option<String>,
    raw_label: Option<String>,
    subject: String,
    body: String,
}

#[derive(Default)]
struct PendingQuestion {
    question_id: String,
    category: String,
    asker_id: String,
    subject: String,
    body: String,
    comments: Vec<Comment>,
    comment_ids: HashSet<String>,
}

/// Which element's character data we are currently collecting.
#[derive(Clone, Copy, PartialEq, Eq)]
enum TextTarget {
    None,
    QSubject,
    QBody,
    CSubject,
    CBody,
}

/// Parse a SemEval CQA-QL XML file. The parser targets the published
/// element/attribute names (`Question`/`QID`/`QCATEGORY`/`QUSERID`,
/// `Comment`/`CID`/`CUSERID`/`CGOLD`, `QSubject`/`QBody`/`CSubject`/`CBody`)
/// and ignores unknown elements and attributes. Comments whose raw label maps
/// to `Drop` are removed from the thread.
pub fn parse_semeval_xml(bytes: &[u8], mapping: &LabelMapping) -> Result<Dataset, CorpusError> {
    let mut reader = Reader::from_reader(bytes);
    let xml_err = |reader: &Reader<&[u8]>, message: String| CorpusError::Xml {
        offset: reader.buffer_position(),
        message,
    };

    let mut threads: Vec<Thread> = Vec::new();
    let mut seen_questions: HashSet<String> = HashSet::new();
    let mut question: Option<PendingQuestion> = None;
    let mut comment: Option<PendingComment> = None;
    let mut targets: Vec<TextTarget> = Vec::new();

    loop {
        let event = match reader.read_event() {
            Ok(ev) => ev,
            Err(e) => return Err(xml_err(&reader, e.to_string())),
        };
        match event {
            Event::Start(e) => {
                let pos = reader.buffer_position();
                let target =
                    handle_open(&e, pos, &mut question, &mut comment, &mut seen_questions)?;
                targets.push(target);
            }
            Event::Empty(e) => {
                let pos = reader.buffer_position();
                handle_open(&e, pos, &mut question, &mut comment, &mut seen_questions)?;
                handle_close(
                    e.name().as_ref(),
                    pos,
                    &mut threads,
                    &mut question,
                    &mut comment,
                    mapping,
                )?;
            }
            Event::End(e) => {
                targets.pop();
                handle_close(
                    e.name().as_ref(),
                    reader.buffer_position(),
                    &mut threads,
                    &mut question,
                    &mut comment,
                    mapping,
                )?;
            }
            Event::Text(t) => {
                let text = t
                    .decode()
                    .map_err(|e| xml_err(&reader, e.to_string()))?
                    .into_owned();
                append_text(&targets, &mut question, &mut comment, &text);
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => c,
                    Ok(None) => {
                        let name = r.decode().map_err(|e| xml_err(&reader, e.to_string()))?;
                        match name.as_ref() {
                            "amp" => '&',
                            "lt" => '<',
                            "gt" => '>',
                            "apos" => '\'',
                            "quot" => '"',
                            other => {
                                return Err(xml_err(
                                    &reader,
                                    format!("unknown entity reference &{other};"),
                                ))
                            }
                        }
                    }
                    Err(e) => return Err(xml_err(&reader, e.to_string())),
                };
                append_text(
                    &targets,
                    &mut question,
                    &mut comment,
                    &resolved.to_string(),
                );
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t).into_owned();
                append_text(&targets, &mut question, &mut comment, &text);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(Dataset {
        split: Split::Unlabeled,
        threads,
    })
}

fn handle_open(
    e: &quick_xml::events::BytesStart<'_>,
    pos: u64,
    question: &mut Option<PendingQuestion>,
    comment: &mut Option<PendingComment>,
    seen_questions: &mut HashSet<String>,
) -> Result<TextTarget, CorpusError> {
    let attr = |key: &[u8]| -> Result<Option<String>, CorpusError> {
        for a in e.attributes().with_checks(false) {
            let a = a.map_err(|err| CorpusError::Xml {
                offset: pos,
                message: err.to_string(),
            })?;
            if a.key.as_ref() == key {
                let v = a
                    .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                    .map_err(|err| CorpusError::Xml {
                        offset: pos,
                        message: err.to_string(),
                    })?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    };
    let target = match e.name().as_ref() {
        b"Question" => {
            let question_id = attr(b"QID")?.ok_or(CorpusError::MissingAttribute {
                element: "Question",
                attribute: "QID",
                offset: pos,
            })?;
            if question_id.is_empty() {
                return Err(CorpusError::EmptyId {
                    context: "Question QID".to_string(),
                });
            }
            if !seen_questions.insert(question_id.clone()) {
                return Err(CorpusError::DuplicateQuestionId(question_id));
            }
            *question = Some(PendingQuestion {
                question_id,
                category: attr(b"QCATEGORY")?.unwrap_or_default(),
                asker_id: attr(b"QUSERID")?.unwrap_or_default(),
                ..PendingQuestion::default()
            });
            TextTarget::None
        }
        b"Comment" => {
            let q = question.as_mut().ok_or_else(|| CorpusError::Xml {
                offset: pos,
                message: "<Comment> outside <Question>".to_string(),
            })?;
            let comment_id = attr(b"CID")?.ok_or(CorpusError::MissingAttribute {
                element: "Comment",
                attribute: "CID",
                offset: pos,
            })?;
            if comment_id.is_empty() {
                return Err(CorpusError::EmptyId {
                    context: format!("Comment CID in question {}", q.question_id),
                });
            }
            *comment = Some(PendingComment {
                comment_id,
                author_id: attr(b"CUSERID")?.unwrap_or_default(),
                timestamp: attr(b"CDATE")?,
                raw_label: attr(b"CGOLD")?,
                ..PendingComment::default()
            });
            TextTarget::None
        }
        b"QSubject" => TextTarget::QSubject,
        b"QBody" => TextTarget::QBody,
        b"CSubject" => TextTarget::CSubject,
        b"CBody" => TextTarget::CBody,
        _ => TextTarget::None,
    };
    Ok(target)
}

fn handle_close(
    name: &[u8],
    pos: u64,
    threads: &mut Vec<Thread>,
    question: &mut Option<PendingQuestion>,
    comment: &mut Option<PendingComment>,
    mapping: &LabelMapping,
) -> Result<(), CorpusError> {
    match name {
        b"Question" => {
            let q = question.take().ok_or_else(|| CorpusError::Xml {
                offset: pos,
                message: "unbalanced </Question>".to_string(),
            })?;
            if q.comments.is_empty() {
                return Err(CorpusError::EmptyThread {
                    question_id: q.question_id,
                });
            }
            threads.push(Thread {
                question_id: q.question_id,
                category: q.category,
                asker_id: q.asker_id,
                subject: q.subject.trim().to_string(),
                body: q.body.trim().to_string(),
                comments: q.comments,
            });
        }
        b"Comment" => {
            let c = comment.take().ok_or_else(|| CorpusError::Xml {
                offset: pos,
                message: "unbalanced </Comment>".to_string(),
            })?;
            let q = question.as_mut().expect("comment inside question");
            let (gold, raw) = match &c.raw_label {
                Some(raw) => match map_raw_label(raw, &c.comment_id, mapping)? {
                    Some(label) => (label, raw.clone()),
                    None => return Ok(()), // dropped by mapping
                },
                None => (Label::Unknown, String::new()),
            };
            if !q.comment_ids.insert(c.comment_id.clone()) {
                return Err(CorpusError::DuplicateCommentId {
                    question_id: q.question_id.clone(),
                    comment_id: c.comment_id,
                });
            }
            q.comments.push(Comment {
                comment_id: c.comment_id,
                author_id: c.author_id,
                timestamp: c.timestamp,
                subject: c.subject.trim().to_string(),
                body: c.body.trim().to_string(),
                gold_label: gold,
                raw_label: raw,
            });
        }
        _ => {}
    }
    Ok(())
}

fn append_text(
    targets: &[TextTarget],
    question: &mut Option<PendingQuestion>,
    comment: &mut Option<PendingComment>,
    text: &str,
) {
    let target = targets.last().copied().unwrap_or(TextTarget::None);
    match target {
        TextTarget::QSubject => {
            if let Some(q) = question {
                q.subject.push_str(text);
            }
        }
        TextTarget::QBody => {
            if let Some(q) = question {
                q.body.push_str(text);
            }
        }
        TextTarget::CSubject => {
            if let Some(c) = comment {
                c.subject.push_str(text);
            }
        }
        TextTarget::CBody => {
            if let Some(c) = comment {
                c.body.push_str(text);
            }
        }
        TextTarget::None => {}
    }
}

// ---------------------------------------------------------------------------
// Canonical JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CommentRecord {
    comment_id: String,
    author_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    timestamp: Option<String>,
    subject: String,
    body: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ThreadRecord {
    question_id: String,
    category: String,
    asker_id: String,
    subject: String,
    body: String,
    comments: Vec<CommentRecord>,
}

fn json_error(line: usize, err: serde_json::Error) -> CorpusError {
    let msg = err.to_string();
    // serde_json reports "missing field `name` at ..."; surface that as a
    // dedicated error naming the field and the JSONL line.
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return CorpusError::MissingField {
                field: field.to_string(),
                line,
            };
        }
    }
    CorpusError::Json { line, message: msg }
}

/// Parse the canonical JSONL format: one thread object per line. A comment
/// without a `label` field gets `gold_label = Unknown`; labeled comments go
/// through the mapping exactly as in [`parse_semeval_xml`].
pub fn parse_jsonl(bytes: &[u8], mapping: &LabelMapping) -> Result<Dataset, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Json {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut threads = Vec::new();
    let mut seen_questions: HashSet<String> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ThreadRecord =
            serde_json::from_str(line).map_err(|e| json_error(line_no, e))?;
        if record.question_id.is_empty() {
            return Err(CorpusError::EmptyId {
                context: format!("question_id at line {line_no}"),
            });
        }
        if !seen_questions.insert(record.question_id.clone()) {
            return Err(CorpusError::DuplicateQuestionId(record.question_id));
        }
        let mut comments = Vec::new();
        let mut comment_ids = HashSet::new();
        for c in record.comments {
            if c.comment_id.is_empty() {
                return Err(CorpusError::EmptyId {
                    context: format!("comment_id in question {}", record.question_id),
                });
            }
            let (gold, raw) = match &c.label {
                Some(raw) => match map_raw_label(raw, &c.comment_id, mapping)? {
                    Some(label) => (label, raw.clone()),
                    None => continue,
                },
                None => (Label::Unknown, String::new()),
            };
            if !comment_ids.insert(c.comment_id.clone()) {
                return Err(CorpusError::DuplicateCommentId {
                    question_id: record.question_id.clone(),
                    comment_id: c.comment_id,
                });
            }
            comments.push(Comment {
                comment_id: c.comment_id,
                author_id: c.author_id,
                timestamp: c.timestamp,
                subject: c.subject,
                body: c.body,
                gold_label: gold,
                raw_label: raw,
            });
        }
        if comments.is_empty() {
            return Err(CorpusError::EmptyThread {
                question_id: record.question_id,
            });
        }
        threads.push(Thread {
            question_id: record.question_id,
            category: record.category,
            asker_id: record.asker_id,
            subject: record.subject,
            body: record.body,
            comments,
        });
    }
    Ok(Dataset {
        split: Split::Unlabeled,
        threads,
    })
}

/// Serialize a dataset to the canonical JSONL format. Raw labels are written
/// so that re-parsing with the same mapping reproduces the dataset.
pub fn serialize_jsonl(ds: &Dataset) -> String {
    let mut out = String::new();
    for thread in &ds.threads {
        let record = ThreadRecord {
            question_id: thread.question_id.clone(),
            category: thread.category.clone(),
            asker_id: thread.asker_id.clone(),
            subject: thread.subject.clone(),
            body: thread.body.clone(),
            comments: thread
                .comments
                .iter()
                .map(|c| CommentRecord {
                    comment_id: c.comment_id.clone(),
                    author_id: c.author_id.clone(),
                    timestamp: c.timestamp.clone(),
                    subject: c.subject.clone(),
                    body: c.body.clone(),
                    label: if c.raw_label.is_empty() {
                        None
                    } else {
                        Some(c.raw_label.clone())
                    },
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("thread record serializes"));
        out.push('\n');
    }
    out
}

/// Remove matches of the given patterns from every comment body. Used for
/// stripping user signatures; the default pattern list is empty.
pub fn strip_signatures(ds: &mut Dataset, patterns: &[Regex]) {
    if patterns.is_empty() {
        return;
    }
    for thread in &mut ds.threads {
        for comment in &mut thread.comments {
            for pattern in patterns {
                if pattern.is_match(&comment.body) {
                    comment.body = pattern.replace_all(&comment.body, "").trim().to_string();
                }
            }
        }
    }
}
