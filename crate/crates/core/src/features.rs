//! Feature extraction for the two classifiers.
//!
//! Local features describe one comment in the context of its thread and
//! question: question-comment similarity over several n-gram channels and
//! orders, 43 boolean signals (content markers, a long-word flag, the forum
//! category one-hot, and same-user variants), comment length, asker
//! proximity, dialogue-chain position, author activity, and thread position.
//!
//! Pairwise features describe a comment pair: the element-wise absolute
//! difference of the two local vectors, comment-comment similarity, and the
//! local classifier's predictions for both sides.
//!
//! Lemma and POS channels come from optional pre-computed annotations. When
//! a side of a comparison lacks lemmas, the lemma-channel features fall back
//! to surface tokens; when POS tags are missing the POS-channel features are
//! emitted as 0.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Thread;
use crate::textsim::{
    self, cosine, greedy_string_tiling_sim, jaccard, longest_common_substring_sim, ngrams,
    Channel, NgramBag, TokenSequence,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("comment index {index} out of range for thread of {len} comments")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("pair indices must satisfy i < j, got ({i}, {j})")]
    BadPair { i: usize, j: usize },
    #[error("annotation parse error at line {line}: {message}")]
    Annotation { line: usize, message: String },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

/// Sparse feature map. Zero values are not stored; a missing name reads as
/// 0. All stored values are finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        FeatureVector::default()
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        assert!(value.is_finite(), "non-finite feature value for {name}");
        if value != 0.0 {
            self.entries.insert(name.to_string(), value);
        }
    }

    pub fn insert_bool(&mut self, name: &str, value: bool) {
        if value {
            self.entries.insert(name.to_string(), 1.0);
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.entries.get(name).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Element-wise `|a - b|` over the union of names; a name absent from one
    /// side is treated as 0.
    pub fn abs_diff(a: &FeatureVector, b: &FeatureVector) -> FeatureVector {
        let mut out = FeatureVector::new();
        for (name, va) in a.iter() {
            let d = (va - b.get(name)).abs();
            out.insert(name, d);
        }
        for (name, vb) in b.iter() {
            if a.entries.contains_key(name) {
                continue;
            }
            out.insert(name, vb.abs());
        }
        out
    }

    /// Debug export: space-separated `name:value` pairs, one instance per
    /// line.
    pub fn to_sparse_line(&self) -> String {
        self.iter()
            .map(|(name, value)| format!("{name}:{value}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Pre-computed token/lemma/POS annotations, keyed by question or comment
/// id. Supplied as a JSONL sidecar.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    map: HashMap<String, TokenSequence>,
}

#[derive(Deserialize)]
struct AnnotationRecord {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    lemmas: Option<Vec<String>>,
    #[serde(default)]
    pos: Option<Vec<String>>,
}

impl AnnotationStore {
    /// Parse the sidecar format: one `{"id", "tokens", "lemmas"?, "pos"?}`
    /// object per line.
    pub fn from_jsonl(text: &str) -> Result<Self, FeatureError> {
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: AnnotationRecord =
                serde_json::from_str(line).map_err(|e| FeatureError::Annotation {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            let n = record.tokens.len();
            for (layer, len) in [
                ("lemmas", record.lemmas.as_ref().map(Vec::len)),
                ("pos", record.pos.as_ref().map(Vec::len)),
            ] {
                if let Some(len) = len {
                    if len != n {
                        return Err(FeatureError::Annotation {
                            line: idx + 1,
                            message: format!("{layer} length {len} != tokens length {n}"),
                        });
                    }
                }
            }
            map.insert(
                record.id,
                TokenSequence::from_tokens(record.tokens)
                    .with_annotations(record.lemmas, record.pos),
            );
        }
        Ok(AnnotationStore { map })
    }

    pub fn get(&self, id: &str) -> Option<&TokenSequence> {
        self.map.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// (annotated, total) over all questions and comments in the dataset.
    pub fn coverage(&self, ds: &crate::corpus::Dataset) -> (usize, usize) {
        let mut have = 0;
        let mut total = 0;
        for thread in &ds.threads {
            total += 1;
            if self.map.contains_key(&thread.question_id) {
                have += 1;
            }
            for comment in &thread.comments {
                total += 1;
                if self.map.contains_key(&comment.comment_id) {
                    have += 1;
                }
            }
        }
        (have, total)
    }
}

/// A named list of signal words; the comment gets one boolean feature per
/// list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalList {
    pub name: String,
    pub words: Vec<String>,
}

fn signal(name: &str, words: &[&str]) -> SignalList {
    SignalList {
        name: name.to_string(),
        words: words.iter().map(|w| w.to_string()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// N-gram orders used by the similarity block, each in 1..=4.
    pub ngram_orders: Vec<usize>,
    pub gst_min_match: usize,
    /// Forum categories for the one-hot block; fixed before training and
    /// persisted with the model.
    pub category_vocabulary: Vec<String>,
    pub signal_word_lists: Vec<SignalList>,
    pub acknowledgment_words: Vec<String>,
    /// A "long word" is strictly longer than this many characters.
    pub long_word_threshold: usize,
    /// A dialogue chain breaks when more than this many consecutive thread
    /// positions pass without either participant posting.
    pub chain_gap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ngram_orders: vec![1, 2, 3, 4],
            gst_min_match: 3,
            category_vocabulary: Vec::new(),
            signal_word_lists: vec![
                signal("yes", &["yes", "yeah", "yep"]),
                signal("sure", &["sure"]),
                signal("no", &["no", "nope"]),
                signal("neither", &["neither", "nor"]),
                signal("okay", &["okay", "ok"]),
                signal("thanks", &["thank", "thanks", "thankyou"]),
                signal("please", &["please"]),
            ],
            acknowledgment_words: vec![
                "thanks".to_string(),
                "thank".to_string(),
                "thankyou".to_string(),
                "appreciated".to_string(),
            ],
            long_word_threshold: 15,
            chain_gap: 3,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|&o| !(1..=4).contains(&o))
        {
            return Err(FeatureError::InvalidConfig(
                "ngram_orders must be a non-empty subset of 1..=4".to_string(),
            ));
        }
        if self.gst_min_match == 0 {
            return Err(FeatureError::InvalidConfig(
                "gst_min_match must be >= 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Fill the category vocabulary from a dataset's distinct non-empty
    /// categories (sorted). No-op when already fixed.
    pub fn fill_category_vocabulary(&mut self, ds: &crate::corpus::Dataset) {
        if !self.category_vocabulary.is_empty() {
            return;
        }
        let mut cats: Vec<String> = ds
            .threads
            .iter()
            .map(|t| t.category.clone())
            .filter(|c| !c.is_empty())
            .collect();
        cats.sort();
        cats.dedup();
        self.category_vocabulary = cats;
    }

    /// Names of every boolean feature the local extractor can emit: the
    /// content signals, the long-word flag, the category one-hot, and the
    /// four same-user variants.
    pub fn boolean_feature_names(&self) -> Vec<String> {
        let mut names = vec!["bool/has_url".to_string(), "bool/has_email".to_string()];
        for list in &self.signal_word_lists {
            names.push(format!("bool/signal_{}", sanitize(&list.name)));
        }
        names.push("bool/has_question_mark".to_string());
        names.push("bool/has_at".to_string());
        names.push("bool/starts_with_yes".to_string());
        names.push("bool/long_word".to_string());
        for cat in &self.category_vocabulary {
            names.push(format!("cat/{}", sanitize(cat)));
        }
        names.extend(
            [
                "user/same_as_asker",
                "user/same_and_question",
                "user/same_and_ack",
                "user/same_and_first",
            ]
            .map(String::from),
        );
        names
    }

    fn yes_words(&self) -> Vec<String> {
        self.signal_word_lists
            .iter()
            .find(|l| l.name == "yes")
            .map(|l| l.words.clone())
            .unwrap_or_else(|| vec!["yes".to_string()])
    }
}

fn sanitize(part: &str) -> String {
    part.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

/// A conversation between two users: the thread positions (0-based, strictly
/// increasing) of their comments within one uninterrupted stretch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub users: (String, String),
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogueChains {
    pub chains: Vec<Chain>,
}

/// Group each author pair's comments into conversation chains. For an
/// unordered pair (u, v), their comments are scanned in thread order and
/// split whenever more than `gap` consecutive positions pass without either
/// user posting; stretches in which both users appear become chains.
pub fn build_dialogue_chains(thread: &Thread, gap: usize) -> DialogueChains {
    let authors: Vec<&str> = {
        let mut a: Vec<&str> = thread
            .comments
            .iter()
            .map(|c| c.author_id.as_str())
            .filter(|a| !a.is_empty())
            .collect();
        a.sort_unstable();
        a.dedup();
        a
    };
    let mut chains = Vec::new();
    for (ai, &u) in authors.iter().enumerate() {
        for &v in &authors[ai + 1..] {
            let positions: Vec<usize> = thread
                .comments
                .iter()
                .enumerate()
                .filter(|(_, c)| c.author_id == u || c.author_id == v)
                .map(|(p, _)| p)
                .collect();
            let mut segment: Vec<usize> = Vec::new();
            let flush = |segment: &mut Vec<usize>, chains: &mut Vec<Chain>| {
                let has_u = segment.iter().any(|&p| thread.comments[p].author_id == u);
                let has_v = segment.iter().any(|&p| thread.comments[p].author_id == v);
                if has_u && has_v {
                    chains.push(Chain {
                        users: (u.to_string(), v.to_string()),
                        positions: std::mem::take(segment),
                    });
                } else {
                    segment.clear();
                }
            };
            for &p in &positions {
                if let Some(&prev) = segment.last() {
                    if p - prev - 1 > gap {
                        flush(&mut segment, &mut chains);
                    }
                }
                segment.push(p);
            }
            flush(&mut segment, &mut chains);
        }
    }
    DialogueChains { chains }
}

/// N-gram bags and raw text for one side of a similarity comparison, bags
/// indexed parallel to `cfg.ngram_orders`.
struct SimProfile {
    text: String,
    seq: TokenSequence,
    token_bags: Vec<NgramBag>,
    lemma_bags: Option<Vec<NgramBag>>,
    pos_bags: Option<Vec<NgramBag>>,
}

impl SimProfile {
    fn build(text: String, seq: TokenSequence, cfg: &FeatureConfig) -> SimProfile {
        let bags_for = |channel: Channel| -> Vec<NgramBag> {
            cfg.ngram_orders
                .iter()
                .map(|&order| ngrams(&seq, order, channel).expect("channel checked"))
                .collect()
        };
        let token_bags = bags_for(Channel::Token);
        let lemma_bags = seq
            .has_channel(Channel::Lemma)
            .then(|| bags_for(Channel::Lemma));
        let pos_bags = seq.has_channel(Channel::Pos).then(|| bags_for(Channel::Pos));
        SimProfile {
            text,
            seq,
            token_bags,
            lemma_bags,
            pos_bags,
        }
    }
}

/// Emit the full similarity block between two profiles under `prefix`.
/// Containment is directional (a within b) for the question-comment block
/// and symmetrized by max for comment pairs, so that pairwise similarity is
/// invariant under swapping the pair.
fn similarity_features(
    prefix: &str,
    a: &SimProfile,
    b: &SimProfile,
    cfg: &FeatureConfig,
    symmetric_containment: bool,
    out: &mut FeatureVector,
) {
    for (idx, &order) in cfg.ngram_orders.iter().enumerate() {
        let channels: [(&str, Option<(&NgramBag, &NgramBag)>); 3] = [
            ("token", Some((&a.token_bags[idx], &b.token_bags[idx]))),
            (
                "lemma",
                // Fall back to surface tokens unless both sides have lemmas.
                match (&a.lemma_bags, &b.lemma_bags) {
                    (Some(la), Some(lb)) => Some((&la[idx], &lb[idx])),
                    _ => Some((&a.token_bags[idx], &b.token_bags[idx])),
                },
            ),
            (
                "pos",
                match (&a.pos_bags, &b.pos_bags) {
                    (Some(pa), Some(pb)) => Some((&pa[idx], &pb[idx])),
                    _ => None, // emitted as 0
                },
            ),
        ];
        for (channel, bags) in channels {
            let Some((ba, bb)) = bags else { continue };
            let j = jaccard(ba, bb).expect("orders match");
            let c = if symmetric_containment {
                textsim::containment(ba, bb)
                    .expect("orders match")
                    .max(textsim::containment(bb, ba).expect("orders match"))
            } else {
                textsim::containment(ba, bb).expect("orders match")
            };
            let cos = cosine(ba, bb).expect("orders match");
            out.insert(&format!("{prefix}/{channel}/{order}gram/jaccard"), j);
            out.insert(&format!("{prefix}/{channel}/{order}gram/containment"), c);
            out.insert(&format!("{prefix}/{channel}/{order}gram/cosine"), cos);
        }
    }
    out.insert(
        &format!("{prefix}/lcs_char"),
        longest_common_substring_sim(&a.text, &b.text),
    );
    out.insert(
        &format!("{prefix}/gst_token"),
        greedy_string_tiling_sim(&a.seq, &b.seq, cfg.gst_min_match),
    );
}

/// Everything about one thread the per-comment extractors need, computed
/// once.
pub struct ThreadContext<'a> {
    thread: &'a Thread,
    question: SimProfile,
    comments: Vec<SimProfile>,
    has_question_mark: Vec<bool>,
    has_ack: Vec<bool>,
    chains: DialogueChains,
    author_positions: HashMap<String, Vec<usize>>,
}

fn side_text(subject: &str, body: &str) -> String {
    if subject.is_empty() {
        body.to_string()
    } else if body.is_empty() {
        subject.to_string()
    } else {
        format!("{subject} {body}")
    }
}

impl<'a> ThreadContext<'a> {
    pub fn new(thread: &'a Thread, cfg: &FeatureConfig, annotations: &AnnotationStore) -> Self {
        let seq_for = |id: &str, text: &str| -> TokenSequence {
            annotations
                .get(id)
                .cloned()
                .unwrap_or_else(|| textsim::tokenize(text))
        };
        let question_text = side_text(&thread.subject, &thread.body);
        let question = SimProfile::build(
            question_text.clone(),
            seq_for(&thread.question_id, &question_text),
            cfg,
        );
        let mut comments = Vec::with_capacity(thread.comments.len());
        let mut has_question_mark = Vec::with_capacity(thread.comments.len());
        let mut has_ack = Vec::with_capacity(thread.comments.len());
        let mut author_positions: HashMap<String, Vec<usize>> = HashMap::new();
        for (pos, comment) in thread.comments.iter().enumerate() {
            let text = side_text(&comment.subject, &comment.body);
            let seq = seq_for(&comment.comment_id, &text);
            has_question_mark.push(text.contains('?'));
            has_ack.push(
                seq.tokens
                    .iter()
                    .any(|t| cfg.acknowledgment_words.iter().any(|w| w == t)),
            );
            author_positions
                .entry(comment.author_id.clone())
                .or_default()
                .push(pos);
            comments.push(SimProfile::build(text, seq, cfg));
        }
        ThreadContext {
            thread,
            question,
            comments,
            has_question_mark,
            has_ack,
            chains: build_dialogue_chains(thread, cfg.chain_gap),
            author_positions,
        }
    }

    pub fn chains(&self) -> &DialogueChains {
        &self.chains
    }

    fn check_index(&self, index: usize) -> Result<(), FeatureError> {
        if index >= self.comments.len() {
            return Err(FeatureError::IndexOutOfRange {
                index,
                len: self.comments.len(),
            });
        }
        Ok(())
    }

    /// Local (Good-vs-Bad) feature vector for the comment at `index`
    /// (0-based).
    pub fn local_features(
        &self,
        index: usize,
        cfg: &FeatureConfig,
    ) -> Result<FeatureVector, FeatureError> {
        self.check_index(index)?;
        let n = self.comments.len();
        let thread = self.thread;
        let comment = &thread.comments[index];
        let profile = &self.comments[index];
        let tokens = &profile.seq.tokens;
        let mut out = FeatureVector::new();

        // (a) question-comment similarity
        similarity_features("qc_sim", &self.question, profile, cfg, false, &mut out);

        // (b) boolean block
        out.insert_bool(
            "bool/has_url",
            tokens.iter().any(|t| is_url_token(t)),
        );
        out.insert_bool(
            "bool/has_email",
            tokens.iter().any(|t| is_email_token(t)),
        );
        for list in &cfg.signal_word_lists {
            out.insert_bool(
                &format!("bool/signal_{}", sanitize(&list.name)),
                tokens.iter().any(|t| list.words.iter().any(|w| w == t)),
            );
        }
        out.insert_bool("bool/has_question_mark", self.has_question_mark[index]);
        out.insert_bool("bool/has_at", profile.text.contains('@'));
        let yes_words = cfg.yes_words();
        out.insert_bool(
            "bool/starts_with_yes",
            tokens
                .first()
                .is_some_and(|t| yes_words.iter().any(|w| w == t)),
        );
        out.insert_bool(
            "bool/long_word",
            tokens
                .iter()
                .any(|t| t.chars().count() > cfg.long_word_threshold),
        );
        for cat in &cfg.category_vocabulary {
            out.insert_bool(&format!("cat/{}", sanitize(cat)), thread.category == *cat);
        }
        let same_user = !thread.asker_id.is_empty() && comment.author_id == thread.asker_id;
        let asker_positions = self
            .author_positions
            .get(&thread.asker_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        out.insert_bool("user/same_as_asker", same_user);
        out.insert_bool(
            "user/same_and_question",
            same_user && self.has_question_mark[index],
        );
        out.insert_bool("user/same_and_ack", same_user && self.has_ack[index]);
        out.insert_bool(
            "user/same_and_first",
            same_user && asker_positions.first() == Some(&index),
        );

        // (c) comment length
        out.insert("len/tokens", tokens.len() as f64);
        out.insert("len/tokens_log", (1.0 + tokens.len() as f64).ln());
        out.insert("len/chars", profile.text.chars().count() as f64);

        // (d) asker proximity
        let mut follow_ack = false;
        let mut follow_no_ack = false;
        let mut follow_question = false;
        let mut precede_question = false;
        for &p in asker_positions {
            if p > index {
                if self.has_ack[p] {
                    follow_ack = true;
                } else {
                    follow_no_ack = true;
                }
                if self.has_question_mark[p] {
                    follow_question = true;
                }
            } else if p < index && self.has_question_mark[p] {
                precede_question = true;
            }
        }
        out.insert_bool("asker/follow_ack", follow_ack);
        out.insert_bool("asker/follow_no_ack", follow_no_ack);
        out.insert_bool("asker/follow_question", follow_question);
        out.insert_bool("asker/precede_question", precede_question);

        // (e) chain position, with copies for chains the asker is part of
        let mut flags = [false; 6]; // begin/middle/end x {any, asker}
        for chain in &self.chains.chains {
            let Some(&first) = chain.positions.first() else {
                continue;
            };
            let &last = chain.positions.last().expect("non-empty chain");
            let slot = if index == first {
                0
            } else if index == last {
                2
            } else if chain.positions.contains(&index) {
                1
            } else {
                continue;
            };
            flags[slot] = true;
            if chain.users.0 == thread.asker_id || chain.users.1 == thread.asker_id {
                flags[slot + 3] = true;
            }
        }
        for (slot, name) in [
            "chain/begin",
            "chain/middle",
            "chain/end",
            "chain_asker/begin",
            "chain_asker/middle",
            "chain_asker/end",
        ]
        .iter()
        .enumerate()
        {
            out.insert_bool(name, flags[slot]);
        }

        // (f) author activity
        let author_pos = self
            .author_positions
            .get(&comment.author_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        out.insert_bool("author/multi_comment", author_pos.len() > 1);
        out.insert_bool("author/first", author_pos.first() == Some(&index));
        out.insert_bool("author/last", author_pos.last() == Some(&index));
        out.insert_bool(
            "author/middle",
            author_pos.first() != Some(&index) && author_pos.last() != Some(&index),
        );
        out.insert("author/comment_count", author_pos.len() as f64);

        // (g) thread position, raw (1-based) and normalized
        out.insert("pos/raw", (index + 1) as f64);
        out.insert("pos/norm", (index + 1) as f64 / n as f64);

        Ok(out)
    }

    /// Pairwise (Same-vs-Different) feature vector for comments `i < j`.
    /// `local_vecs` and `local_good_probs` are this thread's local feature
    /// vectors and Good probabilities.
    pub fn pairwise_features(
        &self,
        i: usize,
        j: usize,
        local_vecs: &[FeatureVector],
        local_good_probs: &[f64],
        cfg: &FeatureConfig,
    ) -> Result<FeatureVector, FeatureError> {
        if i >= j {
            return Err(FeatureError::BadPair { i, j });
        }
        self.check_index(j)?;
        assert_eq!(local_vecs.len(), self.comments.len());
        assert_eq!(local_good_probs.len(), self.comments.len());
        let mut out = FeatureVector::new();

        // (i) |v_i - v_j|
        for (name, value) in FeatureVector::abs_diff(&local_vecs[i], &local_vecs[j]).iter() {
            out.insert(&format!("absdiff/{name}"), value);
        }

        // (ii) comment-comment similarity
        similarity_features(
            "cc_sim",
            &self.comments[i],
            &self.comments[j],
            cfg,
            true,
            &mut out,
        );

        // (iii) local predictions
        let (s_i, s_j) = (local_good_probs[i], local_good_probs[j]);
        let i_good = s_i >= 0.5;
        let j_good = s_j >= 0.5;
        out.insert("pred/s_i", s_i);
        out.insert("pred/s_j", s_j);
        out.insert("pred/s_product", s_i * s_j);
        out.insert_bool("pred/i_good", i_good);
        out.insert_bool("pred/j_good", j_good);
        out.insert_bool("pred/i_bad", !i_good);
        out.insert_bool("pred/j_bad", !j_good);
        out.insert_bool("pred/identical", i_good == j_good);

        Ok(out)
    }
}

fn is_url_token(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://")
}

fn is_email_token(token: &str) -> bool {
    let Some((local, domain)) = token.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && domain.contains('.')
        && domain
            .chars()
            .all(|c| c.is_alphanumeric() || c == '.' || c == '-')
        && local
            .chars()
            .all(|c| c.is_alphanumeric() || ".+-_".contains(c))
}

/// Local features for one comment. Builds the thread context each call; use
/// [`extract_all_local_features`] when featurizing whole threads.
pub fn extract_local_features(
    thread: &Thread,
    index: usize,
    cfg: &FeatureConfig,
    annotations: &AnnotationStore,
) -> Result<FeatureVector, FeatureError> {
    ThreadContext::new(thread, cfg, annotations).local_features(index, cfg)
}

pub fn extract_all_local_features(
    thread: &Thread,
    cfg: &FeatureConfig,
    annotations: &AnnotationStore,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let ctx = ThreadContext::new(thread, cfg, annotations);
    (0..thread.comments.len())
        .map(|i| ctx.local_features(i, cfg))
        .collect()
}

/// Pairwise features for one comment pair `i < j`.
pub fn extract_pairwise_features(
    thread: &Thread,
    i: usize,
    j: usize,
    local_vecs: &[FeatureVector],
    local_good_probs: &[f64],
    cfg: &FeatureConfig,
    annotations: &AnnotationStore,
) -> Result<FeatureVector, FeatureError> {
    ThreadContext::new(thread, cfg, annotations)
        .pairwise_features(i, j, local_vecs, local_good_probs, cfg)
}

/// Pairwise features for every pair `i < j` in thread order.
pub fn extract_all_pairwise_features(
    thread: &Thread,
    local_vecs: &[FeatureVector],
    local_good_probs: &[f64],
    cfg: &FeatureConfig,
    annotations: &AnnotationStore,
) -> Result<Vec<((usize, usize), FeatureVector)>, FeatureError> {
    let ctx = ThreadContext::new(thread, cfg, annotations);
    let n = thread.comments.len();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((
                (i, j),
                ctx.pairwise_features(i, j, local_vecs, local_good_probs, cfg)?,
            ));
        }
    }
    Ok(out)
}
