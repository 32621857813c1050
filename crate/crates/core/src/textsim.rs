//! Token/n-gram machinery and the string-similarity measures used by the
//! feature extractors.
//!
//! All similarity outputs lie in `[0, 1]`. Empty-input conventions are chosen
//! to avoid division by zero: a similarity involving an empty side is `0`.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextSimError {
    #[error("n-gram order must be in [1, 4], got {0}")]
    InvalidOrder(usize),
    #[error("n-gram order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("channel unavailable: {0:?}")]
    ChannelUnavailable(Channel),
}

/// Which parallel annotation layer an n-gram bag is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Token,
    Lemma,
    Pos,
}

/// A tokenized text with optional lemma and POS annotation layers.
///
/// When present, `lemmas` and `pos_tags` are parallel to `tokens`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub lemmas: Option<Vec<String>>,
    pub pos_tags: Option<Vec<String>>,
}

impl TokenSequence {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        TokenSequence {
            tokens,
            lemmas: None,
            pos_tags: None,
        }
    }

    /// Attach annotation layers; each must match the token count.
    pub fn with_annotations(
        mut self,
        lemmas: Option<Vec<String>>,
        pos_tags: Option<Vec<String>>,
    ) -> Self {
        if let Some(l) = &lemmas {
            assert_eq!(l.len(), self.tokens.len(), "lemma layer length mismatch");
        }
        if let Some(p) = &pos_tags {
            assert_eq!(p.len(), self.tokens.len(), "pos layer length mismatch");
        }
        self.lemmas = lemmas;
        self.pos_tags = pos_tags;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn channel(&self, channel: Channel) -> Result<&[String], TextSimError> {
        match channel {
            Channel::Token => Ok(&self.tokens),
            Channel::Lemma => self
                .lemmas
                .as_deref()
                .ok_or(TextSimError::ChannelUnavailable(Channel::Lemma)),
            Channel::Pos => self
                .pos_tags
                .as_deref()
                .ok_or(TextSimError::ChannelUnavailable(Channel::Pos)),
        }
    }

    pub fn has_channel(&self, channel: Channel) -> bool {
        match channel {
            Channel::Token => true,
            Channel::Lemma => self.lemmas.is_some(),
            Channel::Pos => self.pos_tags.is_some(),
        }
    }
}

/// A multiset of n-grams of a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramBag {
    order: usize,
    counts: HashMap<Vec<String>, u32>,
}

impl NgramBag {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, gram: &[String]) -> u32 {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            https?://\S+                                  # URLs kept whole
            | [\w.+-]+@[\w-]+(?:\.[\w-]+)+                # emails kept whole
            | \w+                                         # word characters
            | \S                                          # any other symbol
            ",
        )
        .expect("token regex")
    })
}

const URL_TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', ')', ']', '}'];

/// Lowercased, Unicode-aware word tokenization. Punctuation becomes separate
/// single-character tokens; URLs and emails are preserved as single tokens.
pub fn tokenize(text: &str) -> TokenSequence {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for m in token_regex().find_iter(&lowered) {
        let s = m.as_str();
        if s.starts_with("http://") || s.starts_with("https://") {
            // Sentence punctuation glued onto the end of a URL is not part
            // of it; split it back out into its own tokens.
            let trimmed = s.trim_end_matches(URL_TRAILING);
            if trimmed.is_empty() {
                tokens.push(s.to_string());
                continue;
            }
            tokens.push(trimmed.to_string());
            for c in s[trimmed.len()..].chars() {
                tokens.push(c.to_string());
            }
        } else {
            tokens.push(s.to_string());
        }
    }
    TokenSequence::from_tokens(tokens)
}

/// Bag of all contiguous n-grams of `order` drawn from the given channel.
/// Shorter-than-order sequences yield an empty bag.
pub fn ngrams(
    seq: &TokenSequence,
    order: usize,
    channel: Channel,
) -> Result<NgramBag, TextSimError> {
    if !(1..=4).contains(&order) {
        return Err(TextSimError::InvalidOrder(order));
    }
    let items = seq.channel(channel)?;
    let mut counts: HashMap<Vec<String>, u32> = HashMap::new();
    if items.len() >= order {
        for window in items.windows(order) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    Ok(NgramBag { order, counts })
}

fn check_orders(a: &NgramBag, b: &NgramBag) -> Result<(), TextSimError> {
    if a.order != b.order {
        return Err(TextSimError::OrderMismatch(a.order, b.order));
    }
    Ok(())
}

/// Jaccard coefficient over distinct n-grams; 0 when both bags are empty.
pub fn jaccard(a: &NgramBag, b: &NgramBag) -> Result<f64, TextSimError> {
    check_orders(a, b)?;
    let inter = a.counts.keys().filter(|k| b.counts.contains_key(*k)).count();
    let union = a.counts.len() + b.counts.len() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Containment of `a` in `b` over distinct n-grams; 0 when `a` is empty.
/// Not symmetric.
pub fn containment(a: &NgramBag, b: &NgramBag) -> Result<f64, TextSimError> {
    check_orders(a, b)?;
    if a.counts.is_empty() {
        return Ok(0.0);
    }
    let inter = a.counts.keys().filter(|k| b.counts.contains_key(*k)).count();
    Ok(inter as f64 / a.counts.len() as f64)
}

/// Cosine similarity over n-gram count vectors; 0 when either bag is empty.
pub fn cosine(a: &NgramBag, b: &NgramBag) -> Result<f64, TextSimError> {
    check_orders(a, b)?;
    if a.counts.is_empty() || b.counts.is_empty() {
        return Ok(0.0);
    }
    let mut dot = 0.0;
    for (gram, &ca) in &a.counts {
        if let Some(&cb) = b.counts.get(gram) {
            dot += ca as f64 * cb as f64;
        }
    }
    let norm = |bag: &NgramBag| {
        bag.counts
            .values()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    };
    Ok(dot / (norm(a) * norm(b)))
}

/// Length of the longest contiguous common character substring, divided by
/// the length of the longer string; 0 if either is empty.
pub fn longest_common_substring_sim(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    let mut best = 0u32;
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                0
            };
            best = best.max(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best as f64 / a.len().max(b.len()) as f64
}

/// Greedy string tiling over surface tokens: repeatedly take the longest
/// unmarked common token run of length >= `min_match` (ties broken by
/// leftmost position in `a`, then in `b`), mark it as a tile, and stop when
/// no qualifying run remains. Returns total tile length divided by
/// `max(len(a), len(b))`.
pub fn greedy_string_tiling_sim(a: &TokenSequence, b: &TokenSequence, min_match: usize) -> f64 {
    assert!(min_match >= 1, "min_match must be >= 1");
    let a = &a.tokens;
    let b = &b.tokens;
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut marked_a = vec![false; a.len()];
    let mut marked_b = vec![false; b.len()];
    let mut tiled = 0usize;
    loop {
        let mut best_len = 0usize;
        let mut best = None;
        for i in 0..a.len() {
            if marked_a[i] {
                continue;
            }
            for j in 0..b.len() {
                if marked_b[j] || a[i] != b[j] {
                    continue;
                }
                let mut k = 0;
                while i + k < a.len()
                    && j + k < b.len()
                    && !marked_a[i + k]
                    && !marked_b[j + k]
                    && a[i + k] == b[j + k]
                {
                    k += 1;
                }
                // Strictly longer wins; scan order handles the positional
                // tie-breaks (smallest i, then smallest j).
                if k > best_len {
                    best_len = k;
                    best = Some((i, j));
                }
            }
        }
        if best_len < min_match {
            break;
        }
        let (i, j) = best.expect("best match recorded");
        for k in 0..best_len {
            marked_a[i + k] = true;
            marked_b[j + k] = true;
        }
        tiled += best_len;
    }
    tiled as f64 / a.len().max(b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::from_tokens(tokens.iter().map(|s| s.to_string()).collect())
    }

    fn bag(tokens: &[&str], order: usize) -> NgramBag {
        ngrams(&seq(tokens), order, Channel::Token).unwrap()
    }

    #[test]
    fn tokenize_lowercases_words() {
        assert_eq!(
            tokenize("Can I obtain Driving License").tokens,
            vec!["can", "i", "obtain", "driving", "license"]
        );
    }

    #[test]
    fn tokenize_splits_punctuation_and_keeps_urls() {
        assert_eq!(
            tokenize("yes! see http://a.b/c").tokens,
            vec!["yes", "!", "see", "http://a.b/c"]
        );
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").tokens.is_empty());
    }

    #[test]
    fn tokenize_keeps_emails_whole() {
        assert_eq!(
            tokenize("mail me at Some.One+x@example.co.uk now").tokens,
            vec!["mail", "me", "at", "some.one+x@example.co.uk", "now"]
        );
    }

    #[test]
    fn tokenize_detaches_sentence_punctuation_from_url() {
        assert_eq!(
            tokenize("go to https://x.y/z.").tokens,
            vec!["go", "to", "https://x.y/z", "."]
        );
    }

    #[test]
    fn ngrams_bigrams() {
        let b = bag(&["a", "b", "c"], 2);
        assert_eq!(b.count(&["a".into(), "b".into()]), 1);
        assert_eq!(b.count(&["b".into(), "c".into()]), 1);
        assert_eq!(b.distinct(), 2);
    }

    #[test]
    fn ngrams_counts_repeats() {
        let b = bag(&["a", "a", "a"], 1);
        assert_eq!(b.count(&["a".into()]), 3);
        assert_eq!(b.distinct(), 1);
    }

    #[test]
    fn ngrams_short_sequence_is_empty() {
        assert!(bag(&["a"], 2).is_empty());
    }

    #[test]
    fn ngrams_rejects_bad_order() {
        assert_eq!(
            ngrams(&seq(&["a"]), 5, Channel::Token),
            Err(TextSimError::InvalidOrder(5))
        );
        assert_eq!(
            ngrams(&seq(&["a"]), 0, Channel::Token),
            Err(TextSimError::InvalidOrder(0))
        );
    }

    #[test]
    fn ngrams_missing_channel_errors() {
        assert_eq!(
            ngrams(&seq(&["a"]), 1, Channel::Lemma),
            Err(TextSimError::ChannelUnavailable(Channel::Lemma))
        );
    }

    #[test]
    fn jaccard_basics() {
        let ab = bag(&["a", "b"], 1);
        let bc = bag(&["b", "c"], 1);
        assert_eq!(jaccard(&ab, &ab).unwrap(), 1.0);
        assert_eq!(jaccard(&ab, &bag(&["x", "y"], 1)).unwrap(), 0.0);
        // union {a,b,c}, intersection {b}
        assert!((jaccard(&ab, &bc).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&bag(&[], 1), &bag(&[], 1)).unwrap(), 0.0);
    }

    #[test]
    fn containment_basics() {
        let a = bag(&["a", "b"], 1);
        let b = bag(&["a", "b", "c"], 1);
        assert_eq!(containment(&a, &b).unwrap(), 1.0);
        assert_eq!(containment(&a, &bag(&["x"], 1)).unwrap(), 0.0);
        let abc = bag(&["a", "b", "c"], 1);
        let just_a = bag(&["a"], 1);
        assert!((containment(&abc, &just_a).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(containment(&bag(&[], 1), &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_basics() {
        let ab = bag(&["a", "b"], 1);
        assert!((cosine(&ab, &ab).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&ab, &bag(&["x"], 1)).unwrap(), 0.0);
        // {a:1,b:1} vs {a:1}: 1 / (sqrt(2) * 1)
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine(&ab, &bag(&["a"], 1)).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let uni = bag(&["a"], 1);
        let bi = bag(&["a", "b"], 2);
        assert_eq!(jaccard(&uni, &bi), Err(TextSimError::OrderMismatch(1, 2)));
        assert_eq!(
            containment(&uni, &bi),
            Err(TextSimError::OrderMismatch(1, 2))
        );
        assert_eq!(cosine(&uni, &bi), Err(TextSimError::OrderMismatch(1, 2)));
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(longest_common_substring_sim("same", "same"), 1.0);
        assert_eq!(longest_common_substring_sim("abcde", "xxcdex"), 0.5);
        assert_eq!(longest_common_substring_sim("", "a"), 0.0);
    }

    #[test]
    fn gst_examples() {
        let a = seq(&["x", "a", "b", "c", "y"]);
        let b = seq(&["a", "b", "c", "z", "x"]);
        assert!((greedy_string_tiling_sim(&a, &b, 3) - 0.6).abs() < 1e-12);
        let same = seq(&["p", "q", "r"]);
        assert_eq!(greedy_string_tiling_sim(&same, &same, 3), 1.0);
        assert_eq!(greedy_string_tiling_sim(&a, &seq(&["q"]), 1), 0.0);
    }

    /// Most literal transcription of the tiling rule: enumerate every common
    /// run each round, order candidates by (length desc, position in a,
    /// position in b), take the first, mark, repeat.
    fn gst_oracle(a: &[String], b: &[String], min_match: usize) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let mut marked_a = vec![false; a.len()];
        let mut marked_b = vec![false; b.len()];
        let mut tiled = 0usize;
        loop {
            let mut candidates = Vec::new();
            for i in 0..a.len() {
                for j in 0..b.len() {
                    let mut k = 0;
                    while i + k < a.len()
                        && j + k < b.len()
                        && !marked_a[i + k]
                        && !marked_b[j + k]
                        && a[i + k] == b[j + k]
                    {
                        k += 1;
                    }
                    if k >= min_match {
                        candidates.push((k, i, j));
                    }
                }
            }
            candidates.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
            match candidates.first() {
                None => break,
                Some(&(k, i, j)) => {
                    for d in 0..k {
                        marked_a[i + d] = true;
                        marked_b[j + d] = true;
                    }
                    tiled += k;
                }
            }
        }
        tiled as f64 / a.len().max(b.len()) as f64
    }

    /// Naive quadratic-over-windows oracle for the longest common substring.
    fn lcs_oracle(a: &str, b: &str) -> f64 {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        if ac.is_empty() || bc.is_empty() {
            return 0.0;
        }
        let mut best = 0;
        for len in 1..=ac.len() {
            for win in ac.windows(len) {
                if bc.windows(len).any(|w| w == win) {
                    best = best.max(len);
                }
            }
        }
        best as f64 / ac.len().max(bc.len()) as f64
    }

    fn small_alphabet_string() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof![Just('a'), Just('b'), Just('c')], 0..50)
            .prop_map(|cs| cs.into_iter().collect())
    }

    fn small_token_vec() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")]
                .prop_map(|s: &str| s.to_string()),
            0..20,
        )
    }

    proptest! {
        #[test]
        fn lcs_matches_oracle(a in small_alphabet_string(), b in small_alphabet_string()) {
            prop_assert_eq!(longest_common_substring_sim(&a, &b), lcs_oracle(&a, &b));
        }

        #[test]
        fn gst_matches_oracle(a in small_token_vec(), b in small_token_vec(),
                              min_match in 1usize..4) {
            let sa = TokenSequence::from_tokens(a.clone());
            let sb = TokenSequence::from_tokens(b.clone());
            let got = greedy_string_tiling_sim(&sa, &sb, min_match);
            prop_assert_eq!(got, gst_oracle(&a, &b, min_match));
        }

        #[test]
        fn similarity_symmetry_and_range(a in small_token_vec(), b in small_token_vec()) {
            let (sa, sb) = (TokenSequence::from_tokens(a.clone()), TokenSequence::from_tokens(b.clone()));
            let (ba, bb) = (
                ngrams(&sa, 1, Channel::Token).unwrap(),
                ngrams(&sb, 1, Channel::Token).unwrap(),
            );
            let j = jaccard(&ba, &bb).unwrap();
            let c = cosine(&ba, &bb).unwrap();
            let g = greedy_string_tiling_sim(&sa, &sb, 1);
            prop_assert_eq!(j, jaccard(&bb, &ba).unwrap());
            prop_assert!((c - cosine(&bb, &ba).unwrap()).abs() < 1e-12);
            prop_assert_eq!(g, greedy_string_tiling_sim(&sb, &sa, 1));
            for v in [j, c, g, containment(&ba, &bb).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if !a.is_empty() {
                prop_assert_eq!(jaccard(&ba, &ba).unwrap(), 1.0);
                prop_assert_eq!(containment(&ba, &ba).unwrap(), 1.0);
                prop_assert!((cosine(&ba, &ba).unwrap() - 1.0).abs() < 1e-12);
                prop_assert_eq!(greedy_string_tiling_sim(&sa, &sa, 1), 1.0);
            }
        }
    }
}
