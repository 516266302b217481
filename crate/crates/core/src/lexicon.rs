//! Edit distance and nearest-word refinement against a task dictionary.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Unit-cost edit distance over arbitrary sequences, O(min(|a|, |b|)) memory.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Levenshtein distance between two byte strings.
pub fn levenshtein(a: &str, b: &str) -> usize {
    edit_distance(a.as_bytes(), b.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("empty input")]
    EmptyInput,
    #[error("input {0:?} contains characters outside A-Z")]
    InvalidCharset(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dictionary is empty")]
    EmptyDictionary,
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_uppercase())
}

/// Ordered task vocabulary; order breaks ties during refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    name: String,
    words: Vec<String>,
}

impl Dictionary {
    pub fn new(name: impl Into<String>, words: Vec<String>) -> Result<Self, LexiconError> {
        if words.is_empty() {
            return Err(LexiconError::EmptyDictionary);
        }
        for (i, w) in words.iter().enumerate() {
            if !is_word(w) {
                return Err(LexiconError::Parse { line: i + 1, message: format!("invalid word {w:?}") });
            }
            if words[..i].contains(w) {
                return Err(LexiconError::Parse { line: i + 1, message: format!("duplicate word {w}") });
            }
        }
        Ok(Dictionary { name: name.into(), words })
    }

    /// One uppercase word per line; blank lines and `#` comments ignored.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, LexiconError> {
        let mut words: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if !is_word(content) {
                return Err(LexiconError::Parse { line, message: format!("invalid word {content:?}; expected A-Z only") });
            }
            if words.iter().any(|w| w == content) {
                return Err(LexiconError::Parse { line, message: format!("duplicate word {content}") });
            }
            words.push(content.to_string());
        }
        if words.is_empty() {
            return Err(LexiconError::EmptyDictionary);
        }
        Ok(Dictionary { name: name.into(), words })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.name);
        for w in &self.words {
            s.push_str(w);
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} words)", self.name, self.words.len())
    }
}

/// Maximum edit distance at which a refinement is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffPolicy {
    /// ceil(|s| / 2)
    #[default]
    HalfLength,
    Fixed { max: usize },
    /// Always map to the nearest word.
    Unbounded,
}

impl CutoffPolicy {
    pub fn cutoff(&self, s: &str) -> usize {
        match *self {
            CutoffPolicy::HalfLength => s.len().div_ceil(2),
            CutoffPolicy::Fixed { max } => max,
            CutoffPolicy::Unbounded => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedWord {
    pub raw: String,
    pub word: String,
    pub distance: usize,
    pub accepted: bool,
    pub candidates: Vec<String>,
}

/// Nearest dictionary word to `s`; ties go to the shorter word, then to load order.
pub fn refine(s: &str, dict: &Dictionary, policy: CutoffPolicy) -> Result<RefinedWord, LexiconError> {
    if s.is_empty() {
        return Err(LexiconError::EmptyInput);
    }
    if !is_word(s) {
        return Err(LexiconError::InvalidCharset(s.to_string()));
    }
    let distances: Vec<usize> = dict.words.iter().map(|w| levenshtein(s, w)).collect();
    let min = *distances.iter().min().ok_or(LexiconError::EmptyDictionary)?;
    let candidates: Vec<String> =
        dict.words.iter().zip(&distances).filter(|(_, &d)| d == min).map(|(w, _)| w.clone()).collect();
    // min_by_key keeps the first of equal keys, i.e. load order.
    let best = candidates.iter().min_by_key(|w| w.len()).expect("at least one candidate");
    let accepted = min <= policy.cutoff(s);
    Ok(RefinedWord {
        raw: s.to_string(),
        word: if accepted { best.clone() } else { s.to_string() },
        distance: min,
        accepted,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dict(words: &[&str]) -> Dictionary {
        Dictionary::new("test", words.iter().map(|w| w.to_string()).collect()).unwrap()
    }

    /// Exponential recursion straight from the definition.
    fn naive(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = naive(ra, rb) + usize::from(x != y);
                sub.min(naive(ra, b) + 1).min(naive(a, rb) + 1)
            }
        }
    }

    #[test]
    fn basic_distances() {
        assert_eq!(levenshtein("", "GRAB"), 4);
        assert_eq!(levenshtein("GRAB", ""), 4);
        assert_eq!(levenshtein("GRAB", "GRAB"), 0);
        assert_eq!(levenshtein("GRAP", "GRAB"), 1);
        assert_eq!(naive(b"GRAP", b"GRAB"), 1);
        assert_eq!(levenshtein("KITTEN", "SITTING"), 3);
    }

    #[test]
    fn matches_naive_on_short_strings() {
        let words: Vec<Vec<u8>> = (0..=4)
            .flat_map(|len| {
                (0..3usize.pow(len as u32)).map(move |mut n| {
                    (0..len)
                        .map(|_| {
                            let c = b'A' + (n % 3) as u8;
                            n /= 3;
                            c
                        })
                        .collect()
                })
            })
            .collect();
        for a in &words {
            for b in &words {
                assert_eq!(edit_distance(a, b), naive(a, b));
            }
        }
    }

    #[test]
    fn refine_examples() {
        let d = dict(&["GRAB", "DROP", "MOVE"]);
        let r = refine("GRAP", &d, CutoffPolicy::HalfLength).unwrap();
        assert_eq!((r.word.as_str(), r.distance, r.accepted), ("GRAB", 1, true));
        assert_eq!(r.candidates, vec!["GRAB".to_string()]);
        assert_eq!(levenshtein("GRAP", "DROP"), 2);
        assert_eq!(naive(b"GRAP", b"DROP"), 2);
        assert_eq!(levenshtein("GRAP", "MOVE"), 4);

        let exact = refine("GRAB", &d, CutoffPolicy::HalfLength).unwrap();
        assert_eq!((exact.word.as_str(), exact.distance), ("GRAB", 0));

        let d = dict(&["GRAB", "DROP"]);
        let r = refine("XQZW", &d, CutoffPolicy::HalfLength).unwrap();
        assert_eq!(r.distance, 4);
        assert!(!r.accepted);
        assert_eq!(r.word, "XQZW");
        let r = refine("XQZW", &d, CutoffPolicy::Unbounded).unwrap();
        assert!(r.accepted);
        assert_eq!(r.word, "GRAB");
    }

    #[test]
    fn tie_break_prefers_shorter_then_order() {
        // "CAT" is 1 away from both; the shorter wins regardless of order.
        let r = refine("CAT", &dict(&["CATS", "CAB"]), CutoffPolicy::HalfLength).unwrap();
        assert_eq!(r.word, "CAB");
        assert_eq!(r.candidates, vec!["CATS".to_string(), "CAB".to_string()]);
        let r = refine("CAT", &dict(&["CAR", "CAB"]), CutoffPolicy::HalfLength).unwrap();
        assert_eq!(r.word, "CAR");
        let r = refine("CAT", &dict(&["CAB", "CAR"]), CutoffPolicy::HalfLength).unwrap();
        assert_eq!(r.word, "CAB");
    }

    #[test]
    fn empty_and_invalid_input() {
        let d = dict(&["GRAB"]);
        assert_eq!(refine("", &d, CutoffPolicy::HalfLength), Err(LexiconError::EmptyInput));
        assert!(matches!(refine("grab", &d, CutoffPolicy::HalfLength), Err(LexiconError::InvalidCharset(_))));
    }

    #[test]
    fn parse_dictionary_file() {
        let d = Dictionary::parse("tasks", "# verbs\nGRAB\n\nDROP  # trailing\n  APPLE\n").unwrap();
        assert_eq!(d.words(), ["GRAB", "DROP", "APPLE"]);
        let err = Dictionary::parse("tasks", "GRAB\nDROP\nGRAB\n").unwrap_err();
        assert_eq!(err, LexiconError::Parse { line: 3, message: "duplicate word GRAB".into() });
        assert!(matches!(Dictionary::parse("t", "GRAB\nap-ple\n"), Err(LexiconError::Parse { line: 2, .. })));
        assert_eq!(Dictionary::parse("t", "# nothing\n"), Err(LexiconError::EmptyDictionary));
        assert_eq!(Dictionary::parse("tasks", &d.to_text()).unwrap(), d);
    }

    #[test]
    fn cutoff_is_half_length_rounded_up() {
        assert_eq!(CutoffPolicy::HalfLength.cutoff("A"), 1);
        assert_eq!(CutoffPolicy::HalfLength.cutoff("ABCD"), 2);
        assert_eq!(CutoffPolicy::HalfLength.cutoff("ABCDE"), 3);
    }

    fn word() -> impl Strategy<Value = String> {
        "[A-E]{0,7}"
    }

    proptest! {
        #[test]
        fn metric_axioms(a in word(), b in word(), c in word()) {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn dictionary_words_refine_to_themselves(words in proptest::collection::hash_set("[A-F]{1,6}", 1..20)) {
            let words: Vec<String> = words.into_iter().collect();
            let d = Dictionary::new("p", words.clone()).unwrap();
            for w in &words {
                let r = refine(w, &d, CutoffPolicy::HalfLength).unwrap();
                prop_assert_eq!(&r.word, w);
                prop_assert_eq!(r.distance, 0);
            }
        }

        #[test]
        fn unique_minimizer_ignores_order(
            words in proptest::collection::hash_set("[A-D]{1,5}", 2..12),
            s in "[A-D]{1,5}",
            rot in 0usize..12,
        ) {
            let words: Vec<String> = words.into_iter().collect();
            let d = Dictionary::new("p", words.clone()).unwrap();
            let r = refine(&s, &d, CutoffPolicy::Unbounded).unwrap();
            let mut rotated = words.clone();
            rotated.rotate_left(rot % words.len());
            rotated.reverse();
            let r2 = refine(&s, &Dictionary::new("q", rotated).unwrap(), CutoffPolicy::Unbounded).unwrap();
            if r.candidates.len() == 1 {
                prop_assert_eq!(r.word, r2.word);
            }
        }
    }
}
