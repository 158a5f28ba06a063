//! Text cleaning: PII redaction, lowercasing, tokenization, stopword removal
//! and optional light stemming.
//!
//! Redaction patterns:
//! - URLs: `http://`, `https://` or `www.` followed by non-whitespace.
//! - Names: `@handle`, `u/handle`, `/u/handle` and e-mail addresses.
//! - Phone numbers: after tokenization and stopword removal, any run of
//!   digit-only tokens whose digit groups read as a 10-digit number in the
//!   shapes `3-3-4`, `3-7`, `6-4` or `10`, with an optional leading `1`
//!   country code. Working on tokens catches every separator style
//!   (`555-123-4567`, `(555) 123 4567`, `555.123.4567`).

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Document;

/// Bundled stopword list, one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

static URL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+").unwrap());
static NAME_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:@|\b/?u/)[\w-]+").unwrap());

fn default_stopwords() -> Vec<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    /// Light suffix stripping; off by default.
    pub stem: bool,
    pub redact_urls: bool,
    pub redact_phones: bool,
    pub redact_names: bool,
    /// Compared against lowercased tokens.
    pub stopwords: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stem: false,
            redact_urls: true,
            redact_phones: true,
            redact_names: true,
            stopwords: default_stopwords(),
        }
    }
}

impl PreprocessConfig {
    pub fn with_stopwords<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        Self {
            stopwords: words.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    /// Compiles the rule set for repeated use.
    pub fn build(&self) -> Preprocessor {
        Preprocessor {
            cfg: self.clone(),
            stopwords: self.stopwords.iter().map(|w| w.to_lowercase()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Redactions {
    pub url: bool,
    pub phone: bool,
    pub name: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub id: String,
    pub tokens: Vec<String>,
    pub redactions: Redactions,
}

impl TokenizedDoc {
    pub fn from_tokens<S: Into<String>>(id: &str, tokens: impl IntoIterator<Item = S>) -> Self {
        Self {
            id: id.to_string(),
            tokens: tokens.into_iter().map(Into::into).collect(),
            redactions: Redactions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    cfg: PreprocessConfig,
    stopwords: HashSet<String>,
}

impl Preprocessor {
    pub fn config(&self) -> &PreprocessConfig {
        &self.cfg
    }

    pub fn tokenize(&self, id: &str, text: &str) -> TokenizedDoc {
        let mut redactions = Redactions::default();
        let mut text = std::borrow::Cow::Borrowed(text);
        if self.cfg.redact_urls && URL_RE.is_match(&text) {
            redactions.url = true;
            text = URL_RE.replace_all(&text, " ").into_owned().into();
        }
        if self.cfg.redact_names {
            for re in [&*EMAIL_RE, &*NAME_RE] {
                if re.is_match(&text) {
                    redactions.name = true;
                    text = re.replace_all(&text, " ").into_owned().into();
                }
            }
        }
        if self.cfg.lowercase {
            text = text.to_lowercase().into();
        }

        let mut tokens: Vec<String> = text
            .split(|c: char| !(c.is_alphanumeric() || is_apostrophe(c)))
            .map(|t| t.trim_matches(is_apostrophe))
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .filter(|t| !self.is_stopword(t))
            .map(str::to_string)
            .collect();

        if self.cfg.redact_phones && strip_phone_runs(&mut tokens) {
            redactions.phone = true;
        }
        if self.cfg.stem {
            for t in tokens.iter_mut() {
                *t = stem(t);
            }
        }
        TokenizedDoc {
            id: id.to_string(),
            tokens,
            redactions,
        }
    }

    fn is_stopword(&self, token: &str) -> bool {
        if self.cfg.lowercase {
            self.stopwords.contains(token)
        } else {
            self.stopwords.contains(&token.to_lowercase())
        }
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Cleans one document with the given rules.
pub fn preprocess(doc: &Document, rules: &PreprocessConfig) -> TokenizedDoc {
    rules.build().tokenize(&doc.id, &doc.text)
}

fn is_digits(t: &str) -> bool {
    !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
}

const PHONE_SHAPES: [&[usize]; 4] = [&[3, 3, 4], &[3, 7], &[6, 4], &[10]];

/// Length of the phone-number token run starting at `i`, if any.
fn phone_run_at(tokens: &[String], i: usize) -> Option<usize> {
    let lens: Vec<usize> = tokens[i..]
        .iter()
        .take(4)
        .take_while(|t| is_digits(t))
        .map(|t| t.len())
        .collect();
    let fits = |lens: &[usize]| {
        PHONE_SHAPES
            .iter()
            .find(|shape| lens.len() >= shape.len() && lens[..shape.len()] == shape[..])
            .map(|shape| shape.len())
    };
    if lens.first() == Some(&1) && tokens[i] == "1" {
        if let Some(n) = fits(&lens[1..]) {
            return Some(n + 1);
        }
    }
    if lens.first() == Some(&11) && tokens[i].starts_with('1') {
        return Some(1);
    }
    fits(&lens)
}

/// Removes phone-number runs until none remain. Returns whether any were found.
fn strip_phone_runs(tokens: &mut Vec<String>) -> bool {
    let mut found = false;
    loop {
        let mut out = Vec::with_capacity(tokens.len());
        let mut changed = false;
        let mut i = 0;
        while i < tokens.len() {
            match phone_run_at(tokens, i) {
                Some(n) => {
                    changed = true;
                    i += n;
                }
                None => {
                    out.push(std::mem::take(&mut tokens[i]));
                    i += 1;
                }
            }
        }
        *tokens = out;
        if !changed {
            return found;
        }
        found = true;
    }
}

/// Light suffix-stripping stemmer. Only strips when a stem of at least three
/// characters remains.
pub fn stem(token: &str) -> String {
    const RULES: [(&str, &str); 8] = [
        ("ies", "y"),
        ("ingly", ""),
        ("edly", ""),
        ("ing", ""),
        ("ness", ""),
        ("ed", ""),
        ("ly", ""),
        ("s", ""),
    ];
    for (suffix, repl) in RULES {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.chars().count() < 3 || (suffix == "s" && base.ends_with('s')) {
                continue;
            }
            return format!("{base}{repl}");
        }
    }
    token.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(text: &str, stop: &[&str]) -> TokenizedDoc {
        PreprocessConfig::with_stopwords(stop.iter().copied())
            .build()
            .tokenize("d", text)
    }

    #[test]
    fn url_removed_and_flagged() {
        let out = run("I feel SAD!! visit http://x.co", &["i", "visit"]);
        assert_eq!(out.tokens, ["feel", "sad"]);
        assert!(out.redactions.url);
        assert!(!out.redactions.phone);
    }

    #[test]
    fn empty_text() {
        let out = run("", &[]);
        assert!(out.tokens.is_empty());
        assert_eq!(out.redactions, Redactions::default());
    }

    #[test]
    fn phone_removed_and_flagged() {
        let out = run("Call 555-123-4567 now", &["now"]);
        assert_eq!(out.tokens, ["call"]);
        assert!(out.redactions.phone);
    }

    #[test]
    fn phone_shapes() {
        for text in [
            "x (555) 123 4567 y",
            "x 555.123.4567 y",
            "x +1 555 123 4567 y",
            "x 5551234567 y",
            "x 15551234567 y",
            "x 555 1234567 y",
        ] {
            let out = run(text, &[]);
            assert_eq!(out.tokens, ["x", "y"], "{text}");
            assert!(out.redactions.phone, "{text}");
        }
        let out = run("born 1999 in 2004", &[]);
        assert_eq!(out.tokens, ["born", "1999", "in", "2004"]);
        assert!(!out.redactions.phone);
    }

    #[test]
    fn names_and_emails_removed() {
        let out = run("thanks @alice and u/bob_99 mail me at a.b@ex.com ok", &[]);
        assert_eq!(out.tokens, ["thanks", "and", "mail", "me", "at", "ok"]);
        assert!(out.redactions.name);
    }

    #[test]
    fn apostrophes_and_punctuation() {
        let out = run("don't -- 'quoted' ... !!!", &[]);
        assert_eq!(out.tokens, ["don't", "quoted"]);
    }

    #[test]
    fn default_stopwords_loaded() {
        let cfg = PreprocessConfig::default();
        assert!(cfg.stopwords.iter().any(|w| w == "the"));
        assert!(!cfg.stopwords.iter().any(|w| w.starts_with('#')));
        let out = cfg.build().tokenize("d", "The cat is on the mat");
        assert_eq!(out.tokens, ["cat", "mat"]);
    }

    #[test]
    fn stemming_is_opt_in() {
        let text = "feelings cried worries";
        assert_eq!(run(text, &[]).tokens, ["feelings", "cried", "worries"]);
        let cfg = PreprocessConfig {
            stem: true,
            ..PreprocessConfig::with_stopwords(Vec::<String>::new())
        };
        assert_eq!(cfg.build().tokenize("d", text).tokens, ["feeling", "cri", "worry"]);
        assert_eq!(stem("is"), "is");
        assert_eq!(stem("class"), "class");
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(text in "[a-zA-Z0-9 .,!?@:/'()+\\-éİ]{0,80}") {
            let p = PreprocessConfig::default().build();
            let once = p.tokenize("d", &text);
            let twice = p.tokenize("d", &once.tokens.join(" "));
            prop_assert_eq!(once.tokens, twice.tokens);
        }
    }
}
