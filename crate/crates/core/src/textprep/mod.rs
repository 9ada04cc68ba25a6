//! Text normalisation: tokenising, stop-word removal, stemming and the
//! field-prefixed token streams fed to the vectoriser.
//!
//! Every emitted token has the shape `<field>:<value>` where field is one of
//! `vendor`, `product`, `version`, `desc` or `cwe`, and value matches
//! `[a-z0-9_]+`.

mod porter;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::RecordText;

pub use porter::stem;

/// The bundled stop-word list, one word per line.
pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Lowercases and splits into maximal runs of ASCII letters, digits and
/// underscores. Everything else, including non-ASCII letters, separates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
    hash: String,
}

impl StopWords {
    /// Parses one word per line; blank lines and surrounding whitespace are
    /// ignored, words are lowercased.
    pub fn parse(text: &str) -> StopWords {
        let sorted: BTreeSet<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        let mut hasher = Sha256::new();
        for word in &sorted {
            hasher.update(word.as_bytes());
            hasher.update(b"\n");
        }
        StopWords {
            hash: hex::encode(hasher.finalize()),
            words: sorted.into_iter().collect(),
        }
    }

    pub fn bundled() -> StopWords {
        StopWords::parse(BUNDLED_STOPWORDS)
    }

    pub fn from_file(path: &Path) -> std::io::Result<StopWords> {
        Ok(StopWords::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 over the sorted, deduplicated list; identifies the list in
    /// model files independent of file order and formatting.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::bundled()
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopWords) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// An ordered list of field-prefixed tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream(pub Vec<String>);

impl TokenStream {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Collapses a CPE attribute into one token: anything outside `[a-z0-9_]`
/// becomes `_`, runs are merged and edge underscores trimmed.
fn identifier_token(value: &str) -> Option<String> {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

/// Options and resources shared by training and prediction.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub stopwords: StopWords,
    /// Emit `version:` tokens for CPE versions (off by default).
    pub include_versions: bool,
}

impl Preprocessor {
    pub fn new(stopwords: StopWords, include_versions: bool) -> Preprocessor {
        Preprocessor {
            stopwords,
            include_versions,
        }
    }

    /// Builds the token stream: distinct vendors, distinct product-name
    /// words, optionally distinct versions, then stemmed summary words with
    /// stop-words removed, then the CWE id.
    pub fn preprocess(&self, text: &RecordText) -> TokenStream {
        let mut tokens = Vec::new();
        let mut seen = HashSet::new();
        let mut push_unique = |tokens: &mut Vec<String>, token: String| {
            if seen.insert(token.clone()) {
                tokens.push(token);
            }
        };

        for vendor in &text.vendors {
            if let Some(v) = identifier_token(vendor) {
                push_unique(&mut tokens, format!("vendor:{v}"));
            }
        }
        for product in &text.products {
            for word in tokenize(&product.replace('_', " ")) {
                push_unique(&mut tokens, format!("product:{word}"));
            }
        }
        if self.include_versions {
            for version in &text.versions {
                if let Some(v) = identifier_token(version) {
                    push_unique(&mut tokens, format!("version:{v}"));
                }
            }
        }
        for word in remove_stopwords(tokenize(&text.summary), &self.stopwords) {
            tokens.push(format!("desc:{}", stem(&word)));
        }
        if let Some(cwe) = text.cwe_id.as_deref().and_then(identifier_token) {
            tokens.push(format!("cwe:{cwe}"));
        }
        TokenStream(tokens)
    }
}

/// Convenience wrapper using the given stop-words and no version tokens.
pub fn preprocess_record(text: &RecordText, stopwords: &StopWords) -> TokenStream {
    Preprocessor::new(stopwords.clone(), false).preprocess(text)
}
