//! TF-IDF vectorisation into L2-normalised sparse vectors.
//!
//! Weighting: raw term count × smoothed idf `ln((1 + N) / (1 + df)) + 1`,
//! then L2 normalisation. Vocabulary indices follow sorted token order so a
//! fitted model is identical across runs and platforms.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::TokenStream;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("cannot fit on an empty corpus")]
    EmptyCorpus,
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("inconsistent vocabulary: {0}")]
    InvalidVocabulary(String),
}

/// `(index, value)` pairs with strictly increasing indices and finite,
/// non-zero values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<SparseVector, FeatureError> {
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(FeatureError::InvalidVector(
                    "indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some((i, v)) = entries.iter().find(|(_, v)| !v.is_finite() || *v == 0.0) {
            return Err(FeatureError::InvalidVector(format!(
                "value {v} at index {i} must be finite and non-zero"
            )));
        }
        Ok(SparseVector { entries })
    }

    /// Builds from a dense slice, dropping zeros.
    pub fn from_dense(values: &[f64]) -> Result<SparseVector, FeatureError> {
        SparseVector::new(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// One past the largest index, 0 when empty.
    pub fn dim_hint(&self) -> usize {
        self.entries.last().map_or(0, |(i, _)| *i as usize + 1)
    }

    /// Dot product with a dense vector; indices beyond `dense` are ignored.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(i, v)| dense.get(i as usize).map(|w| w * v))
            .sum()
    }
}

/// Token → index map with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    df: Vec<u64>,
    n_docs: u64,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_parts(
        tokens: Vec<String>,
        df: Vec<u64>,
        n_docs: u64,
    ) -> Result<Vocabulary, FeatureError> {
        if tokens.len() != df.len() {
            return Err(FeatureError::InvalidVocabulary(format!(
                "{} tokens but {} document frequencies",
                tokens.len(),
                df.len()
            )));
        }
        if let Some(bad) = df.iter().find(|&&d| d == 0 || d > n_docs) {
            return Err(FeatureError::InvalidVocabulary(format!(
                "document frequency {bad} outside [1, {n_docs}]"
            )));
        }
        let index: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if index.len() != tokens.len() {
            return Err(FeatureError::InvalidVocabulary("duplicate token".into()));
        }
        Ok(Vocabulary {
            tokens,
            df,
            n_docs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequencies(&self) -> &[u64] {
        &self.df
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }
}

/// Smoothed inverse document frequency; always ≥ 1.
pub fn smoothed_idf(n_docs: u64, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
}

/// Serialised form: `{tokens, df, n_docs}`; idf is recomputed on load.
#[derive(Serialize, Deserialize)]
struct TfIdfRepr {
    tokens: Vec<String>,
    df: Vec<u64>,
    n_docs: u64,
}

impl Serialize for TfIdfModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TfIdfRepr {
            tokens: self.vocabulary.tokens.clone(),
            df: self.vocabulary.df.clone(),
            n_docs: self.vocabulary.n_docs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TfIdfModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TfIdfRepr::deserialize(deserializer)?;
        let vocabulary = Vocabulary::from_parts(repr.tokens, repr.df, repr.n_docs)
            .map_err(serde::de::Error::custom)?;
        Ok(TfIdfModel::from_vocabulary(vocabulary))
    }
}

impl TfIdfModel {
    pub fn from_vocabulary(vocabulary: Vocabulary) -> TfIdfModel {
        let idf = vocabulary
            .df
            .iter()
            .map(|&df| smoothed_idf(vocabulary.n_docs, df))
            .collect();
        TfIdfModel { vocabulary, idf }
    }

    /// Fits on the given streams keeping tokens with `df >= min_df`.
    pub fn fit(streams: &[TokenStream], min_df: u64) -> Result<TfIdfModel, FeatureError> {
        if streams.iter().all(TokenStream::is_empty) {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut df: BTreeMap<&str, u64> = BTreeMap::new();
        for stream in streams {
            let distinct: HashSet<&str> = stream.tokens().iter().map(String::as_str).collect();
            for token in distinct {
                *df.entry(token).or_default() += 1;
            }
        }
        let (tokens, dfs): (Vec<String>, Vec<u64>) = df
            .into_iter()
            .filter(|(_, d)| *d >= min_df.max(1))
            .map(|(t, d)| (t.to_string(), d))
            .unzip();
        let vocabulary = Vocabulary::from_parts(tokens, dfs, streams.len() as u64)?;
        Ok(TfIdfModel::from_vocabulary(vocabulary))
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocabulary
            .index_of(token)
            .map(|i| self.idf[i as usize])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    /// tf·idf weights, L2-normalised. Unknown tokens are ignored; a stream
    /// with no known token yields the empty vector.
    pub fn transform(&self, stream: &TokenStream) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for token in stream.tokens() {
            if let Some(i) = self.vocabulary.index_of(token) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, tf)| (i, tf * self.idf[i as usize]))
            .collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        SparseVector { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(tokens: &[&str]) -> TokenStream {
        TokenStream(tokens.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn idf_examples() {
        let one = TfIdfModel::fit(&[stream(&["t"])], 1).unwrap();
        assert_eq!(one.idf("t"), Some(1.0));

        let all =
            TfIdfModel::fit(&[stream(&["t"]), stream(&["t", "u"]), stream(&["t"])], 1).unwrap();
        assert_eq!(all.idf("t"), Some(1.0));

        let rare = TfIdfModel::fit(&[stream(&["t"]), stream(&["u"]), stream(&["v"])], 1).unwrap();
        let expected = 2f64.ln() + 1.0;
        assert!((rare.idf("t").unwrap() - expected).abs() < 1e-15);
        assert!((expected - 1.693_147_180_559_945).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(TfIdfModel::fit(&[], 1), Err(FeatureError::EmptyCorpus));
        assert_eq!(
            TfIdfModel::fit(&[stream(&[]), stream(&[])], 1),
            Err(FeatureError::EmptyCorpus)
        );
    }

    #[test]
    fn vocabulary_is_sorted_and_min_df_applies() {
        let model = TfIdfModel::fit(&[stream(&["b", "a"]), stream(&["c", "a"])], 1).unwrap();
        assert_eq!(model.vocabulary().tokens(), ["a", "b", "c"]);
        let pruned = TfIdfModel::fit(&[stream(&["b", "a"]), stream(&["c", "a"])], 2).unwrap();
        assert_eq!(pruned.vocabulary().tokens(), ["a"]);
    }

    #[test]
    fn transform_examples() {
        let model = TfIdfModel::fit(&[stream(&["a", "b"]), stream(&["a"])], 1).unwrap();
        let single = model.transform(&stream(&["a"]));
        assert_eq!(single.entries(), &[(0, 1.0)]);

        let symmetric = TfIdfModel::fit(&[stream(&["x", "y"])], 1).unwrap();
        let v = symmetric.transform(&stream(&["x", "y"]));
        for (_, value) in v.entries() {
            assert!((value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }

        let unknown = model.transform(&stream(&["zzz"]));
        assert!(unknown.is_empty());
    }

    #[test]
    fn three_document_fixture() {
        // df(a) = 3, df(b) = 1, N = 3; the document is "a a b".
        let corpus = [stream(&["a", "a", "b"]), stream(&["a"]), stream(&["a"])];
        let model = TfIdfModel::fit(&corpus, 1).unwrap();
        let v = model.transform(&corpus[0]);
        // Reference values: (2, ln 2 + 1) / ‖(2, ln 2 + 1)‖ evaluated
        // independently to 16 digits.
        let expected = [0.763_228_291_627_654_2, 0.646_128_915_046_473_2];
        assert_eq!(v.nnz(), 2);
        for ((_, got), want) in v.entries().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(2, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(0, 0.0)]).is_err());
        assert!(SparseVector::new(vec![(0, f64::NAN)]).is_err());
        let v = SparseVector::from_dense(&[0.0, 3.0, 4.0]).unwrap();
        assert_eq!(v.entries(), &[(1, 3.0), (2, 4.0)]);
        assert_eq!(v.norm(), 5.0);
        assert_eq!(v.dot_dense(&[1.0, 1.0]), 3.0);
    }

    #[test]
    fn serde_recomputes_idf() {
        let model = TfIdfModel::fit(&[stream(&["a", "b"]), stream(&["a"])], 1).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert_eq!(json, r#"{"tokens":["a","b"],"df":[2,1],"n_docs":2}"#);
        let back: TfIdfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        assert!(
            serde_json::from_str::<TfIdfModel>(r#"{"tokens":["a"],"df":[3],"n_docs":2}"#).is_err()
        );
    }
}
