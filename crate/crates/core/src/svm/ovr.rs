//! One-vs-rest combination of binary models, plus the model file format.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_binary, BinaryProblem, LinearModel, SvmError, TrainMeta, TrainParams};
use crate::corpus::{LabeledDataset, RecordText, Taxonomy};
use crate::features::{SparseVector, TfIdfModel};
use crate::textprep::{Preprocessor, StopWords, TokenStream};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvrParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub min_df: u64,
    /// Rescale per-class cost to `C · n / (k · n_c)`.
    pub balanced: bool,
}

impl Default for OvrParams {
    fn default() -> Self {
        let t = TrainParams::default();
        OvrParams {
            c: 1.0,
            tol: t.tol,
            max_iter: t.max_iter,
            seed: t.seed,
            min_df: 1,
            balanced: false,
        }
    }
}

impl OvrParams {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrMeta {
    #[serde(flatten)]
    pub params: OvrParams,
    pub n_train: usize,
    pub supports: BTreeMap<String, usize>,
    pub per_class: BTreeMap<String, TrainMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub taxonomy: Taxonomy,
    pub stopword_list_hash: String,
    pub include_versions: bool,
    pub tfidf: TfIdfModel,
    /// One model per class present in training, sorted by class code.
    pub classes: Vec<LinearModel>,
    pub fallback_class: String,
    pub train_meta: OvrMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: String,
    /// Decision value per class, in class order.
    pub decisions: BTreeMap<String, f64>,
    /// Set when the record produced no known features.
    pub low_confidence: bool,
}

/// Trains one binary model per class present in `dataset`.
pub fn train_ovr(
    dataset: &LabeledDataset,
    params: &OvrParams,
    pre: &Preprocessor,
) -> Result<MulticlassModel, SvmError> {
    let supports = dataset.supports();
    if supports.len() < 2 {
        let only = supports.keys().next().cloned().unwrap_or_default();
        return Err(SvmError::SingleClassDataset(only));
    }
    let streams: Vec<TokenStream> = dataset
        .examples
        .par_iter()
        .map(|ex| pre.preprocess(&ex.text))
        .collect();
    let tfidf = TfIdfModel::fit(&streams, params.min_df)?;
    let vectors: Vec<SparseVector> = streams.par_iter().map(|s| tfidf.transform(s)).collect();

    let n = dataset.len() as f64;
    let k = supports.len() as f64;
    let example_weights: Option<Vec<f64>> = params.balanced.then(|| {
        dataset
            .examples
            .iter()
            .map(|ex| n / (k * supports[&ex.label] as f64))
            .collect()
    });

    let train_params = params.train_params();
    let codes: Vec<&String> = supports.keys().collect();
    let classes = codes
        .par_iter()
        .map(|&code| {
            let labels = dataset
                .examples
                .iter()
                .map(|ex| if &ex.label == code { 1.0 } else { -1.0 })
                .collect();
            let mut problem =
                BinaryProblem::new(vectors.clone(), labels, params.c)?.with_dim(tfidf.dim())?;
            if let Some(w) = &example_weights {
                problem = problem.with_example_weights(w)?;
            }
            train_binary(&problem, &train_params, code.clone())
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Majority class; BTreeMap order makes the smallest code win ties.
    let fallback_class = supports
        .iter()
        .fold(
            None::<(&String, usize)>,
            |best, (code, &count)| match best {
                Some((_, c)) if c >= count => best,
                _ => Some((code, count)),
            },
        )
        .map(|(code, _)| code.clone())
        .expect("at least two classes");

    let per_class = classes
        .iter()
        .map(|m| (m.target_class.clone(), m.meta.clone()))
        .collect();
    Ok(MulticlassModel {
        taxonomy: dataset.taxonomy.clone(),
        stopword_list_hash: pre.stopwords.hash().to_string(),
        include_versions: pre.include_versions,
        tfidf,
        classes,
        fallback_class,
        train_meta: OvrMeta {
            params: *params,
            n_train: dataset.len(),
            supports,
            per_class,
        },
    })
}

/// Free-function form of [`MulticlassModel::predict`].
pub fn predict(model: &MulticlassModel, pre: &Preprocessor, text: &RecordText) -> Prediction {
    model.predict(pre, text)
}

impl MulticlassModel {
    pub fn class_order(&self) -> Vec<&str> {
        self.classes
            .iter()
            .map(|m| m.target_class.as_str())
            .collect()
    }

    /// A preprocessor matching this model, after checking the stop-word list.
    pub fn preprocessor(&self, stopwords: StopWords) -> Result<Preprocessor, SvmError> {
        if stopwords.hash() != self.stopword_list_hash {
            return Err(SvmError::StopwordMismatch {
                model: self.stopword_list_hash.clone(),
                current: stopwords.hash().to_string(),
            });
        }
        Ok(Preprocessor::new(stopwords, self.include_versions))
    }

    /// Argmax over class decisions; ties go to the smallest code. An empty
    /// feature vector yields the fallback class, flagged.
    pub fn predict_vector(&self, x: &SparseVector) -> Prediction {
        let mut decisions = BTreeMap::new();
        let mut best: Option<(&str, f64)> = None;
        for m in &self.classes {
            let d = m
                .decision(x)
                .expect("vectors from the model's own vocabulary are in range");
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((&m.target_class, d));
            }
            decisions.insert(m.target_class.clone(), d);
        }
        let low_confidence = x.is_empty();
        let class = if low_confidence {
            self.fallback_class.clone()
        } else {
            best.map(|(c, _)| c.to_string())
                .unwrap_or_else(|| self.fallback_class.clone())
        };
        Prediction {
            class,
            decisions,
            low_confidence,
        }
    }

    pub fn predict(&self, pre: &Preprocessor, text: &RecordText) -> Prediction {
        self.predict_vector(&self.tfidf.transform(&pre.preprocess(text)))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            taxonomy: self.taxonomy.clone(),
            stopword_list_hash: self.stopword_list_hash.clone(),
            include_versions: self.include_versions,
            tfidf: self.tfidf.clone(),
            classes: self
                .classes
                .iter()
                .map(|m| ClassModelFile {
                    code: m.target_class.clone(),
                    weights: m.weights[..m.dim()]
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(i, w)| (i as u32, *w))
                        .collect(),
                    bias: m.bias(),
                })
                .collect(),
            fallback_class: self.fallback_class.clone(),
            train_meta: self.train_meta.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<MulticlassModel, SvmError> {
        let malformed = |msg: String| Err(SvmError::MalformedModel(msg));
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(SvmError::ModelVersionMismatch {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if file.classes.len() < 2 {
            return malformed("fewer than two class models".into());
        }
        if !file.classes.windows(2).all(|w| w[0].code < w[1].code) {
            return malformed("class models are not sorted by code".into());
        }
        if !file.classes.iter().any(|c| c.code == file.fallback_class) {
            return malformed(format!(
                "fallback class {} has no model",
                file.fallback_class
            ));
        }
        let dim = file.tfidf.dim();
        let mut classes = Vec::with_capacity(file.classes.len());
        for c in file.classes {
            if !file.taxonomy.contains(&c.code) {
                return malformed(format!("class {} is not in the taxonomy", c.code));
            }
            let Some(meta) = file.train_meta.per_class.get(&c.code) else {
                return malformed(format!("class {} has no training metadata", c.code));
            };
            let mut weights = vec![0.0; dim + 1];
            for (i, w) in c.weights {
                let Some(slot) = weights[..dim].get_mut(i as usize) else {
                    return malformed(format!(
                        "class {}: weight index {i} out of range for dimension {dim}",
                        c.code
                    ));
                };
                *slot = w;
            }
            weights[dim] = c.bias;
            classes.push(LinearModel {
                weights,
                target_class: c.code,
                meta: meta.clone(),
            });
        }
        Ok(MulticlassModel {
            taxonomy: file.taxonomy,
            stopword_list_hash: file.stopword_list_hash,
            include_versions: file.include_versions,
            tfidf: file.tfidf,
            classes,
            fallback_class: file.fallback_class,
            train_meta: file.train_meta,
        })
    }

    /// Compact JSON followed by a newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.to_file()).expect("model weights are finite");
        out.push(b'\n');
        out
    }

    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&self.to_json())
    }

    pub fn load<R: Read>(input: R) -> Result<MulticlassModel, SvmError> {
        let value: serde_json::Value =
            serde_json::from_reader(input).map_err(|e| SvmError::MalformedModel(e.to_string()))?;
        match value.get("format_version").map(|v| v.as_u64()) {
            Some(Some(MODEL_FORMAT_VERSION)) => {}
            Some(Some(found)) => {
                return Err(SvmError::ModelVersionMismatch {
                    found,
                    expected: MODEL_FORMAT_VERSION,
                })
            }
            _ => {
                return Err(SvmError::MalformedModel(
                    "missing or invalid format_version".into(),
                ))
            }
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| SvmError::MalformedModel(e.to_string()))?;
        MulticlassModel::from_file(file)
    }
}

/// On-disk shape of a [`MulticlassModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u64,
    pub taxonomy: Taxonomy,
    pub stopword_list_hash: String,
    pub include_versions: bool,
    pub tfidf: TfIdfModel,
    pub classes: Vec<ClassModelFile>,
    pub fallback_class: String,
    pub train_meta: OvrMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModelFile {
    pub code: String,
    /// Non-zero weights as `[index, value]` pairs.
    pub weights: Vec<(u32, f64)>,
    pub bias: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledExample;

    fn example(id: u32, label: &str, vendor: &str, summary: &str) -> LabeledExample {
        LabeledExample {
            cve_id: format!("CVE-2017-{id:04}"),
            year: 2017,
            label: label.into(),
            text: RecordText {
                vendors: vec![vendor.into()],
                products: vec![format!("{vendor}_device")],
                summary: summary.into(),
                ..RecordText::default()
            },
        }
    }

    fn dataset(examples: Vec<LabeledExample>) -> LabeledDataset {
        LabeledDataset {
            examples,
            taxonomy: Taxonomy::iot_default(),
            year_range: None,
        }
    }

    fn two_class() -> LabeledDataset {
        dataset(vec![
            example(1, "H", "netgear", "router web interface"),
            example(2, "H", "tp-link", "router admin page"),
            example(3, "H", "d-link", "wireless router"),
            example(4, "S", "siemens", "plc controller"),
            example(5, "S", "schneider", "scada controller"),
        ])
    }

    #[test]
    fn two_classes_two_models() {
        let pre = Preprocessor::default();
        let model = train_ovr(&two_class(), &OvrParams::default(), &pre).unwrap();
        assert_eq!(model.class_order(), vec!["H", "S"]);
        assert_eq!(model.fallback_class, "H");
        for m in &model.classes {
            assert_eq!(m.weights.len(), model.tfidf.dim() + 1);
        }
        for ex in &two_class().examples {
            let p = model.predict(&pre, &ex.text);
            assert_eq!(p.class, ex.label);
            let margin = p.decisions["H"] - p.decisions["S"];
            assert_eq!(p.class == "H", margin > 0.0);
        }
    }

    #[test]
    fn singleton_class_and_single_class() {
        let pre = Preprocessor::default();
        let mut ds = two_class();
        ds.examples
            .push(example(6, "M", "samsung", "phone baseband"));
        let model = train_ovr(&ds, &OvrParams::default(), &pre).unwrap();
        assert_eq!(model.class_order(), vec!["H", "M", "S"]);

        let single = dataset(vec![
            example(1, "H", "netgear", "router"),
            example(2, "H", "tp-link", "router"),
        ]);
        assert_eq!(
            train_ovr(&single, &OvrParams::default(), &pre).unwrap_err(),
            SvmError::SingleClassDataset("H".into())
        );
    }

    #[test]
    fn unknown_tokens_fall_back() {
        let pre = Preprocessor::default();
        let model = train_ovr(&two_class(), &OvrParams::default(), &pre).unwrap();
        let text = RecordText {
            summary: "zzzz qqqq".into(),
            ..RecordText::default()
        };
        let p = model.predict(&pre, &text);
        assert!(p.low_confidence);
        assert_eq!(p.class, "H");
        assert_eq!(p.decisions.len(), 2);
    }

    #[test]
    fn model_file_round_trip() {
        let pre = Preprocessor::default();
        let params = OvrParams {
            balanced: true,
            ..OvrParams::default()
        };
        let model = train_ovr(&two_class(), &params, &pre).unwrap();
        let bytes = model.to_json();
        let loaded = MulticlassModel::load(bytes.as_slice()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.to_json(), bytes);

        let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        value["format_version"] = 99.into();
        assert_eq!(
            MulticlassModel::load(value.to_string().as_bytes()).unwrap_err(),
            SvmError::ModelVersionMismatch {
                found: 99,
                expected: 1
            }
        );
        value["format_version"] = 1.into();
        value["classes"][0]["weights"] = serde_json::json!([[100000, 1.0]]);
        assert!(matches!(
            MulticlassModel::load(value.to_string().as_bytes()),
            Err(SvmError::MalformedModel(_))
        ));
        assert!(matches!(
            MulticlassModel::load(&b"{not json"[..]),
            Err(SvmError::MalformedModel(_))
        ));
    }

    #[test]
    fn stopword_check() {
        let model = train_ovr(
            &two_class(),
            &OvrParams::default(),
            &Preprocessor::default(),
        )
        .unwrap();
        assert!(model.preprocessor(StopWords::bundled()).is_ok());
        assert!(matches!(
            model.preprocessor(StopWords::parse("only\n")),
            Err(SvmError::StopwordMismatch { .. })
        ));
    }
}
