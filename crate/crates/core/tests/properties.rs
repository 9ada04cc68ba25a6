mod common;

use common::cpe_name;
use proptest::prelude::*;

use vulnclass::corpus::RecordText;
use vulnclass::cpe::CpeName;
use vulnclass::features::TfIdfModel;
use vulnclass::textprep::{tokenize, Preprocessor, StopWords, TokenStream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn uri_round_trip(name in cpe_name()) {
        let uri = name.to_uri();
        prop_assert_eq!(CpeName::parse(&uri).unwrap(), name, "{}", uri);
    }

    #[test]
    fn formatted_round_trip(name in cpe_name()) {
        let fs = name.to_formatted_string();
        prop_assert_eq!(CpeName::parse(&fs).unwrap(), name, "{}", fs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokens_are_normalised(text in "\\PC{0,80}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'));
        }
    }

    #[test]
    fn preprocessed_tokens_have_field_shape(
        vendor in "[A-Za-z0-9\\-_ ]{0,12}",
        product in "[A-Za-z0-9\\-_.]{0,16}",
        summary in "\\PC{0,80}",
    ) {
        let text = RecordText {
            vendors: vec![vendor],
            products: vec![product],
            versions: vec![],
            summary,
            cwe_id: Some("CWE-79".into()),
        };
        let stream = Preprocessor::new(StopWords::bundled(), false).preprocess(&text);
        for t in stream.tokens() {
            let (field, value) = t.split_once(':').unwrap();
            prop_assert!(["vendor", "product", "desc", "cwe"].contains(&field));
            prop_assert!(!value.is_empty());
            prop_assert!(value.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'), "{}", t);
        }
    }

    #[test]
    fn tfidf_vectors_are_unit_or_empty(
        docs in proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..8), 1..6),
    ) {
        let streams: Vec<TokenStream> = docs.into_iter().map(TokenStream).collect();
        prop_assume!(streams.iter().any(|s| !s.is_empty()));
        let model = TfIdfModel::fit(&streams, 1).unwrap();
        for s in &streams {
            let v = model.transform(s);
            if s.is_empty() {
                prop_assert!(v.is_empty());
            } else {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
                let mut doubled = s.clone();
                doubled.0.extend(s.0.iter().cloned());
                let w = model.transform(&doubled);
                for (a, b) in v.entries().iter().zip(w.entries()) {
                    prop_assert_eq!(a.0, b.0);
                    prop_assert!((a.1 - b.1).abs() < 1e-12);
                }
            }
        }
    }
}
