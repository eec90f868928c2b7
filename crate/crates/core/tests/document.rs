mod common;

use cepml::document::*;
use cepml::engine::run_stream;
use cepml::model::canonicalize;
use common::*;
use proptest::prelude::*;

#[test]
fn fixtures_roundtrip_byte_for_byte() {
    for name in ["keepall", "fraud", "withdrawal", "avg"] {
        let text = std::fs::read_to_string(fixture_path(&format!("{name}.ceprule.json"))).unwrap();
        let doc = parse_document(&text).unwrap();
        let once = serialize_document(&doc);
        assert_eq!(parse_document(&once).unwrap(), doc);
        assert_eq!(serialize_document(&parse_document(&once).unwrap()), once);
    }
}

#[test]
fn editor_meta_is_carried_through() {
    let text = std::fs::read_to_string(fixture_path("avg.ceprule.json")).unwrap();
    let (model, meta) = parse_model(&text).unwrap();
    assert!(meta.is_some());
    let again = serialize_model(&model, meta.as_ref());
    assert_eq!(parse_model(&again).unwrap().1, meta);
}

#[test]
fn structural_errors_carry_position() {
    let errs = parse_document("{\"format_version\": \"1.0\", \"rule\": {\"name\": 5}}").unwrap_err();
    assert_eq!(errs[0].path, "name");
    assert_eq!(errs[0].line, 1);
    assert!(parse_document("not json").is_err());
    assert!(parse_document("{\"format_version\": \"1.0\", \"rule\": {\"name\": \"A\"}} trailing").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_models_roundtrip(seed in any::<u64>()) {
        let model = canonicalize(&Gen::new(seed).case().model).unwrap();
        let text = serialize_model(&model, None);
        let (back, meta) = parse_model(&text).unwrap();
        prop_assert!(meta.is_none());
        prop_assert_eq!(canonicalize(&back).unwrap(), model.clone());
        prop_assert_eq!(serialize_model(&back, None), text.clone());
        prop_assert_eq!(serialize_model(&model, None), text);
    }

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>()) {
        let once = canonicalize(&Gen::new(seed).case().model).unwrap();
        prop_assert_eq!(canonicalize(&once).unwrap(), once);
    }

    #[test]
    fn epl_is_stable_across_runs(seed in any::<u64>()) {
        let model = Gen::new(seed).case().model;
        let first = cepml::codegen::generate_epl(&model).unwrap().text;
        for _ in 0..4 {
            prop_assert_eq!(&cepml::codegen::generate_epl(&model).unwrap().text, &first);
        }
    }

    #[test]
    fn streams_and_rows_roundtrip(seed in any::<u64>()) {
        let case = Gen::new(seed).case();
        let text = write_stream(&case.events);
        prop_assert_eq!(parse_stream(&text).unwrap(), case.events.clone());
        let rows = run_stream(&case.model, &case.events).unwrap();
        let back = parse_rows(&write_rows(&rows)).unwrap();
        prop_assert!(rows_match(&rows, &back));
    }
}
