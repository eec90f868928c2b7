mod common;

use cepml::engine::{oracle, run_stream};
use cepml::model::*;
use common::*;
use proptest::prelude::*;

#[test]
fn every_followed_by_within() {
    let m = every_within_model();
    for s in every_within_suites() {
        check_suite(&m, &s).unwrap();
    }
}

#[test]
fn absence_inside_and() {
    let m = absence_model();
    for s in absence_suites() {
        check_suite(&m, &s).unwrap();
    }
}

#[test]
fn every_on_the_leaf_pairs_each_a() {
    let m = RuleModel {
        pattern: Some(PatternNode::followed_by(vec![
            PatternNode::tagged("a", "x").every(),
            PatternNode::tagged("b", "y"),
        ])),
        ..every_within_model()
    };
    let events = script("A1@0 B1@1 C1@2 B2@3 A2@4 C2@5 A3@6 B3@7 A4@8 B4@9");
    let pairs: Vec<_> = run_stream(&m, &events)
        .unwrap()
        .iter()
        .map(|r| (column(r, "a"), column(r, "b")))
        .collect();
    let ids = |a: i64, b: i64| (a.into(), b.into());
    assert_eq!(pairs, vec![ids(1, 1), ids(2, 3), ids(3, 3), ids(4, 4)]);
}

#[test]
fn every_on_the_sequence_restarts_after_each_match() {
    let m = RuleModel {
        pattern: Some(
            PatternNode::followed_by(vec![PatternNode::tagged("a", "x"), PatternNode::tagged("b", "y")]).every(),
        ),
        ..every_within_model()
    };
    let events = script("A1@0 B1@1 C1@2 B2@3 A2@4 C2@5 A3@6 B3@7 A4@8 C3@9 B4@10");
    let pairs: Vec<_> = run_stream(&m, &events)
        .unwrap()
        .iter()
        .map(|r| (column(r, "a"), column(r, "b")))
        .collect();
    let ids = |a: i64, b: i64| (a.into(), b.into());
    assert_eq!(pairs, vec![ids(1, 1), ids(2, 3), ids(4, 4)]);
}

#[test]
fn or_takes_the_first_branch_to_complete() {
    let m = RuleModel {
        pattern: Some(PatternNode::or(vec![PatternNode::tagged("a", "x"), PatternNode::tagged("b", "y")]).every()),
        bring: vec![SelectItem::Star],
        ..every_within_model()
    };
    let rows = run_stream(&m, &script("A1@0 C1@1 B2@2")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows, oracle(&m, &script("A1@0 C1@1 B2@2")).unwrap());
}

#[test]
fn leaf_filters_see_earlier_tags() {
    let m = RuleModel {
        pattern: Some(
            PatternNode::followed_by(vec![
                PatternNode::tagged("a", "x"),
                PatternNode::tagged("b", "y").with_filter(Expression::compare(
                    CompareOp::Gt,
                    Operand::attr("b", "id"),
                    Operand::attr("x", "id"),
                )),
            ])
            .every(),
        ),
        ..every_within_model()
    };
    let events = script("A5@0 B3@1 B7@2 A1@3 B2@4");
    let rows = run_stream(&m, &events).unwrap();
    let pairs: Vec<_> = rows.iter().map(|r| (column(r, "a"), column(r, "b"))).collect();
    assert_eq!(pairs, vec![(5.into(), 7.into()), (1.into(), 2.into())]);
    assert_eq!(rows, oracle(&m, &events).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_patterns_agree_with_oracle(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let types = 1 + (seed % 3) as usize;
        let model = g.pattern_model(types);
        let events = g.stream(types, 40, 2500);
        let fast = run_stream(&model, &events).unwrap();
        let slow = oracle(&model, &events).unwrap();
        prop_assert!(rows_match(&fast, &slow), "{}", serde_json::to_string(&model).unwrap());
    }
}
