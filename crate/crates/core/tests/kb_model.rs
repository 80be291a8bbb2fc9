mod common;

use common::*;
use narrow_core::kb::{kb_stats, load_kb, save_kb, validate_kb, Rule};
use narrow_core::{generate_kb, Error, GeneratorSpec, KnowledgeBase};

#[test]
fn minimal_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.json");
    std::fs::write(
        &path,
        r#"{"version":1,"diseases":[{"id":"d1","name":"D","prior":0.1}],"manifestations":[],"treatments":[],"subvalues":[]}"#,
    )
    .unwrap();
    let kb = load_kb(&path).unwrap();
    assert_eq!(kb.diseases.len(), 1);
}

#[test]
fn duplicate_disease_names_the_id() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.json");
    std::fs::write(
        &path,
        r#"{"version":1,"diseases":[{"id":"flu","name":"a","prior":0.1},{"id":"flu","name":"b","prior":0.2}],
            "manifestations":[],"treatments":[],"subvalues":[]}"#,
    )
    .unwrap();
    match load_kb(&path) {
        Err(Error::Invalid(v)) => assert!(v.iter().any(|x| x.node == "flu")),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.json");
    std::fs::write(&path, "{\n  \"version\": 1,\n  \"diseases\": [oops]\n}").unwrap();
    match load_kb(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn generated_kb_round_trips_exactly() {
    let kb = generate_kb(&GeneratorSpec::new(9, 14, 4, 42)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.json");
    save_kb(&kb, &path).unwrap();
    let back = load_kb(&path).unwrap();
    assert_eq!(back, kb);
    let again = dir.path().join("again.json");
    save_kb(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn missing_table_key_is_one_violation() {
    let mut kb = single_pair_kb(0.1, RUNNING_EXAMPLE);
    kb.subvalues[0].table.remove("10");
    let v = validate_kb(&kb);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].node, "u");
}

#[test]
fn treatment_without_shared_subvalue_is_one_violation() {
    let mut kb = single_pair_kb(0.1, RUNNING_EXAMPLE);
    kb.diseases.push(disease("other", 0.1));
    kb.treatments[0].treats.push("other".into());
    let v = validate_kb(&kb);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].node, "t");
}

#[test]
fn zero_prior_is_one_violation() {
    let mut kb = single_pair_kb(0.0, RUNNING_EXAMPLE);
    kb.diseases[0].prior = 0.0;
    let v = validate_kb(&kb);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].rule, Rule::PriorOpenInterval);
}

#[test]
fn figure_topologies_are_valid() {
    assert!(validate_kb(&fig2_kb()).is_empty(), "{:?}", validate_kb(&fig2_kb()));
    assert!(validate_kb(&fig3_kb()).is_empty(), "{:?}", validate_kb(&fig3_kb()));
}

#[test]
fn generator_is_deterministic() {
    let spec = GeneratorSpec { links_per_manifestation: 2, ..GeneratorSpec::new(5, 8, 3, 1) };
    assert_eq!(generate_kb(&spec).unwrap(), generate_kb(&spec).unwrap());
}

#[test]
fn generator_without_treatments() {
    let kb = generate_kb(&GeneratorSpec::new(5, 8, 0, 3)).unwrap();
    assert!(kb.treatments.is_empty());
    assert!(kb.subvalues.is_empty());
}

#[test]
fn generator_reaches_the_full_scale() {
    let spec = GeneratorSpec { links_per_manifestation: 10, ..GeneratorSpec::new(534, 4040, 0, 5) };
    let kb = generate_kb(&spec).unwrap();
    let stats = kb_stats(&kb);
    assert_eq!(stats.n_diseases, 534);
    assert_eq!(stats.n_manifestations, 4040);
    assert_eq!(stats.n_arcs, 40_400);
}

#[test]
fn arc_counts() {
    let mut kb = empty_kb();
    kb.diseases = vec![disease("a", 0.1), disease("b", 0.1), disease("c", 0.1)];
    assert_eq!(kb_stats(&kb).n_arcs, 0);
    let links = [("a", 0.5), ("b", 0.5), ("c", 0.5)];
    kb.manifestations = vec![manifestation("m1", 0.0, &links), manifestation("m2", 0.0, &links)];
    assert_eq!(kb_stats(&kb).n_arcs, 6);
}

#[test]
fn canonical_json_sorts_ids() {
    let mut kb = fig3_kb();
    kb.diseases.reverse();
    let text = kb.to_canonical_json();
    let back = KnowledgeBase::from_json_str(&text, "test").unwrap();
    assert_eq!(back.diseases[0].id, "asthma");
    assert_eq!(back.to_canonical_json(), fig3_kb().canonical().to_canonical_json());
}
