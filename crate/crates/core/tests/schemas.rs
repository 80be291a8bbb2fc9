mod common;

use narrow_core::harness::{find_unsound_case, random_findings, FindingsDensity};
use narrow_core::{generate_kb, GeneratorSpec, Network};
use serde_json::{json, Value};

fn validator(name: &str) -> jsonschema::Validator {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn errors(v: &jsonschema::Validator, doc: &Value) -> Vec<String> {
    v.iter_errors(doc).map(|e| e.to_string()).collect()
}

#[test]
fn written_kbs_match_the_schema() {
    let v = validator("kb.schema.json");
    for seed in 0..20 {
        let kb = generate_kb(&GeneratorSpec::new(4 + seed as usize % 6, 12, 3, seed)).unwrap();
        let doc: Value = serde_json::from_str(&kb.to_canonical_json()).unwrap();
        assert!(errors(&v, &doc).is_empty(), "seed {seed}: {:?}", errors(&v, &doc));
    }
    for kb in [common::fig2_kb(), common::fig3_kb(), find_unsound_case(0).unwrap().kb] {
        let doc: Value = serde_json::from_str(&kb.to_canonical_json()).unwrap();
        assert!(errors(&v, &doc).is_empty(), "{:?}", errors(&v, &doc));
    }
}

#[test]
fn kb_schema_rejects_what_the_loader_rejects() {
    let v = validator("kb.schema.json");
    let base = json!({"version": 1, "diseases": [{"id": "d", "name": "D", "prior": 0.1}],
                      "manifestations": [], "treatments": [], "subvalues": []});
    assert!(v.is_valid(&base));
    let mut extra = base.clone();
    extra["extra"] = json!(1);
    let mut bad_id = base.clone();
    bad_id["diseases"][0]["id"] = json!("has space");
    let mut bad_prior = base.clone();
    bad_prior["diseases"][0]["prior"] = json!(1.0);
    let mut bad_key = base.clone();
    bad_key["subvalues"] = json!([{"id": "u", "disease_parents": ["d"], "table": {"0": 1, "x": 0.5}}]);
    for doc in [extra, bad_id, bad_prior, bad_key] {
        assert!(!v.is_valid(&doc), "{doc}");
    }
}

#[test]
fn written_findings_match_the_schema() {
    let v = validator("findings.schema.json");
    let net = Network::new(generate_kb(&GeneratorSpec::new(6, 20, 2, 3)).unwrap()).unwrap();
    for seed in 0..20 {
        let f = random_findings(&net, FindingsDensity::default(), seed).unwrap();
        let doc: Value = serde_json::from_str(&f.to_canonical_json()).unwrap();
        assert!(errors(&v, &doc).is_empty(), "{:?}", errors(&v, &doc));
    }
    assert!(!v.is_valid(&json!({"present": ["m0"], "maybe": []})));
}
