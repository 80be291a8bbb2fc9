//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here work straight from `KnowledgeBase` structs, by id, and
//! never go through `Network` or the library's inference code.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use narrow_core::kb::{Disease, Link, Manifestation, Subvalue, Treatment, FORMAT_VERSION};
use narrow_core::{generate_kb, Findings, GeneratorSpec, KnowledgeBase};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn table(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn empty_kb() -> KnowledgeBase {
    KnowledgeBase {
        version: FORMAT_VERSION,
        diseases: vec![],
        manifestations: vec![],
        treatments: vec![],
        subvalues: vec![],
    }
}

pub fn disease(id: &str, prior: f64) -> Disease {
    Disease { id: id.into(), name: id.to_uppercase(), prior }
}

pub fn manifestation(id: &str, leak: f64, links: &[(&str, f64)]) -> Manifestation {
    Manifestation {
        id: id.into(),
        name: id.to_uppercase(),
        leak,
        links: links.iter().map(|(d, s)| Link { disease: d.to_string(), strength: *s }).collect(),
    }
}

pub fn treatment(id: &str, treats: &[&str]) -> Treatment {
    Treatment { id: id.into(), name: id.to_uppercase(), treats: treats.iter().map(|s| s.to_string()).collect() }
}

pub fn subvalue(id: &str, diseases: &[&str], treatments: &[&str], entries: &[(&str, f64)]) -> Subvalue {
    Subvalue {
        id: id.into(),
        disease_parents: diseases.iter().map(|s| s.to_string()).collect(),
        treatment_parents: treatments.iter().map(|s| s.to_string()).collect(),
        table: table(entries),
    }
}

/// One disease, one treatment, utilities (00, 01, 10, 11) keyed (disease, treatment).
pub fn single_pair_kb(prior: f64, u: [f64; 4]) -> KnowledgeBase {
    let mut kb = empty_kb();
    kb.diseases.push(disease("d", prior));
    kb.treatments.push(treatment("t", &["d"]));
    kb.subvalues
        .push(subvalue("u", &["d"], &["t"], &[("00", u[0]), ("01", u[1]), ("10", u[2]), ("11", u[3])]));
    kb
}

/// The running example: utilities (1, 0.9, 0.2, 0.95).
pub const RUNNING_EXAMPLE: [f64; 4] = [1.0, 0.9, 0.2, 0.95];

/// Two herpes diseases, three treatments; u2 is the prednisone harm to a
/// simplex patient.
pub fn fig2_kb() -> KnowledgeBase {
    let mut kb = empty_kb();
    kb.diseases = vec![disease("zoster", 0.02), disease("simplex", 0.03)];
    kb.manifestations = vec![manifestation("red_eye", 0.01, &[("zoster", 0.8), ("simplex", 0.7)])];
    kb.treatments = vec![
        treatment("acyclovir", &["zoster"]),
        treatment("prednisone", &["zoster"]),
        treatment("ara_a", &["simplex"]),
    ];
    kb.subvalues = vec![
        subvalue(
            "u1",
            &["zoster"],
            &["acyclovir", "prednisone"],
            &[
                ("000", 1.0),
                ("001", 0.97),
                ("010", 0.95),
                ("011", 0.93),
                ("100", 0.3),
                ("101", 0.6),
                ("110", 0.8),
                ("111", 0.85),
            ],
        ),
        subvalue("u2", &["simplex"], &["prednisone"], &[("00", 1.0), ("01", 1.0), ("10", 1.0), ("11", 0.2)]),
        subvalue("u3", &["simplex"], &["ara_a"], &[("00", 1.0), ("01", 0.9), ("10", 0.3), ("11", 0.85)]),
    ];
    kb
}

/// Three breathing diseases, one treatment each, theophylline interacting
/// with the other two.
pub fn fig3_kb() -> KnowledgeBase {
    let mut kb = empty_kb();
    kb.diseases = vec![disease("heart_failure", 0.05), disease("asthma", 0.04), disease("lung_infection", 0.06)];
    kb.manifestations = vec![manifestation(
        "short_breath",
        0.02,
        &[("heart_failure", 0.7), ("asthma", 0.8), ("lung_infection", 0.5)],
    )];
    kb.treatments = vec![
        treatment("digoxin", &["heart_failure"]),
        treatment("theophylline", &["asthma"]),
        treatment("erythromycin", &["lung_infection"]),
    ];
    let pair = [("00", 1.0), ("01", 0.95), ("10", 0.4), ("11", 0.9)];
    let clash = [("00", 1.0), ("01", 1.0), ("10", 1.0), ("11", 0.7)];
    kb.subvalues = vec![
        subvalue("u1", &["heart_failure"], &["digoxin"], &pair),
        subvalue("u2", &[], &["digoxin", "theophylline"], &clash),
        subvalue("u3", &["asthma"], &["theophylline"], &pair),
        subvalue("u4", &[], &["theophylline", "erythromycin"], &clash),
        subvalue("u5", &["lung_infection"], &["erythromycin"], &pair),
    ];
    kb
}

/// Brute-force posteriors over all 2^n disease states, plus P(findings).
pub fn enumerate_posteriors(kb: &KnowledgeBase, findings: &Findings) -> (BTreeMap<String, f64>, f64) {
    let n = kb.diseases.len();
    assert!(n <= 20);
    let index: HashMap<&str, usize> = kb.diseases.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let by_id: HashMap<&str, &Manifestation> = kb.manifestations.iter().map(|m| (m.id.as_str(), m)).collect();
    let p_absent = |m: &Manifestation, state: u32| {
        let mut q = 1.0 - m.leak;
        for l in &m.links {
            if state >> index[l.disease.as_str()] & 1 == 1 {
                q *= 1.0 - l.strength;
            }
        }
        q
    };
    let mut z = 0.0;
    let mut num = vec![0.0; n];
    for state in 0u32..1 << n {
        let mut w = 1.0;
        for (i, d) in kb.diseases.iter().enumerate() {
            w *= if state >> i & 1 == 1 { d.prior } else { 1.0 - d.prior };
        }
        for id in findings.present() {
            w *= 1.0 - p_absent(by_id[id.as_str()], state);
        }
        for id in findings.absent() {
            w *= p_absent(by_id[id.as_str()], state);
        }
        z += w;
        for (i, x) in num.iter_mut().enumerate() {
            if state >> i & 1 == 1 {
                *x += w;
            }
        }
    }
    let post = kb.diseases.iter().zip(num).map(|(d, x)| (d.id.clone(), x / z)).collect();
    (post, z)
}

/// Utility of a pair's isolated submodel at (disease, treatment), every
/// other disease and treatment false, read from the tables by id.
pub fn isolated_utility(kb: &KnowledgeBase, t: &str, d: &str, d_on: bool, t_on: bool) -> f64 {
    kb.subvalues
        .iter()
        .map(|u| {
            let key: String = u
                .disease_parents
                .iter()
                .map(|p| p == d && d_on)
                .chain(u.treatment_parents.iter().map(|p| p == t && t_on))
                .map(|b| if b { '1' } else { '0' })
                .collect();
            u.table[&key]
        })
        .product()
}

pub fn isolated_utilities(kb: &KnowledgeBase, t: &str, d: &str) -> [f64; 4] {
    [
        isolated_utility(kb, t, d, false, false),
        isolated_utility(kb, t, d, false, true),
        isolated_utility(kb, t, d, true, false),
        isolated_utility(kb, t, d, true, true),
    ]
}

/// Corpus for the inference checks: at most 12 diseases, 16
/// manifestations and 8 positive findings.
pub struct Case {
    pub seed: u64,
    pub kb: KnowledgeBase,
    pub findings: Findings,
}

pub fn corpus_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let n_d = rng.random_range(2..=12);
    let n_m = rng.random_range(1..=16);
    let n_t = rng.random_range(0..=n_d.min(4));
    let spec = GeneratorSpec {
        links_per_manifestation: rng.random_range(1..=n_d.min(3)),
        ..GeneratorSpec::new(n_d, n_m, n_t, seed)
    };
    let kb = generate_kb(&spec).expect("corpus spec is feasible");
    let mut ids: Vec<String> = kb.manifestations.iter().map(|m| m.id.clone()).collect();
    ids.shuffle(&mut rng);
    let n_present = rng.random_range(0..=ids.len().min(8));
    let n_absent = rng.random_range(0..=ids.len() - n_present);
    let findings = Findings::new(
        ids[..n_present].iter().cloned(),
        ids[n_present..n_present + n_absent].iter().cloned(),
    )
    .unwrap();
    Case { seed, kb, findings }
}

pub fn corpus(n: u64) -> Vec<Case> {
    (0..n).map(corpus_case).collect()
}

/// Findings drawn by forward simulation from the model, observing each
/// manifestation with probability `observe`.
pub fn simulate_findings(kb: &KnowledgeBase, observe: f64, rng: &mut ChaCha8Rng) -> Findings {
    let state: HashMap<&str, bool> = kb.diseases.iter().map(|d| (d.id.as_str(), rng.random_bool(d.prior))).collect();
    let mut findings = Findings::empty();
    for m in &kb.manifestations {
        let mut q = 1.0 - m.leak;
        for l in &m.links {
            if state[l.disease.as_str()] {
                q *= 1.0 - l.strength;
            }
        }
        let present = rng.random_bool(1.0 - q);
        if rng.random_bool(observe) {
            if present {
                findings.set_present(m.id.clone());
            } else {
                findings.set_absent(m.id.clone());
            }
        }
    }
    findings
}

/// Threshold by brute force: the first point of a 10^4-point grid over
/// (0,1) at which the comprehensive solve of the one-pair submodel treats.
pub fn sweep_threshold(u: [f64; 4]) -> Option<f64> {
    use narrow_core::decision::solve_comprehensive;
    use narrow_core::inference::{ExactEngine, Oracle};
    use narrow_core::Network;
    let engine = ExactEngine::Oracle(Oracle::default());
    let evidence = narrow_core::Evidence::default();
    (0..10_000).map(|k| (k as f64 + 0.5) / 1e4).find(|&p| {
        let net = Network::new(single_pair_kb(p, u)).unwrap();
        solve_comprehensive(&net, &evidence, &engine).unwrap().best.get("t") == Some(true)
    })
}

/// EU of treating and of not treating in the one-pair submodel at prior p.
pub fn pair_eus(u: [f64; 4], p: f64) -> (f64, f64) {
    use narrow_core::decision::{expected_utility, TreatmentAssignment};
    use narrow_core::inference::{ExactEngine, Oracle};
    use narrow_core::Network;
    let net = Network::new(single_pair_kb(p, u)).unwrap();
    let engine = ExactEngine::Oracle(Oracle::default());
    let evidence = narrow_core::Evidence::default();
    let eu = |on: bool| {
        let a = TreatmentAssignment([("t".to_string(), on)].into_iter().collect());
        expected_utility(&net, &evidence, &a, &engine).unwrap()
    };
    (eu(true), eu(false))
}

/// Random single-pair utilities with the p* = 0 and unattainable edge
/// cases mixed in.
pub fn random_pair_utilities(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let u10 = rng.random_range(0.05..0.95);
    match rng.random_range(0..10) {
        0 => [1.0, 1.0, u10, rng.random_range(u10..=1.0)],
        1 => [1.0, rng.random_range(0.5..1.0), u10, u10],
        2 => [1.0, rng.random_range(0.5..1.0), u10, rng.random_range(0.01..=u10)],
        _ => [1.0, rng.random_range(0.5..1.0), u10, rng.random_range(u10..=1.0)],
    }
}

/// EU of every treatment assignment by direct enumeration of
/// (disease state, assignment) pairs, keyed one bit per treatment in KB
/// order. Tables are read by id and never validated.
pub fn brute_force_eus(kb: &KnowledgeBase, findings: &Findings) -> BTreeMap<String, f64> {
    let n = kb.diseases.len();
    let (post_joint, _) = enumerate_joint(kb, findings);
    let d_index: HashMap<&str, usize> = kb.diseases.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let t_index: HashMap<&str, usize> = kb.treatments.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    let mut out = BTreeMap::new();
    for a in 0u32..1 << kb.treatments.len() {
        let mut eu = 0.0;
        for state in 0u32..1 << n {
            let u: f64 = kb
                .subvalues
                .iter()
                .map(|sv| {
                    let key: String = sv
                        .disease_parents
                        .iter()
                        .map(|d| state >> d_index[d.as_str()] & 1 == 1)
                        .chain(sv.treatment_parents.iter().map(|t| a >> t_index[t.as_str()] & 1 == 1))
                        .map(|b| if b { '1' } else { '0' })
                        .collect();
                    sv.table[&key]
                })
                .product();
            eu += post_joint[state as usize] * u;
        }
        let key: String = (0..kb.treatments.len()).map(|t| if a >> t & 1 == 1 { '1' } else { '0' }).collect();
        out.insert(key, eu);
    }
    out
}

/// Posterior probability of every disease state (bit i = disease i).
pub fn enumerate_joint(kb: &KnowledgeBase, findings: &Findings) -> (Vec<f64>, f64) {
    let n = kb.diseases.len();
    let index: HashMap<&str, usize> = kb.diseases.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let by_id: HashMap<&str, &Manifestation> = kb.manifestations.iter().map(|m| (m.id.as_str(), m)).collect();
    let absent = |m: &Manifestation, state: u32| {
        m.links
            .iter()
            .filter(|l| state >> index[l.disease.as_str()] & 1 == 1)
            .fold(1.0 - m.leak, |q, l| q * (1.0 - l.strength))
    };
    let mut w: Vec<f64> = (0u32..1 << n)
        .map(|state| {
            let mut p: f64 = kb
                .diseases
                .iter()
                .enumerate()
                .map(|(i, d)| if state >> i & 1 == 1 { d.prior } else { 1.0 - d.prior })
                .product();
            for id in findings.present() {
                p *= 1.0 - absent(by_id[id.as_str()], state);
            }
            for id in findings.absent() {
                p *= absent(by_id[id.as_str()], state);
            }
            p
        })
        .collect();
    let z: f64 = w.iter().sum();
    for x in &mut w {
        *x /= z;
    }
    (w, z)
}
