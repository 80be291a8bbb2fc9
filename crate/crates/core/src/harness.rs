//! Experiments: how often the reduced model's decisions match the
//! comprehensive model's, what the reduction saves, and a constructed case
//! where pruning is provably wrong.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{solve_comprehensive, threshold_table, ThresholdTable, TreatmentAssignment};
use crate::error::{Error, Result};
use crate::formulation::{disagreements, formulate, Policy, PolicyMethod, PruneStatus};
use crate::generate::{generate_kb, GeneratorSpec};
use crate::inference::ExactEngine;
use crate::kb::{Disease, Findings, KnowledgeBase, Link, Manifestation, Subvalue, Treatment, FORMAT_VERSION};
use crate::network::Network;

/// Experiment KBs must stay small enough for exhaustive ground truth.
pub const MAX_EXPERIMENT_DISEASES: usize = 12;
pub const MAX_EXPERIMENT_TREATMENTS: usize = 8;

/// Relative weights for drawing each manifestation's observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FindingsDensity {
    pub present: f64,
    pub absent: f64,
    pub unobserved: f64,
}

impl Default for FindingsDensity {
    fn default() -> Self {
        FindingsDensity {
            present: 0.15,
            absent: 0.25,
            unobserved: 0.6,
        }
    }
}

impl FindingsDensity {
    pub const NONE: FindingsDensity = FindingsDensity {
        present: 0.0,
        absent: 0.0,
        unobserved: 1.0,
    };
}

pub fn random_findings(net: &Network, density: FindingsDensity, seed: u64) -> Result<Findings> {
    let total = density.present + density.absent + density.unobserved;
    if !(total > 0.0) || density.present < 0.0 || density.absent < 0.0 || density.unobserved < 0.0 {
        return Err(Error::InfeasibleSpec(format!("bad findings density {density:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut findings = Findings::empty();
    for m in &net.kb().manifestations {
        let x = rng.random::<f64>() * total;
        if x < density.present {
            findings.set_present(m.id.clone());
        } else if x < density.present + density.absent {
            findings.set_absent(m.id.clone());
        }
    }
    Ok(findings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoundnessSpec {
    pub n_cases: usize,
    /// Template for every case; its seed is replaced per case.
    pub kb: GeneratorSpec,
    pub findings_density: FindingsDensity,
    pub seed: u64,
    pub policy: Policy,
}

impl Default for SoundnessSpec {
    fn default() -> Self {
        SoundnessSpec {
            n_cases: 500,
            kb: GeneratorSpec::default(),
            findings_density: FindingsDensity::default(),
            seed: 7,
            policy: Policy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub kb_seed: u64,
    pub findings_seed: u64,
    pub agree: bool,
    pub op_count_comprehensive: u64,
    pub op_count_reduced: u64,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub kb_seed: u64,
    pub findings_seed: u64,
    pub treatments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub n_cases: usize,
    pub n_agreements: usize,
    pub agreement_rate: Option<f64>,
    pub disagreement_cases: Vec<Disagreement>,
    pub mean_op_count_comprehensive: Option<f64>,
    pub mean_op_count_reduced: Option<f64>,
    pub cases: Vec<CaseRecord>,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub net: Network,
    pub findings: Findings,
    pub comprehensive: TreatmentAssignment,
    pub reduced: TreatmentAssignment,
    pub cost: CostReport,
}

impl CaseOutcome {
    pub fn differing(&self) -> Vec<String> {
        disagreements(&self.comprehensive, &self.reduced)
    }
}

fn check_experiment_kb(spec: &GeneratorSpec) -> Result<()> {
    if spec.n_diseases > MAX_EXPERIMENT_DISEASES || spec.n_treatments > MAX_EXPERIMENT_TREATMENTS {
        return Err(Error::InfeasibleSpec(format!(
            "experiments allow at most {MAX_EXPERIMENT_DISEASES} diseases and {MAX_EXPERIMENT_TREATMENTS} treatments"
        )));
    }
    Ok(())
}

/// Regenerates and reruns one case from its seeds.
pub fn run_case(spec: &SoundnessSpec, kb_seed: u64, findings_seed: u64) -> Result<CaseOutcome> {
    check_experiment_kb(&spec.kb)?;
    let kb = generate_kb(&GeneratorSpec {
        seed: kb_seed,
        ..spec.kb.clone()
    })?;
    let net = Network::new(kb)?;
    let findings = random_findings(&net, spec.findings_density, findings_seed)?;
    let thresholds = threshold_table(&net)?;
    compare(net, findings, &thresholds, &spec.policy)
}

fn compare(net: Network, findings: Findings, thresholds: &ThresholdTable, policy: &Policy) -> Result<CaseOutcome> {
    let evidence = net.evidence(&findings)?;
    let comprehensive = solve_comprehensive(&net, &evidence, &ExactEngine::auto(&evidence))?;
    let formulation = formulate(&net, &findings, thresholds, policy)?;
    let cost = CostReport {
        op_count_reduced: formulation.recommendation.op_count,
        op_count_comprehensive: comprehensive.op_count,
        nodes_before: net.decision_node_count(),
        nodes_after: formulation.model.node_count(),
    };
    Ok(CaseOutcome {
        reduced: formulation.recommendation.assignment(),
        comprehensive: comprehensive.best,
        net,
        findings,
        cost,
    })
}

/// Runs `n_cases` generated cases and compares full treatment assignments.
/// Per-case seeds come from the master seed, so reports are reproducible.
pub fn run_soundness_experiment(spec: &SoundnessSpec) -> Result<SoundnessReport> {
    check_experiment_kb(&spec.kb)?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cases = Vec::with_capacity(spec.n_cases);
    let mut disagreement_cases = Vec::new();
    for _ in 0..spec.n_cases {
        let kb_seed = master.next_u64();
        let findings_seed = master.next_u64();
        let outcome = run_case(spec, kb_seed, findings_seed)?;
        let differing = outcome.differing();
        if !differing.is_empty() {
            disagreement_cases.push(Disagreement {
                kb_seed,
                findings_seed,
                treatments: differing.clone(),
            });
        }
        cases.push(CaseRecord {
            kb_seed,
            findings_seed,
            agree: differing.is_empty(),
            op_count_comprehensive: outcome.cost.op_count_comprehensive,
            op_count_reduced: outcome.cost.op_count_reduced,
            nodes_before: outcome.cost.nodes_before,
            nodes_after: outcome.cost.nodes_after,
        });
    }
    let n = cases.len();
    let mean = |f: fn(&CaseRecord) -> u64| (n > 0).then(|| cases.iter().map(|c| f(c) as f64).sum::<f64>() / n as f64);
    let n_agreements = cases.iter().filter(|c| c.agree).count();
    Ok(SoundnessReport {
        n_cases: n,
        n_agreements,
        agreement_rate: (n > 0).then(|| n_agreements as f64 / n as f64),
        mean_op_count_comprehensive: mean(|c| c.op_count_comprehensive),
        mean_op_count_reduced: mean(|c| c.op_count_reduced),
        disagreement_cases,
        cases,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub op_count_reduced: u64,
    pub op_count_comprehensive: u64,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

/// Expected-utility evaluations and decision-model node counts before and
/// after reduction.
pub fn cost_report(net: &Network, findings: &Findings, thresholds: &ThresholdTable, policy: &Policy) -> Result<CostReport> {
    Ok(compare(net.clone(), findings.clone(), thresholds, policy)?.cost)
}

/// A verified case where pruning clamps a treatment the full model would give.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsoundCase {
    pub seed: u64,
    pub kb: KnowledgeBase,
    pub findings: Findings,
    pub treatment: String,
    pub comprehensive_best: TreatmentAssignment,
    pub reduced_best: TreatmentAssignment,
    /// Per disease, an unobserved manifestation that, marked present,
    /// pushes that disease's posterior over its threshold.
    pub strengthening: BTreeMap<String, String>,
}

impl UnsoundCase {
    pub fn network(&self) -> Result<Network> {
        Network::new(self.kb.clone())
    }

    /// Re-solves both ways: (comprehensive, reduced).
    pub fn replay_with(&self, kb: KnowledgeBase, findings: &Findings) -> Result<(TreatmentAssignment, TreatmentAssignment)> {
        let net = Network::new(kb)?;
        let thresholds = threshold_table(&net)?;
        let outcome = compare(net, findings.clone(), &thresholds, &unsound_policy())?;
        Ok((outcome.comprehensive, outcome.reduced))
    }

    pub fn replay(&self) -> Result<(TreatmentAssignment, TreatmentAssignment)> {
        self.replay_with(self.kb.clone(), &self.findings)
    }

    /// The case findings plus the strengthening finding for `disease`.
    pub fn strengthened(&self, disease: &str) -> Result<Findings> {
        let m = self.strengthening.get(disease).ok_or_else(|| Error::UnknownId {
            kind: "disease",
            id: disease.to_string(),
        })?;
        let mut f = self.findings.clone();
        f.set_present(m.clone());
        Ok(f)
    }

    /// The same KB with every treated-while-healthy utility raised to 1.
    pub fn without_side_effects(&self) -> KnowledgeBase {
        let mut kb = self.kb.clone();
        for u in &mut kb.subvalues {
            if let Some(v) = u.table.get_mut("01") {
                *v = 1.0;
            }
        }
        kb
    }
}

fn unsound_policy() -> Policy {
    Policy::with_method(PolicyMethod::Oracle)
}

fn utility_table(healthy_treated: f64, sick_untreated: f64, sick_treated: f64) -> BTreeMap<String, f64> {
    [("00", 1.0), ("01", healthy_treated), ("10", sick_untreated), ("11", sick_treated)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Leak that makes one present finding move a disease from `prior` to
/// posterior `target`, given link strength `strength`.
fn leak_for_posterior(prior: f64, strength: f64, target: f64) -> Option<f64> {
    let odds = target / (1.0 - target);
    let denom = odds * (1.0 - prior) - prior * (1.0 - strength);
    let leak = prior * strength / denom;
    (denom > 0.0 && (0.0..1.0).contains(&leak)).then_some(leak)
}

const TREATMENT: &str = "tx";
const DISEASES: [&str; 2] = ["da", "db"];

fn two_disease_kb(priors: [f64; 2], strengths: [f64; 2], leaks: [f64; 2], tables: [[f64; 3]; 2]) -> KnowledgeBase {
    let mut kb = KnowledgeBase {
        version: FORMAT_VERSION,
        diseases: vec![],
        manifestations: vec![],
        treatments: vec![Treatment {
            id: TREATMENT.into(),
            name: "Treatment for both".into(),
            treats: DISEASES.iter().map(|d| d.to_string()).collect(),
        }],
        subvalues: vec![],
    };
    for k in 0..2 {
        let d = DISEASES[k];
        kb.diseases.push(Disease {
            id: d.into(),
            name: format!("Disease {}", d.to_uppercase()),
            prior: priors[k],
        });
        kb.manifestations.push(Manifestation {
            id: format!("m_{d}"),
            name: format!("Weak sign of {d}"),
            leak: leaks[k],
            links: vec![Link {
                disease: d.into(),
                strength: strengths[k],
            }],
        });
        kb.manifestations.push(Manifestation {
            id: format!("s_{d}"),
            name: format!("Pathognomonic sign of {d}"),
            leak: 0.0,
            links: vec![Link {
                disease: d.into(),
                strength: 0.99,
            }],
        });
        let [h, s, b] = tables[k];
        kb.subvalues.push(Subvalue {
            id: format!("u_{d}"),
            disease_parents: vec![d.into()],
            treatment_parents: vec![TREATMENT.into()],
            table: utility_table(h, s, b),
        });
    }
    kb.canonical()
}

/// Builds a treatment that treats two diseases and has side effects, with
/// evidence putting each disease just under its own threshold: pruning
/// clamps the treatment, yet the combined benefit makes treating optimal.
/// Only returns after re-solving both ways confirms the disagreement.
pub fn find_unsound_case(seed: u64) -> Result<UnsoundCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let tables = [0, 1].map(|_| {
            let h = rng.random_range(0.92..0.97);
            let s = rng.random_range(0.3..0.6);
            let b = h * (s + (1.0 - s) * rng.random_range(0.85..1.0));
            [h, s, b]
        });
        let strengths = [0, 1].map(|_| rng.random_range(0.6..0.95));
        let margin = [0, 1].map(|_| rng.random_range(0.01..0.05));

        // Thresholds depend only on utilities; compute them on a draft KB.
        let draft = Network::new(two_disease_kb([0.01; 2], strengths, [0.0; 2], tables))?;
        let draft_thresholds = threshold_table(&draft)?;
        let mut priors = [0.0; 2];
        let mut leaks = [0.0; 2];
        let mut feasible = true;
        for k in 0..2 {
            let Some(Some(p_star)) = draft_thresholds.get(TREATMENT, DISEASES[k]) else {
                feasible = false;
                break;
            };
            let target = p_star * (1.0 - margin[k]);
            priors[k] = target * rng.random_range(0.1..0.5);
            match leak_for_posterior(priors[k], strengths[k], target) {
                Some(l) => leaks[k] = l,
                None => feasible = false,
            }
        }
        if !feasible {
            continue;
        }

        let kb = two_disease_kb(priors, strengths, leaks, tables);
        let findings = Findings::new(DISEASES.iter().map(|d| format!("m_{d}")), Vec::<String>::new())?;
        let net = Network::new(kb.clone())?;
        let thresholds = threshold_table(&net)?;
        let formulation = formulate(&net, &findings, &thresholds, &unsound_policy())?;
        let clamped = formulation
            .prune
            .iter()
            .any(|p| p.treatment == TREATMENT && p.status == PruneStatus::ClampedFalse);
        let outcome = compare(net, findings.clone(), &thresholds, &unsound_policy())?;
        if clamped && outcome.comprehensive.get(TREATMENT) == Some(true) && outcome.reduced.get(TREATMENT) == Some(false)
        {
            return Ok(UnsoundCase {
                seed,
                kb,
                findings,
                treatment: TREATMENT.into(),
                comprehensive_best: outcome.comprehensive,
                reduced_best: outcome.reduced,
                strengthening: DISEASES.iter().map(|d| (d.to_string(), format!("s_{d}"))).collect(),
            });
        }
    }
    Err(Error::Verification(format!("no verified disagreement for seed {seed}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leak_solution_hits_the_target_posterior() {
        let (prior, strength, target) = (0.02, 0.8, 0.2);
        let leak = leak_for_posterior(prior, strength, target).unwrap();
        let present_if_sick = 1.0 - (1.0 - leak) * (1.0 - strength);
        let post = prior * present_if_sick / (prior * present_if_sick + (1.0 - prior) * leak);
        assert!((post - target).abs() < 1e-12);
    }

    #[test]
    fn empty_experiment() {
        let report = run_soundness_experiment(&SoundnessSpec {
            n_cases: 0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(report.n_cases, 0);
        assert!(report.cases.is_empty());
        assert_eq!(report.agreement_rate, None);
    }

    #[test]
    fn oversized_experiment_is_rejected() {
        let spec = SoundnessSpec {
            kb: GeneratorSpec::new(13, 4, 2, 0),
            ..Default::default()
        };
        assert!(matches!(run_soundness_experiment(&spec), Err(Error::InfeasibleSpec(_))));
    }
}
