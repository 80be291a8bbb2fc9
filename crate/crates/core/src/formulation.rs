//! Reduction of the comprehensive model to a patient-specific one.
//!
//! Treatments whose every treated disease has a posterior upper bound below
//! its threshold are clamped false. Subvalue nodes left without an active
//! decision parent are dropped, and so is every disease that no surviving
//! subvalue node depends on. The remaining active treatments split into
//! components (linked by shared subvalue nodes) that are solved separately.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::decision::{argmax, check_solve_cap, FactorScope, ThresholdTable};
use crate::error::{Error, Result};
use crate::inference::{
    bounded_posteriors, mc_posteriors, ExactEngine, JointPosterior, Method, Oracle, PosteriorReport, Quickscore,
    SampleBudget,
};
use crate::kb::Findings;
use crate::network::{Evidence, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PruneStatus {
    ClampedFalse,
    Active,
}

/// Upper posterior bound against threshold for one treated disease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Justification {
    pub disease: String,
    pub upper: f64,
    /// `None` when the pair can never warrant treatment.
    pub threshold: Option<f64>,
}

impl Justification {
    /// True when this pair alone cannot warrant the treatment.
    pub fn below(&self) -> bool {
        match self.threshold {
            Some(t) => self.upper < t,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneDecision {
    pub treatment: String,
    pub status: PruneStatus,
    pub justification: Vec<Justification>,
}

/// Clamps a treatment false iff every treated disease's posterior upper
/// bound is strictly below the pair's threshold. Point estimates act as
/// degenerate intervals; lower bounds are never consulted.
pub fn prune_treatments(
    net: &Network,
    thresholds: &ThresholdTable,
    posteriors: &PosteriorReport,
) -> Result<Vec<PruneDecision>> {
    thresholds.check_fresh(net)?;
    (0..net.n_treatments())
        .map(|t| {
            let tid = net.treatment_id(t);
            let justification = net
                .treats(t)
                .iter()
                .map(|&d| {
                    let did = net.disease_id(d);
                    let threshold = thresholds.get(tid, did).ok_or_else(|| {
                        Error::InvalidArgument(format!("threshold table has no entry for {tid}:{did}"))
                    })?;
                    Ok(Justification {
                        disease: did.to_string(),
                        upper: posteriors.get(did)?.upper(),
                        threshold,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let status = if justification.iter().all(Justification::below) {
                PruneStatus::ClampedFalse
            } else {
                PruneStatus::Active
            };
            Ok(PruneDecision {
                treatment: tid.to_string(),
                status,
                justification,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub treatments: Vec<String>,
    pub subvalues: Vec<String>,
    pub diseases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kb_hash: String,
    pub findings_hash: String,
    pub thresholds_hash: String,
    pub method: Method,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub active_treatments: BTreeSet<String>,
    pub active_subvalues: BTreeSet<String>,
    pub retained_diseases: BTreeSet<String>,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ReducedModel {
    /// Same counting rule as [`Network::decision_node_count`]; the value
    /// node counts only when something still feeds it.
    pub fn node_count(&self) -> usize {
        let value_node = usize::from(!self.active_subvalues.is_empty());
        self.active_treatments.len() + self.active_subvalues.len() + self.retained_diseases.len() + value_node
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Applies the two removal steps and groups what remains into components.
pub fn reduce_model(net: &Network, prune: &[PruneDecision]) -> Result<ReducedModel> {
    let t_count = net.n_treatments();
    let mut active = vec![None; t_count];
    for p in prune {
        active[net.treatment(&p.treatment)?] = Some(p.status == PruneStatus::Active);
    }
    let active: Vec<bool> = active
        .into_iter()
        .enumerate()
        .map(|(t, a)| {
            a.ok_or_else(|| Error::InvalidArgument(format!("no prune decision for `{}`", net.treatment_id(t))))
        })
        .collect::<Result<_>>()?;

    // Step 1: a subvalue node survives only with an active decision parent.
    let kept: Vec<usize> = net
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.treatments.iter().any(|&t| active[t]))
        .map(|(i, _)| i)
        .collect();

    let mut parent: Vec<usize> = (0..t_count).collect();
    for &u in &kept {
        let mut parents = net.factors()[u].treatments.iter().copied().filter(|&t| active[t]);
        if let Some(first) = parents.next() {
            for other in parents {
                let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    // Step 2: whatever no surviving subvalue node reaches is dropped.
    let mut groups: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for t in (0..t_count).filter(|&t| active[t]) {
        let root = find(&mut parent, t);
        groups.entry(root).or_default().0.insert(t);
    }
    for &u in &kept {
        let f = &net.factors()[u];
        let t = f.treatments.iter().copied().find(|&t| active[t]).expect("kept node has an active parent");
        let root = find(&mut parent, t);
        let group = groups.get_mut(&root).expect("active treatment has a group");
        group.1.insert(u);
        group.2.extend(f.diseases.iter().copied());
    }

    let components: Vec<Component> = groups
        .into_values()
        .map(|(ts, us, ds)| Component {
            treatments: ts.into_iter().map(|t| net.treatment_id(t).to_string()).collect(),
            subvalues: us.into_iter().map(|u| net.subvalue_id(u).to_string()).collect(),
            diseases: ds.into_iter().map(|d| net.disease_id(d).to_string()).collect(),
        })
        .collect();

    Ok(ReducedModel {
        active_treatments: components.iter().flat_map(|c| c.treatments.iter().cloned()).collect(),
        active_subvalues: components.iter().flat_map(|c| c.subvalues.iter().cloned()).collect(),
        retained_diseases: components.iter().flat_map(|c| c.diseases.iter().cloned()).collect(),
        components,
        provenance: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionSource {
    Pruned,
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDecision {
    pub decision: bool,
    pub source: DecisionSource,
    #[serde(default)]
    pub component: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub treatments: BTreeMap<String, TreatmentDecision>,
    /// Maximized expected utility of each component's own factors.
    pub eu_reduced: Vec<f64>,
    pub op_count: u64,
}

impl Recommendation {
    pub fn assignment(&self) -> crate::decision::TreatmentAssignment {
        crate::decision::TreatmentAssignment(
            self.treatments.iter().map(|(k, v)| (k.clone(), v.decision)).collect(),
        )
    }
}

/// Solves every component on its own, each by exhaustive maximization of
/// the expected product of its subvalue factors; clamped treatments stay
/// false throughout.
pub fn solve_reduced(
    net: &Network,
    evidence: &Evidence,
    model: &ReducedModel,
    engine: &dyn JointPosterior,
) -> Result<Recommendation> {
    let mut treatments: BTreeMap<String, TreatmentDecision> = (0..net.n_treatments())
        .map(|t| {
            (
                net.treatment_id(t).to_string(),
                TreatmentDecision {
                    decision: false,
                    source: DecisionSource::Pruned,
                    component: None,
                },
            )
        })
        .collect();
    let mut eu_reduced = Vec::with_capacity(model.components.len());
    let mut op_count = 0;

    for (c, component) in model.components.iter().enumerate() {
        let wrap = |source: Error| Error::Component {
            component: c,
            source: Box::new(source),
        };
        let members: Vec<usize> = component
            .treatments
            .iter()
            .map(|id| net.treatment(id))
            .collect::<Result<_>>()
            .map_err(wrap)?;
        check_solve_cap(members.len()).map_err(wrap)?;
        let factors = component
            .subvalues
            .iter()
            .map(|id| net.subvalue(id))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let scope = FactorScope::new(net, factors).map_err(wrap)?;
        let joint = scope.joint(net, evidence, engine).map_err(wrap)?;

        let mut state = vec![false; net.n_treatments()];
        let (mask, eu, evaluations) = argmax(members.len(), |mask| {
            for (b, &t) in members.iter().enumerate() {
                state[t] = mask >> b & 1 == 1;
            }
            scope.expected(net, &joint, &state)
        });
        op_count += evaluations;
        eu_reduced.push(eu);
        for (b, &t) in members.iter().enumerate() {
            treatments.insert(
                net.treatment_id(t).to_string(),
                TreatmentDecision {
                    decision: mask >> b & 1 == 1,
                    source: DecisionSource::Solved,
                    component: Some(c),
                },
            );
        }
    }

    Ok(Recommendation {
        treatments,
        eu_reduced,
        op_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMethod {
    /// Quickscore up to `quickscore_max_positive` positive findings, bounds beyond.
    Auto,
    Quickscore,
    Bounds,
    Oracle,
    #[serde(alias = "mc")]
    Montecarlo,
}

impl std::str::FromStr for PolicyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PolicyMethod::Auto),
            "quickscore" => Ok(PolicyMethod::Quickscore),
            "bounds" => Ok(PolicyMethod::Bounds),
            "oracle" => Ok(PolicyMethod::Oracle),
            "montecarlo" | "mc" => Ok(PolicyMethod::Montecarlo),
            other => Err(Error::InvalidArgument(format!("unknown policy method `{other}`"))),
        }
    }
}

/// Which inference feeds pruning, and with what budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policy {
    pub method: PolicyMethod,
    /// States visited by the bounds method.
    pub budget: u64,
    pub samples: u64,
    pub seed: u64,
    /// Permit Monte-Carlo point estimates to stand in for upper bounds.
    pub allow_unsafe_mc: bool,
    pub quickscore_max_positive: usize,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            method: PolicyMethod::Auto,
            budget: 4096,
            samples: 100_000,
            seed: 0,
            allow_unsafe_mc: false,
            quickscore_max_positive: 12,
        }
    }
}

impl Policy {
    pub fn with_method(method: PolicyMethod) -> Self {
        Policy {
            method,
            ..Default::default()
        }
    }

    pub fn infer(&self, net: &Network, evidence: &Evidence) -> Result<PosteriorReport> {
        match self.method {
            PolicyMethod::Auto if evidence.present.len() <= self.quickscore_max_positive => {
                Quickscore::default().posteriors(net, evidence)
            }
            PolicyMethod::Auto | PolicyMethod::Bounds => bounded_posteriors(net, evidence, self.budget),
            PolicyMethod::Quickscore => Quickscore::default().posteriors(net, evidence),
            PolicyMethod::Oracle => Oracle::default().posteriors(net, evidence),
            PolicyMethod::Montecarlo if self.allow_unsafe_mc => mc_posteriors(
                net,
                evidence,
                SampleBudget {
                    n_samples: self.samples,
                    seed: self.seed,
                },
            ),
            PolicyMethod::Montecarlo => Err(Error::UnsafeMethod),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formulation {
    pub posteriors: PosteriorReport,
    pub prune: Vec<PruneDecision>,
    pub model: ReducedModel,
    pub recommendation: Recommendation,
}

/// Inference, pruning, reduction and the per-component solve in one pass.
pub fn formulate(
    net: &Network,
    findings: &Findings,
    thresholds: &ThresholdTable,
    policy: &Policy,
) -> Result<Formulation> {
    thresholds.check_fresh(net)?;
    let evidence = net.evidence(findings)?;
    let posteriors = policy.infer(net, &evidence)?;
    let prune = prune_treatments(net, thresholds, &posteriors)?;
    let mut model = reduce_model(net, &prune)?;
    model.provenance = Some(Provenance {
        kb_hash: net.kb_hash().to_string(),
        findings_hash: findings.content_hash(),
        thresholds_hash: thresholds.content_hash(),
        method: posteriors.method,
        budget: posteriors.budget_used,
    });
    let engine = ExactEngine::auto(&evidence);
    let recommendation = solve_reduced(net, &evidence, &model, &engine)?;
    Ok(Formulation {
        posteriors,
        prune,
        model,
        recommendation,
    })
}

/// Treatment ids whose decisions differ between two assignments.
pub fn disagreements(
    a: &crate::decision::TreatmentAssignment,
    b: &crate::decision::TreatmentAssignment,
) -> Vec<String> {
    a.0.iter()
        .filter(|(k, v)| b.get(k) != Some(**v))
        .map(|(k, _)| k.clone())
        .collect()
}
