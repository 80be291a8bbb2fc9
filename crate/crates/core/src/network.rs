//! Index-based view of a validated knowledge base used by every solver.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kb::{validate_kb, Findings, KnowledgeBase};

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOr {
    pub leak: f64,
    /// (disease index, strength)
    pub links: Vec<(usize, f64)>,
}

impl NoisyOr {
    /// P(manifestation absent | disease state).
    pub fn absent_given(&self, state: &[bool]) -> f64 {
        let mut q = 1.0 - self.leak;
        for &(d, s) in &self.links {
            if state[d] {
                q *= 1.0 - s;
            }
        }
        q
    }
}

/// A subvalue node with parents resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub diseases: Vec<usize>,
    pub treatments: Vec<usize>,
    /// Indexed by the parent bitstring read as a binary number.
    pub table: Vec<f64>,
}

impl Factor {
    pub fn value(&self, disease: impl Fn(usize) -> bool, treatment: impl Fn(usize) -> bool) -> f64 {
        let mut key = 0usize;
        for &d in &self.diseases {
            key = key << 1 | disease(d) as usize;
        }
        for &t in &self.treatments {
            key = key << 1 | treatment(t) as usize;
        }
        self.table[key]
    }
}

/// Findings resolved to manifestation indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    pub present: Vec<usize>,
    pub absent: Vec<usize>,
}

impl Evidence {
    pub fn len(&self) -> usize {
        self.present.len() + self.absent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated knowledge base plus id lookups. Immutable once built.
#[derive(Debug, Clone)]
pub struct Network {
    kb: KnowledgeBase,
    hash: String,
    disease_index: HashMap<String, usize>,
    manifestation_index: HashMap<String, usize>,
    treatment_index: HashMap<String, usize>,
    subvalue_index: HashMap<String, usize>,
    priors: Vec<f64>,
    manifestations: Vec<NoisyOr>,
    treats: Vec<Vec<usize>>,
    factors: Vec<Factor>,
}

impl Network {
    pub fn new(kb: KnowledgeBase) -> Result<Self> {
        let kb = kb.canonical();
        let violations = validate_kb(&kb);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        let index = |ids: Vec<&String>| -> HashMap<String, usize> {
            ids.into_iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
        };
        let disease_index = index(kb.diseases.iter().map(|d| &d.id).collect());
        let manifestation_index = index(kb.manifestations.iter().map(|m| &m.id).collect());
        let treatment_index = index(kb.treatments.iter().map(|t| &t.id).collect());
        let subvalue_index = index(kb.subvalues.iter().map(|u| &u.id).collect());

        let priors = kb.diseases.iter().map(|d| d.prior).collect();
        let manifestations = kb
            .manifestations
            .iter()
            .map(|m| NoisyOr {
                leak: m.leak,
                links: m.links.iter().map(|l| (disease_index[&l.disease], l.strength)).collect(),
            })
            .collect();
        let treats = kb
            .treatments
            .iter()
            .map(|t| t.treats.iter().map(|d| disease_index[d]).collect())
            .collect();
        let factors = kb
            .subvalues
            .iter()
            .map(|u| {
                let width = u.arity();
                let mut table = vec![0.0; 1 << width];
                for (key, value) in &u.table {
                    table[usize::from_str_radix(key, 2).unwrap_or(0)] = *value;
                }
                if width == 0 {
                    table[0] = 1.0;
                }
                Factor {
                    diseases: u.disease_parents.iter().map(|d| disease_index[d]).collect(),
                    treatments: u.treatment_parents.iter().map(|t| treatment_index[t]).collect(),
                    table,
                }
            })
            .collect();

        let hash = kb.content_hash();
        Ok(Network {
            kb,
            hash,
            disease_index,
            manifestation_index,
            treatment_index,
            subvalue_index,
            priors,
            manifestations,
            treats,
            factors,
        })
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn into_kb(self) -> KnowledgeBase {
        self.kb
    }

    pub fn kb_hash(&self) -> &str {
        &self.hash
    }

    pub fn n_diseases(&self) -> usize {
        self.priors.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.treats.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn manifestations(&self) -> &[NoisyOr] {
        &self.manifestations
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Diseases each treatment treats, by index.
    pub fn treats(&self, treatment: usize) -> &[usize] {
        &self.treats[treatment]
    }

    pub fn disease_id(&self, index: usize) -> &str {
        &self.kb.diseases[index].id
    }

    pub fn treatment_id(&self, index: usize) -> &str {
        &self.kb.treatments[index].id
    }

    pub fn subvalue_id(&self, index: usize) -> &str {
        &self.kb.subvalues[index].id
    }

    pub fn manifestation_id(&self, index: usize) -> &str {
        &self.kb.manifestations[index].id
    }

    pub fn disease(&self, id: &str) -> Result<usize> {
        lookup(&self.disease_index, "disease", id)
    }

    pub fn treatment(&self, id: &str) -> Result<usize> {
        lookup(&self.treatment_index, "treatment", id)
    }

    pub fn subvalue(&self, id: &str) -> Result<usize> {
        lookup(&self.subvalue_index, "subvalue", id)
    }

    pub fn manifestation(&self, id: &str) -> Result<usize> {
        lookup(&self.manifestation_index, "manifestation", id)
    }

    pub fn evidence(&self, findings: &Findings) -> Result<Evidence> {
        let resolve = |ids: &std::collections::BTreeSet<String>| -> Result<Vec<usize>> {
            ids.iter().map(|id| self.manifestation(id)).collect()
        };
        Ok(Evidence {
            present: resolve(findings.present())?,
            absent: resolve(findings.absent())?,
        })
    }

    /// Decision-relevant node count of the comprehensive model: diseases,
    /// treatments, subvalue nodes and the overall value node. Findings are
    /// not counted.
    pub fn decision_node_count(&self) -> usize {
        self.n_diseases() + self.n_treatments() + self.factors.len() + 1
    }

    /// P(evidence | disease state).
    pub fn likelihood(&self, evidence: &Evidence, state: &[bool]) -> f64 {
        let mut l = 1.0;
        for &m in &evidence.present {
            l *= 1.0 - self.manifestations[m].absent_given(state);
        }
        for &m in &evidence.absent {
            l *= self.manifestations[m].absent_given(state);
        }
        l
    }
}

fn lookup(map: &HashMap<String, usize>, kind: &'static str, id: &str) -> Result<usize> {
    map.get(id).copied().ok_or_else(|| Error::UnknownId {
        kind,
        id: id.to_string(),
    })
}
