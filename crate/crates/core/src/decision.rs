//! Multiplicative utility, expected-utility maximization and treatment
//! thresholds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{JointPosterior, JOINT_CAP};
use crate::kb::sha256_hex;
use crate::network::{Evidence, Network};

/// EU differences at or below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Most treatments a single exhaustive maximization may range over.
pub const SOLVE_CAP: usize = 16;

/// Treatment id to alternative, total over the KB's treatments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentAssignment(pub BTreeMap<String, bool>);

impl TreatmentAssignment {
    pub fn all_false(net: &Network) -> Self {
        TreatmentAssignment(
            (0..net.n_treatments())
                .map(|t| (net.treatment_id(t).to_string(), false))
                .collect(),
        )
    }

    pub fn from_mask(net: &Network, mask: u64) -> Self {
        TreatmentAssignment(
            (0..net.n_treatments())
                .map(|t| (net.treatment_id(t).to_string(), mask >> t & 1 == 1))
                .collect(),
        )
    }

    /// Dense vector in treatment index order; rejects partial or unknown
    /// assignments.
    pub fn to_vec(&self, net: &Network) -> Result<Vec<bool>> {
        let mut out = vec![None; net.n_treatments()];
        for (id, &v) in &self.0 {
            out[net.treatment(id)?] = Some(v);
        }
        out.into_iter()
            .enumerate()
            .map(|(t, v)| {
                v.ok_or_else(|| {
                    Error::InvalidArgument(format!("assignment is missing treatment `{}`", net.treatment_id(t)))
                })
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<bool> {
        self.0.get(id).copied()
    }

    pub fn true_ids(&self) -> impl Iterator<Item = &str> {
        self.0.iter().filter(|(_, v)| **v).map(|(k, _)| k.as_str())
    }
}

/// Product of every subvalue factor at the given disease and treatment state.
pub fn utility_of_state(net: &Network, diseases: &[bool], treatments: &[bool]) -> f64 {
    net.factors()
        .iter()
        .map(|f| f.value(|d| diseases[d], |t| treatments[t]))
        .product()
}

/// A set of subvalue factors and the union of their disease parents, ready
/// for expectation against a joint posterior over that union.
#[derive(Debug, Clone)]
pub(crate) struct FactorScope {
    factors: Vec<usize>,
    diseases: Vec<usize>,
    position: Vec<usize>,
}

impl FactorScope {
    pub(crate) fn new(net: &Network, factors: Vec<usize>) -> Result<Self> {
        let mut diseases: Vec<usize> = factors
            .iter()
            .flat_map(|&f| net.factors()[f].diseases.iter().copied())
            .collect();
        diseases.sort_unstable();
        diseases.dedup();
        if diseases.len() > JOINT_CAP {
            return Err(Error::CapExceeded {
                what: "disease parents in one expected-utility evaluation",
                limit: JOINT_CAP,
                actual: diseases.len(),
            });
        }
        let mut position = vec![usize::MAX; net.n_diseases()];
        for (k, &d) in diseases.iter().enumerate() {
            position[d] = k;
        }
        Ok(FactorScope {
            factors,
            diseases,
            position,
        })
    }

    pub(crate) fn joint(&self, net: &Network, evidence: &Evidence, engine: &dyn JointPosterior) -> Result<Vec<f64>> {
        engine.joint(net, evidence, &self.diseases)
    }

    /// E[product of the scoped factors] for one treatment state.
    pub(crate) fn expected(&self, net: &Network, joint: &[f64], treatments: &[bool]) -> f64 {
        let mut eu = 0.0;
        for (state, &p) in joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let u: f64 = self
                .factors
                .iter()
                .map(|&f| net.factors()[f].value(|d| state >> self.position[d] & 1 == 1, |t| treatments[t]))
                .product();
            eu += p * u;
        }
        eu
    }
}

/// Masks over `count` treatments in tie-break preference order: fewer true
/// treatments first, then lexicographically smallest set of true indices.
pub(crate) fn preference_order(count: usize) -> Vec<u64> {
    let bits = |m: u64| (0..count).filter(move |b| m >> b & 1 == 1);
    let mut masks: Vec<u64> = (0..1u64 << count).collect();
    masks.sort_by(|&a, &b| {
        a.count_ones()
            .cmp(&b.count_ones())
            .then_with(|| bits(a).cmp(bits(b)))
    });
    masks
}

/// Exhaustive argmax with the shared tie-break; returns (mask, eu, evaluations).
pub(crate) fn argmax(count: usize, mut eval: impl FnMut(u64) -> f64) -> (u64, f64, u64) {
    let mut best = (0u64, f64::NEG_INFINITY);
    let mut evaluations = 0;
    for mask in preference_order(count) {
        let eu = eval(mask);
        evaluations += 1;
        if eu > best.1 + TIE_TOLERANCE {
            best = (mask, eu);
        }
    }
    (best.0, best.1, evaluations)
}

pub(crate) fn check_solve_cap(count: usize) -> Result<()> {
    if count > SOLVE_CAP {
        return Err(Error::CapExceeded {
            what: "treatments in one exhaustive maximization",
            limit: SOLVE_CAP,
            actual: count,
        });
    }
    Ok(())
}

/// Exact expected utility of a full assignment over the whole model.
pub fn expected_utility(
    net: &Network,
    evidence: &Evidence,
    assignment: &TreatmentAssignment,
    engine: &dyn JointPosterior,
) -> Result<f64> {
    let treatments = assignment.to_vec(net)?;
    let scope = FactorScope::new(net, (0..net.factors().len()).collect())?;
    let joint = scope.joint(net, evidence, engine)?;
    Ok(scope.expected(net, &joint, &treatments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComprehensiveSolution {
    pub best: TreatmentAssignment,
    pub eu: f64,
    /// Keyed by one bit per treatment in id order.
    pub eu_by_assignment: BTreeMap<String, f64>,
    /// Expected-utility evaluations performed.
    pub op_count: u64,
}

/// Maximizes expected utility over all `2^t` assignments of the full model.
pub fn solve_comprehensive(
    net: &Network,
    evidence: &Evidence,
    engine: &dyn JointPosterior,
) -> Result<ComprehensiveSolution> {
    let t = net.n_treatments();
    check_solve_cap(t)?;
    let scope = FactorScope::new(net, (0..net.factors().len()).collect())?;
    let joint = scope.joint(net, evidence, engine)?;
    let mut table = BTreeMap::new();
    let mut treatments = vec![false; t];
    let (mask, eu, op_count) = argmax(t, |mask| {
        for (b, v) in treatments.iter_mut().enumerate() {
            *v = mask >> b & 1 == 1;
        }
        let eu = scope.expected(net, &joint, &treatments);
        let key: String = treatments.iter().map(|&v| if v { '1' } else { '0' }).collect();
        table.insert(key, eu);
        eu
    });
    Ok(ComprehensiveSolution {
        best: TreatmentAssignment::from_mask(net, mask),
        eu,
        eu_by_assignment: table,
        op_count,
    })
}

/// Utilities `[U(0,0), U(0,1), U(1,0), U(1,1)]` indexed (disease, treatment)
/// with every other disease and treatment false.
pub fn pair_utilities(net: &Network, treatment: usize, disease: usize) -> [f64; 4] {
    let mut d = vec![false; net.n_diseases()];
    let mut a = vec![false; net.n_treatments()];
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        d[disease] = k >> 1 == 1;
        a[treatment] = k & 1 == 1;
        *slot = utility_of_state(net, &d, &a);
    }
    out
}

/// Lowest disease probability at which treating is strictly better, or
/// `None` when no probability in [0,1] warrants it.
///
/// Both expected utilities are affine in p, so the warranted set is an
/// interval and its infimum is 0, the crossing point, or empty.
pub fn threshold_from_utilities(u: [f64; 4]) -> Option<f64> {
    let [u00, u01, u10, u11] = u;
    let gain_healthy = u01 - u00;
    let gain_sick = u11 - u10;
    if gain_healthy > 0.0 {
        Some(0.0)
    } else if gain_sick > 0.0 {
        // `+ 0.0` normalizes a negative zero.
        Some((-gain_healthy / (gain_sick - gain_healthy)).clamp(0.0, 1.0) + 0.0)
    } else {
        None
    }
}

pub fn is_treating_pair(net: &Network, treatment: usize, disease: usize) -> bool {
    net.treats(treatment).contains(&disease)
}

pub fn compute_threshold(net: &Network, treatment: &str, disease: &str) -> Result<Option<f64>> {
    let t = net.treatment(treatment)?;
    let d = net.disease(disease)?;
    if !is_treating_pair(net, t, d) {
        return Err(Error::NotATreatingPair {
            treatment: treatment.to_string(),
            disease: disease.to_string(),
        });
    }
    Ok(threshold_from_utilities(pair_utilities(net, t, d)))
}

/// Thresholds for every treating pair, keyed `"treatment:disease"`;
/// `None` (serialized `null`) marks an unattainable pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTable {
    pub kb_hash: String,
    pub thresholds: BTreeMap<String, Option<f64>>,
}

pub fn pair_key(treatment: &str, disease: &str) -> String {
    format!("{treatment}:{disease}")
}

impl ThresholdTable {
    pub fn get(&self, treatment: &str, disease: &str) -> Option<Option<f64>> {
        self.thresholds.get(&pair_key(treatment, disease)).copied()
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn check_fresh(&self, net: &Network) -> Result<()> {
        if self.kb_hash != net.kb_hash() {
            return Err(Error::StaleThresholds {
                expected: net.kb_hash().to_string(),
                found: self.kb_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("thresholds serialize");
        s.push('\n');
        s
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), &e))
    }
}

/// Computes the threshold of every treating pair. Independent of findings,
/// so one table serves every case on the same KB.
pub fn threshold_table(net: &Network) -> Result<ThresholdTable> {
    let mut thresholds = BTreeMap::new();
    for t in 0..net.n_treatments() {
        for &d in net.treats(t) {
            let (tid, did) = (net.treatment_id(t), net.disease_id(d));
            thresholds.insert(pair_key(tid, did), compute_threshold(net, tid, did)?);
        }
    }
    Ok(ThresholdTable {
        kb_hash: net.kb_hash().to_string(),
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preference_order_prefers_fewer_then_lexicographic() {
        assert_eq!(preference_order(2), vec![0b00, 0b01, 0b10, 0b11]);
        let order = preference_order(3);
        assert_eq!(order[0], 0);
        assert_eq!(&order[1..4], &[0b001, 0b010, 0b100]);
        // {0,1} < {0,2} < {1,2}
        assert_eq!(&order[4..7], &[0b011, 0b101, 0b110]);
        assert_eq!(order[7], 0b111);
    }

    #[test]
    fn argmax_ties_go_to_the_earlier_preference() {
        let (mask, eu, n) = argmax(2, |m| if m == 0b10 || m == 0b01 { 0.9 } else { 0.5 });
        assert_eq!((mask, eu, n), (0b01, 0.9, 4));
        let (mask, _, _) = argmax(1, |_| 0.7);
        assert_eq!(mask, 0);
    }

    #[test]
    fn threshold_cases() {
        let p = threshold_from_utilities([1.0, 0.9, 0.2, 0.95]).unwrap();
        assert!((p - 0.1 / 0.85).abs() < 1e-15);
        assert_eq!(threshold_from_utilities([1.0, 1.0, 0.2, 1.0]), Some(0.0));
        assert_eq!(threshold_from_utilities([1.0, 0.9, 0.5, 0.5]), None);
        // Treating is worse when sick too.
        assert_eq!(threshold_from_utilities([1.0, 0.9, 0.6, 0.5]), None);
        // Crossing exactly at p = 1 is never strictly better inside [0,1].
        assert_eq!(threshold_from_utilities([1.0, 1.0, 0.5, 0.5]), None);
    }
}
