//! Posterior disease probabilities given findings.
//!
//! Four routes: full enumeration (the ground-truth oracle), Quickscore
//! (exact, exponential only in the number of positive findings), anytime
//! interval bounds, and likelihood-weighted Monte Carlo.

mod bounds;
mod montecarlo;
mod oracle;
mod quickscore;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

pub use bounds::bounded_posteriors;
pub use montecarlo::mc_posteriors;
pub use oracle::Oracle;
pub use quickscore::Quickscore;

/// Largest disease subset an exact joint posterior may cover.
pub const JOINT_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Quickscore,
    Bounds,
    #[serde(alias = "mc")]
    Montecarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Oracle => "oracle",
            Method::Quickscore => "quickscore",
            Method::Bounds => "bounds",
            Method::Montecarlo => "montecarlo",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "quickscore" => Ok(Method::Quickscore),
            "bounds" => Ok(Method::Bounds),
            "montecarlo" | "mc" => Ok(Method::Montecarlo),
            other => Err(Error::InvalidArgument(format!("unknown inference method `{other}`"))),
        }
    }
}

/// A point estimate, or an interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Posterior {
    Point(f64),
    Interval(f64, f64),
}

impl Posterior {
    pub fn lower(&self) -> f64 {
        match *self {
            Posterior::Point(p) => p,
            Posterior::Interval(lo, _) => lo,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Posterior::Point(p) => p,
            Posterior::Interval(_, hi) => hi,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower() <= p && p <= self.upper()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub method: Method,
    pub budget_used: u64,
    /// Elementary term evaluations.
    pub op_count: u64,
    /// Inclusion-exclusion terms; Quickscore only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_terms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_likelihood: Option<f64>,
    pub posteriors: BTreeMap<String, Posterior>,
}

impl PosteriorReport {
    pub(crate) fn points(net: &Network, values: &[f64]) -> BTreeMap<String, Posterior> {
        values
            .iter()
            .enumerate()
            .map(|(j, p)| (net.disease_id(j).to_string(), Posterior::Point(p.clamp(0.0, 1.0))))
            .collect()
    }

    pub fn get(&self, disease: &str) -> Result<Posterior> {
        self.posteriors
            .get(disease)
            .copied()
            .ok_or_else(|| Error::MissingPosterior(disease.to_string()))
    }

    /// Point value, or the interval midpoint.
    pub fn point(&self, disease: &str) -> Result<f64> {
        let p = self.get(disease)?;
        Ok(0.5 * (p.lower() + p.upper()))
    }

    pub fn is_interval(&self) -> bool {
        self.posteriors.values().any(|p| matches!(p, Posterior::Interval(..)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub n_samples: u64,
    pub seed: u64,
}

/// Exact joint posterior over a subset of diseases.
///
/// The returned vector has `2^subset.len()` entries; bit `k` of the index is
/// the state of `subset[k]`.
pub trait JointPosterior {
    fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>>;
}

/// The exact engines, chosen per call by problem size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactEngine {
    Oracle(Oracle),
    Quickscore(Quickscore),
}

impl ExactEngine {
    /// Quickscore when the positive findings fit its cap, enumeration
    /// otherwise.
    pub fn auto(evidence: &Evidence) -> Self {
        let qs = Quickscore::default();
        if evidence.present.len() <= qs.max_positive {
            ExactEngine::Quickscore(qs)
        } else {
            ExactEngine::Oracle(Oracle::default())
        }
    }
}

impl JointPosterior for ExactEngine {
    fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>> {
        match self {
            ExactEngine::Oracle(o) => o.joint(net, evidence, subset),
            ExactEngine::Quickscore(q) => q.joint(net, evidence, subset),
        }
    }
}

pub(crate) fn check_joint_subset(net: &Network, subset: &[usize]) -> Result<()> {
    if subset.len() > JOINT_CAP {
        return Err(Error::CapExceeded {
            what: "joint posterior subset size",
            limit: JOINT_CAP,
            actual: subset.len(),
        });
    }
    let mut seen = vec![false; net.n_diseases()];
    for &d in subset {
        if d >= net.n_diseases() || std::mem::replace(&mut seen[d], true) {
            return Err(Error::InvalidArgument(format!("bad joint subset {subset:?}")));
        }
    }
    Ok(())
}

/// Exact joint posterior keyed by bitstring (first subset disease first).
pub fn joint_posterior(
    net: &Network,
    evidence: &Evidence,
    subset: &[&str],
    engine: &dyn JointPosterior,
) -> Result<BTreeMap<String, f64>> {
    let idx: Vec<usize> = subset.iter().map(|id| net.disease(id)).collect::<Result<_>>()?;
    let joint = engine.joint(net, evidence, &idx)?;
    let k = idx.len();
    Ok(joint
        .into_iter()
        .enumerate()
        .map(|(state, p)| {
            let key: String = (0..k).map(|b| if state >> b & 1 == 1 { '1' } else { '0' }).collect();
            (key, p)
        })
        .collect())
}

pub fn oracle_posteriors(net: &Network, evidence: &Evidence) -> Result<PosteriorReport> {
    Oracle::default().posteriors(net, evidence)
}

pub fn quickscore_posteriors(net: &Network, evidence: &Evidence) -> Result<PosteriorReport> {
    Quickscore::default().posteriors(net, evidence)
}
