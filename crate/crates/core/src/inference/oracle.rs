use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

use super::{check_joint_subset, Method, PosteriorReport};

/// Exact posteriors by enumerating all `2^n` disease states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    pub max_diseases: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { max_diseases: 20 }
    }
}

impl Oracle {
    fn check(&self, net: &Network) -> Result<()> {
        if net.n_diseases() > self.max_diseases {
            return Err(Error::CapExceeded {
                what: "diseases for enumeration",
                limit: self.max_diseases,
                actual: net.n_diseases(),
            });
        }
        Ok(())
    }

    /// Calls `visit(state, P(state) * P(evidence | state))` for every state.
    fn enumerate(&self, net: &Network, evidence: &Evidence, mut visit: impl FnMut(&[bool], f64)) -> Result<u64> {
        self.check(net)?;
        let n = net.n_diseases();
        let priors = net.priors();
        let mut state = vec![false; n];
        let total = 1u64 << n;
        for bits in 0..total {
            let mut weight = 1.0;
            for (j, s) in state.iter_mut().enumerate() {
                *s = bits >> j & 1 == 1;
                weight *= if *s { priors[j] } else { 1.0 - priors[j] };
            }
            weight *= net.likelihood(evidence, &state);
            visit(&state, weight);
        }
        Ok(total)
    }

    pub fn posteriors(&self, net: &Network, evidence: &Evidence) -> Result<PosteriorReport> {
        let n = net.n_diseases();
        let mut z = 0.0;
        let mut on = vec![0.0; n];
        let states = self.enumerate(net, evidence, |state, w| {
            z += w;
            for (acc, _) in on.iter_mut().zip(state).filter(|(_, s)| **s) {
                *acc += w;
            }
        })?;
        if z <= 0.0 {
            return Err(Error::ZeroLikelihood);
        }
        let post: Vec<f64> = on.iter().map(|x| x / z).collect();
        Ok(PosteriorReport {
            method: Method::Oracle,
            budget_used: states,
            op_count: states * (n + evidence.len()) as u64,
            outer_terms: None,
            evidence_likelihood: Some(z),
            posteriors: PosteriorReport::points(net, &post),
        })
    }

    pub fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>> {
        check_joint_subset(net, subset)?;
        let mut joint = vec![0.0; 1 << subset.len()];
        self.enumerate(net, evidence, |state, w| {
            let key = subset.iter().enumerate().fold(0usize, |k, (b, &d)| k | (state[d] as usize) << b);
            joint[key] += w;
        })?;
        let z: f64 = joint.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroLikelihood);
        }
        joint.iter_mut().for_each(|p| *p /= z);
        Ok(joint)
    }
}

impl super::JointPosterior for Oracle {
    fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>> {
        Oracle::joint(self, net, evidence, subset)
    }
}
