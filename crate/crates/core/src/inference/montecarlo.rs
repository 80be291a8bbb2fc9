//! Likelihood weighting. Findings are leaves, so each sample draws the
//! diseases from their priors and is weighted by P(findings | sample).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

use super::{Method, PosteriorReport, SampleBudget};

pub fn mc_posteriors(net: &Network, evidence: &Evidence, budget: SampleBudget) -> Result<PosteriorReport> {
    if budget.n_samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let n = net.n_diseases();
    let priors = net.priors();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut state = vec![false; n];
    let mut total = 0.0;
    let mut on = vec![0.0; n];
    for _ in 0..budget.n_samples {
        for (s, &p) in state.iter_mut().zip(priors) {
            *s = rng.random::<f64>() < p;
        }
        let w = net.likelihood(evidence, &state);
        total += w;
        for (acc, _) in on.iter_mut().zip(&state).filter(|(_, s)| **s) {
            *acc += w;
        }
    }
    if total <= 0.0 {
        return Err(Error::AllWeightsZero { samples: budget.n_samples });
    }
    let post: Vec<f64> = on.iter().map(|x| x / total).collect();
    Ok(PosteriorReport {
        method: Method::Montecarlo,
        budget_used: budget.n_samples,
        op_count: budget.n_samples * (n + evidence.len()) as u64,
        outer_terms: None,
        evidence_likelihood: Some(total / budget.n_samples as f64),
        posteriors: PosteriorReport::points(net, &post),
    })
}
