//! Anytime interval bounds by partial state enumeration.
//!
//! Disease states are visited in descending prior probability. After each
//! visited state, every unvisited state is known to carry prior mass
//! `R = 1 - visited mass` (split exactly by each disease's value) and a
//! likelihood somewhere in `[0, L_max]`. Pushing all residual likelihood to
//! one side of a disease gives a valid interval for its posterior. The
//! reported interval is the intersection over all prefixes, so a larger
//! budget can only narrow it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

use super::{Method, Posterior, PosteriorReport};

/// Outward rounding applied to every reported endpoint.
const PAD: f64 = 1e-13;

/// A set of flipped diseases (positions into the cost-sorted order).
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    cost: f64,
    flipped: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: reverse so the cheapest pops first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.flipped.cmp(&self.flipped))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Enumerates subsets of `costs` (sorted ascending, non-negative) in
/// non-decreasing total cost. Each subset appears exactly once.
struct CheapestSubsets<'a> {
    costs: &'a [f64],
    heap: BinaryHeap<Candidate>,
}

impl<'a> CheapestSubsets<'a> {
    fn new(costs: &'a [f64]) -> Self {
        let mut heap = BinaryHeap::new();
        heap.push(Candidate { cost: 0.0, flipped: Vec::new() });
        CheapestSubsets { costs, heap }
    }
}

impl Iterator for CheapestSubsets<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let c = self.heap.pop()?;
        let n = self.costs.len();
        match c.flipped.last().copied() {
            None if n > 0 => self.heap.push(Candidate { cost: self.costs[0], flipped: vec![0] }),
            Some(i) if i + 1 < n => {
                let mut extended = c.flipped.clone();
                extended.push(i + 1);
                self.heap.push(Candidate {
                    cost: c.cost + self.costs[i + 1],
                    flipped: extended,
                });
                let mut shifted = c.flipped.clone();
                *shifted.last_mut().unwrap() = i + 1;
                self.heap.push(Candidate {
                    cost: c.cost - self.costs[i] + self.costs[i + 1],
                    flipped: shifted,
                });
            }
            _ => {}
        }
        Some(c.flipped)
    }
}

fn total_states(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        1u64 << n
    }
}

/// Interval posteriors after visiting at most `budget` states.
pub fn bounded_posteriors(net: &Network, evidence: &Evidence, budget: u64) -> Result<PosteriorReport> {
    if budget == 0 {
        return Err(Error::InvalidArgument("bounds budget must be at least 1".into()));
    }
    let n = net.n_diseases();
    let priors = net.priors();
    let ms = net.manifestations();

    // Largest likelihood any state can have: every linked cause on for the
    // present findings, all causes off for the absent ones.
    let all_on = vec![true; n];
    let l_max: f64 = evidence
        .present
        .iter()
        .map(|&m| 1.0 - ms[m].absent_given(&all_on))
        .chain(evidence.absent.iter().map(|&m| 1.0 - ms[m].leak))
        .product();
    if l_max <= 0.0 {
        return Err(Error::ZeroLikelihood);
    }

    let mode: Vec<bool> = priors.iter().map(|&p| p > 0.5).collect();
    let flip_cost = |j: usize| {
        let (hi, lo) = if mode[j] { (priors[j], 1.0 - priors[j]) } else { (1.0 - priors[j], priors[j]) };
        hi.ln() - lo.ln()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| flip_cost(a).total_cmp(&flip_cost(b)).then(a.cmp(&b)));
    let costs: Vec<f64> = order.iter().map(|&j| flip_cost(j)).collect();

    let full = total_states(n);
    let limit = budget.min(full);
    let mut z = 0.0;
    let mut mass = 0.0;
    let mut num = vec![0.0; n];
    let mut mass_on = vec![0.0; n];
    let mut lower = vec![0.0f64; n];
    let mut upper = vec![1.0f64; n];
    let mut state = mode.clone();
    let mut visited = 0u64;

    for flipped in CheapestSubsets::new(&costs).take(limit as usize) {
        state.copy_from_slice(&mode);
        for &pos in &flipped {
            let j = order[pos];
            state[j] = !state[j];
        }
        let prior: f64 = state
            .iter()
            .zip(priors)
            .map(|(&s, &p)| if s { p } else { 1.0 - p })
            .product();
        let w = prior * net.likelihood(evidence, &state);
        z += w;
        mass += prior;
        for j in 0..n {
            if state[j] {
                num[j] += w;
                mass_on[j] += prior;
            }
        }
        visited += 1;

        let exhausted = visited == full;
        // The residuals come from cancellation against accumulated sums;
        // widen them by a bound on that accumulation's rounding error.
        let slack = 2.0 * (n as f64 + visited as f64) * f64::EPSILON;
        for j in 0..n {
            let (r_on, r_off) = if exhausted {
                (0.0, 0.0)
            } else {
                (
                    ((priors[j] - mass_on[j]).max(0.0) + slack) * l_max,
                    (((1.0 - priors[j]) - (mass - mass_on[j])).max(0.0) + slack) * l_max,
                )
            };
            let lo_den = z + r_off;
            let lo = if lo_den > 0.0 { num[j] / lo_den } else { 0.0 };
            let hi_den = z + r_on;
            let hi = if hi_den > 0.0 { (num[j] + r_on) / hi_den } else { 1.0 };
            lower[j] = lower[j].max(lo);
            upper[j] = upper[j].min(hi);
        }
    }

    if visited == full && z <= 0.0 {
        return Err(Error::ZeroLikelihood);
    }

    let posteriors = (0..n)
        .map(|j| {
            let lo = (lower[j] - PAD).max(0.0);
            let hi = (upper[j] + PAD).min(1.0).max(lo);
            (net.disease_id(j).to_string(), Posterior::Interval(lo, hi))
        })
        .collect();

    Ok(PosteriorReport {
        method: Method::Bounds,
        budget_used: visited,
        op_count: visited * (n + evidence.len()) as u64,
        outer_terms: None,
        evidence_likelihood: None,
        posteriors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_come_out_cheapest_first_and_exactly_once() {
        let costs = [0.1, 0.5, 0.7, 2.0];
        let all: Vec<Vec<usize>> = CheapestSubsets::new(&costs).collect();
        assert_eq!(all.len(), 16);
        let sums: Vec<f64> = all.iter().map(|s| s.iter().map(|&i| costs[i]).sum()).collect();
        assert!(sums.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{sums:?}");
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
    }

    #[test]
    fn empty_cost_list_yields_the_empty_set_once() {
        assert_eq!(CheapestSubsets::new(&[]).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }
}
