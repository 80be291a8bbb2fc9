//! Quickscore: exact noisy-OR posteriors by inclusion-exclusion over the
//! positive findings.
//!
//! P(F+ present, F- absent) = sum over S subset of F+ of (-1)^|S| times
//! P(S and F- all absent), and each inner probability factorizes over the
//! marginally independent diseases. Negative findings only rescale
//! per-disease factors, so they are folded in once up front.
//!
//! The alternating sum cancels heavily when the positive findings are
//! unlikely, so terms are accumulated in double-double precision.

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

use super::{check_joint_subset, Method, PosteriorReport};

/// Above this many negative findings their leak product is summed in log space.
const LOG_SPACE_NEGATIVES: usize = 64;

/// Relative size below which the alternating sum is indistinguishable from 0.
const CANCELLATION_FLOOR: f64 = 1e-25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quickscore {
    pub max_positive: usize,
}

impl Default for Quickscore {
    fn default() -> Self {
        Quickscore { max_positive: 20 }
    }
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn one_minus(x: f64) -> TwoFloat {
    TwoFloat::new_sub(1.0, x)
}

fn to_f64(x: TwoFloat) -> f64 {
    x.hi() + x.lo()
}

/// Per-case precomputation shared by the marginal and joint passes.
struct Terms {
    k: usize,
    prior: Vec<TwoFloat>,
    not_prior: Vec<TwoFloat>,
    /// Product of (1 - strength) over the negative findings, per disease.
    negative: Vec<TwoFloat>,
    /// (positive-finding bit, 1 - strength), per disease.
    positive_links: Vec<Vec<(usize, TwoFloat)>>,
    positive_leak: Vec<TwoFloat>,
    /// ln of the negative findings' shared leak factor, factored out of every term.
    log_negative_leak: f64,
}

impl Terms {
    fn new(net: &Network, evidence: &Evidence) -> Self {
        let n = net.n_diseases();
        let ms = net.manifestations();
        let mut negative = vec![dd(1.0); n];
        for &m in &evidence.absent {
            for &(d, s) in &ms[m].links {
                negative[d] = negative[d] * one_minus(s);
            }
        }
        let log_negative_leak = if evidence.absent.len() > LOG_SPACE_NEGATIVES {
            evidence.absent.iter().map(|&m| (-ms[m].leak).ln_1p()).sum()
        } else {
            let product = evidence
                .absent
                .iter()
                .fold(dd(1.0), |acc, &m| acc * one_minus(ms[m].leak));
            to_f64(product).ln()
        };
        let mut positive_links = vec![Vec::new(); n];
        for (bit, &m) in evidence.present.iter().enumerate() {
            for &(d, s) in &ms[m].links {
                positive_links[d].push((bit, one_minus(s)));
            }
        }
        Terms {
            k: evidence.present.len(),
            prior: net.priors().iter().map(|&p| dd(p)).collect(),
            not_prior: net.priors().iter().map(|&p| one_minus(p)).collect(),
            negative,
            positive_links,
            positive_leak: evidence.present.iter().map(|&m| one_minus(ms[m].leak)).collect(),
            log_negative_leak,
        }
    }

    /// Visits every inclusion-exclusion term with its sign, its leak factor,
    /// and per disease the "absent-compatible" factor `f` and the
    /// disease-present part `on` (so `f = 1 - p + on`).
    fn for_each(&self, mut visit: impl FnMut(bool, TwoFloat, &[TwoFloat], &[TwoFloat])) {
        let n = self.prior.len();
        let mut f = vec![dd(0.0); n];
        let mut on = vec![dd(0.0); n];
        for mask in 0usize..1 << self.k {
            let negative_sign = mask.count_ones() % 2 == 1;
            let mut leak = dd(1.0);
            for (bit, l) in self.positive_leak.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    leak = leak * *l;
                }
            }
            for j in 0..n {
                let mut q = self.negative[j];
                for &(bit, w) in &self.positive_links[j] {
                    if mask >> bit & 1 == 1 {
                        q = q * w;
                    }
                }
                on[j] = self.prior[j] * q;
                f[j] = self.not_prior[j] + on[j];
            }
            visit(negative_sign, leak, &f, &on);
        }
    }
}

impl Quickscore {
    fn check(&self, evidence: &Evidence) -> Result<()> {
        if evidence.present.len() > self.max_positive {
            return Err(Error::CapExceeded {
                what: "positive findings for Quickscore",
                limit: self.max_positive,
                actual: evidence.present.len(),
            });
        }
        Ok(())
    }

    pub fn posteriors(&self, net: &Network, evidence: &Evidence) -> Result<PosteriorReport> {
        self.check(evidence)?;
        let n = net.n_diseases();
        let terms = Terms::new(net, evidence);
        let mut z = dd(0.0);
        let mut z_abs = 0.0;
        let mut num = vec![dd(0.0); n];
        let mut suffix = vec![dd(1.0); n + 1];

        terms.for_each(|negative_sign, leak, f, on| {
            for j in (0..n).rev() {
                suffix[j] = suffix[j + 1] * f[j];
            }
            let term = leak * suffix[0];
            z_abs += to_f64(term).abs();
            z = if negative_sign { z - term } else { z + term };
            let mut prefix = leak;
            for j in 0..n {
                let t = prefix * on[j] * suffix[j + 1];
                num[j] = if negative_sign { num[j] - t } else { num[j] + t };
                prefix = prefix * f[j];
            }
        });

        let z_value = to_f64(z);
        if !(z_value > CANCELLATION_FLOOR * z_abs) {
            return Err(Error::ZeroLikelihood);
        }
        let post: Vec<f64> = num.iter().map(|x| to_f64(*x / z)).collect();
        let outer = 1u64 << terms.k;
        Ok(PosteriorReport {
            method: Method::Quickscore,
            budget_used: outer,
            op_count: outer * n as u64 + (evidence.absent.len() * n) as u64,
            outer_terms: Some(outer),
            evidence_likelihood: Some(z_value * terms.log_negative_leak.exp()),
            posteriors: PosteriorReport::points(net, &post),
        })
    }

    /// Joint posterior over `subset`, each subset disease clamped in turn
    /// inside the same inclusion-exclusion pass.
    pub fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>> {
        self.check(evidence)?;
        check_joint_subset(net, subset)?;
        let n = net.n_diseases();
        let mut in_subset = vec![false; n];
        for &d in subset {
            in_subset[d] = true;
        }
        let terms = Terms::new(net, evidence);
        let size = 1usize << subset.len();
        let mut acc = vec![dd(0.0); size];
        let mut table = vec![dd(0.0); size];
        let mut abs_total = 0.0;

        terms.for_each(|negative_sign, leak, f, on| {
            let mut rest = leak;
            for j in (0..n).filter(|&j| !in_subset[j]) {
                rest = rest * f[j];
            }
            table[0] = rest;
            for (b, &d) in subset.iter().enumerate() {
                let half = 1usize << b;
                for s in 0..half {
                    let base = table[s];
                    table[s | half] = base * on[d];
                    table[s] = base * terms.not_prior[d];
                }
            }
            for (a, t) in acc.iter_mut().zip(&table) {
                abs_total += to_f64(*t).abs();
                *a = if negative_sign { *a - *t } else { *a + *t };
            }
        });

        let z = acc.iter().fold(dd(0.0), |s, a| s + *a);
        if !(to_f64(z) > CANCELLATION_FLOOR * abs_total) {
            return Err(Error::ZeroLikelihood);
        }
        Ok(acc.iter().map(|a| to_f64(*a / z).max(0.0)).collect())
    }
}

impl super::JointPosterior for Quickscore {
    fn joint(&self, net: &Network, evidence: &Evidence, subset: &[usize]) -> Result<Vec<f64>> {
        Quickscore::joint(self, net, evidence, subset)
    }
}
