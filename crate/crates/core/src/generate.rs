//! Seeded synthetic knowledge bases.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{Disease, KnowledgeBase, Link, Manifestation, Subvalue, Treatment, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n_diseases: usize,
    pub n_manifestations: usize,
    pub n_treatments: usize,
    pub links_per_manifestation: usize,
    pub prior_range: (f64, f64),
    pub strength_range: (f64, f64),
    pub leak_range: (f64, f64),
    /// Each treatment treats between 1 and this many diseases (1 or 2).
    pub max_treats: usize,
    /// Probability that a pair of treatments gets an interaction node.
    pub interaction_prob: f64,
    /// When set, no disease is treated by more than one treatment.
    pub disjoint_treatments: bool,
    /// Utility of being treated while healthy.
    pub side_effect_range: (f64, f64),
    /// Utility of having the disease untreated.
    pub untreated_range: (f64, f64),
    /// Fraction of the untreated loss a treatment recovers.
    pub cure_range: (f64, f64),
    /// Utility of an interacting treatment pair given together.
    pub interaction_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_diseases: 8,
            n_manifestations: 12,
            n_treatments: 4,
            links_per_manifestation: 2,
            prior_range: (0.01, 0.2),
            strength_range: (0.3, 0.95),
            leak_range: (0.0, 0.05),
            max_treats: 2,
            interaction_prob: 0.15,
            disjoint_treatments: false,
            side_effect_range: (0.85, 1.0),
            untreated_range: (0.2, 0.8),
            cure_range: (0.3, 1.0),
            interaction_range: (0.5, 0.95),
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn new(n_diseases: usize, n_manifestations: usize, n_treatments: usize, seed: u64) -> Self {
        GeneratorSpec {
            n_diseases,
            n_manifestations,
            n_treatments,
            seed,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n_diseases == 0 {
            return fail("at least one disease is required".into());
        }
        if self.links_per_manifestation > self.n_diseases {
            return fail(format!(
                "links_per_manifestation {} exceeds n_diseases {}",
                self.links_per_manifestation, self.n_diseases
            ));
        }
        if !(1..=2).contains(&self.max_treats) {
            return fail(format!("max_treats must be 1 or 2, got {}", self.max_treats));
        }
        if self.disjoint_treatments && self.n_treatments > self.n_diseases {
            return fail(format!(
                "{} disjoint treatments need at least as many diseases, have {}",
                self.n_treatments, self.n_diseases
            ));
        }
        let within = |name: &str, (lo, hi): (f64, f64), ok: &dyn Fn(f64) -> bool| -> Result<()> {
            if lo <= hi && ok(lo) && ok(hi) {
                Ok(())
            } else {
                Err(Error::InfeasibleSpec(format!("{name} ({lo}, {hi}) is outside its domain")))
            }
        };
        within("prior_range", self.prior_range, &|p| p > 0.0 && p < 1.0)?;
        within("strength_range", self.strength_range, &|p| p > 0.0 && p <= 1.0)?;
        within("leak_range", self.leak_range, &|p| (0.0..1.0).contains(&p))?;
        within("side_effect_range", self.side_effect_range, &|p| p > 0.0 && p <= 1.0)?;
        within("untreated_range", self.untreated_range, &|p| p > 0.0 && p <= 1.0)?;
        within("cure_range", self.cure_range, &|p| (0.0..=1.0).contains(&p))?;
        within("interaction_range", self.interaction_range, &|p| p > 0.0 && p <= 1.0)?;
        if !(0.0..=1.0).contains(&self.interaction_prob) {
            return fail(format!("interaction_prob {} is not a probability", self.interaction_prob));
        }
        Ok(())
    }
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

fn table(entries: &[f64]) -> BTreeMap<String, f64> {
    let w = entries.len().trailing_zeros() as usize;
    entries
        .iter()
        .enumerate()
        .map(|(i, v)| (crate::kb::bitstring(i, w), *v))
        .collect()
}

/// Builds a random KB; identical specs yield identical KBs.
///
/// Every treatment gets one (disease, treatment) subvalue node per treated
/// disease, plus optional pairwise treatment-interaction nodes.
pub fn generate_kb(spec: &GeneratorSpec) -> Result<KnowledgeBase> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (wd, wm, wt) = (width(spec.n_diseases), width(spec.n_manifestations), width(spec.n_treatments));
    let disease_id = |i: usize| format!("d{i:0wd$}");

    let diseases = (0..spec.n_diseases)
        .map(|i| Disease {
            id: disease_id(i),
            name: format!("Disease {i}"),
            prior: draw(&mut rng, spec.prior_range),
        })
        .collect();

    let manifestations = (0..spec.n_manifestations)
        .map(|i| {
            let leak = draw(&mut rng, spec.leak_range);
            let mut picked = sample(&mut rng, spec.n_diseases, spec.links_per_manifestation).into_vec();
            picked.sort_unstable();
            let links = picked
                .into_iter()
                .map(|d| Link {
                    disease: disease_id(d),
                    strength: draw(&mut rng, spec.strength_range),
                })
                .collect();
            Manifestation {
                id: format!("m{i:0wm$}"),
                name: format!("Manifestation {i}"),
                leak,
                links,
            }
        })
        .collect();

    let mut treatments = Vec::with_capacity(spec.n_treatments);
    let mut subvalues = Vec::new();
    let mut unused: Vec<usize> = (0..spec.n_diseases).collect();
    for t in 0..spec.n_treatments {
        let tid = format!("t{t:0wt$}");
        let want = if spec.max_treats == 2 && rng.random_bool(0.5) { 2 } else { 1 };
        let mut treated: Vec<usize> = if spec.disjoint_treatments {
            // Leave enough unused diseases for the treatments still to come.
            let spare = unused.len() - (spec.n_treatments - t - 1);
            let take = want.min(spare).max(1);
            (0..take)
                .map(|_| unused.swap_remove(rng.random_range(0..unused.len())))
                .collect()
        } else {
            sample(&mut rng, spec.n_diseases, want.min(spec.n_diseases)).into_vec()
        };
        treated.sort_unstable();
        for &d in &treated {
            let side = draw(&mut rng, spec.side_effect_range);
            let untreated = draw(&mut rng, spec.untreated_range);
            let cured = untreated + (1.0 - untreated) * draw(&mut rng, spec.cure_range);
            // Treated-and-diseased combines partial cure with the side effect.
            let treated_sick = (cured * side).max(f64::MIN_POSITIVE);
            subvalues.push(Subvalue {
                id: String::new(),
                disease_parents: vec![disease_id(d)],
                treatment_parents: vec![tid.clone()],
                table: table(&[1.0, side, untreated, treated_sick]),
            });
        }
        treatments.push(Treatment {
            id: tid,
            name: format!("Treatment {t}"),
            treats: treated.into_iter().map(disease_id).collect(),
        });
    }
    for a in 0..spec.n_treatments {
        for b in a + 1..spec.n_treatments {
            if rng.random_bool(spec.interaction_prob) {
                let both = draw(&mut rng, spec.interaction_range);
                subvalues.push(Subvalue {
                    id: String::new(),
                    disease_parents: vec![],
                    treatment_parents: vec![treatments[a].id.clone(), treatments[b].id.clone()],
                    table: table(&[1.0, 1.0, 1.0, both]),
                });
            }
        }
    }
    let wu = width(subvalues.len());
    for (i, u) in subvalues.iter_mut().enumerate() {
        u.id = format!("u{i:0wu$}");
    }

    Ok(KnowledgeBase {
        version: FORMAT_VERSION,
        diseases,
        manifestations,
        treatments,
        subvalues,
    }
    .canonical())
}
