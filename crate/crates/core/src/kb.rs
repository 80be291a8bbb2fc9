//! Knowledge-base types, the on-disk JSON format and structural validation.
//!
//! A knowledge base is the comprehensive decision model: marginally
//! independent binary diseases, noisy-OR manifestations below them, binary
//! treatments, and multiplicative subvalue nodes whose tables hold
//! standard-gamble utilities.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version written by [`save_kb`] and the only one [`validate_kb`] accepts.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disease {
    pub id: String,
    pub name: String,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub disease: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifestation {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub leak: f64,
    #[serde(default)]
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Treatment {
    pub id: String,
    pub name: String,
    pub treats: Vec<String>,
}

/// A multiplicative utility factor.
///
/// Table keys are bitstrings over the parents, disease parents first and
/// then treatment parents, each in declared order: `"01"` means the first
/// parent is false and the second true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subvalue {
    pub id: String,
    #[serde(default)]
    pub disease_parents: Vec<String>,
    #[serde(default)]
    pub treatment_parents: Vec<String>,
    pub table: BTreeMap<String, f64>,
}

impl Subvalue {
    pub fn arity(&self) -> usize {
        self.disease_parents.len() + self.treatment_parents.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeBase {
    pub version: u32,
    pub diseases: Vec<Disease>,
    pub manifestations: Vec<Manifestation>,
    pub treatments: Vec<Treatment>,
    pub subvalues: Vec<Subvalue>,
}

impl KnowledgeBase {
    /// Sorts every node list by id and every link list by disease id.
    ///
    /// Parent order inside subvalue nodes is semantic (it fixes the table
    /// key layout) and is left untouched.
    pub fn canonicalize(&mut self) {
        self.diseases.sort_by(|a, b| a.id.cmp(&b.id));
        self.manifestations.sort_by(|a, b| a.id.cmp(&b.id));
        for m in &mut self.manifestations {
            m.links.sort_by(|a, b| a.disease.cmp(&b.disease));
        }
        self.treatments.sort_by(|a, b| a.id.cmp(&b.id));
        for t in &mut self.treatments {
            t.treats.sort();
        }
        self.subvalues.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn to_canonical_json(&self) -> String {
        let canonical = self.clone().canonical();
        let mut text = serde_json::to_string_pretty(&canonical).expect("KB serializes");
        text.push('\n');
        text
    }

    /// SHA-256 of the canonical JSON text, hex encoded.
    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_canonical_json().as_bytes())
    }

    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        let kb: KnowledgeBase =
            serde_json::from_str(text).map_err(|e| Error::parse(context, &e))?;
        let kb = kb.canonical();
        let violations = validate_kb(&kb);
        if violations.is_empty() {
            Ok(kb)
        } else {
            Err(Error::Invalid(violations))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads, canonicalizes and validates a knowledge base file.
pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    KnowledgeBase::from_json_str(&text, &path.display().to_string())
}

pub fn save_kb(kb: &KnowledgeBase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, kb.to_canonical_json()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    UnsupportedVersion,
    NoDiseases,
    BadIdentifier,
    DuplicateId,
    PriorOpenInterval,
    LeakRange,
    StrengthRange,
    UnknownDisease,
    UnknownTreatment,
    DuplicateLink,
    EmptyTreats,
    DuplicateParent,
    PairNotCoParented,
    NoParents,
    TableKeys,
    UtilityRange,
    UnitNormalization,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("rule serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub rule: Rule,
    pub message: String,
}

impl Violation {
    fn new(node: &str, rule: Rule, message: impl Into<String>) -> Self {
        Violation {
            node: node.to_string(),
            rule,
            message: message.into(),
        }
    }
}

pub fn is_valid_identifier(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Bitstring for `index` over `width` parents, first parent first.
pub fn bitstring(index: usize, width: usize) -> String {
    (0..width)
        .map(|k| {
            if index >> (width - 1 - k) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Checks every structural invariant and returns one entry per violation.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Violation> {
    let mut out = Vec::new();

    if kb.version != FORMAT_VERSION {
        out.push(Violation::new(
            "kb",
            Rule::UnsupportedVersion,
            format!("version {} is not {FORMAT_VERSION}", kb.version),
        ));
    }
    if kb.diseases.is_empty() {
        out.push(Violation::new("kb", Rule::NoDiseases, "at least one disease is required"));
    }

    // Namespaces are disjoint across kinds, so one seen-set covers everything.
    let mut seen: HashSet<&str> = HashSet::new();
    let all_ids = kb
        .diseases
        .iter()
        .map(|d| d.id.as_str())
        .chain(kb.manifestations.iter().map(|m| m.id.as_str()))
        .chain(kb.treatments.iter().map(|t| t.id.as_str()))
        .chain(kb.subvalues.iter().map(|u| u.id.as_str()));
    for id in all_ids {
        if !is_valid_identifier(id) {
            out.push(Violation::new(id, Rule::BadIdentifier, "ids must match [A-Za-z0-9_]+"));
        }
        if !seen.insert(id) {
            out.push(Violation::new(id, Rule::DuplicateId, format!("id `{id}` is declared more than once")));
        }
    }

    let diseases: HashSet<&str> = kb.diseases.iter().map(|d| d.id.as_str()).collect();
    let treatments: HashSet<&str> = kb.treatments.iter().map(|t| t.id.as_str()).collect();

    for d in &kb.diseases {
        if !(d.prior > 0.0 && d.prior < 1.0) {
            out.push(Violation::new(&d.id, Rule::PriorOpenInterval, format!("prior {} is not in (0,1)", d.prior)));
        }
    }

    for m in &kb.manifestations {
        if !(0.0..1.0).contains(&m.leak) {
            out.push(Violation::new(&m.id, Rule::LeakRange, format!("leak {} is not in [0,1)", m.leak)));
        }
        let mut linked = HashSet::new();
        for link in &m.links {
            if !diseases.contains(link.disease.as_str()) {
                out.push(Violation::new(&m.id, Rule::UnknownDisease, format!("links unknown disease `{}`", link.disease)));
            }
            if !linked.insert(link.disease.as_str()) {
                out.push(Violation::new(&m.id, Rule::DuplicateLink, format!("links `{}` twice", link.disease)));
            }
            if !(link.strength > 0.0 && link.strength <= 1.0) {
                out.push(Violation::new(
                    &m.id,
                    Rule::StrengthRange,
                    format!("strength {} to `{}` is not in (0,1]", link.strength, link.disease),
                ));
            }
        }
    }

    let mut co_parented: HashSet<(&str, &str)> = HashSet::new();
    for u in &kb.subvalues {
        for t in &u.treatment_parents {
            for d in &u.disease_parents {
                co_parented.insert((t.as_str(), d.as_str()));
            }
        }
    }

    for t in &kb.treatments {
        if t.treats.is_empty() {
            out.push(Violation::new(&t.id, Rule::EmptyTreats, "treats no disease"));
        }
        let mut listed = HashSet::new();
        for d in &t.treats {
            if !listed.insert(d.as_str()) {
                out.push(Violation::new(&t.id, Rule::DuplicateParent, format!("lists `{d}` twice")));
                continue;
            }
            if !diseases.contains(d.as_str()) {
                out.push(Violation::new(&t.id, Rule::UnknownDisease, format!("treats unknown disease `{d}`")));
            } else if !co_parented.contains(&(t.id.as_str(), d.as_str())) {
                out.push(Violation::new(
                    &t.id,
                    Rule::PairNotCoParented,
                    format!("no subvalue node has both `{}` and `{d}` as parents", t.id),
                ));
            }
        }
    }

    for u in &kb.subvalues {
        validate_subvalue(u, &diseases, &treatments, &mut out);
    }

    out
}

fn validate_subvalue(
    u: &Subvalue,
    diseases: &HashSet<&str>,
    treatments: &HashSet<&str>,
    out: &mut Vec<Violation>,
) {
    if u.arity() == 0 {
        out.push(Violation::new(&u.id, Rule::NoParents, "has no parents"));
        return;
    }
    let mut parents = HashSet::new();
    for d in &u.disease_parents {
        if !diseases.contains(d.as_str()) {
            out.push(Violation::new(&u.id, Rule::UnknownDisease, format!("unknown disease parent `{d}`")));
        }
        if !parents.insert(d.as_str()) {
            out.push(Violation::new(&u.id, Rule::DuplicateParent, format!("parent `{d}` listed twice")));
        }
    }
    for t in &u.treatment_parents {
        if !treatments.contains(t.as_str()) {
            out.push(Violation::new(&u.id, Rule::UnknownTreatment, format!("unknown treatment parent `{t}`")));
        }
        if !parents.insert(t.as_str()) {
            out.push(Violation::new(&u.id, Rule::DuplicateParent, format!("parent `{t}` listed twice")));
        }
    }

    if u.arity() > 24 {
        out.push(Violation::new(&u.id, Rule::TableKeys, format!("{} parents is too many for a table", u.arity())));
        return;
    }
    let width = u.arity();
    let expected: BTreeSet<String> = (0..1usize << width).map(|i| bitstring(i, width)).collect();
    for key in expected.iter() {
        if !u.table.contains_key(key) {
            out.push(Violation::new(&u.id, Rule::TableKeys, format!("missing table entry `{key}`")));
        }
    }
    for (key, value) in &u.table {
        if !expected.contains(key) {
            out.push(Violation::new(&u.id, Rule::TableKeys, format!("unexpected table key `{key}`")));
            continue;
        }
        if !(*value > 0.0 && *value <= 1.0) {
            out.push(Violation::new(&u.id, Rule::UtilityRange, format!("utility {value} at `{key}` is not in (0,1]")));
        }
    }
    if let Some(v) = u.table.get(&"0".repeat(width)) {
        if *v != 1.0 {
            out.push(Violation::new(&u.id, Rule::UnitNormalization, format!("all-false utility is {v}, not 1")));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbStats {
    pub n_diseases: usize,
    pub n_manifestations: usize,
    pub n_arcs: usize,
    pub n_treatments: usize,
    pub n_subvalues: usize,
}

pub fn kb_stats(kb: &KnowledgeBase) -> KbStats {
    KbStats {
        n_diseases: kb.diseases.len(),
        n_manifestations: kb.manifestations.len(),
        n_arcs: kb.manifestations.iter().map(|m| m.links.len()).sum(),
        n_treatments: kb.treatments.len(),
        n_subvalues: kb.subvalues.len(),
    }
}

/// Observed evidence for one case. Construction rejects an id that is both
/// present and absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFindings")]
pub struct Findings {
    present: BTreeSet<String>,
    absent: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFindings {
    #[serde(default)]
    present: BTreeSet<String>,
    #[serde(default)]
    absent: BTreeSet<String>,
}

impl TryFrom<RawFindings> for Findings {
    type Error = Error;

    fn try_from(raw: RawFindings) -> Result<Self> {
        Findings::new(raw.present, raw.absent)
    }
}

impl Findings {
    pub fn new<P, A>(present: P, absent: A) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: Into<String>,
        A: IntoIterator,
        A::Item: Into<String>,
    {
        let present: BTreeSet<String> = present.into_iter().map(Into::into).collect();
        let absent: BTreeSet<String> = absent.into_iter().map(Into::into).collect();
        if let Some(id) = present.intersection(&absent).next() {
            return Err(Error::ConflictingFinding(id.clone()));
        }
        Ok(Findings { present, absent })
    }

    pub fn empty() -> Self {
        Findings::default()
    }

    pub fn present(&self) -> &BTreeSet<String> {
        &self.present
    }

    pub fn absent(&self) -> &BTreeSet<String> {
        &self.absent
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty() && self.absent.is_empty()
    }

    /// Marks `id` present, replacing an earlier absent mark.
    pub fn set_present(&mut self, id: impl Into<String>) {
        let id = id.into();
        self.absent.remove(&id);
        self.present.insert(id);
    }

    pub fn set_absent(&mut self, id: impl Into<String>) {
        let id = id.into();
        self.present.remove(&id);
        self.absent.insert(id);
    }

    pub fn unset(&mut self, id: &str) {
        self.present.remove(id);
        self.absent.remove(id);
    }

    pub fn clear(&mut self) {
        self.present.clear();
        self.absent.clear();
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("findings serialize")
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_canonical_json().as_bytes())
    }

    /// Ids that are not manifestations of `kb`.
    pub fn unknown_ids<'a>(&'a self, kb: &KnowledgeBase) -> Vec<&'a str> {
        let known: HashMap<&str, ()> = kb.manifestations.iter().map(|m| (m.id.as_str(), ())).collect();
        self.present
            .iter()
            .chain(self.absent.iter())
            .filter(|id| !known.contains_key(id.as_str()))
            .map(String::as_str)
            .collect()
    }
}

pub fn load_findings(path: impl AsRef<Path>) -> Result<Findings> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), &e))
}
