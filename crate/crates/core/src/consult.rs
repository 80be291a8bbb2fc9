//! Incremental consult sessions over one shared KB and threshold table.
//!
//! Every mutation re-runs the whole formulate pipeline on the new findings.
//! A session's request log (create, findings deltas, what-if queries) is
//! enough to rebuild its state exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{expected_utility, ThresholdTable, TreatmentAssignment};
use crate::error::{Error, Result};
use crate::formulation::{formulate, Formulation, Policy, Provenance};
use crate::inference::ExactEngine;
use crate::kb::{kb_stats, sha256_hex, Findings, KbStats};
use crate::network::Network;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FindingsDelta {
    pub set_present: Vec<String>,
    pub set_absent: Vec<String>,
    /// Back to unobserved.
    pub unset: Vec<String>,
    /// Applied before everything else in the delta.
    pub clear: bool,
}

impl FindingsDelta {
    /// Applies clear, then unset, then the present and absent marks.
    pub fn apply(&self, net: &Network, findings: &Findings) -> Result<Findings> {
        for id in self.set_present.iter().chain(&self.set_absent).chain(&self.unset) {
            net.manifestation(id)?;
        }
        if let Some(id) = self.set_present.iter().find(|id| self.set_absent.contains(id)) {
            return Err(Error::ConflictingFinding(id.clone()));
        }
        let mut next = if self.clear { Findings::empty() } else { findings.clone() };
        for id in &self.unset {
            next.unset(id);
        }
        for id in &self.set_present {
            next.set_present(id.clone());
        }
        for id in &self.set_absent {
            next.set_absent(id.clone());
        }
        Ok(next)
    }
}

/// One line of a session's request log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionEvent {
    Create { policy: Policy },
    Findings { delta: FindingsDelta },
    WhatIf { assignment: BTreeMap<String, bool> },
}

/// Everything derived from a session's findings and policy. Two sessions
/// with equal states serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub policy: Policy,
    pub findings: Findings,
    #[serde(flatten)]
    pub formulation: Formulation,
}

impl SessionState {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session state serializes")
    }

    pub fn state_hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.formulation.model.provenance.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state_hash: String,
    pub provenance: Option<Provenance>,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResult {
    /// The queried assignment completed with recommended values.
    pub assignment: TreatmentAssignment,
    pub eu: f64,
    pub recommended_eu: f64,
    pub delta_vs_recommended: f64,
    pub state_hash: String,
    pub provenance: Option<Provenance>,
}

#[derive(Debug)]
struct Session {
    state: SessionState,
    log: Vec<SessionEvent>,
    log_path: Option<PathBuf>,
}

/// Shared KB, thresholds and the live sessions.
#[derive(Debug)]
pub struct Consult {
    net: Network,
    thresholds: ThresholdTable,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log_dir: Option<PathBuf>,
}

fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn new_session_id() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

impl Consult {
    pub fn new(net: Network, thresholds: ThresholdTable) -> Result<Self> {
        thresholds.check_fresh(&net)?;
        Ok(Consult {
            net,
            thresholds,
            sessions: RwLock::new(HashMap::new()),
            log_dir: None,
        })
    }

    /// Appends each session's events to `<dir>/<session id>.ndjson`.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        self.log_dir = Some(dir);
        Ok(self)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn thresholds(&self) -> &ThresholdTable {
        &self.thresholds
    }

    pub fn stats(&self) -> KbStats {
        kb_stats(self.net.kb())
    }

    fn state_for(&self, policy: Policy, findings: Findings) -> Result<SessionState> {
        let formulation = formulate(&self.net, &findings, &self.thresholds, &policy)?;
        Ok(SessionState {
            policy,
            findings,
            formulation,
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    fn record(&self, session: &mut Session, event: SessionEvent) -> Result<()> {
        if let Some(path) = &session.log_path {
            let mut line = serde_json::to_string(&event).expect("event serializes");
            line.push('\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| Error::io(path, e))?;
        }
        session.log.push(event);
        Ok(())
    }

    fn view(id: &str, state: &SessionState) -> SessionView {
        SessionView {
            id: id.to_string(),
            state_hash: state.state_hash(),
            provenance: state.provenance().cloned(),
            state: state.clone(),
        }
    }

    pub fn create_session(&self, policy: Policy) -> Result<SessionView> {
        let state = self.state_for(policy.clone(), Findings::empty())?;
        let id = new_session_id();
        let mut session = Session {
            state,
            log: Vec::new(),
            log_path: self.log_dir.as_ref().map(|d| d.join(format!("{id}.ndjson"))),
        };
        self.record(&mut session, SessionEvent::Create { policy })?;
        let view = Self::view(&id, &session.state);
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get(&self, id: &str) -> Result<SessionView> {
        let session = self.session(id)?;
        let guard = lock(&session);
        Ok(Self::view(id, &guard.state))
    }

    /// Applies the delta and re-formulates. On any error the session keeps
    /// its previous findings and state.
    pub fn update_findings(&self, id: &str, delta: FindingsDelta) -> Result<SessionView> {
        let session = self.session(id)?;
        let mut guard = lock(&session);
        let findings = delta.apply(&self.net, &guard.state.findings)?;
        let state = self.state_for(guard.state.policy.clone(), findings)?;
        self.record(&mut guard, SessionEvent::Findings { delta })?;
        guard.state = state;
        Ok(Self::view(id, &guard.state))
    }

    fn evaluate(&self, state: &SessionState, partial: &BTreeMap<String, bool>) -> Result<WhatIfResult> {
        for t in partial.keys() {
            self.net.treatment(t)?;
        }
        let recommended = state.formulation.recommendation.assignment();
        let mut assignment = recommended.clone();
        assignment.0.extend(partial.iter().map(|(k, v)| (k.clone(), *v)));

        let evidence = self.net.evidence(&state.findings)?;
        let engine = ExactEngine::auto(&evidence);
        let eu = expected_utility(&self.net, &evidence, &assignment, &engine)?;
        let recommended_eu = if assignment == recommended {
            eu
        } else {
            expected_utility(&self.net, &evidence, &recommended, &engine)?
        };
        Ok(WhatIfResult {
            assignment,
            eu,
            recommended_eu,
            delta_vs_recommended: eu - recommended_eu,
            state_hash: state.state_hash(),
            provenance: state.provenance().cloned(),
        })
    }

    /// Exact expected utility of the recommendation with `partial`
    /// overriding some treatments. Never changes the session state.
    pub fn what_if(&self, id: &str, partial: BTreeMap<String, bool>) -> Result<WhatIfResult> {
        let session = self.session(id)?;
        let mut guard = lock(&session);
        let result = self.evaluate(&guard.state, &partial)?;
        self.record(&mut guard, SessionEvent::WhatIf { assignment: partial })?;
        Ok(result)
    }

    pub fn events(&self, id: &str) -> Result<Vec<SessionEvent>> {
        let session = self.session(id)?;
        let guard = lock(&session);
        Ok(guard.log.clone())
    }

    /// Rebuilds a session's final state from its request log without
    /// registering it.
    pub fn replay(&self, events: &[SessionEvent]) -> Result<SessionState> {
        let mut events = events.iter();
        let mut state = match events.next() {
            Some(SessionEvent::Create { policy }) => self.state_for(policy.clone(), Findings::empty())?,
            _ => return Err(Error::InvalidArgument("a session log must start with a create event".into())),
        };
        for event in events {
            match event {
                SessionEvent::Create { .. } => {
                    return Err(Error::InvalidArgument("a session log has exactly one create event".into()))
                }
                SessionEvent::Findings { delta } => {
                    let findings = delta.apply(&self.net, &state.findings)?;
                    state = self.state_for(state.policy.clone(), findings)?;
                }
                SessionEvent::WhatIf { assignment } => {
                    self.evaluate(&state, assignment)?;
                }
            }
        }
        Ok(state)
    }
}

pub fn load_session_log(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::parse(path.display().to_string(), &e)))
        .collect()
}
