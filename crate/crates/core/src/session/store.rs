use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EditSession, Engine, Feedback, LocationReport, RegionKey, SessionError};
use crate::generator::EditCandidate;
use crate::model::{Edit, ProjectSnapshot, Prompt};

pub const LOG_VERSION: u32 = 1;

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Create {
        v: u32,
        session_id: String,
        snapshot: ProjectSnapshot,
        prompt: Prompt,
    },
    Edit {
        v: u32,
        edit: Edit,
        #[serde(default)]
        prompt: Option<Prompt>,
    },
    Ignore {
        v: u32,
        revision: u64,
        region: RegionKey,
    },
}

fn log_err(e: impl std::fmt::Display) -> SessionError {
    SessionError::Log(e.to_string())
}

/// Applies one event to a session (creating it on `Create`).
fn apply_event(session: &mut Option<EditSession>, ev: SessionEvent, context_lines: usize) -> Result<(), SessionError> {
    match ev {
        SessionEvent::Create { session_id, snapshot, prompt, .. } => {
            *session = Some(EditSession::new(session_id, snapshot, prompt));
        }
        SessionEvent::Edit { edit, prompt, .. } => {
            let s = session.as_mut().ok_or_else(|| log_err("edit before create"))?;
            s.record_edit(edit, prompt, context_lines)?;
        }
        SessionEvent::Ignore { revision, region, .. } => {
            let s = session.as_mut().ok_or_else(|| log_err("ignore before create"))?;
            if revision == s.revision {
                s.ignore(region);
            }
        }
    }
    Ok(())
}

fn read_events(path: &Path) -> Result<Vec<SessionEvent>, SessionError> {
    let f = File::open(path).map_err(log_err)?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(log_err)?;
            serde_json::from_str(&l).map_err(|e| log_err(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Replays a log and returns the location report after every edit event.
pub fn replay_log(engine: &Engine, path: &Path) -> Result<Vec<LocationReport>, SessionError> {
    let mut session = None;
    let mut reports = Vec::new();
    for ev in read_events(path)? {
        let is_edit = matches!(ev, SessionEvent::Edit { .. });
        apply_event(&mut session, ev, engine.config.generator.context_lines)?;
        if is_edit {
            if let Some(s) = &session {
                reports.push(s.recommend_locations(engine)?);
            }
        }
    }
    Ok(reports)
}

struct Cell {
    state: RwLock<EditSession>,
    /// Last report computed, reused to resolve region references.
    report: Mutex<Option<LocationReport>>,
    log: Mutex<Option<File>>,
}

impl Cell {
    fn append(&self, ev: &SessionEvent) -> Result<(), SessionError> {
        let mut guard = self.log.lock().map_err(log_err)?;
        if let Some(f) = guard.as_mut() {
            let line = serde_json::to_string(ev).map_err(log_err)?;
            writeln!(f, "{line}").map_err(log_err)?;
            f.flush().map_err(log_err)?;
        }
        Ok(())
    }
}

/// Thread-safe collection of sessions. Each session admits one writer at a
/// time; reads of one session, and all work on different sessions, proceed
/// in parallel. With a directory, every session is persisted as
/// `<dir>/<session_id>.jsonl`.
pub struct SessionStore {
    engine: Engine,
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Cell>>>,
}

impl SessionStore {
    pub fn in_memory(engine: Engine) -> Self {
        SessionStore {
            engine,
            dir: None,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Opens (creating if needed) a persistent store and replays every log
    /// found in it.
    pub fn open(engine: Engine, dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(log_err)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(log_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            let mut session = None;
            for ev in read_events(&p)? {
                apply_event(&mut session, ev, engine.config.generator.context_lines)?;
            }
            let Some(s) = session else { continue };
            let log = OpenOptions::new().append(true).open(&p).map_err(log_err)?;
            sessions.insert(
                s.session_id.clone(),
                Arc::new(Cell {
                    state: RwLock::new(s),
                    report: Mutex::new(None),
                    log: Mutex::new(Some(log)),
                }),
            );
        }
        Ok(SessionStore {
            engine,
            dir: Some(dir),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn cell(&self, id: &str) -> Result<Arc<Cell>, SessionError> {
        self.sessions
            .read()
            .map_err(log_err)?
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_owned()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().map(|m| m.keys().cloned().collect()).unwrap_or_default();
        ids.sort();
        ids
    }

    /// Starts a session; `session_id` is generated when absent.
    pub fn create(&self, snapshot: ProjectSnapshot, prompt: Prompt, session_id: Option<String>) -> Result<String, SessionError> {
        let id = session_id.unwrap_or_else(|| format!("s{:016x}", rand::rng().random::<u64>()));
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(log_err(format!("invalid session id {id:?}")));
        }
        let mut map = self.sessions.write().map_err(log_err)?;
        if map.contains_key(&id) {
            return Err(log_err(format!("session {id} already exists")));
        }
        let log = match &self.dir {
            Some(d) => Some(File::create(d.join(format!("{id}.jsonl"))).map_err(log_err)?),
            None => None,
        };
        let cell = Arc::new(Cell {
            state: RwLock::new(EditSession::new(id.clone(), snapshot.clone(), prompt.clone())),
            report: Mutex::new(None),
            log: Mutex::new(log),
        });
        cell.append(&SessionEvent::Create {
            v: LOG_VERSION,
            session_id: id.clone(),
            snapshot,
            prompt,
        })?;
        map.insert(id.clone(), cell);
        Ok(id)
    }

    /// Records an accepted edit; returns the new revision.
    pub fn record_edit(&self, id: &str, edit: Edit, prompt: Option<Prompt>) -> Result<u64, SessionError> {
        let cell = self.cell(id)?;
        let mut s = cell.state.write().map_err(log_err)?;
        let rev = s.record_edit(edit.clone(), prompt.clone(), self.engine.config.generator.context_lines)?;
        cell.append(&SessionEvent::Edit {
            v: LOG_VERSION,
            edit,
            prompt,
        })?;
        Ok(rev)
    }

    pub fn snapshot(&self, id: &str) -> Result<(u64, ProjectSnapshot), SessionError> {
        let cell = self.cell(id)?;
        let s = cell.state.read().map_err(log_err)?;
        Ok((s.revision, s.snapshot.clone()))
    }

    pub fn recommend_locations(&self, id: &str) -> Result<LocationReport, SessionError> {
        let cell = self.cell(id)?;
        let s = cell.state.read().map_err(log_err)?;
        let report = s.recommend_locations(&self.engine)?;
        *cell.report.lock().map_err(log_err)? = Some(report.clone());
        Ok(report)
    }

    fn current_report(&self, cell: &Cell, s: &EditSession) -> Result<LocationReport, SessionError> {
        let cached = cell.report.lock().map_err(log_err)?.clone();
        match cached {
            Some(r) if r.revision == s.revision && s.ignored.is_empty() => Ok(r),
            _ => {
                let r = s.recommend_locations(&self.engine)?;
                *cell.report.lock().map_err(log_err)? = Some(r.clone());
                Ok(r)
            }
        }
    }

    pub fn recommend_edits(&self, id: &str, region_ref: &str, k: usize) -> Result<Vec<EditCandidate>, SessionError> {
        let cell = self.cell(id)?;
        let s = cell.state.read().map_err(log_err)?;
        let report = self.current_report(&cell, &s)?;
        let region = s.resolve(&report, region_ref)?;
        s.recommend_edits(&self.engine, region, k)
    }

    /// Acts on feedback for a reported region; returns the session revision
    /// afterwards.
    pub fn apply_feedback(&self, id: &str, region_ref: &str, feedback: Feedback) -> Result<u64, SessionError> {
        let cell = self.cell(id)?;
        let mut s = cell.state.write().map_err(log_err)?;
        let report = self.current_report(&cell, &s)?;
        let region = s.resolve(&report, region_ref)?.clone();
        match feedback {
            Feedback::Accepted { content } => {
                let edit = region.to_edit(content)?;
                let rev = s.record_edit(edit.clone(), None, self.engine.config.generator.context_lines)?;
                cell.append(&SessionEvent::Edit {
                    v: LOG_VERSION,
                    edit,
                    prompt: None,
                })?;
                Ok(rev)
            }
            Feedback::Ignored => {
                let key = RegionKey::of(&region);
                s.ignore(key.clone());
                cell.append(&SessionEvent::Ignore {
                    v: LOG_VERSION,
                    revision: s.revision,
                    region: key,
                })?;
                Ok(s.revision)
            }
        }
    }
}
