//! Session state machine backed by the append-only event log.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use bodyimage_core::corpus::events::{Event, EventRecord};
use bodyimage_core::corpus::{
    check_words, generate_assignment, score_attitude, Assignment, RobotManifest, WordsProblem, WORDS_PER_ROBOT,
};
use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::{ApiError, ServerError};

pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "state", content = "answered", rename_all = "snake_case")]
pub enum SessionState {
    Created,
    AttitudeDone,
    /// Number of robots answered so far, `1..per_participant`.
    Associating(usize),
    Complete,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::Created => "created",
            SessionState::AttitudeDone => "attitude_done",
            SessionState::Associating(_) => "associating",
            SessionState::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub robots: Vec<String>,
    pub state: SessionState,
    pub answered: usize,
    pub created_at: DateTime<Utc>,
}

impl Session {
    pub fn next_robot(&self) -> Option<&str> {
        match self.state {
            SessionState::AttitudeDone | SessionState::Associating(_) => {
                self.robots.get(self.answered).map(String::as_str)
            }
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    file: File,
    sessions: HashMap<String, Session>,
    created: usize,
    assignment: Assignment,
    capacity: usize,
    last_ts: Option<DateTime<Utc>>,
}

impl Store {
    /// Opens (or creates) the log in `data_dir` and replays it.
    pub fn open(
        data_dir: &Path,
        manifest: &RobotManifest,
        capacity: usize,
        per_participant: usize,
        seed: u64,
    ) -> Result<Self, ServerError> {
        fs::create_dir_all(data_dir).map_err(|e| ServerError::io(data_dir, e))?;
        let path = data_dir.join(LOG_FILE);
        let assignment = generate_assignment(capacity, manifest, per_participant, seed)?;
        let mut store = Self {
            file: OpenOptions::new()
                .create(true)
                .append(true)
                .read(true)
                .open(&path)
                .map_err(|e| ServerError::io(&path, e))?,
            path,
            sessions: HashMap::new(),
            created: 0,
            assignment,
            capacity,
            last_ts: None,
        };
        store.replay()?;
        Ok(store)
    }

    fn replay(&mut self) -> Result<(), ServerError> {
        let reader = BufReader::new(File::open(&self.path).map_err(|e| ServerError::io(&self.path, e))?);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ServerError::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ServerError::CorruptLog { line: i + 1, message };
            let rec = EventRecord::parse_line(&line).map_err(|e| bad(e.to_string()))?;
            self.last_ts = Some(self.last_ts.map_or(rec.ts, |t| t.max(rec.ts)));
            match rec.event {
                Event::SessionCreated { participant, robots } => {
                    self.created += 1;
                    self.sessions.insert(
                        rec.session.clone(),
                        Session {
                            session_id: rec.session,
                            participant_id: participant,
                            robots,
                            state: SessionState::Created,
                            answered: 0,
                            created_at: rec.ts,
                        },
                    );
                }
                event => {
                    let s = self
                        .sessions
                        .get_mut(&rec.session)
                        .ok_or_else(|| bad(format!("event for unknown session `{}`", rec.session)))?;
                    match event {
                        Event::AttitudeSubmitted { .. } => s.state = SessionState::AttitudeDone,
                        Event::AssociationSubmitted { .. } => {
                            s.answered += 1;
                            s.state = SessionState::Associating(s.answered);
                        }
                        Event::SessionCompleted {} => s.state = SessionState::Complete,
                        Event::SessionCreated { .. } => unreachable!(),
                    }
                }
            }
        }
        log::info!("replayed {} sessions from {}", self.sessions.len(), self.path.display());
        Ok(())
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn sessions_created(&self) -> usize {
        self.created
    }

    /// Appends and flushes one event; returns only once the bytes reached the file.
    fn append(&mut self, session: &str, event: Event) -> Result<DateTime<Utc>, ApiError> {
        // keep timestamps non-decreasing in append order even if the clock steps back
        let now = Utc::now();
        let ts = self.last_ts.map_or(now, |t| t.max(now));
        let mut line = EventRecord {
            ts,
            session: session.to_string(),
            event,
        }
        .to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| ApiError::internal(format!("cannot append to event log: {e}")))?;
        self.last_ts = Some(ts);
        Ok(ts)
    }

    pub fn create_session(&mut self) -> Result<Session, ApiError> {
        if self.created >= self.capacity {
            return Err(ApiError::capacity(self.capacity));
        }
        let robots = self.assignment.hands[self.created].clone();
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let participant_id = format!("p{:03}", self.created + 1);
        let ts = self.append(
            &session_id,
            Event::SessionCreated {
                participant: participant_id.clone(),
                robots: robots.clone(),
            },
        )?;
        self.created += 1;
        let session = Session {
            session_id: session_id.clone(),
            participant_id,
            robots,
            state: SessionState::Created,
            answered: 0,
            created_at: ts,
        };
        self.sessions.insert(session_id, session.clone());
        Ok(session)
    }

    fn get_mut(&mut self, id: &str) -> Result<&mut Session, ApiError> {
        self.sessions.get_mut(id).ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn submit_attitude(&mut self, id: &str, items: &[i64]) -> Result<Session, ApiError> {
        let s = self.get_mut(id)?;
        if s.state != SessionState::Created {
            return Err(ApiError::wrong_state(s.state, "attitude"));
        }
        score_attitude(items).map_err(ApiError::invalid)?;
        self.append(id, Event::AttitudeSubmitted { items: items.to_vec() })?;
        let s = self.get_mut(id)?;
        s.state = SessionState::AttitudeDone;
        Ok(s.clone())
    }

    pub fn submit_association(&mut self, id: &str, robot: &str, words: &[String]) -> Result<Session, ApiError> {
        let s = self.get_mut(id)?;
        let expected = match s.state {
            SessionState::AttitudeDone | SessionState::Associating(_) => s.next_robot().map(str::to_string),
            _ => None,
        };
        let Some(expected) = expected else {
            return Err(ApiError::wrong_state(s.state, "association"));
        };
        if robot != expected {
            return Err(ApiError::wrong_robot(robot, &expected));
        }
        let words: Vec<String> = words.iter().map(|w| w.trim().to_string()).collect();
        match check_words(&words) {
            Ok(()) => {}
            Err(WordsProblem::Count(n)) => {
                return Err(ApiError::validation(
                    "server.word_count",
                    format!("expected {WORDS_PER_ROBOT} words, got {n}"),
                ))
            }
            Err(WordsProblem::Blank(pos)) => {
                return Err(ApiError::validation("server.blank_word", format!("word {pos} is blank")))
            }
        }
        let total = s.robots.len();
        self.append(
            id,
            Event::AssociationSubmitted {
                robot: robot.to_string(),
                words,
            },
        )?;
        let s = self.get_mut(id)?;
        s.answered += 1;
        s.state = SessionState::Associating(s.answered);
        if s.answered == total {
            self.append(id, Event::SessionCompleted {})?;
            let s = self.get_mut(id)?;
            s.state = SessionState::Complete;
        }
        Ok(self.get_mut(id)?.clone())
    }

    /// The log exactly as stored.
    pub fn export(&self) -> Result<Vec<u8>, ApiError> {
        fs::read(&self.path).map_err(|e| ApiError::internal(format!("cannot read event log: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(dir: &Path, capacity: usize) -> Store {
        Store::open(dir, &RobotManifest::bundled(), capacity, 10, 7).unwrap()
    }

    fn words() -> Vec<String> {
        ["a", "b", "c", "d", "e", "f"].map(String::from).to_vec()
    }

    #[test]
    fn full_session_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open(dir.path(), 3);
        let s = store.create_session().unwrap();
        assert_eq!(s.robots.len(), 10);
        store.submit_attitude(&s.session_id, &[2; 12]).unwrap();
        for r in s.robots.clone() {
            store.submit_association(&s.session_id, &r, &words()).unwrap();
        }
        assert_eq!(store.session(&s.session_id).unwrap().state, SessionState::Complete);
        let log = String::from_utf8(store.export().unwrap()).unwrap();
        assert_eq!(log.lines().count(), 13);
        drop(store);

        let again = open(dir.path(), 3);
        assert_eq!(again.session(&s.session_id).unwrap().state, SessionState::Complete);
        assert_eq!(again.sessions_created(), 1);
    }

    #[test]
    fn state_machine_rejections_leave_log_alone() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open(dir.path(), 1);
        let s = store.create_session().unwrap();
        let id = s.session_id.clone();
        assert_eq!(
            store.submit_association(&id, &s.robots[0], &words()).unwrap_err().code,
            "server.wrong_state"
        );
        assert_eq!(store.submit_attitude(&id, &[2; 11]).unwrap_err().code, "corpus.attitude_item_count");
        assert_eq!(store.submit_attitude(&id, &[5; 12]).unwrap_err().code, "corpus.item_out_of_range");
        store.submit_attitude(&id, &[2; 12]).unwrap();
        assert_eq!(store.submit_attitude(&id, &[2; 12]).unwrap_err().code, "server.wrong_state");
        assert_eq!(
            store.submit_association(&id, &s.robots[1], &words()).unwrap_err().code,
            "server.wrong_robot"
        );
        let mut blank = words();
        blank[3] = "  ".into();
        assert_eq!(store.submit_association(&id, &s.robots[0], &blank).unwrap_err().code, "server.blank_word");
        store.submit_association(&id, &s.robots[0], &words()).unwrap();
        let before = store.export().unwrap();
        assert_eq!(
            store.submit_association(&id, &s.robots[0], &words()).unwrap_err().code,
            "server.wrong_robot"
        );
        assert_eq!(store.export().unwrap(), before);
        assert_eq!(store.create_session().unwrap_err().code, "server.capacity");
        assert_eq!(store.submit_attitude("nope", &[1; 12]).unwrap_err().code, "server.unknown_session");
    }

    #[test]
    fn words_are_trimmed() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open(dir.path(), 1);
        let s = store.create_session().unwrap();
        store.submit_attitude(&s.session_id, &[0; 12]).unwrap();
        let padded: Vec<String> = words().iter().map(|w| format!("  {w}\t")).collect();
        store.submit_association(&s.session_id, &s.robots[0], &padded).unwrap();
        let log = String::from_utf8(store.export().unwrap()).unwrap();
        assert!(log.lines().last().unwrap().contains(r#""words":["a","b","c","d","e","f"]"#));
    }

    #[test]
    fn balanced_over_capacity() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open(dir.path(), 30);
        let mut counts = HashMap::new();
        for _ in 0..30 {
            for r in store.create_session().unwrap().robots {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
        assert_eq!(counts.len(), 30);
        assert!(counts.values().all(|&c| c == 10));
    }

    #[test]
    fn corrupt_log_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LOG_FILE), "{\"nope\":1}\n").unwrap();
        let err = Store::open(dir.path(), &RobotManifest::bundled(), 1, 10, 0).unwrap_err();
        assert!(matches!(err, ServerError::CorruptLog { line: 1, .. }));
    }
}
