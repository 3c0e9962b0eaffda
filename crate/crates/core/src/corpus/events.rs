//! Append-only event log shared by the experiment server and the analysis side.
//!
//! One JSON object per line:
//! `{"ts": <rfc3339>, "session": <id>, "kind": <kind>, "payload": {...}}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{
    check_words, AssociationRecord, AttitudeRecord, CorpusError, RobotManifest, StudyDataset,
    WordsProblem, ATTITUDE_ITEMS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub ts: DateTime<Utc>,
    pub session: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        participant: String,
        robots: Vec<String>,
    },
    AttitudeSubmitted {
        items: Vec<i64>,
    },
    AssociationSubmitted {
        robot: String,
        words: Vec<String>,
    },
    SessionCompleted {},
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionCreated { .. } => "session_created",
            Event::AttitudeSubmitted { .. } => "attitude_submitted",
            Event::AssociationSubmitted { .. } => "association_submitted",
            Event::SessionCompleted {} => "session_completed",
        }
    }
}

impl EventRecord {
    /// Single log line without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }

    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

pub fn load_dataset(path: &Path, manifest: &RobotManifest) -> Result<StudyDataset, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_dataset_from_reader(BufReader::new(file), manifest).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

struct SessionInfo {
    participant: String,
    assigned: usize,
}

pub fn load_dataset_from_reader<R: BufRead>(
    reader: R,
    manifest: &RobotManifest,
) -> Result<StudyDataset, CorpusError> {
    let mut sessions: HashMap<String, SessionInfo> = HashMap::new();
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    let mut attitudes = Vec::new();
    let mut with_attitude = BTreeSet::new();
    let mut associations = Vec::new();
    let mut pairs = BTreeSet::new();

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = EventRecord::parse_line(&line).map_err(|e| CorpusError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let participant_of = |sessions: &HashMap<String, SessionInfo>| {
            sessions
                .get(&record.session)
                .map(|s| s.participant.clone())
                .ok_or_else(|| CorpusError::MalformedLine {
                    line: line_no,
                    message: format!("event for unknown session `{}`", record.session),
                })
        };
        match &record.event {
            Event::SessionCreated { participant, robots } => {
                if sessions.contains_key(&record.session) {
                    return Err(CorpusError::MalformedLine {
                        line: line_no,
                        message: format!("session `{}` created twice", record.session),
                    });
                }
                if let Some(robot) = robots.iter().find(|r| !manifest.contains(r)) {
                    return Err(CorpusError::UnknownRobot {
                        line: line_no,
                        robot: robot.clone(),
                    });
                }
                *expected.entry(participant.clone()).or_default() += robots.len();
                sessions.insert(
                    record.session.clone(),
                    SessionInfo {
                        participant: participant.clone(),
                        assigned: robots.len(),
                    },
                );
            }
            Event::AttitudeSubmitted { items } => {
                let participant = participant_of(&sessions)?;
                if items.len() != ATTITUDE_ITEMS {
                    return Err(CorpusError::AttitudeItemCount {
                        line: line_no,
                        participant,
                        found: items.len(),
                    });
                }
                if !with_attitude.insert(participant.clone()) {
                    return Err(CorpusError::DuplicateAttitude {
                        line: line_no,
                        participant,
                    });
                }
                let rec = AttitudeRecord::new(participant, items).map_err(|e| {
                    CorpusError::MalformedLine {
                        line: line_no,
                        message: e.to_string(),
                    }
                })?;
                attitudes.push(rec);
            }
            Event::AssociationSubmitted { robot, words } => {
                let participant = participant_of(&sessions)?;
                if !manifest.contains(robot) {
                    return Err(CorpusError::UnknownRobot {
                        line: line_no,
                        robot: robot.clone(),
                    });
                }
                match check_words(words) {
                    Ok(()) => {}
                    Err(WordsProblem::Count(found)) => {
                        return Err(CorpusError::WordCount {
                            line: line_no,
                            participant,
                            found,
                        })
                    }
                    Err(WordsProblem::Blank(position)) => {
                        return Err(CorpusError::BlankWord {
                            line: line_no,
                            participant,
                            position,
                        })
                    }
                }
                if !pairs.insert((participant.clone(), robot.clone())) {
                    return Err(CorpusError::DuplicateAssociation {
                        line: line_no,
                        participant,
                        robot: robot.clone(),
                    });
                }
                associations.push(AssociationRecord {
                    participant_id: participant,
                    robot_id: robot.clone(),
                    words: words.clone(),
                });
            }
            Event::SessionCompleted {} => {
                let info = sessions.get(&record.session).ok_or_else(|| {
                    CorpusError::MalformedLine {
                        line: line_no,
                        message: format!("event for unknown session `{}`", record.session),
                    }
                })?;
                log::debug!(
                    "session {} of {} completed ({} robots)",
                    record.session,
                    info.participant,
                    info.assigned
                );
            }
        }
    }

    StudyDataset::with_expected(manifest.clone(), attitudes, associations, &expected)
}

/// Serializes a dataset as a synthetic event log, one session per participant.
///
/// Robots are presented in the dataset's association order and timestamps
/// advance one second per event from `start`, so the output is a pure
/// function of the dataset.
pub fn write_event_log<W: Write>(
    dataset: &StudyDataset,
    start: DateTime<Utc>,
    mut out: W,
) -> io::Result<()> {
    let mut by_participant: BTreeMap<&str, Vec<&AssociationRecord>> = BTreeMap::new();
    for p in dataset.participants() {
        by_participant.entry(p).or_default();
    }
    for a in dataset.associations() {
        by_participant.entry(a.participant_id()).or_default().push(a);
    }
    let mut ts = start;
    let mut emit = |out: &mut W, session: &str, event: Event| -> io::Result<()> {
        let rec = EventRecord {
            ts,
            session: session.to_string(),
            event,
        };
        ts += Duration::seconds(1);
        writeln!(out, "{}", rec.to_line())
    };
    for (participant, assoc) in by_participant {
        let session = format!("s-{participant}");
        emit(
            &mut out,
            &session,
            Event::SessionCreated {
                participant: participant.to_string(),
                robots: assoc.iter().map(|a| a.robot_id().to_string()).collect(),
            },
        )?;
        if let Some(att) = dataset.attitude_of(participant) {
            emit(
                &mut out,
                &session,
                Event::AttitudeSubmitted {
                    items: att.item_scores().iter().map(|&v| v as i64).collect(),
                },
            )?;
        }
        for a in &assoc {
            emit(
                &mut out,
                &session,
                Event::AssociationSubmitted {
                    robot: a.robot_id().to_string(),
                    words: a.words().to_vec(),
                },
            )?;
        }
        if dataset.is_complete(participant) {
            emit(&mut out, &session, Event::SessionCompleted {})?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusError;

    fn ts() -> DateTime<Utc> {
        "2023-05-01T09:00:00Z".parse().unwrap()
    }

    fn line(session: &str, event: Event) -> String {
        EventRecord {
            ts: ts(),
            session: session.into(),
            event,
        }
        .to_line()
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn fixture(participants: usize, robots: usize) -> String {
        let m = RobotManifest::bundled();
        let ids: Vec<String> = m.robot_ids().take(robots).map(String::from).collect();
        let mut out = String::new();
        for p in 0..participants {
            let s = format!("sess{p}");
            out += &line(
                &s,
                Event::SessionCreated {
                    participant: format!("p{p}"),
                    robots: ids.clone(),
                },
            );
            out.push('\n');
            out += &line(&s, Event::AttitudeSubmitted { items: vec![3; 12] });
            out.push('\n');
            for r in &ids {
                out += &line(
                    &s,
                    Event::AssociationSubmitted {
                        robot: r.clone(),
                        words: words(6),
                    },
                );
                out.push('\n');
            }
            out += &line(&s, Event::SessionCompleted {});
            out.push('\n');
        }
        out
    }

    #[test]
    fn line_schema() {
        let l = line("abc", Event::AttitudeSubmitted { items: vec![1, 2] });
        assert_eq!(
            l,
            r#"{"ts":"2023-05-01T09:00:00Z","session":"abc","kind":"attitude_submitted","payload":{"items":[1,2]}}"#
        );
        let done = line("abc", Event::SessionCompleted {});
        assert!(done.ends_with(r#""kind":"session_completed","payload":{}}"#));
        assert_eq!(EventRecord::parse_line(&done).unwrap().event, Event::SessionCompleted {});
    }

    #[test]
    fn loads_two_complete_participants() {
        let ds = load_dataset_from_reader(fixture(2, 10).as_bytes(), &RobotManifest::bundled()).unwrap();
        assert_eq!(ds.associations().len(), 20);
        assert_eq!(ds.attitudes().len(), 2);
        assert!(ds.incomplete_participants().is_empty());
        assert_eq!(ds.attitude_of("p1").unwrap().mean_score(), 3.0);
    }

    #[test]
    fn five_words_is_an_error_naming_line_and_participant() {
        let mut text = line(
            "s",
            Event::SessionCreated {
                participant: "p7".into(),
                robots: vec!["nao".into()],
            },
        );
        text.push('\n');
        text += &line(
            "s",
            Event::AssociationSubmitted {
                robot: "nao".into(),
                words: words(5),
            },
        );
        let err = load_dataset_from_reader(text.as_bytes(), &RobotManifest::bundled()).unwrap_err();
        assert!(matches!(err, CorpusError::WordCount { line: 2, ref participant, found: 5 } if participant == "p7"));
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("p7"), "{msg}");
    }

    #[test]
    fn duplicate_association_is_rejected() {
        let mut text = line(
            "s",
            Event::SessionCreated {
                participant: "p1".into(),
                robots: vec!["nao".into()],
            },
        );
        for _ in 0..2 {
            text.push('\n');
            text += &line(
                "s",
                Event::AssociationSubmitted {
                    robot: "nao".into(),
                    words: words(6),
                },
            );
        }
        let err = load_dataset_from_reader(text.as_bytes(), &RobotManifest::bundled()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateAssociation { line: 3, .. }));
    }

    #[test]
    fn other_ingestion_errors() {
        let m = RobotManifest::bundled();
        let created = line(
            "s",
            Event::SessionCreated {
                participant: "p1".into(),
                robots: vec!["nao".into()],
            },
        );
        let bad_robot = format!(
            "{created}\n{}",
            line(
                "s",
                Event::AssociationSubmitted {
                    robot: "r2d2".into(),
                    words: words(6)
                }
            )
        );
        assert!(matches!(
            load_dataset_from_reader(bad_robot.as_bytes(), &m),
            Err(CorpusError::UnknownRobot { line: 2, .. })
        ));
        let short = format!("{created}\n{}", line("s", Event::AttitudeSubmitted { items: vec![1; 11] }));
        assert!(matches!(
            load_dataset_from_reader(short.as_bytes(), &m),
            Err(CorpusError::AttitudeItemCount { found: 11, .. })
        ));
        let garbage = format!("{created}\n{{not json");
        assert!(matches!(
            load_dataset_from_reader(garbage.as_bytes(), &m),
            Err(CorpusError::MalformedLine { line: 2, .. })
        ));
        let orphan = line("zzz", Event::AttitudeSubmitted { items: vec![1; 12] });
        assert!(matches!(
            load_dataset_from_reader(orphan.as_bytes(), &m),
            Err(CorpusError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn partial_session_is_flagged() {
        let text: String = fixture(1, 10).lines().take(5).map(|l| format!("{l}\n")).collect();
        let ds = load_dataset_from_reader(text.as_bytes(), &RobotManifest::bundled()).unwrap();
        assert_eq!(ds.associations().len(), 3);
        assert!(ds.incomplete_participants().contains("p0"));
    }

    #[test]
    fn written_log_reloads_to_equal_dataset() {
        let m = RobotManifest::bundled();
        let ds = load_dataset_from_reader(fixture(3, 10).as_bytes(), &m).unwrap();
        let mut buf = Vec::new();
        write_event_log(&ds, ts(), &mut buf).unwrap();
        let again = load_dataset_from_reader(buf.as_slice(), &m).unwrap();
        assert_eq!(ds, again);
    }
}
