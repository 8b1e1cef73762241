//! JSON-lines telemetry stream.
//!
//! One record per line, `{"frame": u64, "t_ms": f64, "kind": ..., <payload>}`:
//!
//! | kind      | payload                                              |
//! |-----------|------------------------------------------------------|
//! | `command` | `command`: `UP`/`RIGHT`/`DOWN`/`LEFT`                |
//! | `turn`    | `from`, `to`: headings                               |
//! | `motion`  | `moved`: bool; `steps`: u64 on multiples of 10 only  |
//! | `score`   | `item`, `points`, `score` (running total)            |
//! | `life`    | `lives`: remaining lives                             |
//! | `end`     | `reason`, `score`, `frames`                          |
//!
//! `t_ms` is the issue timestamp for commands and the frame start otherwise.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Command;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Cleared,
    NoLives,
    FrameCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreItem {
    Pellet,
    PowerPellet,
    Ghost,
    Fruit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Command {
        command: Command,
    },
    Turn {
        from: Command,
        to: Command,
    },
    Motion {
        moved: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<u64>,
    },
    Score {
        item: ScoreItem,
        points: u32,
        score: u32,
    },
    Life {
        lives: u8,
    },
    End {
        reason: EndReason,
        score: u32,
        frames: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub frame: u64,
    pub t_ms: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: u64, t_ms: f64, kind: EventKind) {
        self.events.push(Event { frame, t_ms, kind });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    /// Final score: from the `end` record, else the last `score` record.
    pub fn final_score(&self) -> u32 {
        self.events
            .iter()
            .rev()
            .find_map(|e| match e.kind {
                EventKind::End { score, .. } | EventKind::Score { score, .. } => Some(score),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Frames played: from the `end` record, else one past the last stamped frame.
    pub fn frames(&self) -> u64 {
        self.end()
            .map(|(_, _, frames)| frames)
            .or_else(|| self.events.last().map(|e| e.frame + 1))
            .unwrap_or(0)
    }

    pub fn end(&self) -> Option<(EndReason, u32, u64)> {
        self.events.iter().rev().find_map(|e| match e.kind {
            EventKind::End { reason, score, frames } => Some((reason, score, frames)),
            _ => None,
        })
    }

    pub fn commands(&self) -> impl Iterator<Item = (u64, Command)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Command { command } => Some((e.frame, command)),
            _ => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::with_capacity(self.events.len() * 48);
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, LogError> {
        let mut events = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?;
            events.push(e);
        }
        Ok(Self { events })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// SHA-256 of the serialised JSON-lines, hex encoded.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_have_documented_shape() {
        let mut log = EventLog::new();
        log.push(3, 51.5, EventKind::Command { command: Command::Up });
        log.push(
            4,
            66.0,
            EventKind::Motion {
                moved: true,
                steps: None,
            },
        );
        log.push(
            5,
            80.0,
            EventKind::End {
                reason: EndReason::NoLives,
                score: 120,
                frames: 6,
            },
        );
        let text = log.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"frame":3,"t_ms":51.5,"kind":"command","command":"UP"}"#);
        assert_eq!(lines[1], r#"{"frame":4,"t_ms":66.0,"kind":"motion","moved":true}"#);
        assert_eq!(
            lines[2],
            r#"{"frame":5,"t_ms":80.0,"kind":"end","reason":"no_lives","score":120,"frames":6}"#
        );
        assert_eq!(EventLog::from_jsonl(&text).unwrap(), log);
        assert_eq!(log.final_score(), 120);
        assert_eq!(log.frames(), 6);
    }

    #[test]
    fn parse_error_reports_line() {
        let err = EventLog::from_jsonl("{\"frame\":0,\"t_ms\":0.0,\"kind\":\"life\",\"lives\":2}\nnope\n").unwrap_err();
        assert!(matches!(err, LogError::Parse { line: 2, .. }));
    }
}
