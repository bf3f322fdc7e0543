//! Event log of one streaming run.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimulEvent {
    Read { language: String, token: String },
    Write(String),
    /// Remove the last `erased` output tokens, then append `replacement`.
    Revise { erased: usize, replacement: Vec<String> },
    Flush,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

pub const LOG_HEADER: &str = "event_index\tkind\tlanguage\ttoken";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimulEventLog {
    events: Vec<SimulEvent>,
}

impl SimulEventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<SimulEvent>) -> Self {
        Self { events }
    }

    pub fn push(&mut self, event: SimulEvent) {
        self.events.push(event);
    }

    pub fn read(&mut self, language: &str, token: &str) {
        self.push(SimulEvent::Read {
            language: language.to_string(),
            token: token.to_string(),
        });
    }

    pub fn write(&mut self, token: &str) {
        self.push(SimulEvent::Write(token.to_string()));
    }

    pub fn events(&self) -> &[SimulEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn has_revisions(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, SimulEvent::Revise { .. }))
    }

    /// Output buffer after replaying every event.
    pub fn final_output(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.events {
            match e {
                SimulEvent::Write(t) => out.push(t.clone()),
                SimulEvent::Revise {
                    erased,
                    replacement,
                } => {
                    let keep = out.len().saturating_sub(*erased);
                    out.truncate(keep);
                    out.extend(replacement.iter().cloned());
                }
                SimulEvent::Read { .. } | SimulEvent::Flush => {}
            }
        }
        out
    }

    /// Copy of the log without the reads of `language`.
    pub fn without_language(&self, language: &str) -> Self {
        Self {
            events: self
                .events
                .iter()
                .filter(|e| !matches!(e, SimulEvent::Read { language: l, .. } if l == language))
                .cloned()
                .collect(),
        }
    }

    pub fn reads_of(&self, language: &str) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, SimulEvent::Read { language: l, .. } if l == language))
            .count()
    }

    /// TSV with [`LOG_HEADER`]. Revisions use kind `revise:<erased>` and put the
    /// replacement tokens, space separated, in the token column.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        s.push_str(LOG_HEADER);
        s.push('\n');
        for (i, e) in self.events.iter().enumerate() {
            let _ = match e {
                SimulEvent::Read { language, token } => writeln!(s, "{i}\tread\t{language}\t{token}"),
                SimulEvent::Write(t) => writeln!(s, "{i}\twrite\t-\t{t}"),
                SimulEvent::Revise {
                    erased,
                    replacement,
                } => writeln!(s, "{i}\trevise:{erased}\t-\t{}", replacement.join(" ")),
                SimulEvent::Flush => writeln!(s, "{i}\tflush\t-\t-"),
            };
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self, LogParseError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, message: String| LogParseError {
            line: line + 1,
            message,
        };
        match lines.next() {
            Some((_, h)) if h == LOG_HEADER => {}
            _ => return Err(err(0, "missing header".into())),
        }
        let mut events = Vec::new();
        for (n, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(n, format!("expected 4 columns, got {}", cols.len())));
            }
            if cols[0].parse::<usize>() != Ok(events.len()) {
                return Err(err(n, format!("bad event index `{}`", cols[0])));
            }
            let event = match cols[1] {
                "read" => SimulEvent::Read {
                    language: cols[2].to_string(),
                    token: cols[3].to_string(),
                },
                "write" => SimulEvent::Write(cols[3].to_string()),
                "flush" => SimulEvent::Flush,
                kind => {
                    let erased = kind
                        .strip_prefix("revise:")
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| err(n, format!("unknown event kind `{kind}`")))?;
                    SimulEvent::Revise {
                        erased,
                        replacement: cols[3].split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
                    }
                }
            };
            events.push(event);
        }
        Ok(Self { events })
    }
}
