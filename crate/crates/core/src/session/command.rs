//! Command vocabulary, errors and transcript records.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::catalog::{CatalogError, InstantiateError};
use crate::dom::{ControlState, DomError, PathExpr};

use super::Mode;

/// Page-level user actions a client can forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserEventKind {
    Click,
    Input,
    Select,
    CancelHighlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    UploadInput {
        rows: Value,
    },
    StartRecording,
    UserEvent {
        kind: UserEventKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<PathExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<String>,
    },
    Advance,
    Rewind,
    NextRow,
    Confirm,
    Cancel,
    Pause,
    Resume,
    EditStep {
        row: usize,
        step: usize,
        text: String,
    },
    TickRate {
        ms: u64,
    },
    /// Execute one automation unit.
    Tick,
    /// Tick until automation stops or the table is finished.
    Run,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::UploadInput { .. } => "upload-input",
            Command::StartRecording => "start-recording",
            Command::UserEvent { .. } => "user-event",
            Command::Advance => "advance",
            Command::Rewind => "rewind",
            Command::NextRow => "next-row",
            Command::Confirm => "confirm",
            Command::Cancel => "cancel",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::EditStep { .. } => "edit-step",
            Command::TickRate { .. } => "tick-rate",
            Command::Tick => "tick",
            Command::Run => "run",
        }
    }

    /// Parse a JSON command, reporting an unknown `command` tag distinctly.
    pub fn from_json(value: &Value) -> Result<Self, SessionError> {
        const KNOWN: &[&str] = &[
            "upload-input",
            "start-recording",
            "user-event",
            "advance",
            "rewind",
            "next-row",
            "confirm",
            "cancel",
            "pause",
            "resume",
            "edit-step",
            "tick-rate",
            "tick",
            "run",
        ];
        let tag = value.get("command").and_then(Value::as_str).unwrap_or_default();
        if !KNOWN.contains(&tag) {
            return Err(SessionError::UnknownCommand(tag.to_string()));
        }
        serde_json::from_value(value.clone()).map_err(|e| SessionError::BadCommand(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{command} is not allowed in mode {mode:?}")]
    WrongMode { command: &'static str, mode: Mode },
    #[error("no input table has been uploaded")]
    NoInput,
    #[error("input table has no records")]
    EmptyInput,
    #[error("record {record} does not have the same fields as record 0")]
    NonRectangular { record: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no step {step} in row {row}")]
    BadIndex { row: usize, step: usize },
    #[error("edited step text is empty")]
    InvalidEdit,
    #[error("already at the first step of the row")]
    AtStart,
    #[error("the row's steps are finished; use next-row")]
    AtEnd,
    #[error("next-row requires the row's steps to be finished")]
    RowUnfinished,
    #[error("no pending prediction")]
    NoPrediction,
    #[error("{0} needs a target")]
    MissingTarget(&'static str),
    #[error("all rows are finished")]
    Finished,
    #[error("unknown command \"{0}\"")]
    UnknownCommand(String),
    #[error("malformed command: {0}")]
    BadCommand(String),
    #[error("session is closed")]
    SessionClosed,
    #[error(transparent)]
    Dom(#[from] DomError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
}

impl SessionError {
    /// Variant name, for clients that branch on the error.
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::WrongMode { .. } => "WrongMode",
            SessionError::NoInput => "NoInput",
            SessionError::EmptyInput => "EmptyInput",
            SessionError::NonRectangular { .. } => "NonRectangular",
            SessionError::InvalidInput(_) => "InvalidInput",
            SessionError::BadIndex { .. } => "BadIndex",
            SessionError::InvalidEdit => "InvalidEdit",
            SessionError::AtStart => "AtStart",
            SessionError::AtEnd => "AtEnd",
            SessionError::RowUnfinished => "RowUnfinished",
            SessionError::NoPrediction => "NoPrediction",
            SessionError::MissingTarget(_) => "MissingTarget",
            SessionError::Finished => "Finished",
            SessionError::UnknownCommand(_) => "UnknownCommand",
            SessionError::BadCommand(_) => "BadCommand",
            SessionError::SessionClosed => "SessionClosed",
            SessionError::Dom(_) => "Dom",
            SessionError::Catalog(_) => "Catalog",
            SessionError::Instantiate(_) => "Instantiate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Demonstrated,
    Confirmed,
    Automated,
}

/// One transcript line. Scores are rounded to four decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TranscriptEntry {
    Command {
        index: u64,
        command: Command,
    },
    Rejected {
        error: String,
    },
    Mode {
        from: Mode,
        to: Mode,
    },
    Highlight {
        row: usize,
        step: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
    },
    Lookup {
        row: usize,
        step: usize,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entry: Option<String>,
        score: f64,
    },
    Applied {
        origin: Origin,
        action: String,
        page: String,
    },
    Recorded {
        key: String,
        template: String,
    },
    Synthesized {
        prologue: usize,
        epilogue: usize,
    },
    SynthesisFailed,
    Prediction {
        row: usize,
        description: String,
    },
    NeedsDemonstration {
        row: usize,
        step: usize,
        reason: String,
    },
    Paused {
        reason: String,
    },
    Edited {
        row: usize,
        step: usize,
        text: String,
    },
    RowFinished {
        row: usize,
        source_index: usize,
        state: ControlState,
    },
    Completed,
}

pub(crate) fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
