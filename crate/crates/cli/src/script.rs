//! Demonstration scripts: one session command per line.
//!
//! Lines use the session command names. Page targets may be written as a
//! path (`body[1]/input[1]`), as `text:Label` (the first visible node with that
//! text) or as `control:Label` (the control associated with that node).
//! A line starting with `{` is a raw JSON command. `expect <Mode>` asserts the
//! session mode and is not sent to the session.

use demoflow_core::dom::{DomDocument, PathExpr};
use demoflow_core::session::{Command, Mode, UserEventKind};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("no visible element with text \"{0}\"")]
    NoText(String),
    #[error("no control for \"{0}\"")]
    NoControl(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Locator {
    Path(PathExpr),
    Text(String),
    Control(String),
}

impl Locator {
    fn parse(s: &str) -> Result<Self, String> {
        if let Some(t) = s.strip_prefix("text:") {
            Ok(Locator::Text(t.to_string()))
        } else if let Some(t) = s.strip_prefix("control:") {
            Ok(Locator::Control(t.to_string()))
        } else {
            s.parse().map(Locator::Path).map_err(|e| format!("{e}"))
        }
    }

    pub fn resolve(&self, doc: &DomDocument) -> Result<PathExpr, ScriptError> {
        let node_for = |t: &str| doc.find_by_text(t).ok_or_else(|| ScriptError::NoText(t.to_string()));
        match self {
            Locator::Path(p) => Ok(p.clone()),
            Locator::Text(t) => doc
                .node_path(node_for(t)?)
                .map_err(|_| ScriptError::NoText(t.clone())),
            Locator::Control(t) => doc
                .associated_control(node_for(t)?)
                .and_then(|c| doc.node_path(c))
                .map_err(|_| ScriptError::NoControl(t.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    /// A command whose page target is resolved just before it is sent.
    UserEvent {
        kind: UserEventKind,
        target: Option<Locator>,
        payload: Option<String>,
    },
    Command(Command),
    /// Upload the scenario's input file.
    UploadInput,
    Expect(Mode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub source: String,
    pub directive: Directive,
}

impl Directive {
    /// The command to send, with locators resolved against `doc`.
    pub fn to_command(&self, doc: &DomDocument, input: &Value) -> Result<Option<Command>, ScriptError> {
        Ok(match self {
            Directive::UserEvent {
                kind,
                target,
                payload,
            } => Some(Command::UserEvent {
                kind: *kind,
                target: target.as_ref().map(|l| l.resolve(doc)).transpose()?,
                payload: payload.clone(),
            }),
            Directive::Command(c) => Some(c.clone()),
            Directive::UploadInput => Some(Command::UploadInput { rows: input.clone() }),
            Directive::Expect(_) => None,
        })
    }
}

fn parse_mode(s: &str) -> Option<Mode> {
    serde_json::from_value(Value::String(s.to_string())).ok()
}

fn parse_line(words: &[String]) -> Result<Directive, String> {
    let arg = |i: usize| words.get(i).ok_or_else(|| format!("{} needs more arguments", words[0]));
    let number = |i: usize| -> Result<u64, String> {
        arg(i)?.parse().map_err(|_| format!("\"{}\" is not a number", words[i]))
    };
    let bare = |c: Command| {
        if words.len() > 1 {
            Err(format!("{} takes no arguments", words[0]))
        } else {
            Ok(Directive::Command(c))
        }
    };
    match words[0].as_str() {
        "upload-input" => Ok(Directive::UploadInput),
        "start-recording" => bare(Command::StartRecording),
        "advance" => bare(Command::Advance),
        "rewind" => bare(Command::Rewind),
        "next-row" => bare(Command::NextRow),
        "confirm" => bare(Command::Confirm),
        "cancel" => bare(Command::Cancel),
        "pause" => bare(Command::Pause),
        "resume" => bare(Command::Resume),
        "tick" => bare(Command::Tick),
        "run" => bare(Command::Run),
        "tick-rate" => Ok(Directive::Command(Command::TickRate { ms: number(1)? })),
        "edit-step" => {
            if words.len() != 4 {
                return Err("usage: edit-step <row> <step> <text>".into());
            }
            Ok(Directive::Command(Command::EditStep {
                row: number(1)? as usize,
                step: number(2)? as usize,
                text: words[3].clone(),
            }))
        }
        "user-event" => {
            let kind: UserEventKind = serde_json::from_value(Value::String(arg(1)?.clone()))
                .map_err(|_| format!("unknown event kind \"{}\"", words[1]))?;
            let (want, target) = match kind {
                UserEventKind::CancelHighlight => (2, None),
                UserEventKind::Input => (4, Some(Locator::parse(arg(2)?)?)),
                _ => (3, Some(Locator::parse(arg(2)?)?)),
            };
            if words.len() != want {
                return Err(format!("user-event {} takes {} argument(s)", words[1], want - 2));
            }
            Ok(Directive::UserEvent {
                kind,
                target,
                payload: (kind == UserEventKind::Input).then(|| words[3].clone()),
            })
        }
        "expect" => {
            let m = arg(1)?;
            parse_mode(m)
                .map(Directive::Expect)
                .ok_or_else(|| format!("unknown mode \"{m}\""))
        }
        other => Err(format!("unknown command \"{other}\"")),
    }
}

/// Parse a whole script. Blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, ScriptError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let src = raw.trim();
        if src.is_empty() || src.starts_with('#') {
            continue;
        }
        let syntax = |reason: String| ScriptError::Syntax { line, reason };
        let directive = if src.starts_with('{') {
            let v: Value = serde_json::from_str(src).map_err(|e| syntax(e.to_string()))?;
            Directive::Command(Command::from_json(&v).map_err(|e| syntax(e.to_string()))?)
        } else {
            let words = shlex::split(src).ok_or_else(|| syntax("unbalanced quotes".into()))?;
            parse_line(&words).map_err(syntax)?
        };
        out.push(ScriptLine {
            line,
            source: src.to_string(),
            directive,
        });
    }
    Ok(out)
}
