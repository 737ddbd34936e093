//! Scripted scenarios: load files, drive a session, score the final pages.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use demoflow_core::dom::{ControlState, Corpus, DomError};
use demoflow_core::semantics::{HashedEmbedder, Lexicon, LexiconError};
use demoflow_core::session::{Command, Mode, Session, SessionConfig, TranscriptEntry};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::script::{parse_script, Directive, ScriptError, ScriptLine};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("corpus: {0}")]
    Corpus(#[from] DomError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("input: {0}")]
    Input(String),
    #[error("script: {0}")]
    Script(#[from] ScriptError),
    #[error("line {line} `{source_text}`: {error}")]
    Command {
        line: usize,
        source_text: String,
        error: String,
    },
    #[error("line {line}: expected mode {expected:?}, session is in {actual:?}")]
    Expectation {
        line: usize,
        expected: Mode,
        actual: Mode,
    },
    #[error("no completed run to export")]
    NotRun,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Everything needed to run one scenario.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Scenario {
    pub corpus: PathBuf,
    pub input: PathBuf,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    pub script: PathBuf,
    /// Expected control state of every row, by position in the input file.
    #[serde(default)]
    pub expected: Option<PathBuf>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_tau_catalog")]
    pub tau_catalog: f64,
}

fn default_tau() -> f64 {
    SessionConfig::default().page_threshold
}

fn default_tau_catalog() -> f64 {
    SessionConfig::default().catalog_threshold
}

impl Scenario {
    /// Read a scenario file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = read(path)?;
        let mut s: Scenario = toml::from_str(&text).map_err(|e| ScenarioError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut s.corpus);
        fix(&mut s.input);
        fix(&mut s.script);
        if let Some(p) = s.lexicon.as_mut() {
            fix(p);
        }
        if let Some(p) = s.expected.as_mut() {
            fix(p);
        }
        Ok(s)
    }

    pub fn config(&self) -> SessionConfig {
        SessionConfig {
            page_threshold: self.tau,
            catalog_threshold: self.tau_catalog,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowResult {
    pub source_index: usize,
    /// Presentation position (after ranking).
    pub row: usize,
    pub label: String,
    pub passed: bool,
    pub differences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<RowResult>,
    pub catalog_size: usize,
    pub program: bool,
    pub completed: bool,
    /// Where the run stopped, when it did not finish every row.
    pub stopped: Option<String>,
}

impl Report {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.passed).count()
    }

    pub fn accuracy(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.passed() as f64 / self.rows.len() as f64
    }

    pub fn perfect(&self) -> bool {
        self.completed && self.passed() == self.rows.len()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            write!(
                f,
                "row {:>2} (input {:>2}) {:<24} {}",
                r.row + 1,
                r.source_index + 1,
                r.label,
                if r.passed { "pass" } else { "FAIL" }
            )?;
            if !r.differences.is_empty() {
                write!(f, "  {}", r.differences.join("; "))?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "accuracy: {}/{} ({:.1}%)",
            self.passed(),
            self.rows.len(),
            self.accuracy() * 100.0
        )?;
        writeln!(f, "catalog entries: {}", self.catalog_size)?;
        if let Some(s) = &self.stopped {
            writeln!(f, "stopped: {s}")?;
        }
        Ok(())
    }
}

fn compare(got: &ControlState, want: &ControlState) -> Vec<String> {
    let mut out = Vec::new();
    if got.page != want.page {
        out.push(format!("page {} != {}", got.page, want.page));
    }
    for missing in want.checked.difference(&got.checked) {
        out.push(format!("unchecked \"{missing}\""));
    }
    for extra in got.checked.difference(&want.checked) {
        out.push(format!("unexpected \"{extra}\""));
    }
    if got.values != want.values {
        out.push(format!("values {:?} != {:?}", got.values, want.values));
    }
    if got.submitted != want.submitted {
        out.push(format!("submitted {} != {}", got.submitted, want.submitted));
    }
    out
}

/// A finished run: the session plus everything sent to it.
pub struct Execution {
    pub session: Session,
    pub commands: Vec<Command>,
    pub report: Report,
    pub elapsed: Duration,
}

impl Execution {
    /// Resolved commands as JSON lines, replayable through the service.
    pub fn commands_jsonl(&self) -> String {
        self.commands
            .iter()
            .map(|c| serde_json::to_string(c).expect("command serializes") + "\n")
            .collect()
    }

    pub fn program_export(&self) -> String {
        self.session
            .program()
            .map(|p| p.export())
            .unwrap_or_else(|| "no program\n".to_string())
    }
}

/// Load the scenario files, replay the script, finish automation and score
/// every row against the expected states.
pub fn execute(scenario: &Scenario) -> Result<Execution, ScenarioError> {
    let started = Instant::now();
    let corpus = Arc::new(Corpus::open(&scenario.corpus)?);
    let lexicon = match &scenario.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let input: Value = serde_json::from_str(&read(&scenario.input)?)
        .map_err(|e| ScenarioError::Input(e.to_string()))?;
    let script = parse_script(&read(&scenario.script)?)?;
    let expected: Option<Vec<ControlState>> = scenario
        .expected
        .as_ref()
        .map(|p| {
            serde_json::from_str(&read(p)?).map_err(|e| ScenarioError::Input(format!("expected states: {e}")))
        })
        .transpose()?;

    let mut session = Session::new(corpus, Arc::new(HashedEmbedder::new(lexicon)), scenario.config())?;
    let mut commands = Vec::new();
    let starts_with_upload = script
        .first()
        .is_some_and(|l| l.directive == Directive::UploadInput);
    let upload = ScriptLine {
        line: 0,
        source: "upload-input".into(),
        directive: Directive::UploadInput,
    };
    let lines = (!starts_with_upload).then_some(&upload).into_iter().chain(&script);
    for line in lines {
        if let Directive::Expect(want) = line.directive {
            if session.mode() != want {
                return Err(ScenarioError::Expectation {
                    line: line.line,
                    expected: want,
                    actual: session.mode(),
                });
            }
            continue;
        }
        let fail = |error: String| ScenarioError::Command {
            line: line.line,
            source_text: line.source.clone(),
            error,
        };
        let Some(cmd) = line
            .directive
            .to_command(session.browser().doc(), &input)
            .map_err(|e| fail(e.to_string()))?
        else {
            continue;
        };
        commands.push(cmd.clone());
        session.handle(cmd).map_err(|e| fail(e.to_string()))?;
    }
    if session.mode() == Mode::FullAuto && !session.is_completed() {
        commands.push(Command::Run);
        session.handle(Command::Run).map_err(|e| ScenarioError::Command {
            line: 0,
            source_text: "run".into(),
            error: e.to_string(),
        })?;
    }
    let report = score(&session, expected.as_deref());
    Ok(Execution {
        session,
        commands,
        report,
        elapsed: started.elapsed(),
    })
}

fn score(session: &Session, expected: Option<&[ControlState]>) -> Report {
    let table = session.table();
    let mut rows = Vec::new();
    if let Some(t) = table {
        let mut by_source: Vec<(usize, usize, String)> = t
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.source_index, i, r.cells.first().cloned().unwrap_or_default()))
            .collect();
        by_source.sort();
        for (source_index, row, label) in by_source {
            let got = session.outcomes().get(&source_index);
            let want = expected.and_then(|e| e.get(source_index));
            let differences = match (got, want) {
                (None, _) => vec!["row not finished".to_string()],
                (Some(_), None) if expected.is_some() => vec!["no expected state".to_string()],
                (Some(_), None) => Vec::new(),
                (Some(g), Some(w)) => compare(g, w),
            };
            rows.push(RowResult {
                source_index,
                row,
                label,
                passed: differences.is_empty(),
                differences,
            });
        }
    }
    let stopped = (!session.is_completed()).then(|| {
        let last_fallback = session.transcript().iter().rev().find_map(|e| match e {
            TranscriptEntry::NeedsDemonstration { row, step, reason } => {
                Some(format!("NeedsDemonstration at row {}, step {}: {reason}", row + 1, step + 1))
            }
            TranscriptEntry::Paused { reason } => Some(format!("Paused: {reason}")),
            _ => None,
        });
        match (session.mode(), last_fallback) {
            (Mode::NeedsDemonstration | Mode::Paused, Some(s)) => s,
            (mode, _) => format!("{mode:?} at row {}", session.current_row() + 1),
        }
    });
    Report {
        rows,
        catalog_size: session.catalog().len(),
        program: session.program().is_some(),
        completed: session.is_completed(),
        stopped,
    }
}

/// Runs a scenario once and writes its artifacts.
pub struct ScenarioRunner {
    scenario: Scenario,
    done: Option<Execution>,
}

impl ScenarioRunner {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            done: None,
        }
    }

    pub fn run(&mut self) -> Result<&Execution, ScenarioError> {
        self.done = Some(execute(&self.scenario)?);
        Ok(self.done.as_ref().expect("just set"))
    }

    pub fn execution(&self) -> Option<&Execution> {
        self.done.as_ref()
    }

    /// Write transcript, catalog, program, command log and report to `dir`.
    pub fn export_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        let run = self.done.as_ref().ok_or(ScenarioError::NotRun)?;
        let io = |path: &Path, e: std::io::Error| ScenarioError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let files = [
            ("transcript.jsonl", run.session.transcript_jsonl()),
            ("catalog.json", run.session.catalog().export()),
            ("program.txt", run.program_export()),
            ("commands.jsonl", run.commands_jsonl()),
            ("report.txt", run.report.to_string()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
