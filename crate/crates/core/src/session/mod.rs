//! The demonstration session: input table, mode machine, automation.
//!
//! A session walks the table row by row. The first rows are demonstrated by
//! the user one step at a time; their step actions feed the catalog and their
//! full traces feed program synthesis. Once a program exists the next row is
//! run in semi-automatic mode (every prediction confirmed), and the remaining
//! rows are automated, falling back to a demonstration whenever the catalog
//! has nothing similar enough for a step.

mod command;
mod snapshot;
mod table;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    instantiate_template, template_from_demo, Catalog, DemoAction, ExecContext, InstantiateError,
    MatchResult,
};
use crate::dom::{Browser, ConcreteAction, ControlState, Corpus, DomError, PathExpr};
use crate::semantics::{best_match, EmbeddingProvider, StepText, Stopwords};
use crate::synthesis::{synthesize, AutomationProgram, EventKind, ProgramUnit, StepRef, Trace};

pub use command::{Command, Origin, SessionError, TranscriptEntry, UserEventKind};
pub use snapshot::{CarouselView, CellView, RowView, SessionSnapshot, StepView};
pub use table::{InputTable, StepStatus, TableRow, TaskStep};

use command::round4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Idle,
    Demonstrating,
    SemiAuto,
    FullAuto,
    Paused,
    NeedsDemonstration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    /// Minimum similarity for a page element to be highlighted.
    pub page_threshold: f64,
    /// Minimum similarity for a catalog entry to be reused.
    pub catalog_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            page_threshold: 0.5,
            catalog_threshold: 0.55,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub path: PathExpr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<PathExpr>,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub unit: ProgramUnit,
    pub actions: Vec<ConcreteAction>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TickOutcome {
    Executed,
    RowFinished { row: usize },
    NeedsDemonstration { row: usize, step: usize },
    Paused { reason: String },
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<TickOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Step(usize),
    Epilogue,
}

pub struct Session {
    config: SessionConfig,
    embedder: Arc<dyn EmbeddingProvider>,
    stopwords: Stopwords,
    browser: Browser,
    table: Option<InputTable>,
    mode: Mode,
    resume: Option<Mode>,
    row: usize,
    automated_row: bool,
    phase: Phase,
    unit: usize,
    trace: Trace,
    /// Trace length and page when each step of the demonstrated row opened.
    step_starts: Vec<(usize, Browser)>,
    row_actions: Vec<(usize, DemoAction)>,
    pending_actions: Vec<DemoAction>,
    catalog: Catalog,
    program: Option<AutomationProgram>,
    highlight: Option<Highlight>,
    prediction: Option<Prediction>,
    outcomes: BTreeMap<usize, ControlState>,
    transcript: Vec<TranscriptEntry>,
    commands: u64,
    seq: u64,
    tick_ms: u64,
    demonstrated: Vec<usize>,
    completed: bool,
}

impl Session {
    pub fn new(
        corpus: Arc<Corpus>,
        embedder: Arc<dyn EmbeddingProvider>,
        config: SessionConfig,
    ) -> Result<Self, DomError> {
        Ok(Self {
            config,
            embedder,
            stopwords: Stopwords::default(),
            browser: Browser::new(corpus)?,
            table: None,
            mode: Mode::Idle,
            resume: None,
            row: 0,
            automated_row: false,
            phase: Phase::Step(0),
            unit: 0,
            trace: Trace::new(),
            step_starts: Vec::new(),
            row_actions: Vec::new(),
            pending_actions: Vec::new(),
            catalog: Catalog::new(),
            program: None,
            highlight: None,
            prediction: None,
            outcomes: BTreeMap::new(),
            transcript: Vec::new(),
            commands: 0,
            seq: 0,
            tick_ms: 0,
            demonstrated: Vec::new(),
            completed: false,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn is_completed(&self) -> bool {
        self.completed
    }

    pub fn table(&self) -> Option<&InputTable> {
        self.table.as_ref()
    }

    pub fn browser(&self) -> &Browser {
        &self.browser
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn program(&self) -> Option<&AutomationProgram> {
        self.program.as_ref()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn highlight(&self) -> Option<&Highlight> {
        self.highlight.as_ref()
    }

    pub fn prediction(&self) -> Option<&Prediction> {
        self.prediction.as_ref()
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    /// Presentation index of the row being worked on.
    pub fn current_row(&self) -> usize {
        self.row
    }

    /// Final control state of every finished row, keyed by source index.
    pub fn outcomes(&self) -> &BTreeMap<usize, ControlState> {
        &self.outcomes
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.transcript {
            out.push_str(&serde_json::to_string(e).expect("transcript serializes"));
            out.push('\n');
        }
        out
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.as_ref()
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    /// Apply one command. Rejected commands leave the state untouched and do
    /// not advance `seq`.
    pub fn handle(&mut self, command: Command) -> Result<Ack, SessionError> {
        self.commands += 1;
        self.log(TranscriptEntry::Command {
            index: self.commands,
            command: command.clone(),
        });
        match self.dispatch(command) {
            Ok(outcome) => {
                self.seq += 1;
                Ok(Ack {
                    seq: self.seq,
                    outcome,
                })
            }
            Err(e) => {
                self.log(TranscriptEntry::Rejected {
                    error: e.to_string(),
                });
                Err(e)
            }
        }
    }

    fn dispatch(&mut self, command: Command) -> Result<Option<TickOutcome>, SessionError> {
        let name = command.name();
        match command {
            Command::UploadInput { rows } => {
                self.require(name, &[Mode::Idle])?;
                self.table = Some(InputTable::load(&rows, &self.stopwords)?);
            }
            Command::StartRecording => {
                self.require(name, &[Mode::Idle])?;
                if self.table.is_none() {
                    return Err(SessionError::NoInput);
                }
                self.set_mode(Mode::Demonstrating);
                self.row = 0;
                self.begin_row()?;
            }
            Command::UserEvent {
                kind,
                target,
                payload,
            } => self.user_event(kind, target, payload)?,
            Command::Advance => self.advance()?,
            Command::Rewind => self.rewind()?,
            Command::NextRow => self.next_row()?,
            Command::Confirm => self.confirm()?,
            Command::Cancel => self.cancel()?,
            Command::Pause => {
                self.require(name, &[Mode::SemiAuto, Mode::FullAuto])?;
                self.resume = Some(self.mode);
                self.set_mode(Mode::Paused);
            }
            Command::Resume => {
                self.require(name, &[Mode::Paused])?;
                let back = self.resume.take().unwrap_or(Mode::FullAuto);
                self.set_mode(back);
                self.refresh_highlight();
                if back == Mode::SemiAuto && self.prediction.is_none() {
                    self.predict()?;
                }
            }
            Command::EditStep { row, step, text } => {
                self.require(
                    name,
                    &[Mode::Demonstrating, Mode::Paused, Mode::NeedsDemonstration],
                )?;
                let table = self.table.as_mut().ok_or(SessionError::NoInput)?;
                let edited = table.edit(row, step, &text)?.text.raw.clone();
                self.log(TranscriptEntry::Edited {
                    row,
                    step,
                    text: edited,
                });
                if row == self.row && self.current_step() == Some(step) {
                    self.refresh_highlight();
                }
            }
            Command::TickRate { ms } => self.tick_ms = ms,
            Command::Tick => return self.tick().map(Some),
            Command::Run => return self.run().map(Some),
        }
        Ok(None)
    }

    fn require(&self, command: &'static str, modes: &[Mode]) -> Result<(), SessionError> {
        if modes.contains(&self.mode) {
            Ok(())
        } else {
            Err(SessionError::WrongMode {
                command,
                mode: self.mode,
            })
        }
    }

    fn log(&mut self, entry: TranscriptEntry) {
        self.transcript.push(entry);
    }

    fn set_mode(&mut self, to: Mode) {
        if to != self.mode {
            self.log(TranscriptEntry::Mode {
                from: self.mode,
                to,
            });
            self.mode = to;
        }
    }

    fn table_ref(&self) -> &InputTable {
        self.table.as_ref().expect("table loaded before recording")
    }

    fn step_count(&self) -> usize {
        self.table_ref().rows[self.row].steps.len()
    }

    fn step_text(&self, step: usize) -> StepText {
        self.table_ref().rows[self.row].steps[step].text.clone()
    }

    fn row_cells(&self) -> Vec<String> {
        self.table_ref().rows[self.row].cells.clone()
    }

    fn set_status(&mut self, step: usize, status: StepStatus) {
        let row = self.row;
        if let Some(t) = self.table.as_mut() {
            t.set_status(row, step, status);
        }
    }

    fn units(&self) -> Vec<ProgramUnit> {
        self.program
            .as_ref()
            .map(|p| p.units(self.step_count()))
            .unwrap_or_default()
    }

    /// Step whose slide is showing, if any.
    pub fn current_step(&self) -> Option<usize> {
        if self.completed || self.mode == Mode::Idle {
            return None;
        }
        if self.automated_row {
            match self.units().get(self.unit)? {
                ProgramUnit::Prologue(_) => (self.step_count() > 0).then_some(0),
                ProgramUnit::Step(s) => Some(*s),
                ProgramUnit::Epilogue(_) => None,
            }
        } else {
            match self.phase {
                Phase::Step(s) => Some(s),
                Phase::Epilogue => None,
            }
        }
    }

    fn begin_row(&mut self) -> Result<(), SessionError> {
        if self.row >= self.table_ref().rows.len() {
            self.completed = true;
            self.highlight = None;
            self.prediction = None;
            self.log(TranscriptEntry::Completed);
            return Ok(());
        }
        self.browser.reset()?;
        self.automated_row = matches!(self.mode, Mode::SemiAuto | Mode::FullAuto);
        self.pending_actions.clear();
        if self.automated_row {
            self.unit = 0;
            self.enter_unit();
        } else {
            let n = self.step_count();
            self.phase = if n > 0 { Phase::Step(0) } else { Phase::Epilogue };
            if n > 0 {
                self.set_status(0, StepStatus::Current);
            }
            self.step_starts = vec![(self.trace.len(), self.browser.clone())];
            self.row_actions.clear();
        }
        self.refresh_highlight();
        if self.mode == Mode::SemiAuto {
            self.predict()?;
        }
        Ok(())
    }

    fn enter_unit(&mut self) {
        if let Some(s) = self.current_step() {
            self.set_status(s, StepStatus::Current);
        }
    }

    /// Mark the current unit done and move on, finishing the row after the
    /// last unit.
    fn complete_unit(&mut self) -> Result<(), SessionError> {
        let units = self.units();
        match units[self.unit] {
            ProgramUnit::Prologue(i) if i + 1 == self.program.as_ref().map_or(0, |p| p.prologue.len()) => {
                self.set_status(0, StepStatus::Done)
            }
            ProgramUnit::Step(s) => self.set_status(s, StepStatus::Done),
            _ => {}
        }
        self.unit += 1;
        if self.unit >= units.len() {
            self.finish_row();
            if self.mode == Mode::SemiAuto {
                self.set_mode(Mode::FullAuto);
            }
            self.row += 1;
            self.begin_row()?;
        } else {
            self.enter_unit();
            self.refresh_highlight();
        }
        Ok(())
    }

    fn finish_row(&mut self) {
        let state = self.browser.doc().control_state();
        let source_index = self.table_ref().rows[self.row].source_index;
        self.outcomes.insert(source_index, state.clone());
        self.log(TranscriptEntry::RowFinished {
            row: self.row,
            source_index,
            state,
        });
    }

    fn refresh_highlight(&mut self) {
        let active = matches!(
            self.mode,
            Mode::Demonstrating | Mode::NeedsDemonstration | Mode::SemiAuto | Mode::Paused
        );
        let next = match self.current_step().filter(|_| active) {
            Some(s) => {
                let text = self.step_text(s);
                let doc = self.browser.doc();
                best_match(
                    &text,
                    &doc.text_candidates(),
                    self.config.page_threshold,
                    self.embedder.as_ref(),
                )
                .and_then(|(node, score)| {
                    Some(Highlight {
                        path: doc.node_path(node).ok()?,
                        control: doc
                            .associated_control(node)
                            .ok()
                            .and_then(|c| doc.node_path(c).ok()),
                        text: doc.node(node).ok()?.text.clone(),
                        score: round4(score),
                    })
                })
            }
            None => None,
        };
        if next != self.highlight {
            if let Some(step) = self.current_step() {
                self.log(TranscriptEntry::Highlight {
                    row: self.row,
                    step,
                    target: next.as_ref().map(|h| h.path.to_string()),
                    text: next.as_ref().map(|h| h.text.clone()),
                    score: next.as_ref().map(|h| h.score),
                });
            }
            self.highlight = next;
        }
    }

    fn would_expand(&self, target: &PathExpr) -> bool {
        let doc = self.browser.doc();
        let Ok(node) = doc.resolve_path(target, &Default::default()) else {
            return false;
        };
        let is_menu = |n| doc.node(n).is_ok_and(|n| n.tag == "menu");
        let menu = if is_menu(node) {
            Some(node)
        } else {
            doc.parent(node)
                .filter(|p| is_menu(*p) && doc.children(*p).first() == Some(&node))
        };
        menu.is_some_and(|m| doc.node(m).is_ok_and(|n| !n.is_expanded()))
    }

    fn user_event(
        &mut self,
        kind: UserEventKind,
        target: Option<PathExpr>,
        payload: Option<String>,
    ) -> Result<(), SessionError> {
        self.require("user-event", &[Mode::Demonstrating, Mode::NeedsDemonstration])?;
        let page = self.browser.doc().url().to_string();
        let step_ref = |s: &Self| match (s.mode, s.phase) {
            (Mode::Demonstrating, Phase::Step(step)) => Some(StepRef { row: s.row, step }),
            _ => None,
        };
        let action = match kind {
            UserEventKind::CancelHighlight => {
                if self.mode == Mode::Demonstrating {
                    let r = step_ref(self);
                    self.trace.push_marker(EventKind::CancelHighlight, &page, r);
                }
                if self.highlight.take().is_some() {
                    if let Some(step) = self.current_step() {
                        self.log(TranscriptEntry::Highlight {
                            row: self.row,
                            step,
                            target: None,
                            text: None,
                            score: None,
                        });
                    }
                }
                return Ok(());
            }
            UserEventKind::Click => ConcreteAction::click(target.ok_or(SessionError::MissingTarget("click"))?),
            UserEventKind::Select => {
                ConcreteAction::select(target.ok_or(SessionError::MissingTarget("select"))?)
            }
            UserEventKind::Input => ConcreteAction {
                kind: crate::dom::ActionKind::InputText,
                target: target.ok_or(SessionError::MissingTarget("input"))?,
                payload,
            },
        };
        let touches_highlight = self.highlight.as_ref().is_some_and(|h| {
            h.path == action.target || h.control.as_ref() == Some(&action.target)
        });
        let expands_menu = self.would_expand(&action.target);
        self.browser.perform(&action)?;
        self.log(TranscriptEntry::Applied {
            origin: Origin::Demonstrated,
            action: action.to_string(),
            page: page.clone(),
        });
        let demo = DemoAction {
            action: action.clone(),
            page: page.clone(),
            touches_highlight,
            expands_menu,
        };
        if self.mode == Mode::Demonstrating {
            let r = step_ref(self);
            self.trace.push_action(&action, &page, r);
            if let Phase::Step(s) = self.phase {
                self.row_actions.push((s, demo));
            }
        } else {
            self.pending_actions.push(demo);
        }
        self.refresh_highlight();
        Ok(())
    }

    fn advance(&mut self) -> Result<(), SessionError> {
        match self.mode {
            Mode::Demonstrating => {
                let Phase::Step(s) = self.phase else {
                    return Err(SessionError::AtEnd);
                };
                self.set_status(s, StepStatus::Done);
                let page = self.browser.doc().url().to_string();
                self.trace.push_marker(
                    EventKind::AdvanceStep,
                    &page,
                    Some(StepRef { row: self.row, step: s }),
                );
                if s + 1 < self.step_count() {
                    self.phase = Phase::Step(s + 1);
                    self.set_status(s + 1, StepStatus::Current);
                    self.step_starts.push((self.trace.len(), self.browser.clone()));
                } else {
                    self.phase = Phase::Epilogue;
                }
                self.refresh_highlight();
                Ok(())
            }
            Mode::NeedsDemonstration => self.resolve_demonstration(),
            mode => Err(SessionError::WrongMode {
                command: "advance",
                mode,
            }),
        }
    }

    /// Close a fallback demonstration: a step's actions become a new catalog
    /// entry, then automation continues with the next unit.
    fn resolve_demonstration(&mut self) -> Result<(), SessionError> {
        let unit = self.units()[self.unit];
        if let ProgramUnit::Step(s) = unit {
            let text = self.step_text(s);
            let cells = self.row_cells();
            let entry = self.catalog.record_mapping(
                &text,
                &self.pending_actions,
                &cells,
                self.embedder.as_ref(),
            )?;
            let recorded = TranscriptEntry::Recorded {
                key: entry.key.raw.clone(),
                template: entry.template.to_string(),
            };
            self.log(recorded);
        }
        self.pending_actions.clear();
        let back = self.resume.take().unwrap_or(Mode::FullAuto);
        self.set_mode(back);
        self.complete_unit()?;
        if self.mode == Mode::SemiAuto && !self.completed && self.prediction.is_none() {
            self.predict()?;
        }
        Ok(())
    }

    fn rewind(&mut self) -> Result<(), SessionError> {
        self.require("rewind", &[Mode::Demonstrating])?;
        let n = self.step_count();
        let (current, target) = match self.phase {
            Phase::Step(0) => return Err(SessionError::AtStart),
            Phase::Step(s) => (Some(s), s - 1),
            Phase::Epilogue if n == 0 => return Err(SessionError::AtStart),
            Phase::Epilogue => (None, n - 1),
        };
        let (len, page) = self.step_starts[target].clone();
        self.trace.truncate(len);
        self.step_starts.truncate(target + 1);
        self.row_actions.retain(|(s, _)| *s < target);
        self.browser = page;
        if let Some(s) = current {
            self.set_status(s, StepStatus::Pending);
        }
        self.set_status(target, StepStatus::Current);
        self.phase = Phase::Step(target);
        self.refresh_highlight();
        Ok(())
    }

    fn next_row(&mut self) -> Result<(), SessionError> {
        self.require("next-row", &[Mode::Demonstrating])?;
        if self.phase != Phase::Epilogue {
            return Err(SessionError::RowUnfinished);
        }
        // Step 0 is covered by the row prologue; later steps become entries.
        let cells = self.row_cells();
        let mut per_step: BTreeMap<usize, Vec<DemoAction>> = BTreeMap::new();
        for (s, a) in &self.row_actions {
            if *s > 0 {
                per_step.entry(*s).or_default().push(a.clone());
            }
        }
        for actions in per_step.values() {
            template_from_demo(actions, &cells)?;
        }
        for (s, actions) in &per_step {
            let text = self.step_text(*s);
            let entry = self
                .catalog
                .record_mapping(&text, actions, &cells, self.embedder.as_ref())?;
            let recorded = TranscriptEntry::Recorded {
                key: entry.key.raw.clone(),
                template: entry.template.to_string(),
            };
            self.transcript.push(recorded);
        }
        let page = self.browser.doc().url().to_string();
        let n = self.step_count();
        self.trace.push_marker(
            EventKind::NextRow,
            &page,
            Some(StepRef { row: self.row, step: n }),
        );
        self.finish_row();
        self.demonstrated.push(self.row);
        if self.demonstrated.len() >= 2 && self.program.is_none() {
            match synthesize(&self.trace, &self.table_ref().cells()) {
                Some(program) => {
                    self.log(TranscriptEntry::Synthesized {
                        prologue: program.prologue.len(),
                        epilogue: program.epilogue.len(),
                    });
                    self.program = Some(program);
                    self.set_mode(Mode::SemiAuto);
                }
                None => self.log(TranscriptEntry::SynthesisFailed),
            }
        }
        self.row += 1;
        self.begin_row()
    }

    fn exec_context<'a>(&'a self, cells: &'a [String]) -> ExecContext<'a> {
        ExecContext {
            embedder: self.embedder.as_ref(),
            page_threshold: self.config.page_threshold,
            row: cells,
            row_index: self.row,
        }
    }

    /// Instantiate the current unit. `Ok(None)` means the fallback
    /// (demonstration or pause) has been entered.
    fn plan_unit(&mut self) -> Result<Option<(Vec<ConcreteAction>, String)>, SessionError> {
        let unit = self.units()[self.unit];
        let cells = self.row_cells();
        let result = match unit {
            ProgramUnit::Step(s) => {
                let text = self.step_text(s);
                let lookup = self.catalog.lookup(
                    &text,
                    self.config.catalog_threshold,
                    self.embedder.as_ref(),
                );
                let (entry, score) = match lookup {
                    MatchResult::Hit { index, score } => (Some(index), score),
                    MatchResult::Miss { best_score } => (None, best_score),
                };
                self.log(TranscriptEntry::Lookup {
                    row: self.row,
                    step: s,
                    text: text.raw.clone(),
                    entry: entry.map(|i| self.catalog.entries()[i].key.raw.clone()),
                    score: round4(score),
                });
                let Some(index) = entry else {
                    self.enter_demonstration(format!(
                        "no catalog entry for \"{}\" (best {:.4})",
                        text.raw, score
                    ));
                    return Ok(None);
                };
                let key = self.catalog.entries()[index].key.raw.clone();
                self.catalog
                    .instantiate(index, &text, &self.browser, &self.exec_context(&cells))
                    .map(|a| (a, format!("\"{}\" as \"{}\"", text.raw, key)))
            }
            _ => {
                let program = self.program.as_ref().expect("automation has a program");
                let template = program.template(unit).expect("template unit");
                instantiate_template(template, None, &self.browser, &self.exec_context(&cells))
                    .map(|a| (a, format!("{unit:?}")))
            }
        };
        match result {
            Ok(plan) => Ok(Some(plan)),
            Err(InstantiateError::TargetNotFound(t)) => {
                self.enter_demonstration(format!("no element on the page matches \"{t}\""));
                Ok(None)
            }
            Err(InstantiateError::StructuralDrift(reason)) => {
                self.resume = Some(self.mode);
                self.set_mode(Mode::Paused);
                self.log(TranscriptEntry::Paused { reason });
                Ok(None)
            }
        }
    }

    fn enter_demonstration(&mut self, reason: String) {
        let step = self.current_step().unwrap_or(self.step_count());
        self.resume = Some(self.mode);
        self.set_mode(Mode::NeedsDemonstration);
        self.log(TranscriptEntry::NeedsDemonstration {
            row: self.row,
            step,
            reason,
        });
        self.pending_actions.clear();
        self.refresh_highlight();
    }

    fn apply_all(&mut self, actions: &[ConcreteAction], origin: Origin) -> Result<(), SessionError> {
        for a in actions {
            let page = self.browser.doc().url().to_string();
            self.browser.perform(a)?;
            self.log(TranscriptEntry::Applied {
                origin,
                action: a.to_string(),
                page,
            });
        }
        Ok(())
    }

    fn predict(&mut self) -> Result<(), SessionError> {
        if self.completed {
            return Ok(());
        }
        let unit = self.units()[self.unit];
        if let Some((actions, what)) = self.plan_unit()? {
            let shown: Vec<String> = actions.iter().map(ToString::to_string).collect();
            let description = format!("{what}: {}", shown.join(", "));
            self.log(TranscriptEntry::Prediction {
                row: self.row,
                description: description.clone(),
            });
            self.prediction = Some(Prediction {
                unit,
                actions,
                description,
            });
        }
        Ok(())
    }

    fn confirm(&mut self) -> Result<(), SessionError> {
        self.require("confirm", &[Mode::SemiAuto])?;
        let prediction = self.prediction.take().ok_or(SessionError::NoPrediction)?;
        self.apply_all(&prediction.actions, Origin::Confirmed)?;
        self.complete_unit()?;
        if self.mode == Mode::SemiAuto && !self.completed {
            self.predict()?;
        }
        Ok(())
    }

    fn cancel(&mut self) -> Result<(), SessionError> {
        self.require("cancel", &[Mode::SemiAuto])?;
        self.prediction.take().ok_or(SessionError::NoPrediction)?;
        self.enter_demonstration("prediction cancelled".to_string());
        Ok(())
    }

    fn tick(&mut self) -> Result<TickOutcome, SessionError> {
        if self.completed {
            return Ok(TickOutcome::Completed);
        }
        self.require("tick", &[Mode::FullAuto])?;
        let row = self.row;
        let Some((actions, _)) = self.plan_unit()? else {
            return Ok(match self.mode {
                Mode::NeedsDemonstration => TickOutcome::NeedsDemonstration {
                    row,
                    step: self.current_step().unwrap_or(self.step_count()),
                },
                _ => TickOutcome::Paused {
                    reason: match self.transcript.last() {
                        Some(TranscriptEntry::Paused { reason }) => reason.clone(),
                        _ => String::new(),
                    },
                },
            });
        };
        self.apply_all(&actions, Origin::Automated)?;
        self.complete_unit()?;
        Ok(if self.completed {
            TickOutcome::Completed
        } else if self.row != row {
            TickOutcome::RowFinished { row }
        } else {
            TickOutcome::Executed
        })
    }

    fn run(&mut self) -> Result<TickOutcome, SessionError> {
        loop {
            match self.tick()? {
                TickOutcome::Executed | TickOutcome::RowFinished { .. } => {}
                other => return Ok(other),
            }
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot::of(self)
    }
}

/// Replay the program for one row on a fresh page: prologue templates, the
/// catalog entry for each dispatched step, then the epilogue. Returns every
/// action in order.
pub fn replay_row(
    program: &AutomationProgram,
    catalog: &Catalog,
    row: &TableRow,
    row_index: usize,
    corpus: Arc<Corpus>,
    embedder: &dyn EmbeddingProvider,
    config: SessionConfig,
) -> Result<Vec<ConcreteAction>, SessionError> {
    let mut browser = Browser::new(corpus)?;
    let ctx = ExecContext {
        embedder,
        page_threshold: config.page_threshold,
        row: &row.cells,
        row_index,
    };
    let mut out = Vec::new();
    for unit in program.units(row.steps.len()) {
        let actions = match unit {
            ProgramUnit::Step(s) => {
                let text = &row.steps[s].text;
                match catalog.lookup(text, config.catalog_threshold, embedder) {
                    MatchResult::Hit { index, .. } => catalog.instantiate(index, text, &browser, &ctx),
                    MatchResult::Miss { .. } => Err(InstantiateError::TargetNotFound(text.raw.clone())),
                }
            }
            _ => instantiate_template(program.template(unit).expect("template unit"), None, &browser, &ctx),
        }?;
        for a in actions {
            browser.perform(&a)?;
            out.push(a);
        }
    }
    Ok(out)
}
