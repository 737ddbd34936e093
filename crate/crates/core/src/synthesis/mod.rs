//! Trace generalization into a per-row automation program.
//!
//! A demonstration trace is cut into row segments at `NextRow` markers. Inside
//! a row, `AdvanceStep` markers separate the step slides: everything before the
//! first marker is the row prologue, everything after the last one is the
//! epilogue, and the slides in between are left to catalog dispatch. Prologue
//! and epilogue actions are aligned position by position across rows, their
//! targets anti-unified and their typed text bound to input columns.

mod antiunify;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::catalog::{ActionTemplate, ColumnBinding, TemplateItem};
use crate::dom::{ActionKind, ConcreteAction, PathExpr, PathIndex, Progression};

pub use antiunify::{antiunify, antiunify_named, AntiUnifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Click,
    InputText,
    SelectOption,
    CancelHighlight,
    AdvanceStep,
    NextRow,
}

impl EventKind {
    pub fn action_kind(self) -> Option<ActionKind> {
        match self {
            EventKind::Click => Some(ActionKind::Click),
            EventKind::InputText => Some(ActionKind::InputText),
            EventKind::SelectOption => Some(ActionKind::SelectOption),
            _ => None,
        }
    }
}

impl From<ActionKind> for EventKind {
    fn from(k: ActionKind) -> Self {
        match k {
            ActionKind::Click => EventKind::Click,
            ActionKind::InputText => EventKind::InputText,
            ActionKind::SelectOption => EventKind::SelectOption,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepRef {
    pub row: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PathExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    pub page: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepRef>,
}

impl ActionEvent {
    pub fn action(&self) -> Option<ConcreteAction> {
        Some(ConcreteAction {
            kind: self.kind.action_kind()?,
            target: self.target.clone()?,
            payload: self.payload.clone(),
        })
    }
}

/// Ordered record of demonstrated events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    events: Vec<ActionEvent>,
    next_seq: u64,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[ActionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push_action(&mut self, action: &ConcreteAction, page: &str, step: Option<StepRef>) {
        self.push(ActionEvent {
            seq: 0,
            kind: action.kind.into(),
            target: Some(action.target.clone()),
            payload: action.payload.clone(),
            page: page.to_string(),
            step,
        });
    }

    pub fn push_marker(&mut self, kind: EventKind, page: &str, step: Option<StepRef>) {
        self.push(ActionEvent {
            seq: 0,
            kind,
            target: None,
            payload: None,
            page: page.to_string(),
            step,
        });
    }

    /// Append with the next sequence number; InputText must carry text.
    pub fn push(&mut self, mut event: ActionEvent) {
        debug_assert!(
            event.kind != EventKind::InputText || event.payload.as_deref().is_some_and(|p| !p.is_empty())
        );
        event.seq = self.next_seq;
        self.next_seq += 1;
        self.events.push(event);
    }

    /// Drop events from the tail; sequence numbers keep increasing.
    pub fn truncate(&mut self, len: usize) {
        self.events.truncate(len);
    }

    /// Complete row segments (each closed by a `NextRow` marker).
    pub fn rows(&self) -> Vec<RowSegment<'_>> {
        let mut out = Vec::new();
        let mut buckets: Vec<Vec<&ActionEvent>> = vec![Vec::new()];
        for e in &self.events {
            match e.kind {
                EventKind::AdvanceStep => buckets.push(Vec::new()),
                EventKind::NextRow => {
                    let row = e.step.map_or(out.len(), |s| s.row);
                    let mut b = std::mem::replace(&mut buckets, vec![Vec::new()]);
                    let prologue = b.remove(0);
                    let epilogue = if b.is_empty() { Vec::new() } else { b.pop().unwrap() };
                    out.push(RowSegment {
                        row,
                        prologue,
                        steps: b,
                        epilogue,
                    });
                }
                EventKind::CancelHighlight => {}
                _ => buckets.last_mut().expect("nonempty").push(e),
            }
        }
        out
    }
}

/// The page actions of one demonstrated row, split by slide.
#[derive(Debug, Clone)]
pub struct RowSegment<'a> {
    pub row: usize,
    pub prologue: Vec<&'a ActionEvent>,
    /// Actions of steps 1..n-1 in order (step 0 is the prologue).
    pub steps: Vec<Vec<&'a ActionEvent>>,
    pub epilogue: Vec<&'a ActionEvent>,
}

/// Lowest column whose trimmed cell equals `payload` exactly.
pub fn detect_binding(payload: &str, row: &[String]) -> Option<ColumnBinding> {
    row.iter()
        .position(|cell| cell.trim() == payload)
        .map(|column| ColumnBinding { column })
}

fn matching_columns(payload: &str, row: &[String]) -> BTreeSet<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, c)| c.trim() == payload)
        .map(|(i, _)| i)
        .collect()
}

/// Which part of a row a program unit covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "unit", content = "index", rename_all = "snake_case")]
pub enum ProgramUnit {
    Prologue(usize),
    Step(usize),
    Epilogue(usize),
}

/// Per-row program: prologue templates, catalog dispatch of the row's steps,
/// epilogue templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomationProgram {
    pub prologue: Vec<ActionTemplate>,
    pub epilogue: Vec<ActionTemplate>,
    pub demonstrated_rows: Vec<usize>,
}

impl AutomationProgram {
    /// Step 0 is covered by the prologue when there is one.
    pub fn first_dispatched_step(&self) -> usize {
        usize::from(!self.prologue.is_empty())
    }

    /// Execution units for a row with `step_count` steps.
    pub fn units(&self, step_count: usize) -> Vec<ProgramUnit> {
        (0..self.prologue.len())
            .map(ProgramUnit::Prologue)
            .chain((self.first_dispatched_step()..step_count).map(ProgramUnit::Step))
            .chain((0..self.epilogue.len()).map(ProgramUnit::Epilogue))
            .collect()
    }

    pub fn template(&self, unit: ProgramUnit) -> Option<&ActionTemplate> {
        match unit {
            ProgramUnit::Prologue(i) => self.prologue.get(i),
            ProgramUnit::Epilogue(i) => self.epilogue.get(i),
            ProgramUnit::Step(_) => None,
        }
    }

    /// Human-readable, deterministic export.
    pub fn export(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AutomationProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "program").unwrap();
        let rows: Vec<String> = self.demonstrated_rows.iter().map(|r| (r + 1).to_string()).collect();
        writeln!(s, "demonstrated rows: {}", rows.join(", ")).unwrap();
        writeln!(s, "prologue: {} template(s)", self.prologue.len()).unwrap();
        for (i, t) in self.prologue.iter().enumerate() {
            writeln!(s, "  [{}] {}", i + 1, t).unwrap();
        }
        writeln!(
            s,
            "dispatch: steps {}.. via catalog",
            self.first_dispatched_step() + 1
        )
        .unwrap();
        writeln!(s, "epilogue: {} template(s)", self.epilogue.len()).unwrap();
        for (i, t) in self.epilogue.iter().enumerate() {
            writeln!(s, "  [{}] {}", i + 1, t).unwrap();
        }
        f.write_str(&s)
    }
}

/// Generalize a trace into a program. `rows` holds the cell values of every
/// table row by presentation index. Returns `None` when fewer than two rows
/// are complete or the rows do not align.
pub fn synthesize(trace: &Trace, rows: &[Vec<String>]) -> Option<AutomationProgram> {
    let segments = trace.rows();
    if segments.len() < 2 {
        return None;
    }
    let prologue = align(
        &segments.iter().map(|s| (s.row, s.prologue.as_slice())).collect::<Vec<_>>(),
        rows,
        "p",
    )?;
    let epilogue = align(
        &segments.iter().map(|s| (s.row, s.epilogue.as_slice())).collect::<Vec<_>>(),
        rows,
        "e",
    )?;
    Some(AutomationProgram {
        prologue,
        epilogue,
        demonstrated_rows: segments.iter().map(|s| s.row).collect(),
    })
}

fn align(
    per_row: &[(usize, &[&ActionEvent])],
    rows: &[Vec<String>],
    prefix: &str,
) -> Option<Vec<ActionTemplate>> {
    let (_, first) = per_row[0];
    let kinds: Vec<EventKind> = first.iter().map(|e| e.kind).collect();
    if per_row
        .iter()
        .any(|(_, evs)| evs.iter().map(|e| e.kind).ne(kinds.iter().copied()))
    {
        return None;
    }
    let mut templates = Vec::with_capacity(kinds.len());
    for (pos, kind) in kinds.iter().enumerate() {
        let events: Vec<(usize, &ActionEvent)> =
            per_row.iter().map(|(r, evs)| (*r, evs[pos])).collect();
        let name = format!("{prefix}{}", pos + 1);
        let mut path = events[0].1.target.clone()?;
        for (_, e) in &events[1..] {
            path = antiunify_named(&path, e.target.as_ref()?, &name).ok()?;
        }
        infer_progression(&mut path, &events);

        let action = kind.action_kind()?;
        let item = if action == ActionKind::InputText {
            let mut common: Option<BTreeSet<usize>> = None;
            for (r, e) in &events {
                let cols = matching_columns(e.payload.as_deref()?, rows.get(*r)?);
                common = Some(match common {
                    None => cols,
                    Some(c) => c.intersection(&cols).copied().collect(),
                });
            }
            match common.and_then(|c| c.first().copied()) {
                Some(column) => TemplateItem::BoundInput {
                    path,
                    binding: ColumnBinding { column },
                },
                None => {
                    let payload = events[0].1.payload.clone();
                    if events.iter().any(|(_, e)| e.payload != payload) {
                        return None;
                    }
                    TemplateItem::Fixed {
                        kind: action,
                        path,
                        payload,
                    }
                }
            }
        } else {
            TemplateItem::Fixed {
                kind: action,
                path,
                payload: None,
            }
        };
        templates.push(ActionTemplate::new(vec![item]).ok()?);
    }
    Some(templates)
}

/// When the hole's value moves linearly with the row index, record the rule so
/// later rows extrapolate instead of reusing an observed value.
fn infer_progression(path: &mut PathExpr, events: &[(usize, &ActionEvent)]) {
    let Some(pos) = path
        .segments()
        .iter()
        .position(|s| matches!(s.index, PathIndex::Var(_)))
    else {
        return;
    };
    let points: Vec<(i64, i64)> = events
        .iter()
        .filter_map(|(r, e)| match e.target.as_ref()?.segments().get(pos)?.index {
            PathIndex::At(v) => Some((*r as i64, i64::from(v))),
            PathIndex::Var(_) => None,
        })
        .collect();
    if points.len() != events.len() || points.len() < 2 {
        return;
    }
    let (r0, v0) = points[0];
    let (r1, v1) = points[1];
    if r1 == r0 || (v1 - v0) % (r1 - r0) != 0 {
        return;
    }
    let stride = (v1 - v0) / (r1 - r0);
    let offset = v0 - stride * r0;
    if stride == 0 || points.iter().any(|(r, v)| stride * r + offset != *v) {
        return;
    }
    if let Some(h) = path.holes_mut().next() {
        h.per_row = Some(Progression { stride, offset });
    }
}

#[cfg(test)]
mod tests;
