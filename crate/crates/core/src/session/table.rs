//! The uploaded request table, segmented into steps.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SessionError;
use crate::semantics::{segment_steps, StepText, Stopwords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepStatus {
    Pending,
    Current,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStep {
    pub column: usize,
    pub text: StepText,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    /// Position of the record in the uploaded file.
    pub source_index: usize,
    pub cells: Vec<String>,
    /// Steps of every cell, in column order.
    pub steps: Vec<TaskStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputTable {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl InputTable {
    /// Parse a JSON array of flat string records, segment every cell, and
    /// order rows by descending step count (stable).
    pub fn load(json: &Value, stopwords: &Stopwords) -> Result<Self, SessionError> {
        let records = json
            .as_array()
            .ok_or_else(|| SessionError::InvalidInput("expected a top-level array".into()))?;
        let first = records.first().ok_or(SessionError::EmptyInput)?;
        let columns: Vec<String> = first
            .as_object()
            .ok_or_else(|| SessionError::InvalidInput("record 0 is not an object".into()))?
            .keys()
            .cloned()
            .collect();
        let mut rows = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let obj = rec
                .as_object()
                .ok_or_else(|| SessionError::InvalidInput(format!("record {i} is not an object")))?;
            if obj.len() != columns.len() || columns.iter().any(|c| !obj.contains_key(c)) {
                return Err(SessionError::NonRectangular { record: i });
            }
            let mut cells = Vec::with_capacity(columns.len());
            let mut steps = Vec::new();
            for (col, name) in columns.iter().enumerate() {
                let raw = obj[name].as_str().ok_or_else(|| {
                    SessionError::InvalidInput(format!("record {i} field \"{name}\" is not a string"))
                })?;
                steps.extend(segment_steps(raw, stopwords).into_iter().map(|text| TaskStep {
                    column: col,
                    text,
                    status: StepStatus::Pending,
                }));
                cells.push(raw.to_string());
            }
            rows.push(TableRow {
                source_index: i,
                cells,
                steps,
            });
        }
        rows.sort_by(|a, b| b.steps.len().cmp(&a.steps.len()));
        Ok(Self { columns, rows })
    }

    pub fn parse(text: &str, stopwords: &Stopwords) -> Result<Self, SessionError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| SessionError::InvalidInput(e.to_string()))?;
        Self::load(&v, stopwords)
    }

    pub fn cells(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(|r| r.cells.clone()).collect()
    }

    pub fn step(&self, row: usize, step: usize) -> Option<&TaskStep> {
        self.rows.get(row)?.steps.get(step)
    }

    pub fn set_status(&mut self, row: usize, step: usize, status: StepStatus) {
        if let Some(s) = self.rows.get_mut(row).and_then(|r| r.steps.get_mut(step)) {
            s.status = status;
        }
    }

    pub fn current(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for (s, step) in row.steps.iter().enumerate() {
                if step.status == StepStatus::Current {
                    out.push((r, s));
                }
            }
        }
        out
    }

    pub fn edit(&mut self, row: usize, step: usize, text: &str) -> Result<&TaskStep, SessionError> {
        let target = self
            .rows
            .get_mut(row)
            .and_then(|r| r.steps.get_mut(step))
            .ok_or(SessionError::BadIndex { row, step })?;
        target.text = StepText::new(text).ok_or(SessionError::InvalidEdit)?;
        Ok(target)
    }
}
