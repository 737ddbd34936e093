//! Serializable view of a session for clients.

use serde::{Deserialize, Serialize};

use super::{Highlight, Mode, Session, StepStatus};
use crate::dom::RenderNode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub text: String,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellView {
    pub column: String,
    pub raw: String,
    pub steps: Vec<StepView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowView {
    pub source_index: usize,
    pub cells: Vec<CellView>,
}

/// Previous, current and next step of the active row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CarouselView {
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub seq: u64,
    pub mode: Mode,
    pub completed: bool,
    pub tick_ms: u64,
    pub rows: Vec<RowView>,
    pub carousel: CarouselView,
    pub page: String,
    pub render: RenderNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight: Option<Highlight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    pub catalog_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

impl SessionSnapshot {
    pub(super) fn of(s: &Session) -> Self {
        let rows = s
            .table
            .as_ref()
            .map(|t| {
                t.rows
                    .iter()
                    .map(|r| RowView {
                        source_index: r.source_index,
                        cells: r
                            .cells
                            .iter()
                            .enumerate()
                            .map(|(c, raw)| CellView {
                                column: t.columns[c].clone(),
                                raw: raw.clone(),
                                steps: r
                                    .steps
                                    .iter()
                                    .filter(|st| st.column == c)
                                    .map(|st| StepView {
                                        text: st.text.raw.clone(),
                                        status: st.status,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let mut carousel = CarouselView {
            row: s.row,
            ..Default::default()
        };
        if let (Some(t), false) = (s.table.as_ref(), s.completed || s.mode == Mode::Idle) {
            let steps = &t.rows[s.row].steps;
            let text = |i: usize| steps.get(i).map(|st| st.text.raw.clone());
            match s.current_step() {
                Some(i) => {
                    carousel.step = Some(i);
                    carousel.previous = i.checked_sub(1).and_then(text);
                    carousel.current = text(i);
                    carousel.next = text(i + 1);
                }
                None => carousel.previous = steps.len().checked_sub(1).and_then(text),
            }
        }
        Self {
            seq: s.seq,
            mode: s.mode,
            completed: s.completed,
            tick_ms: s.tick_ms,
            rows,
            carousel,
            page: s.browser.doc().url().to_string(),
            render: s.browser.doc().render(),
            highlight: s.highlight.clone(),
            prediction: s.prediction.as_ref().map(|p| p.description.clone()),
            catalog_size: s.catalog.len(),
            program: s.program.as_ref().map(|p| p.export()),
        }
    }
}
