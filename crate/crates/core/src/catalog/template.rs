//! Reusable action sequences and their execution against the current page.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{ActionKind, Bindings, Browser, ConcreteAction, DomError, NodeId, PathExpr};
use crate::semantics::{best_match, EmbeddingProvider, StepText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBinding {
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum TemplateItem {
    /// Act on a recorded path.
    Fixed {
        kind: ActionKind,
        path: PathExpr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<String>,
    },
    /// Act on the control associated with the best page match for the step text.
    Semantic { kind: ActionKind },
    /// Expand the menu at `path` unless it is already open.
    Reveal { path: PathExpr },
    /// Type the row's cell value into `path`.
    BoundInput {
        path: PathExpr,
        binding: ColumnBinding,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template has more than one semantic target")]
    MultipleSemanticTargets,
    #[error("reveal items must precede the semantic target")]
    RevealAfterTarget,
    #[error("semantic targets only click or select")]
    BadSemanticKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TemplateItem>", into = "Vec<TemplateItem>")]
pub struct ActionTemplate {
    items: Vec<TemplateItem>,
}

impl ActionTemplate {
    pub fn new(items: Vec<TemplateItem>) -> Result<Self, TemplateError> {
        let mut seen_target = false;
        for item in &items {
            match item {
                TemplateItem::Semantic { kind } => {
                    if seen_target {
                        return Err(TemplateError::MultipleSemanticTargets);
                    }
                    if *kind == ActionKind::InputText {
                        return Err(TemplateError::BadSemanticKind);
                    }
                    seen_target = true;
                }
                TemplateItem::Reveal { .. } if seen_target => {
                    return Err(TemplateError::RevealAfterTarget)
                }
                _ => {}
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[TemplateItem] {
        &self.items
    }

    pub fn has_semantic_target(&self) -> bool {
        self.items
            .iter()
            .any(|i| matches!(i, TemplateItem::Semantic { .. }))
    }
}

impl TryFrom<Vec<TemplateItem>> for ActionTemplate {
    type Error = TemplateError;
    fn try_from(items: Vec<TemplateItem>) -> Result<Self, Self::Error> {
        Self::new(items)
    }
}

impl From<ActionTemplate> for Vec<TemplateItem> {
    fn from(t: ActionTemplate) -> Self {
        t.items
    }
}

impl fmt::Display for TemplateItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateItem::Fixed {
                kind,
                path,
                payload: Some(p),
            } => write!(f, "{kind} {path} {p:?}"),
            TemplateItem::Fixed { kind, path, .. } => write!(f, "{kind} {path}"),
            TemplateItem::Semantic { kind } => write!(f, "{kind} <best match for step>"),
            TemplateItem::Reveal { path } => write!(f, "reveal {path}"),
            TemplateItem::BoundInput { path, binding } => {
                write!(f, "input {path} <- column {}", binding.column)
            }
        }
    }
}

impl fmt::Display for ActionTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.items.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    /// The page search found nothing usable for the step text.
    #[error("no page element matches \"{0}\"")]
    TargetNotFound(String),
    /// A recorded path does not resolve on this page.
    #[error("structural drift: {0}")]
    StructuralDrift(String),
}

/// What a template needs from the running session.
pub struct ExecContext<'a> {
    pub embedder: &'a dyn EmbeddingProvider,
    pub page_threshold: f64,
    pub row: &'a [String],
    /// Presentation index of the row, used by per-row path holes.
    pub row_index: usize,
}

/// Resolve a possibly parametric path on the current page. Literal paths
/// resolve directly; a hole tries its per-row value first, then each observed
/// value in ascending order.
pub fn resolve_param(
    browser: &Browser,
    path: &PathExpr,
    row_index: usize,
) -> Result<(NodeId, PathExpr), DomError> {
    let doc = browser.doc();
    if path.is_concrete() {
        return doc.resolve_path(path, &Bindings::new()).map(|n| (n, path.clone()));
    }
    let holes: Vec<_> = path.holes().cloned().collect();
    let mut choices: Vec<Bindings> = vec![Bindings::new()];
    for hole in &holes {
        let mut values: Vec<u32> = hole.per_row.and_then(|p| p.at(row_index)).into_iter().collect();
        for v in &hole.observed {
            if !values.contains(v) {
                values.push(*v);
            }
        }
        choices = choices
            .into_iter()
            .flat_map(|b| {
                values.iter().map(move |v| {
                    let mut b = b.clone();
                    b.insert(hole.name.clone(), *v);
                    b
                })
            })
            .collect();
    }
    for b in &choices {
        if let Ok(n) = doc.resolve_path(path, b) {
            return Ok((n, path.bind(b)?));
        }
    }
    Err(DomError::NoSuchNode(path.to_string()))
}

/// Instantiate `template` against the live page without touching it. Items are
/// simulated on a scratch copy so later items see the effect of earlier ones
/// (a reveal exposes the options the semantic search then looks at).
pub fn instantiate_template(
    template: &ActionTemplate,
    step: Option<&StepText>,
    browser: &Browser,
    ctx: &ExecContext<'_>,
) -> Result<Vec<ConcreteAction>, InstantiateError> {
    let mut scratch = browser.clone();
    let mut out = Vec::new();
    let drift = |e: DomError| InstantiateError::StructuralDrift(e.to_string());
    for item in &template.items {
        let action = match item {
            TemplateItem::Fixed {
                kind,
                path,
                payload,
            } => {
                let (_, concrete) = resolve_param(&scratch, path, ctx.row_index).map_err(drift)?;
                Some(ConcreteAction {
                    kind: *kind,
                    target: concrete,
                    payload: payload.clone(),
                })
            }
            TemplateItem::BoundInput { path, binding } => {
                let (_, concrete) = resolve_param(&scratch, path, ctx.row_index).map_err(drift)?;
                let value = ctx
                    .row
                    .get(binding.column)
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| {
                        InstantiateError::StructuralDrift(format!(
                            "row has no value in column {}",
                            binding.column
                        ))
                    })?;
                Some(ConcreteAction::input(concrete, value))
            }
            TemplateItem::Reveal { path } => {
                let (node, concrete) = resolve_param(&scratch, path, ctx.row_index).map_err(drift)?;
                let doc = scratch.doc();
                let menu = match doc.node(node).map_err(drift)?.tag.as_str() {
                    "menu" => Some(node),
                    _ => doc.parent(node).filter(|p| {
                        doc.node(*p).is_ok_and(|n| n.tag == "menu")
                            && doc.children(*p).first() == Some(&node)
                    }),
                };
                let open = menu.is_some_and(|m| doc.node(m).is_ok_and(|n| n.is_expanded()));
                (!open).then(|| ConcreteAction::click(concrete))
            }
            TemplateItem::Semantic { kind } => {
                let step = step.ok_or_else(|| {
                    InstantiateError::TargetNotFound("<no step text>".to_string())
                })?;
                let doc = scratch.doc();
                let not_found = || InstantiateError::TargetNotFound(step.raw.clone());
                let (hit, _) = best_match(step, &doc.text_candidates(), ctx.page_threshold, ctx.embedder)
                    .ok_or_else(not_found)?;
                let control = doc.associated_control(hit).map_err(|_| not_found())?;
                let target = doc.node_path(control).map_err(drift)?;
                Some(ConcreteAction {
                    kind: *kind,
                    target,
                    payload: None,
                })
            }
        };
        if let Some(action) = action {
            scratch.perform(&action).map_err(|e| match (item, e) {
                (TemplateItem::Semantic { .. }, _) => {
                    InstantiateError::TargetNotFound(step.map(|s| s.raw.clone()).unwrap_or_default())
                }
                (_, e) => drift(e),
            })?;
            out.push(action);
        }
    }
    Ok(out)
}
