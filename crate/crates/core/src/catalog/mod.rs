//! Step → action-sequence mappings learned from demonstrations.

mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{ActionKind, Browser, ConcreteAction};
use crate::semantics::{similarity, EmbeddingProvider, EmbeddingVector, StepText};

pub use template::{
    instantiate_template, resolve_param, ActionTemplate, ColumnBinding, ExecContext,
    InstantiateError, TemplateError, TemplateItem,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("demonstration recorded no actions")]
    EmptyDemonstration,
    #[error("more than one action touched the highlighted element")]
    MultipleSemanticActs,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("catalog import: {0}")]
    Import(String),
}

/// One demonstrated action plus what the recorder observed about it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoAction {
    pub action: ConcreteAction,
    pub page: String,
    /// Acted on the highlighted text node or its associated control.
    pub touches_highlight: bool,
    /// Opened a collapsed menu.
    pub expands_menu: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub key: StepText,
    pub template: ActionTemplate,
    pub demonstrated_on: String,
    #[serde(skip)]
    embedding: Option<EmbeddingVector>,
}

impl CatalogEntry {
    pub fn embedding(&self) -> Option<&EmbeddingVector> {
        self.embedding.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchResult {
    Hit { index: usize, score: f64 },
    Miss { best_score: f64 },
}

/// Build a template from the actions demonstrated for one step.
///
/// The action on the highlighted element becomes the semantic target, menu
/// expansions before it become reveals, typed text equal to a row cell becomes
/// a column binding, and everything else is replayed by path.
pub fn template_from_demo(actions: &[DemoAction], row: &[String]) -> Result<ActionTemplate, CatalogError> {
    if actions.is_empty() {
        return Err(CatalogError::EmptyDemonstration);
    }
    let semantic: Vec<usize> = actions
        .iter()
        .enumerate()
        .filter(|(_, a)| a.touches_highlight)
        .map(|(i, _)| i)
        .collect();
    if semantic.len() > 1 {
        return Err(CatalogError::MultipleSemanticActs);
    }
    let target = semantic.first().copied();
    let items = actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if Some(i) == target && a.action.kind != ActionKind::InputText {
                return TemplateItem::Semantic {
                    kind: a.action.kind,
                };
            }
            if target.is_some_and(|t| i < t) && a.expands_menu {
                return TemplateItem::Reveal {
                    path: a.action.target.clone(),
                };
            }
            if a.action.kind == ActionKind::InputText {
                if let Some(col) = a
                    .action
                    .payload
                    .as_deref()
                    .and_then(|p| crate::synthesis::detect_binding(p, row))
                {
                    return TemplateItem::BoundInput {
                        path: a.action.target.clone(),
                        binding: col,
                    };
                }
            }
            TemplateItem::Fixed {
                kind: a.action.kind,
                path: a.action.target.clone(),
                payload: a.action.payload.clone(),
            }
        })
        .collect();
    Ok(ActionTemplate::new(items)?)
}

/// Append-only catalog of demonstrated step mappings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&CatalogEntry> {
        self.entries.get(index)
    }

    pub fn record_mapping(
        &mut self,
        step: &StepText,
        actions: &[DemoAction],
        row: &[String],
        embedder: &dyn EmbeddingProvider,
    ) -> Result<&CatalogEntry, CatalogError> {
        let template = template_from_demo(actions, row)?;
        self.entries.push(CatalogEntry {
            key: step.clone(),
            template,
            demonstrated_on: actions[0].page.clone(),
            embedding: Some(embedder.embed(&step.raw)),
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Most similar entry at or above `threshold`; earliest entry wins ties.
    pub fn lookup(
        &self,
        step: &StepText,
        threshold: f64,
        embedder: &dyn EmbeddingProvider,
    ) -> MatchResult {
        let q = embedder.embed(&step.raw);
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let s = match &e.embedding {
                Some(v) => similarity(&q, v),
                None => similarity(&q, &embedder.embed(&e.key.raw)),
            };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        match best {
            Some((index, score)) if score >= threshold => MatchResult::Hit { index, score },
            Some((_, best_score)) => MatchResult::Miss { best_score },
            None => MatchResult::Miss { best_score: 0.0 },
        }
    }

    /// Apply the entry's template for `step` on the current page. The
    /// semantic search runs on the new step's text, not the entry key.
    pub fn instantiate(
        &self,
        index: usize,
        step: &StepText,
        browser: &Browser,
        ctx: &ExecContext<'_>,
    ) -> Result<Vec<ConcreteAction>, InstantiateError> {
        let entry = &self.entries[index];
        instantiate_template(&entry.template, Some(step), browser, ctx)
    }

    /// Deterministic JSON export.
    pub fn export(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes") + "\n"
    }

    pub fn import(text: &str, embedder: &dyn EmbeddingProvider) -> Result<Self, CatalogError> {
        let mut catalog: Catalog =
            serde_json::from_str(text).map_err(|e| CatalogError::Import(e.to_string()))?;
        for e in &mut catalog.entries {
            e.embedding = Some(embedder.embed(&e.key.raw));
        }
        Ok(catalog)
    }
}

#[cfg(test)]
mod tests;
