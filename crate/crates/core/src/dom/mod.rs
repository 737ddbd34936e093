//! Simplified DOM standing in for live web pages.
//!
//! Documents are parsed from a closed markup subset, addressed with
//! [`PathExpr`] selectors, and mutated only through [`DomDocument::apply_action`].
//! The tree shape never changes after parsing; visibility is driven solely by the
//! `expanded` flag on `menu` containers.

mod corpus;
mod parse;
mod path;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{Browser, Corpus};
pub use parse::SUPPORTED_TAGS;
pub use path::{Bindings, Hole, PathExpr, PathIndex, PathSegment, Progression};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomError {
    #[error("malformed markup at byte {position}: {reason}")]
    MalformedMarkup { position: usize, reason: String },
    #[error("node does not belong to this document")]
    ForeignNode,
    #[error("unbound path variable ${0}")]
    UnboundVariable(String),
    #[error("no node at {0}")]
    NoSuchNode(String),
    #[error("{action} is not applicable to {path}: {reason}")]
    NotInteractive {
        action: ActionKind,
        path: String,
        reason: String,
    },
    #[error("no control associated with {0}")]
    NoControl(String),
    #[error("page \"{0}\" is not in the corpus")]
    UnknownPage(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("bad path expression \"{0}\"")]
    BadPath(String),
}

static NEXT_DOC: AtomicU64 = AtomicU64::new(1);

/// Handle to a node inside one particular parsed document (and its clones).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    doc: u64,
    ix: u32,
}

impl NodeId {
    /// Position in document pre-order.
    pub fn preorder(&self) -> usize {
        self.ix as usize
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub tag: String,
    pub attributes: BTreeMap<String, String>,
    pub text: String,
    children: Vec<usize>,
    parent: Option<usize>,
}

impl Node {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    fn input_type(&self) -> &str {
        self.attr("type").unwrap_or("text")
    }

    pub fn is_checkable(&self) -> bool {
        self.tag == "input" && matches!(self.input_type(), "checkbox" | "radio")
    }

    pub fn is_checked(&self) -> bool {
        self.attr("checked").is_some_and(|v| v != "false")
    }

    pub fn is_expanded(&self) -> bool {
        self.attr("expanded").is_some_and(|v| v != "false")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Click,
    InputText,
    SelectOption,
}

impl std::fmt::Display for ActionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActionKind::Click => "click",
            ActionKind::InputText => "input",
            ActionKind::SelectOption => "select",
        })
    }
}

/// A fully resolved UI action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteAction {
    pub kind: ActionKind,
    pub target: PathExpr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl ConcreteAction {
    pub fn click(target: PathExpr) -> Self {
        Self {
            kind: ActionKind::Click,
            target,
            payload: None,
        }
    }

    pub fn input(target: PathExpr, text: impl Into<String>) -> Self {
        Self {
            kind: ActionKind::InputText,
            target,
            payload: Some(text.into()),
        }
    }

    pub fn select(target: PathExpr) -> Self {
        Self {
            kind: ActionKind::SelectOption,
            target,
            payload: None,
        }
    }
}

impl std::fmt::Display for ConcreteAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.kind, self.target)?;
        if let Some(p) = &self.payload {
            write!(f, " {p:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MutationResult {
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub navigated_to: Option<String>,
    pub revealed_nodes: usize,
}

/// Control states of one page, as compared by the row oracle.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlState {
    pub page: String,
    pub checked: BTreeSet<String>,
    pub values: BTreeMap<String, String>,
    pub submitted: u32,
}

#[derive(Debug, Clone)]
pub struct DomDocument {
    serial: u64,
    nodes: Vec<Node>,
    url: String,
    revision: u64,
}

const CANDIDATE_TAGS: &[&str] = &[
    "button", "a", "label", "option", "li", "span", "h1", "h2", "h3", "h4", "h5", "h6", "td", "p",
];

impl DomDocument {
    pub fn parse(source: &str) -> Result<Self, DomError> {
        parse::parse(source, "")
    }

    pub fn parse_page(source: &str, url: &str) -> Result<Self, DomError> {
        parse::parse(source, url)
    }

    fn from_nodes(nodes: Vec<Node>, url: &str) -> Self {
        Self {
            serial: NEXT_DOC.fetch_add(1, Ordering::Relaxed),
            nodes,
            url: url.to_string(),
            revision: 0,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn root(&self) -> NodeId {
        self.id(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn id(&self, ix: usize) -> NodeId {
        NodeId {
            doc: self.serial,
            ix: ix as u32,
        }
    }

    fn ix(&self, id: NodeId) -> Result<usize, DomError> {
        if id.doc == self.serial && (id.ix as usize) < self.nodes.len() {
            Ok(id.ix as usize)
        } else {
            Err(DomError::ForeignNode)
        }
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, DomError> {
        Ok(&self.nodes[self.ix(id)?])
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let ix = self.ix(id).ok()?;
        self.nodes[ix].parent.map(|p| self.id(p))
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.ix(id)
            .map(|ix| self.nodes[ix].children.iter().map(|c| self.id(*c)).collect())
            .unwrap_or_default()
    }

    /// All nodes in pre-order.
    pub fn all(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(|ix| self.id(ix))
    }

    fn subtree(&self, ix: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![ix];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    fn is_menu_header_ix(&self, ix: usize) -> bool {
        self.nodes[ix].parent.is_some_and(|p| {
            self.nodes[p].tag == "menu" && self.nodes[p].children.first() == Some(&ix)
        })
    }

    fn visible_ix(&self, ix: usize) -> bool {
        let mut child = ix;
        while let Some(p) = self.nodes[child].parent {
            let parent = &self.nodes[p];
            if parent.tag == "menu"
                && !parent.is_expanded()
                && parent.children.first() != Some(&child)
            {
                return false;
            }
            child = p;
        }
        true
    }

    pub fn is_visible(&self, id: NodeId) -> bool {
        self.ix(id).is_ok_and(|ix| self.visible_ix(ix))
    }

    fn interactive_ix(&self, ix: usize) -> bool {
        let n = &self.nodes[ix];
        matches!(
            n.tag.as_str(),
            "button" | "a" | "input" | "select" | "option" | "menu"
        ) || self.is_menu_header_ix(ix)
    }

    pub fn is_interactive(&self, id: NodeId) -> bool {
        self.ix(id).is_ok_and(|ix| self.interactive_ix(ix))
    }

    pub fn visible_count(&self) -> usize {
        (0..self.nodes.len()).filter(|ix| self.visible_ix(*ix)).count()
    }

    pub fn find_by_id(&self, id_attr: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.attr("id") == Some(id_attr))
            .map(|ix| self.id(ix))
    }

    /// First visible node in pre-order whose text equals `text` (case-insensitive).
    pub fn find_by_text(&self, text: &str) -> Option<NodeId> {
        let want = text.trim().to_lowercase();
        (0..self.nodes.len())
            .find(|ix| self.visible_ix(*ix) && self.nodes[*ix].text.to_lowercase() == want)
            .map(|ix| self.id(ix))
    }

    /// Visible, textual nodes eligible for semantic search, in pre-order.
    pub fn text_candidates(&self) -> Vec<(NodeId, String)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(ix, n)| {
                CANDIDATE_TAGS.contains(&n.tag.as_str())
                    && !n.text.trim().is_empty()
                    && self.visible_ix(*ix)
            })
            .map(|(ix, n)| (self.id(ix), n.text.trim().to_string()))
            .collect()
    }

    pub fn node_path(&self, id: NodeId) -> Result<PathExpr, DomError> {
        let mut ix = self.ix(id)?;
        let mut segments = Vec::new();
        loop {
            let node = &self.nodes[ix];
            let index = match node.parent {
                None => 1,
                Some(p) => {
                    1 + self.nodes[p]
                        .children
                        .iter()
                        .take_while(|c| **c != ix)
                        .filter(|c| self.nodes[**c].tag == node.tag)
                        .count() as u32
                }
            };
            segments.push(PathSegment {
                tag: node.tag.clone(),
                index: PathIndex::At(index),
            });
            match node.parent {
                Some(p) => ix = p,
                None => break,
            }
        }
        segments.reverse();
        Ok(PathExpr::new(segments))
    }

    pub fn resolve_path(&self, path: &PathExpr, bindings: &Bindings) -> Result<NodeId, DomError> {
        let concrete = path.bind(bindings)?;
        let missing = || DomError::NoSuchNode(concrete.to_string());
        let mut segs = concrete.segments().iter();
        let first = segs.next().ok_or_else(missing)?;
        if first.tag != self.nodes[0].tag || first.index != PathIndex::At(1) {
            return Err(missing());
        }
        let mut cur = 0usize;
        for seg in segs {
            let PathIndex::At(want) = seg.index else {
                unreachable!("bound path has no holes")
            };
            cur = *self.nodes[cur]
                .children
                .iter()
                .filter(|c| self.nodes[**c].tag == seg.tag)
                .nth(want as usize - 1)
                .ok_or_else(missing)?;
        }
        Ok(self.id(cur))
    }

    /// Resolution order: the node itself if interactive, the control named by
    /// its `for` attribute, its first interactive descendant, then the first
    /// interactive node under the nearest enclosing `li`/`td`.
    pub fn associated_control(&self, text_node: NodeId) -> Result<NodeId, DomError> {
        let ix = self.ix(text_node)?;
        if self.interactive_ix(ix) {
            return Ok(text_node);
        }
        if let Some(target) = self.nodes[ix].attr("for") {
            if let Some(c) = self.find_by_id(target) {
                return Ok(c);
            }
        }
        if let Some(c) = self.subtree(ix)
            .into_iter()
            .skip(1)
            .find(|c| self.interactive_ix(*c))
        {
            return Ok(self.id(c));
        }
        let mut up = self.nodes[ix].parent;
        while let Some(p) = up {
            if matches!(self.nodes[p].tag.as_str(), "li" | "td") {
                if let Some(c) = self.subtree(p).into_iter().find(|c| self.interactive_ix(*c)) {
                    return Ok(self.id(c));
                }
                break;
            }
            up = self.nodes[p].parent;
        }
        Err(DomError::NoControl(self.node_path(text_node)?.to_string()))
    }

    pub fn apply_action(&mut self, action: &ConcreteAction) -> Result<MutationResult, DomError> {
        let id = self.resolve_path(&action.target, &Bindings::new())?;
        let ix = self.ix(id)?;
        let refuse = |reason: &str| DomError::NotInteractive {
            action: action.kind,
            path: action.target.to_string(),
            reason: reason.to_string(),
        };
        if !self.visible_ix(ix) {
            return Err(refuse("target is hidden inside a collapsed menu"));
        }
        let result = match action.kind {
            ActionKind::Click => self.click(ix).ok_or_else(|| refuse("not clickable"))?,
            ActionKind::InputText => {
                let text = action
                    .payload
                    .as_deref()
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| refuse("input requires a nonempty payload"))?;
                let node = &self.nodes[ix];
                if node.tag != "input" || node.is_checkable() {
                    return Err(refuse("not a text input"));
                }
                let changed = node.attr("value") != Some(text);
                let navigated_to = node
                    .attr("href")
                    .filter(|h| h.contains("{value}"))
                    .map(|h| h.replace("{value}", text));
                self.nodes[ix]
                    .attributes
                    .insert("value".into(), text.to_string());
                MutationResult {
                    changed: changed || navigated_to.is_some(),
                    navigated_to,
                    revealed_nodes: 0,
                }
            }
            ActionKind::SelectOption => {
                if self.nodes[ix].tag != "option" {
                    return Err(refuse("not an option"));
                }
                self.select_option(ix)
                    .ok_or_else(|| refuse("option outside a select"))?
            }
        };
        if result.changed {
            self.revision += 1;
        }
        Ok(result)
    }

    fn click(&mut self, ix: usize) -> Option<MutationResult> {
        let tag = self.nodes[ix].tag.clone();
        let menu = if tag == "menu" {
            Some(ix)
        } else if self.is_menu_header_ix(ix) {
            self.nodes[ix].parent
        } else {
            None
        };
        if let Some(m) = menu {
            let before = self.visible_count();
            let open = !self.nodes[m].is_expanded();
            self.nodes[m]
                .attributes
                .insert("expanded".into(), open.to_string());
            let after = self.visible_count();
            return Some(MutationResult {
                changed: true,
                navigated_to: None,
                revealed_nodes: after.saturating_sub(before),
            });
        }
        let node = &self.nodes[ix];
        if node.is_checkable() {
            let radio = node.input_type() == "radio";
            if radio {
                if node.is_checked() {
                    return Some(MutationResult::default());
                }
                let group = node.attr("name").map(str::to_string);
                if let Some(group) = group {
                    for other in &mut self.nodes {
                        if other.tag == "input"
                            && other.attr("type") == Some("radio")
                            && other.attr("name") == Some(group.as_str())
                        {
                            other.attributes.remove("checked");
                        }
                    }
                }
                self.nodes[ix]
                    .attributes
                    .insert("checked".into(), "true".into());
            } else if node.is_checked() {
                self.nodes[ix].attributes.remove("checked");
            } else {
                self.nodes[ix]
                    .attributes
                    .insert("checked".into(), "true".into());
            }
            return Some(MutationResult {
                changed: true,
                navigated_to: None,
                revealed_nodes: 0,
            });
        }
        if tag == "option" {
            return self.select_option(ix);
        }
        if let Some(href) = node.attr("href").filter(|h| !h.contains("{value}")) {
            return Some(MutationResult {
                changed: true,
                navigated_to: Some(href.to_string()),
                revealed_nodes: 0,
            });
        }
        if tag == "button" && node.attr("submits").is_some() {
            let n: u32 = node.attr("submitted").and_then(|v| v.parse().ok()).unwrap_or(0);
            self.nodes[ix]
                .attributes
                .insert("submitted".into(), (n + 1).to_string());
            return Some(MutationResult {
                changed: true,
                navigated_to: None,
                revealed_nodes: 0,
            });
        }
        self.interactive_ix(ix).then(MutationResult::default)
    }

    fn select_option(&mut self, ix: usize) -> Option<MutationResult> {
        let mut up = self.nodes[ix].parent;
        while let Some(p) = up {
            if self.nodes[p].tag == "select" {
                break;
            }
            up = self.nodes[p].parent;
        }
        let select = up?;
        let opt = &self.nodes[ix];
        let value = opt.attr("value").unwrap_or(&opt.text).to_string();
        let changed = self.nodes[select].attr("value") != Some(value.as_str());
        self.nodes[select].attributes.insert("value".into(), value);
        Some(MutationResult {
            changed,
            navigated_to: None,
            revealed_nodes: 0,
        })
    }

    /// Human label for a control: its `label[for]`, else the text of its
    /// enclosing `li`/`td`, else its id.
    pub fn control_label(&self, id: NodeId) -> Option<String> {
        let ix = self.ix(id).ok()?;
        let node = &self.nodes[ix];
        if let Some(own) = node.attr("id") {
            if let Some(l) = self
                .nodes
                .iter()
                .find(|n| n.tag == "label" && n.attr("for") == Some(own))
            {
                return Some(l.text.clone());
            }
        }
        let mut up = node.parent;
        while let Some(p) = up {
            if matches!(self.nodes[p].tag.as_str(), "li" | "td" | "label") {
                let text: Vec<_> = self
                    .subtree(p)
                    .into_iter()
                    .map(|c| self.nodes[c].text.as_str())
                    .filter(|t| !t.is_empty())
                    .collect();
                if !text.is_empty() {
                    return Some(text.join(" "));
                }
            }
            up = self.nodes[p].parent;
        }
        node.attr("id").map(str::to_string)
    }

    pub fn control_state(&self) -> ControlState {
        let mut state = ControlState {
            page: self.url.clone(),
            ..Default::default()
        };
        for ix in 0..self.nodes.len() {
            let n = &self.nodes[ix];
            let key = || {
                n.attr("id")
                    .or(n.attr("name"))
                    .map(str::to_string)
                    .or_else(|| self.node_path(self.id(ix)).ok().map(|p| p.to_string()))
                    .unwrap_or_default()
            };
            if n.is_checkable() {
                if n.is_checked() {
                    let label = self.control_label(self.id(ix)).unwrap_or_else(key);
                    state.checked.insert(label);
                }
            } else if matches!(n.tag.as_str(), "input" | "select") {
                if let Some(v) = n.attr("value").filter(|v| !v.is_empty()) {
                    state.values.insert(key(), v.to_string());
                }
            } else if n.tag == "button" {
                if let Some(s) = n.attr("submitted").and_then(|v| v.parse::<u32>().ok()) {
                    state.submitted += s;
                }
            }
        }
        state
    }

    /// Serializable render tree for snapshots.
    pub fn render(&self) -> RenderNode {
        self.render_ix(0)
    }

    fn render_ix(&self, ix: usize) -> RenderNode {
        let n = &self.nodes[ix];
        RenderNode {
            tag: n.tag.clone(),
            attributes: n.attributes.clone(),
            text: n.text.clone(),
            visible: self.visible_ix(ix),
            interactive: self.interactive_ix(ix),
            children: n.children.iter().map(|c| self.render_ix(*c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderNode {
    pub tag: String,
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    pub visible: bool,
    pub interactive: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<RenderNode>,
}
