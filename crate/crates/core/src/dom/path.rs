//! Absolute and parametric node paths.
//!
//! A path is a list of `tag[index]` segments starting at the document root,
//! where `index` is the 1-based position among same-tag siblings. An index may
//! also be a hole (`li[$i{1,2}]`) that is filled from a binding map at
//! resolution time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DomError;

/// Per-row linear rule for a hole: at row `r` the index is `stride * r + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progression {
    pub stride: i64,
    pub offset: i64,
}

impl Progression {
    pub fn at(&self, row: usize) -> Option<u32> {
        let v = self.stride.checked_mul(row as i64)?.checked_add(self.offset)?;
        u32::try_from(v).ok().filter(|v| *v >= 1)
    }
}

/// A variable sibling index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hole {
    pub name: String,
    /// Indices seen in the demonstrations this hole generalizes. Never empty.
    pub observed: BTreeSet<u32>,
    /// Set by synthesis when the observed values follow the row counter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_row: Option<Progression>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathIndex {
    At(u32),
    Var(Hole),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSegment {
    pub tag: String,
    pub index: PathIndex,
}

/// Node path, possibly containing holes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PathExpr {
    segments: Vec<PathSegment>,
}

pub type Bindings = BTreeMap<String, u32>;

impl PathExpr {
    pub fn new(segments: Vec<PathSegment>) -> Self {
        Self { segments }
    }

    pub fn literal<'a>(parts: impl IntoIterator<Item = (&'a str, u32)>) -> Self {
        Self {
            segments: parts
                .into_iter()
                .map(|(tag, i)| PathSegment {
                    tag: tag.to_string(),
                    index: PathIndex::At(i),
                })
                .collect(),
        }
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn holes(&self) -> impl Iterator<Item = &Hole> {
        self.segments.iter().filter_map(|s| match &s.index {
            PathIndex::Var(h) => Some(h),
            PathIndex::At(_) => None,
        })
    }

    pub fn is_concrete(&self) -> bool {
        self.holes().next().is_none()
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.tag.as_str())
    }

    /// Substitute every hole from `bindings`.
    pub fn bind(&self, bindings: &Bindings) -> Result<PathExpr, DomError> {
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let index = match &s.index {
                    PathIndex::At(i) => *i,
                    PathIndex::Var(h) => *bindings
                        .get(&h.name)
                        .ok_or_else(|| DomError::UnboundVariable(h.name.clone()))?,
                };
                Ok(PathSegment {
                    tag: s.tag.clone(),
                    index: PathIndex::At(index),
                })
            })
            .collect::<Result<_, DomError>>()?;
        Ok(PathExpr { segments })
    }

    /// Mutable access used by synthesis to annotate holes.
    pub fn holes_mut(&mut self) -> impl Iterator<Item = &mut Hole> {
        self.segments.iter_mut().filter_map(|s| match &mut s.index {
            PathIndex::Var(h) => Some(h),
            PathIndex::At(_) => None,
        })
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match &seg.index {
                PathIndex::At(n) => write!(f, "{}[{}]", seg.tag, n)?,
                PathIndex::Var(h) => {
                    write!(f, "{}[${}{{", seg.tag, h.name)?;
                    for (j, v) in h.observed.iter().enumerate() {
                        if j > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{v}")?;
                    }
                    f.write_str("}")?;
                    if let Some(p) = h.per_row {
                        write!(f, "~{}r{:+}", p.stride, p.offset)?;
                    }
                    f.write_str("]")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for PathExpr {
    type Err = DomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomError::BadPath(s.to_string());
        let s = s.trim();
        if s.is_empty() {
            return Err(bad());
        }
        let mut segments = Vec::new();
        for part in s.split('/') {
            let open = part.find('[').ok_or_else(bad)?;
            if !part.ends_with(']') {
                return Err(bad());
            }
            let tag = &part[..open];
            if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(bad());
            }
            let inner = &part[open + 1..part.len() - 1];
            let index = if let Some(rest) = inner.strip_prefix('$') {
                parse_hole(rest).ok_or_else(bad)?
            } else {
                let n: u32 = inner.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                PathIndex::At(n)
            };
            segments.push(PathSegment {
                tag: tag.to_ascii_lowercase(),
                index,
            });
        }
        Ok(PathExpr { segments })
    }
}

// `name{1,2}` optionally followed by `~{stride}r{+offset}`
fn parse_hole(s: &str) -> Option<PathIndex> {
    let open = s.find('{')?;
    let close = s.find('}')?;
    let name = &s[..open];
    if name.is_empty() || close < open {
        return None;
    }
    let observed = s[open + 1..close]
        .split(',')
        .map(|v| v.trim().parse::<u32>().ok().filter(|v| *v >= 1))
        .collect::<Option<BTreeSet<_>>>()?;
    if observed.is_empty() {
        return None;
    }
    let tail = &s[close + 1..];
    let per_row = if tail.is_empty() {
        None
    } else {
        let body = tail.strip_prefix('~')?;
        let r = body.find('r')?;
        Some(Progression {
            stride: body[..r].parse().ok()?,
            offset: body[r + 1..].parse().ok()?,
        })
    };
    Some(PathIndex::Var(Hole {
        name: name.to_string(),
        observed,
        per_row,
    }))
}

impl From<PathExpr> for String {
    fn from(p: PathExpr) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for PathExpr {
    type Error = DomError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
