use std::collections::BTreeSet;

use thiserror::Error;

use crate::dom::{Hole, PathExpr, PathIndex, PathSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AntiUnifyError {
    #[error("paths differ in length or tags")]
    DifferentShape,
    /// More than one index varies; more demonstrations are needed.
    #[error("paths differ in more than one position")]
    TooManyHoles,
}

/// Least general path covering both `p` and `q`, with the hole named `i`.
pub fn antiunify(p: &PathExpr, q: &PathExpr) -> Result<PathExpr, AntiUnifyError> {
    antiunify_named(p, q, "i")
}

/// Anti-unify two paths that share a tag skeleton. A position whose indices
/// differ becomes a hole observing both values; holes already present absorb
/// the other side's value. At most one hole may result.
pub fn antiunify_named(p: &PathExpr, q: &PathExpr, name: &str) -> Result<PathExpr, AntiUnifyError> {
    if p.len() != q.len() || p.tags().ne(q.tags()) {
        return Err(AntiUnifyError::DifferentShape);
    }
    let mut holes = 0;
    let segments = p
        .segments()
        .iter()
        .zip(q.segments())
        .map(|(a, b)| {
            let index = match (&a.index, &b.index) {
                (PathIndex::At(x), PathIndex::At(y)) if x == y => PathIndex::At(*x),
                (PathIndex::At(x), PathIndex::At(y)) => PathIndex::Var(Hole {
                    name: name.to_string(),
                    observed: BTreeSet::from([*x, *y]),
                    per_row: None,
                }),
                (PathIndex::Var(h), PathIndex::At(v)) | (PathIndex::At(v), PathIndex::Var(h)) => {
                    let mut h = h.clone();
                    h.observed.insert(*v);
                    h.per_row = None;
                    PathIndex::Var(h)
                }
                (PathIndex::Var(h), PathIndex::Var(g)) => {
                    let mut h = h.clone();
                    h.observed.extend(g.observed.iter().copied());
                    h.per_row = None;
                    PathIndex::Var(h)
                }
            };
            if matches!(index, PathIndex::Var(_)) {
                holes += 1;
            }
            PathSegment {
                tag: a.tag.clone(),
                index,
            }
        })
        .collect();
    if holes > 1 {
        return Err(AntiUnifyError::TooManyHoles);
    }
    Ok(PathExpr::new(segments))
}
