use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{ConcreteAction, DomDocument, DomError, MutationResult};

#[derive(Debug, Deserialize)]
struct Manifest {
    entry: String,
    pages: BTreeMap<String, String>,
}

/// A mock site: page identifiers mapped to markup, plus an entry page.
#[derive(Debug, Clone)]
pub struct Corpus {
    entry: String,
    pages: BTreeMap<String, String>,
}

impl Corpus {
    /// Load `manifest.json` from `dir`; every page is parsed once up front so
    /// markup errors surface at load time.
    pub fn open(dir: &Path) -> Result<Self, DomError> {
        let manifest_path = dir.join("manifest.json");
        let raw = std::fs::read_to_string(&manifest_path)
            .map_err(|e| DomError::Corpus(format!("{}: {e}", manifest_path.display())))?;
        let manifest: Manifest = serde_json::from_str(&raw)
            .map_err(|e| DomError::Corpus(format!("{}: {e}", manifest_path.display())))?;
        let mut pages = BTreeMap::new();
        for (id, file) in manifest.pages {
            let path = dir.join(&file);
            let source = std::fs::read_to_string(&path)
                .map_err(|e| DomError::Corpus(format!("{}: {e}", path.display())))?;
            pages.insert(id, source);
        }
        Self::from_pages(manifest.entry, pages)
    }

    pub fn from_pages(
        entry: impl Into<String>,
        pages: BTreeMap<String, String>,
    ) -> Result<Self, DomError> {
        let entry = entry.into();
        if !pages.contains_key(&entry) {
            return Err(DomError::UnknownPage(entry));
        }
        for (id, src) in &pages {
            DomDocument::parse_page(src, id).map_err(|e| match e {
                DomError::MalformedMarkup { position, reason } => DomError::MalformedMarkup {
                    position,
                    reason: format!("page \"{id}\": {reason}"),
                },
                other => other,
            })?;
        }
        Ok(Self { entry, pages })
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn contains(&self, id: &str) -> bool {
        self.pages.contains_key(id)
    }

    pub fn page_ids(&self) -> impl Iterator<Item = &str> {
        self.pages.keys().map(String::as_str)
    }

    pub fn source(&self, id: &str) -> Option<&str> {
        self.pages.get(id).map(String::as_str)
    }

    /// Fresh copy of a page with revision 0.
    pub fn load(&self, id: &str) -> Result<DomDocument, DomError> {
        let src = self
            .pages
            .get(id)
            .ok_or_else(|| DomError::UnknownPage(id.to_string()))?;
        DomDocument::parse_page(src, id)
    }
}

/// The current page of a corpus plus navigation.
#[derive(Debug, Clone)]
pub struct Browser {
    corpus: Arc<Corpus>,
    doc: DomDocument,
}

impl Browser {
    pub fn new(corpus: Arc<Corpus>) -> Result<Self, DomError> {
        let doc = corpus.load(corpus.entry())?;
        Ok(Self { corpus, doc })
    }

    pub fn doc(&self) -> &DomDocument {
        &self.doc
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn goto(&mut self, id: &str) -> Result<(), DomError> {
        self.doc = self.corpus.load(id)?;
        Ok(())
    }

    pub fn reset(&mut self) -> Result<(), DomError> {
        let entry = self.corpus.entry().to_string();
        self.goto(&entry)
    }

    /// Apply an action; navigation replaces the document. Fails atomically.
    pub fn perform(&mut self, action: &ConcreteAction) -> Result<MutationResult, DomError> {
        let mut next = self.doc.clone();
        let result = next.apply_action(action)?;
        match &result.navigated_to {
            Some(target) => self.doc = self.corpus.load(target)?,
            None => self.doc = next,
        }
        Ok(result)
    }
}
