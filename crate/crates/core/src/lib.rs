//! Programming-by-demonstration engine for data-entry web tasks.
//!
//! A structured request file is segmented into steps, the user demonstrates a
//! couple of rows against a simulated site, and the engine turns that into a
//! per-row program whose step actions are chosen by semantic matching against
//! a catalog of demonstrated step mappings.

pub mod dom;
pub mod semantics;
pub mod catalog;
pub mod synthesis;
pub mod session;

pub use catalog::{ActionTemplate, Catalog, CatalogEntry, MatchResult, TemplateItem};
pub use dom::{ActionKind, Browser, ConcreteAction, ControlState, Corpus, DomDocument, DomError, PathExpr};
pub use semantics::{EmbeddingProvider, HashedEmbedder, Lexicon, StepText};
pub use session::{Command, Mode, Session, SessionConfig, SessionError, SessionSnapshot, TickOutcome};
pub use synthesis::{AutomationProgram, Trace};
