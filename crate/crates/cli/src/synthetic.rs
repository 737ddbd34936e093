//! Seeded synthetic ordering tasks for checking reproduce-and-extend.
//!
//! A case is a small ordering site (search box, results list, item pages in
//! one of three markup layouts with shuffled options), `k + 1` table rows and
//! a hand-built demonstration of the first `k`. The generator knows which
//! controls every request refers to, so the expected final state of the last
//! row is written down directly rather than derived from the engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use demoflow_core::catalog::{Catalog, DemoAction};
use demoflow_core::dom::{Browser, ConcreteAction, ControlState, Corpus, DomDocument, PathExpr};
use demoflow_core::semantics::{HashedEmbedder, Lexicon, Stopwords};
use demoflow_core::session::{replay_row, InputTable, SessionConfig, TableRow};
use demoflow_core::synthesis::{synthesize, EventKind, StepRef, Trace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const FIRST: &[&str] = &[
    "Harbor", "Summit", "Maple", "Cedar", "Juniper", "Orchid", "Falcon", "Willow", "Copper", "Granite",
];
const SECOND: &[&str] = &["Bowl", "Wrap", "Melt", "Stack", "Platter", "Combo"];
const VENDORS: &[&str] = &["Dockside Grill", "Hilltop Kitchen", "Night Market"];
const TOGGLES: &[&str] = &["No onions", "No pickles", "Extra cheese", "Extra bacon", "No tomato", "Extra mustard"];
const SIDES: &[&str] = &["Soup", "Fries", "Salad", "Cookie"];
const SIZES: &[&str] = &["Small", "Medium", "Large"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    /// `ul > li > input + label[for]`
    List,
    /// `table > tr > td > span + input`
    Grid,
    /// `div > label > input + text`
    Wrapped,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Request {
    Toggle(&'static str),
    Side(&'static str),
    Size(&'static str),
}

impl Request {
    fn label(&self) -> &'static str {
        match self {
            Request::Toggle(l) | Request::Side(l) | Request::Size(l) => l,
        }
    }
}

#[derive(Debug, Clone)]
struct Item {
    name: String,
    layout: Layout,
    toggles: Vec<&'static str>,
    sides: Vec<&'static str>,
}

/// One generated task.
pub struct SyntheticCase {
    pub seed: u64,
    /// Number of demonstrated rows.
    pub k: usize,
    corpus: Arc<Corpus>,
    items: Vec<Item>,
    /// Requests of every row, with the phrase used in the table.
    requests: Vec<Vec<(Request, String)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticFailure {
    Setup(String),
    NoProgram,
    Replay { row: usize, detail: String },
    Extension { detail: String },
}

impl fmt::Display for SyntheticFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticFailure::Setup(s) => write!(f, "setup: {s}"),
            SyntheticFailure::NoProgram => write!(f, "no program synthesized"),
            SyntheticFailure::Replay { row, detail } => write!(f, "row {row} replay: {detail}"),
            SyntheticFailure::Extension { detail } => write!(f, "next row: {detail}"),
        }
    }
}

fn list_markup(out: &mut String, group: &str, labels: &[&str], radio: bool, layout: Layout) {
    let input = |id: &str| {
        if radio {
            format!("<input type=\"radio\" name=\"{group}\"{id}/>")
        } else {
            format!("<input type=\"checkbox\"{id}/>")
        }
    };
    match layout {
        Layout::List => {
            out.push_str("<ul>\n");
            for l in labels {
                let id = format!("{group}-{}", l.to_lowercase().replace(' ', "-"));
                out.push_str(&format!(
                    "<li>{}<label for=\"{id}\">{l}</label></li>\n",
                    input(&format!(" id=\"{id}\""))
                ));
            }
            out.push_str("</ul>\n");
        }
        Layout::Grid => {
            out.push_str("<table>\n");
            for l in labels {
                out.push_str(&format!("<tr><td><span>{l}</span>{}</td></tr>\n", input("")));
            }
            out.push_str("</table>\n");
        }
        Layout::Wrapped => {
            out.push_str("<div>\n");
            for l in labels {
                out.push_str(&format!("<label>{}{l}</label>\n", input("")));
            }
            out.push_str("</div>\n");
        }
    }
}

fn item_page(item: &Item, vendor: &str, sizes: &[&str]) -> String {
    let mut s = format!("<body>\n<h1>{}</h1>\n<div>\n<p>{vendor}</p>\n", item.name);
    s.push_str("<menu expanded=\"false\">\n<button>Sides</button>\n");
    list_markup(&mut s, "side", &item.sides, true, item.layout);
    s.push_str("</menu>\n");
    list_markup(&mut s, "opt", &item.toggles, false, item.layout);
    s.push_str("<select id=\"size\">\n");
    for z in sizes {
        s.push_str(&format!("<option>{z}</option>\n"));
    }
    s.push_str("</select>\n</div>\n<button submits=\"order\">Place Order</button>\n</body>\n");
    s
}

fn phrase(rng: &mut ChaCha8Rng, r: &Request) -> String {
    let l = r.label().to_lowercase();
    match (r, rng.gen_range(0..2)) {
        (Request::Toggle(_), 0) => l,
        (Request::Toggle(_), _) => format!("{l} please"),
        (Request::Side(_), 0) => l,
        (Request::Side(_), _) => format!("add {l}"),
        (Request::Size(_), 0) => l,
        (Request::Size(_), _) => format!("{l} size"),
    }
}

/// Up to `n` requests, at most one side and one size.
fn pick_requests(rng: &mut ChaCha8Rng, pool: &[Request], n: usize) -> Vec<Request> {
    let mut pool = pool.to_vec();
    pool.shuffle(rng);
    let mut out: Vec<Request> = Vec::new();
    for r in pool {
        if out.len() == n {
            break;
        }
        let clash = out.iter().any(|o| {
            matches!((o, &r), (Request::Side(_), Request::Side(_)) | (Request::Size(_), Request::Size(_)))
        });
        if !clash && !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

impl SyntheticCase {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=4);
        let mut names: Vec<String> = FIRST
            .iter()
            .flat_map(|a| SECOND.iter().map(move |b| format!("{a} {b}")))
            .collect();
        names.shuffle(&mut rng);
        let layouts = [Layout::List, Layout::Grid, Layout::Wrapped];
        let items: Vec<Item> = names[..=k]
            .iter()
            .map(|name| {
                let mut toggles = TOGGLES.to_vec();
                toggles.shuffle(&mut rng);
                let mut sides = SIDES.to_vec();
                sides.shuffle(&mut rng);
                Item {
                    name: name.clone(),
                    layout: *layouts.choose(&mut rng).expect("nonempty"),
                    toggles,
                    sides,
                }
            })
            .collect();

        let mut pages = BTreeMap::new();
        let mut home = String::from("<body>\n<h1>Lunch Line</h1>\n");
        for _ in 0..rng.gen_range(0..3) {
            home.push_str("<p>Fresh every morning</p>\n");
        }
        home.push_str("<input type=\"text\" id=\"search\" href=\"results:{value}\"/>\n</body>\n");
        pages.insert("home".to_string(), home);
        for item in &items {
            let vendor = VENDORS.choose(&mut rng).expect("nonempty");
            let mut results = format!(
                "<body>\n<h2>Search results</h2>\n<ul>\n<li><a href=\"item:{0}\">{0}</a><span>{vendor}</span></li>\n",
                item.name
            );
            for _ in 0..rng.gen_range(0..3) {
                results.push_str("<li><span>Sold out today</span></li>\n");
            }
            results.push_str("</ul>\n</body>\n");
            pages.insert(format!("results:{}", item.name), results);
            pages.insert(format!("item:{}", item.name), item_page(item, vendor, SIZES));
        }
        let corpus = Arc::new(Corpus::from_pages("home", pages).expect("generated markup parses"));

        let all: Vec<Request> = TOGGLES
            .iter()
            .map(|t| Request::Toggle(t))
            .chain(SIDES.iter().map(|s| Request::Side(s)))
            .chain(SIZES.iter().map(|s| Request::Size(s)))
            .collect();
        let mut requests: Vec<Vec<(Request, String)>> = Vec::new();
        for _ in 0..k {
            let n = rng.gen_range(1..=3);
            let row = pick_requests(&mut rng, &all, n);
            requests.push(row.into_iter().map(|r| (r.clone(), phrase(&mut rng, &r))).collect());
        }
        // The new row only asks for things that were demonstrated, worded the
        // same way, but on a page it has never seen.
        let seen: Vec<(Request, String)> = requests
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = rng.gen_range(1..=3);
        let mut shuffled = seen.clone();
        shuffled.shuffle(&mut rng);
        let mut last: Vec<(Request, String)> = Vec::new();
        for (r, p) in shuffled {
            if last.len() == n {
                break;
            }
            let clash = last.iter().any(|(o, _)| {
                *o == r
                    || (!matches!(r, Request::Toggle(_)) && std::mem::discriminant(o) == std::mem::discriminant(&r))
            });
            if !clash {
                last.push((r, p));
            }
        }
        requests.push(last);

        Self {
            seed,
            k,
            corpus,
            items,
            requests,
        }
    }

    fn row(&self, i: usize, stopwords: &Stopwords) -> Result<TableRow, SyntheticFailure> {
        let phrases: Vec<&str> = self.requests[i].iter().map(|(_, p)| p.as_str()).collect();
        let record = json!([{ "item": self.items[i].name, "requests": phrases.join(", ") }]);
        let table = InputTable::load(&record, stopwords).map_err(|e| SyntheticFailure::Setup(e.to_string()))?;
        let row = table.rows.into_iter().next().expect("one record");
        if row.steps.len() != phrases.len() + 1 {
            return Err(SyntheticFailure::Setup(format!("row {i} segmented into {} steps", row.steps.len())));
        }
        Ok(row)
    }

    /// Expected final state of the undemonstrated row.
    pub fn expected_last(&self) -> ControlState {
        let item = &self.items[self.k];
        let mut state = ControlState {
            page: format!("item:{}", item.name),
            submitted: 1,
            ..Default::default()
        };
        for (r, _) in &self.requests[self.k] {
            match r {
                Request::Toggle(l) | Request::Side(l) => {
                    state.checked.insert(l.to_string());
                }
                Request::Size(l) => {
                    state.values.insert("size".into(), l.to_string());
                }
            }
        }
        state
    }

    /// Demonstrate the first `k` rows, synthesize, then check that each
    /// demonstrated row replays to exactly its actions and that the extra
    /// row ends in the expected state.
    pub fn check(&self) -> Result<(), SyntheticFailure> {
        let embedder = HashedEmbedder::new(Lexicon::default());
        let stopwords = Stopwords::default();
        let config = SessionConfig::default();
        let rows: Vec<TableRow> = (0..=self.k).map(|i| self.row(i, &stopwords)).collect::<Result<_, _>>()?;
        let cells: Vec<Vec<String>> = rows.iter().map(|r| r.cells.clone()).collect();

        let mut trace = Trace::new();
        let mut catalog = Catalog::new();
        let mut demonstrated: Vec<Vec<ConcreteAction>> = Vec::new();
        for (i, row) in rows.iter().enumerate().take(self.k) {
            let mut browser = Browser::new(self.corpus.clone()).map_err(setup)?;
            let mut all = Vec::new();
            let mut act = |browser: &mut Browser, trace: &mut Trace, a: ConcreteAction, step: usize| {
                let page = browser.doc().url().to_string();
                browser.perform(&a).map_err(setup)?;
                trace.push_action(&a, &page, Some(StepRef { row: i, step }));
                all.push(a.clone());
                Ok::<_, SyntheticFailure>((a, page))
            };
            let search = find_path(browser.doc(), "input")?;
            act(&mut browser, &mut trace, ConcreteAction::input(search, self.items[i].name.clone()), 0)?;
            let link = control_for(browser.doc(), &self.items[i].name, false)?;
            act(&mut browser, &mut trace, ConcreteAction::click(link), 0)?;
            advance(&mut trace, &browser, i, 0);
            for (s, (req, _)) in self.requests[i].iter().enumerate() {
                let step = s + 1;
                let mut demo = Vec::new();
                if let Request::Side(_) = req {
                    let sides = control_for(browser.doc(), "Sides", false)?;
                    let (a, page) = act(&mut browser, &mut trace, ConcreteAction::click(sides), step)?;
                    demo.push(DemoAction {
                        action: a,
                        page,
                        touches_highlight: false,
                        expands_menu: true,
                    });
                }
                let target = control_for(browser.doc(), req.label(), true)?;
                let a = match req {
                    Request::Size(_) => ConcreteAction::select(target),
                    _ => ConcreteAction::click(target),
                };
                let (a, page) = act(&mut browser, &mut trace, a, step)?;
                demo.push(DemoAction {
                    action: a,
                    page,
                    touches_highlight: true,
                    expands_menu: false,
                });
                advance(&mut trace, &browser, i, step);
                catalog
                    .record_mapping(&row.steps[step].text, &demo, &row.cells, &embedder)
                    .map_err(setup)?;
            }
            let n = row.steps.len();
            let submit = find_path(browser.doc(), "button")?;
            act(&mut browser, &mut trace, ConcreteAction::click(submit), n)?;
            let page = browser.doc().url().to_string();
            trace.push_marker(EventKind::NextRow, &page, Some(StepRef { row: i, step: n }));
            demonstrated.push(all);
        }

        let program = synthesize(&trace, &cells).ok_or(SyntheticFailure::NoProgram)?;
        for (i, want) in demonstrated.iter().enumerate() {
            let got = replay_row(&program, &catalog, &rows[i], i, self.corpus.clone(), &embedder, config)
                .map_err(|e| SyntheticFailure::Replay {
                    row: i,
                    detail: e.to_string(),
                })?;
            if &got != want {
                return Err(SyntheticFailure::Replay {
                    row: i,
                    detail: format!("replayed {} actions, demonstrated {}: {}", got.len(), want.len(), diff(&got, want)),
                });
            }
        }
        let k = self.k;
        let actions = replay_row(&program, &catalog, &rows[k], k, self.corpus.clone(), &embedder, config)
            .map_err(|e| SyntheticFailure::Extension { detail: e.to_string() })?;
        let mut browser = Browser::new(self.corpus.clone()).map_err(setup)?;
        for a in &actions {
            browser.perform(a).map_err(|e| SyntheticFailure::Extension { detail: e.to_string() })?;
        }
        let got = browser.doc().control_state();
        let want = self.expected_last();
        if got != want {
            return Err(SyntheticFailure::Extension {
                detail: format!("got {got:?}, expected {want:?}"),
            });
        }
        Ok(())
    }
}

fn setup(e: impl fmt::Display) -> SyntheticFailure {
    SyntheticFailure::Setup(e.to_string())
}

fn advance(trace: &mut Trace, browser: &Browser, row: usize, step: usize) {
    let page = browser.doc().url().to_string();
    trace.push_marker(EventKind::AdvanceStep, &page, Some(StepRef { row, step }));
}

/// First element with this tag directly under `body`.
fn find_path(doc: &DomDocument, tag: &str) -> Result<PathExpr, SyntheticFailure> {
    let path: PathExpr = format!("body[1]/{tag}[1]").parse().map_err(setup)?;
    doc.resolve_path(&path, &Default::default()).map_err(setup)?;
    Ok(path)
}

fn control_for(doc: &DomDocument, text: &str, control: bool) -> Result<PathExpr, SyntheticFailure> {
    let node = doc
        .find_by_text(text)
        .ok_or_else(|| SyntheticFailure::Setup(format!("no \"{text}\" on {}", doc.url())))?;
    let node = if control { doc.associated_control(node).map_err(setup)? } else { node };
    doc.node_path(node).map_err(setup)
}

fn diff(got: &[ConcreteAction], want: &[ConcreteAction]) -> String {
    let at = got.iter().zip(want).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
    let show = |v: &[ConcreteAction]| v.get(at).map(|a| a.to_string()).unwrap_or_else(|| "<end>".into());
    format!("first difference at {at}: {} vs {}", show(got), show(want))
}

/// Outcome of a batch of cases.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSummary {
    pub cases: usize,
    pub failures: Vec<(u64, SyntheticFailure)>,
}

/// Generate and check `count` cases with seeds `seed, seed + 1, ...`.
pub fn run_batch(seed: u64, count: usize) -> SyntheticSummary {
    let failures = (0..count as u64)
        .filter_map(|i| {
            let s = seed.wrapping_add(i);
            SyntheticCase::generate(s).check().err().map(|f| (s, f))
        })
        .collect();
    SyntheticSummary { cases: count, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampered_expectation_is_caught() {
        let mut case = SyntheticCase::generate(3);
        assert_eq!(case.check(), Ok(()));
        // Ask the oracle for a different size than the row requests.
        let last = case.requests.last_mut().unwrap();
        last.retain(|(r, _)| !matches!(r, Request::Size(_)));
        let phrase = "large".to_string();
        last.push((Request::Size("Small"), phrase));
        assert!(matches!(case.check(), Err(SyntheticFailure::Extension { .. })));
    }

    #[test]
    fn page_markup_parses_for_every_layout() {
        for layout in [Layout::List, Layout::Grid, Layout::Wrapped] {
            let item = Item {
                name: "Maple Melt".into(),
                layout,
                toggles: TOGGLES.to_vec(),
                sides: SIDES.to_vec(),
            };
            let doc = DomDocument::parse(&item_page(&item, "Night Market", SIZES)).unwrap();
            for t in TOGGLES {
                let label = doc.find_by_text(t).unwrap();
                assert!(doc.associated_control(label).is_ok(), "{layout:?} {t}");
            }
        }
    }
}
