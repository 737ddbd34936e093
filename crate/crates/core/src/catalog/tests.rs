use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::dom::{Corpus, PathExpr};
use crate::semantics::{HashedEmbedder, Lexicon};

fn p(s: &str) -> PathExpr {
    s.parse().unwrap()
}

fn step(s: &str) -> StepText {
    StepText::new(s).unwrap()
}

fn demo(action: ConcreteAction, touches_highlight: bool, expands_menu: bool) -> DemoAction {
    DemoAction {
        action,
        page: "item".into(),
        touches_highlight,
        expands_menu,
    }
}

/// Looks texts up in a fixed table; unknown texts embed to zero.
struct TableEmbedder(BTreeMap<String, Vec<f64>>);

impl EmbeddingProvider for TableEmbedder {
    fn embed(&self, text: &str) -> EmbeddingVector {
        EmbeddingVector::new(self.0.get(text).cloned().unwrap_or_else(|| vec![0.0; 3]))
    }
}

fn table(entries: &[(&str, [f64; 3])]) -> TableEmbedder {
    TableEmbedder(entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect())
}

fn oracle_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn click_entry() -> Vec<DemoAction> {
    vec![demo(ConcreteAction::click(p("body[1]/ul[1]/li[1]/input[1]")), true, false)]
}

#[test]
fn template_classifies_demo_actions() {
    let actions = vec![
        demo(ConcreteAction::click(p("body[1]/menu[1]/button[1]")), false, true),
        demo(ConcreteAction::input(p("body[1]/input[1]"), "Pad Thai"), false, false),
        demo(ConcreteAction::input(p("body[1]/input[2]"), "note"), false, false),
        demo(ConcreteAction::click(p("body[1]/menu[1]/ul[1]/li[2]/input[1]")), true, false),
        demo(ConcreteAction::click(p("body[1]/button[2]")), false, true),
    ];
    let row = vec!["Pad Thai".to_string(), "no peanuts".to_string()];
    let t = template_from_demo(&actions, &row).unwrap();
    assert_eq!(
        t.items(),
        [
            TemplateItem::Reveal { path: p("body[1]/menu[1]/button[1]") },
            TemplateItem::BoundInput {
                path: p("body[1]/input[1]"),
                binding: ColumnBinding { column: 0 }
            },
            TemplateItem::Fixed {
                kind: ActionKind::InputText,
                path: p("body[1]/input[2]"),
                payload: Some("note".into())
            },
            TemplateItem::Semantic { kind: ActionKind::Click },
            // An expansion after the target is replayed as a plain click.
            TemplateItem::Fixed {
                kind: ActionKind::Click,
                path: p("body[1]/button[2]"),
                payload: None
            },
        ]
    );
}

#[test]
fn template_rejects_empty_and_double_targets() {
    assert_eq!(template_from_demo(&[], &[]), Err(CatalogError::EmptyDemonstration));
    let two = [click_entry(), click_entry()].concat();
    assert_eq!(template_from_demo(&two, &[]), Err(CatalogError::MultipleSemanticActs));
}

#[test]
fn template_rejects_bad_item_orders() {
    let semantic = TemplateItem::Semantic { kind: ActionKind::Click };
    let reveal = TemplateItem::Reveal { path: p("body[1]/menu[1]") };
    assert_eq!(
        ActionTemplate::new(vec![semantic.clone(), semantic.clone()]),
        Err(TemplateError::MultipleSemanticTargets)
    );
    assert_eq!(
        ActionTemplate::new(vec![semantic, reveal]),
        Err(TemplateError::RevealAfterTarget)
    );
    assert_eq!(
        ActionTemplate::new(vec![TemplateItem::Semantic { kind: ActionKind::InputText }]),
        Err(TemplateError::BadSemanticKind)
    );
}

#[test]
fn lookup_hits_misses_and_ties() {
    let emb = table(&[
        ("no cheese", [1.0, 0.0, 0.0]),
        ("no onions", [1.0, 0.0, 0.0]),
        ("extra bacon", [0.0, 1.0, 0.0]),
        ("remove dairy products", [1.0, 1.0, 0.0]),
        ("lactose intolerant", [0.0, 0.0, 1.0]),
    ]);
    let mut c = Catalog::new();
    assert_eq!(c.lookup(&step("no cheese"), 0.5, &emb), MatchResult::Miss { best_score: 0.0 });
    for key in ["no cheese", "no onions", "extra bacon"] {
        c.record_mapping(&step(key), &click_entry(), &[], &emb).unwrap();
    }
    assert_eq!(c.len(), 3);
    // Equal scores go to the earliest entry.
    assert_eq!(c.lookup(&step("no onions"), 0.5, &emb), MatchResult::Hit { index: 0, score: 1.0 });
    match c.lookup(&step("remove dairy products"), 0.55, &emb) {
        MatchResult::Hit { index: 0, score } => assert!((score - 0.5f64.sqrt()).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        c.lookup(&step("remove dairy products"), 0.8, &emb),
        MatchResult::Miss { best_score } if (best_score - 0.5f64.sqrt()).abs() < 1e-12
    ));
    assert_eq!(c.lookup(&step("lactose intolerant"), 0.55, &emb), MatchResult::Miss { best_score: 0.0 });
}

#[test]
fn export_import_round_trip() {
    let emb = HashedEmbedder::new(Lexicon::parse("dairy: cheese, milk").unwrap());
    let mut c = Catalog::new();
    c.record_mapping(&step("no cheese"), &click_entry(), &[], &emb).unwrap();
    let reveal = vec![
        demo(ConcreteAction::click(p("body[1]/menu[1]/button[1]")), false, true),
        demo(ConcreteAction::select(p("body[1]/menu[1]/select[1]/option[2]")), true, false),
    ];
    c.record_mapping(&step("lemonade"), &reveal, &[], &emb).unwrap();
    let text = c.export();
    let back = Catalog::import(&text, &emb).unwrap();
    assert_eq!(back.export(), text);
    assert_eq!(back.entries()[1].template, c.entries()[1].template);
    for q in ["remove dairy products", "lemonade please", "no onions"] {
        assert_eq!(back.lookup(&step(q), 0.55, &emb), c.lookup(&step(q), 0.55, &emb), "{q}");
    }
    assert!(matches!(Catalog::import("{", &emb), Err(CatalogError::Import(_))));
    // A template that breaks the item rules is refused on import.
    let bad = r#"{"entries":[{"key":{"raw":"x","normalized":"x"},"template":[{"item":"semantic","kind":"Click"},{"item":"semantic","kind":"Click"}],"demonstrated_on":"home"}]}"#;
    assert!(matches!(Catalog::import(bad, &emb), Err(CatalogError::Import(_))));
}

#[test]
fn instantiate_searches_with_the_new_step_text() {
    let page = r#"<body><ul>
        <li><input type="checkbox" id="a"/><label for="a">No cheese</label></li>
        <li><input type="checkbox" id="b"/><label for="b">No onions</label></li>
    </ul></body>"#;
    let corpus = Arc::new(Corpus::from_pages("item", BTreeMap::from([("item".to_string(), page.to_string())])).unwrap());
    let browser = Browser::new(corpus).unwrap();
    let emb = HashedEmbedder::new(Lexicon::default());
    let mut c = Catalog::new();
    c.record_mapping(&step("no cheese"), &click_entry(), &[], &emb).unwrap();
    let ctx = ExecContext {
        embedder: &emb,
        page_threshold: 0.5,
        row: &[],
        row_index: 0,
    };
    let got = c.instantiate(0, &step("no onions"), &browser, &ctx).unwrap();
    assert_eq!(got, [ConcreteAction::click(p("body[1]/ul[1]/li[2]/input[1]"))]);
    assert_eq!(
        c.instantiate(0, &step("extra avocado"), &browser, &ctx),
        Err(InstantiateError::TargetNotFound("extra avocado".into()))
    );
}

fn arb_vec3() -> impl Strategy<Value = [f64; 3]> {
    [0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0]
}

proptest! {
    /// Lookup agrees with a direct scan, and raising the threshold can only
    /// turn a hit into a miss.
    #[test]
    fn lookup_matches_scan_and_is_monotone_in_threshold(
        keys in proptest::collection::vec(arb_vec3(), 1..8),
        query in arb_vec3(),
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut entries: Vec<(String, [f64; 3])> = keys.iter().enumerate().map(|(i, v)| (format!("k{i}"), *v)).collect();
        entries.push(("q".into(), query));
        let refs: Vec<(&str, [f64; 3])> = entries.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let emb = table(&refs);
        let mut c = Catalog::new();
        for i in 0..keys.len() {
            c.record_mapping(&step(&format!("k{i}")), &click_entry(), &[], &emb).unwrap();
        }
        let scores: Vec<f64> = keys.iter().map(|k| oracle_cos(k, &query)).collect();
        let best = scores.iter().cloned().fold(f64::MIN, f64::max);
        let first = scores.iter().position(|s| *s == best).unwrap();
        let at = |t: f64| c.lookup(&step("q"), t, &emb);
        match at(lo) {
            MatchResult::Hit { index, score } => {
                prop_assert_eq!(index, first);
                prop_assert!((score - best).abs() < 1e-12);
                prop_assert!(best >= lo);
            }
            MatchResult::Miss { best_score } => {
                prop_assert!((best_score - best).abs() < 1e-12);
                prop_assert!(best < lo);
                let still_miss = matches!(at(hi), MatchResult::Miss { .. });
                prop_assert!(still_miss);
            }
        }
        if let MatchResult::Hit { index, .. } = at(hi) {
            prop_assert_eq!(at(lo), MatchResult::Hit { index, score: scores[index] });
        }
    }
}
