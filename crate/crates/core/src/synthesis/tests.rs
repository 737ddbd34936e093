use proptest::prelude::*;

use super::*;
use crate::dom::{Bindings, DomDocument};

fn p(s: &str) -> PathExpr {
    s.parse().unwrap()
}

fn row(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

#[test]
fn antiunify_single_varying_index() {
    let g = antiunify(
        &p("a[1]/ul[1]/li[1]/button[1]"),
        &p("a[1]/ul[1]/li[2]/button[1]"),
    )
    .unwrap();
    assert_eq!(g.to_string(), "a[1]/ul[1]/li[$i{1,2}]/button[1]");
    let hole = g.holes().next().unwrap();
    assert_eq!(hole.observed, BTreeSet::from([1, 2]));
}

#[test]
fn antiunify_identity() {
    let x = p("a[1]/ul[1]/li[3]");
    assert_eq!(antiunify(&x, &x).unwrap(), x);
}

#[test]
fn antiunify_shape_and_hole_errors() {
    assert_eq!(
        antiunify(&p("a[1]/div[1]/b[1]"), &p("a[1]/span[1]/b[1]")),
        Err(AntiUnifyError::DifferentShape)
    );
    assert_eq!(
        antiunify(&p("a[1]/div[1]"), &p("a[1]/div[1]/b[1]")),
        Err(AntiUnifyError::DifferentShape)
    );
    assert_eq!(
        antiunify(&p("a[1]/div[1]/b[1]"), &p("a[1]/div[2]/b[2]")),
        Err(AntiUnifyError::TooManyHoles)
    );
}

#[test]
fn antiunify_absorbs_into_existing_hole() {
    let g = antiunify(&p("a[1]/li[1]"), &p("a[1]/li[2]")).unwrap();
    let g = antiunify(&g, &p("a[1]/li[5]")).unwrap();
    assert_eq!(g.holes().next().unwrap().observed, BTreeSet::from([1, 2, 5]));
}

#[test]
fn detect_binding_rules() {
    let r = row(&["Thai Palace", "Pad Thai", "no peanuts"]);
    assert_eq!(detect_binding("Thai Palace", &r), Some(ColumnBinding { column: 0 }));
    assert_eq!(detect_binding("hello", &r), None);
    let r = row(&["x", "same", "y", " same "]);
    assert_eq!(detect_binding("same", &r), Some(ColumnBinding { column: 1 }));
}

/// Two food-ordering rows: search by dish, open the first result, a couple of
/// step slides, then Add to Order.
fn food_trace(second_epilogue: EventKind) -> (Trace, Vec<Vec<String>>) {
    let rows = vec![
        row(&["Chicken Sandwich", "a side of soup, no onions"]),
        row(&["Pho", "extra basil"]),
    ];
    let mut t = Trace::new();
    let steps = [3usize, 2];
    for (r, cells) in rows.iter().enumerate() {
        let at = |s| Some(StepRef { row: r, step: s });
        t.push_action(&ConcreteAction::input(p("body[1]/input[1]"), &cells[0]), "home", at(0));
        t.push_action(
            &ConcreteAction::click(p("body[1]/ul[1]/li[1]/a[1]")),
            &format!("results:{}", cells[0]),
            at(0),
        );
        t.push_marker(EventKind::AdvanceStep, "item", at(0));
        for s in 1..steps[r] {
            t.push_action(
                &ConcreteAction::click(p(&format!("body[1]/div[1]/ul[1]/li[{s}]/input[1]"))),
                "item",
                at(s),
            );
            t.push_marker(EventKind::AdvanceStep, "item", at(s));
        }
        let kind = if r == 1 { second_epilogue } else { EventKind::Click };
        t.push(ActionEvent {
            seq: 0,
            kind,
            target: Some(p("body[1]/button[1]")),
            payload: (kind == EventKind::InputText).then(|| "note".to_string()),
            page: "item".into(),
            step: None,
        });
        t.push_marker(EventKind::NextRow, "item", Some(StepRef { row: r, step: steps[r] }));
    }
    (t, rows)
}

#[test]
fn synthesize_food_rows() {
    let (trace, rows) = food_trace(EventKind::Click);
    let prog = synthesize(&trace, &rows).expect("aligned");
    assert_eq!(prog.prologue.len(), 2);
    assert_eq!(prog.epilogue.len(), 1);
    assert_eq!(
        prog.prologue[0].items(),
        &[TemplateItem::BoundInput {
            path: p("body[1]/input[1]"),
            binding: ColumnBinding { column: 0 }
        }]
    );
    assert_eq!(prog.units(3).len(), 2 + 2 + 1);
    assert_eq!(prog.demonstrated_rows, vec![0, 1]);
    let text = prog.export();
    assert!(text.contains("prologue: 2 template(s)"));
    assert!(text.contains("input body[1]/input[1] <- column 0"));
    assert!(text.contains("epilogue: 1 template(s)"));
}

#[test]
fn synthesize_needs_two_rows() {
    let (mut trace, rows) = food_trace(EventKind::Click);
    let first_row_end = trace
        .events()
        .iter()
        .position(|e| e.kind == EventKind::NextRow)
        .unwrap();
    trace.truncate(first_row_end + 1);
    assert!(synthesize(&trace, &rows).is_none());
}

#[test]
fn synthesize_rejects_mismatched_epilogue() {
    let (trace, rows) = food_trace(EventKind::InputText);
    assert!(synthesize(&trace, &rows).is_none());
}

#[test]
fn synthesize_infers_row_progression() {
    let rows = vec![row(&["a"]), row(&["b"]), row(&["c"])];
    let mut t = Trace::new();
    for r in 0..2 {
        t.push_action(
            &ConcreteAction::click(p(&format!("body[1]/ul[1]/li[{}]/button[1]", r + 2))),
            "list",
            Some(StepRef { row: r, step: 0 }),
        );
        t.push_marker(EventKind::NextRow, "list", Some(StepRef { row: r, step: 1 }));
    }
    let prog = synthesize(&t, &rows).unwrap();
    let TemplateItem::Fixed { path, .. } = &prog.prologue[0].items()[0] else {
        panic!("expected fixed item");
    };
    let hole = path.holes().next().unwrap();
    assert_eq!(hole.per_row, Some(Progression { stride: 1, offset: 2 }));
    assert_eq!(hole.per_row.unwrap().at(2), Some(4));
}

#[test]
fn literal_payloads_must_agree() {
    let rows = vec![row(&["a"]), row(&["b"])];
    let build = |second: &str| {
        let mut t = Trace::new();
        for (r, text) in ["same", second].iter().enumerate() {
            t.push_action(&ConcreteAction::input(p("body[1]/input[1]"), *text), "x", None);
            t.push_marker(EventKind::NextRow, "x", Some(StepRef { row: r, step: 0 }));
        }
        t
    };
    let prog = synthesize(&build("same"), &rows).unwrap();
    assert!(matches!(
        &prog.prologue[0].items()[0],
        TemplateItem::Fixed { payload: Some(s), .. } if s == "same"
    ));
    assert!(synthesize(&build("other"), &rows).is_none());
}

#[test]
fn row_segments_split_slides() {
    let (trace, _) = food_trace(EventKind::Click);
    let segs = trace.rows();
    assert_eq!(segs.len(), 2);
    assert_eq!(segs[0].prologue.len(), 2);
    assert_eq!(segs[0].steps.len(), 2);
    assert_eq!(segs[0].epilogue.len(), 1);
    assert_eq!(segs[1].steps.len(), 1);
}

fn arb_path() -> impl Strategy<Value = PathExpr> {
    proptest::collection::vec((prop_oneof![Just("div"), Just("ul"), Just("li")], 1..4u32), 1..5)
        .prop_map(|segs| {
            let mut all = vec![("body", 1)];
            all.extend(segs);
            PathExpr::literal(all)
        })
}

/// Document deep and wide enough for every path `arb_path` produces.
fn full_doc() -> DomDocument {
    fn level(depth: usize) -> String {
        if depth == 0 {
            return String::new();
        }
        let inner = level(depth - 1);
        ["div", "ul", "li"]
            .iter()
            .map(|t| format!("<{t}>{inner}</{t}>").repeat(3))
            .collect()
    }
    DomDocument::parse(&format!("<body>{}</body>", level(4))).unwrap()
}

proptest! {
    #[test]
    fn antiunify_verdict_is_commutative(a in arb_path(), b in arb_path()) {
        let ab = antiunify(&a, &b);
        let ba = antiunify(&b, &a);
        match (&ab, &ba) {
            (Ok(x), Ok(y)) => {
                prop_assert!(x.tags().eq(y.tags()));
                let hx: Vec<_> = x.holes().map(|h| h.observed.clone()).collect();
                let hy: Vec<_> = y.holes().map(|h| h.observed.clone()).collect();
                prop_assert_eq!(hx, hy);
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "verdicts differ: {:?} vs {:?}", ab, ba),
        }
    }

    #[test]
    fn antiunified_paths_resolve_to_both_originals(a in arb_path(), b in arb_path()) {
        let doc = full_doc();
        if let Ok(g) = antiunify(&a, &b) {
            for original in [&a, &b] {
                let mut bindings = Bindings::new();
                for (seg, orig) in g.segments().iter().zip(original.segments()) {
                    if let (PathIndex::Var(h), PathIndex::At(v)) = (&seg.index, &orig.index) {
                        prop_assert!(h.observed.contains(v));
                        bindings.insert(h.name.clone(), *v);
                    }
                }
                let want = doc.resolve_path(original, &Bindings::new()).unwrap();
                prop_assert_eq!(doc.resolve_path(&g, &bindings).unwrap(), want);
            }
        }
    }
}
