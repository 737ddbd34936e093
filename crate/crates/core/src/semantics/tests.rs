use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::dom::DomDocument;

/// Independent oracle: the same feature bag without hashing, cosine over
/// named features.
fn oracle_features(text: &str, lexicon: &Lexicon) -> BTreeMap<String, f64> {
    let stop = Stopwords::default();
    let mut bag = BTreeMap::new();
    for t in normalize(text).split_whitespace() {
        if stop.contains(t) {
            continue;
        }
        let mut all = vec![t.to_string()];
        all.extend(lexicon.expansions(t).iter().cloned());
        for tok in all {
            *bag.entry(format!("t:{tok}")).or_insert(0.0) += 1.0;
            let cs: Vec<char> = tok.chars().collect();
            for w in cs.windows(3) {
                *bag.entry(format!("g:{}", w.iter().collect::<String>())).or_insert(0.0) += 0.3;
            }
        }
    }
    bag
}

fn oracle_cosine(a: &str, b: &str, lexicon: &Lexicon) -> f64 {
    let fa = oracle_features(a, lexicon);
    let fb = oracle_features(b, lexicon);
    let dot: f64 = fa.iter().map(|(k, v)| v * fb.get(k).unwrap_or(&0.0)).sum();
    let na = fa.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = fb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn dairy_lexicon() -> Lexicon {
    Lexicon::parse("dairy: cheese, milk\n").unwrap()
}

fn raws(steps: &[StepText]) -> Vec<&str> {
    steps.iter().map(|s| s.raw.as_str()).collect()
}

#[test]
fn normalization_is_idempotent() {
    for s in ["  No Onions!! ", "Don't add cheese; thanks", "e-ticket, 2 seats", ""] {
        let n = normalize(s);
        assert_eq!(normalize(&n), n);
    }
    assert_eq!(normalize("Don't  ADD cheese!"), "dont add cheese");
}

#[test]
fn segment_commas() {
    let stop = Stopwords::default();
    let steps = segment_steps("Chicken sandwich, a side of soup, no onions", &stop);
    assert_eq!(raws(&steps), ["Chicken sandwich", "a side of soup", "no onions"]);
}

#[test]
fn segment_empty() {
    assert!(segment_steps("", &Stopwords::default()).is_empty());
    assert!(segment_steps(" , ; . ", &Stopwords::default()).is_empty());
}

#[test]
fn segment_conjunction() {
    let stop = Stopwords::default();
    assert_eq!(raws(&segment_steps("fries and a drink", &stop)), ["fries", "a drink"]);
    // no content on the left: no split, and the bare conjunction segment is dropped
    assert_eq!(raws(&segment_steps("and fries", &stop)), ["and fries"]);
    assert_eq!(
        raws(&segment_steps("Burger with cheese plus fries. Extra napkins!", &stop)),
        ["Burger", "cheese", "fries", "Extra napkins"]
    );
}

#[test]
fn stopword_only_text_embeds_to_zero() {
    let e = HashedEmbedder::new(Lexicon::default());
    let v = e.embed("the of a");
    assert_eq!(v.norm(), 0.0);
    assert!(v.components().iter().all(|c| *c == 0.0));
}

#[test]
fn embedding_is_deterministic_and_unit() {
    let e = HashedEmbedder::new(dairy_lexicon());
    let a = e.embed("remove dairy products");
    assert_eq!(a, e.embed("remove dairy products"));
    assert!((a.norm() - 1.0).abs() < 1e-12);
    assert_eq!(a.dim(), DEFAULT_DIMENSION);
}

#[test]
fn lexicon_expansion_links_dairy_and_cheese() {
    let lex = dairy_lexicon();
    let e = HashedEmbedder::new(lex.clone());
    let a = e.embed("remove dairy products");
    let b = e.embed("No cheese");
    assert!(a.dot(&b) > 0.0);
    assert!(oracle_cosine("remove dairy products", "No cheese", &lex) > 0.0);
    // without the lexicon they share nothing
    let plain = HashedEmbedder::new(Lexicon::default());
    assert!(oracle_cosine("remove dairy products", "No cheese", &Lexicon::default()) == 0.0);
    assert!(similarity(&plain.embed("remove dairy products"), &plain.embed("No cheese")) < 0.2);
}

#[test]
fn lexicon_expansion_is_one_level() {
    let lex = Lexicon::parse("a1: b1\nb1: c1\n").unwrap();
    let e = HashedEmbedder::new(lex);
    assert_eq!(e.expanded_tokens("a1"), ["b1", "a1"]);
}

#[test]
fn lexicon_syntax_errors() {
    assert!(Lexicon::parse("no colon here").is_err());
    assert!(Lexicon::parse("two words: x").is_err());
    let l = Lexicon::parse("# comment\n\nBBQ: barbecue, barbeque\nbbq: grill").unwrap();
    assert_eq!(l.expansions("bbq"), ["barbecue", "barbeque", "grill"]);
}

#[test]
fn similarity_conventions() {
    let e = HashedEmbedder::new(Lexicon::default());
    let v = e.embed("daily soup");
    let w = e.embed("side salad");
    assert!((similarity(&v, &v) - 1.0).abs() < 1e-12);
    assert_eq!(similarity(&v, &w), similarity(&w, &v));
    assert_eq!(similarity(&EmbeddingVector::zero(DEFAULT_DIMENSION), &v), 0.0);
}

#[test]
fn hashed_similarity_tracks_oracle() {
    let lex = dairy_lexicon();
    let e = HashedEmbedder::new(lex.clone());
    for (a, b) in [
        ("a side of soup", "Soup"),
        ("a side of soup", "Sides"),
        ("a side of soup", "Fries"),
        ("no onions", "No onions"),
    ] {
        let got = similarity(&e.embed(a), &e.embed(b));
        let want = oracle_cosine(a, b, &lex);
        // hashing can only add collisions, never remove shared features
        assert!(got >= want - 1e-9, "{a} / {b}: {got} < {want}");
        assert!(got - want < 0.15, "{a} / {b}: collision noise too large ({got} vs {want})");
    }
}

fn page(texts: &[&str]) -> DomDocument {
    let body: String = texts.iter().map(|t| format!("<li>{t}</li>")).collect();
    DomDocument::parse(&format!("<body><ul>{body}</ul></body>")).unwrap()
}

#[test]
fn best_match_side_of_soup() {
    let lex = Lexicon::default();
    let e = HashedEmbedder::new(lex.clone());
    let doc = page(&["Soup", "Fries", "Salad"]);
    let cands = doc.text_candidates();
    let q = StepText::new("a side of soup").unwrap();
    let (node, score) = best_match(&q, &cands, 0.5, &e).expect("hit");
    assert_eq!(doc.node(node).unwrap().text, "Soup");
    // oracle agrees on the argmax and the threshold verdict
    let scores: Vec<f64> = ["Soup", "Fries", "Salad"]
        .iter()
        .map(|t| oracle_cosine("a side of soup", t, &lex))
        .collect();
    assert!(scores[0] >= 0.5 && scores[1] < scores[0] && scores[2] < scores[0]);
    assert!(score >= scores[0] - 1e-9);
}

#[test]
fn best_match_empty_candidates() {
    let e = HashedEmbedder::new(Lexicon::default());
    let q = StepText::new("soup").unwrap();
    assert!(best_match(&q, &[], 0.5, &e).is_none());
}

#[test]
fn best_match_lactose_intolerant_misses() {
    let lex = dairy_lexicon();
    let e = HashedEmbedder::new(lex.clone());
    let doc = page(&["No cheese", "Extra bacon"]);
    let q = StepText::new("lactose intolerant").unwrap();
    assert!(best_match(&q, &doc.text_candidates(), 0.5, &e).is_none());
    for t in ["No cheese", "Extra bacon"] {
        assert!(oracle_cosine("lactose intolerant", t, &lex) < 0.5);
    }
    let edited = StepText::new("remove dairy products").unwrap();
    let (n, _) = best_match(&edited, &doc.text_candidates(), 0.3, &e).unwrap();
    assert_eq!(doc.node(n).unwrap().text, "No cheese");
}

#[test]
fn best_match_ties_go_to_document_order() {
    let e = HashedEmbedder::new(Lexicon::default());
    let doc = page(&["Soup", "Soup"]);
    let mut cands = doc.text_candidates();
    cands.reverse();
    let (n, _) = best_match(&StepText::new("soup").unwrap(), &cands, 0.5, &e).unwrap();
    assert_eq!(n, doc.text_candidates()[0].0);
}

fn arb_vec(dim: usize) -> impl Strategy<Value = EmbeddingVector> {
    proptest::collection::vec(-10.0f64..10.0, dim).prop_map(EmbeddingVector::new)
}

proptest! {
    #[test]
    fn similarity_range_and_symmetry(a in arb_vec(16), b in arb_vec(16)) {
        let s = similarity(&a, &b);
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert_eq!(s, similarity(&b, &a));
    }

    #[test]
    fn default_embedder_is_nonnegative(a in "[a-z ]{0,30}", b in "[a-z ]{0,30}") {
        let e = HashedEmbedder::new(Lexicon::default());
        let s = similarity(&e.embed(&a), &e.embed(&b));
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn segmentation_preserves_content_tokens(
        words in proptest::collection::vec(
            prop_oneof![
                Just("soup"), Just("and"), Just("with"), Just("a"), Just("of"),
                Just("no"), Just("onions"), Just("fries"), Just(","), Just("."), Just(";"),
                Just("plus"), Just("the"), Just("extra"), Just("cheese")
            ],
            0..20,
        )
    ) {
        let stop = Stopwords::default();
        let cell = words.join(" ");
        let content = |s: &str| -> Vec<String> {
            normalize(s).split_whitespace().filter(|t| !stop.contains(t)).map(str::to_string).collect()
        };
        let steps = segment_steps(&cell, &stop);
        let joined = steps.iter().map(|s| s.raw.clone()).collect::<Vec<_>>().join(", ");
        prop_assert_eq!(content(&joined), content(&cell));
        for s in &steps {
            prop_assert!(!s.normalized.is_empty());
            prop_assert_eq!(normalize(&s.normalized), s.normalized.clone());
        }
    }
}
