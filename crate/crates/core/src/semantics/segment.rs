use super::{normalize, Stopwords, StepText};

const CONJUNCTIONS: &[&str] = &["and", "with", "plus"];

/// Split a request cell into ordered steps.
///
/// Sentence ends, semicolons and commas always split. The words in
/// [`CONJUNCTIONS`] split only when both sides carry a content token.
/// Segments without any content token are dropped.
pub fn segment_steps(cell: &str, stopwords: &Stopwords) -> Vec<StepText> {
    let has_content = |s: &str| normalize(s).split(' ').any(|t| !t.is_empty() && !stopwords.contains(t));
    let mut out = Vec::new();
    for clause in cell.split(['.', '!', '?', ';', ',', '\n']) {
        let words: Vec<&str> = clause.split_whitespace().collect();
        let mut start = 0;
        let mut i = 0;
        while i < words.len() {
            let bare = normalize(words[i]);
            if CONJUNCTIONS.contains(&bare.as_str()) {
                let left = words[start..i].join(" ");
                let right = words[i + 1..].join(" ");
                if has_content(&left) && has_content(&right) {
                    out.push(left);
                    start = i + 1;
                }
            }
            i += 1;
        }
        out.push(words[start..].join(" "));
    }
    out.into_iter()
        .filter(|s| has_content(s))
        .filter_map(|s| StepText::new(&s))
        .collect()
}
