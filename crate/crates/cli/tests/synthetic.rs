use demoflow_cli::synthetic::{run_batch, SyntheticCase};

#[test]
fn hundred_seeded_cases_reproduce_and_extend() {
    let summary = run_batch(1, 100);
    let report: Vec<String> = summary.failures.iter().map(|(s, f)| format!("seed {s}: {f}")).collect();
    assert!(report.is_empty(), "{}", report.join("\n"));
}

#[test]
fn cases_cover_two_to_four_demonstrations() {
    let ks: std::collections::BTreeSet<usize> = (0..40).map(|s| SyntheticCase::generate(s).k).collect();
    assert_eq!(ks.into_iter().collect::<Vec<_>>(), [2, 3, 4]);
}

#[test]
fn generation_is_deterministic() {
    let a = SyntheticCase::generate(7).expected_last();
    let b = SyntheticCase::generate(7).expected_last();
    assert_eq!(a, b);
    assert_eq!(a.submitted, 1);
}
