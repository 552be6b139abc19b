//! Stemmer output against vectors produced by a reference Porter
//! implementation (the original C release, including its `bli`/`logi`
//! departures from the published algorithm).

use cuiwb_core::porter::stem;

#[test]
fn matches_reference_vectors() {
    let data = include_str!("data/porter_vectors.tsv");
    let mut failures = Vec::new();
    let mut checked = 0;
    for line in data.lines().filter(|l| !l.is_empty()) {
        let (word, expected) = line.split_once('\t').expect("word<TAB>stem");
        checked += 1;
        let got = stem(word);
        if got != expected {
            failures.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    assert!(checked > 2000, "vector file truncated: {checked} rows");
    assert!(failures.is_empty(), "{} mismatches:\n{}", failures.len(), failures.join("\n"));
}
