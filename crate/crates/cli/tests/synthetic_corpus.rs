mod common;

use std::path::PathBuf;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

#[test]
#[ignore = "rewrites the checked-in corpus"]
fn regenerate() {
    for (name, contents) in common::synthetic::generate() {
        std::fs::write(fixture_dir().join(name), contents).unwrap();
    }
}

#[test]
fn checked_in_corpus_matches_generator() {
    for (name, contents) in common::synthetic::generate() {
        let on_disk = std::fs::read_to_string(fixture_dir().join(&name)).unwrap();
        assert!(on_disk == contents, "{name} is stale; run the ignored regenerate test");
    }
}
