//! Shared loaders for the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use specshield::asm::{parse_unit, AsmUnit};

/// Every `.s` file of the benign corpus as (file name, source), sorted by name.
pub fn benign_sources() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/benign");
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "s"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(p).unwrap())
        })
        .collect()
}

pub fn benign_units() -> Vec<(String, AsmUnit)> {
    benign_sources()
        .into_iter()
        .map(|(n, s)| (n, parse_unit(&s).unwrap()))
        .collect()
}

/// The exit code promised by a fixture's `# expect: N` header.
pub fn expected_exit(src: &str) -> i64 {
    src.lines()
        .next()
        .and_then(|l| l.strip_prefix("# expect: "))
        .expect("fixture header")
        .trim()
        .parse()
        .unwrap()
}
