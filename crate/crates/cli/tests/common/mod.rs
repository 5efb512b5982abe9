#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use editprop::model::{parse_unified_diff, FileDiff};
use editprop::Edit;

pub const BENCH: &str = "src/testing/benchmark.go";
pub const TESTING: &str = "src/testing/testing.go";
pub const COLOR: &str = "src/image/color/color.go";
pub const MESSAGE: &str = "testing: route test and benchmark names through a shared matcher";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/go_matcher")
}

/// Pre-commit file texts keyed by project path.
pub fn files() -> BTreeMap<String, String> {
    let d = fixture_dir();
    let read = |p: PathBuf| fs::read_to_string(p).unwrap();
    BTreeMap::from([
        (BENCH.to_owned(), read(d.join("before/benchmark.go"))),
        (TESTING.to_owned(), read(d.join("before/testing.go"))),
        (COLOR.to_owned(), read(d.join("extra/color.go"))),
    ])
}

pub fn diff_text() -> String {
    fs::read_to_string(fixture_dir().join("commit.diff")).unwrap()
}

/// The first hunk of the commit, as an edit.
pub fn first_edit() -> Edit {
    let diffs = parse_unified_diff(&diff_text()).unwrap();
    let FileDiff::Patched { hunks, .. } = &diffs[0] else { panic!("first file skipped") };
    hunks[0].to_edit().unwrap()
}

/// Writes the pre-commit project into `dir`.
pub fn write_project(dir: &Path) {
    for (p, text) in files() {
        let full = dir.join(p);
        fs::create_dir_all(full.parent().unwrap()).unwrap();
        fs::write(full, text).unwrap();
    }
}
