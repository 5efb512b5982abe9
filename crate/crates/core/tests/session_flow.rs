//! End-to-end session behaviour through the thread-safe store.

mod common;

use std::sync::Arc;

use common::fixture::{self, BENCH, TESTING};
use editprop::session::{Engine, EngineConfig, Feedback, SessionError, SessionStore};
use editprop::Prompt;

fn store() -> (SessionStore, String) {
    let store = SessionStore::in_memory(Engine::lexical(EngineConfig::default()));
    let id = store.create(fixture::snapshot(), Prompt::new(fixture::MESSAGE), None).unwrap();
    (store, id)
}

/// Records H1, then returns the first region reported in testing.go or
/// benchmark.go.
fn first_region(store: &SessionStore, id: &str) -> String {
    let h1 = fixture::sequential_edits(&fixture::hunks()).remove(0);
    store.record_edit(id, h1, None).unwrap();
    let rep = store.recommend_locations(id).unwrap();
    rep.files
        .iter()
        .filter(|f| f.path == BENCH || f.path == TESTING)
        .flat_map(|f| &f.regions)
        .next()
        .expect("a region next to the first edit")
        .region_ref
        .clone()
}

#[test]
fn accepting_verbatim_grows_priors_by_one() {
    let (store, id) = store();
    let r = first_region(&store, &id);
    let cands = store.recommend_edits(&id, &r, 3).unwrap();
    assert!(!cands.is_empty());
    assert_eq!(cands[0].rank, 1);
    let rev = store
        .apply_feedback(&id, &r, Feedback::Accepted { content: cands[0].content.clone() })
        .unwrap();
    assert_eq!(rev, 2);
}

#[test]
fn accepted_modification_becomes_the_prior() {
    let (store, id) = store();
    let r = first_region(&store, &id);
    let rep = store.recommend_locations(&id).unwrap();
    let region = rep.region(&r).unwrap().clone();
    let mine = vec!["\t\tmatch: newMatcher(matchString, *matchBenchmarks, \"-test.bench\"),".to_string()];
    store.apply_feedback(&id, &r, Feedback::Accepted { content: mine.clone() }).unwrap();
    let (rev, snap) = store.snapshot(&id).unwrap();
    assert_eq!(rev, 2);
    let lines = snap.file(&region.file_path).unwrap();
    let at = match region.edit_type {
        editprop::EditType::Insert => region.start_line,
        _ => region.start_line - 1,
    };
    assert_eq!(lines[at], mine[0]);
}

#[test]
fn ignore_keeps_revision_and_refs() {
    let (store, id) = store();
    let r = first_region(&store, &id);
    let before = store.recommend_locations(&id).unwrap();
    let all: Vec<String> = before.files.iter().flat_map(|f| &f.regions).map(|e| e.region_ref.clone()).collect();
    assert_eq!(store.apply_feedback(&id, &r, Feedback::Ignored).unwrap(), 1);
    let after = store.recommend_locations(&id).unwrap();
    let left: Vec<String> = after.files.iter().flat_map(|f| &f.regions).map(|e| e.region_ref.clone()).collect();
    let expected: Vec<String> = all.into_iter().filter(|x| *x != r).collect();
    assert_eq!(left, expected);
    // the remaining refs still resolve to the same regions
    for x in &left {
        assert_eq!(after.region(x), before.region(x));
    }
}

#[test]
fn stale_reference_is_rejected() {
    let (store, id) = store();
    let r = first_region(&store, &id);
    let cands = store.recommend_edits(&id, &r, 1).unwrap();
    store
        .apply_feedback(&id, &r, Feedback::Accepted { content: cands[0].content.clone() })
        .unwrap();
    match store.recommend_edits(&id, &r, 1) {
        Err(SessionError::RevisionMismatch { ref_revision: 1, current: 2, .. }) => {}
        other => panic!("expected a revision mismatch, got {other:?}"),
    }
}

#[test]
fn sessions_run_in_parallel() {
    let store = Arc::new(SessionStore::in_memory(Engine::lexical(EngineConfig::default())));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let store = Arc::clone(&store);
            std::thread::spawn(move || {
                let id = store
                    .create(fixture::snapshot(), Prompt::default(), Some(format!("t{i}")))
                    .unwrap();
                for e in fixture::sequential_edits(&fixture::hunks()) {
                    store.record_edit(&id, e, None).unwrap();
                    store.recommend_locations(&id).unwrap();
                }
                store.snapshot(&id).unwrap()
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (rev, snap) in &results {
        assert_eq!(*rev, 6);
        assert_eq!(snap, &results[0].1);
    }
    assert_eq!(store.session_ids().len(), 8);
}

#[test]
fn infinite_threshold_reports_only_the_edited_file() {
    let mut cfg = EngineConfig::default();
    cfg.scoring.th_sub = f64::INFINITY;
    let store = SessionStore::in_memory(Engine::lexical(cfg));
    let id = store.create(fixture::snapshot(), Prompt::default(), None).unwrap();
    let other = store.create(fixture::snapshot(), Prompt::default(), None).unwrap();
    assert_ne!(id, other);
    store.record_edit(&id, fixture::sequential_edits(&fixture::hunks()).remove(0), None).unwrap();
    let rep = store.recommend_locations(&id).unwrap();
    let paths: Vec<&str> = rep.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(paths, vec![BENCH]);
    assert_eq!(rep.files[0].score, None);
}
