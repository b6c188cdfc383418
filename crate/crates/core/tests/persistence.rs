mod common;

use std::sync::Arc;

use infergate::persistence::{
    ApiCallRecord, CallFilter, PersistenceError, Store, TerminalType, Timestamp,
};
use proptest::prelude::*;

fn record(user: &str, api: &str, i: i64) -> ApiCallRecord {
    ApiCallRecord {
        username: user.into(),
        api_name: api.into(),
        api_elapse: 0.001 * i as f64 + 1.0 / 3.0,
        api_call_datetime: Timestamp::from_millis(1_700_000_000_000 + i / 3),
        terminal_type: TerminalType::from_code(i % 5).unwrap(),
        img_path: format!("imgraw:{i:016x}"),
    }
}

fn export(store: &Store) -> Vec<u8> {
    let mut out = Vec::new();
    store.export_calls_csv(&mut out).unwrap();
    out
}

#[test]
fn rows_survive_reopen_byte_identically() {
    let (store, dir) = common::seeded_store();
    let records: Vec<_> = (0..300).map(|i| record(if i % 2 == 0 { "alice" } else { "bob" }, "cv/fbp", i)).collect();
    store.record_api_calls(&records[..200]).unwrap();
    for r in &records[200..] {
        store.record_api_call(r).unwrap();
    }
    let before_rows = store.query_calls(&CallFilter::latest(1000)).unwrap();
    let before_csv = export(&store);
    let before_users = store.users().unwrap();
    Arc::try_unwrap(store).ok().unwrap().close().unwrap();

    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.count_calls().unwrap(), 300);
    assert_eq!(reopened.query_calls(&CallFilter::latest(1000)).unwrap(), before_rows);
    assert_eq!(export(&reopened), before_csv);
    let after_users = reopened.users().unwrap();
    assert_eq!(after_users, before_users);
    assert!(reopened.verify_credential("alice", "s3cret").unwrap());
    assert!(!reopened.verify_credential("alice", "wrong").unwrap());
}

#[test]
fn concurrent_creates_admit_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let store = Arc::clone(&store);
                s.spawn(move || store.create_user(&common::new_user("carol", &format!("key-{i}"))))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    for r in results.iter().filter(|r| r.is_err()) {
        assert!(matches!(r, Err(PersistenceError::DuplicateUsername(_))), "{r:?}");
    }
    assert_eq!(store.users().unwrap().len(), 1);

    let dup_key = store.create_user(&common::new_user("dave", &store.users().unwrap()[0].userkey));
    assert!(matches!(dup_key, Err(PersistenceError::DuplicateUserkey)));
}

#[test]
fn unknown_user_and_limits_are_rejected() {
    let (store, _dir) = common::seeded_store();
    assert!(matches!(store.record_api_call(&record("mallory", "cv/fbp", 1)), Err(PersistenceError::UnknownUser(_))));
    let mut long = record("alice", "cv/fbp", 1);
    long.img_path = "x".repeat(101);
    assert!(matches!(store.record_api_call(&long), Err(PersistenceError::FieldTooLong { field: "img_path", .. })));
    // A bad row fails the whole batch.
    assert!(store.record_api_calls(&[record("alice", "a", 1), record("mallory", "a", 2)]).is_err());
    assert_eq!(store.count_calls().unwrap(), 0);
    assert!(store.query_calls(&CallFilter::latest(0)).is_err());
    assert!(matches!(store.lookup_user_by_key("nope"), Err(PersistenceError::NotFound)));
    // Keys are case-sensitive.
    assert_eq!(store.lookup_user_by_key(common::ALICE_KEY).unwrap().username, "alice");
    assert!(matches!(store.lookup_user_by_key(&common::ALICE_KEY.to_uppercase()), Err(PersistenceError::NotFound)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Interleaved writes from two users; every filter agrees with an
    // in-memory oracle ordered newest first (time, then insertion order).
    #[test]
    fn queries_match_in_memory_oracle(
        ops in proptest::collection::vec((any::<bool>(), 0usize..3, 0i64..40), 1..60),
        limit in 1usize..80,
    ) {
        let (store, _dir) = common::seeded_store();
        let apis = ["cv/fbp", "cv/food", "dm/zhihuliveeval"];
        let mut oracle = Vec::new();
        for (i, (alice, api, t)) in ops.iter().enumerate() {
            let mut r = record(if *alice { "alice" } else { "bob" }, apis[*api], i as i64);
            r.api_call_datetime = Timestamp::from_millis(1_700_000_000_000 + t);
            store.record_api_call(&r).unwrap();
            oracle.push((i, r));
        }
        oracle.sort_by(|(ia, a), (ib, b)| {
            b.api_call_datetime.millis().cmp(&a.api_call_datetime.millis()).then(ib.cmp(ia))
        });
        let filters = [
            CallFilter::latest(limit),
            CallFilter::for_user("alice", limit),
            CallFilter { api_name: Some("cv/food".into()), ..CallFilter::for_user("bob", limit) },
            CallFilter {
                since: Some(Timestamp::from_millis(1_700_000_000_010)),
                until: Some(Timestamp::from_millis(1_700_000_000_030)),
                ..CallFilter::latest(limit)
            },
        ];
        for f in &filters {
            let want: Vec<ApiCallRecord> = oracle
                .iter()
                .map(|(_, r)| r)
                .filter(|r| f.username.as_ref().is_none_or(|u| &r.username == u))
                .filter(|r| f.api_name.as_ref().is_none_or(|a| &r.api_name == a))
                .filter(|r| f.since.is_none_or(|s| r.api_call_datetime.millis() >= s.millis()))
                .filter(|r| f.until.is_none_or(|u| r.api_call_datetime.millis() <= u.millis()))
                .take(f.limit)
                .cloned()
                .collect();
            prop_assert_eq!(store.query_calls(f).unwrap(), want);
        }
    }
}
