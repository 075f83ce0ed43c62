use super::*;
use crate::corpus::test_support::{conv, ts};
use crate::corpus::CorpusMeta;
use crate::scoring::assessment;
use crate::sentiment::SentimentLabel;

use HumanLabel::*;

fn sref(c: &str, t: usize) -> SampleRef {
    SampleRef {
        conversation_id: c.into(),
        turn_idx: t,
    }
}

fn sample() -> Vec<SampleRef> {
    vec![sref("a", 2), sref("a", 4), sref("b", 2), sref("b", 4)]
}

fn corpus() -> Corpus {
    Corpus::new(
        vec![conv("a", "u1", "UAUAUA", 0), conv("b", "u2", "UAUAUA", 0)],
        CorpusMeta::Empty,
    )
    .unwrap()
}

fn label_all(store: &AnnotationStore, id: &str, labels: &[HumanLabel]) -> Vec<AnnotationRecord> {
    let session = store.session(id).unwrap();
    for (r, l) in session.sample.iter().zip(labels) {
        store.record_label(id, r, *l, 30.0).unwrap();
    }
    store.records(id).unwrap()
}

#[test]
fn sessions_start_open_and_keep_sample_order() {
    let store = AnnotationStore::in_memory();
    let a = store.create_session(&sample(), "r1").unwrap();
    let b = store.create_session(&sample(), "r2").unwrap();
    assert_eq!(a.cursor, 0);
    assert_eq!(a.status, SessionStatus::Open);
    assert_eq!(a.sample, b.sample);
    assert_ne!(a.id, b.id);
}

#[test]
fn empty_sample_or_rater_is_rejected() {
    let store = AnnotationStore::in_memory();
    assert!(matches!(
        store.create_session(&[], "r"),
        Err(StoreError::Annotate(AnnotateError::EmptySample))
    ));
    assert!(matches!(
        store.create_session(&sample(), " "),
        Err(StoreError::Annotate(AnnotateError::EmptyRater))
    ));
}

#[test]
fn bundle_includes_surrounding_turns() {
    let store = AnnotationStore::in_memory();
    let c = Corpus::new(vec![conv("a", "u", "UAUA", 0)], CorpusMeta::Empty).unwrap();
    let s = store.create_session(&[sref("a", 2)], "r").unwrap();
    let b = store.next_item(&s.id, &c).unwrap().unwrap();
    assert_eq!(b.target.idx, 2);
    assert_eq!(b.previous_user.map(|t| t.idx), Some(0));
    assert_eq!(b.preceding_ai.idx, 1);
    assert_eq!(b.following_ai.map(|t| t.idx), Some(3));
    assert_eq!(b.total, 1);
}

#[test]
fn next_does_not_advance_and_labels_do() {
    let store = AnnotationStore::in_memory();
    let c = corpus();
    let s = store.create_session(&sample(), "r").unwrap();
    let first = store.next_item(&s.id, &c).unwrap().unwrap();
    assert_eq!(store.next_item(&s.id, &c).unwrap().unwrap(), first);
    let rec = store.record_label(&s.id, &sample()[0], Satisfied, 45.0).unwrap();
    assert_eq!(rec.elapsed, 45.0);
    assert_eq!(store.session(&s.id).unwrap().cursor, 1);
    assert_ne!(store.next_item(&s.id, &c).unwrap().unwrap().sample_ref, first.sample_ref);
}

#[test]
fn completed_session_has_no_next_item() {
    let store = AnnotationStore::in_memory();
    let s = store.create_session(&sample(), "r").unwrap();
    label_all(&store, &s.id, &[Satisfied, Unsatisfied, CannotJudge, Satisfied]);
    let session = store.session(&s.id).unwrap();
    assert_eq!(session.status, SessionStatus::Complete);
    assert_eq!(session.cursor, 4);
    assert_eq!(store.next_item(&s.id, &corpus()).unwrap(), None);
}

#[test]
fn out_of_order_and_relabel_are_rejected() {
    let store = AnnotationStore::in_memory();
    let s = store.create_session(&sample(), "r").unwrap();
    store.record_label(&s.id, &sample()[0], Satisfied, 1.0).unwrap();
    let err = store.record_label(&s.id, &sample()[3], Satisfied, 1.0).unwrap_err();
    assert!(matches!(err, StoreError::Annotate(AnnotateError::OutOfOrder { .. })));
    let err = store.record_label(&s.id, &sample()[0], Unsatisfied, 1.0).unwrap_err();
    assert!(matches!(err, StoreError::Annotate(AnnotateError::AlreadyLabeled(_))));
    assert_eq!(store.records(&s.id).unwrap().len(), 1);
}

#[test]
fn long_elapsed_is_stored_not_forced() {
    let store = AnnotationStore::in_memory();
    let s = store.create_session(&sample(), "r").unwrap();
    let r = store.record_label(&s.id, &sample()[0], Satisfied, 200.0).unwrap();
    assert_eq!((r.label, r.elapsed), (Satisfied, 200.0));
    let r = store.record_label(&s.id, &sample()[1], CannotJudge, 200.0).unwrap();
    assert_eq!((r.label, r.elapsed), (CannotJudge, 200.0));
}

#[test]
fn corrections_supersede_without_moving_the_cursor() {
    let store = AnnotationStore::in_memory();
    let s = store.create_session(&sample(), "r").unwrap();
    store.record_label(&s.id, &sample()[0], Satisfied, 1.0).unwrap();
    let fix = store.correct_label(&s.id, &sample()[0], Unsatisfied, 2.0).unwrap();
    assert!(fix.supersedes);
    assert_eq!(store.session(&s.id).unwrap().cursor, 1);
    let records = store.records(&s.id).unwrap();
    assert_eq!(effective_records(&records)[&sample()[0]].label, Unsatisfied);
    assert!(store.correct_label(&s.id, &sample()[2], Satisfied, 1.0).is_err());
}

#[test]
fn unknown_session_errors() {
    let store = AnnotationStore::in_memory();
    assert_eq!(
        store.session("nope").unwrap_err(),
        AnnotateError::UnknownSession("nope".into())
    );
}

#[test]
fn replay_reconstructs_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before, records) = {
        let store = AnnotationStore::open(dir.path()).unwrap();
        let s = store.create_session(&sample(), "r").unwrap();
        store.record_label(&s.id, &sample()[0], Satisfied, 3.0).unwrap();
        store.record_label(&s.id, &sample()[1], CannotJudge, 4.0).unwrap();
        store.correct_label(&s.id, &sample()[1], Unsatisfied, 5.0).unwrap();
        (s.id.clone(), store.session(&s.id).unwrap(), store.records(&s.id).unwrap())
    };
    let store = AnnotationStore::open(dir.path()).unwrap();
    assert_eq!(store.session(&id).unwrap(), before);
    assert_eq!(store.records(&id).unwrap(), records);
    // ids keep counting after a reload
    assert_eq!(store.create_session(&sample(), "r2").unwrap().id, "s0002");
    store.record_label(&id, &sample()[2], Satisfied, 1.0).unwrap();
}

#[test]
fn torn_final_line_is_dropped_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let store = AnnotationStore::open(dir.path()).unwrap();
        let s = store.create_session(&sample(), "r").unwrap();
        store.record_label(&s.id, &sample()[0], Satisfied, 3.0).unwrap();
        s.id
    };
    let path = dir.path().join(format!("{id}.jsonl"));
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"event\":\"label\",\"sess");
    std::fs::write(&path, text).unwrap();
    let store = AnnotationStore::open(dir.path()).unwrap();
    assert_eq!(store.session(&id).unwrap().cursor, 1);
    store.record_label(&id, &sample()[1], Satisfied, 3.0).unwrap();
    drop(store);
    let store = AnnotationStore::open(dir.path()).unwrap();
    assert_eq!(store.records(&id).unwrap().len(), 2);
}

#[test]
fn concurrent_sessions_do_not_interfere() {
    let store = AnnotationStore::in_memory();
    let ids: Vec<String> = (0..8)
        .map(|i| store.create_session(&sample(), &format!("r{i}")).unwrap().id)
        .collect();
    std::thread::scope(|scope| {
        for id in &ids {
            let store = &store;
            scope.spawn(move || {
                for r in sample() {
                    store.record_label(id, &r, Satisfied, 1.0).unwrap();
                }
            });
        }
    });
    for id in &ids {
        let s = store.session(id).unwrap();
        assert_eq!(s.cursor, store.records(id).unwrap().len());
        assert_eq!(s.status, SessionStatus::Complete);
    }
}

#[test]
fn identical_raters_have_kappa_one() {
    let store = AnnotationStore::in_memory();
    let labels = [Satisfied, Unsatisfied, CannotJudge, Satisfied];
    let a = store.create_session(&sample(), "r1").unwrap();
    let b = store.create_session(&sample(), "r2").unwrap();
    let ra = label_all(&store, &a.id, &labels);
    let rb = label_all(&store, &b.id, &labels);
    assert_eq!(agreement(&ra, &rb).unwrap().kappa, 1.0);
    assert_eq!(store.rater_records("r1"), ra);
}

#[test]
fn worked_example_gives_half() {
    let store = AnnotationStore::in_memory();
    let a = store.create_session(&sample(), "r1").unwrap();
    let b = store.create_session(&sample(), "r2").unwrap();
    let ra = label_all(&store, &a.id, &[Satisfied, Satisfied, Unsatisfied, Unsatisfied]);
    let rb = label_all(&store, &b.id, &[Satisfied, Unsatisfied, Unsatisfied, Unsatisfied]);
    let k = agreement(&ra, &rb).unwrap();
    assert!((k.kappa - 0.5).abs() < 1e-12);
    assert_eq!(k, agreement(&rb, &ra).unwrap());
    let csv = export_pairs(&ra, &rb, ("r1", "r2")).unwrap();
    assert_eq!(
        csv,
        "r1,r2\nsatisfied,satisfied\nsatisfied,unsatisfied\nunsatisfied,unsatisfied\nunsatisfied,unsatisfied\n"
    );
}

#[test]
fn disjoint_records_report_the_difference() {
    let store = AnnotationStore::in_memory();
    let a = store.create_session(&sample()[..2], "r1").unwrap();
    let b = store.create_session(&sample()[2..], "r2").unwrap();
    let ra = label_all(&store, &a.id, &[Satisfied; 2]);
    let rb = label_all(&store, &b.id, &[Satisfied; 2]);
    match agreement(&ra, &rb).unwrap_err() {
        AnnotateError::Misaligned { only_a, only_b } => {
            assert_eq!(only_a, sample()[..2]);
            assert_eq!(only_b, sample()[2..]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn resolved(labels: &[(SampleRef, HumanLabel)]) -> Vec<AnnotationRecord> {
    labels
        .iter()
        .map(|(r, l)| AnnotationRecord {
            session_id: "resolved".into(),
            sample_ref: r.clone(),
            rater_id: "resolved".into(),
            label: *l,
            elapsed: 0.0,
            created_at: ts(0),
            supersedes: false,
        })
        .collect()
}

#[test]
fn match_rate_per_class_and_modes() {
    use SentimentLabel as S;
    let assessments = vec![
        assessment("a", 2, S::Negative),
        assessment("a", 4, S::ExtremelyNegative),
        assessment("b", 2, S::Neutral),
        assessment("b", 4, S::Positive),
    ];
    let s = sample();
    let records = resolved(&[
        (s[0].clone(), Unsatisfied),
        (s[1].clone(), Satisfied),
        (s[2].clone(), CannotJudge),
        (s[3].clone(), Satisfied),
    ]);
    let m = match_rate(&assessments, &records, MatchMode::NeutralIsCannotJudge).unwrap();
    assert_eq!(m.overall, 0.75);
    assert_eq!(m.per_class[&Polarity::Negative].rate, 0.5);
    assert_eq!(m.per_class[&Polarity::Neutral].rate, 1.0);
    let weighted: f64 = m.per_class.values().map(|c| c.rate * c.n as f64).sum::<f64>() / m.n as f64;
    assert!((weighted - m.overall).abs() < 1e-12);

    let strict = match_rate(&assessments, &records, MatchMode::Strict).unwrap();
    assert_eq!(strict.n, 3);
    assert_eq!(strict.excluded_cannot_judge, 1);
    assert!(!strict.per_class.contains_key(&Polarity::Neutral));
}

#[test]
fn match_rate_errors() {
    let records = resolved(&[(sref("zz", 2), Satisfied)]);
    assert_eq!(
        match_rate(&[], &records, MatchMode::default()).unwrap_err(),
        AnnotateError::MissingAssessment(sref("zz", 2))
    );
    assert_eq!(
        match_rate(&[], &[], MatchMode::default()).unwrap_err(),
        AnnotateError::NoRecords
    );
}

#[test]
fn records_round_trip_through_jsonl() {
    let records = resolved(&[(sref("a", 2), CannotJudge)]);
    let line = serde_json::to_string(&records[0]).unwrap();
    assert!(line.contains("\"label\":\"cannot_judge\""));
    let back = read_records(std::io::Cursor::new(format!("{line}\n"))).unwrap();
    assert_eq!(back, records);
}
