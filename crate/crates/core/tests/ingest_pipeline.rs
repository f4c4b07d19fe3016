use std::io::Write;

use commtrack::ingest::{
    aggregate_window, filter_high_degree, parse_cdr, parse_files, symmetrize, CdrRecord, DirectedCounts, ParseOptions,
    WeightMode, WindowSpec,
};
use commtrack::Error;
use proptest::prelude::*;

const IDS: [&str; 5] = ["a", "b", "c", "d", "e"];

fn record_line() -> impl Strategy<Value = String> {
    (0..5usize, 0..5usize, 1u32..=6, 1u32..=28, prop::bool::ANY, 0u64..300).prop_map(|(o, t, month, day, call, dur)| {
        let (kind, dur) = if call { ("call", dur) } else { ("sms", 0) };
        format!("{},{},2012-{month:02}-{day:02}T08:30:00,{kind},{dur}", IDS[o], IDS[t])
    })
}

fn window() -> WindowSpec {
    WindowSpec::new("2012-04".parse().unwrap(), 3).unwrap()
}

fn parse(lines: &[String]) -> Vec<CdrRecord> {
    parse_cdr(lines.join("\n").as_bytes(), &ParseOptions::default()).unwrap().0
}

fn snapshot(c: &DirectedCounts) -> Vec<((String, String), (u64, u64, u64))> {
    let mut v: Vec<_> = c.iter().map(|(k, p)| (k.clone(), (p.calls, p.sms, p.duration_s))).collect();
    v.sort();
    v
}

proptest! {
    #[test]
    fn aggregation_is_split_invariant(lines in prop::collection::vec(record_line(), 0..60), cut in 0usize..60) {
        let records = parse(&lines);
        let cut = cut.min(records.len());
        let whole = aggregate_window(&records, &window());
        let mut left = aggregate_window(&records[..cut], &window());
        left.merge(aggregate_window(&records[cut..], &window()));
        prop_assert_eq!(snapshot(&whole), snapshot(&left));
    }

    #[test]
    fn symmetrized_edges_have_both_directions(lines in prop::collection::vec(record_line(), 0..60)) {
        let records = parse(&lines);
        let w = window();
        let counts = aggregate_window(&records, &w);
        let g = symmetrize(&counts, WeightMode::CommCount);
        let in_window = |o: &str, t: &str| records.iter().filter(|r| r.origin == o && r.target == t && w.contains(r.timestamp)).count();
        for (u, v, weight) in g.edges() {
            let (a, b) = (g.external_id(u), g.external_id(v));
            prop_assert!(in_window(a, b) > 0 && in_window(b, a) > 0);
            prop_assert_eq!(weight, (in_window(a, b) + in_window(b, a)) as f64);
        }
        let pairs = IDS.iter().enumerate().flat_map(|(i, a)| IDS[i + 1..].iter().map(move |b| (*a, *b)));
        let mutual = pairs.filter(|(a, b)| in_window(a, b) > 0 && in_window(b, a) > 0).count();
        prop_assert_eq!(g.edge_count(), mutual);
    }

    #[test]
    fn filter_bound_holds(lines in prop::collection::vec(record_line(), 0..80), cap in 0usize..5) {
        let g = symmetrize(&aggregate_window(&parse(&lines), &window()), WeightMode::Unit);
        let (h, report) = filter_high_degree(&g, cap);
        prop_assert_eq!(h.node_count() + report.removed.len(), g.node_count());
        for (id, degree) in &report.removed {
            prop_assert!(*degree > cap);
            prop_assert_eq!(g.degree(g.index_of(id).unwrap()), *degree);
        }
        for u in 0..h.node_count() {
            prop_assert!(h.degree(u) <= cap);
        }
    }
}

#[test]
fn header_comments_and_bad_lines_are_counted() {
    let text = "origin,target,timestamp,kind,duration_s\n\
                # a comment\n\
                a,b,2012-03-01T10:00:00,call,12\n\
                a,b,not-a-time,call,12\n\
                a,a,2012-03-01T10:00:00,call,12\n\
                a,b,2012-03-01T10:00:00,fax,0\n\
                b,a,2012-03-01T10:00:00,sms,4\n\
                b,a,2012-03-01T10:00:00+02:00,sms,0\n";
    let (records, report) = parse_cdr(text.as_bytes(), &ParseOptions::default()).unwrap();
    assert!(report.header_skipped);
    assert_eq!(report.data_lines, 6);
    assert_eq!(records.len(), 2);
    assert_eq!(report.self_records, 1);
    assert_eq!(report.malformed, 3);
    assert_eq!(records[1].timestamp.to_rfc3339(), "2012-03-01T08:00:00+00:00");
}

#[test]
fn malformed_threshold_is_enforced() {
    let text = "a,b,2012-03-01T10:00:00,call,12\ngarbage\n";
    let strict = ParseOptions {
        max_malformed_fraction: 0.25,
        ..Default::default()
    };
    match parse_cdr(text.as_bytes(), &strict) {
        Err(Error::TooManyMalformed { malformed, total, .. }) => assert_eq!((malformed, total), (1, 2)),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert!(parse_cdr(text.as_bytes(), &ParseOptions::default()).is_ok());
}

#[test]
fn naive_timestamps_use_the_offset() {
    // 01:00 on 1 March at UTC+2 is still February in UTC
    let line = "a,b,2012-03-01T01:00:00,call,10\n";
    let opts = ParseOptions {
        utc_offset_minutes: 120,
        ..Default::default()
    };
    let (records, _) = parse_cdr(line.as_bytes(), &opts).unwrap();
    assert_eq!(records[0].timestamp.to_rfc3339(), "2012-02-29T23:00:00+00:00");
    let mut local = WindowSpec::new("2012-03".parse().unwrap(), 1).unwrap();
    local.utc_offset_minutes = 120;
    assert!(local.contains(records[0].timestamp));
    let utc = WindowSpec::new("2012-03".parse().unwrap(), 1).unwrap();
    assert!(!utc.contains(records[0].timestamp));
}

#[test]
fn files_parse_in_argument_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, body) in ["a,b,2012-03-01T00:00:00,call,1\n", "b,a,2012-03-02T00:00:00,call,2\nbad\n"].iter().enumerate() {
        let path = dir.path().join(format!("part{i}.csv"));
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        paths.push(path);
    }
    let (records, report) = parse_files(&paths, &ParseOptions::default()).unwrap();
    assert_eq!(records.iter().map(|r| r.duration_s).collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(report.data_lines, 3);
    assert_eq!(report.malformed, 1);
    let strict = ParseOptions {
        max_malformed_fraction: 0.3,
        ..Default::default()
    };
    assert!(parse_files(&paths, &strict).is_err());
}

#[test]
fn unit_and_count_weights() {
    let text = "a,b,2012-03-01T00:00:00,call,10\na,b,2012-03-02T00:00:00,sms,0\nb,a,2012-03-03T00:00:00,call,5\n";
    let (records, _) = parse_cdr(text.as_bytes(), &ParseOptions::default()).unwrap();
    let counts = aggregate_window(&records, &WindowSpec::new("2012-03".parse().unwrap(), 1).unwrap());
    let pair = counts.get("a", "b").unwrap();
    assert_eq!((pair.calls, pair.sms, pair.duration_s), (1, 1, 10));
    let unit = symmetrize(&counts, WeightMode::Unit);
    let count = symmetrize(&counts, WeightMode::CommCount);
    assert_eq!(unit.edges().map(|e| e.2).collect::<Vec<_>>(), vec![1.0]);
    assert_eq!(count.edges().map(|e| e.2).collect::<Vec<_>>(), vec![3.0]);
}
