//! From raw communication records to the monthly social graph: sliding
//! multi-month aggregation, mutual-edge symmetrisation, degree capping.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommKind {
    Call,
    Sms,
}

/// One communication event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdrRecord {
    pub origin: String,
    pub target: String,
    pub timestamp: DateTime<Utc>,
    pub kind: CommKind,
    pub duration_s: u64,
}

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + self.month as i64 - 1
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// The months `anchor - span + 1 ..= anchor`, bucketed in a fixed UTC offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub anchor_month: YearMonth,
    pub span_months: u32,
    pub utc_offset_minutes: i32,
}

impl WindowSpec {
    pub fn new(anchor_month: YearMonth, span_months: u32) -> Result<Self> {
        if span_months == 0 {
            return Err(Error::InvalidParameter("span_months must be at least 1".into()));
        }
        Ok(WindowSpec {
            anchor_month,
            span_months,
            utc_offset_minutes: 0,
        })
    }

    pub fn month_of(&self, ts: DateTime<Utc>) -> YearMonth {
        let local = ts.naive_utc() + Duration::minutes(self.utc_offset_minutes as i64);
        YearMonth {
            year: local.year(),
            month: local.month(),
        }
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        let lag = self.anchor_month.ordinal() - self.month_of(ts).ordinal();
        (0..self.span_months as i64).contains(&lag)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub calls: u64,
    pub sms: u64,
    pub duration_s: u64,
}

impl PairCounts {
    pub fn communications(&self) -> u64 {
        self.calls + self.sms
    }

    fn absorb(&mut self, other: &PairCounts) {
        self.calls += other.calls;
        self.sms += other.sms;
        self.duration_s += other.duration_s;
    }
}

/// Per ordered pair `(origin, target)` traffic totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectedCounts {
    pairs: HashMap<(String, String), PairCounts>,
}

impl DirectedCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, r: &CdrRecord) {
        let entry = self.pairs.entry((r.origin.clone(), r.target.clone())).or_default();
        match r.kind {
            CommKind::Call => entry.calls += 1,
            CommKind::Sms => entry.sms += 1,
        }
        entry.duration_s += r.duration_s;
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: DirectedCounts) {
        for (k, v) in other.pairs {
            self.pairs.entry(k).or_default().absorb(&v);
        }
    }

    pub fn get(&self, origin: &str, target: &str) -> Option<&PairCounts> {
        self.pairs.get(&(origin.to_owned(), target.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &PairCounts)> {
        self.pairs.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Offset applied to timestamps that carry no zone.
    pub utc_offset_minutes: i32,
    /// Parsing fails only when the malformed fraction exceeds this.
    pub max_malformed_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            utc_offset_minutes: 0,
            max_malformed_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub data_lines: usize,
    pub malformed: usize,
    pub self_records: usize,
    pub header_skipped: bool,
    /// First few rejected lines with the reason, 1-based line numbers.
    pub samples: Vec<(usize, String)>,
}

impl RejectionReport {
    const MAX_SAMPLES: usize = 10;

    fn reject(&mut self, line: usize, reason: String, self_record: bool) {
        if self_record {
            self.self_records += 1;
        } else {
            self.malformed += 1;
        }
        if self.samples.len() < Self::MAX_SAMPLES {
            self.samples.push((line, reason));
        }
    }

    pub fn merge(&mut self, other: RejectionReport) {
        self.data_lines += other.data_lines;
        self.malformed += other.malformed;
        self.self_records += other.self_records;
        self.header_skipped |= other.header_skipped;
        let room = Self::MAX_SAMPLES.saturating_sub(self.samples.len());
        self.samples.extend(other.samples.into_iter().take(room));
    }
}

fn parse_timestamp(s: &str, offset_minutes: i32) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| (naive - Duration::minutes(offset_minutes as i64)).and_utc())
}

fn parse_line(line: &str, opts: &ParseOptions) -> std::result::Result<CdrRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let [origin, target, ts, kind, duration] = fields.as_slice() else {
        return Err(format!("expected 5 fields, got {}", fields.len()));
    };
    if origin.is_empty() || target.is_empty() {
        return Err("empty node id".into());
    }
    let timestamp = parse_timestamp(ts, opts.utc_offset_minutes).ok_or_else(|| format!("bad timestamp {ts:?}"))?;
    let kind = match kind.to_ascii_lowercase().as_str() {
        "call" => CommKind::Call,
        "sms" => CommKind::Sms,
        other => return Err(format!("unknown kind {other:?}")),
    };
    let duration_s: u64 = duration.parse().map_err(|_| format!("bad duration {duration:?}"))?;
    if kind == CommKind::Sms && duration_s != 0 {
        return Err("sms with nonzero duration".into());
    }
    Ok(CdrRecord {
        origin: origin.to_string(),
        target: target.to_string(),
        timestamp,
        kind,
        duration_s,
    })
}

/// Parses `origin,target,timestamp,kind,duration_s` lines. Bad lines and
/// self-records are counted, not fatal, unless malformed lines exceed
/// `opts.max_malformed_fraction`.
pub fn parse_cdr<R: BufRead>(input: R, opts: &ParseOptions) -> Result<(Vec<CdrRecord>, RejectionReport)> {
    let parsed = parse_unchecked(input, opts)?;
    check_malformed(&parsed.1, opts)?;
    Ok(parsed)
}

fn parse_unchecked<R: BufRead>(input: R, opts: &ParseOptions) -> Result<(Vec<CdrRecord>, RejectionReport)> {
    let mut records = Vec::new();
    let mut report = RejectionReport::default();
    let mut first = true;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if std::mem::take(&mut first) && line.to_ascii_lowercase().starts_with("origin,") {
            report.header_skipped = true;
            continue;
        }
        report.data_lines += 1;
        match parse_line(line, opts) {
            Ok(r) if r.origin == r.target => report.reject(i + 1, "self-record".into(), true),
            Ok(r) => records.push(r),
            Err(reason) => report.reject(i + 1, reason, false),
        }
    }
    Ok((records, report))
}

/// Parses several record files (in parallel with the `parallel` feature)
/// and concatenates them in argument order. The malformed threshold applies
/// to the combined input.
pub fn parse_files<P: AsRef<Path> + Sync>(
    paths: &[P],
    opts: &ParseOptions,
) -> Result<(Vec<CdrRecord>, RejectionReport)> {
    let one = |path: &P| -> Result<(Vec<CdrRecord>, RejectionReport)> {
        parse_unchecked(BufReader::new(File::open(path.as_ref())?), opts)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<_> = {
        use rayon::prelude::*;
        paths.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<_> = paths.iter().map(one).collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut report = RejectionReport::default();
    for (r, rep) in parts {
        records.extend(r);
        report.merge(rep);
    }
    check_malformed(&report, opts)?;
    Ok((records, report))
}

fn check_malformed(report: &RejectionReport, opts: &ParseOptions) -> Result<()> {
    if report.data_lines > 0 && report.malformed as f64 / report.data_lines as f64 > opts.max_malformed_fraction {
        return Err(Error::TooManyMalformed {
            malformed: report.malformed,
            total: report.data_lines,
            threshold: opts.max_malformed_fraction,
        });
    }
    Ok(())
}

/// Sums traffic per ordered pair over the records falling in `window`.
pub fn aggregate_window(records: &[CdrRecord], window: &WindowSpec) -> DirectedCounts {
    let fold = |chunk: &[CdrRecord]| {
        let mut counts = DirectedCounts::new();
        for r in chunk.iter().filter(|r| window.contains(r.timestamp)) {
            counts.record(r);
        }
        counts
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records
            .par_chunks(1 << 16)
            .map(fold)
            .reduce(DirectedCounts::new, |mut a, b| {
                a.merge(b);
                a
            })
    }
    #[cfg(not(feature = "parallel"))]
    {
        fold(records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Every retained edge has weight 1.
    #[default]
    Unit,
    /// Calls plus messages in both directions.
    CommCount,
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightMode::Unit),
            "comm_count" | "comm-count" => Ok(WeightMode::CommCount),
            _ => Err(Error::InvalidParameter(format!("unknown weight mode {s:?}"))),
        }
    }
}

/// Keeps the undirected edge `{A, B}` only when traffic flowed both ways.
/// Nodes without a mutual edge are dropped. Edges are emitted in sorted id
/// order, so node indices follow first appearance in that order.
pub fn symmetrize(counts: &DirectedCounts, mode: WeightMode) -> Graph {
    let mut mutual: Vec<(&str, &str, u64)> = counts
        .iter()
        .filter(|((a, b), _)| a < b)
        .filter_map(|((a, b), fwd)| {
            let back = counts.pairs.get(&(b.clone(), a.clone()))?;
            Some((a.as_str(), b.as_str(), fwd.communications() + back.communications()))
        })
        .collect();
    mutual.sort_unstable();
    let mut builder = GraphBuilder::new();
    for (a, b, comms) in mutual {
        let w = match mode {
            WeightMode::Unit => 1.0,
            WeightMode::CommCount => comms as f64,
        };
        builder.add_edge(a, b, w).expect("weights are non-negative");
    }
    builder.build()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub cap: usize,
    /// Removed node ids with their degree in the input graph.
    pub removed: Vec<(String, usize)>,
}

/// Removes every node whose degree in `g` exceeds `cap`, in one pass over
/// the input degrees. Nodes left without edges stay in the graph.
pub fn filter_high_degree(g: &Graph, cap: usize) -> (Graph, FilterReport) {
    let keep: Vec<bool> = (0..g.node_count()).map(|u| g.degree(u) <= cap).collect();
    let removed = (0..g.node_count())
        .filter(|&u| !keep[u])
        .map(|u| (g.external_id(u).to_owned(), g.degree(u)))
        .collect();
    (g.induced(&keep), FilterReport { cap, removed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn rec(origin: &str, target: &str, ts: &str) -> CdrRecord {
        parse_line(&format!("{origin},{target},{ts},call,10"), &ParseOptions::default()).unwrap()
    }

    #[test]
    fn parses_a_call() {
        let (rs, rep) = parse_cdr("A,B,2012-03-05T10:00:00,call,62\n".as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, CommKind::Call);
        assert_eq!(rs[0].duration_s, 62);
        assert_eq!(rep.malformed, 0);
    }

    #[test]
    fn drops_self_records() {
        let (rs, rep) = parse_cdr("A,A,2012-03-05T10:00:00,sms,0\n".as_bytes(), &ParseOptions::default()).unwrap();
        assert!(rs.is_empty());
        assert_eq!(rep.self_records, 1);
        assert_eq!(rep.malformed, 0);
    }

    #[test]
    fn empty_input() {
        let (rs, rep) = parse_cdr("".as_bytes(), &ParseOptions::default()).unwrap();
        assert!(rs.is_empty());
        assert_eq!(rep, RejectionReport::default());
    }

    #[test]
    fn header_and_malformed_lines() {
        let text = "origin,target,timestamp,kind,duration_s\nA,B,2012-03-05T10:00:00Z,sms,0\nA,B,yesterday,call,1\nA,B,2012-03-05T10:00:00,sms,4\n";
        let (rs, rep) = parse_cdr(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(rep.header_skipped);
        assert_eq!(rep.malformed, 2);
        assert_eq!(rep.samples[0].0, 3);
        let strict = ParseOptions {
            max_malformed_fraction: 0.5,
            ..Default::default()
        };
        assert!(matches!(parse_cdr(text.as_bytes(), &strict), Err(Error::TooManyMalformed { .. })));
    }

    #[test]
    fn offset_timestamps_convert_to_utc() {
        let r = rec("A", "B", "2012-04-01T00:30:00+02:00");
        let w = WindowSpec::new("2012-03".parse().unwrap(), 1).unwrap();
        assert!(w.contains(r.timestamp));
        let local = WindowSpec {
            utc_offset_minutes: 120,
            ..w
        };
        assert!(!local.contains(r.timestamp));
    }

    #[test]
    fn window_covers_span_months() {
        let records = vec![
            rec("A", "B", "2012-01-15T00:00:00"),
            rec("A", "C", "2012-02-15T00:00:00"),
            rec("A", "D", "2012-03-31T23:59:59"),
            rec("A", "E", "2012-04-01T00:00:00"),
            rec("A", "F", "2011-12-31T23:59:59"),
        ];
        let w = WindowSpec::new("2012-03".parse().unwrap(), 3).unwrap();
        let counts = aggregate_window(&records, &w);
        assert_eq!(counts.len(), 3);
        assert!(counts.get("A", "B").is_some());
        assert!(counts.get("A", "E").is_none());
        assert!(counts.get("A", "F").is_none());
    }

    #[test]
    fn window_crosses_year_boundary() {
        let w = WindowSpec::new("2013-01".parse().unwrap(), 3).unwrap();
        assert!(w.contains(rec("A", "B", "2012-11-01T00:00:00").timestamp));
        assert!(!w.contains(rec("A", "B", "2012-10-31T00:00:00").timestamp));
    }

    #[test]
    fn repeated_calls_accumulate() {
        let records = vec![rec("A", "B", "2012-03-01T00:00:00"), rec("A", "B", "2012-03-02T00:00:00")];
        let counts = aggregate_window(&records, &WindowSpec::new("2012-03".parse().unwrap(), 3).unwrap());
        let c = counts.get("A", "B").unwrap();
        assert_eq!((c.calls, c.sms, c.duration_s), (2, 0, 20));
    }

    #[test]
    fn symmetrize_rules() {
        let mut counts = DirectedCounts::new();
        for _ in 0..3 {
            counts.record(&rec("A", "B", "2012-03-01T00:00:00"));
        }
        for _ in 0..2 {
            counts.record(&rec("B", "A", "2012-03-01T00:00:00"));
        }
        counts.record(&rec("A", "C", "2012-03-01T00:00:00"));
        let unit = symmetrize(&counts, WeightMode::Unit);
        assert_eq!(unit.node_count(), 2);
        assert_eq!(unit.edges().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);
        let weighted = symmetrize(&counts, WeightMode::CommCount);
        assert_eq!(weighted.edges().collect::<Vec<_>>(), vec![(0, 1, 5.0)]);
        assert_eq!(symmetrize(&DirectedCounts::new(), WeightMode::Unit).node_count(), 0);
    }

    #[test]
    fn star_center_is_removed() {
        let edges: Vec<_> = (0..201).map(|i| ("hub".to_string(), format!("leaf{i}"), 1.0)).collect();
        let g = build_graph(edges).unwrap();
        let (h, rep) = filter_high_degree(&g, 200);
        assert_eq!(h.node_count(), 201);
        assert_eq!(h.edge_count(), 0);
        assert_eq!(rep.removed, vec![("hub".to_string(), 201)]);
    }

    #[test]
    fn degree_at_cap_is_kept() {
        let edges: Vec<_> = (0..200).map(|i| ("hub".to_string(), format!("leaf{i}"), 1.0)).collect();
        let g = build_graph(edges).unwrap();
        let (h, rep) = filter_high_degree(&g, 200);
        assert_eq!(h, g);
        assert!(rep.removed.is_empty());
    }

    #[test]
    fn path_middle_is_removed() {
        let g = build_graph([("a", "b", 1.0), ("b", "c", 1.0)]).unwrap();
        let (h, _) = filter_high_degree(&g, 1);
        assert_eq!(h.external_ids(), &["a".to_string(), "c".to_string()]);
        assert_eq!(h.edge_count(), 0);
    }
}
