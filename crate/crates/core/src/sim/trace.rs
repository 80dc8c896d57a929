//! JSON-lines event log.
//!
//! Every line is an object whose first two fields are `t` (seconds with six
//! fixed decimals) and `kind`. Field order is fixed by the line structs below,
//! so identical runs give byte-identical files.

use std::io::{BufRead, Write};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::aodv::{ControlPacket, DropReason, RrepPacket, RreqPacket};
use crate::error::{Error, Result};
use crate::net::{NodeId, Strategy};
use crate::time::SimTime;

pub const TRACE_VERSION: u32 = 1;

/// A [`SimTime`] written as a bare fixed-point number, e.g. `12.000250`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fixed(SimTime);

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.0.to_string()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fixed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: &RawValue = Deserialize::deserialize(d)?;
        SimTime::parse_fixed(raw.get())
            .map(Fixed)
            .ok_or_else(|| D::Error::custom(format!("bad timestamp {}", raw.get())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub seed: u64,
    pub node_count: usize,
    pub strategy: Strategy,
    pub drop_prob: f64,
    pub selfish: Vec<NodeId>,
    pub sim_duration: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Header(TraceHeader),
    Session {
        t: SimTime,
        src: NodeId,
        dst: NodeId,
        until: SimTime,
    },
    Tx {
        t: SimTime,
        seq: u64,
        packet: ControlPacket,
    },
    Loss {
        t: SimTime,
        seq: u64,
        node: NodeId,
    },
    Drop {
        t: SimTime,
        node: NodeId,
        reason: DropReason,
        src_id: NodeId,
        dest_id: NodeId,
    },
    End {
        t: SimTime,
        tx_count: u64,
    },
}

impl TraceEvent {
    pub fn time(&self) -> SimTime {
        match self {
            TraceEvent::Header(_) => SimTime::ZERO,
            TraceEvent::Session { t, .. }
            | TraceEvent::Tx { t, .. }
            | TraceEvent::Loss { t, .. }
            | TraceEvent::Drop { t, .. }
            | TraceEvent::End { t, .. } => *t,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    t: Fixed,
    kind: String,
    version: u32,
    seed: u64,
    node_count: usize,
    strategy: Strategy,
    drop_prob: f64,
    selfish: Vec<NodeId>,
    sim_duration: Fixed,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionLine {
    t: Fixed,
    kind: String,
    src: NodeId,
    dst: NodeId,
    until: Fixed,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RreqLine {
    t: Fixed,
    kind: String,
    seq: u64,
    src: NodeId,
    dst: String,
    #[serde(rename = "type")]
    ptype: String,
    src_id: NodeId,
    dest_id: NodeId,
    src_seq_num: u32,
    dest_seq_num: u32,
    bcast_id: u32,
    ttl: i32,
    next_to_source: Option<NodeId>,
    duplicate_flag: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RrepLine {
    t: Fixed,
    kind: String,
    seq: u64,
    src: NodeId,
    dst: NodeId,
    #[serde(rename = "type")]
    ptype: String,
    src_id: NodeId,
    dest_id: NodeId,
    dest_seq_num: u32,
    hop_count: u32,
    next_to_source: Option<NodeId>,
    duplicate_flag: bool,
    next_to_destination: Option<NodeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossLine {
    t: Fixed,
    kind: String,
    seq: u64,
    node: NodeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DropLine {
    t: Fixed,
    kind: String,
    node: NodeId,
    reason: DropReason,
    src_id: NodeId,
    dest_id: NodeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndLine {
    t: Fixed,
    kind: String,
    tx_count: u64,
}

#[derive(Deserialize)]
struct Probe {
    kind: String,
    #[serde(rename = "type")]
    ptype: Option<String>,
}

fn kind(s: &str) -> String {
    s.to_string()
}

/// Serializes one event as a single JSON line (no trailing newline).
pub fn to_line(event: &TraceEvent) -> Result<String> {
    let s = match event {
        TraceEvent::Header(h) => serde_json::to_string(&HeaderLine {
            t: Fixed(SimTime::ZERO),
            kind: kind("header"),
            version: h.version,
            seed: h.seed,
            node_count: h.node_count,
            strategy: h.strategy,
            drop_prob: h.drop_prob,
            selfish: h.selfish.clone(),
            sim_duration: Fixed(h.sim_duration),
        })?,
        TraceEvent::Session { t, src, dst, until } => serde_json::to_string(&SessionLine {
            t: Fixed(*t),
            kind: kind("session"),
            src: *src,
            dst: *dst,
            until: Fixed(*until),
        })?,
        TraceEvent::Tx {
            t,
            seq,
            packet: ControlPacket::Rreq(p),
        } => serde_json::to_string(&RreqLine {
            t: Fixed(*t),
            kind: kind("tx"),
            seq: *seq,
            src: p.sender,
            dst: "bcast".into(),
            ptype: "RREQ".into(),
            src_id: p.src_id,
            dest_id: p.dest_id,
            src_seq_num: p.src_seq_num,
            dest_seq_num: p.dest_seq_num,
            bcast_id: p.bcast_id,
            ttl: p.ttl,
            next_to_source: p.next_to_source,
            duplicate_flag: p.duplicate_flag,
        })?,
        TraceEvent::Tx {
            t,
            seq,
            packet: ControlPacket::Rrep(p),
        } => serde_json::to_string(&RrepLine {
            t: Fixed(*t),
            kind: kind("tx"),
            seq: *seq,
            src: p.sender,
            dst: p.receiver,
            ptype: "RREP".into(),
            src_id: p.src_id,
            dest_id: p.dest_id,
            dest_seq_num: p.dest_seq_num,
            hop_count: p.hop_count,
            next_to_source: p.next_to_source,
            duplicate_flag: p.duplicate_flag,
            next_to_destination: p.next_to_destination,
        })?,
        TraceEvent::Loss { t, seq, node } => serde_json::to_string(&LossLine {
            t: Fixed(*t),
            kind: kind("loss"),
            seq: *seq,
            node: *node,
        })?,
        TraceEvent::Drop {
            t,
            node,
            reason,
            src_id,
            dest_id,
        } => serde_json::to_string(&DropLine {
            t: Fixed(*t),
            kind: kind("drop"),
            node: *node,
            reason: *reason,
            src_id: *src_id,
            dest_id: *dest_id,
        })?,
        TraceEvent::End { t, tx_count } => serde_json::to_string(&EndLine {
            t: Fixed(*t),
            kind: kind("end"),
            tx_count: *tx_count,
        })?,
    };
    Ok(s)
}

/// Parses one trace line.
pub fn parse_line(line: &str) -> Result<TraceEvent> {
    let corrupt = |e: serde_json::Error| Error::TraceCorrupt(format!("{e}: {line}"));
    let probe: Probe = serde_json::from_str(line).map_err(corrupt)?;
    let event = match (probe.kind.as_str(), probe.ptype.as_deref()) {
        ("header", _) => {
            let h: HeaderLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::Header(TraceHeader {
                version: h.version,
                seed: h.seed,
                node_count: h.node_count,
                strategy: h.strategy,
                drop_prob: h.drop_prob,
                selfish: h.selfish,
                sim_duration: h.sim_duration.0,
            })
        }
        ("session", _) => {
            let s: SessionLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::Session {
                t: s.t.0,
                src: s.src,
                dst: s.dst,
                until: s.until.0,
            }
        }
        ("tx", Some("RREQ")) => {
            let r: RreqLine = serde_json::from_str(line).map_err(corrupt)?;
            if r.dst != "bcast" {
                return Err(Error::TraceCorrupt(format!(
                    "RREQ with unicast dst: {line}"
                )));
            }
            TraceEvent::Tx {
                t: r.t.0,
                seq: r.seq,
                packet: ControlPacket::Rreq(RreqPacket {
                    src_id: r.src_id,
                    dest_id: r.dest_id,
                    src_seq_num: r.src_seq_num,
                    dest_seq_num: r.dest_seq_num,
                    bcast_id: r.bcast_id,
                    ttl: r.ttl,
                    sender: r.src,
                    next_to_source: r.next_to_source,
                    duplicate_flag: r.duplicate_flag,
                }),
            }
        }
        ("tx", Some("RREP")) => {
            let r: RrepLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::Tx {
                t: r.t.0,
                seq: r.seq,
                packet: ControlPacket::Rrep(RrepPacket {
                    src_id: r.src_id,
                    dest_id: r.dest_id,
                    dest_seq_num: r.dest_seq_num,
                    hop_count: r.hop_count,
                    sender: r.src,
                    receiver: r.dst,
                    next_to_source: r.next_to_source,
                    duplicate_flag: r.duplicate_flag,
                    next_to_destination: r.next_to_destination,
                }),
            }
        }
        ("loss", _) => {
            let l: LossLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::Loss {
                t: l.t.0,
                seq: l.seq,
                node: l.node,
            }
        }
        ("drop", _) => {
            let d: DropLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::Drop {
                t: d.t.0,
                node: d.node,
                reason: d.reason,
                src_id: d.src_id,
                dest_id: d.dest_id,
            }
        }
        ("end", _) => {
            let e: EndLine = serde_json::from_str(line).map_err(corrupt)?;
            TraceEvent::End {
                t: e.t.0,
                tx_count: e.tx_count,
            }
        }
        (k, p) => {
            return Err(Error::TraceCorrupt(format!(
                "unknown record kind {k:?} / type {p:?}"
            )));
        }
    };
    Ok(event)
}

pub fn write_trace<W: Write>(mut out: W, events: &[TraceEvent]) -> Result<()> {
    for e in events {
        out.write_all(to_line(e)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(events: &[TraceEvent]) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, events)?;
    Ok(String::from_utf8(buf).expect("trace lines are UTF-8"))
}

/// Reads a whole trace, checking the header version and that the log is
/// terminated by its `end` record.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_line(&line)?;
        match (&event, i) {
            (TraceEvent::Header(h), 0) => {
                if h.version != TRACE_VERSION {
                    return Err(Error::TraceVersionMismatch {
                        found: h.version,
                        expected: TRACE_VERSION,
                    });
                }
            }
            (_, 0) => return Err(Error::TraceCorrupt("first line is not a header".into())),
            (TraceEvent::Header(_), _) => {
                return Err(Error::TraceCorrupt(format!(
                    "second header at line {}",
                    i + 1
                )))
            }
            _ => {}
        }
        if matches!(events.last(), Some(TraceEvent::End { .. })) {
            return Err(Error::TraceCorrupt("records after end".into()));
        }
        events.push(event);
    }
    match events.last() {
        Some(TraceEvent::End { .. }) => Ok(events),
        None => Err(Error::TraceCorrupt("empty trace".into())),
        _ => Err(Error::TraceCorrupt(
            "missing end record (truncated trace?)".into(),
        )),
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>> {
    read_trace(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TraceEvent> {
        vec![
            TraceEvent::Header(TraceHeader {
                version: TRACE_VERSION,
                seed: 9,
                node_count: 3,
                strategy: Strategy::DropReq,
                drop_prob: 1.0,
                selfish: vec![NodeId(2)],
                sim_duration: SimTime::from_micros(10_000_000),
            }),
            TraceEvent::Tx {
                t: SimTime::from_micros(1_002_250),
                seq: 0,
                packet: ControlPacket::Rreq(RreqPacket {
                    src_id: NodeId(0),
                    dest_id: NodeId(2),
                    src_seq_num: 1,
                    dest_seq_num: 0,
                    bcast_id: 1,
                    ttl: 35,
                    sender: NodeId(0),
                    next_to_source: None,
                    duplicate_flag: false,
                }),
            },
            TraceEvent::Loss {
                t: SimTime::from_micros(1_002_250),
                seq: 0,
                node: NodeId(1),
            },
            TraceEvent::Tx {
                t: SimTime::from_micros(1_004_000),
                seq: 1,
                packet: ControlPacket::Rrep(RrepPacket {
                    src_id: NodeId(0),
                    dest_id: NodeId(2),
                    dest_seq_num: 1,
                    hop_count: 0,
                    sender: NodeId(2),
                    receiver: NodeId(1),
                    next_to_source: Some(NodeId(1)),
                    duplicate_flag: false,
                    next_to_destination: Some(NodeId(0)),
                }),
            },
            TraceEvent::End {
                t: SimTime::from_micros(10_000_000),
                tx_count: 2,
            },
        ]
    }

    #[test]
    fn lines_round_trip_exactly() {
        let events = sample();
        let text = trace_to_string(&events).unwrap();
        assert_eq!(parse_trace(&text).unwrap(), events);
        assert!(text.lines().all(|l| l.starts_with("{\"t\":")));
        let tx = text.lines().nth(1).unwrap();
        assert!(
            tx.starts_with(
                r#"{"t":1.002250,"kind":"tx","seq":0,"src":0,"dst":"bcast","type":"RREQ""#
            ),
            "{tx}"
        );
    }

    #[test]
    fn truncation_and_version_are_rejected() {
        let text = trace_to_string(&sample()).unwrap();
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_trace(&cut), Err(Error::TraceCorrupt(_))));
        let half = &text[..text.len() / 2];
        assert!(matches!(parse_trace(half), Err(Error::TraceCorrupt(_))));
        let bumped = text.replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            parse_trace(&bumped),
            Err(Error::TraceVersionMismatch {
                found: 7,
                expected: 1
            })
        ));
    }
}
