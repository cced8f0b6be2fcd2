//! Line-oriented text formats: semantic-network snapshots, contact traces,
//! position dumps, item files and assignment files.
//!
//! Every reader accepts blank lines and `#` comments and reports the 1-based
//! line number of the first malformed line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use semnet_core::dataset::Dataset;
use semnet_core::mobility::{sort_contacts, validate_contacts, ContactEvent};
use semnet_core::{
    ContributedNetwork, Edge, EdgeState, ItemId, NodeId, Seconds, SemanticNetwork, TagLabel, TaggedItem,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("contact {index}: {msg}")]
    Invalid { index: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

/// Writes a label, double-quoting it when it contains whitespace, a quote
/// or a backslash.
pub fn quote_label(label: &str) -> String {
    let plain = !label.is_empty() && !label.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\');
    if plain {
        return label.to_string();
    }
    let mut out = String::with_capacity(label.len() + 2);
    out.push('"');
    for c in label.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Splits a line into whitespace-separated tokens, honouring quoted labels.
pub fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let Some(&first) = chars.peek() else {
            return Ok(tokens);
        };
        let mut tok = String::new();
        if first == '"' {
            chars.next();
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '\\' => tok.push(chars.next().ok_or("dangling backslash")?),
                    '"' => {
                        closed = true;
                        break;
                    }
                    c => tok.push(c),
                }
            }
            if !closed {
                return Err("unterminated quote".into());
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace()) {
                return Err("quoted label must be followed by whitespace".into());
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                tok.push(c);
                chars.next();
            }
        }
        tokens.push(tok);
    }
}

/// Lines that carry data, with their line numbers.
fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(e)),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

fn num<T: std::str::FromStr>(tok: &str, what: &str, line: usize) -> Result<T, FormatError> {
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

fn label(tok: &str, line: usize) -> Result<TagLabel, FormatError> {
    TagLabel::new(tok).map_err(|e| parse_err(line, e.to_string()))
}

/// Serialises a network as an `SN` snapshot.
pub fn write_snapshot(out: &mut impl Write, node: NodeId, time: Seconds, net: &SemanticNetwork) -> io::Result<()> {
    let mut s = format!("SN {node} {time}\n");
    for v in net.vertices() {
        writeln!(s, "V {}", quote_label(v.as_str())).unwrap();
    }
    for (e, st) in net.edges() {
        let (a, b) = e.endpoints();
        writeln!(
            s,
            "E {} {} {} {}",
            quote_label(a.as_str()),
            quote_label(b.as_str()),
            st.last_activation,
            st.popularity
        )
        .unwrap();
    }
    out.write_all(s.as_bytes())
}

/// Serialises a contributed network under a `CN` header, keeping its
/// collection order.
pub fn write_contributed(out: &mut impl Write, c: &ContributedNetwork) -> io::Result<()> {
    let mut s = String::from("CN\n");
    for v in c.vertices() {
        writeln!(s, "V {}", quote_label(v.as_str())).unwrap();
    }
    for e in c.edges() {
        let (a, b) = e.endpoints();
        writeln!(s, "E {} {}", quote_label(a.as_str()), quote_label(b.as_str())).unwrap();
    }
    out.write_all(s.as_bytes())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub node: NodeId,
    pub time: Seconds,
    pub network: SemanticNetwork,
}

/// Parses one `SN` snapshot.
pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Snapshot, FormatError> {
    let mut header = None;
    let mut net = SemanticNetwork::new();
    for line in data_lines(reader) {
        let (n, text) = line?;
        let toks = tokenize(&text).map_err(|m| parse_err(n, m))?;
        match (toks[0].as_str(), header.is_some()) {
            ("SN", false) => {
                if toks.len() != 3 {
                    return Err(parse_err(n, "expected SN <node> <time>"));
                }
                header = Some((NodeId(num(&toks[1], "node id", n)?), num(&toks[2], "time", n)?));
            }
            ("SN", true) => return Err(parse_err(n, "second SN header")),
            (_, false) => return Err(parse_err(n, "missing SN header")),
            ("V", true) if toks.len() == 2 => net.add_vertex(label(&toks[1], n)?),
            ("E", true) if toks.len() == 5 => {
                let e = Edge::new(label(&toks[1], n)?, label(&toks[2], n)?).map_err(|e| parse_err(n, e.to_string()))?;
                if net.edge_state(&e).is_some() {
                    return Err(parse_err(n, "duplicate edge"));
                }
                let state = EdgeState {
                    last_activation: num(&toks[3], "last activation", n)?,
                    popularity: num(&toks[4], "popularity", n)?,
                };
                if state.popularity == 0 {
                    return Err(parse_err(n, "popularity must be at least 1"));
                }
                net.insert_edge(e, state);
            }
            (tag, true) => return Err(parse_err(n, format!("unexpected {tag:?} record"))),
        }
    }
    let (node, time) = header.ok_or_else(|| parse_err(0, "empty snapshot"))?;
    Ok(Snapshot {
        node,
        time,
        network: net,
    })
}

/// Writes a contact trace, one `<a> <b> <start> <end>` line per event.
pub fn write_trace(out: &mut impl Write, events: &[ContactEvent]) -> io::Result<()> {
    let mut s = String::from("# node_a node_b start end\n");
    for ev in events {
        writeln!(s, "{} {} {} {}", ev.a, ev.b, ev.start, ev.end).unwrap();
    }
    out.write_all(s.as_bytes())
}

/// Parses, validates and start-sorts a contact trace. Pairs may be given in
/// either order.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<ContactEvent>, FormatError> {
    let mut events = Vec::new();
    for line in data_lines(reader) {
        let (n, text) = line?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(n, "expected <node_a> <node_b> <start> <end>"));
        }
        let a: u32 = num(toks[0], "node id", n)?;
        let b: u32 = num(toks[1], "node id", n)?;
        if a == b {
            return Err(parse_err(n, "contact of a node with itself"));
        }
        let ev = ContactEvent {
            a: NodeId(a.min(b)),
            b: NodeId(a.max(b)),
            start: num(toks[2], "start time", n)?,
            end: num(toks[3], "end time", n)?,
        };
        if !(ev.end > ev.start) || !ev.start.is_finite() || !ev.end.is_finite() {
            return Err(parse_err(n, "end must be after start"));
        }
        events.push(ev);
    }
    sort_contacts(&mut events);
    validate_contacts(&events).map_err(|(index, msg)| FormatError::Invalid {
        index,
        msg: msg.to_string(),
    })?;
    Ok(events)
}

/// Writes one `<t> <node> <x> <y>` position line.
pub fn write_position(out: &mut impl Write, t: Seconds, node: NodeId, x: f64, y: f64) -> io::Result<()> {
    writeln!(out, "{t} {node} {x} {y}")
}

/// Writes the item file: `<item_id> <tag> <tag> ...` per line.
pub fn write_items<'a>(out: &mut impl Write, items: impl IntoIterator<Item = &'a TaggedItem>) -> io::Result<()> {
    let mut s = String::new();
    for item in items {
        write!(s, "{}", item.id()).unwrap();
        for t in item.tags() {
            write!(s, " {}", quote_label(t.as_str())).unwrap();
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes())
}

pub fn read_items<R: BufRead>(reader: R) -> Result<BTreeMap<ItemId, TaggedItem>, FormatError> {
    let mut items = BTreeMap::new();
    for line in data_lines(reader) {
        let (n, text) = line?;
        let toks = tokenize(&text).map_err(|m| parse_err(n, m))?;
        let id = ItemId(num(&toks[0], "item id", n)?);
        let tags = toks[1..].iter().map(|t| label(t, n)).collect::<Result<Vec<_>, _>>()?;
        let item = TaggedItem::new(id, tags).map_err(|e| parse_err(n, e.to_string()))?;
        if items.insert(id, item).is_some() {
            return Err(parse_err(n, format!("duplicate item {id}")));
        }
    }
    Ok(items)
}

/// Writes the assignment file: `<node_id> <item_id> ...` per node, nodes
/// without items included.
pub fn write_assignment(out: &mut impl Write, assignment: &[Vec<ItemId>]) -> io::Result<()> {
    let mut s = String::new();
    for (node, ids) in assignment.iter().enumerate() {
        write!(s, "{node}").unwrap();
        for id in ids {
            write!(s, " {id}").unwrap();
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes())
}

/// Reads an assignment file into a per-node list. Nodes may appear in any
/// order; a node listed twice has its items concatenated.
pub fn read_assignment<R: BufRead>(reader: R) -> Result<Vec<Vec<ItemId>>, FormatError> {
    let mut out: Vec<Vec<ItemId>> = Vec::new();
    for line in data_lines(reader) {
        let (n, text) = line?;
        let mut toks = text.split_whitespace();
        let node: usize = num(toks.next().expect("data line is non-empty"), "node id", n)?;
        if node >= out.len() {
            out.resize_with(node + 1, Vec::new);
        }
        for t in toks {
            out[node].push(ItemId(num(t, "item id", n)?));
        }
    }
    Ok(out)
}

/// Writes a node's owned item ids on a single line.
pub fn write_item_ids(out: &mut impl Write, ids: impl IntoIterator<Item = ItemId>) -> io::Result<()> {
    let line: Vec<String> = ids.into_iter().map(|id| id.to_string()).collect();
    writeln!(out, "{}", line.join(" "))
}

pub fn read_item_ids<R: BufRead>(reader: R) -> Result<Vec<ItemId>, FormatError> {
    let mut ids = Vec::new();
    for line in data_lines(reader) {
        let (n, text) = line?;
        for t in text.split_whitespace() {
            ids.push(ItemId(num(t, "item id", n)?));
        }
    }
    Ok(ids)
}

pub fn dataset_from_files<R1: BufRead, R2: BufRead>(items: R1, assignment: R2) -> Result<Dataset, FormatError> {
    Ok(Dataset {
        items: read_items(items)?,
        assignment: read_assignment(assignment)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_round_trips() {
        for raw in ["plain", "two words", "a\"b", "back\\slash", "tab\there"] {
            let q = quote_label(raw);
            let toks = tokenize(&format!("V {q}")).unwrap();
            assert_eq!(toks, vec!["V".to_string(), raw.to_string()]);
        }
        assert_eq!(quote_label("plain"), "plain");
        assert_eq!(quote_label("new york"), "\"new york\"");
    }

    #[test]
    fn tokenizer_rejects_bad_quotes() {
        assert!(tokenize("V \"open").is_err());
        assert!(tokenize("V \"a\"b").is_err());
    }

    #[test]
    fn trace_line_format() {
        let ev = read_trace("0 1 10.0 42.5\n".as_bytes()).unwrap();
        assert_eq!(
            ev,
            vec![ContactEvent {
                a: NodeId(0),
                b: NodeId(1),
                start: 10.0,
                end: 42.5
            }]
        );
        assert!(read_trace("".as_bytes()).unwrap().is_empty());
        assert!(read_trace("# only a comment\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn trace_errors_carry_line_numbers() {
        let err = read_trace("0 1 1 2\n# c\n0 1 x 3\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 3: bad start time \"x\"");
        let err = read_trace("0 1 0 10\n0 1 5 12\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Invalid { .. }), "{err}");
        assert!(read_trace("3 3 0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn snapshot_header_is_required() {
        assert!(read_snapshot("V a\n".as_bytes()).is_err());
        assert!(read_snapshot("".as_bytes()).is_err());
        let s = read_snapshot("SN 4 12.5\n".as_bytes()).unwrap();
        assert_eq!((s.node, s.time), (NodeId(4), 12.5));
        assert!(s.network.is_empty());
    }

    #[test]
    fn assignment_tolerates_any_node_order() {
        let a = read_assignment("2 5 6\n0 1\n".as_bytes()).unwrap();
        assert_eq!(a, vec![vec![ItemId(1)], vec![], vec![ItemId(5), ItemId(6)]]);
    }
}
