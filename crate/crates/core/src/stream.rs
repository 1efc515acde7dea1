//! Update stream text format: one event per line.
//!
//! ```text
//! + <weight> <v1> <v2> ... <vk>   insert
//! - <edge-id>                     delete
//! # comment
//! ```

use thiserror::Error;

use crate::hypergraph::EdgeId;

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateEvent {
    Insert { weight: f64, verts: Vec<u32> },
    Delete { id: EdgeId },
}

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Parse a full update stream. Comment (`#`) and blank lines are ignored.
pub fn parse_stream(text: &str) -> Result<Vec<UpdateEvent>, StreamError> {
    let mut events = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        events.push(parse_line(line).map_err(|msg| StreamError::Parse { line: lineno + 1, msg })?);
    }
    Ok(events)
}

fn parse_line(line: &str) -> Result<UpdateEvent, String> {
    let mut tok = line.split_whitespace();
    match tok.next() {
        Some("+") => {
            let weight: f64 = tok
                .next()
                .ok_or("missing weight")?
                .parse()
                .map_err(|e| format!("bad weight: {e}"))?;
            let verts: Vec<u32> = tok
                .map(|t| t.parse().map_err(|e| format!("bad vertex '{t}': {e}")))
                .collect::<Result<_, _>>()?;
            if verts.len() < 2 {
                return Err("insert needs at least 2 vertices".into());
            }
            Ok(UpdateEvent::Insert { weight, verts })
        }
        Some("-") => {
            let id: u64 = tok
                .next()
                .ok_or("missing edge id")?
                .parse()
                .map_err(|e| format!("bad edge id: {e}"))?;
            if tok.next().is_some() {
                return Err("trailing tokens after delete".into());
            }
            Ok(UpdateEvent::Delete { id: EdgeId(id) })
        }
        Some(op) => Err(format!("unknown op '{op}'")),
        None => unreachable!("blank lines filtered"),
    }
}

/// Render events back to the text format.
pub fn format_stream(events: &[UpdateEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        match ev {
            UpdateEvent::Insert { weight, verts } => {
                out.push_str(&format!("+ {weight}"));
                for v in verts {
                    out.push_str(&format!(" {v}"));
                }
                out.push('\n');
            }
            UpdateEvent::Delete { id } => out.push_str(&format!("- {id}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inserts_deletes_comments() {
        let text = "# header\n+ 1.5 0 1 2\n\n- 0\n";
        let evs = parse_stream(text).unwrap();
        assert_eq!(
            evs,
            vec![
                UpdateEvent::Insert { weight: 1.5, verts: vec![0, 1, 2] },
                UpdateEvent::Delete { id: EdgeId(0) },
            ]
        );
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_stream("+ 1.0 0 1\n* nope\n").unwrap_err();
        assert_eq!(err, StreamError::Parse { line: 2, msg: "unknown op '*'".into() });
    }

    #[test]
    fn roundtrip() {
        let text = "+ 2 0 3\n- 7\n";
        let evs = parse_stream(text).unwrap();
        assert_eq!(format_stream(&evs), text);
    }
}
