//! Line-oriented text format for networks.
//!
//! ```text
//! net alarm
//! node Burglary 2
//! node Alarm 2
//! parents Alarm Burglary
//! cpt Burglary
//! 0.99 0.01
//! cpt Alarm
//! 0.95 0.05     # Burglary = 0
//! 0.1 0.9       # Burglary = 1
//! ```
//!
//! CPT rows follow the mixed-radix order of the declared parents, last parent
//! fastest. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::network::{Network, NetworkBuilder, NetworkError, NodeId};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid network: {0}")]
    Network(#[from] NetworkError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

struct PendingCpt {
    node: NodeId,
    header_line: usize,
    rows_expected: usize,
    values: Vec<f64>,
}

pub fn parse_network(text: &str) -> Result<Network, FormatError> {
    let mut builder: Option<NetworkBuilder> = None;
    let mut parents_seen: Vec<bool> = Vec::new();
    let mut cpt_seen: Vec<bool> = Vec::new();
    let mut pending: Option<PendingCpt> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let head = words.next().unwrap();

        if let Some(block) = pending.as_mut() {
            if head.parse::<f64>().is_ok() {
                let b = builder.as_ref().unwrap();
                let card = b.node(block.node).cardinality;
                let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
                let row = row.map_err(|_| syntax(line_no, "malformed probability"))?;
                if row.len() != card {
                    return Err(syntax(
                        line_no,
                        format!(
                            "row has {} probabilities, node `{}` has {} states",
                            row.len(),
                            b.node(block.node).name,
                            card
                        ),
                    ));
                }
                block.values.extend(row);
                if block.values.len() == block.rows_expected * card {
                    let done = pending.take().unwrap();
                    builder.as_mut().unwrap().set_cpt(done.node, done.values);
                }
                continue;
            }
            let b = builder.as_ref().unwrap();
            let card = b.node(block.node).cardinality;
            return Err(syntax(
                block.header_line,
                format!(
                    "cpt block for `{}` has {} rows, expected {}",
                    b.node(block.node).name,
                    block.values.len() / card,
                    block.rows_expected
                ),
            ));
        }

        match head {
            "net" => {
                if builder.is_some() {
                    return Err(syntax(line_no, "duplicate `net` line"));
                }
                let name = words
                    .next()
                    .ok_or_else(|| syntax(line_no, "`net` needs a name"))?;
                if words.next().is_some() {
                    return Err(syntax(line_no, "trailing tokens after network name"));
                }
                builder = Some(NetworkBuilder::new(name));
            }
            _ if builder.is_none() => {
                return Err(syntax(line_no, "expected `net <name>` first"));
            }
            "node" => {
                let b = builder.as_mut().unwrap();
                let (name, card) = match (words.next(), words.next(), words.next()) {
                    (Some(n), Some(c), None) => (n, c),
                    _ => return Err(syntax(line_no, "expected `node <name> <cardinality>`")),
                };
                let card: usize = card
                    .parse()
                    .map_err(|_| syntax(line_no, format!("bad cardinality `{card}`")))?;
                if card < 2 {
                    return Err(syntax(line_no, "cardinality must be at least 2"));
                }
                if b.find(name).is_some() {
                    return Err(syntax(line_no, format!("duplicate node `{name}`")));
                }
                b.add_node(name, card);
                parents_seen.push(false);
                cpt_seen.push(false);
            }
            "parents" => {
                let b = builder.as_mut().unwrap();
                let name = words
                    .next()
                    .ok_or_else(|| syntax(line_no, "`parents` needs a node name"))?;
                let node = b
                    .find(name)
                    .ok_or_else(|| syntax(line_no, format!("unknown node `{name}`")))?;
                if parents_seen[node.0] {
                    return Err(syntax(line_no, format!("parents of `{name}` given twice")));
                }
                if cpt_seen[node.0] {
                    return Err(syntax(line_no, format!("parents of `{name}` follow its cpt")));
                }
                let mut ps = Vec::new();
                for p in words {
                    let id = b
                        .find(p)
                        .ok_or_else(|| syntax(line_no, format!("unknown parent `{p}`")))?;
                    ps.push(id);
                }
                parents_seen[node.0] = true;
                b.set_parents(node, &ps);
            }
            "cpt" => {
                let b = builder.as_ref().unwrap();
                let name = match (words.next(), words.next()) {
                    (Some(n), None) => n,
                    _ => return Err(syntax(line_no, "expected `cpt <node>`")),
                };
                let node = b
                    .find(name)
                    .ok_or_else(|| syntax(line_no, format!("unknown node `{name}`")))?;
                if cpt_seen[node.0] {
                    return Err(syntax(line_no, format!("cpt of `{name}` given twice")));
                }
                cpt_seen[node.0] = true;
                pending = Some(PendingCpt {
                    node,
                    header_line: line_no,
                    rows_expected: b.row_count(node),
                    values: Vec::new(),
                });
            }
            other => {
                return Err(syntax(line_no, format!("unknown keyword `{other}`")));
            }
        }
    }

    if let Some(block) = pending {
        let b = builder.as_ref().unwrap();
        let card = b.node(block.node).cardinality;
        return Err(syntax(
            block.header_line,
            format!(
                "cpt block for `{}` has {} rows, expected {}",
                b.node(block.node).name,
                block.values.len() / card,
                block.rows_expected
            ),
        ));
    }
    let builder = builder.ok_or_else(|| syntax(1, "empty network file"))?;
    Ok(builder.build()?)
}

/// Renders `net` so that [`parse_network`] reproduces it exactly.
pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "net {}", net.name()).unwrap();
    for node in net.nodes() {
        writeln!(out, "node {} {}", node.name, node.cardinality).unwrap();
    }
    for n in net.node_ids() {
        let ps = net.parents(n);
        if !ps.is_empty() {
            let names: Vec<&str> = ps.iter().map(|&p| net.node(p).name.as_str()).collect();
            writeln!(out, "parents {} {}", net.node(n).name, names.join(" ")).unwrap();
        }
    }
    for n in net.node_ids() {
        writeln!(out, "cpt {}", net.node(n).name).unwrap();
        let cpt = net.cpt(n);
        for r in 0..cpt.rows() {
            let cells: Vec<String> = cpt.row(r).iter().map(|p| format!("{p}")).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
    }
    out
}

pub fn read_network_file(path: impl AsRef<Path>) -> Result<Network, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALARM: &str = "\
# two node example
net alarm
node Burglary 2
node Alarm 2
parents Alarm Burglary
cpt Burglary
0.99 0.01
cpt Alarm
0.95 0.05   # no burglary
0.1 0.9
";

    #[test]
    fn parses_and_round_trips() {
        let net = parse_network(ALARM).unwrap();
        assert_eq!(net.name(), "alarm");
        assert_eq!(net.len(), 2);
        assert_eq!(net.cpt(NodeId(1)).row(1), &[0.1, 0.9]);
        let again = parse_network(&write_network(&net)).unwrap();
        assert_eq!(write_network(&again), write_network(&net));
        assert_eq!(again.cpt(NodeId(1)), net.cpt(NodeId(1)));
    }

    fn line_of(err: FormatError) -> usize {
        match err {
            FormatError::Syntax { line, .. } => line,
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = ALARM.replace("0.1 0.9", "0.1 0.8 0.1");
        assert_eq!(line_of(parse_network(&bad).unwrap_err()), 10);
        let bad = ALARM.replace("parents Alarm Burglary", "parents Alarm Nope");
        assert_eq!(line_of(parse_network(&bad).unwrap_err()), 5);
        let bad = ALARM.replace("0.1 0.9\n", "");
        assert_eq!(line_of(parse_network(&bad).unwrap_err()), 8);
        let bad = ALARM.replace("node Alarm 2", "node Alarm x");
        assert_eq!(line_of(parse_network(&bad).unwrap_err()), 4);
        assert_eq!(line_of(parse_network("node A 2\n").unwrap_err()), 1);
        let bad = ALARM.replace("cpt Alarm\n", "cpt Alarm\nbogus\n");
        assert_eq!(line_of(parse_network(&bad).unwrap_err()), 8);
    }

    #[test]
    fn validation_errors_surface() {
        let bad = ALARM.replace("0.99 0.01", "0.99 0.02");
        assert!(matches!(
            parse_network(&bad),
            Err(FormatError::Network(NetworkError::RowSum { .. }))
        ));
    }
}
