//! Parser for the `graph TD` flowchart subset used by the reasoning blueprints.
//!
//! Supported statements, one per line:
//!
//! ```text
//! graph TD;                         header, trailing `;` optional
//! A[Label] --> B{Decision}          node declarations inline in edges
//! A -->|edge label| C(Rounded)      labelled edges, `--> |label|` also accepted
//! D["Quoted: label, with commas"]   quoted labels
//! %% comment                        whole-line comments
//! ```
//!
//! Ids referenced without a shape are declared implicitly with an empty
//! label. `&` fan-out, other directions and every other Mermaid construct
//! are rejected.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    TopDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeShape {
    /// `[label]`
    Rectangle,
    /// `{label}`
    Decision,
    /// `(label)`
    Rounded,
}

impl NodeShape {
    fn delimiters(self) -> (char, char) {
        match self {
            NodeShape::Rectangle => ('[', ']'),
            NodeShape::Decision => ('{', '}'),
            NodeShape::Rounded => ('(', ')'),
        }
    }

    fn from_open(c: char) -> Option<NodeShape> {
        match c {
            '[' => Some(NodeShape::Rectangle),
            '{' => Some(NodeShape::Decision),
            '(' => Some(NodeShape::Rounded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDecl {
    pub id: String,
    pub label: String,
    pub shape: NodeShape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDecl {
    pub from: String,
    pub to: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MermaidGraph {
    pub direction: Direction,
    /// Nodes in order of first appearance.
    pub nodes: IndexMap<String, NodeDecl>,
    /// Edges in source order.
    pub edges: Vec<EdgeDecl>,
}

impl MermaidGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The first node to appear in the source, used as the reachability root.
    pub fn root(&self) -> Option<&NodeDecl> {
        self.nodes.values().next()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MermaidError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unsupported graph direction {directive:?} (only TD is supported)")]
    UnsupportedDirective { line: usize, directive: String },
}

fn syntax(line: usize, reason: impl Into<String>) -> MermaidError {
    MermaidError::Syntax {
        line,
        reason: reason.into(),
    }
}

pub fn parse_mermaid(source: &str) -> Result<MermaidGraph, MermaidError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("%%"));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "missing `graph TD` header"))?;
    let direction = parse_header(header_line, header)?;

    let mut builder = GraphBuilder {
        nodes: IndexMap::new(),
        edges: Vec::new(),
    };
    for (line_no, line) in lines {
        parse_statement(line_no, line, &mut builder)?;
    }
    Ok(MermaidGraph {
        direction,
        nodes: builder.nodes,
        edges: builder.edges,
    })
}

fn parse_header(line_no: usize, line: &str) -> Result<Direction, MermaidError> {
    let body = line.strip_suffix(';').unwrap_or(line).trim_end();
    let mut words = body.split_whitespace();
    match words.next() {
        Some("graph") => {}
        _ => return Err(syntax(line_no, "expected `graph TD` header")),
    }
    let dir = words
        .next()
        .ok_or_else(|| syntax(line_no, "graph header has no direction"))?;
    if words.next().is_some() {
        return Err(syntax(line_no, "unexpected tokens after graph direction"));
    }
    match dir {
        "TD" => Ok(Direction::TopDown),
        other => Err(MermaidError::UnsupportedDirective {
            line: line_no,
            directive: other.to_string(),
        }),
    }
}

struct GraphBuilder {
    nodes: IndexMap<String, NodeDecl>,
    edges: Vec<EdgeDecl>,
}

impl GraphBuilder {
    fn reference(
        &mut self,
        line: usize,
        id: &str,
        shape: Option<(NodeShape, String)>,
    ) -> Result<(), MermaidError> {
        match (self.nodes.get_mut(id), shape) {
            (None, shape) => {
                let (shape, label) = shape.unwrap_or((NodeShape::Rectangle, String::new()));
                self.nodes.insert(
                    id.to_string(),
                    NodeDecl {
                        id: id.to_string(),
                        label,
                        shape,
                    },
                );
            }
            (Some(_), None) => {}
            (Some(existing), Some((shape, label))) => {
                // A bare reference followed by a real declaration fills the label in.
                let bare = existing.label.is_empty() && existing.shape == NodeShape::Rectangle;
                if bare {
                    existing.label = label;
                    existing.shape = shape;
                } else if existing.label != label || existing.shape != shape {
                    return Err(syntax(
                        line,
                        format!("node {id:?} redeclared with a different label"),
                    ));
                }
            }
        }
        Ok(())
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&'a str, MermaidError> {
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(match self.peek() {
                Some('&') => syntax(self.line, "`&` fan-out is not supported"),
                Some(c) => syntax(self.line, format!("expected node id, found {c:?}")),
                None => syntax(self.line, "expected node id, found end of line"),
            });
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    /// Reads up to (not including) `close`, then consumes it.
    fn until(&mut self, close: &str, what: &str) -> Result<&'a str, MermaidError> {
        let rest = self.rest();
        match rest.find(close) {
            Some(end) => {
                self.pos += end + close.len();
                Ok(&rest[..end])
            }
            None => Err(syntax(
                self.line,
                format!("unterminated {what}: missing {close:?}"),
            )),
        }
    }
}

/// A node id, plus its shape and label when declared inline.
type NodeRef<'a> = (&'a str, Option<(NodeShape, String)>);

fn parse_node_ref<'a>(cur: &mut Cursor<'a>) -> Result<NodeRef<'a>, MermaidError> {
    let id = cur.ident()?;
    let Some(shape) = cur.peek().and_then(NodeShape::from_open) else {
        return Ok((id, None));
    };
    let (open, close) = shape.delimiters();
    cur.pos += open.len_utf8();
    let label = if shape == NodeShape::Rectangle && cur.eat("\"") {
        let text = cur.until("\"", "quoted label")?;
        if !cur.eat("]") {
            return Err(syntax(cur.line, "expected `]` after quoted label"));
        }
        text
    } else {
        let text = cur.until(&close.to_string(), "node label")?;
        if text.contains(open) {
            return Err(syntax(
                cur.line,
                format!("nested {open:?} in label of node {id:?}"),
            ));
        }
        text
    };
    Ok((id, Some((shape, label.to_string()))))
}

fn parse_statement(
    line_no: usize,
    line: &str,
    graph: &mut GraphBuilder,
) -> Result<(), MermaidError> {
    let line = line.strip_suffix(';').unwrap_or(line).trim_end();
    let mut cur = Cursor {
        text: line,
        pos: 0,
        line: line_no,
    };

    let (first, shape) = parse_node_ref(&mut cur)?;
    graph.reference(line_no, first, shape)?;
    let mut from = first;

    loop {
        cur.skip_ws();
        if cur.peek().is_none() {
            return Ok(());
        }
        if cur.peek() == Some('&') {
            return Err(syntax(line_no, "`&` fan-out is not supported"));
        }
        if !cur.eat("-->") {
            return Err(syntax(
                line_no,
                format!("expected `-->`, found {:?}", cur.rest()),
            ));
        }
        cur.skip_ws();
        let label = if cur.eat("|") {
            Some(cur.until("|", "edge label")?.to_string())
        } else {
            None
        };
        cur.skip_ws();
        let (to, shape) = parse_node_ref(&mut cur)?;
        graph.reference(line_no, to, shape)?;
        graph.edges.push(EdgeDecl {
            from: from.to_string(),
            to: to.to_string(),
            label,
        });
        from = to;
    }
}
