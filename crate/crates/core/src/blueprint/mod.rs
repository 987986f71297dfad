//! Expert reasoning blueprints: Mermaid flowcharts tagged with a CFA domain.
//!
//! A blueprint file is UTF-8 text laid out as
//!
//! ```text
//! domain: Economics
//! title: Economics
//! ---
//! graph TD;
//!   A[Step 1] --> B[Step 2]
//! ```
//!
//! Everything after the `---` line is the Mermaid source, kept verbatim
//! (without code fences) so it can be embedded into prompts byte for byte.

mod mermaid;
mod registry;

use std::collections::{HashSet, VecDeque};
use std::fmt;

pub use mermaid::{
    parse_mermaid, Direction, EdgeDecl, MermaidError, MermaidGraph, NodeDecl, NodeShape,
};
pub use registry::{load_registry, BlueprintRegistry, RegistryError};

use crate::domain::DomainCode;

#[derive(Debug, Clone, PartialEq)]
pub struct Blueprint {
    pub domain: DomainCode,
    pub title: String,
    pub mermaid_source: String,
    pub graph: MermaidGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlueprintFileError {
    #[error("missing `{0}:` header line")]
    MissingField(&'static str),
    #[error("missing `---` separator after the header")]
    MissingSeparator,
    #[error(transparent)]
    Domain(#[from] crate::domain::UnknownDomain),
    #[error(transparent)]
    Mermaid(#[from] MermaidError),
}

impl Blueprint {
    pub fn new(
        domain: DomainCode,
        title: impl Into<String>,
        mermaid_source: impl Into<String>,
    ) -> Result<Self, MermaidError> {
        let mermaid_source = mermaid_source.into();
        let graph = parse_mermaid(&mermaid_source)?;
        Ok(Blueprint {
            domain,
            title: title.into(),
            mermaid_source,
            graph,
        })
    }

    /// Parses the `domain:` / `title:` / `---` / source file layout.
    pub fn from_file_text(text: &str) -> Result<Self, BlueprintFileError> {
        let (domain_line, rest) = text
            .split_once('\n')
            .ok_or(BlueprintFileError::MissingField("domain"))?;
        let domain = domain_line
            .strip_prefix("domain:")
            .ok_or(BlueprintFileError::MissingField("domain"))?
            .trim();
        let (title_line, rest) = rest
            .split_once('\n')
            .ok_or(BlueprintFileError::MissingField("title"))?;
        let title = title_line
            .strip_prefix("title:")
            .ok_or(BlueprintFileError::MissingField("title"))?
            .trim();
        let source = match rest.split_once('\n') {
            Some((sep, source)) if sep.trim_end() == "---" => source,
            None if rest.trim_end() == "---" => "",
            _ => return Err(BlueprintFileError::MissingSeparator),
        };
        let source = source.strip_suffix('\n').unwrap_or(source);
        Ok(Blueprint::new(domain.parse()?, title, source)?)
    }

    pub fn to_file_text(&self) -> String {
        format!(
            "domain: {}\ntitle: {}\n---\n{}\n",
            self.domain, self.title, self.mermaid_source
        )
    }
}

const FENCE_OPEN: &str = "```mermaid\n";
const FENCE_CLOSE: &str = "\n```";

/// Renders the prompt hint: a `***Title:***` line followed by the fenced source.
pub fn render_hint(bp: &Blueprint) -> String {
    format!(
        "***{}:*** \n{FENCE_OPEN}{}{FENCE_CLOSE}",
        bp.title, bp.mermaid_source
    )
}

/// Inverse of [`render_hint`]: returns `(title, source)`.
pub fn strip_hint(hint: &str) -> Option<(&str, &str)> {
    let rest = hint.strip_prefix("***")?;
    let (title, rest) = rest.split_once(":*** \n")?;
    let body = rest.strip_prefix(FENCE_OPEN)?.strip_suffix(FENCE_CLOSE)?;
    Some((title, body))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    EmptyGraph,
    DanglingEndpoint {
        edge: usize,
        id: String,
    },
    EthicsBlueprint,
    /// Nodes with no directed path from the first declared node.
    Unreachable {
        root: String,
        ids: Vec<String>,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::EmptyGraph => f.write_str("empty graph"),
            Issue::DanglingEndpoint { edge, id } => {
                write!(f, "edge #{edge} references undeclared node {id:?}")
            }
            Issue::EthicsBlueprint => f.write_str("the Ethics domain does not take a blueprint"),
            Issue::Unreachable { root, ids } => {
                write!(f, "nodes unreachable from {root}: {}", ids.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn validate_blueprint(bp: &Blueprint) -> ValidationReport {
    let mut report = ValidationReport::default();
    let graph = &bp.graph;
    if bp.domain == DomainCode::Ethics {
        report.errors.push(Issue::EthicsBlueprint);
    }
    for (i, edge) in graph.edges.iter().enumerate() {
        for id in [&edge.from, &edge.to] {
            if !graph.nodes.contains_key(id) {
                report.errors.push(Issue::DanglingEndpoint {
                    edge: i,
                    id: id.clone(),
                });
            }
        }
    }

    let Some(root) = graph.root() else {
        report.errors.push(Issue::EmptyGraph);
        return report;
    };
    let reached = reachable_from(graph, &root.id);
    let unreachable: Vec<String> = graph
        .nodes
        .keys()
        .filter(|id| !reached.contains(id.as_str()))
        .cloned()
        .collect();
    if !unreachable.is_empty() {
        report.warnings.push(Issue::Unreachable {
            root: root.id.clone(),
            ids: unreachable,
        });
    }
    report
}

fn reachable_from<'g>(graph: &'g MermaidGraph, root: &'g str) -> HashSet<&'g str> {
    let mut seen = HashSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(id) = queue.pop_front() {
        for edge in graph.edges.iter().filter(|e| e.from == id) {
            if seen.insert(edge.to.as_str()) {
                queue.push_back(edge.to.as_str());
            }
        }
    }
    seen
}
