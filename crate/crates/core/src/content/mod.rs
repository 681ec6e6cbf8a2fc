//! Graph content bundles: the decision graph plus its support catalog.
//!
//! Support materials attach to a question (`"Q4a"`) or to one option of a
//! question (`"Q4a/machinery"`). Worked examples carry a full answer path
//! and the outcome they must classify to; loading a bundle replays every
//! example.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::graph::{
    classify, AnswerValue, DecisionGraph, GraphDocument, GraphError, RiskLabel, RiskOutcomeSet,
};

pub const SHIPPED_GRAPH_JSON: &str = include_str!("../../content/rcs-v1.json");
pub const SHIPPED_SUPPORT_JSON: &str = include_str!("../../content/rcs-v1.support.json");

const EXPERT_NAME_SLOT: &str = "{{expert_name}}";
const EXPERT_EMAIL_SLOT: &str = "{{expert_email}}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    DefinitionGuidance,
    WorkedExample,
    LegalTextLink,
    ExpertContact,
}

impl MaterialKind {
    pub const ALL: [MaterialKind; 4] = [
        Self::DefinitionGuidance,
        Self::WorkedExample,
        Self::LegalTextLink,
        Self::ExpertContact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DefinitionGuidance => "definition_guidance",
            Self::WorkedExample => "worked_example",
            Self::LegalTextLink => "legal_text_link",
            Self::ExpertContact => "expert_contact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportMaterial {
    pub id: String,
    pub kind: MaterialKind,
    pub attached_to: String,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub external_url: Option<String>,
}

impl SupportMaterial {
    /// `(node id, option id)` of the attachment point.
    pub fn attachment(&self) -> (&str, Option<&str>) {
        match self.attached_to.split_once('/') {
            Some((node, option)) => (node, Some(option)),
            None => (&self.attached_to, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleAnswer {
    pub node_id: String,
    pub answer: AnswerValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub id: String,
    pub system_description: String,
    pub answers: Vec<ExampleAnswer>,
    pub expected: Vec<RiskLabel>,
    pub rationale: String,
}

impl WorkedExample {
    pub fn replay(&self, graph: &DecisionGraph) -> Result<RiskOutcomeSet, ContentError> {
        let outcome = classify(
            graph,
            self.answers.iter().map(|a| (a.node_id.as_str(), &a.answer)),
        )
        .map_err(|e| ContentError::ExampleMismatch {
            example: self.id.clone(),
            detail: e.to_string(),
        })?;
        let mut expected = self.expected.clone();
        expected.sort();
        expected.dedup();
        if outcome.label_set() != expected {
            return Err(ContentError::ExampleMismatch {
                example: self.id.clone(),
                detail: format!(
                    "expected {}, replay gave {}",
                    expected
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(", "),
                    outcome.summary()
                ),
            });
        }
        Ok(outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCatalog {
    pub version: String,
    #[serde(default)]
    pub materials: Vec<SupportMaterial>,
    #[serde(default)]
    pub examples: Vec<WorkedExample>,
}

impl SupportCatalog {
    pub fn empty(version: impl Into<String>) -> Self {
        Self {
            version: version.into(),
            materials: Vec::new(),
            examples: Vec::new(),
        }
    }

    pub fn material(&self, id: &str) -> Option<&SupportMaterial> {
        self.materials.iter().find(|m| m.id == id)
    }

    /// Fills the expert contact placeholders in every material body.
    pub fn with_expert_contact(mut self, contact: &ExpertContact) -> Self {
        for material in &mut self.materials {
            material.body = material
                .body
                .replace(EXPERT_NAME_SLOT, &contact.name)
                .replace(EXPERT_EMAIL_SLOT, &contact.email);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertContact {
    pub name: String,
    pub email: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ContentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("malformed support catalog: {0}")]
    Parse(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("catalog version `{catalog}` does not match graph version `{graph}`")]
    VersionMismatch { graph: String, catalog: String },
    #[error("material `{material}` is attached to unknown target `{attached_to}`")]
    DanglingAttachment {
        material: String,
        attached_to: String,
    },
    #[error("material id `{0}` is declared more than once")]
    DuplicateMaterial(String),
    #[error("worked example `{example}` does not replay: {detail}")]
    ExampleMismatch { example: String, detail: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

impl ContentError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Graph(e) => e.code(),
            Self::Parse(_) => "PARSE_ERROR",
            Self::Io { .. } => "IO_ERROR",
            Self::VersionMismatch { .. } => "VERSION_MISMATCH",
            Self::DanglingAttachment { .. } => "DANGLING_ATTACHMENT",
            Self::DuplicateMaterial(_) => "DUPLICATE_MATERIAL",
            Self::ExampleMismatch { .. } => "EXAMPLE_MISMATCH",
            Self::UnknownNode(_) => "UNKNOWN_NODE",
        }
    }
}

/// A validated graph with a catalog whose references all resolve.
#[derive(Debug, Clone)]
pub struct ContentBundle {
    graph: DecisionGraph,
    catalog: SupportCatalog,
}

impl ContentBundle {
    pub fn new(graph: DecisionGraph, catalog: SupportCatalog) -> Result<Self, ContentError> {
        if graph.version() != catalog.version {
            return Err(ContentError::VersionMismatch {
                graph: graph.version().to_string(),
                catalog: catalog.version.clone(),
            });
        }
        let mut ids = HashSet::new();
        for material in &catalog.materials {
            if !ids.insert(material.id.as_str()) {
                return Err(ContentError::DuplicateMaterial(material.id.clone()));
            }
            let (node_id, option_id) = material.attachment();
            let resolves = match (graph.node(node_id), option_id) {
                (Some(_), None) => true,
                (Some(node), Some(option)) => node.option(option).is_some(),
                (None, _) => false,
            };
            if !resolves {
                return Err(ContentError::DanglingAttachment {
                    material: material.id.clone(),
                    attached_to: material.attached_to.clone(),
                });
            }
        }
        for example in &catalog.examples {
            example.replay(&graph)?;
        }
        Ok(Self { graph, catalog })
    }

    /// Loads a bundle from a graph file. The catalog is read from the
    /// sibling `<stem>.support.json`; without one the catalog is empty.
    /// A directory is accepted if it holds exactly one graph file.
    pub fn from_path(path: &Path) -> Result<Self, ContentError> {
        let graph_path = resolve_graph_path(path)?;
        let graph_text = read(&graph_path)?;
        let catalog_path = support_path_for(&graph_path);
        let catalog_text = if catalog_path.exists() {
            Some(read(&catalog_path)?)
        } else {
            None
        };
        load_content_bundle(&graph_text, catalog_text.as_deref())
    }

    pub fn graph(&self) -> &DecisionGraph {
        &self.graph
    }

    pub fn catalog(&self) -> &SupportCatalog {
        &self.catalog
    }

    pub fn version(&self) -> &str {
        self.graph.version()
    }

    pub fn with_expert_contact(self, contact: &ExpertContact) -> Self {
        Self {
            catalog: self.catalog.with_expert_contact(contact),
            graph: self.graph,
        }
    }

    /// Materials for a node and its options, ordered by kind (definitions,
    /// examples, legal links, expert contact) and then catalog order.
    pub fn materials_for(&self, node_id: &str) -> Result<Vec<&SupportMaterial>, ContentError> {
        if self.graph.node(node_id).is_none() {
            return Err(ContentError::UnknownNode(node_id.to_string()));
        }
        let mut found: Vec<&SupportMaterial> = self
            .catalog
            .materials
            .iter()
            .filter(|m| m.attachment().0 == node_id)
            .collect();
        found.sort_by_key(|m| m.kind);
        Ok(found)
    }
}

fn read(path: &Path) -> Result<String, ContentError> {
    fs::read_to_string(path).map_err(|source| ContentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn support_path_for(graph_path: &Path) -> PathBuf {
    let stem = graph_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    graph_path.with_file_name(format!("{stem}.support.json"))
}

fn resolve_graph_path(path: &Path) -> Result<PathBuf, ContentError> {
    if !path.is_dir() {
        return Ok(path.to_path_buf());
    }
    let entries = fs::read_dir(path).map_err(|source| ContentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut graphs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy())
                .unwrap_or_default();
            name.ends_with(".json") && !name.ends_with(".support.json")
        })
        .collect();
    graphs.sort();
    match graphs.len() {
        1 => Ok(graphs.remove(0)),
        n => Err(ContentError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("expected exactly one graph file, found {n}"),
            ),
        }),
    }
}

/// Parses both documents and checks every cross-reference. `None` for the
/// catalog yields an empty catalog at the graph's version.
pub fn load_content_bundle(
    graph_text: &str,
    catalog_text: Option<&str>,
) -> Result<ContentBundle, ContentError> {
    let graph = DecisionGraph::from_document(GraphDocument::from_json(graph_text)?)?;
    let catalog = match catalog_text {
        Some(text) => serde_json::from_str(text).map_err(|e| ContentError::Parse(e.to_string()))?,
        None => SupportCatalog::empty(graph.version()),
    };
    ContentBundle::new(graph, catalog)
}

pub fn shipped_graph_document() -> GraphDocument {
    GraphDocument::from_json(SHIPPED_GRAPH_JSON).expect("shipped graph parses")
}

pub fn shipped_graph() -> DecisionGraph {
    shipped_bundle().graph().clone()
}

/// The shipped RCS bundle, loaded once.
pub fn shipped_bundle() -> &'static ContentBundle {
    static BUNDLE: OnceLock<ContentBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        load_content_bundle(SHIPPED_GRAPH_JSON, Some(SHIPPED_SUPPORT_JSON))
            .expect("shipped bundle is valid")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AnswerMode, TransparencyBasis};

    fn shipped_catalog() -> SupportCatalog {
        serde_json::from_str(SHIPPED_SUPPORT_JSON).unwrap()
    }

    #[test]
    fn shipped_bundle_loads() {
        let bundle = shipped_bundle();
        assert_eq!(bundle.version(), "rcs-v1");
        assert_eq!(bundle.graph().nodes().len(), 11);
    }

    #[test]
    fn definitions_exist_for_ai_system_and_safety_component() {
        let bundle = shipped_bundle();
        let q2 = bundle.materials_for("Q2").unwrap();
        assert!(q2
            .iter()
            .any(|m| m.kind == MaterialKind::DefinitionGuidance && m.body.contains("AI system")));
        let q4a = bundle.materials_for("Q4a").unwrap();
        assert!(q4a
            .iter()
            .any(|m| m.kind == MaterialKind::DefinitionGuidance
                && m.title.contains("safety component")));
    }

    #[test]
    fn q4a_has_a_summary_for_every_annex_i_act() {
        let bundle = shipped_bundle();
        let q4a = bundle.graph().node("Q4a").unwrap();
        assert_eq!(q4a.options.len(), 20);
        let materials = bundle.materials_for("Q4a").unwrap();
        for option in &q4a.options {
            let target = format!("Q4a/{}", option.id);
            assert!(
                materials.iter().any(|m| m.attached_to == target),
                "no summary for {target}"
            );
        }
    }

    #[test]
    fn q3_links_to_article_5() {
        let materials = shipped_bundle().materials_for("Q3").unwrap();
        let link = materials
            .iter()
            .find(|m| m.kind == MaterialKind::LegalTextLink)
            .unwrap();
        assert!(link.title.contains("Article 5"));
        assert!(link
            .external_url
            .as_deref()
            .unwrap()
            .ends_with("/article/5/"));
    }

    #[test]
    fn materials_are_ordered_by_kind() {
        let bundle = shipped_bundle();
        for node in bundle.graph().nodes() {
            let kinds: Vec<_> = bundle
                .materials_for(&node.id)
                .unwrap()
                .iter()
                .map(|m| m.kind)
                .collect();
            let mut sorted = kinds.clone();
            sorted.sort();
            assert_eq!(kinds, sorted);
        }
    }

    #[test]
    fn node_without_attachments_yields_empty_list() {
        let graph = shipped_graph();
        let bundle = ContentBundle::new(graph, SupportCatalog::empty("rcs-v1")).unwrap();
        assert!(bundle.materials_for("Q5c").unwrap().is_empty());
        assert_eq!(
            bundle.materials_for("Q9").unwrap_err().code(),
            "UNKNOWN_NODE"
        );
    }

    #[test]
    fn all_material_kinds_ship() {
        let catalog = shipped_catalog();
        for kind in MaterialKind::ALL {
            assert!(catalog.materials.iter().any(|m| m.kind == kind), "{kind:?}");
        }
    }

    #[test]
    fn every_multi_select_node_has_options() {
        for node in shipped_graph().nodes() {
            if node.answer_mode == AnswerMode::MultiSelect {
                assert!(!node.options.is_empty());
            }
        }
    }

    #[test]
    fn dangling_attachment_is_rejected() {
        let mut catalog = shipped_catalog();
        catalog.materials[0].attached_to = "QX".into();
        let err = ContentBundle::new(shipped_graph(), catalog).unwrap_err();
        assert_eq!(err.code(), "DANGLING_ATTACHMENT");

        let mut catalog = shipped_catalog();
        catalog.materials[0].attached_to = "Q4a/not_an_act".into();
        let err = ContentBundle::new(shipped_graph(), catalog).unwrap_err();
        assert_eq!(err.code(), "DANGLING_ATTACHMENT");
    }

    #[test]
    fn diverging_example_is_rejected() {
        let mut catalog = shipped_catalog();
        let chatbot = catalog
            .examples
            .iter_mut()
            .find(|e| e.id == "customer-service-chatbot")
            .unwrap();
        assert_eq!(
            chatbot.expected,
            vec![RiskLabel::Limited(TransparencyBasis::Art50_1)]
        );
        chatbot.expected = vec![RiskLabel::High];
        let err = ContentBundle::new(shipped_graph(), catalog).unwrap_err();
        assert_eq!(err.code(), "EXAMPLE_MISMATCH");

        let mut catalog = shipped_catalog();
        catalog.examples[0].answers.pop();
        let err = ContentBundle::new(shipped_graph(), catalog).unwrap_err();
        assert_eq!(err.code(), "EXAMPLE_MISMATCH");
    }

    #[test]
    fn version_lock() {
        let catalog = SupportCatalog::empty("rcs-v0");
        let err = ContentBundle::new(shipped_graph(), catalog).unwrap_err();
        assert_eq!(err.code(), "VERSION_MISMATCH");
    }

    #[test]
    fn expert_contact_is_configurable() {
        let bundle = shipped_bundle()
            .clone()
            .with_expert_contact(&ExpertContact {
                name: "Dana Example".into(),
                email: "dana@example.org".into(),
            });
        let expert = bundle
            .materials_for("Q2")
            .unwrap()
            .into_iter()
            .find(|m| m.kind == MaterialKind::ExpertContact)
            .unwrap();
        assert!(expert.body.contains("Dana Example (dana@example.org)"));
        assert!(!expert.body.contains("{{"));
    }

    #[test]
    fn bundle_from_path_uses_sibling_catalog() {
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("rcs-v1.json");
        fs::write(&graph, SHIPPED_GRAPH_JSON).unwrap();
        let bare = ContentBundle::from_path(&graph).unwrap();
        assert!(bare.catalog().materials.is_empty());

        fs::write(dir.path().join("rcs-v1.support.json"), SHIPPED_SUPPORT_JSON).unwrap();
        let full = ContentBundle::from_path(dir.path()).unwrap();
        assert_eq!(
            full.catalog().materials.len(),
            shipped_catalog().materials.len()
        );

        let missing = ContentBundle::from_path(&dir.path().join("nope.json")).unwrap_err();
        assert_eq!(missing.code(), "IO_ERROR");
    }
}
