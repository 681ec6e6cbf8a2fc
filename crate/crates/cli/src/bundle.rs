use std::path::Path;

use anyhow::anyhow;
use rcs_core::content::{shipped_bundle, ContentBundle, ContentError};
use rcs_core::graph::GraphError;

/// Outcome of loading a bundle that could be read and parsed.
pub enum Loaded {
    Valid(Box<ContentBundle>),
    /// One line per problem found.
    Invalid(Vec<String>),
}

/// Loads `path`, or the shipped bundle when absent. Unreadable or
/// unparseable input is an `Err`; structural problems are `Invalid`.
pub fn load(path: Option<&Path>) -> anyhow::Result<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded::Valid(Box::new(shipped_bundle().clone())));
    };
    match ContentBundle::from_path(path) {
        Ok(bundle) => Ok(Loaded::Valid(Box::new(bundle))),
        Err(e @ (ContentError::Io { .. } | ContentError::Parse(_))) => Err(e.into()),
        Err(ContentError::Graph(e @ GraphError::Parse(_))) => {
            Err(anyhow!(e).context(format!("reading {}", path.display())))
        }
        Err(ContentError::Graph(GraphError::Validation(report))) => Ok(Loaded::Invalid(
            report.violations.iter().map(ToString::to_string).collect(),
        )),
        Err(other) => Ok(Loaded::Invalid(vec![format!("{}: {other}", other.code())])),
    }
}
