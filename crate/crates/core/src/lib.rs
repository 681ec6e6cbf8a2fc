//! Rule-based risk classification of AI systems under the EU AI Act.
//!
//! * [`graph`]: decision-graph model, validation, traversal and path
//!   enumeration.
//! * [`content`]: the shipped question graph and its support catalog.
//! * [`session`]: event-sourced classification sessions and reports.
//! * [`telemetry`]: interaction logging, dwell times and support usage.
//! * [`survey`]: Likert survey import, interpolated median and percent
//!   favourable.

pub mod content;
pub mod graph;
pub mod session;
pub mod survey;
pub mod telemetry;
