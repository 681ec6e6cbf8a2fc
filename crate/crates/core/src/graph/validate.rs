use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    check_exclusivity, AnswerMode, GraphDocument, Predicate, RiskLabel, TransitionRule, TERMINAL,
};

/// Option id reserved for the implicit empty selection.
const RESERVED_OPTION_ID: &str = "none";

/// Broad kind of a violation; mutation tests assert on these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationClass {
    Uniqueness,
    OptionShape,
    DanglingEdge,
    PredicateMismatch,
    Totality,
    Exclusivity,
    ShortCircuit,
    Acyclicity,
    Reachability,
    Termination,
    OutcomeExclusivity,
}

impl fmt::Display for ViolationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        f.write_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateNodeId {
        node: String,
    },
    DuplicateOptionId {
        node: String,
        option: String,
    },
    ReservedOptionId {
        node: String,
    },
    BinaryWithOptions {
        node: String,
    },
    MultiSelectWithoutOptions {
        node: String,
    },
    UnknownStart {
        start: String,
    },
    UnknownRuleSource {
        from: String,
    },
    DanglingEdge {
        from: String,
        predicate: Predicate,
        to: String,
    },
    PredicateMismatch {
        node: String,
        predicate: Predicate,
    },
    NonTotal {
        node: String,
        missing: Predicate,
    },
    NonExclusive {
        node: String,
        predicate: Predicate,
        count: usize,
    },
    ShortCircuitNotTerminal {
        node: String,
        predicate: Predicate,
    },
    Cycle {
        path: Vec<String>,
    },
    Unreachable {
        node: String,
    },
    NonTerminating {
        node: String,
    },
    OutcomeConflict {
        path: Vec<String>,
        labels: Vec<RiskLabel>,
    },
}

impl Violation {
    pub fn class(&self) -> ViolationClass {
        use Violation::*;
        match self {
            DuplicateNodeId { .. } | DuplicateOptionId { .. } => ViolationClass::Uniqueness,
            ReservedOptionId { .. }
            | BinaryWithOptions { .. }
            | MultiSelectWithoutOptions { .. } => ViolationClass::OptionShape,
            UnknownStart { .. } | UnknownRuleSource { .. } | DanglingEdge { .. } => {
                ViolationClass::DanglingEdge
            }
            PredicateMismatch { .. } => ViolationClass::PredicateMismatch,
            NonTotal { .. } => ViolationClass::Totality,
            NonExclusive { .. } => ViolationClass::Exclusivity,
            ShortCircuitNotTerminal { .. } => ViolationClass::ShortCircuit,
            Cycle { .. } => ViolationClass::Acyclicity,
            Unreachable { .. } => ViolationClass::Reachability,
            NonTerminating { .. } => ViolationClass::Termination,
            OutcomeConflict { .. } => ViolationClass::OutcomeExclusivity,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        write!(f, "{}: ", self.class())?;
        match self {
            DuplicateNodeId { node } => write!(f, "node id `{node}` is declared more than once"),
            DuplicateOptionId { node, option } => {
                write!(f, "option id `{option}` is declared more than once on `{node}`")
            }
            ReservedOptionId { node } => write!(
                f,
                "`{node}` declares option id `{RESERVED_OPTION_ID}`, reserved for the empty selection"
            ),
            BinaryWithOptions { node } => write!(f, "binary node `{node}` declares options"),
            MultiSelectWithoutOptions { node } => {
                write!(f, "multi-select node `{node}` declares no options")
            }
            UnknownStart { start } => write!(f, "start node `{start}` does not exist"),
            UnknownRuleSource { from } => write!(f, "rule source `{from}` does not exist"),
            DanglingEdge { from, predicate, to } => {
                write!(f, "rule {from}:{predicate} points to unknown node `{to}`")
            }
            PredicateMismatch { node, predicate } => {
                write!(f, "predicate {predicate} does not apply to the answer mode of `{node}`")
            }
            NonTotal { node, missing } => write!(f, "`{node}` has no rule for {missing}"),
            NonExclusive {
                node,
                predicate,
                count,
            } => write!(f, "`{node}` has {count} rules for {predicate}"),
            ShortCircuitNotTerminal { node, predicate } => write!(
                f,
                "rule {node}:{predicate} short-circuits but does not end at {TERMINAL}"
            ),
            Cycle { path } => write!(f, "cycle {}", path.join(" -> ")),
            Unreachable { node } => write!(f, "`{node}` is not reachable from the start node"),
            NonTerminating { node } => write!(f, "no path from `{node}` reaches {TERMINAL}"),
            OutcomeConflict { path, labels } => write!(
                f,
                "path {} yields conflicting labels {}",
                path.join(" "),
                labels
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, class: ViolationClass) -> bool {
        self.violations.iter().any(|v| v.class() == class)
    }

    pub fn classes(&self) -> Vec<ViolationClass> {
        let mut classes: Vec<_> = self.violations.iter().map(Violation::class).collect();
        classes.sort();
        classes.dedup();
        classes
    }

    pub fn summary(&self) -> String {
        match self.violations.len() {
            0 => "no violations".to_string(),
            1 => self.violations[0].to_string(),
            n => format!("{n} violations, first: {}", self.violations[0]),
        }
    }
}

/// Checks every structural invariant of a graph document: uniqueness,
/// option shape, referential integrity, totality, exclusivity of rule
/// predicates, acyclicity, reachability, termination, and label
/// exclusivity of every complete path.
pub fn validate(doc: &GraphDocument) -> ValidationReport {
    let mut violations = Vec::new();

    let mut modes: HashMap<&str, AnswerMode> = HashMap::new();
    for node in &doc.nodes {
        if modes.insert(&node.id, node.answer_mode).is_some() {
            violations.push(Violation::DuplicateNodeId {
                node: node.id.clone(),
            });
        }
        let mut seen = HashSet::new();
        for option in &node.options {
            if !seen.insert(option.id.as_str()) {
                violations.push(Violation::DuplicateOptionId {
                    node: node.id.clone(),
                    option: option.id.clone(),
                });
            }
        }
        if seen.contains(RESERVED_OPTION_ID) {
            violations.push(Violation::ReservedOptionId {
                node: node.id.clone(),
            });
        }
        match node.answer_mode {
            AnswerMode::Binary if !node.options.is_empty() => {
                violations.push(Violation::BinaryWithOptions {
                    node: node.id.clone(),
                })
            }
            AnswerMode::MultiSelect if node.options.is_empty() => {
                violations.push(Violation::MultiSelectWithoutOptions {
                    node: node.id.clone(),
                })
            }
            _ => {}
        }
    }

    let start_known = modes.contains_key(doc.start.as_str());
    if !start_known {
        violations.push(Violation::UnknownStart {
            start: doc.start.clone(),
        });
    }

    // (node, predicate) -> rules, only for rules whose source exists and
    // whose predicate fits the node.
    let mut by_bucket: HashMap<(&str, Predicate), Vec<&TransitionRule>> = HashMap::new();
    let mut referential_ok = start_known;
    for rule in &doc.rules {
        let Some(&mode) = modes.get(rule.from.as_str()) else {
            violations.push(Violation::UnknownRuleSource {
                from: rule.from.clone(),
            });
            referential_ok = false;
            continue;
        };
        if !rule.is_terminal() && !modes.contains_key(rule.next.as_str()) {
            violations.push(Violation::DanglingEdge {
                from: rule.from.clone(),
                predicate: rule.predicate,
                to: rule.next.clone(),
            });
            referential_ok = false;
        }
        if !rule.predicate.applies_to(mode) {
            violations.push(Violation::PredicateMismatch {
                node: rule.from.clone(),
                predicate: rule.predicate,
            });
            continue;
        }
        if rule.short_circuits() && !rule.is_terminal() {
            violations.push(Violation::ShortCircuitNotTerminal {
                node: rule.from.clone(),
                predicate: rule.predicate,
            });
        }
        by_bucket
            .entry((rule.from.as_str(), rule.predicate))
            .or_default()
            .push(rule);
    }

    let mut total = true;
    for node in &doc.nodes {
        for bucket in super::Predicate::buckets(node.answer_mode) {
            match by_bucket.get(&(node.id.as_str(), bucket)).map(Vec::len) {
                None => {
                    total = false;
                    violations.push(Violation::NonTotal {
                        node: node.id.clone(),
                        missing: bucket,
                    });
                }
                Some(1) => {}
                Some(count) => {
                    total = false;
                    violations.push(Violation::NonExclusive {
                        node: node.id.clone(),
                        predicate: bucket,
                        count,
                    });
                }
            }
        }
    }

    // Successor lists in document order, restricted to known nodes.
    let mut successors: HashMap<&str, Vec<&str>> = HashMap::new();
    for node in &doc.nodes {
        successors.entry(node.id.as_str()).or_default();
    }
    for rule in &doc.rules {
        if modes.contains_key(rule.from.as_str()) && modes.contains_key(rule.next.as_str()) {
            let succ = successors.entry(rule.from.as_str()).or_default();
            if !succ.contains(&rule.next.as_str()) {
                succ.push(rule.next.as_str());
            }
        }
    }

    let cycles = find_cycles(doc, &successors);
    let acyclic = cycles.is_empty();
    violations.extend(cycles.into_iter().map(|path| Violation::Cycle { path }));

    if start_known {
        let reachable = reachable_from(&doc.start, &successors);
        for node in &doc.nodes {
            if !reachable.contains(node.id.as_str()) {
                violations.push(Violation::Unreachable {
                    node: node.id.clone(),
                });
            }
        }
    }

    let terminating = reaches_terminal(doc, &modes);
    for node in &doc.nodes {
        if !terminating.contains(node.id.as_str()) {
            violations.push(Violation::NonTerminating {
                node: node.id.clone(),
            });
        }
    }

    // Path-level label exclusivity is only well defined on a finite, total,
    // referentially sound graph.
    if acyclic && total && referential_ok {
        let lookup = |node: &str, p: Predicate| by_bucket.get(&(node, p)).map(|r| r[0]);
        let mut conflicts = Vec::new();
        walk_paths(
            &modes,
            &lookup,
            &mut Vec::new(),
            &mut Vec::new(),
            &doc.start,
            &mut conflicts,
        );
        violations.extend(conflicts);
    }

    ValidationReport { violations }
}

fn reachable_from<'a>(
    start: &'a str,
    successors: &HashMap<&'a str, Vec<&'a str>>,
) -> HashSet<&'a str> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        for &next in successors.get(node).map(Vec::as_slice).unwrap_or_default() {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Nodes from which at least one rule chain ends at TERMINAL.
fn reaches_terminal<'a>(
    doc: &'a GraphDocument,
    modes: &HashMap<&'a str, AnswerMode>,
) -> HashSet<&'a str> {
    let mut done: HashSet<&str> = HashSet::new();
    loop {
        let before = done.len();
        for rule in &doc.rules {
            if !modes.contains_key(rule.from.as_str()) {
                continue;
            }
            if rule.is_terminal() || done.contains(rule.next.as_str()) {
                done.insert(rule.from.as_str());
            }
        }
        if done.len() == before {
            return done;
        }
    }
}

/// Iterative three-colour DFS; returns one representative path per back edge.
fn find_cycles<'a>(
    doc: &'a GraphDocument,
    successors: &HashMap<&'a str, Vec<&'a str>>,
) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let mut colour: HashMap<&str, Colour> =
        successors.keys().map(|&k| (k, Colour::White)).collect();
    let mut cycles = Vec::new();

    for root in doc.nodes.iter().map(|n| n.id.as_str()) {
        if colour[root] != Colour::White {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        colour.insert(root, Colour::Grey);
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            let succ = &successors[node];
            if top.1 < succ.len() {
                let next = succ[top.1];
                top.1 += 1;
                match colour[next] {
                    Colour::White => {
                        colour.insert(next, Colour::Grey);
                        stack.push((next, 0));
                    }
                    Colour::Grey => {
                        let begin = stack.iter().position(|&(n, _)| n == next).unwrap_or(0);
                        let mut path: Vec<String> =
                            stack[begin..].iter().map(|&(n, _)| n.to_string()).collect();
                        path.push(next.to_string());
                        cycles.push(path);
                    }
                    Colour::Black => {}
                }
            } else {
                colour.insert(node, Colour::Black);
                stack.pop();
            }
        }
    }
    cycles
}

fn walk_paths<'a, F>(
    modes: &HashMap<&'a str, AnswerMode>,
    lookup: &F,
    path: &mut Vec<String>,
    labels: &mut Vec<RiskLabel>,
    node: &'a str,
    conflicts: &mut Vec<Violation>,
) where
    F: Fn(&str, Predicate) -> Option<&'a TransitionRule>,
{
    if node == TERMINAL {
        let mut set = labels.clone();
        set.sort();
        set.dedup();
        if check_exclusivity(set.iter().copied()).is_err() {
            conflicts.push(Violation::OutcomeConflict {
                path: path.clone(),
                labels: set,
            });
        }
        return;
    }
    for bucket in Predicate::buckets(modes[node]) {
        let Some(rule) = lookup(node, bucket) else {
            continue;
        };
        path.push(format!("{node}={}", bucket.short()));
        let mark = labels.len();
        labels.extend(rule.actions.iter().map(|a| a.label));
        walk_paths(modes, lookup, path, labels, &rule.next, conflicts);
        labels.truncate(mark);
        path.pop();
    }
}
