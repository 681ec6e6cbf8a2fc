use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AnswerValue, Predicate};

/// Transparency obligation that put a system into the limited-risk tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransparencyBasis {
    /// Direct interaction with natural persons.
    Art50_1,
    /// Synthetic content generation.
    Art50_2,
    /// Emotion recognition or biometric categorisation.
    Art50_3,
}

impl TransparencyBasis {
    pub const ALL: [TransparencyBasis; 3] = [Self::Art50_1, Self::Art50_2, Self::Art50_3];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Art50_1 => "Art50_1",
            Self::Art50_2 => "Art50_2",
            Self::Art50_3 => "Art50_3",
        }
    }
}

/// Risk category assigned by the decision graph.
///
/// The textual form is the one used in graph documents and on the wire:
/// `OUT_OF_SCOPE`, `NOT_AI_SYSTEM`, `UNACCEPTABLE`, `HIGH`, `LOW` and
/// `LIMITED(Art50_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiskLabel {
    OutOfScope,
    NotAiSystem,
    Unacceptable,
    High,
    Limited(TransparencyBasis),
    Low,
}

impl RiskLabel {
    /// Labels that may never share an outcome set with any other label.
    pub fn is_exclusive(self) -> bool {
        matches!(
            self,
            Self::OutOfScope | Self::NotAiSystem | Self::Unacceptable | Self::Low
        )
    }

    /// User-facing category. `NOT_AI_SYSTEM` is reported under the
    /// out-of-scope umbrella while keeping its own legal basis.
    pub fn category(self) -> RiskCategory {
        match self {
            Self::OutOfScope | Self::NotAiSystem => RiskCategory::OutOfScope,
            Self::Unacceptable => RiskCategory::Unacceptable,
            Self::High => RiskCategory::High,
            Self::Limited(_) => RiskCategory::Limited,
            Self::Low => RiskCategory::Low,
        }
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutOfScope => f.write_str("OUT_OF_SCOPE"),
            Self::NotAiSystem => f.write_str("NOT_AI_SYSTEM"),
            Self::Unacceptable => f.write_str("UNACCEPTABLE"),
            Self::High => f.write_str("HIGH"),
            Self::Limited(basis) => write!(f, "LIMITED({})", basis.as_str()),
            Self::Low => f.write_str("LOW"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown risk label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for RiskLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim() {
            "OUT_OF_SCOPE" => Self::OutOfScope,
            "NOT_AI_SYSTEM" => Self::NotAiSystem,
            "UNACCEPTABLE" => Self::Unacceptable,
            "HIGH" => Self::High,
            "LOW" => Self::Low,
            "LIMITED(Art50_1)" => Self::Limited(TransparencyBasis::Art50_1),
            "LIMITED(Art50_2)" => Self::Limited(TransparencyBasis::Art50_2),
            "LIMITED(Art50_3)" => Self::Limited(TransparencyBasis::Art50_3),
            other => return Err(UnknownLabel(other.to_string())),
        };
        Ok(label)
    }
}

impl Serialize for RiskLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RiskLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCategory {
    OutOfScope,
    Unacceptable,
    High,
    Limited,
    Low,
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OutOfScope => "Out of scope",
            Self::Unacceptable => "Unacceptable risk",
            Self::High => "High risk",
            Self::Limited => "Limited risk",
            Self::Low => "Low risk",
        })
    }
}

/// Legal basis recorded when no rule assigned a label along the path.
pub const LOW_RISK_BASIS: &str = "No criteria of Art. 5, Art. 6 or Art. 50 met";

/// A label in an outcome together with every basis that assigned it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedLabel {
    pub label: RiskLabel,
    pub bases: Vec<String>,
}

/// One answered question along the classified path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationaleEntry {
    pub node_id: String,
    pub answer: AnswerValue,
    pub predicate: Predicate,
    pub next: String,
    pub legal_ref: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels_added: Vec<AssignedLabel>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short_circuit: bool,
}

/// Non-exclusive set of risk labels plus the rationale that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskOutcomeSet {
    pub labels: Vec<AssignedLabel>,
    pub rationale: Vec<RationaleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("label {exclusive} cannot be combined with {other}")]
pub struct LabelConflict {
    pub exclusive: RiskLabel,
    pub other: RiskLabel,
}

impl RiskOutcomeSet {
    /// Builds an outcome from accumulated `(label, basis)` pairs, defaulting
    /// to `LOW` when nothing was assigned.
    pub fn from_assignments<'a, I>(
        assignments: I,
        rationale: Vec<RationaleEntry>,
    ) -> Result<Self, LabelConflict>
    where
        I: IntoIterator<Item = (RiskLabel, &'a str)>,
    {
        let mut grouped: BTreeMap<RiskLabel, Vec<String>> = BTreeMap::new();
        for (label, basis) in assignments {
            let bases = grouped.entry(label).or_default();
            if !bases.iter().any(|b| b == basis) {
                bases.push(basis.to_string());
            }
        }
        if grouped.is_empty() {
            grouped.insert(RiskLabel::Low, vec![LOW_RISK_BASIS.to_string()]);
        }
        check_exclusivity(grouped.keys().copied())?;
        Ok(Self {
            labels: grouped
                .into_iter()
                .map(|(label, bases)| AssignedLabel { label, bases })
                .collect(),
            rationale,
        })
    }

    pub fn label_set(&self) -> Vec<RiskLabel> {
        self.labels.iter().map(|l| l.label).collect()
    }

    pub fn contains(&self, label: RiskLabel) -> bool {
        self.labels.iter().any(|l| l.label == label)
    }

    /// Distinct user-facing categories, in severity order.
    pub fn categories(&self) -> Vec<RiskCategory> {
        let mut out: Vec<RiskCategory> = self.labels.iter().map(|l| l.label.category()).collect();
        out.dedup();
        out
    }

    /// Compact rendering such as `HIGH, LIMITED(Art50_1)`.
    pub fn summary(&self) -> String {
        self.labels
            .iter()
            .map(|l| l.label.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Checks the exclusivity rules over a label set.
pub fn check_exclusivity<I>(labels: I) -> Result<(), LabelConflict>
where
    I: IntoIterator<Item = RiskLabel>,
{
    let labels: Vec<RiskLabel> = labels.into_iter().collect();
    for &label in &labels {
        if !label.is_exclusive() {
            continue;
        }
        if let Some(&other) = labels.iter().find(|&&o| o != label) {
            return Err(LabelConflict {
                exclusive: label,
                other,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_text_round_trips() {
        let all = [
            RiskLabel::OutOfScope,
            RiskLabel::NotAiSystem,
            RiskLabel::Unacceptable,
            RiskLabel::High,
            RiskLabel::Limited(TransparencyBasis::Art50_1),
            RiskLabel::Limited(TransparencyBasis::Art50_2),
            RiskLabel::Limited(TransparencyBasis::Art50_3),
            RiskLabel::Low,
        ];
        for label in all {
            assert_eq!(label.to_string().parse::<RiskLabel>().unwrap(), label);
        }
        assert!("LIMITED".parse::<RiskLabel>().is_err());
    }

    #[test]
    fn high_and_limited_coexist() {
        let out = RiskOutcomeSet::from_assignments(
            [
                (RiskLabel::High, "Art. 6.2"),
                (RiskLabel::Limited(TransparencyBasis::Art50_2), "Art. 50.2"),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(out.summary(), "HIGH, LIMITED(Art50_2)");
        assert_eq!(
            out.categories(),
            vec![RiskCategory::High, RiskCategory::Limited]
        );
    }

    #[test]
    fn empty_assignment_is_low() {
        let out = RiskOutcomeSet::from_assignments([], vec![]).unwrap();
        assert_eq!(out.label_set(), vec![RiskLabel::Low]);
    }

    #[test]
    fn exclusive_labels_reject_company() {
        let err = check_exclusivity([RiskLabel::High, RiskLabel::OutOfScope]).unwrap_err();
        assert_eq!(err.exclusive, RiskLabel::OutOfScope);
        assert!(check_exclusivity([
            RiskLabel::Low,
            RiskLabel::Limited(TransparencyBasis::Art50_1)
        ])
        .is_err());
        assert!(check_exclusivity([RiskLabel::Unacceptable]).is_ok());
    }

    #[test]
    fn not_ai_system_reports_as_out_of_scope() {
        assert_eq!(RiskLabel::NotAiSystem.category(), RiskCategory::OutOfScope);
        assert_ne!(RiskLabel::NotAiSystem, RiskLabel::OutOfScope);
    }
}
