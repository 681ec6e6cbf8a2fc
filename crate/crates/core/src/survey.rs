//! Likert survey responses and their summary statistics.
//!
//! `NR` ("no recall") responses are kept on import but excluded from both the
//! interpolated median and percent favourable.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LikertScore(u8);

impl LikertScore {
    pub fn new(value: u8) -> Option<Self> {
        (1..=5).contains(&value).then_some(Self(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_favourable(self) -> bool {
        self.0 >= 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LikertValue {
    Score(LikertScore),
    NoRecall,
}

impl LikertValue {
    pub fn score(self) -> Option<u8> {
        match self {
            Self::Score(s) => Some(s.get()),
            Self::NoRecall => None,
        }
    }
}

impl From<LikertScore> for LikertValue {
    fn from(s: LikertScore) -> Self {
        Self::Score(s)
    }
}

impl fmt::Display for LikertValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Score(s) => write!(f, "{}", s.get()),
            Self::NoRecall => f.write_str("NR"),
        }
    }
}

impl FromStr for LikertValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("NR") {
            return Ok(Self::NoRecall);
        }
        s.parse::<u8>()
            .ok()
            .and_then(LikertScore::new)
            .map(Self::Score)
            .ok_or_else(|| format!("`{s}` is not one of 1..5 or NR"))
    }
}

impl Serialize for LikertValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Score(s) => serializer.serialize_u8(s.get()),
            Self::NoRecall => serializer.serialize_str("NR"),
        }
    }
}

impl<'de> Deserialize<'de> for LikertValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Number(n) => n.to_string().parse(),
            Raw::Text(t) => t.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub respondent_id: String,
    pub statement_id: String,
    pub value: LikertValue,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurveyError {
    #[error("no substantive responses")]
    EmptyInput,
    #[error("row {row}: {detail}")]
    Malformed { row: usize, detail: String },
    #[error("row {row}: invalid value: {detail}")]
    InvalidValue { row: usize, detail: String },
    #[error("row {row}: respondent `{respondent_id}` already answered `{statement_id}`")]
    Duplicate {
        row: usize,
        respondent_id: String,
        statement_id: String,
    },
}

impl SurveyError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyInput => "EMPTY_INPUT",
            Self::Malformed { .. } => "MALFORMED_SURVEY",
            Self::InvalidValue { .. } => "INVALID_VALUE",
            Self::Duplicate { .. } => "DUPLICATE_RESPONSE",
        }
    }
}

/// Reads `respondent_id,statement_id,value` rows (with header). Rows are
/// numbered from 2, the header being row 1.
pub fn read_responses_csv<R: Read>(input: R) -> Result<Vec<LikertResponse>, SurveyError> {
    #[derive(Deserialize)]
    struct Row {
        respondent_id: String,
        statement_id: String,
        value: String,
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<Row>().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| SurveyError::Malformed {
            row,
            detail: e.to_string(),
        })?;
        let value = record
            .value
            .parse()
            .map_err(|detail| SurveyError::InvalidValue { row, detail })?;
        rows.push(LikertResponse {
            respondent_id: record.respondent_id,
            statement_id: record.statement_id,
            value,
        });
    }
    check_unique(&rows)?;
    Ok(rows)
}

/// Enforces one response per (respondent, statement). Error rows are
/// numbered as in a CSV file with a header row.
pub fn check_unique(responses: &[LikertResponse]) -> Result<(), SurveyError> {
    let mut seen = HashSet::new();
    for (i, r) in responses.iter().enumerate() {
        if !seen.insert((r.respondent_id.as_str(), r.statement_id.as_str())) {
            return Err(SurveyError::Duplicate {
                row: i + 2,
                respondent_id: r.respondent_id.clone(),
                statement_id: r.statement_id.clone(),
            });
        }
    }
    Ok(())
}

fn substantive(values: &[LikertValue]) -> Vec<u8> {
    values.iter().filter_map(|v| v.score()).collect()
}

/// Grouped median with unit class width and boundaries at half-integers.
///
/// With `m` the plain median of the substantive scores, `N` their count,
/// `cb` the count below `m` and `cm` the count equal to `m`, the result is
/// `(m - 0.5) + (N/2 - cb) / cm`. A non-integer median, or an integer
/// median with no scores in its class, is returned as is.
pub fn interpolated_median(values: &[LikertValue]) -> Result<f64, SurveyError> {
    let mut scores = substantive(values);
    if scores.is_empty() {
        return Err(SurveyError::EmptyInput);
    }
    scores.sort_unstable();
    let n = scores.len();
    let m = if n % 2 == 1 {
        f64::from(scores[n / 2])
    } else {
        (f64::from(scores[n / 2 - 1]) + f64::from(scores[n / 2])) / 2.0
    };
    if m.fract() != 0.0 {
        return Ok(m);
    }
    let below = scores.iter().filter(|&&s| f64::from(s) < m).count();
    let at = scores.iter().filter(|&&s| f64::from(s) == m).count();
    if at == 0 {
        return Ok(m);
    }
    Ok((m - 0.5) + (n as f64 / 2.0 - below as f64) / at as f64)
}

/// Share of substantive responses that are 4 or 5, in `[0, 1]`.
pub fn percent_favourable(values: &[LikertValue]) -> Result<f64, SurveyError> {
    let scores = substantive(values);
    if scores.is_empty() {
        return Err(SurveyError::EmptyInput);
    }
    let favourable = scores.iter().filter(|&&s| s >= 4).count();
    Ok(favourable as f64 / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementSummary {
    pub statement_id: String,
    pub n_substantive: usize,
    pub n_no_recall: usize,
    pub interpolated_median: f64,
    pub percent_favourable: f64,
    /// Response counts for scores 1 through 5.
    pub distribution: [usize; 5],
}

/// One summary per statement, ordered by statement id. Statements with only
/// `NR` responses are omitted.
pub fn summarize(responses: &[LikertResponse]) -> Vec<StatementSummary> {
    let mut by_statement: BTreeMap<&str, Vec<LikertValue>> = BTreeMap::new();
    for r in responses {
        by_statement
            .entry(&r.statement_id)
            .or_default()
            .push(r.value);
    }
    by_statement
        .into_iter()
        .filter_map(|(statement_id, values)| {
            let im = interpolated_median(&values).ok()?;
            let pf = percent_favourable(&values).ok()?;
            let mut distribution = [0; 5];
            for s in substantive(&values) {
                distribution[usize::from(s) - 1] += 1;
            }
            Some(StatementSummary {
                statement_id: statement_id.to_string(),
                n_substantive: distribution.iter().sum(),
                n_no_recall: values.len() - distribution.iter().sum::<usize>(),
                interpolated_median: im,
                percent_favourable: pf,
                distribution,
            })
        })
        .collect()
}
