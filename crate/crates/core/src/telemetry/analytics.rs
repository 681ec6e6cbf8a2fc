use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{InteractionEvent, InteractionKind};
use crate::content::MaterialKind;

/// Summed focus time per node for one session.
///
/// A focus interval opens at `question_shown` and closes at the next
/// `question_shown`, `question_answered`, `revision` or `finalized` event
/// of the session. Events are taken in timestamp order (stable for ties).
/// Nodes that were never shown are absent.
pub fn dwell_times<I, B>(events: I, session_id: &str) -> BTreeMap<String, Duration>
where
    I: IntoIterator<Item = B>,
    B: Borrow<InteractionEvent>,
{
    let mut own: Vec<(DateTime<Utc>, InteractionKind, Option<String>)> = events
        .into_iter()
        .filter(|e| e.borrow().session_id == session_id)
        .map(|e| {
            let e = e.borrow();
            (e.ts, e.kind, e.node_context.clone())
        })
        .collect();
    own.sort_by_key(|(ts, _, _)| *ts);

    let mut totals = BTreeMap::new();
    let mut open: Option<(String, DateTime<Utc>)> = None;
    for (ts, kind, node) in own {
        let closes = matches!(
            kind,
            InteractionKind::QuestionShown
                | InteractionKind::QuestionAnswered
                | InteractionKind::Revision
                | InteractionKind::Finalized
        );
        if closes {
            if let Some((focused, since)) = open.take() {
                *totals.entry(focused).or_insert_with(Duration::zero) += ts - since;
            }
        }
        if kind == InteractionKind::QuestionShown {
            if let Some(node) = node {
                totals.entry(node.clone()).or_insert_with(Duration::zero);
                open = Some((node, ts));
            }
        }
    }
    totals
}

/// Dwell statistics for one node across sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellTime {
    pub node_id: String,
    pub sessions: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub max_seconds: f64,
}

impl DwellTime {
    /// Aggregates per-session dwell maps into per-node statistics.
    pub fn summarize<I, B>(events: I) -> Vec<DwellTime>
    where
        I: IntoIterator<Item = B>,
        B: Borrow<InteractionEvent>,
    {
        let mut by_session: BTreeMap<String, Vec<InteractionEvent>> = BTreeMap::new();
        for e in events {
            let e = e.borrow();
            by_session
                .entry(e.session_id.clone())
                .or_default()
                .push(e.clone());
        }
        let mut per_node: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (session, evs) in &by_session {
            for (node, d) in dwell_times(evs, session) {
                per_node
                    .entry(node)
                    .or_default()
                    .push(d.num_milliseconds() as f64 / 1000.0);
            }
        }
        per_node
            .into_iter()
            .map(|(node_id, mut secs)| {
                secs.sort_by(f64::total_cmp);
                let n = secs.len();
                let median = if n % 2 == 1 {
                    secs[n / 2]
                } else {
                    (secs[n / 2 - 1] + secs[n / 2]) / 2.0
                };
                DwellTime {
                    node_id,
                    sessions: n,
                    mean_seconds: secs.iter().sum::<f64>() / n as f64,
                    median_seconds: median,
                    max_seconds: secs[n - 1],
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub accesses: u32,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindUsage {
    pub kind: MaterialKind,
    pub users_with_access: usize,
    /// Fraction of users with at least one access, in `[0, 1]`.
    pub share: f64,
    /// Users per access count, from zero up to the maximum observed.
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportUsage {
    pub users: usize,
    pub kinds: Vec<KindUsage>,
}

impl SupportUsage {
    pub fn kind(&self, kind: MaterialKind) -> &KindUsage {
        self.kinds
            .iter()
            .find(|k| k.kind == kind)
            .expect("every kind is reported")
    }
}

/// Per-kind access distribution. Users are the distinct session ids in the
/// stream; `kind_of` maps material ids to kinds and unknown ids are skipped.
pub fn support_usage<I, B, F>(events: I, kind_of: F) -> SupportUsage
where
    I: IntoIterator<Item = B>,
    B: Borrow<InteractionEvent>,
    F: Fn(&str) -> Option<MaterialKind>,
{
    let mut users = BTreeSet::new();
    let mut counts: HashMap<(MaterialKind, String), u32> = HashMap::new();
    for e in events {
        let e = e.borrow();
        users.insert(e.session_id.clone());
        if e.kind != InteractionKind::SupportOpened {
            continue;
        }
        if let Some(kind) = e.material_id.as_deref().and_then(&kind_of) {
            *counts.entry((kind, e.session_id.clone())).or_default() += 1;
        }
    }

    let kinds = MaterialKind::ALL
        .iter()
        .map(|&kind| {
            let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
            let mut with_access = 0;
            for user in &users {
                let n = counts.get(&(kind, user.clone())).copied().unwrap_or(0);
                if n > 0 {
                    with_access += 1;
                }
                *hist.entry(n).or_default() += 1;
            }
            let max = hist.keys().next_back().copied().unwrap_or(0);
            let histogram = (0..=max)
                .map(|accesses| HistogramBin {
                    accesses,
                    users: hist.get(&accesses).copied().unwrap_or(0),
                })
                .collect();
            KindUsage {
                kind,
                users_with_access: with_access,
                share: if users.is_empty() {
                    0.0
                } else {
                    with_access as f64 / users.len() as f64
                },
                histogram,
            }
        })
        .collect();

    SupportUsage {
        users: users.len(),
        kinds,
    }
}
