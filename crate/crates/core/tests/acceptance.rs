//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::OpenOptions;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use rcs_core::content::{
    shipped_bundle, shipped_graph, shipped_graph_document, MaterialKind, SHIPPED_GRAPH_JSON,
};
use rcs_core::graph::{
    classify, enumerate_paths, load_graph, next_question, AnswerMode, AnswerValue, DecisionGraph,
    GraphDocument, GraphError, Predicate, RiskLabel, Step, ViolationClass, TERMINAL,
};
use rcs_core::session::{ClassificationSession, Deployment, EventLogStore, SystemMetadata};
use rcs_core::survey::{
    interpolated_median, read_responses_csv, summarize, LikertScore, LikertValue,
};
use rcs_core::telemetry::{
    support_usage, InteractionEvent, InteractionKind, TelemetryLog, TelemetryStore,
};

/// Number of maximal yes/no, none/some paths through the shipped graph.
const GOLDEN_PATH_COUNT: usize = 44;

type Outcome = Result<String, String>;

/// A path as `(node, bucket)` steps with its sorted label strings.
type OraclePath = (Vec<(String, &'static str)>, Vec<String>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    }};
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "exemplar classifications",
            budget: Duration::from_secs(1),
            run: exemplars,
        },
        Criterion {
            name: "non-exclusive outcome",
            budget: Duration::from_secs(1),
            run: non_exclusive,
        },
        Criterion {
            name: "oracle equivalence",
            budget: Duration::from_secs(5),
            run: oracle_equivalence,
        },
        Criterion {
            name: "graph validation properties",
            budget: Duration::from_secs(30),
            run: validation_properties,
        },
        Criterion {
            name: "analytics reproduction",
            budget: Duration::from_secs(60),
            run: analytics_reproduction,
        },
        Criterion {
            name: "interpolated median properties",
            budget: Duration::from_secs(10),
            run: im_properties,
        },
        Criterion {
            name: "session replay determinism",
            budget: Duration::from_secs(60),
            run: replay_determinism,
        },
        Criterion {
            name: "content regression",
            budget: Duration::from_secs(1),
            run: content_regression,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = (c.run)();
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => {
                Err(format!("{detail}; over budget of {:?}", c.budget))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS  {:<32} {:>9.3}s  {detail}",
                c.name,
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL  {:<32} {:>9.3}s  {detail}",
                    c.name,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn answers(rows: &[(&str, AnswerValue)]) -> Vec<(String, AnswerValue)> {
    rows.iter()
        .map(|(n, a)| (n.to_string(), a.clone()))
        .collect()
}

fn labels_of(
    graph: &DecisionGraph,
    history: &[(String, AnswerValue)],
) -> Result<Vec<RiskLabel>, String> {
    classify(graph, history.iter().map(|(n, a)| (n.as_str(), a)))
        .map(|o| o.label_set())
        .map_err(|e| e.to_string())
}

fn screened() -> Vec<(&'static str, AnswerValue)> {
    vec![
        ("Q1a", AnswerValue::yes()),
        ("Q1b", AnswerValue::none_selected()),
        ("Q2", AnswerValue::yes()),
    ]
}

fn exemplars() -> Outcome {
    let g = shipped_graph();
    let mut social = screened();
    social.push(("Q3", AnswerValue::select(["social_scoring"])));

    let mut grid = screened();
    grid.extend([
        ("Q3", AnswerValue::none_selected()),
        ("Q4a", AnswerValue::none_selected()),
        ("Q4b", AnswerValue::select(["critical_infrastructure"])),
        ("Q4c", AnswerValue::none_selected()),
        ("Q5a", AnswerValue::no()),
        ("Q5b", AnswerValue::no()),
        ("Q5c", AnswerValue::no()),
    ]);

    let mut chatbot = screened();
    chatbot.extend([
        ("Q3", AnswerValue::none_selected()),
        ("Q4a", AnswerValue::none_selected()),
        ("Q4b", AnswerValue::none_selected()),
        ("Q5a", AnswerValue::yes()),
        ("Q5b", AnswerValue::no()),
        ("Q5c", AnswerValue::no()),
    ]);

    let mut spam_filter = screened();
    spam_filter.extend([
        ("Q3", AnswerValue::none_selected()),
        ("Q4a", AnswerValue::none_selected()),
        ("Q4b", AnswerValue::none_selected()),
        ("Q5a", AnswerValue::no()),
        ("Q5b", AnswerValue::no()),
        ("Q5c", AnswerValue::no()),
    ]);

    let cases = [
        ("social scoring", social, vec![RiskLabel::Unacceptable]),
        ("grid control", grid, vec![RiskLabel::High]),
        (
            "customer chatbot",
            chatbot,
            vec!["LIMITED(Art50_1)".parse().unwrap()],
        ),
        ("spam filter", spam_filter, vec![RiskLabel::Low]),
    ];
    for (name, rows, expected) in &cases {
        let got = labels_of(&g, &answers(rows))?;
        ensure!(
            &got == expected,
            "{name}: expected {expected:?}, got {got:?}"
        );
    }
    Ok("UNACCEPTABLE, HIGH, LIMITED(Art50_1), LOW".into())
}

fn non_exclusive() -> Outcome {
    let g = shipped_graph();
    let paths = enumerate_paths(&g);
    let mixed = paths
        .iter()
        .filter(|p| {
            p.outcome.contains(RiskLabel::High)
                && p.outcome
                    .label_set()
                    .iter()
                    .any(|l| matches!(l, RiskLabel::Limited(_)))
        })
        .count();
    ensure!(mixed > 0, "no path yields HIGH together with LIMITED");
    for p in &paths {
        let set = p.outcome.label_set();
        ensure!(
            !(set.contains(&RiskLabel::Low) && set.len() > 1),
            "path {} yields LOW with {:?}",
            p.render(),
            set
        );
    }
    Ok(format!(
        "{mixed} of {} paths are HIGH+LIMITED; LOW always alone",
        paths.len()
    ))
}

/// Independent brute-force walk over the raw graph JSON. Returns every
/// maximal path.
fn oracle_paths(doc: &Value) -> Vec<OraclePath> {
    let mut modes = HashMap::new();
    for n in doc["nodes"].as_array().unwrap() {
        modes.insert(
            n["id"].as_str().unwrap().to_string(),
            n["answer_mode"].as_str().unwrap().to_string(),
        );
    }
    let rules = doc["rules"].as_array().unwrap();
    let rule = |from: &str, pred: &str| -> &Value {
        let found: Vec<&Value> = rules
            .iter()
            .filter(|r| r["from"] == from && r["predicate"] == pred)
            .collect();
        assert_eq!(found.len(), 1, "oracle expects one rule for {from}/{pred}");
        found[0]
    };

    fn walk<'a>(
        node: &str,
        modes: &HashMap<String, String>,
        rule: &dyn Fn(&str, &str) -> &'a Value,
        steps: &mut Vec<(String, &'static str)>,
        labels: &mut Vec<String>,
        out: &mut Vec<OraclePath>,
    ) {
        if node == "TERMINAL" {
            let mut set: Vec<String> = labels
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if set.is_empty() {
                set.push("LOW".into());
            }
            out.push((steps.clone(), set));
            return;
        }
        let preds: [&'static str; 2] = if modes[node] == "binary" {
            ["is_yes", "is_no"]
        } else {
            ["none_selected", "any_selected"]
        };
        for p in preds {
            let r = rule(node, p);
            let mark = labels.len();
            for a in r["actions"].as_array().into_iter().flatten() {
                labels.push(a["label"].as_str().unwrap().to_string());
            }
            steps.push((node.to_string(), p));
            walk(r["next"].as_str().unwrap(), modes, rule, steps, labels, out);
            steps.pop();
            labels.truncate(mark);
        }
    }

    let mut out = Vec::new();
    walk(
        doc["start"].as_str().unwrap(),
        &modes,
        &rule,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut out,
    );
    out
}

fn predicate_name(p: Predicate) -> &'static str {
    match p {
        Predicate::IsYes => "is_yes",
        Predicate::IsNo => "is_no",
        Predicate::AnySelected => "any_selected",
        Predicate::NoneSelected => "none_selected",
    }
}

fn oracle_equivalence() -> Outcome {
    let raw: Value = serde_json::from_str(SHIPPED_GRAPH_JSON).map_err(|e| e.to_string())?;
    let oracle = oracle_paths(&raw);
    ensure!(
        oracle.len() == GOLDEN_PATH_COUNT,
        "oracle walk found {} paths, golden count is {GOLDEN_PATH_COUNT}",
        oracle.len()
    );

    let g = shipped_graph();
    let table = enumerate_paths(&g);
    ensure!(
        table.len() == GOLDEN_PATH_COUNT,
        "engine enumerated {} paths",
        table.len()
    );

    let key = |steps: &mut dyn Iterator<Item = (String, &'static str)>| -> String {
        steps
            .map(|(n, p)| format!("{n}:{p}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let lookup: HashMap<String, Vec<String>> = table
        .iter()
        .map(|p| {
            let k = key(&mut p
                .steps
                .iter()
                .map(|s| (s.node_id.clone(), predicate_name(s.bucket))));
            (
                k,
                p.outcome
                    .label_set()
                    .iter()
                    .map(ToString::to_string)
                    .collect(),
            )
        })
        .collect();
    for (steps, labels) in &oracle {
        let k = key(&mut steps.iter().cloned());
        ensure!(
            lookup.get(&k) == Some(labels),
            "path table disagrees with oracle on {k}"
        );
    }

    // Every binarized complete answer vector: one bucket per node.
    let nodes: Vec<_> = g.nodes().iter().collect();
    let vectors = 1u32 << nodes.len();
    for bits in 0..vectors {
        let choice = |i: usize| bits & (1 << i) != 0;
        let mut history: Vec<(String, AnswerValue)> = Vec::new();
        let mut visited = Vec::new();
        loop {
            let step = next_question(&g, history.iter().map(|(n, a)| (n.as_str(), a)))
                .map_err(|e| e.to_string())?;
            let Step::Question(id) = step else { break };
            let i = nodes.iter().position(|n| n.id == id).unwrap();
            let node = nodes[i];
            let (answer, bucket) = match (node.answer_mode, choice(i)) {
                (AnswerMode::Binary, true) => (AnswerValue::yes(), Predicate::IsYes),
                (AnswerMode::Binary, false) => (AnswerValue::no(), Predicate::IsNo),
                (AnswerMode::MultiSelect, true) => (
                    AnswerValue::select([node.options.last().unwrap().id.clone()]),
                    Predicate::AnySelected,
                ),
                (AnswerMode::MultiSelect, false) => {
                    (AnswerValue::none_selected(), Predicate::NoneSelected)
                }
            };
            visited.push((id.clone(), predicate_name(bucket)));
            history.push((id, answer));
        }
        let stepwise: Vec<String> = labels_of(&g, &history)?
            .iter()
            .map(ToString::to_string)
            .collect();
        let k = key(&mut visited.into_iter());
        ensure!(
            lookup.get(&k) == Some(&stepwise),
            "vector {bits:011b}: traversal and table disagree at {k}"
        );
    }
    Ok(format!(
        "P = {GOLDEN_PATH_COUNT}; {vectors} answer vectors agree"
    ))
}

fn reachable_from(doc: &GraphDocument, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start.to_string()];
    while let Some(n) = stack.pop() {
        if n == TERMINAL || !seen.insert(n.clone()) {
            continue;
        }
        for r in doc.rules.iter().filter(|r| r.from == n) {
            stack.push(r.next.clone());
        }
    }
    seen
}

fn validation_properties() -> Outcome {
    let shipped = shipped_graph_document();
    let report = rcs_core::graph::validate(&shipped);
    ensure!(
        report.is_clean(),
        "shipped graph has violations: {}",
        report.summary()
    );

    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..1000 {
        let mut doc = shipped.clone();
        let (label, expected) = match i % 3 {
            0 => {
                let r = rng.gen_range(0..doc.rules.len());
                doc.rules[r].next = format!("Q_missing_{}", rng.gen::<u16>());
                ("dangling edge", ViolationClass::DanglingEdge)
            }
            1 => {
                let r = rng.gen_range(0..doc.rules.len());
                doc.rules.remove(r);
                ("missing rule", ViolationClass::Totality)
            }
            _ => {
                let r = rng.gen_range(0..doc.rules.len());
                let from = doc.rules[r].from.clone();
                let ancestors: Vec<String> = doc
                    .nodes
                    .iter()
                    .map(|n| n.id.clone())
                    .filter(|id| reachable_from(&doc, id).contains(&from))
                    .collect();
                doc.rules[r].next = ancestors.choose(&mut rng).unwrap().clone();
                ("injected cycle", ViolationClass::Acyclicity)
            }
        };
        let text = serde_json::to_string(&doc).map_err(|e| e.to_string())?;
        match load_graph(&text) {
            Err(GraphError::Validation(report)) => ensure!(
                report.has(expected),
                "bundle {i} ({label}) reported {:?}, expected {expected}",
                report.classes()
            ),
            Err(other) => return Err(format!("bundle {i} ({label}): {other}")),
            Ok(_) => return Err(format!("bundle {i} ({label}) was accepted")),
        }
        *tally.entry(label).or_default() += 1;
    }
    Ok(format!(
        "1000 rejected ({}); shipped graph clean",
        tally
            .iter()
            .map(|(k, v)| format!("{v} {k}"))
            .collect::<Vec<_>>()
            .join(", ")
    ))
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 4, 7, 8, 0, 0).unwrap()
}

fn analytics_reproduction() -> Outcome {
    let bundle = shipped_bundle();
    let catalog = bundle.catalog();
    let of_kind = |k: MaterialKind| -> Vec<&str> {
        catalog
            .materials
            .iter()
            .filter(|m| m.kind == k)
            .map(|m| m.id.as_str())
            .collect()
    };
    let experts = of_kind(MaterialKind::ExpertContact);
    let others: Vec<&str> = [
        MaterialKind::DefinitionGuidance,
        MaterialKind::WorkedExample,
        MaterialKind::LegalTextLink,
    ]
    .into_iter()
    .flat_map(of_kind)
    .collect();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = TelemetryStore::open(dir.path()).map_err(|e| e.to_string())?;
    let mut log = TelemetryLog::default().with_catalog(catalog);
    let mut rng = StdRng::seed_from_u64(67);
    let mut users: Vec<usize> = (0..67).collect();
    users.shuffle(&mut rng);
    let expert_users: BTreeSet<usize> = users[..6].iter().copied().collect();

    for u in 0..67 {
        let session = format!("user-{u:02}");
        let mut ts = t0() + chrono::Duration::minutes(u as i64 * 7);
        let mut record = |kind,
                          node: Option<&str>,
                          material: Option<&str>,
                          ts: DateTime<Utc>|
         -> Result<(), String> {
            let e = InteractionEvent {
                session_id: session.clone(),
                ts,
                kind,
                node_context: node.map(Into::into),
                material_id: material.map(Into::into),
            };
            let admitted = log.admit(e).map_err(|e| e.to_string())?;
            store.append(&admitted).map_err(|e| e.to_string())
        };
        record(InteractionKind::TutorialConfirmed, None, None, ts)?;
        for node in ["Q1a", "Q1b", "Q2", "Q3"] {
            ts += chrono::Duration::seconds(rng.gen_range(5..90));
            record(InteractionKind::QuestionShown, Some(node), None, ts)?;
            for _ in 0..rng.gen_range(0..3) {
                ts += chrono::Duration::seconds(rng.gen_range(1..20));
                record(
                    InteractionKind::SupportOpened,
                    Some(node),
                    Some(others.choose(&mut rng).unwrap()),
                    ts,
                )?;
            }
            if expert_users.contains(&u) && (node == "Q3" || rng.gen_bool(0.3)) {
                ts += chrono::Duration::seconds(3);
                record(
                    InteractionKind::SupportOpened,
                    Some(node),
                    Some(experts.choose(&mut rng).unwrap()),
                    ts,
                )?;
            }
            ts += chrono::Duration::seconds(rng.gen_range(5..60));
            record(InteractionKind::QuestionAnswered, Some(node), None, ts)?;
        }
    }

    let events = store.read_all().map_err(|e| e.to_string())?;
    let usage = support_usage(&events, |id| catalog.material(id).map(|m| m.kind));
    ensure!(usage.users == 67, "fixture has {} users", usage.users);
    let expert = usage.kind(MaterialKind::ExpertContact);
    let pct = expert.share * 100.0;
    ensure!(
        (pct - 8.96).abs() <= 0.005,
        "expert-contact share {pct:.4}% is not 8.96% ± 0.005"
    );

    // Ten respondents, five favourable on confidence; the second statement
    // has two favourable of eight substantive answers plus two NR.
    let confidence = ["4", "5", "2", "4", "3", "5", "1", "4", "3", "2"];
    let ease = ["4", "2", "NR", "3", "5", "1", "NR", "2", "3", "2"];
    let mut csv = String::from("respondent_id,statement_id,value\n");
    for (i, (c, e)) in confidence.iter().zip(ease).enumerate() {
        csv.push_str(&format!(
            "b{i:02},confidence,{c}\nb{i:02},ease_of_use,{e}\n"
        ));
    }
    let responses = read_responses_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
    let table = summarize(&responses);
    let pf = |id: &str| {
        table
            .iter()
            .find(|s| s.statement_id == id)
            .map(|s| s.percent_favourable * 100.0)
    };
    ensure!(
        pf("confidence") == Some(50.0),
        "confidence PF = {:?}",
        pf("confidence")
    );
    ensure!(
        pf("ease_of_use") == Some(25.0),
        "ease_of_use PF = {:?}",
        pf("ease_of_use")
    );
    Ok(format!(
        "expert contact {pct:.2}% of 67 users; PF 50.0% and 25.0%"
    ))
}

fn likert(scores: &[u8]) -> Vec<LikertValue> {
    scores
        .iter()
        .map(|&s| LikertValue::Score(LikertScore::new(s).unwrap()))
        .collect()
}

/// Interpolated median from category counts, written without the engine's
/// sorted-list median.
fn im_oracle(scores: &[u8]) -> f64 {
    let mut counts = [0usize; 6];
    for &s in scores {
        counts[s as usize] += 1;
    }
    let n = scores.len();
    let kth = |k: usize| {
        let mut seen = 0;
        (1..=5)
            .find(|&v| {
                seen += counts[v];
                seen > k
            })
            .unwrap() as f64
    };
    let m = if n % 2 == 1 {
        kth(n / 2)
    } else {
        (kth(n / 2 - 1) + kth(n / 2)) / 2.0
    };
    if m.fract() != 0.0 || counts[m as usize] == 0 {
        return m;
    }
    let below: usize = counts[1..m as usize].iter().sum();
    m - 0.5 + (n as f64 / 2.0 - below as f64) / counts[m as usize] as f64
}

fn im_properties() -> Outcome {
    let im = |s: &[u8]| interpolated_median(&likert(s)).map_err(|e| e.to_string());
    ensure!(
        im(&[3, 4, 4, 5])? == 4.0,
        "[3,4,4,5] gave {}",
        im(&[3, 4, 4, 5])?
    );
    ensure!(
        im_oracle(&[3, 4, 4, 5]) == 4.0,
        "oracle disagrees on [3,4,4,5]"
    );

    let mut rng = StdRng::seed_from_u64(10_000);
    for i in 0..10_000 {
        let len = rng.gen_range(1..=60);
        let s: Vec<u8> = (0..len).map(|_| rng.gen_range(1..=5)).collect();
        let value = im(&s)?;
        let (lo, hi) = (
            *s.iter().min().unwrap() as f64,
            *s.iter().max().unwrap() as f64,
        );
        ensure!(
            lo <= value && value <= hi,
            "multiset {i}: IM {value} outside [{lo}, {hi}]"
        );
        ensure!(
            (value - im_oracle(&s)).abs() < 1e-12,
            "multiset {i}: IM {value} differs from oracle"
        );
        let mut more = s.clone();
        more.push(5);
        ensure!(im(&more)? >= value, "multiset {i}: appending 5 lowered IM");
        let v = rng.gen_range(1..=5u8);
        ensure!(
            im(&vec![v; len])? == f64::from(v),
            "all-{v} multiset of {len} gave a different IM"
        );
    }
    Ok("10000 multisets; bounds, constancy, monotonicity hold".into())
}

fn metadata(rng: &mut StdRng) -> SystemMetadata {
    SystemMetadata {
        system_name: format!("system {}", rng.gen::<u16>()),
        input_modalities: vec!["text".into()],
        output_modalities: vec!["label".into()],
        intended_users: "operators".into(),
        deployment: if rng.gen() {
            Deployment::Standalone
        } else {
            Deployment::Embedded
        },
        description: "randomized acceptance fixture".into(),
    }
}

fn random_answer(g: &DecisionGraph, node: &str, rng: &mut StdRng) -> AnswerValue {
    let node = g.node(node).unwrap();
    match node.answer_mode {
        AnswerMode::Binary => {
            if rng.gen() {
                AnswerValue::yes()
            } else {
                AnswerValue::no()
            }
        }
        AnswerMode::MultiSelect => {
            if rng.gen_bool(0.6) {
                AnswerValue::none_selected()
            } else {
                let k = rng.gen_range(1..=node.options.len().min(3));
                AnswerValue::select(node.options.choose_multiple(rng, k).map(|o| o.id.clone()))
            }
        }
    }
}

fn justification(rng: &mut StdRng) -> Option<String> {
    rng.gen_bool(0.4)
        .then(|| format!("note {} · “quoted” ✓", rng.gen::<u32>()))
}

fn replay_determinism() -> Outcome {
    let g = shipped_graph();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = EventLogStore::open(dir.path()).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(500);
    let mut revisions = 0;
    let mut crashes = 0;

    for i in 0..500 {
        let id = format!("sess-{i:03}");
        let mut now = t0() + chrono::Duration::hours(i);
        let (mut s, created) =
            ClassificationSession::start(&g, &id, metadata(&mut rng), true, None, now)
                .map_err(|e| e.to_string())?;
        store.append(&created).map_err(|e| e.to_string())?;
        let mut crash_at = (i % 5 == 0).then(|| rng.gen_range(2..8));

        let mut events = 1;
        while let Step::Question(node) = s.current.clone() {
            now += chrono::Duration::seconds(rng.gen_range(1..120));
            let event = if !s.answers.is_empty() && rng.gen_bool(0.15) {
                revisions += 1;
                let target = s.answers.choose(&mut rng).unwrap().node_id.clone();
                let answer = random_answer(&g, &target, &mut rng);
                s.revise_answer(&g, &target, answer, justification(&mut rng), now)
            } else {
                let answer = random_answer(&g, &node, &mut rng);
                s.submit_answer(&g, &node, answer, justification(&mut rng), now)
            }
            .map_err(|e| format!("{id}: {e}"))?;
            store.append(&event).map_err(|e| e.to_string())?;
            events += 1;
            if events % 4 == 0 {
                store.write_snapshot(&s).map_err(|e| e.to_string())?;
            }

            if crash_at == Some(events) {
                crash_at = None;
                crashes += 1;
                let path = dir.path().join(format!("{id}.events.ndjson"));
                let len = std::fs::metadata(&path).map_err(|e| e.to_string())?.len();
                let torn = rng.gen_range(1..40).min(len - 1);
                OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .and_then(|f| f.set_len(len - torn))
                    .map_err(|e| e.to_string())?;
                let recovered = store
                    .restore(&g, &id)
                    .map_err(|e| format!("{id}: recovery failed: {e}"))?;
                ensure!(
                    recovered.last_seq + 1 == s.last_seq,
                    "{id}: expected to lose exactly the torn event"
                );
                let history = recovered
                    .answers
                    .iter()
                    .map(|a| (a.node_id.as_str(), &a.answer));
                ensure!(
                    next_question(&g, history).is_ok(),
                    "{id}: recovered answers are not a valid prefix"
                );
                s = recovered;
                events -= 1;
            }
        }

        now += chrono::Duration::seconds(5);
        let (fin, live) = s.finalize(&g, now).map_err(|e| format!("{id}: {e}"))?;
        store.append(&fin).map_err(|e| e.to_string())?;

        let restored = store.restore(&g, &id).map_err(|e| format!("{id}: {e}"))?;
        let from_log = store.load(&id).map_err(|e| e.to_string())?;
        let replayed = ClassificationSession::replay(&g, &from_log.events)
            .map_err(|e| format!("{id}: {e}"))?;
        ensure!(
            restored.report().as_ref() == Some(&live),
            "{id}: restored report differs"
        );
        ensure!(
            replayed.report().as_ref() == Some(&live),
            "{id}: replayed report differs"
        );
        ensure!(
            serde_json::to_string(&replayed.report()).unwrap()
                == serde_json::to_string(&live).unwrap(),
            "{id}: serialized reports differ"
        );
    }
    Ok(format!(
        "500 sessions, {revisions} revisions, {crashes} crash-restarts"
    ))
}

fn content_regression() -> Outcome {
    let bundle = shipped_bundle();
    let g = bundle.graph();
    for ex in &bundle.catalog().examples {
        let outcome = ex.replay(g).map_err(|e| e.to_string())?;
        let mut expected = ex.expected.clone();
        expected.sort();
        ensure!(
            outcome.label_set() == expected,
            "{} replayed to {}",
            ex.id,
            outcome.summary()
        );
    }
    let q4a = g.node("Q4a").ok_or("Q4a missing")?;
    ensure!(
        q4a.options.len() == 20,
        "Q4a lists {} options",
        q4a.options.len()
    );
    Ok(format!(
        "{} worked examples replay; Q4a has 20 options",
        bundle.catalog().examples.len()
    ))
}
