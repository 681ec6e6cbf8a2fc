use std::fs;
use std::path::Path;

use anyhow::{bail, Context};

use rcs_core::content::SupportCatalog;
use rcs_core::survey::{check_unique, read_responses_csv, summarize, LikertResponse};
use rcs_core::telemetry::{support_usage, DwellTime, TelemetryStore};

use crate::output::{decimal, percent, Table};

/// Every table `analyze` produces, keyed by the file name used for `--out`.
pub struct Analysis {
    pub tables: Vec<(&'static str, Table)>,
}

/// Reads responses from a `.csv` file or from NDJSON (one response object
/// per line), the format the service stores.
pub fn read_survey(path: &Path) -> anyhow::Result<Vec<LikertResponse>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let responses = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_responses_csv(text.as_bytes())
            .with_context(|| format!("parsing {}", path.display()))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .with_context(|| format!("{}: line {}", path.display(), i + 1))
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    check_unique(&responses)?;
    Ok(responses)
}

pub fn analyze(
    catalog: &SupportCatalog,
    telemetry_dir: &Path,
    survey: Option<&Path>,
) -> anyhow::Result<Analysis> {
    if !telemetry_dir.is_dir() {
        bail!(
            "telemetry directory {} is not readable",
            telemetry_dir.display()
        );
    }
    let events = TelemetryStore::at(telemetry_dir).read_all()?;
    let responses = match survey {
        Some(path) => read_survey(path)?,
        None => Vec::new(),
    };

    let usage = support_usage(&events, |id| catalog.material(id).map(|m| m.kind));
    let mut shares = Table::titled(
        "support usage",
        &["kind", "users_with_access", "users", "share_pct"],
    );
    let mut histogram = Table::titled("access histogram", &["kind", "accesses", "users"]);
    for k in &usage.kinds {
        shares.push(vec![
            k.kind.as_str().into(),
            k.users_with_access.to_string(),
            usage.users.to_string(),
            percent(k.share),
        ]);
        for bin in &k.histogram {
            histogram.push(vec![
                k.kind.as_str().into(),
                bin.accesses.to_string(),
                bin.users.to_string(),
            ]);
        }
    }

    let mut dwell = Table::titled(
        "dwell time",
        &["node_id", "sessions", "mean_s", "median_s", "max_s"],
    );
    for d in DwellTime::summarize(&events) {
        dwell.push(vec![
            d.node_id,
            d.sessions.to_string(),
            decimal(d.mean_seconds),
            decimal(d.median_seconds),
            decimal(d.max_seconds),
        ]);
    }

    let mut likert = Table::titled(
        "likert",
        &[
            "statement_id",
            "n",
            "no_recall",
            "im",
            "pf_pct",
            "s1",
            "s2",
            "s3",
            "s4",
            "s5",
        ],
    );
    for s in summarize(&responses) {
        let mut row = vec![
            s.statement_id,
            s.n_substantive.to_string(),
            s.n_no_recall.to_string(),
            decimal(s.interpolated_median),
            format!("{:.1}", s.percent_favourable * 100.0),
        ];
        row.extend(s.distribution.iter().map(usize::to_string));
        likert.push(row);
    }

    Ok(Analysis {
        tables: vec![
            ("support_usage.csv", shares),
            ("support_histogram.csv", histogram),
            ("dwell.csv", dwell),
            ("likert.csv", likert),
        ],
    })
}

impl Analysis {
    pub fn write_files(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, table) in &self.tables {
            let path = dir.join(name);
            let file =
                fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            table.write_csv(file)?;
        }
        Ok(())
    }
}
