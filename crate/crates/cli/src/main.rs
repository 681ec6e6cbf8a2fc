//! `rcs`: validate content bundles, enumerate paths, batch-classify answer
//! files, summarize telemetry and surveys, and run the HTTP service.
//!
//! Exit status is 0 on success, 1 when the input was read but is invalid
//! (violations, failed rows), and 2 when an input cannot be read or parsed.

mod analyze;
mod bundle;
mod classify;
mod output;

use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::builder::BoolishValueParser;
use clap::{Parser, Subcommand};
use serde_json::json;

use rcs_core::content::{ContentBundle, ExpertContact};
use rcs_core::graph::enumerate_paths;
use rcs_service::ServiceConfig;

use bundle::Loaded;
use classify::{classify_lines, render_path, RowOutcome};
use output::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "rcs", version, about = "Risk classification engine tooling")]
struct Cli {
    /// Graph file (with sibling `.support.json`) or directory; defaults to
    /// the shipped bundle.
    #[arg(long, global = true, env = "CONTENT_BUNDLE")]
    bundle: Option<PathBuf>,
    /// Service data directory.
    #[arg(long, global = true, env = "DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the bundle and list every violation.
    Validate,
    /// List every path through the graph with its outcome.
    Paths,
    /// Classify each line of an NDJSON answers file.
    Classify { answers: PathBuf },
    /// Summarize support usage, dwell times and survey responses.
    Analyze {
        /// Telemetry directory; defaults to `<data-dir>/telemetry`.
        telemetry: Option<PathBuf>,
        /// Survey responses as `.csv` or NDJSON; defaults to
        /// `<data-dir>/surveys/responses.ndjson` when present.
        #[arg(long)]
        survey: Option<PathBuf>,
        /// Also write each table as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "LISTEN_ADDR", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "EXPERT_CONTACT_NAME", requires = "expert_email")]
        expert_name: Option<String>,
        #[arg(long, env = "EXPERT_CONTACT_EMAIL", requires = "expert_name")]
        expert_email: Option<String>,
        #[arg(long, env = "ENFORCE_SINGLE_SUBMISSION", value_parser = BoolishValueParser::new(), default_value = "false")]
        enforce_single_submission: bool,
        #[arg(long, env = "CLOCK_SKEW_MS", default_value_t = 2000)]
        clock_skew_ms: i64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Validate => validate(cli.bundle.as_deref(), &mut out),
        Command::Paths => with_bundle(cli.bundle.as_deref(), |b| paths(b, cli.format, &mut out)),
        Command::Classify { answers } => with_bundle(cli.bundle.as_deref(), |b| {
            classify(b, &answers, cli.format, &mut out)
        }),
        Command::Analyze {
            telemetry,
            survey,
            out: out_dir,
        } => with_bundle(cli.bundle.as_deref(), |b| {
            let telemetry = telemetry.unwrap_or_else(|| cli.data_dir.join("telemetry"));
            let survey = survey.or_else(|| {
                let stored = cli.data_dir.join("surveys/responses.ndjson");
                stored.exists().then_some(stored)
            });
            let analysis = analyze::analyze(b.catalog(), &telemetry, survey.as_deref())?;
            if let Some(dir) = out_dir {
                analysis.write_files(&dir)?;
            }
            write_tables(&analysis.tables, cli.format, &mut out)?;
            Ok(ExitCode::SUCCESS)
        }),
        Command::Serve {
            listen,
            expert_name,
            expert_email,
            enforce_single_submission,
            clock_skew_ms,
        } => {
            tracing_subscriber::fmt().with_writer(io::stderr).init();
            let mut config = ServiceConfig::new(cli.data_dir);
            config.listen_addr = listen;
            config.content_bundle = cli.bundle;
            config.expert_contact = expert_name
                .zip(expert_email)
                .map(|(name, email)| ExpertContact { name, email });
            config.enforce_single_submission = enforce_single_submission;
            config.clock_skew = chrono::Duration::milliseconds(clock_skew_ms);
            tokio::runtime::Runtime::new()
                .context("starting runtime")?
                .block_on(rcs_service::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate(path: Option<&Path>, out: &mut impl Write) -> anyhow::Result<ExitCode> {
    match bundle::load(path)? {
        Loaded::Valid(b) => {
            writeln!(
                out,
                "{}: ok ({} nodes, {} rules, {} materials)",
                b.version(),
                b.graph().nodes().len(),
                b.graph().rules().len(),
                b.catalog().materials.len()
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Loaded::Invalid(lines) => report_invalid(&lines, out),
    }
}

fn report_invalid(lines: &[String], out: &mut impl Write) -> anyhow::Result<ExitCode> {
    for line in lines {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "{} violation(s)", lines.len())?;
    Ok(ExitCode::from(1))
}

fn with_bundle(
    path: Option<&Path>,
    f: impl FnOnce(&ContentBundle) -> anyhow::Result<ExitCode>,
) -> anyhow::Result<ExitCode> {
    match bundle::load(path)? {
        Loaded::Valid(b) => f(&b),
        Loaded::Invalid(lines) => report_invalid(&lines, &mut io::stderr()),
    }
}

fn paths(bundle: &ContentBundle, format: Format, out: &mut impl Write) -> anyhow::Result<ExitCode> {
    let paths = enumerate_paths(bundle.graph());
    let mut table = Table::new(&["path", "outcome"]);
    for p in &paths {
        table.push(vec![p.render(), p.outcome.summary()]);
    }
    match format {
        Format::Json => writeln!(
            out,
            "{}",
            json!({ "paths": table.to_json(), "total": paths.len() })
        )?,
        Format::Csv => {
            table.write_csv(&mut *out)?;
            eprintln!("total paths: {}", paths.len());
        }
        Format::Table => {
            table.write_table(out)?;
            writeln!(out, "total paths: {}", paths.len())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn classify(
    bundle: &ContentBundle,
    answers: &Path,
    format: Format,
    out: &mut impl Write,
) -> anyhow::Result<ExitCode> {
    let input = std::fs::read_to_string(answers)
        .with_context(|| format!("reading {}", answers.display()))?;
    let results = classify_lines(bundle.graph(), &input);
    let failed = results.iter().filter(|r| !r.is_ok()).count();

    if format == Format::Json {
        for r in &results {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
    } else {
        let mut table = Table::new(&["row", "id", "status", "outcome", "detail"]);
        for r in &results {
            let (status, outcome, detail) = match &r.result {
                RowOutcome::Outcome(o) => ("ok", o.summary(), render_path(o)),
                RowOutcome::Error(e) => ("error", e.code.to_string(), e.message.clone()),
            };
            table.push(vec![
                r.row.to_string(),
                r.id.clone().unwrap_or_default(),
                status.into(),
                outcome,
                detail,
            ]);
        }
        table.write(format, out)?;
    }
    if failed > 0 {
        eprintln!("{failed} of {} row(s) failed", results.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_tables(
    tables: &[(&str, Table)],
    format: Format,
    out: &mut impl Write,
) -> anyhow::Result<()> {
    match format {
        Format::Json => {
            let doc: serde_json::Map<String, serde_json::Value> = tables
                .iter()
                .map(|(name, t)| (name.trim_end_matches(".csv").to_string(), t.to_json()))
                .collect();
            writeln!(out, "{}", serde_json::Value::Object(doc))?;
        }
        _ => {
            for (i, (_, t)) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                if format == Format::Csv {
                    writeln!(out, "# {}", t.title.unwrap_or_default())?;
                }
                t.write(format, out)?;
            }
        }
    }
    Ok(())
}
