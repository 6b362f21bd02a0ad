//! `qnm`: run a scenario file (optionally swept over one payload key) and
//! write the report as JSON or CSV.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 invalid input, 3 problem too large
//! for exact simulation, 4 invariant violated (the report is still written).

mod commands;
mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use qnm_core::par::{self, Execution};
use qnm_core::report::{fmt_f64, json_f64, Table};
use qnm_core::tol::Tolerances;

use commands::{Outcome, Overrides};
use scenario::{invalid, set_path, CliError, CliResult, Format, Kind, Scenario, Sweep};

#[derive(Debug, Parser)]
#[command(name = "qnm", version, about = "Networked quantum metrology scenario runner")]
struct Args {
    /// Scenario file: {"kind": ..., "payload": {...}, "output": {...}}.
    #[arg(long)]
    scenario: PathBuf,
    /// Output file; stdout when absent and the scenario names none.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Seed for random states, circuits and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the protocol in sampled mode with this many shots.
    #[arg(long)]
    shots: Option<u64>,
    /// Sweep one payload key: key=start:stop:step (stop inclusive).
    #[arg(long)]
    sweep: Option<Sweep>,
    /// Evaluate sweep points one after another.
    #[arg(long)]
    sequential: bool,
}

struct Rendered {
    text: String,
    alarm: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(alarm)) => {
            eprintln!("qnm: invariant violated: {alarm}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("qnm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: &Args) -> CliResult<Option<String>> {
    if let Ok(spec) = std::env::var("QNM_TOL") {
        let t = Tolerances::parse_overrides(&spec).map_err(|e| invalid(format!("QNM_TOL: {e}")))?;
        Tolerances::install(t);
    }
    let sc = Scenario::load(&args.scenario)?;
    let path = args.out.clone().or_else(|| sc.output.path.clone());
    let format = args
        .format
        .or(sc.output.format)
        .or_else(|| path.as_ref().filter(|p| p.extension().is_some_and(|e| e == "csv")).map(|_| Format::Csv))
        .unwrap_or_default();
    let ov = Overrides { seed: args.seed, shots: args.shots };
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let rendered = match &args.sweep {
        None => render_single(sc.kind, commands::run(sc.kind, &sc.payload, ov)?, format),
        Some(sweep) => render_sweep(sc.kind, &sc.payload, sweep, ov, format, exec)?,
    };
    match path {
        Some(p) => write_atomic(&p, &rendered.text)?,
        None => std::io::stdout().write_all(rendered.text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(rendered.alarm)
}

fn row_table(rows: &[Vec<(&'static str, String)>], lead: Option<&str>, lead_values: &[String]) -> Table {
    let mut header: Vec<&str> = lead.into_iter().collect();
    header.extend(rows.first().map(|r| r.iter().map(|(k, _)| *k).collect::<Vec<_>>()).unwrap_or_default());
    let mut t = Table::new(&header);
    for (i, r) in rows.iter().enumerate() {
        let mut cells: Vec<String> = lead.map(|_| lead_values[i].clone()).into_iter().collect();
        cells.extend(r.iter().map(|(_, v)| v.clone()));
        t.push(cells);
    }
    t
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn render_single(kind: Kind, out: Outcome, format: Format) -> Rendered {
    let text = match format {
        Format::Json => to_json_text(&json!({"kind": kind.name(), "report": out.report})),
        Format::Csv => out.table.unwrap_or_else(|| row_table(&[out.row], None, &[])).to_csv(),
    };
    Rendered { text, alarm: out.alarm }
}

fn render_sweep(
    kind: Kind,
    payload: &Value,
    sweep: &Sweep,
    ov: Overrides,
    format: Format,
    exec: Execution,
) -> CliResult<Rendered> {
    let points: Vec<Value> = sweep
        .values
        .iter()
        .map(|v| {
            let mut p = payload.clone();
            set_path(&mut p, &sweep.key, v.clone())?;
            Ok(p)
        })
        .collect::<CliResult<_>>()?;
    let outcomes: Vec<Outcome> =
        par::map(exec, &points, |p| commands::run(kind, p, ov)).into_iter().collect::<CliResult<_>>()?;
    let alarms: Vec<String> = outcomes
        .iter()
        .zip(&sweep.values)
        .filter_map(|(o, v)| o.alarm.as_ref().map(|a| format!("{}={v}: {a}", sweep.key)))
        .collect();
    let fit = fisher_fit(&outcomes);
    let labels: Vec<String> = sweep.values.iter().map(|v| v.to_string()).collect();
    let text = match format {
        Format::Json => {
            let mut doc = json!({
                "kind": kind.name(),
                "sweep": {"key": sweep.key, "values": sweep.values},
                "points": outcomes.iter().map(|o| o.report.clone()).collect::<Vec<_>>(),
            });
            if let Some((slope, intercept)) = fit {
                doc["fi_fit"] = json!({"slope": json_f64(slope), "intercept": json_f64(intercept)});
            }
            to_json_text(&doc)
        }
        Format::Csv => {
            let rows: Vec<_> = outcomes.into_iter().map(|o| o.row).collect();
            // the swept key usually already has its own column
            let lead =
                rows.first().is_some_and(|r| r.iter().all(|(k, _)| *k != sweep.key)).then_some(sweep.key.as_str());
            let mut t = row_table(&rows, lead, &labels);
            if let Some((slope, _)) = fit {
                t.header.push("fi_fit_slope".into());
                for r in &mut t.rows {
                    r.push(fmt_f64(slope));
                }
            }
            t.to_csv()
        }
    };
    Ok(Rendered { text, alarm: (!alarms.is_empty()).then(|| alarms.join("; ")) })
}

/// Log-log fit of Fisher information against M over a protocol sweep.
fn fisher_fit(outcomes: &[Outcome]) -> Option<(f64, f64)> {
    let pts: Option<Vec<(f64, f64)>> = outcomes
        .iter()
        .map(|o| {
            let m = o.report.get("M")?.as_f64()?;
            let fi = o.report.get("fisher")?.get("fisher_information")?.as_f64()?;
            Some((m, fi))
        })
        .collect();
    commands::log_log_fit(&pts?)
}

/// Write through a temporary file in the same directory, then rename.
fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}
