//! The `fdscope` command line.
//!
//! Exit status: 0 on success, 1 when a validation does not hold, 2 on usage
//! errors and every other failure.

pub mod args;
pub mod config;
pub mod resolve;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use fdscope_core::relation::load_csv_path;
use fdscope_core::report::{DedupOutcome, PairView, Report};
use fdscope_core::scenario::anomaly::AnomalyState;
use fdscope_core::scenario::dedup::DedupSession;
use fdscope_core::task::{execute, run_anomaly, validate, TaskKind, TaskParams};
use fdscope_core::{CsvConfig, Error, ExecConfig, FieldError, Relation};
use serde_json::Value as Json;

use args::{Cli, Command, CsvArgs, DedupArgs, Discover, OutputMode, Scenario, ServeArgs, Validate};
use config::{split_off, DedupFile, FileConfig, Params};
use resolve::{parse_answers, resolve, Source};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_VALIDATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug)]
pub struct CliError(String);

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError(s)
    }
}

fn flag_name(field: &str) -> String {
    match field {
        "excluded_keys" => "--exclude-key".into(),
        "datasets" => "partitions".into(),
        "params" => "options".into(),
        f if f.len() == 1 => format!("-{f}"),
        f => format!("--{}", f.replace('_', "-")),
    }
}

fn field_message(fields: &[FieldError]) -> String {
    let mut s = String::from("invalid options");
    for f in fields {
        s.push_str(&format!("\n  {}: {}", flag_name(&f.field), f.reason));
    }
    s
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e.field_errors() {
            Some(fields) => CliError(field_message(&fields)),
            None => CliError(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

struct Context {
    file: FileConfig,
    output: OutputMode,
    exec: ExecConfig,
}

fn load(path: &Path, csv: &CsvConfig) -> CliResult<Relation> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    load_csv_path(path, csv)
        .map(|r| r.with_name(name))
        .map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
}

/// Runs one task kind on a single file with parameters built from the
/// config table and flags.
fn run_task(ctx: &Context, kind: TaskKind, params: Params, csv: &CsvArgs, file: &Path) -> CliResult<Report> {
    let raw = params.into_json();
    // Options are checked before the data is read.
    validate(kind, &raw, &[]).map_err(|f| CliError(field_message(&f)))?;
    let relation = load(file, &ctx.file.csv_config(csv))?;
    Ok(execute(kind, &raw, std::slice::from_ref(&relation), &ctx.exec)?)
}

fn dedup(ctx: &Context, a: &DedupArgs) -> CliResult<Report> {
    let mut table = ctx.file.dedup.clone();
    let own: DedupFile =
        split_off(&mut table, &["auto", "answers", "journal", "output_csv"]).map_err(|e| format!("[dedup]: {e}"))?;
    let mut p = Params::from_file(&table);
    p.set("threshold", a.threshold.clone())
        .set("window", a.window)
        .set("k", a.k)
        .set_list("excluded_keys", &a.exclude_keys)
        .set_flag("exclude_unique", a.exclude_unique);
    let raw = p.into_json();
    validate(TaskKind::ScenarioDedup, &raw, &[]).map_err(|f| CliError(field_message(&f)))?;

    let script = match a.answers.as_ref().or(own.answers.as_ref()).filter(|_| !a.interactive && a.auto.is_none()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Some(parse_answers(&text).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        None => None,
    };
    let auto = a.auto.or(if a.interactive || a.answers.is_some() { None } else { own.auto });
    let journal_path = a.journal.clone().or(own.journal);
    let csv_path = a.output_csv.clone().or(own.output_csv);

    let csv = ctx.file.csv_config(&a.csv);
    let relation = load(&a.file, &csv)?;
    let report = execute(TaskKind::ScenarioDedup, &raw, std::slice::from_ref(&relation), &ctx.exec)?;
    let Report::ScenarioDedup(mut r) = report else {
        unreachable!("dedup task yields a dedup report")
    };

    let source = if let Some(mode) = auto {
        Some(Source::Auto(mode))
    } else if let Some(script) = script {
        Some(Source::Script(script.into_iter()))
    } else if a.interactive {
        Some(Source::Prompt {
            input: Box::new(io::stdin().lock()),
            output: Box::new(io::stderr()),
        })
    } else {
        None
    };
    let mut session = DedupSession::new(r.pairs.iter().map(PairView::pair).collect());
    if let Some(source) = source {
        resolve(&mut session, &relation, source)?;
        let current = session.relation(&relation)?;
        r.outcome = Some(DedupOutcome {
            journal: session.journal.clone(),
            skipped: session.skipped.iter().copied().collect(),
            remaining_rows: current.row_count(),
        });
    }
    if let Some(path) = journal_path {
        let mut bytes = serde_json::to_vec_pretty(&session.journal).expect("journal serializes");
        bytes.push(b'\n');
        write_file(&path, &bytes)?;
    }
    if let Some(path) = csv_path {
        let current = session.relation(&relation)?;
        write_file(&path, &current.to_csv(csv.separator, &csv.null_token)?)?;
    }
    Ok(Report::ScenarioDedup(r))
}

fn anomaly(ctx: &Context, a: &args::AnomalyArgs) -> CliResult<Report> {
    let mut table = ctx.file.anomaly.clone();
    let state_file = match table.remove("state") {
        None => None,
        Some(Json::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError("[anomaly]: state must be a path".into())),
    };
    let mut p = Params::from_file(&table);
    p.set("max_lhs", a.max_lhs)
        .set_list("thresholds", &a.thresholds)
        .set("d", a.d)
        .set("step", a.step)
        .set("metric", a.metric.clone())
        .set_flag("accept", a.accept)
        .set_flag("cumulative", a.cumulative);
    let raw = p.into_json();
    validate(TaskKind::ScenarioAnomaly, &raw, &[]).map_err(|f| CliError(field_message(&f)))?;

    let state_path = a.state.clone().or(state_file);
    let prior: Option<AnomalyState> = match &state_path {
        Some(path) if path.exists() => {
            let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Some(serde_json::from_slice(&bytes).map_err(|e| format!("{}: not a state file: {e}", path.display()))?)
        }
        _ => None,
    };
    let csv = ctx.file.csv_config(&a.csv);
    let partitions = a.files.iter().map(|f| load(f, &csv)).collect::<CliResult<Vec<_>>>()?;
    let refs: Vec<&Relation> = partitions.iter().collect();
    let TaskParams::Anomaly(params) =
        validate(TaskKind::ScenarioAnomaly, &raw, &refs).map_err(|f| CliError(field_message(&f)))?
    else {
        unreachable!("anomaly parameters")
    };
    if prior.is_none() && partitions.len() < 2 && state_path.is_none() {
        return Err(CliError("at least two partitions are needed without --state".into()));
    }
    let (state, report) = run_anomaly(prior, &partitions, &params, &ctx.exec)?;
    if let Some(path) = state_path {
        let mut bytes = serde_json::to_vec_pretty(&state).expect("state serializes");
        bytes.push(b'\n');
        let tmp = path.with_extension("tmp");
        write_file(&tmp, &bytes)?;
        std::fs::rename(&tmp, &path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(Report::ScenarioAnomaly(report))
}

fn serve(ctx: &Context, a: &ServeArgs) -> CliResult<()> {
    let file = &ctx.file.serve;
    let addr = a.addr.clone().or_else(|| file.addr.clone()).unwrap_or_else(|| "127.0.0.1:8080".into());
    let root = a
        .storage
        .clone()
        .or_else(|| file.storage.clone())
        .ok_or("no storage root; pass --storage or set FDSCOPE_STORAGE".to_owned())?;
    let cfg = fdscope_service::ServiceConfig {
        root,
        workers: a.workers.or(file.workers).unwrap_or(2).max(1),
        engine_threads: ctx.exec.threads,
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime
        .block_on(async {
            let listener = tokio::net::TcpListener::bind(&addr).await?;
            fdscope_service::serve(listener, cfg, |bound| {
                println!("listening on http://{bound}");
                let _ = io::stdout().flush();
            })
            .await
        })
        .map_err(|e| CliError(format!("{addr}: {e}")))
}

fn dispatch(ctx: &Context, command: &Command) -> CliResult<Report> {
    let f = &ctx.file;
    match command {
        Command::Discover(Discover::Fd(a)) => {
            let mut p = Params::from_file(&f.fd);
            p.set("max_lhs", a.max_lhs);
            run_task(ctx, TaskKind::FdDiscovery, p, &a.csv, &a.file)
        }
        Command::Discover(Discover::Afd(a)) => {
            let mut p = Params::from_file(&f.afd);
            p.set("threshold", a.threshold.clone()).set("max_lhs", a.max_lhs);
            run_task(ctx, TaskKind::AfdDiscovery, p, &a.csv, &a.file)
        }
        Command::Validate(Validate::Mfd(a)) => {
            let mut p = Params::from_file(&f.mfd);
            p.set_list("lhs", &a.lhs)
                .set_list("rhs", &a.rhs)
                .set("metric", a.metric.clone())
                .set("p", a.p);
            run_task(ctx, TaskKind::MfdValidation, p, &a.csv, &a.file)
        }
        Command::Scenario(Scenario::Typo(a)) => {
            let mut p = Params::from_file(&f.typo);
            p.set("threshold", a.threshold.clone())
                .set("radius", a.radius)
                .set("ratio", a.ratio)
                .set("max_lhs", a.max_lhs)
                .set_flag("invert_display", a.invert_display);
            run_task(ctx, TaskKind::ScenarioTypo, p, &a.csv, &a.file)
        }
        Command::Scenario(Scenario::Dedup(a)) => dedup(ctx, a),
        Command::Scenario(Scenario::Anomaly(a)) => anomaly(ctx, a),
        Command::Serve(_) => unreachable!("serve has no report"),
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_ERROR;
            }
        },
        None => FileConfig::default(),
    };
    let ctx = Context {
        output: cli.output.or(file.output).unwrap_or(OutputMode::Human),
        exec: ExecConfig::with_threads(cli.threads.or(file.threads).unwrap_or(0)),
        file,
    };
    let outcome = match &cli.command {
        Command::Serve(a) => serve(&ctx, a).map(|()| None),
        command => dispatch(&ctx, command).map(Some),
    };
    match outcome {
        Ok(None) => EXIT_OK,
        Ok(Some(report)) => {
            let mut out = io::stdout().lock();
            let written = match ctx.output {
                OutputMode::Json => out.write_all(&report.to_json()),
                OutputMode::Human => out.write_all(report.render().as_bytes()),
            };
            if written.and_then(|()| out.flush()).is_err() {
                return EXIT_ERROR;
            }
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_FAILED_VALIDATION
            }
        }
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
