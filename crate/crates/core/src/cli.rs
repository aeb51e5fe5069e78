//! Command-line front end. Human output is rendered from the same JSON
//! documents that `--out` writes.
//!
//! Exit codes: 0 all checks pass, 1 a check fails, 2 usage or spec error,
//! 3 internal error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bundle::Sampling;
use crate::catalog;
use crate::connection::ConnectionSpec;
use crate::invariants::{self, field_csv, full_report, FieldKind, FullReport, ReportOptions};
use crate::report::{Check, Status, Tolerances};
use crate::specfile::{self, Model, SpecError};
use crate::transport::{transport, TransportOptions, DEFAULT_STEP};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bundlekit", version, about = "Validate and compute with fiber bundles given by local chart data")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the structural validators; exit 1 if any check fails.
    Validate(ValidateArgs),
    /// Parallel-transport a frame (or a vector) along a declared curve.
    Transport(TransportArgs),
    /// First Chern number of a U(1) bundle over the sphere.
    Chern(ChernArgs),
    /// Every applicable validator plus the spec's tasks, as JSON.
    Report(ReportArgs),
    /// Sampled F or K field as CSV.
    Field(FieldArgs),
    /// Browse the built-in fixtures.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogAction {
    List,
    Show { name: String },
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Sample points per overlap component or chart.
    #[arg(long, default_value_t = crate::geometry::sampling::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = crate::geometry::sampling::DEFAULT_SEED)]
    pub seed: u64,
    /// One tolerance for every residual check (default: per-check).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Cross-check every symbolic `d` against central differences.
    #[arg(long)]
    pub verify_d: bool,
}

impl SamplingArgs {
    fn sampling(&self) -> Sampling {
        Sampling {
            samples: self.samples,
            seed: self.seed,
        }
    }

    fn tolerances(&self) -> Tolerances {
        self.tol.map_or_else(Tolerances::default, Tolerances::uniform)
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Spec file, or `catalog:NAME`.
    pub spec: String,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the human summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    pub spec: String,
    #[arg(long)]
    pub curve: String,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Re-project onto the group every K steps.
    #[arg(long, value_name = "K")]
    pub project_every: Option<usize>,
    /// Initial components, comma separated (complex as `re+imi`); default is the identity frame.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v0: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChernArgs {
    pub spec: String,
    /// Gauss–Legendre nodes per direction per chart.
    #[arg(long, default_value_t = invariants::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub spec: String,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = invariants::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FieldChoice {
    F,
    K,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    pub spec: String,
    #[arg(long, value_enum)]
    pub kind: FieldChoice,
    /// Grid points per coordinate per chart.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: m.to_string(),
        }
    }

    fn internal(m: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: m.to_string(),
        }
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Self::usage(e)
    }
}

fn load(path: &str) -> Result<Model, Failure> {
    Ok(specfile::load(path)?)
}

fn write_file(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    if let Some(p) = path {
        std::fs::write(p, text).map_err(|e| Failure::internal(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

fn fmt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

/// Human rendering of a report.
pub fn render(report: &FullReport) -> String {
    let mut s = format!("{} ({} over {}, {})\n", report.spec, report.group, report.atlas, report.status);
    for c in &report.checks {
        s.push_str(&render_check(c));
    }
    if let Some(ch) = &report.chern {
        s.push_str(&format!("chern number {} (raw {:.9}, deviation {:.3e})\n", ch.nearest, ch.raw, ch.deviation));
    }
    if let Some(t) = &report.total_curvature {
        s.push_str(&format!("total curvature {:.9} (4π = {:.9})\n", t.value, t.expected));
    }
    let failed = report.checks.iter().filter(|c| c.status == Status::Fail).count();
    s.push_str(&format!("{} checks, {failed} failed\n", report.checks.len()));
    s
}

fn render_check(c: &Check) -> String {
    let mut line = format!(
        "{:<5} {:<32} residual {:>10}  tol {:>10}  samples {}",
        c.status.to_string(),
        c.name,
        fmt_num(c.residual),
        fmt_num(c.tolerance),
        c.samples
    );
    if let Some(v) = &c.value {
        line.push_str(&format!("  value {v}"));
    }
    line.push('\n');
    if c.status == Status::Fail {
        if let Some(w) = &c.worst {
            line.push_str(&format!("      worst at {} on chart {} point {:?}\n", w.at, w.chart, w.point));
        }
        if let Some(d) = &c.detail {
            line.push_str(&format!("      {d}\n"));
        }
    }
    line
}

fn status_code(s: Status) -> i32 {
    if s == Status::Fail {
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}

fn parse_component(s: &str) -> Result<num_complex::Complex64, Failure> {
    let e = crate::expr::Expr::parse(s.trim()).map_err(|e| Failure::usage(format!("--v0 `{s}`: {e}")))?;
    e.eval(&crate::expr::Bindings::new()).map_err(|e| Failure::usage(format!("--v0 `{s}`: {e}")))
}

fn execute(cli: &Cli, out: &mut Vec<u8>) -> Result<i32, Failure> {
    let mut emit = |text: &str| out.write_all(text.as_bytes()).map_err(Failure::internal);
    match &cli.command {
        Command::Validate(a) => {
            let mut model = load(&a.spec)?;
            model.tasks = Default::default();
            let opts = ReportOptions {
                sampling: a.sampling.sampling(),
                tolerances: a.sampling.tolerances(),
                verify_d: a.sampling.verify_d,
                ..ReportOptions::default()
            };
            let r = full_report(&model, &opts);
            let text = r.to_json();
            write_file(&a.out, &text)?;
            emit(&if a.json { text } else { render(&r) })?;
            Ok(status_code(r.status))
        }
        Command::Report(a) => {
            let model = load(&a.spec)?;
            let opts = ReportOptions {
                sampling: a.sampling.sampling(),
                tolerances: a.sampling.tolerances(),
                resolution: a.resolution,
                transport: TransportOptions {
                    step: a.step,
                    project_every: None,
                },
                verify_d: a.sampling.verify_d,
            };
            let r = full_report(&model, &opts);
            let text = r.to_json();
            write_file(&a.out, &text)?;
            emit(&text)?;
            Ok(status_code(r.status))
        }
        Command::Transport(a) => {
            let model = load(&a.spec)?;
            let curve = model
                .curve(&a.curve)
                .ok_or_else(|| Failure::usage(format!("unknown curve `{}`", a.curve)))?;
            let flat;
            let conn = match &model.connection {
                Some(c) => c,
                None => {
                    flat = ConnectionSpec::flat(&model.bundle);
                    &flat
                }
            };
            let n = model.bundle.rank();
            let initial = match &a.v0 {
                None => crate::linalg::identity(n),
                Some(v) => {
                    let comps = v.iter().map(|s| parse_component(s)).collect::<Result<Vec<_>, _>>()?;
                    if comps.len() != n {
                        return Err(Failure::usage(format!("--v0 needs {n} components")));
                    }
                    crate::linalg::CMat::from_column_slice(n, 1, &comps)
                }
            };
            let opts = TransportOptions {
                step: a.step,
                project_every: a.project_every,
            };
            let r = transport(&model.bundle, conn, curve, &initial, opts).map_err(|e| match e {
                crate::transport::TransportError::Invalid(_) | crate::transport::TransportError::StepUnderflow(_) => {
                    Failure::usage(e)
                }
                other => Failure {
                    code: EXIT_FAIL,
                    message: other.to_string(),
                },
            })?;
            let text = json(&r);
            write_file(&a.out, &text)?;
            emit(&text)?;
            Ok(EXIT_PASS)
        }
        Command::Chern(a) => {
            let model = load(&a.spec)?;
            let conn = model
                .connection
                .as_ref()
                .ok_or_else(|| Failure::usage("spec has no connection or gauge field"))?;
            let r = invariants::chern_number(&model.bundle, conn, a.resolution).map_err(Failure::usage)?;
            let text = json(&r);
            write_file(&a.out, &text)?;
            emit(&text)?;
            Ok(status_code(r.status))
        }
        Command::Field(a) => {
            let model = load(&a.spec)?;
            let kind = match a.kind {
                FieldChoice::F => FieldKind::F,
                FieldChoice::K => FieldKind::K,
            };
            let text = field_csv(&model, kind, a.resolution).map_err(Failure::usage)?;
            match &a.out {
                Some(_) => write_file(&a.out, &text)?,
                None => emit(&text)?,
            }
            Ok(EXIT_PASS)
        }
        Command::Catalog { action } => match action {
            CatalogAction::List => {
                let mut s = String::new();
                for e in catalog::entries() {
                    s.push_str(&format!("{:<16} {:<10} {}\n", e.name, e.kind, e.description));
                }
                emit(&s)?;
                Ok(EXIT_PASS)
            }
            CatalogAction::Show { name } => {
                if let Some(a) = crate::geometry::catalog::atlas(name) {
                    emit(&format!("atlas {} with charts {}\n", a.name, a.chart_names().collect::<Vec<_>>().join(", ")))?;
                    return Ok(EXIT_PASS);
                }
                let text = catalog::text(name)?;
                emit(&text)?;
                if !text.ends_with('\n') {
                    emit("\n")?;
                }
                Ok(EXIT_PASS)
            }
        },
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: --threads must be positive");
            return EXIT_USAGE;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let mut buffer = Vec::new();
    let result = pool.install(|| {
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&cli, &mut buffer)))
    });
    if out.write_all(&buffer).and_then(|_| out.flush()).is_err() {
        return EXIT_INTERNAL;
    }
    match result {
        Ok(Ok(code)) => code,
        Ok(Err(f)) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            EXIT_INTERNAL
        }
    }
}
