use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use shiftlab::analysis::{analyze, Report, RunOptions, Status};
use shiftlab::classify::{classify, ClassifyOptions};
use shiftlab::scenarios::{self, BUILTIN};
use shiftlab::seqspace::seq_norm;
use shiftlab::shadow::{defect_residual, defects_of, shadowing_verdict, solve_shadowing};
use shiftlab::{Error, IndexRange, ScenarioConfig, SeqPoint};

mod aggregate;

const EXIT_CONFIG: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(
    name = "shiftlab",
    version,
    about = "Classify shifts generated by matrix sequences and solve for shadowing orbits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run classification, conjugacy checks and the shadowing verdict.
    Analyze(AnalyzeArgs),
    /// Solve for the orbit shadowing a pseudo-orbit or a defect sequence.
    Shadow(ShadowArgs),
    /// Aggregate a directory of JSON reports into one CSV table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Half-width of the classification window.
    #[arg(long)]
    window: Option<i64>,
    /// Longest growth-rate window.
    #[arg(long)]
    nmax: Option<usize>,
    /// Largest shift of the growth-rate windows.
    #[arg(long)]
    kmax: Option<usize>,
    /// Sequence-space exponent.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Run every built-in scenario; --output names a directory.
    #[arg(long, conflicts_with_all = ["scenario", "config"])]
    all: bool,
    /// Residual tolerance.
    #[arg(long, default_value_t = shiftlab::analysis::DEFAULT_TOL)]
    tol: f64,
    /// Seed of the probe points and random defects.
    #[arg(long, default_value_t = shiftlab::classify::PROBE_SEED)]
    seed: u64,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ShadowArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// JSON file with `pseudo_orbit` or `defects`, each a list of sequence points.
    #[arg(long)]
    input: PathBuf,
    /// Write the solution here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of JSON reports.
    dir: PathBuf,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Refused(_) => EXIT_REFUSED,
            Error::Divergence(_) | Error::NoConvergence(_) => EXIT_VERIFICATION,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Shadow(a) => cmd_shadow(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(a: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&a.scenario, &a.config) {
        (Some(name), None) => ScenarioConfig::named(name),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("{}: {e}", path.display()),
            })?
        }
        _ => {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: format!(
                    "give --scenario or --config; built-in scenarios: {}",
                    BUILTIN.join(", ")
                ),
            })
        }
    };
    if let Some(w) = a.window {
        cfg.window = w;
    }
    if let Some(n) = a.nmax {
        cfg.n_max = n;
    }
    if let Some(k) = a.kmax {
        cfg.k_max = k;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn status_code(r: &Report) -> u8 {
    match r.outcome.status {
        Status::Ok => 0,
        Status::Refused => EXIT_REFUSED,
        Status::VerificationFailed => EXIT_VERIFICATION,
    }
}

fn render(r: &Report, format: Format) -> Result<String, Failure> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(aggregate::Row::from_report(r))
                .map_err(|e| Failure {
                    code: EXIT_IO,
                    message: e.to_string(),
                })?;
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
        }
        Format::Text => text_summary(r),
    })
}

fn text_summary(r: &Report) -> String {
    let c = &r.classification;
    let mut s = format!("scenario      {}\n", r.scenario.name);
    s += &format!("summary       {}\n", r.scenario.summary);
    s += &format!(
        "criterion     {} ({:?})\n",
        c.criterion.as_str(),
        c.certification
    );
    if let Some(pb) = c.certificates.projection_bound {
        s += &format!("projections   C = {pb:.6}\n");
    }
    match &r.shadowing {
        Some(sh) => {
            s += &format!("shadowing     {}\n", sh.verdict);
            for v in &sh.per_seed {
                s += &format!(
                    "  factor      fired {}, A {:.6}, B {:.6}\n",
                    v.fired.map_or("none".to_string(), |c| format!("{c:?}")),
                    v.ladders.a.limit,
                    v.ladders.b.limit
                );
            }
            s += &format!("K             {}\n", fmt_f(sh.k));
        }
        None => s += "shadowing     refused (no bounded-projection certificate)\n",
    }
    for (k, v) in &r.diagnostics {
        s += &format!("{k:13} {v:.6}\n");
    }
    s += &format!("max residual  {:.3e}\n", r.outcome.max_residual);
    s += &format!(
        "status        {:?} (matches expected: {})\n",
        r.outcome.status, r.outcome.matches_expected
    );
    for f in &r.outcome.failures {
        s += &format!("  failure     {f}\n");
    }
    for d in &r.disclosures {
        s += &format!("  note        {d}\n");
    }
    s
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "inf".into()
    }
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<u8, Failure> {
    let opts = RunOptions {
        tol: a.tol,
        seed: a.seed,
        ..Default::default()
    };
    if a.all {
        return run_all(&opts, a.output.as_deref(), a.format);
    }
    let cfg = load_config(&a.scenario)?;
    let report = analyze(&cfg, &opts)?;
    write_out(a.output.as_deref(), &render(&report, a.format)?)?;
    for f in &report.outcome.failures {
        eprintln!("verification: {f}");
    }
    Ok(status_code(&report))
}

fn run_all(opts: &RunOptions, dir: Option<&Path>, format: Format) -> Result<u8, Failure> {
    let dir = dir.ok_or_else(|| Failure {
        code: EXIT_CONFIG,
        message: "--all needs --output DIR".into(),
    })?;
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Text => "txt",
    };
    let mut all_match = true;
    for name in BUILTIN {
        let report = analyze(&ScenarioConfig::named(name), opts)?;
        fs::write(dir.join(format!("{name}.{ext}")), render(&report, format)?)
            .map_err(|e| Failure::io(dir, e))?;
        println!(
            "{name:24} {:22} shadowing {:5} {}",
            report.classification.criterion.as_str(),
            report
                .shadowing
                .as_ref()
                .map_or("-".to_string(), |c| c.verdict.to_string()),
            if report.outcome.matches_expected {
                "as expected"
            } else {
                "UNEXPECTED"
            }
        );
        all_match &= report.outcome.matches_expected;
    }
    Ok(if all_match { 0 } else { EXIT_VERIFICATION })
}

/// Input of the shadow command.
#[derive(Deserialize)]
struct ShadowInput {
    pseudo_orbit: Option<Vec<SeqPoint>>,
    defects: Option<Vec<SeqPoint>>,
}

#[derive(Serialize)]
struct ShadowOutput {
    scenario: String,
    #[serde(rename = "K")]
    k: f64,
    realized_k: f64,
    defect_sup: f64,
    correction_sup: f64,
    defect_residual: f64,
    /// `x` with `x^(k+1) = sigma(x^(k)) + z^(k)`.
    correction: Vec<SeqPoint>,
    /// `p - x` for pseudo-orbit input: a true orbit.
    orbit: Option<Vec<SeqPoint>>,
}

fn cmd_shadow(a: ShadowArgs) -> Result<u8, Failure> {
    let cfg = load_config(&a.scenario)?;
    let text = fs::read_to_string(&a.input).map_err(|e| Failure::io(&a.input, e))?;
    let input: ShadowInput = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", a.input.display()),
    })?;
    let sc = scenarios::build(&cfg)?;
    let s = &sc.sequence;
    let (defects, pseudo) =
        match (input.defects, input.pseudo_orbit) {
            (Some(d), None) => (d, None),
            (None, Some(p)) if p.len() >= 2 => (defects_of(s, &p)?, Some(p)),
            _ => return Err(Failure {
                code: EXIT_CONFIG,
                message:
                    "input needs exactly one of `defects` or `pseudo_orbit` (at least two points)"
                        .into(),
            }),
        };
    // points without entries carry no dimension of their own
    let defects: Vec<SeqPoint> = defects
        .into_iter()
        .map(|z| {
            if z.dim() != s.dim() && z.max_abs() == 0.0 {
                SeqPoint::zeros(z.window(), s.dim(), z.p())
            } else {
                z
            }
        })
        .collect();
    if defects.iter().any(|z| z.dim() != s.dim()) {
        return Err(Error::Dimension(format!("defects must live in dimension {}", s.dim())).into());
    }
    let copts = ClassifyOptions {
        window: IndexRange::symmetric(cfg.window),
        p: cfg.p,
        ..Default::default()
    };
    let verdict = classify(s, &sc.candidates, &copts)?;
    if !verdict.certified() {
        return Err(
            Error::Refused("no bounded-projection certificate for this scenario".into()).into(),
        );
    }
    let cert = shadowing_verdict(s, &verdict, cfg.n_max, cfg.k_max)?;
    let sol = solve_shadowing(s, &verdict, &cert, &defects)?;
    let residual = defect_residual(s, &sol.orbit, &defects)?;
    let nm = s.norm();
    let orbit = match &pseudo {
        Some(p) => Some(
            p.iter()
                .zip(&sol.orbit)
                .map(|(pk, xk)| pk.sub(xk))
                .collect::<shiftlab::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let out = ShadowOutput {
        scenario: sc.name.clone(),
        k: cert.k,
        realized_k: sol.realized_k,
        defect_sup: defects.iter().map(|z| seq_norm(z, nm)).fold(0.0, f64::max),
        correction_sup: sol
            .orbit
            .iter()
            .map(|x| seq_norm(x, nm))
            .fold(0.0, f64::max),
        defect_residual: residual,
        correction: sol.orbit,
        orbit,
    };
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&out).expect("orbits serialize") + "\n",
        Format::Csv => format!(
            "scenario,K,realized_k,defect_sup,correction_sup,defect_residual\n{},{},{},{},{},{}\n",
            out.scenario,
            fmt_f(out.k),
            out.realized_k,
            out.defect_sup,
            out.correction_sup,
            out.defect_residual
        ),
        Format::Text => format!(
            "scenario {}\nK {}\nrealized {:.6}\nsup defect {:.6e}\nsup correction {:.6e}\nresidual {:.3e}\n",
            out.scenario,
            fmt_f(out.k),
            out.realized_k,
            out.defect_sup,
            out.correction_sup,
            out.defect_residual
        ),
    };
    write_out(a.output.as_deref(), &text)?;
    Ok(
        if residual <= shiftlab::analysis::DEFAULT_TOL * out.defect_sup.max(1.0) {
            0
        } else {
            EXIT_VERIFICATION
        },
    )
}

fn cmd_report(a: ReportArgs) -> Result<u8, Failure> {
    let agg = aggregate::aggregate_dir(&a.dir).map_err(|e| Failure::io(&a.dir, e))?;
    for w in &agg.warnings {
        eprintln!("warning: {w}");
    }
    write_out(a.output.as_deref(), &agg.csv)?;
    eprintln!("aggregated {} report(s)", agg.rows);
    Ok(0)
}
