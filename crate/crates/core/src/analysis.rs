//! End-to-end pipeline: scenario, classification, conjugacy, shadowing.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{
    build_conjugacy, classify, probe_points, projection_bound, verify_conjugacy, Certification,
    ClassificationVerdict, ClassifyOptions, Criterion, Frames, Residuals, PROBE_COUNT, PROBE_SEED,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::opseq::IndexRange;
use crate::scenarios::{self, ConeData, Expected, Scenario, ScenarioConfig};
use crate::seqspace::SeqPoint;
use crate::shadow::{
    defect_residual, hyperbolicity_verdict, shadowing_verdict, HyperbolicityReport, ShadowSolver,
    ShadowingCertificate,
};

/// Version of the report layout.
pub const REPORT_VERSION: u32 = 1;
/// Default residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub tol: f64,
    pub seed: u64,
    pub probes: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tol: DEFAULT_TOL,
            seed: PROBE_SEED,
            probes: PROBE_COUNT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub summary: String,
    pub notes: Vec<String>,
    pub expected: Expected,
    pub cones: Option<ConeData>,
}

/// A short run of the shadowing solver on generated defects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverCheck {
    pub instances: usize,
    pub max_defect_residual: f64,
    pub max_realized_k: f64,
    /// Certified bound the realized ratios are compared against.
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Refused,
    VerificationFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: Status,
    pub matches_expected: bool,
    /// Largest conjugacy or solver residual.
    pub max_residual: f64,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub shiftlab: String,
    pub report: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ScenarioConfig,
    pub options: RunOptions,
    pub scenario: ScenarioEcho,
    pub classification: ClassificationVerdict,
    pub shadowing: Option<ShadowingCertificate>,
    pub hyperbolicity: Vec<HyperbolicityReport>,
    pub solver_check: Option<SolverCheck>,
    /// Scenario-specific numbers.
    pub diagnostics: BTreeMap<String, f64>,
    pub disclosures: Vec<String>,
    pub outcome: Outcome,
    pub wall_clock_ms: f64,
    pub versions: Versions,
}

impl Report {
    /// The report with the wall-clock field zeroed, for comparisons.
    pub fn without_timing(&self) -> Report {
        Report {
            wall_clock_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Runs the full pipeline on one configuration.
pub fn analyze(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Report> {
    let start = Instant::now();
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::Config(format!(
            "tolerance {} must be positive",
            opts.tol
        )));
    }
    let sc = scenarios::build(cfg)?;
    let s = &sc.sequence;
    let copts = ClassifyOptions {
        window: IndexRange::symmetric(cfg.window),
        p: cfg.p,
        ..Default::default()
    };
    let mut verdict = classify(s, &sc.candidates, &copts)?;
    let mut failures = Vec::new();
    let mut disclosures = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut diagnostics = BTreeMap::new();

    let mut shadowing = None;
    let mut solver_check = None;
    if verdict.certified() {
        let bundle = build_conjugacy(s, &verdict, copts.window, cfg.p)?;
        let inner = IndexRange {
            lo: copts.window.lo + 1,
            hi: copts.window.hi - 1,
        };
        let probes = probe_points(s.dim(), inner, opts.probes, cfg.p, opts.seed);
        let res = verify_conjugacy(s, &bundle, &probes)?;
        for (label, r) in residual_entries(&res) {
            max_residual = max_residual.max(r);
            if !(r <= opts.tol) {
                failures.push(format!("{label} residual {r:.3e} exceeds {:.1e}", opts.tol));
            }
        }
        verdict.residuals = res;
        let cert = shadowing_verdict(s, &verdict, cfg.n_max, cfg.k_max)?;
        if cert.inconclusive {
            disclosures
                .push("a growth-rate limit lies within the inconclusive band around 1".into());
        }
        if cert.verdict {
            let check = solver_check_run(&sc, &verdict, &cert, opts.seed)?;
            max_residual = max_residual.max(check.max_defect_residual);
            if !(check.max_defect_residual <= opts.tol) {
                failures.push(format!(
                    "solver defect residual {:.3e} exceeds {:.1e}",
                    check.max_defect_residual, opts.tol
                ));
            }
            if !(check.max_realized_k <= check.k * (1.0 + 1e-9)) {
                failures.push(format!(
                    "realized ratio {:.6} exceeds K = {:.6}",
                    check.max_realized_k, check.k
                ));
            }
            solver_check = Some(check);
        }
        shadowing = Some(cert);
    }

    let hw = IndexRange::symmetric((cfg.n_max + cfg.k_max + 1) as i64);
    let frames = Frames::compute(s, &verdict.basis, hw)?;
    let hyperbolicity = (0..frames.dim())
        .map(|b| hyperbolicity_verdict(&frames.weight_seq(b, s.bound()), cfg.n_max, cfg.k_max))
        .collect();

    if verdict.certification == Certification::WindowCertified {
        disclosures.push(format!(
            "bounded projections certified on [{}, {}] only, with a stable half-window trend",
            verdict.window.lo, verdict.window.hi
        ));
    }
    disclosures.push(format!(
        "growth rates are finite-window ladders with n <= {} and shifts up to {}",
        cfg.n_max, cfg.k_max
    ));
    scenario_diagnostics(&sc, &verdict, cfg, &mut diagnostics, &mut disclosures)?;

    let exp = &sc.expected;
    let criterion_ok = match exp.criterion {
        Criterion::None => !verdict.certified(),
        c => verdict.passed.contains(&c),
    };
    let shadow_ok = exp.shadowing == shadowing.as_ref().map(|c| c.verdict);
    if !criterion_ok {
        failures.push(format!(
            "expected criterion {} among {:?}",
            exp.criterion.as_str(),
            verdict
                .passed
                .iter()
                .map(|c| c.as_str())
                .collect::<Vec<_>>()
        ));
    }
    if !shadow_ok {
        failures.push(format!(
            "expected shadowing {:?}, computed {:?}",
            exp.shadowing,
            shadowing.as_ref().map(|c| c.verdict)
        ));
    }
    let matches_expected = criterion_ok && shadow_ok;
    let status = if !failures.is_empty() {
        Status::VerificationFailed
    } else if !verdict.certified() {
        Status::Refused
    } else {
        Status::Ok
    };
    Ok(Report {
        config: cfg.clone(),
        options: opts.clone(),
        scenario: ScenarioEcho {
            name: sc.name.clone(),
            summary: exp.summary.clone(),
            notes: sc.notes.clone(),
            expected: exp.clone(),
            cones: sc.cones.clone(),
        },
        classification: verdict,
        shadowing,
        hyperbolicity,
        solver_check,
        diagnostics,
        disclosures,
        outcome: Outcome {
            status,
            matches_expected,
            max_residual,
            failures,
        },
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        versions: Versions {
            shiftlab: env!("CARGO_PKG_VERSION").into(),
            report: REPORT_VERSION,
        },
    })
}

fn residual_entries(r: &Residuals) -> Vec<(&'static str, f64)> {
    [
        ("factor", r.factor),
        ("conjugacy", r.conjugacy),
        ("round-trip", r.roundtrip),
        ("surjectivity", r.surjectivity),
    ]
    .into_iter()
    .filter_map(|(l, v)| v.map(|v| (l, v)))
    .collect()
}

const CHECK_STEPS: usize = 16;
const CHECK_SUPPORT: i64 = 8;

/// Impulse and noise defects on a small support, solved and verified.
fn solver_check_run(
    sc: &Scenario,
    verdict: &ClassificationVerdict,
    cert: &ShadowingCertificate,
    seed: u64,
) -> Result<SolverCheck> {
    let s = &sc.sequence;
    let d = s.dim();
    let p = verdict.p;
    let support = IndexRange::symmetric(CHECK_SUPPORT);
    let t = CHECK_STEPS as i64;
    let solver = ShadowSolver::new(
        s,
        verdict,
        cert,
        IndexRange::symmetric(CHECK_SUPPORT + t + 1),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suites: Vec<Vec<SeqPoint>> = Vec::new();
    for b in 0..d {
        let mut zs = vec![SeqPoint::zeros(support, d, p); CHECK_STEPS];
        zs[0] = SeqPoint::impulse(0, Vector::unit(d, b), p);
        suites.push(zs);
    }
    for _ in 0..4 {
        let zs = (0..CHECK_STEPS)
            .map(|_| {
                let entries = support
                    .iter()
                    .map(|_| {
                        Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
                    })
                    .collect();
                SeqPoint::from_entries(support.lo, entries, p).unwrap()
            })
            .collect();
        suites.push(zs);
    }
    let mut worst: f64 = 0.0;
    let mut realized: f64 = 0.0;
    for zs in &suites {
        let sol = solver.solve(zs)?;
        worst = worst.max(defect_residual(s, &sol.orbit, zs)?);
        realized = realized.max(sol.realized_k);
    }
    Ok(SolverCheck {
        instances: suites.len(),
        max_defect_residual: worst,
        max_realized_k: realized,
        k: cert.k,
    })
}

fn scenario_diagnostics(
    sc: &Scenario,
    verdict: &ClassificationVerdict,
    cfg: &ScenarioConfig,
    diag: &mut BTreeMap<String, f64>,
    disclosures: &mut Vec<String>,
) -> Result<()> {
    let s = &sc.sequence;
    if let Some(c) = &sc.cones {
        diag.insert("cone_eta".into(), c.eta);
    }
    match sc.name.as_str() {
        "jordan_skew" => {
            let frames = Frames::compute(s, &verdict.basis, IndexRange::symmetric(cfg.window))?;
            diag.insert(
                "projection_bound".into(),
                projection_bound(&frames, IndexRange::symmetric(cfg.window))?,
            );
            let probes = probe_points(
                2,
                IndexRange::symmetric(cfg.window / 2),
                20,
                cfg.p,
                PROBE_SEED,
            );
            diag.insert(
                "skew_residual".into(),
                scenarios::jordan_skew_residual(s, &probes)?,
            );
        }
        "elliptic_bounded" => {
            if let Some(m) = scenarios::elliptic_gap_bound(sc) {
                diag.insert("gap_bound".into(), m as f64);
            }
        }
        _ => {}
    }
    if sc.name.starts_with("elliptic") {
        disclosures.push("the rotation number is a 64-bit proxy for an irrational".into());
    }
    if let Some(jd) = &verdict.certificates.joint_diagonalization {
        diag.insert("joint_diagonalization_offdiag".into(), jd.offdiag_residual);
    }
    Ok(())
}

/// Reports for every built-in scenario with default parameters.
pub fn run_catalog(opts: &RunOptions) -> Vec<(String, Result<Report>)> {
    scenarios::catalog()
        .into_iter()
        .map(|c| (c.name.clone(), analyze(&c, opts)))
        .collect()
}
