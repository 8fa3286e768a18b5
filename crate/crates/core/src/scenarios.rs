//! Built-in scenarios: generators, candidate bases and expected verdicts.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classify::Criterion;
use crate::error::{Error, Result};
use crate::linalg::{self, apply_unchecked, invert, operator_norm, Mat, NormSpec, Vector};
use crate::opseq::{Generator, OperatorSequence, Seed};
use crate::seqspace::{
    coordinate_split, max_distance, shift_apply, skew_apply, SeqPoint, WeightSeq,
};

/// Fractional part of the golden ratio, used as the default rotation
/// number. Any finite run only sees finitely many of its digits.
pub const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;
/// Default cone half-angle in radians.
pub const DEFAULT_HALF_ANGLE: f64 = 0.25;
/// Angular step of the cone-expansion sampling.
pub const CONE_SAMPLING_STEP: f64 = 1e-4;
/// Margin by which boundary images must fall inside a cone.
pub const CONE_MARGIN: f64 = 1e-6;

/// A double cone `{v : angle(v, +-axis) <= half_angle}` in the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone2D {
    pub axis: Vector,
    pub half_angle: f64,
}

impl Cone2D {
    pub fn new(axis: &Vector, half_angle: f64) -> Result<Cone2D> {
        if axis.dim() != 2 {
            return Err(Error::Dimension("cones live in the plane".into()));
        }
        if !(1e-6..=std::f64::consts::FRAC_PI_2 - 1e-6).contains(&half_angle) {
            return Err(Error::Config(format!(
                "half-angle {half_angle} outside (0, pi/2)"
            )));
        }
        Ok(Cone2D {
            axis: linalg::normalize(axis, NormSpec::Euclidean)?,
            half_angle,
        })
    }

    /// Angle between the line of `v` and the axis, in `[0, pi/2]`.
    pub fn offset(&self, v: &Vector) -> f64 {
        let c = (v.dot(&self.axis) / linalg::vnorm(v, NormSpec::Euclidean))
            .abs()
            .min(1.0);
        c.acos()
    }

    pub fn contains(&self, v: &Vector) -> bool {
        self.offset(v) <= self.half_angle + 1e-12
    }

    /// Unit vector at signed angle `t` from the axis.
    pub fn ray(&self, t: f64) -> Vector {
        apply_unchecked(&Mat::rotation(t), &self.axis)
    }
}

/// Strict invariance `m(c)` inside `c` with the given margin, decided by
/// the images of the two boundary rays and of the axis.
pub fn cone_invariant(m: &Mat, c: &Cone2D, margin: f64) -> bool {
    if m.dim() != 2 {
        return false;
    }
    let lo = apply_unchecked(m, &c.ray(-c.half_angle));
    let mid = apply_unchecked(m, &c.ray(0.0));
    let hi = apply_unchecked(m, &c.ray(c.half_angle));
    let inside = |v: &Vector| c.offset(v) <= c.half_angle - margin;
    // the image sector is the one through the image of the axis
    inside(&lo) && inside(&mid) && inside(&hi) && mid.dot(&lo) > 0.0 && mid.dot(&hi) > 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeExpansion {
    /// Smallest `||m v||` over unit `v` in the cone found by sampling and
    /// refinement.
    pub sampled: f64,
    /// A lower bound: `sampled` minus the sampling error bound.
    pub eta: f64,
    pub uncertainty: f64,
}

/// `min ||m v||` over unit vectors of the cone (Euclidean).
pub fn cone_expansion(m: &Mat, c: &Cone2D) -> ConeExpansion {
    let (a0, b0, c0, d0) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let base = c.axis[1].atan2(c.axis[0]);
    let f = |t: f64| {
        let (sn, cs) = (base + t).sin_cos();
        (a0 * cs + b0 * sn).hypot(c0 * cs + d0 * sn)
    };
    let steps = (2.0 * c.half_angle / CONE_SAMPLING_STEP).ceil() as usize;
    let h = 2.0 * c.half_angle / steps as f64;
    let (mut best_t, mut best) = (-c.half_angle, f(-c.half_angle));
    for i in 1..=steps {
        let t = -c.half_angle + i as f64 * h;
        let v = f(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement on the neighbouring cells
    let (mut a, mut b) = (
        (best_t - h).max(-c.half_angle),
        (best_t + h).min(c.half_angle),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let sampled = best.min(f(0.5 * (a + b)));
    // |f''| <= ||m||^2 / f on the circle, so a grid point is within
    // ||m||^2 h^2 / (8 f) of the minimum over its cell
    let mn = operator_norm(m, NormSpec::Euclidean);
    let uncertainty = mn * mn * h * h / (8.0 * sampled.max(f64::MIN_POSITIVE));
    ConeExpansion {
        sampled,
        eta: sampled - uncertainty,
        uncertainty,
    }
}

/// Pair of cones with the certified expansion rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeData {
    pub plus: Cone2D,
    pub minus: Cone2D,
    pub eta: f64,
}

/// What a scenario is expected to produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// A criterion that must be among the passed ones.
    pub criterion: Criterion,
    /// `None` when classification is expected to refuse.
    pub shadowing: Option<bool>,
    pub hyperbolicity: String,
    pub summary: String,
}

/// Scenario configuration as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "empty_params")]
    pub params: Value,
    #[serde(default = "default_window")]
    pub window: i64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn empty_params() -> Value {
    json!({})
}
fn default_window() -> i64 {
    100
}
fn default_n_max() -> usize {
    crate::shadow::DEFAULT_N_MAX
}
fn default_k_max() -> usize {
    crate::shadow::DEFAULT_K_MAX
}
fn default_p() -> f64 {
    2.0
}

impl ScenarioConfig {
    pub fn named(name: &str) -> ScenarioConfig {
        ScenarioConfig {
            name: name.into(),
            params: empty_params(),
            window: default_window(),
            n_max: default_n_max(),
            k_max: default_k_max(),
            p: default_p(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.n_max < 1 || self.k_max < 1 {
            return Err(Error::Config(
                "window must be at least 2, n_max and k_max at least 1".into(),
            ));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::Config(format!("p = {} must be at least 1", self.p)));
        }
        if !self.params.is_object() {
            return Err(Error::Config("params must be a JSON object".into()));
        }
        Ok(())
    }

    fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("parameter {key} must be a number"))),
        }
    }

    fn u64_param(&self, key: &str, default: u64) -> Result<u64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| {
                Error::Config(format!("parameter {key} must be a non-negative integer"))
            }),
        }
    }
}

/// A reproducible example.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub sequence: OperatorSequence,
    pub candidates: Vec<Vec<Seed>>,
    pub expected: Expected,
    pub cones: Option<ConeData>,
    /// Facts established while building (search results, caveats).
    pub notes: Vec<String>,
}

/// Names of the built-in scenarios, in catalog order.
pub const BUILTIN: [&str; 10] = [
    "rotation",
    "diagonal",
    "eigen_orthogonal",
    "jointly_diagonalizable",
    "anosov",
    "elliptic_bounded",
    "elliptic_unbounded",
    "jordan_skew",
    "no_cones",
    "delta_basis",
];

/// Builds a scenario from its configuration.
pub fn build(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    match cfg.name.as_str() {
        "rotation" => build_rotation(RotationAngles::Constant(
            cfg.f64_param("theta", GOLDEN_FRACTION)?,
        )),
        "rotation_golden_orbit" => build_rotation(RotationAngles::GoldenOrbit),
        "diagonal" => {
            let lambdas = match cfg.params.get("lambdas") {
                None => vec![vec![2.0], vec![0.5]],
                Some(v) => serde_json::from_value(v.clone()).map_err(|e| {
                    Error::Config(format!("lambdas must be a list of number lists: {e}"))
                })?,
            };
            build_diagonal(&lambdas)
        }
        "eigen_orthogonal" => build_eigen_orthogonal(),
        "jointly_diagonalizable" => build_jointly_diagonalizable(),
        "anosov" => build_anosov(&AnosovParams {
            radius: cfg.f64_param("radius", 0.05)?,
            seed: cfg.u64_param("seed", 0xC0FFEE)?,
            half_angle: cfg.f64_param("half_angle", DEFAULT_HALF_ANGLE)?,
            verify: cfg.u64_param("verify", 768)? as i64,
        }),
        "elliptic_bounded" | "elliptic_unbounded" => build_elliptic_hyperbolic(&EllipticParams {
            zeta: cfg.f64_param("zeta", GOLDEN_FRACTION)?,
            half_angle: cfg.f64_param("half_angle", DEFAULT_HALF_ANGLE)?,
            search_cap: cfg.u64_param("search_cap", 20_000)?,
            bounded: cfg.name == "elliptic_bounded",
        }),
        "jordan_skew" => build_jordan_skew(),
        "no_cones" => build_no_cones(),
        "delta_basis" => build_delta_basis(cfg.f64_param("delta", 0.01)?),
        other => Err(Error::Config(format!(
            "unknown scenario '{other}'; built-in scenarios: {}",
            BUILTIN.join(", ")
        ))),
    }
}

fn canonical(d: usize) -> Vec<Seed> {
    (0..d).map(|i| Seed::Vector(Vector::unit(d, i))).collect()
}

fn expected(criterion: Criterion, shadowing: Option<bool>, hyp: &str, summary: &str) -> Expected {
    Expected {
        criterion,
        shadowing,
        hyperbolicity: hyp.into(),
        summary: summary.into(),
    }
}

/// Rotation numbers `theta_n` for the half-scaled rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RotationAngles {
    Constant(f64),
    /// `theta_n = frac((n + 1) g)` with `g` the golden fraction.
    GoldenOrbit,
}

/// `S_n = R(2 pi theta_n) / 2`.
pub fn build_rotation(angles: RotationAngles) -> Result<Scenario> {
    let (gen, note) = match angles {
        RotationAngles::Constant(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("rotation number {t} outside (0, 1)")));
            }
            (
                Generator::Constant(Mat::rotation(2.0 * std::f64::consts::PI * t).scale(0.5)),
                format!("theta = {t}"),
            )
        }
        RotationAngles::GoldenOrbit => (
            Generator::func(|n| {
                let t = ((n + 1) as f64 * GOLDEN_FRACTION).rem_euclid(1.0);
                Mat::rotation(2.0 * std::f64::consts::PI * t).scale(0.5)
            }),
            "theta_n = frac((n+1) g)".to_string(),
        ),
    };
    Ok(Scenario {
        name: "rotation".into(),
        sequence: OperatorSequence::new(gen, 2.5, NormSpec::Euclidean)?,
        candidates: vec![canonical(2)],
        expected: expected(
            Criterion::Orthogonal,
            Some(true),
            "contracting",
            "half-scaled rotations, weights 1/2",
        ),
        cones: None,
        notes: vec![note],
    })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// `S_n = diag(lambda_1(n), ..., lambda_d(n))` with each diagonal entry
/// periodic in `n`.
pub fn build_diagonal(lambdas: &[Vec<f64>]) -> Result<Scenario> {
    let d = lambdas.len();
    if d == 0 || d > linalg::MAX_DIM || lambdas.iter().any(|l| l.is_empty()) {
        return Err(Error::Config(format!(
            "need 1 to {} non-empty diagonal entry lists",
            linalg::MAX_DIM
        )));
    }
    let mut bound: f64 = 1.0;
    for &x in lambdas.iter().flatten() {
        if !(x.is_finite() && x != 0.0) {
            return Err(Error::Config(format!(
                "diagonal entry {x} must be finite and non-zero"
            )));
        }
        bound = bound.max(x.abs()).max(1.0 / x.abs());
    }
    let period = lambdas.iter().map(|l| l.len()).fold(1, lcm);
    let mats: Vec<Mat> = (0..period)
        .map(|n| Mat::diag(&lambdas.iter().map(|l| l[n % l.len()]).collect::<Vec<_>>()))
        .collect();
    let all_expand_or_contract = lambdas.iter().all(|l| {
        let g: f64 = l.iter().map(|x| x.abs().ln()).sum::<f64>() / l.len() as f64;
        g.abs() > 1e-3 && l.iter().all(|x| (x.abs().ln() > 0.0) == (g > 0.0))
    });
    Ok(Scenario {
        name: "diagonal".into(),
        sequence: OperatorSequence::new(
            Generator::Periodic(mats),
            bound * 1.01,
            NormSpec::Euclidean,
        )?,
        candidates: vec![canonical(d)],
        expected: expected(
            Criterion::Orthogonal,
            Some(all_expand_or_contract),
            "per coordinate",
            "diagonal matrices, weights are the diagonal moduli",
        ),
        cones: None,
        notes: vec![format!("period {period}")],
    })
}

fn golden_matrix() -> Mat {
    Mat::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap()
}

/// Unit eigenvectors `(1, (sqrt5-1)/2)` and `(1, -(sqrt5+1)/2)` of `[[2,1],[1,1]]`.
pub fn golden_eigenvectors() -> (Vector, Vector) {
    let r5 = 5f64.sqrt();
    let plus = Vector::from_slice(&[1.0, (r5 - 1.0) / 2.0]).unwrap();
    let minus = Vector::from_slice(&[1.0, -(r5 + 1.0) / 2.0]).unwrap();
    (
        linalg::normalize(&plus, NormSpec::Euclidean).unwrap(),
        linalg::normalize(&minus, NormSpec::Euclidean).unwrap(),
    )
}

/// `S_n = [[2,1],[1,1]]` with its orthogonal eigenvectors as basis.
pub fn build_eigen_orthogonal() -> Result<Scenario> {
    let (plus, minus) = golden_eigenvectors();
    Ok(Scenario {
        name: "eigen_orthogonal".into(),
        sequence: OperatorSequence::constant(golden_matrix(), 3.0, NormSpec::Euclidean)?,
        candidates: vec![vec![Seed::Line(plus), Seed::Line(minus)]],
        expected: expected(
            Criterion::Orthogonal,
            Some(true),
            "expanding x contracting",
            "symmetric hyperbolic matrix, weights (3 +- sqrt5)/2",
        ),
        cones: None,
        notes: vec![],
    })
}

/// `S_n = [[2,3],[1,2]]`, whose eigenvectors `(+-sqrt3, 1)` are not orthogonal.
pub fn build_jointly_diagonalizable() -> Result<Scenario> {
    let m = Mat::from_rows(&[&[2.0, 3.0], &[1.0, 2.0]]).unwrap();
    Ok(Scenario {
        name: "jointly_diagonalizable".into(),
        sequence: OperatorSequence::constant(m, 4.0, NormSpec::Euclidean)?,
        candidates: vec![canonical(2)],
        expected: expected(
            Criterion::JointlyDiagonalizable,
            Some(true),
            "expanding x contracting",
            "non-normal hyperbolic matrix, weights 2 +- sqrt3",
        ),
        cones: None,
        notes: vec![],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnosovParams {
    /// Frobenius radius of the perturbation ball around `[[2,1],[1,1]]`.
    pub radius: f64,
    pub seed: u64,
    pub half_angle: f64,
    /// Matrices with `|n| <= verify` are checked against the cones.
    pub verify: i64,
}

impl Default for AnosovParams {
    fn default() -> Self {
        AnosovParams {
            radius: 0.05,
            seed: 0xC0FFEE,
            half_angle: DEFAULT_HALF_ANGLE,
            verify: 768,
        }
    }
}

/// Perturbation of index `n`, drawn uniformly from the ball by rejection
/// from a generator keyed on `(seed, n)`.
fn perturbation(seed: u64, n: i64, radius: f64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    loop {
        let e: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: f64 = e.iter().map(|x| x * x).sum();
        if r2 <= 1.0 {
            return Mat::new(2, e.into_iter().map(|x| x * radius).collect()).unwrap();
        }
    }
}

/// Matrices near `[[2,1],[1,1]]` with `S_0 = Id`; the basis is the pair of
/// limit directions `v-` (backward products) and `v+` (forward products).
pub fn build_anosov(params: &AnosovParams) -> Result<Scenario> {
    if !(params.radius >= 0.0 && params.radius <= 0.5) {
        return Err(Error::Config(format!(
            "perturbation radius {} outside [0, 0.5]",
            params.radius
        )));
    }
    let (plus, minus) = golden_eigenvectors();
    let cplus = Cone2D::new(&plus, params.half_angle)?;
    let cminus = Cone2D::new(&minus, params.half_angle)?;
    let (seed, radius) = (params.seed, params.radius);
    let rule = move |n: i64| {
        if n == 0 {
            Mat::identity(2)
        } else if radius == 0.0 {
            golden_matrix()
        } else {
            golden_matrix().add(&perturbation(seed, n, radius))
        }
    };
    let mut eta = f64::INFINITY;
    let mut bound: f64 = 1.0;
    for n in -params.verify..=params.verify {
        if n == 0 {
            continue;
        }
        let m = rule(n);
        let mi = invert(&m)?;
        if !cone_invariant(&m, &cplus, CONE_MARGIN) {
            return Err(Error::Scenario(format!(
                "S_{n} does not map the expanding cone strictly into itself"
            )));
        }
        if !cone_invariant(&mi, &cminus, CONE_MARGIN) {
            return Err(Error::Scenario(format!(
                "S_{n}^-1 does not map the contracting cone strictly into itself"
            )));
        }
        let e = cone_expansion(&m, &cplus)
            .eta
            .min(cone_expansion(&mi, &cminus).eta);
        if e <= 1.0 {
            return Err(Error::Scenario(format!(
                "S_{n} expands its cones only by {e}"
            )));
        }
        eta = eta.min(e);
        bound = bound
            .max(operator_norm(&m, NormSpec::Euclidean))
            .max(operator_norm(&mi, NormSpec::Euclidean));
    }
    let generator = Generator::func(rule);
    Ok(Scenario {
        name: "anosov".into(),
        sequence: OperatorSequence::new(generator, bound * 1.05, NormSpec::Euclidean)?,
        candidates: vec![vec![Seed::Contracting(minus), Seed::Expanding(plus)]],
        expected: expected(
            Criterion::SubspaceAngle,
            Some(true),
            "contracting x expanding",
            "perturbed hyperbolic matrices preserving a pair of cones",
        ),
        cones: Some(ConeData {
            plus: cplus,
            minus: cminus,
            eta,
        }),
        notes: vec![format!(
            "perturbation radius {radius}, seed {seed:#x}, cones verified on |n| <= {}",
            params.verify
        )],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticParams {
    pub zeta: f64,
    pub half_angle: f64,
    pub search_cap: u64,
    pub bounded: bool,
}

impl Default for EllipticParams {
    fn default() -> Self {
        EllipticParams {
            zeta: GOLDEN_FRACTION,
            half_angle: DEFAULT_HALF_ANGLE,
            search_cap: 20_000,
            bounded: true,
        }
    }
}

fn rotation_power(zeta: f64, q: i64) -> Mat {
    let t = (q as f64 * zeta).rem_euclid(1.0);
    Mat::rotation(2.0 * std::f64::consts::PI * t)
}

/// Return times `q <= cap` of the rotation: `R^q` is within a quarter turn
/// of the identity and both the expanding and the contracting cone
/// conditions hold strictly. Turns near a half are excluded even though
/// they preserve lines, since the runs are meant to approximate `Id`.
pub fn search_return_times(zeta: f64, plus: &Cone2D, minus: &Cone2D, cap: u64) -> Vec<u64> {
    let l = Mat::diag(&[2.0, 0.5]);
    let li = Mat::diag(&[0.5, 2.0]);
    (1..=cap)
        .filter(|&q| {
            let turn = (q as f64 * zeta).rem_euclid(1.0);
            if (0.25..=0.75).contains(&turn) {
                return false;
            }
            let r = rotation_power(zeta, q as i64);
            let ri = rotation_power(zeta, -(q as i64));
            cone_invariant(&r.mul(&l), plus, CONE_MARGIN)
                && cone_invariant(&l.mul(&r), plus, CONE_MARGIN)
                && cone_invariant(&li.mul(&ri), minus, CONE_MARGIN)
                && cone_invariant(&ri.mul(&li), minus, CONE_MARGIN)
        })
        .collect()
}

/// Block layout `L^{n_1} R^{m_1} L^{n_2} R^{m_2} ...` read outward from 0.
struct Blocks {
    /// Last index of each block and whether it is hyperbolic.
    ends: Vec<(i64, bool)>,
}

impl Blocks {
    fn is_hyperbolic(&self, k: i64) -> bool {
        let i = self.ends.partition_point(|&(end, _)| end < k);
        self.ends.get(i).is_none_or(|b| b.1)
    }
}

/// Rotation by `2 pi zeta` and `L = diag(2, 1/2)` interleaved with
/// `S_0 = Id` and the same layout on both sides of 0.
pub fn build_elliptic_hyperbolic(params: &EllipticParams) -> Result<Scenario> {
    let x = Vector::unit(2, 0);
    let y = Vector::unit(2, 1);
    let plus = Cone2D::new(&x, params.half_angle)?;
    let minus = Cone2D::new(&y, params.half_angle)?;
    let qs = search_return_times(params.zeta, &plus, &minus, params.search_cap);
    if qs.is_empty() {
        return Err(Error::Scenario(format!(
            "no admissible return time up to {}",
            params.search_cap
        )));
    }
    let q1 = qs[0] as i64;
    // blocks long enough for every frame horizon
    const REACH: i64 = (1 << 21) + (1 << 16);
    let mut ends = Vec::new();
    let mut pos = 0i64;
    let mut i = 0usize;
    while pos < REACH {
        pos += 1;
        ends.push((pos, true));
        let m = if params.bounded {
            q1
        } else {
            *qs.get(i).ok_or_else(|| {
                Error::Scenario(format!(
                    "only {} admissible return times up to {}",
                    qs.len(),
                    params.search_cap
                ))
            })? as i64
        };
        pos += m;
        ends.push((pos, false));
        i += 1;
    }
    let blocks = Arc::new(Blocks { ends });
    let zeta = params.zeta;
    let r = Mat::rotation(2.0 * std::f64::consts::PI * zeta);
    let l = Mat::diag(&[2.0, 0.5]);
    let b2 = Arc::clone(&blocks);
    let rule = move |n: i64| {
        if n == 0 {
            Mat::identity(2)
        } else if b2.is_hyperbolic(n.abs()) {
            l.clone()
        } else {
            r.clone()
        }
    };
    let eta = cone_expansion(&Mat::diag(&[2.0, 0.5]), &plus).eta;
    let shown: Vec<u64> = qs.iter().copied().take(8).collect();
    let mut notes = vec![
        format!("admissible return times: {shown:?}"),
        format!("rotation number {zeta} (finite-precision stand-in for an irrational)"),
    ];
    let (exp, summary) = if params.bounded {
        notes.push(format!("gap bound M = {}", q1 + 1));
        (
            Some(true),
            "hyperbolic and elliptic blocks with bounded rotation runs",
        )
    } else {
        (
            Some(false),
            "hyperbolic and elliptic blocks with unbounded rotation runs",
        )
    };
    Ok(Scenario {
        name: if params.bounded {
            "elliptic_bounded"
        } else {
            "elliptic_unbounded"
        }
        .into(),
        sequence: OperatorSequence::new(Generator::func(rule), 2.5, NormSpec::Euclidean)?,
        candidates: vec![vec![Seed::Contracting(y), Seed::Expanding(x)]],
        expected: expected(
            Criterion::SubspaceAngle,
            exp,
            "generalized hyperbolic iff bounded",
            summary,
        ),
        cones: Some(ConeData { plus, minus, eta }),
        notes,
    })
}

/// Gap bound `M` (one more than the longest rotation run) of the bounded
/// layout.
pub fn elliptic_gap_bound(s: &Scenario) -> Option<i64> {
    s.notes.iter().find_map(|n| {
        n.strip_prefix("gap bound M = ")
            .and_then(|v| v.parse().ok())
    })
}

/// `S_n = [[1,1],[0,1]]` with the max-norm on the fibers.
pub fn build_jordan_skew() -> Result<Scenario> {
    let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
    Ok(Scenario {
        name: "jordan_skew".into(),
        sequence: OperatorSequence::constant(j, 2.5, NormSpec::Max)?,
        candidates: vec![canonical(2)],
        expected: expected(
            Criterion::None,
            None,
            "not classified",
            "Jordan block: unbounded projections, skew product",
        ),
        cones: None,
        notes: vec![],
    })
}

/// Printed weights of the seed `(0,1)` under the Jordan block.
pub fn jordan_weight(n: i64) -> f64 {
    match n {
        0 | 1 => 1.0,
        n if n >= 2 => (n - 1) as f64 / n as f64,
        n => (n.abs() + 1) as f64 / n.abs() as f64,
    }
}

/// `max |phi(sigma x) - skew(phi x)|` with unit weights.
pub fn jordan_skew_residual(s: &OperatorSequence, probes: &[SeqPoint]) -> Result<f64> {
    let ones = WeightSeq::constant(1.0);
    let mut worst: f64 = 0.0;
    for x in probes {
        let (a, b) = coordinate_split(&shift_apply(s, x)?)?;
        let (xs, ys) = coordinate_split(x)?;
        let (c, d) = skew_apply(&ones, (&xs, &ys))?;
        worst = worst.max(max_distance(&a, &c)).max(max_distance(&b, &d));
    }
    Ok(worst)
}

/// `max |sigma^k x - (x_{n+k} + k y_{n+k}, y_{n+k})|` over `k` in `0..=k_max`.
pub fn jordan_iterate_residual(s: &OperatorSequence, x: &SeqPoint, k_max: i64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut cur = x.clone();
    for k in 0..=k_max {
        if k > 0 {
            cur = shift_apply(s, &cur)?;
        }
        let w = cur.window();
        for n in w.iter() {
            let src = x.get(n + k);
            let expect = [src[0] + k as f64 * src[1], src[1]];
            let got = cur.get(n);
            worst = worst
                .max((got[0] - expect[0]).abs())
                .max((got[1] - expect[1]).abs());
        }
    }
    Ok(worst)
}

/// `T = diag(2, 1/2)` at odd indices and its inverse at even ones.
pub fn build_no_cones() -> Result<Scenario> {
    let t = Mat::diag(&[2.0, 0.5]);
    let ti = Mat::diag(&[0.5, 2.0]);
    Ok(Scenario {
        name: "no_cones".into(),
        sequence: OperatorSequence::new(
            Generator::Periodic(vec![ti, t]),
            2.5,
            NormSpec::Euclidean,
        )?,
        candidates: vec![canonical(2)],
        expected: expected(
            Criterion::Orthogonal,
            Some(false),
            "not hyperbolic",
            "alternating hyperbolic matrix and inverse",
        ),
        cones: None,
        notes: vec![],
    })
}

/// Gram matrix with pairwise cosines `-1/2`, `-1/2 + delta`, `-1/2 + delta`.
pub fn delta_gram(delta: f64) -> Mat {
    let c = -0.5 + delta;
    Mat::from_rows(&[&[1.0, -0.5, c], &[-0.5, 1.0, c], &[c, c, 1.0]]).unwrap()
}

/// Identity sequence in dimension 3 with a nearly degenerate unit basis.
pub fn build_delta_basis(delta: f64) -> Result<Scenario> {
    if !(delta > 0.0 && delta <= 0.05) {
        return Err(Error::Config(format!("delta = {delta} outside (0, 0.05]")));
    }
    let cols = linalg::cholesky_columns(&delta_gram(delta))
        .map_err(|e| Error::Scenario(format!("cosine triple is infeasible: {e}")))?;
    Ok(Scenario {
        name: "delta_basis".into(),
        sequence: OperatorSequence::constant(Mat::identity(3), 1.5, NormSpec::Euclidean)?,
        candidates: vec![cols.into_iter().map(Seed::Vector).collect()],
        expected: expected(
            Criterion::SubspaceAngle,
            Some(false),
            "not hyperbolic",
            "identity with a nearly degenerate basis",
        ),
        cones: None,
        notes: vec![format!("delta = {delta}")],
    })
}

/// Configs of every built-in scenario with default parameters.
pub fn catalog() -> Vec<ScenarioConfig> {
    BUILTIN.iter().map(|n| ScenarioConfig::named(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    #[test]
    fn cone_invariance_examples() {
        let c = Cone2D::new(&v(&[1.0, 0.0]), 0.3).unwrap();
        assert!(!cone_invariant(&Mat::identity(2), &c, CONE_MARGIN));
        assert!(!cone_invariant(
            &Mat::rotation(std::f64::consts::FRAC_PI_2),
            &c,
            CONE_MARGIN
        ));
        let (plus, _) = golden_eigenvectors();
        let cp = Cone2D::new(&plus, 0.3).unwrap();
        assert!(cone_invariant(&golden_matrix(), &cp, CONE_MARGIN));
    }

    #[test]
    fn cone_expansion_examples() {
        let c = Cone2D::new(&v(&[1.0, 0.0]), 0.01).unwrap();
        assert!((cone_expansion(&Mat::identity(2), &c).sampled - 1.0).abs() < 1e-12);
        let e = cone_expansion(&Mat::diag(&[2.0, 0.5]), &c);
        assert!(e.sampled > 1.999 && e.sampled <= 2.0 && e.eta <= e.sampled);
    }

    #[test]
    fn first_return_time() {
        let plus = Cone2D::new(&v(&[1.0, 0.0]), DEFAULT_HALF_ANGLE).unwrap();
        let minus = Cone2D::new(&v(&[0.0, 1.0]), DEFAULT_HALF_ANGLE).unwrap();
        let qs = search_return_times(GOLDEN_FRACTION, &plus, &minus, 200);
        assert_eq!(qs[0], 21);
        assert!(!qs.contains(&13) && !qs.contains(&4));
        assert_eq!(&qs[..3], &[21, 34, 55]);
        assert!(qs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn jordan_formula_edges() {
        assert_eq!(jordan_weight(0), 1.0);
        assert_eq!(jordan_weight(2), 0.5);
        assert_eq!(jordan_weight(-1), 2.0);
    }

    #[test]
    fn unknown_name_lists_builtins() {
        let err = build(&ScenarioConfig::named("rotaton")).unwrap_err();
        assert!(err.to_string().contains("no_cones"));
    }

    #[test]
    fn delta_gram_sum_vector() {
        let cols = linalg::cholesky_columns(&delta_gram(0.01)).unwrap();
        let x0 = cols[0].add(&cols[1]).add(&cols[2]);
        assert!((x0.dot(&x0) - 0.04).abs() < 1e-12);
    }
}
