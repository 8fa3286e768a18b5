//! Deciding whether a shift is conjugate to a product of weighted backward
//! shifts, and building the conjugacy.
//!
//! A seed basis `E` is certified when the coordinate projections onto the
//! frames `E_n = {e_n(b)}` are uniformly bounded. The criteria are tried in
//! order of strength: orthogonal frames, the pairwise cosine test, the angle
//! to the complementary span, and an explicit projection bound. Joint
//! diagonalization is the fallback when no candidate basis is certified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, apply_unchecked, coordinates_in_basis, cos_angle, invert, projection_operator_norm,
    vnorm, Mat, NormSpec, Vector,
};
use crate::opseq::{Frame, Generator, IndexRange, OperatorSequence, Seed};
use crate::seqspace::{max_distance, shift_apply, wshift_apply, SeqPoint, WeightSeq};

/// Seed for the probe points used in residual checks.
pub const PROBE_SEED: u64 = 0xC0FFEE;
/// Number of probe points per scenario.
pub const PROBE_COUNT: usize = 100;
/// Allowed relative growth of a bound between the half window and the full
/// window before the bound is considered unstable.
pub const TREND_TOL: f64 = 0.25;
/// Cosines at or below this count as orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-9;
/// Minimum slack `1 - (d-1) gamma` for the cosine test; the boundary case
/// must not pass on rounding.
pub const SLACK_TOL: f64 = 1e-9;

/// Frames of every seed in a basis over a common window.
#[derive(Clone, Debug)]
pub struct Frames {
    pub seeds: Vec<Seed>,
    pub frames: Vec<Frame>,
    pub window: IndexRange,
    pub norm: NormSpec,
}

impl Frames {
    pub fn compute(s: &OperatorSequence, seeds: &[Seed], window: IndexRange) -> Result<Frames> {
        if seeds.len() != s.dim() {
            return Err(Error::Dimension(format!(
                "{} seeds in dimension {}",
                seeds.len(),
                s.dim()
            )));
        }
        let frames = seeds
            .iter()
            .map(|b| Frame::compute(s, b, window))
            .collect::<Result<Vec<_>>>()?;
        let window = frames[0].window;
        Ok(Frames {
            seeds: seeds.to_vec(),
            frames,
            window,
            norm: s.norm(),
        })
    }

    pub fn dim(&self) -> usize {
        self.frames.len()
    }

    /// `E_n`.
    pub fn basis_at(&self, n: i64) -> Vec<Vector> {
        self.frames.iter().map(|f| f.vector(n).clone()).collect()
    }

    /// Weight sequence of seed `b`, readable on the frame window.
    pub fn weight_seq(&self, b: usize, band: f64) -> WeightSeq {
        WeightSeq::table(self.window.lo, self.frames[b].weights().to_vec(), band)
    }

    fn check_window(&self, w: IndexRange) -> Result<()> {
        if w.lo < self.window.lo || w.hi > self.window.hi {
            return Err(Error::Config(format!(
                "window {w:?} exceeds frame window {:?}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Which classification result is decisive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Orthogonal,
    GammaAngle,
    SubspaceAngle,
    ExplicitBound,
    JointlyDiagonalizable,
    None,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Orthogonal => "orthogonal",
            Criterion::GammaAngle => "gamma_angle",
            Criterion::SubspaceAngle => "subspace_angle",
            Criterion::ExplicitBound => "explicit_bound",
            Criterion::JointlyDiagonalizable => "jointly_diagonalizable",
            Criterion::None => "none",
        }
    }
}

/// `(all off-diagonal |cos| <= tol, largest |cos|)` over the window.
pub fn is_orthogonal_frame(frames: &Frames, window: IndexRange, tol: f64) -> Result<(bool, f64)> {
    let g = max_offdiag_cos(frames, window)?;
    Ok((g <= tol, g))
}

fn max_offdiag_cos(frames: &Frames, window: IndexRange) -> Result<f64> {
    frames.check_window(window)?;
    let d = frames.dim();
    let mut worst: f64 = 0.0;
    for n in window.iter() {
        let e = frames.basis_at(n);
        for i in 0..d {
            for j in i + 1..d {
                worst = worst.max(cos_angle(&e[i], &e[j])?.abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTest {
    pub pass: bool,
    pub gamma: f64,
    /// `1 / sqrt(1 - (d-1) gamma)` when the test passes.
    pub bound: Option<f64>,
}

/// Pairwise cosine test: passes when every `|cos|` stays below `1/(d-1)`.
pub fn gamma_angle_test(frames: &Frames, window: IndexRange) -> Result<GammaTest> {
    let d = frames.dim();
    if d < 2 {
        return Ok(GammaTest {
            pass: true,
            gamma: 0.0,
            bound: Some(1.0),
        });
    }
    let gamma = max_offdiag_cos(frames, window)?;
    let slack = 1.0 - (d as f64 - 1.0) * gamma;
    let pass = slack > SLACK_TOL;
    Ok(GammaTest {
        pass,
        gamma,
        bound: pass.then(|| 1.0 / slack.sqrt()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleTest {
    pub pass: bool,
    /// Infimum over indices and seeds of the angle between a frame vector
    /// and the span of the others, in radians.
    pub inf_angle: f64,
    /// `1 - |cos|` of that angle.
    pub beta: f64,
    /// `1 / sqrt(2 beta - beta^2)`.
    pub bound: Option<f64>,
}

/// Angle between a unit vector and the span of `others` (Euclidean).
pub fn angle_to_span(v: &Vector, others: &[Vector]) -> Result<f64> {
    if others.is_empty() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    // orthonormalize the complementary family by modified Gram-Schmidt
    let mut q: Vec<Vector> = Vec::new();
    for o in others {
        let mut w = o.clone();
        for b in &q {
            w = w.axpy(-w.dot(b), b);
        }
        let r = vnorm(&w, NormSpec::Euclidean);
        if r <= 1e-14 * vnorm(o, NormSpec::Euclidean) {
            return Err(Error::DegenerateBasis(0.0));
        }
        q.push(w.scale(1.0 / r));
    }
    let u = linalg::normalize(v, NormSpec::Euclidean)?;
    let mut perp = u.clone();
    for b in &q {
        perp = perp.axpy(-u.dot(b), b);
    }
    let sin = vnorm(&perp, NormSpec::Euclidean).min(1.0);
    let cos = vnorm(&u.sub(&perp), NormSpec::Euclidean).min(1.0);
    Ok(sin.atan2(cos))
}

/// Complementary-span angle test.
pub fn subspace_angle_test(frames: &Frames, window: IndexRange) -> Result<AngleTest> {
    frames.check_window(window)?;
    let d = frames.dim();
    let mut inf = std::f64::consts::FRAC_PI_2;
    for n in window.iter() {
        let e = frames.basis_at(n);
        for i in 0..d {
            let others: Vec<Vector> = (0..d).filter(|&j| j != i).map(|j| e[j].clone()).collect();
            let a = angle_to_span(&e[i], &others).map_err(|_| Error::DegenerateFrame {
                index: n,
                reason: "frame vectors are linearly dependent".into(),
            })?;
            inf = inf.min(a);
        }
    }
    let beta = 1.0 - inf.cos().abs();
    let pass = inf > 1e-9;
    let bound = pass.then(|| 1.0 / (2.0 * beta - beta * beta).sqrt());
    Ok(AngleTest {
        pass,
        inf_angle: inf,
        beta,
        bound,
    })
}

/// Sup over the window and the basis of the coordinate-projection norms.
pub fn projection_bound(frames: &Frames, window: IndexRange) -> Result<f64> {
    frames.check_window(window)?;
    let mut sup: f64 = 0.0;
    for n in window.iter() {
        let e = frames.basis_at(n);
        for b in 0..e.len() {
            let p = projection_operator_norm(b, &e, frames.norm).map_err(|err| {
                Error::DegenerateFrame {
                    index: n,
                    reason: err.to_string(),
                }
            })?;
            sup = sup.max(p);
        }
    }
    Ok(sup)
}

/// `C^p d^{p-1}` for `p > 1` and `C` for `p = 1`.
pub fn kp_bound(c: f64, d: usize, p: f64) -> f64 {
    if p == 1.0 {
        c
    } else {
        c.powf(p) * (d as f64).powf(p - 1.0)
    }
}

/// The exponent variant `C^p d^{p(p-1)}`, kept for comparison in reports.
pub fn kp_bound_alternative(c: f64, d: usize, p: f64) -> f64 {
    if p == 1.0 {
        c
    } else {
        c.powf(p) * (d as f64).powf(p * (p - 1.0))
    }
}

/// Result of a joint diagonalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDiagonalization {
    /// Columns are the common eigenvectors (Euclidean unit length).
    pub basis_change: Mat,
    /// Eigenvalues at the index used to build the basis.
    pub reference_eigenvalues: Vec<f64>,
    pub reference_index: i64,
    /// Max over the window of `|| L^{-1} S_n L - diag ||`.
    pub offdiag_residual: f64,
}

impl JointDiagonalization {
    /// The seeds spanning the common eigenlines.
    pub fn seeds(&self) -> Vec<Seed> {
        (0..self.basis_change.dim())
            .map(|j| Seed::Line(self.basis_change.column(j)))
            .collect()
    }

    /// `D_n = L^{-1} S_n L` with off-diagonal entries dropped.
    pub fn diagonal_sequence(&self, s: &OperatorSequence) -> Result<OperatorSequence> {
        let l = self.basis_change.clone();
        let li = invert(&l)?;
        let inner = s.clone();
        let g = Generator::func(move |n| {
            let m = li.mul(&inner.get(n)).mul(&l);
            Mat::diag(&(0..m.dim()).map(|i| m.get(i, i)).collect::<Vec<_>>())
        });
        OperatorSequence::new(g, s.bound() * cond(&self.basis_change), s.norm())
    }

    /// Max over the window of `|| H S_n - D_n H ||` with `H = L^{-1}`.
    pub fn conjugacy_residual(&self, s: &OperatorSequence, window: IndexRange) -> Result<f64> {
        let d = self.diagonal_sequence(s)?;
        let h = invert(&self.basis_change)?;
        Ok(window
            .iter()
            .map(|n| h.mul(&s.get(n)).sub(&d.get(n).mul(&h)).max_abs())
            .fold(0.0, f64::max))
    }
}

fn cond(m: &Mat) -> f64 {
    let inv = invert(m)
        .map(|i| linalg::operator_norm(&i, NormSpec::Euclidean))
        .unwrap_or(f64::INFINITY);
    (linalg::operator_norm(m, NormSpec::Euclidean) * inv).max(1.0)
}

/// Looks for one invertible `L` with `L^{-1} S_n L` diagonal on the window.
pub fn joint_diagonalization(
    s: &OperatorSequence,
    window: IndexRange,
    tol: f64,
) -> Option<JointDiagonalization> {
    let d = s.dim();
    if window.iter().all(|n| s.get(n).is_diagonal(tol)) {
        return Some(JointDiagonalization {
            basis_change: Mat::identity(d),
            reference_eigenvalues: (0..d).map(|i| s.get(window.lo).get(i, i)).collect(),
            reference_index: window.lo,
            offdiag_residual: window
                .iter()
                .map(|n| offdiag(&s.get(n)))
                .fold(0.0, f64::max),
        });
    }
    // the first index in the window whose matrix has a simple real spectrum
    for n in window.iter() {
        let Some((vals, l)) = real_eigenbasis(&s.get(n), tol) else {
            continue;
        };
        let li = invert(&l).ok()?;
        let mut resid: f64 = 0.0;
        for k in window.iter() {
            let m = s.get(k);
            let c = li.mul(&m).mul(&l);
            resid = resid.max(offdiag(&c) / m.max_abs().max(1e-300));
        }
        if resid > tol {
            return None;
        }
        return Some(JointDiagonalization {
            basis_change: l,
            reference_eigenvalues: vals,
            reference_index: n,
            offdiag_residual: resid,
        });
    }
    None
}

fn offdiag(m: &Mat) -> f64 {
    let d = m.dim();
    (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m.get(i, j).abs())
        .fold(0.0, f64::max)
}

/// Real eigenvalues in decreasing order with unit eigenvectors as columns,
/// when the spectrum is real and simple.
fn real_eigenbasis(m: &Mat, tol: f64) -> Option<(Vec<f64>, Mat)> {
    let d = m.dim();
    let a = m.to_nalgebra();
    let scale = m.max_abs().max(1e-300);
    let mut vals: Vec<f64> = Vec::with_capacity(d);
    for z in a.complex_eigenvalues().iter() {
        if z.im.abs() > tol * scale {
            return None;
        }
        vals.push(z.re);
    }
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    for w in vals.windows(2) {
        if (w[0] - w[1]).abs() <= tol.sqrt() * scale {
            return None;
        }
    }
    let mut cols = Vec::with_capacity(d);
    for &lam in &vals {
        let shifted = &a - nalgebra::DMatrix::<f64>::identity(d, d) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t?;
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())?;
        let mut v: Vec<f64> = vt.row(k).iter().copied().collect();
        // fix the sign so the largest component is positive
        let big = v
            .iter()
            .copied()
            .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        cols.push(linalg::normalize(&Vector::new(v).ok()?, NormSpec::Euclidean).ok()?);
    }
    Some((vals, Mat::from_columns(&cols).ok()?))
}

/// How the "for every index" claim is backed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    /// Period exhaustion: every frame is determined by one period.
    Exact,
    /// Certified on the finite window only.
    WindowCertified,
    NotCertified,
}

/// Numeric evidence behind a classification verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub max_offdiag_cos: Option<f64>,
    pub gamma: Option<GammaTest>,
    pub subspace_angle: Option<AngleTest>,
    pub projection_bound: Option<f64>,
    pub projection_bound_half_window: Option<f64>,
    pub trend_ratio: Option<f64>,
    pub joint_diagonalization: Option<JointDiagonalization>,
    /// `C^p d^{p-1}` from the projection bound.
    pub kp: Option<f64>,
    /// `C^p d^{p(p-1)}` for comparison.
    pub kp_alternative: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub factor: Option<f64>,
    pub conjugacy: Option<f64>,
    pub roundtrip: Option<f64>,
    pub surjectivity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationVerdict {
    pub criterion: Criterion,
    pub certification: Certification,
    pub certificates: Certificates,
    pub window: IndexRange,
    pub residuals: Residuals,
    /// The basis the verdict refers to.
    pub basis: Vec<Seed>,
    /// Every criterion that passed, strongest first.
    pub passed: Vec<Criterion>,
    /// Sequence-space exponent the bounds refer to.
    pub p: f64,
}

impl ClassificationVerdict {
    pub fn certified(&self) -> bool {
        self.criterion != Criterion::None
    }
}

#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub window: IndexRange,
    pub orthogonal_tol: f64,
    pub trend_tol: f64,
    pub p: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            window: IndexRange::symmetric(100),
            orthogonal_tol: ORTHOGONAL_TOL,
            trend_tol: TREND_TOL,
            p: 2.0,
        }
    }
}

fn half(w: IndexRange) -> IndexRange {
    IndexRange {
        lo: w.lo / 2,
        hi: w.hi / 2,
    }
}

/// Evaluates every criterion on one basis.
pub fn evaluate_basis(
    s: &OperatorSequence,
    seeds: &[Seed],
    opts: &ClassifyOptions,
) -> Result<ClassificationVerdict> {
    let w = opts.window;
    let frames = Frames::compute(s, seeds, w)?;
    let mut cert = Certificates::default();
    let mut passed = Vec::new();

    let pb = projection_bound(&frames, w);
    let pb_half = projection_bound(&frames, half(w));
    let (pb, pb_half) = match (pb, pb_half) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            cert.failure = Some(e.to_string());
            return Ok(ClassificationVerdict {
                criterion: Criterion::None,
                certification: Certification::NotCertified,
                certificates: cert,
                window: w,
                residuals: Residuals::default(),
                basis: seeds.to_vec(),
                passed,
                p: opts.p,
            });
        }
    };
    let trend = pb / pb_half;
    let stable = trend <= 1.0 + opts.trend_tol;
    cert.projection_bound = Some(pb);
    cert.projection_bound_half_window = Some(pb_half);
    cert.trend_ratio = Some(trend);

    let euclid = s.norm().is_euclidean();
    if euclid {
        let (orth, worst) = is_orthogonal_frame(&frames, w, opts.orthogonal_tol)?;
        cert.max_offdiag_cos = Some(worst);
        if orth {
            passed.push(Criterion::Orthogonal);
        }
        let g = gamma_angle_test(&frames, w)?;
        let g_half = gamma_angle_test(&frames, half(w))?;
        if g.pass && stable && g_stable(&g, &g_half, opts.trend_tol) {
            passed.push(Criterion::GammaAngle);
        }
        cert.gamma = Some(g);
        let a = subspace_angle_test(&frames, w)?;
        let a_half = subspace_angle_test(&frames, half(w))?;
        if a.pass && stable && a_stable(&a, &a_half, opts.trend_tol) {
            passed.push(Criterion::SubspaceAngle);
        }
        cert.subspace_angle = Some(a);
    }
    if stable && pb.is_finite() {
        passed.push(Criterion::ExplicitBound);
    }
    let criterion = passed.first().copied().unwrap_or(Criterion::None);
    if criterion != Criterion::None {
        cert.kp = Some(kp_bound(pb, s.dim(), opts.p));
        cert.kp_alternative = Some(kp_bound_alternative(pb, s.dim(), opts.p));
    } else {
        cert.failure = Some(format!(
            "projection bound grows from {pb_half:.6e} to {pb:.6e} between the half and full window"
        ));
    }
    let certification = match criterion {
        Criterion::None => Certification::NotCertified,
        _ if exact_by_period(s, seeds, criterion) => Certification::Exact,
        _ => Certification::WindowCertified,
    };
    Ok(ClassificationVerdict {
        criterion,
        certification,
        certificates: cert,
        window: w,
        residuals: Residuals::default(),
        basis: seeds.to_vec(),
        passed,
        p: opts.p,
    })
}

fn g_stable(full: &GammaTest, half: &GammaTest, tol: f64) -> bool {
    match (full.bound, half.bound) {
        (Some(a), Some(b)) => a <= b * (1.0 + tol),
        _ => false,
    }
}

fn a_stable(full: &AngleTest, half: &AngleTest, tol: f64) -> bool {
    match (full.bound, half.bound) {
        (Some(a), Some(b)) => a <= b * (1.0 + tol),
        _ => false,
    }
}

/// Periodic generators whose matrices are all conformal (orthogonality of
/// frames is preserved) or all fix every basis line have frames determined
/// by one period.
fn exact_by_period(s: &OperatorSequence, seeds: &[Seed], criterion: Criterion) -> bool {
    let Some(period) = s.generator().period() else {
        return false;
    };
    let mats: Vec<Mat> = (0..period as i64).map(|n| s.get(n)).collect();
    let conformal = mats.iter().all(|m| {
        let g = m.transpose().mul(m);
        let c = g.get(0, 0);
        g.sub(&Mat::identity(m.dim()).scale(c)).max_abs() <= 1e-12 * c.abs()
    });
    let lines_fixed = seeds.iter().all(|b| {
        let u = b.hint();
        mats.iter().all(|m| {
            let img = apply_unchecked(m, u);
            let along = u.scale(img.dot(u) / u.dot(u));
            img.sub(&along).max_abs() <= 1e-12 * img.max_abs().max(1e-300)
        })
    });
    (criterion == Criterion::Orthogonal && conformal) || lines_fixed
}

/// Runs every candidate basis, then joint diagonalization, and returns the
/// strongest verdict.
pub fn classify(
    s: &OperatorSequence,
    candidates: &[Vec<Seed>],
    opts: &ClassifyOptions,
) -> Result<ClassificationVerdict> {
    let mut best: Option<ClassificationVerdict> = None;
    for seeds in candidates {
        let v = evaluate_basis(s, seeds, opts)?;
        let better = match &best {
            None => true,
            Some(b) => v.criterion < b.criterion,
        };
        if better {
            best = Some(v);
        }
    }
    if best.as_ref().is_none_or(|b| !b.certified()) {
        if let Some(jd) = joint_diagonalization(s, opts.window, 1e-9) {
            let seeds = jd.seeds();
            let mut v = evaluate_basis(s, &seeds, opts)?;
            if v.certified() {
                v.passed.insert(0, Criterion::JointlyDiagonalizable);
                v.criterion = Criterion::JointlyDiagonalizable;
                v.certificates.joint_diagonalization = Some(jd);
                best = Some(v);
            }
        }
    }
    best.ok_or_else(|| Error::Config("no candidate basis".into()))
}

/// The factor maps, the coordinate map `I` and its inverse.
#[derive(Clone, Debug)]
pub struct ConjugacyBundle {
    pub frames: Frames,
    pub weights: Vec<WeightSeq>,
    /// Certified bound on the coordinate projections.
    pub projection_bound: f64,
    pub kp: f64,
    pub p: f64,
}

/// Builds the conjugacy for a certified verdict; frames are evaluated on
/// `frame_window`.
pub fn build_conjugacy(
    s: &OperatorSequence,
    verdict: &ClassificationVerdict,
    frame_window: IndexRange,
    p: f64,
) -> Result<ConjugacyBundle> {
    if !verdict.certified() {
        return Err(Error::Refused(
            "no criterion certifies bounded projections for any candidate basis".into(),
        ));
    }
    let frames = Frames::compute(s, &verdict.basis, frame_window)?;
    let weights = (0..frames.dim())
        .map(|b| frames.weight_seq(b, s.bound()))
        .collect();
    let pb = verdict
        .certificates
        .projection_bound
        .unwrap_or(f64::INFINITY);
    Ok(ConjugacyBundle {
        weights,
        projection_bound: pb,
        kp: kp_bound(pb, s.dim(), p),
        p,
        frames,
    })
}

impl ConjugacyBundle {
    pub fn dim(&self) -> usize {
        self.frames.dim()
    }

    fn coords(&self, n: i64, x: &Vector) -> Result<Vec<f64>> {
        if !self.frames.window.contains(n) {
            return Err(Error::Config(format!(
                "index {n} outside frame window {:?}",
                self.frames.window
            )));
        }
        coordinates_in_basis(x, &self.frames.basis_at(n))
    }

    /// `Gamma_b`: the `b`-th frame coordinate at every index.
    pub fn factor_map(&self, b: usize, pt: &SeqPoint) -> Result<SeqPoint> {
        let w = pt.window();
        let mut vals = Vec::with_capacity(w.len());
        for (n, x) in pt.entries() {
            vals.push(if x.is_zero() {
                0.0
            } else {
                self.coords(n, x)?[b]
            });
        }
        SeqPoint::scalar(w.lo, &vals, pt.p())
    }

    /// `I`: all factor maps at once.
    pub fn forward(&self, pt: &SeqPoint) -> Result<Vec<SeqPoint>> {
        let w = pt.window();
        let d = self.dim();
        let mut cols = vec![Vec::with_capacity(w.len()); d];
        for (n, x) in pt.entries() {
            let a = if x.is_zero() {
                vec![0.0; d]
            } else {
                self.coords(n, x)?
            };
            for (b, c) in cols.iter_mut().enumerate() {
                c.push(a[b]);
            }
        }
        cols.into_iter()
            .map(|c| SeqPoint::scalar(w.lo, &c, pt.p()))
            .collect()
    }

    /// `I^{-1}`: fibers rebuilt as `sum_b y_{b,n} e_n(b)`.
    pub fn inverse(&self, ys: &[SeqPoint]) -> Result<SeqPoint> {
        if ys.len() != self.dim() {
            return Err(Error::Dimension("wrong number of factor sequences".into()));
        }
        let w = ys
            .iter()
            .skip(1)
            .fold(ys[0].window(), |acc, y| acc.union(&y.window()));
        let mut out = SeqPoint::zeros(w, self.dim(), ys[0].p());
        for n in w.iter() {
            if !self.frames.window.contains(n) {
                if ys.iter().all(|y| y.scalar_at(n) == 0.0) {
                    continue;
                }
                return Err(Error::Config(format!("index {n} outside frame window")));
            }
            let mut acc = Vector::zeros(self.dim());
            for (b, y) in ys.iter().enumerate() {
                acc = acc.axpy(y.scalar_at(n), self.frames.frames[b].vector(n));
            }
            out.set(n, acc);
        }
        Ok(out)
    }

    /// `(t_n e_n(b))`, the preimage witnessing surjectivity of `Gamma_b`.
    pub fn lift(&self, b: usize, t: &SeqPoint) -> Result<SeqPoint> {
        let w = t.window();
        let mut out = SeqPoint::zeros(w, self.dim(), t.p());
        for n in w.iter() {
            if !self.frames.window.contains(n) {
                return Err(Error::Config(format!("index {n} outside frame window")));
            }
            out.set(n, self.frames.frames[b].vector(n).scale(t.scalar_at(n)));
        }
        Ok(out)
    }
}

/// Pseudo-random finitely supported probe points inside `window`.
pub fn probe_points(
    dim: usize,
    window: IndexRange,
    count: usize,
    p: f64,
    seed: u64,
) -> Vec<SeqPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=window.len().min(12)) as i64;
            let lo = rng.gen_range(window.lo..=window.hi - len + 1);
            let entries = (0..len)
                .map(|_| Vector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            SeqPoint::from_entries(lo, entries, p).unwrap()
        })
        .collect()
}

/// Factor, conjugacy, round-trip and surjectivity residuals on probe points.
pub fn verify_conjugacy(
    s: &OperatorSequence,
    bundle: &ConjugacyBundle,
    probes: &[SeqPoint],
) -> Result<Residuals> {
    let mut factor: f64 = 0.0;
    let mut conj: f64 = 0.0;
    let mut round: f64 = 0.0;
    let mut surj: f64 = 0.0;
    for pt in probes {
        let shifted = shift_apply(s, pt)?;
        let lhs = bundle.forward(&shifted)?;
        let coords = bundle.forward(pt)?;
        let mut total = 0.0;
        for b in 0..bundle.dim() {
            let rhs = wshift_apply(&bundle.weights[b], &coords[b])?;
            let r = max_distance(&lhs[b], &rhs);
            factor = factor.max(r);
            total += r;
            let back = bundle.factor_map(b, &bundle.lift(b, &coords[b])?)?;
            surj = surj.max(max_distance(&back, &coords[b]));
        }
        conj = conj.max(total);
        round = round.max(max_distance(&bundle.inverse(&coords)?, pt));
    }
    Ok(Residuals {
        factor: Some(factor),
        conjugacy: Some(conj),
        roundtrip: Some(round),
        surjectivity: Some(surj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    fn canonical(d: usize) -> Vec<Seed> {
        (0..d).map(|i| Seed::Vector(Vector::unit(d, i))).collect()
    }

    #[test]
    fn kp_examples() {
        assert_eq!(kp_bound(3.0, 4, 1.0), 3.0);
        assert_eq!(kp_bound(1.0, 1, 2.5), 1.0);
        assert_eq!(kp_bound(2.0, 2, 2.0), 8.0);
        assert_eq!(kp_bound_alternative(2.0, 2, 2.0), 16.0);
    }

    #[test]
    fn diagonal_is_orthogonal_and_exact() {
        let s = OperatorSequence::new(
            Generator::Periodic(vec![Mat::diag(&[2.0, 0.5]), Mat::diag(&[0.5, 2.0])]),
            3.0,
            NormSpec::Euclidean,
        )
        .unwrap();
        let v = classify(&s, &[canonical(2)], &ClassifyOptions::default()).unwrap();
        assert_eq!(v.criterion, Criterion::Orthogonal);
        assert_eq!(v.certification, Certification::Exact);
    }

    #[test]
    fn gamma_formula() {
        let g =
            Mat::from_rows(&[&[1.0, 0.49, 0.49], &[0.49, 1.0, 0.49], &[0.49, 0.49, 1.0]]).unwrap();
        let cols = linalg::cholesky_columns(&g).unwrap();
        let s = OperatorSequence::constant(Mat::identity(3), 2.0, NormSpec::Euclidean).unwrap();
        let seeds: Vec<Seed> = cols.into_iter().map(Seed::Vector).collect();
        let f = Frames::compute(&s, &seeds, IndexRange::symmetric(3)).unwrap();
        let t = gamma_angle_test(&f, IndexRange::symmetric(3)).unwrap();
        assert!(t.pass);
        assert!((t.gamma - 0.49).abs() < 1e-12);
        assert!((t.bound.unwrap() - 1.0 / 0.02f64.sqrt()).abs() < 1e-9);
        assert!(projection_bound(&f, IndexRange::symmetric(3)).unwrap() <= t.bound.unwrap());
    }

    #[test]
    fn jointly_diagonalizable_example() {
        let m = Mat::from_rows(&[&[2.0, 3.0], &[1.0, 2.0]]).unwrap();
        let s = OperatorSequence::constant(m, 5.0, NormSpec::Euclidean).unwrap();
        let jd = joint_diagonalization(&s, IndexRange::symmetric(5), 1e-9).unwrap();
        let r3 = 3f64.sqrt();
        assert!((jd.reference_eigenvalues[0] - (2.0 + r3)).abs() < 1e-12);
        assert!((jd.reference_eigenvalues[1] - (2.0 - r3)).abs() < 1e-12);
        let c0 = jd.basis_change.column(0);
        assert!((c0[0] / c0[1] - r3).abs() < 1e-12);
        let c1 = jd.basis_change.column(1);
        assert!((c1[0] / c1[1] + r3).abs() < 1e-12);
        assert!(jd.conjugacy_residual(&s, IndexRange::symmetric(5)).unwrap() < 1e-12);

        let rot = OperatorSequence::constant(Mat::rotation(0.9), 2.0, NormSpec::Euclidean).unwrap();
        assert!(joint_diagonalization(&rot, IndexRange::symmetric(5), 1e-9).is_none());
        let diag =
            OperatorSequence::constant(Mat::diag(&[3.0, 0.5]), 4.0, NormSpec::Euclidean).unwrap();
        assert_eq!(
            joint_diagonalization(&diag, IndexRange::symmetric(5), 1e-9)
                .unwrap()
                .basis_change,
            Mat::identity(2)
        );
    }

    #[test]
    fn jordan_is_refused() {
        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let s = OperatorSequence::constant(j, 3.0, NormSpec::Max).unwrap();
        let v = classify(&s, &[canonical(2)], &ClassifyOptions::default()).unwrap();
        assert_eq!(v.criterion, Criterion::None);
        assert!(matches!(
            build_conjugacy(&s, &v, IndexRange::symmetric(10), 2.0),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn rotation_bundle_round_trip() {
        let m = Mat::rotation(2.0 * std::f64::consts::PI * 0.3).scale(0.5);
        let s = OperatorSequence::constant(m, 3.0, NormSpec::Euclidean).unwrap();
        let v = classify(&s, &[canonical(2)], &ClassifyOptions::default()).unwrap();
        assert_eq!(v.criterion, Criterion::Orthogonal);
        let b = build_conjugacy(&s, &v, IndexRange::symmetric(40), 2.0).unwrap();
        assert!((b.weights[0].at(7) - 0.5).abs() < 1e-14);
        let probes = probe_points(2, IndexRange::symmetric(30), 20, 2.0, PROBE_SEED);
        let r = verify_conjugacy(&s, &b, &probes).unwrap();
        assert!(
            r.factor.unwrap() < 1e-12
                && r.roundtrip.unwrap() < 1e-12
                && r.surjectivity.unwrap() < 1e-12
        );
        let t = SeqPoint::scalar(-2, &[1.0, -2.0, 3.0], 2.0).unwrap();
        let lifted = b.lift(1, &t).unwrap();
        assert!(max_distance(&b.factor_map(1, &lifted).unwrap(), &t) < 1e-14);
        let orth = SeqPoint::impulse(0, v_perp(&b, 0), 2.0);
        assert!(b.factor_map(0, &orth).unwrap().max_abs() < 1e-15);
    }

    fn v_perp(b: &ConjugacyBundle, n: i64) -> Vector {
        let e = b.frames.frames[0].vector(n);
        v(&[-e[1], e[0]])
    }

    #[test]
    fn angle_to_span_values() {
        let a = angle_to_span(&v(&[1.0, 0.0]), &[v(&[0.0, 1.0])]).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let a = angle_to_span(&v(&[1.0, 0.0]), &[v(&[1.0, 1.0])]).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }
}
