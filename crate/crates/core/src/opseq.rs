//! Two-sided operator sequences `(S_n)`, their partial products, weights and
//! frame vectors.
//!
//! For a nonzero seed `x` the frame vectors are
//! `e_n(x) = S_[1,n]^{-1} x / ||.||` for `n >= 0` and `S_[n+1,0] x / ||.||`
//! for `n < 0`, and the weights are the consecutive norm ratios
//! `w_n(x) = ||S_n e_n(x)||`, so that `S_{n+1} e_{n+1} = w_{n+1} e_n`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, apply_unchecked, invert, operator_norm, vnorm, Mat, NormSpec, Vector};

/// Closed integer range `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Config(format!("empty range [{lo}, {hi}]")));
        }
        Ok(IndexRange { lo, hi })
    }

    /// `[-n, n]`.
    pub fn symmetric(n: i64) -> Self {
        IndexRange {
            lo: -n.abs(),
            hi: n.abs(),
        }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn union(&self, other: &IndexRange) -> IndexRange {
        IndexRange {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

/// Index-to-matrix map.
#[derive(Clone)]
pub enum Generator {
    Constant(Mat),
    /// `S_n = mats[n mod mats.len()]`.
    Periodic(Vec<Mat>),
    /// Arbitrary deterministic rule; `period` is declared when known.
    Func {
        f: Arc<dyn Fn(i64) -> Mat + Send + Sync>,
        period: Option<usize>,
    },
}

impl Generator {
    pub fn func<F: Fn(i64) -> Mat + Send + Sync + 'static>(f: F) -> Self {
        Generator::Func {
            f: Arc::new(f),
            period: None,
        }
    }

    pub fn eval(&self, n: i64) -> Mat {
        match self {
            Generator::Constant(m) => m.clone(),
            Generator::Periodic(ms) => ms[n.rem_euclid(ms.len() as i64) as usize].clone(),
            Generator::Func { f, .. } => f(n),
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            Generator::Constant(_) => Some(1),
            Generator::Periodic(ms) => Some(ms.len()),
            Generator::Func { period, .. } => *period,
        }
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Generator::Periodic(ms) => f.debug_tuple("Periodic").field(&ms.len()).finish(),
            Generator::Func { period, .. } => {
                f.debug_struct("Func").field("period", period).finish()
            }
        }
    }
}

#[derive(Default)]
struct Caches {
    inverses: HashMap<i64, Mat>,
    /// `S_[1,k]` for k = 1, 2, ...
    forward: Vec<Mat>,
    /// `S_[-k,0]` for k = 0, 1, ...
    backward: Vec<Mat>,
    other: HashMap<(i64, i64), Mat>,
}

/// Products longer than this are never cached.
const MAX_CACHED_SPAN: i64 = 10_000;

/// A uniformly bounded two-sided sequence of invertible `d x d` matrices.
pub struct OperatorSequence {
    generator: Generator,
    bound: f64,
    dim: usize,
    norm: NormSpec,
    caches: Mutex<Caches>,
}

impl Clone for OperatorSequence {
    fn clone(&self) -> Self {
        OperatorSequence {
            generator: self.generator.clone(),
            bound: self.bound,
            dim: self.dim,
            norm: self.norm,
            caches: Mutex::new(Caches::default()),
        }
    }
}

impl fmt::Debug for OperatorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSequence")
            .field("generator", &self.generator)
            .field("bound", &self.bound)
            .field("dim", &self.dim)
            .field("norm", &self.norm)
            .finish()
    }
}

impl OperatorSequence {
    pub fn new(generator: Generator, bound: f64, norm: NormSpec) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::Config(format!(
                "uniform bound {bound} must be positive"
            )));
        }
        let s0 = generator.eval(0);
        invert(&s0)?;
        Ok(OperatorSequence {
            dim: s0.dim(),
            generator,
            bound,
            norm,
            caches: Mutex::new(Caches::default()),
        })
    }

    pub fn constant(m: Mat, bound: f64, norm: NormSpec) -> Result<Self> {
        Self::new(Generator::Constant(m), bound, norm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn norm(&self) -> NormSpec {
        self.norm
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// `S_n`.
    pub fn get(&self, n: i64) -> Mat {
        self.generator.eval(n)
    }

    /// `S_n^{-1}`.
    pub fn inv(&self, n: i64) -> Mat {
        if let Some(m) = self.caches.lock().unwrap().inverses.get(&n) {
            return m.clone();
        }
        let m = invert(&self.get(n)).expect("operator sequence entries are invertible");
        self.caches.lock().unwrap().inverses.insert(n, m.clone());
        m
    }

    /// `S_[n,m]`: `S_n ... S_m` for `n < m`, `S_n` for `n = m`, identity for `n > m`.
    pub fn partial_product(&self, n: i64, m: i64) -> Mat {
        if n > m {
            return Mat::identity(self.dim);
        }
        if n == m {
            return self.get(n);
        }
        if m - n > MAX_CACHED_SPAN {
            return self.product_uncached(n, m);
        }
        if n == 1 {
            return self.forward_anchor(m as usize);
        }
        if m == 0 {
            return self.backward_anchor((-n) as usize);
        }
        if let Some(p) = self.caches.lock().unwrap().other.get(&(n, m)) {
            return p.clone();
        }
        let p = self.product_uncached(n, m);
        self.caches.lock().unwrap().other.insert((n, m), p.clone());
        p
    }

    fn product_uncached(&self, n: i64, m: i64) -> Mat {
        let mut acc = self.get(m);
        for k in (n..m).rev() {
            acc = self.get(k).mul(&acc);
        }
        acc
    }

    fn forward_anchor(&self, k: usize) -> Mat {
        let mut c = self.caches.lock().unwrap();
        if c.forward.is_empty() {
            c.forward.push(self.get(1));
        }
        while c.forward.len() < k {
            let j = c.forward.len() as i64 + 1;
            let next = c.forward.last().unwrap().mul(&self.get(j));
            c.forward.push(next);
        }
        c.forward[k - 1].clone()
    }

    fn backward_anchor(&self, k: usize) -> Mat {
        let mut c = self.caches.lock().unwrap();
        if c.backward.is_empty() {
            c.backward.push(self.get(0));
        }
        while c.backward.len() <= k {
            let j = c.backward.len() as i64;
            let next = self.get(-j).mul(c.backward.last().unwrap());
            c.backward.push(next);
        }
        c.backward[k].clone()
    }
}

/// Partial product `S_[n,m]`.
pub fn partial_product(s: &OperatorSequence, n: i64, m: i64) -> Mat {
    s.partial_product(n, m)
}

fn check_seed(s: &OperatorSequence, x: &Vector) -> Result<()> {
    if x.dim() != s.dim() {
        return Err(Error::Dimension("seed dimension".into()));
    }
    if x.is_zero() {
        return Err(Error::ZeroVector);
    }
    Ok(())
}

/// `w_n(x)` from the norm-ratio definition, using explicit partial products.
pub fn weight(s: &OperatorSequence, x: &Vector, n: i64) -> Result<f64> {
    check_seed(s, x)?;
    let nm = s.norm();
    if n > 0 {
        let a = apply_unchecked(&invert(&s.partial_product(1, n - 1))?, x);
        let b = apply_unchecked(&invert(&s.partial_product(1, n))?, x);
        Ok(vnorm(&a, nm) / vnorm(&b, nm))
    } else {
        let a = apply_unchecked(&s.partial_product(n, 0), x);
        let b = apply_unchecked(&s.partial_product(n + 1, 0), x);
        Ok(vnorm(&a, nm) / vnorm(&b, nm))
    }
}

/// `e_n(x)` from explicit partial products.
pub fn frame_vector(s: &OperatorSequence, x: &Vector, n: i64) -> Result<Vector> {
    check_seed(s, x)?;
    let v = if n >= 0 {
        apply_unchecked(&invert(&s.partial_product(1, n))?, x)
    } else {
        apply_unchecked(&s.partial_product(n + 1, 0), x)
    };
    linalg::normalize(&v, s.norm())
}

/// How the frame of a seed is evaluated.
///
/// `Vector` follows the definition directly. The other variants describe seeds
/// whose frame would be destroyed by rounding under the direct formula:
/// `Line` is a line invariant under every `S_n`, `Expanding` is the limit
/// direction of `S_[1,N] c` and `Contracting` that of `S_[-N,0]^{-1} c` as
/// `N` grows, for a cone-interior start `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "vector", rename_all = "snake_case")]
pub enum Seed {
    Vector(Vector),
    Line(Vector),
    Expanding(Vector),
    Contracting(Vector),
}

impl Seed {
    pub fn hint(&self) -> &Vector {
        match self {
            Seed::Vector(v) | Seed::Line(v) | Seed::Expanding(v) | Seed::Contracting(v) => v,
        }
    }
}

impl From<Vector> for Seed {
    fn from(v: Vector) -> Self {
        Seed::Vector(v)
    }
}

/// Tolerance for direction convergence of limit seeds.
pub const DIRECTION_TOL: f64 = 1e-13;
const START_HORIZON: i64 = 64;
const MAX_HORIZON: i64 = 1 << 20;

/// Frame vectors and weights of one seed over an index window.
#[derive(Clone, Debug)]
pub struct Frame {
    pub seed: Seed,
    pub window: IndexRange,
    vectors: Vec<Vector>,
    weights: Vec<f64>,
    /// Horizon used for limit seeds.
    pub horizon: Option<i64>,
    /// Distance of `S_n` applied to the line from the line, for `Line` seeds.
    pub line_residual: f64,
}

impl Frame {
    pub fn compute(s: &OperatorSequence, seed: &Seed, window: IndexRange) -> Result<Frame> {
        let hint = seed.hint();
        check_seed(s, hint)?;
        // index 0 is always included: it carries the seed itself
        let window = window.union(&IndexRange { lo: 0, hi: 0 });
        match seed {
            Seed::Vector(x) => Ok(direct_frame(s, seed, x, window)),
            Seed::Line(v) => line_frame(s, seed, v, window),
            Seed::Expanding(c) => limit_frame(s, seed, c, window, true),
            Seed::Contracting(c) => limit_frame(s, seed, c, window, false),
        }
    }

    fn slot(&self, n: i64) -> usize {
        assert!(
            self.window.contains(n),
            "index {n} outside frame window {:?}",
            self.window
        );
        (n - self.window.lo) as usize
    }

    pub fn vector(&self, n: i64) -> &Vector {
        &self.vectors[self.slot(n)]
    }

    pub fn weight(&self, n: i64) -> f64 {
        self.weights[self.slot(n)]
    }

    /// The unit seed `e_0`.
    pub fn seed_vector(&self) -> &Vector {
        self.vector(0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Rescales by a power of two, which is exact, when the iterate drifts
/// toward overflow or underflow.
fn rescale(v: Vector) -> Vector {
    let m = v.max_abs();
    if m > 2f64.powi(500) || (m > 0.0 && m < 2f64.powi(-500)) {
        let e = m.log2().round() as i32;
        v.scale(2f64.powi(-e))
    } else {
        v
    }
}

fn direct_frame(s: &OperatorSequence, seed: &Seed, x: &Vector, w: IndexRange) -> Frame {
    let nm = s.norm();
    let len = w.len();
    let mut vectors = vec![Vector::zeros(s.dim()); len];
    let mut weights = vec![0.0; len];
    let at = |n: i64| (n - w.lo) as usize;

    // positive side: y_n = S_n^{-1} y_{n-1}
    let mut prev = x.clone();
    vectors[at(0)] = x.scale(1.0 / vnorm(x, nm));
    for n in 1..=w.hi {
        let y = apply_unchecked(&s.inv(n), &prev);
        let r = vnorm(&y, nm);
        weights[at(n)] = vnorm(&prev, nm) / r;
        vectors[at(n)] = y.scale(1.0 / r);
        prev = rescale(y);
    }
    // non-positive side: z_n = S_[n+1,0] x, z_{n-1} = S_n z_n
    let mut cur = x.clone();
    for n in (w.lo..=0).rev() {
        let z = apply_unchecked(&s.get(n), &cur);
        let r = vnorm(&z, nm);
        weights[at(n)] = r / vnorm(&cur, nm);
        if n > w.lo {
            vectors[at(n - 1)] = z.scale(1.0 / r);
        }
        cur = rescale(z);
    }
    Frame {
        seed: seed.clone(),
        window: w,
        vectors,
        weights,
        horizon: None,
        line_residual: 0.0,
    }
}

fn line_frame(s: &OperatorSequence, seed: &Seed, v: &Vector, w: IndexRange) -> Result<Frame> {
    let nm = s.norm();
    let unit = v.scale(1.0 / vnorm(v, nm));
    let dir = linalg::normalize(v, NormSpec::Euclidean)?;
    let len = w.len();
    let mut vectors = vec![unit.clone(); len];
    let mut weights = vec![0.0; len];
    let at = |n: i64| (n - w.lo) as usize;
    let mut residual: f64 = 0.0;
    // signed copy of the line vector pointing like `img`
    let mut follow = |img: &Vector| {
        let along = img.dot(&dir);
        let off = img.sub(&dir.scale(along));
        residual = residual.max(vnorm(&off, NormSpec::Euclidean) / vnorm(img, NormSpec::Euclidean));
        if along < 0.0 {
            unit.scale(-1.0)
        } else {
            unit.clone()
        }
    };

    for n in 1..=w.hi {
        let back = apply_unchecked(&s.inv(n), &vectors[at(n - 1)]);
        let e = follow(&back);
        weights[at(n)] = vnorm(&apply_unchecked(&s.get(n), &e), nm);
        vectors[at(n)] = e;
    }
    for n in (w.lo..=0).rev() {
        let img = apply_unchecked(&s.get(n), &vectors[at(n)]);
        weights[at(n)] = vnorm(&img, nm);
        let e = follow(&img);
        if n > w.lo {
            vectors[at(n - 1)] = e;
        }
    }
    Ok(Frame {
        seed: seed.clone(),
        window: w,
        vectors,
        weights,
        horizon: None,
        line_residual: residual,
    })
}

fn line_distance(a: &Vector, b: &Vector) -> f64 {
    let d1 = a.sub(b).max_abs();
    let d2 = a.add(b).max_abs();
    d1.min(d2)
}

fn limit_frame(
    s: &OperatorSequence,
    seed: &Seed,
    c: &Vector,
    w: IndexRange,
    expanding: bool,
) -> Result<Frame> {
    let mut h = START_HORIZON;
    let mut prev = sweep(s, c, w, h, expanding);
    loop {
        let h2 = 2 * h;
        let next = sweep(s, c, w, h2, expanding);
        let probe = if expanding { w.hi } else { w.lo };
        let diff = line_distance(prev.vector(probe), next.vector(probe));
        if diff < DIRECTION_TOL {
            let mut f = next;
            f.seed = seed.clone();
            f.horizon = Some(h2);
            return Ok(f);
        }
        if h2 >= MAX_HORIZON {
            return Err(Error::NoConvergence(format!(
                "limit direction did not settle within horizon {h2} (last change {diff:e})"
            )));
        }
        h = h2;
        prev = next;
    }
}

/// Expanding: `e_{n-1} = S_n e_n / ||S_n e_n||` swept down from `hi + h`.
/// Contracting: `e_n = S_n^{-1} e_{n-1} / ||.||` swept up from `lo - h`.
fn sweep(s: &OperatorSequence, c: &Vector, w: IndexRange, h: i64, expanding: bool) -> Frame {
    let nm = s.norm();
    let len = w.len();
    let mut vectors = vec![Vector::zeros(s.dim()); len];
    let mut weights = vec![0.0; len];
    let at = |n: i64| (n - w.lo) as usize;
    let mut u = c.scale(1.0 / vnorm(c, nm));
    if expanding {
        let top = w.hi + h;
        for n in (w.lo..=top).rev() {
            if n <= w.hi {
                vectors[at(n)] = u.clone();
            }
            let img = apply_unchecked(&s.get(n), &u);
            let r = vnorm(&img, nm);
            if n <= w.hi {
                weights[at(n)] = r;
            }
            u = img.scale(1.0 / r);
        }
    } else {
        let bottom = w.lo - h;
        for n in bottom..=w.hi {
            let back = apply_unchecked(&s.inv(n), &u);
            let r = vnorm(&back, nm);
            u = back.scale(1.0 / r);
            if n >= w.lo {
                vectors[at(n)] = u.clone();
                weights[at(n)] = 1.0 / r;
            }
        }
    }
    Frame {
        seed: Seed::Vector(c.clone()),
        window: w,
        vectors,
        weights,
        horizon: Some(h),
        line_residual: 0.0,
    }
}

/// Max over `n` in `[lo, hi-1]` of `||S_{n+1} e_{n+1} - w_{n+1} e_n||`.
pub fn check_intertwining(s: &OperatorSequence, frame: &Frame) -> f64 {
    let nm = s.norm();
    let w = frame.window;
    (w.lo..w.hi)
        .map(|n| {
            let lhs = apply_unchecked(&s.get(n + 1), frame.vector(n + 1));
            let rhs = frame.vector(n).scale(frame.weight(n + 1));
            vnorm(&lhs.sub(&rhs), nm)
        })
        .fold(0.0, f64::max)
}

/// `(all max{||S_n||, ||S_n^{-1}||} < C, largest value seen)` over the window.
pub fn uniform_bound_check(s: &OperatorSequence, window: IndexRange) -> (bool, f64) {
    let nm = s.norm();
    let worst = window
        .iter()
        .map(|n| operator_norm(&s.get(n), nm).max(operator_norm(&s.inv(n), nm)))
        .fold(0.0, f64::max);
    (worst < s.bound(), worst)
}
