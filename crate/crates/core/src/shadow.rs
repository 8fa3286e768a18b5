//! Growth-rate conditions for shadowing of weighted backward shifts, lifted
//! to classified shift operators, and a series solver for shadowing orbits.
//!
//! For a seed `x` with weights `w`, every norm ratio of partial products in
//! the three conditions telescopes to a product of consecutive weights, so a
//! bracket is `exp` of a window sum of `log w_j`.
//!
//! | term | windows | factors |
//! |------|---------|---------|
//! | forward    | `[k, k+n]`, `k >= 1`        | `n+1` |
//! | backward   | `[-k, -k+n-1]`, `k >= n`    | `n`   |
//! | straddling | `[-k, n-k]`, `0 <= k < n`   | `n+1` |
//! | past       | `[-k-n, -k]`, `k >= 1`      | `n+1` |
//!
//! Condition A takes the sup of the first three, B the inf, and C pairs the
//! sup over past windows with the inf over forward windows.

use serde::{Deserialize, Serialize};

use crate::classify::{ClassificationVerdict, Frames};
use crate::error::{Error, Result};
use crate::linalg::{vnorm, Vector};
use crate::opseq::{IndexRange, OperatorSequence, Seed};
use crate::seqspace::{seq_norm, shift_apply, SeqPoint, WeightSeq};

pub const DEFAULT_N_MAX: usize = 64;
pub const DEFAULT_K_MAX: usize = 512;
/// Limits within this distance of 1 are inconclusive at the window.
pub const INCONCLUSIVE_BAND: f64 = 1e-3;
/// Series partial sums beyond this multiple of the largest defect abort.
pub const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Sup,
    Inf,
}

/// One bracketed quantity evaluated for `n = 1..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderTerm {
    pub label: String,
    pub extremum: Extremum,
    /// `log` of the bracket for each `n`.
    pub log_brackets: Vec<f64>,
    /// Number of weights in each window.
    pub factors: Vec<usize>,
    /// `bracket^{1/n}`.
    pub rungs: Vec<f64>,
    /// Subadditive envelope: the best of `bracket^{1/m}` over the ladder,
    /// with `m` the factor count (min for sup terms, max for inf terms).
    pub envelope: f64,
}

/// Ladder for one condition (or one side of condition C).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthLadder {
    pub terms: Vec<LadderTerm>,
    /// Combined brackets to the power `1/n`, per `n`.
    pub rungs: Vec<f64>,
    /// Limit estimate from the term envelopes.
    pub limit: f64,
    /// `rungs[n_max] - rungs[n_max / 2]`.
    pub trend: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmLadders {
    pub a: GrowthLadder,
    pub b: GrowthLadder,
    pub c_contracting: GrowthLadder,
    pub c_expanding: GrowthLadder,
    /// Condition B with the three inf terms combined by max instead of min.
    pub b_verbatim_max: f64,
    /// Largest relative gap between direct partial-product ratios and the
    /// telescoped weights, for `Vector` seeds.
    pub crosscheck: Option<f64>,
}

struct Prefix {
    lo: i64,
    sums: Vec<f64>,
}

impl Prefix {
    fn new(lo: i64, weights: &[f64]) -> Prefix {
        let mut sums = Vec::with_capacity(weights.len() + 1);
        sums.push(0.0);
        let mut acc = 0.0;
        for w in weights {
            acc += w.ln();
            sums.push(acc);
        }
        Prefix { lo, sums }
    }

    /// `sum_{j=a}^{b} log w_j`.
    fn window(&self, a: i64, b: i64) -> f64 {
        self.sums[(b + 1 - self.lo) as usize] - self.sums[(a - self.lo) as usize]
    }
}

fn weight_window(n_max: usize, k_max: usize) -> IndexRange {
    let r = (n_max + k_max + 1) as i64;
    IndexRange { lo: -r, hi: r }
}

fn term(
    label: &str,
    ext: Extremum,
    n_max: usize,
    factors: impl Fn(usize) -> usize,
    windows: impl Fn(usize) -> Vec<(i64, i64)>,
    pre: &Prefix,
) -> LadderTerm {
    let mut log_brackets = Vec::with_capacity(n_max);
    let mut fac = Vec::with_capacity(n_max);
    let mut rungs = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let vals = windows(n).into_iter().map(|(a, b)| pre.window(a, b));
        let lb = match ext {
            Extremum::Sup => vals.fold(f64::NEG_INFINITY, f64::max),
            Extremum::Inf => vals.fold(f64::INFINITY, f64::min),
        };
        log_brackets.push(lb);
        fac.push(factors(n));
        rungs.push((lb / n as f64).exp());
    }
    let per_factor = log_brackets.iter().zip(&fac).map(|(lb, &m)| lb / m as f64);
    let env = match ext {
        Extremum::Sup => per_factor.fold(f64::INFINITY, f64::min),
        Extremum::Inf => per_factor.fold(f64::NEG_INFINITY, f64::max),
    };
    LadderTerm {
        label: label.into(),
        extremum: ext,
        log_brackets,
        factors: fac,
        rungs,
        envelope: env.exp(),
    }
}

fn combine(terms: Vec<LadderTerm>, pick: Extremum) -> GrowthLadder {
    let n_max = terms[0].rungs.len();
    let rungs: Vec<f64> = (0..n_max)
        .map(|i| {
            let vals = terms.iter().map(|t| t.log_brackets[i]);
            let lb = match pick {
                Extremum::Sup => vals.fold(f64::NEG_INFINITY, f64::max),
                Extremum::Inf => vals.fold(f64::INFINITY, f64::min),
            };
            (lb / (i + 1) as f64).exp()
        })
        .collect();
    let envs = terms.iter().map(|t| t.envelope);
    let limit = match pick {
        Extremum::Sup => envs.fold(f64::NEG_INFINITY, f64::max),
        Extremum::Inf => envs.fold(f64::INFINITY, f64::min),
    };
    let trend = rungs[n_max - 1] - rungs[(n_max / 2).max(1) - 1];
    GrowthLadder {
        terms,
        rungs,
        limit,
        trend,
    }
}

/// Ladders from a weight table starting at index `lo`; the table must
/// cover `[-(n_max + k_max + 1), n_max + k_max + 1]`.
pub fn bm_ladders_from_weights(
    lo: i64,
    weights: &[f64],
    n_max: usize,
    k_max: usize,
) -> Result<BmLadders> {
    if n_max == 0 || k_max == 0 {
        return Err(Error::Config("n_max and k_max must be at least 1".into()));
    }
    let need = weight_window(n_max, k_max);
    let hi = lo + weights.len() as i64 - 1;
    if lo > need.lo || hi < need.hi {
        return Err(Error::Config(format!(
            "weights on [{lo}, {hi}] do not cover {need:?}"
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::NonFinite("weights".into()));
    }
    let pre = Prefix::new(lo, weights);
    let km = k_max as i64;
    let forward = |n: usize| (1..=km).map(|k| (k, k + n as i64)).collect::<Vec<_>>();
    let backward = |n: usize| {
        let n = n as i64;
        (n..=km.max(n))
            .map(|k| (-k, -k + n - 1))
            .collect::<Vec<_>>()
    };
    let straddling = |n: usize| {
        let n = n as i64;
        (0..n).map(|k| (-k, n - k)).collect::<Vec<_>>()
    };
    let past = |n: usize| (1..=km).map(|k| (-k - n as i64, -k)).collect::<Vec<_>>();
    let np1 = |n: usize| n + 1;
    let same = |n: usize| n;

    let a = combine(
        vec![
            term("forward", Extremum::Sup, n_max, np1, forward, &pre),
            term("backward", Extremum::Sup, n_max, same, backward, &pre),
            term("straddling", Extremum::Sup, n_max, np1, straddling, &pre),
        ],
        Extremum::Sup,
    );
    let b = combine(
        vec![
            term("forward", Extremum::Inf, n_max, np1, forward, &pre),
            term("backward", Extremum::Inf, n_max, same, backward, &pre),
            term("straddling", Extremum::Inf, n_max, np1, straddling, &pre),
        ],
        Extremum::Inf,
    );
    let b_verbatim_max = b
        .terms
        .iter()
        .map(|t| t.envelope)
        .fold(f64::NEG_INFINITY, f64::max);
    let c_contracting = combine(
        vec![term("past", Extremum::Sup, n_max, np1, past, &pre)],
        Extremum::Sup,
    );
    let c_expanding = combine(
        vec![term("forward", Extremum::Inf, n_max, np1, forward, &pre)],
        Extremum::Inf,
    );
    Ok(BmLadders {
        a,
        b,
        c_contracting,
        c_expanding,
        b_verbatim_max,
        crosscheck: None,
    })
}

/// Ladders for one seed, with weights from its frame.
pub fn bm_ladders(
    s: &OperatorSequence,
    seed: &Seed,
    n_max: usize,
    k_max: usize,
) -> Result<BmLadders> {
    let frame = crate::opseq::Frame::compute(s, seed, weight_window(n_max, k_max))?;
    let mut l = bm_ladders_from_weights(frame.window.lo, frame.weights(), n_max, k_max)?;
    if let Seed::Vector(x) = seed {
        l.crosscheck = Some(crosscheck(s, x, frame.weights(), frame.window.lo));
    }
    Ok(l)
}

/// Compares a handful of bracket ratios computed from partial products
/// directly with the telescoped weight products.
fn crosscheck(s: &OperatorSequence, x: &Vector, weights: &[f64], lo: i64) -> f64 {
    let nm = s.norm();
    let pre = Prefix::new(lo, weights);
    let fwd = |k: i64| {
        let u = (1..=k).fold(x.clone(), |u, j| {
            crate::linalg::apply_unchecked(&s.inv(j), &u)
        });
        vnorm(&u, nm)
    };
    let bwd = |k: i64| {
        vnorm(
            &crate::linalg::apply_unchecked(&s.partial_product(-k, 0), x),
            nm,
        )
    };
    let mut worst: f64 = 0.0;
    for n in 1..=6i64 {
        for k in 1..=6i64 {
            // forward windows: ||S_[1,k-1]^{-1} x|| / ||S_[1,k+n]^{-1} x||
            let direct = fwd(k - 1) / fwd(k + n);
            worst = worst.max((direct.ln() - pre.window(k, k + n)).abs());
            // past windows: ||S_[-k-n,0] x|| / ||S_[-k+1,0] x||
            let direct = bwd(k + n) / bwd(k - 1);
            worst = worst.max((direct.ln() - pre.window(-k - n, -k)).abs());
        }
    }
    worst.exp() - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
    C,
}

/// How the series solver runs along the diagonals of a factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Sum forward from before the defects.
    Forward,
    /// Sum backward from after the defects.
    Backward,
    /// Pin index 0: forward over the past, backward over the future.
    Split,
}

impl Condition {
    pub fn mode(&self) -> SolveMode {
        match self {
            Condition::A => SolveMode::Forward,
            Condition::B => SolveMode::Backward,
            Condition::C => SolveMode::Split,
        }
    }
}

/// Decides which condition fires from the limit estimates.
pub fn decide(l: &BmLadders) -> (Option<Condition>, bool) {
    let t = INCONCLUSIVE_BAND;
    let fired = if l.a.limit < 1.0 - t {
        Some(Condition::A)
    } else if l.b.limit > 1.0 + t {
        Some(Condition::B)
    } else if l.c_contracting.limit < 1.0 - t && l.c_expanding.limit > 1.0 + t {
        Some(Condition::C)
    } else {
        None
    };
    let near = |x: f64| (x - 1.0).abs() <= t;
    let inconclusive = fired.is_none()
        && (near(l.a.limit)
            || near(l.b.limit)
            || near(l.c_contracting.limit)
            || near(l.c_expanding.limit));
    (fired, inconclusive)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedVerdict {
    pub seed: Seed,
    pub fired: Option<Condition>,
    pub inconclusive: bool,
    /// For condition C: the contracting (past) and expanding (future) limits.
    pub split: Option<(f64, f64)>,
    /// Series bound for this factor; infinite when nothing fired.
    pub factor_k: f64,
    /// Closed-form bound when the factor weights are constant.
    pub closed_form_k: Option<f64>,
    pub ladders: BmLadders,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderWindow {
    pub n_max: usize,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowingCertificate {
    pub per_seed: Vec<SeedVerdict>,
    pub verdict: bool,
    /// Same value as `verdict`: for classified shifts the two properties
    /// are equivalent, and both flags are read off this certificate.
    pub generalized_hyperbolic: bool,
    pub inconclusive: bool,
    /// Certified bound: `sup ||x|| <= K sup ||z||`.
    #[serde(rename = "K")]
    pub k: f64,
    /// `max_b` of the factor bounds (the family bound under the sum norm).
    pub equi_k: f64,
    pub window: LadderWindow,
}

/// Largest product of `len` consecutive weights over windows inside
/// `[lo_idx, hi_idx]`, from a prefix table; `inverse` uses `1/w`.
fn window_sups(pre: &Prefix, lo_idx: i64, hi_idx: i64, max_len: usize, inverse: bool) -> Vec<f64> {
    let mut out = vec![1.0];
    let span = hi_idx - lo_idx + 1;
    for len in 1..=(max_len as i64).min(span) {
        let mut best = f64::NEG_INFINITY;
        for a in lo_idx..=hi_idx - len + 1 {
            let s = pre.window(a, a + len - 1);
            best = best.max(if inverse { -s } else { s });
        }
        out.push(best.exp());
    }
    out
}

/// `sum_{L >= 0} s(L)` for a submultiplicative `s` with `s(0) = 1`, bounded
/// by `(sum_{L < P} s(L)) / (1 - s(P))` minimized over `P`.
fn series_bound(s: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    let mut partial = 0.0;
    for p in 1..s.len() {
        partial += s[p - 1];
        if s[p] < 1.0 {
            best = best.min(partial / (1.0 - s[p]));
        }
    }
    best
}

const SERIES_LEN: usize = 1024;

/// Per-factor series bound for the given solve mode.
pub fn factor_bound(lo: i64, weights: &[f64], mode: SolveMode) -> f64 {
    let pre = Prefix::new(lo, weights);
    let hi = lo + weights.len() as i64 - 1;
    match mode {
        SolveMode::Forward => series_bound(&window_sups(&pre, lo, hi, SERIES_LEN, false)),
        SolveMode::Backward => series_bound(&window_sups(&pre, lo, hi, SERIES_LEN, true)),
        SolveMode::Split => {
            series_bound(&window_sups(&pre, lo, -1, SERIES_LEN, false))
                + series_bound(&window_sups(&pre, 1, hi, SERIES_LEN, true))
        }
    }
}

/// Closed forms for constant weights `c`: `1/(1-c)` contracting and
/// `c/(c-1)` expanding.
pub fn closed_form_bound(weights: &[f64], mode: SolveMode) -> Option<f64> {
    let c = weights[0];
    if weights.iter().any(|w| (w - c).abs() > 1e-12 * c) {
        return None;
    }
    match mode {
        SolveMode::Forward if c < 1.0 => Some(1.0 / (1.0 - c)),
        SolveMode::Backward if c > 1.0 => Some(c / (c - 1.0)),
        _ => None,
    }
}

/// The family bound under the sum norm: the largest factor bound.
pub fn equi_shadowing_bound(factors: &[WeightSeq], per_factor_k: &[f64]) -> Result<f64> {
    if factors.len() != per_factor_k.len() || factors.is_empty() {
        return Err(Error::Dimension("one bound per factor is required".into()));
    }
    Ok(per_factor_k.iter().copied().fold(0.0, f64::max))
}

/// Evaluates the conditions for every seed of a certified basis.
pub fn shadowing_verdict(
    s: &OperatorSequence,
    classification: &ClassificationVerdict,
    n_max: usize,
    k_max: usize,
) -> Result<ShadowingCertificate> {
    if !classification.certified() {
        return Err(Error::Refused(
            "shadowing needs a bounded-projection certificate".into(),
        ));
    }
    let frames = Frames::compute(s, &classification.basis, weight_window(n_max, k_max))?;
    let mut per_seed = Vec::with_capacity(frames.dim());
    for (seed, frame) in classification.basis.iter().zip(&frames.frames) {
        let w = frame.weights();
        let mut ladders = bm_ladders_from_weights(frame.window.lo, w, n_max, k_max)?;
        if let Seed::Vector(x) = seed {
            ladders.crosscheck = Some(crosscheck(s, x, w, frame.window.lo));
        }
        let (fired, inconclusive) = decide(&ladders);
        let (factor_k, closed) = match fired {
            Some(c) => (
                factor_bound(frame.window.lo, w, c.mode()),
                closed_form_bound(w, c.mode()),
            ),
            None => (f64::INFINITY, None),
        };
        let split = (fired == Some(Condition::C))
            .then_some((ladders.c_contracting.limit, ladders.c_expanding.limit));
        per_seed.push(SeedVerdict {
            seed: seed.clone(),
            fired,
            inconclusive,
            split,
            factor_k,
            closed_form_k: closed,
            ladders,
        });
    }
    let verdict = per_seed.iter().all(|v| v.fired.is_some());
    let inconclusive = !verdict && per_seed.iter().any(|v| v.inconclusive);
    let factor_ks: Vec<f64> = per_seed
        .iter()
        .map(|v| v.closed_form_k.unwrap_or(v.factor_k).min(v.factor_k))
        .collect();
    let weight_seqs: Vec<WeightSeq> = (0..frames.dim())
        .map(|b| frames.weight_seq(b, s.bound()))
        .collect();
    let equi_k = equi_shadowing_bound(&weight_seqs, &factor_ks)?;
    let k = if verdict {
        let c = classification
            .certificates
            .projection_bound
            .unwrap_or(f64::INFINITY);
        if orthonormal_l2(classification) {
            equi_k
        } else {
            frames.dim() as f64 * c * equi_k
        }
    } else {
        f64::INFINITY
    };
    Ok(ShadowingCertificate {
        per_seed,
        verdict,
        generalized_hyperbolic: verdict,
        inconclusive,
        k,
        equi_k,
        window: LadderWindow { n_max, k_max },
    })
}

/// Orthonormal frames in Euclidean fibers: the coordinate map is an
/// isometry from `l_2(X)` onto the product with the l2-sum norm.
fn orthonormal_l2(v: &ClassificationVerdict) -> bool {
    v.criterion == crate::classify::Criterion::Orthogonal
        && v.certificates
            .projection_bound
            .is_some_and(|c| c <= 1.0 + 1e-12)
        && v.p == 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperbolicity {
    Contracting,
    Expanding,
    NotHyperbolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub verdict: Hyperbolicity,
    /// Largest geometric mean of `n_max` consecutive weights.
    pub sup_mean: f64,
    /// Smallest such geometric mean.
    pub inf_mean: f64,
    /// The same at `n_max / 2`, for the trend.
    pub sup_mean_half: f64,
    pub inf_mean_half: f64,
}

/// Spectral-annulus test on the windows of `n_max` consecutive weights
/// starting in `[-k_max, k_max]`.
pub fn hyperbolicity_verdict(w: &WeightSeq, n_max: usize, k_max: usize) -> HyperbolicityReport {
    let km = k_max as i64;
    let means = |n: usize| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in -km..=km {
            let s: f64 = (k..k + n as i64).map(|j| w.at(j).ln()).sum::<f64>() / n as f64;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (hi.exp(), lo.exp())
    };
    let (sup_mean, inf_mean) = means(n_max);
    let (sup_mean_half, inf_mean_half) = means((n_max / 2).max(1));
    let verdict = if sup_mean < 1.0 - INCONCLUSIVE_BAND {
        Hyperbolicity::Contracting
    } else if inf_mean > 1.0 + INCONCLUSIVE_BAND {
        Hyperbolicity::Expanding
    } else {
        Hyperbolicity::NotHyperbolic
    };
    HyperbolicityReport {
        verdict,
        sup_mean,
        inf_mean,
        sup_mean_half,
        inf_mean_half,
    }
}

/// Defects `z^(k) = p^(k+1) - sigma(p^(k))` of a pseudo-orbit.
pub fn defects_of(s: &OperatorSequence, points: &[SeqPoint]) -> Result<Vec<SeqPoint>> {
    points
        .windows(2)
        .map(|pq| pq[1].sub(&shift_apply(s, &pq[0])?))
        .collect()
}

/// Solution of the defect equation.
#[derive(Clone, Debug)]
pub struct ShadowSolution {
    /// `x^(0..=T)` with `x^(k+1) - sigma(x^(k)) = z^(k)`.
    pub orbit: Vec<SeqPoint>,
    /// `sup ||x|| / sup ||z||` on this instance.
    pub realized_k: f64,
    /// Certified bound from the certificate.
    pub k: f64,
}

/// Frames held for repeated solves over one spatial window.
pub struct ShadowSolver<'a> {
    s: &'a OperatorSequence,
    frames: Frames,
    modes: Vec<SolveMode>,
    k: f64,
}

impl<'a> ShadowSolver<'a> {
    /// Prepares frames on `window`, which must contain every spatial index
    /// touched by the defects shifted by up to the number of time steps.
    pub fn new(
        s: &'a OperatorSequence,
        classification: &ClassificationVerdict,
        cert: &ShadowingCertificate,
        window: IndexRange,
    ) -> Result<Self> {
        if !cert.verdict {
            return Err(Error::Refused(
                "the certificate does not establish shadowing".into(),
            ));
        }
        let modes = cert
            .per_seed
            .iter()
            .map(|v| v.fired.expect("verdict implies every seed fired").mode())
            .collect();
        let frames = Frames::compute(s, &classification.basis, window)?;
        Ok(ShadowSolver {
            s,
            frames,
            modes,
            k: cert.k,
        })
    }

    pub fn window(&self) -> IndexRange {
        self.frames.window
    }

    /// Solves `x^(k+1) = sigma(x^(k)) + z^(k)` for `k = 0..T-1`, with the
    /// defects taken as zero outside that range.
    pub fn solve(&self, defects: &[SeqPoint]) -> Result<ShadowSolution> {
        let steps = defects.len();
        let d = self.frames.dim();
        if steps == 0 {
            return Err(Error::Config("empty defect sequence".into()));
        }
        let p = defects[0].p();
        let support = defects
            .iter()
            .skip(1)
            .fold(defects[0].window(), |w, z| w.union(&z.window()));
        let t = steps as i64;
        let need = IndexRange {
            lo: support.lo - t - 1,
            hi: support.hi + t + 1,
        };
        let fw = self.frames.window;
        if need.lo < fw.lo || need.hi > fw.hi {
            return Err(Error::Config(format!(
                "defects need frames on {need:?}, solver has {fw:?}"
            )));
        }
        // factor coordinates g[b][t][n - support.lo]
        let mut g = vec![vec![vec![0.0; support.len()]; steps]; d];
        let mut fmax: f64 = 0.0;
        for (ti, z) in defects.iter().enumerate() {
            for (n, x) in z.entries() {
                if x.is_zero() {
                    continue;
                }
                let a = crate::linalg::coordinates_in_basis(x, &self.frames.basis_at(n))?;
                for b in 0..d {
                    g[b][ti][(n - support.lo) as usize] = a[b];
                    fmax = fmax.max(a[b].abs());
                }
            }
        }
        let cap = DIVERGENCE_CAP * fmax.max(f64::MIN_POSITIVE);
        // y[b][t][n - out.lo] on the output window
        let out = IndexRange {
            lo: support.lo + 1 - t,
            hi: support.hi + t,
        };
        let mut y = vec![vec![vec![0.0; out.len()]; steps + 1]; d];
        let f = |b: usize, ti: i64, n: i64| -> f64 {
            if ti < 0 || ti >= t || !support.contains(n) {
                0.0
            } else {
                g[b][ti as usize][(n - support.lo) as usize]
            }
        };
        for b in 0..d {
            let w = |n: i64| self.frames.frames[b].weight(n);
            for m in (support.lo + 1)..=(support.hi + t) {
                let mut v = vec![0.0; steps + 1];
                let forward = |v: &mut Vec<f64>, from: i64| -> Result<()> {
                    for ti in from..t {
                        let next = w(m - ti) * v[ti as usize] + f(b, ti, m - ti - 1);
                        if next.abs() > cap {
                            return Err(Error::Divergence(next.abs()));
                        }
                        v[ti as usize + 1] = next;
                    }
                    Ok(())
                };
                let backward = |v: &mut Vec<f64>, from: i64| -> Result<()> {
                    for ti in (0..from).rev() {
                        let prev = (v[ti as usize + 1] - f(b, ti, m - ti - 1)) / w(m - ti);
                        if prev.abs() > cap {
                            return Err(Error::Divergence(prev.abs()));
                        }
                        v[ti as usize] = prev;
                    }
                    Ok(())
                };
                match self.modes[b] {
                    SolveMode::Forward => forward(&mut v, 0)?,
                    SolveMode::Backward => backward(&mut v, t)?,
                    SolveMode::Split => {
                        let pin = m.clamp(0, t);
                        forward(&mut v, pin)?;
                        backward(&mut v, pin)?;
                    }
                }
                for ti in 0..=t {
                    let n = m - ti;
                    if out.contains(n) {
                        y[b][ti as usize][(n - out.lo) as usize] = v[ti as usize];
                    }
                }
            }
        }
        let mut orbit = Vec::with_capacity(steps + 1);
        for ti in 0..=steps {
            let mut x = SeqPoint::zeros(out, d, p);
            for n in out.iter() {
                let mut acc = Vector::zeros(d);
                for b in 0..d {
                    acc = acc.axpy(
                        y[b][ti][(n - out.lo) as usize],
                        self.frames.frames[b].vector(n),
                    );
                }
                x.set(n, acc);
            }
            orbit.push(x);
        }
        let nm = self.s.norm();
        let zsup = defects.iter().map(|z| seq_norm(z, nm)).fold(0.0, f64::max);
        let xsup = orbit.iter().map(|x| seq_norm(x, nm)).fold(0.0, f64::max);
        let realized_k = if zsup > 0.0 { xsup / zsup } else { 0.0 };
        Ok(ShadowSolution {
            orbit,
            realized_k,
            k: self.k,
        })
    }
}

/// Builds a solver sized for the defects and solves once.
pub fn solve_shadowing(
    s: &OperatorSequence,
    classification: &ClassificationVerdict,
    cert: &ShadowingCertificate,
    defects: &[SeqPoint],
) -> Result<ShadowSolution> {
    if defects.is_empty() {
        return Err(Error::Config("empty defect sequence".into()));
    }
    let support = defects
        .iter()
        .skip(1)
        .fold(defects[0].window(), |w, z| w.union(&z.window()));
    let t = defects.len() as i64;
    let window = IndexRange {
        lo: support.lo - t - 1,
        hi: support.hi + t + 1,
    };
    ShadowSolver::new(s, classification, cert, window)?.solve(defects)
}

/// Largest componentwise residual of `x^(k+1) - sigma(x^(k)) - z^(k)`.
pub fn defect_residual(
    s: &OperatorSequence,
    orbit: &[SeqPoint],
    defects: &[SeqPoint],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (k, z) in defects.iter().enumerate() {
        let r = orbit[k + 1].sub(&shift_apply(s, &orbit[k])?)?.sub(z)?;
        worst = worst.max(r.max_abs());
    }
    Ok(worst)
}

/// Empirical bound: the largest realized ratio times a 1.05 safety factor.
pub fn empirical_k(realized: &[f64]) -> f64 {
    1.05 * realized.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(f: impl Fn(i64) -> f64, n_max: usize, k_max: usize) -> (i64, Vec<f64>) {
        let w = weight_window(n_max, k_max);
        (w.lo, w.iter().map(f).collect())
    }

    #[test]
    fn constant_two_fires_b() {
        let (lo, w) = table(|_| 2.0, 16, 32);
        let l = bm_ladders_from_weights(lo, &w, 16, 32).unwrap();
        for t in &l.b.terms {
            for (n, r) in t.rungs.iter().enumerate() {
                let expect = 2f64.powf(t.factors[n] as f64 / (n + 1) as f64);
                assert!((r - expect).abs() < 1e-12);
            }
            assert!((t.envelope - 2.0).abs() < 1e-12);
        }
        assert_eq!(decide(&l), (Some(Condition::B), false));
    }

    #[test]
    fn alternating_is_inconclusive() {
        let (lo, w) = table(|n| if n.rem_euclid(2) == 1 { 2.0 } else { 0.5 }, 64, 512);
        let l = bm_ladders_from_weights(lo, &w, 64, 512).unwrap();
        for x in [
            l.a.limit,
            l.b.limit,
            l.c_contracting.limit,
            l.c_expanding.limit,
            l.b_verbatim_max,
        ] {
            assert!((x - 1.0).abs() < 1e-12, "{x}");
        }
        assert_eq!(decide(&l), (None, true));
    }

    #[test]
    fn split_fires_c() {
        let (lo, w) = table(
            |n| {
                if n < 0 {
                    0.5
                } else if n == 0 {
                    1.0
                } else {
                    3.0
                }
            },
            32,
            64,
        );
        let l = bm_ladders_from_weights(lo, &w, 32, 64).unwrap();
        assert!(l.c_contracting.limit < 0.6 && l.c_expanding.limit > 2.9);
        assert_eq!(decide(&l).0, Some(Condition::C));
    }

    #[test]
    fn series_bounds() {
        let w = vec![0.5; 200];
        assert!((factor_bound(-100, &w, SolveMode::Forward) - 2.0).abs() < 1e-9);
        assert_eq!(closed_form_bound(&w, SolveMode::Forward), Some(2.0));
        let w = vec![4.0; 200];
        assert!((factor_bound(-100, &w, SolveMode::Backward) - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn hyperbolicity_of_constants() {
        assert_eq!(
            hyperbolicity_verdict(&WeightSeq::constant(0.5), 64, 64).verdict,
            Hyperbolicity::Contracting
        );
        let phi = (3.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(
            hyperbolicity_verdict(&WeightSeq::constant(phi), 64, 64).verdict,
            Hyperbolicity::Expanding
        );
        let alt = WeightSeq::new(|n| if n.rem_euclid(2) == 0 { 2.0 } else { 0.5 }, 3.0);
        assert_eq!(
            hyperbolicity_verdict(&alt, 64, 64).verdict,
            Hyperbolicity::NotHyperbolic
        );
    }
}
