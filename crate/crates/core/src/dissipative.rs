//! Dissipative composition operators on the integers.
//!
//! The space is `M = Z x {0..c}` with the cell `W = {0} x {0..c}` and the
//! translation `f(n, i) = (n + 1, i)`; point `(n, i)` carries mass
//! `mu_i(n)`. A function on `M` is stored as a sequence of cell values, so
//! its fiber at `n` is `(phi(n, i))_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::opseq::IndexRange;
use crate::seqspace::{SeqPoint, WeightSeq};

/// Relative growth allowed between the half window and the full window
/// before the Radon-Nikodym ratios are called unbounded.
pub const RN_TREND_TOL: f64 = 0.25;

/// Mass of the point `(n, i)` as a function of `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureProfile {
    Constant {
        value: f64,
    },
    /// `scale * ratio^{|n|}`.
    Geometric {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `values[n mod len]`.
    Periodic {
        values: Vec<f64>,
    },
    /// `values[n - lo]` on the table, `outside` elsewhere.
    Table {
        lo: i64,
        values: Vec<f64>,
        outside: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MeasureProfile {
    pub fn mass(&self, n: i64) -> f64 {
        match self {
            MeasureProfile::Constant { value } => *value,
            MeasureProfile::Geometric { ratio, scale } => {
                scale * ratio.powi(n.unsigned_abs().min(i32::MAX as u64) as i32)
            }
            MeasureProfile::Periodic { values } => {
                values[n.rem_euclid(values.len() as i64) as usize]
            }
            MeasureProfile::Table {
                lo,
                values,
                outside,
            } => {
                let i = n - lo;
                if i >= 0 && (i as usize) < values.len() {
                    values[i as usize]
                } else {
                    *outside
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        let good = match self {
            MeasureProfile::Constant { value } => ok(*value),
            MeasureProfile::Geometric { ratio, scale } => ok(*ratio) && ok(*scale),
            MeasureProfile::Periodic { values } => {
                !values.is_empty() && values.iter().all(|&v| ok(v))
            }
            MeasureProfile::Table {
                values, outside, ..
            } => ok(*outside) && values.iter().all(|&v| ok(v)),
        };
        if good {
            Ok(())
        } else {
            Err(Error::Config("masses must be positive and finite".into()))
        }
    }
}

/// A measure on `Z x W` with translation dynamics and exponent `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativeSystem {
    pub mu: MeasureProfile,
    /// Profiles of further points in the cell `W`.
    #[serde(default)]
    pub extra_points: Vec<MeasureProfile>,
    pub p: f64,
}

impl DissipativeSystem {
    pub fn new(mu: MeasureProfile, p: f64) -> Result<Self> {
        Self::with_cell(vec![mu], p)
    }

    /// One profile per point of `W`.
    pub fn with_cell(mut profiles: Vec<MeasureProfile>, p: f64) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Config("the cell needs at least one point".into()));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Config(format!(
                "exponent p = {p} must be at least 1"
            )));
        }
        for m in &profiles {
            m.validate()?;
        }
        let mu = profiles.remove(0);
        Ok(DissipativeSystem {
            mu,
            extra_points: profiles,
            p,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::with_cell(self.profiles().into_iter().cloned().collect(), self.p).map(|_| ())
    }

    pub fn profiles(&self) -> Vec<&MeasureProfile> {
        std::iter::once(&self.mu)
            .chain(self.extra_points.iter())
            .collect()
    }

    pub fn cell_size(&self) -> usize {
        1 + self.extra_points.len()
    }

    pub fn mass(&self, n: i64, i: usize) -> f64 {
        self.profiles()[i].mass(n)
    }

    /// `L^p(M, mu)` norm, summed point by point over `M`.
    pub fn lp_norm(&self, phi: &SeqPoint) -> f64 {
        let mut acc = 0.0;
        for (n, v) in phi.entries() {
            for i in 0..v.dim() {
                acc += v[i].abs().powf(self.p) * self.mass(n, i);
            }
        }
        acc.powf(1.0 / self.p)
    }

    /// Norm on `B`: `sum_n int_W |psi_n|^p d(mu f^n)/d mu d mu`, with the
    /// derivative of `f^n` on `W` at point `i` equal to `mu_i(n) / mu_i(0)`.
    pub fn b_norm(&self, psi: &SeqPoint) -> f64 {
        let mut acc = 0.0;
        for (n, v) in psi.entries() {
            for i in 0..v.dim() {
                let rn = self.mass(n, i) / self.mass(0, i);
                acc += v[i].abs().powf(self.p) * rn * self.mass(0, i);
            }
        }
        acc.powf(1.0 / self.p)
    }

    /// Norm on `L^p(mu|_W)`.
    pub fn fiber_norm(&self, v: &Vector) -> f64 {
        (0..v.dim())
            .map(|i| v[i].abs().powf(self.p) * self.mass(0, i))
            .sum::<f64>()
            .powf(1.0 / self.p)
    }

    fn check(&self, phi: &SeqPoint) -> Result<()> {
        if phi.dim() != self.cell_size() {
            return Err(Error::Dimension(format!(
                "function has {} values per cell, cell has {}",
                phi.dim(),
                self.cell_size()
            )));
        }
        Ok(())
    }
}

/// `Gamma`: `psi_n = phi(f^n(.))` restricted to `W`.
pub fn gamma_forward(sys: &DissipativeSystem, phi: &SeqPoint) -> Result<SeqPoint> {
    sys.check(phi)?;
    let w = phi.window();
    let mut psi = SeqPoint::zeros(w, sys.cell_size(), sys.p);
    for n in w.iter() {
        // f^n(0, i) = (n, i)
        let vals = (0..sys.cell_size()).map(|i| evaluate(phi, n, i)).collect();
        psi.set(n, Vector::new(vals)?);
    }
    Ok(psi)
}

fn evaluate(phi: &SeqPoint, n: i64, i: usize) -> f64 {
    phi.get(n)[i]
}

/// Koopman operator `phi -> phi o f`.
pub fn compose_with_translation(phi: &SeqPoint) -> SeqPoint {
    let w = phi.window();
    let mut out = SeqPoint::zeros(
        IndexRange {
            lo: w.lo - 1,
            hi: w.hi - 1,
        },
        phi.dim(),
        phi.p(),
    );
    for n in out.window().iter() {
        out.set(n, phi.get(n + 1));
    }
    out
}

/// Identity-fiber shift on `B`: `(psi_n) -> (psi_{n+1})`.
pub fn identity_shift(psi: &SeqPoint) -> SeqPoint {
    compose_with_translation(psi)
}

/// `max ||Gamma(phi o f) - sigma(Gamma phi)||_B` over the probes.
pub fn verify_composition_conjugacy(sys: &DissipativeSystem, probes: &[SeqPoint]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for phi in probes {
        let lhs = gamma_forward(sys, &compose_with_translation(phi))?;
        let rhs = identity_shift(&gamma_forward(sys, phi)?);
        worst = worst.max(sys.b_norm(&lhs.sub(&rhs)?));
    }
    Ok(worst)
}

/// Largest relative gap between `||Gamma phi||_B` and `||phi||_{L^p}`.
pub fn isometry_defect(sys: &DissipativeSystem, probes: &[SeqPoint]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for phi in probes {
        let a = sys.lp_norm(phi);
        let b = sys.b_norm(&gamma_forward(sys, phi)?);
        let scale = a.max(f64::MIN_POSITIVE);
        worst = worst.max((a - b).abs() / scale);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnCheck {
    pub uniform: bool,
    /// Extremes of `mu_i(n) / mu_i(0)` over the window and the cell.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// A constant with `1/C < ratio < C` on the window, when uniform.
    pub c: Option<f64>,
    /// Extremes of the one-step ratios `mu_i(n+1) / mu_i(n)`.
    pub step_min: f64,
    pub step_max: f64,
}

fn ratio_range(sys: &DissipativeSystem, w: IndexRange) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in w.iter() {
        for i in 0..sys.cell_size() {
            let r = sys.mass(n, i) / sys.mass(0, i);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Uniform bounds on the derivatives of `f^n` over `W`, certified on the
/// window when the extremes do not grow from the half window.
pub fn rn_uniform_check(sys: &DissipativeSystem, window: IndexRange) -> RnCheck {
    let (min_ratio, max_ratio) = ratio_range(sys, window);
    let half = IndexRange {
        lo: window.lo / 2,
        hi: window.hi / 2,
    };
    let (hmin, hmax) = ratio_range(sys, half);
    let spread = |lo: f64, hi: f64| hi.max(1.0 / lo);
    let uniform = spread(min_ratio, max_ratio) <= (1.0 + RN_TREND_TOL) * spread(hmin, hmax);
    let c = uniform.then(|| (1.0 + RN_TREND_TOL) * spread(min_ratio, max_ratio));
    let (mut step_min, mut step_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in window.lo..window.hi {
        for i in 0..sys.cell_size() {
            let r = sys.mass(n + 1, i) / sys.mass(n, i);
            step_min = step_min.min(r);
            step_max = step_max.max(r);
        }
    }
    RnCheck {
        uniform,
        min_ratio,
        max_ratio,
        c,
        step_min,
        step_max,
    }
}

/// `psi_n -> psi_n (mu(n) / mu(0))^{1/p}` pointwise on the cell, which
/// carries the `B`-norm to the norm of `l_p(L^p(mu|_W))`.
pub fn rescale_to_lp(sys: &DissipativeSystem, psi: &SeqPoint) -> Result<SeqPoint> {
    sys.check(psi)?;
    let w = psi.window();
    let mut out = SeqPoint::zeros(w, sys.cell_size(), sys.p);
    for n in w.iter() {
        let v = psi.get(n);
        let vals = (0..v.dim())
            .map(|i| v[i] * (sys.mass(n, i) / sys.mass(0, i)).powf(1.0 / sys.p))
            .collect();
        out.set(n, Vector::new(vals)?);
    }
    Ok(out)
}

/// Norm of `l_p(L^p(mu|_W))`.
pub fn lp_of_fibers(sys: &DissipativeSystem, psi: &SeqPoint) -> f64 {
    psi.entries()
        .map(|(_, v)| sys.fiber_norm(v).powf(sys.p))
        .sum::<f64>()
        .powf(1.0 / sys.p)
}

/// Random finitely supported functions on `window`.
pub fn probe_functions(
    sys: &DissipativeSystem,
    window: IndexRange,
    count: usize,
    seed: u64,
) -> Vec<SeqPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let entries = window
                .iter()
                .map(|_| {
                    Vector::new(
                        (0..sys.cell_size())
                            .map(|_| rng.gen_range(-1.0..1.0))
                            .collect(),
                    )
                    .unwrap()
                })
                .collect();
            SeqPoint::from_entries(window.lo, entries, sys.p).unwrap()
        })
        .collect()
}

/// Coefficients of the decomposition map for a weighted backward shift:
/// `c_0 = 1`, `c_n = w_1 ... w_n` for `n > 0`, `c_n = 1 / (w_{n+1} ... w_0)`
/// for `n < 0`.
pub fn decomposition_coefficient(w: &WeightSeq, n: i64) -> f64 {
    use std::cmp::Ordering::*;
    match n.cmp(&0) {
        Equal => 1.0,
        Greater => (1..=n).map(|j| w.at(j)).product(),
        Less => 1.0 / (n + 1..=0).map(|j| w.at(j)).product::<f64>(),
    }
}

/// `H`: the slot-`n` coordinate of `x` moved into the slot-0 line by the
/// shift, `H(x)_n = c_n x_n`.
pub fn decomposition_map(w: &WeightSeq, x: &SeqPoint) -> Result<SeqPoint> {
    let win = x.window();
    let vals: Vec<f64> = win
        .iter()
        .map(|n| decomposition_coefficient(w, n) * x.scalar_at(n))
        .collect();
    SeqPoint::scalar(win.lo, &vals, x.p())
}

/// Pullback norm on the image of `H`.
pub fn pullback_norm(w: &WeightSeq, h: &SeqPoint) -> f64 {
    let p = h.p();
    h.entries()
        .map(|(n, v)| (v[0] / decomposition_coefficient(w, n)).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    /// `max |sigma(H x) - H(B_w x)|` over the probes.
    pub intertwining: f64,
    /// `max |  ||H x||_pullback - ||x||_p  |` relative.
    pub norm_defect: f64,
}

/// Checks `sigma_Id o H = H o B_w` and the pullback norm on probes.
pub fn dissipative_decomposition_conjugacy(
    w: &WeightSeq,
    probes: &[SeqPoint],
) -> Result<DecompositionCheck> {
    let mut inter: f64 = 0.0;
    let mut nd: f64 = 0.0;
    for x in probes {
        let lhs = identity_shift(&decomposition_map(w, x)?);
        let rhs = decomposition_map(w, &crate::seqspace::wshift_apply(w, x)?)?;
        let scale = lhs.max_abs().max(1.0);
        inter = inter.max(crate::seqspace::max_distance(&lhs, &rhs) / scale);
        let a = crate::seqspace::seq_norm(x, crate::linalg::NormSpec::Euclidean);
        let b = pullback_norm(w, &decomposition_map(w, x)?);
        nd = nd.max((a - b).abs() / a.max(f64::MIN_POSITIVE));
    }
    Ok(DecompositionCheck {
        intertwining: inter,
        norm_defect: nd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric() -> DissipativeSystem {
        DissipativeSystem::new(
            MeasureProfile::Geometric {
                ratio: 0.5,
                scale: 1.0,
            },
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn indicator_of_cell_zero() {
        let sys = DissipativeSystem::new(MeasureProfile::Constant { value: 3.0 }, 2.0).unwrap();
        let phi = SeqPoint::scalar(0, &[1.0], 2.0).unwrap();
        let psi = gamma_forward(&sys, &phi).unwrap();
        assert_eq!(psi.scalar_at(0), 1.0);
        assert!((sys.b_norm(&psi) - 3f64.sqrt()).abs() < 1e-15);
        assert!((sys.lp_norm(&phi) - 3f64.sqrt()).abs() < 1e-15);
        let moved = compose_with_translation(&phi);
        assert_eq!(moved.scalar_at(-1), 1.0);
        assert_eq!(moved.scalar_at(0), 0.0);
    }

    #[test]
    fn two_point_support() {
        let sys = geometric();
        let phi = SeqPoint::scalar(-1, &[2.0, 0.0, 0.0, -3.0], 2.0).unwrap();
        let psi = gamma_forward(&sys, &phi).unwrap();
        assert_eq!((psi.scalar_at(-1), psi.scalar_at(2)), (2.0, -3.0));
        let expect = (4.0 * 0.5 + 9.0 * 0.25f64).sqrt();
        assert!((sys.b_norm(&psi) - expect).abs() < 1e-15);
    }

    #[test]
    fn rn_profiles() {
        let w = IndexRange::symmetric(30);
        let c = rn_uniform_check(
            &DissipativeSystem::new(MeasureProfile::Constant { value: 1.0 }, 2.0).unwrap(),
            w,
        );
        assert!(c.uniform && c.min_ratio == 1.0 && c.max_ratio == 1.0);
        let g = rn_uniform_check(&geometric(), w);
        assert!(!g.uniform);
        assert_eq!((g.min_ratio, g.max_ratio), (2f64.powi(-30), 1.0));
        let per = DissipativeSystem::new(
            MeasureProfile::Periodic {
                values: vec![1.0, 2.0],
            },
            2.0,
        )
        .unwrap();
        let r = rn_uniform_check(&per, w);
        assert!(r.uniform);
        assert_eq!((r.min_ratio, r.max_ratio), (1.0, 2.0));
    }

    #[test]
    fn decomposition_impulse() {
        let w = WeightSeq::constant(0.5);
        let x = SeqPoint::impulse(0, Vector::from_slice(&[1.0]).unwrap(), 2.0);
        let h = decomposition_map(&w, &x).unwrap();
        assert_eq!(h.scalar_at(0), 1.0);
        let chk = dissipative_decomposition_conjugacy(&w, &[x]).unwrap();
        assert_eq!(chk.intertwining, 0.0);
        assert!(chk.norm_defect < 1e-15);
    }

    #[test]
    fn profile_json() {
        let sys = geometric();
        let s = serde_json::to_string(&sys).unwrap();
        assert!(s.contains("\"kind\":\"geometric\""));
        let back: DissipativeSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
    }
}
