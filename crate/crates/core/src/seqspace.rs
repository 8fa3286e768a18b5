//! Finitely supported bilateral sequences in `l_p(X)` and the shift-type
//! operators acting on them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{apply_unchecked, norm_slice, NormSpec, Vector};
use crate::opseq::{IndexRange, OperatorSequence};

/// A point of `l_p(X)` supported in `[lo, hi]`, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqPoint {
    window: IndexRange,
    p: f64,
    dim: usize,
    entries: Vec<Vector>,
}

impl SeqPoint {
    pub fn zeros(window: IndexRange, dim: usize, p: f64) -> Self {
        SeqPoint {
            window,
            p,
            dim,
            entries: vec![Vector::zeros(dim); window.len()],
        }
    }

    pub fn from_entries(lo: i64, entries: Vec<Vector>, p: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("empty sequence point".into()));
        }
        if !(p >= 1.0) {
            return Err(Error::Config(format!("sequence exponent {p} below 1")));
        }
        let dim = entries[0].dim();
        if entries.iter().any(|e| e.dim() != dim) {
            return Err(Error::Dimension(
                "entries of different fiber dimension".into(),
            ));
        }
        let window = IndexRange {
            lo,
            hi: lo + entries.len() as i64 - 1,
        };
        Ok(SeqPoint {
            window,
            p,
            dim,
            entries,
        })
    }

    /// Scalar point from values starting at index `lo`.
    pub fn scalar(lo: i64, values: &[f64], p: f64) -> Result<Self> {
        let entries = values
            .iter()
            .map(|v| Vector::new(vec![*v]))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(lo, entries, p)
    }

    /// The single vector `v` placed at index `n`.
    pub fn impulse(n: i64, v: Vector, p: f64) -> Self {
        SeqPoint {
            window: IndexRange { lo: n, hi: n },
            p,
            dim: v.dim(),
            entries: vec![v],
        }
    }

    pub fn window(&self) -> IndexRange {
        self.window
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at `n`, zero outside the window.
    pub fn get(&self, n: i64) -> Vector {
        if self.window.contains(n) {
            self.entries[(n - self.window.lo) as usize].clone()
        } else {
            Vector::zeros(self.dim)
        }
    }

    pub fn set(&mut self, n: i64, v: Vector) {
        if !self.window.contains(n) {
            self.extend_to(self.window.union(&IndexRange { lo: n, hi: n }));
        }
        let lo = self.window.lo;
        self.entries[(n - lo) as usize] = v;
    }

    /// Scalar entry at `n` for fiber dimension one.
    pub fn scalar_at(&self, n: i64) -> f64 {
        if self.window.contains(n) {
            self.entries[(n - self.window.lo) as usize][0]
        } else {
            0.0
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, &Vector)> {
        self.window.iter().zip(self.entries.iter())
    }

    fn extend_to(&mut self, w: IndexRange) {
        let mut entries = Vec::with_capacity(w.len());
        for n in w.iter() {
            entries.push(self.get(n));
        }
        self.window = w;
        self.entries = entries;
    }

    /// Copy restricted or padded to the given window.
    pub fn on_window(&self, w: IndexRange) -> SeqPoint {
        SeqPoint {
            window: w,
            p: self.p,
            dim: self.dim,
            entries: w.iter().map(|n| self.get(n)).collect(),
        }
    }

    /// Smallest window holding every nonzero entry (a single zero entry at
    /// the old `lo` when the point vanishes).
    pub fn trimmed(&self) -> SeqPoint {
        let nz: Vec<i64> = self
            .entries()
            .filter(|(_, v)| !v.is_zero())
            .map(|(n, _)| n)
            .collect();
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => self.on_window(IndexRange { lo: a, hi: b }),
            _ => SeqPoint::zeros(
                IndexRange {
                    lo: self.window.lo,
                    hi: self.window.lo,
                },
                self.dim,
                self.p,
            ),
        }
    }

    fn check_compatible(&self, other: &SeqPoint) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension("fiber dimensions differ".into()));
        }
        if self.p != other.p {
            return Err(Error::Config(format!(
                "mixed exponents {} and {}",
                self.p, other.p
            )));
        }
        Ok(())
    }

    /// `a * self + b * other` on the union of windows.
    pub fn lin_comb(&self, a: f64, other: &SeqPoint, b: f64) -> Result<SeqPoint> {
        self.check_compatible(other)?;
        let w = self.window.union(&other.window);
        let entries = w
            .iter()
            .map(|n| self.get(n).scale(a).axpy(b, &other.get(n)))
            .collect();
        Ok(SeqPoint {
            window: w,
            p: self.p,
            dim: self.dim,
            entries,
        })
    }

    pub fn add(&self, other: &SeqPoint) -> Result<SeqPoint> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SeqPoint) -> Result<SeqPoint> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> SeqPoint {
        SeqPoint {
            window: self.window,
            p: self.p,
            dim: self.dim,
            entries: self.entries.iter().map(|v| v.scale(a)).collect(),
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }
}

#[derive(Serialize, Deserialize)]
struct SeqPointJson {
    window: [i64; 2],
    p: f64,
    /// Read only; needed when `entries` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    entries: Vec<(i64, Vec<f64>)>,
}

impl Serialize for SeqPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqPointJson {
            window: [self.window.lo, self.window.hi],
            p: self.p,
            dim: None,
            entries: self
                .entries()
                .map(|(n, v)| (n, v.as_slice().to_vec()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeqPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = SeqPointJson::deserialize(d)?;
        let window = IndexRange::new(j.window[0], j.window[1]).map_err(D::Error::custom)?;
        if !(j.p >= 1.0) {
            return Err(D::Error::custom(format!("p = {} below 1", j.p)));
        }
        let dim = j.dim.or(j.entries.first().map(|e| e.1.len())).unwrap_or(1);
        let mut pt = SeqPoint::zeros(window, dim, j.p);
        for (n, comps) in j.entries {
            if !window.contains(n) {
                return Err(D::Error::custom(format!("entry {n} outside window")));
            }
            if comps.len() != dim {
                return Err(D::Error::custom("entries of different length"));
            }
            pt.set(n, Vector::new(comps).map_err(D::Error::custom)?);
        }
        Ok(pt)
    }
}

/// `(sum_n ||x_n||^p)^{1/p}` with the given fiber norm.
pub fn seq_norm(pt: &SeqPoint, fiber: NormSpec) -> f64 {
    let norms: Vec<f64> = pt
        .entries
        .iter()
        .map(|v| norm_slice(v.as_slice(), fiber))
        .collect();
    norm_slice(&norms, NormSpec::P { p: pt.p })
}

/// Positive weights `n -> w_n` with the declared band `(1/C, C)`.
#[derive(Clone)]
pub struct WeightSeq {
    f: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
    band: f64,
}

impl fmt::Debug for WeightSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSeq")
            .field("band", &self.band)
            .finish()
    }
}

impl WeightSeq {
    pub fn new<F: Fn(i64) -> f64 + Send + Sync + 'static>(f: F, band: f64) -> Self {
        WeightSeq {
            f: Arc::new(f),
            band,
        }
    }

    pub fn constant(w: f64) -> Self {
        let band = w.max(1.0 / w) * 2.0;
        Self::new(move |_| w, band)
    }

    /// Weights read from a table starting at `lo`; indices outside the table
    /// are a configuration error surfaced by a panic naming the index.
    pub fn table(lo: i64, values: Vec<f64>, band: f64) -> Self {
        let hi = lo + values.len() as i64 - 1;
        Self::new(
            move |n| {
                assert!(
                    lo <= n && n <= hi,
                    "weight index {n} outside table [{lo}, {hi}]"
                );
                values[(n - lo) as usize]
            },
            band,
        )
    }

    pub fn at(&self, n: i64) -> f64 {
        (self.f)(n)
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    /// `(all values strictly inside (1/C, C), offending index)` over `window`.
    pub fn check_band(&self, window: IndexRange) -> (bool, Option<i64>) {
        for n in window.iter() {
            let w = self.at(n);
            if !(w > 1.0 / self.band && w < self.band) {
                return (false, Some(n));
            }
        }
        (true, None)
    }
}

/// `sigma_S`: entry `n` of the image is `S_{n+1} x_{n+1}`.
pub fn shift_apply(s: &OperatorSequence, pt: &SeqPoint) -> Result<SeqPoint> {
    if s.dim() != pt.dim {
        return Err(Error::Dimension(
            "operator and point fiber dimension".into(),
        ));
    }
    let w = IndexRange {
        lo: pt.window.lo - 1,
        hi: pt.window.hi - 1,
    };
    let entries = w
        .iter()
        .map(|n| apply_unchecked(&s.get(n + 1), &pt.get(n + 1)))
        .collect();
    Ok(SeqPoint {
        window: w,
        p: pt.p,
        dim: pt.dim,
        entries,
    })
}

/// `sigma_S^{-1}`: entry `n` of the image is `S_n^{-1} y_{n-1}`.
pub fn shift_apply_inverse(s: &OperatorSequence, pt: &SeqPoint) -> Result<SeqPoint> {
    if s.dim() != pt.dim {
        return Err(Error::Dimension(
            "operator and point fiber dimension".into(),
        ));
    }
    let w = IndexRange {
        lo: pt.window.lo + 1,
        hi: pt.window.hi + 1,
    };
    let entries = w
        .iter()
        .map(|n| apply_unchecked(&s.inv(n), &pt.get(n - 1)))
        .collect();
    Ok(SeqPoint {
        window: w,
        p: pt.p,
        dim: pt.dim,
        entries,
    })
}

/// `sigma_S^k`; negative `k` uses the inverse.
pub fn shift_apply_iterate(s: &OperatorSequence, pt: &SeqPoint, k: i64) -> Result<SeqPoint> {
    let mut cur = pt.clone();
    for _ in 0..k.abs() {
        cur = if k > 0 {
            shift_apply(s, &cur)?
        } else {
            shift_apply_inverse(s, &cur)?
        };
    }
    Ok(cur)
}

fn require_scalar(pt: &SeqPoint) -> Result<()> {
    if pt.dim != 1 {
        return Err(Error::Dimension(format!(
            "expected scalar fiber, got dimension {}",
            pt.dim
        )));
    }
    Ok(())
}

/// `B_w`: entry `n` of the image is `w_{n+1} x_{n+1}`.
pub fn wshift_apply(w: &WeightSeq, pt: &SeqPoint) -> Result<SeqPoint> {
    require_scalar(pt)?;
    let win = IndexRange {
        lo: pt.window.lo - 1,
        hi: pt.window.hi - 1,
    };
    let vals: Vec<f64> = win
        .iter()
        .map(|n| w.at(n + 1) * pt.scalar_at(n + 1))
        .collect();
    SeqPoint::scalar(win.lo, &vals, pt.p)
}

/// `B_w^{-1}`: entry `n` of the image is `y_{n-1} / w_n`.
pub fn wshift_apply_inverse(w: &WeightSeq, pt: &SeqPoint) -> Result<SeqPoint> {
    require_scalar(pt)?;
    let win = IndexRange {
        lo: pt.window.lo + 1,
        hi: pt.window.hi + 1,
    };
    let vals: Vec<f64> = win.iter().map(|n| pt.scalar_at(n - 1) / w.at(n)).collect();
    SeqPoint::scalar(win.lo, &vals, pt.p)
}

/// Componentwise weighted shifts on a product of scalar sequence spaces.
pub fn product_shift_apply(factors: &[WeightSeq], pts: &[SeqPoint]) -> Result<Vec<SeqPoint>> {
    if factors.len() != pts.len() {
        return Err(Error::Dimension(format!(
            "{} factors for {} points",
            factors.len(),
            pts.len()
        )));
    }
    factors
        .iter()
        .zip(pts)
        .map(|(w, x)| wshift_apply(w, x))
        .collect()
}

/// Sum norm on the product space.
pub fn product_norm(pts: &[SeqPoint]) -> f64 {
    pts.iter().map(|x| seq_norm(x, NormSpec::Euclidean)).sum()
}

/// Skew product `(x, y) -> (B_w x + B_w y, B_w y)`.
pub fn skew_apply(w: &WeightSeq, pair: (&SeqPoint, &SeqPoint)) -> Result<(SeqPoint, SeqPoint)> {
    let (x, y) = pair;
    if x.p != y.p {
        return Err(Error::Config("skew pair with mixed exponents".into()));
    }
    let by = wshift_apply(w, y)?;
    let first = wshift_apply(w, x)?.add(&by)?;
    Ok((first, by))
}

/// Coordinate split of a planar sequence into its two scalar sequences.
pub fn coordinate_split(pt: &SeqPoint) -> Result<(SeqPoint, SeqPoint)> {
    if pt.dim != 2 {
        return Err(Error::Dimension(
            "coordinate split needs fiber dimension 2".into(),
        ));
    }
    let xs: Vec<f64> = pt.entries.iter().map(|v| v[0]).collect();
    let ys: Vec<f64> = pt.entries.iter().map(|v| v[1]).collect();
    Ok((
        SeqPoint::scalar(pt.window.lo, &xs, pt.p)?,
        SeqPoint::scalar(pt.window.lo, &ys, pt.p)?,
    ))
}

/// Largest componentwise difference between two points of equal dimension.
pub fn max_distance(a: &SeqPoint, b: &SeqPoint) -> f64 {
    let w = a.window.union(&b.window);
    w.iter()
        .map(|n| a.get(n).sub(&b.get(n)).max_abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    fn jordan() -> OperatorSequence {
        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        OperatorSequence::constant(j, 3.0, NormSpec::Max).unwrap()
    }

    #[test]
    fn shift_basics() {
        let id = OperatorSequence::constant(Mat::identity(2), 2.0, NormSpec::Euclidean).unwrap();
        let z = SeqPoint::zeros(IndexRange::symmetric(3), 2, 2.0);
        assert_eq!(shift_apply(&id, &z).unwrap().max_abs(), 0.0);
        let imp = SeqPoint::impulse(0, v(&[1.0, 2.0]), 2.0);
        let out = shift_apply(&id, &imp).unwrap();
        assert_eq!(out.window(), IndexRange { lo: -1, hi: -1 });
        assert_eq!(out.get(-1), v(&[1.0, 2.0]));
    }

    #[test]
    fn jordan_shift_entries() {
        let s = jordan();
        let pt = SeqPoint::from_entries(
            -2,
            vec![v(&[1.0, 2.0]), v(&[3.0, -1.0]), v(&[0.5, 4.0])],
            1.0,
        )
        .unwrap();
        let out = shift_apply(&s, &pt).unwrap();
        for n in -3..=-1 {
            let x = pt.get(n + 1);
            assert_eq!(out.get(n), v(&[x[0] + x[1], x[1]]));
        }
        let imp = SeqPoint::impulse(3, v(&[0.0, 1.0]), 1.0);
        let it = shift_apply_iterate(&s, &imp, 3).unwrap();
        assert_eq!(it.get(0), v(&[3.0, 1.0]));
        assert_eq!(shift_apply_iterate(&s, &pt, 0).unwrap(), pt);
        let back = shift_apply_iterate(&s, &shift_apply_iterate(&s, &pt, 5).unwrap(), -5).unwrap();
        assert!(max_distance(&back, &pt) <= 1e-10);
    }

    #[test]
    fn weighted_shifts() {
        let one = WeightSeq::constant(1.0);
        let imp = SeqPoint::scalar(0, &[1.0], 2.0).unwrap();
        assert_eq!(wshift_apply(&one, &imp).unwrap().scalar_at(-1), 1.0);
        let half = WeightSeq::constant(0.5);
        assert_eq!(wshift_apply(&half, &imp).unwrap().scalar_at(-1), 0.5);
        let jw = WeightSeq::new(
            |n| {
                if n >= 2 {
                    (n - 1) as f64 / n as f64
                } else {
                    1.0
                }
            },
            3.0,
        );
        let at2 = SeqPoint::scalar(2, &[1.0], 2.0).unwrap();
        assert_eq!(wshift_apply(&jw, &at2).unwrap().scalar_at(1), 0.5);
        let back = wshift_apply_inverse(&half, &wshift_apply(&half, &imp).unwrap()).unwrap();
        assert_eq!(back.scalar_at(0), 1.0);
    }

    #[test]
    fn product_and_skew() {
        let imp = SeqPoint::scalar(0, &[1.0], 2.0).unwrap();
        assert!(
            product_shift_apply(&[WeightSeq::constant(0.5)], &[imp.clone(), imp.clone()]).is_err()
        );
        let out = product_shift_apply(
            &[WeightSeq::constant(0.5), WeightSeq::constant(2.0)],
            &[imp.clone(), imp.clone()],
        )
        .unwrap();
        assert_eq!(out[0].scalar_at(-1), 0.5);
        assert_eq!(out[1].scalar_at(-1), 2.0);
        assert_eq!(product_norm(&out), 2.5);

        let one = WeightSeq::constant(1.0);
        let zero = SeqPoint::scalar(0, &[0.0], 2.0).unwrap();
        let (a, b) = skew_apply(&one, (&zero, &imp)).unwrap();
        assert_eq!((a.scalar_at(-1), b.scalar_at(-1)), (1.0, 1.0));
        let (a, b) = skew_apply(&one, (&imp, &zero)).unwrap();
        assert_eq!((a.scalar_at(-1), b.max_abs()), (1.0, 0.0));
    }

    #[test]
    fn norms() {
        let imp = SeqPoint::impulse(4, v(&[0.6, 0.8]), 2.0);
        assert!((seq_norm(&imp, NormSpec::Euclidean) - 1.0).abs() < 1e-15);
        let two = SeqPoint::from_entries(0, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])], 2.0).unwrap();
        assert!((seq_norm(&two, NormSpec::Euclidean) - 2f64.sqrt()).abs() < 1e-15);
        let s = jordan();
        let mut prev = 0.0;
        for k in [1, 10, 100] {
            let it =
                shift_apply_iterate(&s, &SeqPoint::impulse(0, v(&[0.0, 1.0]), 1.0), k).unwrap();
            let n = seq_norm(&it, NormSpec::Max);
            assert_eq!(n, k as f64);
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn json_round_trip() {
        let pt = SeqPoint::from_entries(-1, vec![v(&[1.0, 2.0]), v(&[3.0, 4.0])], 3.0).unwrap();
        let s = serde_json::to_string(&pt).unwrap();
        assert_eq!(
            s,
            r#"{"window":[-1,0],"p":3.0,"entries":[[-1,[1.0,2.0]],[0,[3.0,4.0]]]}"#
        );
        let back: SeqPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pt);
        assert!(
            serde_json::from_str::<SeqPoint>(r#"{"window":[0,1],"p":0.5,"entries":[]}"#).is_err()
        );
    }

    #[test]
    fn mixed_exponents_rejected() {
        let a = SeqPoint::scalar(0, &[1.0], 2.0).unwrap();
        let b = SeqPoint::scalar(0, &[1.0], 1.0).unwrap();
        assert!(matches!(a.add(&b), Err(Error::Config(_))));
    }
}
