//! Small dense real linear algebra for fiber dimensions 1 through 4.
//!
//! Inverses use closed-form cofactor expansion. The spectral norm and the
//! eigen-decomposition used by joint diagonalization go through `nalgebra`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported fiber dimension.
pub const MAX_DIM: usize = 4;

/// Matrices with `|det|` at or below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// A real fiber vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() || entries.len() > MAX_DIM {
            return Err(Error::Dimension(format!(
                "vector length {} outside 1..={MAX_DIM}",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector entry".into()));
        }
        Ok(Vector(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(d: usize) -> Self {
        Vector(vec![0.0; d])
    }

    /// The `i`-th canonical basis vector.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A square real matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    d: usize,
    entries: Vec<f64>,
}

impl Mat {
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 || d > MAX_DIM || entries.len() != d * d {
            return Err(Error::Dimension(format!(
                "matrix of dimension {d} with {} entries",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(Mat { d, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(d, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vector]) -> Result<Self> {
        let d = cols.len();
        if d == 0 || cols.iter().any(|c| c.dim() != d) {
            return Err(Error::Dimension("columns must form a square matrix".into()));
        }
        let mut e = vec![0.0; d * d];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..d {
                e[i * d + j] = c[i];
            }
        }
        Self::new(d, e)
    }

    pub fn identity(d: usize) -> Self {
        Self::diag(&vec![1.0; d])
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        let mut e = vec![0.0; d * d];
        for (i, v) in values.iter().enumerate() {
            e[i * d + i] = *v;
        }
        Mat { d, entries: e }
    }

    /// Rotation of the plane by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat {
            d: 2,
            entries: vec![c, -s, s, c],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.d).map(|i| self.get(i, j)).collect())
    }

    pub fn row(&self, i: usize) -> Vector {
        Vector(self.entries[i * self.d..(i + 1) * self.d].to_vec())
    }

    pub fn transpose(&self) -> Mat {
        let d = self.d;
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                e[j * d + i] = self.get(i, j);
            }
        }
        Mat { d, entries: e }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            d: self.d,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        Mat {
            d: self.d,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat {
            d: self.d,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Mat) -> Mat {
        let d = self.d;
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    e[i * d + j] += a * other.get(k, j);
                }
            }
        }
        Mat { d, entries: e }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| i == j || self.get(i, j).abs() <= tol))
    }

    pub fn det(&self) -> f64 {
        det_rows(&self.entries, self.d)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.d, self.d, &self.entries)
    }
}

fn det_rows(e: &[f64], d: usize) -> f64 {
    match d {
        1 => e[0],
        2 => e[0] * e[3] - e[1] * e[2],
        3 => {
            e[0] * (e[4] * e[8] - e[5] * e[7]) - e[1] * (e[3] * e[8] - e[5] * e[6])
                + e[2] * (e[3] * e[7] - e[4] * e[6])
        }
        _ => {
            let mut acc = 0.0;
            for j in 0..d {
                let m = minor(e, d, 0, j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * e[j] * det_rows(&m, d - 1);
            }
            acc
        }
    }
}

fn minor(e: &[f64], d: usize, row: usize, col: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity((d - 1) * (d - 1));
    for i in (0..d).filter(|&i| i != row) {
        for j in (0..d).filter(|&j| j != col) {
            m.push(e[i * d + j]);
        }
    }
    m
}

/// Matrix-vector product.
pub fn apply(m: &Mat, v: &Vector) -> Result<Vector> {
    if m.d != v.dim() {
        return Err(Error::Dimension(format!(
            "matrix {} vs vector {}",
            m.d,
            v.dim()
        )));
    }
    Ok(apply_unchecked(m, v))
}

pub(crate) fn apply_unchecked(m: &Mat, v: &Vector) -> Vector {
    let d = m.d;
    Vector(
        (0..d)
            .map(|i| (0..d).map(|j| m.entries[i * d + j] * v.0[j]).sum())
            .collect(),
    )
}

/// Closed-form cofactor inverse.
pub fn invert(m: &Mat) -> Result<Mat> {
    let d = m.d;
    let det = m.det();
    if det.abs() <= SINGULAR_TOL || !det.is_finite() {
        return Err(Error::Singular(det));
    }
    if d == 1 {
        return Ok(Mat {
            d,
            entries: vec![1.0 / m.entries[0]],
        });
    }
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adjugate is the transposed cofactor matrix
            inv[j * d + i] = sign * det_rows(&minor(&m.entries, d, i, j), d - 1) / det;
        }
    }
    Mat::new(d, inv)
}

/// Choice of fiber norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Euclidean,
    /// The max-norm (p = infinity).
    Max,
    P {
        p: f64,
    },
}

impl NormSpec {
    pub fn p(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Config(format!("norm exponent {p} below 1")));
        }
        Ok(if p.is_infinite() {
            NormSpec::Max
        } else if p == 2.0 {
            NormSpec::Euclidean
        } else {
            NormSpec::P { p }
        })
    }

    /// The exponent of the dual norm.
    pub fn dual(&self) -> NormSpec {
        match *self {
            NormSpec::Euclidean => NormSpec::Euclidean,
            NormSpec::Max => NormSpec::P { p: 1.0 },
            NormSpec::P { p } if p == 1.0 => NormSpec::Max,
            NormSpec::P { p } => NormSpec::P { p: p / (p - 1.0) },
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, NormSpec::Euclidean)
    }
}

pub fn vnorm(v: &Vector, n: NormSpec) -> f64 {
    norm_slice(v.as_slice(), n)
}

pub(crate) fn norm_slice(v: &[f64], n: NormSpec) -> f64 {
    match n {
        NormSpec::Euclidean => {
            // scaled to avoid overflow on long products
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 || !m.is_finite() {
                return m;
            }
            m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
        }
        NormSpec::Max => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        NormSpec::P { p } if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
        NormSpec::P { p } => {
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * v
                .iter()
                .map(|x| (x.abs() / m).powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }
}

/// Unit vector in the direction of `v` for the given norm.
pub fn normalize(v: &Vector, n: NormSpec) -> Result<Vector> {
    let r = vnorm(v, n);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v.scale(1.0 / r))
}

/// Euclidean cosine of the angle between two nonzero vectors, clamped to [-1, 1].
pub fn cos_angle(u: &Vector, v: &Vector) -> Result<f64> {
    let nu = vnorm(u, NormSpec::Euclidean);
    let nv = vnorm(v, NormSpec::Euclidean);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Gram matrix of a family of vectors.
pub fn gram(basis: &[Vector]) -> Result<Mat> {
    let d = basis.len();
    let mut e = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            e[i * d + j] = basis[i].dot(&basis[j]);
        }
    }
    Mat::new(d, e)
}

fn basis_matrix(basis: &[Vector]) -> Result<Mat> {
    let d = basis.first().map(Vector::dim).unwrap_or(0);
    if basis.len() != d {
        return Err(Error::Dimension(format!(
            "{} vectors in dimension {d}",
            basis.len()
        )));
    }
    // Gram determinant of the normalized family, so the test is scale free.
    let mut unit = Vec::with_capacity(d);
    for b in basis {
        unit.push(normalize(b, NormSpec::Euclidean).map_err(|_| Error::DegenerateBasis(0.0))?);
    }
    let g = gram(&unit)?.det();
    if g <= SINGULAR_TOL {
        return Err(Error::DegenerateBasis(g));
    }
    Mat::from_columns(basis)
}

/// Coefficients of `v` in the given basis.
pub fn coordinates_in_basis(v: &Vector, basis: &[Vector]) -> Result<Vec<f64>> {
    let b = basis_matrix(basis)?;
    if v.dim() != b.dim() {
        return Err(Error::Dimension("vector and basis dimension differ".into()));
    }
    let inv = invert(&b)?;
    Ok(apply_unchecked(&inv, v).into_inner())
}

/// Dual-basis rows: row `i` maps a vector to its `i`-th coordinate.
pub fn dual_basis(basis: &[Vector]) -> Result<Mat> {
    invert(&basis_matrix(basis)?)
}

/// Operator norm of the coordinate projection `v -> alpha_j(v) * basis[j]`.
///
/// The projection has rank one, so its norm is `||basis[j]|| * ||r_j||_*`
/// where `r_j` is the `j`-th dual-basis row and `||.||_*` the dual norm.
/// In the Euclidean plane this equals `1 / sin` of the angle between the two
/// basis vectors.
pub fn projection_operator_norm(target_index: usize, basis: &[Vector], n: NormSpec) -> Result<f64> {
    if target_index >= basis.len() {
        return Err(Error::Dimension(format!(
            "index {target_index} out of range"
        )));
    }
    let inv = dual_basis(basis)?;
    Ok(vnorm(&basis[target_index], n) * vnorm(&inv.row(target_index), n.dual()))
}

/// Operator norm of `m` induced by the fiber norm.
pub fn operator_norm(m: &Mat, n: NormSpec) -> f64 {
    let d = m.dim();
    match n {
        NormSpec::Euclidean => m
            .to_nalgebra()
            .singular_values()
            .iter()
            .fold(0.0, |a: f64, b| a.max(*b)),
        NormSpec::Max => (0..d)
            .map(|i| (0..d).map(|j| m.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormSpec::P { p } if p == 1.0 => (0..d)
            .map(|j| (0..d).map(|i| m.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormSpec::P { .. } => sampled_operator_norm(m, n, SPHERE_SAMPLES),
    }
}

/// Number of sphere directions used for norms without a closed form.
pub const SPHERE_SAMPLES: usize = 4096;

/// Lower estimate of `sup ||m v|| / ||v||` from deterministic directions.
pub fn sampled_operator_norm(m: &Mat, n: NormSpec, samples: usize) -> f64 {
    let mut best: f64 = 0.0;
    for v in sphere_directions(m.dim(), samples) {
        let r = vnorm(&apply_unchecked(m, &v), n) / vnorm(&v, n);
        best = best.max(r);
    }
    best
}

/// Deterministic, roughly uniform directions on the Euclidean unit sphere.
///
/// Circle points in the plane, a golden-angle spiral in dimension 3 and a
/// Halton-based sampling in dimension 4.
pub fn sphere_directions(d: usize, samples: usize) -> Vec<Vector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    match d {
        1 => vec![Vector(vec![1.0])],
        2 => (0..samples)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / samples as f64;
                Vector(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => (0..samples)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / samples as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * k as f64;
                Vector(vec![r * phi.cos(), r * phi.sin(), z])
            })
            .collect(),
        _ => (0..samples)
            .map(|k| {
                let u: Vec<f64> = [2u64, 3, 5, 7]
                    .iter()
                    .map(|b| halton(k as u64 + 1, *b))
                    .collect();
                // Box-Muller style map of uniform points to Gaussian coordinates
                let g: Vec<f64> = (0..d)
                    .map(|i| {
                        let a = u[i % 4].max(1e-12);
                        let b = u[(i + 1) % 4];
                        (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()
                    })
                    .collect();
                let v = Vector(g);
                normalize(&v, NormSpec::Euclidean).unwrap_or_else(|_| Vector::unit(d, 0))
            })
            .collect(),
    }
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Upper-triangular Cholesky factor `R` with `G = R^T R`; the columns of `R`
/// realize a family with Gram matrix `G`.
pub fn cholesky_columns(g: &Mat) -> Result<Vec<Vector>> {
    let d = g.dim();
    let mut r = vec![0.0; d * d];
    for j in 0..d {
        for i in 0..=j {
            let mut s = g.get(i, j);
            for k in 0..i {
                s -= r[k * d + i] * r[k * d + j];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::DegenerateBasis(s));
                }
                r[i * d + j] = s.sqrt();
            } else {
                r[i * d + j] = s / r[i * d + i];
            }
        }
    }
    let rm = Mat::new(d, r)?;
    Ok((0..d).map(|j| rm.column(j)).collect())
}

/// True when no eigenvalue of `m` lies on the unit circle (within `tol`).
pub fn is_hyperbolic_matrix(m: &Mat, tol: f64) -> bool {
    m.to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .all(|z| (z.norm() - 1.0).abs() > tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    #[test]
    fn apply_identity_and_eigenvector() {
        let id = Mat::identity(2);
        assert_eq!(apply(&id, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));

        let l = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap();
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        let out = apply(&l, &v(&[1.0, phi])).unwrap();
        assert!((out[0] - lam).abs() < 1e-14);
        assert!((out[1] - lam * phi).abs() < 1e-14);

        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(apply(&j, &v(&[0.0, 1.0])).unwrap(), v(&[1.0, 1.0]));
    }

    #[test]
    fn apply_rejects_mismatch() {
        assert!(apply(&Mat::identity(3), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert(&Mat::identity(3)).unwrap(), Mat::identity(3));
        assert_eq!(
            invert(&Mat::diag(&[2.0, 0.5])).unwrap(),
            Mat::diag(&[0.5, 2.0])
        );
        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let ji = invert(&j).unwrap();
        assert_eq!(ji, Mat::from_rows(&[&[1.0, -1.0], &[0.0, 1.0]]).unwrap());
        assert!(j.mul(&ji).sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn invert_singular() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(invert(&m), Err(Error::Singular(_))));
    }

    #[test]
    fn invert_four_by_four() {
        let m = Mat::from_rows(&[
            &[4.0, 1.0, 0.0, 2.0],
            &[1.0, 3.0, 1.0, 0.0],
            &[0.0, 1.0, 5.0, 1.0],
            &[2.0, 0.0, 1.0, 6.0],
        ])
        .unwrap();
        let p = m.mul(&invert(&m).unwrap());
        assert!(p.sub(&Mat::identity(4)).max_abs() < 1e-12);
    }

    #[test]
    fn norms() {
        assert_eq!(vnorm(&v(&[3.0, 4.0]), NormSpec::Euclidean), 5.0);
        for n in 1..20 {
            assert_eq!(vnorm(&v(&[-(n as f64), 1.0]), NormSpec::Max), n as f64);
        }
        assert_eq!(vnorm(&v(&[1.0, 1.0, 1.0]), NormSpec::p(1.0).unwrap()), 3.0);
        assert_eq!(vnorm(&Vector::zeros(3), NormSpec::p(3.0).unwrap()), 0.0);
    }

    #[test]
    fn cosines() {
        assert_eq!(cos_angle(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let c = cos_angle(&v(&[1.0, phi]), &v(&[1.0, -(5f64.sqrt() + 1.0) / 2.0])).unwrap();
        assert!(c.abs() < 1e-15);
        for n in [1.0, 10.0, 1000.0] {
            let c = cos_angle(&v(&[1.0, 0.0]), &v(&[1.0, 1.0 / n])).unwrap();
            assert!((c - n / (n * n + 1.0).sqrt()).abs() < 1e-15);
        }
        assert!(matches!(
            cos_angle(&Vector::zeros(2), &v(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn coordinates() {
        let canon: Vec<Vector> = (0..3).map(|i| Vector::unit(3, i)).collect();
        assert_eq!(
            coordinates_in_basis(&Vector::unit(3, 0), &canon).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        for n in [1.0, 7.0, 100.0] {
            let basis = vec![v(&[1.0, 0.0]), v(&[1.0, 1.0 / n])];
            let a = coordinates_in_basis(&v(&[0.0, 1.0]), &basis).unwrap();
            assert!((a[0] + n).abs() < 1e-9 && (a[1] - n).abs() < 1e-9);
        }
        let flat = vec![v(&[1.0, 0.0]), v(&[2.0, 0.0])];
        assert!(matches!(
            coordinates_in_basis(&v(&[1.0, 1.0]), &flat),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn projection_norms() {
        let canon: Vec<Vector> = (0..2).map(|i| Vector::unit(2, i)).collect();
        assert!(
            (projection_operator_norm(0, &canon, NormSpec::Euclidean).unwrap() - 1.0).abs() < 1e-15
        );
        for n in [2.0, 10.0, 50.0] {
            let basis = vec![v(&[1.0, 0.0]), v(&[1.0, 1.0 / n])];
            let p = projection_operator_norm(1, &basis, NormSpec::Max).unwrap();
            assert!(p >= n - 1e-9);
        }
    }

    #[test]
    fn projection_norm_plane_matches_angle_formula() {
        let a = 0.3f64;
        let basis = vec![v(&[1.0, 0.0]), v(&[a.cos(), a.sin()])];
        for j in 0..2 {
            let p = projection_operator_norm(j, &basis, NormSpec::Euclidean).unwrap();
            assert!((p - 1.0 / a.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_norms() {
        let r = Mat::rotation(1.1).scale(0.5);
        assert!((operator_norm(&r, NormSpec::Euclidean) - 0.5).abs() < 1e-14);
        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(operator_norm(&j, NormSpec::Max), 2.0);
        assert_eq!(operator_norm(&j, NormSpec::p(1.0).unwrap()), 2.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((operator_norm(&j, NormSpec::Euclidean) - golden).abs() < 1e-14);
    }

    #[test]
    fn cholesky_realizes_gram() {
        let g = Mat::from_rows(&[
            &[1.0, -0.5, -0.49],
            &[-0.5, 1.0, -0.49],
            &[-0.49, -0.49, 1.0],
        ])
        .unwrap();
        let cols = cholesky_columns(&g).unwrap();
        let back = gram(&cols).unwrap();
        assert!(back.sub(&g).max_abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_matrices() {
        assert!(is_hyperbolic_matrix(&Mat::diag(&[2.0, 0.5]), 1e-9));
        assert!(!is_hyperbolic_matrix(&Mat::rotation(0.7), 1e-9));
    }
}
