//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use shiftlab::classify::Frames;
use shiftlab::shadow::SolveMode;
use shiftlab::{IndexRange, Mat, OperatorSequence, SeqPoint, Vector};

pub fn v(x: &[f64]) -> Vector {
    Vector::from_slice(x).unwrap()
}

pub fn dm(m: &Mat) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m.get(i, j))
}

fn dv(x: &Vector) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Weight of a seed vector from explicit partial products:
/// `||S_[1,n-1]^{-1} x|| / ||S_[1,n]^{-1} x||` for `n >= 1` and
/// `||S_[n,0] x|| / ||S_[n+1,0] x||` for `n <= 0`, in the Euclidean norm
/// or the max norm.
pub fn direct_weight(s: &OperatorSequence, x: &Vector, n: i64, max_norm: bool) -> f64 {
    let norm = |u: &DVector<f64>| if max_norm { u.amax() } else { u.norm() };
    let x = dv(x);
    if n >= 1 {
        let mut u = x.clone();
        let mut prev = norm(&u);
        for j in 1..=n {
            u = dm(&s.get(j)).try_inverse().unwrap() * u;
            if j == n {
                return prev / norm(&u);
            }
            prev = norm(&u);
        }
        unreachable!()
    } else {
        let mut u = x;
        for j in ((n + 1)..=0).rev() {
            u = dm(&s.get(j)) * u;
        }
        norm(&(dm(&s.get(n)) * &u)) / norm(&u)
    }
}

/// `sqrt((G^{-1})_jj)`: the Euclidean norm of the `j`-th coordinate
/// functional of a unit basis, which is the projection norm.
pub fn gram_projection_norm(basis: &[Vector], j: usize) -> f64 {
    let d = basis.len();
    let g = DMatrix::from_fn(d, d, |a, b| basis[a].dot(&basis[b]));
    let gi = g.try_inverse().unwrap();
    (gi[(j, j)]).sqrt() * basis[j].dot(&basis[j]).sqrt()
}

/// Sup of `|alpha_j(u)| ||e_j||` over unit vectors on a latitude-longitude
/// grid (d = 2 or 3).
pub fn sampled_projection_norm(basis: &[Vector], j: usize, steps: usize) -> f64 {
    let d = basis.len();
    let b = DMatrix::from_fn(d, d, |r, c| basis[c][r]);
    let bi = b.try_inverse().unwrap();
    let row = bi.row(j).clone_owned();
    let scale = basis[j].dot(&basis[j]).sqrt();
    let mut best: f64 = 0.0;
    let pi = std::f64::consts::PI;
    match d {
        2 => {
            for i in 0..steps {
                let t = pi * i as f64 / steps as f64;
                best = best.max((row[0] * t.cos() + row[1] * t.sin()).abs());
            }
        }
        3 => {
            for i in 0..=steps {
                let th = pi * i as f64 / steps as f64;
                for k in 0..2 * steps {
                    let ph = pi * k as f64 / steps as f64;
                    let u = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                    best = best.max((row[0] * u[0] + row[1] * u[1] + row[2] * u[2]).abs());
                }
            }
        }
        _ => panic!("sampling oracle covers d = 2, 3"),
    }
    best * scale
}

/// `min ||m u||` over unit `u` in the cone about `axis` of half-angle `a`,
/// from the eigen-structure of `m^T m` restricted to the arc.
pub fn exact_cone_min(m: &Mat, axis: &Vector, a: f64) -> f64 {
    let mm = Matrix2::new(m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let q = mm.transpose() * mm;
    let base = axis[1].atan2(axis[0]);
    let f = |t: f64| {
        let u = Vector2::new(t.cos(), t.sin());
        (u.transpose() * q * u)[(0, 0)]
    };
    // u^T Q u = c0 + c cos 2t + q01 sin 2t is stationary at t = phi/2 + k pi/2
    let phi = q[(0, 1)].atan2((q[(0, 0)] - q[(1, 1)]) / 2.0);
    let pi = std::f64::consts::PI;
    let mut best = f(base - a).min(f(base + a));
    for k in -4..=4 {
        let t = phi / 2.0 + k as f64 * pi / 2.0;
        // f has period pi
        let rel = (t - base) - pi * ((t - base) / pi).round();
        if rel.abs() <= a {
            best = best.min(f(base + rel));
        }
    }
    best.sqrt()
}

/// Dense least-squares solve of `x^(t+1)_n - S_{n+1} x^(t)_{n+1} = z^(t)_n`
/// on `window`, with `x` vanishing outside it and one pinned coordinate per
/// diagonal `n + t = m` of each factor, as selected by its mode:
/// `t = 0` for forward, `t = T` for backward and the crossing of `n = 0`
/// (clamped to `[0, T]`) for split.
pub fn dense_shadow_oracle(
    s: &OperatorSequence,
    frames: &Frames,
    modes: &[SolveMode],
    defects: &[SeqPoint],
    window: IndexRange,
) -> Vec<SeqPoint> {
    let d = s.dim();
    let t_steps = defects.len() as i64;
    let len = window.len() as i64;
    let cols = ((t_steps + 1) * len * d as i64) as usize;
    let idx = |t: i64, n: i64, c: usize| ((t * len + (n - window.lo)) as usize) * d + c;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for t in 0..t_steps {
        for n in (window.lo - 1)..=window.hi {
            let sm = dm(&s.get(n + 1));
            let z = defects[t as usize].get(n);
            for c in 0..d {
                let mut row = Vec::new();
                if window.contains(n) {
                    row.push((idx(t + 1, n, c), 1.0));
                }
                if window.contains(n + 1) {
                    for k in 0..d {
                        row.push((idx(t, n + 1, k), -sm[(c, k)]));
                    }
                }
                let rhs = if z.dim() == d { z[c] } else { 0.0 };
                rows.push((row, rhs));
            }
        }
    }
    let dual = |n: i64| dm(&shiftlab::linalg::dual_basis(&frames.basis_at(n)).unwrap());
    for (b, mode) in modes.iter().enumerate() {
        for m in window.lo..=(window.hi + t_steps) {
            let pin = match mode {
                SolveMode::Forward => 0,
                SolveMode::Backward => t_steps,
                SolveMode::Split => m.clamp(0, t_steps),
            };
            let n = m - pin;
            if !window.contains(n) {
                continue;
            }
            let r = dual(n);
            rows.push(((0..d).map(|k| (idx(pin, n, k), r[(b, k)])).collect(), 0.0));
        }
    }
    let mut a = DMatrix::<f64>::zeros(rows.len(), cols);
    let mut rhs = DVector::<f64>::zeros(rows.len());
    for (i, (row, r)) in rows.iter().enumerate() {
        for &(j, val) in row {
            a[(i, j)] += val;
        }
        rhs[i] = *r;
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-13).unwrap();
    (0..=t_steps)
        .map(|t| {
            let entries = window
                .iter()
                .map(|n| Vector::new((0..d).map(|c| sol[idx(t, n, c)]).collect()).unwrap())
                .collect();
            SeqPoint::from_entries(window.lo, entries, defects[0].p()).unwrap()
        })
        .collect()
}
