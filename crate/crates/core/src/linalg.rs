//! Small dense complex matrix helpers.
//!
//! Everything here works on `DMatrix<Complex64>`; block sizes in this crate
//! are tiny (2m ≤ 8) so clarity wins over allocation-free code.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const IM: C64 = Complex64::new(0.0, 1.0);

/// Default relative symmetry tolerance.
pub const TOL_SYM: f64 = 1e-12;
/// Default tolerance for positive semidefiniteness.
pub const TOL_PSD: f64 = 1e-10;
/// Reciprocal condition number below which a matrix counts as singular.
pub const RCOND_MIN: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    CMat::zeros(r, cols)
}

pub fn scalar(n: usize, s: C64) -> CMat {
    CMat::from_diagonal_element(n, n, s)
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    let mut out = zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        out[(i, i)] = c(x, 0.0);
    }
    out
}

/// Assemble `((a, b), (c, d))` from four equally sized square blocks.
pub fn blocks(a: &CMat, b: &CMat, cc: &CMat, d: &CMat) -> CMat {
    let m = a.nrows();
    let mut out = zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((0, m), (m, m)).copy_from(b);
    out.view_mut((m, 0), (m, m)).copy_from(cc);
    out.view_mut((m, m), (m, m)).copy_from(d);
    out
}

pub fn block_diag(a: &CMat, d: &CMat) -> CMat {
    let z = zeros(a.nrows(), a.nrows());
    blocks(a, &z, &z, d)
}

/// The (i, j) block of size `m` of a square block matrix.
pub fn block(x: &CMat, i: usize, j: usize, m: usize) -> CMat {
    x.view((i * m, j * m), (m, m)).into_owned()
}

pub fn top(x: &CMat, m: usize) -> CMat {
    x.rows(0, m).into_owned()
}

pub fn bottom(x: &CMat, m: usize) -> CMat {
    x.rows(m, x.nrows() - m).into_owned()
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// J = ((0, I), (−I, 0)).
pub fn j_unit(m: usize) -> CMat {
    let z = zeros(m, m);
    blocks(&z, &eye(m), &(-eye(m)), &z)
}

/// (X + X*)/2
pub fn herm(x: &CMat) -> CMat {
    (x + x.adjoint()) * c(0.5, 0.0)
}

/// Im X = (X − X*)/(2i)
pub fn im_part(x: &CMat) -> CMat {
    (x - x.adjoint()) * c(0.0, -0.5)
}

/// Re X = (X + X*)/2
pub fn re_part(x: &CMat) -> CMat {
    herm(x)
}

pub fn fro(x: &CMat) -> f64 {
    x.norm()
}

/// Singular values, descending.
pub fn singular_values(x: &CMat) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm.
pub fn norm2(x: &CMat) -> f64 {
    singular_values(x).first().copied().unwrap_or(0.0)
}

/// Reciprocal 2-norm condition number, 0 for an exactly singular or zero matrix.
pub fn rcond(x: &CMat) -> f64 {
    let s = singular_values(x);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Eigenvalues of the Hermitian part of `x`, ascending.
pub fn herm_eigenvalues(x: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = herm(x).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eig(x: &CMat) -> f64 {
    herm_eigenvalues(x).first().copied().unwrap_or(0.0)
}

pub fn max_eig(x: &CMat) -> f64 {
    herm_eigenvalues(x).last().copied().unwrap_or(0.0)
}

/// Hermitian eigendecomposition of the Hermitian part, eigenvalues descending
/// with matching eigenvector columns.
pub fn herm_eigh_desc(x: &CMat) -> (Vec<f64>, CMat) {
    let eig = herm(x).symmetric_eigen();
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

fn herm_fn(x: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eigh_desc(x);
    let d: Vec<f64> = vals.into_iter().map(f).collect();
    &vecs * from_real_diag(&d) * vecs.adjoint()
}

/// Positive square root of a Hermitian positive definite matrix.
pub fn hpd_sqrt(x: &CMat) -> Result<CMat> {
    check_hpd(x, "square root")?;
    Ok(herm_fn(x, f64::sqrt))
}

/// Inverse of the positive square root of a Hermitian positive definite matrix.
pub fn hpd_inv_sqrt(x: &CMat) -> Result<CMat> {
    check_hpd(x, "inverse square root")?;
    Ok(herm_fn(x, |v| 1.0 / v.sqrt()))
}

fn check_hpd(x: &CMat, what: &str) -> Result<()> {
    let lo = min_eig(x);
    if lo <= 0.0 {
        return Err(Error::Input(format!(
            "{what} needs a positive definite matrix (min eigenvalue {lo:.3e})"
        )));
    }
    Ok(())
}

/// Solve `a x = b` after an SVD-based conditioning check.
pub fn solve(a: &CMat, b: &CMat, context: &str) -> Result<CMat> {
    let rc = rcond(a);
    if rc < RCOND_MIN {
        return Err(Error::Singular {
            context: context.to_string(),
            rcond: rc,
        });
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        context: context.to_string(),
        rcond: rc,
    })
}

/// Solve `x a = b`.
pub fn solve_right(b: &CMat, a: &CMat, context: &str) -> Result<CMat> {
    Ok(solve(&a.adjoint(), &b.adjoint(), context)?.adjoint())
}

pub fn inverse(a: &CMat, context: &str) -> Result<CMat> {
    solve(a, &eye(a.nrows()), context)
}

/// Principal square root via the complex Schur form and the triangular
/// recurrence `R_ii = √t_ii`, `R_ij = (t_ij − Σ R_ik R_kj)/(R_ii + R_jj)`.
pub fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let (q, t) = a.clone().schur().unpack();
    let mut r = zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = t[(i, j)];
            for k in (i + 1)..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let den = r[(i, i)] + r[(j, j)];
            if den.norm() == 0.0 {
                return Err(Error::Singular {
                    context: "matrix square root".into(),
                    rcond: 0.0,
                });
            }
            r[(i, j)] = s / den;
        }
    }
    Ok(&q * r * q.adjoint())
}

/// Principal matrix logarithm via inverse scaling and squaring followed by
/// the Gregory series for atanh.
pub fn logm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = eye(n);
    if rcond(a) < RCOND_MIN {
        return Err(Error::Singular {
            context: "matrix logarithm".into(),
            rcond: rcond(a),
        });
    }
    let mut x = a.clone();
    let mut s = 0;
    while norm2(&(&x - &id)) > 0.25 {
        x = sqrtm(&x)?;
        s += 1;
        if s > 64 {
            return Err(Error::NoConvergence {
                what: "matrix logarithm scaling".into(),
                iterations: s,
                residual: norm2(&(&x - &id)),
            });
        }
    }
    let y = solve_right(&(&x - &id), &(&x + &id), "matrix logarithm")?;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for j in 1..200 {
        term = &term * &y2;
        let add = &term * c(1.0 / (2 * j + 1) as f64, 0.0);
        sum += &add;
        if fro(&add) <= 1e-17 * fro(&sum).max(1e-300) {
            break;
        }
    }
    Ok(sum * c(2.0 * (1u64 << s) as f64, 0.0))
}

/// Thin orthonormal basis of the column span, used for renormalizing
/// propagated column blocks.
pub fn orthonormalize(x: &CMat) -> CMat {
    x.clone().qr().q()
}

/// Haar-distributed unitary matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Relative deviation from Hermiticity, ‖X − X*‖ / max(1, ‖X‖).
pub fn hermiticity_defect(x: &CMat) -> f64 {
    fro(&(x - x.adjoint())) / fro(x).max(1.0)
}

/// Parse an `m × n` matrix from row-major complex entries.
pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> Result<CMat> {
    if data.len() != rows * cols {
        return Err(Error::Input(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(CMat::from_row_slice(rows, cols, data))
}
