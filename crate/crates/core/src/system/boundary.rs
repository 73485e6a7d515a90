use crate::error::{Error, Result};
use crate::linalg::{self, hstack, CMat};

use super::HamiltonianSystem;

/// Definiteness class of `Im(γ₁γ₂*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignClass {
    Nonpositive,
    Nonnegative,
    Zero,
}

/// Separated boundary data `γ = (γ₁ γ₂)`, normalized so that `γγ* = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    gamma1: CMat,
    gamma2: CMat,
    sign_class: SignClass,
}

/// Tolerance used to decide the sign class.
const SIGN_TOL: f64 = 1e-12;

impl BoundaryData {
    /// `(I 0)`.
    pub fn dirichlet(m: usize) -> Self {
        BoundaryData {
            gamma1: linalg::eye(m),
            gamma2: linalg::zeros(m, m),
            sign_class: SignClass::Zero,
        }
    }

    /// `(0 I)`.
    pub fn neumann(m: usize) -> Self {
        BoundaryData {
            gamma1: linalg::zeros(m, m),
            gamma2: linalg::eye(m),
            sign_class: SignClass::Zero,
        }
    }

    /// Normalize `(g1 g2)`; see [`make_boundary_data`].
    pub fn from_blocks(g1: &CMat, g2: &CMat) -> Result<Self> {
        if g1.shape() != g2.shape() || g1.nrows() != g1.ncols() {
            return Err(Error::Input("boundary blocks must be square and of equal size".into()));
        }
        make_boundary_data(&hstack(g1, g2))
    }

    /// `(cos(D)W*, sin(D)W*)` for real `d` and unitary `w`: always of sign class zero.
    pub fn from_angles(d: &[f64], w: &CMat) -> Self {
        let cos: Vec<f64> = d.iter().map(|t| t.cos()).collect();
        let sin: Vec<f64> = d.iter().map(|t| t.sin()).collect();
        BoundaryData {
            gamma1: linalg::from_real_diag(&cos) * w.adjoint(),
            gamma2: linalg::from_real_diag(&sin) * w.adjoint(),
            sign_class: SignClass::Zero,
        }
    }

    pub fn m(&self) -> usize {
        self.gamma1.nrows()
    }

    pub fn gamma1(&self) -> &CMat {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &CMat {
        &self.gamma2
    }

    /// The m×2m matrix `(γ₁ γ₂)`.
    pub fn gamma(&self) -> CMat {
        hstack(&self.gamma1, &self.gamma2)
    }

    pub fn sign_class(&self) -> SignClass {
        self.sign_class
    }

    /// `Im(γ₁γ₂*)`.
    pub fn im_product(&self) -> CMat {
        linalg::im_part(&(&self.gamma1 * self.gamma2.adjoint()))
    }

    /// Largest violation of `γ₁γ₁* + γ₂γ₂* = I` and, for class zero,
    /// of `γ₁γ₂* − γ₂γ₁* = 0`.
    pub fn normalization_defect(&self) -> f64 {
        let m = self.m();
        let g = &self.gamma1 * self.gamma1.adjoint() + &self.gamma2 * self.gamma2.adjoint() - linalg::eye(m);
        let mut d = linalg::norm2(&g);
        if self.sign_class == SignClass::Zero {
            let s = &self.gamma1 * self.gamma2.adjoint() - &self.gamma2 * self.gamma1.adjoint();
            d = d.max(linalg::norm2(&s));
        }
        d
    }
}

/// Normalize raw boundary data to `δ = (γγ*)^{-1/2}γ` and classify `Im(δ₁δ₂*)`.
pub fn make_boundary_data(raw: &CMat) -> Result<BoundaryData> {
    let m = raw.nrows();
    if m == 0 || raw.ncols() != 2 * m {
        return Err(Error::Input(format!(
            "boundary data must be m x 2m, got {}x{}",
            raw.nrows(),
            raw.ncols()
        )));
    }
    let gram = raw * raw.adjoint();
    let sv = linalg::singular_values(raw);
    if sv[m - 1] <= 1e-10 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(Error::Input("boundary data is rank deficient".into()));
    }
    let delta = linalg::hpd_inv_sqrt(&gram)? * raw;
    let gamma1 = delta.columns(0, m).into_owned();
    let gamma2 = delta.columns(m, m).into_owned();
    let ev = linalg::herm_eigenvalues(&linalg::im_part(&(&gamma1 * gamma2.adjoint())));
    let (lo, hi) = (ev[0], ev[m - 1]);
    let sign_class = if lo.abs() <= SIGN_TOL && hi.abs() <= SIGN_TOL {
        SignClass::Zero
    } else if hi <= SIGN_TOL {
        SignClass::Nonpositive
    } else if lo >= -SIGN_TOL {
        SignClass::Nonnegative
    } else {
        return Err(Error::Input(format!(
            "Im(γ₁γ₂*) is indefinite (eigenvalues from {lo:.3e} to {hi:.3e}); boundary data must have a semidefinite imaginary part"
        )));
    };
    Ok(BoundaryData {
        gamma1,
        gamma2,
        sign_class,
    })
}

/// `γ̃(k) = γ · diag(ρ(k)^{1/2}, ρ(k)^{1/2})`.
pub fn weighted_boundary(gamma: &BoundaryData, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
    if gamma.m() != sys.m() {
        return Err(Error::Input(format!(
            "boundary data has m = {}, system has m = {}",
            gamma.m(),
            sys.m()
        )));
    }
    let r = linalg::hpd_sqrt(sys.rho(k)?)?;
    Ok(hstack(&(&gamma.gamma1 * &r), &(&gamma.gamma2 * &r)))
}
