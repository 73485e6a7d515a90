use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, CMat};

use super::{BoundaryData, Extension, HamiltonianSystem};

/// The unitary data of [`normal_form`]: `Q(k)` diagonalizes ρ(k) and `ε̃(k)`
/// is the ±1 diagonal making the new weights positive.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormRecord {
    k_min: i64,
    /// Q(k) for k = k_min − 1 ..= k_max.
    q: Vec<CMat>,
    /// diagonal of ε̃(k) for k = k_min ..= k_max + 1.
    eps: Vec<Vec<f64>>,
}

impl NormalFormRecord {
    fn idx(&self, k: i64, off: i64, len: usize) -> Result<usize> {
        let i = k - self.k_min + off;
        if i < 0 || i >= len as i64 {
            return Err(Error::Domain {
                k,
                lo: self.k_min,
                hi: self.k_min + self.eps.len() as i64 - 2,
            });
        }
        Ok(i as usize)
    }

    pub fn q(&self, k: i64) -> Result<&CMat> {
        Ok(&self.q[self.idx(k, 1, self.q.len())?])
    }

    pub fn eps(&self, k: i64) -> Result<CMat> {
        Ok(linalg::from_real_diag(&self.eps[self.idx(k, 0, self.eps.len())?]))
    }

    /// `U(k) = U_ε(k) U_ρ(k) = diag(ε̃(k)Q(k), ε̃(k)Q(k−1))`, acting on plain states.
    pub fn u(&self, k: i64) -> Result<CMat> {
        let e = self.eps(k)?;
        Ok(block_diag(&(&e * self.q(k)?), &(&e * self.q(k - 1)?)))
    }

    /// The map of hat states `(ψ₁(k), ψ₂(k+1)) ↦ (ε̃(k)Q(k)ψ₁(k), ε̃(k+1)Q(k)ψ₂(k+1))`.
    pub fn hat_transform(&self, k: i64) -> Result<CMat> {
        let q = self.q(k)?;
        Ok(block_diag(&(self.eps(k)? * q), &(self.eps(k + 1)? * q)))
    }
}

/// Transform to an equivalent system with diagonal positive weights
/// `d(k) = ε̃(k)ε̃(k+1)d̃(k)`, where `Q(k)ρ(k)Q(k)⁻¹ = d̃(k)` (eigenvalues
/// descending) and `ε̃(k_min) = I`. Both A and B transform by `U(k)·U(k)⁻¹`.
///
/// The result is exact on the stored window; outside it the new system uses
/// the original extension policy on the transformed coefficients.
pub fn normal_form(sys: &HamiltonianSystem) -> Result<(HamiltonianSystem, NormalFormRecord)> {
    let m = sys.m();
    let (k_min, k_max) = (sys.k_min(), sys.k_max());
    let mut q = Vec::with_capacity(sys.len() + 1);
    let mut dt = Vec::with_capacity(sys.len() + 1);
    for k in (k_min - 1)..=k_max {
        let r = match sys.rho(k) {
            Ok(r) => r,
            Err(_) if k == k_min - 1 => sys.rho(k_min)?,
            Err(e) => return Err(e),
        };
        if linalg::hermiticity_defect(r) > linalg::TOL_SYM {
            return Err(Error::Input(format!("rho({k}) is not Hermitian")));
        }
        let (vals, vecs) = linalg::herm_eigh_desc(r);
        let scale = vals.iter().fold(0f64, |a, v| a.max(v.abs()));
        if vals.iter().any(|v| v.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE)) || scale == 0.0 {
            return Err(Error::Input(format!("rho({k}) is singular")));
        }
        q.push(vecs.adjoint());
        dt.push(vals);
    }
    // ε̃(k+1) = ε̃(k)·sign(d̃(k))
    let mut eps = vec![vec![1.0; m]];
    for k in k_min..=k_max {
        let prev = eps.last().unwrap();
        let d = &dt[(k - k_min + 1) as usize];
        eps.push(prev.iter().zip(d).map(|(e, v)| e * v.signum()).collect());
    }
    let rec = NormalFormRecord { k_min, q, eps };
    let mut a = Vec::with_capacity(sys.len());
    let mut b = Vec::with_capacity(sys.len());
    let mut rho = Vec::with_capacity(sys.len());
    for k in k_min..=k_max {
        let u = rec.u(k)?;
        let ui = u.adjoint();
        a.push(linalg::herm(&(&u * sys.a(k)? * &ui)));
        b.push(linalg::herm(&(&u * sys.b(k)? * &ui)));
        let d = &dt[(k - k_min + 1) as usize];
        rho.push(linalg::from_real_diag(&d.iter().map(|v| v.abs()).collect::<Vec<_>>()));
    }
    let out = HamiltonianSystem::new(m, k_min, a, b, rho, sys.extension())?;
    Ok((out, rec))
}

/// Transform to weights ρ ≡ I via `𝒟(k) = diag(ρ(k), ρ(k−1))`:
/// `Ã = 𝒟^{-1/2} A 𝒟^{-1/2}`, `B̃ = 𝒟^{-1/2} B 𝒟^{-1/2}`.
///
/// Boundary data carry over unchanged (they act on the new system without
/// weights). When ρ(k_min − 1) is unreachable the window loses its first site.
pub fn to_unit_rho(
    sys: &HamiltonianSystem,
    alpha: &BoundaryData,
    beta: &BoundaryData,
) -> Result<(HamiltonianSystem, BoundaryData, BoundaryData)> {
    let m = sys.m();
    let start = if sys.extension() == Extension::Error {
        sys.k_min() + 1
    } else {
        sys.k_min()
    };
    if start > sys.k_max() {
        return Err(Error::Input("window too short for the unit-weight transform".into()));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in start..=sys.k_max() {
        let d = block_diag(&linalg::hpd_inv_sqrt(sys.rho(k)?)?, &linalg::hpd_inv_sqrt(sys.rho(k - 1)?)?);
        a.push(linalg::herm(&(&d * sys.a(k)? * &d)));
        b.push(linalg::herm(&(&d * sys.b(k)? * &d)));
    }
    let n = a.len();
    let out = HamiltonianSystem::new(m, start, a, b, vec![linalg::eye(m); n], sys.extension())?;
    Ok((out, alpha.clone(), beta.clone()))
}
