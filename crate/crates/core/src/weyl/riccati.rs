use crate::error::Result;
use crate::linalg::{self, block, CMat, C64};
use crate::propagate::WeylSolution;
use crate::system::HamiltonianSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSite {
    pub k: i64,
    /// `V(k) = ρ(k)u₂(k+1)u₁(k)⁻¹`
    pub v: Result<CMat>,
    /// whether `−σ Im V(k) ≻ 0`
    pub sign_ok: bool,
    /// smallest eigenvalue of `−σ Im V(k)`
    pub min_eig: f64,
}

/// Riccati variable of a Weyl solution at every site of `[lo, hi]`.
pub fn riccati_from_solution(
    sys: &HamiltonianSystem,
    u: &WeylSolution,
    sigma: f64,
    lo: i64,
    hi: i64,
) -> Vec<RiccatiSite> {
    (lo..=hi)
        .map(|k| {
            let v = (|| -> Result<CMat> {
                let u1 = u.u1(k)?;
                let rho_u2 = sys.rho(k)? * u.u2_next(k)?;
                linalg::solve_right(&rho_u2, &u1, "riccati u1")
            })();
            let min_eig = match &v {
                Ok(v) => linalg::min_eig(&(linalg::im_part(v) * C64::from(-sigma))),
                Err(_) => f64::NAN,
            };
            RiccatiSite {
                k,
                v,
                sign_ok: min_eig > 0.0,
                min_eig,
            }
        })
        .collect()
}

/// One step of the Riccati recursion: `V(k)` from `V(k−1)`.
pub fn riccati_forward(sys: &HamiltonianSystem, z: C64, k: i64, v_prev: &CMat) -> Result<CMat> {
    let m = sys.m();
    let c = sys.pencil(z, k)?;
    let rho_prev = sys.rho(k - 1)?;
    let inner = rho_prev * linalg::solve(v_prev, rho_prev, "riccati V(k-1)")? - block(&c, 1, 1, m);
    let tail = linalg::solve(&inner, &block(&c, 1, 0, m), "riccati inner matrix")?;
    Ok(block(&c, 0, 0, m) + block(&c, 0, 1, m) * tail)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiResidual {
    pub k: i64,
    pub residual: Result<f64>,
}

/// Residual norms of the Riccati recursion for `V` given at sites `lo, lo+1, ...`.
/// The first site has no predecessor, so the report starts at `lo + 1`.
pub fn riccati_residual(sys: &HamiltonianSystem, z: C64, lo: i64, v: &[CMat]) -> Vec<RiccatiResidual> {
    v.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let k = lo + 1 + i as i64;
            let residual = riccati_forward(sys, z, k, &w[0]).map(|pred| linalg::norm2(&(&w[1] - pred)));
            RiccatiResidual { k, residual }
        })
        .collect()
}
