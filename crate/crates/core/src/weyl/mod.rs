//! M-functions, Weyl disks, half-line limits, Herglotz structure, spectral
//! measures and the Riccati recursion.

mod limit;
mod measure;
mod riccati;

pub use limit::{
    beta_family, disk_diameter_estimate, half_line_m, herglotz_check, herglotz_check_fn, limit_m, m_sweep,
    weyl_solution_sweep, Classification, HalfLineLimit, HerglotzReport, HerglotzSource, HerglotzViolation,
    HerglotzViolationKind, LimitOptions,
};
pub use measure::{
    fit_affine_part, fit_linear_part, locate_atoms, spectral_measure, xi_function, Atom, MeasureOptions,
    SpectralMeasure, XiPoint,
};
pub use riccati::{riccati_forward, riccati_from_solution, riccati_residual, RiccatiResidual, RiccatiSite};

use crate::error::{Error, Result};
use crate::linalg::{self, vstack, CMat, C64, IM, RCOND_MIN};
use crate::propagate::{self, FundamentalMatrix, Trajectory};
use crate::system::{weighted_boundary, BoundaryData, HamiltonianSystem};

/// Direction of a half-line limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Plus => "+inf",
            Direction::Minus => "-inf",
        })
    }
}

/// `σ(ℓ, k₀, z) = sign((ℓ − k₀) Im z)`.
pub fn sigma(ell: i64, k0: i64, z: C64) -> f64 {
    ((ell - k0) as f64 * z.im).signum()
}

/// Tolerance for "sign class zero" of α in disk computations.
const ALPHA_TOL: f64 = 1e-12;

/// Data shared by the disk computations at `(z, k₀, ℓ, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskContext {
    z: C64,
    k0: i64,
    ell: i64,
    alpha: BoundaryData,
    sigma: f64,
    interval_nontrivial: bool,
    a_definite: bool,
}

impl DiskContext {
    pub fn new(sys: &HamiltonianSystem, z: C64, k0: i64, ell: i64, alpha: &BoundaryData) -> Result<Self> {
        if z.im == 0.0 {
            return Err(Error::Input("disk computations need Im z != 0".into()));
        }
        if ell == k0 {
            return Err(Error::Input("ell must differ from k0".into()));
        }
        if alpha.m() != sys.m() {
            return Err(Error::Input("alpha has the wrong block size".into()));
        }
        if linalg::norm2(&alpha.im_product()) > ALPHA_TOL {
            return Err(Error::Input("alpha must satisfy Im(α₁α₂*) = 0".into()));
        }
        let (lo, hi) = (k0.min(ell) + 1, k0.max(ell));
        let mut a_definite = true;
        for k in lo..=hi {
            if linalg::min_eig(sys.a(k)?) <= linalg::TOL_PSD {
                a_definite = false;
                break;
            }
        }
        Ok(DiskContext {
            z,
            k0,
            ell,
            alpha: alpha.clone(),
            sigma: sigma(ell, k0, z),
            interval_nontrivial: (ell - k0).abs() >= 2,
            a_definite,
        })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn ell(&self) -> i64 {
        self.ell
    }

    pub fn alpha(&self) -> &BoundaryData {
        &self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `⁺[k₀, ℓ]` has more than one site.
    pub fn interval_nontrivial(&self) -> bool {
        self.interval_nontrivial
    }

    /// A ≻ 0 at every site of `⁺[k₀, ℓ]`.
    pub fn a_definite(&self) -> bool {
        self.a_definite
    }

    /// Whether the interval condition needed by the disk theory holds.
    pub fn interval_condition(&self) -> bool {
        self.interval_nontrivial || self.a_definite
    }

    /// `⁺[k₀, ℓ] = [min + 1, max]`.
    pub fn plus_interval(&self) -> (i64, i64) {
        (self.k0.min(self.ell) + 1, self.k0.max(self.ell))
    }

    /// Same context at another `ℓ`.
    pub fn at_ell(&self, sys: &HamiltonianSystem, ell: i64) -> Result<Self> {
        DiskContext::new(sys, self.z, self.k0, ell, &self.alpha)
    }

    /// Same context at `z̄`.
    pub fn conjugate(&self, sys: &HamiltonianSystem) -> Result<Self> {
        DiskContext::new(sys, self.z.conj(), self.k0, self.ell, &self.alpha)
    }

    /// Fundamental system covering `[min(k₀,ℓ), max(k₀,ℓ)]`.
    pub fn fundamental(&self, sys: &HamiltonianSystem) -> Result<FundamentalMatrix> {
        propagate::fundamental(sys, self.z, self.k0, &self.alpha, self.k0.min(self.ell), self.k0.max(self.ell))
    }
}

/// A regular M-function value with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MFunction {
    pub m: CMat,
    pub context: DiskContext,
    pub beta: BoundaryData,
    /// reciprocal condition number of `β̃Φ̂(ℓ)`
    pub rcond: f64,
    /// smallest singular value of `β̃Φ̂(ℓ)`
    pub sigma_min: f64,
}

/// `M = −[β̃Φ̂(ℓ)]⁻¹ [β̃Θ̂(ℓ)]` from an existing fundamental system; any z.
pub fn m_from_fundamental(
    sys: &HamiltonianSystem,
    fund: &FundamentalMatrix,
    ell: i64,
    beta: &BoundaryData,
) -> Result<(CMat, f64, f64)> {
    let bt = weighted_boundary(beta, sys, ell)?;
    let bphi = &bt * fund.phi_hat(ell)?;
    let btheta = &bt * fund.theta_hat(ell)?;
    let sv = linalg::singular_values(&bphi);
    let smin = *sv.last().unwrap();
    let rc = if sv[0] > 0.0 { smin / sv[0] } else { 0.0 };
    if rc < RCOND_MIN {
        return Err(Error::EigenvalueHit { ell, rcond: rc });
    }
    let m = -linalg::solve(&bphi, &btheta, "boundary matrix").map_err(|_| Error::EigenvalueHit { ell, rcond: rc })?;
    Ok((m, rc, smin))
}

/// Regular M-function at any `z` (real `z` included, where poles are eigenvalues).
pub fn m_function(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    ell: i64,
    alpha: &BoundaryData,
    beta: &BoundaryData,
) -> Result<CMat> {
    if ell == k0 {
        return Err(Error::Input("ell must differ from k0".into()));
    }
    let fund = propagate::fundamental(sys, z, k0, alpha, k0.min(ell), k0.max(ell))?;
    Ok(m_from_fundamental(sys, &fund, ell, beta)?.0)
}

/// Weyl–Titchmarsh M-function of the regular problem on `[k₀, ℓ]`.
pub fn m_regular(sys: &HamiltonianSystem, ctx: &DiskContext, beta: &BoundaryData) -> Result<MFunction> {
    let fund = ctx.fundamental(sys)?;
    let (m, rcond, sigma_min) = m_from_fundamental(sys, &fund, ctx.ell, beta)?;
    Ok(MFunction {
        m,
        context: ctx.clone(),
        beta: beta.clone(),
        rcond,
        sigma_min,
    })
}

/// `E_ℓ(M) = −iσ Û(ℓ)* J_ρ(ℓ) Û(ℓ) = 2σ Im(u₁* ρ u₂⁺)(ℓ)`, with `U = Ψ(I; M)`.
///
/// Nonpositive exactly on the Weyl disk, zero on its boundary circle.
pub fn e_functional(sys: &HamiltonianSystem, ctx: &DiskContext, m: &CMat) -> Result<CMat> {
    let fund = ctx.fundamental(sys)?;
    e_functional_with(sys, &fund, ctx, m)
}

/// [`e_functional`] reusing a fundamental system that covers `ℓ`.
pub fn e_functional_with(sys: &HamiltonianSystem, fund: &FundamentalMatrix, ctx: &DiskContext, m: &CMat) -> Result<CMat> {
    let u = fund.hat(ctx.ell)? * vstack(&linalg::eye(sys.m()), m);
    e_of_hat(sys, ctx.ell, ctx.sigma, &u)
}

/// E evaluated on a hat state at `ell`.
pub fn e_of_hat(sys: &HamiltonianSystem, ell: i64, sigma: f64, u_hat: &CMat) -> Result<CMat> {
    let q = u_hat.adjoint() * sys.j_rho(ell)? * u_hat;
    Ok(linalg::herm(&(q * (-IM * sigma))))
}

/// `Σ_{k∈[lo,hi]} U(k)* A(k) U(k)` over plain states.
pub fn weighted_energy(sys: &HamiltonianSystem, u: &Trajectory, lo: i64, hi: i64) -> Result<CMat> {
    let mut sum = linalg::zeros(u.ncols(), u.ncols());
    for k in lo..=hi {
        let p = u.plain(sys, k)?;
        sum += p.adjoint() * sys.a(k)? * &p;
    }
    Ok(linalg::herm(&sum))
}

/// Terms of `2σ Im M + E_ℓ(M) = 2|Im z| Σ_{⁺[k₀,ℓ]} U*AU`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyIdentity {
    pub lhs: CMat,
    pub rhs: CMat,
    pub e: CMat,
    pub defect: f64,
}

pub fn energy_identity(sys: &HamiltonianSystem, ctx: &DiskContext, m: &CMat) -> Result<EnergyIdentity> {
    let fund = ctx.fundamental(sys)?;
    let e = e_functional_with(sys, &fund, ctx, m)?;
    let u = propagate::weyl_solution(&fund, m);
    let (lo, hi) = ctx.plus_interval();
    let sum = weighted_energy(sys, u.trajectory(), lo, hi)?;
    let lhs = linalg::im_part(m) * linalg::c(2.0 * ctx.sigma, 0.0) + &e;
    let rhs = sum * linalg::c(2.0 * ctx.z.im.abs(), 0.0);
    let defect = linalg::norm2(&(&lhs - &rhs));
    Ok(EnergyIdentity { lhs, rhs, e, defect })
}

/// Position of M relative to the Weyl disk, judged from `E_ℓ(M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiskVerdict {
    Circle,
    Interior,
    Exterior,
    BoundaryAmbiguous,
}

impl std::fmt::Display for DiskVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiskVerdict::Circle => "circle",
            DiskVerdict::Interior => "interior",
            DiskVerdict::Exterior => "exterior",
            DiskVerdict::BoundaryAmbiguous => "boundary_ambiguous",
        })
    }
}

pub fn disk_membership(e: &CMat, tol: f64) -> DiskVerdict {
    if linalg::norm2(e) <= tol {
        return DiskVerdict::Circle;
    }
    let hi = linalg::max_eig(e);
    if hi < -tol {
        DiskVerdict::Interior
    } else if hi > tol {
        DiskVerdict::Exterior
    } else {
        DiskVerdict::BoundaryAmbiguous
    }
}

/// Change of the boundary data at `k₀` from γ to α:
/// `[−αJγ* + αγ*M_γ][αγ* + αJγ*M_γ]⁻¹`.
pub fn lft_alpha_change(m_gamma: &CMat, alpha: &BoundaryData, gamma: &BoundaryData) -> Result<CMat> {
    let m = alpha.m();
    let a = alpha.gamma();
    let gs = gamma.gamma().adjoint();
    let j = linalg::j_unit(m);
    let ag = &a * &gs;
    let ajg = &a * &j * &gs;
    let num = -&ajg + &ag * m_gamma;
    let den = &ag + &ajg * m_gamma;
    let rc = linalg::rcond(&den);
    if rc < RCOND_MIN {
        return Err(Error::TransformPole { rcond: rc });
    }
    linalg::solve_right(&num, &den, "linear fractional transform").map_err(|_| Error::TransformPole { rcond: rc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, eye, fro, zeros};
    use crate::system::{free_jacobi, Extension};

    fn free(m: usize) -> HamiltonianSystem {
        free_jacobi(m, -40, 120, 1.0, 0.0, Extension::ConstantEdge).unwrap()
    }

    #[test]
    fn context_checks() {
        let sys = free(1);
        let a = BoundaryData::dirichlet(1);
        assert!(DiskContext::new(&sys, c(1.0, 0.0), 0, 5, &a).is_err());
        assert!(DiskContext::new(&sys, c(0.0, 1.0), 0, 0, &a).is_err());
        let ctx = DiskContext::new(&sys, c(0.0, -1.0), 0, 5, &a).unwrap();
        assert_eq!(ctx.sigma(), -1.0);
        let ctx = DiskContext::new(&sys, c(0.0, -1.0), 0, -5, &a).unwrap();
        assert_eq!(ctx.sigma(), 1.0);
        assert_eq!(ctx.plus_interval(), (-4, 0));
        let one = DiskContext::new(&sys, c(0.0, 1.0), 0, 1, &a).unwrap();
        assert!(!one.interval_condition());
        let raw = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let complex_alpha = crate::system::make_boundary_data(&raw).unwrap();
        assert!(DiskContext::new(&sys, c(0.0, 1.0), 0, 5, &complex_alpha).is_err());
    }

    #[test]
    fn free_jacobi_m_near_riccati_root() {
        let sys = free(1);
        let z = c(0.0, 1.0);
        let ctx = DiskContext::new(&sys, z, 0, 30, &BoundaryData::dirichlet(1)).unwrap();
        let mf = m_regular(&sys, &ctx, &BoundaryData::dirichlet(1)).unwrap();
        // V² − zV + z = 0, Im V < 0
        let disc = (z * z - z * 4.0).sqrt();
        let roots = [(z + disc) / 2.0, (z - disc) / 2.0];
        let v = if roots[0].im < 0.0 { roots[0] } else { roots[1] };
        assert!((mf.m[(0, 0)] + v).norm() < 1e-3);
        assert!(mf.m[(0, 0)].im > 0.0);
        let ctxb = ctx.conjugate(&sys).unwrap();
        let mb = m_regular(&sys, &ctxb, &BoundaryData::dirichlet(1)).unwrap();
        assert!(fro(&(mb.m - mf.m.adjoint())) < 1e-10);
    }

    #[test]
    fn circle_and_boundary_condition() {
        let sys = free(2);
        let z = c(0.3, 0.7);
        let ctx = DiskContext::new(&sys, z, 0, 8, &BoundaryData::dirichlet(2)).unwrap();
        let beta = BoundaryData::neumann(2);
        let mf = m_regular(&sys, &ctx, &beta).unwrap();
        let e = e_functional(&sys, &ctx, &mf.m).unwrap();
        assert!(linalg::norm2(&e) < 1e-9);
        assert_eq!(disk_membership(&e, 1e-9), DiskVerdict::Circle);
        let fund = ctx.fundamental(&sys).unwrap();
        let u = propagate::weyl_solution(&fund, &mf.m);
        let bt = weighted_boundary(&beta, &sys, 8).unwrap();
        assert!(fro(&(bt * u.hat(8).unwrap())) < 1e-10);
        let id = energy_identity(&sys, &ctx, &mf.m).unwrap();
        assert!(id.defect < 1e-10 * (1.0 + linalg::norm2(&id.rhs)));
    }

    #[test]
    fn interior_point_from_dissipative_beta() {
        let sys = free(1);
        let z = c(0.0, 1.0);
        let ctx = DiskContext::new(&sys, z, 0, 6, &BoundaryData::dirichlet(1)).unwrap();
        // σ = +1: need Im(β₁β₂*) > 0
        let raw = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, -1.0)]);
        let beta = crate::system::make_boundary_data(&raw).unwrap();
        assert!(beta.im_product()[(0, 0)].re > 0.0);
        let mf = m_regular(&sys, &ctx, &beta).unwrap();
        let e = e_functional(&sys, &ctx, &mf.m).unwrap();
        assert!(linalg::max_eig(&e) < 0.0);
        assert_eq!(disk_membership(&e, 1e-12), DiskVerdict::Interior);
    }

    #[test]
    fn membership_examples() {
        assert_eq!(disk_membership(&zeros(2, 2), 1e-12), DiskVerdict::Circle);
        assert_eq!(disk_membership(&(-eye(2)), 1e-12), DiskVerdict::Interior);
        assert_eq!(disk_membership(&linalg::from_real_diag(&[1.0, -1.0]), 1e-12), DiskVerdict::Exterior);
        assert_eq!(
            disk_membership(&linalg::from_real_diag(&[0.0, -1.0]), 1e-12),
            DiskVerdict::BoundaryAmbiguous
        );
    }

    #[test]
    fn lft_identities() {
        let mg = CMat::from_row_slice(2, 2, &[c(0.3, 1.0), c(0.1, 0.2), c(0.1, 0.2), c(-0.5, 2.0)]);
        let a = BoundaryData::dirichlet(2);
        assert!(fro(&(lft_alpha_change(&mg, &a, &a).unwrap() - &mg)) < 1e-14);
        let g = BoundaryData::neumann(2);
        let inv = linalg::inverse(&mg, "t").unwrap();
        assert!(fro(&(lft_alpha_change(&mg, &a, &g).unwrap() + inv)) < 1e-13);
        assert!(matches!(lft_alpha_change(&zeros(2, 2), &a, &g), Err(Error::TransformPole { .. })));
    }

    #[test]
    fn real_z_eigenvalue_hit() {
        // n = 1 interior site: the only eigenvalue is b_jac = 2
        let sys = free(1);
        let d = BoundaryData::dirichlet(1);
        let r = m_function(&sys, c(2.0, 0.0), 0, 2, &d, &d);
        assert!(matches!(r, Err(Error::EigenvalueHit { ell: 2, .. })));
        assert!(m_function(&sys, c(1.5, 0.0), 0, 2, &d, &d).is_ok());
    }
}
