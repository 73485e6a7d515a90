//! Discrete Hamiltonian systems `S_ρ Ψ = (zA + B) Ψ` on a finite coefficient
//! window, their validation, special-case constructors and normal forms.

mod boundary;
mod file;
mod transform;

pub use boundary::{make_boundary_data, weighted_boundary, BoundaryData, SignClass};
pub use file::{parse_coefficient_file, read_coefficient_file, write_coefficient_file};
pub use transform::{normal_form, to_unit_rho, NormalFormRecord};

use crate::error::{Error, Result};
use crate::linalg::{self, blocks, c, eye, zeros, CMat, C64};
use crate::propagate;

/// How coefficients are continued outside the stored window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extension {
    ConstantEdge,
    Periodic,
    Error,
}

impl std::str::FromStr for Extension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "constant-edge" | "constant" => Ok(Extension::ConstantEdge),
            "periodic" => Ok(Extension::Periodic),
            "error" => Ok(Extension::Error),
            other => Err(Error::Input(format!("unknown extension policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for Extension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Extension::ConstantEdge => "constant-edge",
            Extension::Periodic => "periodic",
            Extension::Error => "error",
        })
    }
}

/// Tolerances used by the validators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative Hermiticity tolerance.
    pub sym: f64,
    /// Lower bound on eigenvalues of A.
    pub psd: f64,
    /// Minimum reciprocal condition number of the off-diagonal pencils.
    pub rcond_min: f64,
    /// Relative lower bound on the Gram matrix eigenvalues in the definiteness check.
    pub def: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sym: linalg::TOL_SYM,
            psd: linalg::TOL_PSD,
            rcond_min: linalg::RCOND_MIN,
            def: 1e-10,
        }
    }
}

/// The z sample used when a check is required "for all z".
pub fn default_z_sample() -> Vec<C64> {
    vec![c(0.0, 1.0), c(1.0, 1.0), c(-2.0, 0.5)]
}

/// Coefficients of the Jacobi form `L = a S⁺ + a⁻ S⁻ + b`.
#[derive(Debug, Clone, PartialEq)]
struct JacobiData {
    p: Vec<CMat>,
    q: Vec<CMat>,
}

/// The coefficient triple `{A(k), B(k), ρ(k)}` over `[k_min, k_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    m: usize,
    k_min: i64,
    a: Vec<CMat>,
    b: Vec<CMat>,
    rho: Vec<CMat>,
    extension: Extension,
    jacobi: Option<JacobiData>,
}

impl HamiltonianSystem {
    /// Build a system from per-site coefficients. Only shapes are checked here;
    /// use [`validate_pointwise`] for the structural hypotheses.
    pub fn new(
        m: usize,
        k_min: i64,
        a: Vec<CMat>,
        b: Vec<CMat>,
        rho: Vec<CMat>,
        extension: Extension,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Input("block size m must be positive".into()));
        }
        let n = a.len();
        if n == 0 {
            return Err(Error::Input("coefficient window is empty".into()));
        }
        if b.len() != n || rho.len() != n {
            return Err(Error::Input(format!(
                "A, B and rho must cover the same window (got {}, {}, {} sites)",
                n,
                b.len(),
                rho.len()
            )));
        }
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            if x.shape() != (2 * m, 2 * m) || y.shape() != (2 * m, 2 * m) {
                return Err(Error::Input(format!(
                    "A and B must be {0}x{0} at site {1}",
                    2 * m,
                    k_min + i as i64
                )));
            }
        }
        for (i, r) in rho.iter().enumerate() {
            if r.shape() != (m, m) {
                return Err(Error::Input(format!(
                    "rho must be {m}x{m} at site {}",
                    k_min + i as i64
                )));
            }
        }
        Ok(HamiltonianSystem {
            m,
            k_min,
            a,
            b,
            rho,
            extension,
            jacobi: None,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.a.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    /// Range of sites at which coefficients can be evaluated.
    pub fn reachable(&self) -> (i64, i64) {
        match self.extension {
            Extension::Error => (self.k_min, self.k_max()),
            _ => (i64::MIN / 4, i64::MAX / 4),
        }
    }

    fn index(&self, k: i64) -> Result<usize> {
        let n = self.a.len() as i64;
        let off = k - self.k_min;
        if (0..n).contains(&off) {
            return Ok(off as usize);
        }
        match self.extension {
            Extension::ConstantEdge => Ok(off.clamp(0, n - 1) as usize),
            Extension::Periodic => Ok(off.rem_euclid(n) as usize),
            Extension::Error => Err(Error::Domain {
                k,
                lo: self.k_min,
                hi: self.k_max(),
            }),
        }
    }

    pub fn check_site(&self, k: i64) -> Result<()> {
        self.index(k).map(|_| ())
    }

    pub fn a(&self, k: i64) -> Result<&CMat> {
        Ok(&self.a[self.index(k)?])
    }

    pub fn b(&self, k: i64) -> Result<&CMat> {
        Ok(&self.b[self.index(k)?])
    }

    pub fn rho(&self, k: i64) -> Result<&CMat> {
        Ok(&self.rho[self.index(k)?])
    }

    /// `zA(k) + B(k)`.
    pub fn pencil(&self, z: C64, k: i64) -> Result<CMat> {
        let i = self.index(k)?;
        Ok(&self.a[i] * z + &self.b[i])
    }

    /// `J_ρ(k) = ((0, ρ), (−ρ, 0))`.
    pub fn j_rho(&self, k: i64) -> Result<CMat> {
        let r = self.rho(k)?;
        let z = zeros(self.m, self.m);
        Ok(blocks(&z, r, &(-r), &z))
    }

    /// `I_ρ(k) = diag(ρ, ρ)`.
    pub fn i_rho(&self, k: i64) -> Result<CMat> {
        let r = self.rho(k)?;
        Ok(linalg::block_diag(r, r))
    }

    /// True when the system came from [`jacobi_system`].
    pub fn is_jacobi(&self) -> bool {
        self.jacobi.is_some()
    }

    fn jacobi_data(&self) -> Result<&JacobiData> {
        self.jacobi
            .as_ref()
            .ok_or_else(|| Error::Input("system was not built by jacobi_system".into()))
    }

    /// Jacobi off-diagonal coefficient `a(k) = −p(k+1)`.
    pub fn jacobi_a(&self, k: i64) -> Result<CMat> {
        let j = self.jacobi_data()?;
        Ok(-&j.p[self.index(k + 1)?])
    }

    /// Jacobi diagonal coefficient `b(k) = p(k+1) + p(k) + q(k)`.
    pub fn jacobi_b(&self, k: i64) -> Result<CMat> {
        let j = self.jacobi_data()?;
        Ok(&j.p[self.index(k + 1)?] + &j.p[self.index(k)?] + &j.q[self.index(k)?])
    }

    /// Copy of the system with `B(k)` replaced.
    pub fn with_b(&self, k: i64, b: CMat) -> Result<Self> {
        if !(self.k_min..=self.k_max()).contains(&k) {
            return Err(Error::Domain {
                k,
                lo: self.k_min,
                hi: self.k_max(),
            });
        }
        let mut out = self.clone();
        let i = (k - self.k_min) as usize;
        out.b[i] = b;
        out.jacobi = None;
        Ok(out)
    }

    /// Copy of the system with ρ(k) replaced.
    pub fn with_rho(&self, k: i64, rho: CMat) -> Result<Self> {
        self.index(k)?;
        if !(self.k_min..=self.k_max()).contains(&k) {
            return Err(Error::Domain {
                k,
                lo: self.k_min,
                hi: self.k_max(),
            });
        }
        let mut out = self.clone();
        out.rho[(k - self.k_min) as usize] = rho;
        out.jacobi = None;
        Ok(out)
    }
}

/// Matrix-valued Sturm–Liouville system: ρ = I, A = diag(I, 0),
/// B = ((−q, I), (I, p⁻¹)).
pub fn jacobi_system(k_min: i64, p: Vec<CMat>, q: Vec<CMat>, extension: Extension) -> Result<HamiltonianSystem> {
    if p.is_empty() || p.len() != q.len() {
        return Err(Error::Input("p and q must be nonempty and of equal length".into()));
    }
    let m = p[0].nrows();
    let mut a = Vec::with_capacity(p.len());
    let mut b = Vec::with_capacity(p.len());
    for (i, (pk, qk)) in p.iter().zip(&q).enumerate() {
        let k = k_min + i as i64;
        if pk.shape() != (m, m) || qk.shape() != (m, m) {
            return Err(Error::Input(format!("p and q must be {m}x{m} at site {k}")));
        }
        if linalg::hermiticity_defect(pk) > linalg::TOL_SYM || linalg::hermiticity_defect(qk) > linalg::TOL_SYM {
            return Err(Error::Input(format!("p and q must be Hermitian (site {k})")));
        }
        let pinv = linalg::inverse(pk, "p").map_err(|_| Error::Input(format!("p({k}) is singular")))?;
        a.push(linalg::block_diag(&eye(m), &zeros(m, m)));
        b.push(blocks(&(-qk), &eye(m), &eye(m), &linalg::herm(&pinv)));
    }
    let rho = vec![eye(m); p.len()];
    let mut sys = HamiltonianSystem::new(m, k_min, a, b, rho, extension)?;
    sys.jacobi = Some(JacobiData { p, q });
    Ok(sys)
}

/// Convenience: scalar-coefficient Jacobi system with `p(k) = p·I`, `q(k) = q·I`.
pub fn free_jacobi(m: usize, k_min: i64, len: usize, p: f64, q: f64, extension: Extension) -> Result<HamiltonianSystem> {
    jacobi_system(
        k_min,
        vec![linalg::scalar(m, c(p, 0.0)); len],
        vec![linalg::scalar(m, c(q, 0.0)); len],
        extension,
    )
}

/// Dirac-type system: ρ = I, A = I_{2m}, B = ((0, b), (b*, 0)).
pub fn dirac_system(k_min: i64, b: Vec<CMat>, extension: Extension) -> Result<HamiltonianSystem> {
    if b.is_empty() {
        return Err(Error::Input("b must be nonempty".into()));
    }
    let m = b[0].nrows();
    let mut bb = Vec::with_capacity(b.len());
    for (i, bk) in b.iter().enumerate() {
        let k = k_min + i as i64;
        if bk.shape() != (m, m) {
            return Err(Error::Input(format!("b must be {m}x{m} at site {k}")));
        }
        if linalg::rcond(bk) < linalg::RCOND_MIN {
            return Err(Error::Input(format!("b({k}) is singular")));
        }
        bb.push(blocks(&zeros(m, m), bk, &bk.adjoint(), &zeros(m, m)));
    }
    let n = b.len();
    HamiltonianSystem::new(m, k_min, vec![eye(2 * m); n], bb, vec![eye(m); n], extension)
}

/// What went wrong at a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ANonHermitian,
    ANotPsd,
    BNonHermitian,
    RhoNonHermitian,
    RhoNotPositive,
    Pencil12Singular,
    Pencil21Singular,
    /// The (1,2) pencil at z and the adjoint (2,1) pencil at z̄ disagree.
    PencilMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub k: i64,
    pub kind: ViolationKind,
    /// The offending measurement (defect, eigenvalue or rcond).
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilCondition {
    pub k: i64,
    pub rcond12: f64,
    pub rcond21: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub interval: (i64, i64),
    pub violations: Vec<Violation>,
    pub pencil_conditions: Vec<PencilCondition>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
        self.pencil_conditions.extend(other.pencil_conditions);
    }
}

fn check_interval(sys: &HamiltonianSystem, lo: i64, hi: i64) -> Result<()> {
    if lo > hi {
        return Err(Error::Input(format!("empty interval [{lo}, {hi}]")));
    }
    sys.check_site(lo)?;
    sys.check_site(hi)
}

/// Hermiticity and definiteness of A, B, ρ at every site of `[lo, hi]`.
pub fn validate_pointwise(sys: &HamiltonianSystem, lo: i64, hi: i64, tol: &Tolerances) -> Result<ValidationReport> {
    check_interval(sys, lo, hi)?;
    let mut report = ValidationReport {
        interval: (lo, hi),
        ..Default::default()
    };
    let mut flag = |k, kind, value| report.violations.push(Violation { k, kind, value });
    for k in lo..=hi {
        let a = sys.a(k)?;
        let b = sys.b(k)?;
        let r = sys.rho(k)?;
        let da = linalg::hermiticity_defect(a);
        if da > tol.sym {
            flag(k, ViolationKind::ANonHermitian, da);
        }
        let ea = linalg::min_eig(a);
        if ea < -tol.psd {
            flag(k, ViolationKind::ANotPsd, ea);
        }
        let db = linalg::hermiticity_defect(b);
        if db > tol.sym {
            flag(k, ViolationKind::BNonHermitian, db);
        }
        let dr = linalg::hermiticity_defect(r);
        if dr > tol.sym {
            flag(k, ViolationKind::RhoNonHermitian, dr);
        }
        let er = linalg::min_eig(r);
        if er <= 0.0 {
            flag(k, ViolationKind::RhoNotPositive, er);
        }
    }
    Ok(report)
}

/// Conditioning of the off-diagonal pencils `zA₁₂ + B₁₂` and `zA₂₁ + B₂₁`.
pub fn check_wellposed(sys: &HamiltonianSystem, z: C64, lo: i64, hi: i64, tol: &Tolerances) -> Result<ValidationReport> {
    check_interval(sys, lo, hi)?;
    let m = sys.m();
    let mut report = ValidationReport {
        interval: (lo, hi),
        ..Default::default()
    };
    for k in lo..=hi {
        let p = sys.pencil(z, k)?;
        let rc12 = linalg::rcond(&linalg::block(&p, 0, 1, m));
        let rc21 = linalg::rcond(&linalg::block(&p, 1, 0, m));
        // (zA₂₁ + B₂₁) = (z̄A₁₂ + B₁₂)* for Hermitian A, B
        let pbar = sys.pencil(z.conj(), k)?;
        let rc12_bar = linalg::rcond(&linalg::block(&pbar, 0, 1, m));
        report.pencil_conditions.push(PencilCondition {
            k,
            rcond12: rc12,
            rcond21: rc21,
        });
        if rc12 < tol.rcond_min {
            report.violations.push(Violation {
                k,
                kind: ViolationKind::Pencil12Singular,
                value: rc12,
            });
        }
        if rc21 < tol.rcond_min {
            report.violations.push(Violation {
                k,
                kind: ViolationKind::Pencil21Singular,
                value: rc21,
            });
        }
        let gap = (rc21 - rc12_bar).abs();
        if gap > 1e-8 * rc21.max(rc12_bar).max(tol.rcond_min) && (rc21 < tol.rcond_min) != (rc12_bar < tol.rcond_min) {
            report.violations.push(Violation {
                k,
                kind: ViolationKind::PencilMismatch,
                value: gap,
            });
        }
    }
    Ok(report)
}

/// Gram matrix of the full fundamental solution against A on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessReport {
    pub z: C64,
    pub interval: (i64, i64),
    pub gram: CMat,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub definite: bool,
    /// first `j` for which the Gram matrix over `[lo, j]` is already definite
    pub definite_from: Option<i64>,
}

/// `G = Σ_{k∈[lo,hi]} Φ(z,k)* A(k) Φ(z,k)` with Φ started from the identity
/// hat state at `lo`.
///
/// The Gram matrix only grows with the interval, so the system is reported
/// definite as soon as some prefix `[lo, j]` passes `λ_min > tol·λ_max`; on long
/// intervals the full Gram matrix is too ill-conditioned for a direct test.
pub fn check_definiteness(sys: &HamiltonianSystem, z: C64, lo: i64, hi: i64, tol: &Tolerances) -> Result<DefinitenessReport> {
    check_interval(sys, lo, hi)?;
    let m = sys.m();
    let mut state = propagate::HatState::new(lo, z, eye(2 * m))?;
    let mut gram = zeros(2 * m, 2 * m);
    let mut definite_from = None;
    for k in lo..=hi {
        if k > lo {
            state = propagate::step_forward(sys, &state)?;
        }
        let plain = propagate::plain_from_hat(sys, &state)?;
        gram += plain.adjoint() * sys.a(k)? * &plain;
        if definite_from.is_none() {
            let ev = linalg::herm_eigenvalues(&linalg::herm(&gram));
            if ev[0] > tol.def * ev[ev.len() - 1].max(f64::MIN_POSITIVE) {
                definite_from = Some(k);
            }
        }
    }
    let gram = linalg::herm(&gram);
    let ev = linalg::herm_eigenvalues(&gram);
    let lo_ev = ev[0];
    let hi_ev = *ev.last().unwrap();
    Ok(DefinitenessReport {
        z,
        interval: (lo, hi),
        definite: definite_from.is_some(),
        definite_from,
        min_eigenvalue: lo_ev,
        max_eigenvalue: hi_ev,
        gram,
    })
}
