use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, bottom, top, CMat, C64, RCOND_MIN};
use crate::propagate::{backward_data, forward_data, initial_hat, Trajectory, WeylSolution};
use crate::system::{BoundaryData, HamiltonianSystem};

use super::{DiskContext, Direction};

/// Orthonormal hat-state basis at `ell` of `{Û : β̃Û = 0}`.
fn boundary_kernel(sys: &HamiltonianSystem, ell: i64, beta: &BoundaryData) -> Result<CMat> {
    let m = sys.m();
    let b = beta.gamma();
    let proj = linalg::eye(2 * m) - b.adjoint() * &b;
    let (_, vecs) = linalg::herm_eigh_desc(&proj);
    let basis = vecs.columns(0, m).into_owned();
    let w = linalg::hpd_inv_sqrt(&sys.i_rho(ell)?)? * basis;
    Ok(linalg::orthonormalize(&w))
}

fn qr_split(y: &CMat) -> (CMat, CMat) {
    let qr = y.clone().qr();
    (qr.q(), qr.r())
}

struct Sweep {
    lo: i64,
    /// orthonormal bases, one per site of [lo, hi]
    q: Vec<CMat>,
    /// R factors of the steps; r[i] relates sites lo+i and its neighbour toward ℓ
    r: Vec<CMat>,
    m_value: CMat,
    c1_inv: CMat,
}

/// Propagate the boundary condition at `ell` to `k0` with QR renormalization
/// at every step, then read off `M` from the coefficients against `Ψ̂(k₀)`.
fn sweep(sys: &HamiltonianSystem, z: C64, k0: i64, ell: i64, alpha: &BoundaryData, beta: &BoundaryData) -> Result<Sweep> {
    if ell == k0 {
        return Err(Error::Input("ell must differ from k0".into()));
    }
    if beta.m() != sys.m() {
        return Err(Error::Input("beta has the wrong block size".into()));
    }
    let m = sys.m();
    let lo = k0.min(ell);
    let n = (k0 - ell).unsigned_abs() as usize + 1;
    let mut q = vec![CMat::zeros(0, 0); n];
    let mut r = vec![CMat::zeros(0, 0); n];
    let start = boundary_kernel(sys, ell, beta)?;
    if ell > k0 {
        q[n - 1] = start;
        for k in ((k0 + 1)..=ell).rev() {
            let i = (k - lo) as usize;
            let (y, _) = backward_data(sys, z, k, &q[i])?;
            let (qq, rr) = qr_split(&y);
            q[i - 1] = qq;
            r[i - 1] = rr;
        }
    } else {
        q[0] = start;
        for k in ell..k0 {
            let i = (k - lo) as usize;
            let (y, _) = forward_data(sys, z, k, &q[i])?;
            let (qq, rr) = qr_split(&y);
            q[i + 1] = qq;
            r[i + 1] = rr;
        }
    }
    let i0 = (k0 - lo) as usize;
    let psi0 = initial_hat(sys, k0, alpha)?;
    let coef = linalg::j_unit(m) * psi0.adjoint() * sys.j_rho(k0)? * &q[i0];
    let c1 = top(&coef, m);
    let c2 = bottom(&coef, m);
    let rc = linalg::rcond(&c1);
    if rc < RCOND_MIN {
        return Err(Error::EigenvalueHit { ell, rcond: rc });
    }
    let c1_inv = linalg::inverse(&c1, "sweep coefficients")?;
    let m_value = &c2 * &c1_inv;
    Ok(Sweep {
        lo,
        q,
        r,
        m_value,
        c1_inv,
    })
}

/// Regular M-function computed by a renormalized sweep from `ℓ` to `k₀`.
///
/// Agrees with [`super::m_regular`] and stays accurate when `|ℓ − k₀|` is large
/// enough for forward propagation of the fundamental system to lose precision.
pub fn m_sweep(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    ell: i64,
    alpha: &BoundaryData,
    beta: &BoundaryData,
) -> Result<CMat> {
    Ok(sweep(sys, z, k0, ell, alpha, beta)?.m_value)
}

/// The Weyl solution `U = Ψ(I; M)` on `[min(k₀,ℓ), max(k₀,ℓ)]` built from the
/// renormalized sweep, so decaying solutions are resolved without cancellation.
pub fn weyl_solution_sweep(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    ell: i64,
    alpha: &BoundaryData,
    beta: &BoundaryData,
) -> Result<WeylSolution> {
    let sw = sweep(sys, z, k0, ell, alpha, beta)?;
    let n = sw.q.len();
    let i0 = (k0 - sw.lo) as usize;
    let mut hats = vec![CMat::zeros(0, 0); n];
    let mut g = sw.c1_inv.clone();
    hats[i0] = &sw.q[i0] * &g;
    if ell > k0 {
        for i in i0..n - 1 {
            g = linalg::solve(&sw.r[i], &g, "sweep reconstruction")?;
            hats[i + 1] = &sw.q[i + 1] * &g;
        }
    } else {
        for i in (0..i0).rev() {
            g = linalg::solve(&sw.r[i + 1], &g, "sweep reconstruction")?;
            hats[i] = &sw.q[i] * &g;
        }
    }
    let traj = Trajectory::from_hats(z, sw.lo, hats)?;
    Ok(WeylSolution::from_trajectory(k0, sw.m_value, traj))
}

/// Finite-range surrogate of `M_±(z)`: the regular M-function at `ℓ = k₀ ± distance`.
pub fn half_line_m(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    alpha: &BoundaryData,
    direction: Direction,
    distance: i64,
    beta: &BoundaryData,
) -> Result<CMat> {
    m_sweep(sys, z, k0, k0 + direction.sign() * distance.max(1), alpha, beta)
}

fn van_der_corput(mut j: u64) -> f64 {
    let mut x = 0.0;
    let mut f = 0.5;
    while j > 0 {
        if j & 1 == 1 {
            x += f;
        }
        j >>= 1;
        f *= 0.5;
    }
    x
}

/// The first `n` members of a fixed family of sign-class-zero boundary data.
/// The family is nested: the first `n` members do not depend on how many are drawn.
pub fn beta_family(m: usize, n: usize) -> Vec<BoundaryData> {
    if m == 1 {
        return (0..n)
            .map(|j| {
                let t = std::f64::consts::PI * van_der_corput(j as u64);
                BoundaryData::from_angles(&[t], &linalg::eye(1))
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + m as u64);
    (0..n)
        .map(|_| {
            let w = linalg::haar_unitary(m, &mut rng);
            let d: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * std::f64::consts::PI).collect();
            BoundaryData::from_angles(&d, &w)
        })
        .collect()
}

/// Largest pairwise distance between circle points `M(β_j)` over the first
/// `n_samples` members of [`beta_family`].
pub fn disk_diameter_estimate(sys: &HamiltonianSystem, ctx: &DiskContext, n_samples: usize) -> Result<f64> {
    let ms: Vec<CMat> = beta_family(sys.m(), n_samples)
        .iter()
        .map(|b| m_sweep(sys, ctx.z(), ctx.k0(), ctx.ell(), ctx.alpha(), b))
        .collect::<Result<_>>()?;
    let mut d = 0.0f64;
    for i in 0..ms.len() {
        for j in (i + 1)..ms.len() {
            d = d.max(linalg::norm2(&(&ms[i] - &ms[j])));
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitOptions {
    /// boundary data at ℓ; Dirichlet `(I 0)` when `None`
    pub beta: Option<BoundaryData>,
    pub ell_step: i64,
    /// largest `|ℓ − k₀|` tried
    pub ell_max: i64,
    /// stop once successive values differ by less than `tol·(1 + ‖M‖)`
    pub tol: f64,
    pub n_samples: usize,
    pub lp_threshold: f64,
    pub lc_threshold: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            beta: None,
            ell_step: 10,
            ell_max: 200,
            tol: 1e-12,
            n_samples: 8,
            lp_threshold: 1e-6,
            lc_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    LimitPoint,
    LimitCircle,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::LimitPoint => "limit_point",
            Classification::LimitCircle => "limit_circle",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineLimit {
    /// final value, projected onto the correct Herglotz sign
    pub m_pm: CMat,
    /// final value before projection
    pub m_raw: CMat,
    pub direction: Direction,
    pub beta: BoundaryData,
    pub ell_sequence: Vec<i64>,
    pub cauchy_gap: f64,
    pub diameter_estimate: f64,
    /// diameters at the last (up to three) ℓ's, oldest first
    pub diameter_history: Vec<(i64, f64)>,
    pub classification: Classification,
    pub converged: bool,
    pub projected: bool,
}

/// Follow `M(z, ℓ, k₀, α, β)` as `ℓ → ±∞` and classify the endpoint.
pub fn limit_m(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    alpha: &BoundaryData,
    direction: Direction,
    opts: &LimitOptions,
) -> Result<HalfLineLimit> {
    if z.im == 0.0 {
        return Err(Error::Input("limit_m needs Im z != 0".into()));
    }
    if opts.ell_step <= 0 || opts.ell_max <= 0 {
        return Err(Error::Input("ell_step and ell_max must be positive".into()));
    }
    let beta = opts.beta.clone().unwrap_or_else(|| BoundaryData::dirichlet(sys.m()));
    let (rlo, rhi) = sys.reachable();
    let dir = direction.sign();
    let mut ell_sequence = Vec::new();
    let mut values: Vec<CMat> = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut n = 1;
    loop {
        let ell = k0 + dir * n * opts.ell_step;
        if (ell - k0).abs() > opts.ell_max || ell < rlo || ell > rhi {
            break;
        }
        let mv = m_sweep(sys, z, k0, ell, alpha, &beta)?;
        if let Some(prev) = values.last() {
            gap = linalg::norm2(&(&mv - prev));
        }
        ell_sequence.push(ell);
        let scale = 1.0 + linalg::norm2(&mv);
        values.push(mv);
        if gap < opts.tol * scale {
            converged = true;
            break;
        }
        n += 1;
    }
    let Some(m_raw) = values.last().cloned() else {
        return Err(Error::Input(format!(
            "no admissible ell in direction {direction}: window too short for step {}",
            opts.ell_step
        )));
    };
    let ell_final = *ell_sequence.last().unwrap();
    let ctx = DiskContext::new(sys, z, k0, ell_final, alpha)?;
    let diameter = disk_diameter_estimate(sys, &ctx, opts.n_samples)?;
    let mut history = vec![(ell_final, diameter)];
    let scale = 1.0 + linalg::norm2(&m_raw);
    let classification = if diameter < opts.lp_threshold * scale {
        Classification::LimitPoint
    } else if diameter > opts.lc_threshold * scale && ell_sequence.len() >= 3 {
        let k = ell_sequence.len();
        for &ell in ell_sequence[k - 3..k - 1].iter().rev() {
            let c = DiskContext::new(sys, z, k0, ell, alpha)?;
            history.insert(0, (ell, disk_diameter_estimate(sys, &c, opts.n_samples)?));
        }
        let lo = history.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
        let hi = history.iter().map(|h| h.1).fold(0.0, f64::max);
        if hi <= 1.5 * lo {
            Classification::LimitCircle
        } else {
            Classification::Inconclusive
        }
    } else {
        Classification::Inconclusive
    };
    let sigma = (dir as f64 * z.im).signum();
    let (m_pm, projected) = project_herglotz(&m_raw, sigma);
    Ok(HalfLineLimit {
        m_pm,
        m_raw,
        direction,
        beta,
        ell_sequence,
        cauchy_gap: if gap.is_finite() { gap } else { 0.0 },
        diameter_estimate: diameter,
        diameter_history: history,
        classification,
        converged,
        projected,
    })
}

/// Replace `σ Im M` by its positive part (with a tiny floor) when it fails to be positive definite.
fn project_herglotz(m: &CMat, sigma: f64) -> (CMat, bool) {
    let im = linalg::im_part(m) * linalg::c(sigma, 0.0);
    let (vals, vecs) = linalg::herm_eigh_desc(&im);
    let floor = 1e-15 * (1.0 + linalg::norm2(m));
    if vals.iter().all(|&v| v > 0.0) {
        return (m.clone(), false);
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(floor)).collect();
    let im_new = &vecs * linalg::from_real_diag(&clipped) * vecs.adjoint();
    (linalg::re_part(m) + im_new * linalg::c(0.0, sigma), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HerglotzViolationKind {
    /// `Im(±M)` is not positive definite
    ImSign,
    /// `M(z̄) ≠ M(z)*`
    Conjugation,
    /// M is numerically rank deficient
    Rank,
    /// M could not be evaluated
    Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzViolation {
    pub z: C64,
    pub kind: HerglotzViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HerglotzReport {
    pub points: usize,
    pub violations: Vec<HerglotzViolation>,
    /// smallest eigenvalue of `Im(±M)` seen on the grid
    pub min_im_eigenvalue: f64,
    /// largest `‖M(z̄) − M(z)*‖ / (1 + ‖M‖)`
    pub max_conjugation_defect: f64,
}

impl HerglotzReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `Im(sign·M) ≻ 0`, `M(z̄) = M(z)*` and full rank on a grid in ℂ₊.
pub fn herglotz_check_fn(
    grid: &[C64],
    sign: f64,
    tol: f64,
    eval: impl Fn(C64) -> Result<CMat>,
) -> HerglotzReport {
    let mut rep = HerglotzReport {
        points: grid.len(),
        min_im_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for &z in grid {
        let (mz, mzb) = match (eval(z), eval(z.conj())) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                rep.violations.push(HerglotzViolation {
                    z,
                    kind: HerglotzViolationKind::Evaluation,
                    value: f64::NAN,
                });
                continue;
            }
        };
        let lo = linalg::min_eig(&(linalg::im_part(&mz) * linalg::c(sign, 0.0)));
        rep.min_im_eigenvalue = rep.min_im_eigenvalue.min(lo);
        if lo <= 0.0 {
            rep.violations.push(HerglotzViolation {
                z,
                kind: HerglotzViolationKind::ImSign,
                value: lo,
            });
        }
        let conj = linalg::norm2(&(&mzb - mz.adjoint())) / (1.0 + linalg::norm2(&mz));
        rep.max_conjugation_defect = rep.max_conjugation_defect.max(conj);
        if conj > tol {
            rep.violations.push(HerglotzViolation {
                z,
                kind: HerglotzViolationKind::Conjugation,
                value: conj,
            });
        }
        let rc = linalg::rcond(&mz);
        if rc < RCOND_MIN {
            rep.violations.push(HerglotzViolation {
                z,
                kind: HerglotzViolationKind::Rank,
                value: rc,
            });
        }
    }
    rep
}

/// Where the M-function under test comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HerglotzSource {
    Regular { ell: i64, beta: BoundaryData },
    HalfLine { direction: Direction, opts: LimitOptions },
}

pub fn herglotz_check(
    sys: &HamiltonianSystem,
    grid: &[C64],
    k0: i64,
    alpha: &BoundaryData,
    source: &HerglotzSource,
    tol: f64,
) -> HerglotzReport {
    match source {
        HerglotzSource::Regular { ell, beta } => {
            let sign = (*ell - k0).signum() as f64;
            herglotz_check_fn(grid, sign, tol, |z| m_sweep(sys, z, k0, *ell, alpha, beta))
        }
        HerglotzSource::HalfLine { direction, opts } => {
            herglotz_check_fn(grid, direction.sign() as f64, tol, |z| {
                Ok(limit_m(sys, z, k0, alpha, *direction, opts)?.m_raw)
            })
        }
    }
}
