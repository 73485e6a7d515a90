//! Independent oracles and seeded generators used to certify the rest of the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, block, blocks, c, eye, zeros, CMat, C64};
use crate::propagate::fundamental;
use crate::system::{
    check_definiteness, default_z_sample, dirac_system, jacobi_system, weighted_boundary, BoundaryData, Extension,
    HamiltonianSystem, Tolerances,
};
use crate::weyl::{riccati_forward, Direction};

/// Dense Hermitian matrix of a Jacobi-class regular problem with Dirichlet data at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularBVP {
    pub sys: HamiltonianSystem,
    pub k0: i64,
    pub ell: i64,
    pub alpha: BoundaryData,
    pub beta: BoundaryData,
    /// block tridiagonal matrix on the interior sites `k₀+1 .. ℓ−1`
    pub h: CMat,
}

fn is_dirichlet(b: &BoundaryData) -> bool {
    linalg::fro(&(b.gamma() - BoundaryData::dirichlet(b.m()).gamma())) < 1e-12
}

impl RegularBVP {
    pub fn new(sys: &HamiltonianSystem, k0: i64, ell: i64, alpha: &BoundaryData, beta: &BoundaryData) -> Result<Self> {
        if !sys.is_jacobi() {
            return Err(Error::Unsupported("the dense oracle needs a Jacobi-class system".into()));
        }
        if !is_dirichlet(alpha) || !is_dirichlet(beta) {
            return Err(Error::Unsupported("the dense oracle supports only (I 0) boundary data".into()));
        }
        if ell < k0 + 2 {
            return Err(Error::Input("need at least one interior site (ell >= k0 + 2)".into()));
        }
        let m = sys.m();
        let n = (ell - k0 - 1) as usize;
        let mut h = zeros(m * n, m * n);
        for i in 0..n {
            let k = k0 + 1 + i as i64;
            h.view_mut((i * m, i * m), (m, m)).copy_from(&sys.jacobi_b(k)?);
            if i + 1 < n {
                let a = sys.jacobi_a(k)?;
                h.view_mut((i * m, (i + 1) * m), (m, m)).copy_from(&a);
                h.view_mut(((i + 1) * m, i * m), (m, m)).copy_from(&a.adjoint());
            }
        }
        Ok(RegularBVP {
            sys: sys.clone(),
            k0,
            ell,
            alpha: alpha.clone(),
            beta: beta.clone(),
            h,
        })
    }

    pub fn interior_len(&self) -> usize {
        (self.ell - self.k0 - 1) as usize
    }
}

/// Eigenvalues of the regular problem by a dense Hermitian solve, ascending.
pub fn jacobi_bvp_oracle(bvp: &RegularBVP) -> Vec<f64> {
    linalg::herm_eigenvalues(&linalg::herm(&bvp.h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigOptions {
    /// scan points over the search interval
    pub grid_n: usize,
    /// width at which the golden-section refinement stops
    pub refine_width: f64,
    /// accept a minimum when `σ_min ≤ accept_tol·‖Ψ̂(ℓ)‖` (or when it is sharply V-shaped)
    pub accept_tol: f64,
    /// singular values below `mult_tol·‖Ψ̂(ℓ)‖` count toward the multiplicity
    pub mult_tol: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            grid_n: 4000,
            refine_width: 1e-14,
            accept_tol: 1e-8,
            mult_tol: 1e-5,
        }
    }
}

struct DetProbe<'a> {
    sys: &'a HamiltonianSystem,
    k0: i64,
    ell: i64,
    alpha: &'a BoundaryData,
    beta_w: CMat,
}

impl DetProbe<'_> {
    /// singular values of `β̃Φ̂(λ, ℓ)` (descending) and `‖Ψ̂(λ, ℓ)‖`
    fn eval(&self, lambda: f64) -> Result<(Vec<f64>, f64)> {
        let f = fundamental(self.sys, c(lambda, 0.0), self.k0, self.alpha, self.k0.min(self.ell), self.k0.max(self.ell))?;
        let ph = f.phi_hat(self.ell)?;
        Ok((linalg::singular_values(&(&self.beta_w * &ph)), linalg::norm2(f.hat(self.ell)?)))
    }

    fn ratio(&self, lambda: f64) -> Result<f64> {
        let (s, n) = self.eval(lambda)?;
        Ok(s[s.len() - 1] / n)
    }
}

/// Eigenvalues of the regular problem in `[a, b]` as the real zeros of
/// `det β̃Φ̂(z, ℓ)`, each repeated according to its multiplicity.
pub fn eig_via_det_phi(
    sys: &HamiltonianSystem,
    k0: i64,
    ell: i64,
    alpha: &BoundaryData,
    beta: &BoundaryData,
    interval: (f64, f64),
    opts: &EigOptions,
) -> Result<Vec<f64>> {
    let (a, b) = interval;
    if !(b > a) || opts.grid_n < 3 {
        return Err(Error::Input("eig search needs a < b and grid_n >= 3".into()));
    }
    if ell == k0 {
        return Err(Error::Input("ell must differ from k0".into()));
    }
    let probe = DetProbe {
        sys,
        k0,
        ell,
        alpha,
        beta_w: weighted_boundary(beta, sys, ell)?,
    };
    let (xs, g) = adaptive_scan(&probe, a, b, opts)?;
    let n = xs.len();
    let mut out = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { g[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { g[i + 1] };
        if !(g[i] < left && g[i] <= right) {
            continue;
        }
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(n - 1)];
        let x = golden_min(|t| probe.ratio(t), lo, hi, opts.refine_width)?;
        let (s, nrm) = probe.eval(x)?;
        let g_min = s[s.len() - 1] / nrm;
        // a steep zero can sit between adjacent doubles, so also accept a V-shaped minimum
        let h = 1e-10 * (1.0 + x.abs());
        let v_shape = g_min <= 0.05 * probe.ratio(x - h)?.min(probe.ratio(x + h)?);
        if g_min <= opts.accept_tol || v_shape {
            let cut = opts.mult_tol.max(10.0 * g_min) * nrm;
            let mult = s.iter().filter(|v| **v <= cut).count().max(1);
            out.extend(std::iter::repeat_n(x, mult));
        }
    }
    Ok(out)
}

/// Sample the ratio on `[a, b]` with steps of at most `(b − a)/grid_n`, halving
/// a step whenever `Ψ̂(ℓ)` changes by more than a quarter of its size across it.
/// Near an eigenvalue whose eigenvector is small at `ℓ` the dip of the ratio can
/// be far narrower than the base step; `Ψ̂(ℓ)` grows roughly linearly away from
/// such a point, so the relative-change test shrinks the step in time.
fn adaptive_scan(probe: &DetProbe, a: f64, b: f64, opts: &EigOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let h_max = (b - a) / (opts.grid_n - 1) as f64;
    let h_min = 1e-13 * (1.0 + a.abs().max(b.abs()));
    let sample = |x: f64| -> Result<(f64, CMat)> {
        let f = fundamental(probe.sys, c(x, 0.0), probe.k0, probe.alpha, probe.k0.min(probe.ell), probe.k0.max(probe.ell))?;
        let ph = f.phi_hat(probe.ell)?;
        let hat = f.hat(probe.ell)?.clone();
        let s = linalg::singular_values(&(&probe.beta_w * &ph));
        Ok((s[s.len() - 1] / linalg::norm2(&hat), hat))
    };
    let (g0, mut hat) = sample(a)?;
    let mut xs = vec![a];
    let mut gs = vec![g0];
    let mut x = a;
    let mut h = h_max;
    while x < b {
        let step = h.min(b - x);
        let xn = if step == b - x { b } else { x + step };
        let (gn, hn) = sample(xn)?;
        let change = linalg::fro(&(&hn - &hat));
        let size = linalg::fro(&hn).min(linalg::fro(&hat));
        if change > 0.25 * size && step > h_min {
            h = (step / 2.0).max(h_min);
            continue;
        }
        x = xn;
        hat = hn;
        xs.push(x);
        gs.push(gn);
        h = (step * 1.5).min(h_max);
    }
    Ok((xs, gs))
}

fn golden_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, width: f64) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if b - a <= width * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { x1 } else { x2 })
}

/// Inverse of one Riccati step for constant coefficients: `V(k−1)` from `V(k)`.
fn riccati_backward(sys: &HamiltonianSystem, z: C64, k: i64, v: &CMat) -> Result<CMat> {
    let m = sys.m();
    let p = sys.pencil(z, k)?;
    let rho = sys.rho(k - 1)?;
    let inner = block(&p, 1, 0, m) * linalg::solve(&(v - block(&p, 0, 0, m)), &block(&p, 0, 1, m), "V - c11")?
        + block(&p, 1, 1, m);
    Ok(rho * linalg::solve(&inner, rho, "riccati inverse step")?)
}

/// Fixed point of the Riccati recursion for a system whose coefficients do not
/// depend on `k` (taken at `k_min`), on the branch with `−σ Im V ≻ 0`, where
/// `σ = sign(direction · Im z)`.
pub fn constant_riccati_fixed_point(sys: &HamiltonianSystem, z: C64, direction: Direction) -> Result<CMat> {
    if z.im == 0.0 {
        return Err(Error::Input("fixed point needs Im z != 0".into()));
    }
    let m = sys.m();
    let k = sys.k_min() + 1;
    let sigma = (direction.sign() as f64 * z.im).signum();
    let mut v = linalg::eye(m) * c(0.0, -sigma);
    let mut last = f64::INFINITY;
    const MAX_ITER: usize = 20_000;
    for _ in 0..MAX_ITER {
        let next = match direction {
            Direction::Plus => riccati_backward(sys, z, k, &v)?,
            Direction::Minus => riccati_forward(sys, z, k, &v)?,
        };
        last = linalg::norm2(&(&next - &v));
        v = next;
        if last <= 1e-15 * (1.0 + linalg::norm2(&v)) {
            let res = linalg::norm2(&(riccati_forward(sys, z, k, &v)? - &v));
            let lo = linalg::min_eig(&(linalg::im_part(&v) * c(-sigma, 0.0)));
            if lo <= 0.0 {
                return Err(Error::NoConvergence {
                    what: "Riccati fixed point (converged to the wrong branch)".into(),
                    iterations: MAX_ITER,
                    residual: res,
                });
            }
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        what: "Riccati fixed point".into(),
        iterations: MAX_ITER,
        residual: last,
    })
}

/// Both roots of the scalar quadratic `−c₂₂V² + (ρ² + c₁₁c₂₂ − c₁₂c₂₁)V − c₁₁ρ² = 0`.
pub fn scalar_riccati_roots(sys: &HamiltonianSystem, z: C64) -> Result<[C64; 2]> {
    if sys.m() != 1 {
        return Err(Error::Input("scalar roots need m = 1".into()));
    }
    let k = sys.k_min();
    let p = sys.pencil(z, k)?;
    let r = sys.rho(k)?[(0, 0)];
    let (c11, c12, c21, c22) = (p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    let qa = -c22;
    let qb = r * r + c11 * c22 - c12 * c21;
    let qc = -c11 * r * r;
    if qa.norm() == 0.0 {
        let v = -qc / qb;
        return Ok([v, v]);
    }
    let d = (qb * qb - qa * qc * 4.0).sqrt();
    Ok([(-qb + d) / (qa * 2.0), (-qb - d) / (qa * 2.0)])
}

/// `V² − zV + z = 0` root with `Im V < 0` for `z ∈ ℂ₊` (the other root for `z ∈ ℂ₋`).
pub fn free_jacobi_root(z: C64) -> C64 {
    let d = (z * z - z * 4.0).sqrt();
    let r1 = (z + d) / 2.0;
    let r2 = (z - d) / 2.0;
    let want_neg = z.im > 0.0;
    if (r1.im < 0.0) == want_neg {
        r1
    } else {
        r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemClass {
    Jacobi,
    Dirac,
    GeneralA12Zero,
}

impl std::str::FromStr for SystemClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(SystemClass::Jacobi),
            "dirac" => Ok(SystemClass::Dirac),
            "general_A12zero" | "general" => Ok(SystemClass::GeneralA12Zero),
            _ => Err(Error::Input(format!("unknown system class '{s}'"))),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize) -> CMat {
    CMat::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) / (2.0 * m as f64).sqrt()
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> CMat {
    linalg::herm(&gaussian(rng, m)) * c(scale, 0.0)
}

/// `I + s·GG*`: Hermitian positive definite with condition at most `1 + s‖G‖²`.
fn random_hpd(rng: &mut ChaCha8Rng, m: usize, s: f64) -> CMat {
    let g = gaussian(rng, m);
    eye(m) + &g * g.adjoint() * c(s, 0.0)
}

fn random_well_conditioned(rng: &mut ChaCha8Rng, m: usize, max_cond: f64) -> CMat {
    loop {
        let x = eye(m) + gaussian(rng, m) * c(0.6, 0.0);
        if linalg::rcond(&x) >= 1.0 / max_cond {
            return x;
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, m: usize, k_min: i64, len: usize, class: SystemClass) -> Result<HamiltonianSystem> {
    match class {
        SystemClass::Jacobi => {
            let p = (0..len).map(|_| random_hpd(rng, m, 0.5)).collect();
            let q = (0..len).map(|_| random_hermitian(rng, m, 1.0)).collect();
            jacobi_system(k_min, p, q, Extension::ConstantEdge)
        }
        SystemClass::Dirac => {
            let b = (0..len).map(|_| random_well_conditioned(rng, m, 1e3)).collect();
            dirac_system(k_min, b, Extension::ConstantEdge)
        }
        SystemClass::GeneralA12Zero => {
            let mut a = Vec::with_capacity(len);
            let mut b = Vec::with_capacity(len);
            let mut rho = Vec::with_capacity(len);
            for _ in 0..len {
                let a11 = random_hpd(rng, m, 0.5);
                let g = gaussian(rng, m);
                let a22 = &g * g.adjoint() * c(0.5, 0.0);
                a.push(linalg::block_diag(&a11, &a22));
                let b12 = random_well_conditioned(rng, m, 1e3);
                b.push(blocks(
                    &random_hermitian(rng, m, 1.0),
                    &b12,
                    &b12.adjoint(),
                    &random_hermitian(rng, m, 1.0),
                ));
                rho.push(random_hpd(rng, m, 0.3));
            }
            HamiltonianSystem::new(m, k_min, a, b, rho, Extension::ConstantEdge)
        }
    }
}

/// Seeded random system on `[k_min, k_min + len − 1]` (constant-edge extension),
/// redrawn until it is definite on the default z-sample.
pub fn random_system(m: usize, k_min: i64, len: usize, seed: u64, class: SystemClass) -> Result<HamiltonianSystem> {
    if m == 0 || len == 0 {
        return Err(Error::Input("random_system needs m > 0 and len > 0".into()));
    }
    const ATTEMPTS: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let (lo, hi) = (k_min, k_min + len as i64 - 1);
    for _ in 0..ATTEMPTS {
        let sys = draw(&mut rng, m, k_min, len, class)?;
        let mut ok = true;
        for z in default_z_sample() {
            if !check_definiteness(&sys, z, lo, hi, &tol)?.definite {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(sys);
        }
    }
    Err(Error::Generation {
        attempts: ATTEMPTS,
        reason: "definiteness failed on the default z-sample".into(),
    })
}
