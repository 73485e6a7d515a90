//! Solutions of `S_ρ Ψ = (zA + B) Ψ` by forward/backward stepping of the hat
//! state `Ψ̂(k) = (ψ₁(k); ψ₂(k+1))`, fundamental systems and the Lagrange form.

use crate::error::{Error, Result};
use crate::linalg::{self, bottom, top, vstack, CMat, C64, RCOND_MIN};
use crate::system::{BoundaryData, HamiltonianSystem};

/// Column norm above which trajectories are flagged as close to overflow.
pub const SCALE_WARNING: f64 = 1e150;

/// A 2m×r block of solution data `(ψ₁(k); ψ₂(k+1))` at site `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatState {
    k: i64,
    z: C64,
    data: CMat,
}

impl HatState {
    pub fn new(k: i64, z: C64, data: CMat) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 || !data.nrows().is_multiple_of(2) {
            return Err(Error::Input(format!(
                "hat state must be 2m x r with r >= 1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(HatState { k, z, data })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn into_data(self) -> CMat {
        self.data
    }

    /// ψ₁(k)
    pub fn psi1(&self) -> CMat {
        top(&self.data, self.data.nrows() / 2)
    }

    /// ψ₂(k+1)
    pub fn psi2_next(&self) -> CMat {
        bottom(&self.data, self.data.nrows() / 2)
    }
}

struct Pencil {
    c11: CMat,
    c12: CMat,
    c21: CMat,
    c22: CMat,
}

fn pencil(sys: &HamiltonianSystem, z: C64, k: i64) -> Result<Pencil> {
    let p = sys.pencil(z, k)?;
    let m = sys.m();
    Ok(Pencil {
        c11: linalg::block(&p, 0, 0, m),
        c12: linalg::block(&p, 0, 1, m),
        c21: linalg::block(&p, 1, 0, m),
        c22: linalg::block(&p, 1, 1, m),
    })
}

fn check_dims(sys: &HamiltonianSystem, data: &CMat) -> Result<()> {
    if data.nrows() != 2 * sys.m() {
        return Err(Error::Input(format!(
            "state has {} rows, system needs {}",
            data.nrows(),
            2 * sys.m()
        )));
    }
    Ok(())
}

fn factor_solve(a: &CMat, b: &CMat, k: i64, name: &'static str) -> Result<(CMat, f64)> {
    let rc = linalg::rcond(a);
    if rc < RCOND_MIN {
        return Err(Error::Stepping { k, pencil: name, rcond: rc });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::Stepping { k, pencil: name, rcond: rc })?;
    Ok((x, rc))
}

pub(crate) fn forward_data(sys: &HamiltonianSystem, z: C64, k: i64, data: &CMat) -> Result<(CMat, f64)> {
    let m = sys.m();
    let pc = pencil(sys, z, k + 1)?;
    let psi1 = top(data, m);
    let psi2n = bottom(data, m);
    let rhs = sys.rho(k)? * &psi1 - &pc.c22 * &psi2n;
    let (p1, rc) = factor_solve(&pc.c21, &rhs, k + 1, "zA21+B21")?;
    let p2 = linalg::solve(sys.rho(k + 1)?, &(&pc.c11 * &p1 + &pc.c12 * &psi2n), "rho")?;
    Ok((vstack(&p1, &p2), rc))
}

pub(crate) fn backward_data(sys: &HamiltonianSystem, z: C64, k: i64, data: &CMat) -> Result<(CMat, f64)> {
    let m = sys.m();
    let pc = pencil(sys, z, k)?;
    let psi1 = top(data, m);
    let psi2n = bottom(data, m);
    let rhs = sys.rho(k)? * &psi2n - &pc.c11 * &psi1;
    let (p2, rc) = factor_solve(&pc.c12, &rhs, k, "zA12+B12")?;
    let p1 = linalg::solve(sys.rho(k - 1)?, &(&pc.c21 * &psi1 + &pc.c22 * &p2), "rho")?;
    Ok((vstack(&p1, &p2), rc))
}

/// Advance the hat state from `k` to `k+1`.
pub fn step_forward(sys: &HamiltonianSystem, state: &HatState) -> Result<HatState> {
    check_dims(sys, &state.data)?;
    let (data, _) = forward_data(sys, state.z, state.k, &state.data)?;
    Ok(HatState {
        k: state.k + 1,
        z: state.z,
        data,
    })
}

/// Move the hat state from `k` to `k−1`; inverts the `(1,2)` pencil at `k`.
pub fn step_backward(sys: &HamiltonianSystem, state: &HatState) -> Result<HatState> {
    check_dims(sys, &state.data)?;
    let (data, _) = backward_data(sys, state.z, state.k, &state.data)?;
    Ok(HatState {
        k: state.k - 1,
        z: state.z,
        data,
    })
}

/// The plain state `Ψ(k) = (ψ₁(k); ψ₂(k))` recovered from the hat state at `k`.
pub fn plain_from_hat(sys: &HamiltonianSystem, state: &HatState) -> Result<CMat> {
    check_dims(sys, &state.data)?;
    let m = sys.m();
    let pc = pencil(sys, state.z, state.k)?;
    let psi1 = state.psi1();
    let rhs = sys.rho(state.k)? * state.psi2_next() - &pc.c11 * &psi1;
    let (p2, _) = factor_solve(&pc.c12, &rhs, state.k, "zA12+B12")?;
    debug_assert_eq!(p2.nrows(), m);
    Ok(vstack(&psi1, &p2))
}

/// Hat states of one solution block over a contiguous range of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    z: C64,
    lo: i64,
    hats: Vec<CMat>,
    /// reciprocal condition of the pencil solved to reach each site (1 at the start site)
    step_rcond: Vec<f64>,
    scale_warning: bool,
}

impl Trajectory {
    /// Propagate `start` so that the trajectory covers `[lo, hi]` (and the start site).
    pub fn propagate(sys: &HamiltonianSystem, start: &HatState, lo: i64, hi: i64) -> Result<Self> {
        check_dims(sys, &start.data)?;
        let lo = lo.min(start.k);
        let hi = hi.max(start.k);
        let n = (hi - lo + 1) as usize;
        let mut hats = vec![CMat::zeros(0, 0); n];
        let mut rc = vec![1.0; n];
        let i0 = (start.k - lo) as usize;
        hats[i0] = start.data.clone();
        for k in start.k..hi {
            let i = (k - lo) as usize;
            let (d, r) = forward_data(sys, start.z, k, &hats[i])?;
            hats[i + 1] = d;
            rc[i + 1] = r;
        }
        for k in ((lo + 1)..=start.k).rev() {
            let i = (k - lo) as usize;
            let (d, r) = backward_data(sys, start.z, k, &hats[i])?;
            hats[i - 1] = d;
            rc[i - 1] = r;
        }
        let scale_warning = hats
            .iter()
            .any(|h| h.column_iter().any(|c| c.norm() > SCALE_WARNING || !c.norm().is_finite()));
        Ok(Trajectory {
            z: start.z,
            lo,
            hats,
            step_rcond: rc,
            scale_warning,
        })
    }

    /// Wrap precomputed hat states for sites `lo, lo+1, ...`.
    pub fn from_hats(z: C64, lo: i64, hats: Vec<CMat>) -> Result<Self> {
        if hats.is_empty() {
            return Err(Error::Input("trajectory needs at least one state".into()));
        }
        let n = hats.len();
        let scale_warning = hats
            .iter()
            .any(|h| h.column_iter().any(|c| c.norm() > SCALE_WARNING || !c.norm().is_finite()));
        Ok(Trajectory {
            z,
            lo,
            hats,
            step_rcond: vec![1.0; n],
            scale_warning,
        })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.hats.len() as i64 - 1
    }

    pub fn ncols(&self) -> usize {
        self.hats[0].ncols()
    }

    /// True when some column exceeded the overflow guard.
    pub fn scale_warning(&self) -> bool {
        self.scale_warning
    }

    fn idx(&self, k: i64) -> Result<usize> {
        if k < self.lo || k > self.hi() {
            return Err(Error::Domain {
                k,
                lo: self.lo,
                hi: self.hi(),
            });
        }
        Ok((k - self.lo) as usize)
    }

    pub fn hat(&self, k: i64) -> Result<&CMat> {
        Ok(&self.hats[self.idx(k)?])
    }

    pub fn state(&self, k: i64) -> Result<HatState> {
        Ok(HatState {
            k,
            z: self.z,
            data: self.hat(k)?.clone(),
        })
    }

    pub fn step_rcond(&self, k: i64) -> Result<f64> {
        Ok(self.step_rcond[self.idx(k)?])
    }

    /// Plain state `Ψ(k)`; uses the stored state at `k−1` when present.
    pub fn plain(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        let h = self.hat(k)?;
        let m = h.nrows() / 2;
        if k > self.lo {
            Ok(vstack(&top(h, m), &bottom(&self.hats[self.idx(k - 1)?], m)))
        } else {
            plain_from_hat(sys, &self.state(k)?)
        }
    }

    /// Extend by plain stepping so the trajectory covers `[lo, hi]` as well.
    pub fn extended(&self, sys: &HamiltonianSystem, lo: i64, hi: i64) -> Result<Trajectory> {
        let mut out = self.clone();
        while out.hi() < hi {
            let k = out.hi();
            let (d, r) = forward_data(sys, out.z, k, out.hats.last().unwrap())?;
            out.hats.push(d);
            out.step_rcond.push(r);
        }
        while out.lo > lo {
            let (d, r) = backward_data(sys, out.z, out.lo, &out.hats[0])?;
            out.hats.insert(0, d);
            out.step_rcond.insert(0, r);
            out.lo -= 1;
        }
        out.scale_warning = out
            .hats
            .iter()
            .any(|h| h.column_iter().any(|c| c.norm() > SCALE_WARNING || !c.norm().is_finite()));
        Ok(out)
    }

    /// Right-multiply every stored state by `x`.
    pub fn times(&self, x: &CMat) -> Trajectory {
        let hats: Vec<CMat> = self.hats.iter().map(|h| h * x).collect();
        let scale_warning = hats
            .iter()
            .any(|h| h.column_iter().any(|c| c.norm() > SCALE_WARNING || !c.norm().is_finite()));
        Trajectory {
            z: self.z,
            lo: self.lo,
            hats,
            step_rcond: self.step_rcond.clone(),
            scale_warning,
        }
    }

    /// Columns `start..start+n`.
    pub fn columns(&self, start: usize, n: usize) -> Trajectory {
        Trajectory {
            z: self.z,
            lo: self.lo,
            hats: self.hats.iter().map(|h| h.columns(start, n).into_owned()).collect(),
            step_rcond: self.step_rcond.clone(),
            scale_warning: self.scale_warning,
        }
    }

    /// Largest column norm over the trajectory.
    pub fn max_column_norm(&self) -> f64 {
        self.hats
            .iter()
            .flat_map(|h| h.column_iter().map(|c| c.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// `I_ρ(k₀)^{-1/2} (α*  Jα*)`.
pub fn initial_hat(sys: &HamiltonianSystem, k0: i64, alpha: &BoundaryData) -> Result<CMat> {
    if alpha.m() != sys.m() {
        return Err(Error::Input(format!(
            "boundary data has m = {}, system has m = {}",
            alpha.m(),
            sys.m()
        )));
    }
    let m = sys.m();
    let astar = alpha.gamma().adjoint();
    let jastar = linalg::j_unit(m) * &astar;
    let w = linalg::hpd_inv_sqrt(&sys.i_rho(k0)?)?;
    Ok(w * linalg::hstack(&astar, &jastar))
}

/// Normalized fundamental system `Ψ(z, k, k₀, α̃) = (Θ Φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    k0: i64,
    alpha: BoundaryData,
    traj: Trajectory,
}

/// Fundamental system at `z` started at `k₀`, stored on `[lo, hi] ∪ {k₀}`.
pub fn fundamental(
    sys: &HamiltonianSystem,
    z: C64,
    k0: i64,
    alpha: &BoundaryData,
    lo: i64,
    hi: i64,
) -> Result<FundamentalMatrix> {
    let start = HatState::new(k0, z, initial_hat(sys, k0, alpha)?)?;
    let traj = Trajectory::propagate(sys, &start, lo, hi)?;
    Ok(FundamentalMatrix {
        k0,
        alpha: alpha.clone(),
        traj,
    })
}

impl FundamentalMatrix {
    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn z(&self) -> C64 {
        self.traj.z
    }

    pub fn alpha(&self) -> &BoundaryData {
        &self.alpha
    }

    pub fn m(&self) -> usize {
        self.traj.ncols() / 2
    }

    pub fn lo(&self) -> i64 {
        self.traj.lo()
    }

    pub fn hi(&self) -> i64 {
        self.traj.hi()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn scale_warning(&self) -> bool {
        self.traj.scale_warning()
    }

    /// `Ψ̂(z, k)`.
    pub fn hat(&self, k: i64) -> Result<&CMat> {
        self.traj.hat(k)
    }

    pub fn theta_hat(&self, k: i64) -> Result<CMat> {
        Ok(self.hat(k)?.columns(0, self.m()).into_owned())
    }

    pub fn phi_hat(&self, k: i64) -> Result<CMat> {
        let m = self.m();
        Ok(self.hat(k)?.columns(m, m).into_owned())
    }

    /// Plain `Ψ(z, k)`.
    pub fn plain(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        self.traj.plain(sys, k)
    }

    /// Plain blocks `(θ₁, θ₂, φ₁, φ₂)` at `k`.
    pub fn blocks(&self, sys: &HamiltonianSystem, k: i64) -> Result<[CMat; 4]> {
        let p = self.plain(sys, k)?;
        let m = self.m();
        Ok([
            linalg::block(&p, 0, 0, m),
            linalg::block(&p, 1, 0, m),
            linalg::block(&p, 0, 1, m),
            linalg::block(&p, 1, 1, m),
        ])
    }

    /// The Θ columns as a trajectory.
    pub fn theta(&self) -> Trajectory {
        self.traj.columns(0, self.m())
    }

    /// The Φ columns as a trajectory.
    pub fn phi(&self) -> Trajectory {
        self.traj.columns(self.m(), self.m())
    }
}

/// `Ψ̂₁* J_ρ(k) Ψ̂₂` for two states at the same site.
pub fn lagrange_bilinear(sys: &HamiltonianSystem, s1: &HatState, s2: &HatState) -> Result<CMat> {
    if s1.k != s2.k {
        return Err(Error::Input(format!(
            "states live at different sites ({} and {})",
            s1.k, s2.k
        )));
    }
    check_dims(sys, &s1.data)?;
    check_dims(sys, &s2.data)?;
    Ok(s1.data.adjoint() * sys.j_rho(s1.k)? * &s2.data)
}

/// Pointwise check of `F(k) − F(k−1) = (z₂ − z̄₁) Ψ₁(k)* A(k) Ψ₂(k)` with
/// `F = Ψ̂₁* J_ρ Ψ̂₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeCheck {
    pub per_site: Vec<(i64, f64)>,
    pub max_rel_error: f64,
}

pub fn lagrange_telescoping(sys: &HamiltonianSystem, t1: &Trajectory, t2: &Trajectory) -> Result<LagrangeCheck> {
    let lo = t1.lo().max(t2.lo());
    let hi = t1.hi().min(t2.hi());
    if hi <= lo {
        return Err(Error::Input("trajectories share fewer than two sites".into()));
    }
    let w = t2.z() - t1.z().conj();
    let f = |k: i64| -> Result<(CMat, f64)> {
        let h1 = t1.hat(k)?;
        let h2 = t2.hat(k)?;
        let jr = sys.j_rho(k)?;
        let scale = linalg::fro(h1) * linalg::fro(h2) * linalg::fro(&jr);
        Ok((h1.adjoint() * jr * h2, scale))
    };
    let mut per_site = Vec::new();
    let mut max_rel_error = 0.0f64;
    let (mut f_prev, mut s_prev) = f(lo)?;
    for k in (lo + 1)..=hi {
        let (f_k, s_k) = f(k)?;
        let p1 = t1.plain(sys, k)?;
        let p2 = t2.plain(sys, k)?;
        let a = sys.a(k)?;
        let rhs = p1.adjoint() * a * &p2 * w;
        let scale = s_k + s_prev + w.norm() * linalg::fro(&p1) * linalg::fro(&p2) * linalg::fro(a);
        let err = linalg::fro(&(&f_k - &f_prev - rhs)) / scale.max(f64::MIN_POSITIVE);
        max_rel_error = max_rel_error.max(err);
        per_site.push((k, err));
        f_prev = f_k;
        s_prev = s_k;
    }
    Ok(LagrangeCheck {
        per_site,
        max_rel_error,
    })
}

/// `U = Ψ (I; M)` built from a fundamental system.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylSolution {
    k0: i64,
    m_value: CMat,
    traj: Trajectory,
}

pub fn weyl_solution(fund: &FundamentalMatrix, m_value: &CMat) -> WeylSolution {
    let m = fund.m();
    let coef = vstack(&linalg::eye(m), m_value);
    WeylSolution {
        k0: fund.k0,
        m_value: m_value.clone(),
        traj: fund.traj.times(&coef),
    }
}

impl WeylSolution {
    /// Wrap an arbitrary trajectory (e.g. one obtained by a backward sweep).
    pub fn from_trajectory(k0: i64, m_value: CMat, traj: Trajectory) -> Self {
        WeylSolution { k0, m_value, traj }
    }

    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn m_value(&self) -> &CMat {
        &self.m_value
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn hat(&self, k: i64) -> Result<&CMat> {
        self.traj.hat(k)
    }

    /// u₁(k)
    pub fn u1(&self, k: i64) -> Result<CMat> {
        let h = self.hat(k)?;
        Ok(top(h, h.nrows() / 2))
    }

    /// u₂(k+1)
    pub fn u2_next(&self, k: i64) -> Result<CMat> {
        let h = self.hat(k)?;
        Ok(bottom(h, h.nrows() / 2))
    }

    /// u₂(k)
    pub fn u2(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        let p = self.traj.plain(sys, k)?;
        Ok(bottom(&p, p.nrows() / 2))
    }

    pub fn plain(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        self.traj.plain(sys, k)
    }
}

/// `(L y)(k) = a(k) y(k+1) + a(k−1) y(k−1) + b(k) y(k)` for a Jacobi-built system.
pub fn jacobi_apply(sys: &HamiltonianSystem, y: impl Fn(i64) -> CMat, k: i64) -> Result<CMat> {
    Ok(sys.jacobi_a(k)? * y(k + 1) + sys.jacobi_a(k - 1)? * y(k - 1) + sys.jacobi_b(k)? * y(k))
}

/// `((S_ρ − zA − B) Ψ)(k)` for plain data `Ψ`.
pub fn apply_operator(
    sys: &HamiltonianSystem,
    z: C64,
    psi: impl Fn(i64) -> Result<CMat>,
    k: i64,
) -> Result<CMat> {
    let m = sys.m();
    let here = psi(k)?;
    let up = psi(k + 1)?;
    let down = psi(k - 1)?;
    let s = vstack(&(sys.rho(k)? * bottom(&up, m)), &(sys.rho(k - 1)? * top(&down, m)));
    Ok(s - sys.pencil(z, k)? * here)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, eye, fro, zeros};
    use crate::system::{dirac_system, free_jacobi, Extension};

    #[test]
    fn dirac_constant_solution_at_zero() {
        for m in 1..=2 {
            let sys = dirac_system(0, vec![eye(m); 5], Extension::ConstantEdge).unwrap();
            let s = HatState::new(1, c(0.0, 0.0), vstack(&eye(m), &eye(m))).unwrap();
            let f = step_forward(&sys, &s).unwrap();
            assert_eq!(f.k(), 2);
            assert!(fro(&(f.data() - s.data())) < 1e-15);
            let b = step_backward(&sys, &s).unwrap();
            assert!(fro(&(b.data() - s.data())) < 1e-15);
        }
    }

    #[test]
    fn scalar_jacobi_three_term_recurrence() {
        let sys = free_jacobi(1, -5, 70, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let z = c(0.3, 0.2);
        let s = HatState::new(0, z, CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.5, -0.25)])).unwrap();
        let traj = Trajectory::propagate(&sys, &s, 0, 50).unwrap();
        // independent recurrence y(k+1) = (2 − z) y(k) − y(k−1), seeded from two propagated values
        let mut y = vec![traj.hat(0).unwrap()[(0, 0)], traj.hat(1).unwrap()[(0, 0)]];
        for k in 1..50 {
            let next = (c(2.0, 0.0) - z) * y[k] - y[k - 1];
            y.push(next);
        }
        for k in 0..=50 {
            let got = traj.hat(k as i64).unwrap()[(0, 0)];
            assert!((got - y[k]).norm() <= 1e-12 * y[k].norm().max(1.0), "k = {k}");
        }
    }

    #[test]
    fn initial_values() {
        let sys = free_jacobi(2, 0, 3, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let d = initial_hat(&sys, 1, &BoundaryData::dirichlet(2)).unwrap();
        let expect = linalg::block_diag(&eye(2), &(-eye(2)));
        assert!(fro(&(d - expect)) < 1e-15);
        let n = initial_hat(&sys, 1, &BoundaryData::neumann(2)).unwrap();
        let z = zeros(2, 2);
        assert!(fro(&(n - linalg::blocks(&z, &eye(2), &eye(2), &z))) < 1e-15);
    }

    #[test]
    fn dirichlet_polynomial_at_zero() {
        // z = 0, p = 1, q = 0: the Φ column has φ₁(0) = 0 and grows linearly, φ₁(k) = k
        let sys = free_jacobi(1, -2, 12, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let f = fundamental(&sys, c(0.0, 0.0), 0, &BoundaryData::dirichlet(1), 0, 5).unwrap();
        for k in 0..=5 {
            let phi1 = f.phi_hat(k).unwrap()[(0, 0)];
            assert!((phi1 - c(k as f64, 0.0)).norm() < 1e-13, "k={k} {phi1}");
            let theta1 = f.theta_hat(k).unwrap()[(0, 0)];
            assert!((theta1 - c(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn symplectic_identity() {
        let sys = free_jacobi(2, -10, 30, 1.3, 0.4, Extension::ConstantEdge).unwrap();
        let z = c(0.7, 0.6);
        let a = BoundaryData::dirichlet(2);
        let f = fundamental(&sys, z, 0, &a, -8, 8).unwrap();
        let fb = fundamental(&sys, z.conj(), 0, &a, -8, 8).unwrap();
        let j = linalg::j_unit(2);
        for k in -8..=8 {
            let lhs = fb.hat(k).unwrap().adjoint() * sys.j_rho(k).unwrap() * f.hat(k).unwrap();
            assert!(fro(&(lhs + &j)) < 1e-10 * fro(f.hat(k).unwrap()).powi(2).max(1.0));
        }
    }

    #[test]
    fn real_z_bilinear_form_constant() {
        let sys = free_jacobi(1, 0, 40, 1.0, 0.2, Extension::ConstantEdge).unwrap();
        let f = fundamental(&sys, c(1.1, 0.0), 5, &BoundaryData::dirichlet(1), 0, 39).unwrap();
        let t = f.theta();
        let base = lagrange_bilinear(&sys, &t.state(0).unwrap(), &t.state(0).unwrap()).unwrap();
        for k in 0..40 {
            let v = lagrange_bilinear(&sys, &t.state(k).unwrap(), &t.state(k).unwrap()).unwrap();
            assert!(fro(&(v - &base)) < 1e-12 * (1.0 + fro(t.hat(k).unwrap()).powi(2)));
        }
        let other = t.state(3).unwrap();
        assert!(lagrange_bilinear(&sys, &t.state(2).unwrap(), &other).is_err());
    }

    #[test]
    fn phi_block_energy_sum() {
        let sys = free_jacobi(1, -3, 30, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let z = c(0.4, 0.8);
        let (k0, l) = (0, 12);
        let f = fundamental(&sys, z, k0, &BoundaryData::dirichlet(1), k0, l).unwrap();
        let phi = f.phi();
        let form = |k| {
            let h = phi.hat(k).unwrap();
            h.adjoint() * sys.j_rho(k).unwrap() * h
        };
        let lhs = form(l) - form(k0);
        let mut sum = zeros(1, 1);
        for k in (k0 + 1)..=l {
            let p = phi.plain(&sys, k).unwrap();
            sum += p.adjoint() * sys.a(k).unwrap() * &p;
        }
        let rhs = sum * (z - z.conj());
        assert!(fro(&(&lhs - &rhs)) < 1e-10 * fro(&rhs));
    }

    #[test]
    fn weyl_solution_basics() {
        let sys = free_jacobi(1, -3, 30, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let f = fundamental(&sys, c(0.0, 1.0), 0, &BoundaryData::dirichlet(1), 0, 6).unwrap();
        let u0 = weyl_solution(&f, &zeros(1, 1));
        for k in 0..=6 {
            assert!(fro(&(u0.hat(k).unwrap() - f.theta_hat(k).unwrap())) < 1e-15);
        }
        let mv = CMat::from_element(1, 1, c(0.3, 0.7));
        let u = weyl_solution(&f, &mv);
        assert!(fro(&(u.u1(0).unwrap() - eye(1))) < 1e-15);
        assert!(fro(&(u.u2_next(0).unwrap() + &mv)) < 1e-15);
    }

    #[test]
    fn jacobi_operator_examples() {
        let sys = free_jacobi(1, -5, 200, 1.0, 0.0, Extension::ConstantEdge).unwrap();
        let cst = CMat::from_element(1, 1, c(2.5, -1.0));
        let ly = jacobi_apply(&sys, |_| cst.clone(), 3).unwrap();
        assert!(fro(&ly) < 1e-15);
        // geometric solution w + 1/w = 2 − z
        let z = c(0.5, 0.3);
        let s = ((c(2.0, 0.0) - z).powi(2) - c(4.0, 0.0)).sqrt();
        let w = (c(2.0, 0.0) - z + s) / 2.0;
        let y = |k: i64| CMat::from_element(1, 1, w.powi(k as i32));
        for k in 0..5 {
            let r = jacobi_apply(&sys, y, k).unwrap() - y(k) * z;
            assert!(fro(&r) < 1e-13 * fro(&y(k)).max(1.0));
        }
        // ψ₁ from a fundamental system at z = i
        let z = c(0.0, 1.0);
        let f = fundamental(&sys, z, 0, &BoundaryData::dirichlet(1), -2, 101).unwrap();
        let t = f.theta();
        let psi1 = |k: i64| top(t.hat(k).unwrap(), 1);
        for k in 0..100 {
            let r = jacobi_apply(&sys, psi1, k).unwrap() - psi1(k) * z;
            assert!(fro(&r) <= 1e-11 * fro(&psi1(k + 1)).max(1.0), "k = {k}");
        }
    }

    #[test]
    fn operator_residual_of_solution_vanishes() {
        let sys = free_jacobi(2, -5, 30, 1.0, 0.3, Extension::ConstantEdge).unwrap();
        let z = c(0.2, 0.5);
        let f = fundamental(&sys, z, 0, &BoundaryData::neumann(2), -4, 10).unwrap();
        for k in -3..10 {
            let r = apply_operator(&sys, z, |j| f.plain(&sys, j), k).unwrap();
            assert!(fro(&r) < 1e-11 * fro(f.hat(k + 1).unwrap()).max(1.0));
        }
    }

    #[test]
    fn stepping_error_reports_site() {
        let sys = dirac_system(0, vec![eye(1); 6], Extension::Error).unwrap();
        let bad = linalg::blocks(&zeros(1, 1), &zeros(1, 1), &zeros(1, 1), &zeros(1, 1));
        let broken = sys.with_b(3, bad).unwrap();
        let s = HatState::new(1, c(0.0, 0.0), eye(2)).unwrap();
        let t = Trajectory::propagate(&broken, &s, 1, 5);
        assert!(matches!(t, Err(Error::Stepping { k: 3, .. })));
        // the window end is a domain error
        assert!(matches!(Trajectory::propagate(&sys, &s, 1, 9), Err(Error::Domain { .. })));
    }
}
