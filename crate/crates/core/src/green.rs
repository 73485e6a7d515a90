//! Whole-line and half-line Green's matrices and the nonhomogeneous problem.
//!
//! A kernel couples a "plus" solution `P` and a "minus" solution `N` through
//! `ω`: `K(k,ℓ) = P(z,k) ω N(z̄,ℓ)*` for `k > ℓ` and `N(z,k) ω P(z̄,ℓ)*` for
//! `k < ℓ`. The whole-line kernel uses `P = U₊`, `N = U₋`; the half-line
//! kernels replace one of them by `Φ`.

use crate::error::{Error, Result};
use crate::linalg::{self, blocks, bottom, top, vstack, CMat, C64};
use crate::propagate::{apply_operator, fundamental, weyl_solution, Trajectory};
use crate::system::{BoundaryData, HamiltonianSystem};
use crate::weyl::{weyl_solution_sweep, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelVariant {
    Whole,
    HalfPlus,
    HalfMinus,
}

impl std::fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelVariant::Whole => "whole",
            KernelVariant::HalfPlus => "half-plus",
            KernelVariant::HalfMinus => "half-minus",
        })
    }
}

impl std::str::FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(KernelVariant::Whole),
            "half-plus" | "half_plus" | "plus" => Ok(KernelVariant::HalfPlus),
            "half-minus" | "half_minus" | "minus" => Ok(KernelVariant::HalfMinus),
            _ => Err(Error::Input(format!("unknown kernel variant '{s}'"))),
        }
    }
}

/// How a Weyl solution entering the kernel is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum WeylSource {
    /// `U = Ψ(I; M)` propagated from `k₀`
    Value(CMat),
    /// circle point at `ℓ` for boundary data `β`, built by a renormalized sweep
    Surrogate { ell: i64, beta: BoundaryData },
}

/// One role of the kernel at one spectral point.
#[derive(Debug, Clone, PartialEq)]
struct Role {
    traj: Trajectory,
    /// plain values on the kernel domain
    plain: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreensKernel {
    variant: KernelVariant,
    /// base point in ℂ₊
    w: C64,
    /// the public `z` is `w̄` and `K(z,k,ℓ) = K(w,ℓ,k)*`
    conjugated: bool,
    k0: i64,
    alpha: BoundaryData,
    window: (i64, i64),
    /// `M₊(w)`, `M₋(w)` where the variant uses them
    m_plus: Option<CMat>,
    m_minus: Option<CMat>,
    /// `ω(w)`, `ω(w̄)`
    omega: [CMat; 2],
    /// `[P(w), P(w̄)]`, `[N(w), N(w̄)]`
    p: [Role; 2],
    n: [Role; 2],
}

fn check_sign(mv: &CMat, sign: f64, what: &str) -> Result<()> {
    let lo = linalg::min_eig(&(linalg::im_part(mv) * C64::from(sign)));
    if lo <= 0.0 {
        return Err(Error::Kernel(format!(
            "{what} has the wrong Herglotz sign (smallest eigenvalue of ±Im M is {lo:e})"
        )));
    }
    Ok(())
}

impl GreensKernel {
    /// Whole-line kernel from given `M₊(z)`, `M₋(z)`.
    pub fn whole(
        sys: &HamiltonianSystem,
        z: C64,
        k0: i64,
        alpha: &BoundaryData,
        m_plus: &CMat,
        m_minus: &CMat,
        window: (i64, i64),
    ) -> Result<Self> {
        Self::build(
            sys,
            z,
            k0,
            alpha,
            KernelVariant::Whole,
            Some(WeylSource::Value(m_plus.clone())),
            Some(WeylSource::Value(m_minus.clone())),
            window,
        )
    }

    /// Half-line kernel on `[k₀, ∞)` from a given `M₊(z)`.
    pub fn half_plus(
        sys: &HamiltonianSystem,
        z: C64,
        k0: i64,
        alpha: &BoundaryData,
        m_plus: &CMat,
        window: (i64, i64),
    ) -> Result<Self> {
        Self::build(
            sys,
            z,
            k0,
            alpha,
            KernelVariant::HalfPlus,
            Some(WeylSource::Value(m_plus.clone())),
            None,
            window,
        )
    }

    /// Half-line kernel on `(−∞, k₀]` from a given `M₋(z)`.
    pub fn half_minus(
        sys: &HamiltonianSystem,
        z: C64,
        k0: i64,
        alpha: &BoundaryData,
        m_minus: &CMat,
        window: (i64, i64),
    ) -> Result<Self> {
        Self::build(
            sys,
            z,
            k0,
            alpha,
            KernelVariant::HalfMinus,
            None,
            Some(WeylSource::Value(m_minus.clone())),
            window,
        )
    }

    /// General constructor. `plus` is required for the whole and half-plus
    /// variants, `minus` for the whole and half-minus variants; the kernel is
    /// evaluable for `k, ℓ ∈ [window.0 − 1, window.1 + 2]`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        sys: &HamiltonianSystem,
        z: C64,
        k0: i64,
        alpha: &BoundaryData,
        variant: KernelVariant,
        plus: Option<WeylSource>,
        minus: Option<WeylSource>,
        window: (i64, i64),
    ) -> Result<Self> {
        if z.im == 0.0 {
            return Err(Error::Input("Green's kernel needs Im z != 0".into()));
        }
        if alpha.m() != sys.m() {
            return Err(Error::Input("alpha has the wrong block size".into()));
        }
        let (lo, hi) = window;
        if lo > hi {
            return Err(Error::Input("empty kernel window".into()));
        }
        match variant {
            KernelVariant::HalfPlus if lo < k0 => {
                return Err(Error::Input("half-plus window must lie in [k0, inf)".into()))
            }
            KernelVariant::HalfMinus if hi > k0 => {
                return Err(Error::Input("half-minus window must lie in (-inf, k0]".into()))
            }
            _ => {}
        }
        let conjugated = z.im < 0.0;
        let w = if conjugated { z.conj() } else { z };
        let need_plus = variant != KernelVariant::HalfMinus;
        let need_minus = variant != KernelVariant::HalfPlus;
        let plus = if need_plus {
            Some(plus.ok_or_else(|| Error::Input("plus-side Weyl data missing".into()))?)
        } else {
            None
        };
        let minus = if need_minus {
            Some(minus.ok_or_else(|| Error::Input("minus-side Weyl data missing".into()))?)
        } else {
            None
        };
        let (hlo, hhi) = (lo - 2, hi + 2);
        let m = sys.m();

        // Ψ over the hat range at w and w̄, used by value sources and Φ
        let span = (hlo.min(k0), hhi.max(k0));
        let fund = [
            fundamental(sys, w, k0, alpha, span.0, span.1)?,
            fundamental(sys, w.conj(), k0, alpha, span.0, span.1)?,
        ];
        let phi = |i: usize| -> Trajectory { fund[i].phi() };

        // returns the role trajectories at (w, w̄) and M(w)
        let weyl_role = |src: &WeylSource, sign: f64| -> Result<([Trajectory; 2], CMat)> {
            match src {
                WeylSource::Value(mz) => {
                    // M is supplied at the public z
                    let mw = if conjugated { mz.adjoint() } else { mz.clone() };
                    let a = weyl_solution(&fund[0], &mw).trajectory().clone();
                    let b = weyl_solution(&fund[1], &mw.adjoint()).trajectory().clone();
                    Ok(([a, b], mw))
                }
                WeylSource::Surrogate { ell, beta } => {
                    if (*ell - k0).signum() as f64 != sign {
                        return Err(Error::Input(format!("surrogate ell = {ell} lies on the wrong side of k0")));
                    }
                    let a = weyl_solution_sweep(sys, w, k0, *ell, alpha, beta)?;
                    let b = weyl_solution_sweep(sys, w.conj(), k0, *ell, alpha, beta)?;
                    let mw = a.m_value().clone();
                    Ok((
                        [
                            a.trajectory().extended(sys, hlo, hhi)?,
                            b.trajectory().extended(sys, hlo, hhi)?,
                        ],
                        mw,
                    ))
                }
            }
        };

        let (p_traj, m_plus) = match &plus {
            Some(src) => {
                let (t, mw) = weyl_role(src, 1.0)?;
                check_sign(&mw, 1.0, "M_+")?;
                (t, Some(mw))
            }
            None => ([phi(0), phi(1)], None),
        };
        let (n_traj, m_minus) = match &minus {
            Some(src) => {
                let (t, mw) = weyl_role(src, -1.0)?;
                check_sign(&mw, -1.0, "M_-")?;
                (t, Some(mw))
            }
            None => ([phi(0), phi(1)], None),
        };
        let omega0 = match variant {
            KernelVariant::Whole => {
                let d = m_minus.as_ref().unwrap() - m_plus.as_ref().unwrap();
                linalg::inverse(&d, "M_- - M_+")?
            }
            KernelVariant::HalfPlus => linalg::eye(m),
            KernelVariant::HalfMinus => -linalg::eye(m),
        };
        let omega1 = omega0.adjoint();
        let role = |t: Trajectory| -> Result<Role> {
            let plain = ((lo - 1)..=(hi + 2)).map(|k| t.plain(sys, k)).collect::<Result<_>>()?;
            Ok(Role { traj: t, plain })
        };
        let [p0, p1] = p_traj;
        let [n0, n1] = n_traj;
        Ok(GreensKernel {
            variant,
            w,
            conjugated,
            k0,
            alpha: alpha.clone(),
            window,
            m_plus,
            m_minus,
            omega: [omega0, omega1],
            p: [role(p0)?, role(p1)?],
            n: [role(n0)?, role(n1)?],
        })
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    /// The spectral parameter the kernel represents.
    pub fn z(&self) -> C64 {
        if self.conjugated {
            self.w.conj()
        } else {
            self.w
        }
    }

    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn alpha(&self) -> &BoundaryData {
        &self.alpha
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    /// Sites where the kernel can be evaluated.
    pub fn domain(&self) -> (i64, i64) {
        (self.window.0 - 1, self.window.1 + 2)
    }

    /// `M₊(z)` at the public `z`, if used.
    pub fn m_plus(&self) -> Option<CMat> {
        self.m_plus.as_ref().map(|m| self.public(m))
    }

    pub fn m_minus(&self) -> Option<CMat> {
        self.m_minus.as_ref().map(|m| self.public(m))
    }

    /// `ω(z)`.
    pub fn omega(&self) -> CMat {
        if self.conjugated {
            self.omega[1].clone()
        } else {
            self.omega[0].clone()
        }
    }

    fn public(&self, mw: &CMat) -> CMat {
        if self.conjugated {
            mw.adjoint()
        } else {
            mw.clone()
        }
    }

    fn idx(&self, k: i64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if k < lo || k > hi {
            return Err(Error::Domain { k, lo, hi });
        }
        Ok((k - lo) as usize)
    }

    /// Kernel at `w` (point 0) or `w̄` (point 1) by the defining formula.
    fn eval_at(&self, point: usize, k: i64, l: i64) -> Result<CMat> {
        let other = 1 - point;
        let (ik, il) = (self.idx(k)?, self.idx(l)?);
        let om = &self.omega[point];
        let pm = &self.p[point].plain;
        let nm = &self.n[point].plain;
        let po = &self.p[other].plain;
        let no = &self.n[other].plain;
        if k > l {
            return Ok(&pm[ik] * om * no[il].adjoint());
        }
        if k < l {
            return Ok(&nm[ik] * om * po[il].adjoint());
        }
        let m = om.nrows();
        let p1 = top(&pm[ik], m);
        let n2 = bottom(&nm[ik], m);
        let n1c = top(&no[ik], m).adjoint();
        let n2c = bottom(&no[ik], m).adjoint();
        let p1c = top(&po[ik], m).adjoint();
        let p2c = bottom(&po[ik], m).adjoint();
        Ok(blocks(
            &(&p1 * om * n1c),
            &(&p1 * om * n2c),
            &(&n2 * om * p1c),
            &(&n2 * om * p2c),
        ))
    }

    /// `K(z, k, ℓ)`.
    pub fn eval(&self, k: i64, l: i64) -> Result<CMat> {
        if self.conjugated {
            Ok(self.eval_at(0, l, k)?.adjoint())
        } else {
            self.eval_at(0, k, l)
        }
    }

    /// `‖K(z,k,ℓ)* − K(z̄,ℓ,k)‖` with both sides from the defining formula.
    pub fn symmetry_defect(&self, k: i64, l: i64) -> Result<f64> {
        let a = self.eval_at(0, k, l)?.adjoint();
        let b = self.eval_at(1, l, k)?;
        Ok(linalg::norm2(&(a - b)))
    }

    fn role_hat(&self, dir: Direction, conj: bool, k: i64) -> Result<&CMat> {
        let point = usize::from(conj != self.conjugated);
        match dir {
            Direction::Plus => self.p[point].traj.hat(k),
            Direction::Minus => self.n[point].traj.hat(k),
        }
    }

    /// Hat state of the plus (`U₊` or `Φ`) or minus role at the public `z`.
    pub fn role_solution_hat(&self, dir: Direction, k: i64) -> Result<CMat> {
        Ok(self.role_hat(dir, false, k)?.clone())
    }

    /// `N(z̄,k)* J_ρ(k) P(z,k)`, which equals `ω⁻¹` at every site.
    pub fn coupling(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        let n = self.role_hat(Direction::Minus, true, k)?;
        let p = self.role_hat(Direction::Plus, false, k)?;
        Ok(n.adjoint() * sys.j_rho(k)? * p)
    }

    /// `P(z̄,k)* J_ρ(k) N(z,k)`, which equals `−ω⁻¹`.
    pub fn coupling_reverse(&self, sys: &HamiltonianSystem, k: i64) -> Result<CMat> {
        let p = self.role_hat(Direction::Plus, true, k)?;
        let n = self.role_hat(Direction::Minus, false, k)?;
        Ok(p.adjoint() * sys.j_rho(k)? * n)
    }

    /// Largest deviation of the two couplings from `±ω⁻¹` over the window.
    pub fn coupling_defect(&self, sys: &HamiltonianSystem) -> Result<f64> {
        let inv = linalg::inverse(&self.omega(), "omega")?;
        let scale = 1.0 + linalg::norm2(&inv);
        let mut d = 0.0f64;
        for k in self.window.0..=self.window.1 {
            d = d.max(linalg::norm2(&(self.coupling(sys, k)? - &inv)) / scale);
            d = d.max(linalg::norm2(&(self.coupling_reverse(sys, k)? + &inv)) / scale);
        }
        Ok(d)
    }

    /// `((S_ρ − zA − B) K(z,·,ℓ))(k) − δ_{kℓ} I` normalized by `1 + max‖K(·,ℓ)‖`.
    pub fn delta_residual(&self, sys: &HamiltonianSystem, k: i64, l: i64) -> Result<f64> {
        let z = self.z();
        let col = |j: i64| self.eval(j, l);
        let mut r = apply_operator(sys, z, col, k)?;
        let scale = 1.0 + [k - 1, k, k + 1]
            .iter()
            .map(|&j| self.eval(j, l).map(|x| linalg::norm2(&x)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if k == l {
            r -= linalg::eye(2 * sys.m());
        }
        Ok(linalg::norm2(&r) / scale)
    }

    /// Delta residual over all `k, ℓ` in the window.
    pub fn delta_report(&self, sys: &HamiltonianSystem) -> Result<DeltaReport> {
        let (lo, hi) = self.window;
        let mut worst = (0.0f64, lo, lo);
        let mut diagonal = 0.0f64;
        for l in lo..=hi {
            for k in lo..=hi {
                let r = self.delta_residual(sys, k, l)?;
                if k == l {
                    diagonal = diagonal.max(r);
                }
                if r > worst.0 {
                    worst = (r, k, l);
                }
            }
        }
        Ok(DeltaReport {
            max_residual: worst.0,
            worst_site: (worst.1, worst.2),
            max_diagonal_residual: diagonal,
        })
    }

    fn coefficients(&self, point: usize) -> (CMat, CMat) {
        let m = self.omega[0].nrows();
        let weyl = |mw: &CMat| {
            let v = if point == 0 { mw.clone() } else { mw.adjoint() };
            vstack(&linalg::eye(m), &v)
        };
        let phi = vstack(&linalg::zeros(m, m), &linalg::eye(m));
        let cp = self.m_plus.as_ref().map(weyl).unwrap_or_else(|| phi.clone());
        let cn = self.m_minus.as_ref().map(weyl).unwrap_or(phi);
        (cp, cn)
    }

    /// `K(z,k,ℓ)` for `k ≠ ℓ` written as `Ψ(z,k)·C·Ψ(z̄,ℓ)*` with the 2×2 block
    /// matrix `C` built from `M±` (or `(0 I)` for a `Φ` role).
    pub fn alternative_representation(&self, sys: &HamiltonianSystem, pairs: &[(i64, i64)]) -> Result<Vec<CMat>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let (dlo, dhi) = self.domain();
        let lo = pairs.iter().map(|p| p.0.min(p.1)).min().unwrap().max(dlo);
        let hi = pairs.iter().map(|p| p.0.max(p.1)).max().unwrap().min(dhi);
        let span = (lo.min(self.k0) - 1, hi.max(self.k0) + 1);
        let fw = fundamental(sys, self.w, self.k0, &self.alpha, span.0, span.1)?;
        let fb = fundamental(sys, self.w.conj(), self.k0, &self.alpha, span.0, span.1)?;
        let (cp0, cn0) = self.coefficients(0);
        let (cp1, cn1) = self.coefficients(1);
        let om = &self.omega[0];
        let above = &cp0 * om * cn1.adjoint();
        let below = &cn0 * om * cp1.adjoint();
        pairs
            .iter()
            .map(|&(k, l)| {
                if k == l {
                    return Err(Error::Input("alternative representation needs k != l".into()));
                }
                let (a, b) = if self.conjugated { (l, k) } else { (k, l) };
                let c = if a > b { &above } else { &below };
                let v = fw.plain(sys, a)? * c * fb.plain(sys, b)?.adjoint();
                Ok(if self.conjugated { v.adjoint() } else { v })
            })
            .collect()
    }

    /// Solve `S_ρ y = (zA + B) y + A f` with `f` given on the window (one entry per site).
    pub fn solve(&self, sys: &HamiltonianSystem, f: &[CMat]) -> Result<NonhomogeneousSolve> {
        solve_nonhomogeneous(sys, self, f)
    }

    /// Diagonal block `K(z,k,k)` from the Riccati variables `V±` next to the direct value.
    pub fn diagonal_riccati_blocks(&self, sys: &HamiltonianSystem, k: i64) -> Result<DiagonalBlocks> {
        let m = sys.m();
        let i = self.idx(k)?;
        let riccati = |r: &Role| -> Result<CMat> {
            let h = r.traj.hat(k)?;
            linalg::solve_right(&(sys.rho(k)? * bottom(h, m)), &top(h, m), "u_1 in V")
        };
        let vp = riccati(&self.p[0])?;
        let vm = riccati(&self.n[0])?;
        let g = linalg::inverse(&(&vp - &vm), "V_+ - V_-")?;
        let n_here = &self.n[0].plain[i];
        let nc = &self.n[1].plain[i];
        let pc = &self.p[1].plain[i];
        // ϑ₋ φ₋⁻¹ and (φ^⊛)⁻¹ ϑ^⊛
        let tm = linalg::solve_right(&bottom(n_here, m), &top(n_here, m), "u_-1")?;
        let nstar = linalg::solve(&top(nc, m).adjoint(), &bottom(nc, m).adjoint(), "u_-1 conj")?;
        let pstar = linalg::solve(&top(pc, m).adjoint(), &bottom(pc, m).adjoint(), "u_+1 conj")?;
        let mut via = blocks(&g, &(&g * &nstar), &(&tm * &g), &(&tm * &g * &pstar));
        let mut direct = self.eval_at(0, k, k)?;
        let (mut vp, mut vm) = (vp, vm);
        if self.conjugated {
            via = via.adjoint();
            direct = direct.adjoint();
            vp = vp.adjoint();
            vm = vm.adjoint();
        }
        let defect = linalg::norm2(&(&via - &direct)) / (1.0 + linalg::norm2(&direct));
        Ok(DiagonalBlocks {
            k,
            direct,
            via_riccati: via,
            v_plus: vp,
            v_minus: vm,
            defect,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub max_residual: f64,
    /// `(k, ℓ)` where the maximum occurs
    pub worst_site: (i64, i64),
    pub max_diagonal_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalBlocks {
    pub k: i64,
    pub direct: CMat,
    pub via_riccati: CMat,
    pub v_plus: CMat,
    pub v_minus: CMat,
    /// `‖via − direct‖ / (1 + ‖direct‖)`
    pub defect: f64,
}

/// Result of applying the kernel to a right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct NonhomogeneousSolve {
    /// first site of `y`
    pub lo: i64,
    /// plain values on the kernel domain
    pub y: Vec<CMat>,
    /// `(k, ‖residual‖)` at the window sites
    pub residuals: Vec<(i64, f64)>,
    /// largest residual, normalized by `1 + max‖f‖`
    pub max_residual: f64,
    /// `Σ y*Ay` over the kernel domain (trace)
    pub energy_y: f64,
    /// `Σ f*Af` over the window (trace)
    pub energy_f: f64,
    /// `energy_y − energy_f / (Im z)²`; nonpositive when the bound holds
    pub l2_excess: f64,
    /// `‖α̃ ŷ(k₀)‖` when `k₀` is inside the range of `ŷ`
    pub boundary_defect: Option<f64>,
    /// largest `Σ_ℓ tr K(k,ℓ)A(ℓ)K(k,ℓ)*` over the window
    pub kernel_energy_max: f64,
}

impl NonhomogeneousSolve {
    pub fn hi(&self) -> i64 {
        self.lo + self.y.len() as i64 - 1
    }

    pub fn at(&self, k: i64) -> Result<&CMat> {
        if k < self.lo || k > self.hi() {
            return Err(Error::Domain {
                k,
                lo: self.lo,
                hi: self.hi(),
            });
        }
        Ok(&self.y[(k - self.lo) as usize])
    }

    /// `ŷ(k) = (y₁(k), y₂(k+1))`.
    pub fn hat(&self, k: i64) -> Result<CMat> {
        let here = self.at(k)?;
        let next = self.at(k + 1)?;
        let m = here.nrows() / 2;
        Ok(vstack(&top(here, m), &bottom(next, m)))
    }
}

/// `y(k) = Σ_ℓ K(z,k,ℓ)A(ℓ)f(ℓ)` over the kernel window, with residual,
/// boundary-condition and `ℓ²_A` diagnostics.
pub fn solve_nonhomogeneous(sys: &HamiltonianSystem, kernel: &GreensKernel, f: &[CMat]) -> Result<NonhomogeneousSolve> {
    let (lo, hi) = kernel.window;
    let n = (hi - lo + 1) as usize;
    if f.len() != n {
        return Err(Error::Input(format!("f has {} sites, window has {n}", f.len())));
    }
    let m2 = 2 * sys.m();
    let r = f[0].ncols();
    if f.iter().any(|x| x.nrows() != m2 || x.ncols() != r) {
        return Err(Error::Input("f entries must all be 2m x r".into()));
    }
    let af: Vec<CMat> = (lo..=hi).zip(f).map(|(l, x)| Ok(sys.a(l)? * x)).collect::<Result<_>>()?;
    let (dlo, dhi) = kernel.domain();
    let mut y = Vec::with_capacity((dhi - dlo + 1) as usize);
    let mut kernel_energy_max = 0.0f64;
    for k in dlo..=dhi {
        let mut acc = CMat::zeros(m2, r);
        let mut ke = 0.0;
        for (j, l) in (lo..=hi).enumerate() {
            let kv = kernel.eval(k, l)?;
            if (lo..=hi).contains(&k) {
                ke += (&kv * sys.a(l)? * kv.adjoint()).trace().re;
            }
            acc += kv * &af[j];
        }
        kernel_energy_max = kernel_energy_max.max(ke);
        y.push(acc);
    }
    let z = kernel.z();
    let yat = |k: i64| -> Result<CMat> {
        if k < dlo || k > dhi {
            return Err(Error::Domain { k, lo: dlo, hi: dhi });
        }
        Ok(y[(k - dlo) as usize].clone())
    };
    let fscale = 1.0 + f.iter().map(linalg::norm2).fold(0.0, f64::max);
    let mut residuals = Vec::with_capacity(n);
    let mut max_residual = 0.0f64;
    for (j, k) in (lo..=hi).enumerate() {
        let res = apply_operator(sys, z, yat, k)? - &af[j];
        let v = linalg::norm2(&res);
        max_residual = max_residual.max(v / fscale);
        residuals.push((k, v));
    }
    let mut energy_y = 0.0;
    for k in dlo..=dhi {
        let v = &y[(k - dlo) as usize];
        energy_y += (v.adjoint() * sys.a(k)? * v).trace().re;
    }
    let energy_f: f64 = (lo..=hi).zip(&af).zip(f).map(|((_, a), x)| (x.adjoint() * a).trace().re).sum();
    let sol = NonhomogeneousSolve {
        lo: dlo,
        y,
        residuals,
        max_residual,
        energy_y,
        energy_f,
        l2_excess: energy_y - energy_f / (z.im * z.im),
        boundary_defect: None,
        kernel_energy_max,
    };
    let k0 = kernel.k0;
    let boundary_defect = if k0 >= dlo && k0 < dhi {
        let at = crate::system::weighted_boundary(&kernel.alpha, sys, k0)?;
        Some(linalg::norm2(&(at * sol.hat(k0)?)))
    } else {
        None
    };
    Ok(NonhomogeneousSolve { boundary_defect, ..sol })
}

/// `Û_±(z̄,k)* J_ρ(k) ŷ(k)` for the plus or minus role of the kernel.
pub fn boundary_flux(sys: &HamiltonianSystem, kernel: &GreensKernel, dir: Direction, y_hat: &CMat, k: i64) -> Result<CMat> {
    let u = kernel.role_hat(dir, true, k)?;
    Ok(u.adjoint() * sys.j_rho(k)? * y_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxTrend {
    pub sites: Vec<i64>,
    pub magnitudes: Vec<f64>,
    /// least-squares slope of `ln |flux|` against the outward distance
    pub log_slope: f64,
    /// magnitudes strictly decrease outward
    pub monotone: bool,
}

/// Flux of a solution over the outer third of the window on the `dir` side.
pub fn flux_trend(sys: &HamiltonianSystem, kernel: &GreensKernel, dir: Direction, sol: &NonhomogeneousSolve) -> Result<FluxTrend> {
    let (lo, hi) = kernel.window;
    let third = ((hi - lo + 1) / 3).max(2);
    let sites: Vec<i64> = match dir {
        Direction::Plus => ((hi - third + 1)..=hi).collect(),
        Direction::Minus => (lo..(lo + third)).rev().collect(),
    };
    let magnitudes: Vec<f64> = sites
        .iter()
        .map(|&k| Ok(linalg::fro(&boundary_flux(sys, kernel, dir, &sol.hat(k)?, k)?)))
        .collect::<Result<_>>()?;
    let n = sites.len() as f64;
    let xs: Vec<f64> = (0..sites.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = magnitudes.iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let monotone = magnitudes.windows(2).all(|w| w[1] < w[0]);
    Ok(FluxTrend {
        sites,
        magnitudes,
        log_slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::system::{free_jacobi, Extension};

    fn v_root(z: C64) -> C64 {
        let disc = (z * z - z * 4.0).sqrt();
        let a = (z + disc) / 2.0;
        if a.im < 0.0 {
            a
        } else {
            (z - disc) / 2.0
        }
    }

    fn free() -> HamiltonianSystem {
        free_jacobi(1, -400, 800, 1.0, 0.0, Extension::ConstantEdge).unwrap()
    }

    fn surrogate_whole(sys: &HamiltonianSystem, z: C64, window: (i64, i64)) -> GreensKernel {
        let a = BoundaryData::dirichlet(sys.m());
        let beta = BoundaryData::dirichlet(sys.m());
        GreensKernel::build(
            sys,
            z,
            0,
            &a,
            KernelVariant::Whole,
            Some(WeylSource::Surrogate { ell: 300, beta: beta.clone() }),
            Some(WeylSource::Surrogate { ell: -300, beta }),
            window,
        )
        .unwrap()
    }

    #[test]
    fn whole_kernel_identities() {
        let sys = free();
        for z in [c(0.5, 1.0), c(1.0, -0.7)] {
            let k = surrogate_whole(&sys, z, (-10, 10));
            let rep = k.delta_report(&sys).unwrap();
            assert!(rep.max_residual < 1e-9, "{rep:?}");
            assert!(k.coupling_defect(&sys).unwrap() < 1e-10);
            let inv = linalg::inverse(&k.omega(), "w").unwrap();
            let mm = k.m_minus().unwrap() - k.m_plus().unwrap();
            assert!(linalg::norm2(&(inv - mm)) < 1e-10);
            let pairs = [(3, -2), (-5, 4), (7, 0)];
            let alt = k.alternative_representation(&sys, &pairs).unwrap();
            for (p, v) in pairs.iter().zip(alt) {
                let d = k.eval(p.0, p.1).unwrap();
                assert!(linalg::norm2(&(v - &d)) < 1e-9 * (1.0 + linalg::norm2(&d)));
            }
            for (a, b) in [(2, 2), (3, -1), (-4, 5)] {
                assert!(k.symmetry_defect(a, b).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn free_whole_line_diagonal_oracle() {
        let sys = free();
        let z = c(0.0, 1.0);
        let k = surrogate_whole(&sys, z, (-5, 5));
        let d = k.diagonal_riccati_blocks(&sys, 0).unwrap();
        assert!(d.defect < 1e-9, "{}", d.defect);
        let v = v_root(z);
        assert!((d.v_plus[(0, 0)] - v).norm() < 1e-9);
        assert!((d.v_minus[(0, 0)] - (z - v)).norm() < 1e-9);
        let g = C64::new(1.0, 0.0) / (v * 2.0 - z);
        assert!((d.via_riccati[(0, 0)] - g).norm() < 1e-9);
    }

    #[test]
    fn half_plus_kernel() {
        let sys = free();
        let a = BoundaryData::dirichlet(1);
        let z = c(0.3, 0.8);
        let k = GreensKernel::build(
            &sys,
            z,
            0,
            &a,
            KernelVariant::HalfPlus,
            Some(WeylSource::Surrogate {
                ell: 300,
                beta: BoundaryData::neumann(1),
            }),
            None,
            (1, 30),
        )
        .unwrap();
        assert!(k.delta_report(&sys).unwrap().max_residual < 1e-9);
        for s in 1..=30 {
            assert!(linalg::norm2(&(k.coupling(&sys, s).unwrap() - linalg::eye(1))) < 1e-10);
        }
        let mut f = vec![CMat::zeros(2, 1); 30];
        f[4][(0, 0)] = c(1.0, 0.0);
        let sol = k.solve(&sys, &f).unwrap();
        assert!(sol.max_residual < 1e-9);
        assert!(sol.boundary_defect.unwrap() < 1e-10);
        let zero = k.solve(&sys, &vec![CMat::zeros(2, 1); 30]).unwrap();
        assert!(zero.y.iter().all(|v| linalg::norm2(v) == 0.0));
    }

    #[test]
    fn half_minus_kernel() {
        let sys = free();
        let a = BoundaryData::neumann(1);
        let z = c(-0.5, 0.6);
        let k = GreensKernel::build(
            &sys,
            z,
            0,
            &a,
            KernelVariant::HalfMinus,
            None,
            Some(WeylSource::Surrogate {
                ell: -300,
                beta: BoundaryData::dirichlet(1),
            }),
            (-30, -1),
        )
        .unwrap();
        assert!(k.delta_report(&sys).unwrap().max_residual < 1e-9);
        for s in -30..=-1 {
            assert!(linalg::norm2(&(k.coupling(&sys, s).unwrap() + linalg::eye(1))) < 1e-10);
        }
        let mut f = vec![CMat::zeros(2, 1); 30];
        f[20][(0, 0)] = c(0.0, 1.0);
        let sol = k.solve(&sys, &f).unwrap();
        assert!(sol.max_residual < 1e-9);
        assert!(sol.boundary_defect.unwrap() < 1e-10);
    }

    #[test]
    fn flux_of_weyl_solution_vanishes() {
        let sys = free();
        let z = c(0.0, 1.0);
        let k = surrogate_whole(&sys, z, (-20, 20));
        for s in -20..=20 {
            let u = k.role_solution_hat(Direction::Plus, s).unwrap();
            let fl = boundary_flux(&sys, &k, Direction::Plus, &u, s).unwrap();
            assert!(linalg::norm2(&fl) < 1e-10);
        }
    }
}
