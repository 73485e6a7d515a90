use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

// 8-point Gauss-Legendre rule on [-1, 1]
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> Result<CMat>) -> Result<CMat> {
    let h = (b - a) / panels as f64;
    let mut acc: Option<CMat> = None;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            for s in [-1.0, 1.0] {
                let v = f(mid + s * x * h / 2.0)? * C64::from(w * h / 2.0);
                acc = Some(match acc {
                    Some(t) => t + v,
                    None => v,
                });
            }
        }
    }
    acc.ok_or_else(|| Error::Input("empty quadrature".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureOptions {
    pub grid_n: usize,
    /// decreasing positive distances from the real axis
    pub eps_schedule: Vec<f64>,
    /// sign applied to M before taking imaginary parts
    pub sigma: f64,
    /// height of the upper edge of the integration contour
    pub height: f64,
    /// quadrature panels per unit of `ln y` on the vertical legs
    pub panels_per_decade: usize,
    /// allowed difference between extrapolated and raw increments
    pub measure_tol: f64,
    pub fit_linear: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            grid_n: 200,
            eps_schedule: vec![1e-4, 1e-5, 1e-6],
            sigma: 1.0,
            height: 1.0,
            panels_per_decade: 6,
            measure_tol: 1e-6,
            fit_linear: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    /// bin edges; bin i is `(grid[i] + delta, grid[i+1] + delta]`
    pub grid: Vec<f64>,
    pub delta: f64,
    pub increments: Vec<CMat>,
    pub epsilon_schedule: Vec<f64>,
    pub affine_part: CMat,
    pub linear_part: Option<CMat>,
    /// largest trace difference between extrapolated and smallest-ε increments
    pub richardson_defect: f64,
    pub converged: bool,
    /// total size of negative eigenvalues removed from the increments
    pub clipped: f64,
}

impl SpectralMeasure {
    pub fn total(&self) -> CMat {
        let m = self.affine_part.nrows();
        self.increments.iter().fold(CMat::zeros(m, m), |a, b| a + b)
    }

    pub fn bin(&self, i: usize) -> (f64, f64) {
        (self.grid[i] + self.delta, self.grid[i + 1] + self.delta)
    }

    /// Trace of the increments over bins lying entirely inside `[a, b]`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        (0..self.increments.len())
            .filter(|&i| {
                let (x0, x1) = self.bin(i);
                x0 >= a && x1 <= b
            })
            .map(|i| self.increments[i].trace().re)
            .sum()
    }
}

/// `∫ F(x+iy) i dy` from `y = eps[j]` to `height`, for every ε in the schedule.
fn vertical_legs(
    eval: &impl Fn(C64) -> Result<CMat>,
    sigma: f64,
    x: f64,
    eps: &[f64],
    height: f64,
    per_unit: usize,
) -> Result<Vec<CMat>> {
    let mut cuts: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    cuts.insert(0, height.ln());
    let mut out = Vec::with_capacity(eps.len());
    let mut acc: Option<CMat> = None;
    for w in cuts.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        let panels = ((hi - lo) * per_unit as f64).ceil().max(1.0) as usize;
        let piece = gauss_legendre(lo, hi, panels, |t| {
            let y = t.exp();
            Ok(eval(C64::new(x, y))? * C64::new(0.0, sigma * y))
        })?;
        let total = match acc {
            Some(a) => a + piece,
            None => piece,
        };
        out.push(total.clone());
        acc = Some(total);
    }
    Ok(out)
}

fn psd_clip(x: &CMat) -> (CMat, f64) {
    let (vals, vecs) = linalg::herm_eigh_desc(&linalg::herm(x));
    let neg: f64 = vals.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    (&vecs * linalg::from_real_diag(&clipped) * vecs.adjoint(), neg)
}

/// Stieltjes inversion of a Herglotz function on `[a, b]`.
///
/// Each bin integral along `Im z = ε` is replaced by the equivalent contour
/// through `Im z = height`, which is exact for analytic `M`; the increments at
/// the two smallest ε are combined by linear extrapolation in ε.
pub fn spectral_measure(
    eval: impl Fn(C64) -> Result<CMat>,
    a: f64,
    b: f64,
    opts: &MeasureOptions,
) -> Result<SpectralMeasure> {
    if !(b > a) || opts.grid_n == 0 {
        return Err(Error::Input("spectral_measure needs a < b and grid_n > 0".into()));
    }
    let eps = &opts.eps_schedule;
    if eps.is_empty() || eps.iter().any(|e| *e <= 0.0) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input("eps schedule must be positive and decreasing".into()));
    }
    if opts.height <= eps[0] {
        return Err(Error::Input("contour height must exceed the largest eps".into()));
    }
    let n = opts.grid_n;
    let delta = eps[eps.len() - 1] / 2.0;
    let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let per_unit = opts.panels_per_decade.max(1);
    let legs: Vec<Vec<CMat>> = grid
        .iter()
        .map(|&x| vertical_legs(&eval, opts.sigma, x + delta, eps, opts.height, per_unit))
        .collect::<Result<_>>()?;
    let h = opts.height;
    let mut increments = Vec::with_capacity(n);
    let mut defect = 0.0f64;
    let mut clipped = 0.0;
    let last = eps.len() - 1;
    for i in 0..n {
        let (x0, x1) = (grid[i] + delta, grid[i + 1] + delta);
        let panels = ((x1 - x0) / (0.5 * h)).ceil().max(1.0) as usize;
        let top = gauss_legendre(x0, x1, panels, |x| Ok(eval(C64::new(x, h))? * C64::from(opts.sigma)))?;
        let bottom = |j: usize| &legs[i][j] - &legs[i + 1][j] + &top;
        let raw = linalg::im_part(&bottom(last)) * C64::from(1.0 / std::f64::consts::PI);
        let est = if last >= 1 {
            let (e1, e2) = (eps[last - 1], eps[last]);
            let i1 = bottom(last - 1);
            let i2 = bottom(last);
            linalg::im_part(&((i2 * C64::from(e1) - i1 * C64::from(e2)) / C64::from(e1 - e2))) * C64::from(1.0 / std::f64::consts::PI)
        } else {
            raw.clone()
        };
        defect = defect.max((est.trace() - raw.trace()).norm());
        let (inc, neg) = psd_clip(&est);
        clipped += neg;
        increments.push(inc);
    }
    let affine_part = fit_affine_part(&eval, opts.sigma)?;
    let linear_part = if opts.fit_linear {
        Some(fit_linear_part(&eval, opts.sigma, 1e4)?)
    } else {
        None
    };
    Ok(SpectralMeasure {
        grid,
        delta,
        increments,
        epsilon_schedule: eps.clone(),
        affine_part,
        linear_part,
        richardson_defect: defect,
        converged: defect <= opts.measure_tol,
        clipped,
    })
}

/// `C₁ = Re(σM(i))` in the Herglotz representation.
pub fn fit_affine_part(eval: impl Fn(C64) -> Result<CMat>, sigma: f64) -> Result<CMat> {
    Ok(linalg::re_part(&(eval(C64::new(0.0, 1.0))? * C64::from(sigma))))
}

/// `C₂ = lim Im(σM(iy))/y`, extrapolated in `1/y²` from `y` and `2y`.
pub fn fit_linear_part(eval: impl Fn(C64) -> Result<CMat>, sigma: f64, y: f64) -> Result<CMat> {
    let f = |t: f64| -> Result<CMat> { Ok(linalg::im_part(&(eval(C64::new(0.0, t))? * C64::from(sigma / t)))) };
    let est = (f(2.0 * y)? * C64::from(4.0) - f(y)?) / C64::from(3.0);
    Ok(psd_clip(&est).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub location: f64,
    /// trace of the point mass
    pub weight: f64,
    /// width of the final bracketing interval
    pub width: f64,
}

fn bin_mass(eval: &impl Fn(C64) -> Result<CMat>, sigma: f64, x0: f64, x1: f64) -> Result<[f64; 2]> {
    let w = x1 - x0;
    let opts = MeasureOptions {
        grid_n: 2,
        eps_schedule: vec![1e-2 * w, 1e-3 * w],
        sigma,
        height: w.max(1e-3),
        panels_per_decade: 4,
        ..Default::default()
    };
    let meas = spectral_measure(eval, x0, x1, &opts)?;
    Ok([meas.increments[0].trace().re, meas.increments[1].trace().re])
}

/// Bisect every bin of `measure` carrying at least `min_weight` down to
/// `resolution`, returning the point masses found.
pub fn locate_atoms(
    eval: impl Fn(C64) -> Result<CMat>,
    measure: &SpectralMeasure,
    sigma: f64,
    min_weight: f64,
    resolution: f64,
) -> Result<Vec<Atom>> {
    const MAX_BRANCHES: usize = 64;
    let mut atoms: Vec<Atom> = Vec::new();
    for (i, inc) in measure.increments.iter().enumerate() {
        let mass = inc.trace().re;
        if mass < min_weight {
            continue;
        }
        let (x0, x1) = measure.bin(i);
        // widen slightly so atoms on an edge stay inside the bracket
        let pad = 0.05 * (x1 - x0);
        let mut active = vec![(x0 - pad, x1 + pad)];
        while active.iter().any(|(a, b)| b - a > resolution) {
            let mut next = Vec::new();
            for (a, b) in active {
                if b - a <= resolution {
                    next.push((a, b));
                    continue;
                }
                let mid = 0.5 * (a + b);
                let [ml, mr] = bin_mass(&eval, sigma, a, b)?;
                if ml >= 0.5 * min_weight {
                    next.push((a, mid));
                }
                if mr >= 0.5 * min_weight {
                    next.push((mid, b));
                }
            }
            if next.len() > MAX_BRANCHES {
                return Err(Error::NoConvergence {
                    what: "atom bisection (measure looks diffuse)".into(),
                    iterations: MAX_BRANCHES,
                    residual: mass,
                });
            }
            active = next;
        }
        for (a, b) in active {
            let loc = 0.5 * (a + b);
            if atoms.iter().any(|at| (at.location - loc).abs() < 4.0 * resolution) {
                continue;
            }
            // weight from a symmetric window around the bracket
            let r = (x1 - x0).max(16.0 * resolution);
            let [wl, wr] = bin_mass(&eval, sigma, loc - r / 4.0, loc + r / 4.0)?;
            atoms.push(Atom {
                location: loc,
                weight: wl + wr,
                width: b - a,
            });
        }
    }
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    Ok(atoms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiPoint {
    pub lambda: f64,
    pub xi: Option<CMat>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// eigenvalues outside `[−tol, 1 + tol]`, or M singular
    pub flagged: bool,
}

/// `Ξ(λ) = π⁻¹ Im log(sign·M(λ + iε))` on a grid of real points.
pub fn xi_function(
    eval: impl Fn(C64) -> Result<CMat>,
    lambdas: &[f64],
    eps: f64,
    sign: f64,
    tol: f64,
) -> Vec<XiPoint> {
    lambdas
        .iter()
        .map(|&lambda| {
            let val = eval(C64::new(lambda, eps)).and_then(|mv| {
                let x = mv * C64::from(sign);
                if linalg::rcond(&x) < linalg::RCOND_MIN {
                    return Err(Error::Singular {
                        context: "xi_function".into(),
                        rcond: linalg::rcond(&x),
                    });
                }
                linalg::logm(&x)
            });
            match val {
                Ok(l) => {
                    let xi = linalg::im_part(&l) * C64::from(1.0 / std::f64::consts::PI);
                    let lo = linalg::min_eig(&xi);
                    let hi = linalg::max_eig(&xi);
                    XiPoint {
                        lambda,
                        xi: Some(xi),
                        min_eigenvalue: lo,
                        max_eigenvalue: hi,
                        flagged: lo < -tol || hi > 1.0 + tol,
                    }
                }
                Err(_) => XiPoint {
                    lambda,
                    xi: None,
                    min_eigenvalue: f64::NAN,
                    max_eigenvalue: f64::NAN,
                    flagged: true,
                },
            }
        })
        .collect()
}
