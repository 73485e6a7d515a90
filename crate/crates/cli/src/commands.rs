use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use weylkit::green::{flux_trend, GreensKernel, KernelVariant, WeylSource};
use weylkit::linalg::{self, c};
use weylkit::propagate::fundamental;
use weylkit::system::{
    check_definiteness, check_wellposed, default_z_sample, read_coefficient_file, validate_pointwise,
    weighted_boundary,
};
use weylkit::testkit::{eig_via_det_phi, jacobi_bvp_oracle, EigOptions, RegularBVP};
use weylkit::weyl::{
    self, disk_diameter_estimate, disk_membership, e_functional, limit_m, locate_atoms, m_sweep, spectral_measure,
    DiskContext, Direction, LimitOptions, MeasureOptions,
};
use weylkit::{BoundaryData, CMat, HamiltonianSystem, Tolerances, C64};

use crate::output::{matrix_cells, matrix_columns, Cell, Table};
use crate::parse;
use crate::{CliError, Common, KernelArgs, Points};

pub struct Report {
    pub table: Table,
    /// set when the command ran but its verdict is negative
    pub failure: Option<String>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Report { table, failure: None }
    }
}

type Res<T> = Result<T, CliError>;

pub fn load(common: &Common) -> Res<HamiltonianSystem> {
    let path = common
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    Ok(read_coefficient_file(path)?)
}

fn columns(fixed: &[&str]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).collect()
}

fn boundaries(sys: &HamiltonianSystem, common: &Common) -> Res<(BoundaryData, BoundaryData)> {
    Ok((parse::boundary(&common.alpha, sys.m())?, parse::boundary(&common.beta, sys.m())?))
}

fn points(p: &Points, allow_real: bool) -> Res<Vec<C64>> {
    let mut out: Vec<C64> = p.z.iter().map(|s| parse::point(s)).collect::<Res<_>>()?;
    if let Some(g) = &p.z_grid {
        out.extend(parse::z_grid(g)?);
    }
    if !allow_real {
        if out.is_empty() {
            return Err(CliError::Usage("give --z or --z-grid".into()));
        }
        if let Some(z) = out.iter().find(|z| z.im == 0.0) {
            return Err(CliError::Usage(format!("Im z must be nonzero (got {z})")));
        }
    }
    Ok(out)
}

fn check_ell(k0: i64, ell: i64) -> Res<()> {
    if ell == k0 {
        return Err(CliError::Usage("ell must differ from k0".into()));
    }
    Ok(())
}

/// `σ·Im M ≻ 0`.
fn herglotz_ok(mv: &CMat, sigma: f64) -> bool {
    linalg::min_eig(&(linalg::im_part(mv) * c(sigma, 0.0))) > 0.0
}

pub fn validate(sys: &HamiltonianSystem, common: &Common, p: &Points, window: Option<&str>) -> Res<Report> {
    let (lo, hi) = match window {
        Some(w) => parse::window(w)?,
        None => (sys.k_min(), sys.k_max()),
    };
    let mut tol = Tolerances::default();
    if let Some(t) = common.tol {
        tol.sym = t;
    }
    let mut zs = points(p, true)?;
    if zs.is_empty() {
        zs = default_z_sample();
    }
    let mut table = Table::new("validate", columns(&["check", "z_re", "z_im", "k", "status", "value"]));
    let mut failures = 0usize;
    let pointwise = validate_pointwise(sys, lo, hi, &tol)?;
    for v in &pointwise.violations {
        failures += 1;
        table.push(vec![
            "pointwise".into(),
            Cell::Empty,
            Cell::Empty,
            v.k.into(),
            format!("{:?}", v.kind).into(),
            v.value.into(),
        ]);
    }
    let per_z: Vec<_> = zs
        .par_iter()
        .map(|&z| -> Res<_> { Ok((z, check_wellposed(sys, z, lo, hi, &tol)?, check_definiteness(sys, z, lo, hi, &tol)?)) })
        .collect::<Res<_>>()?;
    for (z, wp, def) in per_z {
        for v in &wp.violations {
            failures += 1;
            table.push(vec![
                "wellposed".into(),
                z.re.into(),
                z.im.into(),
                v.k.into(),
                format!("{:?}", v.kind).into(),
                v.value.into(),
            ]);
        }
        if !def.definite {
            failures += 1;
        }
        table.push(vec![
            "definiteness".into(),
            z.re.into(),
            z.im.into(),
            Cell::Empty,
            if def.definite { "definite" } else { "not_definite" }.into(),
            def.min_eigenvalue.into(),
        ]);
    }
    table.meta("window_lo", lo);
    table.meta("window_hi", hi);
    table.meta("violations", failures);
    let failure = (failures > 0).then(|| format!("{failures} violation(s)"));
    Ok(Report { table, failure })
}

/// Gershgorin bound for the dense Jacobi matrix on the interior sites.
fn jacobi_bounds(sys: &HamiltonianSystem, k0: i64, ell: i64) -> Res<(f64, f64)> {
    let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in (k0.min(ell) + 1)..k0.max(ell) {
        let d = sys.jacobi_b(k)?;
        let r = linalg::norm2(&sys.jacobi_a(k)?) + linalg::norm2(&sys.jacobi_a(k - 1)?);
        let ev = linalg::herm_eigenvalues(&linalg::herm(&d));
        a = a.min(ev[0] - r);
        b = b.max(ev[ev.len() - 1] + r);
    }
    if !(a < b) {
        return Err(CliError::Usage("no interior sites between k0 and ell".into()));
    }
    Ok((a - 1e-3, b + 1e-3))
}

pub fn eig(sys: &HamiltonianSystem, common: &Common, ell: i64, interval: Option<&str>, grid: usize) -> Res<Report> {
    let k0 = common.k0;
    check_ell(k0, ell)?;
    let (alpha, beta) = boundaries(sys, common)?;
    let range = match interval {
        Some(s) => parse::interval(s)?,
        None if sys.is_jacobi() => jacobi_bounds(sys, k0, ell)?,
        None => return Err(CliError::Usage("--interval is required for non-Jacobi systems".into())),
    };
    let mut opts = EigOptions {
        grid_n: grid,
        ..Default::default()
    };
    if let Some(t) = common.tol {
        opts.accept_tol = t;
    }
    let found = eig_via_det_phi(sys, k0, ell, &alpha, &beta, range, &opts)?;
    let oracle: Option<Vec<f64>> = if ell > k0 {
        RegularBVP::new(sys, k0, ell, &alpha, &beta)
            .ok()
            .map(|bvp| jacobi_bvp_oracle(&bvp).into_iter().filter(|v| *v >= range.0 && *v <= range.1).collect())
    } else {
        None
    };
    let mut table = Table::new("eig", columns(&["index", "lambda", "oracle", "abs_diff"]));
    for (i, lam) in found.iter().enumerate() {
        let o = oracle.as_ref().and_then(|o| o.get(i).copied());
        table.push(vec![i.into(), (*lam).into(), o.into(), o.map(|o| (o - lam).abs()).into()]);
    }
    table.meta("k0", k0);
    table.meta("ell", ell);
    table.meta("interval_lo", range.0);
    table.meta("interval_hi", range.1);
    table.meta("count", found.len());
    if let Some(o) = &oracle {
        table.meta("oracle_count", o.len());
    }
    Ok(table.into())
}

pub fn mfun(sys: &HamiltonianSystem, common: &Common, p: &Points, ell: i64) -> Res<Report> {
    let k0 = common.k0;
    check_ell(k0, ell)?;
    let (alpha, beta) = boundaries(sys, common)?;
    let zs = points(p, false)?;
    let m = sys.m();
    let bw = weighted_boundary(&beta, sys, ell)?;
    let rows: Vec<Vec<Cell>> = zs
        .par_iter()
        .enumerate()
        .map(|(i, &z)| -> Res<Vec<Cell>> {
            let mv = m_sweep(sys, z, k0, ell, &alpha, &beta)?;
            let fund = fundamental(sys, z, k0, &alpha, k0.min(ell), k0.max(ell))?;
            let smin = *linalg::singular_values(&(&bw * fund.phi_hat(ell)?)).last().unwrap();
            let ok = herglotz_ok(&mv, weyl::sigma(ell, k0, z));
            let mut row = vec![i.into(), z.re.into(), z.im.into()];
            row.extend(matrix_cells(&mv));
            row.push(smin.into());
            row.push(ok.into());
            Ok(row)
        })
        .collect::<Res<_>>()?;
    let mut cols = columns(&["index", "z_re", "z_im"]);
    cols.extend(matrix_columns("m", m, m));
    cols.push("sigma_min".into());
    cols.push("herglotz_ok".into());
    let mut table = Table::new("mfun", cols);
    table.meta("k0", k0);
    table.meta("ell", ell);
    let bad = rows.iter().filter(|r| r.last() == Some(&Cell::Flag(false))).count();
    table.meta("herglotz_violations", bad);
    for r in rows {
        table.push(r);
    }
    Ok(table.into())
}

#[allow(clippy::too_many_arguments)]
pub fn disk(
    sys: &HamiltonianSystem,
    common: &Common,
    p: &Points,
    ell: Option<&str>,
    ell_max: Option<i64>,
    ell_step: i64,
    samples: usize,
    m_test: Option<&str>,
) -> Res<Report> {
    let k0 = common.k0;
    let (alpha, beta) = boundaries(sys, common)?;
    let zs = points(p, false)?;
    let m = sys.m();
    let ells: Vec<i64> = match (ell, ell_max) {
        (Some(s), _) => parse::ints(s)?,
        (None, Some(mx)) if ell_step > 0 && mx != 0 => {
            let dir = mx.signum();
            (1..=mx.abs() / ell_step).map(|n| k0 + dir * n * ell_step).collect()
        }
        _ => return Err(CliError::Usage("give --ell or --ell-max with a positive --ell-step".into())),
    };
    for &l in &ells {
        check_ell(k0, l)?;
    }
    let test = m_test.map(|s| parse::matrix(s, m, m)).transpose()?;
    let tol = common.tol.unwrap_or(1e-9);
    let jobs: Vec<(C64, i64)> = zs.iter().flat_map(|&z| ells.iter().map(move |&l| (z, l))).collect();
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(z, l)| -> Res<Vec<Cell>> {
            let ctx = DiskContext::new(sys, z, k0, l, &alpha)?;
            let diameter = disk_diameter_estimate(sys, &ctx, samples)?;
            let mv = match &test {
                Some(t) => t.clone(),
                None => m_sweep(sys, z, k0, l, &alpha, &beta)?,
            };
            let e = e_functional(sys, &ctx, &mv)?;
            let scale = 1.0 + linalg::norm2(&mv).powi(2);
            let verdict = disk_membership(&e, tol * scale);
            let ev = linalg::herm_eigenvalues(&linalg::herm(&e));
            let mut row = vec![z.re.into(), z.im.into(), l.into(), diameter.into(), ev[0].into(), ev[ev.len() - 1].into()];
            row.push(verdict.to_string().into());
            row.extend(matrix_cells(&mv));
            Ok(row)
        })
        .collect::<Res<_>>()?;
    let mut cols = columns(&["z_re", "z_im", "ell", "diameter", "e_min", "e_max", "verdict"]);
    cols.extend(matrix_columns("m", m, m));
    let mut table = Table::new("disk", cols);
    table.meta("k0", k0);
    table.meta("samples", samples);
    table.meta("tested", if test.is_some() { "m_test" } else { "circle_point" });
    for r in rows {
        table.push(r);
    }
    Ok(table.into())
}

pub fn limit(
    sys: &HamiltonianSystem,
    common: &Common,
    p: &Points,
    ell_max: i64,
    ell_step: i64,
    direction: &str,
) -> Res<Report> {
    let k0 = common.k0;
    let (alpha, beta) = boundaries(sys, common)?;
    let zs = points(p, false)?;
    let dirs: Vec<Direction> = match direction {
        "plus" => vec![Direction::Plus],
        "minus" => vec![Direction::Minus],
        "both" => vec![Direction::Plus, Direction::Minus],
        other => return Err(CliError::Usage(format!("unknown direction '{other}'"))),
    };
    let mut opts = LimitOptions {
        beta: Some(beta),
        ell_max,
        ell_step,
        ..Default::default()
    };
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    let m = sys.m();
    let jobs: Vec<(C64, Direction)> = zs.iter().flat_map(|&z| dirs.iter().map(move |&d| (z, d))).collect();
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(z, d)| -> Res<Vec<Cell>> {
            let lim = limit_m(sys, z, k0, &alpha, d, &opts)?;
            let last = lim.ell_sequence.last().copied();
            let mut row = vec![
                z.re.into(),
                z.im.into(),
                d.to_string().into(),
                lim.classification.to_string().into(),
                lim.converged.into(),
                lim.projected.into(),
                last.map_or(Cell::Empty, Cell::Int),
                lim.cauchy_gap.into(),
                lim.diameter_estimate.into(),
            ];
            row.extend(matrix_cells(&lim.m_pm));
            Ok(row)
        })
        .collect::<Res<_>>()?;
    let mut cols = columns(&[
        "z_re",
        "z_im",
        "direction",
        "classification",
        "converged",
        "projected",
        "last_ell",
        "cauchy_gap",
        "diameter",
    ]);
    cols.extend(matrix_columns("m", m, m));
    let mut table = Table::new("limit", cols);
    table.meta("k0", k0);
    table.meta("ell_max", ell_max);
    table.meta("ell_step", ell_step);
    for r in rows {
        table.push(r);
    }
    Ok(table.into())
}

fn build_kernel(sys: &HamiltonianSystem, common: &Common, args: &KernelArgs) -> Res<(GreensKernel, C64)> {
    let k0 = common.k0;
    let z = parse::point(&args.z)?;
    if z.im == 0.0 {
        return Err(CliError::Usage("Im z must be nonzero".into()));
    }
    if args.ell <= 0 {
        return Err(CliError::Usage("--ell must be positive".into()));
    }
    let variant: KernelVariant = args.variant.parse()?;
    let window = parse::window(&args.window)?;
    let (alpha, beta) = boundaries(sys, common)?;
    let plus = WeylSource::Surrogate {
        ell: k0 + args.ell,
        beta: beta.clone(),
    };
    let minus = WeylSource::Surrogate { ell: k0 - args.ell, beta };
    let (plus, minus) = match variant {
        KernelVariant::Whole => (Some(plus), Some(minus)),
        KernelVariant::HalfPlus => (Some(plus), None),
        KernelVariant::HalfMinus => (None, Some(minus)),
    };
    Ok((GreensKernel::build(sys, z, k0, &alpha, variant, plus, minus, window)?, z))
}

pub fn green(sys: &HamiltonianSystem, common: &Common, args: &KernelArgs, pairs: Option<&str>) -> Res<Report> {
    let (kernel, z) = build_kernel(sys, common, args)?;
    let (lo, hi) = kernel.window();
    let pairs = match pairs {
        Some(s) => parse::pairs(s)?,
        None => (lo..=hi).flat_map(|k| (lo..=hi).map(move |l| (k, l))).collect(),
    };
    let cert = kernel.delta_report(sys)?;
    let m2 = 2 * sys.m();
    let rows: Vec<Vec<Cell>> = pairs
        .par_iter()
        .map(|&(k, l)| -> Res<Vec<Cell>> {
            let mut row = vec![k.into(), l.into()];
            row.extend(matrix_cells(&kernel.eval(k, l)?));
            Ok(row)
        })
        .collect::<Res<_>>()?;
    let mut cols = columns(&["k", "l"]);
    cols.extend(matrix_columns("k", m2, m2));
    let mut table = Table::new("green", cols);
    table.meta("variant", kernel.variant().to_string());
    table.meta("z_re", z.re);
    table.meta("z_im", z.im);
    table.meta("k0", kernel.k0());
    table.meta("max_delta_residual", cert.max_residual);
    table.meta("worst_k", cert.worst_site.0);
    table.meta("worst_l", cert.worst_site.1);
    table.meta("max_diagonal_residual", cert.max_diagonal_residual);
    for r in rows {
        table.push(r);
    }
    Ok(table.into())
}

pub fn solve(sys: &HamiltonianSystem, common: &Common, args: &KernelArgs, rhs: &str) -> Res<Report> {
    let (kernel, _) = build_kernel(sys, common, args)?;
    let (lo, hi) = kernel.window();
    let m2 = 2 * sys.m();
    let n = (hi - lo + 1) as usize;
    let f: Vec<CMat> = if rhs == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
        (0..n)
            .map(|_| {
                CMat::from_fn(m2, 1, |_, _| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    c(a, b)
                })
            })
            .collect()
    } else if let Some(site) = rhs.strip_prefix("delta:") {
        let site = parse::int(site)?;
        if site < lo || site > hi {
            return Err(CliError::Usage(format!("delta site {site} is outside the window")));
        }
        (lo..=hi)
            .map(|k| {
                let mut v = CMat::zeros(m2, 1);
                if k == site {
                    v.fill(c(1.0, 0.0));
                }
                v
            })
            .collect()
    } else {
        return Err(CliError::Usage(format!("unknown right-hand side '{rhs}'")));
    };
    let sol = kernel.solve(sys, &f)?;
    let mut cols = columns(&["k"]);
    cols.extend(matrix_columns("y", m2, 1));
    cols.push("residual".into());
    let mut table = Table::new("solve", cols);
    for (i, y) in sol.y.iter().enumerate() {
        let k = sol.lo + i as i64;
        let res = sol.residuals.iter().find(|r| r.0 == k).map(|r| r.1);
        let mut row = vec![k.into()];
        row.extend(matrix_cells(y));
        row.push(res.into());
        table.push(row);
    }
    table.meta("variant", kernel.variant().to_string());
    table.meta("rhs", rhs);
    table.meta("max_residual", sol.max_residual);
    table.meta("l2_excess", sol.l2_excess);
    table.meta("boundary_defect", sol.boundary_defect);
    let sides: &[Direction] = match kernel.variant() {
        KernelVariant::Whole => &[Direction::Plus, Direction::Minus],
        KernelVariant::HalfPlus => &[Direction::Plus],
        KernelVariant::HalfMinus => &[Direction::Minus],
    };
    for &d in sides {
        let t = flux_trend(sys, &kernel, d, &sol)?;
        table.meta(&format!("flux_log_slope_{d}"), t.log_slope);
        table.meta(&format!("flux_monotone_{d}"), t.monotone);
    }
    Ok(table.into())
}

#[allow(clippy::too_many_arguments)]
pub fn measure(
    sys: &HamiltonianSystem,
    common: &Common,
    ell: i64,
    interval: &str,
    bins: usize,
    eps_schedule: &str,
    height: f64,
    atoms: Option<f64>,
) -> Res<Report> {
    let k0 = common.k0;
    check_ell(k0, ell)?;
    let (alpha, beta) = boundaries(sys, common)?;
    let (a, b) = parse::interval(interval)?;
    let sigma = weyl::sigma(ell, k0, c(0.0, 1.0));
    let mut opts = MeasureOptions {
        grid_n: bins,
        eps_schedule: parse::floats(eps_schedule)?,
        sigma,
        height,
        ..Default::default()
    };
    if let Some(t) = common.tol {
        opts.measure_tol = t;
    }
    let eval = |z: C64| m_sweep(sys, z, k0, ell, &alpha, &beta);
    let meas = spectral_measure(eval, a, b, &opts)?;
    let m = sys.m();
    let mut cols = columns(&["bin", "lo", "hi", "trace"]);
    cols.extend(matrix_columns("omega", m, m));
    let mut table = Table::new("measure", cols);
    for (i, inc) in meas.increments.iter().enumerate() {
        let (x0, x1) = meas.bin(i);
        let mut row = vec![i.into(), x0.into(), x1.into(), inc.trace().re.into()];
        row.extend(matrix_cells(inc));
        table.push(row);
    }
    table.meta("k0", k0);
    table.meta("ell", ell);
    table.meta("sigma", sigma);
    table.meta("richardson_defect", meas.richardson_defect);
    table.meta("converged", meas.converged);
    table.meta("clipped", meas.clipped);
    table.meta("total_trace", meas.total().trace().re);
    if let Some(w) = atoms {
        let found = locate_atoms(eval, &meas, sigma, w, 1e-9 * (b - a))?;
        let list: Vec<String> = found.iter().map(|a| format!("{:.16e}:{:.16e}", a.location, a.weight)).collect();
        table.meta("atoms", list.join(" "));
    }
    Ok(table.into())
}

pub fn trajectory(sys: &HamiltonianSystem, common: &Common, z: &str, window: &str) -> Res<Report> {
    let k0 = common.k0;
    let z = parse::point(z)?;
    let (lo, hi) = parse::window(window)?;
    let alpha = parse::boundary(&common.alpha, sys.m())?;
    let fund = fundamental(sys, z, k0, &alpha, lo.min(k0), hi.max(k0))?;
    let m2 = 2 * sys.m();
    let mut cols = columns(&["k"]);
    cols.extend(matrix_columns("psi", m2, m2));
    let mut table = Table::new("trajectory", cols);
    for k in lo..=hi {
        let mut row = vec![k.into()];
        row.extend(matrix_cells(fund.hat(k)?));
        table.push(row);
    }
    table.meta("k0", k0);
    table.meta("z_re", z.re);
    table.meta("z_im", z.im);
    table.meta("scale_warning", fund.scale_warning());
    Ok(table.into())
}
