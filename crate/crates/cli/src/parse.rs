use serde_json::Value;
use weylkit::linalg::c;
use weylkit::system::make_boundary_data;
use weylkit::{BoundaryData, CMat, C64};

use crate::CliError;

/// `RE,IM`.
pub fn point(s: &str) -> Result<C64, CliError> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("expected RE,IM for a spectral point, got '{s}'")))?;
    Ok(c(float(re)?, float(im)?))
}

pub fn float(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("'{s}' is not a number")))
}

pub fn int(s: &str) -> Result<i64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("'{s}' is not an integer")))
}

/// `A,B` with `A < B`.
pub fn interval(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("expected A,B for an interval, got '{s}'")))?;
    let (a, b) = (float(a)?, float(b)?);
    if !(a < b) {
        return Err(CliError::Usage(format!("interval '{s}' is empty")));
    }
    Ok((a, b))
}

/// `LO,HI` site window.
pub fn window(s: &str) -> Result<(i64, i64), CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("expected LO,HI for a window, got '{s}'")))?;
    let (a, b) = (int(a)?, int(b)?);
    if a > b {
        return Err(CliError::Usage(format!("window '{s}' is empty")));
    }
    Ok((a, b))
}

fn axis(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("expected START:END:N in the z grid, got '{s}'")));
    }
    let (a, b) = (float(parts[0])?, float(parts[1])?);
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("'{}' is not a point count", parts[2])))?;
    if n == 0 {
        return Err(CliError::Usage("a grid axis needs at least one point".into()));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// `RE0:RE1:NRE,IM0:IM1:NIM`, endpoints included; ordered with the real part
/// varying fastest.
pub fn z_grid(s: &str) -> Result<Vec<C64>, CliError> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("expected RE-axis,IM-axis for the z grid, got '{s}'")))?;
    let (xs, ys) = (axis(re)?, axis(im)?);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| c(x, y))).collect())
}

fn entry(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => Some(c(n.as_f64()?, 0.0)),
        Value::Array(a) if a.len() == 2 => Some(c(a[0].as_f64()?, a[1].as_f64()?)),
        Value::Object(o) => {
            let re = o.get("re").map_or(Some(0.0), Value::as_f64)?;
            let im = o.get("im").map_or(Some(0.0), Value::as_f64)?;
            Some(c(re, im))
        }
        _ => None,
    }
}

/// Inline JSON matrix; entries are numbers, `[re, im]` pairs or
/// `{"re":..,"im":..}` objects.
pub fn matrix(s: &str, r: usize, cols: usize) -> Result<CMat, CliError> {
    let bad = |why: &str| CliError::Usage(format!("matrix '{s}': {why}"));
    let rows: Vec<Vec<Value>> = serde_json::from_str(s).map_err(|e| bad(&e.to_string()))?;
    if rows.len() != r || rows.iter().any(|row| row.len() != cols) {
        return Err(bad(&format!("expected {r}x{cols}")));
    }
    let mut out = CMat::zeros(r, cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = entry(v).ok_or_else(|| bad("entries must be numbers, [re, im] or {re, im}"))?;
        }
    }
    Ok(out)
}

/// Boundary data: `dirichlet`, `neumann`, or an inline m×2m [`matrix`].
pub fn boundary(s: &str, m: usize) -> Result<BoundaryData, CliError> {
    match s.trim() {
        "dirichlet" => return Ok(BoundaryData::dirichlet(m)),
        "neumann" => return Ok(BoundaryData::neumann(m)),
        _ => {}
    }
    let raw = matrix(s, m, 2 * m)?;
    make_boundary_data(&raw).map_err(|e| CliError::Usage(format!("boundary data '{s}': {e}")))
}

/// Comma-separated list of `K:L` site pairs.
pub fn pairs(s: &str) -> Result<Vec<(i64, i64)>, CliError> {
    s.split(';')
        .flat_map(|p| p.split(','))
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, l) = p
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("expected K:L in the pair list, got '{p}'")))?;
            Ok((int(k)?, int(l)?))
        })
        .collect()
}

pub fn floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(float).collect()
}

pub fn ints(s: &str) -> Result<Vec<i64>, CliError> {
    s.split(',').map(int).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_endpoints() {
        let g = z_grid("-1:5:3,0.1:1:2").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], c(-1.0, 0.1));
        assert_eq!(g[1], c(2.0, 0.1));
        assert_eq!(g[5], c(5.0, 1.0));
    }

    #[test]
    fn inline_boundary() {
        let b = boundary("[[0, [1, 0]]]", 1).unwrap();
        assert_eq!(b.gamma2()[(0, 0)].norm(), 1.0);
        assert!(boundary("[[1, 0, 0]]", 1).is_err());
        assert!(boundary("nope", 1).is_err());
    }

    #[test]
    fn pair_lists() {
        assert_eq!(pairs("1:2,-3:4").unwrap(), vec![(1, 2), (-3, 4)]);
        assert!(pairs("1-2").is_err());
    }
}
