//! JSON coefficient files.
//!
//! ```json
//! {
//!   "m": 1, "k_min": 0, "extension": "constant-edge",
//!   "A":   [[1, 0, 0, 0], ...],
//!   "B":   [[{"re": 0, "im": 0}, 1, 1, 1], ...],
//!   "rho": [[1], ...]
//! }
//! ```
//!
//! Each site is a flat row-major array; entries are `{"re", "im"}` objects or
//! bare real numbers. `rho` defaults to the identity. Instead of `A`/`B` a file
//! may give `"jacobi": {"p": [...], "q": [...]}` or `"dirac": {"b": [...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

use super::{dirac_system, jacobi_system, Extension, HamiltonianSystem};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> C64 {
        match e {
            Entry::Real(x) => c(x, 0.0),
            Entry::Complex { re, im } => c(re, im),
        }
    }
}

type Sites = Vec<Vec<Entry>>;

#[derive(Debug, Deserialize)]
struct JacobiBlock {
    p: Sites,
    q: Sites,
}

#[derive(Debug, Deserialize)]
struct DiracBlock {
    b: Sites,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientFile {
    m: usize,
    k_min: i64,
    #[serde(default)]
    extension: Option<String>,
    #[serde(default, alias = "a")]
    #[serde(rename = "A")]
    a: Option<Sites>,
    #[serde(default, alias = "b")]
    #[serde(rename = "B")]
    b: Option<Sites>,
    #[serde(default)]
    rho: Option<Sites>,
    #[serde(default)]
    jacobi: Option<JacobiBlock>,
    #[serde(default)]
    dirac: Option<DiracBlock>,
}

#[derive(Debug, Serialize)]
struct CoefficientFileOut {
    m: usize,
    k_min: i64,
    extension: String,
    #[serde(rename = "A")]
    a: Sites,
    #[serde(rename = "B")]
    b: Sites,
    rho: Sites,
}

fn matrices(name: &str, sites: &Sites, n: usize) -> Result<Vec<CMat>> {
    sites
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let data: Vec<C64> = s.iter().map(|&e| e.into()).collect();
            linalg::from_row_major(n, n, &data).map_err(|_| {
                Error::Input(format!(
                    "{name}: site index {i} has {} entries, expected {}",
                    s.len(),
                    n * n
                ))
            })
        })
        .collect()
}

fn flatten(x: &CMat) -> Vec<Entry> {
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            out.push(Entry::Complex { re: v.re, im: v.im });
        }
    }
    out
}

/// Parse a coefficient document.
pub fn parse_coefficient_file(text: &str) -> Result<HamiltonianSystem> {
    let f: CoefficientFile =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("coefficient file: {e}")))?;
    let extension: Extension = match &f.extension {
        Some(s) => s.parse()?,
        None => Extension::ConstantEdge,
    };
    let m = f.m;
    if m == 0 {
        return Err(Error::Input("m must be positive".into()));
    }
    let given = [f.a.is_some() || f.b.is_some(), f.jacobi.is_some(), f.dirac.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Error::Input(
            "give exactly one of A/B arrays, a jacobi block or a dirac block".into(),
        ));
    }
    if let Some(j) = &f.jacobi {
        if f.rho.is_some() {
            return Err(Error::Input("jacobi systems have rho = I; drop the rho field".into()));
        }
        return jacobi_system(f.k_min, matrices("p", &j.p, m)?, matrices("q", &j.q, m)?, extension);
    }
    if let Some(d) = &f.dirac {
        if f.rho.is_some() {
            return Err(Error::Input("dirac systems have rho = I; drop the rho field".into()));
        }
        return dirac_system(f.k_min, matrices("b", &d.b, m)?, extension);
    }
    let a = matrices("A", f.a.as_ref().ok_or_else(|| Error::Input("missing A".into()))?, 2 * m)?;
    let b = matrices("B", f.b.as_ref().ok_or_else(|| Error::Input("missing B".into()))?, 2 * m)?;
    let rho = match &f.rho {
        Some(r) => matrices("rho", r, m)?,
        None => vec![linalg::eye(m); a.len()],
    };
    HamiltonianSystem::new(m, f.k_min, a, b, rho, extension)
}

pub fn read_coefficient_file(path: impl AsRef<Path>) -> Result<HamiltonianSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_coefficient_file(&text)
}

/// Serialize with explicit A, B and rho arrays.
pub fn write_coefficient_file(sys: &HamiltonianSystem) -> Result<String> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut rho = Vec::new();
    for k in sys.k_min()..=sys.k_max() {
        a.push(flatten(sys.a(k)?));
        b.push(flatten(sys.b(k)?));
        rho.push(flatten(sys.rho(k)?));
    }
    let out = CoefficientFileOut {
        m: sys.m(),
        k_min: sys.k_min(),
        extension: sys.extension().to_string(),
        a,
        b,
        rho,
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::Input(e.to_string()))
}
