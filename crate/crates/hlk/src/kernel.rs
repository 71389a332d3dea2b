//! Sampled kernels and their file formats.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed_form::raw;
use crate::error::{Error, Result};
use crate::grid::Grid1D;

const MAGIC: &[u8; 4] = b"HLKM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Duhamel,
    CrankNicolson,
    LieTrotter,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "closed_form" | "closed-form" | "exact" => Method::ClosedForm,
            "duhamel" => Method::Duhamel,
            "crank_nicolson" | "crank-nicolson" | "cn" => Method::CrankNicolson,
            "lie_trotter" | "lie-trotter" | "lt" => Method::LieTrotter,
            other => return Err(Error::invalid(format!("unknown method `{other}`"))),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed_form",
            Method::Duhamel => "duhamel",
            Method::CrankNicolson => "crank_nicolson",
            Method::LieTrotter => "lie_trotter",
        })
    }
}

/// `values[(i, j)] = K(x_i, y_j)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub t: f64,
    pub grid: Grid1D,
    pub values: DMatrix<f64>,
    pub method: Method,
    /// Method-specific a posteriori error indicator (0 for closed forms).
    pub error_estimate: f64,
}

impl KernelMatrix {
    pub fn from_matrix(grid: Grid1D, t: f64, values: DMatrix<f64>) -> Self {
        assert_eq!(values.nrows(), grid.len());
        assert_eq!(values.ncols(), grid.len());
        Self { t, grid, values, method: Method::ClosedForm, error_estimate: 0.0 }
    }

    pub fn from_fn(grid: Grid1D, t: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(grid.len(), grid.len(), |i, j| f(grid.x(i), grid.x(j)));
        Self::from_matrix(grid, t, values)
    }

    /// The Dirichlet heat kernel sampled on the grid.
    pub fn closed_form(grid: Grid1D, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("t must be positive, got {t}")));
        }
        Ok(Self::from_fn(grid, t, |x, y| raw::dirichlet(t, x, y)))
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |K - Kᵀ| / max |K|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        let mut d = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                d = d.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            d / m
        }
    }

    pub fn symmetrize(&mut self) {
        let n = self.n();
        for j in 0..n {
            for i in 0..j {
                let a = 0.5 * (self.values[(i, j)] + self.values[(j, i)]);
                self.values[(i, j)] = a;
                self.values[(j, i)] = a;
            }
        }
    }

    /// Rows `x, value, ...` as `x,y,value`, row-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "value"])?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let (x, y) = (self.grid.x(i), self.grid.x(j));
                out.serialize((x, y, self.values[(i, j)]))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Plot data: `x,y,k,env_main` with the main envelope at constant `c`.
    pub fn write_plot_csv<W: Write>(&self, w: W, c: f64) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "k", "env_main"])?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let (x, y) = (self.grid.x(i), self.grid.x(j));
                out.serialize((x, y, self.values[(i, j)], raw::envelope_main(c, self.t, x, y)))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `"HLKM"`, version `u32`, `N u32`, `t f64`, then `N²` row-major `f64`; little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.n()).map_err(|_| Error::invalid("grid too large for the binary format"))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                w.write_all(&self.values[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// The binary format does not carry `L`; the caller supplies it.
    pub fn read_binary<R: Read>(mut r: R, length: f64) -> Result<Self> {
        let mut head = [0u8; 20];
        r.read_exact(&mut head).map_err(|_| Error::Format("truncated header".into()))?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let t = f64::from_le_bytes(head[12..20].try_into().unwrap());
        let grid = Grid1D::new(length, n)?;
        let mut buf = vec![0u8; n * n * 8];
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated body".into()))?;
        let values = DMatrix::from_fn(n, n, |i, j| {
            let k = 8 * (i * n + j);
            f64::from_le_bytes(buf[k..k + 8].try_into().unwrap())
        });
        Ok(Self { t, grid, values, method: Method::ClosedForm, error_estimate: 0.0 })
    }
}

/// Relative sup-norm distance `max |A - B| / max |B|` over entries with
/// `|B| >= floor·max|B|` and both coordinates at most `window`.
pub fn relative_sup_distance(a: &KernelMatrix, b: &KernelMatrix, floor: f64, window: f64) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::invalid("kernels live on different grids"));
    }
    let g = a.grid;
    let m = (0..g.len())
        .filter(|&i| g.x(i) <= window)
        .flat_map(|i| (0..g.len()).filter(move |&j| g.x(j) <= window).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(b.values[(i, j)].abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut d = 0.0f64;
    for j in 0..g.len() {
        if g.x(j) > window {
            break;
        }
        for i in 0..g.len() {
            if g.x(i) > window {
                break;
            }
            let bv = b.values[(i, j)];
            if bv.abs() >= floor * m {
                d = d.max((a.values[(i, j)] - bv).abs());
            }
        }
    }
    Ok(d / m)
}
